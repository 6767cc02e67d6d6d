//! Systematic-error sweeps: optical delay placement, pulse area and beam angle,
//! each with a threshold at a fixed error budget.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{condition_error, motional_error};
use crate::error::{GateError, Result};
use crate::optics::{compile, train_to_scheme, SplitterNetwork, SplitterStage};
use crate::oracle::{area_error_fidelity, evolve_scheme, process_fidelity, OracleConfig};
use crate::trap::{KickScheme, LaserParams, TrapParams};

pub const DEFAULT_BUDGET: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Timing,
    Area,
    Angle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub low: f64,
    pub high: f64,
    pub steps: usize,
    #[serde(default = "default_budget")]
    pub threshold: f64,
}

fn default_budget() -> f64 {
    DEFAULT_BUDGET
}

impl SweepSpec {
    pub fn new(kind: SweepKind, low: f64, high: f64, steps: usize) -> Result<Self> {
        let s = Self {
            kind,
            low,
            high,
            steps,
            threshold: DEFAULT_BUDGET,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low < self.high) {
            return Err(GateError::Domain(format!("sweep range needs low < high, got ({}, {})", self.low, self.high)));
        }
        if self.steps < 3 {
            return Err(GateError::Domain(format!("sweep needs at least 3 steps, got {}", self.steps)));
        }
        if !(self.threshold > 0.0) {
            return Err(GateError::Domain("error budget must be positive".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.steps - 1;
        (0..=n)
            .map(|k| self.low + (self.high - self.low) * k as f64 / n as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    /// `E` for timing and angle sweeps, `1 − F_W` for area sweeps.
    pub error: f64,
    /// `1 − F_P`, area sweeps only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process_infidelity: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<AngleModel>,
    pub budget: f64,
    pub baseline: f64,
    pub rows: Vec<SweepRow>,
    /// Largest magnitude on the positive side with error within budget; `None`
    /// if the budget is not crossed inside the range.
    pub threshold: Option<f64>,
    /// Index of the first row where the error decreases moving away from zero.
    pub first_non_monotone: Option<usize>,
}

impl SweepResult {
    pub fn monotone(&self) -> bool {
        self.first_non_monotone.is_none()
    }
}

fn first_non_monotone(rows: &[SweepRow]) -> Option<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].parameter.total_cmp(&rows[b].parameter));
    let pos: Vec<usize> = order.iter().copied().filter(|&i| rows[i].parameter >= 0.0).collect();
    let neg: Vec<usize> = order.iter().rev().copied().filter(|&i| rows[i].parameter <= 0.0).collect();
    [pos, neg]
        .into_iter()
        .filter_map(|side| {
            side.windows(2)
                .find(|w| rows[w[1]].error < rows[w[0]].error * (1.0 - 1e-9) - 1e-15)
                .map(|w| w[1])
        })
        .min()
}

/// Bisects the budget crossing on the positive side of the sweep to 1% relative accuracy.
fn find_threshold<F>(rows: &[SweepRow], budget: f64, f: F) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut side: Vec<&SweepRow> = rows.iter().filter(|r| r.parameter > 0.0).collect();
    side.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    let Some(k) = side.iter().position(|r| r.error > budget) else {
        return Ok(None);
    };
    let mut lo = if k == 0 { 0.0 } else { side[k - 1].parameter };
    let mut hi = side[k].parameter;
    while hi - lo > 0.01 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)? <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

fn shift_stages(stages: &[SplitterStage], delta: f64) -> Vec<SplitterStage> {
    stages
        .iter()
        .map(|s| SplitterStage {
            delay_s: s.delay_s + delta,
            ratio: s.ratio,
            flip: s.flip,
            long: s.long.as_ref().map(|c| shift_stages(c, delta)),
            short: s.short.as_ref().map(|c| shift_stages(c, delta)),
        })
        .collect()
}

/// Adds `delta` seconds to every delay element, including zero-delay splitters.
pub fn shift_network(network: &SplitterNetwork, delta: f64) -> SplitterNetwork {
    SplitterNetwork {
        stages: shift_stages(&network.stages, delta),
        ..network.clone()
    }
}

/// `E` of the scheme a network produces after a common delay shift of `delta` seconds.
pub fn timing_error(
    network: &SplitterNetwork,
    laser: &LaserParams,
    params: &TrapParams,
    n_pulses: usize,
    delta: f64,
) -> Result<f64> {
    let shifted = shift_network(network, delta);
    if shifted.validate().is_err() {
        return Err(GateError::Domain(format!("shift {delta:e} s makes a delay negative")));
    }
    let scheme = train_to_scheme(&compile(&shifted, laser, n_pulses)?, params)?;
    Ok(condition_error(&scheme, params).e_total)
}

/// Sweeps a common shift `δ` (seconds) of every optical delay element.
pub fn timing_sweep(
    network: &SplitterNetwork,
    laser: &LaserParams,
    params: &TrapParams,
    n_pulses: usize,
    spec: &SweepSpec,
) -> Result<SweepResult> {
    spec.validate()?;
    let baseline = timing_error(network, laser, params, n_pulses, 0.0)?;
    if baseline > spec.threshold {
        return Err(GateError::Infeasible(format!(
            "unshifted network already has E = {baseline:.3e} above the budget"
        )));
    }
    let f = |d: f64| timing_error(network, laser, params, n_pulses, d);
    sweep(SweepKind::Timing, None, spec, baseline, f)
}

fn sweep<F>(kind: SweepKind, model: Option<AngleModel>, spec: &SweepSpec, baseline: f64, f: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let rows = spec
        .values()
        .par_iter()
        .map(|&x| {
            let e = f(x)?;
            Ok(SweepRow {
                parameter: x,
                error: e,
                process_infidelity: None,
                pass: e <= spec.threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let threshold = find_threshold(&rows, spec.threshold, &f)?;
    Ok(SweepResult {
        kind,
        model,
        budget: spec.threshold,
        baseline,
        first_non_monotone: first_non_monotone(&rows),
        rows,
        threshold,
    })
}

/// Sweeps the pulse-area error `ε` with the oracle: `1 − F_W` against the same scheme
/// with exact π pulses, and `1 − F_P` against the phase gate.
pub fn area_sweep(
    scheme: &KickScheme,
    spec: &SweepSpec,
    config: &OracleConfig,
    params: &TrapParams,
) -> Result<SweepResult> {
    spec.validate()?;
    let worst = |e: f64| Ok(1.0 - area_error_fidelity(scheme, e, config, params)?.fidelity);
    let rows = spec
        .values()
        .iter()
        .map(|&e| {
            let err = worst(e)?;
            let cfg = config.with_epsilon(e);
            let fp = process_fidelity(&evolve_scheme(scheme, &cfg, params)?, &cfg)?;
            Ok(SweepRow {
                parameter: e,
                error: err,
                process_infidelity: Some(1.0 - fp),
                pass: err <= spec.threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let threshold = find_threshold(&rows, spec.threshold, worst)?;
    Ok(SweepResult {
        kind: SweepKind::Area,
        model: None,
        budget: spec.threshold,
        baseline: 0.0,
        first_non_monotone: first_non_monotone(&rows),
        rows,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleModel {
    /// Axial coupling scaled by the beam projection plus an unclosed transverse spectator mode.
    TransverseAccumulation,
    /// Axial coupling scaled by the beam projection only.
    AxialProjection,
}

impl fmt::Display for AngleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AngleModel::TransverseAccumulation => "transverse_accumulation",
            AngleModel::AxialProjection => "axial_projection",
        })
    }
}

impl FromStr for AngleModel {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transverse_accumulation" => Ok(AngleModel::TransverseAccumulation),
            "axial_projection" => Ok(AngleModel::AxialProjection),
            other => Err(GateError::Domain(format!("unknown angle model '{other}'"))),
        }
    }
}

/// Error with beam tilts `phi_a`, `phi_b` (radians) for the two pulse directions.
///
/// `eta_t` is the transverse Lamb-Dicke parameter of the spectator mode.
pub fn angle_error(
    scheme: &KickScheme,
    params: &TrapParams,
    phi_a: f64,
    phi_b: f64,
    model: AngleModel,
    eta_t: f64,
) -> Result<f64> {
    let projection = 0.5 * (phi_a.cos() + phi_b.cos());
    let axial = params.with_eta(params.eta() * projection)?;
    let e_axial = condition_error(scheme, &axial).e_total;
    match model {
        AngleModel::AxialProjection => Ok(e_axial),
        AngleModel::TransverseAccumulation => {
            let pairs: f64 = scheme.groups().iter().map(|g| g.z.unsigned_abs() as f64).sum();
            let residual = eta_t * pairs * 0.5 * (phi_a.sin() + phi_b.sin());
            let ct = (-0.5 * residual * residual).exp();
            Ok(e_axial + motional_error(ct, 1.0))
        }
    }
}

/// Sweeps a common tilt `φ_A = φ_B = φ` (radians).
pub fn angle_sweep(
    scheme: &KickScheme,
    params: &TrapParams,
    spec: &SweepSpec,
    model: AngleModel,
    eta_t: f64,
) -> Result<SweepResult> {
    spec.validate()?;
    let f = |phi: f64| angle_error(scheme, params, phi, phi, model, eta_t);
    sweep(SweepKind::Angle, Some(model), spec, f(0.0)?, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::symmetric_network;
    use crate::optimizer::refine_symmetric_root;
    use crate::schemes::SchemeFamily;
    use crate::trap::SymmetricScheme;
    use approx::assert_abs_diff_eq;

    fn root(n: u32) -> (SymmetricScheme, KickScheme) {
        let p = TrapParams::default();
        let fam = SchemeFamily::symmetric([1, 2, 2], n);
        let guess = [0.35, 0.23, 0.1].map(|t| t * (2.0 / f64::from(n)).powf(2.0 / 3.0));
        let x = refine_symmetric_root(&fam, &guess, &p).unwrap();
        let sym = SymmetricScheme::new([1, 2, 2], n, [x[0], x[1], x[2]], false).unwrap();
        let s = sym.expand().unwrap();
        (sym, s)
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(SweepKind::Timing, 1.0, 0.0, 5).is_err());
        assert!(SweepSpec::new(SweepKind::Timing, 0.0, 1.0, 2).is_err());
        assert_eq!(SweepSpec::new(SweepKind::Angle, -1.0, 1.0, 5).unwrap().values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn zero_shift_recovers_baseline() {
        let p = TrapParams::default();
        let (sym, s) = root(2);
        let net = symmetric_network(&sym, &p, 1.0).unwrap();
        let e0 = timing_error(&net, &LaserParams::default(), &p, 1, 0.0).unwrap();
        assert_abs_diff_eq!(e0, condition_error(&s, &p).e_total, epsilon = 1e-12);
    }

    #[test]
    fn timing_threshold_is_bracketed() {
        let p = TrapParams::default();
        let laser = LaserParams::default();
        let (sym, _) = root(2);
        let net = symmetric_network(&sym, &p, 1.0).unwrap();
        let spec = SweepSpec::new(SweepKind::Timing, 0.0, 400e-12, 9).unwrap();
        let r = timing_sweep(&net, &laser, &p, 1, &spec).unwrap();
        let th = r.threshold.unwrap();
        assert!(timing_error(&net, &laser, &p, 1, th).unwrap() <= 1e-4);
        assert!(timing_error(&net, &laser, &p, 1, th * 1.02).unwrap() > 1e-4);
        assert!(r.monotone());
    }

    #[test]
    fn angle_models() {
        let p = TrapParams::default();
        let (_, s) = root(2);
        let base = condition_error(&s, &p).e_total;
        for m in [AngleModel::TransverseAccumulation, AngleModel::AxialProjection] {
            assert_abs_diff_eq!(angle_error(&s, &p, 0.0, 0.0, m, 0.2).unwrap(), base, epsilon = 1e-15);
        }
        let spec = SweepSpec::new(SweepKind::Angle, 0.0, 0.02, 11).unwrap();
        let r = angle_sweep(&s, &p, &spec, AngleModel::TransverseAccumulation, 0.2).unwrap();
        let th = r.threshold.unwrap();
        assert!((2e-3..15e-3).contains(&th), "{th}");
        let ax = angle_sweep(&s, &p, &spec, AngleModel::AxialProjection, 0.2).unwrap();
        assert!(ax.threshold.is_none());
        assert!("sideways".parse::<AngleModel>().is_err());
    }

    #[test]
    fn monotone_flag() {
        let row = |x: f64, e: f64| SweepRow {
            parameter: x,
            error: e,
            process_infidelity: None,
            pass: true,
        };
        let rows = vec![row(-1.0, 2.0), row(0.0, 0.0), row(1.0, 1.0), row(2.0, 0.5)];
        assert_eq!(first_non_monotone(&rows), Some(3));
        assert_eq!(first_non_monotone(&rows[..3]), None);
    }
}
