//! Closed-form control conditions, the error estimate built from them, and the
//! gate-time/fidelity cost function.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::trap::{KickScheme, TrapParams};

/// Everything the closed-form conditions say about a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Accumulated two-qubit phase Θ (radians).
    pub theta: f64,
    /// Centre-of-mass closure residual.
    pub c_c: Complex64,
    /// Stretch closure residual.
    pub c_r: Complex64,
    pub e_motional: f64,
    pub e_phase: f64,
    pub e_total: f64,
    /// Last minus first group time, in trap periods.
    pub gate_time: f64,
}

/// Weights of the cost `J = T_G + A·exp(B·E)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub a: f64,
    pub b: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { a: 10.0, b: 100.0 }
    }
}

impl CostWeights {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(GateError::Domain(format!(
                "cost weights must be positive, got A={a}, B={b}"
            )));
        }
        Ok(Self { a, b })
    }
}

fn phase_kernel(dt: f64) -> f64 {
    let s3 = 3f64.sqrt();
    let x = TAU * dt;
    x.sin() - (s3 * x).sin() / s3
}

/// Two-qubit phase `Θ = 4η² Σ_{m>k} z_m z_k [sin(νδt) − sin(√3νδt)/√3]`.
pub fn phase_theta(scheme: &KickScheme, params: &TrapParams) -> f64 {
    let g = scheme.groups();
    let mut acc = 0.0;
    for m in 1..g.len() {
        let zm = g[m].z as f64;
        for k in 0..m {
            acc += zm * g[k].z as f64 * phase_kernel(g[m].t - g[k].t);
        }
    }
    4.0 * params.eta().powi(2) * acc
}

/// `(C_c, C_r) = (Σ z e^{−iνt}, Σ z e^{−i√3νt})`.
pub fn closure_residuals(scheme: &KickScheme) -> (Complex64, Complex64) {
    let s3 = 3f64.sqrt();
    scheme
        .groups()
        .iter()
        .fold((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)), |(cc, cr), g| {
            let z = g.z as f64;
            (
                cc + z * Complex64::from_polar(1.0, -TAU * g.t),
                cr + z * Complex64::from_polar(1.0, -TAU * s3 * g.t),
            )
        })
}

/// `T_G = t_last − t_first`.
pub fn gate_time(scheme: &KickScheme) -> f64 {
    scheme.last_time() - scheme.first_time()
}

/// Deviation `x = π/4 − Θ`, taken at the representative of Θ mod π/2 nearest π/4.
pub fn phase_deviation(theta: f64) -> f64 {
    (FRAC_PI_4 - theta + FRAC_PI_4).rem_euclid(FRAC_PI_2) - FRAC_PI_4
}

/// Motional error `(6 − C1⁴ − C2⁴ − 4C1C2)/8` from the two overlap factors.
pub fn motional_error(c1: f64, c2: f64) -> f64 {
    ((6.0 - c1.powi(4) - c2.powi(4) - 4.0 * c1 * c2) / 8.0).max(0.0)
}

/// Upper-bound phase error `¾ − ¾cos(2x)`.
pub fn phase_error(theta: f64) -> f64 {
    let x = phase_deviation(theta);
    0.75 - 0.75 * (2.0 * x).cos()
}

/// Full condition report for a scheme.
pub fn condition_error(scheme: &KickScheme, params: &TrapParams) -> ConditionReport {
    let theta = phase_theta(scheme, params);
    let (c_c, c_r) = closure_residuals(scheme);
    report_from_parts(theta, c_c, c_r, gate_time(scheme), params)
}

pub(crate) fn report_from_parts(
    theta: f64,
    c_c: Complex64,
    c_r: Complex64,
    gate_time: f64,
    params: &TrapParams,
) -> ConditionReport {
    let c1 = (-0.5 * (2.0 * params.eta_c() * c_c.norm()).powi(2)).exp();
    let c2 = (-0.5 * (params.eta_r() * c_r.norm()).powi(2)).exp();
    let e_motional = motional_error(c1, c2);
    let e_phase = phase_error(theta);
    ConditionReport {
        theta,
        c_c,
        c_r,
        e_motional,
        e_phase,
        e_total: e_motional + e_phase,
        gate_time,
    }
}

/// `J = T_G + A·exp(B·E)`.
pub fn cost_from(gate_time: f64, error: f64, weights: &CostWeights) -> f64 {
    gate_time + weights.a * (weights.b * error).exp()
}

pub fn cost(scheme: &KickScheme, params: &TrapParams, weights: &CostWeights) -> f64 {
    let r = condition_error(scheme, params);
    cost_from(r.gate_time, r.e_total, weights)
}

/// One axis of a landscape grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        let axis = Self { lo, hi, steps };
        axis.validate()?;
        Ok(axis)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.hi > 0.0) {
            return Err(GateError::Domain(format!(
                "grid bounds must be positive, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.hi < self.lo || self.steps == 0 {
            return Err(GateError::Domain(format!(
                "empty grid axis [{}, {}] with {} steps",
                self.lo, self.hi, self.steps
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.lo + h * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub var1: f64,
    pub var2: Option<f64>,
    #[serde(rename = "logJ")]
    pub log_j: f64,
}

/// Evaluates `ln J` on a 1-D or 2-D grid of free variables.
///
/// `build` maps the free-variable values to a scheme; points it rejects get `NaN`.
/// Rows are ordered with `var2` varying fastest.
pub fn landscape_scan<F>(
    build: F,
    axes: &[GridAxis],
    params: &TrapParams,
    weights: &CostWeights,
) -> Result<Vec<LandscapeRow>>
where
    F: Fn(&[f64]) -> Result<KickScheme> + Sync,
{
    if axes.is_empty() || axes.len() > 2 {
        return Err(GateError::Domain(format!(
            "landscape grids must have 1 or 2 axes, got {}",
            axes.len()
        )));
    }
    for axis in axes {
        axis.validate()?;
    }
    let points: Vec<Vec<f64>> = match axes {
        [a] => a.values().into_iter().map(|v| vec![v]).collect(),
        [a, b] => {
            let bv = b.values();
            a.values()
                .into_iter()
                .flat_map(|x| bv.iter().map(move |&y| vec![x, y]))
                .collect()
        }
        _ => unreachable!(),
    };
    Ok(points
        .par_iter()
        .map(|p| {
            let log_j = match build(p) {
                Ok(s) => cost(&s, params, weights).ln(),
                Err(_) => f64::NAN,
            };
            LandscapeRow {
                var1: p[0],
                var2: p.get(1).copied(),
                log_j,
            }
        })
        .collect())
}
