//! Beam-splitter delay networks that turn laser pulses into trains of pulse pairs.
//!
//! A stage sends a fraction `ratio` of the incoming energy into a delay arm
//! (the long arm) and the rest straight through (the short arm). Each arm may
//! carry its own sub-chain, which runs before the remaining stages of the
//! parent chain. A flipping stage reverses the pair direction in its long arm.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::schemes::{FlipLoop, SplitParams};
use crate::trap::{KickScheme, LaserParams, SymmetricScheme, TrapParams, COINCIDENCE_TOL};

const MAX_COMPONENTS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitterStage {
    /// Extra path delay of the long arm, seconds.
    pub delay_s: f64,
    /// Energy fraction sent into the long arm.
    pub ratio: f64,
    #[serde(default)]
    pub flip: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long: Option<Vec<SplitterStage>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub short: Option<Vec<SplitterStage>>,
}

impl SplitterStage {
    pub fn new(delay_s: f64, ratio: f64, flip: bool) -> Self {
        Self {
            delay_s,
            ratio,
            flip,
            long: None,
            short: None,
        }
    }

    pub fn with_arms(mut self, long: Vec<SplitterStage>, short: Vec<SplitterStage>) -> Self {
        self.long = (!long.is_empty()).then_some(long);
        self.short = (!short.is_empty()).then_some(short);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.delay_s.is_finite() && self.delay_s >= 0.0) {
            return Err(GateError::Domain(format!("stage delay must be non-negative, got {}", self.delay_s)));
        }
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(GateError::Domain(format!("split ratio must lie in [0, 1], got {}", self.ratio)));
        }
        for s in self.long.iter().chain(&self.short).flatten() {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitterNetwork {
    pub stages: Vec<SplitterStage>,
    /// Energy delivered per unit reaching the ions (≥ 1).
    #[serde(default = "unit_overhead")]
    pub overhead: f64,
    /// Start with the reversed pair direction.
    #[serde(default)]
    pub reversed: bool,
}

fn unit_overhead() -> f64 {
    1.0
}

impl SplitterNetwork {
    pub fn new(stages: Vec<SplitterStage>, overhead: f64) -> Result<Self> {
        let net = Self {
            stages,
            overhead,
            reversed: false,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.overhead.is_finite() && self.overhead >= 1.0) {
            return Err(GateError::Domain(format!("overhead must be at least 1, got {}", self.overhead)));
        }
        self.stages.iter().try_for_each(SplitterStage::validate)
    }

    /// Number of stages along the deepest path.
    pub fn depth(&self) -> usize {
        fn depth(chain: &[SplitterStage]) -> usize {
            match chain.split_first() {
                None => 0,
                Some((s, rest)) => {
                    let tail = depth(rest);
                    let arm = |a: &Option<Vec<SplitterStage>>| a.as_deref().map_or(0, depth);
                    1 + arm(&s.long).max(arm(&s.short)) + tail
                }
            }
        }
        depth(&self.stages)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainEntry {
    /// Arrival time at the ions, seconds after the first laser pulse.
    pub time_s: f64,
    pub direction: i8,
    /// Energy fraction of one laser pulse reaching the ions in this slot.
    pub energy_fraction: f64,
    /// Pulse area carried by the pair slot when the laser emits `max_area`.
    pub area: f64,
    /// Index of the laser pulse this slot came from.
    pub source_pulse: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    pub entries: Vec<TrainEntry>,
}

impl PulseTrain {
    pub fn total_energy(&self) -> f64 {
        self.entries.iter().map(|e| e.energy_fraction).sum()
    }
}

#[derive(Clone, Copy)]
struct Component {
    source: usize,
    time: f64,
    energy: f64,
    direction: i8,
}

fn propagate(chain: &[SplitterStage], c: Component, out: &mut Vec<Component>) -> Result<()> {
    let Some((stage, rest)) = chain.split_first() else {
        if c.energy > 0.0 {
            if out.len() >= MAX_COMPONENTS {
                return Err(GateError::Domain("network produces too many components".into()));
            }
            out.push(c);
        }
        return Ok(());
    };
    if c.energy <= 0.0 {
        return Ok(());
    }
    let long = Component {
        time: c.time + stage.delay_s,
        energy: c.energy * stage.ratio,
        direction: if stage.flip { -c.direction } else { c.direction },
        ..c
    };
    let short = Component {
        energy: c.energy * (1.0 - stage.ratio),
        ..c
    };
    for (arm, comp) in [(&stage.short, short), (&stage.long, long)] {
        match arm {
            Some(sub) => {
                let mut mid = Vec::new();
                propagate(sub, comp, &mut mid)?;
                for m in mid {
                    propagate(rest, m, out)?;
                }
            }
            None => propagate(rest, comp, out)?,
        }
    }
    Ok(())
}

/// Traces `n_pulses` laser pulses, spaced by the laser period, through the network.
pub fn compile(network: &SplitterNetwork, laser: &LaserParams, n_pulses: usize) -> Result<PulseTrain> {
    network.validate()?;
    if n_pulses == 0 {
        return Err(GateError::Domain("at least one laser pulse is needed".into()));
    }
    let mut comps = Vec::new();
    let start = if network.reversed { -1 } else { 1 };
    for k in 0..n_pulses {
        let c = Component {
            source: k,
            time: k as f64 * laser.period(),
            energy: 1.0 / network.overhead,
            direction: start,
        };
        propagate(&network.stages, c, &mut comps)?;
    }
    comps.sort_by(|a, b| a.time.total_cmp(&b.time));
    let entries = comps
        .into_iter()
        .map(|c| TrainEntry {
            time_s: c.time,
            direction: c.direction,
            energy_fraction: c.energy,
            area: laser.max_area() * c.energy.sqrt(),
            source_pulse: c.source,
        })
        .collect();
    Ok(PulseTrain { entries })
}

/// Converts a train into kicks, one unit per slot, with the first arrival at `t = 0`.
pub fn train_to_scheme(train: &PulseTrain, params: &TrapParams) -> Result<KickScheme> {
    let t0 = train
        .entries
        .first()
        .ok_or_else(|| GateError::Invariant("empty pulse train".into()))?
        .time_s;
    KickScheme::from_unsorted(
        train
            .entries
            .iter()
            .map(|e| (params.to_trap_periods(e.time_s - t0), i64::from(e.direction))),
        COINCIDENCE_TOL,
    )
}

/// Laser pulse area needed to drive `n_pairs` pairs of π pulses through a network.
pub fn required_area(n_pairs: u64, overhead: f64) -> f64 {
    PI * (2.0 * n_pairs as f64 * overhead).sqrt()
}

pub fn max_pairs_for_area(area: f64, overhead: f64) -> u64 {
    (area * area / (2.0 * PI * PI * overhead) + 1e-9).floor() as u64
}

/// Zero-delay splits dividing one component into `m` equal parts.
fn multiplicity_chain(m: u64) -> Vec<SplitterStage> {
    if m <= 1 {
        return Vec::new();
    }
    let half = m / 2;
    vec![SplitterStage::new(0.0, half as f64 / m as f64, false)
        .with_arms(multiplicity_chain(half), multiplicity_chain(m - half))]
}

/// Network realizing a direct or alternating split with the given loop delays (trap periods).
pub fn split_network(
    split: &SplitParams,
    alternating: bool,
    delays: &[f64],
    params: &TrapParams,
    overhead: f64,
) -> Result<SplitterNetwork> {
    if delays.len() != split.loops {
        return Err(GateError::Domain(format!("expected {} delays, got {}", split.loops, delays.len())));
    }
    let flip = match (alternating, split.flip) {
        (false, _) | (true, FlipLoop::None) => None,
        (true, FlipLoop::Last) => Some(split.loops - 1),
        (true, FlipLoop::Index(i)) => Some(i),
    };
    let stages = (0..split.grouping)
        .map(|_| SplitterStage::new(0.0, 0.5, false))
        .chain(
            delays
                .iter()
                .enumerate()
                .map(|(j, &d)| SplitterStage::new(params.to_seconds(d), 0.5, flip == Some(j))),
        )
        .collect();
    SplitterNetwork::new(stages, overhead)
}

/// Tree network realizing a symmetric `(a, b, c)` scheme.
///
/// The first splitter separates the outer `a` pairs from the inner ones; the
/// second separates `b` from `c`. Each group is then divided into equal
/// slots and closed by a flipping loop of twice its half-time.
pub fn symmetric_network(sym: &SymmetricScheme, params: &TrapParams, overhead: f64) -> Result<SplitterNetwork> {
    sym.validate()?;
    let [a, b, c] = sym.abc.map(|v| u64::from(v) * u64::from(sym.n));
    let [t1, t2, t3] = sym.tau.map(|t| params.to_seconds(t));
    let closing = |m: u64, t: f64| {
        let mut chain = multiplicity_chain(m);
        chain.push(SplitterStage::new(2.0 * t, 0.5, true));
        chain
    };
    let inner = SplitterStage::new(t2 - t3, c as f64 / (b + c) as f64, true).with_arms(closing(c, t3), closing(b, t2));
    let outer = SplitterStage::new(t1 - t2, (b + c) as f64 / (a + b + c) as f64, true)
        .with_arms(vec![inner], closing(a, t1));
    let mut net = SplitterNetwork::new(vec![outer], overhead)?;
    net.reversed = sym.negate;
    Ok(net)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizabilityReport {
    pub realizable: bool,
    pub n_pairs: u64,
    pub required_area: f64,
    pub available_area: f64,
    pub max_pairs: u64,
    /// Largest relative deviation of a slot's energy from the mean slot energy.
    pub energy_imbalance: f64,
    /// Largest arrival-time mismatch against the target, trap periods.
    pub timing_mismatch: f64,
    pub matches_target: bool,
    pub issues: Vec<String>,
}

/// Checks that a network driven by `n_pulses` laser pulses reproduces `target`
/// (up to a global time shift) with equal-area π pulses inside the laser's area budget.
pub fn check_realizability(
    network: &SplitterNetwork,
    laser: &LaserParams,
    params: &TrapParams,
    n_pulses: usize,
    target: &KickScheme,
    tol: f64,
) -> Result<RealizabilityReport> {
    let train = compile(network, laser, n_pulses)?;
    let compiled = train_to_scheme(&train, params)?;
    let n_pairs = train.entries.len() as u64;
    let mut issues = Vec::new();

    let mean = train.total_energy() / n_pairs as f64;
    let energy_imbalance = train
        .entries
        .iter()
        .map(|e| (e.energy_fraction / mean - 1.0).abs())
        .fold(0.0, f64::max);
    if energy_imbalance > tol {
        issues.push(format!("slot energies differ by up to {:.3e} of the mean", energy_imbalance));
    }

    let need = required_area(n_pairs, network.overhead);
    if need > laser.max_area() * (1.0 + 1e-12) {
        issues.push(format!(
            "{n_pairs} pairs need pulse area {:.4}π, laser provides {:.4}π",
            need / PI,
            laser.max_area() / PI
        ));
    }

    for w in train.entries.windows(2) {
        let gap = w[1].time_s - w[0].time_s;
        if gap > 0.0 && gap < laser.pulse_duration() && params.to_trap_periods(gap) > COINCIDENCE_TOL {
            issues.push(format!("pulses {:.3e} s apart overlap", gap));
            break;
        }
    }

    let shift = target.first_time();
    let same_shape = compiled.len() == target.len()
        && compiled.groups().iter().zip(target.groups()).all(|(g, h)| g.z == h.z);
    let timing_mismatch = if compiled.len() == target.len() {
        compiled
            .groups()
            .iter()
            .zip(target.groups())
            .map(|(g, h)| (g.t - (h.t - shift)).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let matches_target = same_shape && timing_mismatch <= tol;
    if !matches_target {
        issues.push(format!(
            "compiled train ({} groups) does not match target ({} groups), timing mismatch {:.3e}",
            compiled.len(),
            target.len(),
            timing_mismatch
        ));
    }

    Ok(RealizabilityReport {
        realizable: issues.is_empty(),
        n_pairs,
        required_area: need,
        available_area: laser.max_area(),
        max_pairs: max_pairs_for_area(laser.max_area(), network.overhead),
        energy_imbalance,
        timing_mismatch,
        matches_target,
        issues,
    })
}

/// Area of each π pulse in a slot: the slot's two pulses share its energy.
pub fn pulse_area_per_slot(entry: &TrainEntry) -> f64 {
    entry.area / SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::SchemeFamily;
    use approx::assert_abs_diff_eq;

    #[test]
    fn area_budget() {
        assert_eq!(max_pairs_for_area(100.0 * PI, 2.0), 2500);
        assert_abs_diff_eq!(required_area(2500, 2.0), 100.0 * PI, epsilon = 1e-9);
        assert_eq!(max_pairs_for_area(required_area(320, 1.0), 1.0), 320);
    }

    #[test]
    fn nine_equal_stages() {
        let stages = (0..9).map(|j| SplitterStage::new(1e-9 * f64::from(1 << j), 0.5, false)).collect();
        let net = SplitterNetwork::new(stages, 1.0).unwrap();
        let train = compile(&net, &LaserParams::default(), 1).unwrap();
        assert_eq!(train.entries.len(), 512);
        assert_abs_diff_eq!(train.total_energy(), 1.0, epsilon = 1e-12);
        assert_eq!(net.depth(), 9);
    }

    #[test]
    fn flip_reverses_long_arm() {
        let net = SplitterNetwork::new(vec![SplitterStage::new(1e-8, 0.5, true)], 1.0).unwrap();
        let train = compile(&net, &LaserParams::default(), 1).unwrap();
        let dirs: Vec<i8> = train.entries.iter().map(|e| e.direction).collect();
        assert_eq!(dirs, vec![1, -1]);
    }

    #[test]
    fn split_network_matches_family() {
        let p = TrapParams::default();
        let laser = LaserParams::default();
        let d = [0.58, 0.5, 0.29];
        for (alt, fam) in [(false, SchemeFamily::direct(3, 2)), (true, SchemeFamily::alternating(3, 2, 1))] {
            let (SchemeFamily::DirectSplit(sp) | SchemeFamily::AlternatingSplit(sp)) = &fam else {
                unreachable!()
            };
            let target = fam.generate(&d, &p).unwrap();
            let net = split_network(sp, alt, &d, &p, 1.0).unwrap();
            let rep = check_realizability(&net, &laser, &p, 2, &target, 1e-9).unwrap();
            assert!(rep.realizable, "{:?}", rep.issues);
            assert_eq!(rep.n_pairs, fam.n_pairs());
        }
    }

    #[test]
    fn symmetric_tree_realizes_scheme() {
        let p = TrapParams::default();
        let laser = LaserParams::default();
        for sym in [
            SymmetricScheme::new([1, 2, 2], 3, [0.35, 0.23, 0.1], false).unwrap(),
            SymmetricScheme::gzc(2, [0.4, 0.3, 0.1]).unwrap(),
        ] {
            let target = sym.expand().unwrap();
            let net = symmetric_network(&sym, &p, 2.0).unwrap();
            let rep = check_realizability(&net, &laser, &p, 1, &target, 1e-9).unwrap();
            assert!(rep.realizable, "{:?}", rep.issues);
            assert_eq!(rep.n_pairs, sym.n_pairs());
        }
    }

    #[test]
    fn over_budget_is_reported() {
        let p = TrapParams::default();
        let laser = LaserParams::default().with_max_area(10.0 * PI).unwrap();
        let sym = SymmetricScheme::new([1, 2, 2], 8, [0.35, 0.23, 0.1], false).unwrap();
        let net = symmetric_network(&sym, &p, 1.0).unwrap();
        let rep = check_realizability(&net, &laser, &p, 1, &sym.expand().unwrap(), 1e-9).unwrap();
        assert!(!rep.realizable);
        assert!(rep.matches_target);
        assert_eq!(rep.max_pairs, 50);
    }

    #[test]
    fn bad_stage_rejected() {
        assert!(SplitterNetwork::new(vec![SplitterStage::new(-1.0, 0.5, false)], 1.0).is_err());
        assert!(SplitterNetwork::new(vec![SplitterStage::new(1.0, 1.5, false)], 1.0).is_err());
        assert!(SplitterNetwork::new(vec![], 0.5).is_err());
    }

    #[test]
    fn slot_area_for_balanced_network() {
        let n = 16u64;
        let stages = (0..4).map(|j| SplitterStage::new(1e-9 * f64::from(1 << j), 0.5, false)).collect();
        let net = SplitterNetwork::new(stages, 1.0).unwrap();
        let laser = LaserParams::default().with_max_area(required_area(n, 1.0)).unwrap();
        let train = compile(&net, &laser, 1).unwrap();
        for e in &train.entries {
            assert_abs_diff_eq!(pulse_area_per_slot(e), PI, epsilon = 1e-12);
        }
    }
}
