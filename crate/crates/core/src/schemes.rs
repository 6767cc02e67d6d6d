//! Scheme families parameterized by the free delays an optimizer searches over.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::trap::{KickGroup, KickScheme, SymmetricScheme, TrapParams, COINCIDENCE_TOL};

/// Which delay loop reverses the pair direction in an alternating split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FlipLoop {
    /// The last free loop.
    #[default]
    Last,
    Index(usize),
    /// No loop flips; the output equals the direct split.
    None,
}

/// Beam-splitter loop layout shared by the direct and alternating families.
///
/// Each emitted pulse passes `grouping` zero-delay doubling loops and `loops`
/// variable-delay loops, giving `2^(grouping+loops)` incident pairs per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    pub loops: usize,
    #[serde(default = "one")]
    pub laser_pulses: usize,
    #[serde(default)]
    pub grouping: u32,
    #[serde(default = "default_rep_rate")]
    pub rep_rate: f64,
    #[serde(default)]
    pub flip: FlipLoop,
}

fn one() -> usize {
    1
}

fn default_rep_rate() -> f64 {
    3.0e8
}

impl SplitParams {
    pub fn new(loops: usize, laser_pulses: usize, grouping: u32, rep_rate: f64) -> Self {
        Self {
            loops,
            laser_pulses,
            grouping,
            rep_rate,
            flip: FlipLoop::Last,
        }
    }

    pub fn pairs_per_pulse(&self) -> u64 {
        1u64 << (self.grouping as usize + self.loops)
    }

    /// Laser pulse spacing in trap periods.
    pub fn pulse_spacing(&self, params: &TrapParams) -> f64 {
        params.nu() / (TAU * self.rep_rate)
    }

    fn validate(&self) -> Result<()> {
        if self.loops == 0 {
            return Err(GateError::Domain("split families need at least one loop".into()));
        }
        if self.laser_pulses == 0 {
            return Err(GateError::Domain("laser_pulses must be at least 1".into()));
        }
        if !(self.rep_rate.is_finite() && self.rep_rate > 0.0) {
            return Err(GateError::Domain(format!("rep_rate must be positive, got {}", self.rep_rate)));
        }
        if self.grouping as usize + self.loops > 24 {
            return Err(GateError::Domain("too many splitting loops".into()));
        }
        if let FlipLoop::Index(i) = self.flip {
            if i >= self.loops {
                return Err(GateError::Domain(format!(
                    "flip loop {i} out of range for {} loops",
                    self.loops
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SchemeFamily {
    Gzc {
        n: u32,
    },
    SymmetricAbc {
        abc: [u32; 3],
        n: u32,
        #[serde(default)]
        negate: bool,
    },
    DirectSplit(SplitParams),
    AlternatingSplit(SplitParams),
    /// Unit kicks `z = (+1, −1, +1, …)` at `t = (0, x_1, …, x_d)`.
    FreeTimes {
        d: usize,
    },
}

impl SchemeFamily {
    pub fn gzc(n: u32) -> Self {
        SchemeFamily::Gzc { n }
    }

    pub fn symmetric(abc: [u32; 3], n: u32) -> Self {
        SchemeFamily::SymmetricAbc { abc, n, negate: false }
    }

    pub fn direct(loops: usize, laser_pulses: usize) -> Self {
        SchemeFamily::DirectSplit(SplitParams::new(loops, laser_pulses, 0, default_rep_rate()))
    }

    pub fn alternating(loops: usize, laser_pulses: usize, grouping: u32) -> Self {
        SchemeFamily::AlternatingSplit(SplitParams::new(loops, laser_pulses, grouping, default_rep_rate()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SchemeFamily::Gzc { .. } => "gzc",
            SchemeFamily::SymmetricAbc { .. } => "symmetric_abc",
            SchemeFamily::DirectSplit(_) => "direct_split",
            SchemeFamily::AlternatingSplit(_) => "alternating_split",
            SchemeFamily::FreeTimes { .. } => "free_times",
        }
    }

    /// Number of free delay variables.
    pub fn dimension(&self) -> usize {
        match self {
            SchemeFamily::Gzc { .. } | SchemeFamily::SymmetricAbc { .. } => 3,
            SchemeFamily::DirectSplit(p) | SchemeFamily::AlternatingSplit(p) => p.loops,
            SchemeFamily::FreeTimes { d } => *d,
        }
    }

    /// Nominal incident pulse pairs before any coincidence merging.
    pub fn n_pairs(&self) -> u64 {
        match self {
            SchemeFamily::Gzc { n } => 14 * u64::from(*n),
            SchemeFamily::SymmetricAbc { abc, n, .. } => {
                2 * u64::from(*n) * abc.iter().map(|&v| u64::from(v)).sum::<u64>()
            }
            SchemeFamily::DirectSplit(p) | SchemeFamily::AlternatingSplit(p) => {
                p.laser_pulses as u64 * p.pairs_per_pulse()
            }
            SchemeFamily::FreeTimes { d } => *d as u64 + 1,
        }
    }

    /// The symmetric description for `gzc`/`symmetric_abc` families.
    pub fn symmetric_scheme(&self, delays: &[f64]) -> Result<Option<SymmetricScheme>> {
        let tau = |d: &[f64]| -> Result<[f64; 3]> {
            d.try_into()
                .map_err(|_| GateError::Domain(format!("expected 3 delays, got {}", d.len())))
        };
        match self {
            SchemeFamily::Gzc { n } => Ok(Some(SymmetricScheme::gzc(*n, tau(delays)?)?)),
            SchemeFamily::SymmetricAbc { abc, n, negate } => {
                Ok(Some(SymmetricScheme::new(*abc, *n, tau(delays)?, *negate)?))
            }
            _ => Ok(None),
        }
    }

    /// Builds the kick scheme for a delay vector (trap periods).
    pub fn generate(&self, delays: &[f64], params: &TrapParams) -> Result<KickScheme> {
        if delays.len() != self.dimension() {
            return Err(GateError::Domain(format!(
                "{} family takes {} delays, got {}",
                self.kind(),
                self.dimension(),
                delays.len()
            )));
        }
        if delays.iter().any(|d| !d.is_finite()) {
            return Err(GateError::Domain("non-finite delay".into()));
        }
        match self {
            SchemeFamily::Gzc { .. } | SchemeFamily::SymmetricAbc { .. } => self
                .symmetric_scheme(delays)?
                .expect("symmetric family")
                .expand(),
            SchemeFamily::DirectSplit(p) => split_scheme(p, None, delays, params),
            SchemeFamily::AlternatingSplit(p) => {
                let flip = match p.flip {
                    FlipLoop::Last => Some(p.loops - 1),
                    FlipLoop::Index(i) => Some(i),
                    FlipLoop::None => None,
                };
                split_scheme(p, flip, delays, params)
            }
            SchemeFamily::FreeTimes { .. } => {
                let groups = std::iter::once(0.0)
                    .chain(delays.iter().copied())
                    .enumerate()
                    .map(|(k, t)| KickGroup::new(if k % 2 == 0 { 1 } else { -1 }, t))
                    .collect();
                KickScheme::new(groups)
            }
        }
    }
}

/// Subset sums of the loop delays with the sign each subset carries.
pub(crate) fn loop_offsets(delays: &[f64], flip: Option<usize>) -> Vec<(f64, i64)> {
    let m = delays.len();
    (0..1usize << m)
        .map(|bits| {
            let t: f64 = (0..m).filter(|j| bits >> j & 1 == 1).map(|j| delays[j]).sum();
            let sign = match flip {
                Some(f) if bits >> f & 1 == 1 => -1,
                _ => 1,
            };
            (t, sign)
        })
        .collect()
}

fn split_scheme(p: &SplitParams, flip: Option<usize>, delays: &[f64], params: &TrapParams) -> Result<KickScheme> {
    p.validate()?;
    if let Some(bad) = delays.iter().find(|&&d| d < 0.0) {
        return Err(GateError::Domain(format!("loop delays must be non-negative, got {bad}")));
    }
    let spacing = p.pulse_spacing(params);
    let multiplicity = 1i64 << p.grouping;
    let offsets = loop_offsets(delays, flip);
    let pulses = (0..p.laser_pulses).flat_map(|k| {
        let base = k as f64 * spacing;
        offsets.iter().map(move |&(t, s)| (base + t, s * multiplicity))
    });
    KickScheme::from_unsorted(pulses, COINCIDENCE_TOL).map_err(|e| match e {
        GateError::Invariant(msg) => GateError::Ordering(format!("all pairs cancel after merging: {msg}")),
        other => other,
    })
}

/// A catalogued gate-time benchmark: family, incident pairs and the reported time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownSolution {
    pub label: String,
    pub family: SchemeFamily,
    pub n_pairs: u64,
    /// Trap periods.
    pub gate_time: f64,
}

/// Reported benchmark gate times; delays are left for the optimizer to find.
pub fn enumerate_known_solutions() -> Vec<KnownSolution> {
    let entry = |label: &str, family: SchemeFamily, gate_time: f64| KnownSolution {
        label: label.to_string(),
        n_pairs: family.n_pairs(),
        family,
        gate_time,
    };
    vec![
        entry("direct split, one pulse into 8 pairs", SchemeFamily::direct(3, 1), 1.37),
        entry(
            "alternating split, one pulse into 16 pairs",
            SchemeFamily::alternating(3, 1, 1),
            1.18,
        ),
        entry("(1,2,2) symmetric, n = 8", SchemeFamily::symmetric([1, 2, 2], 8), 0.29),
        entry("(1,2,2) symmetric, n = 32", SchemeFamily::symmetric([1, 2, 2], 32), 0.12),
        entry("free unit-kick times, 320 pairs", SchemeFamily::FreeTimes { d: 319 }, 0.086),
    ]
}
