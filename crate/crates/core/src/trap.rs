//! Physical parameters, unit conventions and the kick-scheme data model.
//!
//! Times inside a [`KickScheme`] are measured in centre-of-mass trap periods
//! `T_P = 2π/ν`; a time `t` corresponds to a free-evolution phase `2π·t` for
//! the centre-of-mass mode and `2π·√3·t` for the stretch mode.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};

/// Tolerance (in trap periods) below which two incident times are one group.
pub const COINCIDENCE_TOL: f64 = 1e-9;

/// Trap and ion parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrapParams")]
pub struct TrapParams {
    eta: f64,
    nu: f64,
    nbar: f64,
}

#[derive(Deserialize)]
struct RawTrapParams {
    eta: f64,
    nu: f64,
    #[serde(default = "default_nbar")]
    nbar: f64,
}

fn default_nbar() -> f64 {
    0.1
}

impl TryFrom<RawTrapParams> for TrapParams {
    type Error = GateError;

    fn try_from(raw: RawTrapParams) -> Result<Self> {
        TrapParams::new(raw.eta, raw.nu, raw.nbar)
    }
}

impl Default for TrapParams {
    fn default() -> Self {
        Self {
            eta: 0.2,
            nu: TAU * 3.52e6,
            nbar: 0.1,
        }
    }
}

impl TrapParams {
    pub fn new(eta: f64, nu: f64, nbar: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(GateError::Domain(format!("eta must be positive, got {eta}")));
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(GateError::Domain(format!("nu must be positive, got {nu}")));
        }
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(GateError::Domain(format!("nbar must be non-negative, got {nbar}")));
        }
        Ok(Self { eta, nu, nbar })
    }

    /// Lamb-Dicke parameter.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Centre-of-mass angular trap frequency in rad/s.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Mean thermal phonon number per mode.
    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    /// Centre-of-mass Lamb-Dicke parameter `η/√2`.
    pub fn eta_c(&self) -> f64 {
        self.eta / 2f64.sqrt()
    }

    /// Stretch-mode Lamb-Dicke parameter `η·(4/3)^(1/4)`.
    pub fn eta_r(&self) -> f64 {
        self.eta * (4.0f64 / 3.0).powf(0.25)
    }

    /// Stretch-mode angular frequency `√3·ν`.
    pub fn nu_r(&self) -> f64 {
        3f64.sqrt() * self.nu
    }

    /// Centre-of-mass trap period in seconds.
    pub fn trap_period(&self) -> f64 {
        TAU / self.nu
    }

    pub fn with_eta(self, eta: f64) -> Result<Self> {
        Self::new(eta, self.nu, self.nbar)
    }

    pub fn with_nbar(self, nbar: f64) -> Result<Self> {
        Self::new(self.eta, self.nu, nbar)
    }

    /// Trap periods to seconds.
    pub fn to_seconds(&self, t_trap_periods: f64) -> f64 {
        t_trap_periods * TAU / self.nu
    }

    /// Seconds to trap periods.
    pub fn to_trap_periods(&self, t_seconds: f64) -> f64 {
        t_seconds * self.nu / TAU
    }
}

/// Pulsed laser parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLaserParams")]
pub struct LaserParams {
    rep_rate: f64,
    max_area: f64,
    pulse_duration: f64,
}

#[derive(Deserialize)]
struct RawLaserParams {
    rep_rate: f64,
    max_area: f64,
    #[serde(default)]
    pulse_duration: f64,
}

impl TryFrom<RawLaserParams> for LaserParams {
    type Error = GateError;

    fn try_from(raw: RawLaserParams) -> Result<Self> {
        LaserParams::new(raw.rep_rate, raw.max_area, raw.pulse_duration)
    }
}

impl Default for LaserParams {
    fn default() -> Self {
        Self {
            rep_rate: 3.0e8,
            max_area: 100.0 * PI,
            pulse_duration: 1e-12,
        }
    }
}

impl LaserParams {
    pub fn new(rep_rate: f64, max_area: f64, pulse_duration: f64) -> Result<Self> {
        if !(rep_rate.is_finite() && rep_rate > 0.0) {
            return Err(GateError::Domain(format!("rep_rate must be positive, got {rep_rate}")));
        }
        if !(max_area.is_finite() && max_area > 0.0) {
            return Err(GateError::Domain(format!("max_area must be positive, got {max_area}")));
        }
        if !(pulse_duration.is_finite() && pulse_duration >= 0.0) {
            return Err(GateError::Domain(format!(
                "pulse_duration must be non-negative, got {pulse_duration}"
            )));
        }
        Ok(Self {
            rep_rate,
            max_area,
            pulse_duration,
        })
    }

    /// Emitted-pulse repetition rate in Hz.
    pub fn rep_rate(&self) -> f64 {
        self.rep_rate
    }

    /// Area of each emitted pulse, in radians of Bloch rotation.
    pub fn max_area(&self) -> f64 {
        self.max_area
    }

    pub fn pulse_duration(&self) -> f64 {
        self.pulse_duration
    }

    /// Time between emitted pulses in seconds.
    pub fn period(&self) -> f64 {
        1.0 / self.rep_rate
    }

    pub fn with_max_area(self, max_area: f64) -> Result<Self> {
        Self::new(self.rep_rate, max_area, self.pulse_duration)
    }
}

/// `|z|` simultaneous counter-propagating π-pulse pairs at time `t` (trap periods).
///
/// The sign of `z` is the direction of the first pulse of each pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KickGroup {
    pub z: i64,
    pub t: f64,
}

impl KickGroup {
    pub fn new(z: i64, t: f64) -> Self {
        Self { z, t }
    }
}

/// Time-ordered list of kick groups.
///
/// Invariants: at least one group, every `z ≠ 0`, times finite and strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScheme", into = "RawScheme")]
pub struct KickScheme {
    groups: Vec<KickGroup>,
}

/// On-disk form of a [`KickScheme`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawScheme {
    pub groups: Vec<KickGroup>,
    #[serde(default = "default_units")]
    pub units: String,
}

fn default_units() -> String {
    TRAP_PERIODS.to_string()
}

const TRAP_PERIODS: &str = "trap_periods";

impl TryFrom<RawScheme> for KickScheme {
    type Error = GateError;

    fn try_from(raw: RawScheme) -> Result<Self> {
        if raw.units != TRAP_PERIODS {
            return Err(GateError::Domain(format!(
                "unsupported units '{}', expected '{TRAP_PERIODS}'",
                raw.units
            )));
        }
        KickScheme::new(raw.groups)
    }
}

impl From<KickScheme> for RawScheme {
    fn from(s: KickScheme) -> Self {
        RawScheme {
            groups: s.groups,
            units: default_units(),
        }
    }
}

impl KickScheme {
    pub fn new(groups: Vec<KickGroup>) -> Result<Self> {
        if groups.is_empty() {
            return Err(GateError::Invariant("scheme has no kick groups".into()));
        }
        for (k, g) in groups.iter().enumerate() {
            if g.z == 0 {
                return Err(GateError::Invariant(format!("group {k} has z = 0")));
            }
            if !g.t.is_finite() {
                return Err(GateError::Invariant(format!("group {k} has non-finite time")));
            }
        }
        for (k, w) in groups.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(GateError::Ordering(format!(
                    "times must be strictly increasing: t[{}] = {} >= t[{}] = {}",
                    k,
                    w[0].t,
                    k + 1,
                    w[1].t
                )));
            }
        }
        Ok(Self { groups })
    }

    /// Builds a scheme from unordered `(t, z)` contributions.
    ///
    /// Contributions closer than `tol` to the previous group are merged by summing `z`;
    /// groups whose `z` cancels to zero are dropped.
    pub fn from_unsorted<I>(pulses: I, tol: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, i64)>,
    {
        let mut pulses: Vec<(f64, i64)> = pulses.into_iter().collect();
        if pulses.iter().any(|(t, _)| !t.is_finite()) {
            return Err(GateError::Domain("non-finite pulse time".into()));
        }
        pulses.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<KickGroup> = Vec::with_capacity(pulses.len());
        let mut anchor = f64::NEG_INFINITY;
        for (t, z) in pulses {
            match merged.last_mut() {
                Some(last) if (t - anchor).abs() < tol => last.z += z,
                _ => {
                    anchor = t;
                    merged.push(KickGroup::new(z, t));
                }
            }
        }
        merged.retain(|g| g.z != 0);
        Self::new(merged)
    }

    pub fn groups(&self) -> &[KickGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Total number of pulse pairs `Σ|z_k|`.
    pub fn n_pairs(&self) -> u64 {
        self.groups.iter().map(|g| g.z.unsigned_abs()).sum()
    }

    /// Net signed kick count `Σ z_k`.
    pub fn net_z(&self) -> i64 {
        self.groups.iter().map(|g| g.z).sum()
    }

    pub fn first_time(&self) -> f64 {
        self.groups[0].t
    }

    pub fn last_time(&self) -> f64 {
        self.groups[self.groups.len() - 1].t
    }

    /// Every time moved by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            groups: self
                .groups
                .iter()
                .map(|g| KickGroup::new(g.z, g.t + dt))
                .collect(),
        }
    }

    /// Every `z` negated.
    pub fn negated(&self) -> Self {
        Self {
            groups: self.groups.iter().map(|g| KickGroup::new(-g.z, g.t)).collect(),
        }
    }
}

/// Six-group symmetric scheme `z = (a, −b, c, −c, b, −a)·n` at `t = (−τ1, −τ2, −τ3, τ3, τ2, τ1)`.
///
/// `negate` flips every sign; `(2,3,2)` with `negate = true` is the GZC scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricScheme {
    pub abc: [u32; 3],
    pub n: u32,
    pub tau: [f64; 3],
    #[serde(default)]
    pub negate: bool,
}

impl SymmetricScheme {
    pub fn new(abc: [u32; 3], n: u32, tau: [f64; 3], negate: bool) -> Result<Self> {
        let s = Self { abc, n, tau, negate };
        s.validate()?;
        Ok(s)
    }

    pub fn gzc(n: u32, tau: [f64; 3]) -> Result<Self> {
        Self::new([2, 3, 2], n, tau, true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.abc.iter().any(|&v| v == 0) {
            return Err(GateError::Domain(format!(
                "(a,b,c) must be positive, got {:?}",
                self.abc
            )));
        }
        if self.n == 0 {
            return Err(GateError::Domain("n must be positive".into()));
        }
        let [t1, t2, t3] = self.tau;
        if !(t1.is_finite() && t2.is_finite() && t3.is_finite()) {
            return Err(GateError::Domain("non-finite tau".into()));
        }
        if !(t1 > t2 && t2 > t3 && t3 > 0.0) {
            return Err(GateError::Ordering(format!(
                "require tau1 > tau2 > tau3 > 0, got ({t1}, {t2}, {t3})"
            )));
        }
        Ok(())
    }

    /// Total pulse pairs `2n(a+b+c)`.
    pub fn n_pairs(&self) -> u64 {
        let [a, b, c] = self.abc;
        2 * u64::from(self.n) * u64::from(a + b + c)
    }

    /// Expands into the explicit six-group scheme.
    pub fn expand(&self) -> Result<KickScheme> {
        self.validate()?;
        KickScheme::new(self.raw_groups())
    }

    /// The six groups in placement order, without checking that times increase.
    pub(crate) fn raw_groups(&self) -> Vec<KickGroup> {
        let [a, b, c] = self.abc.map(|v| i64::from(v) * i64::from(self.n));
        let s = if self.negate { -1 } else { 1 };
        let [t1, t2, t3] = self.tau;
        vec![
            KickGroup::new(s * a, -t1),
            KickGroup::new(-s * b, -t2),
            KickGroup::new(s * c, -t3),
            KickGroup::new(-s * c, t3),
            KickGroup::new(s * b, t2),
            KickGroup::new(-s * a, t1),
        ]
    }
}

/// Either scheme file layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemeDocument {
    Symmetric {
        abc: [u32; 3],
        n: u32,
        tau: [f64; 3],
        #[serde(default)]
        negate: bool,
    },
    Explicit(RawScheme),
}

impl SchemeDocument {
    /// Validates and expands the document into a [`KickScheme`].
    pub fn into_scheme(self) -> Result<KickScheme> {
        match self {
            SchemeDocument::Symmetric { abc, n, tau, negate } => {
                SymmetricScheme::new(abc, n, tau, negate)?.expand()
            }
            SchemeDocument::Explicit(raw) => KickScheme::try_from(raw),
        }
    }
}

impl From<&KickScheme> for SchemeDocument {
    fn from(s: &KickScheme) -> Self {
        SchemeDocument::Explicit(RawScheme::from(s.clone()))
    }
}

impl From<&SymmetricScheme> for SchemeDocument {
    fn from(s: &SymmetricScheme) -> Self {
        SchemeDocument::Symmetric {
            abc: s.abc,
            n: s.n,
            tau: s.tau,
            negate: s.negate,
        }
    }
}
