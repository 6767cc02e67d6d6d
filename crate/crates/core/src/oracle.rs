//! Truncated Hilbert-space simulation of the full gate: two qubits, centre-of-mass
//! and stretch modes each cut at `n_max` Fock states.
//!
//! Motional amplitudes are held in the eigenbasis of the truncated quadrature
//! `X = a + a†`, where momentum kicks `e^{iκX}` are diagonal phases. Free
//! evolution is diagonal in the Fock basis and is applied as a dense rotation.
//! Internal index `2·b₁ + b₂` with `b = 0` for `|0⟩` (`σ_z = +1`).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::optimizer::nelder_mead;
use crate::phase_space::max_excursion;
use crate::trap::{KickScheme, TrapParams};

type C = Complex64;
type CMat = DMatrix<C>;

const I: C = C::new(0.0, 1.0);

/// Grid and refinement controls for the worst-case state search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSearch {
    /// Coherent amplitude radii probed per mode.
    pub radii: Vec<f64>,
    /// Phase angles per nonzero radius.
    pub angles: usize,
    /// Evaluation budget of the local refinement.
    pub refine_steps: usize,
    pub alpha_max: f64,
}

impl Default for StateSearch {
    fn default() -> Self {
        Self {
            radii: vec![0.0, 1.0, 2.0],
            angles: 8,
            refine_steps: 120,
            alpha_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n_max: usize,
    pub nbar: f64,
    /// Added to each pulse's rotation angle `θ = π/2`.
    pub epsilon: f64,
    #[serde(default)]
    pub state_search: StateSearch,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            n_max: 40,
            nbar: 0.1,
            epsilon: 0.0,
            state_search: StateSearch::default(),
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 8 {
            return Err(GateError::Domain(format!("n_max must be at least 8, got {}", self.n_max)));
        }
        if !(self.epsilon.abs() < FRAC_PI_4) {
            return Err(GateError::Domain(format!("epsilon must lie in (-π/4, π/4), got {}", self.epsilon)));
        }
        if !(self.nbar.is_finite() && self.nbar >= 0.0) {
            return Err(GateError::Domain(format!("nbar must be non-negative, got {}", self.nbar)));
        }
        let s = &self.state_search;
        if s.radii.is_empty() || s.radii.iter().any(|r| !(0.0..=s.alpha_max).contains(r)) || s.angles == 0 {
            return Err(GateError::Domain("state search grid must be non-empty within alpha_max".into()));
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }
}

/// Eigen-decomposition of the truncated quadrature `a + a†`.
#[derive(Debug)]
pub struct Basis {
    n: usize,
    /// Eigenvalues of `a + a†`.
    x: Vec<f64>,
    /// Columns are eigenvectors in the Fock basis.
    v: DMatrix<f64>,
}

impl Basis {
    pub fn new(n: usize) -> Self {
        let mut x = DMatrix::<f64>::zeros(n, n);
        for m in 1..n {
            let s = (m as f64).sqrt();
            x[(m - 1, m)] = s;
            x[(m, m - 1)] = s;
        }
        let eig = SymmetricEigen::new(x);
        Self {
            n,
            x: eig.eigenvalues.iter().copied().collect(),
            v: eig.eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `V^T · diag(e^{−iφm}) · V`, the Fock rotation expressed in the quadrature basis.
    fn rotation(&self, phi: f64) -> CMat {
        let n = self.n;
        let d: Vec<C> = (0..n).map(|m| C::from_polar(1.0, -phi * m as f64)).collect();
        let mut out = CMat::zeros(n, n);
        for i in 0..n {
            for k in i..n {
                let s: C = (0..n).map(|m| d[m] * (self.v[(m, i)] * self.v[(m, k)])).sum();
                out[(i, k)] = s;
                out[(k, i)] = s;
            }
        }
        out
    }

    /// Quadrature-basis amplitudes of a Fock-basis vector.
    fn from_fock(&self, fock: &DVector<C>) -> DVector<C> {
        self.v.map(C::from).transpose() * fock
    }

    fn fock(&self, m: usize) -> DVector<C> {
        DVector::from_iterator(self.n, (0..self.n).map(|i| C::from(self.v[(m, i)])))
    }

    /// Normalized truncated coherent state `|α⟩`.
    fn coherent(&self, alpha: C) -> DVector<C> {
        let mut c = DVector::<C>::zeros(self.n);
        let mut term = C::from((-0.5 * alpha.norm_sqr()).exp());
        for m in 0..self.n {
            c[m] = term;
            term *= alpha / ((m + 1) as f64).sqrt();
        }
        let norm = c.norm();
        self.from_fock(&(c / C::from(norm)))
    }
}

/// Joint state: one `n × n` motional block (rows COM, columns stretch) per internal state.
#[derive(Debug, Clone)]
pub struct State {
    comps: [CMat; 4],
    active: [bool; 4],
}

impl State {
    fn zeros(n: usize) -> Self {
        Self {
            comps: std::array::from_fn(|_| CMat::zeros(n, n)),
            active: [false; 4],
        }
    }

    /// `|internal⟩ ⊗ |com⟩ ⊗ |stretch⟩` with motional vectors in the quadrature basis.
    fn product(internal: &[C; 4], com: &DVector<C>, stretch: &DVector<C>) -> Self {
        let n = com.len();
        let mut s = Self::zeros(n);
        let block = com * stretch.transpose();
        for k in 0..4 {
            if internal[k] != C::new(0.0, 0.0) {
                s.comps[k] = &block * internal[k];
                s.active[k] = true;
            }
        }
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.comps.iter().map(|c| c.norm_squared()).sum()
    }

    /// `⟨self|other⟩`.
    fn inner(&self, other: &State) -> C {
        (0..4)
            .filter(|&k| self.active[k] && other.active[k])
            .map(|k| self.comps[k].dotc(&other.comps[k]))
            .sum()
    }
}

#[derive(Debug, Clone)]
enum Op {
    /// One travelling pulse on both ions: direction ±1 and rotation angle.
    Pulse { direction: f64, theta: f64 },
    /// `|z|` ideal pairs with first-pulse direction `sign z`.
    Pairs { z: i64 },
    Free { com: Arc<CMat>, stretch: Arc<CMat> },
}

/// Gate operator stored as an ordered list of factors.
#[derive(Debug, Clone)]
pub struct GateUnitary {
    basis: Arc<Basis>,
    eta_c: f64,
    eta_r: f64,
    ops: Vec<Op>,
    /// Set when the phase-space excursion leaves the guarded region `|α| ≤ √n_max / 4`.
    pub truncation_warning: bool,
}

impl GateUnitary {
    pub fn identity(config: &OracleConfig, params: &TrapParams) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            basis: Arc::new(Basis::new(config.n_max)),
            eta_c: params.eta_c(),
            eta_r: params.eta_r(),
            ops: Vec::new(),
            truncation_warning: false,
        })
    }

    fn with_ops(&self, ops: Vec<Op>) -> Self {
        Self {
            ops,
            truncation_warning: false,
            ..self.clone()
        }
    }

    pub fn n_max(&self) -> usize {
        self.basis.n
    }

    /// Hilbert-space dimension `4·n_max²`.
    pub fn dim(&self) -> usize {
        4 * self.basis.n * self.basis.n
    }

    /// `other` applied after `self`.
    pub fn then(&self, other: &GateUnitary) -> GateUnitary {
        let mut ops = self.ops.clone();
        ops.extend(other.ops.iter().cloned());
        Self {
            ops,
            truncation_warning: self.truncation_warning || other.truncation_warning,
            ..self.clone()
        }
    }

    fn free(&self, dt: f64) -> Op {
        Op::Free {
            com: Arc::new(self.basis.rotation(TAU * dt)),
            stretch: Arc::new(self.basis.rotation(TAU * 3f64.sqrt() * dt)),
        }
    }

    /// `k·x_j` on the quadrature grid for ion `j ∈ {0, 1}`.
    fn kx(&self, ion: usize) -> DMatrix<f64> {
        let x = &self.basis.x;
        let sign = if ion == 0 { 0.5 } else { -0.5 };
        DMatrix::from_fn(self.basis.n, self.basis.n, |i, j| self.eta_c * x[i] + sign * self.eta_r * x[j])
    }

    fn apply_pulse(&self, state: &mut State, direction: f64, theta: f64) {
        let (s, c) = theta.sin_cos();
        for ion in 0..2 {
            let kx = self.kx(ion);
            let up = kx.map(|k| I * -s * C::from_polar(1.0, direction * k));
            let down = up.map(|u| C::new(-u.re, u.im));
            let flip = if ion == 0 { 2 } else { 1 };
            for a in (0..4).filter(|a| a & flip == 0) {
                let b = a | flip;
                if !state.active[a] && !state.active[b] {
                    continue;
                }
                let pa = std::mem::replace(&mut state.comps[a], CMat::zeros(0, 0));
                let pb = std::mem::replace(&mut state.comps[b], CMat::zeros(0, 0));
                // |0⟩ (σ_z = +1) gains e^{+i d kx} when raised from |1⟩.
                state.comps[a] = &pa * C::from(c) + pb.component_mul(&up);
                state.comps[b] = &pb * C::from(c) + pa.component_mul(&down);
                let mixes = s != 0.0;
                let keep = c != 0.0;
                let (aa, ab) = (state.active[a], state.active[b]);
                state.active[a] = (aa && keep) || (ab && mixes);
                state.active[b] = (ab && keep) || (aa && mixes);
                if !state.active[a] {
                    state.comps[a].fill(C::new(0.0, 0.0));
                }
                if !state.active[b] {
                    state.comps[b].fill(C::new(0.0, 0.0));
                }
            }
        }
    }

    fn apply_pairs(&self, state: &mut State, z: i64) {
        let (k1, k2) = (self.kx(0), self.kx(1));
        for a in 0..4 {
            if !state.active[a] {
                continue;
            }
            let s1 = if a & 2 == 0 { 1.0 } else { -1.0 };
            let s2 = if a & 1 == 0 { 1.0 } else { -1.0 };
            let zf = z as f64;
            let phase = k1.zip_map(&k2, |x1, x2| C::from_polar(1.0, -2.0 * zf * (s1 * x1 + s2 * x2)));
            state.comps[a].component_mul_assign(&phase);
        }
    }

    pub fn apply(&self, state: &mut State) {
        for op in &self.ops {
            match op {
                Op::Pulse { direction, theta } => self.apply_pulse(state, *direction, *theta),
                Op::Pairs { z } => self.apply_pairs(state, *z),
                Op::Free { com, stretch } => {
                    for a in 0..4 {
                        if state.active[a] {
                            state.comps[a] = com.as_ref() * &state.comps[a] * stretch.as_ref();
                        }
                    }
                }
            }
        }
    }

    /// Dense matrix in the product basis (internal ⊗ COM quadrature ⊗ stretch quadrature).
    pub fn dense(&self) -> Result<CMat> {
        let n = self.basis.n;
        if n > 12 {
            return Err(GateError::Domain(format!("dense form limited to n_max ≤ 12, got {n}")));
        }
        let dim = self.dim();
        let mut out = CMat::zeros(dim, dim);
        for col in 0..dim {
            let mut st = State::zeros(n);
            let (a, rest) = (col / (n * n), col % (n * n));
            st.comps[a][(rest / n, rest % n)] = C::new(1.0, 0.0);
            st.active[a] = true;
            self.apply(&mut st);
            for b in 0..4 {
                for i in 0..n {
                    for j in 0..n {
                        out[(b * n * n + i * n + j, col)] = st.comps[b][(i, j)];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One travelling pulse of area `theta` from `direction` (±1) acting on both ions.
pub fn kick_unitary(theta: f64, direction: i8, config: &OracleConfig, params: &TrapParams) -> Result<GateUnitary> {
    let id = GateUnitary::identity(config, params)?;
    Ok(id.with_ops(vec![Op::Pulse {
        direction: f64::from(direction.signum()),
        theta,
    }]))
}

/// A counter-propagating pair: a pulse from `direction`, then one from `−direction`.
pub fn pair_unitary(theta: f64, direction: i8, config: &OracleConfig, params: &TrapParams) -> Result<GateUnitary> {
    let d = f64::from(direction.signum());
    let id = GateUnitary::identity(config, params)?;
    Ok(id.with_ops(vec![
        Op::Pulse { direction: d, theta },
        Op::Pulse { direction: -d, theta },
    ]))
}

/// Free evolution for `dt` trap periods.
pub fn free_unitary(dt: f64, config: &OracleConfig, params: &TrapParams) -> Result<GateUnitary> {
    let id = GateUnitary::identity(config, params)?;
    let op = id.free(dt);
    Ok(id.with_ops(vec![op]))
}

/// Full gate in the interaction picture: pairs with area `π/2 + ε` per pulse,
/// free evolution between groups, and the total free evolution undone at the end.
pub fn evolve_scheme(scheme: &KickScheme, config: &OracleConfig, params: &TrapParams) -> Result<GateUnitary> {
    let mut u = GateUnitary::identity(config, params)?;
    let theta = FRAC_PI_2 + config.epsilon;
    let mut ops = Vec::new();
    let mut prev = scheme.first_time();
    for g in scheme.groups() {
        if g.t > prev {
            ops.push(u.free(g.t - prev));
            prev = g.t;
        }
        if config.epsilon == 0.0 {
            ops.push(Op::Pairs { z: g.z });
        } else {
            let d = g.z.signum() as f64;
            for _ in 0..g.z.abs() {
                ops.push(Op::Pulse { direction: d, theta });
                ops.push(Op::Pulse { direction: -d, theta });
            }
        }
    }
    let total = scheme.last_time() - scheme.first_time();
    if total > 0.0 {
        ops.push(u.free(-total));
    }
    u.ops = ops;
    let guard = (config.n_max as f64).sqrt() / 4.0;
    let excursion = max_excursion(scheme, params);
    if excursion > guard {
        log::warn!(
            "phase-space excursion {excursion:.3} exceeds the truncation guard {guard:.3} at n_max = {}",
            config.n_max
        );
        u.truncation_warning = true;
    }
    Ok(u)
}

/// Diagonal of `e^{±iπ/4 σ_z⊗σ_z}`; the two signs differ by a local `σ_z⊗σ_z`.
fn phase_gate(sign: f64) -> [C; 4] {
    let p = C::from_polar(1.0, sign * FRAC_PI_4);
    [p, p.conj(), p.conj(), p]
}

fn thermal_weights(nbar: f64, n: usize) -> Vec<f64> {
    if nbar == 0.0 {
        let mut w = vec![0.0; n];
        w[0] = 1.0;
        return w;
    }
    let r = nbar / (1.0 + nbar);
    (0..n).map(|m| r.powi(m as i32) / (1.0 + nbar)).collect()
}

/// Entanglement fidelity of the motion-traced internal channel with the phase gate,
/// taking the better of the two sign conventions of the target.
pub fn process_fidelity(u: &GateUnitary, config: &OracleConfig) -> Result<f64> {
    config.validate()?;
    let n = u.basis.n;
    let w = thermal_weights(config.nbar, n);
    let mut inputs = Vec::new();
    for mc in 0..n {
        for mr in 0..n {
            let p = w[mc] * w[mr];
            if p >= 1e-13 {
                inputs.push((mc, mr, p));
            }
        }
    }
    let kept: f64 = inputs.iter().map(|x| x.2).sum();
    if 1.0 - kept > 1e-6 {
        log::warn!("thermal weight {:.3e} lies outside the truncated space; renormalizing", 1.0 - kept);
    }
    let targets = [phase_gate(1.0), phase_gate(-1.0)];
    let sums = inputs
        .par_iter()
        .map(|&(mc, mr, p)| {
            let (fc, fr) = (u.basis.fock(mc), u.basis.fock(mr));
            let mut acc = [CMat::zeros(n, n), CMat::zeros(n, n)];
            for a in 0..4 {
                let mut e = [C::new(0.0, 0.0); 4];
                e[a] = C::new(1.0, 0.0);
                let mut st = State::product(&e, &fc, &fr);
                u.apply(&mut st);
                for (t, target) in targets.iter().enumerate() {
                    acc[t] += &st.comps[a] * target[a].conj();
                }
            }
            [p * acc[0].norm_squared(), p * acc[1].norm_squared()]
        })
        .reduce(|| [0.0, 0.0], |x, y| [x[0] + y[0], x[1] + y[1]]);
    Ok((sums[0].max(sums[1]) / (16.0 * kept)).min(1.0))
}

/// Half the relative phase between `|00⟩` and `|01⟩` on the motional vacuum.
pub fn internal_phase(u: &GateUnitary) -> f64 {
    let vac = u.basis.fock(0);
    let amp = |a: usize| {
        let mut e = [C::new(0.0, 0.0); 4];
        e[a] = C::new(1.0, 0.0);
        let start = State::product(&e, &vac, &vac);
        let mut st = start.clone();
        u.apply(&mut st);
        start.inner(&st)
    };
    0.5 * (amp(0) / amp(1)).arg()
}

/// The operator the gate is compared with in the worst-case search.
#[derive(Debug, Clone)]
pub enum Target {
    /// `e^{±iπ/4 σ_z⊗σ_z}` on the internal states, identity on motion.
    PhaseGate,
    Reference(GateUnitary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub fidelity: f64,
    pub alpha_com: Complex64,
    pub alpha_stretch: Complex64,
    pub internal: [Complex64; 4],
    pub converged: bool,
}

/// `min_ψ |ψ†Mψ|` over unit vectors: the distance from 0 to the numerical range of `M`.
///
/// Returns the distance and a minimizing vector.
pub fn numerical_range_distance(m: &Matrix4<C>) -> (f64, Vector4<C>) {
    let lam = |theta: f64| {
        let r = m * C::from_polar(1.0, -theta);
        let h = (r + r.adjoint()) * C::from(0.5);
        let eig = SymmetricEigen::new(h);
        let k = eig.eigenvalues.imin();
        (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
    };
    const STEPS: usize = 96;
    let step = TAU / STEPS as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..STEPS {
        let t = k as f64 * step;
        let v = lam(t).0;
        if v > best.1 {
            best = (t, v);
        }
    }
    // Golden-section refinement around the best sample.
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (lam(x1).0, lam(x2).0);
    for _ in 0..60 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = lam(x1).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = lam(x2).0;
        }
    }
    let (v, vec) = lam(0.5 * (lo + hi));
    if v > 0.0 {
        return (v, vec);
    }
    // The origin lies inside the numerical range; report a null-overlap state from the
    // smallest Hermitian-part eigenvector as a representative.
    (0.0, vec)
}

struct Overlap<'a> {
    u: &'a GateUnitary,
    target: &'a Target,
}

impl Overlap<'_> {
    /// Fidelity minimized over internal states for fixed coherent amplitudes.
    fn at(&self, ac: C, ar: C) -> (f64, Vector4<C>) {
        let basis = &self.u.basis;
        let (vc, vr) = (basis.coherent(ac), basis.coherent(ar));
        let evolve = |g: &GateUnitary| -> Vec<State> {
            (0..4)
                .map(|a| {
                    let mut e = [C::new(0.0, 0.0); 4];
                    e[a] = C::new(1.0, 0.0);
                    let mut st = State::product(&e, &vc, &vr);
                    g.apply(&mut st);
                    st
                })
                .collect()
        };
        let out = evolve(self.u);
        match self.target {
            Target::Reference(r) => {
                let refs = evolve(r);
                let m = Matrix4::from_fn(|i, j| refs[i].inner(&out[j]));
                let (d, v) = numerical_range_distance(&m);
                (d * d, v)
            }
            Target::PhaseGate => {
                let inputs: Vec<State> = (0..4)
                    .map(|a| {
                        let mut e = [C::new(0.0, 0.0); 4];
                        e[a] = C::new(1.0, 0.0);
                        State::product(&e, &vc, &vr)
                    })
                    .collect();
                let raw = Matrix4::from_fn(|i, j| inputs[i].inner(&out[j]));
                [1.0, -1.0]
                    .into_iter()
                    .map(|sign| {
                        let t = phase_gate(sign);
                        let m = Matrix4::from_fn(|i, j| t[i].conj() * raw[(i, j)]);
                        let (d, v) = numerical_range_distance(&m);
                        (d * d, v)
                    })
                    .max_by(|a, b| a.0.total_cmp(&b.0))
                    .expect("two signs")
            }
        }
    }
}

fn clamp_alpha(a: C, max: f64) -> C {
    if a.norm() > max {
        a * (max / a.norm())
    } else {
        a
    }
}

/// Minimizes `|⟨ψ|T†u|ψ⟩|²` over internal pure states times coherent motional states
/// with `|α| ≤ alpha_max`: a grid over both modes, then local refinement of the best
/// few grid points.
pub fn worst_case_fidelity(u: &GateUnitary, target: &Target, config: &OracleConfig) -> Result<WorstCase> {
    config.validate()?;
    let search = &config.state_search;
    let mut ring = Vec::new();
    for &r in &search.radii {
        if r == 0.0 {
            ring.push(C::new(0.0, 0.0));
        } else {
            ring.extend((0..search.angles).map(|k| C::from_polar(r, TAU * k as f64 / search.angles as f64)));
        }
    }
    let grid: Vec<(C, C)> = ring.iter().flat_map(|&a| ring.iter().map(move |&b| (a, b))).collect();
    let ov = Overlap { u, target };
    let mut scored: Vec<(f64, C, C, Vector4<C>)> = grid
        .par_iter()
        .map(|&(ac, ar)| {
            let (f, v) = ov.at(ac, ar);
            (f, ac, ar, v)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));

    let amax = search.alpha_max;
    let to_alpha = |x: &[f64]| {
        (
            clamp_alpha(C::new(x[0], x[1]), amax),
            clamp_alpha(C::new(x[2], x[3]), amax),
        )
    };
    let bounds = vec![(-amax, amax); 4];
    let mut best = scored[0].clone();
    let mut converged = true;
    if search.refine_steps > 0 {
        let refined: Vec<(f64, C, C, Vector4<C>, bool)> = scored
            .iter()
            .take(3)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|s| {
                let f = |x: &[f64]| {
                    let (ac, ar) = to_alpha(x);
                    ov.at(ac, ar).0
                };
                let x0 = [s.1.re, s.1.im, s.2.re, s.2.im];
                let out = nelder_mead(&f, &x0, &bounds, search.refine_steps);
                let (ac, ar) = to_alpha(&out.x);
                let (fv, v) = ov.at(ac, ar);
                (fv, ac, ar, v, out.evaluations < search.refine_steps)
            })
            .collect();
        for r in refined {
            if r.0 < best.0 {
                best = (r.0, r.1, r.2, r.3);
                converged = r.4;
            }
        }
    }
    Ok(WorstCase {
        fidelity: best.0.clamp(0.0, 1.0),
        alpha_com: best.1,
        alpha_stretch: best.2,
        internal: [best.3[0], best.3[1], best.3[2], best.3[3]],
        converged,
    })
}

/// Worst-case fidelity of the gate built with pulse-area error `ε` against the same
/// scheme driven by exact π pulses.
pub fn area_error_fidelity(
    scheme: &KickScheme,
    epsilon: f64,
    config: &OracleConfig,
    params: &TrapParams,
) -> Result<WorstCase> {
    let reference = evolve_scheme(scheme, &config.with_epsilon(0.0), params)?;
    let u = evolve_scheme(scheme, &config.with_epsilon(epsilon), params)?;
    worst_case_fidelity(&u, &Target::Reference(reference), config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationFit {
    /// Quadratic coefficient `c` in `1 − F_W ≈ c·ε² + b·ε`.
    pub c: f64,
    /// Linear coefficient `b`.
    pub linear: f64,
    /// RMS residual of the fit.
    pub residual: f64,
    /// Residual over the quadratic term at the largest `|ε|`.
    pub relative_residual: f64,
    /// False when the relative residual exceeds 1%.
    pub quadratic_valid: bool,
    /// `(ε, 1 − F_W)` samples.
    pub points: Vec<(f64, f64)>,
}

/// Fits `1 − F_W(ε) = c·ε² + b·ε` through the origin over the given `ε` values.
pub fn perturbation_fit(
    scheme: &KickScheme,
    epsilons: &[f64],
    config: &OracleConfig,
    params: &TrapParams,
) -> Result<PerturbationFit> {
    if epsilons.len() < 2 {
        return Err(GateError::Domain("need at least two ε values".into()));
    }
    let points = epsilons
        .iter()
        .map(|&e| Ok((e, 1.0 - area_error_fidelity(scheme, e, config, params)?.fidelity)))
        .collect::<Result<Vec<_>>>()?;
    let (mut s4, mut s3, mut s2, mut y2, mut y1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(e, y) in &points {
        s4 += e.powi(4);
        s3 += e.powi(3);
        s2 += e * e;
        y2 += y * e * e;
        y1 += y * e;
    }
    let det = s4 * s2 - s3 * s3;
    if det.abs() < 1e-300 {
        return Err(GateError::Domain("ε values do not determine a quadratic fit".into()));
    }
    let c = (y2 * s2 - y1 * s3) / det;
    let b = (s4 * y1 - s3 * y2) / det;
    let residual = (points
        .iter()
        .map(|&(e, y)| (y - c * e * e - b * e).powi(2))
        .sum::<f64>()
        / points.len() as f64)
        .sqrt();
    let emax = epsilons.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let scale = (c * emax * emax).abs();
    let relative_residual = if scale > 0.0 { residual / scale } else { 0.0 };
    Ok(PerturbationFit {
        c,
        linear: b,
        residual,
        relative_residual,
        quadratic_valid: relative_residual <= 1e-2,
        points,
    })
}

/// `c` in `F_W ≈ 1 − c·ε²` from `ε ∈ {±1e-3, ±2e-3, ±4e-3}`.
pub fn perturbation_coefficient(
    scheme: &KickScheme,
    config: &OracleConfig,
    params: &TrapParams,
) -> Result<PerturbationFit> {
    const EPS: [f64; 6] = [-4e-3, -2e-3, -1e-3, 1e-3, 2e-3, 4e-3];
    perturbation_fit(scheme, &EPS, config, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n_pairs: u64,
    pub epsilon: f64,
    pub c: f64,
    pub linear: f64,
    pub relative_residual: f64,
    pub quadratic_valid: bool,
    /// `ε·N ≥ 1`: the expansion in `ε` is not expected to hold.
    pub breakdown_predicted: bool,
}

/// `c` for each scheme from samples at `±ε/4, ±ε/2, ±ε`.
pub fn error_growth_scan(
    schemes: &[KickScheme],
    epsilon: f64,
    config: &OracleConfig,
    params: &TrapParams,
) -> Result<Vec<GrowthRow>> {
    if schemes.len() < 3 {
        return Err(GateError::Domain("an error-growth scan needs at least three schemes".into()));
    }
    let eps = [-epsilon, -epsilon / 2.0, -epsilon / 4.0, epsilon / 4.0, epsilon / 2.0, epsilon];
    schemes
        .iter()
        .map(|s| {
            let fit = perturbation_fit(s, &eps, config, params)?;
            Ok(GrowthRow {
                n_pairs: s.n_pairs(),
                epsilon,
                c: fit.c,
                linear: fit.linear,
                relative_residual: fit.relative_residual,
                quadratic_valid: fit.quadratic_valid,
                breakdown_predicted: epsilon.abs() * s.n_pairs() as f64 >= 1.0,
            })
        })
        .collect()
}
