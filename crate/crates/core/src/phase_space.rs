//! Phase-space trajectories of the two motional modes and the geometric phase
//! obtained by composing displacement operators.
//!
//! Quadratures are `X = (a+a†)/√2`, `P = (a−a†)/(i√2)`, so a coherent amplitude
//! `α` sits at `(√2·Re α, √2·Im α)`. Trajectories follow the internal branch with
//! spin-sum eigenvalue +2: `|00⟩` for the centre-of-mass mode and `|01⟩` for the
//! stretch mode. The other branches are point reflections of these.

use std::f64::consts::{SQRT_2, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::trap::{KickScheme, TrapParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    CentreOfMass,
    Stretch,
}

impl Mode {
    /// Mode frequency in units of ν.
    pub fn frequency_ratio(self) -> f64 {
        match self {
            Mode::CentreOfMass => 1.0,
            Mode::Stretch => 3f64.sqrt(),
        }
    }

    /// Displacement magnitude per unit `z` on the followed branch.
    pub fn kick_unit(self, params: &TrapParams) -> f64 {
        match self {
            Mode::CentreOfMass => 4.0 * params.eta_c(),
            Mode::Stretch => 2.0 * params.eta_r(),
        }
    }

    pub fn branch(self) -> &'static str {
        match self {
            Mode::CentreOfMass => "00",
            Mode::Stretch => "01",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::CentreOfMass => "centre_of_mass",
            Mode::Stretch => "stretch",
        })
    }
}

impl FromStr for Mode {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centre_of_mass" | "center_of_mass" | "com" => Ok(Mode::CentreOfMass),
            "stretch" => Ok(Mode::Stretch),
            other => Err(GateError::Domain(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Rotating with the mode frequency; free evolution is the identity.
    Rotating,
    Lab,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Rotating => "rotating",
            Frame::Lab => "lab",
        })
    }
}

impl FromStr for Frame {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotating" => Ok(Frame::Rotating),
            "lab" => Ok(Frame::Lab),
            other => Err(GateError::Domain(format!("unknown frame '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    /// Trap periods.
    pub time: f64,
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    fn from_alpha(time: f64, alpha: Complex64) -> Self {
        Self {
            time,
            x: SQRT_2 * alpha.re,
            p: SQRT_2 * alpha.im,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub mode: Mode,
    pub frame: Frame,
    /// Start, then pre- and post-kick points for every group.
    pub points: Vec<PhasePoint>,
    /// Sum of the rotating-frame displacements.
    pub net_displacement: Complex64,
    /// Phase of the composed displacement operator, `Σ_m Im(β_m·conj(Σ_{k<m} β_k))`.
    pub accumulated_phase: f64,
}

/// Rotating-frame displacements `β_k = −i·u·z_k·e^{iωt_k}` applied by each group.
pub fn rotating_kicks(scheme: &KickScheme, params: &TrapParams, mode: Mode) -> Vec<Complex64> {
    let unit = mode.kick_unit(params);
    let w = TAU * mode.frequency_ratio();
    scheme
        .groups()
        .iter()
        .map(|g| Complex64::new(0.0, -unit * g.z as f64) * Complex64::from_polar(1.0, w * g.t))
        .collect()
}

/// Composes `D(β_N)…D(β_1)` using `D(α)D(β) = e^{i·Im(αβ*)}D(α+β)`.
///
/// Returns the net displacement and the accumulated operator phase.
pub fn compose_displacements(kicks: &[Complex64]) -> (Complex64, f64) {
    let mut net = Complex64::new(0.0, 0.0);
    let mut phase = 0.0;
    for &beta in kicks {
        phase += (beta * net.conj()).im;
        net += beta;
    }
    (net, phase)
}

pub fn trajectory(
    scheme: &KickScheme,
    params: &TrapParams,
    mode: Mode,
    initial_alpha: Complex64,
    frame: Frame,
) -> Trajectory {
    let kicks = rotating_kicks(scheme, params, mode);
    let w = TAU * mode.frequency_ratio();
    let to_frame = |t: f64, a: Complex64| match frame {
        Frame::Rotating => a,
        Frame::Lab => a * Complex64::from_polar(1.0, -w * t),
    };
    let mut points = Vec::with_capacity(2 * scheme.len() + 1);
    let t0 = scheme.first_time();
    points.push(PhasePoint::from_alpha(t0, to_frame(t0, initial_alpha)));
    let mut alpha = initial_alpha;
    for (g, beta) in scheme.groups().iter().zip(&kicks) {
        points.push(PhasePoint::from_alpha(g.t, to_frame(g.t, alpha)));
        alpha += beta;
        points.push(PhasePoint::from_alpha(g.t, to_frame(g.t, alpha)));
    }
    let (net_displacement, accumulated_phase) = compose_displacements(&kicks);
    Trajectory {
        mode,
        frame,
        points,
        net_displacement,
        accumulated_phase,
    }
}

/// Half the difference between the `|00⟩` (centre-of-mass) and `|01⟩` (stretch)
/// branch phases, computed only from displacement composition.
pub fn geometric_phase_difference(scheme: &KickScheme, params: &TrapParams) -> f64 {
    let (_, com) = compose_displacements(&rotating_kicks(scheme, params, Mode::CentreOfMass));
    let (_, str) = compose_displacements(&rotating_kicks(scheme, params, Mode::Stretch));
    0.5 * (com - str)
}

/// Largest coherent amplitude reached on either followed branch, starting from rest.
pub fn max_excursion(scheme: &KickScheme, params: &TrapParams) -> f64 {
    [Mode::CentreOfMass, Mode::Stretch]
        .into_iter()
        .map(|mode| {
            let mut a = Complex64::new(0.0, 0.0);
            let mut best = 0.0f64;
            for beta in rotating_kicks(scheme, params, mode) {
                a += beta;
                best = best.max(a.norm());
            }
            best
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{closure_residuals, phase_theta};
    use crate::trap::{KickGroup, SymmetricScheme};
    use approx::assert_abs_diff_eq;

    fn scheme(z: &[i64], t: &[f64]) -> KickScheme {
        KickScheme::new(z.iter().zip(t).map(|(&z, &t)| KickGroup::new(z, t)).collect()).unwrap()
    }

    #[test]
    fn single_pair_momentum_shift() {
        let p = TrapParams::default();
        let tr = trajectory(&scheme(&[1], &[0.0]), &p, Mode::CentreOfMass, Complex64::default(), Frame::Rotating);
        assert_eq!(tr.points.len(), 3);
        assert_abs_diff_eq!(tr.points[2].p, -0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(tr.points[2].x, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn closed_com_trajectory_returns_to_start() {
        let p = TrapParams::default();
        let s = scheme(&[1, -1], &[0.0, 1.0]);
        for a in [Complex64::default(), Complex64::new(0.7, -1.3)] {
            let tr = trajectory(&s, &p, Mode::CentreOfMass, a, Frame::Rotating);
            let last = tr.points.last().unwrap();
            assert_abs_diff_eq!(last.x, tr.points[0].x, epsilon = 1e-12);
            assert_abs_diff_eq!(last.p, tr.points[0].p, epsilon = 1e-12);
        }
    }

    #[test]
    fn net_displacement_tracks_residuals() {
        let p = TrapParams::default();
        let s = scheme(&[2, -1, 3, -1], &[-0.2, 0.13, 0.4, 1.7]);
        let (cc, cr) = closure_residuals(&s);
        let com = trajectory(&s, &p, Mode::CentreOfMass, Complex64::default(), Frame::Rotating);
        let expect = Complex64::new(0.0, -4.0 * p.eta_c()) * cc.conj();
        assert_abs_diff_eq!((com.net_displacement - expect).norm(), 0.0, epsilon = 1e-12);
        let st = trajectory(&s, &p, Mode::Stretch, Complex64::default(), Frame::Rotating);
        let expect = Complex64::new(0.0, -2.0 * p.eta_r()) * cr.conj();
        assert_abs_diff_eq!((st.net_displacement - expect).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn geometric_phase_examples() {
        let p = TrapParams::default();
        assert_eq!(geometric_phase_difference(&scheme(&[4], &[1.0]), &p), 0.0);
        let s = scheme(&[1, 1], &[0.0, 0.25]);
        assert_abs_diff_eq!(geometric_phase_difference(&s, &p), 0.12226, epsilon = 1e-5);
        assert_abs_diff_eq!(geometric_phase_difference(&s, &p), phase_theta(&s, &p), epsilon = 1e-12);
    }

    #[test]
    fn gzc_kicks_grow_with_n() {
        let p = TrapParams::default();
        let s4 = SymmetricScheme::gzc(4, [0.2, 0.15, 0.05]).unwrap().expand().unwrap();
        let s32 = SymmetricScheme::gzc(32, [0.05, 0.04, 0.01]).unwrap().expand().unwrap();
        let k4 = rotating_kicks(&s4, &p, Mode::CentreOfMass);
        let k32 = rotating_kicks(&s32, &p, Mode::CentreOfMass);
        assert_abs_diff_eq!(k32[1].norm() / k4[1].norm(), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn lab_frame_rotates_points() {
        let p = TrapParams::default();
        let s = scheme(&[1, 1], &[0.0, 0.25]);
        let rot = trajectory(&s, &p, Mode::CentreOfMass, Complex64::default(), Frame::Rotating);
        let lab = trajectory(&s, &p, Mode::CentreOfMass, Complex64::default(), Frame::Lab);
        let r = |q: &PhasePoint| q.x.hypot(q.p);
        for (a, b) in rot.points.iter().zip(&lab.points) {
            assert_abs_diff_eq!(r(a), r(b), epsilon = 1e-12);
        }
    }

    #[test]
    fn unknown_mode_label() {
        assert!("sideways".parse::<Mode>().is_err());
        assert_eq!("stretch".parse::<Mode>().unwrap(), Mode::Stretch);
        assert_eq!("com".parse::<Mode>().unwrap(), Mode::CentreOfMass);
    }
}
