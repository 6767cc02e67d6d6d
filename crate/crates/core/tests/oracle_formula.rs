mod common;

use common::*;
use fastgate::conditions::{closure_residuals, condition_error, phase_deviation};
use fastgate::oracle::{evolve_scheme, process_fidelity, OracleConfig};
use fastgate::TrapParams;
use rand::Rng;

fn infidelity(s: &fastgate::KickScheme, nbar: f64, p: &TrapParams) -> f64 {
    let cfg = OracleConfig {
        nbar,
        ..OracleConfig::default()
    };
    1.0 - process_fidelity(&evolve_scheme(s, &cfg, p).unwrap(), &cfg).unwrap()
}

/// Close to closure the exact infidelity at rest is `8η_c²|C_c|² + 2η_r²|C_r|²`,
/// four times the small-residual limit `2η_c²|C_c|² + η_r²|C_r|²/2` of the formula.
#[test]
fn oracle_infidelity_is_four_times_motional_formula_at_rest() {
    let p = TrapParams::default();
    let mut rng = seeded(3);
    let mut checked = 0;
    while checked < 4 {
        let Some((fam, root)) = random_symmetric_root(&mut rng, &p) else { continue };
        let Some(s) = perturb_to_error(&fam, &root, 1e-5, &mut rng, &p) else { continue };
        let r = condition_error(&s, &p);
        let (cc, cr) = closure_residuals(&s);
        let exact = 8.0 * p.eta_c().powi(2) * cc.norm_sqr() + 2.0 * p.eta_r().powi(2) * cr.norm_sqr();
        let phase_part = phase_deviation(r.theta).sin().powi(2);
        let oracle = infidelity(&s, 0.0, &p);
        assert!((oracle - exact - phase_part).abs() <= 0.05 * oracle, "{oracle} vs {exact} + {phase_part}");
        let ratio = (oracle - phase_part) / r.e_motional;
        assert!((3.8..=4.2).contains(&ratio), "ratio {ratio}");
        checked += 1;
    }
}

/// Stated relation between oracle and formula: `1 − F_P ≤ E + 2e-4` for exact-π schemes.
/// Schemes are perturbed roots with `E` spread over `[0, 1e-4]`.
#[test]
fn oracle_infidelity_bounded_by_formula() {
    let p = TrapParams::default();
    let mut rng = seeded(17);
    let mut worst: (f64, f64) = (0.0, 0.0);
    let mut checked = 0;
    while checked < 12 {
        let Some((fam, root)) = random_symmetric_root(&mut rng, &p) else { continue };
        let target = rng.gen_range(1e-6..1e-4);
        let Some(s) = perturb_to_error(&fam, &root, target, &mut rng, &p) else { continue };
        let e = condition_error(&s, &p).e_total;
        let f = infidelity(&s, 0.1, &p);
        if f - e > worst.1 - worst.0 {
            worst = (e, f);
        }
        checked += 1;
    }
    assert!(worst.1 <= worst.0 + 2e-4, "E = {:.3e} but 1 − F_P = {:.3e}", worst.0, worst.1);
}
