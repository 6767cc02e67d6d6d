//! Strategies and property checks shared by the property suites and the acceptance run.
#![allow(dead_code)]

use fastgate::conditions::{closure_residuals, condition_error};
use fastgate::optics::{compile, SplitterNetwork, SplitterStage};
use fastgate::optimizer::{optimize, refine_symmetric_root, OptimizerConfig};
use fastgate::oracle::{self, OracleConfig};
use fastgate::phase_space::max_excursion;
use fastgate::{KickGroup, KickScheme, LaserParams, SchemeFamily, SymmetricScheme, TrapParams};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = std::result::Result<(), TestCaseError>;

/// Random schemes of up to `max_groups` groups with `|z| ≤ 3`.
pub fn arb_scheme(max_groups: usize) -> impl Strategy<Value = KickScheme> {
    prop::collection::vec(((1i64..=3), any::<bool>(), 0.001f64..0.6), 1..=max_groups).prop_map(|raw| {
        let mut t = 0.0;
        let groups = raw
            .into_iter()
            .map(|(z, neg, gap)| {
                t += gap;
                KickGroup::new(if neg { -z } else { z }, t)
            })
            .collect();
        KickScheme::new(groups).unwrap()
    })
}

/// Schemes with at most 50 pulse pairs.
pub fn arb_scheme_pairs_50() -> impl Strategy<Value = KickScheme> {
    arb_scheme(25).prop_filter("at most 50 pairs", |s| s.n_pairs() <= 50)
}

/// `z` at `t`, `−z` at `t+1`, `−z` at `t+1/√3`, `z` at `t+1+1/√3`: closes both modes exactly.
pub fn closure_quartet(z: i64, t: f64) -> Vec<(f64, i64)> {
    let h = 1.0 / 3f64.sqrt();
    vec![(t, z), (t + 1.0, -z), (t + h, -z), (t + 1.0 + h, z)]
}

pub fn arb_closed_scheme() -> impl Strategy<Value = KickScheme> {
    prop::collection::vec(((1i64..=2), 0.0f64..3.0), 1..=3).prop_filter_map("coincident quartets", |parts| {
        let pulses: Vec<(f64, i64)> = parts.iter().flat_map(|&(z, t)| closure_quartet(z, t)).collect();
        let mut times: Vec<f64> = pulses.iter().map(|p| p.0).collect();
        times.sort_by(f64::total_cmp);
        if times.windows(2).any(|w| w[1] - w[0] < 1e-6) {
            return None;
        }
        KickScheme::from_unsorted(pulses, 1e-9).ok()
    })
}

pub fn arb_symmetric() -> impl Strategy<Value = SymmetricScheme> {
    ([1u32..=3, 1u32..=3, 1u32..=3], 1u32..=4, 0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0, any::<bool>())
        .prop_map(|(abc, n, t3, g2, g1, negate)| {
            SymmetricScheme::new(abc, n, [t3 + g2 + g1, t3 + g2, t3], negate).unwrap()
        })
}

fn arb_stage(depth: u32) -> BoxedStrategy<SplitterStage> {
    let leaf = (0.0f64..5e-9, 0.05f64..0.95, any::<bool>()).prop_map(|(d, r, f)| SplitterStage::new(d, r, f));
    if depth == 0 {
        return leaf.boxed();
    }
    (
        leaf,
        prop::option::of(prop::collection::vec(arb_stage(depth - 1), 1..=2)),
        prop::option::of(prop::collection::vec(arb_stage(depth - 1), 1..=2)),
    )
        .prop_map(|(s, long, short)| s.with_arms(long.unwrap_or_default(), short.unwrap_or_default()))
        .boxed()
}

pub fn arb_network() -> impl Strategy<Value = SplitterNetwork> {
    (prop::collection::vec(arb_stage(2), 1..=4), 1.0f64..3.0)
        .prop_map(|(stages, overhead)| SplitterNetwork::new(stages, overhead).unwrap())
}

pub fn time_translation(scheme: &KickScheme, dt: f64, params: &TrapParams) -> Check {
    let a = condition_error(scheme, params);
    let b = condition_error(&scheme.shifted(dt), params);
    prop_assert!((a.e_total - b.e_total).abs() <= 1e-12, "E {} vs {}", a.e_total, b.e_total);
    prop_assert!((a.theta - b.theta).abs() <= 1e-12 * a.theta.abs().max(1.0), "Θ {} vs {}", a.theta, b.theta);
    Ok(())
}

pub fn closed_scheme_has_no_motional_error(scheme: &KickScheme, params: &TrapParams) -> Check {
    let (cc, cr) = closure_residuals(scheme);
    prop_assert!(cc.norm() <= 1e-12 && cr.norm() <= 1e-12, "residuals {cc} {cr}");
    prop_assert!(condition_error(scheme, params).e_motional <= 1e-12);
    Ok(())
}

pub fn open_scheme_has_motional_error(scheme: &KickScheme, params: &TrapParams) -> Check {
    let (cc, cr) = closure_residuals(scheme);
    let r = condition_error(scheme, params);
    if cc.norm() + cr.norm() > 1e-4 {
        prop_assert!(r.e_motional > 0.0);
    }
    if r.e_motional == 0.0 {
        prop_assert!(cc.norm() <= 1e-6 && cr.norm() <= 1e-6);
    }
    Ok(())
}

pub fn optimizer_is_deterministic(seed: u64, params: &TrapParams) -> Check {
    let config = OptimizerConfig {
        seed,
        starts: 2,
        max_evaluations: 1500,
        bounds: Some(vec![(0.0, 1.0); 3]),
        ..OptimizerConfig::default()
    };
    let family = SchemeFamily::symmetric([1, 2, 2], 1);
    let laser = LaserParams::default();
    let a = optimize(&family, params, &laser, &config).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let b = optimize(&family, params, &laser, &config).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(a.delays.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.delays.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    prop_assert_eq!(a.history, b.history);
    prop_assert_eq!(a.start_costs.len(), b.start_costs.len());
    Ok(())
}

pub fn compile_conserves_energy(network: &SplitterNetwork, n_pulses: usize) -> Check {
    let train = compile(network, &LaserParams::default(), n_pulses).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let expected = n_pulses as f64 / network.overhead;
    prop_assert!((train.total_energy() - expected).abs() <= 1e-12 * expected);
    let max_area = LaserParams::default().max_area();
    for e in &train.entries {
        prop_assert!((e.area * e.area - max_area * max_area * e.energy_fraction).abs() <= 1e-9 * max_area * max_area);
    }
    prop_assert!(train.entries.windows(2).all(|w| w[0].time_s <= w[1].time_s));
    Ok(())
}

pub fn oracle_is_unitary(scheme: &KickScheme, epsilon: f64, params: &TrapParams) -> Check {
    let config = OracleConfig {
        n_max: 12,
        epsilon,
        ..OracleConfig::default()
    };
    let u = oracle::evolve_scheme(scheme, &config, params).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let m = u.dense().map_err(|e| TestCaseError::fail(e.to_string()))?;
    let defect = (m.adjoint() * &m - nalgebra::DMatrix::identity(m.nrows(), m.ncols())).camax();
    prop_assert!(defect <= 1e-8, "‖u†u − 1‖ = {defect}");
    Ok(())
}

/// Schemes whose largest excursion stays inside the guarded regime of a 12-level truncation.
pub fn arb_small_scheme() -> impl Strategy<Value = KickScheme> {
    arb_scheme(6).prop_filter("small excursion", |s| max_excursion(s, &TrapParams::default()) <= 0.8)
}

pub fn truncation_converges(scheme: &KickScheme, n_max: usize, params: &TrapParams) -> Check {
    let fp = |n: usize| -> std::result::Result<f64, TestCaseError> {
        let cfg = OracleConfig {
            n_max: n,
            ..OracleConfig::default()
        };
        let u = oracle::evolve_scheme(scheme, &cfg, params).map_err(|e| TestCaseError::fail(e.to_string()))?;
        oracle::process_fidelity(&u, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))
    };
    let (a, b) = (fp(n_max)?, fp(n_max + 8)?);
    prop_assert!((a - b).abs() < 1e-6, "F_P {a} at {n_max}, {b} at {}", n_max + 8);
    Ok(())
}

/// An exact symmetric root for `(abc, n)` found by Newton iteration from a random start.
pub fn random_symmetric_root(rng: &mut ChaCha8Rng, params: &TrapParams) -> Option<(SchemeFamily, Vec<f64>)> {
    let abc = [rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3)];
    let n = rng.gen_range(1..=2);
    let family = SchemeFamily::symmetric(abc, n);
    let mut t: Vec<f64> = (0..3).map(|_| rng.gen_range(0.02..1.0)).collect();
    t.sort_by(|a, b| b.total_cmp(a));
    let root = refine_symmetric_root(&family, &t, params)?;
    let scheme = family.generate(&root, params).ok()?;
    (max_excursion(&scheme, params) <= 2.0).then_some((family, root))
}

/// Moves `root` along a random direction until `E` reaches `target` (within 1%).
pub fn perturb_to_error(
    family: &SchemeFamily,
    root: &[f64],
    target: f64,
    rng: &mut ChaCha8Rng,
    params: &TrapParams,
) -> Option<KickScheme> {
    let dir: Vec<f64> = (0..root.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let at = |s: f64| -> Option<(KickScheme, f64)> {
        let x: Vec<f64> = root.iter().zip(&dir).map(|(r, d)| r + s * d / norm).collect();
        let scheme = family.generate(&x, params).ok()?;
        let e = condition_error(&scheme, params).e_total;
        Some((scheme, e))
    };
    let (mut lo, mut hi) = (0.0, 1e-6);
    while at(hi)?.1 < target {
        lo = hi;
        hi *= 2.0;
        if hi > 0.05 {
            return None;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let (scheme, e) = at(mid)?;
        if (e - target).abs() <= 0.01 * target && e <= target {
            return Some(scheme);
        }
        if e < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    None
}

/// Runs `check` on `cases` inputs from `strategy` with a fixed seed.
pub fn run_property<S, F>(cases: u32, strategy: S, check: F) -> std::result::Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Check,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    TestRunner::new_with_rng(config, rng)
        .run(&strategy, check)
        .map_err(|e| e.to_string())
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
