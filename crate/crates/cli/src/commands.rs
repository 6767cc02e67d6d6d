use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Result};
use fastgate::conditions::{landscape_scan, GridAxis};
use fastgate::optics::{self, SplitterNetwork};
use fastgate::optimizer::{self, OptimizeResult, OptimizerConfig};
use fastgate::oracle::{self, OracleConfig, Target};
use fastgate::phase_space::{self, Frame, Mode};
use fastgate::robustness::{self, AngleModel, SweepKind, SweepResult, SweepSpec};
use fastgate::schemes::SplitParams;
use fastgate::trap::SchemeDocument;
use fastgate::{condition_error, cost, CostWeights, GateError, KickScheme, LaserParams, SchemeFamily, TrapParams};
use num_complex::Complex64;
use serde::Serialize;

use crate::run::{csv_text, read_json, ArgError, Run};
use crate::{Command, Common, FamilyArgs, FamilyKind, Format, FrameArg, OpticsCommand, SearchArgs, SweepArg};

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Evaluate { scheme, common } => evaluate(&scheme, &common),
        Command::Optimize { family, n, search, common } => optimize(&family, n, &search, &common),
        Command::Scaling { family, n, search, common } => scaling(&family, &n, &search, &common),
        Command::Trajectory {
            scheme,
            family,
            n,
            delays,
            frame,
            search,
            common,
        } => trajectory(scheme.as_deref(), &family, n, delays, frame, &search, &common),
        Command::Landscape {
            family,
            n,
            at,
            axis,
            common,
        } => landscape(&family, n, &at, &axis, &common),
        Command::Oracle {
            scheme,
            n_max,
            epsilon,
            worst_case,
            perturbation,
            common,
        } => oracle_cmd(&scheme, n_max, epsilon, worst_case, perturbation, &common),
        Command::Robustness {
            kind,
            scheme,
            network,
            pulses,
            low,
            high,
            steps,
            budget,
            model,
            eta_t,
            n_max,
            common,
        } => {
            let sweep = SweepOptions {
                kind,
                network: network.as_deref(),
                pulses,
                low,
                high,
                steps,
                budget,
                model: &model,
                eta_t,
                n_max,
            };
            robustness_cmd(&scheme, &sweep, &common)
        }
        Command::Optics { command } => match command {
            OpticsCommand::Compile { network, pulses, common } => optics_compile(&network, pulses, &common),
            OpticsCommand::Design { scheme, overhead, common } => optics_design(&scheme, overhead, &common),
            OpticsCommand::Check {
                network,
                scheme,
                pulses,
                tol,
                common,
            } => optics_check(&network, &scheme, pulses, tol, &common),
        },
    }
}

fn start(name: &str, common: &Common) -> Result<(Run, TrapParams, LaserParams)> {
    let mut run = Run::start(name, common.seed, &common.out);
    let mut params = match &common.params {
        Some(p) => {
            run.input(p)?;
            read_json::<TrapParams>(p)?
        }
        None => TrapParams::default(),
    };
    if let Some(eta) = common.eta {
        params = params.with_eta(eta)?;
        run.set("eta", eta);
    }
    if let Some(nbar) = common.nbar {
        params = params.with_nbar(nbar)?;
        run.set("nbar", nbar);
    }
    let mut laser = match &common.laser {
        Some(p) => {
            run.input(p)?;
            read_json::<LaserParams>(p)?
        }
        None => LaserParams::default(),
    };
    if let Some(rep) = common.rep_rate {
        laser = LaserParams::new(rep, laser.max_area(), laser.pulse_duration())?;
        run.set("rep_rate", rep);
    }
    if let Some(a) = common.max_area_pi {
        laser = laser.with_max_area(a * PI)?;
        run.set("max_area_pi", a);
    }
    Ok((run, params, laser))
}

/// Prints a summary object or a table according to `--format`.
fn emit<T: Serialize>(common: &Common, summary: &T, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(summary)? + "\n",
        Format::Csv => csv_text(header, rows, None)?,
    };
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load_scheme(path: &Path, run: &mut Run) -> Result<(SchemeDocument, KickScheme)> {
    run.input(path)?;
    let doc: SchemeDocument = read_json(path)?;
    let scheme = doc.clone().into_scheme()?;
    Ok((doc, scheme))
}

fn family(args: &FamilyArgs, n: u32, laser: &LaserParams, run: &mut Run) -> Result<SchemeFamily> {
    if let Some(path) = &args.family_file {
        run.input(path)?;
        let mut fam: SchemeFamily = read_json(path)?;
        match &mut fam {
            SchemeFamily::Gzc { n: m } | SchemeFamily::SymmetricAbc { n: m, .. } => *m = n,
            _ => {}
        }
        run.set("n", n);
        return Ok(fam);
    }
    let Some(kind) = args.family else {
        return Err(ArgError("one of --family or --family-file is required".into()).into());
    };
    let split = |grouping| SplitParams::new(args.loops, args.laser_pulses, grouping, laser.rep_rate());
    let fam = match kind {
        FamilyKind::Gzc => SchemeFamily::Gzc { n },
        FamilyKind::Symmetric => {
            let abc: [u32; 3] = args
                .abc
                .as_slice()
                .try_into()
                .map_err(|_| ArgError(format!("--abc needs three values, got {}", args.abc.len())))?;
            SchemeFamily::SymmetricAbc {
                abc,
                n,
                negate: args.negate,
            }
        }
        FamilyKind::Direct => SchemeFamily::DirectSplit(split(0)),
        FamilyKind::Alternating => SchemeFamily::AlternatingSplit(split(args.grouping)),
        FamilyKind::FreeTimes => SchemeFamily::FreeTimes { d: args.dims },
    };
    run.set("family", serde_json::to_string(&fam)?);
    Ok(fam)
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let bad = || ArgError(format!("expected lo:hi, got '{s}'"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

fn search_config(args: &SearchArgs, d: usize, seed: u64, run: &mut Run) -> Result<OptimizerConfig> {
    let (lo, hi) = parse_range(&args.bounds)?;
    run.set("bounds", &args.bounds);
    run.set("starts", args.starts);
    run.set("max_evals", args.max_evals);
    if let Some(p) = args.population {
        run.set("population", p);
    }
    let config = OptimizerConfig {
        population_size: args.population,
        max_evaluations: args.max_evals,
        bounds: Some(vec![(lo, hi); d]),
        seed,
        starts: args.starts,
        ..OptimizerConfig::default()
    };
    config.validate(d)?;
    Ok(config)
}

fn scheme_document(res: &OptimizeResult) -> Result<SchemeDocument> {
    Ok(match res.family.symmetric_scheme(&res.delays)? {
        Some(sym) => SchemeDocument::from(&sym),
        None => SchemeDocument::from(&res.scheme),
    })
}

#[derive(Serialize)]
struct Evaluation {
    theta: f64,
    c_c: Complex64,
    c_r: Complex64,
    e_motional: f64,
    e_phase: f64,
    error: f64,
    gate_time: f64,
    gate_time_ns: f64,
    cost: f64,
    n_pairs: u64,
}

fn evaluation(scheme: &KickScheme, params: &TrapParams, weights: &CostWeights) -> Evaluation {
    let r = condition_error(scheme, params);
    Evaluation {
        theta: r.theta,
        c_c: r.c_c,
        c_r: r.c_r,
        e_motional: r.e_motional,
        e_phase: r.e_phase,
        error: r.e_total,
        gate_time: r.gate_time,
        gate_time_ns: params.to_seconds(r.gate_time) * 1e9,
        cost: cost(scheme, params, weights),
        n_pairs: scheme.n_pairs(),
    }
}

fn evaluation_row(e: &Evaluation) -> Vec<String> {
    vec![
        e.theta.to_string(),
        e.c_c.norm().to_string(),
        e.c_r.norm().to_string(),
        e.error.to_string(),
        e.gate_time.to_string(),
        e.cost.to_string(),
        e.n_pairs.to_string(),
    ]
}

const EVALUATION_HEADER: [&str; 7] = ["theta", "abs_c_c", "abs_c_r", "error", "gate_time", "cost", "n_pairs"];

fn evaluate(path: &Path, common: &Common) -> Result<()> {
    let (mut run, params, _) = start("evaluate", common)?;
    let (_, scheme) = load_scheme(path, &mut run)?;
    let e = evaluation(&scheme, &params, &CostWeights::default());
    let summary = run.write_json("report.json", &e)?;
    emit(common, &summary, &EVALUATION_HEADER, &[evaluation_row(&e)])?;
    run.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct OptimizeSummary<'a> {
    family: &'a SchemeFamily,
    delays: &'a [f64],
    feasible: bool,
    refined: bool,
    evaluations: usize,
    report: Evaluation,
    delay_structure: Vec<optimizer::DelayMatch>,
}

fn optimize(args: &FamilyArgs, n: u32, search: &SearchArgs, common: &Common) -> Result<()> {
    let (mut run, params, laser) = start("optimize", common)?;
    let fam = family(args, n, &laser, &mut run)?;
    let config = search_config(search, fam.dimension(), common.seed, &mut run)?;
    let res = optimizer::optimize_continued(&fam, &params, &laser, &config)?;
    run.write_json("solution.json", &scheme_document(&res)?)?;
    run.write_json("scheme.json", &res.scheme)?;
    let summary = OptimizeSummary {
        family: &res.family,
        delays: &res.delays,
        feasible: res.feasible,
        refined: res.refined,
        evaluations: res.evaluations,
        report: evaluation(&res.scheme, &params, &config.weights),
        delay_structure: optimizer::delay_structure_report(&res.delays),
    };
    let row = evaluation_row(&summary.report);
    let written = run.write_json("result.json", &summary)?;
    emit(common, &written, &EVALUATION_HEADER, &[row])?;
    run.finish()?;
    if !res.feasible {
        return Err(GateError::Infeasible(format!(
            "best error {:.3e} exceeds {:.0e}",
            res.report.e_total,
            optimizer::FEASIBLE_ERROR
        ))
        .into());
    }
    Ok(())
}

fn scaling(args: &FamilyArgs, ns: &[u32], search: &SearchArgs, common: &Common) -> Result<()> {
    let (mut run, params, laser) = start("scaling", common)?;
    let first = family(args, ns.first().copied().unwrap_or(1), &laser, &mut run)?;
    if !matches!(first, SchemeFamily::Gzc { .. } | SchemeFamily::SymmetricAbc { .. }) {
        return Err(GateError::Domain(format!("scaling needs a gzc or symmetric family, got {}", first.kind())).into());
    }
    run.set("n", ns.iter().map(u32::to_string).collect::<Vec<_>>().join(","));
    let config = search_config(search, first.dimension(), common.seed, &mut run)?;
    let template = |n: u32| {
        Ok(match &first {
            SchemeFamily::Gzc { .. } => SchemeFamily::Gzc { n },
            SchemeFamily::SymmetricAbc { abc, negate, .. } => SchemeFamily::SymmetricAbc {
                abc: *abc,
                n,
                negate: *negate,
            },
            other => other.clone(),
        })
    };
    let study = optimizer::scaling_study(template, ns, &params, &laser, &config)?;
    let header = ["n", "n_pairs", "gate_time", "error", "cost", "feasible", "seed", "delays"];
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.n_pairs.to_string(),
                r.gate_time.to_string(),
                r.error.to_string(),
                r.cost.to_string(),
                r.feasible.to_string(),
                r.seed.to_string(),
                r.delays.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            ]
        })
        .collect();
    run.write_csv("scaling.csv", &header, &rows)?;
    let summary = run.write_json("fit.json", &study)?;
    emit(common, &summary, &header, &rows)?;
    run.finish()?;
    if study.fit.is_none() {
        return Err(GateError::Infeasible("fewer than two feasible points to fit".into()).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct TrajectorySummary {
    gate_time: f64,
    error: f64,
    com_net_displacement: Complex64,
    stretch_net_displacement: Complex64,
    com_phase: f64,
    stretch_phase: f64,
    max_excursion: f64,
}

#[allow(clippy::too_many_arguments)]
fn trajectory(
    scheme_path: Option<&Path>,
    args: &FamilyArgs,
    n: u32,
    delays: Option<Vec<f64>>,
    frame: FrameArg,
    search: &SearchArgs,
    common: &Common,
) -> Result<()> {
    let (mut run, params, laser) = start("trajectory", common)?;
    let scheme = match scheme_path {
        Some(p) => load_scheme(p, &mut run)?.1,
        None => {
            let fam = family(args, n, &laser, &mut run)?;
            match delays {
                Some(d) => {
                    run.set("delays", d.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
                    fam.generate(&d, &params)?
                }
                None => {
                    let config = search_config(search, fam.dimension(), common.seed, &mut run)?;
                    optimizer::optimize_continued(&fam, &params, &laser, &config)?.scheme
                }
            }
        }
    };
    let frame = match frame {
        FrameArg::Lab => Frame::Lab,
        FrameArg::Rotating => Frame::Rotating,
    };
    run.set("frame", frame);
    let zero = Complex64::new(0.0, 0.0);
    let com = phase_space::trajectory(&scheme, &params, Mode::CentreOfMass, zero, frame);
    let str = phase_space::trajectory(&scheme, &params, Mode::Stretch, zero, frame);
    let header = ["mode", "frame", "time", "x", "p"];
    let rows: Vec<Vec<String>> = [&com, &str]
        .into_iter()
        .flat_map(|t| {
            t.points.iter().map(move |pt| {
                vec![
                    t.mode.branch().to_string(),
                    t.frame.to_string(),
                    pt.time.to_string(),
                    pt.x.to_string(),
                    pt.p.to_string(),
                ]
            })
        })
        .collect();
    run.write_csv("trajectory.csv", &header, &rows)?;
    run.write_json("scheme.json", &scheme)?;
    let r = condition_error(&scheme, &params);
    let summary = run.write_json(
        "trajectory.json",
        &TrajectorySummary {
            gate_time: r.gate_time,
            error: r.e_total,
            com_net_displacement: com.net_displacement,
            stretch_net_displacement: str.net_displacement,
            com_phase: com.accumulated_phase,
            stretch_phase: str.accumulated_phase,
            max_excursion: phase_space::max_excursion(&scheme, &params),
        },
    )?;
    emit(common, &summary, &header, &rows)?;
    run.finish()?;
    Ok(())
}

fn parse_axis(s: &str) -> Result<(usize, GridAxis)> {
    let bad = || ArgError(format!("expected index:lo:hi:steps, got '{s}'"));
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let [i, lo, hi, steps] = parts.as_slice() else {
        return Err(bad().into());
    };
    let axis = GridAxis::new(
        lo.parse().map_err(|_| bad())?,
        hi.parse().map_err(|_| bad())?,
        steps.parse().map_err(|_| bad())?,
    )?;
    Ok((i.parse().map_err(|_| bad())?, axis))
}

fn landscape(args: &FamilyArgs, n: u32, at: &[f64], axes: &[String], common: &Common) -> Result<()> {
    let (mut run, params, laser) = start("landscape", common)?;
    let fam = family(args, n, &laser, &mut run)?;
    if at.len() != fam.dimension() {
        return Err(ArgError(format!("--at needs {} delays, got {}", fam.dimension(), at.len())).into());
    }
    let parsed = axes.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>>>()?;
    if let Some((i, _)) = parsed.iter().find(|(i, _)| *i >= at.len()) {
        return Err(ArgError(format!("axis index {i} out of range")).into());
    }
    run.set("at", at.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    run.set("axis", axes.join(" "));
    let index: Vec<usize> = parsed.iter().map(|p| p.0).collect();
    let grid: Vec<GridAxis> = parsed.iter().map(|p| p.1).collect();
    let build = |vals: &[f64]| {
        let mut x = at.to_vec();
        for (&i, &v) in index.iter().zip(vals) {
            x[i] = v;
        }
        fam.generate(&x, &params)
    };
    let rows = landscape_scan(build, &grid, &params, &CostWeights::default())?;
    let header = ["var1", "var2", "logJ"];
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.var1.to_string(),
                r.var2.map(|v| v.to_string()).unwrap_or_default(),
                r.log_j.to_string(),
            ]
        })
        .collect();
    run.write_csv("landscape.csv", &header, &table)?;
    let best = rows.iter().filter(|r| r.log_j.is_finite()).min_by(|a, b| a.log_j.total_cmp(&b.log_j));
    let summary = run.write_json("landscape.json", &serde_json::json!({ "points": rows.len(), "minimum": best }))?;
    emit(common, &summary, &header, &table)?;
    run.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct OracleSummary {
    n_max: usize,
    nbar: f64,
    epsilon: f64,
    process_fidelity: f64,
    process_infidelity: f64,
    internal_phase: f64,
    theta: f64,
    error: f64,
    truncation_warning: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    worst_case: Option<oracle::WorstCase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    perturbation: Option<oracle::PerturbationFit>,
}

fn oracle_cmd(
    path: &Path,
    n_max: usize,
    epsilon: f64,
    worst_case: bool,
    perturbation: bool,
    common: &Common,
) -> Result<()> {
    let (mut run, params, _) = start("oracle", common)?;
    let (_, scheme) = load_scheme(path, &mut run)?;
    run.set("n_max", n_max);
    run.set("epsilon", epsilon);
    run.set("worst_case", worst_case);
    run.set("perturbation", perturbation);
    let config = OracleConfig {
        n_max,
        nbar: params.nbar(),
        epsilon,
        ..OracleConfig::default()
    };
    config.validate()?;
    let u = oracle::evolve_scheme(&scheme, &config, &params)?;
    let fp = oracle::process_fidelity(&u, &config)?;
    let worst = if worst_case {
        Some(if epsilon == 0.0 {
            oracle::worst_case_fidelity(&u, &Target::PhaseGate, &config)?
        } else {
            oracle::area_error_fidelity(&scheme, epsilon, &config, &params)?
        })
    } else {
        None
    };
    let fit = if perturbation {
        Some(oracle::perturbation_coefficient(&scheme, &config, &params)?)
    } else {
        None
    };
    let r = condition_error(&scheme, &params);
    let summary = OracleSummary {
        n_max,
        nbar: config.nbar,
        epsilon,
        process_fidelity: fp,
        process_infidelity: 1.0 - fp,
        internal_phase: oracle::internal_phase(&u),
        theta: r.theta,
        error: r.e_total,
        truncation_warning: u.truncation_warning,
        worst_case: worst,
        perturbation: fit,
    };
    let row = vec![
        summary.process_infidelity.to_string(),
        summary.internal_phase.to_string(),
        summary.error.to_string(),
    ];
    let written = run.write_json("oracle.json", &summary)?;
    emit(common, &written, &["process_infidelity", "internal_phase", "error"], &[row])?;
    run.finish()?;
    Ok(())
}

struct SweepOptions<'a> {
    kind: SweepArg,
    network: Option<&'a Path>,
    pulses: usize,
    low: Option<f64>,
    high: Option<f64>,
    steps: Option<usize>,
    budget: f64,
    model: &'a str,
    eta_t: Option<f64>,
    n_max: usize,
}

fn robustness_cmd(path: &Path, opts: &SweepOptions, common: &Common) -> Result<()> {
    let (mut run, params, laser) = start("robustness", common)?;
    let (doc, scheme) = load_scheme(path, &mut run)?;
    // CLI ranges are in ps / rad / mrad; the library works in s / rad / rad.
    let (kind, scale, defaults) = match opts.kind {
        SweepArg::Timing => (SweepKind::Timing, 1e-12, (0.0, 200.0, 41)),
        SweepArg::Area => (SweepKind::Area, 1.0, (0.0, 0.01, 5)),
        SweepArg::Angle => (SweepKind::Angle, 1e-3, (-20.0, 20.0, 41)),
    };
    let low = opts.low.unwrap_or(defaults.0);
    let high = opts.high.unwrap_or(defaults.1);
    let steps = opts.steps.unwrap_or(defaults.2);
    run.set("kind", format!("{kind:?}"));
    run.set("range", format!("{low}:{high}:{steps}"));
    run.set("budget", opts.budget);
    let mut spec = SweepSpec::new(kind, low * scale, high * scale, steps)?;
    spec.threshold = opts.budget;
    spec.validate()?;
    let result: SweepResult = match opts.kind {
        SweepArg::Timing => {
            let network: SplitterNetwork = match (opts.network, &doc) {
                (Some(p), _) => {
                    run.input(p)?;
                    read_json(p)?
                }
                (None, SchemeDocument::Symmetric { abc, n, tau, negate }) => {
                    let sym = fastgate::SymmetricScheme::new(*abc, *n, *tau, *negate)?;
                    optics::symmetric_network(&sym, &params, 1.0)?
                }
                (None, SchemeDocument::Explicit(_)) => {
                    return Err(GateError::Domain("timing sweeps of explicit schemes need --network".into()).into())
                }
            };
            run.set("pulses", opts.pulses);
            robustness::timing_sweep(&network, &laser, &params, opts.pulses, &spec)?
        }
        SweepArg::Area => {
            run.set("n_max", opts.n_max);
            let config = OracleConfig {
                n_max: opts.n_max,
                nbar: params.nbar(),
                ..OracleConfig::default()
            };
            robustness::area_sweep(&scheme, &spec, &config, &params)?
        }
        SweepArg::Angle => {
            let model: AngleModel = opts.model.parse()?;
            let eta_t = opts.eta_t.unwrap_or(params.eta());
            run.set("model", model);
            run.set("eta_t", eta_t);
            robustness::angle_sweep(&scheme, &params, &spec, model, eta_t)?
        }
    };
    let header = ["parameter", "error", "process_infidelity", "pass"];
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| {
            vec![
                (r.parameter / scale).to_string(),
                r.error.to_string(),
                r.process_infidelity.map(|v| v.to_string()).unwrap_or_default(),
                r.pass.to_string(),
            ]
        })
        .collect();
    run.write_csv("sweep.csv", &header, &rows)?;
    let summary = serde_json::json!({
        "kind": result.kind,
        "model": result.model,
        "unit_scale": scale,
        "budget": result.budget,
        "baseline": result.baseline,
        "threshold": result.threshold.map(|t| t / scale),
        "monotone": result.monotone(),
    });
    let written = run.write_json("summary.json", &summary)?;
    emit(common, &written, &header, &rows)?;
    run.finish()?;
    Ok(())
}

fn optics_compile(path: &Path, pulses: usize, common: &Common) -> Result<()> {
    let (mut run, params, laser) = start("optics compile", common)?;
    run.input(path)?;
    run.set("pulses", pulses);
    let network: SplitterNetwork = read_json(path)?;
    let train = optics::compile(&network, &laser, pulses)?;
    let header = ["time_s", "direction", "area_over_pi", "source_pulse"];
    let rows: Vec<Vec<String>> = train
        .entries
        .iter()
        .map(|e| {
            vec![
                e.time_s.to_string(),
                e.direction.to_string(),
                (optics::pulse_area_per_slot(e) / PI).to_string(),
                e.source_pulse.to_string(),
            ]
        })
        .collect();
    run.write_csv("train.csv", &header, &rows)?;
    let scheme = optics::train_to_scheme(&train, &params)?;
    run.write_json("scheme.json", &scheme)?;
    let n_pairs = train.entries.len() as u64;
    let summary = serde_json::json!({
        "n_pairs": n_pairs,
        "total_energy": train.total_energy(),
        "required_area_over_pi": optics::required_area(n_pairs, network.overhead) / PI,
        "depth": network.depth(),
        "report": evaluation(&scheme, &params, &CostWeights::default()),
    });
    let written = run.write_json("train.json", &summary)?;
    emit(common, &written, &header, &rows)?;
    run.finish()?;
    Ok(())
}

fn optics_design(path: &Path, overhead: f64, common: &Common) -> Result<()> {
    let (mut run, params, _) = start("optics design", common)?;
    let (doc, _) = load_scheme(path, &mut run)?;
    run.set("overhead", overhead);
    let SchemeDocument::Symmetric { abc, n, tau, negate } = doc else {
        bail!(GateError::Domain("network design needs a symmetric scheme".into()));
    };
    let sym = fastgate::SymmetricScheme::new(abc, n, tau, negate)?;
    let network = optics::symmetric_network(&sym, &params, overhead)?;
    let written = run.write_json("network.json", &network)?;
    emit(common, &written, &[], &[])?;
    run.finish()?;
    Ok(())
}

fn optics_check(network_path: &Path, scheme_path: &Path, pulses: usize, tol: f64, common: &Common) -> Result<()> {
    let (mut run, params, laser) = start("optics check", common)?;
    run.input(network_path)?;
    let network: SplitterNetwork = read_json(network_path)?;
    let (_, scheme) = load_scheme(scheme_path, &mut run)?;
    run.set("pulses", pulses);
    run.set("tol", tol);
    let report = optics::check_realizability(&network, &laser, &params, pulses, &scheme, tol)?;
    let written = run.write_json("realizability.json", &report)?;
    emit(common, &written, &[], &[])?;
    run.finish()?;
    if !report.realizable {
        return Err(GateError::Infeasible(report.issues.join("; ")).into());
    }
    Ok(())
}
