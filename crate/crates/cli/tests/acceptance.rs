//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! quantity and the wall-clock time against its budget. Exits non-zero if
//! any criterion fails.
//!
//! Run with `cargo test --test acceptance` (add `--release` for timings
//! representative of production builds).

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use bouss1d::biotsavart::{stretch_rate, velocity_x, velocity_z, PrefixTable, Weight};
use bouss1d::diagnostics::Classification;
use bouss1d::model::{make_params, InitialDataSpec, ModelParams};
use bouss1d::oracles::tau0::ladder_threshold;
use bouss1d::oracles::{
    gamma_closed_form, solve_f_picard, solve_gamma, solve_tau0, solve_warmup_g, verify_induction_ladder,
    warmup_blowup_quadrature,
};
use bouss1d::solver::{StepControl, Termination};
use bouss1d_cli::config::{resolve_data_and_solver, DataSection, Plateau, SolverSection, SweepConfig};
use bouss1d_cli::run::{CheckOutcome, CheckStatus};
use bouss1d_cli::sweep::{run_sweep, sweep_csv};
use bouss1d_cli::{simulate, ResolvedRun, RunResult};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

// Tolerances.
const FD_REL_TOL: f64 = 1e-6;
const FRAME_REL_TOL: f64 = 1e-8;
const OMEGA_TOL: f64 = 1e-8;
const WARMUP_STOP_FACTOR: f64 = 1.1;
const RESOLUTION_SHIFT: f64 = 0.05;
const LADDER_MARGIN: f64 = 1.1;
const BKM_FACTOR: f64 = 10.0;
const GAMMA_ODE_TOL: f64 = 1e-8;
const ENERGY_TOL: f64 = 1e-9;
const PICARD_TOL: f64 = 1e-6;

type Verdict = Result<String, String>;

/// Sum of Gaussian bumps `a exp(-(y - c)^2 / (2 s^2))`.
struct Bumps(Vec<(f64, f64, f64)>);

impl Bumps {
    fn random(rng: &mut StdRng) -> Self {
        let n = rng.gen_range(1..=3);
        Bumps((0..n).map(|_| (rng.gen_range(0.1..3.0), rng.gen_range(1.0..11.0), rng.gen_range(0.4..2.0))).collect())
    }

    fn at(&self, y: f64) -> f64 {
        self.0.iter().map(|&(a, c, s)| a * (-(y - c).powi(2) / (2.0 * s * s)).exp()).sum()
    }
}

fn random_params(rng: &mut StdRng) -> ModelParams {
    make_params(rng.gen_range(1.0..1.8), rng.gen_range(0.6..1.0), None).unwrap()
}

fn z_table(field: &Bumps, n: usize, hi: f64) -> PrefixTable {
    let nodes: Vec<f64> = (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect();
    let values = nodes.iter().map(|&z| field.at(z)).collect();
    PrefixTable::from_nodes(nodes, values, Weight::Unit).unwrap()
}

fn resolved(beta: (f64, f64), data: DataSection, solver: SolverSection) -> ResolvedRun {
    let params = make_params(beta.0, beta.1, None).unwrap();
    let (spec, ctrl, t_end) = resolve_data_and_solver(&data, &solver, &params).unwrap();
    ResolvedRun { params, spec, ctrl, t_end, output: Default::default(), require: Vec::new() }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

/// Desk run `beta = (1.2, 0.9)`, ladder `(2, 8, 9, 12, 14)`, 4096 markers.
fn desk() -> &'static (RunResult, Duration) {
    static RUN: OnceLock<(RunResult, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let run = resolved((1.2, 0.9), DataSection::default(), SolverSection::default());
        timed(|| simulate(&run).expect("desk run"))
    })
}

fn warmup_data(markers: usize) -> DataSection {
    DataSection {
        frame: Some(bouss1d::Frame::XWarmup),
        markers: Some(markers),
        plateau: Some(Plateau::Interval([1.0 / 3.0, 2.0 / 3.0])),
        ..Default::default()
    }
}

/// Unit-interval run with plateau `[1/3, 2/3]`, 4096 markers.
fn warmup() -> &'static (RunResult, Duration) {
    static RUN: OnceLock<(RunResult, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let run = resolved((1.0, 1.0), warmup_data(4096), SolverSection::default());
        timed(|| simulate(&run).expect("warm-up run"))
    })
}

fn check_passed(name: &str, c: &CheckOutcome) -> Verdict {
    match c.status {
        CheckStatus::Pass => Ok(format!("{name} over {} frames, extreme {:?}", c.frames, c.worst)),
        _ => Err(format!("{name}: {:?}: {}", c.status, c.detail)),
    }
}

fn derivative_identity() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for field in 0..20 {
        let bumps = Bumps::random(&mut rng);
        let p = random_params(&mut rng);
        let table = z_table(&bumps, 4001, 13.0);
        let sup = table.values().iter().fold(0.0f64, |a, &b| a.max(b));
        for _ in 0..100 {
            let z = rng.gen_range(0.5..11.0);
            let fd = (velocity_z(z + h, &table, &p) - velocity_z(z - h, &table, &p)) / (2.0 * h);
            let k = stretch_rate(z, &table, &p);
            let rel = (fd - k).abs() / k.abs().max(1e-3 * sup);
            worst = worst.max(rel);
            if rel > FD_REL_TOL {
                return Err(format!("field {field}, z = {z}: FD {fd} vs K {k} (rel {rel:.2e})"));
            }
        }
    }
    Ok(format!("2000 points, worst rel {worst:.2e} <= {FD_REL_TOL:e}"))
}

fn frame_consistency() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    let n = 200_001;
    let zs: Vec<f64> = (0..n).map(|i| 14.0 * i as f64 / (n - 1) as f64).collect();
    let xs: Vec<f64> = zs.iter().rev().map(|&z| (-z).exp()).collect();
    let mut worst = 0.0f64;
    for field in 0..4 {
        let bumps = Bumps::random(&mut rng);
        let p = random_params(&mut rng);
        let zt = PrefixTable::from_nodes(zs.clone(), zs.iter().map(|&z| bumps.at(z)).collect(), Weight::Unit).unwrap();
        let xv: Vec<f64> = zs.iter().rev().map(|&z| bumps.at(z)).collect();
        let xt = PrefixTable::from_nodes(xs.clone(), xv, Weight::Reciprocal).unwrap();
        for _ in 0..25 {
            let z: f64 = rng.gen_range(0.2..13.0);
            let x = (-z).exp();
            let ux = velocity_x(x, &xt, &p).unwrap();
            let expect = -x * velocity_z(z, &zt, &p);
            let rel = (ux - expect).abs() / expect.abs().max(1e-3 * x);
            worst = worst.max(rel);
            if rel > FRAME_REL_TOL {
                return Err(format!("field {field}, z = {z}: {ux} vs {expect} (rel {rel:.2e})"));
            }
        }
    }
    Ok(format!("100 points, worst rel {worst:.2e} <= {FRAME_REL_TOL:e}"))
}

fn omega_consistency() -> Verdict {
    let (run, _) = desk();
    let c = &run.summary.checks.omega_consistency;
    let worst = c.worst.unwrap_or(f64::NAN);
    if c.status == CheckStatus::Pass && worst <= OMEGA_TOL && c.frames == run.frames.len() {
        Ok(format!("{} frames, worst defect {worst:.2e} (1 + sup omega)", c.frames))
    } else {
        Err(format!("{:?}: {}", c.status, c.detail))
    }
}

fn gamma_comparison() -> Verdict {
    let (run, _) = desk();
    check_passed("phi / Gamma at 16 probes", &run.summary.checks.gamma_bound)
}

fn warmup_blowup() -> Verdict {
    let t_g = warmup_blowup_quadrature(1e-13);
    let (run, _) = warmup();
    let s = &run.summary;
    if s.cause != Termination::OmegaCap {
        return Err(format!("stopped by {} at t = {}", s.cause, s.t_final));
    }
    if s.t_final > WARMUP_STOP_FACTOR * t_g {
        return Err(format!("t_stop = {} > 1.1 T_G = {}", s.t_final, WARMUP_STOP_FACTOR * t_g));
    }
    check_passed("barrier", &s.checks.warmup_barrier)?;

    let fine = SolverSection { rk_tol: Some(StepControl::default().rk_tol * 0.1), ..Default::default() };
    let refined = simulate(&resolved((1.0, 1.0), warmup_data(8192), fine)).map_err(|e| e.to_string())?;
    let shift = (refined.summary.t_final - s.t_final).abs() / s.t_final;
    if refined.summary.cause != Termination::OmegaCap || shift >= RESOLUTION_SHIFT {
        return Err(format!(
            "refined run: cause {}, t_stop {} (shift {shift:.2e})",
            refined.summary.cause, refined.summary.t_final
        ));
    }
    Ok(format!(
        "t_stop = {:.6} <= 1.1 T_G = {:.6}; barrier min ratio {:.4}; refined shift {shift:.2e}",
        s.t_final,
        WARMUP_STOP_FACTOR * t_g,
        s.checks.warmup_barrier.worst.unwrap_or(f64::NAN)
    ))
}

fn positivity_window() -> Verdict {
    let (run, _) = desk();
    let tau0 = run.summary.tau0.ok_or("no tau0")?;
    let c = &run.summary.checks.positivity;
    check_passed("positivity", c).map(|m| format!("tau0 = {tau0:.6e}; {m}"))
}

fn f_comparison() -> Verdict {
    let (run, _) = desk();
    check_passed("D / f on [L2, L3]", &run.summary.checks.f_comparison)
}

fn induction_ladder() -> Verdict {
    let p = make_params(1.2, 0.9, None).unwrap();
    let spec = InitialDataSpec::default();
    let tau0 = solve_tau0(&p, spec.l0, spec.l1).map_err(|e| e.to_string())?.tau0;
    let c = p.stretch_constant();
    let delta = LADDER_MARGIN * ladder_threshold(c, tau0);
    let f = solve_f_picard(c, spec.l3 - delta, spec.l3, tau0, 257, 1e-10).map_err(|e| e.to_string())?;
    let rep = verify_induction_ladder(&f, c, tau0, delta).map_err(|e| e.to_string())?;
    if rep.pass {
        let mins: Vec<String> = rep.levels.iter().map(|l| format!("{:e}", l.min_f)).collect();
        Ok(format!(
            "Delta = {delta:.3}, base value {:.1} >= 16, min f per level [{}] >= [16, 48, 128]",
            rep.base_value,
            mins.join(", ")
        ))
    } else {
        Err(rep.failure.unwrap_or_default())
    }
}

fn bkm_codivergence() -> Verdict {
    let (run, _) = warmup();
    let bkm = run.summary.bkm.as_ref().ok_or("no blow-up, no co-divergence report")?;
    let ok = bkm.delta_decreasing && bkm.ratios.iter().all(|r| *r > BKM_FACTOR);
    let msg = format!("ratios {:?}, delta decreasing: {}", bkm.ratios, bkm.delta_decreasing);
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn oracle_self_consistency() -> Verdict {
    let mut worst_gamma = 0.0f64;
    for z in [1.0, 4.0, 8.0, 14.0] {
        let curve = solve_gamma(z, 1e-10).map_err(|e| e.to_string())?;
        for (t, v) in curve.grid.iter().zip(&curve.values) {
            let exact = gamma_closed_form(z, *t).unwrap().ok_or("closed form undefined on the ODE grid")?;
            worst_gamma = worst_gamma.max(((v - exact) / exact).abs());
        }
    }
    if worst_gamma > GAMMA_ODE_TOL {
        return Err(format!("Gamma ODE vs closed form {worst_gamma:.2e}"));
    }
    let g = solve_warmup_g(1e-10).map_err(|e| e.to_string())?;
    if g.max_energy_defect > ENERGY_TOL {
        return Err(format!("G energy defect {:.2e}", g.max_energy_defect));
    }
    let mut worst_picard = 0.0f64;
    for (c, l2, l3, t_max, n) in [(1.0 / 3.0, 9.0, 12.0, 0.5, 33), (1.0, 0.0, 20.0, 2.0, 41)] {
        let f = solve_f_picard(c, l2, l3, t_max, n, 1e-12).map_err(|e| e.to_string())?;
        worst_picard = worst_picard.max(f.picard.max_rel_diff);
    }
    if worst_picard > PICARD_TOL {
        return Err(format!("Picard vs method of lines {worst_picard:.2e}"));
    }
    Ok(format!("Gamma {worst_gamma:.2e}, energy {:.2e}, Picard {worst_picard:.2e}", g.max_energy_defect))
}

fn sweep_determinism() -> Verdict {
    let grid = |workers: usize| {
        format!(
            "[sweep]\nbeta1 = [1.0, 1.2, 1.6]\nbeta2 = [0.8, 0.9, 1.0]\nworkers = {workers}\n\
             [data]\nmarkers = 1024\n[solver]\nt_end = 0.05\n"
        )
    };
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).clamp(2, 9);
    let mut texts = Vec::new();
    let mut cells = Vec::new();
    for workers in [1, threads] {
        let cfg = SweepConfig::from_toml(&grid(workers)).map_err(|e| e.to_string())?;
        cells = run_sweep(&cfg).map_err(|e| e.to_string())?;
        texts.push(sweep_csv(&cells));
    }
    if texts[0] != texts[1] {
        return Err(format!("sweep.csv differs between 1 and {threads} workers"));
    }
    let unit = cells.iter().find(|c| c.beta1 == 1.0 && c.beta2 == 1.0).ok_or("missing (1, 1) cell")?;
    if unit.classification != Classification::Blowup {
        return Err(format!("(1, 1) classified {}", unit.classification.as_str()));
    }
    let outside: Vec<String> = cells
        .iter()
        .filter(|c| c.beta1 >= 2.0 * c.beta2)
        .map(|c| format!("({}, {}) {}", c.beta1, c.beta2, c.classification.as_str()))
        .collect();
    Ok(format!(
        "9 rows identical for 1 and {threads} workers; (1, 1) blowup at {:?}; outside the range (reported): {}",
        unit.t_est,
        outside.join(", ")
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    check: fn() -> Verdict,
}

fn main() {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "derivative identity", budget: secs(5), check: derivative_identity },
        Criterion { id: 2, name: "frame consistency", budget: secs(5), check: frame_consistency },
        Criterion { id: 3, name: "omega consistency", budget: secs(60), check: omega_consistency },
        Criterion { id: 4, name: "Gamma comparison", budget: secs(60), check: gamma_comparison },
        Criterion { id: 5, name: "warm-up blow-up", budget: secs(120), check: warmup_blowup },
        Criterion { id: 6, name: "positivity window", budget: secs(60), check: positivity_window },
        Criterion { id: 7, name: "f comparison", budget: secs(60), check: f_comparison },
        Criterion { id: 8, name: "induction ladder", budget: secs(30), check: induction_ladder },
        Criterion { id: 9, name: "indicator co-divergence", budget: secs(120), check: bkm_codivergence },
        Criterion { id: 10, name: "oracle self-consistency", budget: secs(30), check: oracle_self_consistency },
        Criterion { id: 11, name: "sweep determinism", budget: secs(300), check: sweep_determinism },
    ];
    let mut failed = 0;
    for c in &criteria {
        let (verdict, elapsed) = timed(c.check);
        // shared runs are charged to the first criterion that needs them
        let over = elapsed > c.budget;
        let (tag, msg) = match verdict {
            Ok(msg) if !over => ("PASS", msg),
            Ok(msg) => ("FAIL", format!("over budget; {msg}")),
            Err(msg) => ("FAIL", msg),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!(
            "[{tag}] criterion {:>2} {:<24} {:>7.2}s / {:>3}s  {msg}",
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    let shared = [("desk run", desk().1), ("warm-up run", warmup().1)];
    for (name, d) in shared {
        println!("        {name}: {:.2}s", d.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
