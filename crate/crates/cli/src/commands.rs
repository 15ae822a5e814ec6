use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use pancake_core::design::{
    find_mostly_uniform_design, find_uniform_design, gauss_hermite, max_matchable_moments, MomentBudget, SearchOptions,
};
use pancake_core::hermite::gaussian_moment;
use pancake_core::pancakes::{make_instance, Direction, NullSampler, Sampler};
use pancake_core::tester::{
    calibrate_thresholds, calibrated_norm_threshold, choose_order_budget, repetitions_for, trial_seed, trial_verdicts,
    worst_case_thresholds, Calibration, CheckRecord,
};
use pancake_core::verify::run_suite;
use pancake_core::{DesignResult, DiscreteDist1D, Distribution1D, Gmm1D, Hypothesis, PancakeInstance, TestConfig};

use crate::args::{
    CalibrateArgs, Command, DesignArgs, InspectArgs, InstanceCommand, MakeArgs, MomentTarget, QuadratureArgs,
    SampleArgs, SampleFormat, TestArgs, VerifyArgs,
};
use crate::error::{CliError, CliResult};

/// Collects the files a run writes, in order.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Write { path, source })?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn names(&self) -> &[String] {
        &self.written
    }
}

pub fn execute(cmd: &Command, seed: u64, out: &mut Outputs) -> CliResult<()> {
    match cmd {
        Command::Quadrature(a) => quadrature(a, out),
        Command::Design(a) => design(a, seed, out),
        Command::Instance(InstanceCommand::Make(a)) => instance_make(a, seed, out),
        Command::Instance(InstanceCommand::Inspect(a)) => instance_inspect(a, out),
        Command::Sample(a) => sample(a, seed, out),
        Command::Calibrate(a) => calibrate(a, seed, out),
        Command::Test(a) => test(a, seed, out),
        Command::Verify(a) => verify(a, seed, out),
    }
}

fn quadrature(a: &QuadratureArgs, out: &mut Outputs) -> CliResult<()> {
    if a.t == 0 {
        return Err(CliError::usage("--t must be at least 1"));
    }
    let dist = gauss_hermite(a.t)?;
    let mut csv = String::from("order,exact,computed,abs_error\n");
    for i in 0..2 * a.t {
        let exact = gaussian_moment(i);
        let computed = dist.raw_moment(i);
        writeln!(csv, "{i},{exact},{computed},{}", (computed - exact).abs()).expect("string write");
    }
    out.write_json("quadrature.json", &dist)?;
    out.write("quadrature_moments.csv", csv.as_bytes())?;
    println!("t = {}: nodes {:?}", a.t, dist.points());
    Ok(())
}

fn design(a: &DesignArgs, seed: u64, out: &mut Outputs) -> CliResult<()> {
    match a.m {
        MomentTarget::Order(m) => {
            let res = search_design(a.k, a.kp, m, a.tol, a.restarts, seed)?;
            out.write_json("design.json", &res)?;
            println!("k = {}, k' = {}, m = {}: {:?}", a.k, a.kp, m, res.status);
        }
        MomentTarget::Max => {
            let budget = MomentBudget {
                restarts: a.restarts,
                max_m: a.m_budget,
                seed,
            };
            let row = max_matchable_moments(a.k, a.kp, a.tol, &budget)?;
            out.write_json("design_max.json", &row)?;
            let csv = format!(
                "k,k_prime,m_star,stop_status\n{},{},{},{:?}\n",
                row.k, row.free_count, row.m_star, row.stop_status
            );
            out.write("design_max.csv", csv.as_bytes())?;
            println!(
                "k = {}, k' = {}: m* = {} ({:?} above)",
                a.k, a.kp, row.m_star, row.stop_status
            );
        }
    }
    Ok(())
}

fn search_design(k: usize, kp: usize, m: usize, tol: f64, restarts: usize, seed: u64) -> CliResult<DesignResult> {
    let opts = SearchOptions::new(tol, restarts, seed);
    Ok(if kp == 0 {
        find_uniform_design(k, m, &opts)?
    } else {
        find_mostly_uniform_design(k, kp, m, &opts)?
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn load_design(path: &Path) -> CliResult<DiscreteDist1D> {
    let text = read_text(path)?;
    if let Ok(res) = serde_json::from_str::<DesignResult>(&text) {
        return res.dist.ok_or_else(|| {
            CliError::usage(format!(
                "{} holds a {:?} result with no design",
                path.display(),
                res.status
            ))
        });
    }
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: not a design: {e}", path.display())))
}

fn parse_direction(spec: &str, d: usize) -> CliResult<Direction> {
    if spec == "random" {
        return Ok(Direction::Random);
    }
    if let Some(j) = spec.strip_prefix("axis:") {
        let j: usize = j
            .parse()
            .map_err(|_| CliError::usage(format!("bad axis in --direction `{spec}`")))?;
        if j >= d {
            return Err(CliError::usage(format!("axis {j} out of range for d = {d}")));
        }
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        return Ok(Direction::Explicit(v));
    }
    let v = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| {
            CliError::usage(format!(
                "--direction must be `random`, `axis:J` or a vector, got `{spec}`"
            ))
        })?;
    Ok(Direction::Explicit(v))
}

fn instance_make(a: &MakeArgs, seed: u64, out: &mut Outputs) -> CliResult<()> {
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(CliError::usage(format!("--delta must lie in (0, 1), got {}", a.delta)));
    }
    let design = match &a.design {
        Some(path) => load_design(path)?,
        None => match a.m {
            MomentTarget::Order(m) => search_design(a.k, a.kp, m, a.tol, a.restarts, seed)?
                .dist
                .ok_or_else(|| CliError::usage(format!("no design with k = {}, k' = {}, m = {m}", a.k, a.kp)))?,
            MomentTarget::Max => {
                let budget = MomentBudget {
                    restarts: a.restarts,
                    seed,
                    ..MomentBudget::default()
                };
                max_matchable_moments(a.k, a.kp, a.tol, &budget)?
                    .witness
                    .ok_or_else(|| CliError::usage(format!("no design with k = {}, k' = {}", a.k, a.kp)))?
            }
        },
    };
    // ou_smooth(design, sqrt(delta)) would round delta through a square
    let rho = a.delta.sqrt();
    let base = Gmm1D::new(
        design.points().iter().map(|x| rho * x).collect(),
        design.weights().to_vec(),
        a.delta,
    )?;
    let inst = make_instance(base, a.d, parse_direction(&a.direction, a.d)?, seed)?;
    out.write_json("instance.json", &inst)?;
    println!(
        "instance: d = {}, k = {}, delta = {}",
        inst.d(),
        design.len(),
        inst.delta()
    );
    Ok(())
}

/// `k'` is not stored in the instance; it is read off the weights as the
/// number of points outside the largest block of equal weights.
fn inferred_free_count(weights: &[f64]) -> usize {
    let mut sorted = weights.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut best = 1;
    let mut run = 1;
    for w in sorted.windows(2) {
        if (w[1] - w[0]).abs() <= 1e-12 {
            run += 1;
        } else {
            run = 1;
        }
        best = best.max(run);
    }
    if best == 1 {
        weights.len().saturating_sub(1)
    } else {
        weights.len() - best
    }
}

fn load_instance(path: &Path) -> CliResult<PancakeInstance> {
    let text = read_text(path)?;
    PancakeInstance::from_json(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn instance_inspect(a: &InspectArgs, out: &mut Outputs) -> CliResult<()> {
    let inst = load_instance(&a.instance)?;
    let base = inst.base();
    let k = base.centers().len();
    let kp = inferred_free_count(base.weights());
    let m = a.m_budget.unwrap_or_else(|| choose_order_budget(k, kp, a.c_order));
    let hermite = base.moment_gap_profile(m + 1);
    let raw = base.raw_moment_gaps(m + 1);
    let report = json!({
        "d": inst.d(),
        "k": k,
        "k_prime": kp,
        "delta": inst.delta(),
        "min_weight": base.min_weight(),
        "order_budget": m,
        "hermite_gaps": hermite,
        "raw_moment_gaps": raw,
    });
    out.write_json("inspect.json", &report)?;
    println!(
        "k = {k}, k' = {kp}, delta = {}, w_min = {}",
        inst.delta(),
        base.min_weight()
    );
    println!("order,hermite_gap,raw_moment_gap");
    for (i, (h, r)) in hermite.iter().zip(&raw).enumerate() {
        println!("{},{h:e},{r:e}", i + 1);
    }
    Ok(())
}

enum Source {
    Instance(PancakeInstance),
    Null(NullSampler),
}

impl Source {
    fn sampler(&self) -> &dyn Sampler {
        match self {
            Source::Instance(i) => i,
            Source::Null(n) => n,
        }
    }
}

fn open_source(source: &str, d: Option<usize>) -> CliResult<Source> {
    if source == "null" {
        let d = d.ok_or_else(|| CliError::usage("the null source needs --d"))?;
        if d == 0 {
            return Err(CliError::usage("--d must be positive"));
        }
        return Ok(Source::Null(NullSampler { d }));
    }
    let inst = load_instance(Path::new(source))?;
    if let Some(d) = d {
        if d != inst.d() {
            return Err(CliError::usage(format!(
                "--d {d} disagrees with the instance's d = {}",
                inst.d()
            )));
        }
    }
    Ok(Source::Instance(inst))
}

fn sample(a: &SampleArgs, seed: u64, out: &mut Outputs) -> CliResult<()> {
    if a.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let source = open_source(&a.source, a.d)?;
    let x = source.sampler().sample(a.n, seed);
    let (n, d) = x.dim();
    match a.format {
        SampleFormat::Bin => {
            // one JSON header line, then n*d little-endian f64 in row-major order
            let header = json!({"n": n, "d": d, "seed": seed, "dtype": "f64le", "layout": "row-major"});
            let mut bytes = Vec::with_capacity(64 + 8 * n * d);
            writeln!(bytes, "{header}").expect("vec write");
            for v in x.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            out.write("samples.bin", &bytes)?;
        }
        SampleFormat::Csv => {
            let mut text = String::with_capacity(24 * n * d);
            let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
            text.push_str(&names.join(","));
            text.push('\n');
            for row in x.rows() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            out.write("samples.csv", text.as_bytes())?;
        }
    }
    println!("{n} x {d} samples");
    Ok(())
}

fn calibrate(a: &CalibrateArgs, seed: u64, out: &mut Outputs) -> CliResult<()> {
    let orders: Vec<usize> = (1..=a.m_budget + 1).collect();
    let mut cal = calibrate_thresholds(a.d, &orders, a.n, a.trials, a.quantile, seed)?;
    cal.norm_threshold = calibrated_norm_threshold(a.d, a.n, a.trials, a.quantile, a.norm_c1, a.norm_c2);
    let mut csv = String::from("d,order,n,quantile,trials,threshold\n");
    for r in &cal.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.d, r.order, r.n, r.quantile, r.trials, r.threshold
        )
        .expect("string write");
    }
    out.write_json("calibration.json", &cal)?;
    out.write("calibration.csv", csv.as_bytes())?;
    print!("{csv}");
    println!("norm threshold {}", cal.norm_threshold);
    Ok(())
}

#[derive(Serialize)]
struct TrialLine<'a> {
    trial: usize,
    seed: u64,
    hypothesis: Hypothesis,
    firing_order: Option<usize>,
    firing_entry: &'a Option<Vec<usize>>,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    trial: usize,
    #[serde(flatten)]
    record: &'a CheckRecord,
}

fn test(a: &TestArgs, seed: u64, out: &mut Outputs) -> CliResult<()> {
    let calibration: Option<Calibration> = match (&a.calibration, a.paper_thresholds) {
        (Some(_), true) => {
            return Err(CliError::usage(
                "--calibration and --paper-thresholds are mutually exclusive",
            ));
        }
        (None, false) => {
            return Err(CliError::usage(
                "a calibration table (--calibration) or --paper-thresholds is required",
            ));
        }
        (Some(path), false) => Some(
            serde_json::from_str(&read_text(path)?)
                .map_err(|e| CliError::usage(format!("{}: malformed calibration: {e}", path.display())))?,
        ),
        (None, true) => None,
    };
    if a.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let source = open_source(&a.source, a.d.or(calibration.as_ref().map(|c| c.d)))?;
    let d = source.sampler().dim();
    let (budget_default, min_weight, instance_delta) = match &source {
        Source::Instance(inst) => {
            let w = inst.base().weights();
            (
                choose_order_budget(w.len(), inferred_free_count(w), a.c_order),
                inst.base().min_weight(),
                Some(inst.delta()),
            )
        }
        Source::Null(_) => {
            let from_table = calibration.as_ref().and_then(|c| c.rows.iter().map(|r| r.order).max());
            (from_table.map_or(4, |o| o.saturating_sub(1)), 1.0, None)
        }
    };
    let m = a.m_budget.unwrap_or(budget_default);

    let cfg = match &calibration {
        Some(cal) => {
            if cal.d != d {
                return Err(CliError::usage(format!(
                    "calibration is for d = {}, source has d = {d}",
                    cal.d
                )));
            }
            if let Some(n) = a.n {
                if n != cal.n {
                    return Err(CliError::usage(format!(
                        "--n {n} disagrees with the calibration's n = {}",
                        cal.n
                    )));
                }
            }
            TestConfig::calibrated(cal, m, a.tau, min_weight, seed).map_err(|e| CliError::usage(e.to_string()))?
        }
        None => {
            let delta = a
                .delta
                .or(instance_delta)
                .ok_or_else(|| CliError::usage("--paper-thresholds on the null source needs --delta"))?;
            let n = a.n.unwrap_or(20_000);
            let (entry_thresholds, norm_threshold) = worst_case_thresholds(d, m, n, delta, a.c_threshold);
            let cfg = TestConfig {
                order_budget: m,
                tau: a.tau,
                n,
                entry_thresholds,
                norm_threshold,
                min_weight,
                repetitions: repetitions_for(m, a.tau),
                seed,
            };
            cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
            cfg
        }
    };

    let verdicts = trial_verdicts(source.sampler(), &cfg, a.trials, seed)?;
    let mut lines = String::new();
    let mut trace = String::new();
    let mut firing: BTreeMap<String, usize> = BTreeMap::new();
    let mut h1 = 0;
    for (t, v) in verdicts.iter().enumerate() {
        let line = TrialLine {
            trial: t,
            seed: trial_seed(seed, t),
            hypothesis: v.hypothesis,
            firing_order: v.firing_order,
            firing_entry: &v.firing_entry,
        };
        lines.push_str(&serde_json::to_string(&line)?);
        lines.push('\n');
        for order in &v.trace {
            for record in &order.records {
                trace.push_str(&serde_json::to_string(&TraceLine { trial: t, record })?);
                trace.push('\n');
            }
        }
        if v.hypothesis == Hypothesis::H1 {
            h1 += 1;
        }
        let key = v.firing_order.map_or_else(|| "none".to_string(), |o| o.to_string());
        *firing.entry(key).or_insert(0) += 1;
    }
    let trials = verdicts.len() as f64;
    let summary = json!({
        "trials": verdicts.len(),
        "h0_rate": (verdicts.len() - h1) as f64 / trials,
        "h1_rate": h1 as f64 / trials,
        "firing_orders": firing,
        "config": cfg,
    });
    out.write("verdicts.jsonl", lines.as_bytes())?;
    out.write("trace.jsonl", trace.as_bytes())?;
    out.write_json("test_summary.json", &summary)?;
    println!(
        "{} trials: H0 rate {}, H1 rate {}, firing orders {:?}",
        verdicts.len(),
        summary["h0_rate"],
        summary["h1_rate"],
        firing
    );
    Ok(())
}

fn verify(a: &VerifyArgs, seed: u64, out: &mut Outputs) -> CliResult<()> {
    let reports = run_suite(&a.suite, seed).map_err(|e| CliError::usage(e.to_string()))?;
    let mut lines = String::new();
    let mut csv = String::from("name,lhs,rhs,margin,pass\n");
    for r in &reports {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    out.write("verify.jsonl", lines.as_bytes())?;
    out.write("verify_summary.csv", csv.as_bytes())?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    println!("{} checks, {} failed", reports.len(), failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::VerificationFailed(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_count_from_weights() {
        assert_eq!(inferred_free_count(&[0.5, 0.5]), 0);
        assert_eq!(inferred_free_count(&[0.2, 0.3, 0.25, 0.25]), 2);
        assert_eq!(inferred_free_count(&[0.7, 0.3]), 1);
    }

    #[test]
    fn direction_specs() {
        assert!(matches!(parse_direction("random", 3).unwrap(), Direction::Random));
        match parse_direction("axis:1", 3).unwrap() {
            Direction::Explicit(v) => assert_eq!(v, vec![0.0, 1.0, 0.0]),
            Direction::Random => panic!("expected explicit"),
        }
        assert!(parse_direction("axis:3", 3).is_err());
        assert!(parse_direction("1,x", 2).is_err());
    }
}
