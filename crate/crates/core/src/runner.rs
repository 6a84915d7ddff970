//! Experiment dispatch and reproducible result files.
//!
//! Every run produces a [`RunRecord`]: command, tool version, RNG algorithm,
//! primary seed, the stream ids consumed, a config echo, and the results
//! payload. With an output path the record lands next to the data (CSV plus
//! a `.run.json` sidecar, or a single JSON file); without one the caller
//! prints the record.
//!
//! Reproducibility contract: rerunning the same config and seed yields
//! byte-identical CSV regardless of worker count, and an identical record up
//! to the `wall_ms` field. The config echo therefore omits `workers` and
//! `output_path`, which affect resources and file locations but never
//! results. CSV floats carry 17 significant digits, enough to round-trip
//! f64 exactly.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::Path;
use std::time::Instant;

use crate::chain::{
    least_exponent_distance, second_exponent_pair, spectrum_qr, top_exponent, ChainConfig,
    ExponentEstimate,
};
use crate::config::{Command, ExperimentConfig, OutputFormat};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{RngStream, RNG_ALGORITHM};
use crate::stats::{
    compare_spectrum, digamma, gaussian_reference, newman_exponents, ssb_exponent, tail_curve,
};
use crate::structure::{joint_lcd, lcd, small_ball_estimate, LcdQuery};

/// Default per-order spectrum verdict: |estimate - reference| within
/// max(SPECTRUM_STDERR_MULTIPLE * stderr, SPECTRUM_ABS_FLOOR).
pub const SPECTRUM_STDERR_MULTIPLE: f64 = 3.0;
pub const SPECTRUM_ABS_FLOOR: f64 = 5e-3;

/// Contiguous block of RNG stream ids a run consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StreamSpan {
    pub start: u64,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: &'static str,
    pub version: &'static str,
    pub rng_algorithm: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub streams: Option<StreamSpan>,
    pub config: Value,
    /// Wall-clock duration. The one field excluded from reproducibility
    /// comparisons.
    pub wall_ms: u64,
    pub results: Value,
}

/// One entry of the built-in validation suite.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    /// Validation checks (empty for every command except `validate`).
    pub checks: Vec<CheckResult>,
}

impl RunOutcome {
    pub fn failed_checks(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

struct CommandOutput {
    results: Value,
    seed: Option<u64>,
    streams: Option<StreamSpan>,
    csv_header: &'static str,
    csv_rows: Vec<String>,
    checks: Vec<CheckResult>,
}

/// Validates the config for `command`, executes it, and writes any output
/// files. Chain death in a single-run estimate surfaces as
/// [`Error::ChainDied`] before anything is written.
pub fn run(config: ExperimentConfig, command: Command) -> Result<RunOutcome> {
    let config = config.validated(command)?;
    let started = Instant::now();
    let out = dispatch(&config, command)?;
    let wall_ms = started.elapsed().as_millis() as u64;
    let record = RunRecord {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        rng_algorithm: RNG_ALGORITHM,
        seed: out.seed,
        streams: out.streams,
        config: echo_config(&config)?,
        wall_ms,
        results: out.results,
    };
    if let Some(path) = config.output_path.as_deref() {
        let format = config.format.unwrap_or(OutputFormat::Csv);
        write_outputs(&record, out.csv_header, &out.csv_rows, path, format)?;
    }
    Ok(RunOutcome { record, checks: out.checks })
}

/// Config echo for records and CSV headers, with the fields that cannot
/// change results stripped.
fn echo_config(config: &ExperimentConfig) -> Result<Value> {
    let mut echo = config.clone();
    echo.workers = None;
    echo.output_path = None;
    serde_json::to_value(&echo).map_err(|e| Error::Internal(format!("config echo: {e}")))
}

fn dispatch(config: &ExperimentConfig, command: Command) -> Result<CommandOutput> {
    match command {
        Command::Estimate | Command::Pair | Command::Least => single_chain(config, command),
        Command::Spectrum => spectrum(config),
        Command::Tail => tail(config),
        Command::Lcd => lcd_command(config),
        Command::Smallball => smallball(config),
        Command::Validate => validate(),
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn chain_of(config: &ExperimentConfig) -> Result<ChainConfig> {
    let spec = config.ensemble.as_ref().expect("validated").build()?;
    config.chain.as_ref().expect("validated").build(spec)
}

fn fail_on_death(est: &ExponentEstimate) -> Result<()> {
    match est.died_at {
        Some(step) => Err(Error::ChainDied { step }),
        None => Ok(()),
    }
}

fn estimate_row(est: &ExponentEstimate) -> String {
    format!(
        "{},{},{},{},{}",
        fmt_f64(est.value),
        fmt_f64(est.stderr),
        est.n_steps,
        est.dim,
        est.died
    )
}

fn single_chain(config: &ExperimentConfig, command: Command) -> Result<CommandOutput> {
    let chain = chain_of(config)?;
    let table = config.chain.as_ref().expect("validated");
    let x0 = table.x0.as_deref().map(DVector::from_column_slice);
    let y0 = table.y0.as_deref().map(DVector::from_column_slice);
    let est = match command {
        Command::Estimate => top_exponent(&chain, x0.as_ref())?,
        Command::Pair => second_exponent_pair(&chain, x0.as_ref(), y0.as_ref())?,
        Command::Least => least_exponent_distance(&chain)?,
        _ => unreachable!("single_chain handles estimate, pair, least"),
    };
    fail_on_death(&est)?;
    Ok(CommandOutput {
        results: serde_json::to_value(&est)
            .map_err(|e| Error::Internal(format!("results payload: {e}")))?,
        seed: Some(chain.seed),
        streams: Some(StreamSpan { start: chain.stream_id, count: 1 }),
        csv_header: "value,stderr,N,n,died",
        csv_rows: vec![estimate_row(&est)],
        checks: Vec::new(),
    })
}

fn spectrum(config: &ExperimentConfig) -> Result<CommandOutput> {
    let chain = chain_of(config)?;
    let dim = chain.ensemble.dim();
    let k = config.k.unwrap_or(dim);
    let estimates = spectrum_qr(&chain, k)?;
    for est in &estimates {
        fail_on_death(est)?;
    }
    let reference = gaussian_reference(&chain.ensemble).map(|mu| mu[..k].to_vec());
    let mut csv_rows = Vec::with_capacity(k);
    for (i, est) in estimates.iter().enumerate() {
        let (r, dev) = match &reference {
            Some(mu) => (fmt_f64(mu[i]), fmt_f64((est.value - mu[i]).abs())),
            None => (String::new(), String::new()),
        };
        csv_rows.push(format!(
            "{},{},{},{},{}",
            i + 1,
            fmt_f64(est.value),
            fmt_f64(est.stderr),
            r,
            dev
        ));
    }
    let results = match reference {
        Some(mu) => {
            let report =
                compare_spectrum(estimates, mu, SPECTRUM_STDERR_MULTIPLE, SPECTRUM_ABS_FLOOR)?;
            serde_json::to_value(&report)
        }
        None => serde_json::to_value(&json!({ "estimates": estimates })),
    }
    .map_err(|e| Error::Internal(format!("results payload: {e}")))?;
    Ok(CommandOutput {
        results,
        seed: Some(chain.seed),
        streams: Some(StreamSpan { start: chain.stream_id, count: 1 }),
        csv_header: "i,gamma_hat,stderr,ref,abs_dev",
        csv_rows,
        checks: Vec::new(),
    })
}

fn tail(config: &ExperimentConfig) -> Result<CommandOutput> {
    let chain = chain_of(config)?;
    let kind = config.kind.expect("validated");
    let t_grid = config.t_grid.as_deref().expect("validated");
    let trials = config.trials.expect("validated");
    let workers = config.workers.unwrap_or(0);
    let curve = tail_curve(&chain, kind, t_grid, trials, workers)?;
    let csv_rows = curve
        .t_grid
        .iter()
        .zip(curve.probs.iter().zip(&curve.stderrs))
        .map(|(t, (p, se))| {
            format!(
                "{},{},{},{},{}",
                fmt_f64(*t),
                fmt_f64(*p),
                fmt_f64(*se),
                curve.trials,
                fmt_f64(curve.died_fraction)
            )
        })
        .collect();
    Ok(CommandOutput {
        results: serde_json::to_value(&curve)
            .map_err(|e| Error::Internal(format!("results payload: {e}")))?,
        seed: Some(chain.seed),
        streams: Some(StreamSpan { start: 0, count: trials as u64 }),
        csv_header: "t,prob,stderr,trials,died_fraction",
        csv_rows,
        checks: Vec::new(),
    })
}

fn lcd_command(config: &ExperimentConfig) -> Result<CommandOutput> {
    let table = config.lcd.as_ref().expect("validated");
    let x = table.vector()?;
    let q = table.query()?;
    if table.angle_grid.is_some() && table.joint_with.is_none() {
        return Err(Error::Config("lcd.angle_grid needs lcd.joint_with".into()));
    }
    let result = match &table.joint_with {
        Some(y) => {
            let y = DVector::from_column_slice(y);
            joint_lcd(&x, &y, &q, table.angle_grid.unwrap_or(180))?
        }
        None => lcd(&x, &q)?,
    };
    let lattice = result
        .witness_lattice_point
        .as_ref()
        .map(|p| p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "))
        .unwrap_or_default();
    let row = format!(
        "{},{},{},{}",
        fmt_f64(result.value),
        result.witness_theta.map(fmt_f64).unwrap_or_default(),
        result.witness_phi.map(fmt_f64).unwrap_or_default(),
        lattice
    );
    Ok(CommandOutput {
        results: json!({
            "x": x.as_slice(),
            "joint_with": table.joint_with,
            "query": q,
            "result": result,
        }),
        seed: table.generator.and_then(|g| g.seed),
        streams: None,
        csv_header: "value,witness_theta,witness_phi,witness_lattice_point",
        csv_rows: vec![row],
        checks: Vec::new(),
    })
}

fn smallball(config: &ExperimentConfig) -> Result<CommandOutput> {
    let spec = config.ensemble.as_ref().expect("validated").build()?;
    let table = config.smallball.as_ref().expect("validated");
    let x = table.vector()?;
    let trials = config.trials.expect("validated");
    let seed = table.seed.unwrap_or(0);
    let workers = config.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    let estimate = pool.install(|| small_ball_estimate(&x, table.eps, &spec, trials, seed))?;
    let stderr_bound = 0.5 / (trials as f64).sqrt();
    let row = format!(
        "{},{},{},{}",
        fmt_f64(estimate),
        fmt_f64(table.eps),
        trials,
        x.len()
    );
    Ok(CommandOutput {
        results: json!({
            "x": x.as_slice(),
            "eps": table.eps,
            "trials": trials,
            "estimate": estimate,
            "stderr_bound": stderr_bound,
        }),
        seed: Some(seed),
        streams: Some(StreamSpan { start: 0, count: trials as u64 }),
        csv_header: "estimate,eps,trials,n",
        csv_rows: vec![row],
        checks: Vec::new(),
    })
}

/// Multiplies out A_N ... A_1 on the same stream the chain estimators read,
/// so the two sides of every equivalence check see identical factors.
fn explicit_product(chain: &ChainConfig) -> DMatrix<f64> {
    let dim = chain.ensemble.dim();
    let mut rng = RngStream::new(chain.seed, chain.stream_id).rng();
    let mut b = DMatrix::identity(dim, dim);
    for step in 0..chain.n_steps as u64 {
        let a = chain.ensemble.step_matrix(step, &mut rng);
        b = a * b;
    }
    b
}

fn validate() -> Result<CommandOutput> {
    let mut checks = Vec::new();
    let mut push = |name: &'static str, passed: bool, detail: String| {
        checks.push(CheckResult { name, passed, detail });
    };

    let euler_gamma = 0.577_215_664_901_532_9_f64;
    let d1 = (digamma(1.0)? + euler_gamma).abs();
    let dhalf = (digamma(0.5)? + euler_gamma + 2.0 * 2.0_f64.ln()).abs();
    let d2 = (digamma(2.0)? - 1.0 + euler_gamma).abs();
    push(
        "digamma_closed_forms",
        d1 < 1e-10 && dhalf < 1e-10 && d2 < 1e-10,
        format!("errors {d1:.2e} {dhalf:.2e} {d2:.2e}"),
    );

    let mu = newman_exponents(10)?;
    let monotone = mu.windows(2).all(|w| w[0] > w[1]);
    let mu2 = newman_exponents(2)?[0] + euler_gamma / 2.0;
    push(
        "reference_spectrum_shape",
        monotone && mu2.abs() < 1e-10,
        format!("monotone {monotone}, mu_1(2) error {:.2e}", mu2.abs()),
    );

    let ssb = (ssb_exponent(2, 1, 0.1, 1.0)? - 0.005).abs();
    push("symplectic_reference_value", ssb < 1e-15, format!("error {ssb:.2e}"));

    let doubling = ChainConfig::new(
        crate::ensembles::EnsembleSpec::fixed(DMatrix::identity(3, 3) * 2.0)?,
        4,
        0,
    );
    let est = top_exponent(&doubling, None)?;
    let dev = (est.value - 2.0_f64.ln()).abs();
    push("doubling_chain_exact", dev < 1e-12 && !est.died, format!("deviation {dev:.2e}"));

    let diag = ChainConfig::new(
        crate::ensembles::EnsembleSpec::fixed(DMatrix::from_diagonal(
            &DVector::from_column_slice(&[3.0, 2.0, 1.0]),
        ))?,
        5,
        0,
    );
    let ests = spectrum_qr(&diag, 3)?;
    let expect = [3.0_f64.ln(), 2.0_f64.ln(), 0.0];
    let worst = ests
        .iter()
        .zip(expect)
        .map(|(e, r)| (e.value - r).abs())
        .fold(0.0_f64, f64::max);
    push("diagonal_spectrum_exact", worst < 1e-12, format!("worst deviation {worst:.2e}"));

    let gauss = ChainConfig::new(crate::ensembles::EnsembleSpec::gaussian(3)?, 6, 123);
    let b = explicit_product(&gauss);
    let n = gauss.n_steps as f64;

    let top = top_exponent(&gauss, None)?;
    let top_oracle = b.column(0).norm().ln() / n;
    let top_dev = (top.value - top_oracle).abs();
    push("top_matches_explicit_product", top_dev < 1e-10, format!("deviation {top_dev:.2e}"));

    let pair = second_exponent_pair(&gauss, None, None)?;
    let pair_oracle =
        crate::chain::wedge_volume_2(&b.column(0).into_owned(), &b.column(1).into_owned()).ln() / n;
    let pair_dev = (pair.value - pair_oracle).abs();
    push("pair_matches_explicit_product", pair_dev < 1e-10, format!("deviation {pair_dev:.2e}"));

    let least = least_exponent_distance(&gauss)?;
    let basis = b.columns(0, 2).into_owned();
    let least_oracle = linalg::distance_to_span(&basis, &b.column(2).into_owned()).ln() / n;
    let least_dev = (least.value - least_oracle).abs();
    push(
        "least_matches_explicit_product",
        least_dev < 1e-8,
        format!("deviation {least_dev:.2e}"),
    );

    let full = spectrum_qr(&gauss, 3)?;
    let det_dev = match linalg::log_abs_det(&b) {
        Some(log_det) => (full.iter().map(|e| e.value).sum::<f64>() * n - log_det).abs(),
        None => f64::INFINITY,
    };
    push("determinant_identity", det_dev < 1e-8, format!("deviation {det_dev:.2e}"));

    let axis = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
    let q = LcdQuery { gamma: 0.5, kappa: 1.0, theta_max: 10.0, grid_step: 1e-3 };
    let r = lcd(&axis, &q)?;
    let lcd_dev = (r.value - 2.0 / 3.0).abs();
    push("lcd_axis_oracle", lcd_dev < 2e-3, format!("deviation {lcd_dev:.2e}"));

    let rerun = top_exponent(&gauss, None)?;
    push(
        "bitwise_reproducibility",
        rerun.value.to_bits() == top.value.to_bits(),
        format!("values {:?} and {:?}", top.value, rerun.value),
    );

    let failed = checks.iter().filter(|c| !c.passed).count();
    let csv_rows = checks
        .iter()
        .map(|c| format!("{},{},\"{}\"", c.name, c.passed, c.detail.replace('"', "\"\"")))
        .collect();
    Ok(CommandOutput {
        results: json!({ "checks": checks, "failed": failed }),
        seed: None,
        streams: None,
        csv_header: "check,passed,detail",
        csv_rows,
        checks,
    })
}

fn write_outputs(
    record: &RunRecord,
    csv_header: &str,
    csv_rows: &[String],
    path: &Path,
    format: OutputFormat,
) -> Result<()> {
    let record_json = serde_json::to_string_pretty(record)
        .map_err(|e| Error::Internal(format!("run record: {e}")))?;
    match format {
        OutputFormat::Csv => {
            let config_line = serde_json::to_string(&record.config)
                .map_err(|e| Error::Internal(format!("config echo: {e}")))?;
            let mut text = String::new();
            text.push_str(&format!("# tool: lyapsim {}\n", record.version));
            text.push_str(&format!("# command: {}\n", record.command));
            text.push_str(&format!("# rng: {}\n", record.rng_algorithm));
            if let Some(seed) = record.seed {
                text.push_str(&format!("# seed: {seed}\n"));
            }
            text.push_str(&format!("# config: {config_line}\n"));
            text.push_str(csv_header);
            text.push('\n');
            for row in csv_rows {
                text.push_str(row);
                text.push('\n');
            }
            std::fs::write(path, text)?;
            std::fs::write(path.with_extension("run.json"), record_json + "\n")?;
        }
        OutputFormat::Json => {
            std::fs::write(path, record_json + "\n")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn parse(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(text).unwrap()
    }

    #[test]
    fn validate_suite_passes() {
        let outcome = run(parse(""), Command::Validate).unwrap();
        assert!(outcome.checks.len() >= 10);
        for check in &outcome.checks {
            assert!(check.passed, "{} failed: {}", check.name, check.detail);
        }
        assert_eq!(outcome.failed_checks(), 0);
    }

    #[test]
    fn estimate_run_produces_a_record() {
        let text = r#"
            [ensemble]
            family = "gaussian"
            n = 4

            [chain]
            N = 50
            seed = 3
        "#;
        let outcome = run(parse(text), Command::Estimate).unwrap();
        assert_eq!(outcome.record.command, "estimate");
        assert_eq!(outcome.record.seed, Some(3));
        assert_eq!(outcome.record.rng_algorithm, "chacha12");
        let value = outcome.record.results["value"].as_f64().unwrap();
        assert!(value.is_finite());
        // The echo drops resource knobs but keeps the experiment.
        assert!(outcome.record.config.get("workers").is_none());
        assert_eq!(outcome.record.config["chain"]["N"], 50);
    }

    #[test]
    fn chain_death_in_single_run_mode_is_an_error() {
        let text = r#"
            [ensemble]
            family = "rademacher"
            n = 2

            [chain]
            N = 300
            seed = 1
        "#;
        // Rademacher 2x2 factors are singular half the time, so the least
        // chain dies almost immediately.
        match run(parse(text), Command::Least) {
            Err(Error::ChainDied { step }) => assert!(step >= 1),
            other => panic!("expected chain death, got {other:?}"),
        }
    }

    #[test]
    fn csv_and_sidecar_are_written(){
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.csv");
        let text = format!(
            r#"
            k = 2
            output_path = "{}"

            [ensemble]
            family = "gaussian"
            n = 3

            [chain]
            N = 40
            seed = 9
            "#,
            path.display()
        );
        run(parse(&text), Command::Spectrum).unwrap();
        let csv = std::fs::read_to_string(&path).unwrap();
        assert!(csv.starts_with("# tool: lyapsim"));
        assert!(csv.contains("i,gamma_hat,stderr,ref,abs_dev"));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
        let sidecar = std::fs::read_to_string(dir.path().join("spec.run.json")).unwrap();
        let record: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
        assert_eq!(record["command"], "spectrum");
        assert!(record["results"]["within_tolerance"].is_boolean());
    }

    #[test]
    fn rerun_is_byte_identical_modulo_wall_ms() {
        let dir = tempfile::tempdir().unwrap();
        let mk = |name: &str, workers: usize| {
            let path = dir.path().join(name);
            let text = format!(
                r#"
                kind = "top"
                t_grid = [0.05, 0.1]
                trials = 120
                workers = {workers}
                output_path = "{}"

                [ensemble]
                family = "gaussian"
                n = 3

                [chain]
                N = 25
                seed = 4
                "#,
                path.display()
            );
            run(parse(&text), Command::Tail).unwrap();
            std::fs::read_to_string(&path).unwrap()
        };
        let a = mk("a.csv", 1);
        let b = mk("b.csv", 4);
        assert_eq!(a, b);
    }

    #[test]
    fn lcd_run_reports_witness_fields() {
        let text = r#"
            [lcd]
            x = [1.0, 0.0]
            gamma = 0.5
            kappa = 1.0
            theta_max = 10.0
            grid_step = 0.001
        "#;
        let outcome = run(parse(text), Command::Lcd).unwrap();
        let value = outcome.record.results["result"]["value"].as_f64().unwrap();
        assert!((value - 2.0 / 3.0).abs() < 2e-3);
        assert!(outcome.record.results["result"]["witness_theta"].is_f64());
    }

    #[test]
    fn smallball_run_matches_direct_call() {
        let text = r#"
            trials = 2000

            [ensemble]
            family = "rademacher"
            n = 10

            [smallball]
            generator = { kind = "ones", n = 10 }
            eps = 0.1
            seed = 5
        "#;
        let outcome = run(parse(text), Command::Smallball).unwrap();
        let est = outcome.record.results["estimate"].as_f64().unwrap();
        let direct = small_ball_estimate(
            &DVector::from_element(10, 1.0 / 10.0_f64.sqrt()),
            0.1,
            &crate::ensembles::EnsembleSpec::rademacher(10).unwrap(),
            2000,
            5,
        )
        .unwrap();
        assert_eq!(est.to_bits(), direct.to_bits());
    }

    #[test]
    fn missing_output_directory_is_an_io_error() {
        let text = r#"
            output_path = "/nonexistent-dir-for-sure/x.csv"

            [ensemble]
            family = "gaussian"
            n = 3

            [chain]
            N = 10
            seed = 0
        "#;
        assert!(matches!(run(parse(text), Command::Estimate), Err(Error::Io(_))));
    }
}
