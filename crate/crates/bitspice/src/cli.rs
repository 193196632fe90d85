//! Command-line front end: `simulate`, `quantize`, `estimate` and `bench`
//! subcommands over the library, sharing one declarative [`RunConfig`].
//!
//! Precedence for every setting is defaults < config file < explicit flag.
//! Each command writes `resolved.toml`, the fully merged configuration it
//! actually ran with, next to its outputs, so a run can be reproduced from
//! its output directory alone.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{
    draw_threshold, monte_carlo, periodogram_amplitudes, run_trial, write_results_csv, Algorithm,
    ModelKind, Scenario, ThresholdKind,
};
use crate::files::{
    read_complex, write_complex, write_estimate_csv, write_scene, write_trace_csv, EstimateHeader,
};
use crate::onebit::{onebit_estimate, OneBitEstimate, OneBitVariant, SolverKind};
use crate::quantizer::{signc, SignedMeasurements};
use crate::waveforms::add_noise;
use crate::{bench, Error, Result};

/// One reproducible run: the scenario plus everything around it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Algorithm labels, e.g. "1bslim" or "spice".
    #[serde(default)]
    pub algorithms: Vec<String>,
    /// Trial seeds. Mandatory for `bench`; single-realization commands use
    /// the first entry.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads for `bench`. Output never depends on it.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_jobs() -> usize {
    1
}

/// Config file shape: every part optional so flags and defaults can fill
/// the rest in.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<Scenario>,
    algorithms: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    output_dir: Option<PathBuf>,
    jobs: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(
    name = "bitspice",
    version,
    about = "Sparse range-Doppler estimation from one-bit radar data"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Draw a scene and write its noisy high-precision measurements.
    Simulate(CommonArgs),
    /// One-bit quantize a measurement file against a drawn threshold.
    Quantize(QuantizeArgs),
    /// Run one estimator on quantized data.
    Estimate(EstimateArgs),
    /// Seeded Monte Carlo benchmark over algorithms and SNRs.
    Bench(BenchArgs),
}

/// Flags shared by all commands; each mirrors a [`RunConfig`] field and
/// overrides both the built-in defaults and the config file.
#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run config; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario preset: "sinusoids" (five-tone line spectrum) or "pmcw"
    /// (coded range-Doppler scatter). Replaces the config file's scenario.
    #[arg(long)]
    scenario: Option<String>,
    /// Signal model: lfmcw | pmcw.
    #[arg(long)]
    model: Option<String>,
    /// Fast-time samples per PRI.
    #[arg(long)]
    n1: Option<usize>,
    /// Slow-time PRI count.
    #[arg(long)]
    n2: Option<usize>,
    /// Range grid size.
    #[arg(long)]
    kr_bins: Option<usize>,
    /// Doppler grid size.
    #[arg(long)]
    kd_bins: Option<usize>,
    /// SNR sweep in dB.
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    /// Threshold scheme: per_sample | per_pri | zero.
    #[arg(long)]
    threshold: Option<String>,
    /// Linear-system backend: dense | cgls.
    #[arg(long)]
    solver: Option<String>,
    /// Power regularizer of the estimators.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Convergence tolerance on the relative power change.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Estimator iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Trial seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Where outputs and the resolved config land.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct QuantizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Measurement file to quantize; defaults to <output-dir>/data.csv.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Algorithm label; falls back to the config's algorithm list when that
    /// names exactly one.
    #[arg(long)]
    algorithm: Option<String>,
    /// Sign data file; defaults to <output-dir>/signed.csv.
    #[arg(long)]
    signed: Option<PathBuf>,
    /// Threshold file; defaults to <output-dir>/threshold.csv.
    #[arg(long)]
    threshold_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Algorithm labels to benchmark.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    /// Worker threads; results never depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_model(s: &str) -> Result<ModelKind> {
    match s {
        "lfmcw" => Ok(ModelKind::Lfmcw),
        "pmcw" => Ok(ModelKind::Pmcw),
        other => Err(Error::Config(format!("unknown model \"{other}\"; use lfmcw or pmcw"))),
    }
}

fn parse_threshold(s: &str) -> Result<ThresholdKind> {
    match s {
        "per_sample" => Ok(ThresholdKind::PerSample),
        "per_pri" => Ok(ThresholdKind::PerPri),
        "zero" => Ok(ThresholdKind::Zero),
        other => Err(Error::Config(format!(
            "unknown threshold scheme \"{other}\"; use per_sample, per_pri or zero"
        ))),
    }
}

fn parse_solver(s: &str) -> Result<SolverKind> {
    match s {
        "dense" => Ok(SolverKind::Dense),
        "cgls" => Ok(SolverKind::Cgls),
        other => Err(Error::Config(format!("unknown solver \"{other}\"; use dense or cgls"))),
    }
}

fn preset(name: &str) -> Result<Scenario> {
    match name {
        "sinusoids" => Ok(Scenario::five_sinusoids(1024, vec![20.0])),
        "pmcw" => Ok(Scenario::pmcw_scatter(vec![15.0])),
        other => {
            Err(Error::Config(format!("unknown scenario \"{other}\"; use sinusoids or pmcw")))
        }
    }
}

fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Merge defaults, config file and flags into the config the command runs
/// with, strongest last.
fn resolve(common: &CommonArgs) -> Result<RunConfig> {
    let file = match &common.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };
    let mut scenario = match (&common.scenario, file.scenario) {
        (Some(name), _) => preset(name)?,
        (None, Some(s)) => s,
        (None, None) => preset("sinusoids")?,
    };
    if let Some(m) = &common.model {
        scenario.model = parse_model(m)?;
    }
    if let Some(n1) = common.n1 {
        scenario.n1 = n1;
    }
    if let Some(n2) = common.n2 {
        scenario.n2 = n2;
    }
    if let Some(kr) = common.kr_bins {
        scenario.kr_bins = kr;
    }
    if let Some(kd) = common.kd_bins {
        scenario.kd_bins = kd;
    }
    if let Some(snr) = &common.snr {
        scenario.snr_db = snr.clone();
    }
    if let Some(t) = &common.threshold {
        scenario.threshold = parse_threshold(t)?;
    }
    if let Some(s) = &common.solver {
        scenario.solver = parse_solver(s)?;
    }
    if let Some(eps) = common.epsilon {
        scenario.epsilon = eps;
    }
    if let Some(tol) = common.rel_tol {
        scenario.rel_tol = tol;
    }
    if let Some(it) = common.max_iter {
        scenario.max_iter = it;
    }
    scenario.validate()?;

    Ok(RunConfig {
        scenario,
        algorithms: file.algorithms.unwrap_or_default(),
        seeds: common.seeds.clone().or(file.seeds).unwrap_or_default(),
        output_dir: common
            .output_dir
            .clone()
            .or(file.output_dir)
            .unwrap_or_else(default_output_dir),
        jobs: file.jobs.unwrap_or_else(default_jobs),
    })
}

/// Persist the merged config so the run is reproducible from its outputs.
fn echo_config(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.output_dir)?;
    let text = toml::to_string_pretty(config)
        .map_err(|e| Error::Config(format!("config serialization failed: {e}")))?;
    std::fs::write(config.output_dir.join("resolved.toml"), text)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulateMeta {
    seed: u64,
    snr_db: f64,
    signal_power: f64,
    sigma2: f64,
    n_samples: usize,
}

#[derive(Debug, Serialize)]
struct QuantizeMeta {
    seed: u64,
    h_max: f64,
    n_samples: usize,
}

fn write_meta<T: Serialize>(dir: &Path, meta: &T) -> Result<()> {
    let text = toml::to_string_pretty(meta)
        .map_err(|e| Error::Config(format!("meta serialization failed: {e}")))?;
    std::fs::write(dir.join("meta.toml"), text)?;
    Ok(())
}

/// Seed for the single-realization commands: first of the seed list, 1 when
/// none was given.
fn single_seed(config: &RunConfig) -> u64 {
    config.seeds.first().copied().unwrap_or(1)
}

fn cmd_simulate(config: &RunConfig) -> Result<()> {
    let scenario = &config.scenario;
    let seed = single_seed(config);
    let snr_db = scenario.snr_db[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = scenario.draw_scene(&mut rng)?;
    let y = scenario.synthesize(&scene)?;
    let signal_power: f64 = scene.targets.iter().map(|t| t.amp.norm_sqr()).sum();
    // A zero-target scene still gets noise: scale it as if a unit-power
    // signal were present.
    let reference = if signal_power > 0.0 { signal_power } else { 1.0 };
    let (y_noisy, sigma2) = add_noise(&y, snr_db, reference, &mut rng);

    let dir = &config.output_dir;
    write_scene(&dir.join("scene.csv"), &scene)?;
    write_complex(&dir.join("data.csv"), &y_noisy)?;
    write_meta(dir, &SimulateMeta { seed, snr_db, signal_power, sigma2, n_samples: y_noisy.len() })?;
    println!("simulate: {} samples, {} targets -> {}", y_noisy.len(), scene.targets.len(), dir.display());
    Ok(())
}

fn cmd_quantize(config: &RunConfig, data: Option<&Path>) -> Result<()> {
    let scenario = &config.scenario;
    let seed = single_seed(config);
    let dir = &config.output_dir;
    let default_data = dir.join("data.csv");
    let data_path = data.unwrap_or(&default_data);
    let y = read_complex(data_path)?;
    if y.is_empty() {
        return Err(Error::InvalidArgument(format!("{} holds no samples", data_path.display())));
    }
    if scenario.threshold == ThresholdKind::PerPri && y.len() != scenario.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "per-PRI threshold needs n1*n2 = {} samples, data file has {}",
            scenario.n_samples(),
            y.len()
        )));
    }
    let power = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
    if power == 0.0 && scenario.threshold != ThresholdKind::Zero {
        return Err(Error::InvalidArgument(
            "data file has zero power; cannot scale the threshold alphabet".into(),
        ));
    }
    // Same convention as the benchmark harness: half the rms amplitude.
    let h_max = 0.5 * power.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let threshold = draw_threshold(scenario, y.len(), h_max, &mut rng);
    let z = signc(&y, &threshold)?;

    write_complex(&dir.join("signed.csv"), &z.z)?;
    write_complex(&dir.join("threshold.csv"), &threshold.values)?;
    write_meta(dir, &QuantizeMeta { seed, h_max, n_samples: y.len() })?;
    println!("quantize: {} samples -> {}", y.len(), dir.display());
    Ok(())
}

fn read_signed(path: &Path) -> Result<SignedMeasurements> {
    let z = read_complex(path)?;
    for (i, v) in z.iter().enumerate() {
        if v.re.abs() != 1.0 || v.im.abs() != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "{}: entry {i} is {v}, not a complex sign",
                path.display()
            )));
        }
    }
    Ok(SignedMeasurements { z })
}

fn cmd_estimate(config: &RunConfig, args: &EstimateArgs) -> Result<()> {
    let scenario = &config.scenario;
    let dir = &config.output_dir;
    let label = match (&args.algorithm, config.algorithms.as_slice()) {
        (Some(name), _) => name.clone(),
        (None, [single]) => single.clone(),
        (None, []) => return Err(Error::Config("estimate needs --algorithm".into())),
        (None, _) => {
            return Err(Error::Config(
                "config lists several algorithms; pick one with --algorithm".into(),
            ))
        }
    };
    let algorithm = Algorithm::parse(&label)?;

    let default_signed = dir.join("signed.csv");
    let default_threshold = dir.join("threshold.csv");
    let signed_path = args.signed.as_deref().unwrap_or(&default_signed);
    let threshold_path = args.threshold_file.as_deref().unwrap_or(&default_threshold);
    let z = read_signed(signed_path)?;
    let h = read_complex(threshold_path)?;
    if z.z.len() != scenario.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "scenario expects {} samples, sign data has {}",
            scenario.n_samples(),
            z.z.len()
        )));
    }
    let dict = scenario.build_dictionary()?;

    let est = match algorithm {
        Algorithm::OneBit(variant) => {
            let mut cfg = scenario.onebit_config(variant);
            cfg.track_objective = variant != OneBitVariant::Iaa;
            onebit_estimate(&z, &dict, &h, &cfg)?
        }
        Algorithm::OneBitPeriodogram => {
            let amplitudes = periodogram_amplitudes(&dict, &z.z)?;
            let powers = amplitudes.iter().map(|a| a.norm_sqr()).collect();
            OneBitEstimate {
                beta: amplitudes.clone(),
                powers,
                eta: 0.0,
                amplitudes: None,
                scale_resolved: false,
                iterations: 0,
                converged: true,
                rel_change: Vec::new(),
                objective: Vec::new(),
            }
        }
        Algorithm::HighPrecision(_) => {
            return Err(Error::Config(format!(
                "{label} runs on high-precision data; estimate works on sign data (use bench for \
                 the high-precision algorithms)"
            )))
        }
    };

    let header = EstimateHeader {
        variant: label.clone(),
        n_samples: z.z.len(),
        n_atoms: dict.n_atoms(),
        epsilon: scenario.epsilon,
        iterations: est.iterations,
        eta: est.eta,
    };
    write_estimate_csv(&dir.join("estimate.csv"), &header, &est)?;
    write_trace_csv(&dir.join("trace.csv"), &est)?;
    println!(
        "estimate: {label}, {} iterations, eta={:.6} -> {}",
        est.iterations,
        est.eta,
        dir.display()
    );
    Ok(())
}

fn cmd_bench(config: &RunConfig, args: &BenchArgs) -> Result<()> {
    let mut config = config.clone();
    if let Some(algorithms) = &args.algorithms {
        config.algorithms = algorithms.clone();
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    echo_config(&config)?;
    if config.seeds.is_empty() {
        return Err(Error::Config("seeds are mandatory in bench configs".into()));
    }
    if config.algorithms.is_empty() {
        return Err(Error::Config("bench needs a non-empty algorithm list".into()));
    }
    let algorithms: Vec<Algorithm> =
        config.algorithms.iter().map(|s| Algorithm::parse(s)).collect::<Result<_>>()?;

    let scenario = &config.scenario;
    let report =
        monte_carlo(scenario, &algorithms, config.seeds.len(), &config.seeds, config.jobs)?;
    let dir = &config.output_dir;
    write_results_csv(&dir.join("results.csv"), &report.rows)?;
    if !report.aborts.is_empty() {
        let mut out = String::from("algorithm,snr_db,seed,message\n");
        for a in &report.aborts {
            out.push_str(&format!("{},{},{},{}\n", a.algorithm, a.snr_db, a.seed, a.message));
        }
        std::fs::write(dir.join("aborts.csv"), out)?;
    }

    // One range-Doppler map per algorithm, first seed, last SNR.
    let dict = scenario.build_dictionary()?;
    let snr_db = *scenario.snr_db.last().expect("validated non-empty");
    for algorithm in &algorithms {
        let trial = run_trial(scenario, &dict, *algorithm, snr_db, config.seeds[0])?;
        let magnitudes: Vec<f64> = trial.estimates.iter().map(|v| v.norm()).collect();
        let stem = dir.join(format!("rd_{}_snr{snr_db}", algorithm.label()));
        bench::export_rd_image(&magnitudes, scenario.kr_bins, scenario.kd_bins, &stem)?;
    }

    for row in &report.rows {
        println!(
            "bench: {} snr={} nmse={:.5} sidelobe={:.3} iters={:.1}",
            row.algorithm, row.snr_db, row.nmse, row.sidelobe_power, row.mean_iters
        );
    }
    println!("bench: {} rows -> {}", report.rows.len(), dir.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Cmd::Simulate(common) => {
            let config = resolve(common)?;
            echo_config(&config)?;
            cmd_simulate(&config)
        }
        Cmd::Quantize(args) => {
            let config = resolve(&args.common)?;
            echo_config(&config)?;
            cmd_quantize(&config, args.data.as_deref())
        }
        Cmd::Estimate(args) => {
            let mut config = resolve(&args.common)?;
            if let Some(name) = &args.algorithm {
                config.algorithms = vec![name.clone()];
            }
            echo_config(&config)?;
            cmd_estimate(&config, args)
        }
        Cmd::Bench(args) => {
            let config = resolve(&args.common)?;
            cmd_bench(&config, args)
        }
    }
}

/// Parse the process arguments, run the chosen command and map the outcome
/// to the documented exit codes: 0 ok, 2 config error, 3 numerical failure.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(args: &[&str]) -> CommonArgs {
        let mut argv = vec!["bitspice", "simulate"];
        argv.extend_from_slice(args);
        match Cli::try_parse_from(argv).unwrap().command {
            Cmd::Simulate(common) => common,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_resolve_to_the_sinusoid_preset() {
        let config = resolve(&common(&[])).unwrap();
        assert_eq!(config.scenario.name, Scenario::five_sinusoids(1024, vec![20.0]).name);
        assert_eq!(config.scenario.n1, 1024);
        assert_eq!(config.output_dir, PathBuf::from("out"));
        assert!(config.seeds.is_empty());
        assert_eq!(single_seed(&config), 1);
    }

    #[test]
    fn flags_override_config_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        let mut config = RunConfig {
            scenario: Scenario::five_sinusoids(64, vec![5.0]),
            algorithms: vec!["1bslim".into()],
            seeds: vec![7, 8],
            output_dir: PathBuf::from("elsewhere"),
            jobs: 3,
        };
        config.scenario.max_iter = 9;
        std::fs::write(&path, toml::to_string_pretty(&config).unwrap()).unwrap();

        let path_str = path.to_str().unwrap();
        let resolved =
            resolve(&common(&["--config", path_str, "--max-iter", "4", "--seeds", "1,2,3"]))
                .unwrap();
        // flag wins
        assert_eq!(resolved.scenario.max_iter, 4);
        assert_eq!(resolved.seeds, vec![1, 2, 3]);
        // file wins over defaults
        assert_eq!(resolved.scenario.n1, 64);
        assert_eq!(resolved.scenario.snr_db, vec![5.0]);
        assert_eq!(resolved.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(resolved.jobs, 3);
        assert_eq!(resolved.algorithms, vec!["1bslim".to_string()]);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "never_heard_of_it = 1\n").unwrap();
        let err = resolve(&common(&["--config", path.to_str().unwrap()])).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn bad_enum_flags_are_config_errors() {
        for args in [
            ["--model", "am-radio"],
            ["--threshold", "sometimes"],
            ["--solver", "quantum"],
            ["--scenario", "mystery"],
        ] {
            let err = resolve(&common(&args)).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{args:?}");
        }
    }

    #[test]
    fn invalid_merged_scenario_fails_validation() {
        // kr_bins below n1 is rejected by the scenario, not the parser.
        let err = resolve(&common(&["--kr-bins", "4"])).unwrap_err();
        assert!(matches!(err, Error::Config(_) | Error::InvalidArgument(_)), "{err}");
    }
}
