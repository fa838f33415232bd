use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use geoclust::cluster::{run_method, GctParams, GctSupport, Method, ScrParams, SmcParams, SmcWeight, TgctParams};
use geoclust::eval::clustering_rate;
use geoclust::format::{load_dataset, save_dataset};
use geoclust::local::pairwise_distances;
use geoclust::synth::{generate, DatasetId, DatasetSpec};
use geoclust_bench::config::ConfigError;
use geoclust_bench::{results_summary, run_benchmark, run_sweep, write_csv, ExperimentConfig, Row};

#[derive(Parser)]
#[command(name = "geoclust", version, about = "Clustering on Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset file.
    Generate {
        #[arg(long)]
        dataset: DatasetId,
        #[arg(long, default_value_t = DatasetSpec::DEFAULT_NOISE, value_parser = nonnegative, allow_negative_numbers = true)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Points per cluster.
        #[arg(long, default_value_t = DatasetSpec::DEFAULT_POINTS_PER_CLUSTER)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster a dataset file and print the rate when it has labels.
    Cluster(ClusterArgs),
    /// Run every (dataset, method, trial) cell of a config.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Output prefix for `.csv` and `.json`; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Like `benchmark`, once per noise level of the `[sweep]` section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodName {
    Gct,
    Tgct,
    Smc,
    Scr,
    Ekm,
}

#[derive(clap::Args)]
struct ClusterArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    method: MethodName,
    /// Cluster count; defaults to the count in the file's labels.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    neighbors: usize,
    #[arg(long, allow_negative_numbers = true)]
    sigma_d: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma_a: Option<f64>,
    /// GCT pair support: all or neighbors.
    #[arg(long, default_value_t = GctSupport::default())]
    support: GctSupport,
    /// SMC weight mode: linear or exponential.
    #[arg(long, default_value_t = SmcWeight::default())]
    weight: SmcWeight,
    /// SCR kernel width.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    sigma: f64,
    /// TGCT neighborhood radius.
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    /// TGCT dimension threshold.
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    /// Write one-based labels here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also report the rate on points at least this far from every point
    /// of another cluster.
    #[arg(long, value_parser = nonnegative, allow_negative_numbers = true)]
    margin: Option<f64>,
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be finite and nonnegative, got {s}"))
    }
}

/// Failure with its exit code: 2 for usage errors, 1 otherwise.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Runtime(e.into()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate {
            dataset,
            noise,
            seed,
            points,
            out,
        } => cmd_generate(
            DatasetSpec::new(dataset, seed)
                .with_noise(noise)
                .with_points_per_cluster(points),
            &out,
        ),
        Command::Cluster(args) => cmd_cluster(&args),
        Command::Benchmark { config, out } => cmd_experiment(&config, out, false),
        Command::Sweep { config, out } => cmd_experiment(&config, out, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => Cli::command()
            .error(clap::error::ErrorKind::ValueValidation, msg)
            .exit(),
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_generate(spec: DatasetSpec, out: &Path) -> Result<(), Failure> {
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let data = generate(&spec).context("generating dataset")?;
    save_dataset(out, &data).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn method_from_args(a: &ClusterArgs) -> Result<Method, Failure> {
    let sigma_d = a.sigma_d.unwrap_or(1.0);
    let sigma_a = a.sigma_a.unwrap_or(1.0);
    let method = match a.method {
        MethodName::Gct => Method::Gct(GctParams {
            neighbors: a.neighbors,
            sigma_d,
            sigma_a,
            support: a.support,
            ..GctParams::default()
        }),
        MethodName::Tgct => {
            let missing: Vec<&str> = [
                ("--r", a.r.is_none()),
                ("--eta", a.eta.is_none()),
                ("--sigma-d", a.sigma_d.is_none()),
                ("--sigma-a", a.sigma_a.is_none()),
            ]
            .into_iter()
            .filter_map(|(flag, absent)| absent.then_some(flag))
            .collect();
            if !missing.is_empty() {
                return Err(Failure::Usage(format!("tgct needs explicit {}", missing.join(", "))));
            }
            Method::Tgct(TgctParams {
                r: a.r.unwrap_or_default(),
                eta: a.eta.unwrap_or_default(),
                sigma_d,
                sigma_a,
            })
        }
        MethodName::Smc => Method::Smc(SmcParams {
            neighbors: a.neighbors,
            sigma_d,
            weight: a.weight,
            ..SmcParams::default()
        }),
        MethodName::Scr => Method::Scr(ScrParams { sigma: a.sigma }),
        MethodName::Ekm => Method::Ekm,
    };
    method.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(method)
}

fn cmd_cluster(a: &ClusterArgs) -> Result<(), Failure> {
    let method = method_from_args(a)?;
    let data = load_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let k = match (a.k, &data.truth) {
        (Some(k), _) => k,
        (None, Some(t)) => t.k(),
        (None, None) => return Err(Failure::Usage("the dataset has no labels; pass --k".into())),
    };
    if a.margin.is_some() && data.truth.is_none() {
        return Err(Failure::Usage("--margin needs a dataset with labels".into()));
    }
    let out = run_method(&method, &data.points, k, a.seed).context("clustering")?;

    let labels: String = out.labels.one_based().iter().map(|l| format!("{l}\n")).collect();
    let mut stdout = std::io::stdout().lock();
    match &a.out {
        Some(path) => fs::write(path, labels).with_context(|| format!("writing {}", path.display()))?,
        None => stdout.write_all(labels.as_bytes()).context("writing labels")?,
    }
    if let Some(truth) = &data.truth {
        let rate = clustering_rate(&out.labels, truth).context("scoring")?;
        writeln!(stdout, "rate {rate:.6}").context("writing rate")?;
        if let Some(margin) = a.margin {
            let dist = pairwise_distances(&data.points).context("computing distances")?;
            let t = truth.labels();
            let keep: Vec<usize> = (0..t.len())
                .filter(|&i| (0..t.len()).all(|j| t[j] == t[i] || dist[(i, j)] >= margin))
                .collect();
            let sub = clustering_rate(&out.labels.subset(&keep), &truth.subset(&keep)).context("scoring")?;
            writeln!(stdout, "rate_margin {sub:.6} points {}", keep.len()).context("writing rate")?;
        }
    }
    writeln!(stdout, "time_ms {:.3}", out.timings.total_ms).context("writing timing")?;
    Ok(())
}

fn cmd_experiment(path: &Path, out: Option<PathBuf>, sweep: bool) -> Result<(), Failure> {
    let config = ExperimentConfig::load(path)?;
    let rows: Vec<Row> = if sweep {
        run_sweep(&config)?
    } else {
        run_benchmark(&config)?
    };
    let summary = results_summary(&rows, &config);
    if let Some(prefix) = out.or_else(|| config.experiment.output.clone()) {
        let csv_path = prefix.with_extension("csv");
        let json_path = prefix.with_extension("json");
        if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let file = fs::File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
        write_csv(&rows, file).with_context(|| format!("writing {}", csv_path.display()))?;
        let json = serde_json::to_string_pretty(&summary).context("encoding summary")?;
        fs::write(&json_path, json + "\n").with_context(|| format!("writing {}", json_path.display()))?;
    }
    print!("{}", geoclust_bench::report::format_summary(&summary));
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} cells failed; see the error column", rows.len());
    }
    Ok(())
}
