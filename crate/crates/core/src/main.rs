use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sigclust::engine::{DEFAULT_N_SIM, DEFAULT_RESTARTS_NULL, DEFAULT_RESTARTS_OBSERVED};
use sigclust::io::{
    emit_report, filter_variables, format_p, load_matrix_with, read_labels, read_spectrum,
    report_flags, LoadOptions, Orientation, Presence, RunManifest,
};
use sigclust::simharness::{
    parse_scenarios, run_grid_with_workers, MethodKind, ONE_CLUSTER_SCENARIOS,
};
use sigclust::spectrum::{estimate_noise, hard_threshold, soft_threshold_or_flat};
use sigclust::{
    estimation_spectrum, run_test, sample_spectrum, theoretical_ci, DataMatrix, Method,
    SigClustError, TestConfig,
};

#[derive(Parser)]
#[command(
    name = "sigclust",
    version,
    about = "Significance testing for two-cluster structure in high-dimensional data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a data matrix for significant two-cluster structure.
    Test(TestArgs),
    /// Run a grid of simulation scenarios.
    Simulate(SimulateArgs),
    /// Print the sample, hard and soft eigenvalues and the noise estimate.
    Spectrum(SpectrumArgs),
    /// Print the theoretical cluster index of a spectrum file.
    Tci {
        /// Eigenvalues separated by commas, spaces or newlines.
        spectrum: PathBuf,
    },
}

#[derive(Args)]
struct MatrixArgs {
    /// CSV or tab-separated numeric matrix; variables in rows unless told otherwise.
    input: PathBuf,
    #[arg(long)]
    observations_in_rows: bool,
    /// Treat the first line as a header (default: detect).
    #[arg(long, conflicts_with = "no_header")]
    header: bool,
    #[arg(long)]
    no_header: bool,
    /// Treat the first column as row names (default: detect).
    #[arg(long, conflicts_with = "no_row_names")]
    row_names: bool,
    #[arg(long)]
    no_row_names: bool,
}

impl MatrixArgs {
    fn orientation(&self) -> Orientation {
        if self.observations_in_rows {
            Orientation::ObservationsInRows
        } else {
            Orientation::VariablesInRows
        }
    }

    fn load(&self) -> Result<DataMatrix, SigClustError> {
        let presence = |yes: bool, no: bool| match (yes, no) {
            (true, _) => Presence::Present,
            (_, true) => Presence::Absent,
            _ => Presence::Auto,
        };
        let opts = LoadOptions {
            orientation: self.orientation(),
            header: presence(self.header, self.no_header),
            row_names: presence(self.row_names, self.no_row_names),
        };
        let loaded = load_matrix_with(&self.input, &opts)?;
        for w in &loaded.warnings {
            eprintln!(
                "warning: {w} (override with --header/--no-header, --row-names/--no-row-names)"
            );
        }
        Ok(loaded.data)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMethod {
    Sample,
    Hard,
    Soft,
    Combined,
    True,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[arg(long, value_enum, default_value = "combined")]
    method: CliMethod,
    /// Eigenvalue file for --method true.
    #[arg(long, required_if_eq("method", "true"))]
    true_spectrum: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_N_SIM)]
    nsim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Known cluster labels (1 or 2), one per observation.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Keep only the K variables with the largest sd/mean ratio.
    #[arg(long, value_name = "K")]
    filter_top_k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RESTARTS_NULL)]
    restarts_null: usize,
    #[arg(long, default_value_t = DEFAULT_RESTARTS_OBSERVED)]
    restarts_observed: usize,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "sigclust-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario table; the built-in one-cluster grid when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override every scenario with 100 replications and 1000 simulations.
    #[arg(long)]
    full_scale: bool,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "true,sample,hard,soft,combined"
    )]
    methods: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "sigclust-sim")]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
}

fn write(path: &Path, contents: &str) -> Result<(), SigClustError> {
    fs::write(path, contents).map_err(|e| SigClustError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_test(args: TestArgs) -> Result<(), SigClustError> {
    let mut x = args.matrix.load()?;
    if let Some(k) = args.filter_top_k {
        x = filter_variables(&x, k)?;
    }
    let method = match args.method {
        CliMethod::Sample => Method::Sample,
        CliMethod::Hard => Method::Hard,
        CliMethod::Soft => Method::Soft,
        CliMethod::Combined => Method::Combined,
        CliMethod::True => {
            let path = args.true_spectrum.as_ref().expect("required by clap");
            Method::TrueSpectrum(read_spectrum(path)?)
        }
    };
    let mut config = TestConfig::new(method)
        .with_n_sim(args.nsim)
        .with_seed(args.seed)
        .with_restarts(args.restarts_null, args.restarts_observed);
    if let Some(w) = args.workers {
        config = config.with_workers(w);
    }
    if let Some(path) = &args.labels {
        config = config.with_labels(read_labels(path)?);
    }
    let report = run_test(&x, &config)?;

    let manifest = RunManifest {
        input: args.matrix.input.clone(),
        orientation: args.matrix.orientation(),
        method: report.method.clone(),
        n_sim: args.nsim,
        seed: args.seed,
        labels: args.labels.clone(),
        filter_top_k: args.filter_top_k,
        out_dir: args.out.clone(),
        workers: args.workers,
    };
    let files = emit_report(&report, &manifest)?;

    println!("method       {}", report.method);
    println!("dimensions   d={} n={}", x.d(), x.n());
    println!("observed CI  {:.6}", report.ci_observed);
    println!(
        "null CI      mean {:.6}  sd {:.6}",
        report.null_mean, report.null_sd
    );
    println!("p empirical  {}", format_p(report.p_empirical));
    println!("p gaussian   {}", format_p(report.p_gaussian));
    println!("report       {}", files.report.display());
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for f in report_flags(&report) {
        eprintln!("flag: {f}");
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), SigClustError> {
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<MethodKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let text = match &args.scenario {
        Some(p) => fs::read_to_string(p).map_err(|e| SigClustError::Io {
            path: p.clone(),
            source: e,
        })?,
        None => ONE_CLUSTER_SCENARIOS.to_string(),
    };
    let mut specs = parse_scenarios(&text, &methods, args.seed)?;
    if args.full_scale {
        specs = specs.into_iter().map(|s| s.full_scale()).collect();
    }
    let grid = run_grid_with_workers(&specs, args.workers)?;

    fs::create_dir_all(&args.out).map_err(|e| SigClustError::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let csv = grid.to_csv();
    write(&args.out.join("summary.csv"), &csv)?;
    let json = serde_json::to_string_pretty(&grid)
        .map_err(|e| SigClustError::InvalidData(format!("json: {e}")))?;
    write(&args.out.join("summary.json"), &(json + "\n"))?;
    print!("{csv}");
    for s in &grid.scenarios {
        for w in &s.warnings {
            eprintln!("warning (v={}, w={}): {w}", s.spec.v, s.spec.w);
        }
    }
    Ok(())
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<(), SigClustError> {
    let x = args.matrix.load()?;
    let noise = estimate_noise(&x)?;
    let sample = sample_spectrum(&x);
    let base = estimation_spectrum(&x);
    let hard = hard_threshold(&base, &noise);
    let soft = soft_threshold_or_flat(&base, &noise);

    println!("# d={} n={}", x.d(), x.n());
    println!("# sigma_n_sq={:.10}", noise.sigma_n_sq);
    if let Some(tau) = soft.tau {
        println!("# tau={tau:.10}");
    }
    if let Some(msg) = &soft.fallback {
        println!("# soft fallback: {msg}");
    }
    println!("# hard and soft start from the (n-1)-normalized covariance");
    println!("index,sample,hard,soft");
    for k in 0..x.d() {
        println!(
            "{},{},{},{}",
            k + 1,
            sample.eigenvalues[k],
            hard.eigenvalues[k],
            soft.eigenvalues[k]
        );
    }
    Ok(())
}

fn cmd_tci(path: &Path) -> Result<(), SigClustError> {
    let eig = read_spectrum(path)?;
    println!("{}", format_p(theoretical_ci(&eig)?));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Tci { spectrum } => cmd_tci(&spectrum),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
