use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lgm::data::load_table;
use lgm::engine::fit;
use lgm::marginals::Marginal;
use lgm::report::{write_fit, ReportOptions};
use lgm::spec::ModelSpec;
use lgm::util::fmt_sig;
use lgm::Error;

#[derive(Parser)]
#[command(
    name = "lgm",
    version,
    about = "Approximate Bayesian inference for latent Gaussian models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a model and write result files.
    Fit(FitArgs),
    /// Query a stored marginal (a two-column x,density CSV).
    Marginal {
        #[command(subcommand)]
        op: MarginalOp,
    },
}

#[derive(Args)]
struct FitArgs {
    /// Model description (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Data table (CSV with a header row).
    #[arg(long)]
    data: PathBuf,
    /// Output directory; created if needed.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; all available cores by default.
    #[arg(long)]
    threads: Option<usize>,
    /// Retry a failed fit with conservative settings (overrides the model file).
    #[arg(long, overrides_with = "no_safe")]
    safe: bool,
    #[arg(long = "no-safe", overrides_with = "safe")]
    no_safe: bool,
    /// Number of posterior draws to write.
    #[arg(long, default_value_t = 0)]
    samples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Transform {
    Identity,
    Exp,
    Log,
    Inv,
    Sqrt,
    Square,
    /// `1/sqrt(x)`, e.g. precision to standard deviation.
    Invsqrt,
    Logit,
    Expit,
}

impl Transform {
    fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Exp => x.exp(),
            Transform::Log => x.ln(),
            Transform::Inv => 1.0 / x,
            Transform::Sqrt => x.sqrt(),
            Transform::Square => x * x,
            Transform::Invsqrt => 1.0 / x.sqrt(),
            Transform::Logit => (x / (1.0 - x)).ln(),
            Transform::Expit => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

#[derive(Subcommand)]
enum MarginalOp {
    /// Density at each point (comma-separated).
    D {
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        at: Vec<f64>,
        file: PathBuf,
    },
    /// Distribution function at each point.
    P {
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        at: Vec<f64>,
        file: PathBuf,
    },
    /// Quantile at each probability.
    Q {
        #[arg(long, value_delimiter = ',', required = true)]
        prob: Vec<f64>,
        file: PathBuf,
    },
    /// Marginal of a monotone transform, printed as CSV.
    T {
        #[arg(long, value_enum)]
        transform: Transform,
        file: PathBuf,
    },
    /// Expectation of a function.
    E {
        #[arg(long, value_enum, default_value = "identity")]
        transform: Transform,
        file: PathBuf,
    },
    /// Highest posterior density interval: prints `lo hi`.
    Hpd {
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        file: PathBuf,
    },
    /// Mean, sd and quantiles.
    Z { file: PathBuf },
    /// Random draws.
    R {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        file: PathBuf,
    },
    /// Mode.
    M { file: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_validation() => 2,
        Error::FitFailed { .. } => 3,
        _ => 1,
    }
}

fn run_fit(a: &FitArgs) -> Result<(), Error> {
    let start = Instant::now();
    let mut spec = ModelSpec::read(&a.model)?;
    if a.safe {
        spec.safe = true;
    } else if a.no_safe {
        spec.safe = false;
    }
    let data = load_table(&a.data)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = a.threads {
            b = b.num_threads(t);
        }
        b.build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
    };
    let opts = ReportOptions {
        samples: a.samples,
        seed: a.seed,
    };
    let (result, written) = pool.install(|| -> Result<_, Error> {
        let r = fit(&spec, &data)?;
        let w = write_fit(&r, &a.out, &opts)?;
        Ok((r, w))
    })?;
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "model_file": a.model,
        "data_file": a.data,
        "model": serde_json::from_str::<serde_json::Value>(&spec.to_json())?,
        "seed": a.seed,
        "threads": pool.current_num_threads(),
        "samples": a.samples,
        "used_safe_mode": result.used_safe_mode,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "files": written.iter().map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect::<Vec<_>>(),
    });
    let path = a.out.join("run_manifest.json");
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(&path, text).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    eprintln!(
        "fitted in {:.2} s; results in {}",
        start.elapsed().as_secs_f64(),
        a.out.display()
    );
    Ok(())
}

fn show(v: f64) -> String {
    fmt_sig(v, 10)
}

fn run_marginal(op: &MarginalOp) -> Result<(), Error> {
    let load = |f: &PathBuf| Marginal::read_path(f);
    match op {
        MarginalOp::D { at, file } => {
            let m = load(file)?;
            at.iter()
                .for_each(|&x| println!("{}", show(m.dmarginal(x))));
        }
        MarginalOp::P { at, file } => {
            let m = load(file)?;
            at.iter()
                .for_each(|&x| println!("{}", show(m.pmarginal(x))));
        }
        MarginalOp::Q { prob, file } => {
            let m = load(file)?;
            for &p in prob {
                println!("{}", show(m.qmarginal(p)?));
            }
        }
        MarginalOp::T { transform, file } => {
            let t = load(file)?.tmarginal(|x| transform.apply(x))?;
            t.write_csv(std::io::stdout().lock())?;
        }
        MarginalOp::E { transform, file } => {
            println!("{}", show(load(file)?.emarginal(|x| transform.apply(x))));
        }
        MarginalOp::Hpd { level, file } => {
            let (lo, hi) = load(file)?.hpdmarginal(*level)?;
            println!("{} {}", show(lo), show(hi));
        }
        MarginalOp::Z { file } => {
            let s = load(file)?.zmarginal()?;
            for (k, v) in [
                ("mean", s.mean),
                ("sd", s.sd),
                ("0.025quant", s.q025),
                ("0.5quant", s.median),
                ("0.975quant", s.q975),
            ] {
                println!("{k} {}", show(v));
            }
        }
        MarginalOp::R { n, seed, file } => {
            load(file)?
                .rmarginal(*n, *seed)
                .iter()
                .for_each(|v| println!("{}", show(*v)));
        }
        MarginalOp::M { file } => println!("{}", show(load(file)?.mmarginal())),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Fit(a) => run_fit(a),
        Cmd::Marginal { op } => run_marginal(op),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
