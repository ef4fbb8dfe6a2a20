use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tpm_core::io::{read_samples, read_tensor, write_samples, write_spectrum};
use tpm_core::streaming::{record, ReplayStream};
use tpm_core::{
    benchmark_spectrum, online_rtpm, private_rtpm, robust_tpm, PrivateConfig, SampleStream, SingleTopicGenerator,
    StreamConfig, Tensor3, TpmConfig,
};
use tpm_harness::commands::{chart, reproduce, run_table};
use tpm_harness::config::Config;
use tpm_harness::table::Table;

#[derive(Parser)]
#[command(name = "tpm", version, about = "Tensor power method decompositions and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Schedule {
    /// Components to extract.
    #[arg(short, long, default_value_t = 1)]
    k: usize,
    /// Restarts per component.
    #[arg(short = 'L', long = "L")]
    restarts: Option<usize>,
    /// Power iterations per restart.
    #[arg(short = 'R', long = "R")]
    iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Experiment {
    /// `key=value` settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` setting (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also draw a chart.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a tensor file with the robust power method.
    Decompose {
        input: PathBuf,
        #[command(flatten)]
        schedule: Schedule,
        /// Spectrum output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decompose from a stream of samples.
    Stream {
        /// Recorded samples to replay.
        #[arg(long, conflicts_with = "generator_dim")]
        samples: Option<PathBuf>,
        /// Replay the recorded samples cyclically instead of failing at the end.
        #[arg(long)]
        cycle: bool,
        /// Draw single-topic samples over the benchmark spectrum in this dimension.
        #[arg(long = "generator-dim")]
        generator_dim: Option<usize>,
        #[arg(long = "generator-seed", default_value_t = 0)]
        generator_seed: u64,
        /// Save the generated samples here before decomposing them.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Samples per association pass.
        #[arg(long, default_value_t = 1000)]
        batch: usize,
        /// One batch per step shared by all restarts.
        #[arg(long = "shared-batch")]
        shared_batch: bool,
        #[command(flatten)]
        schedule: Schedule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Differentially private decomposition; writes a budget report next to the output.
    Private {
        input: PathBuf,
        #[command(flatten)]
        schedule: Schedule,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Failure probability over a noise grid.
    Phase {
        #[arg(long)]
        regime: Option<String>,
        #[arg(long)]
        dims: Option<String>,
        /// Comma list or `lo:hi:points_per_decade`.
        #[arg(long = "sigma-grid")]
        sigma_grid: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(short = 'L', long = "L")]
        restarts: Option<usize>,
        #[arg(short = 'R', long = "R")]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        exp: Experiment,
    },
    /// Online error against batch size.
    StreamCurve {
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long = "batch-sizes")]
        batch_sizes: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long = "shared-batch")]
        shared_batch: bool,
        #[arg(short = 'L', long = "L")]
        restarts: Option<usize>,
        #[arg(short = 'R', long = "R")]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        exp: Experiment,
    },
    /// Private error against epsilon.
    DpCurve {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        coherent: bool,
        #[arg(long)]
        epsilons: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Perturb the input once and run the non-private method.
        #[arg(long = "input-perturbation")]
        input_perturbation: bool,
        #[arg(short = 'L', long = "L")]
        restarts: Option<usize>,
        #[arg(short = 'R', long = "R")]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        exp: Experiment,
    },
    /// Matrix-collapse subspace error against dimension.
    Whiten {
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        regime: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        exp: Experiment,
    },
    /// Regenerate a CSV from its header and compare it byte for byte.
    Reproduce {
        input: PathBuf,
        /// Write the regenerated table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn emit_spectrum(s: &tpm_core::Spectrum64, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            write_spectrum(&mut w, s)?;
            w.flush()?;
        }
        None => write_spectrum(std::io::stdout().lock(), s)?,
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn experiment(command: &str, flags: Config, exp: Experiment) -> Result<()> {
    let mut cfg = match &exp.config {
        Some(p) => Config::load(p)?,
        None => Config::new(),
    };
    let mut extra = String::new();
    for kv in &exp.set {
        extra.push_str(kv);
        extra.push('\n');
    }
    cfg.merge(&Config::parse(&extra).context("--set")?);
    cfg.merge(&flags);
    let output = run_table(command, &cfg)?;
    let mut w = create(&exp.out)?;
    output.table.write(&mut w)?;
    w.flush()?;
    if let Some(side) = output.sidecar {
        let mut w = create(&with_suffix(&exp.out, ".trials.csv"))?;
        side.write(&mut w)?;
        w.flush()?;
    }
    if let Some(svg) = &exp.svg {
        std::fs::write(svg, chart(&output.table)?.render()).with_context(|| format!("writing {}", svg.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decompose { input, schedule, out } => {
            let t: Tensor3 = read_tensor(open(&input)?)?;
            let mut cfg = TpmConfig::with_default_schedule(schedule.k, t.dim(), t.frobenius_norm(), schedule.seed);
            cfg.restarts = schedule.restarts.unwrap_or(cfg.restarts);
            cfg.iters = schedule.iters.unwrap_or(cfg.iters);
            emit_spectrum(&robust_tpm(&t, &cfg)?, out.as_deref())
        }
        Command::Stream {
            samples,
            cycle,
            generator_dim,
            generator_seed,
            record: record_to,
            batch,
            shared_batch,
            schedule,
            out,
        } => {
            let mut cfg = StreamConfig::new(schedule.k, schedule.restarts.unwrap_or(10), schedule.iters.unwrap_or(30), batch, schedule.seed);
            if shared_batch {
                cfg = cfg.shared();
            }
            let mut stream: Box<dyn SampleStream<f64>> = match (samples, generator_dim) {
                (Some(p), _) => {
                    let replay = read_samples(open(&p)?)?;
                    if cycle {
                        Box::new(ReplayStream::cycling(replay.dim(), replay.samples().to_vec())?)
                    } else {
                        Box::new(replay)
                    }
                }
                (None, Some(d)) => {
                    let mut g = SingleTopicGenerator::uniform(benchmark_spectrum(d)?, generator_seed)?;
                    match record_to {
                        Some(p) => {
                            let rec = record(&mut g, cfg.samples_required() as usize)?;
                            let mut w = create(&p)?;
                            write_samples(&mut w, d, rec.samples())?;
                            w.flush()?;
                            Box::new(rec)
                        }
                        None => Box::new(g),
                    }
                }
                (None, None) => bail!("give --samples FILE or --generator-dim D"),
            };
            emit_spectrum(&online_rtpm(stream.as_mut(), &cfg)?, out.as_deref())
        }
        Command::Private {
            input,
            schedule,
            epsilon,
            delta,
            out,
        } => {
            let t: Tensor3 = read_tensor(open(&input)?)?;
            let cfg = PrivateConfig::new(schedule.k, schedule.restarts.unwrap_or(10), schedule.iters.unwrap_or(30), epsilon, delta, schedule.seed);
            let run = private_rtpm(&t, &cfg)?;
            emit_spectrum(&run.spectrum, Some(&out))?;
            let mut report = run.budget.report();
            let draws: Vec<String> = run.draws.iter().map(u64::to_string).collect();
            report.push_str(&format!("draws = {}\n", draws.join(",")));
            std::fs::write(with_suffix(&out, ".budget"), report)?;
            Ok(())
        }
        Command::Phase {
            regime,
            dims,
            sigma_grid,
            trials,
            restarts,
            iters,
            seed,
            exp,
        } => {
            let mut f = Config::new();
            f.set_opt("regime", regime);
            f.set_opt("dims", dims);
            f.set_opt("sigma_grid", sigma_grid);
            f.set_opt("trials", trials);
            f.set_opt("L", restarts);
            f.set_opt("R", iters);
            f.set_opt("seed", seed);
            experiment("phase", f, exp)
        }
        Command::StreamCurve {
            source,
            d,
            batch_sizes,
            reps,
            shared_batch,
            restarts,
            iters,
            seed,
            exp,
        } => {
            let mut f = Config::new();
            f.set_opt("source", source);
            f.set_opt("d", d);
            f.set_opt("batch_sizes", batch_sizes);
            f.set_opt("reps", reps);
            f.set_opt("shared_batch", shared_batch.then_some(true));
            f.set_opt("L", restarts);
            f.set_opt("R", iters);
            f.set_opt("seed", seed);
            experiment("stream-curve", f, exp)
        }
        Command::DpCurve {
            d,
            coherent,
            epsilons,
            delta,
            reps,
            input_perturbation,
            restarts,
            iters,
            seed,
            exp,
        } => {
            let mut f = Config::new();
            f.set_opt("d", d);
            f.set_opt("coherent", coherent.then_some(true));
            f.set_opt("epsilons", epsilons);
            f.set_opt("delta", delta);
            f.set_opt("reps", reps);
            f.set_opt("input_perturbation", input_perturbation.then_some(true));
            f.set_opt("L", restarts);
            f.set_opt("R", iters);
            f.set_opt("seed", seed);
            experiment("dp-curve", f, exp)
        }
        Command::Whiten {
            dims,
            noise,
            draws,
            regime,
            seed,
            exp,
        } => {
            let mut f = Config::new();
            f.set_opt("dims", dims);
            f.set_opt("noise", noise);
            f.set_opt("draws", draws);
            f.set_opt("regime", regime);
            f.set_opt("seed", seed);
            experiment("whiten", f, exp)
        }
        Command::Reproduce { input, out } => {
            let original = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let table = Table::read(original.as_slice())?;
            let fresh = reproduce(&table)?.to_csv_string();
            if let Some(p) = out {
                std::fs::write(&p, &fresh)?;
            }
            if fresh.as_bytes() != original.as_slice() {
                bail!("regenerated table differs from {}", input.display());
            }
            println!("identical: {}", input.display());
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
