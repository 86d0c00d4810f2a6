use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lcsb::bench::{mse_db, run_offgrid, run_table};
use lcsb::channel::{corrupt, ChannelSpec};
use lcsb::config::ExperimentConfig;
use lcsb::decoder::{decode, EcParams};
use lcsb::encoder::encode;
use lcsb::model::SpectralState;
use lcsb::siggen::{generate, signal_from_json, signal_to_json, SignalSpec};
use lcsb::stream::{read_stream, write_stream, StreamHeader};

#[derive(Parser)]
#[command(
    name = "lcsb",
    about = "1-bit predictive level-comparison acquisition and reconstruction simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a spectrum-sparse test signal into a JSON file.
    Generate(GenerateArgs),
    /// Encode a signal JSON file into an LCSB sign stream.
    Encode(EncodeArgs),
    /// Flip stream bits through a memoryless binary channel.
    Corrupt(CorruptArgs),
    /// Reconstruct from a sign stream; write a per-sample CSV trace.
    Decode(DecodeArgs),
    /// Experiment harnesses.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Print a built-in configuration profile as TOML.
    Config(ConfigArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Experiment config (TOML); defaults to the desk profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output signal JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Seed override (default: the config's master seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EncodeArgs {
    /// Input signal JSON.
    #[arg(long)]
    signal: PathBuf,
    /// Output stream path.
    #[arg(long)]
    out: PathBuf,
    /// Optional config supplying estimator parameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CorruptArgs {
    /// Input stream path.
    #[arg(long = "in")]
    input: PathBuf,
    /// Per-bit flip probability in [0, 0.5].
    #[arg(long)]
    p: f64,
    /// Channel seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output stream path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    /// Input stream path.
    #[arg(long = "in")]
    input: PathBuf,
    /// Enable the sparse error-correction iterations.
    #[arg(long)]
    ec: bool,
    /// Ground-truth signal JSON for per-sample MSE.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output CSV trace path.
    #[arg(long)]
    trace: PathBuf,
    /// Optional config supplying EC parameters and estimator caps.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the stochastic rounding draws.
    #[arg(long, default_value_t = 0)]
    ec_seed: u64,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Sweep (sparsity, flip rate, EC) cells and write mean MSE per cell.
    Table1(BenchArgs),
    /// Off-grid tracking scenario; writes the per-iteration MSE trace.
    Offgrid(BenchArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config (TOML). Defaults: desk profile for table1,
    /// the off-grid profile for offgrid.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Use the full-scale profile (N = 500) when no config is given.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct ConfigArgs {
    /// Profile name: desk, paper or offgrid.
    #[arg(long, default_value = "desk")]
    profile: String,
}

fn load_config(path: &Option<PathBuf>, fallback: ExperimentConfig) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            Ok(ExperimentConfig::from_toml(&text)?)
        }
        None => Ok(fallback),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => {
            let cfg = load_config(&args.config, ExperimentConfig::desk())?;
            let grid = cfg.grid.to_grid()?;
            let mut spec = SignalSpec::new(
                grid,
                cfg.signal.sparsity_factors[0],
                cfg.signal.num_samples,
                args.seed.unwrap_or(cfg.master_seed),
            );
            spec.noise_std = cfg.signal.noise_std;
            spec.real_amplitudes = cfg.signal.real_amplitudes;
            spec.offgrid = cfg.signal.offgrid.clone();
            let signal = generate(&spec)?;
            fs::write(&args.out, signal_to_json(&signal)?)?;
            eprintln!(
                "wrote {} samples (N = {}, {} active) to {}",
                signal.samples.len(),
                spec.grid.n(),
                spec.active_count(),
                args.out.display()
            );
        }
        Command::Encode(args) => {
            let text = fs::read_to_string(&args.signal)
                .with_context(|| format!("reading signal {}", args.signal.display()))?;
            let signal = signal_from_json(&text)?;
            let params = match &args.config {
                Some(_) => load_config(&args.config, ExperimentConfig::desk())?.estimator,
                None => Default::default(),
            };
            let result = encode(&signal, &params)?;
            let header =
                StreamHeader::new(&signal.spec.grid, &params, result.stream.len() as u64);
            let mut file = fs::File::create(&args.out)?;
            write_stream(&mut file, &header, &result.stream)?;
            eprintln!(
                "encoded {} samples to {}",
                result.stream.len(),
                args.out.display()
            );
        }
        Command::Corrupt(args) => {
            let bytes = fs::read(&args.input)?;
            let (header, stream) = read_stream(&mut std::io::Cursor::new(bytes))?;
            let spec = ChannelSpec::new(args.p, args.seed)?;
            let (corrupted, flips) = corrupt(&stream, &spec);
            let mut file = fs::File::create(&args.out)?;
            write_stream(&mut file, &header, &corrupted)?;
            let flipped: usize = flips.iter().map(|f| f.re as usize + f.im as usize).sum();
            eprintln!(
                "flipped {} of {} bits (p = {})",
                flipped,
                2 * stream.len(),
                args.p
            );
        }
        Command::Decode(args) => {
            let bytes = fs::read(&args.input)?;
            let (header, stream) = read_stream(&mut std::io::Cursor::new(bytes))?;
            let mut params = header.estimator_params();
            let (ec_cfg, caps) = match &args.config {
                Some(_) => {
                    let cfg = load_config(&args.config, ExperimentConfig::desk())?;
                    (cfg.ec.clone(), Some(cfg.estimator))
                }
                None => (Default::default(), None),
            };
            if let Some(caps) = caps {
                params.sigma_cap = caps.sigma_cap;
                params.delta_cap = caps.delta_cap;
                params.propagate_first = caps.propagate_first;
            }
            let ec: EcParams = ec_cfg.to_params(args.ec, args.ec_seed);
            let truth = match &args.truth {
                Some(p) => Some(signal_from_json(&fs::read_to_string(p)?)?),
                None => None,
            };
            let result = decode(&stream, &header.grid, params, ec)?;
            let mut csv =
                String::from("sample_index,mse_db,level_re,level_im,num_flips_estimated\n");
            for m in 0..result.states.len() {
                let mse = match &truth {
                    Some(t) => {
                        let tr = SpectralState {
                            amps: t.true_states[m].clone(),
                            time_index: m as i64,
                        };
                        let est = SpectralState {
                            amps: result.states[m].clone(),
                            time_index: m as i64,
                        };
                        format!("{:.6}", mse_db(&tr, &est)?)
                    }
                    None => String::new(),
                };
                csv.push_str(&format!(
                    "{},{},{:.9},{:.9},{}\n",
                    m,
                    mse,
                    result.levels[m].re,
                    result.levels[m].im,
                    result.flip_counts[m][0] + result.flip_counts[m][1]
                ));
            }
            fs::write(&args.trace, csv)?;
            eprintln!(
                "decoded {} samples to {}",
                result.states.len(),
                args.trace.display()
            );
        }
        Command::Bench(BenchCommand::Table1(args)) => {
            let fallback = if args.paper_scale {
                ExperimentConfig::paper()
            } else {
                ExperimentConfig::desk()
            };
            let cfg = load_config(&args.config, fallback)?;
            let table = run_table(&cfg)?;
            fs::write(&args.out, table.to_csv())?;
            eprintln!("wrote {} cells to {}", table.cells.len(), args.out.display());
        }
        Command::Bench(BenchCommand::Offgrid(args)) => {
            let fallback = ExperimentConfig::offgrid();
            let cfg = load_config(&args.config, fallback)?;
            let result = run_offgrid(&cfg)?;
            fs::write(&args.out, result.to_csv())?;
            eprintln!(
                "off-grid: {} runs, {} divergent, head {:.2} dB -> tail {:.2} dB; wrote {}",
                result.runs,
                result.divergent_runs,
                result.head_mean(0.1),
                result.tail_mean(0.1),
                args.out.display()
            );
        }
        Command::Config(args) => {
            let cfg = match args.profile.as_str() {
                "desk" => ExperimentConfig::desk(),
                "paper" => ExperimentConfig::paper(),
                "offgrid" => ExperimentConfig::offgrid(),
                other => bail!("unknown profile '{other}' (expected desk, paper or offgrid)"),
            };
            print!("{}", cfg.to_toml());
        }
    }
    Ok(())
}
