//! Command-line interface: key generation, factoring runs, single-instance
//! sieving with scatter output, experiment harnesses and the cost model.

use clap::{Args, Parser, Subcommand};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use tnsieve::driver::{
    bases_for, compare_rows_csv, cost_model_csv, experiment_compare, run_factor, CompareSeries,
    Hyperparameters, Pi2Policy, ScalingParams,
};
use tnsieve::numtheory::{generate_rsa_key, RsaKey};
use tnsieve::rng::derive_seed;
use tnsieve::sieve::{estimate_asrpl, sieve_cvp, write_scatter_csv, SieveMode, SieveParams};

#[derive(Parser)]
#[command(name = "tnsieve", version, about = "Lattice sieving factorization with tensor network sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic RSA test key as JSON.
    GenKey {
        /// Key size in bits (>= 8).
        #[arg(long)]
        bits: u64,
        #[arg(long)]
        seed: u64,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full factoring pipeline on a key.
    Factor {
        #[command(flatten)]
        common: HyperArgs,
        /// JSON-lines run log path.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Sieve a single CVP instance and emit its scatter records as CSV.
    SieveCvp {
        #[arg(long, value_name = "FILE")]
        n_file: PathBuf,
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value = "two_n_ell")]
        pi2_policy: String,
        /// Lattice precision parameter.
        #[arg(long, default_value_t = 1.5)]
        c: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "exact-enum")]
        mode: String,
        /// Sample budget K.
        #[arg(long, default_value_t = 1024)]
        budget: usize,
        #[arg(long, default_value_t = 8)]
        bond_dim: usize,
        #[arg(long, default_value_t = 2)]
        sweeps: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Scatter CSV output path (stdout when omitted).
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
    /// Experiment harnesses producing CSV tables.
    Experiment {
        #[command(subcommand)]
        which: ExperimentCommand,
    },
    /// Evaluate the operation-count model over a bit-length range.
    CostModel {
        /// Range as A:B (inclusive).
        #[arg(long, value_name = "A:B")]
        ell_range: String,
        #[arg(long, default_value_t = 0)]
        step: u64,
        #[arg(long)]
        gamma: f64,
        /// Target sr-pairs per lattice.
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Average sr-pairs per lattice over seeded keys.
    Asrpl {
        #[arg(long)]
        bits: u64,
        #[arg(long, default_value_t = 10)]
        keys: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value = "two_n_ell")]
        pi2_policy: String,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long, default_value_t = 50)]
        n_cvp: usize,
        #[arg(long, default_value = "exact-enum")]
        mode: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.5, 2.0])]
        c_schedule: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        bond_dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The three-series sieving comparison across bit lengths.
    Compare {
        /// Range as A:B (inclusive), stepped by 10.
        #[arg(long, value_name = "A:B", default_value = "10:60")]
        ell_range: String,
        #[arg(long, default_value_t = 3)]
        keys: usize,
        /// CVP budget per attempt.
        #[arg(long, default_value_t = 300)]
        budget: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [
            "babai-beyond".to_string(),
            "enum-sublinear".to_string(),
            "enum-beyond".to_string()
        ])]
        series: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Factoring options; a config file provides defaults, flags override.
#[derive(Args)]
struct HyperArgs {
    /// Key file as written by gen-key.
    #[arg(long, value_name = "FILE")]
    n_file: PathBuf,
    /// Plain-text key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rank: Option<usize>,
    /// two_n_ell | two_pi1_squared | sublinear | explicit:K
    #[arg(long)]
    pi2_policy: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// babai-only | exact-enum | ttn
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    bond_dim: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    cvp_budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    c_schedule: Option<Vec<f64>>,
}

impl HyperArgs {
    fn build(&self) -> tnsieve::Result<(RsaKey, Hyperparameters)> {
        let key = RsaKey::from_json(&fs::read_to_string(&self.n_file)?)?;
        let mut hp = Hyperparameters::default();
        if let Some(path) = &self.config {
            hp.apply_config_text(&fs::read_to_string(path)?)?;
        }
        if let Some(v) = self.rank {
            hp.rank = v;
        }
        if let Some(v) = &self.pi2_policy {
            hp.pi2_policy = v.parse()?;
        }
        if let Some(v) = self.gamma {
            hp.gamma = v;
        }
        if let Some(v) = &self.mode {
            hp.mode = v.parse()?;
        }
        if let Some(v) = self.bond_dim {
            hp.bond_dim = v;
        }
        if let Some(v) = self.sweeps {
            hp.sweeps = v;
        }
        if let Some(v) = self.alpha {
            hp.alpha = v;
        }
        if let Some(v) = self.cvp_budget {
            hp.n_cvp = v;
        }
        if let Some(v) = self.seed {
            hp.seed = v;
        }
        if let Some(v) = &self.c_schedule {
            hp.c_schedule = v.clone();
        }
        Ok((key, hp))
    }
}

fn out_writer(path: &Option<PathBuf>) -> tnsieve::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    })
}

fn parse_range(text: &str) -> tnsieve::Result<(u64, u64)> {
    let Some((a, b)) = text.split_once(':') else {
        return Err(tnsieve::Error::InvalidArgument(format!(
            "expected A:B range, got {text:?}"
        )));
    };
    let lo = a.parse().map_err(|_| {
        tnsieve::Error::InvalidArgument(format!("bad range start {a:?}"))
    })?;
    let hi = b.parse().map_err(|_| {
        tnsieve::Error::InvalidArgument(format!("bad range end {b:?}"))
    })?;
    Ok((lo, hi))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> tnsieve::Result<()> {
    match cli.command {
        Command::GenKey { bits, seed, out } => {
            let key = generate_rsa_key(bits, seed)?;
            let mut w = out_writer(&out)?;
            writeln!(w, "{}", key.to_json())?;
        }
        Command::Factor { common, log } => {
            let (key, hp) = common.build()?;
            let mut log_file = match &log {
                Some(p) => Some(fs::File::create(p)?),
                None => None,
            };
            let report = run_factor(
                &key,
                &hp,
                log_file.as_mut().map(|f| f as &mut dyn Write),
            )?;
            match &report.factors {
                Some((p, q)) => println!("{} = {} * {}", key.n, p, q),
                None => println!(
                    "no factorization within {} CVPs ({} sr-pairs collected)",
                    report.cvps_used, report.sr_total
                ),
            }
            eprintln!(
                "cvps={} sr={} sampled={} candidates={} process_attempts={} wall_ms={}",
                report.cvps_used,
                report.sr_total,
                report.sampled_total,
                report.candidates_total,
                report.process_attempts,
                report.wall_ms
            );
        }
        Command::SieveCvp {
            n_file,
            rank,
            pi2_policy,
            c,
            seed,
            mode,
            budget,
            bond_dim,
            sweeps,
            alpha,
            scatter,
        } => {
            let key = RsaKey::from_json(&fs::read_to_string(&n_file)?)?;
            let policy: Pi2Policy = pi2_policy.parse()?;
            let mode: SieveMode = mode.parse()?;
            let (p1, p2) = bases_for(rank, key.bits, policy)?;
            let mut params = SieveParams::new(c, seed, mode, budget);
            params.ttn.bond_dim = bond_dim;
            params.ttn.sweeps = sweeps;
            params.ttn.alpha = alpha;
            let outcome = sieve_cvp(&key, &p1, &p2, &params)?;
            let mut w = out_writer(&scatter)?;
            write_scatter_csv(&outcome.scatter, &mut w)?;
            eprintln!(
                "sampled={} candidates={} sr={} oversized={}",
                outcome.sampled, outcome.candidates, outcome.rho_contribution, outcome.oversized
            );
        }
        Command::Experiment { which } => match which {
            ExperimentCommand::Asrpl {
                bits,
                keys,
                rank,
                pi2_policy,
                gamma,
                n_cvp,
                mode,
                seed,
                c_schedule,
                bond_dim,
                out,
            } => {
                let policy: Pi2Policy = pi2_policy.parse()?;
                let mode: SieveMode = mode.parse()?;
                let (p1, p2) = bases_for(rank, bits, policy)?;
                let key_list: Vec<RsaKey> = (0..keys)
                    .map(|k| generate_rsa_key(bits, derive_seed(seed, k as u64)))
                    .collect::<tnsieve::Result<_>>()?;
                let mut ttn = tnsieve::sieve::TtnParams::default();
                ttn.bond_dim = bond_dim;
                let stats = estimate_asrpl(
                    &key_list, &p1, &p2, gamma, n_cvp, &c_schedule, mode, ttn, seed,
                )?;
                let mut w = out_writer(&out)?;
                writeln!(w, "ell,rank,gamma,mode,key,rho_sr,rescaled")?;
                for (k, rho) in stats.per_key.iter().enumerate() {
                    writeln!(
                        w,
                        "{bits},{rank},{gamma},{mode},{k},{rho},{}",
                        rho / (bits as f64).powf(gamma)
                    )?;
                }
                eprintln!(
                    "mean rho_sr = {} (std {}, rescaled {}), budget {} per CVP",
                    stats.mean, stats.std_dev, stats.rescaled_mean, stats.budget
                );
            }
            ExperimentCommand::Compare { ell_range, keys, budget, seed, series, out } => {
                let (lo, hi) = parse_range(&ell_range)?;
                let ells: Vec<u64> = (lo..=hi).step_by(10).collect();
                let series: Vec<CompareSeries> = series
                    .iter()
                    .map(|s| s.parse())
                    .collect::<tnsieve::Result<_>>()?;
                let rows = experiment_compare(&ells, &series, keys, budget, seed)?;
                let mut w = out_writer(&out)?;
                compare_rows_csv(&rows, &mut w)?;
            }
        },
        Command::CostModel { ell_range, step, gamma, rho, out } => {
            let (lo, hi) = parse_range(&ell_range)?;
            let step = if step == 0 { ((hi - lo) / 64).max(1) } else { step };
            let ells = (lo..=hi).step_by(step as usize);
            let mut w = out_writer(&out)?;
            cost_model_csv(ells, gamma, rho, &ScalingParams::default(), &mut w)?;
        }
    }
    Ok(())
}
