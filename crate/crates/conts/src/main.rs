use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use conts::dataset::{load_dataset, DatasetPaths};
use conts::embfile::write_embeddings;
use conts::log::{compare_logs, read_sessions, recompute, summary_csv, PairedMetric};
use conts::runner::emit_synthetic;
use conts::{run_experiment, worker_threads, write_outputs, Result, RunConfig};
use conts_core::fm::train_fm_with_report;
use conts_core::{split_cold_start, FmHyperParams, FrequencyFilter, SynthParams};

#[derive(Parser)]
#[command(name = "conts", version, about = "Conversational Thompson sampling experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train item/attribute/user embeddings on the existing users of a split.
    TrainFm {
        #[arg(long)]
        interactions: PathBuf,
        #[arg(long)]
        item_attrs: PathBuf,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        /// Embedding file; the id map goes next to it as `<out>.idmap`.
        #[arg(long)]
        out: PathBuf,
        /// Seeds both the split and the FM initialisation.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 0.001)]
        reg: f64,
        #[arg(long, default_value_t = 50)]
        epochs_item: usize,
        #[arg(long, default_value_t = 20)]
        epochs_attr: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 0.7)]
        split_fraction: f64,
        /// Keep sparse users and attributes.
        #[arg(long)]
        no_filter: bool,
    },
    /// Write a synthetic dataset and its ground-truth embeddings.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 500)]
        items: usize,
        #[arg(long, default_value_t = 20)]
        attrs: usize,
        #[arg(long, default_value_t = 16)]
        d: usize,
        #[arg(long, default_value_t = 5)]
        records_per_user: usize,
        /// Group attributes under this many parents and write a taxonomy.
        #[arg(long, default_value_t = 0)]
        parents: usize,
    },
    /// Run one experiment (or a sweep) from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Paired t-test between two session logs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        policy_a: Option<String>,
        #[arg(long)]
        policy_b: Option<String>,
        #[arg(long, value_enum, default_value_t = Metric::Turn)]
        metric: Metric,
    },
    /// Recompute summary.csv from a session log.
    Report {
        log: PathBuf,
        #[arg(long)]
        max_turns: usize,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Turn,
    Success,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".idmap");
    PathBuf::from(s)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| conts::Error::Io { path: p.to_path_buf(), source: e }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::TrainFm {
            interactions,
            item_attrs,
            taxonomy,
            out,
            seed,
            lr,
            reg,
            epochs_item,
            epochs_attr,
            dim,
            split_fraction,
            no_filter,
        } => {
            let paths = DatasetPaths { interactions, item_attrs, taxonomy };
            let filter = (!no_filter).then(FrequencyFilter::default);
            let data = load_dataset(&paths, filter)?;
            let split = split_cold_start(&data.log, split_fraction, seed)?;
            let hp = FmHyperParams {
                dim,
                learning_rate: lr,
                l2_reg: reg,
                epochs_item,
                epochs_attr,
                seed,
                ..FmHyperParams::default()
            };
            let (store, report) = train_fm_with_report(&split, &data.catalog, &hp)?;
            eprintln!(
                "trained on {} users / {} records: {} item epochs (loss {:.6}), {} attribute epochs (loss {:.6})",
                split.existing_users.len(),
                split.train_records.len(),
                report.item_epoch_losses.len(),
                report.item_epoch_losses.last().copied().unwrap_or(f64::NAN),
                report.attr_epoch_losses.len(),
                report.attr_epoch_losses.last().copied().unwrap_or(f64::NAN),
            );
            write_embeddings(&store, &out)?;
            data.ids.write(&sidecar(&out))
        }
        Cmd::Synth { out, seed, users, items, attrs, d, records_per_user, parents } => {
            let params = SynthParams {
                n_users: users,
                n_items: items,
                n_attrs: attrs,
                d,
                records_per_user,
                n_parents: parents,
                ..SynthParams::default()
            };
            emit_synthetic(&params, seed, &out)
        }
        Cmd::Run { config, seed, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            let result = run_experiment(&cfg, worker_threads())?;
            write_outputs(&cfg, &result, &out)?;
            print!("{}", summary_csv(&result.reports)?);
            Ok(())
        }
        Cmd::Compare { a, b, policy_a, policy_b, metric } => {
            let metric = match metric {
                Metric::Turn => PairedMetric::Turn,
                Metric::Success => PairedMetric::Success,
            };
            let r = compare_logs(&read_sessions(&a)?, &read_sessions(&b)?, policy_a.as_deref(), policy_b.as_deref(), metric)?;
            println!("policy_a,policy_b,n,mean_diff,t,p_value");
            println!("{},{},{},{},{},{}", r.policy_a, r.policy_b, r.n, r.mean_diff_at, r.t, r.p_value);
            Ok(())
        }
        Cmd::Report { log, max_turns, out } => {
            let reports = recompute(&read_sessions(&log)?, max_turns)?;
            write_out(out.as_deref(), &summary_csv(&reports)?)
        }
    }
}
