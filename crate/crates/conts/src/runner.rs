//! Experiment driver. Users are sharded over a scoped thread pool; results
//! are merged by (policy, user) so the pool size never changes the output.

use std::collections::BTreeMap;
use std::path::Path;

use conts_core::rng::{hash64, SessionRng};
use conts_core::simulator::UserRun;
use conts_core::{
    compute_metrics, generate_synthetic, run_user, split_cold_start, train_fm, ArmSpace, Catalog,
    DatasetSplit, EmbeddingStore, ItemId, MetricsReport, PolicyConfig, SynthParams, UserId,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::config::{DataSource, RunConfig};
use crate::dataset::{filter_dataset, load_dataset, Dataset, DatasetPaths, IdMap};
use crate::embfile::{read_embeddings, write_embeddings, write_posterior};
use crate::error::{write_string, Error, Result};
use crate::log::{sessions_to_jsonl, summary_csv, SessionRecord};

pub const THREADS_ENV: &str = "CONBANDIT_THREADS";

/// `CONBANDIT_THREADS` if set to a positive integer, otherwise the number of
/// available cores.
pub fn worker_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Everything the online stage needs: catalog, split and the embeddings of
/// the existing users.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: Dataset,
    pub split: DatasetSplit,
    pub store: EmbeddingStore,
}

fn remap_store(truth: &EmbeddingStore, f: &conts_core::FilteredDataset) -> Result<EmbeddingStore> {
    let mut users = BTreeMap::new();
    for (new, old) in f.users_kept.iter().enumerate() {
        users.insert(UserId::from(new), truth.user(*old)?.to_vec());
    }
    let items = f.items_kept.iter().map(|v| truth.item(*v).map(<[f64]>::to_vec)).collect::<Result<_, _>>()?;
    let attrs = f.attrs_kept.iter().map(|a| truth.attribute(*a).map(<[f64]>::to_vec)).collect::<Result<_, _>>()?;
    Ok(EmbeddingStore::new(truth.dim(), users, items, attrs)?)
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let d = cfg.experiment.d;
    let (data, truth) = match cfg.data {
        DataSource::Synthetic => {
            let ds = generate_synthetic(&cfg.synth_params(), cfg.data_seed())?;
            let data = Dataset::from_synthetic(&ds);
            if cfg.filter_enabled() {
                let (data, f) = filter_dataset(&data, cfg.filter)?;
                let truth = remap_store(&ds.ground_truth, &f)?;
                (data, Some(truth))
            } else {
                (data, Some(ds.ground_truth))
            }
        }
        DataSource::Files => {
            let paths = DatasetPaths {
                interactions: cfg.interactions.clone().expect("validated"),
                item_attrs: cfg.item_attrs.clone().expect("validated"),
                taxonomy: cfg.taxonomy.clone(),
            };
            let data = load_dataset(&paths, cfg.filter_enabled().then_some(cfg.filter))?;
            if let Some(p) = &cfg.idmap {
                data.verify_ids(&IdMap::read(p)?, p)?;
            }
            (data, None)
        }
    };
    // read before splitting so a missing file fails fast
    let from_file = match (&truth, cfg.train_fm) {
        (None, false) => {
            let path = cfg.embeddings.as_deref().expect("validated");
            Some((read_embeddings(path)?, path))
        }
        _ => None,
    };
    cfg.experiment.setting.validate(&data.catalog)?;
    let split = split_cold_start(&data.log, cfg.split_fraction, cfg.split_seed())?;

    let mut store = if cfg.train_fm {
        train_fm(&split, &data.catalog, &cfg.fm_params())?
    } else if let Some((store, path)) = from_file {
        check_store(&store, &data.catalog, &split, d, path)?;
        store
    } else {
        truth.expect("synthetic data carries its ground truth")
    };
    if store.dim() != d {
        return Err(Error::Config(vec![format!("d = {d} but the embeddings have dimension {}", store.dim())]));
    }
    store.retain_users(&split.existing_users);
    Ok(Prepared { data, split, store })
}

fn check_store(store: &EmbeddingStore, catalog: &Catalog, split: &DatasetSplit, d: usize, path: &Path) -> Result<()> {
    let mut errs = Vec::new();
    if store.dim() != d {
        errs.push(format!("dimension {} but d = {d}", store.dim()));
    }
    if store.n_items() != catalog.n_items() {
        errs.push(format!("{} item rows for {} items", store.n_items(), catalog.n_items()));
    }
    if store.n_attributes() != catalog.n_attributes() {
        errs.push(format!("{} attr rows for {} attributes", store.n_attributes(), catalog.n_attributes()));
    }
    let missing = split.existing_users.iter().filter(|u| !store.users().contains_key(u)).count();
    if missing > 0 {
        errs.push(format!(
            "{missing} of {} existing users have no row; was it trained with the same data and split seed?",
            split.existing_users.len()
        ));
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::format(path, errs.join("; ")))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Policy-major, then user id, then session order.
    pub sessions: Vec<SessionRecord>,
    /// One per policy, in sweep order.
    pub reports: Vec<MetricsReport>,
    pub ids: IdMap,
    /// Final bandit state per (policy, user), kept only when asked for.
    pub posteriors: Vec<(String, UserId, conts_core::PosteriorState)>,
}

/// Test records grouped by user, in record order unless shuffling is on.
fn user_jobs(cfg: &RunConfig, split: &DatasetSplit) -> Vec<(UserId, Vec<ItemId>)> {
    let mut jobs: Vec<(UserId, Vec<ItemId>)> = split.test_records.items_by_user().into_iter().collect();
    if cfg.shuffle_sessions {
        for (u, items) in &mut jobs {
            let mut rng = SessionRng::seed_from_u64(hash64(cfg.shuffle_seed(), u64::from(u.0), u64::MAX));
            items.shuffle(&mut rng);
        }
    }
    jobs
}

pub fn run_prepared(cfg: &RunConfig, prep: &Prepared, threads: usize) -> Result<RunOutput> {
    let e = &cfg.experiment;
    let arms = ArmSpace::new(&prep.store, &prep.data.catalog)?;
    let env = conts_core::SimEnv {
        catalog: &prep.data.catalog,
        arms: &arms,
        setting: e.setting,
        rewards: e.rewards,
        max_turns: e.max_turns,
        k: e.k,
    };
    let policies = cfg.policies();
    let users = user_jobs(cfg, &prep.split);
    if users.is_empty() {
        return Err(Error::Data("the split left no new-user sessions".into()));
    }
    let jobs: Vec<(&PolicyConfig, &(UserId, Vec<ItemId>))> =
        policies.iter().flat_map(|p| users.iter().map(move |u| (p, u))).collect();

    let n = threads.clamp(1, jobs.len());
    let run = |i: usize| {
        let (policy, (user, targets)) = jobs[i];
        run_user(&env, policy, prep.store.u_init(), e.l, *user, targets, e.seed)
    };
    let mut slots: Vec<Option<conts_core::Result<UserRun>>> = (0..jobs.len()).map(|_| None).collect();
    if n == 1 {
        for (i, slot) in slots.iter_mut().enumerate() {
            *slot = Some(run(i));
        }
    } else {
        let (run, total) = (&run, jobs.len());
        let parts: Vec<Vec<(usize, conts_core::Result<UserRun>)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..n)
                .map(|w| s.spawn(move || (w..total).step_by(n).map(|i| (i, run(i))).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().map(|h| h.join().expect("session worker panicked")).collect()
        });
        for (i, r) in parts.into_iter().flatten() {
            slots[i] = Some(r);
        }
    }

    let mut sessions = Vec::new();
    let mut reports = Vec::new();
    let mut posteriors = Vec::new();
    let mut slots = slots.into_iter().map(|s| s.expect("every job ran"));
    for policy in &policies {
        let name = policy.kind.name();
        let mut results = Vec::new();
        for (user, _) in &users {
            let run = slots.next().expect("one slot per job")?;
            sessions.extend(run.results.iter().map(|r| SessionRecord::new(r, name, e.seed)));
            results.extend(run.results);
            if cfg.save_posteriors {
                posteriors.push((name.to_string(), *user, run.final_state.posterior));
            }
        }
        reports.push(compute_metrics(&results, e.max_turns, name, e.seed)?);
    }
    Ok(RunOutput { sessions, reports, ids: prep.data.ids.clone(), posteriors })
}

pub fn run_experiment(cfg: &RunConfig, threads: usize) -> Result<RunOutput> {
    run_prepared(cfg, &prepare(cfg)?, threads)
}

/// Writes `sessions.jsonl`, `summary.csv`, `id_map.tsv`, the effective
/// `config.txt` and, when kept, `posteriors/<policy>/user_<id>.txt`.
pub fn write_outputs(cfg: &RunConfig, out: &RunOutput, dir: &Path) -> Result<()> {
    write_string(&dir.join("sessions.jsonl"), &sessions_to_jsonl(&out.sessions))?;
    write_string(&dir.join("summary.csv"), &summary_csv(&out.reports)?)?;
    out.ids.write(&dir.join("id_map.tsv"))?;
    write_string(&dir.join("config.txt"), &cfg.to_text())?;
    for (policy, user, state) in &out.posteriors {
        write_posterior(state, &dir.join("posteriors").join(policy).join(format!("user_{}.txt", user.0)))?;
    }
    Ok(())
}

/// Writes a generated dataset to `dir` (`interactions.tsv`, `item_attrs.tsv`,
/// `taxonomy.tsv` when there are parents), its `id_map.tsv`, and the
/// ground-truth vectors of every user as `ground_truth.emb`. The ids are the
/// ones [`load_dataset`] assigns when reading the files back unfiltered.
pub fn emit_synthetic(params: &SynthParams, seed: u64, dir: &Path) -> Result<()> {
    let ds = generate_synthetic(params, seed)?;
    let data = Dataset::from_synthetic(&ds);
    let paths = DatasetPaths::in_dir(dir, params.n_parents > 0);
    data.write(&paths)?;
    // reloading renumbers attributes in first-seen order
    let reloaded = load_dataset(&paths, None)?;
    reloaded.ids.write(&dir.join("id_map.tsv"))?;
    let truth = data.ids.reindex_store(&ds.ground_truth, &reloaded.ids)?;
    write_embeddings(&truth, &dir.join("ground_truth.emb"))
}
