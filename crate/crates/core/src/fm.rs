//! Offline multi-task BPR training of the shared embedding space.
//!
//! Item task: `s(u, v) = u·v + Σ_{p ∈ context} v·p`, with the context set to
//! the positive item's attributes. Attribute task: `s(u, p) = u·p`.
//! Training runs the item task until it stops improving, then the attribute
//! task on top.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embedding::{EmbeddingStore, Param};
use crate::error::{Error, Result};
use crate::linalg::{axpy, check_dim, dot, norm_sq};
use crate::model::{AttrId, Catalog, DatasetSplit, ItemId, UserId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmHyperParams {
    pub dim: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub epochs_item: usize,
    pub epochs_attr: usize,
    pub negatives_per_positive: usize,
    /// A phase stops once the epoch-mean loss improves by less than this.
    pub early_stop_tol: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for FmHyperParams {
    fn default() -> Self {
        Self {
            dim: 64,
            learning_rate: 0.01,
            l2_reg: 0.001,
            epochs_item: 50,
            epochs_attr: 20,
            negatives_per_positive: 1,
            early_stop_tol: 1e-4,
            init_scale: 0.01,
            seed: 0,
        }
    }
}

impl FmHyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return Err(Error::Config("l2_reg must be non-negative".into()));
        }
        if self.negatives_per_positive == 0 {
            return Err(Error::Config("negatives_per_positive must be positive".into()));
        }
        Ok(())
    }
}

/// `u·v + Σ v·p` (no bias terms).
pub fn fm_score_item(u: &[f64], v: &[f64], p_u: &[&[f64]]) -> Result<f64> {
    check_dim(u.len(), v)?;
    let mut s = dot(u, v);
    for p in p_u {
        check_dim(v.len(), p)?;
        s += dot(v, p);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BprTask {
    Item,
    Attribute,
}

/// One ranking constraint: `user` prefers `positive` over `negative`.
/// For the item task, `context` holds the attributes added to both scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BprTriple {
    pub task: BprTask,
    pub user: UserId,
    pub positive: u32,
    pub negative: u32,
    pub context: Vec<AttrId>,
}

impl BprTriple {
    pub fn item(user: UserId, positive: ItemId, negative: ItemId, context: Vec<AttrId>) -> Self {
        Self {
            task: BprTask::Item,
            user,
            positive: positive.0,
            negative: negative.0,
            context,
        }
    }

    pub fn attribute(user: UserId, positive: AttrId, negative: AttrId) -> Self {
        Self {
            task: BprTask::Attribute,
            user,
            positive: positive.0,
            negative: negative.0,
            context: Vec::new(),
        }
    }

    fn target(&self, id: u32) -> Param {
        match self.task {
            BprTask::Item => Param::Item(ItemId(id)),
            BprTask::Attribute => Param::Attr(AttrId(id)),
        }
    }

    /// Every vector the loss depends on.
    pub fn params(&self) -> Vec<Param> {
        let mut ps = vec![
            Param::User(self.user),
            self.target(self.positive),
            self.target(self.negative),
        ];
        ps.extend(self.context.iter().map(|a| Param::Attr(*a)));
        ps
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Score margin `s(pos) − s(neg)` and the summed context vector.
fn margin(store: &EmbeddingStore, t: &BprTriple) -> Result<(f64, Vec<f64>)> {
    let u = store.user(t.user)?;
    let pos = store.vector(t.target(t.positive))?;
    let neg = store.vector(t.target(t.negative))?;
    let mut ctx = vec![0.0; store.dim()];
    for a in &t.context {
        axpy(1.0, store.attribute(*a)?, &mut ctx);
    }
    let m = dot(u, pos) - dot(u, neg) + dot(&ctx, pos) - dot(&ctx, neg);
    Ok((m, ctx))
}

pub fn bpr_margin(store: &EmbeddingStore, t: &BprTriple) -> Result<f64> {
    margin(store, t).map(|(m, _)| m)
}

/// `−ln σ(s(pos) − s(neg)) + reg · Σ ‖θ‖²` over the vectors in the triple.
pub fn bpr_loss(store: &EmbeddingStore, t: &BprTriple, l2_reg: f64) -> Result<f64> {
    let (m, _) = margin(store, t)?;
    let mut reg = 0.0;
    for p in t.params() {
        reg += norm_sq(store.vector(p)?);
    }
    Ok(softplus(-m) + l2_reg * reg)
}

/// Analytic gradient of [`bpr_loss`], one entry per touched vector.
pub fn bpr_gradients(
    store: &EmbeddingStore,
    t: &BprTriple,
    l2_reg: f64,
) -> Result<Vec<(Param, Vec<f64>)>> {
    if t.positive == t.negative {
        return Err(Error::Training("positive and negative coincide".into()));
    }
    let (m, ctx) = margin(store, t)?;
    // d/dm of −ln σ(m)
    let g = -sigmoid(-m);
    let u = store.user(t.user)?;
    let pos = store.vector(t.target(t.positive))?;
    let neg = store.vector(t.target(t.negative))?;
    let diff: Vec<f64> = pos.iter().zip(neg).map(|(a, b)| a - b).collect();
    let u_ctx: Vec<f64> = u.iter().zip(&ctx).map(|(a, b)| a + b).collect();

    let with_reg = |base: &[f64], scale: f64, param: Param| -> Result<Vec<f64>> {
        let w = store.vector(param)?;
        Ok(base
            .iter()
            .zip(w)
            .map(|(b, wi)| g * scale * b + 2.0 * l2_reg * wi)
            .collect())
    };

    let mut out = Vec::with_capacity(3 + t.context.len());
    out.push((Param::User(t.user), with_reg(&diff, 1.0, Param::User(t.user))?));
    let pp = t.target(t.positive);
    out.push((pp, with_reg(&u_ctx, 1.0, pp)?));
    let np = t.target(t.negative);
    out.push((np, with_reg(&u_ctx, -1.0, np)?));
    for a in &t.context {
        let p = Param::Attr(*a);
        out.push((p, with_reg(&diff, 1.0, p)?));
    }
    Ok(out)
}

/// One SGD step on a triple. Returns the loss before the step.
pub fn bpr_step(store: &mut EmbeddingStore, t: &BprTriple, params: &FmHyperParams) -> Result<f64> {
    let loss = bpr_loss(store, t, params.l2_reg)?;
    let grads = bpr_gradients(store, t, params.l2_reg)?;
    for (p, g) in grads {
        let w = store.vector_mut(p)?;
        axpy(-params.learning_rate, &g, w);
    }
    Ok(loss)
}

fn random_vector<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn sample_excluding<R: Rng>(rng: &mut R, n: usize, exclude: impl Fn(usize) -> bool) -> Option<usize> {
    // Rejection sampling; fall back to a scan when the excluded set is dense.
    for _ in 0..64 {
        let c = rng.random_range(0..n);
        if !exclude(c) {
            return Some(c);
        }
    }
    let free: Vec<usize> = (0..n).filter(|c| !exclude(*c)).collect();
    if free.is_empty() {
        None
    } else {
        Some(free[rng.random_range(0..free.len())])
    }
}

/// Per-phase training statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingReport {
    pub item_epoch_losses: Vec<f64>,
    pub attr_epoch_losses: Vec<f64>,
}

pub fn train_fm(
    split: &DatasetSplit,
    catalog: &Catalog,
    params: &FmHyperParams,
) -> Result<EmbeddingStore> {
    train_fm_with_report(split, catalog, params).map(|(s, _)| s)
}

pub fn train_fm_with_report(
    split: &DatasetSplit,
    catalog: &Catalog,
    params: &FmHyperParams,
) -> Result<(EmbeddingStore, TrainingReport)> {
    params.validate()?;
    let records = &split.train_records.records;
    if records.is_empty() {
        return Err(Error::Training("no training records".into()));
    }
    split.train_records.validate(catalog)?;
    let d = params.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut positives: BTreeMap<UserId, BTreeSet<ItemId>> = BTreeMap::new();
    for (u, v) in records {
        positives.entry(*u).or_default().insert(*v);
    }
    let users = positives
        .keys()
        .map(|u| (*u, random_vector(&mut rng, d, params.init_scale)))
        .collect();
    let items = (0..catalog.n_items())
        .map(|_| random_vector(&mut rng, d, params.init_scale))
        .collect();
    let attrs = (0..catalog.n_attributes())
        .map(|_| random_vector(&mut rng, d, params.init_scale))
        .collect();
    let mut store = EmbeddingStore::new(d, users, items, attrs)?;
    let mut report = TrainingReport::default();
    let mut order: Vec<usize> = (0..records.len()).collect();

    let mut prev = f64::INFINITY;
    for _ in 0..params.epochs_item {
        order.shuffle(&mut rng);
        let (mut total, mut n) = (0.0, 0usize);
        for &i in &order {
            let (u, v) = records[i];
            let seen = &positives[&u];
            let context = catalog.item(v)?.attribute_ids.clone();
            for _ in 0..params.negatives_per_positive {
                let Some(neg) = sample_excluding(&mut rng, catalog.n_items(), |c| {
                    seen.contains(&ItemId::from(c))
                }) else {
                    continue;
                };
                let t = BprTriple::item(u, v, ItemId::from(neg), context.clone());
                total += bpr_step(&mut store, &t, params)?;
                n += 1;
            }
        }
        let mean = if n == 0 { 0.0 } else { total / n as f64 };
        report.item_epoch_losses.push(mean);
        if prev - mean < params.early_stop_tol {
            break;
        }
        prev = mean;
    }

    let mut prev = f64::INFINITY;
    for _ in 0..params.epochs_attr {
        order.shuffle(&mut rng);
        let (mut total, mut n) = (0.0, 0usize);
        for &i in &order {
            let (u, v) = records[i];
            let item = catalog.item(v)?;
            let pos = item.attribute_ids[rng.random_range(0..item.attribute_ids.len())];
            for _ in 0..params.negatives_per_positive {
                let Some(neg) = sample_excluding(&mut rng, catalog.n_attributes(), |c| {
                    item.has(AttrId::from(c))
                }) else {
                    continue;
                };
                let t = BprTriple::attribute(u, pos, AttrId::from(neg));
                total += bpr_step(&mut store, &t, params)?;
                n += 1;
            }
        }
        let mean = if n == 0 { 0.0 } else { total / n as f64 };
        report.attr_epoch_losses.push(mean);
        if prev - mean < params.early_stop_tol {
            break;
        }
        prev = mean;
    }

    store.refresh_u_init();
    Ok((store, report))
}

/// Fraction of (interacted, non-interacted) item pairs ranked correctly by
/// `u·v`, averaged over users with at least one of each.
pub fn ranking_auc(store: &EmbeddingStore, log_by_user: &BTreeMap<UserId, Vec<ItemId>>) -> Result<f64> {
    let n_items = store.n_items();
    let (mut sum, mut users) = (0.0, 0usize);
    for (u, items) in log_by_user {
        let uv = store.user(*u)?;
        let pos: BTreeSet<ItemId> = items.iter().copied().collect();
        if pos.len() == n_items {
            continue;
        }
        let scores: Vec<f64> = store.items().iter().map(|v| dot(uv, v)).collect();
        let (mut good, mut total) = (0.0, 0usize);
        for p in &pos {
            for (n, s) in scores.iter().enumerate() {
                if pos.contains(&ItemId::from(n)) {
                    continue;
                }
                total += 1;
                let sp = scores[p.index()];
                if sp > *s {
                    good += 1.0;
                } else if sp == *s {
                    good += 0.5;
                }
            }
        }
        sum += good / total as f64;
        users += 1;
    }
    if users == 0 {
        return Err(Error::Metrics("no users with both positives and negatives".into()));
    }
    Ok(sum / users as f64)
}
