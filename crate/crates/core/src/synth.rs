//! Seeded synthetic dataset generator used as a desk-scale test fixture.
//!
//! Vectors are i.i.d. `N(0, 1/d)`. Each item takes the `m` attributes with
//! the largest `v·p`. Each user has a few preferred attributes (largest
//! `u·p`) and records their top items under
//! `u·v + Σ_{p ∈ preferred} v·p + noise`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{AttrId, Catalog, InteractionLog, ItemId, UserId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n_users: usize,
    pub n_items: usize,
    pub n_attrs: usize,
    pub d: usize,
    /// Inclusive range for the number of attributes per item.
    pub attrs_per_item: (usize, usize),
    pub records_per_user: usize,
    pub preferred_attrs: usize,
    pub noise: f64,
    /// When non-zero, attribute `a` becomes a child of parent `a % n_parents`.
    pub n_parents: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 500,
            n_attrs: 20,
            d: 16,
            attrs_per_item: (2, 4),
            records_per_user: 5,
            preferred_attrs: 2,
            noise: 0.1,
            n_parents: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.attrs_per_item;
        let mut errs = Vec::new();
        if self.n_users == 0 || self.n_items == 0 || self.n_attrs == 0 || self.d == 0 {
            errs.push("n_users, n_items, n_attrs and d must be positive".into());
        }
        if lo == 0 || lo > hi {
            errs.push(format!("attrs_per_item range {lo}..={hi} is empty or starts at 0"));
        }
        if hi > self.n_attrs {
            errs.push(format!(
                "attrs_per_item upper bound {hi} exceeds n_attrs {}",
                self.n_attrs
            ));
        }
        if self.records_per_user == 0 || self.records_per_user > self.n_items {
            errs.push(format!(
                "records_per_user must lie in 1..={}",
                self.n_items
            ));
        }
        if self.preferred_attrs > self.n_attrs {
            errs.push("preferred_attrs exceeds n_attrs".into());
        }
        if self.n_parents > self.n_attrs {
            errs.push("n_parents exceeds n_attrs".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            errs.push("noise must be non-negative".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub catalog: Catalog,
    pub log: InteractionLog,
    pub ground_truth: EmbeddingStore,
    /// Each user's preferred attributes, by user id.
    pub preferred: Vec<Vec<AttrId>>,
}

fn gaussian_vectors<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<Vec<f64>> {
    let scale = 1.0 / libm::sqrt(d as f64);
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

/// Indices of the `k` largest scores; ties go to the lower index.
fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

pub fn generate_synthetic(params: &SynthParams, seed: u64) -> Result<SyntheticDataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = params.d;
    let users = gaussian_vectors(&mut rng, params.n_users, d);
    let items = gaussian_vectors(&mut rng, params.n_items, d);
    let attrs = gaussian_vectors(&mut rng, params.n_attrs, d);

    let (lo, hi) = params.attrs_per_item;
    let item_attrs: Vec<Vec<AttrId>> = items
        .iter()
        .map(|v| {
            let m = rng.random_range(lo..=hi);
            let affinity: Vec<f64> = attrs.iter().map(|p| dot(v, p)).collect();
            let mut chosen: Vec<AttrId> =
                top_k(&affinity, m).into_iter().map(AttrId::from).collect();
            chosen.sort_unstable();
            chosen
        })
        .collect();

    let taxonomy = (params.n_parents > 0).then(|| {
        let mut kids = alloc::vec![Vec::new(); params.n_parents];
        for a in 0..params.n_attrs {
            kids[a % params.n_parents].push(AttrId::from(a));
        }
        kids
    });

    let mut preferred = Vec::with_capacity(params.n_users);
    let mut records = Vec::with_capacity(params.n_users * params.records_per_user);
    for (u, uv) in users.iter().enumerate() {
        let affinity: Vec<f64> = attrs.iter().map(|p| dot(uv, p)).collect();
        let prefs = top_k(&affinity, params.preferred_attrs);
        let scores: Vec<f64> = items
            .iter()
            .map(|v| {
                let base = dot(uv, v) + prefs.iter().map(|&p| dot(v, &attrs[p])).sum::<f64>();
                base + params.noise * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        for i in top_k(&scores, params.records_per_user) {
            records.push((UserId::from(u), ItemId::from(i)));
        }
        preferred.push(prefs.into_iter().map(AttrId::from).collect());
    }

    let user_map: BTreeMap<UserId, Vec<f64>> = users
        .into_iter()
        .enumerate()
        .map(|(i, v)| (UserId::from(i), v))
        .collect();
    Ok(SyntheticDataset {
        catalog: Catalog::new(item_attrs, params.n_attrs, taxonomy)?,
        log: InteractionLog::new(records),
        ground_truth: EmbeddingStore::new(d, user_map, items, attrs)?,
        preferred,
    })
}
