//! Domain types: ids, catalog, interaction log, cold-start split and the
//! question settings and reward table that parameterise a run.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            fn from(i: usize) -> Self {
                Self(i as u32)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

dense_id!(UserId);
dense_id!(ItemId);
dense_id!(AttrId);
dense_id!(
    /// A parent attribute of the two-level taxonomy. Parents have their own
    /// id space and no trained embedding.
    ParentId
);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemRecord {
    pub item_id: ItemId,
    /// Sorted, deduplicated.
    pub attribute_ids: Vec<AttrId>,
}

impl ItemRecord {
    pub fn has(&self, attr: AttrId) -> bool {
        self.attribute_ids.binary_search(&attr).is_ok()
    }
}

/// Two-level attribute taxonomy: each parent owns a disjoint set of child
/// attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    children: Vec<Vec<AttrId>>,
    parent_of: Vec<Option<ParentId>>,
}

impl Taxonomy {
    pub fn new(n_attributes: usize, children: Vec<Vec<AttrId>>) -> Result<Self> {
        let mut parent_of = vec![None; n_attributes];
        let mut sorted = Vec::with_capacity(children.len());
        for (p, kids) in children.into_iter().enumerate() {
            let mut kids = kids;
            kids.sort_unstable();
            kids.dedup();
            if kids.is_empty() {
                return Err(Error::Integrity(format!("parent {p} has no children")));
            }
            for &c in &kids {
                let slot = parent_of.get_mut(c.index()).ok_or_else(|| {
                    Error::Integrity(format!("taxonomy child {c} is not a known attribute"))
                })?;
                if let Some(prev) = slot {
                    return Err(Error::Integrity(format!(
                        "attribute {c} has two parents ({prev} and {p})"
                    )));
                }
                *slot = Some(ParentId::from(p));
            }
            sorted.push(kids);
        }
        Ok(Self {
            children: sorted,
            parent_of,
        })
    }

    pub fn n_parents(&self) -> usize {
        self.children.len()
    }

    pub fn children(&self, parent: ParentId) -> &[AttrId] {
        &self.children[parent.index()]
    }

    pub fn parent_of(&self, attr: AttrId) -> Option<ParentId> {
        self.parent_of.get(attr.index()).copied().flatten()
    }

    pub fn parents(&self) -> impl Iterator<Item = ParentId> + '_ {
        (0..self.children.len()).map(ParentId::from)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    items: Vec<ItemRecord>,
    n_attributes: usize,
    taxonomy: Option<Taxonomy>,
}

impl Catalog {
    /// `item_attrs[i]` is the attribute set of item `i`. Attribute ids must be
    /// below `n_attributes`; every item needs at least one attribute.
    pub fn new(
        item_attrs: Vec<Vec<AttrId>>,
        n_attributes: usize,
        taxonomy: Option<Vec<Vec<AttrId>>>,
    ) -> Result<Self> {
        let mut items = Vec::with_capacity(item_attrs.len());
        for (i, mut attrs) in item_attrs.into_iter().enumerate() {
            attrs.sort_unstable();
            attrs.dedup();
            if attrs.is_empty() {
                return Err(Error::Integrity(format!("item {i} has no attributes")));
            }
            if let Some(bad) = attrs.iter().find(|a| a.index() >= n_attributes) {
                return Err(Error::Integrity(format!(
                    "item {i} references unknown attribute {bad}"
                )));
            }
            items.push(ItemRecord {
                item_id: ItemId::from(i),
                attribute_ids: attrs,
            });
        }
        let taxonomy = taxonomy
            .map(|t| Taxonomy::new(n_attributes, t))
            .transpose()?;
        Ok(Self {
            items,
            n_attributes,
            taxonomy,
        })
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn items(&self) -> &[ItemRecord] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> Result<&ItemRecord> {
        self.items.get(id.index()).ok_or(Error::UnknownId {
            kind: "item",
            id: id.0,
        })
    }

    pub fn taxonomy(&self) -> Option<&Taxonomy> {
        self.taxonomy.as_ref()
    }

    /// Number of items carrying each attribute.
    pub fn attribute_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_attributes];
        for item in &self.items {
            for a in &item.attribute_ids {
                counts[a.index()] += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionLog {
    pub records: Vec<(UserId, ItemId)>,
}

impl InteractionLog {
    pub fn new(records: Vec<(UserId, ItemId)>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        for (line, (u, v)) in self.records.iter().enumerate() {
            if v.index() >= catalog.n_items() {
                return Err(Error::Integrity(format!(
                    "record {line} (user {u}) references unknown item {v}"
                )));
            }
        }
        Ok(())
    }

    /// Record count per user, ordered by user id.
    pub fn counts_by_user(&self) -> BTreeMap<UserId, usize> {
        let mut counts = BTreeMap::new();
        for (u, _) in &self.records {
            *counts.entry(*u).or_insert(0) += 1;
        }
        counts
    }

    /// Items per user in log order.
    pub fn items_by_user(&self) -> BTreeMap<UserId, Vec<ItemId>> {
        let mut by_user: BTreeMap<UserId, Vec<ItemId>> = BTreeMap::new();
        for (u, v) in &self.records {
            by_user.entry(*u).or_default().push(*v);
        }
        by_user
    }

    pub fn retain_users(&self, users: &BTreeSet<UserId>) -> Self {
        Self::new(
            self.records
                .iter()
                .filter(|(u, _)| users.contains(u))
                .copied()
                .collect(),
        )
    }
}

/// Thresholds for dropping low-frequency users and attributes at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyFilter {
    pub min_user_records: usize,
    pub min_attr_occurrences: usize,
}

impl Default for FrequencyFilter {
    fn default() -> Self {
        Self {
            min_user_records: 10,
            min_attr_occurrences: 5,
        }
    }
}

/// Output of [`filter_by_frequency`]. The `*_kept` tables map each new dense
/// id to the id it had before filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredDataset {
    pub catalog: Catalog,
    pub log: InteractionLog,
    pub users_kept: Vec<UserId>,
    pub items_kept: Vec<ItemId>,
    pub attrs_kept: Vec<AttrId>,
    pub parents_kept: Vec<ParentId>,
}

/// Drops attributes occurring on fewer than `min_attr_occurrences` items,
/// then items left without attributes (and their records), then users with
/// fewer than `min_user_records` remaining records. Survivors are re-indexed
/// densely, preserving their relative order.
pub fn filter_by_frequency(
    catalog: &Catalog,
    log: &InteractionLog,
    filter: FrequencyFilter,
) -> Result<FilteredDataset> {
    let counts = catalog.attribute_counts();
    let attrs_kept: Vec<AttrId> = (0..catalog.n_attributes())
        .filter(|&a| counts[a] >= filter.min_attr_occurrences)
        .map(AttrId::from)
        .collect();
    let mut attr_remap = vec![None; catalog.n_attributes()];
    for (new, old) in attrs_kept.iter().enumerate() {
        attr_remap[old.index()] = Some(AttrId::from(new));
    }

    let mut item_remap = vec![None; catalog.n_items()];
    let mut items_kept = Vec::new();
    let mut item_attrs = Vec::new();
    for item in catalog.items() {
        let attrs: Vec<AttrId> = item
            .attribute_ids
            .iter()
            .filter_map(|a| attr_remap[a.index()])
            .collect();
        if attrs.is_empty() {
            continue;
        }
        item_remap[item.item_id.index()] = Some(ItemId::from(items_kept.len()));
        items_kept.push(item.item_id);
        item_attrs.push(attrs);
    }

    let surviving: Vec<(UserId, ItemId)> = log
        .records
        .iter()
        .filter_map(|(u, v)| item_remap.get(v.index()).copied().flatten().map(|v| (*u, v)))
        .collect();
    let mut user_counts: BTreeMap<UserId, usize> = BTreeMap::new();
    for (u, _) in &surviving {
        *user_counts.entry(*u).or_insert(0) += 1;
    }
    let mut user_remap: BTreeMap<UserId, UserId> = BTreeMap::new();
    let mut users_kept = Vec::new();
    let mut by_id: Vec<UserId> = user_counts
        .iter()
        .filter(|(_, &c)| c >= filter.min_user_records)
        .map(|(u, _)| *u)
        .collect();
    by_id.sort_unstable();
    for u in by_id {
        user_remap.insert(u, UserId::from(users_kept.len()));
        users_kept.push(u);
    }
    let records = surviving
        .into_iter()
        .filter_map(|(u, v)| user_remap.get(&u).map(|nu| (*nu, v)))
        .collect();

    let mut parents_kept = Vec::new();
    let taxonomy = catalog.taxonomy().map(|t| {
        let mut out = Vec::new();
        for p in t.parents() {
            let kids: Vec<AttrId> = t
                .children(p)
                .iter()
                .filter_map(|c| attr_remap[c.index()])
                .collect();
            if !kids.is_empty() {
                parents_kept.push(p);
                out.push(kids);
            }
        }
        out
    });

    Ok(FilteredDataset {
        catalog: Catalog::new(item_attrs, attrs_kept.len(), taxonomy)?,
        log: InteractionLog::new(records),
        users_kept,
        items_kept,
        attrs_kept,
        parents_kept,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub existing_users: BTreeSet<UserId>,
    pub new_users: BTreeSet<UserId>,
    pub train_records: InteractionLog,
    pub test_records: InteractionLog,
}

impl DatasetSplit {
    pub fn train_share(&self) -> f64 {
        let total = self.train_records.len() + self.test_records.len();
        self.train_records.len() as f64 / total as f64
    }
}

/// Cold-start partition. Users are visited in a seeded uniform random order
/// and taken as existing users until their accumulated records reach
/// `fraction` of the log; the user crossing the threshold is included.
pub fn split_cold_start(log: &InteractionLog, fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if log.is_empty() {
        return Err(Error::DegenerateSplit("interaction log is empty".into()));
    }
    let counts = log.counts_by_user();
    let mut order: Vec<UserId> = counts.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let total = log.len() as f64;
    let mut acc = 0usize;
    let mut existing_users = BTreeSet::new();
    for u in &order {
        existing_users.insert(*u);
        acc += counts[u];
        if acc as f64 / total >= fraction {
            break;
        }
    }
    let new_users: BTreeSet<UserId> = order
        .iter()
        .filter(|u| !existing_users.contains(u))
        .copied()
        .collect();
    if new_users.is_empty() {
        return Err(Error::DegenerateSplit(format!(
            "no users left for testing after reaching fraction {fraction}"
        )));
    }
    Ok(DatasetSplit {
        train_records: log.retain_users(&existing_users),
        test_records: log.retain_users(&new_users),
        existing_users,
        new_users,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QuestionMode {
    /// Ask one parent attribute; the user reveals which children they like.
    Enumerated,
    /// Ask one attribute, yes/no.
    Binary,
    /// Ask several attributes at once, yes/no on each.
    MultiAttribute,
}

impl QuestionMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Enumerated => "enumerated",
            Self::Binary => "binary",
            Self::MultiAttribute => "multi_attribute",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "enumerated" => Some(Self::Enumerated),
            "binary" => Some(Self::Binary),
            "multi_attribute" | "multi" => Some(Self::MultiAttribute),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuestionSetting {
    pub mode: QuestionMode,
    pub attributes_per_ask: usize,
}

impl QuestionSetting {
    pub const DEFAULT_MULTI_ASK: usize = 12;

    pub fn binary() -> Self {
        Self {
            mode: QuestionMode::Binary,
            attributes_per_ask: 1,
        }
    }

    pub fn enumerated() -> Self {
        Self {
            mode: QuestionMode::Enumerated,
            attributes_per_ask: 1,
        }
    }

    pub fn multi_attribute(n: usize) -> Self {
        Self {
            mode: QuestionMode::MultiAttribute,
            attributes_per_ask: n,
        }
    }

    pub fn for_mode(mode: QuestionMode) -> Self {
        match mode {
            QuestionMode::Enumerated => Self::enumerated(),
            QuestionMode::Binary => Self::binary(),
            QuestionMode::MultiAttribute => Self::multi_attribute(Self::DEFAULT_MULTI_ASK),
        }
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        if self.attributes_per_ask == 0 {
            return Err(Error::Config("attributes_per_ask must be positive".into()));
        }
        if self.mode == QuestionMode::Enumerated
            && catalog.taxonomy().is_none_or(|t| t.n_parents() == 0)
        {
            return Err(Error::Config(
                "enumerated questions require a non-empty taxonomy".into(),
            ));
        }
        Ok(())
    }
}

impl Default for QuestionSetting {
    fn default() -> Self {
        Self::binary()
    }
}

/// Raw feedback rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTable {
    pub fail_rec: f64,
    pub fail_ask: f64,
    pub suc_ask: f64,
    pub suc_rec: f64,
}

impl Default for RewardTable {
    fn default() -> Self {
        Self {
            fail_rec: -0.15,
            fail_ask: -0.03,
            suc_ask: 5.0,
            suc_rec: 5.0,
        }
    }
}

impl RewardTable {
    pub fn validate(&self) -> Result<()> {
        if !(self.suc_ask > 0.0 && self.fail_ask < 0.0) {
            return Err(Error::Config(String::from(
                "rewards must satisfy suc_ask > 0 > fail_ask",
            )));
        }
        if !(self.suc_rec > 0.0 && self.fail_rec < 0.0) {
            return Err(Error::Config(String::from(
                "rewards must satisfy suc_rec > 0 > fail_rec",
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_from(counts: &[usize]) -> InteractionLog {
        let mut records = Vec::new();
        for (u, &c) in counts.iter().enumerate() {
            for i in 0..c {
                records.push((UserId::from(u), ItemId::from(i % 3)));
            }
        }
        InteractionLog::new(records)
    }

    #[test]
    fn catalog_rejects_dangling_attribute() {
        let err = Catalog::new(vec![vec![AttrId(0), AttrId(4)]], 2, None).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn taxonomy_rejects_two_parents() {
        let err = Catalog::new(
            vec![vec![AttrId(0)]],
            2,
            Some(vec![vec![AttrId(0)], vec![AttrId(0), AttrId(1)]]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn split_boundary_includes_crossing_user() {
        // Two users with 7 and 3 records: whichever seed puts user 0 first
        // must stop right there.
        let log = log_from(&[7, 3]);
        let mut saw_first = false;
        for seed in 0..32 {
            match split_cold_start(&log, 0.7, seed) {
                Ok(split) => {
                    saw_first = true;
                    assert_eq!(split.existing_users, [UserId(0)].into_iter().collect());
                    assert_eq!(split.new_users, [UserId(1)].into_iter().collect());
                    assert_eq!(split.train_records.len(), 7);
                }
                // 3 records sit below 70%, so user 0 crosses and nobody is left.
                Err(e) => assert!(matches!(e, Error::DegenerateSplit(_))),
            }
        }
        assert!(saw_first);
    }

    #[test]
    fn split_single_user_is_degenerate() {
        let log = log_from(&[5]);
        assert!(matches!(
            split_cold_start(&log, 0.7, 1),
            Err(Error::DegenerateSplit(_))
        ));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let log = log_from(&[5, 5]);
        assert!(split_cold_start(&log, 1.0, 1).is_err());
        assert!(split_cold_start(&log, 0.0, 1).is_err());
    }

    #[test]
    fn reward_defaults() {
        let r = RewardTable::default();
        assert_eq!((r.fail_rec, r.fail_ask, r.suc_ask, r.suc_rec), (-0.15, -0.03, 5.0, 5.0));
        r.validate().unwrap();
        let bad = RewardTable { fail_ask: 0.1, ..r };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn enumerated_requires_taxonomy() {
        let c = Catalog::new(vec![vec![AttrId(0)]], 1, None).unwrap();
        assert!(QuestionSetting::enumerated().validate(&c).is_err());
        assert!(QuestionSetting::binary().validate(&c).is_ok());
    }
}
