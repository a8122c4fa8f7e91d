//! Tab-separated dataset files and the dense id map that goes with them.
//!
//! Ids are assigned in first-seen order: items and attributes from the
//! item-attributes file, parents from the taxonomy, users from the
//! interactions. Writing a dataset back and reloading it gives the same ids.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use conts_core::{
    filter_by_frequency, AttrId, Catalog, EmbeddingStore, FilteredDataset, FrequencyFilter, InteractionLog, ItemId, SyntheticDataset,
    UserId,
};

use crate::error::{read_to_string, write_string, Error, Result};

/// External keys of one id kind, indexed by dense id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyTable {
    keys: Vec<String>,
    index: HashMap<String, u32>,
}

impl KeyTable {
    fn intern(&mut self, key: &str) -> u32 {
        if let Some(&id) = self.index.get(key) {
            return id;
        }
        let id = self.keys.len() as u32;
        self.keys.push(key.to_string());
        self.index.insert(key.to_string(), id);
        id
    }

    pub fn get(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }

    pub fn key(&self, id: u32) -> Option<&str> {
        self.keys.get(id as usize).map(String::as_str)
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn from_keys(keys: impl IntoIterator<Item = String>) -> Self {
        let mut t = Self::default();
        for k in keys {
            t.intern(&k);
        }
        t
    }

    /// Keeps the ids listed in `kept` (old ids), renumbered in that order.
    fn reindexed(&self, kept: impl IntoIterator<Item = u32>) -> Self {
        Self::from_keys(kept.into_iter().map(|i| self.keys[i as usize].clone()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    pub users: KeyTable,
    pub items: KeyTable,
    pub attrs: KeyTable,
    pub parents: KeyTable,
}

const KINDS: [&str; 4] = ["user", "item", "attr", "parent"];

impl IdMap {
    fn table(&self, kind: usize) -> &KeyTable {
        [&self.users, &self.items, &self.attrs, &self.parents][kind]
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, name) in KINDS.iter().enumerate() {
            for (id, key) in self.table(k).keys.iter().enumerate() {
                let _ = writeln!(out, "{name}\t{key}\t{id}");
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_string(path, &self.to_tsv())
    }

    /// Moves `store`, indexed by this map, onto the ids of `to` by matching
    /// keys. Users unknown to `to` are dropped.
    pub fn reindex_store(&self, store: &EmbeddingStore, to: &IdMap) -> Result<EmbeddingStore> {
        let mut users = BTreeMap::new();
        for (u, v) in store.users() {
            let new = self.users.key(u.0).and_then(|k| to.users.get(k));
            if let Some(new) = new {
                users.insert(UserId(new), v.clone());
            }
        }
        let carry = |from: &KeyTable, dest: &KeyTable, kind: &str, get: &dyn Fn(u32) -> conts_core::Result<Vec<f64>>| {
            dest.keys
                .iter()
                .map(|k| {
                    let old = from
                        .get(k)
                        .ok_or_else(|| Error::Data(format!("{kind} {k:?} missing from the source id map")))?;
                    Ok(get(old)?)
                })
                .collect::<Result<Vec<_>>>()
        };
        let items = carry(&self.items, &to.items, "item", &|i| store.item(ItemId(i)).map(<[f64]>::to_vec))?;
        let attrs = carry(&self.attrs, &to.attrs, "attribute", &|a| store.attribute(AttrId(a)).map(<[f64]>::to_vec))?;
        Ok(EmbeddingStore::new(store.dim(), users, items, attrs)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut slots: [Vec<Option<String>>; 4] = Default::default();
        for (n, line) in lines(&text) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(path, n, "expected kind<TAB>key<TAB>id"));
            }
            let kind = KINDS
                .iter()
                .position(|k| *k == f[0])
                .ok_or_else(|| Error::parse(path, n, format!("unknown kind {:?}", f[0])))?;
            let id: usize = f[2]
                .parse()
                .map_err(|_| Error::parse(path, n, format!("bad id {:?}", f[2])))?;
            let slot = &mut slots[kind];
            if slot.len() <= id {
                slot.resize(id + 1, None);
            }
            if slot[id].replace(f[1].to_string()).is_some() {
                return Err(Error::parse(path, n, format!("{} id {id} assigned twice", f[0])));
            }
        }
        let mut tables = Vec::new();
        for (k, slot) in slots.into_iter().enumerate() {
            let n = slot.len();
            let keys: Option<Vec<String>> = slot.into_iter().collect();
            let keys = keys.ok_or_else(|| {
                Error::format(path, format!("{} ids are not dense 0..{n}", KINDS[k]))
            })?;
            let table = KeyTable::from_keys(keys);
            if table.len() != n {
                return Err(Error::format(path, format!("duplicate {} key", KINDS[k])));
            }
            tables.push(table);
        }
        let mut it = tables.into_iter();
        Ok(Self {
            users: it.next().unwrap(),
            items: it.next().unwrap(),
            attrs: it.next().unwrap(),
            parents: it.next().unwrap(),
        })
    }
}

/// Non-blank lines with 1-based line numbers, trailing `\r` removed.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn split_pair<'a>(path: &Path, n: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    let (a, b) = line
        .split_once('\t')
        .ok_or_else(|| Error::parse(path, n, "expected two tab-separated fields"))?;
    if b.contains('\t') {
        return Err(Error::parse(path, n, "expected two tab-separated fields"));
    }
    let (a, b) = (a.trim(), b.trim());
    if a.is_empty() || b.is_empty() {
        return Err(Error::parse(path, n, "empty field"));
    }
    Ok((a, b))
}

fn split_list<'a>(path: &Path, n: usize, field: &'a str) -> Result<Vec<&'a str>> {
    let keys: Vec<&str> = field.split(',').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::parse(path, n, "empty key in list"));
    }
    Ok(keys)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub interactions: PathBuf,
    pub item_attrs: PathBuf,
    pub taxonomy: Option<PathBuf>,
}

impl DatasetPaths {
    /// The file names `synth` and [`Dataset::write`] use inside `dir`.
    pub fn in_dir(dir: &Path, taxonomy: bool) -> Self {
        Self {
            interactions: dir.join("interactions.tsv"),
            item_attrs: dir.join("item_attrs.tsv"),
            taxonomy: taxonomy.then(|| dir.join("taxonomy.tsv")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub catalog: Catalog,
    pub log: InteractionLog,
    pub ids: IdMap,
}

/// Reads the three files. With a filter, sparse users and attributes are
/// dropped and the survivors renumbered; the id map follows.
pub fn load_dataset(paths: &DatasetPaths, filter: Option<FrequencyFilter>) -> Result<Dataset> {
    let mut ids = IdMap::default();

    let path = &paths.item_attrs;
    let mut item_attrs: Vec<Vec<AttrId>> = Vec::new();
    for (n, line) in lines(&read_to_string(path)?) {
        let (item, attrs) = split_pair(path, n, line)?;
        if ids.items.get(item).is_some() {
            return Err(Error::parse(path, n, format!("item {item:?} listed twice")));
        }
        ids.items.intern(item);
        item_attrs.push(
            split_list(path, n, attrs)?
                .into_iter()
                .map(|a| AttrId(ids.attrs.intern(a)))
                .collect(),
        );
    }

    let taxonomy = match &paths.taxonomy {
        None => None,
        Some(path) => {
            let mut children: Vec<Vec<AttrId>> = Vec::new();
            let mut owner: HashMap<u32, String> = HashMap::new();
            for (n, line) in lines(&read_to_string(path)?) {
                let (parent, kids) = split_pair(path, n, line)?;
                if ids.parents.get(parent).is_some() {
                    return Err(Error::parse(path, n, format!("parent {parent:?} listed twice")));
                }
                ids.parents.intern(parent);
                let mut row = Vec::new();
                for c in split_list(path, n, kids)? {
                    let a = ids.attrs.get(c).ok_or_else(|| {
                        Error::parse(path, n, format!("unknown attribute {c:?}"))
                    })?;
                    if let Some(prev) = owner.insert(a, parent.to_string()) {
                        return Err(Error::parse(
                            path,
                            n,
                            format!("attribute {c:?} already belongs to parent {prev:?}"),
                        ));
                    }
                    row.push(AttrId(a));
                }
                children.push(row);
            }
            Some(children)
        }
    };

    let path = &paths.interactions;
    let mut records = Vec::new();
    for (n, line) in lines(&read_to_string(path)?) {
        let (user, item) = split_pair(path, n, line)?;
        let v = ids
            .items
            .get(item)
            .ok_or_else(|| Error::parse(path, n, format!("unknown item {item:?}")))?;
        records.push((UserId(ids.users.intern(user)), ItemId(v)));
    }

    let catalog = Catalog::new(item_attrs, ids.attrs.len(), taxonomy)?;
    let data = Dataset { catalog, log: InteractionLog::new(records), ids };
    match filter {
        None => Ok(data),
        Some(filter) => Ok(filter_dataset(&data, filter)?.0),
    }
}

/// Drops sparse users and attributes, renumbering survivors and the id map.
/// The second value maps new ids back to the ids in `data`.
pub fn filter_dataset(data: &Dataset, filter: FrequencyFilter) -> Result<(Dataset, FilteredDataset)> {
    let f = filter_by_frequency(&data.catalog, &data.log, filter)?;
    let ids = &data.ids;
    let ids = IdMap {
        users: ids.users.reindexed(f.users_kept.iter().map(|u| u.0)),
        items: ids.items.reindexed(f.items_kept.iter().map(|v| v.0)),
        attrs: ids.attrs.reindexed(f.attrs_kept.iter().map(|a| a.0)),
        parents: ids.parents.reindexed(f.parents_kept.iter().map(|p| p.0)),
    };
    let out = Dataset { catalog: f.catalog.clone(), log: f.log.clone(), ids };
    Ok((out, f))
}

impl Dataset {
    /// Keys `u<id>`, `i<id>`, `a<id>`, `p<id>` for generated data.
    pub fn from_synthetic(ds: &SyntheticDataset) -> Self {
        let n_users = ds.log.counts_by_user().keys().next_back().map_or(0, |u| u.index() + 1);
        let n_parents = ds.catalog.taxonomy().map_or(0, |t| t.n_parents());
        let table = |prefix: char, n: usize| KeyTable::from_keys((0..n).map(|i| format!("{prefix}{i}")));
        Self {
            catalog: ds.catalog.clone(),
            log: ds.log.clone(),
            ids: IdMap {
                users: table('u', n_users),
                items: table('i', ds.catalog.n_items()),
                attrs: table('a', ds.catalog.n_attributes()),
                parents: table('p', n_parents),
            },
        }
    }

    fn user_key(&self, u: UserId) -> Result<&str> {
        self.ids
            .users
            .key(u.0)
            .ok_or_else(|| Error::Data(format!("user {u} has no key in the id map")))
    }

    pub fn write(&self, paths: &DatasetPaths) -> Result<()> {
        let key = |t: &KeyTable, id: u32| t.key(id).unwrap_or_default().to_string();
        let mut items = String::new();
        for it in self.catalog.items() {
            let attrs: Vec<String> = it.attribute_ids.iter().map(|a| key(&self.ids.attrs, a.0)).collect();
            let _ = writeln!(items, "{}\t{}", key(&self.ids.items, it.item_id.0), attrs.join(","));
        }
        write_string(&paths.item_attrs, &items)?;

        if let (Some(path), Some(tax)) = (&paths.taxonomy, self.catalog.taxonomy()) {
            let mut out = String::new();
            for p in tax.parents() {
                let kids: Vec<String> = tax.children(p).iter().map(|a| key(&self.ids.attrs, a.0)).collect();
                let _ = writeln!(out, "{}\t{}", key(&self.ids.parents, p.0), kids.join(","));
            }
            write_string(path, &out)?;
        }

        let mut out = String::new();
        for (u, v) in &self.log.records {
            let _ = writeln!(out, "{}\t{}", self.user_key(*u)?, key(&self.ids.items, v.0));
        }
        write_string(&paths.interactions, &out)
    }

    /// Fails unless `other` assigns every key the same dense id.
    pub fn verify_ids(&self, other: &IdMap, path: &Path) -> Result<()> {
        for k in 0..KINDS.len() {
            if self.ids.table(k).keys != other.table(k).keys {
                return Err(Error::format(
                    path,
                    format!("{} ids differ from the ones derived from the dataset", KINDS[k]),
                ));
            }
        }
        Ok(())
    }
}
