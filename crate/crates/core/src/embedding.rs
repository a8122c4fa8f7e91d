use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, check_dim};
use crate::model::{AttrId, ItemId, ParentId, Taxonomy, UserId};

/// User, item and attribute vectors in one shared space, plus the cold-start
/// mean `u_init` over the stored users.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    d: usize,
    users: BTreeMap<UserId, Vec<f64>>,
    items: Vec<Vec<f64>>,
    attributes: Vec<Vec<f64>>,
    u_init: Vec<f64>,
}

/// Names one trainable vector in the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Param {
    User(UserId),
    Item(ItemId),
    Attr(AttrId),
}

impl EmbeddingStore {
    pub fn new(
        d: usize,
        users: BTreeMap<UserId, Vec<f64>>,
        items: Vec<Vec<f64>>,
        attributes: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        for v in users.values().chain(&items).chain(&attributes) {
            check_dim(d, v)?;
            if !all_finite(v) {
                return Err(Error::NonFinite("embedding vector"));
            }
        }
        let mut store = Self {
            d,
            users,
            items,
            attributes,
            u_init: vec![0.0; d],
        };
        store.recompute_u_init();
        Ok(store)
    }

    fn recompute_u_init(&mut self) {
        let mut mean = vec![0.0; self.d];
        if !self.users.is_empty() {
            for u in self.users.values() {
                axpy(1.0, u, &mut mean);
            }
            let n = self.users.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
        }
        self.u_init = mean;
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Mean of all stored user vectors (zero when there are none).
    pub fn u_init(&self) -> &[f64] {
        &self.u_init
    }

    pub fn users(&self) -> &BTreeMap<UserId, Vec<f64>> {
        &self.users
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn user(&self, id: UserId) -> Result<&[f64]> {
        self.users.get(&id).map(Vec::as_slice).ok_or(Error::UnknownId {
            kind: "user",
            id: id.0,
        })
    }

    pub fn item(&self, id: ItemId) -> Result<&[f64]> {
        self.items
            .get(id.index())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownId {
                kind: "item",
                id: id.0,
            })
    }

    pub fn attribute(&self, id: AttrId) -> Result<&[f64]> {
        self.attributes
            .get(id.index())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownId {
                kind: "attribute",
                id: id.0,
            })
    }

    pub fn items(&self) -> &[Vec<f64>] {
        &self.items
    }

    pub fn attributes(&self) -> &[Vec<f64>] {
        &self.attributes
    }

    pub fn vector(&self, p: Param) -> Result<&[f64]> {
        match p {
            Param::User(u) => self.user(u),
            Param::Item(v) => self.item(v),
            Param::Attr(a) => self.attribute(a),
        }
    }

    /// Mutable access for trainers. User vectors changed this way leave
    /// `u_init` stale until [`EmbeddingStore::refresh_u_init`] is called.
    pub fn vector_mut(&mut self, p: Param) -> Result<&mut [f64]> {
        let slot = match p {
            Param::User(u) => self.users.get_mut(&u),
            Param::Item(v) => self.items.get_mut(v.index()),
            Param::Attr(a) => self.attributes.get_mut(a.index()),
        };
        slot.map(Vec::as_mut_slice).ok_or(match p {
            Param::User(u) => Error::UnknownId { kind: "user", id: u.0 },
            Param::Item(v) => Error::UnknownId { kind: "item", id: v.0 },
            Param::Attr(a) => Error::UnknownId {
                kind: "attribute",
                id: a.0,
            },
        })
    }

    pub fn refresh_u_init(&mut self) {
        self.recompute_u_init();
    }

    pub fn set_user(&mut self, id: UserId, v: Vec<f64>) -> Result<()> {
        check_dim(self.d, &v)?;
        if !all_finite(&v) {
            return Err(Error::NonFinite("user vector"));
        }
        self.users.insert(id, v);
        self.recompute_u_init();
        Ok(())
    }

    /// Keeps only the given users, so that `u_init` becomes their mean.
    pub fn retain_users(&mut self, keep: &BTreeSet<UserId>) {
        self.users.retain(|u, _| keep.contains(u));
        self.recompute_u_init();
    }

    /// Unweighted mean of a parent's child attribute vectors.
    pub fn parent_vector(&self, taxonomy: &Taxonomy, parent: ParentId) -> Result<Vec<f64>> {
        let kids = taxonomy.children(parent);
        let mut mean = vec![0.0; self.d];
        for c in kids {
            axpy(1.0, self.attribute(*c)?, &mut mean);
        }
        let n = kids.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u_init_is_user_mean() {
        let mut users = BTreeMap::new();
        users.insert(UserId(0), vec![1.0, 0.0]);
        users.insert(UserId(3), vec![0.0, 2.0]);
        let mut s = EmbeddingStore::new(2, users, vec![vec![0.0, 0.0]], vec![]).unwrap();
        assert_eq!(s.u_init(), &[0.5, 1.0]);
        s.set_user(UserId(1), vec![2.0, 3.0]).unwrap();
        assert_eq!(s.u_init(), &[1.0, 5.0 / 3.0]);
        s.retain_users(&[UserId(1)].into_iter().collect());
        assert_eq!(s.u_init(), &[2.0, 3.0]);
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(matches!(
            EmbeddingStore::new(2, BTreeMap::new(), vec![vec![1.0]], vec![]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            EmbeddingStore::new(1, BTreeMap::new(), vec![vec![f64::NAN]], vec![]),
            Err(Error::NonFinite(_))
        ));
    }
}
