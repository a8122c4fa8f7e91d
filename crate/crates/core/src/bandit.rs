//! Gaussian posterior over a user's preference vector.
//!
//! The belief is `N(mu, l² B⁻¹)` with `mu = B⁻¹ f`. Playing arm `x` with
//! de-biased reward `r'` applies `B += x xᵀ`, `f += r' x`, `mu = B⁻¹ f`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::linalg::{
    all_finite, axpy, check_dim, dot, sherman_morrison_update, sum_vectors, Cholesky,
    SquareMatrix,
};
use crate::model::{AttrId, Catalog, ItemId, ParentId};

/// Ordering doubles as the argmax tie-break: lower kind, then lower id, wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArmKind {
    Item,
    Attribute,
    ParentAttribute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmRef<'a> {
    pub kind: ArmKind,
    pub id: u32,
    pub x: &'a [f64],
}

/// Resolves arms to their embedding. Parent attributes use the mean of their
/// children's vectors, precomputed once.
#[derive(Debug, Clone)]
pub struct ArmSpace<'a> {
    store: &'a EmbeddingStore,
    parents: Vec<Vec<f64>>,
}

impl<'a> ArmSpace<'a> {
    pub fn new(store: &'a EmbeddingStore, catalog: &Catalog) -> Result<Self> {
        if store.n_items() < catalog.n_items() {
            return Err(Error::Integrity(alloc::format!(
                "embeddings cover {} items, catalog has {}",
                store.n_items(),
                catalog.n_items()
            )));
        }
        if store.n_attributes() < catalog.n_attributes() {
            return Err(Error::Integrity(alloc::format!(
                "embeddings cover {} attributes, catalog has {}",
                store.n_attributes(),
                catalog.n_attributes()
            )));
        }
        let parents = match catalog.taxonomy() {
            Some(t) => t
                .parents()
                .map(|p| store.parent_vector(t, p))
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        Ok(Self { store, parents })
    }

    pub fn store(&self) -> &'a EmbeddingStore {
        self.store
    }

    pub fn dim(&self) -> usize {
        self.store.dim()
    }

    pub fn item(&self, id: ItemId) -> Result<ArmRef<'_>> {
        Ok(ArmRef {
            kind: ArmKind::Item,
            id: id.0,
            x: self.store.item(id)?,
        })
    }

    pub fn attribute(&self, id: AttrId) -> Result<ArmRef<'_>> {
        Ok(ArmRef {
            kind: ArmKind::Attribute,
            id: id.0,
            x: self.store.attribute(id)?,
        })
    }

    pub fn parent(&self, id: ParentId) -> Result<ArmRef<'_>> {
        let x = self.parents.get(id.index()).ok_or(Error::UnknownId {
            kind: "parent attribute",
            id: id.0,
        })?;
        Ok(ArmRef {
            kind: ArmKind::ParentAttribute,
            id: id.0,
            x,
        })
    }

    pub fn arm(&self, kind: ArmKind, id: u32) -> Result<ArmRef<'_>> {
        match kind {
            ArmKind::Item => self.item(ItemId(id)),
            ArmKind::Attribute => self.attribute(AttrId(id)),
            ArmKind::ParentAttribute => self.parent(ParentId(id)),
        }
    }

    /// `Σ p` over the given accepted attributes.
    pub fn preference_sum(&self, accepted: &[AttrId]) -> Result<Vec<f64>> {
        let vs = accepted
            .iter()
            .map(|a| self.store.attribute(*a))
            .collect::<Result<Vec<_>>>()?;
        sum_vectors(self.dim(), vs)
    }
}

/// How `B` and its factor are kept current across updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Maintenance {
    /// Full Cholesky refactorisation of `B` after every update.
    #[default]
    Refactor,
    /// O(d²) rank-one Cholesky update plus a Sherman–Morrison inverse used
    /// for the mean.
    RankOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    b: SquareMatrix,
    f: Vec<f64>,
    mu: Vec<f64>,
    l: f64,
    chol: Cholesky,
    maintenance: Maintenance,
    b_inv: Option<SquareMatrix>,
}

impl PosteriorState {
    /// `B = I`, `f = mu = u_init`.
    pub fn new(u_init: &[f64], l: f64) -> Result<Self> {
        Self::with_maintenance(u_init, l, Maintenance::Refactor)
    }

    pub fn with_maintenance(u_init: &[f64], l: f64, maintenance: Maintenance) -> Result<Self> {
        if !all_finite(u_init) {
            return Err(Error::NonFinite("u_init"));
        }
        check_scale(l)?;
        let d = u_init.len();
        if d == 0 {
            return Err(Error::Config("posterior dimension must be at least 1".into()));
        }
        Ok(Self {
            b: SquareMatrix::identity(d),
            f: u_init.to_vec(),
            mu: u_init.to_vec(),
            l,
            chol: Cholesky::identity(d),
            maintenance,
            b_inv: matches!(maintenance, Maintenance::RankOne).then(|| SquareMatrix::identity(d)),
        })
    }

    /// Rebuilds a state from `B` and `f`, recomputing the factor and mean.
    pub fn from_parts(b: SquareMatrix, f: Vec<f64>, l: f64) -> Result<Self> {
        check_dim(b.dim(), &f)?;
        check_scale(l)?;
        if !all_finite(b.as_slice()) || !all_finite(&f) {
            return Err(Error::NonFinite("posterior parameters"));
        }
        if !b.is_symmetric(1e-12) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = b.cholesky()?;
        let mu = chol.solve(&f);
        Ok(Self {
            b,
            f,
            mu,
            l,
            chol,
            maintenance: Maintenance::Refactor,
            b_inv: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn b(&self) -> &SquareMatrix {
        &self.b
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn maintenance(&self) -> Maintenance {
        self.maintenance
    }

    /// Draws `mu + l · L⁻ᵀ z` with `z` standard normal, which has covariance
    /// `l² B⁻¹`. With `l = 0` the mean is returned untouched.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        if self.l == 0.0 {
            return self.mu.clone();
        }
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let mut out = self.mu.clone();
        axpy(self.l, &self.chol.solve_upper(&z), &mut out);
        out
    }

    /// Full update: `B += x xᵀ`, `f += r' x`, `mu = B⁻¹ f`.
    pub fn update(&mut self, x: &[f64], r_prime: f64) -> Result<()> {
        check_dim(self.dim(), x)?;
        if !all_finite(x) || !r_prime.is_finite() {
            return Err(Error::NonFinite("arm update"));
        }
        let mut b = self.b.clone();
        b.add_outer(x);
        let mut f = self.f.clone();
        axpy(r_prime, x, &mut f);
        match self.maintenance {
            Maintenance::Refactor => {
                let chol = b.cholesky().map_err(|_| {
                    Error::Internal("posterior precision lost positive definiteness".into())
                })?;
                self.mu = chol.solve(&f);
                self.chol = chol;
            }
            Maintenance::RankOne => {
                let mut chol = self.chol.clone();
                chol.rank_one_update(x).map_err(|_| {
                    Error::Internal("posterior precision lost positive definiteness".into())
                })?;
                let inv = self.b_inv.get_or_insert_with(|| SquareMatrix::identity(b.dim()));
                sherman_morrison_update(inv, x);
                self.mu = inv.mul_vec(&f);
                self.chol = chol;
            }
        }
        self.b = b;
        self.f = f;
        Ok(())
    }

    /// Updates only the information vector, keeping `B` fixed:
    /// `f += r' x`, `mu = B⁻¹ f`.
    pub fn update_mean_only(&mut self, x: &[f64], r_prime: f64) -> Result<()> {
        check_dim(self.dim(), x)?;
        if !all_finite(x) || !r_prime.is_finite() {
            return Err(Error::NonFinite("arm update"));
        }
        axpy(r_prime, x, &mut self.f);
        self.mu = match &self.b_inv {
            Some(inv) => inv.mul_vec(&self.f),
            None => self.chol.solve(&self.f),
        };
        Ok(())
    }

    /// `xᵀ B⁻¹ x`
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        self.chol.inv_quad_form(x)
    }
}

fn check_scale(l: f64) -> Result<()> {
    if l.is_finite() && l >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(alloc::format!(
            "posterior scale l must be finite and non-negative, got {l}"
        )))
    }
}

pub fn init_posterior(u_init: &[f64], l: f64) -> Result<PosteriorState> {
    PosteriorState::new(u_init, l)
}

pub fn sample_user<R: Rng + ?Sized>(state: &PosteriorState, rng: &mut R) -> Vec<f64> {
    state.sample(rng)
}

/// `ũ·x + Σ x·p`
pub fn score_arm(u_tilde: &[f64], arm: &ArmRef<'_>, p_u: &[&[f64]]) -> Result<f64> {
    check_dim(u_tilde.len(), arm.x)?;
    let mut s = dot(u_tilde, arm.x);
    for p in p_u {
        check_dim(arm.x.len(), p)?;
        s += dot(arm.x, p);
    }
    Ok(s)
}

/// `r' = r − x·(u_init + Σ p)`
pub fn debias_reward(r: f64, arm: &ArmRef<'_>, u_init: &[f64], p_u: &[&[f64]]) -> Result<f64> {
    check_dim(arm.x.len(), u_init)?;
    let mut bias = dot(arm.x, u_init);
    for p in p_u {
        check_dim(arm.x.len(), p)?;
        bias += dot(arm.x, p);
    }
    Ok(r - bias)
}

pub fn update_posterior(
    mut state: PosteriorState,
    arm: &ArmRef<'_>,
    r_prime: f64,
) -> Result<PosteriorState> {
    state.update(arm.x, r_prime)?;
    Ok(state)
}

/// `u·x + Σ x·p + α √(xᵀ A⁻¹ x)`, with `A` given by its Cholesky factor.
pub fn ucb_score(
    a: &Cholesky,
    u: &[f64],
    arm: &ArmRef<'_>,
    p_u: &[&[f64]],
    alpha: f64,
) -> Result<f64> {
    check_dim(a.dim(), arm.x)?;
    if !(alpha >= 0.0) {
        return Err(Error::Config("alpha must be non-negative".into()));
    }
    let mean = score_arm(u, arm, p_u)?;
    Ok(mean + alpha * libm::sqrt(a.inv_quad_form(arm.x)))
}

/// [`ucb_score`] on a dense matrix; factors `a` first.
pub fn ucb_score_dense(
    a: &SquareMatrix,
    u: &[f64],
    arm: &ArmRef<'_>,
    p_u: &[&[f64]],
    alpha: f64,
) -> Result<f64> {
    if !a.is_symmetric(1e-12) {
        return Err(Error::NotPositiveDefinite);
    }
    ucb_score(&a.cholesky()?, u, arm, p_u, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arm(x: &[f64]) -> ArmRef<'_> {
        ArmRef {
            kind: ArmKind::Item,
            id: 0,
            x,
        }
    }

    #[test]
    fn init_is_identity_with_mean_u_init() {
        let s = init_posterior(&[0.5, 0.5], 0.01).unwrap();
        assert_eq!(s.b(), &SquareMatrix::identity(2));
        assert_eq!(s.f(), &[0.5, 0.5]);
        assert_eq!(s.mu(), &[0.5, 0.5]);
        let z = init_posterior(&[0.0; 3], 0.01).unwrap();
        assert_eq!(z.mu(), &[0.0; 3]);
    }

    #[test]
    fn init_rejects_non_finite() {
        assert_eq!(
            init_posterior(&[f64::NAN, 0.0], 0.1).unwrap_err(),
            Error::NonFinite("u_init")
        );
        assert!(init_posterior(&[0.0], -1.0).is_err());
    }

    #[test]
    fn zero_scale_sample_is_mean() {
        let mut s = init_posterior(&[0.3, -0.7], 0.0).unwrap();
        s.update(&[1.0, 2.0], 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draw = s.sample(&mut rng);
        assert_eq!(draw, s.mu());
    }

    #[test]
    fn hand_computed_update() {
        let s = init_posterior(&[0.5, 0.5], 0.01).unwrap();
        let x = [1.0, 0.0];
        let r = debias_reward(5.0, &arm(&x), &[0.5, 0.5], &[]).unwrap();
        assert_eq!(r, 4.5);
        let s = update_posterior(s, &arm(&x), r).unwrap();
        assert_eq!(s.b().as_slice(), &[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.f(), &[5.0, 0.5]);
        assert!((s.mu()[0] - 2.5).abs() < 1e-15);
        assert!((s.mu()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_arm_is_noop() {
        let mut s = init_posterior(&[0.2, -0.1, 0.4], 0.1).unwrap();
        s.update(&[0.5, 0.5, 0.0], 1.0).unwrap();
        let before = s.clone();
        s.update(&[0.0; 3], 3.0).unwrap();
        assert_eq!(s.b(), before.b());
        assert_eq!(s.f(), before.f());
        assert_eq!(s.mu(), before.mu());
    }

    #[test]
    fn debias_examples() {
        let e2 = [0.0, 1.0];
        assert_eq!(debias_reward(1.25, &arm(&e2), &[0.0, 0.0], &[]).unwrap(), 1.25);
        let r = debias_reward(-0.03, &arm(&e2), &[0.0, 0.0], &[&e2]).unwrap();
        assert!((r - -1.03).abs() < 1e-15);
    }

    #[test]
    fn score_examples() {
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        assert!(score_arm(&e1, &arm(&e1), &[]).unwrap() > score_arm(&e1, &arm(&e2), &[]).unwrap());
        let zero = [0.0, 0.0];
        let p: &[&[f64]] = &[&e2];
        assert!(score_arm(&zero, &arm(&e2), p).unwrap() > score_arm(&zero, &arm(&e1), p).unwrap());
        assert!(matches!(
            score_arm(&[1.0], &arm(&e1), &[]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ucb_examples() {
        let a = Cholesky::identity(2);
        let e1 = [1.0, 0.0];
        assert_eq!(ucb_score(&a, &[0.0, 0.0], &arm(&e1), &[], 2.0).unwrap(), 2.0);
        let u = [0.3, -0.2];
        assert_eq!(
            ucb_score(&a, &u, &arm(&e1), &[], 0.0).unwrap(),
            score_arm(&u, &arm(&e1), &[]).unwrap()
        );
        let bad = SquareMatrix::from_row_major(2, vec![1.0, 3.0, 3.0, 1.0]).unwrap();
        assert_eq!(
            ucb_score_dense(&bad, &u, &arm(&e1), &[], 1.0),
            Err(Error::NotPositiveDefinite)
        );
    }

    #[test]
    fn diagonal_grows_by_squares() {
        let mut s = init_posterior(&[0.0; 3], 1.0).unwrap();
        s.update(&[0.3, -0.2, 0.9], 0.1).unwrap();
        let before = s.b().diagonal();
        let x = [1.5, -0.5, 0.25];
        s.update(&x, -0.4).unwrap();
        let after = s.b().diagonal();
        for i in 0..3 {
            assert_eq!(after[i], before[i] + x[i] * x[i]);
        }
    }

    #[test]
    fn non_finite_arm_rejected() {
        let mut s = init_posterior(&[0.0; 2], 1.0).unwrap();
        assert!(s.update(&[f64::INFINITY, 0.0], 1.0).is_err());
        assert!(s.update(&[0.0, 0.0], f64::NAN).is_err());
    }
}
