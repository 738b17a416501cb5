//! The independent plane fields `ω_I` and the product fields built on them.
//!
//! Bits are generated counter-style: `ω_I(u)` is a pure function of
//! `(seed, colex rank of I, u)`, so the field is consistent on all of `Z^n`
//! without storing anything and can be shared freely between workers.

use std::cell::RefCell;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{binomial, project_coords, Coords, IndexSet, LatticeBox, Site};
use crate::rng::{bernoulli53, hash_coords, mix64, threshold53};

/// `p = (p_I)` over all `k`-subsets of `[n]`, stored by colex rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    n: usize,
    k: usize,
    probs: Vec<f64>,
}

impl ParamVector {
    pub fn uniform(n: usize, k: usize, p: f64) -> Result<Self> {
        let count = binomial(n as u64, k as u64) as usize;
        Self::from_ranked(n, k, vec![p; count])
    }

    /// Probabilities listed in colex order of the index sets.
    pub fn from_ranked(n: usize, k: usize, probs: Vec<f64>) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::invalid(format!("need 1 <= k <= n, got n={n}, k={k}")));
        }
        let count = binomial(n as u64, k as u64) as usize;
        if probs.len() != count {
            return Err(Error::invalid(format!(
                "expected {count} parameters for (n={n}, k={k}), got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        Ok(ParamVector { n, k, probs })
    }

    /// Starts from `default` and overrides the listed index sets.
    pub fn from_entries(
        n: usize,
        k: usize,
        default: f64,
        entries: &[(IndexSet, f64)],
    ) -> Result<Self> {
        let mut pv = Self::uniform(n, k, default)?;
        for (i, p) in entries {
            pv.set(i, *p)?;
        }
        Ok(pv)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn rank_of(&self, i: &IndexSet) -> Result<usize> {
        if i.k() != self.k || i.max_member() > self.n {
            return Err(Error::invalid(format!(
                "index set {i} is not a {}-subset of [{}]",
                self.k, self.n
            )));
        }
        Ok(i.colex_rank() as usize)
    }

    pub fn get(&self, i: &IndexSet) -> Result<f64> {
        Ok(self.probs[self.rank_of(i)?])
    }

    pub fn set(&mut self, i: &IndexSet, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        let r = self.rank_of(i)?;
        self.probs[r] = p;
        Ok(())
    }

    pub fn ranked(&self) -> &[f64] {
        &self.probs
    }

    pub fn entries(&self) -> Vec<(IndexSet, f64)> {
        IndexSet::all(self.k, self.n)
            .into_iter()
            .zip(self.probs.iter().copied())
            .collect()
    }

    /// `E_p(ω(o)) = ∏_I p_I`.
    pub fn open_probability(&self) -> f64 {
        self.probs.iter().product()
    }
}

/// `(∏_I p_I)^((2R+1)^k)`: probability that every site of `B(R)` is open.
pub fn box_all_open_probability(params: &ParamVector, radius: u64) -> f64 {
    let exponent = (2 * radius + 1).pow(params.k() as u32);
    params.open_probability().powf(exponent as f64)
}

#[derive(Debug, Clone)]
struct PlaneKey {
    set: IndexSet,
    key: u64,
    threshold: u64,
    p: f64,
}

fn plane_key(seed: u64, rank: u64) -> u64 {
    mix64(seed ^ mix64(rank.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Seeded Bernoulli oracle for every `ω_I`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct HyperplaneField {
    seed: u64,
    params: ParamVector,
    planes: Vec<PlaneKey>,
}

impl HyperplaneField {
    pub fn new(seed: u64, params: ParamVector) -> Self {
        let planes = IndexSet::all(params.k(), params.n())
            .into_iter()
            .zip(params.ranked().iter().copied())
            .map(|(set, p)| {
                let rank = set.colex_rank();
                PlaneKey {
                    key: plane_key(seed, rank),
                    threshold: threshold53(p),
                    set,
                    p,
                }
            })
            .collect();
        HyperplaneField {
            seed,
            params,
            planes,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Turns this field into `HyperplaneField::new(seed, params)` without
    /// reallocating. Lets a worker reuse one field across many trials.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        for (rank, plane) in self.planes.iter_mut().enumerate() {
            plane.key = plane_key(seed, rank as u64);
        }
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    pub fn index_sets(&self) -> impl Iterator<Item = &IndexSet> {
        self.planes.iter().map(|p| &p.set)
    }

    fn plane(&self, i: &IndexSet) -> Result<&PlaneKey> {
        if i.k() != self.k() || i.max_member() > self.n() {
            return Err(Error::invalid(format!(
                "index set {i} is not a {}-subset of [{}]",
                self.k(),
                self.n()
            )));
        }
        Ok(&self.planes[i.colex_rank() as usize])
    }

    /// `ω_I(u)` for `u ∈ Z^k_I`.
    pub fn hyperplane_bit(&self, i: &IndexSet, u: &[i64]) -> Result<bool> {
        if u.len() != i.k() {
            return Err(Error::invalid(format!(
                "plane point has {} coordinates, index set {i} has {}",
                u.len(),
                i.k()
            )));
        }
        let rank = self.plane(i)?.set.colex_rank() as usize;
        Ok(self.bit_ranked(rank, u))
    }

    #[inline]
    pub(crate) fn bit_ranked(&self, rank: usize, u: &[i64]) -> bool {
        let plane = &self.planes[rank];
        if plane.p >= 1.0 {
            return true;
        }
        if plane.p <= 0.0 {
            return false;
        }
        bernoulli53(hash_coords(plane.key, u), plane.threshold)
    }

    /// `ω_I(π_I(v))`, i.e. whether `v` is `ω_I`-open.
    pub fn site_open_in(&self, i: &IndexSet, v: &[i64]) -> Result<bool> {
        let plane = self.plane(i)?;
        if v.len() != self.n() {
            return Err(Error::invalid("site dimension does not match the field"));
        }
        Ok(self.bit_ranked(plane.set.colex_rank() as usize, &project_coords(v, i)))
    }
}

/// Which plane fields enter the product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewMode {
    /// `ω = ∏_{I} ω_I ∘ π_I` over all `k`-subsets.
    FullOmega,
    /// `ξ = ∏_{j=2..n} ω_{I_j} ∘ π_{I_j}` with `I_j = {1, j}`; needs `k = 2`.
    XiOnly,
    Custom(Vec<IndexSet>),
}

/// A product field over a subset of the plane fields.
#[derive(Debug, Clone)]
pub struct FieldView<'a> {
    field: &'a HyperplaneField,
    mode: ViewMode,
    active: Vec<(usize, IndexSet)>,
}

impl<'a> FieldView<'a> {
    pub fn new(field: &'a HyperplaneField, mode: ViewMode) -> Result<Self> {
        let sets: Vec<IndexSet> = match &mode {
            ViewMode::FullOmega => field.index_sets().cloned().collect(),
            ViewMode::XiOnly => {
                if field.k() != 2 {
                    return Err(Error::invalid("the xi view requires k = 2"));
                }
                IndexSet::with_first_axis(field.n())
            }
            ViewMode::Custom(sets) => {
                for s in sets {
                    field.plane(s)?;
                }
                sets.clone()
            }
        };
        let active = sets
            .into_iter()
            .map(|s| (s.colex_rank() as usize, s))
            .collect();
        Ok(FieldView {
            field,
            mode,
            active,
        })
    }

    pub fn full(field: &'a HyperplaneField) -> Self {
        Self::new(field, ViewMode::FullOmega).expect("full view is always valid")
    }

    pub fn xi(field: &'a HyperplaneField) -> Result<Self> {
        Self::new(field, ViewMode::XiOnly)
    }

    pub fn field(&self) -> &'a HyperplaneField {
        self.field
    }

    pub fn mode(&self) -> &ViewMode {
        &self.mode
    }

    pub fn n(&self) -> usize {
        self.field.n()
    }

    pub fn active_sets(&self) -> impl Iterator<Item = &IndexSet> {
        self.active.iter().map(|(_, s)| s)
    }

    /// Product of the active plane bits at the projections of `v`.
    pub fn omega(&self, v: &Site) -> Result<bool> {
        if v.dim() != self.n() {
            return Err(Error::invalid(format!(
                "site of dimension {} queried on an n={} field",
                v.dim(),
                self.n()
            )));
        }
        Ok(self.is_open(v.coords()))
    }

    #[inline]
    pub fn is_open(&self, coords: &[i64]) -> bool {
        debug_assert_eq!(coords.len(), self.n());
        self.active.iter().all(|(rank, set)| {
            let u: Coords = project_coords(coords, set);
            self.field.bit_ranked(*rank, &u)
        })
    }

    /// True iff `v` is `ω_J`-closed for some active `J ≠ I`. This is the
    /// fibre-closed notion used by surrounding-set certificates.
    pub fn closed_off_plane(&self, v: &[i64], excluded: &IndexSet) -> bool {
        self.active.iter().any(|(rank, set)| {
            set != excluded && !self.field.bit_ranked(*rank, &project_coords(v, set))
        })
    }
}

/// Closing `x` in `ω_I` must close every site of its fibre `π_I^{-1}(x)`
/// inside the window.
pub fn column_structure_check(
    view: &FieldView<'_>,
    i: &IndexSet,
    x: &[i64],
    window: &LatticeBox,
) -> Result<bool> {
    let bit = view.field().hyperplane_bit(i, x)?;
    if bit || !view.active_sets().any(|s| s == i) {
        return Ok(true);
    }
    Ok(window
        .sites()
        .filter(|v| project_coords(v.coords(), i).as_slice() == x)
        .all(|v| !view.is_open(v.coords())))
}

/// Per-worker memo of plane bits keyed by `(rank, projected coordinates)`.
/// Values are deterministic, so a cache hit and a recomputation agree.
#[derive(Debug)]
pub struct BitCache<'a> {
    view: FieldView<'a>,
    memo: RefCell<FxHashMap<(usize, Coords), bool>>,
}

impl<'a> BitCache<'a> {
    pub fn new(view: FieldView<'a>) -> Self {
        BitCache {
            view,
            memo: RefCell::new(FxHashMap::default()),
        }
    }

    pub fn is_open(&self, coords: &[i64]) -> bool {
        let mut memo = self.memo.borrow_mut();
        self.view.active.iter().all(|(rank, set)| {
            let u = project_coords(coords, set);
            let field = self.view.field;
            *memo
                .entry((*rank, u))
                .or_insert_with_key(|(r, u)| field.bit_ranked(*r, u))
        })
    }

    pub fn cached_bits(&self) -> usize {
        self.memo.borrow().len()
    }
}
