//! Integer-lattice geometry on `Z^n`.
//!
//! Boundaries of boxes are measured in the l∞ norm, path steps and
//! separation in the l1 norm. The two are kept apart by name: `linf_norm`
//! vs `l1_norm`.

use std::collections::VecDeque;
use std::fmt;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Coords = SmallVec<[i64; 8]>;

/// Run-scoped ambient dimension. Sites are validated against it once, at
/// construction, so geometry calls do not re-check lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    n: usize,
}

impl Lattice {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("lattice dimension must be positive"));
        }
        Ok(Lattice { n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn site(&self, coords: &[i64]) -> Result<Site> {
        if coords.len() != self.n {
            return Err(Error::invalid(format!(
                "site has {} coordinates, lattice dimension is {}",
                coords.len(),
                self.n
            )));
        }
        Ok(Site(coords.iter().copied().collect()))
    }

    pub fn origin(&self) -> Site {
        Site(smallvec::smallvec![0; self.n])
    }

    /// Canonical unit vector `e_i`, with `i` 1-based.
    pub fn unit(&self, i: usize) -> Site {
        assert!((1..=self.n).contains(&i), "unit vector index out of range");
        let mut s = self.origin();
        s.0[i - 1] = 1;
        s
    }

    pub fn index_set(&self, members: &[usize]) -> Result<IndexSet> {
        IndexSet::new(members, self.n)
    }
}

/// A lattice point `x = (x_1, …, x_n)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(pub Coords);

impl Site {
    pub fn from_slice(coords: &[i64]) -> Self {
        Site(coords.iter().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn l1_norm(&self) -> u64 {
        l1_norm(self)
    }

    pub fn linf_norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Site) -> Site {
        debug_assert_eq!(self.dim(), other.dim());
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Site) -> Site {
        debug_assert_eq!(self.dim(), other.dim());
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: i64) -> Site {
        Site(self.0.iter().map(|a| a * k).collect())
    }

    /// `self + delta * e_axis`, axis 1-based.
    pub fn shifted(&self, axis: usize, delta: i64) -> Site {
        let mut s = self.clone();
        s.0[axis - 1] += delta;
        s
    }

    pub fn l1_distance(&self, other: &Site) -> u64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).unsigned_abs())
            .sum()
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl std::ops::Index<usize> for Site {
    type Output = i64;
    /// 0-based coordinate access.
    fn index(&self, i: usize) -> &i64 {
        &self.0[i]
    }
}

/// A sorted `k`-subset of `{1, …, n}` naming the coordinate plane `Z^k_I`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexSet {
    members: SmallVec<[usize; 8]>,
}

impl IndexSet {
    pub fn new(members: &[usize], n: usize) -> Result<Self> {
        if members.is_empty() || members.len() > n {
            return Err(Error::invalid(format!(
                "index set {members:?} must have between 1 and {n} members"
            )));
        }
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "index set {members:?} must be strictly increasing"
            )));
        }
        if members[0] < 1 || members[members.len() - 1] > n {
            return Err(Error::invalid(format!(
                "index set {members:?} has members outside [1, {n}]"
            )));
        }
        Ok(IndexSet {
            members: members.iter().copied().collect(),
        })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn max_member(&self) -> usize {
        self.members[self.members.len() - 1]
    }

    /// Colexicographic rank among all `k`-subsets of the positive integers.
    /// Independent of `n`, which keeps ranks stable when `n` grows.
    pub fn colex_rank(&self) -> u64 {
        self.members
            .iter()
            .enumerate()
            .map(|(i, &m)| binomial((m - 1) as u64, (i + 1) as u64))
            .sum()
    }

    /// `[n] \ I`; `None` when `I = [n]`.
    pub fn complement(&self, n: usize) -> Option<IndexSet> {
        let rest: Vec<usize> = (1..=n).filter(|i| !self.contains(*i)).collect();
        if rest.is_empty() {
            None
        } else {
            Some(IndexSet {
                members: rest.into_iter().collect(),
            })
        }
    }

    /// All `k`-subsets of `[n]`, ordered by colex rank.
    pub fn all(k: usize, n: usize) -> Vec<IndexSet> {
        let mut out = Vec::new();
        if k == 0 || k > n {
            return out;
        }
        let mut cur: Vec<usize> = (1..=k).collect();
        loop {
            out.push(IndexSet {
                members: cur.iter().copied().collect(),
            });
            // colex successor: bump the lowest member that can move up
            let mut i = 0;
            while i < k {
                let limit = if i + 1 < k { cur[i + 1] } else { n + 1 };
                if cur[i] + 1 < limit {
                    cur[i] += 1;
                    for (j, slot) in cur.iter_mut().enumerate().take(i) {
                        *slot = j + 1;
                    }
                    break;
                }
                i += 1;
            }
            if i == k {
                break;
            }
        }
        out
    }

    /// The planes `I_j = {1, j}`, `j = 2..=n`.
    pub fn with_first_axis(n: usize) -> Vec<IndexSet> {
        (2..=n)
            .map(|j| IndexSet {
                members: smallvec::smallvec![1, j],
            })
            .collect()
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.members.as_slice())
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, m) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "]")
    }
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Coordinates of `v` at the positions of `I`, in increasing index order.
pub fn project(v: &Site, i: &IndexSet) -> Result<Coords> {
    if i.max_member() > v.dim() {
        return Err(Error::invalid(format!(
            "index set {i} does not fit a site of dimension {}",
            v.dim()
        )));
    }
    Ok(project_coords(v.coords(), i))
}

#[inline]
pub(crate) fn project_coords(coords: &[i64], i: &IndexSet) -> Coords {
    i.members.iter().map(|&m| coords[m - 1]).collect()
}

pub fn l1_norm(v: &Site) -> u64 {
    v.0.iter().map(|c| c.unsigned_abs()).sum()
}

/// All `2n` nearest neighbours in the order `+e_1, -e_1, +e_2, -e_2, …`.
pub fn neighbors(v: &Site) -> Vec<Site> {
    let mut out = Vec::with_capacity(2 * v.dim());
    for axis in 1..=v.dim() {
        out.push(v.shifted(axis, 1));
        out.push(v.shifted(axis, -1));
    }
    out
}

/// True iff `max_i |v_i| = K`.
pub fn on_boundary(v: &Site, k: u64) -> bool {
    v.linf_norm() == k
}

/// Inclusive box `[lo_1, hi_1] × … × [lo_n, hi_n]`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeBox {
    lo: Site,
    hi: Site,
}

impl LatticeBox {
    pub fn new(lo: Site, hi: Site) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::invalid("box corners have different dimensions"));
        }
        if lo.0.iter().zip(&hi.0).any(|(a, b)| a > b) {
            return Err(Error::invalid(format!(
                "box corner {lo:?} exceeds {hi:?} in some coordinate"
            )));
        }
        Ok(LatticeBox { lo, hi })
    }

    /// `B(K) = [-K, K]^n`.
    pub fn centered(n: usize, radius: u64) -> Self {
        let r = radius as i64;
        LatticeBox {
            lo: Site(smallvec::smallvec![-r; n]),
            hi: Site(smallvec::smallvec![r; n]),
        }
    }

    /// `B(y; N) = [y_1, y_1 + N - 1] × … × [y_n, y_n + N - 1]`.
    pub fn cube(corner: &Site, side: u64) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("box side must be positive"));
        }
        let hi = Site(corner.0.iter().map(|c| c + side as i64 - 1).collect());
        Ok(LatticeBox {
            lo: corner.clone(),
            hi,
        })
    }

    pub fn lo(&self) -> &Site {
        &self.lo
    }

    pub fn hi(&self) -> &Site {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn contains(&self, v: &Site) -> bool {
        self.contains_coords(v.coords())
    }

    pub fn contains_coords(&self, c: &[i64]) -> bool {
        c.len() == self.dim()
            && c
                .iter()
                .zip(self.lo.0.iter().zip(&self.hi.0))
                .all(|(x, (a, b))| a <= x && x <= b)
    }

    pub fn side(&self, axis: usize) -> u64 {
        (self.hi.0[axis - 1] - self.lo.0[axis - 1]) as u64 + 1
    }

    pub fn volume(&self) -> u64 {
        (1..=self.dim()).map(|a| self.side(a)).product()
    }

    /// Image under `π_I`, as a box in `Z^k`.
    pub fn project(&self, i: &IndexSet) -> LatticeBox {
        LatticeBox {
            lo: Site(project_coords(self.lo.coords(), i)),
            hi: Site(project_coords(self.hi.coords(), i)),
        }
    }

    /// Sites in lexicographic order.
    pub fn sites(&self) -> BoxSites<'_> {
        BoxSites {
            bx: self,
            next: Some(self.lo.clone()),
        }
    }
}

impl fmt::Debug for LatticeBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Box({:?}..={:?})", self.lo, self.hi)
    }
}

pub struct BoxSites<'a> {
    bx: &'a LatticeBox,
    next: Option<Site>,
}

impl Iterator for BoxSites<'_> {
    type Item = Site;

    fn next(&mut self) -> Option<Site> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        let mut axis = succ.dim();
        loop {
            if axis == 0 {
                break;
            }
            let a = axis - 1;
            if succ.0[a] < self.bx.hi.0[a] {
                succ.0[a] += 1;
                self.next = Some(succ);
                break;
            }
            succ.0[a] = self.bx.lo.0[a];
            axis -= 1;
        }
        Some(cur)
    }
}

/// A finite region `A ∋ o` together with a barrier `T` that contains every
/// lattice neighbour of `A` lying outside `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurroundCertificate {
    pub region: Vec<Site>,
    pub barrier: Vec<Site>,
}

impl SurroundCertificate {
    /// Checks the structural invariants: `A` non-empty, connected, contains
    /// the origin, and its exterior neighbourhood lies inside `T`.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.region.first() else {
            return Err(Error::InvalidCertificate("region is empty".into()));
        };
        let n = first.dim();
        if self
            .region
            .iter()
            .chain(&self.barrier)
            .any(|s| s.dim() != n)
        {
            return Err(Error::InvalidCertificate("mixed dimensions".into()));
        }
        let region: FxHashSet<&Site> = self.region.iter().collect();
        let origin = Site(smallvec::smallvec![0; n]);
        if !region.contains(&origin) {
            return Err(Error::InvalidCertificate(
                "region does not contain the origin".into(),
            ));
        }
        let barrier: FxHashSet<&Site> = self.barrier.iter().collect();
        if let Some(s) = self.region.iter().find(|s| barrier.contains(s)) {
            return Err(Error::InvalidCertificate(format!(
                "site {s:?} is in both region and barrier"
            )));
        }

        let mut seen: FxHashSet<Site> = FxHashSet::default();
        let mut queue = VecDeque::from([origin.clone()]);
        seen.insert(origin);
        while let Some(v) = queue.pop_front() {
            for w in neighbors(&v) {
                if region.contains(&w) && seen.insert(w.clone()) {
                    queue.push_back(w);
                }
            }
        }
        if seen.len() != region.len() {
            return Err(Error::InvalidCertificate(format!(
                "region is disconnected: {} of {} sites reachable from the origin",
                seen.len(),
                region.len()
            )));
        }
        Ok(())
    }

    /// Every lattice neighbour of `A` outside `A`, sorted.
    pub fn exterior_boundary(&self) -> Vec<Site> {
        let region: FxHashSet<&Site> = self.region.iter().collect();
        let mut out: Vec<Site> = self
            .region
            .iter()
            .flat_map(neighbors)
            .filter(|w| !region.contains(w))
            .collect::<FxHashSet<_>>()
            .into_iter()
            .collect();
        out.sort();
        out
    }
}

/// True iff every barrier site satisfies `predicate` and the barrier cuts
/// the region off from infinity.
pub fn verify_surround(cert: &SurroundCertificate, predicate: impl Fn(&Site) -> bool) -> Result<bool> {
    cert.validate()?;
    if !cert.barrier.iter().all(&predicate) {
        return Ok(false);
    }
    let barrier: FxHashSet<&Site> = cert.barrier.iter().collect();
    Ok(cert
        .exterior_boundary()
        .iter()
        .all(|s| barrier.contains(s)))
}
