//! Exploration of the open cluster of the origin.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldView;
use crate::lattice::{
    neighbors, project_coords, verify_surround, Coords, IndexSet, LatticeBox, Site,
    SurroundCertificate,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Sites in the order they were discovered.
    pub sites: Vec<Site>,
    pub touched_boundary: bool,
    /// False iff exploration stopped at the site cap.
    pub frontier_exhausted: bool,
}

fn on_box_boundary(window: &LatticeBox, c: &[i64]) -> bool {
    c.iter()
        .zip(window.lo().coords().iter().zip(window.hi().coords()))
        .any(|(x, (a, b))| x == a || x == b)
}

/// Breadth-first exploration of the open sites connected to the origin
/// inside `window`, stopping after `cap` sites.
pub fn explore_cluster_in(view: &FieldView<'_>, window: &LatticeBox, cap: usize) -> ClusterResult {
    let origin = Site(smallvec::smallvec![0; view.n()]);
    let mut result = ClusterResult {
        sites: Vec::new(),
        touched_boundary: false,
        frontier_exhausted: true,
    };
    if !window.contains(&origin) || !view.is_open(origin.coords()) {
        return result;
    }
    let mut seen: FxHashSet<Site> = FxHashSet::default();
    let mut queue = VecDeque::new();
    seen.insert(origin.clone());
    queue.push_back(origin);
    while let Some(v) = queue.pop_front() {
        if result.sites.len() >= cap {
            result.frontier_exhausted = false;
            break;
        }
        if on_box_boundary(window, v.coords()) {
            result.touched_boundary = true;
        }
        for w in neighbors(&v) {
            if window.contains(&w) && !seen.contains(&w) && view.is_open(w.coords()) {
                seen.insert(w.clone());
                queue.push_back(w);
            }
        }
        result.sites.push(v);
    }
    result
}

/// Cluster of the origin inside `B(K)`.
pub fn explore_origin_cluster(view: &FieldView<'_>, k: u64, cap: usize) -> ClusterResult {
    explore_cluster_in(view, &LatticeBox::centered(view.n(), k), cap)
}

/// `[o ↔ ∂B(K)]`.
pub fn connects_to_boundary(view: &FieldView<'_>, k: u64) -> bool {
    max_reach(view, k) >= k
}

/// Reaches `∂B(K)` without reaching `∂B(M)`: the finite-window stand-in for
/// `[o ↔ ∂B(K), o ↮ ∞]`.
pub fn truncated_connect(view: &FieldView<'_>, k: u64, m: u64) -> Result<bool> {
    if m <= k {
        return Err(Error::invalid(format!("truncation radius {m} must exceed {k}")));
    }
    let d = max_reach(view, m);
    Ok(k <= d && d < m)
}

/// Largest l∞ norm in the open cluster of the origin restricted to
/// `B(limit)`, saturating at `limit`; `0` for a closed origin.
///
/// For every `K ≤ limit`, `[o ↔ ∂B(K)]` holds iff the result is at least
/// `K`, and the cluster inside `B(M)` stays off `∂B(M)` iff the result is
/// below `M`. One call therefore answers every radius up to `limit`.
pub fn max_reach(view: &FieldView<'_>, limit: u64) -> u64 {
    max_reach_opt(view, limit).unwrap_or(0)
}

/// As [`max_reach`], returning `None` when the origin is closed.
///
/// The search always expands the site of largest norm first (ties broken
/// by discovery order), so an infinite cluster usually reaches `∂B(limit)`
/// after visiting a thin tendril; a finite one is explored completely.
pub fn max_reach_opt(view: &FieldView<'_>, limit: u64) -> Option<u64> {
    let n = view.n();
    let origin: Coords = smallvec::smallvec![0; n];
    if !view.is_open(&origin) {
        return None;
    }
    if limit == 0 {
        return Some(0);
    }
    let lim = limit as i64;
    let mut seen: FxHashSet<Coords> = FxHashSet::default();
    let mut heap: BinaryHeap<(u64, Reverse<u64>, Coords)> = BinaryHeap::new();
    seen.insert(origin.clone());
    heap.push((0, Reverse(0), origin));
    let mut seq = 0u64;
    let mut best = 0u64;
    while let Some((norm, _, v)) = heap.pop() {
        best = best.max(norm);
        if best >= limit {
            return Some(limit);
        }
        for axis in 0..n {
            for delta in [1i64, -1] {
                let mut w = v.clone();
                w[axis] += delta;
                if w[axis].abs() > lim || seen.contains(&w) {
                    continue;
                }
                seen.insert(w.clone());
                if view.is_open(&w) {
                    seq += 1;
                    let wn = w.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0);
                    heap.push((wn, Reverse(seq), w));
                }
            }
        }
    }
    Some(best)
}

/// A certificate that the origin cluster of the full field is finite: a
/// finite cluster of the origin in one plane `I` together with a barrier in
/// the complementary coordinates that is closed over every fibre of that
/// cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitenessCertificate {
    pub plane: IndexSet,
    pub complement: IndexSet,
    /// `ω_I`-cluster of the origin in `Z^k_I` (empty if the origin is closed).
    pub plane_cluster: Vec<Site>,
    /// Surrounding set in `Z^{n-k}` over the complementary coordinates.
    pub surround: SurroundCertificate,
}

impl FinitenessCertificate {
    /// True iff `v` lies in `plane_cluster × region`, the set that must
    /// contain the origin cluster of the full field.
    pub fn confines(&self, v: &Site) -> bool {
        let x = Site(project_coords(v.coords(), &self.plane));
        let z = Site(project_coords(v.coords(), &self.complement));
        self.plane_cluster.contains(&x) && self.surround.region.contains(&z)
    }

    /// Independent recheck of every claim against the field.
    pub fn verify(&self, view: &FieldView<'_>) -> Result<bool> {
        let field = view.field();
        let open_in_plane = |x: &Site| field.hyperplane_bit(&self.plane, x.coords());
        let cluster: FxHashSet<&Site> = self.plane_cluster.iter().collect();
        let origin = Site(smallvec::smallvec![0; self.plane.k()]);
        if self.plane_cluster.is_empty() && open_in_plane(&origin)? {
            return Ok(false);
        }
        for x in &self.plane_cluster {
            if !open_in_plane(x)? {
                return Ok(false);
            }
            for y in neighbors(x) {
                if !cluster.contains(&y) && open_in_plane(&y)? {
                    return Ok(false);
                }
            }
        }
        let n = view.n();
        let closed_everywhere = |z: &Site| {
            self.plane_cluster.iter().all(|x| {
                let v = assemble(n, &self.plane, x.coords(), &self.complement, z.coords());
                !view.is_open(&v)
            })
        };
        verify_surround(&self.surround, closed_everywhere)
    }
}

fn assemble(n: usize, i: &IndexSet, x: &[i64], j: &IndexSet, z: &[i64]) -> Coords {
    let mut v: Coords = smallvec::smallvec![0; n];
    for (m, c) in i.members().iter().zip(x) {
        v[m - 1] = *c;
    }
    for (m, c) in j.members().iter().zip(z) {
        v[m - 1] = *c;
    }
    v
}

/// Searches `window` for a [`FinitenessCertificate`] over the plane `I`.
///
/// The plane cluster must stay off the boundary of the projected window.
/// Barriers are tried as l∞ spheres of growing radius first; failing that,
/// the smallest barrier is taken: the flood fill from the origin through
/// complementary sites that are not closed over the whole plane cluster.
pub fn finiteness_certificate_check(
    view: &FieldView<'_>,
    i: &IndexSet,
    window: &LatticeBox,
) -> Result<Option<FinitenessCertificate>> {
    let n = view.n();
    if window.dim() != n {
        return Err(Error::invalid("window dimension does not match the field"));
    }
    let complement = i
        .complement(n)
        .ok_or_else(|| Error::invalid("the plane must leave at least one free coordinate"))?;
    let field = view.field();
    let plane_window = window.project(i);
    let free_window = window.project(&complement);
    let k = i.k();
    let origin_k = Site(smallvec::smallvec![0; k]);
    if !plane_window.contains(&origin_k) {
        return Ok(None);
    }

    let mut plane_cluster = Vec::new();
    if field.hyperplane_bit(i, origin_k.coords())? {
        let mut seen: FxHashSet<Site> = FxHashSet::default();
        let mut queue = VecDeque::from([origin_k.clone()]);
        seen.insert(origin_k);
        while let Some(x) = queue.pop_front() {
            if on_box_boundary(&plane_window, x.coords()) {
                return Ok(None);
            }
            for y in neighbors(&x) {
                if !seen.contains(&y) && field.hyperplane_bit(i, y.coords())? {
                    seen.insert(y.clone());
                    queue.push_back(y);
                }
            }
            plane_cluster.push(x);
        }
        plane_cluster.sort();
    }

    let closed_everywhere = |z: &[i64]| {
        plane_cluster
            .iter()
            .all(|x| !view.is_open(&assemble(n, i, x.coords(), &complement, z)))
    };
    let m = n - k;
    let origin_m = Site(smallvec::smallvec![0; m]);
    let max_radius = (1..=m)
        .map(|a| {
            let lo = -free_window.lo().coords()[a - 1];
            let hi = free_window.hi().coords()[a - 1];
            lo.min(hi)
        })
        .min()
        .unwrap_or(0);
    let build = |plane_cluster: Vec<Site>, surround: SurroundCertificate| FinitenessCertificate {
        plane: i.clone(),
        complement: complement.clone(),
        plane_cluster,
        surround,
    };

    for r in 1..=max_radius.max(0) as u64 {
        let sphere: Vec<Site> = LatticeBox::centered(m, r)
            .sites()
            .filter(|z| z.linf_norm() == r)
            .collect();
        if sphere.iter().all(|z| closed_everywhere(z.coords())) {
            let region = LatticeBox::centered(m, r - 1).sites().collect();
            return Ok(Some(build(
                plane_cluster,
                SurroundCertificate {
                    region,
                    barrier: sphere,
                },
            )));
        }
    }

    let mut seen: FxHashSet<Site> = FxHashSet::default();
    let mut region = Vec::new();
    let mut queue = VecDeque::from([origin_m.clone()]);
    seen.insert(origin_m);
    while let Some(z) = queue.pop_front() {
        if on_box_boundary(&free_window, z.coords()) {
            return Ok(None);
        }
        for y in neighbors(&z) {
            if !seen.contains(&y) && !closed_everywhere(y.coords()) {
                seen.insert(y.clone());
                queue.push_back(y);
            }
        }
        region.push(z);
    }
    region.sort();
    let mut surround = SurroundCertificate {
        region,
        barrier: Vec::new(),
    };
    surround.barrier = surround.exterior_boundary();
    Ok(Some(build(plane_cluster, surround)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{HyperplaneField, ParamVector};
    use std::collections::HashSet;

    fn params3(p: [f64; 3]) -> ParamVector {
        ParamVector::from_ranked(3, 2, p.to_vec()).unwrap()
    }

    /// Dense flood fill over a pre-materialized window.
    fn dense_cluster(view: &FieldView<'_>, window: &LatticeBox) -> HashSet<Site> {
        let open: HashSet<Site> = window.sites().filter(|s| view.omega(s).unwrap()).collect();
        let origin = Site(smallvec::smallvec![0; view.n()]);
        let mut out = HashSet::new();
        if !open.contains(&origin) {
            return out;
        }
        let mut stack = vec![origin.clone()];
        out.insert(origin);
        while let Some(v) = stack.pop() {
            for w in neighbors(&v) {
                if open.contains(&w) && out.insert(w.clone()) {
                    stack.push(w);
                }
            }
        }
        out
    }

    fn dense_reach(view: &FieldView<'_>, k: u64) -> bool {
        dense_cluster(view, &LatticeBox::centered(view.n(), k))
            .iter()
            .any(|s| s.linf_norm() == k)
    }

    #[test]
    fn closed_origin_gives_empty_cluster() {
        let f = HyperplaneField::new(1, params3([0.0, 1.0, 1.0]));
        let v = FieldView::full(&f);
        let c = explore_origin_cluster(&v, 5, 1000);
        assert!(c.sites.is_empty() && !c.touched_boundary && c.frontier_exhausted);
        assert!(!connects_to_boundary(&v, 1));
        assert!(!truncated_connect(&v, 2, 8).unwrap());
        assert_eq!(max_reach_opt(&v, 3), None);
    }

    #[test]
    fn all_open_lattice() {
        let f = HyperplaneField::new(1, params3([1.0; 3]));
        let v = FieldView::full(&f);
        for k in 1..6 {
            assert!(explore_origin_cluster(&v, k, usize::MAX).touched_boundary);
            assert!(connects_to_boundary(&v, k));
            assert!(!truncated_connect(&v, k, 4 * k).unwrap());
        }
        assert_eq!(explore_origin_cluster(&v, 2, usize::MAX).sites.len(), 125);
    }

    #[test]
    fn cap_flags_partial_result() {
        let f = HyperplaneField::new(1, params3([1.0; 3]));
        let v = FieldView::full(&f);
        let c = explore_origin_cluster(&v, 10, 50);
        assert_eq!(c.sites.len(), 50);
        assert!(!c.frontier_exhausted);
    }

    #[test]
    fn bfs_matches_dense_flood_fill() {
        for seed in 0..20 {
            let f = HyperplaneField::new(seed, params3([0.85, 0.85, 0.85]));
            let v = FieldView::full(&f);
            let got: HashSet<Site> = explore_origin_cluster(&v, 5, usize::MAX)
                .sites
                .into_iter()
                .collect();
            assert_eq!(got, dense_cluster(&v, &LatticeBox::centered(3, 5)));
        }
    }

    #[test]
    fn boundary_connection_matches_oracle() {
        let mut hits = 0;
        for seed in 0..100 {
            let f = HyperplaneField::new(seed, params3([0.8, 0.8, 0.8]));
            let v = FieldView::full(&f);
            let got = connects_to_boundary(&v, 4);
            assert_eq!(got, dense_reach(&v, 4), "seed {seed}");
            assert_eq!(got, explore_origin_cluster(&v, 4, usize::MAX).touched_boundary);
            hits += got as u32;
        }
        assert!(hits > 0 && hits < 100);
    }

    #[test]
    fn truncated_matches_dense_window() {
        let pv = ParamVector::from_ranked(3, 2, vec![0.95, 0.95, 0.8]).unwrap();
        let mut outcomes = [0u32; 2];
        for seed in 0..30 {
            let f = HyperplaneField::new(seed, pv.clone());
            let v = FieldView::full(&f);
            let dense = dense_cluster(&v, &LatticeBox::centered(3, 32));
            let d = dense.iter().map(|s| s.linf_norm()).max();
            let expected = matches!(d, Some(d) if (8..32).contains(&d));
            let got = truncated_connect(&v, 8, 32).unwrap();
            assert_eq!(got, expected, "seed {seed}");
            outcomes[got as usize] += 1;
        }
        assert!(outcomes[0] > 0);
    }

    #[test]
    fn reach_is_monotone_in_radius_and_parameters() {
        for seed in 0..40 {
            let lo = HyperplaneField::new(seed, params3([0.75, 0.8, 0.7]));
            let hi = HyperplaneField::new(seed, params3([0.8, 0.85, 0.7]));
            let (vl, vh) = (FieldView::full(&lo), FieldView::full(&hi));
            let mut prev = true;
            for k in 1..8 {
                let c = connects_to_boundary(&vl, k);
                assert!(prev || !c);
                assert!(!c || connects_to_boundary(&vh, k));
                prev = c;
            }
        }
    }

    #[test]
    fn trivial_certificate_when_off_plane_closed() {
        let i12 = IndexSet::new(&[1, 2], 3).unwrap();
        let pv = ParamVector::from_entries(3, 2, 0.0, &[(i12.clone(), 0.2)]).unwrap();
        let found = (0..50).find_map(|seed| {
            let f = HyperplaneField::new(seed, pv.clone());
            let v = FieldView::full(&f);
            let c = finiteness_certificate_check(&v, &i12, &LatticeBox::centered(3, 10)).unwrap()?;
            assert!(c.verify(&v).unwrap());
            (!c.plane_cluster.is_empty()).then_some(c)
        });
        let c = found.expect("some seed has an open origin in the plane");
        assert_eq!(c.surround.barrier.len(), 2);
        assert_eq!(c.surround.region, vec![Site::from_slice(&[0])]);
    }

    #[test]
    fn no_certificate_when_everything_open() {
        let f = HyperplaneField::new(0, params3([1.0; 3]));
        let v = FieldView::full(&f);
        for i in IndexSet::all(2, 3) {
            assert!(finiteness_certificate_check(&v, &i, &LatticeBox::centered(3, 8))
                .unwrap()
                .is_none());
        }
    }

    #[test]
    fn certificates_in_the_subcritical_plane_regime() {
        let i12 = IndexSet::new(&[1, 2], 4).unwrap();
        let i13 = IndexSet::new(&[1, 3], 4).unwrap();
        let i14 = IndexSet::new(&[1, 4], 4).unwrap();
        let pv = ParamVector::from_entries(4, 2, 1.0, &[(i12.clone(), 0.3), (i13, 0.7), (i14, 0.7)])
            .unwrap();
        let window = LatticeBox::centered(4, 40);
        let mut found = 0;
        for seed in 0..100 {
            let f = HyperplaneField::new(seed, pv.clone());
            let v = FieldView::full(&f);
            if let Some(c) = finiteness_certificate_check(&v, &i12, &window).unwrap() {
                assert!(c.verify(&v).unwrap());
                let cluster = explore_cluster_in(&v, &window, usize::MAX);
                assert!(!cluster.touched_boundary);
                assert!(cluster.sites.iter().all(|s| c.confines(s)));
                found += 1;
            }
        }
        // Measured 875 of 1000 seeds (0..1000) at this window. Misses come from
        // plane clusters spanning three or more first coordinates, where a
        // barrier line has to be closed over every one of them.
        assert!(found >= 80, "found {found}");
    }
}
