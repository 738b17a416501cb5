//! Synchronizing height walks and lifting planar crossings into `Z^n`.
//!
//! A bottom-to-top crossing of a box `B ⊂ Z^n` by sites that are open in
//! every plane `I_j = {1, j}` exists iff each projection `π_{I_j}(B)` has an
//! open bottom-to-top crossing. The forward direction is constructive: the
//! height profiles of the planar crossings are synchronized on a product
//! graph, and the synchronized schedule is turned into a lattice path.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::crossing::{crossing_path, Axis, Rectangle2D};
use crate::error::{Error, Result};
use crate::field::{FieldView, HyperplaneField, ParamVector};
use crate::lattice::{IndexSet, LatticeBox, Site};
use crate::rng::derive_seed;

/// `S(0..=T)` with unit steps, `S(0) = 0`, `S(T) = N` and `0 ≤ S(t) ≤ N`.
///
/// Walks that touch `N` before their end are accepted; [`HeightWalk::is_strict`]
/// tells whether `S(t) < N` for every `t < T`. Synchronization and the
/// degree pattern hold in both cases. With `N = 0` the only strict walk is
/// `(0)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeightWalk {
    values: Vec<i64>,
}

impl HeightWalk {
    pub fn new(values: Vec<i64>) -> Result<Self> {
        let (Some(&first), Some(&target)) = (values.first(), values.last()) else {
            return Err(Error::invalid("a height walk needs at least one value"));
        };
        if first != 0 {
            return Err(Error::invalid(format!("walk starts at {first}, not 0")));
        }
        if let Some(w) = values.windows(2).find(|w| (w[1] - w[0]).abs() != 1) {
            return Err(Error::invalid(format!(
                "walk step {} -> {} is not a unit step",
                w[0], w[1]
            )));
        }
        if let Some(v) = values.iter().find(|&&v| v < 0 || v > target) {
            return Err(Error::invalid(format!(
                "walk visits {v}; values must stay in [0, {target}]"
            )));
        }
        Ok(HeightWalk { values })
    }

    pub fn is_strict(&self) -> bool {
        let target = self.target();
        self.values[..self.values.len() - 1].iter().all(|&v| v < target)
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// `T`, the index of the last value.
    pub fn duration(&self) -> usize {
        self.values.len() - 1
    }

    /// `N`, the final height.
    pub fn target(&self) -> i64 {
        *self.values.last().expect("walks are non-empty")
    }

    pub fn at(&self, t: usize) -> i64 {
        self.values[t]
    }
}

/// Common time axis `0..=T` and reparametrizations `f_i` of each walk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncSchedule {
    pub duration: usize,
    pub reparams: Vec<Vec<usize>>,
}

impl SyncSchedule {
    /// Checks unit steps in every `f_i`, equal heights across walks at every
    /// time, height `0` at the start and `N` at the end.
    pub fn check(&self, walks: &[HeightWalk]) -> Result<()> {
        let fail = |m: String| Err(Error::ConstructionFailure(m));
        if self.reparams.len() != walks.len() {
            return fail(format!(
                "{} reparametrizations for {} walks",
                self.reparams.len(),
                walks.len()
            ));
        }
        for (i, (f, s)) in self.reparams.iter().zip(walks).enumerate() {
            if f.len() != self.duration + 1 {
                return fail(format!("f_{} has {} values, expected {}", i + 1, f.len(), self.duration + 1));
            }
            if let Some(&t) = f.iter().find(|&&t| t > s.duration()) {
                return fail(format!("f_{} takes value {t} beyond the walk", i + 1));
            }
            if f.windows(2).any(|w| w[0].abs_diff(w[1]) != 1) {
                return fail(format!("f_{} has a non-unit step", i + 1));
            }
        }
        let Some((f1, s1)) = self.reparams.first().zip(walks.first()) else {
            return Ok(());
        };
        for t in 0..=self.duration {
            let h = s1.at(f1[t]);
            if let Some(j) = (1..walks.len()).find(|&j| walks[j].at(self.reparams[j][t]) != h) {
                return fail(format!("walks 1 and {} disagree at time {t}", j + 1));
            }
        }
        if s1.at(f1[0]) != 0 || s1.at(f1[self.duration]) != s1.target() {
            return fail("schedule does not run from height 0 to the target".into());
        }
        Ok(())
    }
}

pub type TimeTuple = SmallVec<[u32; 8]>;

const DENSE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone)]
enum VertexIndex {
    Dense { strides: Vec<u64>, slots: Vec<u32> },
    Hashed(FxHashMap<TimeTuple, u32>),
}

/// Graph on tuples `(t_1, …, t_n)` of walk times at a common height; two
/// tuples are adjacent when every entry differs by exactly one.
#[derive(Debug, Clone)]
pub struct SyncGraph {
    walks: Vec<HeightWalk>,
    vertices: Vec<TimeTuple>,
    index: VertexIndex,
}

pub fn build_sync_graph(walks: &[HeightWalk]) -> Result<SyncGraph> {
    let Some(first) = walks.first() else {
        return Err(Error::invalid("need at least one walk"));
    };
    if let Some(w) = walks.iter().find(|w| w.target() != first.target()) {
        return Err(Error::invalid(format!(
            "walks end at different heights ({} and {})",
            first.target(),
            w.target()
        )));
    }
    let top = first.target() as usize;
    let by_height: Vec<Vec<Vec<u32>>> = walks
        .iter()
        .map(|w| {
            let mut h = vec![Vec::new(); top + 1];
            for (t, &v) in w.values().iter().enumerate() {
                h[v as usize].push(t as u32);
            }
            h
        })
        .collect();

    let mut vertices = Vec::new();
    for level in 0..=top {
        let lists: Vec<&Vec<u32>> = by_height.iter().map(|h| &h[level]).collect();
        if lists.iter().any(|l| l.is_empty()) {
            continue;
        }
        let mut pos = vec![0usize; lists.len()];
        'tuples: loop {
            vertices.push(pos.iter().zip(&lists).map(|(&p, l)| l[p]).collect::<TimeTuple>());
            let mut a = lists.len();
            loop {
                if a == 0 {
                    break 'tuples;
                }
                a -= 1;
                pos[a] += 1;
                if pos[a] < lists[a].len() {
                    break;
                }
                pos[a] = 0;
            }
        }
    }
    vertices.sort();

    let cells = walks
        .iter()
        .try_fold(1u64, |acc, w| acc.checked_mul(w.duration() as u64 + 1));
    let index = match cells {
        Some(c) if c <= DENSE_LIMIT => {
            let mut strides = vec![1u64; walks.len()];
            for a in (0..walks.len().saturating_sub(1)).rev() {
                strides[a] = strides[a + 1] * (walks[a + 1].duration() as u64 + 1);
            }
            let mut slots = vec![u32::MAX; c as usize];
            for (id, v) in vertices.iter().enumerate() {
                let off: u64 = v.iter().zip(&strides).map(|(&t, s)| t as u64 * s).sum();
                slots[off as usize] = id as u32;
            }
            VertexIndex::Dense { strides, slots }
        }
        _ => VertexIndex::Hashed(
            vertices
                .iter()
                .enumerate()
                .map(|(id, v)| (v.clone(), id as u32))
                .collect(),
        ),
    };
    Ok(SyncGraph {
        walks: walks.to_vec(),
        vertices,
        index,
    })
}

impl SyncGraph {
    pub fn walks(&self) -> &[HeightWalk] {
        &self.walks
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Vertices in lexicographic order; ids index this slice.
    pub fn vertices(&self) -> &[TimeTuple] {
        &self.vertices
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.index, VertexIndex::Dense { .. })
    }

    pub fn id_of(&self, v: &[u32]) -> Option<usize> {
        if v.len() != self.walks.len()
            || v.iter().zip(&self.walks).any(|(&t, w)| t as usize > w.duration())
        {
            return None;
        }
        match &self.index {
            VertexIndex::Dense { strides, slots } => {
                let off: u64 = v.iter().zip(strides).map(|(&t, s)| t as u64 * s).sum();
                let id = slots[off as usize];
                (id != u32::MAX).then_some(id as usize)
            }
            VertexIndex::Hashed(map) => map.get(v).map(|&id| id as usize),
        }
    }

    pub fn origin(&self) -> Option<usize> {
        self.id_of(&vec![0; self.walks.len()])
    }

    pub fn terminal(&self) -> Option<usize> {
        let v: Vec<u32> = self.walks.iter().map(|w| w.duration() as u32).collect();
        self.id_of(&v)
    }

    /// Neighbours of vertex `id`, in lexicographic order of their tuples.
    pub fn neighbors(&self, id: usize) -> Vec<usize> {
        let v = &self.vertices[id];
        let m = v.len();
        let mut out = Vec::new();
        let mut w: TimeTuple = v.clone();
        // sign bit set means +1; iterate so the most significant entry varies slowest
        for mask in 0u32..(1 << m) {
            let mut ok = true;
            for a in 0..m {
                let plus = mask >> (m - 1 - a) & 1 == 1;
                if plus {
                    w[a] = v[a] + 1;
                } else if v[a] == 0 {
                    ok = false;
                    break;
                } else {
                    w[a] = v[a] - 1;
                }
            }
            if ok {
                if let Some(j) = self.id_of(&w) {
                    out.push(j);
                }
            }
        }
        out
    }

    pub fn degree(&self, id: usize) -> usize {
        self.neighbors(id).len()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.vertex_count()).map(|v| self.degree(v)).sum::<usize>() / 2
    }
}

/// A vertex whose degree breaks the parity pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeViolation {
    pub vertex: Vec<u32>,
    pub degree: usize,
    pub expected: &'static str,
}

/// Vertices breaking the pattern "both endpoints have degree one, every
/// other vertex has even degree". When the two endpoints coincide (all
/// walks have duration zero) that single vertex must be isolated.
pub fn degree_violations(g: &SyncGraph) -> Vec<DegreeViolation> {
    let origin = g.origin();
    let terminal = g.terminal();
    let mut out = Vec::new();
    let (Some(o), Some(t)) = (origin, terminal) else {
        out.push(DegreeViolation {
            vertex: Vec::new(),
            degree: 0,
            expected: "endpoints present",
        });
        return out;
    };
    for id in 0..g.vertex_count() {
        let d = g.degree(id);
        let (ok, expected) = if o == t && id == o {
            (d == 0, "0")
        } else if id == o || id == t {
            (d == 1, "1")
        } else {
            (d % 2 == 0, "even")
        };
        if !ok {
            out.push(DegreeViolation {
                vertex: g.vertices()[id].to_vec(),
                degree: d,
                expected,
            });
        }
    }
    out
}

pub fn degree_parity_audit(g: &SyncGraph) -> bool {
    degree_violations(g).is_empty()
}

/// Shortest schedule: breadth-first search from `(0, …, 0)` to
/// `(T_1, …, T_n)` with neighbours visited in lexicographic order.
pub fn sync_walks(walks: &[HeightWalk]) -> Result<SyncSchedule> {
    let g = build_sync_graph(walks)?;
    sync_on_graph(&g)
}

pub fn sync_on_graph(g: &SyncGraph) -> Result<SyncSchedule> {
    let (Some(o), Some(t)) = (g.origin(), g.terminal()) else {
        return Err(Error::ConstructionFailure(
            "endpoint tuple missing from the synchronization graph".into(),
        ));
    };
    let mut parent = vec![usize::MAX; g.vertex_count()];
    parent[o] = o;
    let mut queue = VecDeque::from([o]);
    while let Some(v) = queue.pop_front() {
        if v == t {
            break;
        }
        for w in g.neighbors(v) {
            if parent[w] == usize::MAX {
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    if parent[t] == usize::MAX {
        return Err(Error::ConstructionFailure(format!(
            "no path between {:?} and {:?} in the synchronization graph",
            g.vertices()[o].as_slice(),
            g.vertices()[t].as_slice()
        )));
    }
    let mut chain = vec![t];
    while *chain.last().unwrap() != o {
        chain.push(parent[*chain.last().unwrap()]);
    }
    chain.reverse();
    let m = g.walks().len();
    let reparams = (0..m)
        .map(|a| chain.iter().map(|&v| g.vertices()[v][a] as usize).collect())
        .collect();
    Ok(SyncSchedule {
        duration: chain.len() - 1,
        reparams,
    })
}

/// Open planar path in the plane `I_j = {1, j}`; entries are
/// `(height, coordinate j)`. Heights start at `base`, end at `base + N` and
/// stay in `[base, base + N)` before the last site. With `N = 0` all sites
/// sit at `base`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectedCrossing {
    pub host: IndexSet,
    pub path: Vec<(i64, i64)>,
}

impl ProjectedCrossing {
    pub fn base(&self) -> i64 {
        self.path.first().map(|p| p.0).unwrap_or(0)
    }

    /// `N`, the height gained.
    pub fn rise(&self) -> i64 {
        self.path.last().map(|p| p.0).unwrap_or(0) - self.base()
    }

    pub fn validate(&self) -> Result<()> {
        if self.host.k() != 2 || self.host.members()[0] != 1 {
            return Err(Error::invalid(format!("host {} is not of the form {{1, j}}", self.host)));
        }
        if self.path.is_empty() {
            return Err(Error::invalid("empty crossing"));
        }
        if self
            .path
            .windows(2)
            .any(|w| (w[0].0 - w[1].0).abs() + (w[0].1 - w[1].1).abs() != 1)
        {
            return Err(Error::invalid("crossing has a non-unit step"));
        }
        let (base, rise) = (self.base(), self.rise());
        if rise < 0 {
            return Err(Error::invalid("crossing ends below its start"));
        }
        let body = &self.path[..self.path.len() - 1];
        let ok = if rise == 0 {
            body.iter().all(|p| p.0 == base)
        } else {
            body.iter().all(|p| base <= p.0 && p.0 < base + rise)
        };
        if !ok {
            return Err(Error::invalid(
                "crossing leaves the height band before reaching the top",
            ));
        }
        Ok(())
    }
}

/// Height profile of a crossing sampled at its height-changing steps,
/// together with the step indices `τ(0) = 0 < τ(1) < …`.
pub fn extract_height_walk(c: &ProjectedCrossing) -> Result<(HeightWalk, Vec<usize>)> {
    c.validate()?;
    let base = c.base();
    let mut tau = vec![0usize];
    for s in 1..c.path.len() {
        if c.path[s].0 != c.path[s - 1].0 {
            tau.push(s);
        }
    }
    let values = tau.iter().map(|&s| c.path[s].0 - base).collect();
    Ok((HeightWalk::new(values)?, tau))
}

fn walk_axis(path: &mut Vec<Site>, axis: usize, target: i64) {
    let mut cur = path.last().expect("path is seeded").clone();
    while cur[axis - 1] != target {
        let d = (target - cur[axis - 1]).signum();
        cur = cur.shifted(axis, d);
        path.push(cur.clone());
    }
}

/// Lifts one crossing per plane `I_j`, `j = 2..=n`, into a nearest-neighbour
/// path in `B` whose every site projects into each of the crossings.
///
/// Between consecutive schedule times the path first moves, at the old
/// height, the coordinates of walks whose reparametrization advances, then
/// takes the height step, then moves the coordinates of walks that back
/// up. Each such move retraces a horizontal run of the corresponding
/// crossing, which lies at the old height when the walk advances and at the
/// new height when it backs up.
pub fn lift_crossings(crossings: &[ProjectedCrossing], bx: &LatticeBox) -> Result<Vec<Site>> {
    let n = bx.dim();
    if n < 2 || crossings.len() != n - 1 {
        return Err(Error::invalid(format!(
            "expected {} crossings for a box in Z^{n}",
            n.saturating_sub(1)
        )));
    }
    for (a, c) in crossings.iter().enumerate() {
        let j = a + 2;
        if c.host.members() != [1, j] {
            return Err(Error::invalid(format!("crossing {a} lives on {}, expected [1,{j}]", c.host)));
        }
        let proj = bx.project(&c.host);
        if c.path.iter().any(|&(h, w)| !proj.contains_coords(&[h, w])) {
            return Err(Error::invalid(format!("crossing on {} leaves the projected box", c.host)));
        }
    }
    let base = crossings[0].base();
    let rise = crossings[0].rise();
    if crossings.iter().any(|c| c.base() != base || c.rise() != rise) {
        return Err(Error::invalid("crossings do not share start height and rise"));
    }

    let mut walks = Vec::with_capacity(n - 1);
    let mut taus = Vec::with_capacity(n - 1);
    for c in crossings {
        let (w, tau) = extract_height_walk(c)?;
        walks.push(w);
        taus.push(tau);
    }
    let sched = sync_walks(&walks)?;
    sched.check(&walks)?;

    let coord_at = |a: usize, t: usize| crossings[a].path[taus[a][sched.reparams[a][t]]].1;
    let mut start = Site(smallvec::smallvec![0; n]);
    start.0[0] = base;
    for a in 0..n - 1 {
        start.0[a + 1] = coord_at(a, 0);
    }
    let mut path = vec![start];
    for t in 1..=sched.duration {
        let h_new = base + walks[0].at(sched.reparams[0][t]);
        let advancing = |a: usize| sched.reparams[a][t] > sched.reparams[a][t - 1];
        for a in (0..n - 1).filter(|&a| advancing(a)) {
            walk_axis(&mut path, a + 2, coord_at(a, t));
        }
        walk_axis(&mut path, 1, h_new);
        for a in (0..n - 1).filter(|&a| !advancing(a)) {
            walk_axis(&mut path, a + 2, coord_at(a, t));
        }
    }
    // Only non-empty when the rise is zero: trailing runs at the top height.
    for (a, c) in crossings.iter().enumerate() {
        walk_axis(&mut path, a + 2, c.path.last().unwrap().1);
    }
    Ok(path)
}

/// Independent check of a lifted path: unit steps, containment in `B`,
/// every site projecting onto a site of each crossing, and correct
/// endpoints.
pub fn audit_lifted_path(
    path: &[Site],
    crossings: &[ProjectedCrossing],
    bx: &LatticeBox,
) -> Result<()> {
    let fail = |m: String| Err(Error::ConstructionFailure(m));
    if path.is_empty() {
        return fail("empty lifted path".into());
    }
    if let Some(w) = path.windows(2).find(|w| w[0].l1_distance(&w[1]) != 1) {
        return fail(format!("non-unit step {:?} -> {:?}", w[0], w[1]));
    }
    if let Some(s) = path.iter().find(|s| !bx.contains(s)) {
        return fail(format!("site {s:?} outside the box"));
    }
    for (a, c) in crossings.iter().enumerate() {
        let j = a + 2;
        let sites: rustc_hash::FxHashSet<(i64, i64)> = c.path.iter().copied().collect();
        if let Some(s) = path.iter().find(|s| !sites.contains(&(s[0], s[j - 1]))) {
            return fail(format!("site {s:?} projects off the crossing on {}", c.host));
        }
        let (first, last) = (&path[0], path.last().unwrap());
        if (first[0], first[j - 1]) != c.path[0] || (last[0], last[j - 1]) != *c.path.last().unwrap() {
            return fail(format!("endpoints do not project onto those of the crossing on {}", c.host));
        }
    }
    Ok(())
}

/// Open path in `B` from the face `x_1 = lo_1` to the face `x_1 = hi_1`.
pub fn box_crosses_bottom_to_top(bx: &LatticeBox, open: impl Fn(&Site) -> bool) -> bool {
    let lo = bx.lo()[0];
    let hi = bx.hi()[0];
    let mut seen = rustc_hash::FxHashSet::default();
    let mut queue: VecDeque<Site> = bx.sites().filter(|s| s[0] == lo && open(s)).collect();
    seen.extend(queue.iter().cloned());
    while let Some(v) = queue.pop_front() {
        if v[0] == hi {
            return true;
        }
        for w in crate::lattice::neighbors(&v) {
            if bx.contains(&w) && !seen.contains(&w) && open(&w) {
                seen.insert(w.clone());
                queue.push_back(w);
            }
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtCounterexample {
    pub bx: LatticeBox,
    /// Open bits of each projected rectangle, height-major.
    pub planes: Vec<Vec<bool>>,
    pub box_crossing: bool,
    pub all_planes_cross: bool,
    pub lift_error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BtFactorizationReport {
    pub boxes: u64,
    pub configurations: u64,
    pub both_true: u64,
    pub both_false: u64,
    /// Per-plane frequency of a projected crossing (sampled mode only).
    pub plane_crossings: Vec<u64>,
    pub counterexamples: Vec<BtCounterexample>,
}

impl BtFactorizationReport {
    pub fn holds(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Compares `ξ ∈ BT(B)` with `∩_j BT(π_{I_j}(B))` for one configuration
/// and, when every plane crosses, lifts the planar crossings and audits
/// the result.
fn compare_one(
    bx: &LatticeBox,
    plane_open: &dyn Fn(usize, i64, i64) -> bool,
) -> (bool, bool, Option<String>) {
    let n = bx.dim();
    let xi_open = |s: &Site| (2..=n).all(|j| plane_open(j, s[0], s[j - 1]));
    let direct = box_crosses_bottom_to_top(bx, xi_open);
    let mut crossings = Vec::new();
    for j in 2..=n {
        let r = Rectangle2D::new(bx.lo()[0], bx.hi()[0], bx.lo()[j - 1], bx.hi()[j - 1])
            .expect("box sides are nonempty");
        match crossing_path(&r, Axis::First, |h, w| plane_open(j, h, w)) {
            Some(p) => crossings.push(ProjectedCrossing {
                host: IndexSet::new(&[1, j], n).expect("valid plane"),
                path: p,
            }),
            None => return (direct, false, None),
        }
    }
    let lift = lift_crossings(&crossings, bx)
        .and_then(|p| audit_lifted_path(&p, &crossings, bx).map(|_| p))
        .err()
        .map(|e| e.to_string());
    (direct, true, lift)
}

/// Exhaustive check over every configuration of the projected rectangles
/// of every box `[0, s_1 - 1] × … × [0, s_n - 1]` whose projected site
/// count `s_1 (s_2 + … + s_n)` is at most `max_projected_sites`.
pub fn bt_factorization_exhaustive(n: usize, max_projected_sites: usize) -> Result<BtFactorizationReport> {
    if n < 2 {
        return Err(Error::invalid("need n >= 2"));
    }
    if max_projected_sites > 24 {
        return Err(Error::invalid("exhaustive sweep limited to 24 projected sites"));
    }
    let mut report = BtFactorizationReport::default();
    let mut sides = vec![1usize; n];
    loop {
        let total: usize = sides[0] * sides[1..].iter().sum::<usize>();
        if total <= max_projected_sites {
            let hi = Site(sides.iter().map(|&s| s as i64 - 1).collect());
            let bx = LatticeBox::new(Site(smallvec::smallvec![0; n]), hi)?;
            sweep_box(&bx, &mut report);
        }
        // next side vector in odometer order, pruning by the budget
        let mut a = n;
        loop {
            if a == 0 {
                return Ok(report);
            }
            a -= 1;
            sides[a] += 1;
            let total: usize = sides[0] * sides[1..].iter().sum::<usize>();
            if total <= max_projected_sites {
                break;
            }
            sides[a] = 1;
        }
    }
}

fn sweep_box(bx: &LatticeBox, report: &mut BtFactorizationReport) {
    let n = bx.dim();
    let h = bx.side(1) as usize;
    let offsets: Vec<usize> = (2..=n)
        .scan(0usize, |acc, j| {
            let o = *acc;
            *acc += h * bx.side(j) as usize;
            Some(o)
        })
        .collect();
    let total: usize = (2..=n).map(|j| h * bx.side(j) as usize).sum();
    report.boxes += 1;
    for mask in 0u64..(1u64 << total) {
        let plane_open = |j: usize, ht: i64, w: i64| {
            let side_j = bx.side(j) as usize;
            let bit = offsets[j - 2] + ht as usize * side_j + w as usize;
            mask >> bit & 1 == 1
        };
        let (direct, product, lift_error) = compare_one(bx, &plane_open);
        report.configurations += 1;
        if direct == product && lift_error.is_none() {
            if direct {
                report.both_true += 1;
            } else {
                report.both_false += 1;
            }
        } else {
            let planes = (2..=n)
                .map(|j| {
                    (0..h as i64)
                        .flat_map(|ht| (0..bx.side(j) as i64).map(move |w| (ht, w)))
                        .map(|(ht, w)| plane_open(j, ht, w))
                        .collect()
                })
                .collect();
            report.counterexamples.push(BtCounterexample {
                bx: bx.clone(),
                planes,
                box_crossing: direct,
                all_planes_cross: product,
                lift_error,
            });
        }
    }
}

/// Sampled check on independent fields, one per trial. Besides the event
/// identity, records how often each plane crosses so the product of
/// marginals can be compared with the joint frequency.
pub fn bt_factorization_sampled(
    params: &ParamVector,
    bx: &LatticeBox,
    trials: u64,
    seed: u64,
) -> Result<BtFactorizationReport> {
    if params.k() != 2 || params.n() != bx.dim() {
        return Err(Error::invalid("sampled check needs k = 2 and a box in Z^n"));
    }
    let n = params.n();
    let mut report = BtFactorizationReport {
        boxes: 1,
        plane_crossings: vec![0; n - 1],
        ..Default::default()
    };
    let planes = IndexSet::with_first_axis(n);
    for trial in 0..trials {
        let field = HyperplaneField::new(derive_seed(seed, trial), params.clone());
        let plane_open = |j: usize, h: i64, w: i64| {
            field
                .hyperplane_bit(&planes[j - 2], &[h, w])
                .expect("plane belongs to the field")
        };
        for j in 2..=n {
            let r = Rectangle2D::new(bx.lo()[0], bx.hi()[0], bx.lo()[j - 1], bx.hi()[j - 1])?;
            if crossing_path(&r, Axis::First, |h, w| plane_open(j, h, w)).is_some() {
                report.plane_crossings[j - 2] += 1;
            }
        }
        let (direct, product, lift_error) = compare_one(bx, &plane_open);
        let xi = FieldView::xi(&field)?;
        let direct_view = box_crosses_bottom_to_top(bx, |s| xi.is_open(s.coords()));
        report.configurations += 1;
        if direct == product && direct == direct_view && lift_error.is_none() {
            if direct {
                report.both_true += 1;
            } else {
                report.both_false += 1;
            }
        } else {
            report.counterexamples.push(BtCounterexample {
                bx: bx.clone(),
                planes: Vec::new(),
                box_crossing: direct,
                all_planes_cross: product,
                lift_error,
            });
        }
    }
    Ok(report)
}

/// Uniformly chosen valid walk with the given target and at most
/// `max_duration` steps, by rejection. `None` if no such walk exists.
pub fn random_walk(rng: &mut impl rand::Rng, target: i64, max_duration: usize) -> Option<HeightWalk> {
    if target == 0 {
        return Some(HeightWalk { values: vec![0] });
    }
    if (target as usize) > max_duration {
        return None;
    }
    loop {
        let mut v = vec![0i64];
        while v.len() <= max_duration {
            let cur = *v.last().unwrap();
            let next = if cur == 0 || rng.gen_bool(0.5) { cur + 1 } else { cur - 1 };
            v.push(next);
            if next == target {
                return Some(HeightWalk { values: v });
            }
        }
    }
}
