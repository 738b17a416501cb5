//! Renormalized lattice for `k = 2`: good boxes, the spiral of box corners,
//! the coarse field `ν`, its dependence geometry, the jagged wall and the
//! per-sample event diagnostics behind the power-law lower bound.
//!
//! Throughout, `I_j = {1, j}` and the first coordinate is the height.

use std::collections::VecDeque;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::cluster::{connects_to_boundary, explore_cluster_in, finiteness_certificate_check};
use crate::crossing::{crossing_along, crossing_path, Axis, Rectangle2D};
use crate::error::{Error, Result};
use crate::field::{FieldView, HyperplaneField, ParamVector};
use crate::lattice::{neighbors, IndexSet, LatticeBox, Site};
use crate::parallel::map_trials;
use crate::stats::EventFrequency;

/// `B(y; N) = [y_1, y_1+N-1] × … × [y_n, y_n+N-1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoodBoxSpec {
    pub corner: Site,
    pub side: u64,
}

impl GoodBoxSpec {
    pub fn new(corner: Site, side: u64) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("box side must be positive"));
        }
        Ok(GoodBoxSpec { corner, side })
    }

    pub fn to_box(&self) -> LatticeBox {
        LatticeBox::cube(&self.corner, self.side).expect("side is positive")
    }

    pub fn contains(&self, c: &[i64]) -> bool {
        let s = self.side as i64;
        c.len() == self.corner.dim()
            && c.iter()
                .zip(self.corner.coords())
                .all(|(x, y)| *y <= *x && *x < y + s)
    }
}

fn check_dims(n: usize, side: u64) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid("the renormalized lattice needs n >= 2"));
    }
    if side == 0 {
        return Err(Error::invalid("box side must be positive"));
    }
    Ok(())
}

/// Direction `r_t ∈ {2..n}` of the `t`-th spiral step; cycles with period `n-1`.
pub fn spiral_direction(t: u64, n: usize) -> usize {
    2 + (t % (n as u64 - 1)) as usize
}

/// Corner `p_t` of the spiral: `p_0 = o`, `p_t = p_{t-1} + N e_{r_t}`.
pub fn spiral_point(t: u64, side: u64, n: usize) -> Result<Site> {
    check_dims(n, side)?;
    let m = n as u64 - 1;
    let mut c = smallvec::smallvec![0i64; n];
    // Steps s in 1..=t land on direction 2 + (s mod m).
    for d in 0..m {
        let hits = if d == 0 {
            t / m
        } else if t >= d {
            (t - d) / m + 1
        } else {
            0
        };
        c[1 + d as usize] = (hits * side) as i64;
    }
    Ok(Site(c))
}

/// Lower-left corners, in `(height, x_j)` coordinates, of the three `N × N`
/// squares forming `π_{I_j}(B(y) ∪ B(y + N e_1) ∪ B(y + N e_j))`.
fn tromino_squares(y: &[i64], side: i64, j: usize) -> [(i64, i64); 3] {
    let (h, v) = (y[0], y[j - 1]);
    [(h, v), (h + side, v), (h, v + side)]
}

/// Sites of the L-shaped projection of three boxes onto `Z^2_{I_j}`, sorted.
pub fn projected_tromino(y: &Site, side: u64, j: usize) -> Result<Vec<(i64, i64)>> {
    check_dims(y.dim(), side)?;
    if j < 2 || j > y.dim() {
        return Err(Error::invalid(format!("plane index j = {j} outside 2..={}", y.dim())));
    }
    let s = side as i64;
    let mut out: Vec<(i64, i64)> = tromino_squares(y.coords(), s, j)
        .iter()
        .flat_map(|&(h, v)| (h..h + s).flat_map(move |a| (v..v + s).map(move |b| (a, b))))
        .collect();
    out.sort_unstable();
    Ok(out)
}

fn plane_ranks(field: &HyperplaneField) -> Result<Vec<usize>> {
    if field.k() != 2 {
        return Err(Error::invalid("good boxes are defined for k = 2"));
    }
    let n = field.n();
    (2..=n)
        .map(|j| Ok(IndexSet::new(&[1, j], n)?.colex_rank() as usize))
        .collect()
}

fn good_with_ranks(field: &HyperplaneField, ranks: &[usize], y: &[i64], side: u64) -> bool {
    let s = side as i64;
    let h = y[0];
    ranks.iter().enumerate().all(|(idx, &rank)| {
        let v = y[idx + 1];
        let open = |a: i64, b: i64| field.bit_ranked(rank, &[a, b]);
        let tall = Rectangle2D { a: h, b: h + 2 * s - 1, c: v, d: v + s - 1 };
        let wide = Rectangle2D { a: h, b: h + s - 1, c: v, d: v + 2 * s - 1 };
        crossing_along(&tall, Axis::First, open) && crossing_along(&wide, Axis::Second, open)
    })
}

/// True iff, for every `j = 2..n`, `ω_{I_j}` crosses the tall rectangle
/// `π_{I_j}(B(y) ∪ B(y + N e_1))` in height and the wide rectangle
/// `π_{I_j}(B(y) ∪ B(y + N e_j))` along `x_j`.
pub fn is_good_box(view: &FieldView<'_>, corner: &Site, side: u64) -> Result<bool> {
    let field = view.field();
    check_dims(field.n(), side)?;
    if corner.dim() != field.n() {
        return Err(Error::invalid("box corner dimension does not match the field"));
    }
    let ranks = plane_ranks(field)?;
    Ok(good_with_ranks(field, &ranks, corner.coords(), side))
}

/// Corner of the box indexed by `(t, x)` on the wall: `p_t + N x e_1`.
pub fn wall_corner(t: u64, x: i64, side: u64, n: usize) -> Result<Site> {
    let p = spiral_point(t, side, n)?;
    Ok(p.shifted(1, side as i64 * x))
}

/// `ν(t, x)`: goodness of the box at `p_t + N x e_1`.
pub fn nu(view: &FieldView<'_>, t: u64, x: i64, side: u64) -> Result<bool> {
    let corner = wall_corner(t, x, side, view.n())?;
    is_good_box(view, &corner, side)
}

/// A pair of coarse sites that should be independent but whose supports
/// share a site in some plane.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndependenceViolation {
    pub t: u64,
    pub x: i64,
    pub s: u64,
    pub y: i64,
    pub plane: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub n: usize,
    pub side: u64,
    pub t_max: u64,
    pub x_radius: i64,
    /// Pairs with `|t - s| >= 2(n-1)` or `|x - y| >= 2` that were checked.
    pub pairs_checked: u64,
    /// Closer pairs whose supports do overlap; shows the radius is not vacuous.
    pub overlapping_close_pairs: u64,
    pub violations: Vec<IndependenceViolation>,
}

impl IndependenceReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

fn squares_meet(a: (i64, i64), b: (i64, i64), s: i64) -> bool {
    (a.0 - b.0).abs() < s && (a.1 - b.1).abs() < s
}

fn trominoes_meet(y: &[i64], z: &[i64], s: i64, j: usize) -> bool {
    let ta = tromino_squares(y, s, j);
    let tb = tromino_squares(z, s, j);
    ta.iter().any(|&a| tb.iter().any(|&b| squares_meet(a, b, s)))
}

/// Scans every pair `(t, x), (s, y)` with `t, s ∈ [0, t_max]` and
/// `x, y ∈ [-x_radius, x_radius]`. Pairs at time distance `>= 2(n-1)` or
/// height distance `>= 2` must have disjoint projected supports in every
/// plane `I_j`.
pub fn independence_radius_audit(
    n: usize,
    side: u64,
    t_max: u64,
    x_radius: i64,
) -> Result<IndependenceReport> {
    check_dims(n, side)?;
    let s = side as i64;
    let corners: Vec<Site> = (0..=t_max)
        .map(|t| spiral_point(t, side, n))
        .collect::<Result<_>>()?;
    let far_t = 2 * (n as u64 - 1);
    let mut report = IndependenceReport {
        n,
        side,
        t_max,
        x_radius,
        pairs_checked: 0,
        overlapping_close_pairs: 0,
        violations: Vec::new(),
    };
    for t in 0..=t_max {
        for u in 0..=t_max {
            for x in -x_radius..=x_radius {
                let a = corners[t as usize].shifted(1, s * x);
                for y in -x_radius..=x_radius {
                    let b = corners[u as usize].shifted(1, s * y);
                    let independent = t.abs_diff(u) >= far_t || (x - y).abs() >= 2;
                    let hit = (2..=n).find(|&j| trominoes_meet(a.coords(), b.coords(), s, j));
                    if independent {
                        report.pairs_checked += 1;
                        if let Some(plane) = hit {
                            report.violations.push(IndependenceViolation { t, x, s: u, y, plane });
                        }
                    } else if hit.is_some() {
                        report.overlapping_close_pairs += 1;
                    }
                }
            }
        }
    }
    Ok(report)
}

/// `⌊c_o ln K⌋`, the number of spiral steps in the wall.
pub fn wall_depth(scale: u64, c_o: f64) -> u64 {
    (c_o * (scale as f64).ln()).floor().max(0.0) as u64
}

fn check_wall(scale: u64, c_o: f64) -> Result<()> {
    if scale < 2 {
        return Err(Error::invalid("the wall needs K >= 2"));
    }
    if !(c_o > 0.0 && c_o.is_finite()) {
        return Err(Error::invalid("c_o must be a positive number"));
    }
    Ok(())
}

/// Boxes `B(p_t + N x e_1; N)` for `0 <= t <= ⌊c_o ln K⌋`, `0 <= x <= K`,
/// indexed by `(t, x)`.
pub fn wall_boxes(scale: u64, side: u64, c_o: f64, n: usize) -> Result<Vec<((u64, i64), GoodBoxSpec)>> {
    check_wall(scale, c_o)?;
    check_dims(n, side)?;
    let depth = wall_depth(scale, c_o);
    let mut out = Vec::new();
    for t in 0..=depth {
        for x in 0..=scale as i64 {
            out.push(((t, x), GoodBoxSpec::new(wall_corner(t, x, side, n)?, side)?));
        }
    }
    Ok(out)
}

/// The jagged wall: union of all wall boxes, sorted and deduplicated.
pub fn zigzag_region(scale: u64, side: u64, c_o: f64, n: usize) -> Result<Vec<Site>> {
    let mut sites: Vec<Site> = wall_boxes(scale, side, c_o, n)?
        .into_iter()
        .flat_map(|(_, b)| b.to_box().sites().collect::<Vec<_>>())
        .collect();
    sites.sort();
    sites.dedup();
    Ok(sites)
}

/// Checks that consecutive corners differ by `±N e_j` and that every box is good.
pub fn validate_box_path(view: &FieldView<'_>, boxes: &[GoodBoxSpec]) -> Result<()> {
    let first = boxes
        .first()
        .ok_or_else(|| Error::invalid("empty box path"))?;
    let side = first.side;
    for (i, w) in boxes.windows(2).enumerate() {
        if w[1].side != side {
            return Err(Error::invalid(format!("box {} has a different side", i + 1)));
        }
        let d = w[1].corner.sub(&w[0].corner);
        let moved: Vec<i64> = d.coords().iter().copied().filter(|c| *c != 0).collect();
        if moved.len() != 1 || moved[0].unsigned_abs() != side {
            return Err(Error::invalid(format!(
                "boxes {i} and {} are not adjacent along an axis",
                i + 1
            )));
        }
    }
    for (i, b) in boxes.iter().enumerate() {
        if !is_good_box(view, &b.corner, b.side)? {
            return Err(Error::invalid(format!("box {i} at {:?} is not good", b.corner)));
        }
    }
    Ok(())
}

/// Nearest-neighbour path of `ξ`-open sites (open in every `ω_{I_j}`) inside
/// the union of a path of good boxes, from the first box to the last.
///
/// Such a path always exists; failure is reported as
/// [`Error::ConstructionFailure`] carrying the offending boxes.
pub fn good_path_to_open_path(view: &FieldView<'_>, boxes: &[GoodBoxSpec]) -> Result<Vec<Site>> {
    validate_box_path(view, boxes)?;
    let xi = FieldView::xi(view.field())?;
    let first = &boxes[0];
    let last = boxes.last().expect("validated nonempty");
    let inside = |c: &[i64]| boxes.iter().any(|b| b.contains(c));

    let mut parent: FxHashMap<Site, Option<Site>> = FxHashMap::default();
    let mut queue = VecDeque::new();
    for v in first.to_box().sites() {
        if xi.is_open(v.coords()) {
            parent.insert(v.clone(), None);
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        if last.contains(v.coords()) {
            let mut path = vec![v.clone()];
            let mut cur = v;
            while let Some(Some(p)) = parent.get(&cur) {
                path.push(p.clone());
                cur = p.clone();
            }
            path.reverse();
            return Ok(path);
        }
        for w in neighbors(&v) {
            if !parent.contains_key(&w) && inside(w.coords()) && xi.is_open(w.coords()) {
                parent.insert(w.clone(), Some(v.clone()));
                queue.push_back(w);
            }
        }
    }
    Err(Error::ConstructionFailure(format!(
        "no xi-open path through {} good boxes from {:?} to {:?} (seed {})",
        boxes.len(),
        first.corner,
        last.corner,
        view.field().seed()
    )))
}

/// Knobs of the wall construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallConfig {
    /// Number of coarse steps `K` the wall spans in height.
    pub scale: u64,
    /// Box side `N`.
    pub side: u64,
    /// Depth constant `c_o` in `⌊c_o ln K⌋`.
    pub c_o: f64,
    /// Radius of the window searched for a finiteness certificate.
    pub cert_radius: u64,
}

impl WallConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        check_wall(self.scale, self.c_o)?;
        check_dims(n, self.side)?;
        if n < 3 {
            return Err(Error::invalid("the wall diagnostics need n >= 3"));
        }
        if self.cert_radius <= self.circuit_extent() as u64 {
            return Err(Error::invalid(format!(
                "certificate radius {} must exceed the circuit extent {}",
                self.cert_radius,
                self.circuit_extent()
            )));
        }
        Ok(())
    }

    /// Upper end `L` of the closed square circuit `∂[-2, L]^2`:
    /// `⌊4 N c_o ⌊ln K⌋⌋ + 1`.
    pub fn circuit_extent(&self) -> i64 {
        let depth = (self.scale as f64).ln().floor();
        (4.0 * self.side as f64 * self.c_o * depth).floor() as i64 + 1
    }

    /// Radius `N K` of the ball the long path has to leave.
    pub fn target_radius(&self) -> u64 {
        self.side * self.scale
    }
}

/// Outcome of every event on a single field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WallSample {
    /// `ν` crosses `[0, depth] × [0, K]` along `x`.
    pub o1: bool,
    /// The wall is open in every plane avoiding the height axis.
    pub o2: bool,
    /// The layer under the wall at height `-1` is open in every `ω_{I_j}`.
    pub o3: bool,
    /// The square circuit in the plane `{2, 3}` is closed.
    pub o4: bool,
    /// A verified finiteness certificate over `{2, 3}` exists within the window.
    pub o5: bool,
    pub origin_open: bool,
    /// `o ↔ ∂B(N K)` in the full field.
    pub reaches: bool,
    /// `o1 ∧ o2 ∧ o3 ∧ origin_open` held but `reaches` did not.
    pub implication_violated: bool,
    /// A certificate was found but the explored cluster left its region.
    pub confinement_violated: bool,
    /// `o1` held but no open path was found through the good boxes of the crossing.
    pub path_failed: bool,
}

fn bits_all_open(field: &HyperplaneField, rank: usize, pts: impl IntoIterator<Item = [i64; 2]>) -> bool {
    pts.into_iter().all(|u| field.bit_ranked(rank, &u))
}

/// Evaluates every event on one field. The field must have `k = 2`, `n >= 3`.
pub fn wall_sample(field: &HyperplaneField, cfg: &WallConfig) -> Result<WallSample> {
    let n = field.n();
    cfg.validate(n)?;
    let ranks = plane_ranks(field)?;
    let full = FieldView::full(field);
    let side = cfg.side;
    let s = side as i64;
    let depth = wall_depth(cfg.scale, cfg.c_o);
    let corners: Vec<Site> = (0..=depth)
        .map(|t| spiral_point(t, side, n))
        .collect::<Result<_>>()?;
    let mut out = WallSample::default();

    let grid = Rectangle2D::new(0, depth as i64, 0, cfg.scale as i64)?;
    let good = |t: i64, x: i64| {
        let y = corners[t as usize].shifted(1, s * x);
        good_with_ranks(field, &ranks, y.coords(), side)
    };
    let coarse_path = crossing_path(&grid, Axis::Second, good);
    out.o1 = coarse_path.is_some();

    // Planes avoiding the height axis see only the spiral corners.
    out.o2 = IndexSet::all(2, n).iter().filter(|i| !i.contains(1)).all(|i| {
        let (a, b) = (i.members()[0] - 1, i.members()[1] - 1);
        let rank = i.colex_rank() as usize;
        corners.iter().all(|p| {
            let (pa, pb) = (p[a], p[b]);
            bits_all_open(
                field,
                rank,
                (pa..pa + s).flat_map(|u| (pb..pb + s).map(move |v| [u, v])),
            )
        })
    });

    out.o3 = ranks.iter().enumerate().all(|(idx, &rank)| {
        let axis = idx + 1;
        corners
            .iter()
            .all(|p| bits_all_open(field, rank, (p[axis]..p[axis] + s).map(|v| [-1, v])))
    });

    let plane23 = IndexSet::new(&[2, 3], n)?;
    let rank23 = plane23.colex_rank() as usize;
    let l = cfg.circuit_extent();
    out.o4 = (-2..=l).all(|a| {
        [[a, -2], [a, l], [-2, a], [l, a]]
            .iter()
            .all(|u| !field.bit_ranked(rank23, u))
    });

    let origin = Site(smallvec::smallvec![0; n]);
    out.origin_open = full.is_open(origin.coords());
    out.reaches = connects_to_boundary(&full, cfg.target_radius());
    out.implication_violated = out.o1 && out.o2 && out.o3 && out.origin_open && !out.reaches;

    let window = LatticeBox::centered(n, cfg.cert_radius);
    if let Some(cert) = finiteness_certificate_check(&full, &plane23, &window)? {
        if cert.verify(&full)? {
            out.o5 = true;
            let outer = LatticeBox::centered(n, cfg.cert_radius + 1);
            let cluster = explore_cluster_in(&full, &outer, usize::MAX);
            out.confinement_violated =
                cluster.touched_boundary || !cluster.sites.iter().all(|v| cert.confines(v));
        }
    }

    if let Some(path) = coarse_path {
        let boxes: Vec<GoodBoxSpec> = path
            .iter()
            .map(|&(t, x)| GoodBoxSpec {
                corner: corners[t as usize].shifted(1, s * x),
                side,
            })
            .collect();
        out.path_failed = match good_path_to_open_path(&full, &boxes) {
            Ok(_) => false,
            Err(Error::ConstructionFailure(_)) => true,
            Err(e) => return Err(e),
        };
    }
    Ok(out)
}

/// Monte Carlo frequencies of the wall events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallReport {
    pub config: WallConfig,
    pub seed: u64,
    pub trials: u64,
    pub events: Vec<EventFrequency>,
    pub implication_violations: u64,
    pub confinement_violations: u64,
    pub path_failures: u64,
}

impl WallReport {
    /// True iff every per-sample audit held.
    pub fn audits_pass(&self) -> bool {
        self.implication_violations == 0 && self.confinement_violations == 0 && self.path_failures == 0
    }

    pub fn event(&self, name: &str) -> Option<&EventFrequency> {
        self.events.iter().find(|e| e.event == name)
    }
}

/// Runs [`wall_sample`] on `trials` independent fields.
pub fn wall_event_diagnostics(
    params: &ParamVector,
    cfg: &WallConfig,
    seed: u64,
    trials: u64,
    workers: usize,
) -> Result<WallReport> {
    if params.k() != 2 {
        return Err(Error::invalid("the wall diagnostics need k = 2"));
    }
    cfg.validate(params.n())?;
    let samples: Vec<WallSample> = map_trials(seed, trials, workers, |s| {
        wall_sample(&HyperplaneField::new(s, params.clone()), cfg)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let count = |f: &dyn Fn(&WallSample) -> bool| samples.iter().filter(|s| f(s)).count() as u64;
    let ev = |name: &str, f: &dyn Fn(&WallSample) -> bool| EventFrequency::new(name, trials, count(f));
    let events = vec![
        ev("O1", &|s| s.o1),
        ev("O2", &|s| s.o2),
        ev("O3", &|s| s.o3),
        ev("O4", &|s| s.o4),
        ev("O5", &|s| s.o5),
        ev("origin_open", &|s| s.origin_open),
        ev("O1&O2&O3", &|s| s.o1 && s.o2 && s.o3),
        ev("O1&O2&O3&O4&O5", &|s| s.o1 && s.o2 && s.o3 && s.o4 && s.o5),
        ev("reaches_NK", &|s| s.reaches),
        ev("reaches_NK&certified_finite", &|s| s.reaches && s.o5),
    ];
    Ok(WallReport {
        config: cfg.clone(),
        seed,
        trials,
        events,
        implication_violations: count(&|s| s.implication_violated),
        confinement_violations: count(&|s| s.confinement_violated),
        path_failures: count(&|s| s.path_failed),
    })
}

/// Frequency of `B(o; N)` being good over independent fields.
pub fn good_box_frequency(
    params: &ParamVector,
    side: u64,
    seed: u64,
    trials: u64,
    workers: usize,
) -> Result<EventFrequency> {
    let n = params.n();
    check_dims(n, side)?;
    let origin = Site(smallvec::smallvec![0; n]);
    let hits: Vec<bool> = map_trials(seed, trials, workers, |s| {
        let field = HyperplaneField::new(s, params.clone());
        is_good_box(&FieldView::full(&field), &origin, side)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(EventFrequency::new(
        format!("good_box_N{side}"),
        trials,
        hits.iter().filter(|h| **h).count() as u64,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideCalibration {
    /// Smallest probed side whose good-box frequency exceeds the target.
    pub side: Option<u64>,
    pub target: f64,
    pub probes: Vec<EventFrequency>,
}

/// Doubles `N` from 1 until the good-box frequency exceeds `target`, or
/// `max_side` is passed.
pub fn calibrate_side(
    params: &ParamVector,
    target: f64,
    max_side: u64,
    seed: u64,
    trials: u64,
    workers: usize,
) -> Result<SideCalibration> {
    let mut probes = Vec::new();
    let mut side = 1;
    while side <= max_side {
        let f = good_box_frequency(params, side, seed, trials, workers)?;
        let ok = f.frequency() > target;
        probes.push(f);
        if ok {
            return Ok(SideCalibration {
                side: Some(side),
                target,
                probes,
            });
        }
        side *= 2;
    }
    Ok(SideCalibration {
        side: None,
        target,
        probes,
    })
}

/// Distinct sites of a slice of boxes; a small helper for audits.
pub fn box_union(boxes: &[GoodBoxSpec]) -> FxHashSet<Site> {
    boxes.iter().flat_map(|b| b.to_box().sites().collect::<Vec<_>>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::project;

    fn field3(seed: u64, p: f64) -> HyperplaneField {
        HyperplaneField::new(seed, ParamVector::uniform(3, 2, p).unwrap())
    }

    fn site(c: &[i64]) -> Site {
        Site::from_slice(c)
    }

    #[test]
    fn spiral_examples() {
        assert_eq!(spiral_point(0, 5, 4).unwrap(), site(&[0, 0, 0, 0]));
        let expect = [[0, 0, 2, 0], [0, 0, 2, 2], [0, 2, 2, 2], [0, 2, 4, 2]];
        for (t, e) in expect.iter().enumerate() {
            assert_eq!(spiral_point(t as u64 + 1, 2, 4).unwrap(), site(e));
        }
        let dirs: Vec<usize> = (0..6).map(|t| spiral_direction(t, 4)).collect();
        assert_eq!(dirs, vec![2, 3, 4, 2, 3, 4]);
    }

    #[test]
    fn spiral_matches_recursion() {
        for n in 2..=6 {
            let mut p = site(&vec![0; n]);
            for t in 1..60u64 {
                p = p.shifted(spiral_direction(t, n), 3);
                assert_eq!(spiral_point(t, 3, n).unwrap(), p, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn tromino_shape_and_size() {
        let t = projected_tromino(&site(&[0, 0, 0]), 1, 2).unwrap();
        assert_eq!(t, vec![(0, 0), (0, 1), (1, 0)]);
        for n in [3, 4] {
            for side in 1..4 {
                let y = site(&(0..n as i64).map(|i| 3 * i - 2).collect::<Vec<_>>());
                for j in 2..=n {
                    assert_eq!(projected_tromino(&y, side, j).unwrap().len(), 3 * (side * side) as usize);
                }
            }
        }
        assert!(projected_tromino(&site(&[0, 0, 0]), 1, 1).is_err());
    }

    #[test]
    fn tromino_matches_brute_projection() {
        let y = site(&[1, -2, 4]);
        let side = 2;
        for j in 2..=3 {
            let i = IndexSet::new(&[1, j], 3).unwrap();
            let mut brute: Vec<(i64, i64)> = [y.clone(), y.shifted(1, 2), y.shifted(j, 2)]
                .iter()
                .flat_map(|c| LatticeBox::cube(c, side).unwrap().sites().collect::<Vec<_>>())
                .map(|v| {
                    let u = project(&v, &i).unwrap();
                    (u[0], u[1])
                })
                .collect();
            brute.sort_unstable();
            brute.dedup();
            assert_eq!(projected_tromino(&y, side, j).unwrap(), brute);
        }
    }

    #[test]
    fn all_open_boxes_are_good() {
        let f = field3(1, 1.0);
        let v = FieldView::full(&f);
        assert!(is_good_box(&v, &site(&[3, -1, 7]), 5).unwrap());
        for t in 0..5 {
            assert!(nu(&v, t, -2, 3).unwrap());
        }
    }

    #[test]
    fn closed_row_blocks_goodness() {
        // ω_{13} closed on the row x_3 = 1 of the wide rectangle kills the
        // tall crossing of the plane {1,3} (it spans x_3 in [0, N-1]).
        let params = ParamVector::from_entries(3, 2, 1.0, &[]).unwrap();
        let f = HyperplaneField::new(0, params);
        let v = FieldView::full(&f);
        assert!(is_good_box(&v, &site(&[0, 0, 0]), 3).unwrap());
        let p0 = ParamVector::from_entries(3, 2, 1.0, &[(IndexSet::new(&[1, 3], 3).unwrap(), 0.0)]).unwrap();
        let f0 = HyperplaneField::new(0, p0);
        assert!(!is_good_box(&FieldView::full(&f0), &site(&[0, 0, 0]), 3).unwrap());
    }

    /// Goodness recomputed from a materialized projection and a union-find
    /// crossing test.
    fn good_oracle(field: &HyperplaneField, y: &Site, side: u64) -> bool {
        let n = field.n();
        let s = side as i64;
        (2..=n).all(|j| {
            let i = IndexSet::new(&[1, j], n).unwrap();
            let tall: Vec<Site> = [y.clone(), y.shifted(1, s)]
                .iter()
                .flat_map(|c| LatticeBox::cube(c, side).unwrap().sites().collect::<Vec<_>>())
                .collect();
            let wide: Vec<Site> = [y.clone(), y.shifted(j, s)]
                .iter()
                .flat_map(|c| LatticeBox::cube(c, side).unwrap().sites().collect::<Vec<_>>())
                .collect();
            let proj = |sites: &[Site]| -> Vec<(i64, i64)> {
                let mut v: Vec<(i64, i64)> = sites
                    .iter()
                    .map(|x| {
                        let u = project(x, &i).unwrap();
                        (u[0], u[1])
                    })
                    .filter(|u| field.hyperplane_bit(&i, &[u.0, u.1]).unwrap())
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            };
            let spans = |open: Vec<(i64, i64)>, lo: i64, hi: i64, first: bool| {
                let key = |u: &(i64, i64)| if first { u.0 } else { u.1 };
                let idx: FxHashMap<(i64, i64), usize> =
                    open.iter().enumerate().map(|(a, u)| (*u, a)).collect();
                let mut parent: Vec<usize> = (0..open.len()).collect();
                fn root(p: &mut Vec<usize>, mut a: usize) -> usize {
                    while p[a] != a {
                        p[a] = p[p[a]];
                        a = p[a];
                    }
                    a
                }
                for (a, u) in open.iter().enumerate() {
                    for w in [(u.0 + 1, u.1), (u.0, u.1 + 1)] {
                        if let Some(&b) = idx.get(&w) {
                            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                            parent[ra] = rb;
                        }
                    }
                }
                let starts: FxHashSet<usize> = open
                    .iter()
                    .enumerate()
                    .filter(|(_, u)| key(u) == lo)
                    .map(|(a, _)| root(&mut parent, a))
                    .collect();
                open.iter()
                    .enumerate()
                    .filter(|(_, u)| key(u) == hi)
                    .any(|(a, _)| starts.contains(&root(&mut parent, a)))
            };
            spans(proj(&tall), y[0], y[0] + 2 * s - 1, true)
                && spans(proj(&wide), y[j - 1], y[j - 1] + 2 * s - 1, false)
        })
    }

    #[test]
    fn good_box_agrees_with_oracle() {
        let mut good = 0;
        for seed in 0..200 {
            let f = field3(seed, 0.65);
            let v = FieldView::full(&f);
            let y = site(&[seed as i64 % 5, -3, 2]);
            let got = is_good_box(&v, &y, 2).unwrap();
            assert_eq!(got, good_oracle(&f, &y, 2), "seed {seed}");
            good += got as u32;
        }
        assert!(good > 10 && good < 190, "degenerate sample: {good}");
    }

    #[test]
    fn nu_is_deterministic() {
        let f = field3(77, 0.8);
        let g = field3(77, 0.8);
        let (a, b) = (FieldView::full(&f), FieldView::full(&g));
        for t in 0..6 {
            for x in -3..3 {
                assert_eq!(nu(&a, t, x, 3).unwrap(), nu(&b, t, x, 3).unwrap());
            }
        }
    }

    #[test]
    fn nu_law_is_translation_invariant() {
        let params = ParamVector::uniform(3, 2, 0.8).unwrap();
        let count = |t: u64, x: i64| -> u64 {
            map_trials(404, 1000, 0, |s| {
                let f = HyperplaneField::new(s, params.clone());
                nu(&FieldView::full(&f), t, x, 8).unwrap() as u64
            })
            .iter()
            .sum()
        };
        let (a, b) = (count(0, 0) as f64 / 1e3, count(5, 7) as f64 / 1e3);
        let pooled = (a + b) / 2.0;
        let sd = (2.0 * pooled * (1.0 - pooled) / 1e3).sqrt().max(1e-3);
        assert!((a - b).abs() <= 3.0 * sd, "{a} vs {b}");
    }

    #[test]
    fn independence_scan_small() {
        for n in [3, 4] {
            for side in 1..=3 {
                let r = independence_radius_audit(n, side, 12, 3).unwrap();
                assert!(r.passes(), "{:?}", r.violations.first());
                assert!(r.overlapping_close_pairs > 0);
            }
        }
    }

    #[test]
    fn independence_geometry_matches_site_sets() {
        let (n, side) = (3, 2);
        let sets: Vec<((u64, i64), Vec<FxHashSet<(i64, i64)>>)> = (0..8u64)
            .flat_map(|t| (-2..=2).map(move |x| (t, x)))
            .map(|(t, x)| {
                let c = wall_corner(t, x, side, n).unwrap();
                let per_plane = (2..=n)
                    .map(|j| projected_tromino(&c, side, j).unwrap().into_iter().collect())
                    .collect();
                ((t, x), per_plane)
            })
            .collect();
        for (a, sa) in &sets {
            for (b, sb) in &sets {
                let meets_sets = sa.iter().zip(sb).any(|(p, q)| !p.is_disjoint(q));
                let ca = wall_corner(a.0, a.1, side, n).unwrap();
                let cb = wall_corner(b.0, b.1, side, n).unwrap();
                let meets_geom = (2..=n).any(|j| trominoes_meet(ca.coords(), cb.coords(), 2, j));
                assert_eq!(meets_sets, meets_geom, "{a:?} {b:?}");
                if a.0.abs_diff(b.0) >= 4 || (a.1 - b.1).abs() >= 2 {
                    assert!(!meets_sets);
                }
            }
        }
    }

    #[test]
    fn zigzag_matches_union_oracle() {
        let (k, side, c_o, n) = (4u64, 2u64, 3.0, 3usize);
        let region = zigzag_region(k, side, c_o, n).unwrap();
        let depth = wall_depth(k, c_o);
        assert_eq!(depth, 4);
        let mut brute: FxHashSet<Site> = FxHashSet::default();
        let mut p = site(&[0, 0, 0]);
        for t in 0..=depth {
            if t > 0 {
                p = p.shifted(spiral_direction(t, n), side as i64);
            }
            for x in 0..=k as i64 {
                for v in LatticeBox::cube(&p.shifted(1, side as i64 * x), side).unwrap().sites() {
                    brute.insert(v);
                }
            }
        }
        let got: FxHashSet<Site> = region.iter().cloned().collect();
        assert_eq!(got, brute);
        assert!(region.len() as u64 <= (depth + 1) * (k + 1) * side.pow(3));
        assert_eq!(region.len() as u64, (depth + 1) * (k + 1) * side.pow(3));
    }

    #[test]
    fn open_path_in_single_and_adjacent_boxes() {
        let f = field3(3, 1.0);
        let v = FieldView::full(&f);
        let b = GoodBoxSpec::new(site(&[0, 0, 0]), 3).unwrap();
        let p = good_path_to_open_path(&v, std::slice::from_ref(&b)).unwrap();
        assert!(!p.is_empty() && p.iter().all(|s| b.contains(s.coords())));
        let c = GoodBoxSpec::new(site(&[0, 3, 0]), 3).unwrap();
        let p = good_path_to_open_path(&v, &[b.clone(), c.clone()]).unwrap();
        assert!(b.contains(p[0].coords()));
        assert!(c.contains(p.last().unwrap().coords()));
        let bad = GoodBoxSpec::new(site(&[0, 2, 0]), 3).unwrap();
        assert!(good_path_to_open_path(&v, &[b, bad]).is_err());
    }

    #[test]
    fn open_paths_through_random_good_box_paths() {
        let (n, side) = (3usize, 4u64);
        let mut rng = crate::rng::audit_rng(21);
        let mut tested = 0;
        let mut seed = 0u64;
        while tested < 100 {
            seed += 1;
            let f = field3(seed, 0.85);
            let v = FieldView::full(&f);
            let mut boxes = vec![GoodBoxSpec::new(site(&[0, 0, 0]), side).unwrap()];
            for _ in 0..4 {
                use rand::Rng;
                let axis = rng.gen_range(1..=n);
                let sign = if rng.gen_bool(0.7) { 1 } else { -1 };
                let next = boxes.last().unwrap().corner.shifted(axis, sign * side as i64);
                boxes.push(GoodBoxSpec::new(next, side).unwrap());
            }
            if validate_box_path(&v, &boxes).is_err() {
                continue;
            }
            tested += 1;
            let path = good_path_to_open_path(&v, &boxes).unwrap();
            let xi = FieldView::xi(&f).unwrap();
            let union = box_union(&boxes);
            assert!(boxes[0].contains(path[0].coords()));
            assert!(boxes[4].contains(path.last().unwrap().coords()));
            for w in path.windows(2) {
                assert_eq!(w[0].l1_distance(&w[1]), 1);
            }
            assert!(path.iter().all(|s| xi.omega(s).unwrap() && union.contains(s)));
        }
    }

    #[test]
    fn wall_all_open() {
        let f = field3(0, 1.0);
        let cfg = WallConfig { scale: 3, side: 2, c_o: 1.0, cert_radius: 20 };
        let s = wall_sample(&f, &cfg).unwrap();
        assert!(s.o1 && s.o2 && s.o3 && s.origin_open && s.reaches);
        assert!(!s.o4 && !s.o5);
        assert!(!s.implication_violated && !s.path_failed);
    }

    #[test]
    fn wall_config_rejects_small_window() {
        let cfg = WallConfig { scale: 8, side: 2, c_o: 3.0, cert_radius: 10 };
        assert!(cfg.validate(3).is_err());
        assert_eq!(cfg.circuit_extent(), 4 * 2 * 3 * 2 + 1);
    }

    #[test]
    fn wall_diagnostics_are_consistent() {
        let params = ParamVector::from_entries(
            3,
            2,
            0.95,
            &[(IndexSet::new(&[2, 3], 3).unwrap(), 0.8)],
        )
        .unwrap();
        let cfg = WallConfig { scale: 3, side: 2, c_o: 1.0, cert_radius: 24 };
        let r = wall_event_diagnostics(&params, &cfg, 5, 60, 2).unwrap();
        assert!(r.audits_pass(), "{r:?}");
        let f = |e: &str| r.event(e).unwrap().successes;
        let conj = f("O1&O2&O3");
        assert!(conj <= f("O1") && conj <= f("O2") && conj <= f("O3"));
        assert!(f("O1&O2&O3&O4&O5") <= conj);
        let again = wall_event_diagnostics(&params, &cfg, 5, 60, 1).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn calibration_monotone_stop() {
        let params = ParamVector::uniform(3, 2, 0.9).unwrap();
        let c = calibrate_side(&params, 0.5, 16, 1, 200, 2).unwrap();
        let side = c.side.expect("some side should pass 0.5 at p = 0.9");
        assert_eq!(c.probes.len() as u32, side.trailing_zeros() + 1);
        assert!(c.probes.last().unwrap().frequency() > 0.5);
    }
}
