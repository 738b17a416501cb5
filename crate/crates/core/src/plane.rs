//! An integer plane `A(Z^2) ⊂ Z^n` in general position with respect to the
//! coordinate planes, and the connected thickening built on it.
//!
//! All geometry is exact: rationals for Gram–Schmidt and the separation
//! constant, integers for the basis. Norms are l1 throughout.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{box_all_open_probability, FieldView, ParamVector};
use crate::lattice::{IndexSet, Site};

pub type Rational = Ratio<i64>;

/// Kernel vectors of `L(x)_j = x_j + x_{n-1} + j x_n`, `j = 1..=n-2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelMaps {
    pub n: usize,
    /// `(-1, …, -1, 1, 0)`
    pub v1: Vec<i64>,
    /// `(-1, -2, …, -(n-2), 0, 1)`
    pub v2: Vec<i64>,
}

impl KernelMaps {
    pub fn apply_l(&self, x: &[i64]) -> Vec<i64> {
        let n = self.n;
        (1..=n - 2)
            .map(|j| x[j - 1] + x[n - 2] + j as i64 * x[n - 1])
            .collect()
    }

    /// `U(x, y) = x v1 + y v2`.
    pub fn apply_u(&self, x: i64, y: i64) -> Vec<i64> {
        self.v1.iter().zip(&self.v2).map(|(a, b)| x * a + y * b).collect()
    }
}

pub fn kernel_maps(n: usize) -> Result<KernelMaps> {
    if n < 3 {
        return Err(Error::invalid(format!("the inclined plane needs n >= 3, got {n}")));
    }
    let mut v1 = vec![-1i64; n];
    v1[n - 2] = 1;
    v1[n - 1] = 0;
    let mut v2: Vec<i64> = (1..=n as i64).map(|j| -j).collect();
    v2[n - 2] = 0;
    v2[n - 1] = 1;
    Ok(KernelMaps { n, v1, v2 })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclinedBasis {
    pub n: usize,
    pub w1: Vec<i64>,
    pub w2: Vec<i64>,
    /// Common l1 norm of `w1` and `w2`.
    pub radius: i64,
    /// Certified lower bound for `‖π_I(Au)‖₁ / ‖u‖₁`.
    pub separation: Rational,
}

impl InclinedBasis {
    /// `A(x, y) = x w1 + y w2`.
    pub fn apply(&self, x: i64, y: i64) -> Site {
        Site(self.w1.iter().zip(&self.w2).map(|(a, b)| x * a + y * b).collect())
    }

    pub fn inner_product(&self) -> i64 {
        self.w1.iter().zip(&self.w2).map(|(a, b)| a * b).sum()
    }

    /// `2x2` matrix of `π_J ∘ A` for `J = {a, b}` (1-based), rows by coordinate.
    pub fn minor(&self, a: usize, b: usize) -> [[i64; 2]; 2] {
        [
            [self.w1[a - 1], self.w2[a - 1]],
            [self.w1[b - 1], self.w2[b - 1]],
        ]
    }
}

fn l1_rational(v: &[Rational]) -> Rational {
    v.iter().fold(Rational::zero(), |acc, x| acc + x.abs())
}

fn to_integer(v: &[Rational]) -> Result<Vec<i64>> {
    v.iter()
        .map(|x| {
            if x.is_integer() {
                Ok(x.to_integer())
            } else {
                Err(Error::ConstructionFailure(format!("basis entry {x} is not an integer")))
            }
        })
        .collect()
}

/// Orthogonalizes `(v1, v2)` exactly and scales by twice the opposite l1
/// norm, which makes both vectors integral with equal l1 norms.
pub fn build_inclined_basis(n: usize) -> Result<InclinedBasis> {
    let maps = kernel_maps(n)?;
    let v1: Vec<Rational> = maps.v1.iter().map(|&x| Rational::from_integer(x)).collect();
    let v2: Vec<Rational> = maps.v2.iter().map(|&x| Rational::from_integer(x)).collect();
    let dot = |a: &[Rational], b: &[Rational]| -> Rational {
        a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
    };
    let coef = dot(&v1, &v2) / dot(&v1, &v1);
    let t1 = v1.clone();
    let t2: Vec<Rational> = v2.iter().zip(&v1).map(|(b, a)| b - coef * a).collect();
    let two = Rational::from_integer(2);
    let s1 = two * l1_rational(&t2);
    let s2 = two * l1_rational(&t1);
    let w1 = to_integer(&t1.iter().map(|x| x * s1).collect::<Vec<_>>())?;
    let w2 = to_integer(&t2.iter().map(|x| x * s2).collect::<Vec<_>>())?;
    let r1: i64 = w1.iter().map(|x| x.abs()).sum();
    let r2: i64 = w2.iter().map(|x| x.abs()).sum();
    if r1 != r2 {
        return Err(Error::ConstructionFailure(format!("l1 norms differ: {r1} vs {r2}")));
    }
    let mut basis = InclinedBasis {
        n,
        w1,
        w2,
        radius: r1,
        separation: Rational::zero(),
    };
    basis.separation = separation_constant(&basis)?;
    Ok(basis)
}

/// Second column of the factorization `A = U ∘ H`, checked as an identity:
/// `H = [[2‖w̃2‖, (2-n)‖w̃1‖], [0, 2‖w̃1‖]]`.
pub fn factorization_matrix(n: usize) -> Result<[[Rational; 2]; 2]> {
    let maps = kernel_maps(n)?;
    let t1: Vec<Rational> = maps.v1.iter().map(|&x| Rational::from_integer(x)).collect();
    let coef = Rational::new((n as i64 - 2) * (n as i64 - 1) / 2, n as i64 - 1);
    let t2: Vec<Rational> = maps
        .v2
        .iter()
        .zip(&t1)
        .map(|(&b, a)| Rational::from_integer(b) - coef * a)
        .collect();
    let (n1, n2) = (l1_rational(&t1), l1_rational(&t2));
    let two = Rational::from_integer(2);
    Ok([
        [two * n2, Rational::from_integer(2 - n as i64) * n1],
        [Rational::zero(), two * n1],
    ])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub set: IndexSet,
    /// `(a, b, det π_{{a,b}} ∘ A)` for every 2-subset of the index set.
    pub determinants: Vec<(usize, usize, i64)>,
    pub min_abs_determinant: i64,
    pub injective: bool,
}

/// Determinants of every `2x2` minor of `π_I ∘ A`; the restriction is
/// injective on `Z^2` iff one of them is nonzero.
pub fn injectivity_certificate(basis: &InclinedBasis, i: &IndexSet) -> Result<InjectivityReport> {
    if i.k() < 2 {
        return Err(Error::invalid("injectivity needs an index set of size at least 2"));
    }
    if i.max_member() > basis.n {
        return Err(Error::invalid(format!("index set {i} exceeds dimension {}", basis.n)));
    }
    let m = i.members();
    let mut determinants = Vec::new();
    for x in 0..m.len() {
        for y in x + 1..m.len() {
            let [[a, b], [c, d]] = basis.minor(m[x], m[y]);
            determinants.push((m[x], m[y], a * d - b * c));
        }
    }
    let min_abs_determinant = determinants.iter().map(|d| d.2.abs()).min().unwrap_or(0);
    let injective = determinants.iter().any(|d| d.2 != 0);
    Ok(InjectivityReport {
        set: i.clone(),
        determinants,
        min_abs_determinant,
        injective,
    })
}

/// `min_J 1 / ‖(π_J ∘ A)^{-1}‖_{1→1}` over all 2-subsets `J ⊆ [n]`.
///
/// Since `‖π_I z‖₁ ≥ ‖π_J z‖₁` for `J ⊆ I`, this bounds
/// `‖π_I(Au - Av)‖₁ / ‖u - v‖₁` from below for every index set of size
/// `k ≥ 2`. The induced norm of the inverse is the largest column sum of
/// the adjugate over `|det|`.
pub fn separation_constant(basis: &InclinedBasis) -> Result<Rational> {
    let mut best: Option<Rational> = None;
    for a in 1..=basis.n {
        for b in a + 1..=basis.n {
            let [[p, q], [r, s]] = basis.minor(a, b);
            let det = p * s - q * r;
            if det == 0 {
                return Err(Error::ConstructionFailure(format!(
                    "projection onto [{a},{b}] is singular"
                )));
            }
            let col = (p.abs() + q.abs()).max(r.abs() + s.abs());
            let c = Rational::new(det.abs(), col);
            best = Some(best.map_or(c, |b: Rational| b.min(c)));
        }
    }
    best.ok_or_else(|| Error::invalid("need at least two coordinates"))
}

/// Checks `‖π_I(Au - Av)‖₁ ≥ c ‖u - v‖₁` exactly.
pub fn separation_holds(basis: &InclinedBasis, i: &IndexSet, u: (i64, i64), v: (i64, i64)) -> bool {
    let d = basis.apply(u.0 - v.0, u.1 - v.1);
    let lhs: i64 = i.members().iter().map(|&m| d[m - 1].abs()).sum();
    let rhs = basis.separation * Rational::from_integer((u.0 - v.0).abs() + (u.1 - v.1).abs());
    Rational::from_integer(lhs) >= rhs
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaGadget {
    pub base: (i64, i64),
    /// Staircase from `A(x, y)` to `A(x + 1, y)` followed by the staircase
    /// from `A(x, y)` to `A(x, y + 1)`, without the repeated start.
    pub sites: Vec<Site>,
}

impl GammaGadget {
    /// The path `A(x + 1, y) → A(x, y)` when `first`, else
    /// `A(x, y) → A(x, y + 1)`. Each has `R + 1` sites.
    pub fn staircase(&self, first: bool) -> &[Site] {
        let mid = self.sites.len() / 2;
        if first {
            &self.sites[..=mid]
        } else {
            &self.sites[mid..]
        }
    }
}

fn staircase(start: &Site, steps: &[i64]) -> Vec<Site> {
    let mut out = vec![start.clone()];
    let mut cur = start.clone();
    for (a, &s) in steps.iter().enumerate() {
        for _ in 0..s.abs() {
            cur = cur.shifted(a + 1, s.signum());
            out.push(cur.clone());
        }
    }
    out
}

/// `Γ(x, y)`: the translate by `A(x, y)` of the two coordinate staircases
/// `o → w1` and `o → w2`.
pub fn gamma_gadget(basis: &InclinedBasis, x: i64, y: i64) -> GammaGadget {
    let base = basis.apply(x, y);
    let mut first = staircase(&base, &basis.w1);
    let second = staircase(&base, &basis.w2);
    // `first` ends at A(x+1, y); store it reversed so the whole list is a
    // single path A(x+1, y) → A(x, y) → A(x, y+1).
    first.reverse();
    first.extend(second.into_iter().skip(1));
    GammaGadget {
        base: (x, y),
        sites: first,
    }
}

/// 1 iff every site of `Γ(x, y)` is open in the view.
pub fn eta(view: &FieldView<'_>, basis: &InclinedBasis, x: i64, y: i64) -> bool {
    gamma_gadget(basis, x, y)
        .sites
        .iter()
        .all(|s| view.is_open(s.coords()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCParams {
    /// Dependence range `3R/c`.
    pub chi: Rational,
    /// Lower bound on `P(η = 1)`, `(∏ p_I)^((2R+1)^k)`.
    pub s: f64,
}

pub fn class_c_params(basis: &InclinedBasis, params: &ParamVector) -> Result<ClassCParams> {
    if params.n() != basis.n {
        return Err(Error::invalid("parameter dimension does not match the basis"));
    }
    Ok(ClassCParams {
        chi: Rational::from_integer(3 * basis.radius) / basis.separation,
        s: box_all_open_probability(params, basis.radius as u64),
    })
}

/// True iff the projected l1 balls of radius `R` around `π_I(Au)` and
/// `π_I(Av)` are disjoint for every `I ∈ 𝓘(k; n)`.
pub fn projected_balls_disjoint(basis: &InclinedBasis, k: usize, u: (i64, i64), v: (i64, i64)) -> bool {
    let d = basis.apply(u.0 - v.0, u.1 - v.1);
    IndexSet::all(k, basis.n).iter().all(|i| {
        let dist: i64 = i.members().iter().map(|&m| d[m - 1].abs()).sum();
        dist > 2 * basis.radius
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::HyperplaneField;
    use crate::lattice::project_coords;
    use crate::rng::audit_rng;
    use rand::Rng;
    use std::collections::HashSet;

    #[test]
    fn kernel_vectors() {
        let m = kernel_maps(3).unwrap();
        assert_eq!(m.v1, vec![-1, 1, 0]);
        assert_eq!(m.v2, vec![-1, 0, 1]);
        assert_eq!(m.apply_l(&m.v1), vec![0]);
        let m = kernel_maps(4).unwrap();
        assert_eq!(m.v1, vec![-1, -1, 1, 0]);
        assert_eq!(m.v2, vec![-1, -2, 0, 1]);
        for n in 3..=10 {
            let m = kernel_maps(n).unwrap();
            assert!(m.apply_l(&m.v1).iter().all(|&y| y == 0));
            assert!(m.apply_l(&m.v2).iter().all(|&y| y == 0));
        }
        assert!(kernel_maps(2).is_err());
    }

    #[test]
    fn basis_examples() {
        let b = build_inclined_basis(3).unwrap();
        assert_eq!(b.w1, vec![-4, 4, 0]);
        assert_eq!(b.w2, vec![-2, -2, 4]);
        assert_eq!(b.radius, 8);
        assert_eq!(b.separation, Rational::new(8, 3));
        let b = build_inclined_basis(4).unwrap();
        assert_eq!(b.w1, vec![-6, -6, 6, 0]);
        assert_eq!(b.w2, vec![0, -6, -6, 6]);
        assert_eq!(b.radius, 18);
    }

    #[test]
    fn basis_invariants_up_to_eight() {
        for n in 3..=8 {
            let b = build_inclined_basis(n).unwrap();
            assert_eq!(b.inner_product(), 0);
            assert_eq!(b.w1.iter().map(|x| x.abs()).sum::<i64>(), b.radius);
            assert_eq!(b.w2.iter().map(|x| x.abs()).sum::<i64>(), b.radius);
            assert!(b.separation > Rational::zero());
            let maps = kernel_maps(n).unwrap();
            assert!(maps.apply_l(&b.w1).iter().all(|&y| y == 0));
            assert!(maps.apply_l(&b.w2).iter().all(|&y| y == 0));
        }
    }

    #[test]
    fn factorization_identity() {
        for n in 3..=8 {
            let b = build_inclined_basis(n).unwrap();
            let h = factorization_matrix(n).unwrap();
            let maps = kernel_maps(n).unwrap();
            for (x, y) in [(1, 0), (0, 1), (3, -2), (-5, 7)] {
                let hx = h[0][0] * x + h[0][1] * y;
                let hy = h[1][0] * x + h[1][1] * y;
                assert!(hx.is_integer() && hy.is_integer());
                let via_u = maps.apply_u(hx.to_integer(), hy.to_integer());
                assert_eq!(Site(via_u.into_iter().collect()), b.apply(x, y));
            }
            assert_ne!(h[0][0] * h[1][1], Rational::zero());
        }
    }

    #[test]
    fn euclidean_scaling_is_not_integral() {
        // with the Euclidean norm the scale factor 2‖w̃2‖₂ for n = 3 would be
        // 2 sqrt(3/2), irrational
        let maps = kernel_maps(3).unwrap();
        let t2: Vec<Rational> = maps
            .v2
            .iter()
            .zip(&maps.v1)
            .map(|(&b, &a)| Rational::from_integer(b) - Rational::new(1, 2) * a)
            .collect();
        let sq: Rational = t2.iter().map(|x| x * x).sum();
        assert_eq!(sq, Rational::new(3, 2));
        let four_sq = sq * 4;
        assert!(four_sq.is_integer());
        let v = four_sq.to_integer();
        assert_ne!((v as f64).sqrt().round() as i64 * (v as f64).sqrt().round() as i64, v);
    }

    #[test]
    fn injectivity_examples() {
        let b = build_inclined_basis(4).unwrap();
        let r = injectivity_certificate(&b, &IndexSet::new(&[3, 4], 4).unwrap()).unwrap();
        assert_eq!(r.determinants, vec![(3, 4, 36)]);
        assert!(r.injective);
        let full = injectivity_certificate(&b, &IndexSet::new(&[1, 2, 3, 4], 4).unwrap()).unwrap();
        assert!(full.injective && full.determinants.len() == 6);
        let b3 = build_inclined_basis(3).unwrap();
        for i in IndexSet::all(2, 3) {
            assert!(injectivity_certificate(&b3, &i).unwrap().min_abs_determinant > 0);
        }
        assert!(injectivity_certificate(&b3, &IndexSet::new(&[2], 3).unwrap()).is_err());
    }

    #[test]
    fn projections_are_injective_on_a_window() {
        for n in 3..=5 {
            let b = build_inclined_basis(n).unwrap();
            for i in IndexSet::all(2, n) {
                let mut seen = HashSet::new();
                for x in -6..=6 {
                    for y in -6..=6 {
                        assert!(seen.insert(project_coords(b.apply(x, y).coords(), &i)));
                    }
                }
            }
        }
    }

    #[test]
    fn separation_sampled() {
        let mut rng = audit_rng(31);
        for n in 3..=6 {
            let b = build_inclined_basis(n).unwrap();
            let sets = IndexSet::all(2, n);
            for _ in 0..2000 {
                let u = (rng.gen_range(-1000..=1000), rng.gen_range(-1000..=1000));
                let v = (rng.gen_range(-1000..=1000), rng.gen_range(-1000..=1000));
                assert!(sets.iter().all(|i| separation_holds(&b, i, u, v)));
            }
            assert!(sets.iter().all(|i| separation_holds(&b, i, (4, 4), (4, 4))));
        }
    }

    #[test]
    fn gamma_structure() {
        for n in 3..=6 {
            let b = build_inclined_basis(n).unwrap();
            let g = gamma_gadget(&b, 0, 0);
            let origin = Site(smallvec::smallvec![0; n]);
            assert!(g.sites.contains(&origin));
            assert_eq!(g.sites.first().unwrap(), &b.apply(1, 0));
            assert_eq!(g.sites.last().unwrap(), &b.apply(0, 1));
            for w in g.sites.windows(2) {
                assert_eq!(w[0].l1_distance(&w[1]), 1);
            }
            assert!(g.sites.iter().all(|s| s.l1_norm() as i64 <= b.radius));
            assert_eq!(g.sites.len() as i64, 2 * b.radius + 1);
            let g2 = gamma_gadget(&b, 3, -2);
            let shift = b.apply(3, -2);
            let moved: Vec<Site> = g.sites.iter().map(|s| s.add(&shift)).collect();
            assert_eq!(moved, g2.sites);
            assert_eq!(g.staircase(true).last().unwrap(), &origin);
            assert_eq!(g.staircase(false).len() as i64, b.radius + 1);
        }
    }

    #[test]
    fn gadgets_chain_into_a_connected_graph() {
        let b = build_inclined_basis(4).unwrap();
        for x in -3..3 {
            for y in -3..3 {
                let g: HashSet<Site> = gamma_gadget(&b, x, y).sites.into_iter().collect();
                let right: HashSet<Site> = gamma_gadget(&b, x + 1, y).sites.into_iter().collect();
                let up: HashSet<Site> = gamma_gadget(&b, x, y + 1).sites.into_iter().collect();
                assert!(!g.is_disjoint(&right));
                assert!(!g.is_disjoint(&up));
            }
        }
    }

    #[test]
    fn eta_trivial_cases() {
        let b = build_inclined_basis(3).unwrap();
        let ones = HyperplaneField::new(0, ParamVector::uniform(3, 2, 1.0).unwrap());
        let v = FieldView::full(&ones);
        assert!((-5..5).all(|x| eta(&v, &b, x, 2 * x)));
        let f = HyperplaneField::new(4, ParamVector::uniform(3, 2, 0.9).unwrap());
        let v = FieldView::full(&f);
        for x in 0..50 {
            let g = gamma_gadget(&b, x, 0);
            let all = g.sites.iter().all(|s| v.omega(s).unwrap());
            assert_eq!(eta(&v, &b, x, 0), all);
        }
    }

    #[test]
    fn class_c_values() {
        let b = build_inclined_basis(3).unwrap();
        let ones = ParamVector::uniform(3, 2, 1.0).unwrap();
        let c = class_c_params(&b, &ones).unwrap();
        assert_eq!(c.s, 1.0);
        assert_eq!(c.chi, Rational::from_integer(9));
        let pv = ParamVector::uniform(3, 2, 0.999).unwrap();
        let c = class_c_params(&b, &pv).unwrap();
        assert!((c.s / 0.999f64.powi(3 * 289) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_gadgets_use_disjoint_plane_bits() {
        for n in 3..=5 {
            let b = build_inclined_basis(n).unwrap();
            let chi = class_c_params(&b, &ParamVector::uniform(n, 2, 1.0).unwrap()).unwrap().chi;
            for dx in -20i64..=20 {
                for dy in -20i64..=20 {
                    if Rational::from_integer(dx.abs() + dy.abs()) < chi {
                        continue;
                    }
                    assert!(projected_balls_disjoint(&b, 2, (dx, dy), (0, 0)));
                    let g0 = gamma_gadget(&b, 0, 0);
                    let g1 = gamma_gadget(&b, dx, dy);
                    for i in IndexSet::all(2, n) {
                        let p0: HashSet<_> = g0.sites.iter().map(|s| project_coords(s.coords(), &i)).collect();
                        assert!(g1.sites.iter().all(|s| !p0.contains(&project_coords(s.coords(), &i))));
                    }
                }
            }
        }
    }

    #[test]
    fn eta_far_pairs_uncorrelated() {
        let b = build_inclined_basis(3).unwrap();
        let f = HyperplaneField::new(55, ParamVector::uniform(3, 2, 0.97).unwrap());
        let v = FieldView::full(&f);
        let m = 10_000i64;
        let (mut both, mut a, mut c) = (0u64, 0u64, 0u64);
        for t in 0..m {
            let u = (t % 100 * 20, t / 100 * 20);
            let w = (u.0 + 9, u.1 + 1);
            let (x, y) = (eta(&v, &b, u.0, u.1), eta(&v, &b, w.0, w.1));
            both += (x && y) as u64;
            a += x as u64;
            c += y as u64;
        }
        let mf = m as f64;
        let (pa, pc) = (a as f64 / mf, c as f64 / mf);
        let cov = both as f64 / mf - pa * pc;
        let sd = (pa * (1.0 - pa) * pc * (1.0 - pc) / mf).sqrt();
        assert!(cov.abs() <= 3.0 * sd, "cov {cov}, sd {sd}");
    }
}
