//! Binomial intervals, decay-curve estimation and model selection.

use serde::{Deserialize, Serialize};

use crate::cluster::max_reach_opt;
use crate::error::{Error, Result};
use crate::field::{FieldView, HyperplaneField, ParamVector};
use crate::lattice::{binomial, IndexSet};
use crate::parallel::map_indices;
use crate::rng::derive_seed;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes / trials` at normal quantile `z`.
/// Returns `(0, 1)` for zero trials.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// One diagnostic record: an event, how often it was observed, and its
/// Wilson 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFrequency {
    pub event: String,
    pub trials: u64,
    pub successes: u64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl EventFrequency {
    pub fn new(event: impl Into<String>, trials: u64, successes: u64) -> Self {
        let (ci_lo, ci_hi) = wilson(successes, trials, Z95);
        EventFrequency {
            event: event.into(),
            trials,
            successes,
            ci_lo,
            ci_hi,
        }
    }

    pub fn frequency(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

// ---------------------------------------------------------------------------
// Decay curves

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEntry {
    pub k: u64,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl DecayEntry {
    pub fn new(k: u64, trials: u64, successes: u64) -> Self {
        let (ci_lo, ci_hi) = wilson(successes, trials, Z95);
        DecayEntry {
            k,
            trials,
            successes,
            p_hat: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            ci_lo,
            ci_hi,
        }
    }
}

/// Connection frequencies on a ladder of radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub entries: Vec<DecayEntry>,
    /// `Some(m)` for the truncated event `K <= D < m K`.
    pub truncation: Option<u64>,
}

impl DecayCurve {
    /// A curve from exact frequencies, for fitting synthetic data.
    pub fn synthetic(points: &[(u64, f64)], trials: u64) -> Result<Self> {
        let entries = points
            .iter()
            .map(|&(k, p)| {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(format!("frequency {p} outside [0,1]")));
                }
                let successes = (p * trials as f64).round() as u64;
                let mut e = DecayEntry::new(k, trials, successes);
                e.p_hat = p;
                Ok(e)
            })
            .collect::<Result<Vec<_>>>()?;
        let c = DecayCurve {
            entries,
            truncation: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.entries.windows(2) {
            if w[0].k >= w[1].k {
                return Err(Error::invalid("radii must be strictly increasing"));
            }
        }
        if self.entries.iter().any(|e| e.successes > e.trials) {
            return Err(Error::invalid("more successes than trials"));
        }
        Ok(())
    }
}

/// Estimates `P[o ↔ ∂B(K)]` (or, with `truncation = Some(m)`, the
/// probability that the origin cluster reaches `∂B(K)` but not `∂B(mK)`)
/// for every `K` in `ks`.
///
/// Trial `i` uses the field seeded by `derive_seed(seed, i)` for every `K`,
/// so the untruncated curve is monotone sample by sample.
pub fn estimate_decay_curve(
    params: &ParamVector,
    ks: &[u64],
    trials: u64,
    seed: u64,
    truncation: Option<u64>,
    workers: usize,
) -> Result<DecayCurve> {
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("radii must be positive and strictly increasing"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    if let Some(m) = truncation {
        if m < 2 {
            return Err(Error::invalid("the truncation multiple must be at least 2"));
        }
    }
    let k_max = *ks.last().expect("nonempty");
    let limit = truncation.map_or(k_max, |m| m * k_max);
    let hist = reach_histogram(params, limit, trials, seed, workers);
    let entries = ks
        .iter()
        .map(|&k| {
            let hi = truncation.map_or(limit, |m| m * k - 1) as usize;
            let hits = hist[k as usize..=hi.min(limit as usize)].iter().sum();
            DecayEntry::new(k, trials, hits)
        })
        .collect();
    Ok(DecayCurve {
        entries,
        truncation,
    })
}

const CHUNK: u64 = 1 << 14;

/// `hist[d]` counts trials whose origin cluster has maximal l∞ norm `d`
/// (saturated at `limit`); closed origins are not counted.
///
/// Trials are processed in fixed chunks that each reuse one field, so the
/// memory use does not grow with `trials`.
pub fn reach_histogram(
    params: &ParamVector,
    limit: u64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Vec<u64> {
    let chunks = trials.div_ceil(CHUNK);
    let zero = vec![0i64; params.k()];
    let planes = params.ranked().len();
    let parts = map_indices(chunks, workers, |c| {
        let mut hist = vec![0u64; limit as usize + 1];
        let mut field = HyperplaneField::new(0, params.clone());
        for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
            field.reseed(derive_seed(seed, i));
            // Most subcritical trials end here, before any allocation.
            if !(0..planes).all(|r| field.bit_ranked(r, &zero)) {
                continue;
            }
            if let Some(d) = max_reach_opt(&FieldView::full(&field), limit) {
                hist[d as usize] += 1;
            }
        }
        hist
    });
    let mut total = vec![0u64; limit as usize + 1];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

// ---------------------------------------------------------------------------
// Fits

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecayModel {
    /// `p(K) = c K^{-α}`.
    PowerLaw,
    /// `p(K) = c e^{-λ K}`.
    Exponential,
}

impl DecayModel {
    fn regressor(self, k: u64) -> f64 {
        match self {
            DecayModel::PowerLaw => -(k as f64).ln(),
            DecayModel::Exponential => -(k as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: DecayModel,
    pub amplitude: f64,
    /// `α` for the power law, `λ` for the exponential.
    pub exponent: f64,
    /// Pearson statistic of the fitted frequencies.
    pub gof: f64,
    /// `2·2 + deviance`, with the deviance against the saturated binomial model.
    pub aic: f64,
    pub log_likelihood: f64,
    pub points: usize,
}

/// `(1-y) ln(1-μ)` style terms vanish when their weight does.
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Binomial log-likelihood relative to the saturated model (always `<= 0`).
fn rel_loglik(points: &[(f64, f64, f64)], a: f64, b: f64) -> f64 {
    points
        .iter()
        .map(|&(g, y, n)| {
            let mu = (a + b * g).exp();
            if mu >= 1.0 && y < 1.0 {
                return f64::NEG_INFINITY;
            }
            let mu = mu.min(1.0);
            n * (xlogy(y, mu) - xlogy(y, y) + xlogy(1.0 - y, 1.0 - mu) - xlogy(1.0 - y, 1.0 - y))
        })
        .sum()
}

/// Weighted least squares of `ln y` on the regressor, weights `n y / (1-y)`
/// (inverse delta-method variance), falling back to `n` when `y = 1`.
fn wls_start(points: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    let pos: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(g, y, n)| {
            let w = if y < 1.0 { n * y / (1.0 - y) } else { n };
            (g, y.ln(), w.max(1e-12))
        })
        .collect();
    let sw: f64 = pos.iter().map(|p| p.2).sum();
    let mg = pos.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pos.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pos.iter().map(|p| p.2 * (p.0 - mg).powi(2)).sum();
    let sxy: f64 = pos.iter().map(|p| p.2 * (p.0 - mg) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mg, b))
}

/// Newton ascent on the binomial likelihood of `ln μ = a + b g`, keeping
/// `μ < 1` wherever the data are below one.
fn newton_refine(points: &[(f64, f64, f64)], mut a: f64, mut b: f64) -> (f64, f64) {
    // Move a feasible start inside the constraint set.
    let top = points
        .iter()
        .filter(|p| p.1 < 1.0)
        .map(|p| a + b * p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    if top >= 0.0 {
        a -= top + 1e-9;
    }
    let mut ll = rel_loglik(points, a, b);
    for _ in 0..200 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(g, y, n) in points {
            let mu = (a + b * g).exp().min(1.0 - 1e-15);
            let d1 = n * (y - mu) / (1.0 - mu);
            let d2 = n * mu * (y - 1.0) / (1.0 - mu).powi(2);
            ga += d1;
            gb += d1 * g;
            haa += d2;
            hab += d2 * g;
            hbb += d2 * g * g;
        }
        let det = haa * hbb - hab * hab;
        let (da, db) = if det.abs() > 1e-300 && haa < 0.0 {
            ((-hbb * ga + hab * gb) / det, (hab * ga - haa * gb) / det)
        } else {
            (ga * 1e-6, gb * 1e-6)
        };
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-12 {
            let (na, nb) = (a + step * da, b + step * db);
            let nll = rel_loglik(points, na, nb);
            if nll.is_finite() && nll >= ll {
                let gain = nll - ll;
                a = na;
                b = nb;
                ll = nll;
                improved = gain > 1e-13 * (1.0 + ll.abs());
                break;
            }
            step *= 0.5;
        }
        if !improved || (da.abs() + db.abs()) * step < 1e-14 {
            break;
        }
    }
    (a, b)
}

fn fit(curve: &DecayCurve, model: DecayModel) -> Result<FitReport> {
    curve.validate()?;
    let points: Vec<(f64, f64, f64)> = curve
        .entries
        .iter()
        .map(|e| (model.regressor(e.k), e.p_hat, e.trials as f64))
        .collect();
    let positive = points.iter().filter(|p| p.1 > 0.0).count();
    if positive < 4 {
        return Err(Error::invalid(format!(
            "a fit needs at least 4 radii with positive frequency, got {positive}"
        )));
    }
    let (a, b) = if points.iter().all(|p| p.1 >= 1.0) {
        (0.0, 0.0)
    } else {
        let (a0, b0) = wls_start(&points).ok_or_else(|| Error::invalid("degenerate radius ladder"))?;
        newton_refine(&points, a0, b0)
    };
    let ll = rel_loglik(&points, a, b);
    let gof = points
        .iter()
        .map(|&(g, y, n)| {
            let mu = (a + b * g).exp().min(1.0);
            n * (y - mu).powi(2) / (mu * (1.0 - mu)).max(1e-12)
        })
        .sum();
    if !(a.is_finite() && b.is_finite() && ll.is_finite()) {
        return Err(Error::invalid("fit did not converge to finite parameters"));
    }
    Ok(FitReport {
        model,
        amplitude: a.exp(),
        exponent: b,
        gof,
        aic: 4.0 - 2.0 * ll,
        log_likelihood: ll,
        points: points.len(),
    })
}

/// `p(K) ≈ c K^{-α}`; fitted exponents are empirical decay rates.
pub fn fit_power_law(curve: &DecayCurve) -> Result<FitReport> {
    fit(curve, DecayModel::PowerLaw)
}

/// `p(K) ≈ c e^{-λ K}`.
pub fn fit_exponential(curve: &DecayCurve) -> Result<FitReport> {
    fit(curve, DecayModel::Exponential)
}

pub const DEFAULT_AIC_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    PowerLaw,
    Exponential,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub verdict: Verdict,
    pub margin: f64,
    /// `aic(exponential) - aic(power law)`; positive favours the power law.
    pub delta_aic: Option<f64>,
    pub power_law: Option<FitReport>,
    pub exponential: Option<FitReport>,
    pub reason: String,
}

/// Picks the model with the lower AIC if it wins by at least `margin`.
pub fn model_select(curve: &DecayCurve, margin: f64) -> ModelSelection {
    let pl = fit_power_law(curve);
    let ex = fit_exponential(curve);
    let (pl, ex) = match (pl, ex) {
        (Ok(p), Ok(e)) => (p, e),
        (p, e) => {
            let reason = [p.as_ref().err(), e.as_ref().err()]
                .into_iter()
                .flatten()
                .map(|e| e.to_string())
                .next()
                .unwrap_or_default();
            return ModelSelection {
                verdict: Verdict::Inconclusive,
                margin,
                delta_aic: None,
                power_law: p.ok(),
                exponential: e.ok(),
                reason,
            };
        }
    };
    let delta = ex.aic - pl.aic;
    let (verdict, reason) = if delta >= margin {
        (Verdict::PowerLaw, format!("power law ahead by {delta:.3}"))
    } else if -delta >= margin {
        (Verdict::Exponential, format!("exponential ahead by {:.3}", -delta))
    } else {
        (Verdict::Inconclusive, format!("AIC difference {delta:.3} within margin {margin}"))
    };
    ModelSelection {
        verdict,
        margin,
        delta_aic: Some(delta),
        power_law: Some(pl),
        exponential: Some(ex),
        reason,
    }
}

// ---------------------------------------------------------------------------
// Phase scans

/// Site-percolation thresholds of `Z^d` used only to tag parameter regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    /// `values[d - 2]` is `p_c(Z^d)` for `d = 2, 3, …`.
    pub values: Vec<f64>,
    /// Open-site probability above which a vector counts as near one.
    pub near_one: f64,
}

impl Default for CriticalValues {
    fn default() -> Self {
        CriticalValues {
            values: vec![0.592746, 0.311608, 0.196889, 0.14081, 0.109017, 0.0889511],
            near_one: 0.99,
        }
    }
}

impl CriticalValues {
    pub fn pc(&self, d: usize) -> Option<f64> {
        d.checked_sub(2).and_then(|i| self.values.get(i)).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Every plane parameter high enough that `E ω(o)` exceeds the near-one level.
    SupercriticalNearOne,
    /// `k = 2`; for some height axis `a`, every `p_{a,j}` exceeds `p_c(Z^2)`
    /// and some plane avoiding `a` has `p < 1`: power-law lower bound.
    PowerLawLowerBound,
    /// One `p_I < p_c(Z^k)` and the `n-k` planes sharing a fixed
    /// `(k-1)`-subset of `I` with it all have `p < 1`.
    SubcriticalSharedFace,
    /// `k | n` and a partition of `[n]` into planes all below `p_c(Z^k)`.
    SubcriticalPartition,
    /// At least `C(n-1, k) + 1` planes below `p_c(Z^k)`: exponential decay.
    ExponentialDecay,
}

fn partition_below(n: usize, k: usize, below: &dyn Fn(&IndexSet) -> bool) -> bool {
    fn go(free: &[usize], k: usize, n: usize, below: &dyn Fn(&IndexSet) -> bool) -> bool {
        let Some((&first, rest)) = free.split_first() else {
            return true;
        };
        // Choose k-1 companions for the smallest free coordinate.
        let mut pick = Vec::with_capacity(k);
        fn choose(
            rest: &[usize],
            need: usize,
            pick: &mut Vec<usize>,
            k: usize,
            n: usize,
            first: usize,
            all: &[usize],
            below: &dyn Fn(&IndexSet) -> bool,
        ) -> bool {
            if need == 0 {
                let mut m = pick.clone();
                m.push(first);
                m.sort_unstable();
                let set = IndexSet::new(&m, n).expect("valid subset");
                if !below(&set) {
                    return false;
                }
                let left: Vec<usize> = all.iter().copied().filter(|c| !m.contains(c)).collect();
                return go(&left, k, n, below);
            }
            for (i, &c) in rest.iter().enumerate() {
                pick.push(c);
                if choose(&rest[i + 1..], need - 1, pick, k, n, first, all, below) {
                    return true;
                }
                pick.pop();
            }
            false
        }
        choose(rest, k - 1, &mut pick, k, n, first, free, below)
    }
    n % k == 0 && go(&(1..=n).collect::<Vec<_>>(), k, n, below)
}

/// Every regime whose hypotheses the vector satisfies, by arithmetic only.
pub fn classify_regimes(params: &ParamVector, refs: &CriticalValues) -> Vec<Regime> {
    let (n, k) = (params.n(), params.k());
    let entries = params.entries();
    let p = |s: &IndexSet| params.get(s).unwrap_or(1.0);
    let mut out = Vec::new();
    if params.open_probability() >= refs.near_one {
        out.push(Regime::SupercriticalNearOne);
    }
    if k == 2 {
        if let Some(pc2) = refs.pc(2) {
            let holds = entries.iter().all(|(_, q)| *q > 0.0)
                && (1..=n).any(|a| {
                    let through = entries.iter().filter(|(s, _)| s.contains(a));
                    let avoid = entries.iter().filter(|(s, _)| !s.contains(a));
                    through.clone().all(|(_, q)| *q > pc2) && avoid.clone().any(|(_, q)| *q < 1.0)
                });
            if holds {
                out.push(Regime::PowerLawLowerBound);
            }
        }
    }
    if let Some(pck) = refs.pc(k) {
        let below = |s: &IndexSet| p(s) < pck;
        let shared_face = entries.iter().any(|(i, q)| {
            *q < pck
                && i.members().iter().any(|drop| {
                    let face: Vec<usize> = i.members().iter().copied().filter(|m| m != drop).collect();
                    (1..=n).filter(|m| !i.contains(*m)).all(|m| {
                        let mut j = face.clone();
                        j.push(m);
                        j.sort_unstable();
                        IndexSet::new(&j, n).map(|j| p(&j) < 1.0).unwrap_or(false)
                    })
                })
        });
        if shared_face {
            out.push(Regime::SubcriticalSharedFace);
        }
        if partition_below(n, k, &below) {
            out.push(Regime::SubcriticalPartition);
        }
        let count = entries.iter().filter(|(s, _)| below(s)).count() as u64;
        if count >= binomial(n as u64 - 1, k as u64) + 1 {
            out.push(Regime::ExponentialDecay);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub probabilities: Vec<f64>,
    pub open_probability: f64,
    pub regimes: Vec<Regime>,
    pub connection: EventFrequency,
}

/// Frequency of `[o ↔ ∂B(K_probe)]` for every parameter vector, with regime tags.
pub fn phase_scan(
    grid: &[ParamVector],
    k_probe: u64,
    trials: u64,
    seed: u64,
    workers: usize,
    refs: &CriticalValues,
) -> Result<Vec<PhaseRow>> {
    grid.iter()
        .map(|params| {
            let curve = estimate_decay_curve(params, &[k_probe], trials, seed, None, workers)?;
            let e = &curve.entries[0];
            Ok(PhaseRow {
                probabilities: params.ranked().to_vec(),
                open_probability: params.open_probability(),
                regimes: classify_regimes(params, refs),
                connection: EventFrequency::new(format!("reach_{k_probe}"), e.trials, e.successes),
            })
        })
        .collect()
}
