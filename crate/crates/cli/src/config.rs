//! Experiment configuration: a TOML file with one section per subcommand.
//!
//! Every semantic error is reported with the line it comes from. Missing
//! keys fall back to defaults, so an empty file (or no file) is valid.

use std::fmt;
use std::ops::Range;
use std::path::Path;

use hyperperc::stats::Verdict;
use hyperperc::{IndexSet, ParamVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.file, l, self.message),
            None => write!(f, "{}: {}", self.file, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: Option<Spanned<i64>>,
    k: Option<Spanned<i64>>,
    seed: Option<Spanned<i64>>,
    default_p: Option<Spanned<f64>>,
    #[serde(default)]
    params: Vec<Spanned<RawParam>>,
    #[serde(default)]
    decay: RawDecay,
    #[serde(default)]
    phase: RawPhase,
    #[serde(default)]
    verify: RawVerify,
    #[serde(default)]
    renorm: RawRenorm,
    #[serde(default)]
    lift: RawLift,
    #[serde(default)]
    basis: RawBasis,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParam {
    set: Vec<i64>,
    p: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDecay {
    radii: Option<Spanned<Vec<i64>>>,
    trials: Option<Spanned<i64>>,
    truncation: Option<Spanned<i64>>,
    margin: Option<Spanned<f64>>,
    expect: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPhase {
    probe: Option<Spanned<i64>>,
    trials: Option<Spanned<i64>>,
    grid: Option<Spanned<Vec<f64>>>,
    critical: Option<Spanned<Vec<f64>>>,
    near_one: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    bt_max_sites: Option<Spanned<i64>>,
    walk_instances: Option<Spanned<i64>>,
    separation_pairs: Option<Spanned<i64>>,
    independence_steps: Option<Spanned<i64>>,
    independence_radius: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRenorm {
    scale: Option<Spanned<i64>>,
    side: Option<Spanned<i64>>,
    c_o: Option<Spanned<f64>>,
    cert_radius: Option<Spanned<i64>>,
    trials: Option<Spanned<i64>>,
    calibration_trials: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawLift {
    input: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBasis {
    n: Option<Spanned<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecaySection {
    pub radii: Vec<u64>,
    pub trials: u64,
    /// `M / K` for the truncated event; `None` for `[o ↔ ∂B(K)]`.
    pub truncation: Option<u64>,
    pub margin: f64,
    /// When set, a different verdict is a failed statistical check.
    pub expect: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSection {
    pub probe: u64,
    pub trials: u64,
    /// Uniform parameter values scanned in addition to the configured vector.
    pub grid: Vec<f64>,
    pub critical: Vec<f64>,
    pub near_one: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySection {
    pub bt_max_sites: usize,
    pub walk_instances: u64,
    pub separation_pairs: u64,
    pub independence_steps: u64,
    pub independence_radius: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenormSection {
    pub scale: u64,
    /// `None` calibrates the box side by doubling.
    pub side: Option<u64>,
    pub c_o: f64,
    pub cert_radius: u64,
    pub trials: u64,
    pub calibration_trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftSection {
    pub input: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisSection {
    pub n: usize,
}

/// Fully resolved configuration. The seed is kept apart so that the hash
/// names the experiment and the seed names the realisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    /// `p_I` in colex order of the index sets.
    pub probabilities: Vec<f64>,
    pub decay: DecaySection,
    pub phase: PhaseSection,
    pub verify: VerifySection,
    pub renorm: RenormSection,
    pub lift: LiftSection,
    pub basis: BasisSection,
}

#[derive(Debug)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn params(&self) -> ParamVector {
        ParamVector::from_ranked(self.n, self.k, self.probabilities.clone())
            .expect("validated at load time")
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }
}

/// Short hash of a parameter vector for CSV rows.
pub fn params_hash(p: &ParamVector) -> String {
    let json = serde_json::to_string(p).expect("params serialize");
    format!("{:x}", Sha256::digest(json.as_bytes()))[..16].to_string()
}

pub const DEFAULT_SEED: u64 = 20240101;

pub fn load(path: Option<&Path>) -> Result<Loaded, ConfigError> {
    match path {
        None => parse("<defaults>", ""),
        Some(p) => {
            let name = p.display().to_string();
            let src = std::fs::read_to_string(p).map_err(|e| ConfigError {
                file: name.clone(),
                line: None,
                message: format!("cannot read: {e}"),
            })?;
            parse(&name, &src)
        }
    }
}

struct Ctx<'a> {
    file: &'a str,
    src: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.src.len());
        self.src[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn err(&self, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            file: self.file.to_string(),
            line: span.map(|s| self.line(s)),
            message: message.into(),
        }
    }

    fn int(&self, v: &Option<Spanned<i64>>, key: &str, default: i64, min: i64) -> Result<i64, ConfigError> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() >= min => Ok(*s.get_ref()),
            Some(s) => Err(self.err(Some(s.span()), format!("{key} must be at least {min}, got {}", s.get_ref()))),
        }
    }

    fn prob(&self, v: &Spanned<f64>, key: &str) -> Result<f64, ConfigError> {
        let p = *v.get_ref();
        if (0.0..=1.0).contains(&p) {
            Ok(p)
        } else {
            Err(self.err(Some(v.span()), format!("{key} = {p} is not a probability")))
        }
    }
}

pub fn parse(file: &str, src: &str) -> Result<Loaded, ConfigError> {
    let cx = Ctx { file, src };
    let raw: RawConfig = toml::from_str(src).map_err(|e| {
        let msg = e.message().trim().to_string();
        cx.err(e.span(), msg)
    })?;

    let n = cx.int(&raw.n, "n", 3, 3)? as usize;
    let k = cx.int(&raw.k, "k", 2, 2)? as usize;
    if k > n - 1 {
        let span = raw.k.as_ref().or(raw.n.as_ref()).map(|s| s.span());
        return Err(cx.err(span, format!("need 2 <= k <= n - 1, got n = {n}, k = {k}")));
    }
    let seed = match &raw.seed {
        None => DEFAULT_SEED,
        Some(s) if *s.get_ref() >= 0 => *s.get_ref() as u64,
        Some(s) => return Err(cx.err(Some(s.span()), "seed must be non-negative")),
    };
    let default_p = match &raw.default_p {
        None => 0.8,
        Some(v) => cx.prob(v, "default_p")?,
    };
    let mut params = ParamVector::uniform(n, k, default_p).expect("n and k checked");
    let mut seen = Vec::new();
    for entry in &raw.params {
        let span = Some(entry.span());
        let e = entry.get_ref();
        let members: Vec<usize> = e
            .set
            .iter()
            .map(|&m| usize::try_from(m).map_err(|_| cx.err(span.clone(), format!("index {m} is negative"))))
            .collect::<Result<_, _>>()?;
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cx.err(span, format!("index set {:?} must be sorted and distinct", e.set)));
        }
        let set = IndexSet::new(&members, n).map_err(|err| cx.err(span.clone(), err.to_string()))?;
        if set.k() != k {
            return Err(cx.err(span, format!("index set {set} has size {}, expected k = {k}", set.k())));
        }
        if seen.contains(&set) {
            return Err(cx.err(span, format!("index set {set} listed twice")));
        }
        if !(0.0..=1.0).contains(&e.p) {
            return Err(cx.err(span, format!("p = {} is not a probability", e.p)));
        }
        params.set(&set, e.p).map_err(|err| cx.err(span.clone(), err.to_string()))?;
        seen.push(set);
    }

    let d = &raw.decay;
    let radii = match &d.radii {
        None => vec![2, 4, 6, 8, 12, 16],
        Some(r) => {
            let v = r.get_ref();
            if v.is_empty() || v[0] <= 0 || v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(cx.err(Some(r.span()), "radii must be positive and strictly increasing"));
            }
            v.iter().map(|&x| x as u64).collect()
        }
    };
    let truncation = match &d.truncation {
        None => None,
        Some(t) if *t.get_ref() >= 2 => Some(*t.get_ref() as u64),
        Some(t) => return Err(cx.err(Some(t.span()), "truncation multiple must be at least 2")),
    };
    let margin = match &d.margin {
        None => hyperperc::stats::DEFAULT_AIC_MARGIN,
        Some(m) if *m.get_ref() >= 0.0 => *m.get_ref(),
        Some(m) => return Err(cx.err(Some(m.span()), "margin must be non-negative")),
    };
    let expect = match &d.expect {
        None => None,
        Some(e) => Some(match e.get_ref().as_str() {
            "POWER_LAW" => Verdict::PowerLaw,
            "EXPONENTIAL" => Verdict::Exponential,
            "INCONCLUSIVE" => Verdict::Inconclusive,
            other => {
                return Err(cx.err(
                    Some(e.span()),
                    format!("expect must be POWER_LAW, EXPONENTIAL or INCONCLUSIVE, got {other:?}"),
                ))
            }
        }),
    };
    let decay = DecaySection {
        radii,
        trials: cx.int(&d.trials, "decay.trials", 10_000, 100)? as u64,
        truncation,
        margin,
        expect,
    };

    let ph = &raw.phase;
    let grid = match &ph.grid {
        None => vec![0.2, 0.5, 0.8, 0.999],
        Some(g) => {
            if let Some(p) = g.get_ref().iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(cx.err(Some(g.span()), format!("grid value {p} is not a probability")));
            }
            g.get_ref().clone()
        }
    };
    let defaults = hyperperc::stats::CriticalValues::default();
    let critical = match &ph.critical {
        None => defaults.values.clone(),
        Some(c) => {
            if c.get_ref().is_empty() || c.get_ref().iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(cx.err(Some(c.span()), "critical values must be probabilities, starting at d = 2"));
            }
            c.get_ref().clone()
        }
    };
    let near_one = match &ph.near_one {
        None => defaults.near_one,
        Some(v) => cx.prob(v, "phase.near_one")?,
    };
    let phase = PhaseSection {
        probe: cx.int(&ph.probe, "phase.probe", 16, 1)? as u64,
        trials: cx.int(&ph.trials, "phase.trials", 1000, 1)? as u64,
        grid,
        critical,
        near_one,
    };

    let v = &raw.verify;
    let bt = cx.int(&v.bt_max_sites, "verify.bt_max_sites", 10, 1)?;
    if bt > 16 {
        let span = v.bt_max_sites.as_ref().map(|s| s.span());
        return Err(cx.err(span, "verify.bt_max_sites above 16 is too slow for an audit"));
    }
    let verify = VerifySection {
        bt_max_sites: bt as usize,
        walk_instances: cx.int(&v.walk_instances, "verify.walk_instances", 200, 0)? as u64,
        separation_pairs: cx.int(&v.separation_pairs, "verify.separation_pairs", 2000, 0)? as u64,
        independence_steps: cx.int(&v.independence_steps, "verify.independence_steps", 40, 0)? as u64,
        independence_radius: cx.int(&v.independence_radius, "verify.independence_radius", 5, 0)?,
    };

    let r = &raw.renorm;
    let c_o = match &r.c_o {
        None => 3.0,
        Some(c) if *c.get_ref() > 0.0 => *c.get_ref(),
        Some(c) => return Err(cx.err(Some(c.span()), "c_o must be positive")),
    };
    let renorm = RenormSection {
        scale: cx.int(&r.scale, "renorm.scale", 4, 2)? as u64,
        side: match &r.side {
            None => Some(2),
            Some(s) if *s.get_ref() == 0 => None,
            Some(s) if *s.get_ref() > 0 => Some(*s.get_ref() as u64),
            Some(s) => return Err(cx.err(Some(s.span()), "renorm.side must be positive, or 0 to calibrate")),
        },
        c_o,
        cert_radius: cx.int(&r.cert_radius, "renorm.cert_radius", 30, 1)? as u64,
        trials: cx.int(&r.trials, "renorm.trials", 100, 1)? as u64,
        calibration_trials: cx.int(&r.calibration_trials, "renorm.calibration_trials", 400, 1)? as u64,
    };
    if raw.renorm.cert_radius.is_some() || raw.renorm.scale.is_some() || raw.renorm.side.is_some() {
        if let Some(side) = renorm.side {
            let cfg = hyperperc::renorm::WallConfig {
                scale: renorm.scale,
                side,
                c_o: renorm.c_o,
                cert_radius: renorm.cert_radius,
            };
            let span = r.cert_radius.as_ref().or(r.scale.as_ref()).or(r.side.as_ref()).map(|s| s.span());
            cfg.validate(n).map_err(|e| cx.err(span, e.to_string()))?;
        }
    }

    let lift = LiftSection {
        input: raw.lift.input.as_ref().map(|s| s.get_ref().clone()),
    };
    let basis = BasisSection {
        n: cx.int(&raw.basis.n, "basis.n", n as i64, 2)? as usize,
    };

    Ok(Loaded {
        config: ExperimentConfig {
            n,
            k,
            probabilities: params.ranked().to_vec(),
            decay,
            phase,
            verify,
            renorm,
            lift,
            basis,
        },
        seed,
    })
}
