//! One function per subcommand. Each returns its artifacts in memory plus
//! a status; writing files and choosing the exit code is left to `main`.

use std::path::Path;

use hyperperc::cluster::{explore_cluster_in, finiteness_certificate_check};
use hyperperc::lattice::{IndexSet, LatticeBox, Site};
use hyperperc::lifting::{
    audit_lifted_path, bt_factorization_exhaustive, build_sync_graph, degree_parity_audit,
    lift_crossings, random_walk, sync_walks, ProjectedCrossing,
};
use hyperperc::plane::{
    build_inclined_basis, class_c_params, injectivity_certificate, separation_holds, InclinedBasis,
};
use hyperperc::renorm::{calibrate_side, independence_radius_audit, wall_event_diagnostics, WallConfig};
use hyperperc::rng::audit_rng;
use hyperperc::stats::{estimate_decay_curve, model_select, phase_scan, CriticalValues, Regime};
use hyperperc::{Error, FieldView, HyperplaneField, ParamVector};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{params_hash, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Success,
    /// A deterministic check failed: a bug or a counterexample.
    AuditFailed(String),
    /// A configured statistical expectation was not met.
    StatisticalFailed(String),
}

/// Failure before any result exists.
#[derive(Debug)]
pub enum CommandError {
    /// Bad input; maps to the usage exit code.
    Usage(String),
    /// A construction that must succeed did not.
    Audit(String),
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        match e {
            Error::ConstructionFailure(_) => CommandError::Audit(e.to_string()),
            _ => CommandError::Usage(e.to_string()),
        }
    }
}

pub struct Output {
    /// `(file name, contents)`.
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub status: Status,
    /// One-line audit summaries, repeated in the manifest.
    pub audits: Vec<AuditLine>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl AuditLine {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        AuditLine {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub config_hash: &'a str,
    pub seed: u64,
    pub workers: usize,
    pub format: Format,
}

impl Context<'_> {
    fn header(&self, command: &str) -> Value {
        json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config_hash": self.config_hash,
            "seed": self.seed,
        })
    }

    fn json_artifact(&self, command: &str, name: &str, result: Value) -> (String, Vec<u8>) {
        let doc = json!({ "header": self.header(command), "result": result });
        let mut bytes = serde_json::to_vec_pretty(&doc).expect("json serializes");
        bytes.push(b'\n');
        (name.to_string(), bytes)
    }

    fn csv_artifact(&self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> (String, Vec<u8>) {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head = vec!["config_hash", "seed"];
        head.extend_from_slice(header);
        w.write_record(&head).expect("in-memory write");
        for row in rows {
            let mut r = vec![self.config_hash.to_string(), self.seed.to_string()];
            r.extend(row);
            w.write_record(&r).expect("in-memory write");
        }
        (name.to_string(), w.into_inner().expect("in-memory flush"))
    }
}

fn audit_status(audits: &[AuditLine]) -> Status {
    let failed: Vec<&str> = audits.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect();
    if failed.is_empty() {
        Status::Success
    } else {
        Status::AuditFailed(format!("failed audits: {}", failed.join(", ")))
    }
}

fn f(x: f64) -> String {
    format!("{x}")
}

// ---------------------------------------------------------------------------

pub fn decay(cx: &Context<'_>) -> Result<Output, CommandError> {
    let cfg = cx.config;
    let params = cfg.params();
    let d = &cfg.decay;
    let curve = estimate_decay_curve(&params, &d.radii, d.trials, cx.seed, d.truncation, cx.workers)?;
    let selection = model_select(&curve, d.margin);
    let ph = params_hash(&params);

    let status = match d.expect {
        Some(want) if want != selection.verdict => Status::StatisticalFailed(format!(
            "model selection returned {:?}, expected {want:?} ({})",
            selection.verdict, selection.reason
        )),
        _ => Status::Success,
    };
    let fit = json!({
        "params_hash": ph,
        "probabilities": params.ranked(),
        "selection": selection,
    });
    let artifacts = match cx.format {
        Format::Json => vec![cx.json_artifact(
            "decay",
            "decay.json",
            json!({
                "params_hash": ph,
                "probabilities": params.ranked(),
                "curve": curve,
                "selection": selection,
            }),
        )],
        Format::Csv => {
            let rows = curve
                .entries
                .iter()
                .map(|e| {
                    vec![
                        ph.clone(),
                        e.k.to_string(),
                        e.trials.to_string(),
                        e.successes.to_string(),
                        f(e.ci_lo),
                        f(e.ci_hi),
                    ]
                })
                .collect();
            vec![
                cx.csv_artifact("decay.csv", &["params_hash", "K", "trials", "successes", "ci_lo", "ci_hi"], rows),
                cx.json_artifact("decay", "decay_fit.json", fit),
            ]
        }
    };
    Ok(Output {
        artifacts,
        status,
        audits: Vec::new(),
        summary: format!(
            "decay: {:?} ({}); successes {}",
            selection.verdict,
            selection.reason,
            curve
                .entries
                .iter()
                .map(|e| format!("K={}:{}/{}", e.k, e.successes, e.trials))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    })
}

// ---------------------------------------------------------------------------

fn regime_names(r: &[Regime]) -> String {
    r.iter()
        .map(|x| serde_json::to_value(x).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
        .collect::<Vec<_>>()
        .join(";")
}

pub fn phase(cx: &Context<'_>) -> Result<Output, CommandError> {
    let cfg = cx.config;
    let ph = &cfg.phase;
    let mut grid = vec![cfg.params()];
    for &p in &ph.grid {
        grid.push(ParamVector::uniform(cfg.n, cfg.k, p)?);
    }
    let refs = CriticalValues {
        values: ph.critical.clone(),
        near_one: ph.near_one,
    };
    let rows = phase_scan(&grid, ph.probe, ph.trials, cx.seed, cx.workers, &refs)?;
    let artifacts = match cx.format {
        Format::Json => {
            let tagged: Vec<Value> = grid
                .iter()
                .zip(&rows)
                .map(|(p, r)| json!({ "params_hash": params_hash(p), "row": r }))
                .collect();
            vec![cx.json_artifact("phase", "phase.json", json!({ "probe": ph.probe, "rows": tagged }))]
        }
        Format::Csv => {
            let table = grid
                .iter()
                .zip(&rows)
                .map(|(p, r)| {
                    vec![
                        params_hash(p),
                        r.probabilities.iter().map(|x| f(*x)).collect::<Vec<_>>().join(";"),
                        f(r.open_probability),
                        regime_names(&r.regimes),
                        ph.probe.to_string(),
                        r.connection.trials.to_string(),
                        r.connection.successes.to_string(),
                        f(r.connection.ci_lo),
                        f(r.connection.ci_hi),
                    ]
                })
                .collect();
            vec![cx.csv_artifact(
                "phase.csv",
                &[
                    "params_hash",
                    "probabilities",
                    "open_probability",
                    "regimes",
                    "K",
                    "trials",
                    "successes",
                    "ci_lo",
                    "ci_hi",
                ],
                table,
            )]
        }
    };
    let summary = rows
        .iter()
        .map(|r| format!("[{}] {:.4}", regime_names(&r.regimes), r.connection.frequency()))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Output {
        artifacts,
        status: Status::Success,
        audits: Vec::new(),
        summary: format!("phase: {summary}"),
    })
}

// ---------------------------------------------------------------------------

fn basis_checks(b: &InclinedBasis) -> Vec<AuditLine> {
    let l1 = |v: &[i64]| v.iter().map(|x| x.abs()).sum::<i64>();
    let n = b.n;
    let mut out = vec![
        AuditLine::new(
            &format!("basis_n{n}_orthogonal"),
            b.inner_product() == 0,
            format!("<w1, w2> = {}", b.inner_product()),
        ),
        AuditLine::new(
            &format!("basis_n{n}_equal_norms"),
            l1(&b.w1) == l1(&b.w2) && l1(&b.w1) == b.radius,
            format!("|w1| = {}, |w2| = {}", l1(&b.w1), l1(&b.w2)),
        ),
        AuditLine::new(
            &format!("basis_n{n}_separation_positive"),
            b.separation > num_rational_zero(),
            format!("c = {}", b.separation),
        ),
    ];
    let singular: Vec<String> = IndexSet::all(2, n)
        .iter()
        .filter(|i| injectivity_certificate(b, i).map(|c| c.min_abs_determinant == 0).unwrap_or(true))
        .map(|i| i.to_string())
        .collect();
    out.push(AuditLine::new(
        &format!("basis_n{n}_minors_nonsingular"),
        singular.is_empty(),
        format!("singular minors: {singular:?}"),
    ));
    out
}

fn num_rational_zero() -> hyperperc::plane::Rational {
    hyperperc::plane::Rational::zero()
}

pub fn verify(cx: &Context<'_>) -> Result<Output, CommandError> {
    let v = &cx.config.verify;
    let mut audits = Vec::new();

    let bt = bt_factorization_exhaustive(3, v.bt_max_sites)?;
    audits.push(AuditLine::new(
        "bt_factorization",
        bt.holds(),
        format!("{} boxes, {} configurations, {} counterexamples", bt.boxes, bt.configurations, bt.counterexamples.len()),
    ));

    let mut rng = audit_rng(cx.seed);
    let mut bad_sync = 0;
    let mut bad_parity = 0;
    for _ in 0..v.walk_instances {
        use rand::Rng;
        let n = rng.gen_range(2..=4usize);
        let target = rng.gen_range(1..=4i64);
        let walks: Vec<_> = (0..n)
            .map(|_| random_walk(&mut rng, target, 10).expect("target within reach"))
            .collect();
        if sync_walks(&walks).and_then(|s| s.check(&walks)).is_err() {
            bad_sync += 1;
        }
        if !build_sync_graph(&walks).map(|g| degree_parity_audit(&g)).unwrap_or(false) {
            bad_parity += 1;
        }
    }
    audits.push(AuditLine::new(
        "walk_synchronisation",
        bad_sync == 0,
        format!("{bad_sync} of {} instances without a valid schedule", v.walk_instances),
    ));
    audits.push(AuditLine::new(
        "degree_parity",
        bad_parity == 0,
        format!("{bad_parity} of {} instances failed", v.walk_instances),
    ));

    for n in 3..=8 {
        match build_inclined_basis(n) {
            Ok(b) => {
                audits.extend(basis_checks(&b));
                let subsets: Vec<IndexSet> = (2..=n).flat_map(|k| IndexSet::all(k, n)).collect();
                let mut fails = 0;
                for _ in 0..v.separation_pairs {
                    use rand::Rng;
                    let mut pt = || (rng.gen_range(-50..=50i64), rng.gen_range(-50..=50i64));
                    let (a, c) = (pt(), pt());
                    let i = &subsets[rng.gen_range(0..subsets.len())];
                    fails += !separation_holds(&b, i, a, c) as u64;
                }
                audits.push(AuditLine::new(
                    &format!("basis_n{n}_separation"),
                    fails == 0,
                    format!("{fails} of {} random pairs violate the bound", v.separation_pairs),
                ));
            }
            Err(e) => audits.push(AuditLine::new(&format!("basis_n{n}"), false, e.to_string())),
        }
    }

    for n in [3, 4] {
        for side in 1..=3 {
            let r = independence_radius_audit(n, side, v.independence_steps, v.independence_radius)?;
            audits.push(AuditLine::new(
                &format!("independence_n{n}_side{side}"),
                r.passes(),
                format!("{} pairs, {} violations", r.pairs_checked, r.violations.len()),
            ));
        }
    }

    audits.push(certificate_audit(cx.config, cx.seed)?);

    let status = audit_status(&audits);
    let artifacts = match cx.format {
        Format::Json => vec![cx.json_artifact("verify", "verify.json", json!({ "audits": audits }))],
        Format::Csv => {
            let rows = audits
                .iter()
                .map(|a| vec![a.name.clone(), a.passed.to_string(), a.detail.clone()])
                .collect();
            vec![cx.csv_artifact("verify.csv", &["audit", "passed", "detail"], rows)]
        }
    };
    let passed = audits.iter().filter(|a| a.passed).count();
    Ok(Output {
        summary: format!("verify: {passed} of {} audits passed", audits.len()),
        artifacts,
        status,
        audits,
    })
}

/// Soundness of every finiteness certificate found on the configured field:
/// the certificate must recheck, and the origin cluster must stay inside
/// both the certified region and the search window.
fn certificate_audit(cfg: &ExperimentConfig, seed: u64) -> Result<AuditLine, CommandError> {
    let params = cfg.params();
    let window = LatticeBox::centered(cfg.n, 8);
    let mut found = 0;
    let mut unsound = 0;
    for s in 0..8 {
        let field = HyperplaneField::new(hyperperc::rng::derive_seed(seed, s), params.clone());
        let view = FieldView::full(&field);
        for i in IndexSet::all(cfg.k, cfg.n) {
            if let Some(c) = finiteness_certificate_check(&view, &i, &window)? {
                found += 1;
                let cluster = explore_cluster_in(&view, &window, usize::MAX);
                let ok = c.verify(&view)?
                    && !cluster.touched_boundary
                    && cluster.sites.iter().all(|x| c.confines(x));
                unsound += !ok as u64;
            }
        }
    }
    Ok(AuditLine::new(
        "certificate_soundness",
        unsound == 0,
        format!("{found} certificates found, {unsound} unsound"),
    ))
}

// ---------------------------------------------------------------------------

pub fn renorm(cx: &Context<'_>) -> Result<Output, CommandError> {
    let cfg = cx.config;
    let r = &cfg.renorm;
    let params = cfg.params();
    let calibration = match r.side {
        Some(_) => None,
        None => Some(calibrate_side(&params, 0.95, 16, cx.seed, r.calibration_trials, cx.workers)?),
    };
    let side = match (r.side, &calibration) {
        (Some(s), _) => s,
        (None, Some(c)) => c.side.ok_or_else(|| {
            CommandError::Usage("no box side up to 16 is good with frequency above 0.95".into())
        })?,
        (None, None) => unreachable!(),
    };
    let wall = WallConfig {
        scale: r.scale,
        side,
        c_o: r.c_o,
        cert_radius: r.cert_radius,
    };
    let report = wall_event_diagnostics(&params, &wall, cx.seed, r.trials, cx.workers)?;
    let audits = vec![
        AuditLine::new(
            "wall_implication",
            report.implication_violations == 0,
            format!("{} samples with O1&O2&O3 and an open origin but no connection", report.implication_violations),
        ),
        AuditLine::new(
            "certificate_confinement",
            report.confinement_violations == 0,
            format!("{} certified samples whose cluster escaped", report.confinement_violations),
        ),
        AuditLine::new(
            "good_path_to_open_path",
            report.path_failures == 0,
            format!("{} coarse crossings without an open path", report.path_failures),
        ),
    ];
    let status = audit_status(&audits);
    let artifacts = match cx.format {
        Format::Json => vec![cx.json_artifact(
            "renorm",
            "renorm.json",
            json!({
                "params_hash": params_hash(&params),
                "calibration": calibration,
                "circuit_extent": wall.circuit_extent(),
                "report": report,
            }),
        )],
        Format::Csv => {
            let rows = report
                .events
                .iter()
                .map(|e| {
                    vec![
                        e.event.clone(),
                        e.trials.to_string(),
                        e.successes.to_string(),
                        f(e.ci_lo),
                        f(e.ci_hi),
                    ]
                })
                .collect();
            vec![cx.csv_artifact("renorm.csv", &["event", "trials", "successes", "ci_lo", "ci_hi"], rows)]
        }
    };
    let events = report
        .events
        .iter()
        .map(|e| format!("{}={}", e.event, e.successes))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(Output {
        artifacts,
        status,
        audits,
        summary: format!("renorm: N = {side}, {} trials; {events}", report.trials),
    })
}

// ---------------------------------------------------------------------------

/// Input of `lift`: a box and one planar crossing per plane `{1, j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftInput {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    pub crossings: Vec<LiftCrossing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftCrossing {
    pub plane: Vec<usize>,
    /// `(height, coordinate j)` pairs.
    pub path: Vec<(i64, i64)>,
}

/// A small example in `Z^3`: one crossing climbs straight, the other
/// wanders sideways and back down once.
pub fn demo_lift_input() -> LiftInput {
    LiftInput {
        lo: vec![0, 0, 0],
        hi: vec![2, 2, 2],
        crossings: vec![
            LiftCrossing {
                plane: vec![1, 2],
                path: vec![(0, 0), (1, 0), (1, 1), (2, 1)],
            },
            LiftCrossing {
                plane: vec![1, 3],
                path: vec![(0, 2), (1, 2), (0, 2), (0, 1), (1, 1), (1, 0), (2, 0)],
            },
        ],
    }
}

pub fn lift(cx: &Context<'_>, input: Option<&Path>) -> Result<Output, CommandError> {
    let path = input.map(|p| p.to_path_buf()).or_else(|| cx.config.lift.input.as_ref().map(Into::into));
    let spec = match &path {
        None => demo_lift_input(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CommandError::Usage(format!("{}: cannot read: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| {
                CommandError::Usage(format!("{}:{}: {}", p.display(), e.line(), e))
            })?
        }
    };
    let n = spec.lo.len();
    if n < 2 || spec.hi.len() != n {
        return Err(CommandError::Usage("lo and hi must have the same dimension n >= 2".into()));
    }
    let bx = LatticeBox::new(Site::from_slice(&spec.lo), Site::from_slice(&spec.hi))?;
    let crossings: Vec<ProjectedCrossing> = spec
        .crossings
        .iter()
        .map(|c| {
            Ok(ProjectedCrossing {
                host: IndexSet::new(&c.plane, n)?,
                path: c.path.clone(),
            })
        })
        .collect::<Result<_, Error>>()?;
    let lifted = lift_crossings(&crossings, &bx)?;
    let audit = audit_lifted_path(&lifted, &crossings, &bx);
    let audits = vec![AuditLine::new(
        "lifted_path",
        audit.is_ok(),
        audit.as_ref().err().map(|e| e.to_string()).unwrap_or_else(|| format!("{} sites", lifted.len())),
    )];
    let coords: Vec<Vec<i64>> = lifted.iter().map(|s| s.coords().to_vec()).collect();
    let artifacts = match cx.format {
        Format::Json => vec![cx.json_artifact("lift", "lift.json", json!({ "input": spec, "path": coords }))],
        Format::Csv => {
            let head: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
            let head_refs: Vec<&str> = std::iter::once("step").chain(head.iter().map(|s| s.as_str())).collect();
            let rows = coords
                .iter()
                .enumerate()
                .map(|(t, c)| std::iter::once(t.to_string()).chain(c.iter().map(|x| x.to_string())).collect())
                .collect();
            vec![cx.csv_artifact("lift.csv", &head_refs, rows)]
        }
    };
    Ok(Output {
        artifacts,
        status: audit_status(&audits),
        summary: format!("lift: {} sites from {:?} to {:?}", coords.len(), coords.first(), coords.last()),
        audits,
    })
}

// ---------------------------------------------------------------------------

pub fn basis(cx: &Context<'_>, n_flag: Option<usize>) -> Result<Output, CommandError> {
    let n = n_flag.unwrap_or(cx.config.basis.n);
    if n < 2 {
        return Err(CommandError::Usage(format!("basis needs n >= 2, got {n}")));
    }
    let b = build_inclined_basis(n)?;
    let minors: Vec<Value> = IndexSet::all(2, n)
        .iter()
        .map(|i| {
            let c = injectivity_certificate(&b, i).expect("2-subset of [n]");
            json!({ "set": i.members(), "determinant": c.determinants[0].2 })
        })
        .collect();
    let params = ParamVector::uniform(n, 2, 1.0)?;
    let chi = class_c_params(&b, &params)?.chi;
    let audits = basis_checks(&b);
    let artifacts = match cx.format {
        Format::Json => vec![cx.json_artifact(
            "basis",
            "basis.json",
            json!({
                "n": n,
                "w1": b.w1,
                "w2": b.w2,
                "radius": b.radius,
                "separation": b.separation.to_string(),
                "dependence_range": chi.to_string(),
                "inner_product": b.inner_product(),
                "minors": minors,
            }),
        )],
        Format::Csv => {
            let rows = (0..n)
                .map(|i| vec![(i + 1).to_string(), b.w1[i].to_string(), b.w2[i].to_string()])
                .collect();
            vec![cx.csv_artifact("basis.csv", &["coordinate", "w1", "w2"], rows)]
        }
    };
    Ok(Output {
        artifacts,
        status: audit_status(&audits),
        summary: format!("basis: n = {n}, w1 = {:?}, w2 = {:?}, R = {}, c = {}", b.w1, b.w2, b.radius, b.separation),
        audits,
    })
}
