use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use psdxc::bounds::{
    counting_capacity, lemma_delta, polygon_bound, polygon_instance_params, worst_case_coeff_bound,
    xc01_lower_bound,
};
use psdxc::calculus::{check_pair, random_pair, DEFAULT_LADDER};
use psdxc::pipeline::{run_builtin, run_pipeline, FactorSource, PipelineConfig, PipelineVerdict};
use psdxc::polytope::{
    build_slack, builtin_instance, HPolytope, Instance, PolytopeFile, SlackFile, SlackMatrix, VPolytope,
};
use psdxc::psdfact::{alternating_fit, diagonal_embed, verify_factorization, FitConfig, FitOutcome, PsdFactorization};
use psdxc::rescaler::{rescale, RescaleConfig, RescaleResult};
use psdxc::rounding::{
    build_rounded_system, grid_delta, reconstruct, worst_case_delta, GridParams, MembershipConfig, RoundedSystem,
    Verdict,
};
use psdxc::symcore::DEFAULT_RANK_TOL;

use crate::table::{point, Table};
use crate::{
    BoundsCmd, CheckCmd, Command, Ctx, FactCmd, Failure, Formula, PipelineArgs, PolytopeSource, ReconstructArgs,
    Report, RescaleCmd, RoundCmd, SlackCmd,
};

pub fn parse_instance(s: &str) -> Result<Instance, String> {
    Instance::ALL
        .iter()
        .copied()
        .find(|i| i.name() == s)
        .ok_or_else(|| {
            let names: Vec<_> = Instance::ALL.iter().map(|i| i.name()).collect();
            format!("unknown instance `{s}` (expected one of {})", names.join(", "))
        })
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

pub fn run(cmd: &Command, ctx: &mut Ctx) -> Result<Report, Failure> {
    match cmd {
        Command::Slack(SlackCmd::Build(src)) => slack_build(src, ctx),
        Command::Fact(FactCmd::Verify { slack, fact }) => fact_verify(slack, fact, ctx),
        Command::Fact(FactCmd::Fit { slack, r, max_outer }) => fact_fit(slack, *r, *max_outer, ctx),
        Command::Fact(FactCmd::Embed { slack }) => fact_embed(slack, ctx),
        Command::Rescale(RescaleCmd::Run {
            slack,
            fact,
            max_iters,
            trace,
        }) => rescale_run(slack, fact, *max_iters, trace.as_deref(), ctx),
        Command::Round(RoundCmd::Run {
            slack,
            fact,
            delta,
            worst_case,
        }) => round_run(slack, fact, delta, *worst_case, ctx),
        Command::Reconstruct(args) => reconstruct_cmd(args, ctx),
        Command::Check(CheckCmd::Derivatives {
            pairs,
            min_gap,
            max_side,
            ..
        }) => check_derivatives(*pairs, *min_gap, *max_side, ctx),
        Command::Bounds(BoundsCmd::Eval {
            formula,
            n,
            d,
            big_r,
            r,
            big_n,
        }) => bounds_eval(*formula, *n, *d, *big_r, *r, *big_n),
        Command::Pipeline(args) => pipeline(args, ctx),
    }
}

fn load_polytope(src: &PolytopeSource, ctx: &mut Ctx) -> Result<(HPolytope, VPolytope, Option<Instance>), Failure> {
    match (&src.instance, &src.polytope) {
        (Some(inst), None) => {
            let n = src.n.ok_or_else(|| input("--instance needs --n"))?;
            let (h, v) = builtin_instance(*inst, n)?;
            Ok((h, v, Some(*inst)))
        }
        (None, Some(path)) => {
            let file: PolytopeFile = ctx.read_json(path)?;
            let (h, v) = file.into_parts()?;
            if let Some(n) = src.n {
                if n != h.dim() {
                    return Err(input(format!("--n {n} but the polytope has dimension {}", h.dim())));
                }
            }
            Ok((h, v, None))
        }
        _ => Err(input("give either --instance with --n, or --polytope")),
    }
}

fn load_slack(path: &Path, ctx: &mut Ctx) -> Result<SlackMatrix, Failure> {
    let file: SlackFile = ctx.read_json(path)?;
    Ok(SlackMatrix::try_from(file)?)
}

/// A factorization file, or anything with a `rescaled` factorization
/// (the output of `rescale run`).
fn load_fact(path: &Path, ctx: &mut Ctx) -> Result<PsdFactorization, Failure> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum FactInput {
        Plain(PsdFactorization),
        Rescaled { rescaled: PsdFactorization },
    }
    let v: FactInput = ctx.read_json(path)?;
    Ok(match v {
        FactInput::Plain(f) => f,
        FactInput::Rescaled { rescaled } => rescaled,
    })
}

fn slack_table(s: &SlackMatrix) -> Table {
    let mut t = Table::new(std::iter::once("row".to_string()).chain((0..s.cols()).map(|j| format!("c{j}"))));
    for i in 0..s.rows() {
        t.push(
            std::iter::once(i.to_string())
                .chain(s.row(i).iter().map(i64::to_string))
                .collect(),
        );
    }
    t
}

fn slack_build(src: &PolytopeSource, ctx: &mut Ctx) -> Result<Report, Failure> {
    let (h, v, _) = load_polytope(src, ctx)?;
    let s = build_slack(&h, &v)?;
    let summary = format!(
        "slack matrix {}x{}, largest entry {}",
        s.rows(),
        s.cols(),
        s.max_entry()
    );
    Ok(Report::new(to_value(&SlackFile::from(&s)), slack_table(&s), true, summary))
}

fn fact_verify(slack: &Path, fact: &Path, ctx: &mut Ctx) -> Result<Report, Failure> {
    let s = load_slack(slack, ctx)?;
    let f = load_fact(fact, ctx)?;
    let rep = verify_factorization(&f, &s, ctx.tol.unwrap_or(1e-6))?;
    let json = to_value(&rep);
    let summary = format!(
        "max residual {:.3e} (threshold {:.3e}): {}",
        rep.max_abs_residual,
        rep.threshold,
        if rep.passed { "passed" } else { "failed" }
    );
    Ok(Report::new(json.clone(), Table::key_value(&json), rep.passed, summary))
}

fn fact_fit(slack: &Path, r: usize, max_outer: Option<usize>, ctx: &mut Ctx) -> Result<Report, Failure> {
    let s = load_slack(slack, ctx)?;
    let defaults = FitConfig::default();
    let cfg = FitConfig {
        tol: ctx.tol.unwrap_or(defaults.tol),
        max_outer: max_outer.unwrap_or(defaults.max_outer),
        seed: ctx.seed,
        ..defaults
    };
    match alternating_fit(&s, r, &cfg)? {
        FitOutcome::Found {
            factorization,
            report,
            iterations,
        } => {
            let summary = format!(
                "found a side-{r} factorization after {iterations} iterations (residual {:.3e})",
                report.max_abs_residual
            );
            let json = to_value(&factorization);
            let csv = Table::key_value(&json!({ "found": true, "r": r, "iterations": iterations, "report": report }));
            Ok(Report::new(json, csv, true, summary))
        }
        FitOutcome::NotFound { best_residual, trace } => {
            let json = json!({ "found": false, "r": r, "best_residual": best_residual, "trace": trace });
            let summary = format!("no side-{r} factorization found (best residual {best_residual:.3e})");
            Ok(Report::new(json.clone(), Table::key_value(&json), false, summary))
        }
    }
}

fn fact_embed(slack: &Path, ctx: &mut Ctx) -> Result<Report, Failure> {
    let s = load_slack(slack, ctx)?;
    let f = diagonal_embed(&s);
    let json = to_value(&f);
    let csv = Table::key_value(&json!({ "r": f.side(), "rows": f.rows(), "cols": f.cols() }));
    Ok(Report::new(json, csv, true, format!("diagonal factorization of side {}", f.side())))
}

fn trajectory_table(res: &RescaleResult) -> Table {
    let mut t = Table::new([
        "iteration",
        "phi",
        "lmax_u",
        "lmax_v",
        "eps",
        "active_threshold",
        "active_rows",
    ]);
    for p in &res.trajectory {
        t.push(vec![
            p.iteration.to_string(),
            p.phi.to_string(),
            p.lmax_u.to_string(),
            p.lmax_v.to_string(),
            p.eps.to_string(),
            p.active_threshold.to_string(),
            p.active_rows.to_string(),
        ]);
    }
    t
}

fn rescale_run(
    slack: &Path,
    fact: &Path,
    max_iters: usize,
    trace: Option<&Path>,
    ctx: &mut Ctx,
) -> Result<Report, Failure> {
    let s = load_slack(slack, ctx)?;
    let f = load_fact(fact, ctx)?;
    let defaults = RescaleConfig::default();
    let cfg = RescaleConfig {
        tol: ctx.tol.unwrap_or(defaults.tol),
        max_iters,
        seed: ctx.seed,
        ..defaults
    };
    let res = rescale(&f, &s, &cfg)?;
    let table = trajectory_table(&res);
    let summary = format!(
        "{:?} after {} iterations: lmax_U {:.4}, lmax_V {:.4}, target {:.4}, certificate {}",
        res.termination, res.iterations, res.lmax_u, res.lmax_v, res.target_lmax, res.certificate
    );
    let mut report = Report::new(to_value(&res), table, res.certificate, summary);
    if let Some(path) = trace {
        let body = trajectory_table(&res)
            .render()
            .map_err(|e| input(format!("cannot render trace: {e}")))?;
        report.side_files.push((path.to_path_buf(), body));
    }
    Ok(report)
}

/// `max`, `max/<k>` or a positive number.
fn parse_delta(spec: &str, n: usize, r: usize) -> Result<f64, Failure> {
    let cap = grid_delta(n, r);
    let bad = || input(format!("--delta must be `max`, `max/<k>` or a number, got `{spec}`"));
    if spec == "max" {
        return Ok(cap);
    }
    if let Some(k) = spec.strip_prefix("max/") {
        let k: f64 = k.parse().map_err(|_| bad())?;
        if !(k >= 1.0) {
            return Err(bad());
        }
        return Ok(cap / k);
    }
    spec.parse().map_err(|_| bad())
}

fn round_run(slack: &Path, fact: &Path, delta: &str, worst_case: bool, ctx: &mut Ctx) -> Result<Report, Failure> {
    let s = load_slack(slack, ctx)?;
    let f = load_fact(fact, ctx)?;
    let prov = s
        .provenance()
        .ok_or_else(|| input("the slack file has no polytope (rows and points); rounding needs the inequalities"))?;
    let h = &prov.h;
    let (n, r) = (h.dim(), f.side());
    let big_delta = if worst_case {
        worst_case_delta(n)?
    } else {
        s.delta_eff().max(1.0)
    };
    let grid = GridParams::new(n, r, big_delta, parse_delta(delta, n, r)?, worst_case)?;
    let sys = build_rounded_system(h, &f, &grid, DEFAULT_RANK_TOL)?;
    let csv = Table::key_value(&json!({
        "n": n,
        "r": r,
        "big_delta": grid.big_delta,
        "delta": grid.delta,
        "step": grid.step,
        "budget": grid.budget,
        "rows": sys.rows.len(),
        "max_rounding_error": sys.max_rounding_error,
        "error_bound": grid.error_bound(),
        "error_bound_violations": sys.error_bound_violations,
        "entry_bound_violations": sys.entry_bound_violations,
        "degenerate_factors": sys.degenerate_factors,
    }));
    let summary = format!(
        "rounded {} rows onto step {:.3e}; max error {:.3e} (bound {:.3e}), {} violations",
        sys.rows.len(),
        grid.step,
        sys.max_rounding_error,
        grid.error_bound(),
        sys.error_bound_violations
    );
    let ok = sys.error_bound_violations == 0;
    Ok(Report::new(to_value(&sys), csv, ok, summary))
}

fn reconstruct_cmd(args: &ReconstructArgs, ctx: &mut Ctx) -> Result<Report, Failure> {
    let sys: RoundedSystem = ctx.read_json(&args.system)?;
    if let Some(n) = args.n {
        if n != sys.n() {
            return Err(input(format!("--n {n} but the system has n = {}", sys.n())));
        }
    }
    let expected = match &args.slack {
        Some(p) => {
            let s = load_slack(p, ctx)?;
            let prov = s
                .provenance()
                .ok_or_else(|| input("the slack file has no points to compare with"))?;
            Some(prov.v.points().to_vec())
        }
        None => None,
    };
    let defaults = MembershipConfig::default();
    let cfg = MembershipConfig {
        seed: ctx.seed,
        random_restarts: args.restarts.unwrap_or(defaults.random_restarts),
        ..defaults
    };
    let rec = reconstruct(&sys, &cfg)?;
    let mut t = Table::new(["point", "verdict", "max_violation"]);
    for v in &rec.verdicts {
        t.push(vec![
            point(&v.point),
            match v.verdict {
                Verdict::Member => "member",
                Verdict::Rejected => "rejected",
                Verdict::Inconclusive => "inconclusive",
            }
            .to_string(),
            v.max_violation.to_string(),
        ]);
    }
    let matches = expected.as_ref().map(|e| {
        let mut a = rec.accepted.clone();
        let mut e = e.clone();
        a.sort();
        e.sort();
        a == e
    });
    let mut json = to_value(&rec);
    json["matches_expected"] = json!(matches);
    let summary = format!(
        "{} accepted, {} rejected, {} inconclusive{}",
        rec.accepted.len(),
        rec.rejected.len(),
        rec.inconclusive.len(),
        match matches {
            Some(true) => "; equals the expected point set",
            Some(false) => "; differs from the expected point set",
            None => "",
        }
    );
    let ok = rec.complete && matches != Some(false);
    Ok(Report::new(json, t, ok, summary))
}

fn check_derivatives(pairs: usize, min_gap: f64, max_side: usize, ctx: &mut Ctx) -> Result<Report, Failure> {
    if !(min_gap > 0.0 && min_gap < 0.9) {
        return Err(input("--min-gap must lie in (0, 0.9)"));
    }
    if max_side < 2 {
        return Err(input("--max-side must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut t = Table::new([
        "pair",
        "side",
        "gap",
        "additive_analytic",
        "additive_fd",
        "congruence_analytic",
        "congruence_fd",
        "fd_deviation",
        "fd_tolerance",
        "relation_error",
        "passed",
    ]);
    let mut results = Vec::with_capacity(pairs);
    let mut failures = 0;
    for k in 0..pairs {
        let side = rng.random_range(2..=max_side);
        let gap = rng.random_range(min_gap..0.9);
        let (x, z) = random_pair(&mut rng, side, gap);
        let c = check_pair(&x, &z, &DEFAULT_LADDER)?;
        let dev = c.additive.final_deviation().max(c.congruence.final_deviation());
        let tolerance = 1e-4 / c.gap;
        let passed = dev <= tolerance && c.relation_error <= 1e-8;
        failures += usize::from(!passed);
        let last = |d: &psdxc::calculus::DerivativeCheck| d.slopes.last().map_or(f64::NAN, |s| s.1);
        t.push(vec![
            k.to_string(),
            c.side.to_string(),
            c.gap.to_string(),
            c.additive.analytic.to_string(),
            last(&c.additive).to_string(),
            c.congruence.analytic.to_string(),
            last(&c.congruence).to_string(),
            dev.to_string(),
            tolerance.to_string(),
            c.relation_error.to_string(),
            passed.to_string(),
        ]);
        results.push(json!({ "check": c, "fd_deviation": dev, "fd_tolerance": tolerance, "passed": passed }));
    }
    let json = json!({ "pairs": pairs, "failures": failures, "results": results });
    let summary = format!("{pairs} pairs, {failures} failures");
    Ok(Report::new(json, t, failures == 0, summary))
}

fn bounds_eval(
    formula: Formula,
    n: Option<u32>,
    d: Option<u32>,
    big_r: Option<f64>,
    r: Option<usize>,
    big_n: Option<u64>,
) -> Result<Report, Failure> {
    fn need<T>(x: Option<T>, flag: &str, formula: &str) -> Result<T, Failure> {
        x.ok_or_else(|| input(format!("formula `{formula}` needs {flag}")))
    }
    let json = match formula {
        Formula::Xc01 => to_value(&xc01_lower_bound(need(n, "--n", "xc01")?)?),
        Formula::Counting => to_value(&counting_capacity(
            need(n, "--n", "counting")?,
            need(big_r, "--R", "counting")?,
        )?),
        Formula::Polygon => to_value(&polygon_bound(need(d, "--d", "polygon")?)?),
        Formula::PolygonParams => to_value(&polygon_instance_params(need(d, "--d", "polygon_params")?)?),
        Formula::LemmaDelta => to_value(&lemma_delta(
            need(n, "--n", "lemma_delta")?,
            need(big_n, "--N", "lemma_delta")?,
        )?),
        Formula::WorstCase => to_value(&worst_case_coeff_bound(need(n, "--n", "worst_case")?)?),
        Formula::Grid => {
            let n = need(n, "--n", "grid")? as usize;
            let r = need(r, "--r", "grid")?;
            if n == 0 || r == 0 {
                return Err(input("grid needs positive --n and --r"));
            }
            let delta = grid_delta(n, r);
            json!({
                "formula": "grid",
                "inputs": { "n": n, "r": r },
                "delta": delta,
                "inverse": 1.0 / delta,
                "assumptions": ["delta = 1/(16 r^3 (n + r^2))"],
            })
        }
    };
    let summary = match json.get("decimal").and_then(Value::as_str) {
        Some(dec) => format!("{formula:?}: {dec}"),
        None => format!("{formula:?} evaluated"),
    };
    Ok(Report::new(json.clone(), Table::key_value(&json), true, summary))
}

fn pipeline(args: &PipelineArgs, ctx: &mut Ctx) -> Result<Report, Failure> {
    let mut cfg = PipelineConfig {
        source: match (args.r, args.unbalanced) {
            (Some(_), _) => FactorSource::Fit,
            (None, true) => FactorSource::Unbalanced,
            (None, false) => FactorSource::Diagonal,
        },
        fit_side: args.r,
        skip_rescale: args.skip_rescale,
        worst_case: args.worst_case,
        delta_divisor: args.delta_divisor,
        ..PipelineConfig::default()
    };
    cfg.rescale.seed = ctx.seed;
    cfg.rescale.max_iters = args.max_iters;
    if let Some(tol) = ctx.tol {
        cfg.rescale.tol = tol;
    }
    cfg.fit.seed = ctx.seed;
    cfg.membership.seed = ctx.seed;

    let mut rep = match (&args.source.instance, &args.source.polytope) {
        (Some(inst), None) => {
            let n = args.source.n.ok_or_else(|| input("--instance needs --n"))?;
            run_builtin(*inst, n, &cfg)?
        }
        _ => {
            let (h, v, _) = load_polytope(&args.source, ctx)?;
            run_pipeline(&h, &v, &cfg)?
        }
    };
    let stage_ms = std::mem::take(&mut rep.stage_ms);
    let mut t = Table::new(["point", "expected", "verdict"]);
    let expected: std::collections::BTreeSet<_> = rep.expected.iter().cloned().collect();
    for (set, label) in [
        (&rep.accepted, "member"),
        (&rep.rejected, "rejected"),
        (&rep.inconclusive, "inconclusive"),
    ] {
        for x in set {
            t.push(vec![point(x), expected.contains(x).to_string(), label.to_string()]);
        }
    }
    t.rows.sort();
    let summary = format!(
        "verdict {:?}: {} of {} expected points accepted, {} rejected, {} inconclusive; budget check {}",
        rep.verdict,
        rep.accepted.iter().filter(|x| expected.contains(*x)).count(),
        rep.expected.len(),
        rep.rejected.len(),
        rep.inconclusive.len(),
        if rep.budget_check.passed { "passed" } else { "FAILED" }
    );
    let ok = rep.verdict == PipelineVerdict::Match;
    let mut report = Report::new(to_value(&rep), t, ok, summary);
    report.stage_ms = stage_ms;
    Ok(report)
}
