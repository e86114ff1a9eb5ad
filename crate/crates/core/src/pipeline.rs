//! End to end: slack matrix → factorization → rescaling → grid rounding →
//! reconstruction of the 0/1 points, with a verdict on whether the
//! reconstructed set equals the original one.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{build_slack, builtin_instance, HPolytope, Instance, VPolytope};
use crate::psdfact::{alternating_fit, diagonal_embed, verify_factorization, FitConfig, PsdFactorization};
use crate::rescaler::{rescale, RescaleConfig, Termination};
use crate::rounding::{
    build_rounded_system, reconstruct, worst_case_delta, GridParams, MembershipConfig,
};
use crate::symcore::DEFAULT_RANK_TOL;

/// Largest dimension the pipeline will reconstruct.
pub const MAX_PIPELINE_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorSource {
    /// The diagonal certificate.
    Diagonal,
    /// Local search at the side given in the config.
    Fit,
    /// The diagonal certificate pushed through a fixed ill-conditioned
    /// congruence, so that the two sides are badly out of scale.
    Unbalanced,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub source: FactorSource,
    /// Side for [`FactorSource::Fit`].
    pub fit_side: Option<usize>,
    pub skip_rescale: bool,
    /// Use `(n+1)^{(n+1)/2}` for the grid instead of the largest slack.
    pub worst_case: bool,
    /// `δ` is the largest admissible value divided by this.
    pub delta_divisor: f64,
    pub rank_tol: f64,
    pub rescale: RescaleConfig,
    pub fit: FitConfig,
    pub membership: MembershipConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            source: FactorSource::Diagonal,
            fit_side: None,
            skip_rescale: false,
            worst_case: false,
            delta_divisor: 1.0,
            rank_tol: DEFAULT_RANK_TOL,
            rescale: RescaleConfig::default(),
            fit: FitConfig::default(),
            membership: MembershipConfig::default(),
        }
    }
}

/// `T = tridiag` with diagonal `100, 0.01, 3, 0.2, 7, 0.5, …` and 0.3 above
/// the diagonal; `(TUᵢTᵀ, T⁻ᵀVʲT⁻¹)` factorizes the same matrix.
pub fn unbalanced(f: &PsdFactorization) -> Result<PsdFactorization> {
    let r = f.side();
    let t = DMatrix::from_fn(r, r, |i, j| {
        if i == j {
            [100.0, 0.01, 3.0, 0.2, 7.0, 0.5][i % 6]
        } else if j == i + 1 {
            0.3
        } else {
            0.0
        }
    });
    f.transformed(&t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineVerdict {
    /// Reconstructed set equals the input set, no inconclusive points.
    Match,
    Mismatch,
    /// Some points are inconclusive.
    Incomplete,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorizationSummary {
    pub source: FactorSource,
    pub r: usize,
    pub max_residual: f64,
    pub lmax_u: f64,
    pub lmax_v: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RescaleSummary {
    pub d: usize,
    pub certificate: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub lmax_u: f64,
    pub lmax_v: f64,
    pub target_lmax: f64,
    pub max_residual: f64,
    pub residual_preserved: bool,
    pub john_decompositions: usize,
    pub max_john_identity_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundingSummary {
    pub subsystem_rows: usize,
    pub padded_rows: usize,
    pub max_error: f64,
    pub error_bound: f64,
    pub error_bound_violations: usize,
    pub entry_bound_violations: usize,
    pub degenerate_factors: usize,
}

/// Whether the factorization being rounded respects `lmax ≤ √(rΔ)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BudgetCheck {
    pub alpha: f64,
    pub lmax_u: f64,
    pub lmax_v: f64,
    /// `lmax ≤ α·(1 + tol)` on both sides.
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub instance: Option<String>,
    pub n: usize,
    pub slack_rows: usize,
    pub slack_cols: usize,
    pub delta_eff: f64,
    pub factorization: FactorizationSummary,
    pub rescale: Option<RescaleSummary>,
    pub grid: GridParams,
    pub rounding: RoundingSummary,
    pub budget_check: BudgetCheck,
    pub expected: Vec<Vec<i64>>,
    pub accepted: Vec<Vec<i64>>,
    pub rejected: Vec<Vec<i64>>,
    pub inconclusive: Vec<Vec<i64>>,
    pub verdict: PipelineVerdict,
    /// Wall time per stage in milliseconds.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stage_ms: Vec<(String, f64)>,
}

pub fn run_builtin(instance: Instance, n: usize, cfg: &PipelineConfig) -> Result<PipelineReport> {
    let (h, v) = builtin_instance(instance, n).map_err(|e| e.in_stage("instance"))?;
    let mut report = run_pipeline(&h, &v, cfg)?;
    report.instance = Some(instance.name().to_string());
    Ok(report)
}

pub fn run_pipeline(h: &HPolytope, v: &VPolytope, cfg: &PipelineConfig) -> Result<PipelineReport> {
    let n = h.dim();
    if n > MAX_PIPELINE_DIM {
        return Err(Error::TooLarge {
            what: "dimension for the pipeline",
            value: n,
            limit: MAX_PIPELINE_DIM,
        });
    }
    if v.points().iter().flatten().any(|&x| x != 0 && x != 1) {
        return Err(Error::Precondition(
            "reconstruction needs a 0/1 point set".into(),
        ));
    }
    let mut stage_ms = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, stage_ms: &mut Vec<(String, f64)>| {
        stage_ms.push((name.to_string(), clock.elapsed().as_secs_f64() * 1e3));
        clock = Instant::now();
    };

    let s = build_slack(h, v).map_err(|e| e.in_stage("slack"))?;
    lap("slack", &mut stage_ms);

    let f = match cfg.source {
        FactorSource::Diagonal => diagonal_embed(&s),
        FactorSource::Unbalanced => unbalanced(&diagonal_embed(&s)).map_err(|e| e.in_stage("factorize"))?,
        FactorSource::Fit => {
            let r = cfg.fit_side.unwrap_or_else(|| s.rows().min(s.cols()));
            alternating_fit(&s, r, &cfg.fit)
                .map_err(|e| e.in_stage("factorize"))?
                .factorization()
                .cloned()
                .ok_or_else(|| {
                    Error::Numeric(format!("no side-{r} factorization found")).in_stage("factorize")
                })?
        }
    };
    let check = verify_factorization(&f, &s, cfg.fit.tol).map_err(|e| e.in_stage("factorize"))?;
    let factorization = FactorizationSummary {
        source: cfg.source,
        r: f.side(),
        max_residual: check.max_abs_residual,
        lmax_u: check.lmax_u,
        lmax_v: check.lmax_v,
    };
    lap("factorize", &mut stage_ms);

    let (rounded_input, rescale_summary) = if cfg.skip_rescale {
        (f, None)
    } else {
        let res = rescale(&f, &s, &cfg.rescale).map_err(|e| e.in_stage("rescale"))?;
        let summary = RescaleSummary {
            d: res.d,
            certificate: res.certificate,
            termination: res.termination,
            iterations: res.iterations,
            lmax_u: res.lmax_u,
            lmax_v: res.lmax_v,
            target_lmax: res.target_lmax,
            max_residual: res.max_residual,
            residual_preserved: res.residual_preserved,
            john_decompositions: res.john_checks.len(),
            max_john_identity_residual: res
                .john_checks
                .iter()
                .map(|c| c.identity_residual)
                .fold(0.0, f64::max),
        };
        (res.rescaled, Some(summary))
    };
    lap("rescale", &mut stage_ms);

    let big_delta = if cfg.worst_case {
        worst_case_delta(n).map_err(|e| e.in_stage("round"))?
    } else {
        s.delta_eff().max(1.0)
    };
    let grid = GridParams::with_divisor(n, rounded_input.side(), big_delta, cfg.delta_divisor, cfg.worst_case)
        .map_err(|e| e.in_stage("round"))?;
    let system = build_rounded_system(h, &rounded_input, &grid, cfg.rank_tol)
        .map_err(|e| e.in_stage("round"))?;
    let subsystem_rows = system.rows.iter().filter(|r| r.source.is_some()).count();
    let rounding = RoundingSummary {
        subsystem_rows,
        padded_rows: system.rows.len() - subsystem_rows,
        max_error: system.max_rounding_error,
        error_bound: grid.error_bound(),
        error_bound_violations: system.error_bound_violations,
        entry_bound_violations: system.entry_bound_violations,
        degenerate_factors: system.degenerate_factors,
    };
    let alpha = grid.alpha();
    let (lu, lv) = (rounded_input.lmax_u(), rounded_input.lmax_v());
    let budget_check = BudgetCheck {
        alpha,
        lmax_u: lu,
        lmax_v: lv,
        passed: lu <= alpha * (1.0 + cfg.rescale.tol) && lv <= alpha * (1.0 + cfg.rescale.tol),
    };
    lap("round", &mut stage_ms);

    let rec = reconstruct(&system, &cfg.membership).map_err(|e| e.in_stage("reconstruct"))?;
    lap("reconstruct", &mut stage_ms);

    let mut expected = v.points().to_vec();
    expected.sort();
    let verdict = if !rec.complete {
        PipelineVerdict::Incomplete
    } else if rec.accepted == expected {
        PipelineVerdict::Match
    } else {
        PipelineVerdict::Mismatch
    };
    Ok(PipelineReport {
        instance: None,
        n,
        slack_rows: s.rows(),
        slack_cols: s.cols(),
        delta_eff: s.delta_eff(),
        factorization,
        rescale: rescale_summary,
        grid,
        rounding,
        budget_check,
        expected,
        accepted: rec.accepted,
        rejected: rec.rejected,
        inconclusive: rec.inconclusive,
        verdict,
        stage_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_end_to_end() {
        let rep = run_builtin(Instance::Cube, 2, &PipelineConfig::default()).unwrap();
        assert_eq!(rep.verdict, PipelineVerdict::Match);
        assert_eq!(rep.accepted.len(), 4);
        assert!(rep.rescale.unwrap().certificate);
        assert!(rep.budget_check.passed);
    }

    #[test]
    fn point_end_to_end() {
        let rep = run_builtin(Instance::Point, 2, &PipelineConfig::default()).unwrap();
        assert_eq!(rep.verdict, PipelineVerdict::Match);
        assert_eq!(rep.accepted, vec![vec![0, 0]]);
        assert!(rep.rejected.contains(&vec![1, 1]));
    }

    #[test]
    fn skipping_rescale_on_unbalanced_input_breaks_the_budget() {
        let cfg = PipelineConfig {
            source: FactorSource::Unbalanced,
            skip_rescale: true,
            ..PipelineConfig::default()
        };
        let rep = run_builtin(Instance::Cube, 2, &cfg).unwrap();
        assert!(!rep.budget_check.passed);
        assert!(rep.rounding.entry_bound_violations > 0);
        assert_ne!(rep.verdict, PipelineVerdict::Match);
    }

    #[test]
    fn unbalanced_input_is_repaired_by_rescaling() {
        let cfg = PipelineConfig {
            source: FactorSource::Unbalanced,
            ..PipelineConfig::default()
        };
        let rep = run_builtin(Instance::Cube, 2, &cfg).unwrap();
        assert!(rep.factorization.lmax_u * rep.factorization.lmax_v > 100.0);
        assert!(rep.rescale.as_ref().unwrap().certificate);
        assert!(rep.budget_check.passed);
        assert_eq!(rep.verdict, PipelineVerdict::Match);
    }

    #[test]
    fn rejects_large_or_non_binary_input() {
        assert!(matches!(
            run_builtin(Instance::Cube, 5, &PipelineConfig::default()),
            Err(Error::TooLarge { .. })
        ));
        assert!(run_builtin(Instance::MomentPolygon, 3, &PipelineConfig::default()).is_err());
    }
}
