//! Convex hull membership and Euclidean projection.
//!
//! [`project`] computes the nearest point of the hull of a [`PointSet`] to a
//! query with an away-step Frank–Wolfe method, returning the convex weights
//! that produce it. [`classify`] turns a projection into a certified verdict:
//!
//! * **Inside**: the weights reconstruct a point within `τ` of the query.
//! * **Outside**: `w = q − p` is re-checked against every row with a fresh
//!   scan; `w·q − maxᵢ w·aᵢ > 0` proves separation no matter how accurate
//!   the projection was.
//! * **Indeterminate**: neither check passed, even after one re-solve at a
//!   tighter gap.

mod points;
mod solver;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use points::PointSet;
use solver::{solve, StopRule};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HullError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in input")]
    NonFiniteInput,
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    VanillaFw,
    #[default]
    AwayStepFw,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vanilla" | "vanilla_fw" | "vanilla-fw" => Ok(Self::VanillaFw),
            "away" | "away_step" | "away_step_fw" | "away-step-fw" => Ok(Self::AwayStepFw),
            other => Err(format!(
                "unknown solver variant '{other}' (expected vanilla_fw or away_step_fw)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Duality-gap stopping threshold, relative to `max(1, f(α₀))`.
    pub gap_tolerance: f64,
    /// Distance at or below which a query counts as inside (`τ`).
    pub membership_tolerance: f64,
    /// `None` means `50·n`, capped at one million.
    pub max_iterations: Option<usize>,
    pub variant: Variant,
    /// Only consumed by instance generators; the solver is deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-10,
            membership_tolerance: 1e-6,
            max_iterations: None,
            variant: Variant::AwayStepFw,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), HullError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.gap_tolerance) {
            return Err(HullError::InvalidConfig(format!(
                "gap_tolerance must be positive, got {}",
                self.gap_tolerance
            )));
        }
        if !positive(self.membership_tolerance) {
            return Err(HullError::InvalidConfig(format!(
                "membership_tolerance must be positive, got {}",
                self.membership_tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(HullError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn iteration_limit(&self, n: usize) -> usize {
        self.max_iterations
            .unwrap_or_else(|| n.saturating_mul(50).min(1_000_000))
            .max(1)
    }
}

/// The nearest hull point to a query, as a convex combination of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// `(row, weight)` pairs sorted by row; weights are positive and sum to 1.
    pub weights: Vec<(usize, f64)>,
    pub projected_point: Vec<f64>,
    /// `q − projected_point`.
    pub residual: Vec<f64>,
    pub distance: f64,
    pub final_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Projection {
    /// Interval guaranteed to contain the exact distance from the query to
    /// the hull, from `f(α) − f(α*) ≤ gap`.
    pub fn distance_bounds(&self) -> (f64, f64) {
        let sq = self.distance * self.distance;
        ((sq - 2.0 * self.final_gap).max(0.0).sqrt(), self.distance)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Inside,
    Outside,
    Indeterminate,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Inside => "Inside",
            Status::Outside => "Outside",
            Status::Indeterminate => "Indeterminate",
        })
    }
}

/// Proof that a query lies outside the hull: `normal·q − maxᵢ normal·aᵢ = margin > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatingHyperplane {
    pub normal: Vec<f64>,
    pub margin: f64,
    /// Row attaining `maxᵢ normal·aᵢ`.
    pub support_row: usize,
    /// Magnitude of the summands in the margin computation; the margin is
    /// accepted only above `10·ε·scale`.
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub status: Status,
    pub projection: Projection,
    /// Present exactly when `status` is `Outside`.
    pub certificate: Option<SeparatingHyperplane>,
    pub tolerance: f64,
}

fn check_query(points: &PointSet, q: &[f64], config: &SolverConfig) -> Result<(), HullError> {
    config.validate()?;
    if q.len() != points.dim() {
        return Err(HullError::DimensionMismatch {
            expected: points.dim(),
            found: q.len(),
        });
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(HullError::NonFiniteInput);
    }
    Ok(())
}

/// Euclidean projection of `q` onto the convex hull of `points`.
pub fn project(
    points: &PointSet,
    q: &[f64],
    config: &SolverConfig,
) -> Result<Projection, HullError> {
    check_query(points, q, config)?;
    Ok(solve(points, q, config, config.gap_tolerance, StopRule::Gap, None))
}

/// [`project`], also returning the objective value at every iteration.
pub fn project_traced(
    points: &PointSet,
    q: &[f64],
    config: &SolverConfig,
) -> Result<(Projection, Vec<f64>), HullError> {
    check_query(points, q, config)?;
    let mut trace = Vec::new();
    let p = solve(
        points,
        q,
        config,
        config.gap_tolerance,
        StopRule::Gap,
        Some(&mut trace),
    );
    Ok((p, trace))
}

/// Recomputes `w·q − maxᵢ w·aᵢ` from scratch for `w = q − p`.
pub fn separation_certificate(points: &PointSet, q: &[f64], normal: &[f64]) -> SeparatingHyperplane {
    let (support_row, max_dot, max_magnitude) = points.argmax_dot_with_magnitude(normal);
    let q_dot: f64 = normal.iter().zip(q).map(|(w, x)| w * x).sum();
    let q_magnitude: f64 = normal.iter().zip(q).map(|(w, x)| (w * x).abs()).sum();
    SeparatingHyperplane {
        normal: normal.to_vec(),
        margin: q_dot - max_dot,
        support_row,
        scale: points.dim() as f64 * q_magnitude.max(max_magnitude),
    }
}

fn decide(points: &PointSet, q: &[f64], projection: Projection, tau: f64) -> MembershipVerdict {
    if projection.distance <= tau {
        return MembershipVerdict {
            status: Status::Inside,
            projection,
            certificate: None,
            tolerance: tau,
        };
    }
    let cert = separation_certificate(points, q, &projection.residual);
    let (status, certificate) = if cert.margin > 10.0 * f64::EPSILON * cert.scale {
        (Status::Outside, Some(cert))
    } else {
        (Status::Indeterminate, None)
    };
    MembershipVerdict {
        status,
        projection,
        certificate,
        tolerance: tau,
    }
}

/// Decides whether `q` lies in the hull of `points` at tolerance
/// `config.membership_tolerance`, with a checkable certificate.
pub fn classify(
    points: &PointSet,
    q: &[f64],
    config: &SolverConfig,
) -> Result<MembershipVerdict, HullError> {
    check_query(points, q, config)?;
    let tau = config.membership_tolerance;
    let rule = StopRule::Decide { tau };
    let first = solve(points, q, config, config.gap_tolerance, rule, None);
    let verdict = decide(points, q, first, tau);
    if verdict.status != Status::Indeterminate {
        return Ok(verdict);
    }
    let retry = solve(points, q, config, config.gap_tolerance / 100.0, rule, None);
    Ok(decide(points, q, retry, tau))
}

/// [`classify`] over many queries. Output order matches input order and each
/// element equals the corresponding single-query result.
pub fn batch_classify<Q>(
    points: &PointSet,
    queries: &[Q],
    config: &SolverConfig,
) -> Vec<Result<MembershipVerdict, HullError>>
where
    Q: AsRef<[f64]> + Sync,
{
    queries
        .par_iter()
        .map(|q| classify(points, q.as_ref(), config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> PointSet {
        PointSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn interior_point_of_triangle() {
        let cfg = SolverConfig::default();
        let proj = project(&triangle(), &[0.2, 0.2], &cfg).unwrap();
        let (lo, _) = proj.distance_bounds();
        assert_eq!(lo, 0.0);
        assert!(proj.distance <= (2.0 * proj.final_gap).sqrt() + 1e-15);
        assert!((proj.projected_point[0] - 0.2).abs() < 1e-5);
    }

    #[test]
    fn symmetric_triangle_projection() {
        let cfg = SolverConfig::default();
        let proj = project(&triangle(), &[2.0, 2.0], &cfg).unwrap();
        assert!((proj.distance - 1.5 * 2f64.sqrt()).abs() < 1e-6);
        assert!((proj.projected_point[0] - 0.5).abs() < 1e-6);
        assert!((proj.projected_point[1] - 0.5).abs() < 1e-6);
        assert!(proj.converged);
    }

    #[test]
    fn vanilla_variant_agrees() {
        let cfg = SolverConfig {
            variant: Variant::VanillaFw,
            ..Default::default()
        };
        let proj = project(&triangle(), &[2.0, 2.0], &cfg).unwrap();
        assert!((proj.distance - 1.5 * 2f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn vertices_are_inside() {
        let cfg = SolverConfig::default();
        for v in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]] {
            let verdict = classify(&triangle(), &v, &cfg).unwrap();
            assert_eq!(verdict.status, Status::Inside);
            assert!(verdict.projection.distance <= 1e-6);
        }
    }

    #[test]
    fn interval_membership_certificate() {
        let points = PointSet::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let verdict = classify(&points, &[1.5], &SolverConfig::default()).unwrap();
        assert_eq!(verdict.status, Status::Outside);
        let cert = verdict.certificate.unwrap();
        assert_eq!(cert.normal, vec![0.5]);
        // w·q − max w·aᵢ = 0.75 − 0.5
        assert_eq!(cert.margin, 0.25);
        assert_eq!(cert.support_row, 1);
    }

    #[test]
    fn single_point_hull() {
        let points = PointSet::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let proj = project(&points, &[4.0, 6.0], &SolverConfig::default()).unwrap();
        assert_eq!(proj.distance, 5.0);
        assert_eq!(proj.iterations, 0);
        assert_eq!(proj.weights, vec![(0, 1.0)]);
    }

    #[test]
    fn duplicate_rows_prefer_lowest_index() {
        let points =
            PointSet::from_rows(&[vec![0.0], vec![1.0], vec![1.0], vec![0.0]]).unwrap();
        let verdict = classify(&points, &[3.0], &SolverConfig::default()).unwrap();
        assert_eq!(verdict.projection.weights, vec![(1, 1.0)]);
    }

    #[test]
    fn input_errors() {
        let cfg = SolverConfig::default();
        assert_eq!(
            project(&triangle(), &[1.0], &cfg),
            Err(HullError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
        assert_eq!(
            classify(&triangle(), &[f64::NAN, 0.0], &cfg),
            Err(HullError::NonFiniteInput)
        );
        let bad = SolverConfig {
            membership_tolerance: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            classify(&triangle(), &[0.0, 0.0], &bad),
            Err(HullError::InvalidConfig(_))
        ));
    }

    #[test]
    fn batch_is_order_preserving_with_inline_errors() {
        let cfg = SolverConfig::default();
        assert!(batch_classify::<Vec<f64>>(&triangle(), &[], &cfg).is_empty());
        let queries = vec![vec![0.0, 0.0], vec![5.0], vec![3.0, 3.0]];
        let out = batch_classify(&triangle(), &queries, &cfg);
        assert_eq!(out[0].as_ref().unwrap().status, Status::Inside);
        assert!(out[1].is_err());
        assert_eq!(out[2].as_ref().unwrap().status, Status::Outside);
    }

    #[test]
    fn config_defaults() {
        let cfg = SolverConfig::default();
        assert_eq!(cfg.iteration_limit(10), 500);
        assert_eq!(cfg.iteration_limit(100_000), 1_000_000);
        assert_eq!(cfg.gap_tolerance, 1e-10);
        assert_eq!(cfg.membership_tolerance, 1e-6);
    }
}
