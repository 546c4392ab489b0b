//! Conditional-gradient minimization of `½‖Σ α_i a_i − q‖²` over the simplex.
//!
//! The iterate is kept as an explicit sparse combination of rows (the active
//! set) and the point `p = Σ α_i a_i` is rebuilt from it every iteration so the
//! returned weights and point never drift apart.

use super::{points::dense_dot, PointSet, Projection, SolverConfig, Variant};

#[derive(Clone, Copy, Debug)]
pub(crate) enum StopRule {
    /// Stop once the duality gap falls below the gap threshold.
    Gap,
    /// Stop once membership at tolerance `tau` is decided: either the iterate
    /// is within `tau` of the query, or the gap is below threshold and small
    /// enough that `q − p` separates the query from every row.
    Decide { tau: f64 },
}

struct ActiveSet {
    rows: Vec<usize>,
    weights: Vec<f64>,
}

impl ActiveSet {
    fn position(&self, row: usize) -> Option<usize> {
        self.rows.iter().position(|&r| r == row)
    }

    fn rebuild_point(&self, points: &PointSet, p: &mut [f64]) {
        p.iter_mut().for_each(|x| *x = 0.0);
        for (&r, &w) in self.rows.iter().zip(&self.weights) {
            points.add_scaled_row(r, w, p);
        }
    }

    fn normalize(&mut self) {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
    }

    fn remove(&mut self, k: usize) {
        self.rows.swap_remove(k);
        self.weights.swap_remove(k);
    }
}

/// Bound on active-set steps between two scans of all rows.
const CORRECTIVE_STEPS_PER_ITERATION: usize = 1000;

fn sq_norm(v: &[f64]) -> f64 {
    dense_dot(v, v)
}

/// Moves `p` along the away-step or Frank–Wolfe direction with exact line
/// search and updates the active set to match. `false` when no descent
/// direction remains.
fn take_step(
    points: &PointSet,
    active: &mut ActiveSet,
    p: &mut [f64],
    grad: &[f64],
    dir: &mut [f64],
    fw_row: usize,
    away: Option<usize>,
) -> bool {
    let max_step = match away {
        None => {
            dir.iter_mut().zip(p.iter()).for_each(|(v, pj)| *v = -pj);
            points.add_scaled_row(fw_row, 1.0, dir);
            1.0
        }
        Some(k) => {
            dir.copy_from_slice(p);
            points.add_scaled_row(active.rows[k], -1.0, dir);
            let w = active.weights[k];
            w / (1.0 - w)
        }
    };
    let descent = -dense_dot(grad, dir);
    let curvature = sq_norm(dir);
    if !(descent > 0.0 && curvature > 0.0) {
        return false;
    }
    let step = (descent / curvature).min(max_step);

    match away {
        None => {
            if step >= 1.0 {
                active.rows.clear();
                active.weights.clear();
                active.rows.push(fw_row);
                active.weights.push(1.0);
            } else {
                active.weights.iter_mut().for_each(|w| *w *= 1.0 - step);
                match active.position(fw_row) {
                    Some(k) => active.weights[k] += step,
                    None => {
                        active.rows.push(fw_row);
                        active.weights.push(step);
                    }
                }
            }
        }
        Some(k) => {
            active.weights.iter_mut().for_each(|w| *w *= 1.0 + step);
            active.weights[k] -= step;
            if step >= max_step || active.weights[k] <= 0.0 {
                // Drop step: the away vertex leaves the active set.
                active.remove(k);
            }
        }
    }
    active.rebuild_point(points, p);
    true
}

/// Smallest and largest `⟨a_r, grad⟩` over the active rows, as
/// `(position, value)` pairs; ties go to the lower row index.
fn active_extremes(points: &PointSet, active: &ActiveSet, grad: &[f64]) -> ((usize, f64), (usize, f64)) {
    let mut lo = (usize::MAX, f64::INFINITY);
    let mut hi = (usize::MAX, f64::NEG_INFINITY);
    for (k, &r) in active.rows.iter().enumerate() {
        let v = points.dot(r, grad);
        if v < lo.1 || (v == lo.1 && r < active.rows[lo.0]) {
            lo = (k, v);
        }
        if v > hi.1 || (v == hi.1 && r < active.rows[hi.0]) {
            hi = (k, v);
        }
    }
    (lo, hi)
}

/// Minimizer of `‖Σ μ_j a_j − q‖` over the affine hull of the active rows,
/// with `Σ μ_j = 1`. `None` when the rows are affinely dependent to working
/// precision.
fn affine_minimizer(points: &PointSet, rows: &[usize], q: &[f64]) -> Option<Vec<f64>> {
    let m = rows.len() - 1;
    let base = points.row(rows[0]);
    let cols: Vec<Vec<f64>> = rows[1..]
        .iter()
        .map(|&r| {
            let mut v = points.row(r);
            v.iter_mut().zip(&base).for_each(|(x, b)| *x -= b);
            v
        })
        .collect();
    let target: Vec<f64> = q.iter().zip(&base).map(|(a, b)| a - b).collect();

    // Cholesky factor of the Gram matrix of the edge vectors, row-major lower.
    let mut l = vec![0.0; m * m];
    let max_diag = cols.iter().map(|c| sq_norm(c)).fold(0.0, f64::max);
    for i in 0..m {
        for j in 0..=i {
            let mut s = dense_dot(&cols[i], &cols[j]);
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if s.is_nan() || s <= 1e-12 * max_diag {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    let mut c: Vec<f64> = cols.iter().map(|col| dense_dot(col, &target)).collect();
    for i in 0..m {
        for k in 0..i {
            c[i] -= l[i * m + k] * c[k];
        }
        c[i] /= l[i * m + i];
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            c[i] -= l[k * m + i] * c[k];
        }
        c[i] /= l[i * m + i];
    }
    let mut mu = Vec::with_capacity(m + 1);
    mu.push(1.0 - c.iter().sum::<f64>());
    mu.extend(c);
    Some(mu)
}

fn objective(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
}

/// Wolfe minor cycles: move toward the affine minimizer of the active rows,
/// dropping rows whose weight reaches zero, until that minimizer has positive
/// weights. Leaves the active set untouched and returns `false` if a system is
/// singular or the objective would rise.
fn affine_correction(points: &PointSet, active: &mut ActiveSet, p: &mut [f64], q: &[f64]) -> bool {
    let before = objective(p, q);
    let saved = (active.rows.clone(), active.weights.clone());
    let restore = |active: &mut ActiveSet, p: &mut [f64]| {
        active.rows.clone_from(&saved.0);
        active.weights.clone_from(&saved.1);
        active.rebuild_point(points, p);
    };
    while active.rows.len() > 1 {
        let Some(mu) = affine_minimizer(points, &active.rows, q) else {
            restore(active, p);
            return false;
        };
        if mu.iter().all(|&w| w > 0.0) {
            active.weights = mu;
            break;
        }
        let mut theta = f64::INFINITY;
        let mut leaving = 0;
        for (k, (&w, &m)) in active.weights.iter().zip(&mu).enumerate() {
            if m <= 0.0 {
                let t = w / (w - m);
                if t < theta || (t == theta && active.rows[k] < active.rows[leaving]) {
                    theta = t;
                    leaving = k;
                }
            }
        }
        for (w, m) in active.weights.iter_mut().zip(&mu) {
            *w += theta * (m - *w);
        }
        active.weights[leaving] = 0.0;
        let mut k = 0;
        while k < active.rows.len() {
            if active.weights[k] <= 0.0 {
                active.remove(k);
            } else {
                k += 1;
            }
        }
        active.normalize();
    }
    active.rebuild_point(points, p);
    if objective(p, q) > before {
        restore(active, p);
        return false;
    }
    true
}

fn update_gradient(grad: &mut [f64], p: &[f64], q: &[f64]) -> f64 {
    for ((g, pj), qj) in grad.iter_mut().zip(p).zip(q) {
        *g = pj - qj;
    }
    0.5 * sq_norm(grad)
}

pub(crate) fn solve(
    points: &PointSet,
    q: &[f64],
    config: &SolverConfig,
    gap_tolerance: f64,
    rule: StopRule,
    mut trace: Option<&mut Vec<f64>>,
) -> Projection {
    let n = points.len();
    let d = points.dim();
    let max_iterations = config.iteration_limit(n);

    let start = points.nearest(q);
    let mut active = ActiveSet {
        rows: vec![start],
        weights: vec![1.0],
    };
    let mut p = points.row(start);
    let mut grad = vec![0.0; d];
    let mut dir = vec![0.0; d];

    let f0 = 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let gap_threshold = gap_tolerance * f0.max(1.0);
    let close_enough = |f: f64| matches!(rule, StopRule::Decide { tau } if 2.0 * f <= tau * tau);

    let mut iterations = 0usize;
    let mut gap;
    loop {
        let f = update_gradient(&mut grad, &p, q);
        if let Some(t) = trace.as_deref_mut() {
            t.push(f);
        }
        if n == 1 {
            gap = 0.0;
            break;
        }

        // Linear minimization: the row with the smallest gradient inner product.
        let (fw_row, fw_value) = points.argmin_dot(&grad);
        let grad_p = dense_dot(&grad, &p);
        gap = (grad_p - fw_value).max(0.0);

        let done = match rule {
            StopRule::Gap => gap <= gap_threshold,
            StopRule::Decide { .. } => close_enough(f) || (gap <= gap_threshold && gap <= f),
        };
        if done || iterations >= max_iterations {
            break;
        }

        let mut away = None;
        if config.variant == Variant::AwayStepFw && active.rows.len() > 1 {
            let (_, (k, value)) = active_extremes(points, &active, &grad);
            if value - grad_p > gap {
                away = Some(k);
            }
        }
        if !take_step(points, &mut active, &mut p, &grad, &mut dir, fw_row, away) {
            break;
        }
        iterations += 1;

        if config.variant == Variant::VanillaFw {
            continue;
        }
        if active.rows.len() > 1 && affine_correction(points, &mut active, &mut p, q) {
            if let Some(t) = trace.as_deref_mut() {
                t.push(objective(&p, q));
            }
            continue;
        }
        // Corrective steps restricted to the active rows, until their local
        // gap is small against the last global gap. Each costs a pass over
        // the active set instead of all rows and does not count as an
        // iteration.
        for _ in 0..CORRECTIVE_STEPS_PER_ITERATION {
            let f = update_gradient(&mut grad, &p, q);
            if close_enough(f) || active.rows.len() < 2 {
                break;
            }
            let ((lo_k, lo), (hi_k, hi)) = active_extremes(points, &active, &grad);
            if hi - lo <= 0.5 * gap {
                break;
            }
            let grad_p = dense_dot(&grad, &p);
            let away = (hi - grad_p > grad_p - lo).then_some(hi_k);
            let row = active.rows[lo_k];
            if !take_step(points, &mut active, &mut p, &grad, &mut dir, row, away) {
                break;
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(objective(&p, q));
            }
        }
    }

    active.normalize();
    active.rebuild_point(points, &mut p);
    let residual: Vec<f64> = q.iter().zip(&p).map(|(a, b)| a - b).collect();
    let distance = sq_norm(&residual).sqrt();
    let mut weights: Vec<(usize, f64)> = active
        .rows
        .iter()
        .copied()
        .zip(active.weights.iter().copied())
        .collect();
    weights.sort_unstable_by_key(|&(r, _)| r);

    Projection {
        weights,
        projected_point: p,
        residual,
        distance,
        final_gap: gap,
        iterations,
        converged: gap <= gap_threshold,
    }
}
