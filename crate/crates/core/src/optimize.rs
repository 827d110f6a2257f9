//! Nelder–Mead simplex search restricted to a box.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when `f_max - f_min <= ftol · |f_min|`.
    pub ftol: f64,
    /// Stop when every simplex edge is below `xtol · max(1, |x_i|)`.
    pub xtol: f64,
    /// Initial simplex edge as a fraction of `|x0_i|`.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            ftol: 1e-8,
            xtol: 1e-14,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Minimises `f` from `x0`, projecting every trial point onto
/// `[lower, upper]`. Infeasible points may return `+∞`.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &NelderMeadOptions,
) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    project(&mut start, lower, upper);
    let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
    for i in 0..n {
        let mut p = start.clone();
        let step = if p[i] != 0.0 { opts.initial_step * p[i].abs() } else { 2.5e-4 };
        p[i] += step;
        if p[i] > upper[i] {
            p[i] = start[i] - step;
        }
        project(&mut p, lower, upper);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while evals < opts.max_evals {
        // stable ordering keeps ties deterministic
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[n];
        let spread_ok = best.is_finite() && worst - best <= opts.ftol * best.abs();
        let size_ok = simplex.iter().skip(1).all(|p| {
            p.iter()
                .zip(&simplex[0])
                .all(|(a, b)| (a - b).abs() <= opts.xtol * b.abs().max(1.0))
        });
        if spread_ok || size_ok {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut p, lower, upper);
            p
        };

        let reflected = along(1.0);
        let fr = eval(&reflected, &mut evals);
        if fr < values[0] {
            let expanded = along(2.0);
            let fe = eval(&expanded, &mut evals);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let p = along(0.5);
            let v = eval(&p, &mut evals);
            (p, v)
        } else {
            let p = along(-0.5);
            let v = eval(&p, &mut evals);
            (p, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        let best_pt = simplex[0].clone();
        for i in 1..=n {
            let mut p: Vec<f64> = best_pt
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + 0.5 * (x - b))
                .collect();
            project(&mut p, lower, upper);
            values[i] = eval(&p, &mut evals);
            simplex[i] = p;
        }
    }

    let (idx, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    OptimResult {
        x: simplex[idx].clone(),
        fx: values[idx],
        evals,
        iterations,
        converged,
    }
}

/// Runs [`nelder_mead`] and restarts once from the best point with a fresh
/// simplex. The returned point is never worse than either run's start.
pub fn nelder_mead_restarted<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &NelderMeadOptions,
) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let first = nelder_mead(&mut f, x0, lower, upper, opts);
    let second = nelder_mead(&mut f, &first.x, lower, upper, opts);
    let evals = first.evals + second.evals;
    let iterations = first.iterations + second.iterations;
    let mut best = if second.fx <= first.fx { second } else { first };
    best.evals = evals;
    best.iterations = iterations;
    best
}
