//! Bounded Nelder-Mead simplex minimization.
//!
//! Standard coefficients (reflection 1.0, expansion 2.0, contraction 0.5,
//! shrink 0.5); candidate points are clamped into the bounding box.
//! Non-finite objective values are treated as +infinity so the simplex
//! walks out of bad regions instead of aborting.

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iters: usize,
    /// Absolute spread of objective values across the simplex to stop at.
    pub f_tol: f64,
    /// Infinity-norm spread of vertex coordinates to stop at.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_iters: 2000, f_tol: 1e-14, x_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub evals: usize,
    pub converged: bool,
}

fn clamp_into(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Minimizes `f` starting from `x0`, keeping every vertex inside `bounds`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &NelderMeadOptions,
) -> NelderMeadResult {
    assert_eq!(x0.len(), bounds.len(), "dimension mismatch");
    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // Initial simplex: x0 plus a step of 10% of the box width per axis,
    // reflected inward when it would leave the box.
    let mut start = x0.to_vec();
    clamp_into(&mut start, bounds);
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(dim + 1);
    let fv = eval(&start, &mut evals);
    simplex.push((fv, start.clone()));
    for i in 0..dim {
        let (lo, hi) = bounds[i];
        let width = hi - lo;
        let step = if width > 0.0 { 0.1 * width } else { 1e-8 };
        let mut v = start.clone();
        v[i] = if v[i] + step <= hi { v[i] + step } else { v[i] - step };
        clamp_into(&mut v, bounds);
        let fv = eval(&v, &mut evals);
        simplex.push((fv, v));
    }

    let mut iters = 0usize;
    let mut converged = false;
    while iters < opts.max_iters {
        iters += 1;
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));

        let f_best = simplex[0].0;
        let f_worst = simplex[dim].0;
        let f_spread = f_worst - f_best;
        let mut x_spread = 0.0f64;
        for d in 0..dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (_, v) in &simplex {
                lo = lo.min(v[d]);
                hi = hi.max(v[d]);
            }
            x_spread = x_spread.max(hi - lo);
        }
        if f_spread <= opts.f_tol.max(1e-12 * f_best.abs()) && x_spread <= opts.x_tol {
            converged = true;
            break;
        }

        // Centroid of all vertices but the worst.
        let mut centroid = vec![0.0; dim];
        for (_, v) in simplex.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += v[d];
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let worst = simplex[dim].1.clone();
        let mut reflected = vec![0.0; dim];
        for d in 0..dim {
            reflected[d] = centroid[d] + REFLECT * (centroid[d] - worst[d]);
        }
        clamp_into(&mut reflected, bounds);
        let f_reflected = eval(&reflected, &mut evals);

        if f_reflected < simplex[0].0 {
            let mut expanded = vec![0.0; dim];
            for d in 0..dim {
                expanded[d] = centroid[d] + EXPAND * (reflected[d] - centroid[d]);
            }
            clamp_into(&mut expanded, bounds);
            let f_expanded = eval(&expanded, &mut evals);
            simplex[dim] = if f_expanded < f_reflected {
                (f_expanded, expanded)
            } else {
                (f_reflected, reflected)
            };
            continue;
        }
        if f_reflected < simplex[dim - 1].0 {
            simplex[dim] = (f_reflected, reflected);
            continue;
        }

        // Contract toward the better of worst/reflected.
        let (toward, f_toward) = if f_reflected < simplex[dim].0 {
            (&reflected, f_reflected)
        } else {
            (&worst, simplex[dim].0)
        };
        let mut contracted = vec![0.0; dim];
        for d in 0..dim {
            contracted[d] = centroid[d] + CONTRACT * (toward[d] - centroid[d]);
        }
        clamp_into(&mut contracted, bounds);
        let f_contracted = eval(&contracted, &mut evals);
        if f_contracted < f_toward {
            simplex[dim] = (f_contracted, contracted);
            continue;
        }

        // Shrink everything toward the best vertex.
        let best = simplex[0].1.clone();
        for entry in simplex.iter_mut().skip(1) {
            let mut v = entry.1.clone();
            for d in 0..dim {
                v[d] = best[d] + SHRINK * (v[d] - best[d]);
            }
            clamp_into(&mut v, bounds);
            let fv = eval(&v, &mut evals);
            *entry = (fv, v);
        }
    }

    simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (f_best, x_best) = simplex.swap_remove(0);
    NelderMeadResult { x: x_best, f: f_best, iters, evals, converged }
}
