//! Derivative-free minimization: a plain Nelder-Mead simplex with a fixed
//! iteration budget. Deterministic for a fixed starting point.

/// Result of a Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` starting from `x0` with per-coordinate initial steps.
///
/// Standard coefficients (reflect 1, expand 2, contract 0.5, shrink 0.5);
/// stops when the relative spread of simplex values drops below `tol` or
/// the iteration budget runs out.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    max_iters: usize,
    tol: f64,
) -> NelderMeadResult {
    let n = x0.len();
    assert!(n > 0 && steps.len() == n);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if steps[i] != 0.0 { steps[i] } else { 1e-4 };
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        // order the simplex by value
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let reordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let revalues: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = reordered;
        values = revalues;

        let best = values[0];
        let worst = values[n];
        let spread = (worst - best).abs() / best.abs().max(worst.abs()).max(1e-300);
        if spread < tol {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; n];
        for p in simplex.iter().take(n) {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let point_at = |coef: f64, centroid: &[f64], worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = point_at(1.0, &centroid, &simplex[n]);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = point_at(2.0, &centroid, &simplex[n]);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] {
                point_at(0.5, &centroid, &simplex[n])
            } else {
                point_at(-0.5, &centroid, &simplex[n])
            };
            let fc = f(&contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                // shrink toward the best vertex
                let best_point = simplex[0].clone();
                for i in 1..=n {
                    for (p, b) in simplex[i].iter_mut().zip(&best_point) {
                        *p = b + 0.5 * (*p - b);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut best_i = 0;
    for i in 1..=n {
        if values[i] < values[best_i] {
            best_i = i;
        }
    }
    NelderMeadResult {
        x: simplex[best_i].clone(),
        fx: values[best_i],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_shifted_quadratic() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.5).powi(2) + 0.25;
        let r = nelder_mead(f, &[0.0, 0.0], &[0.5, 0.5], 2000, 1e-12);
        assert!(r.converged);
        assert!((r.x[0] - 3.0).abs() < 1e-5);
        assert!((r.x[1] + 1.5).abs() < 1e-5);
        assert!((r.fx - 0.25).abs() < 1e-9);
    }

    #[test]
    fn handles_rosenbrock_valley() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], 5000, 1e-14);
        assert!((r.x[0] - 1.0).abs() < 1e-4, "{:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn deterministic_for_fixed_start() {
        let f = |x: &[f64]| x[0].powi(4) + x[1].powi(2) + x[0] * x[1];
        let a = nelder_mead(f, &[1.0, -1.0], &[0.3, 0.3], 500, 1e-10);
        let b = nelder_mead(f, &[1.0, -1.0], &[0.3, 0.3], 500, 1e-10);
        assert_eq!(a.x, b.x);
        assert_eq!(a.fx, b.fx);
    }
}
