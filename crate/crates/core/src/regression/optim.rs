//! Derivative-free-gradient quasi-Newton minimization.
//!
//! BFGS with central finite-difference gradients and Armijo backtracking,
//! falling back to a Nelder–Mead simplex restart when a line search stalls.
//! Objectives return `f64::INFINITY` for out-of-domain points.

/// Result of a minimization run.
#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub used_simplex: bool,
}

const FD_STEP: f64 = 1e-6;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const SIMPLEX_ROUNDS: usize = 400;

/// Central finite-difference gradient with a relative step.
pub fn fd_gradient(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut point = x.to_vec();
    for i in 0..x.len() {
        let h = FD_STEP * x[i].abs().max(1.0);
        point[i] = x[i] + h;
        let up = f(&point);
        point[i] = x[i] - h;
        let down = f(&point);
        point[i] = x[i];
        grad[i] = if up.is_finite() && down.is_finite() {
            (up - down) / (2.0 * h)
        } else {
            // One-sided fallback at a domain edge.
            let center = f(&point);
            if up.is_finite() {
                (up - center) / h
            } else if down.is_finite() {
                (center - down) / h
            } else {
                0.0
            }
        };
    }
    grad
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `f` starting at `x0`.
///
/// Convergence requires both a relative objective change below `f_tol` and
/// an infinity-norm gradient below `g_tol`.
pub fn minimize(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    f_tol: f64,
    g_tol: f64,
    max_iterations: usize,
) -> OptimOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut used_simplex = false;

    if !fx.is_finite() {
        // Starting point outside the domain: let the simplex find a way in,
        // probing both directions at several scales for a finite vertex.
        for scale in [1.0, -1.0, 0.25, -0.25, 4.0, -4.0] {
            if let Some((sx, sf)) = nelder_mead(f, &x, scale, SIMPLEX_ROUNDS * 4) {
                x = sx;
                fx = sf;
                used_simplex = true;
                break;
            }
        }
        if !fx.is_finite() {
            return OptimOutcome {
                grad: vec![f64::NAN; n],
                x,
                f: fx,
                iterations: 0,
                converged: false,
                used_simplex,
            };
        }
    }

    let mut grad = fd_gradient(f, &x);
    let mut h_inv = identity(n);
    let mut iterations = 0;

    while iterations < max_iterations {
        iterations += 1;
        if norm_inf(&grad) < g_tol {
            return OptimOutcome { x, f: fx, grad, iterations, converged: true, used_simplex };
        }

        let mut direction = mat_vec(&h_inv, &grad);
        for d in &mut direction {
            *d = -*d;
        }
        let mut slope = dot(&grad, &direction);
        if !slope.is_finite() || slope >= 0.0 {
            h_inv = identity(n);
            direction = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &direction);
        }

        // Armijo backtracking line search.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> =
                x.iter().zip(&direction).map(|(xi, di)| xi + step * di).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + ARMIJO_C1 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }

        let (x_new, f_new) = match accepted {
            Some(pair) => pair,
            None => {
                // Line search stalled: restart from a simplex solution.
                used_simplex = true;
                match nelder_mead(f, &x, 0.1, SIMPLEX_ROUNDS) {
                    Some((sx, sf)) if sf < fx - 1e-14 * fx.abs().max(1.0) => (sx, sf),
                    _ => {
                        let converged = norm_inf(&grad) < g_tol * 10.0;
                        return OptimOutcome { x, f: fx, grad, iterations, converged, used_simplex };
                    }
                }
            }
        };

        let grad_new = fd_gradient(f, &x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm_inf(&s) * norm_inf(&y) {
            bfgs_update(&mut h_inv, &s, &y, sy);
        } else {
            h_inv = identity(n);
        }

        let f_change = (fx - f_new).abs() / fx.abs().max(1.0);
        x = x_new;
        fx = f_new;
        grad = grad_new;

        if f_change < f_tol && norm_inf(&grad) < g_tol {
            return OptimOutcome { x, f: fx, grad, iterations, converged: true, used_simplex };
        }
    }

    let converged = norm_inf(&grad) < g_tol;
    OptimOutcome { x, f: fx, grad, iterations, converged, used_simplex }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ with ρ = 1/(sᵀy).
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                + rho * (1.0 + rho * yhy) * s[i] * s[j];
        }
    }
}

/// Nelder–Mead simplex minimization; returns the best point found, or `None`
/// if every probed point was out of domain.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    scale: f64,
    rounds: usize,
) -> Option<(Vec<f64>, f64)> {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += scale * x0[i].abs().max(0.25);
        let fv = f(&v);
        simplex.push((v, fv));
    }
    if simplex.iter().all(|(_, fv)| !fv.is_finite()) {
        return None;
    }

    for _ in 0..rounds {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst.is_finite() && (worst - best).abs() <= 1e-12 * best.abs().max(1.0) {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> =
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| 2.0 * c - w).collect();
        let fr = f(&reflect);

        if fr < simplex[0].1 {
            let expand: Vec<f64> =
                centroid.iter().zip(&simplex[n].0).map(|(c, w)| 3.0 * c - 2.0 * w).collect();
            let fe = f(&expand);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| 0.5 * (c + w))
                .collect();
            let fc = f(&contract);
            if fc < simplex[n].1 {
                simplex[n] = (contract, fc);
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    for (v, a) in vertex.0.iter_mut().zip(&anchor) {
                        *v = 0.5 * (*v + a);
                    }
                    vertex.1 = f(&vertex.0);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex[0].1.is_finite().then(|| simplex[0].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_bowl() {
        let mut f = |x: &[f64]| (x[0] - 3.0).powi(2) + 4.0 * (x[1] + 1.0).powi(2);
        let out = minimize(&mut f, &[10.0, 10.0], 1e-12, 1e-8, 200);
        assert!(out.converged);
        assert_abs_diff_eq!(out.x[0], 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(out.x[1], -1.0, epsilon = 1e-6);
    }

    #[test]
    fn rosenbrock_valley() {
        let mut f =
            |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let out = minimize(&mut f, &[-1.2, 1.0], 1e-14, 1e-6, 2000);
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(out.x[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn domain_wall_is_respected() {
        // Minimum at x = 0.5 but x < 0 is out of domain.
        let mut f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::INFINITY
            } else {
                (x[0] - 0.5).powi(2) + x[1].powi(2)
            }
        };
        let out = minimize(&mut f, &[4.0, -2.0], 1e-12, 1e-7, 500);
        assert_abs_diff_eq!(out.x[0], 0.5, epsilon = 1e-5);
        assert_abs_diff_eq!(out.x[1], 0.0, epsilon = 1e-5);
    }

    #[test]
    fn infinite_start_recovers_via_simplex() {
        let mut f = |x: &[f64]| {
            if x[0].abs() > 2.0 {
                f64::INFINITY
            } else {
                (x[0] - 1.0).powi(2)
            }
        };
        let out = minimize(&mut f, &[3.0], 1e-12, 1e-7, 500);
        assert!(out.used_simplex);
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-5);
    }
}
