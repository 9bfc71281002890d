//! L-BFGS with Armijo backtracking line search. Deterministic: no
//! randomness, fixed evaluation order.

use crate::errors::{DeidError, Result};

/// Optimizer settings.
#[derive(Debug, Clone)]
pub struct LbfgsParams {
    /// Number of curvature pairs kept.
    pub memory: usize,
    pub max_iters: usize,
    /// Converged when ‖g‖₂ ≤ tolerance · max(1, ‖x‖₂).
    pub tolerance: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        LbfgsParams {
            memory: 7,
            max_iters: 100,
            tolerance: 1e-4,
            c1: 1e-4,
            max_backtracks: 40,
        }
    }
}

/// One accepted iteration.
#[derive(Debug, Clone)]
pub struct IterationLog {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which returns `(value, gradient)`. Returns the final
/// point and the per-iteration log. Fails on non-finite values with the
/// iteration trace in the message.
pub fn minimize<F>(
    mut x: Vec<f64>,
    params: &LbfgsParams,
    mut f: F,
) -> Result<(Vec<f64>, Vec<IterationLog>)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x.len();
    let mut logs: Vec<IterationLog> = Vec::new();
    let non_finite = |what: &str, iter: usize, logs: &[IterationLog]| {
        let tail: Vec<String> = logs
            .iter()
            .rev()
            .take(5)
            .map(|l| format!("iter {} value {:.6e} |g| {:.3e}", l.iter, l.value, l.grad_norm))
            .collect();
        DeidError::Numerical(format!(
            "{what} became non-finite at iteration {iter}; recent trace: [{}]",
            tail.join("; ")
        ))
    };

    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return Err(non_finite("objective", 0, &logs));
    }
    // curvature history, newest last
    let mut hist_s: Vec<Vec<f64>> = Vec::new();
    let mut hist_y: Vec<Vec<f64>> = Vec::new();
    let mut hist_rho: Vec<f64> = Vec::new();

    for iter in 0..params.max_iters {
        let gnorm = norm2(&g);
        if gnorm <= params.tolerance * norm2(&x).max(1.0) {
            break;
        }
        // two-loop recursion: d = -H g
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = vec![0.0; hist_s.len()];
        for k in (0..hist_s.len()).rev() {
            let a = hist_rho[k] * dot(&hist_s[k], &d);
            alphas[k] = a;
            for i in 0..n {
                d[i] -= a * hist_y[k][i];
            }
        }
        if let (Some(s), Some(y)) = (hist_s.last(), hist_y.last()) {
            let gamma = dot(s, y) / dot(y, y).max(f64::MIN_POSITIVE);
            for v in &mut d {
                *v *= gamma;
            }
        }
        for k in 0..hist_s.len() {
            let b = hist_rho[k] * dot(&hist_y[k], &d);
            for i in 0..n {
                d[i] += (alphas[k] - b) * hist_s[k][i];
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            // not a descent direction; restart from steepest descent
            hist_s.clear();
            hist_y.clear();
            hist_rho.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = if logs.is_empty() && hist_s.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..params.max_backtracks {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = f(&xt);
            if !ft.is_finite() {
                step *= 0.5;
                continue;
            }
            if ft <= fx + params.c1 * step * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else {
            // no progress possible along this direction
            break;
        };
        if !norm2(&gt).is_finite() {
            return Err(non_finite("gradient", iter, &logs));
        }
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-10 {
            hist_s.push(s);
            hist_y.push(yv);
            hist_rho.push(1.0 / sy);
            if hist_s.len() > params.memory {
                hist_s.remove(0);
                hist_y.remove(0);
                hist_rho.remove(0);
            }
        }
        x = xt;
        fx = ft;
        g = gt;
        logs.push(IterationLog {
            iter,
            value: fx,
            grad_norm: norm2(&g),
            step,
        });
    }
    Ok((x, logs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        // f(x) = Σ (x_i - i)², minimum at x_i = i
        let f = |x: &[f64]| {
            let mut v = 0.0;
            let mut g = vec![0.0; x.len()];
            for (i, xi) in x.iter().enumerate() {
                let d = xi - i as f64;
                v += d * d;
                g[i] = 2.0 * d;
            }
            (v, g)
        };
        let params = LbfgsParams {
            tolerance: 1e-10,
            ..LbfgsParams::default()
        };
        let (x, _) = minimize(vec![0.0; 5], &params, f).unwrap();
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - i as f64).abs() < 1e-6, "x[{i}] = {xi}");
        }
    }

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (v, g)
        };
        let params = LbfgsParams {
            max_iters: 500,
            tolerance: 1e-8,
            ..LbfgsParams::default()
        };
        let (x, _) = minimize(vec![-1.2, 1.0], &params, f).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-4, "{x:?}");
    }

    #[test]
    fn objective_is_monotone_over_accepted_steps() {
        let f = |x: &[f64]| {
            let v: f64 = x.iter().map(|v| v.cosh()).sum();
            let g: Vec<f64> = x.iter().map(|v| v.sinh()).collect();
            (v, g)
        };
        let (_, logs) = minimize(vec![2.0, -3.0, 0.5], &LbfgsParams::default(), f).unwrap();
        for w in logs.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-12);
        }
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let f = |_: &[f64]| (f64::NAN, vec![0.0]);
        assert!(matches!(
            minimize(vec![1.0], &LbfgsParams::default(), f),
            Err(DeidError::Numerical(_))
        ));
    }
}
