//! Nelder–Mead downhill simplex minimization.
//!
//! Ties in the vertex ordering are broken by vertex index (stable sort), so a
//! run is fully determined by its inputs.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Stop once `f(worst) - f(best)` across the simplex drops below this.
    pub f_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimize `f` starting from `x0` with an initial simplex of `x0` plus one
/// vertex offset by `steps[i]` along each axis.
///
/// The returned point is never worse than `x0`.
pub fn nelder_mead<F>(x0: &[f64], steps: &[f64], opts: SimplexOptions, mut f: F) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(steps.len(), n, "one step per dimension");
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        f(x)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for (i, &s) in steps.iter().enumerate() {
        let mut v = x0.to_vec();
        v[i] += s;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut centroid = vec![0.0; n];
    let along = |from: &[f64], to: &[f64], t: f64| -> Vec<f64> {
        from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
    };

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if iterations >= opts.max_iterations || values[n] - values[0] < opts.f_tolerance {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }

        let worst = simplex[n].clone();
        let reflected = along(&centroid, &worst, -REFLECT);
        let f_r = eval(&reflected);

        if f_r < values[0] {
            let expanded = along(&centroid, &worst, -REFLECT * EXPAND);
            let f_e = eval(&expanded);
            if f_e < f_r {
                simplex[n] = expanded;
                values[n] = f_e;
            } else {
                simplex[n] = reflected;
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_r;
            continue;
        }

        // outside contraction toward the reflected point, else inside toward the worst
        let outside = f_r < values[n];
        let contracted = if outside {
            along(&centroid, &reflected, CONTRACT)
        } else {
            along(&centroid, &worst, CONTRACT)
        };
        let f_c = eval(&contracted);
        let accept = if outside { f_c <= f_r } else { f_c < values[n] };
        if accept {
            simplex[n] = contracted;
            values[n] = f_c;
            continue;
        }

        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = along(&best, &simplex[i], SHRINK);
            values[i] = eval(&simplex[i]);
        }
    }

    SimplexResult {
        x: simplex[0].clone(),
        f: values[0],
        iterations,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPTS: SimplexOptions = SimplexOptions {
        max_iterations: 2000,
        f_tolerance: 1e-14,
    };

    #[test]
    fn minimizes_rosenbrock() {
        let r = nelder_mead(&[-1.2, 1.0], &[0.1, 0.1], OPTS, |x| {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        });
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{:?}", r.x);
    }

    #[test]
    fn minimizes_shifted_quadratic_in_five_dims() {
        let target = [3.0, -1.0, 0.5, 2.0, -4.0];
        let r = nelder_mead(&[0.0; 5], &[1.0; 5], OPTS, |x| {
            x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum()
        });
        for (a, b) in r.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn never_worse_than_start_on_plateaus() {
        // piecewise-constant objective, like a rasterized IoU
        let f = |x: &[f64]| -((x[0].floor() + x[1].floor()).min(3.0));
        let start = [0.2, 0.3];
        let r = nelder_mead(&start, &[0.7, 0.7], OPTS, f);
        assert!(r.f <= f(&start));
    }

    #[test]
    fn zero_iterations_returns_best_initial_vertex() {
        let r = nelder_mead(
            &[0.0],
            &[1.0],
            SimplexOptions { max_iterations: 0, f_tolerance: 0.0 },
            |x| (x[0] - 1.0).abs(),
        );
        assert_eq!(r.x, vec![1.0]);
        assert_eq!(r.evaluations, 2);
    }
}
