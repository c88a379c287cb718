//! Derivative-free minimisation and low-discrepancy start points.

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Element `index` (1-based is customary; 0 gives the origin) of the Halton
/// sequence in `dim` dimensions.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    PRIMES[..dim]
        .iter()
        .map(|&base| {
            let b = u64::from(base);
            let (mut i, mut f, mut r) = (index, 1.0, 0.0);
            while i > 0 {
                f /= b as f64;
                r += f * (i % b) as f64;
                i /= b;
            }
            r
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub initial_step: f64,
    /// Stop once the spread of simplex values falls below this.
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { initial_step: 0.5, f_tol: 1e-9, x_tol: 1e-7, max_iter: 4000 }
    }
}

impl NelderMead {
    /// Minimises `f` from `x0`. Non-finite values are treated as +inf.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        // Dimension-adaptive coefficients.
        let nf = n as f64;
        let (alpha, gamma) = (1.0, 1.0 + 2.0 / nf);
        let (rho, sigma) = (0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

        let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] += self.initial_step;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            iterations += 1;
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[n] - values[0];
            let size = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if (spread.is_finite() && spread <= self.f_tol) || size <= self.x_tol {
                converged = true;
                break;
            }

            let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / nf).collect();
            let toward =
                |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect() };

            let xr = toward(-alpha);
            let fr = eval(&xr);
            if fr < values[0] {
                let xe = toward(-gamma);
                let fe = eval(&xe);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < values[n] {
                let x = toward(-rho);
                let v = eval(&x);
                (x, v)
            } else {
                let x = toward(rho);
                let v = eval(&x);
                (x, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
                continue;
            }
            for i in 1..=n {
                let shrunk: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, v)| b + sigma * (v - b)).collect();
                values[i] = eval(&shrunk);
                simplex[i] = shrunk;
            }
        }
        let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
        Minimum { x: simplex[best].clone(), fx: values[best], iterations, converged }
    }
}
