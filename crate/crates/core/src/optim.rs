//! Nelder–Mead minimization with a projection hook for simple constraints.

use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop when the simplex diameter falls below this.
    pub x_tol: f64,
    /// Stop when the spread of simplex values falls below this; `0` disables
    /// the test, which suits piecewise-constant objectives.
    pub f_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { max_evals: 200, x_tol: 1e-6, f_tol: 1e-9, initial_step: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimizes `f` from `x0`. Every trial point is passed through
    /// `project` before evaluation, so the search stays in the feasible set.
    pub fn minimize<F, P>(&self, mut f: F, x0: &[f64], project: P) -> Result<Minimum>
    where
        F: FnMut(&[f64]) -> Result<f64>,
        P: Fn(&mut [f64]),
    {
        let dim = x0.len();
        let mut evals = 0;
        let mut eval = |x: &mut Vec<f64>, evals: &mut usize| -> Result<f64> {
            project(x);
            *evals += 1;
            let v = f(x)?;
            Ok(if v.is_nan() { f64::INFINITY } else { v })
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        let mut start = x0.to_vec();
        let v0 = eval(&mut start, &mut evals)?;
        simplex.push((start.clone(), v0));
        for i in 0..dim {
            let mut p = start.clone();
            p[i] += self.initial_step;
            let v = eval(&mut p, &mut evals)?;
            simplex.push((p, v));
        }

        let mut converged = false;
        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[dim].1;
            let diameter = simplex
                .iter()
                .skip(1)
                .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if diameter <= self.x_tol || (self.f_tol > 0.0 && worst - best <= self.f_tol) {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; dim];
            for (p, _) in simplex.iter().take(dim) {
                for (c, x) in centroid.iter_mut().zip(p) {
                    *c += x / dim as f64;
                }
            }
            let along = |t: f64, p: &[f64]| -> Vec<f64> {
                centroid.iter().zip(p).map(|(c, x)| c + t * (x - c)).collect()
            };

            let mut reflected = along(-1.0, &simplex[dim].0);
            let fr = eval(&mut reflected, &mut evals)?;
            if fr < simplex[0].1 {
                let mut expanded = along(-2.0, &simplex[dim].0);
                let fe = eval(&mut expanded, &mut evals)?;
                simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
                continue;
            }
            if fr < simplex[dim - 1].1 {
                simplex[dim] = (reflected, fr);
                continue;
            }
            let (mut contracted, outside) = if fr < simplex[dim].1 {
                (along(-0.5, &simplex[dim].0), true)
            } else {
                (along(0.5, &simplex[dim].0), false)
            };
            let fc = eval(&mut contracted, &mut evals)?;
            let limit = if outside { fr } else { simplex[dim].1 };
            if fc < limit {
                simplex[dim] = (contracted, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for item in simplex.iter_mut().skip(1) {
                let mut p: Vec<f64> = anchor.iter().zip(&item.0).map(|(a, x)| a + 0.5 * (x - a)).collect();
                let v = eval(&mut p, &mut evals)?;
                *item = (p, v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Ok(Minimum { x, value, evals, converged })
    }
}
