//! Small dense Levenberg–Marquardt solver with analytic Jacobians.
//!
//! The problems solved here have two or three parameters, so the normal
//! equations are formed explicitly and solved by Gaussian elimination.

/// A nonlinear least-squares problem `min Σ rᵢ(p)²`.
pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    /// Writes `n_residuals` values into `out`.
    fn residuals(&self, params: &[f64], out: &mut [f64]);
    /// Writes the row-major `n_residuals × n_params` Jacobian into `out`.
    fn jacobian(&self, params: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Converged when `|Δp| <= step_tolerance · (|p| + step_tolerance)`.
    pub step_tolerance: f64,
    /// Converged when the relative decrease of the objective is below this.
    pub cost_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            step_tolerance: 1e-10,
            cost_tolerance: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    StepTolerance,
    CostTolerance,
    /// The objective reached zero.
    ExactFit,
    /// No damped step decreases the objective any further.
    Stalled,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    /// Objective after the initial guess and after every accepted step.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

impl LmReport {
    pub fn converged(&self) -> bool {
        self.termination != Termination::IterationCap
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LmFailure {
    /// The initial guess or the model produced a non-finite residual.
    NonFinite,
    /// Iteration cap hit; carries the last accepted iterate.
    NotConverged(LmReport),
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub fn levenberg_marquardt<P: LeastSquares + ?Sized>(
    problem: &P,
    initial: &[f64],
    options: &LmOptions,
) -> Result<LmReport, LmFailure> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    assert_eq!(initial.len(), n, "initial guess has the wrong dimension");

    let mut params = initial.to_vec();
    let mut r = vec![0.0; m];
    let mut jac = vec![0.0; m * n];
    problem.residuals(&params, &mut r);
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(LmFailure::NonFinite);
    }
    let mut trace = vec![cost];
    let mut lambda = options.initial_damping;
    let mut candidate = vec![0.0; n];
    let mut r_candidate = vec![0.0; m];
    let mut iterations = 0;

    let report = |params: Vec<f64>, cost, trace, iterations, termination| LmReport {
        params,
        cost,
        cost_trace: trace,
        iterations,
        termination,
    };

    loop {
        if cost == 0.0 {
            return Ok(report(
                params,
                cost,
                trace,
                iterations,
                Termination::ExactFit,
            ));
        }
        if iterations >= options.max_iterations {
            return Err(LmFailure::NotConverged(report(
                params,
                cost,
                trace,
                iterations,
                Termination::IterationCap,
            )));
        }
        iterations += 1;

        problem.jacobian(&params, &mut jac);
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for row in 0..m {
            let jr = &jac[row * n..(row + 1) * n];
            for a in 0..n {
                jtr[a] += jr[a] * r[row];
                for b in a..n {
                    jtj[a * n + b] += jr[a] * jr[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                jtj[a * n + b] = jtj[b * n + a];
            }
        }
        let max_diag = (0..n).map(|a| jtj[a * n + a]).fold(0.0, f64::max);
        if max_diag == 0.0 || !max_diag.is_finite() {
            return Ok(report(
                params,
                cost,
                trace,
                iterations,
                Termination::Stalled,
            ));
        }

        // Raise the damping until a step lowers the objective.
        let accepted = loop {
            let mut system = jtj.clone();
            for a in 0..n {
                let d = jtj[a * n + a].max(1e-12 * max_diag);
                system[a * n + a] += lambda * d;
            }
            let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
            if let Some(step) = solve_dense(system, rhs, n) {
                for a in 0..n {
                    candidate[a] = params[a] + step[a];
                }
                problem.residuals(&candidate, &mut r_candidate);
                let new_cost = sum_sq(&r_candidate);
                if new_cost.is_finite() && new_cost < cost {
                    break Some((step, new_cost));
                }
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break None;
            }
        };

        let Some((step, new_cost)) = accepted else {
            return Ok(report(
                params,
                cost,
                trace,
                iterations,
                Termination::Stalled,
            ));
        };
        let step_norm = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        let param_norm = params.iter().map(|p| p * p).sum::<f64>().sqrt();
        let decrease = cost - new_cost;
        params.copy_from_slice(&candidate);
        std::mem::swap(&mut r, &mut r_candidate);
        let old_cost = cost;
        cost = new_cost;
        trace.push(cost);
        lambda = (lambda / 3.0).max(1e-15);

        if step_norm <= options.step_tolerance * (param_norm + options.step_tolerance) {
            return Ok(report(
                params,
                cost,
                trace,
                iterations,
                Termination::StepTolerance,
            ));
        }
        if decrease <= options.cost_tolerance * old_cost {
            return Ok(report(
                params,
                cost,
                trace,
                iterations,
                Termination::CostTolerance,
            ));
        }
    }
}

/// Solves `a x = b` for a row-major `n × n` matrix with partial pivoting.
pub(crate) fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() <= 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
