//! Adaptive preprocessor: a pinned-weight LMS predictor of the first array
//! element from the remaining M-1 elements, the batch least-squares solution
//! it converges to, and the stability bound on the step size.

use num_complex::Complex64;

use crate::array::SnapshotMatrix;
use crate::error::{Error, Result};
use crate::numerics::{Cholesky, ComplexMatrix};

/// Margin subtracted from the strict stability bound 2/||x||^2.
pub const ADAPTIVE_STEP_EPSILON: f64 = 1e-6;

const CONDITION_GUARD: f64 = 1e12;

/// Pinned-weight LMS state: u_0 stays zero after every update.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecondState {
    u: Vec<Complex64>,
    iteration: usize,
    mse_history: Vec<f64>,
}

/// Step-size policy for the preprocessor run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaPolicy {
    Fixed(f64),
    /// Largest stable step per snapshot: 2/||x(n)||^2 - epsilon.
    Adaptive,
}

impl PrecondState {
    /// All-zero response.
    pub fn new(num_elements: usize) -> Result<Self> {
        if num_elements < 2 {
            return Err(Error::InvalidScenario(
                "preprocessor needs at least two array elements".into(),
            ));
        }
        Ok(Self {
            u: vec![Complex64::new(0.0, 0.0); num_elements],
            iteration: 0,
            mse_history: Vec::new(),
        })
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.u
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn mse_history(&self) -> &[f64] {
        &self.mse_history
    }

    /// Prediction y(n) = u^H x(n).
    pub fn predict(&self, x: &[Complex64]) -> Result<Complex64> {
        if x.len() != self.u.len() {
            return Err(Error::DimensionMismatch(format!(
                "snapshot has {} elements, filter has {}",
                x.len(),
                self.u.len()
            )));
        }
        Ok(self.u.iter().zip(x).map(|(u, xi)| u.conj() * xi).sum())
    }

    /// First iteration at which the MSE, averaged over a trailing window,
    /// drops below the tolerance.
    pub fn converged_iteration(&self, tol: f64, window: usize) -> Option<usize> {
        if window == 0 || self.mse_history.len() < window {
            return None;
        }
        let mut acc: f64 = self.mse_history[..window].iter().sum();
        if acc / (window as f64) < tol {
            return Some(window - 1);
        }
        for i in window..self.mse_history.len() {
            acc += self.mse_history[i] - self.mse_history[i - window];
            if acc / (window as f64) < tol {
                return Some(i);
            }
        }
        None
    }
}

/// One LMS update with the first weight pinned: u_m += gamma x_m e* for
/// m = 1..M-1 where e = x_0 - u^H x. Returns |e|^2, which is also appended
/// to the state's MSE history.
pub fn precond_step(state: &mut PrecondState, x: &[Complex64], gamma: f64) -> Result<f64> {
    let y = state.predict(x)?;
    let e = x[0] - y;
    if !(e.re.is_finite() && e.im.is_finite()) {
        return Err(Error::Diverged {
            iteration: state.iteration,
            last_weights: state.u.clone(),
        });
    }
    let e_conj = e.conj();
    for (u, xi) in state.u.iter_mut().zip(x).skip(1) {
        *u += gamma * xi * e_conj;
    }
    state.u[0] = Complex64::new(0.0, 0.0);
    if state
        .u
        .iter()
        .any(|u| !(u.re.is_finite() && u.im.is_finite()))
    {
        return Err(Error::Diverged {
            iteration: state.iteration,
            last_weights: state.u.clone(),
        });
    }
    state.iteration += 1;
    let mse = e.norm_sqr();
    state.mse_history.push(mse);
    Ok(mse)
}

/// Largest stable step for a snapshot: 2/||x||^2 minus a fixed margin.
pub fn step_bound(x: &[Complex64]) -> Result<f64> {
    let norm_sq: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    if norm_sq <= 0.0 {
        return Err(Error::ZeroInput);
    }
    Ok(2.0 / norm_sq - ADAPTIVE_STEP_EPSILON)
}

/// Batch least-squares predictor of row 0 from rows 1..M-1 via the normal
/// equations. Numerically rank-deficient data (every noise-free scenario with
/// D < M-1 sources) is solved at the minimum-norm limit, which is also the
/// point the pinned LMS run converges to; a degenerate regressor block is an
/// error.
pub fn ols_fit(x: &SnapshotMatrix) -> Result<Vec<Complex64>> {
    let m = x.num_elements();
    let n = x.num_snapshots();
    if n < m - 1 {
        return Err(Error::InvalidScenario(format!(
            "least squares needs N >= M-1 snapshots, got N={n}, M={m}"
        )));
    }
    let entries = x.entries();
    let mut gram = ComplexMatrix::zeros(m - 1, m - 1);
    let mut rhs = vec![Complex64::new(0.0, 0.0); m - 1];
    for i in 0..m - 1 {
        for j in i..m - 1 {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..n {
                acc += entries[(i + 1, t)] * entries[(j + 1, t)].conj();
            }
            gram[(i, j)] = acc;
            gram[(j, i)] = acc.conj();
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..n {
            acc += entries[(i + 1, t)] * entries[(0, t)].conj();
        }
        rhs[i] = acc;
    }

    let scale = gram.trace_real();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::RankDeficient(
            "regressor rows 1..M-1 carry no energy".into(),
        ));
    }

    match Cholesky::new(&gram) {
        Ok(chol) if chol.condition_estimate() <= CONDITION_GUARD => chol.solve(&rhs),
        _ => crate::numerics::hpsd_min_norm_solve(&gram, &rhs),
    }
}

/// Runs the preprocessor over the snapshot columns (cycling when iterations
/// exceed the snapshot count) and returns the final state with the full MSE
/// learning curve. Zero iterations return the untouched all-zero state.
pub fn run_preprocessor(
    x: &SnapshotMatrix,
    policy: GammaPolicy,
    iterations: usize,
) -> Result<PrecondState> {
    let mut state = PrecondState::new(x.num_elements())?;
    let n = x.num_snapshots();
    for it in 0..iterations {
        let snapshot = x.snapshot(it % n);
        let gamma = match policy {
            GammaPolicy::Fixed(g) => g,
            GammaPolicy::Adaptive => match step_bound(&snapshot) {
                Ok(g) => g.max(0.0),
                Err(Error::ZeroInput) => 0.0,
                Err(e) => return Err(e),
            },
        };
        precond_step(&mut state, &snapshot, gamma)?;
    }
    Ok(state)
}
