//! Constant-modulus adaptive spatial filter: instantaneous cost and gradient,
//! gradient descent/ascent updates, the RLS-orthogonalized matrix step, and
//! the batch runners for the soft-equalizer and the flipped normalized run
//! that estimates the steering-vector sum.

use num_complex::Complex64;

use crate::array::SnapshotMatrix;
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

/// Output magnitudes beyond this are treated as divergence.
const DIVERGENCE_LIMIT: f64 = 1e6;

/// Iteration window for convergence detection in the batch runners.
const CONVERGENCE_WINDOW: usize = 50;

/// Weight vector plus step size of the adaptive filter.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaState {
    weights: Vec<Complex64>,
    step_gamma: f64,
    iteration: usize,
}

/// Sign of the gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientDirection {
    Descent,
    Ascent,
}

impl CmaState {
    pub fn new(weights: Vec<Complex64>, step_gamma: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().all(|w| w.norm() == 0.0) {
            return Err(Error::InvalidScenario(
                "CMA weights must not be all-zero at initialization".into(),
            ));
        }
        if !(step_gamma.is_finite() && step_gamma >= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "step size must be non-negative and finite, got {step_gamma}"
            )));
        }
        Ok(Self {
            weights,
            step_gamma,
            iteration: 0,
        })
    }

    /// All-pass initialization: pass the first element unmodified.
    pub fn all_pass(num_elements: usize, step_gamma: f64) -> Result<Self> {
        let mut weights = vec![Complex64::new(0.0, 0.0); num_elements];
        weights[0] = Complex64::new(1.0, 0.0);
        Self::new(weights, step_gamma)
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn step_gamma(&self) -> f64 {
        self.step_gamma
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Filter output y = w^H x.
    pub fn output(&self, x: &[Complex64]) -> Result<Complex64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "snapshot has {} elements, filter has {}",
                x.len(),
                self.weights.len()
            )));
        }
        Ok(self
            .weights
            .iter()
            .zip(x)
            .map(|(w, xi)| w.conj() * xi)
            .sum())
    }

    /// One stochastic-gradient update: descent moves along +x e*, ascent
    /// flips the sign. Returns the pre-update output. On a non-finite update
    /// the state keeps its last finite value and the error carries it.
    pub fn step(&mut self, x: &[Complex64], direction: GradientDirection) -> Result<Complex64> {
        let y = self.output(x)?;
        if !(y.re.is_finite() && y.im.is_finite()) || y.norm() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                iteration: self.iteration,
                last_weights: self.weights.clone(),
            });
        }
        let e_conj = modulus_error(y).conj();
        let sign = match direction {
            GradientDirection::Descent => 1.0,
            GradientDirection::Ascent => -1.0,
        };
        let gamma = self.step_gamma * sign;
        let mut updated = self.weights.clone();
        for (w, xi) in updated.iter_mut().zip(x) {
            *w += gamma * xi * e_conj;
        }
        if updated
            .iter()
            .any(|w| !(w.re.is_finite() && w.im.is_finite()))
        {
            return Err(Error::Diverged {
                iteration: self.iteration,
                last_weights: self.weights.clone(),
            });
        }
        self.weights = updated;
        self.iteration += 1;
        Ok(y)
    }

    fn normalize(&mut self) {
        let norm = self.weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for w in &mut self.weights {
                *w /= norm;
            }
        }
    }
}

/// Instantaneous constant-modulus cost (|y|^2 - 1)^2 / 4.
pub fn instant_cost(y: Complex64) -> f64 {
    let dev = y.norm_sqr() - 1.0;
    dev * dev / 4.0
}

/// Modulus error e = (1 - |y|^2) y; zero exactly at |y| in {0, 1}.
pub fn modulus_error(y: Complex64) -> Complex64 {
    (1.0 - y.norm_sqr()) * y
}

/// Instantaneous gradient of the cost with respect to the weights,
/// (|y|^2 - 1) x y*; its real and imaginary parts are the partial derivatives
/// along the real and imaginary weight coordinates.
pub fn instant_gradient(weights: &[Complex64], x: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "snapshot has {} elements, filter has {}",
            x.len(),
            weights.len()
        )));
    }
    let y: Complex64 = weights.iter().zip(x).map(|(w, xi)| w.conj() * xi).sum();
    let scale = y.norm_sqr() - 1.0;
    Ok(x.iter().map(|&xi| scale * xi * y.conj()).collect())
}

/// Inverse weighted sample-correlation matrix with forgetting, driving the
/// matrix-valued RLS step size.
#[derive(Debug, Clone)]
pub struct RlsState {
    p: ComplexMatrix,
    alpha: f64,
}

impl RlsState {
    /// Starts from R(n0) = sigma^2 I, i.e. P(n0) = I / sigma^2.
    pub fn new(num_elements: usize, alpha: f64, sigma_sq: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidScenario(format!(
                "forgetting factor must lie in (0, 1], got {alpha}"
            )));
        }
        if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "initialization power must be positive, got {sigma_sq}"
            )));
        }
        Ok(Self {
            p: ComplexMatrix::identity(num_elements).scale(1.0 / sigma_sq),
            alpha,
        })
    }

    pub fn p(&self) -> &ComplexMatrix {
        &self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Matrix step gamma_n = P(n-1) / (alpha + x^H P(n-1) x), together with the
/// rank-one update of P; P stays Hermitian.
pub fn rls_gain(rls: &mut RlsState, x: &[Complex64]) -> Result<ComplexMatrix> {
    let m = rls.p.rows();
    if x.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "snapshot has {} elements, P is {m}x{m}",
            x.len()
        )));
    }
    let px = rls.p.mul_vec(x);
    let quad: Complex64 = x.iter().zip(&px).map(|(xi, pxi)| xi.conj() * pxi).sum();
    let denom = rls.alpha + quad.re;
    if !(denom.is_finite() && denom > 0.0) || quad.re < -1e-12 {
        return Err(Error::LostPositiveDefiniteness);
    }
    let gain = rls.p.scale(1.0 / denom);

    let mut next = rls.p.clone();
    for i in 0..m {
        for j in 0..m {
            next[(i, j)] = (next[(i, j)] - px[i] * px[j].conj() / denom) / rls.alpha;
        }
    }
    // Re-symmetrize so rounding never accumulates into asymmetry.
    for i in 0..m {
        for j in (i + 1)..m {
            let avg = (next[(i, j)] + next[(j, i)].conj()) * 0.5;
            next[(i, j)] = avg;
            next[(j, i)] = avg.conj();
        }
        next[(i, i)] = Complex64::new(next[(i, i)].re, 0.0);
    }
    if (0..m).any(|i| !(next[(i, i)].re.is_finite() && next[(i, i)].re > 0.0)) {
        return Err(Error::LostPositiveDefiniteness);
    }
    rls.p = next;
    Ok(gain)
}

/// Result of the flipped, per-iteration-normalized run.
#[derive(Debug, Clone)]
pub struct AscentRunResult {
    /// Weight estimate rescaled to the norm of a phase-related
    /// steering-vector sum, sqrt(D^2 + D (M - 1)).
    pub v: Vec<Complex64>,
    pub modulus_history: Vec<f64>,
    pub converged_iteration: Option<usize>,
}

/// Gradient-ascent run with 2-norm normalization after every update; the
/// final weights are rescaled so that ||v||_2^2 = D^2 + D (M - 1).
pub fn run_ascent_normalized(
    x: &SnapshotMatrix,
    num_sources: usize,
    gamma: f64,
    iterations: usize,
) -> Result<AscentRunResult> {
    let m = x.num_elements();
    if num_sources == 0 || num_sources > m - 1 {
        return Err(Error::InvalidScenario(format!(
            "assumed model order must satisfy 1 <= D <= M-1, got {num_sources}"
        )));
    }
    let n = x.num_snapshots();
    let mut state = CmaState::all_pass(m, gamma)?;
    let mut modulus_history = Vec::with_capacity(iterations);
    let mut deltas = Vec::with_capacity(iterations);
    let mut converged_iteration = None;
    for it in 0..iterations {
        let snapshot = x.snapshot(it % n);
        let previous = state.weights().to_vec();
        let y = state.step(&snapshot, GradientDirection::Ascent)?;
        state.normalize();
        debug_assert!(
            (state.weights().iter().map(|w| w.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12,
            "weights must stay unit-norm between updates"
        );
        modulus_history.push(y.norm());
        let delta: f64 = state
            .weights()
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        deltas.push(delta);
        if converged_iteration.is_none() && deltas.len() >= CONVERGENCE_WINDOW {
            let tail = &deltas[deltas.len() - CONVERGENCE_WINDOW..];
            if tail.iter().sum::<f64>() / (CONVERGENCE_WINDOW as f64) < 1e-4 {
                converged_iteration = Some(it);
            }
        }
    }
    let d = num_sources as f64;
    let target = (d * d + d * (m as f64 - 1.0)).sqrt();
    let norm = state
        .weights()
        .iter()
        .map(|w| w.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let v = state
        .weights()
        .iter()
        .map(|w| w * (target / norm))
        .collect();
    Ok(AscentRunResult {
        v,
        modulus_history,
        converged_iteration,
    })
}

/// Result of a plain descent run.
#[derive(Debug, Clone)]
pub struct DescentRunResult {
    pub weights: Vec<Complex64>,
    /// Mean |y(n)| over the whole run; for a mixture the filter never
    /// converges, so the run average is the meaningful summary statistic.
    pub avg_output_modulus: f64,
    pub modulus_history: Vec<f64>,
    pub cost_history: Vec<f64>,
}

/// Plain constant-modulus descent over the snapshot columns (cycling when
/// iterations exceed the snapshot count).
pub fn run_descent_equalizer(
    x: &SnapshotMatrix,
    gamma: f64,
    iterations: usize,
    init: &[Complex64],
) -> Result<DescentRunResult> {
    if iterations == 0 {
        return Err(Error::InvalidScenario(
            "descent run needs at least one iteration".into(),
        ));
    }
    let n = x.num_snapshots();
    let mut state = CmaState::new(init.to_vec(), gamma)?;
    let mut modulus_history = Vec::with_capacity(iterations);
    let mut cost_history = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let snapshot = x.snapshot(it % n);
        let y = state.step(&snapshot, GradientDirection::Descent)?;
        modulus_history.push(y.norm());
        cost_history.push(instant_cost(y));
    }
    let avg_output_modulus = modulus_history.iter().sum::<f64>() / iterations as f64;
    Ok(DescentRunResult {
        weights: state.weights().to_vec(),
        avg_output_modulus,
        modulus_history,
        cost_history,
    })
}
