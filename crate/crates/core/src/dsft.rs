//! Discrete-space Fourier transform of finite weight sequences, the
//! closed-form Dirichlet-kernel array response, sum-of-steering-vector
//! analysis, and the phase-relation identities they obey.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::array::ArrayGeometry;
use crate::error::{Error, Result};

/// Wraps an angular frequency into [-pi, pi).
pub fn wrap_angular(mu: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let wrapped = mu - two_pi * ((mu + PI) / two_pi).floor();
    // floor rounding can land exactly on +pi.
    if wrapped >= PI {
        wrapped - two_pi
    } else {
        wrapped
    }
}

fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_angular(a - b).abs()
}

/// DSFT of a finite sequence: sum_m x(m) exp(-i mu m).
pub fn dsft_eval(sequence: &[Complex64], mu: f64) -> Complex64 {
    sequence
        .iter()
        .enumerate()
        .map(|(m, &x)| x * Complex64::from_polar(1.0, -mu * m as f64))
        .sum()
}

/// Switch to the series limit of the Dirichlet kernel this close to a mode
/// center, where the sine quotient turns 0/0.
const DIRICHLET_SINGULARITY_GUARD: f64 = 1e-9;

/// Closed-form DSFT of a steering vector at mu0: the causal Dirichlet kernel
/// exp(-i (mu - mu0)(M-1)/2) sin(M (mu - mu0)/2) / sin((mu - mu0)/2), with the
/// removable singularity at mu = mu0 evaluated by a second-order series so the
/// switch is seamless.
pub fn dirichlet_response(m: usize, mu: f64, mu0: f64) -> Complex64 {
    assert!(m >= 2, "Dirichlet kernel needs at least two elements");
    let mf = m as f64;
    let delta = wrap_angular(mu - mu0);
    let phase = Complex64::from_polar(1.0, -delta * (mf - 1.0) / 2.0);
    let ratio = if delta.abs() < DIRICHLET_SINGULARITY_GUARD {
        // sin(M x)/sin(x) = M (1 - (M^2 - 1) x^2 / 6 + O(x^4)) at x = delta/2.
        mf * (1.0 - (mf * mf - 1.0) * delta * delta / 24.0)
    } else {
        (mf * delta / 2.0).sin() / (delta / 2.0).sin()
    };
    phase * ratio
}

/// Beam response b(mu) = w^H a(mu), identical to the conjugate DSFT of the
/// weights.
pub fn beam_response(weights: &[Complex64], mu: f64) -> Complex64 {
    dsft_eval(weights, mu).conj()
}

/// Distinct angular mode frequencies in [-pi, pi).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    mus: Vec<f64>,
}

impl ModeSet {
    pub fn new(mus: Vec<f64>) -> Result<Self> {
        if mus.is_empty() {
            return Err(Error::InvalidModes("mode set is empty".into()));
        }
        let wrapped: Vec<f64> = mus.iter().map(|&mu| wrap_angular(mu)).collect();
        for (i, a) in wrapped.iter().enumerate() {
            for b in &wrapped[i + 1..] {
                if angular_distance(*a, *b) < 1e-12 {
                    return Err(Error::InvalidModes(format!(
                        "modes coincide modulo 2 pi at mu = {a}"
                    )));
                }
            }
        }
        Ok(Self { mus: wrapped })
    }

    /// Modes mu_anchor + j 2 pi k / (M - 1), j = 0..D-1: every pairwise
    /// separation is an integer multiple of 2 pi / (M - 1), the configuration
    /// under which the sum response takes the fixed value M + D - 1.
    ///
    /// Fails when the progression collides modulo 2 pi, i.e. when
    /// j k = 0 mod (M - 1) for some j < D: no such set of D distinct modes
    /// exists for that (M, D, k).
    pub fn phase_related(m: usize, d: usize, k: usize, mu_anchor: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidModes("need at least two elements".into()));
        }
        if d == 0 || d > m - 1 {
            return Err(Error::InvalidModes(format!(
                "mode count must satisfy 1 <= D <= M-1, got D={d} for M={m}"
            )));
        }
        if k == 0 {
            return Err(Error::InvalidModes("step multiple k must be positive".into()));
        }
        for j in 1..d {
            if (j * k).is_multiple_of(m - 1) {
                return Err(Error::InvalidModes(format!(
                    "progression with step {k} collides modulo 2 pi for M={m}, D={d}"
                )));
            }
        }
        let step = 2.0 * PI * k as f64 / (m as f64 - 1.0);
        Self::new((0..d).map(|j| mu_anchor + j as f64 * step).collect())
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }
}

fn check_mode_count(modes: &ModeSet, m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidModes("need at least two elements".into()));
    }
    if modes.len() > m - 1 {
        return Err(Error::InvalidModes(format!(
            "{} modes exceed the D <= M-1 bound for M={m}",
            modes.len()
        )));
    }
    Ok(())
}

/// DSFT of the sum of the steering vectors: sum_d Dirichlet(M, mu, mu_d).
pub fn sum_mode_response(modes: &ModeSet, m: usize, mu: f64) -> Result<Complex64> {
    check_mode_count(modes, m)?;
    Ok(modes
        .mus()
        .iter()
        .map(|&mu_d| dirichlet_response(m, mu, mu_d))
        .sum())
}

/// Sum of the steering vectors as an explicit space sequence.
fn summed_steering(modes: &ModeSet, m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|idx| {
            modes
                .mus()
                .iter()
                .map(|&mu_d| Complex64::from_polar(1.0, mu_d * idx as f64))
                .sum()
        })
        .collect()
}

/// Squared 2-norm of the summed steering vectors by the explicit double sum.
pub fn sum_norm_squared(modes: &ModeSet, m: usize) -> Result<f64> {
    check_mode_count(modes, m)?;
    Ok(summed_steering(modes, m)
        .iter()
        .map(|z| z.norm_sqr())
        .sum())
}

/// Impact factor of the phase term at mode i:
/// IF_i = D |A(e^{i mu_i})| / ||a||^2 - 1, exactly zero under the phase
/// relation and for a single mode.
pub fn impact_factor(modes: &ModeSet, m: usize, i: usize) -> Result<f64> {
    check_mode_count(modes, m)?;
    if i >= modes.len() {
        return Err(Error::InvalidModes(format!(
            "mode index {i} out of range for {} modes",
            modes.len()
        )));
    }
    let d = modes.len() as f64;
    let response = sum_mode_response(modes, m, modes.mus()[i])?;
    let norm_sq = sum_norm_squared(modes, m)?;
    Ok(d * response.norm() / norm_sq - 1.0)
}

/// Angles produced by `phase_related_angles`, with the step multiples whose
/// sine left [-1, 1] reported separately.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRelatedAngles {
    pub angles_deg: Vec<f64>,
    /// Step multiples that were dropped as out of the arcsine domain.
    pub dropped: Vec<i64>,
}

/// Companion angles arcsin(sin theta_i + k lambda / (Delta (M - 1))) for each
/// signed step multiple k; k = 0 returns theta_i itself.
pub fn phase_related_angles(
    theta_i_deg: f64,
    geometry: &ArrayGeometry,
    k_list: &[i64],
) -> Result<PhaseRelatedAngles> {
    if !(theta_i_deg.is_finite() && theta_i_deg.abs() < 90.0) {
        return Err(Error::AngleOutOfRange(theta_i_deg));
    }
    if k_list.is_empty() {
        return Err(Error::EmptyResult("no step multiples requested".into()));
    }
    let unit = 1.0 / (geometry.spacing_ratio() * (geometry.num_elements() as f64 - 1.0));
    let base = theta_i_deg.to_radians().sin();
    let mut angles_deg = Vec::new();
    let mut dropped = Vec::new();
    for &k in k_list {
        let s = base + k as f64 * unit;
        if s.abs() <= 1.0 {
            angles_deg.push(s.asin().to_degrees());
        } else {
            dropped.push(k);
        }
    }
    if angles_deg.is_empty() {
        return Err(Error::EmptyResult(format!(
            "every requested multiple leaves the visible region around {theta_i_deg} deg"
        )));
    }
    Ok(PhaseRelatedAngles {
        angles_deg,
        dropped,
    })
}

/// Beam response sampled on a uniform angular grid over [-pi, pi).
#[derive(Debug, Clone)]
pub struct BeamResponseGrid {
    mu_values: Vec<f64>,
    response: Vec<Complex64>,
    weights: Vec<Complex64>,
}

/// Default grid resolution for figure data.
pub const DEFAULT_GRID_POINTS: usize = 1024;

impl BeamResponseGrid {
    pub fn compute(weights: &[Complex64], points: usize) -> Self {
        assert!(points >= 2, "grid needs at least two points");
        let mu_values: Vec<f64> = (0..points)
            .map(|i| -PI + 2.0 * PI * i as f64 / points as f64)
            .collect();
        let response = mu_values
            .iter()
            .map(|&mu| beam_response(weights, mu))
            .collect();
        Self {
            mu_values,
            response,
            weights: weights.to_vec(),
        }
    }

    pub fn mu_values(&self) -> &[f64] {
        &self.mu_values
    }

    pub fn response(&self) -> &[Complex64] {
        &self.response
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// CSV rows (mu, theta_deg, re, im, abs). Grid points outside the visible
    /// region of the given geometry print an empty angle field.
    pub fn to_csv(&self, geometry: &ArrayGeometry) -> String {
        let mut out = String::from("mu,theta_deg,re,im,abs\n");
        let scale = 2.0 * PI * geometry.spacing_ratio();
        for (mu, resp) in self.mu_values.iter().zip(&self.response) {
            let ratio = mu / scale;
            let theta = if ratio.abs() <= 1.0 {
                format!("{}", ratio.asin().to_degrees())
            } else {
                String::new()
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                mu,
                theta,
                resp.re,
                resp.im,
                resp.norm()
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::steering_vector;

    fn ones(m: usize) -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); m]
    }

    #[test]
    fn dsft_of_ones_at_zero_is_m() {
        let x = dsft_eval(&ones(8), 0.0);
        assert!((x - Complex64::new(8.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dsft_of_steering_vector_peaks_at_its_mode() {
        let geometry = ArrayGeometry::new(8, 0.5).unwrap();
        let mu0 = 1.234;
        let a = steering_vector(&geometry, mu0);
        let peak = dsft_eval(&a, mu0);
        assert!((peak - Complex64::new(8.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dirichlet_limit_at_mode_center() {
        assert!((dirichlet_response(8, 0.7, 0.7) - Complex64::new(8.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dirichlet_nulls_at_kernel_zeros() {
        let m = 8;
        let mu0 = 0.4;
        for k in 1..m {
            let mu = mu0 + 2.0 * PI * k as f64 / m as f64;
            assert!(
                dirichlet_response(m, mu, mu0).norm() < 1e-12,
                "null {k} missing"
            );
        }
    }

    #[test]
    fn dirichlet_matches_direct_sum_on_grid() {
        let geometry = ArrayGeometry::new(8, 0.5).unwrap();
        let mu0 = 2.0 * PI * 0.5 * 20f64.to_radians().sin();
        let a = steering_vector(&geometry, mu0);
        let mut worst = 0.0f64;
        for i in 0..512 {
            let mu = -PI + 2.0 * PI * i as f64 / 512.0;
            let err = (dirichlet_response(8, mu, mu0) - dsft_eval(&a, mu)).norm();
            worst = worst.max(err);
        }
        assert!(worst < 1e-10, "worst = {worst:e}");
    }

    #[test]
    fn dirichlet_is_seamless_across_the_singularity_guard() {
        for &delta in &[1e-10, 9.9e-10, 1.01e-9, 1e-8] {
            let inside = dirichlet_response(16, 0.3 + delta, 0.3);
            let a = steering_vector(&ArrayGeometry::new(16, 0.5).unwrap(), 0.3);
            let direct = dsft_eval(&a, 0.3 + delta);
            assert!((inside - direct).norm() < 1e-10, "delta = {delta:e}");
        }
    }

    #[test]
    fn beam_response_of_matched_weights_is_m() {
        let geometry = ArrayGeometry::new(8, 0.5).unwrap();
        let mu0 = -0.9;
        let w = steering_vector(&geometry, mu0);
        let b = beam_response(&w, mu0);
        assert!((b - Complex64::new(8.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn beam_response_of_zero_weights_vanishes() {
        let w = vec![Complex64::new(0.0, 0.0); 8];
        for i in 0..32 {
            let mu = -PI + i as f64 * 0.2;
            assert_eq!(beam_response(&w, mu).norm(), 0.0);
        }
    }

    #[test]
    fn phase_related_sum_hits_m_plus_d_minus_1() {
        let modes = ModeSet::phase_related(8, 3, 1, 0.31).unwrap();
        let summed = summed_steering(&modes, 8);
        for &mu_i in modes.mus() {
            let b = beam_response(&summed, mu_i);
            assert!((b.re - 10.0).abs() < 1e-10, "re = {}", b.re);
            assert!(b.im.abs() < 1e-12, "im = {}", b.im);
        }
    }

    #[test]
    fn sum_mode_response_reduces_to_dirichlet_for_one_mode() {
        let modes = ModeSet::new(vec![0.8]).unwrap();
        for i in 0..64 {
            let mu = -PI + i as f64 * 0.1;
            let s = sum_mode_response(&modes, 8, mu).unwrap();
            assert!((s - dirichlet_response(8, mu, 0.8)).norm() < 1e-14);
        }
    }

    #[test]
    fn sum_mode_response_is_real_at_phase_related_modes() {
        let modes = ModeSet::phase_related(8, 3, 2, -0.45).unwrap();
        for &mu_i in modes.mus() {
            let s = sum_mode_response(&modes, 8, mu_i).unwrap();
            assert!((s.re - 10.0).abs() < 1e-10);
            assert!(s.im.abs() < 1e-12);
        }
    }

    #[test]
    fn sum_mode_response_matches_explicit_vector_sum() {
        let modes = ModeSet::new(vec![-2.1, 0.33, 1.9]).unwrap();
        let summed = summed_steering(&modes, 8);
        let mut worst = 0.0f64;
        for i in 0..512 {
            let mu = -PI + 2.0 * PI * i as f64 / 512.0;
            // The DSFT of the sum equals the conjugate beam response.
            let direct = beam_response(&summed, mu).conj();
            let closed = sum_mode_response(&modes, 8, mu).unwrap();
            worst = worst.max((closed - direct).norm());
        }
        assert!(worst < 1e-10, "worst = {worst:e}");
    }

    #[test]
    fn impact_factor_vanishes_under_the_phase_relation() {
        let modes = ModeSet::phase_related(8, 3, 1, 0.2).unwrap();
        for i in 0..3 {
            assert!(impact_factor(&modes, 8, i).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn impact_factor_vanishes_for_a_single_mode() {
        let modes = ModeSet::new(vec![1.1]).unwrap();
        assert!(impact_factor(&modes, 8, 0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn impact_factor_matches_defining_formula() {
        let modes = ModeSet::new(vec![-1.7, 0.2, 2.4]).unwrap();
        for i in 0..3 {
            let direct = {
                let summed = summed_steering(&modes, 8);
                let response = beam_response(&summed, modes.mus()[i]).norm();
                let norm_sq: f64 = summed.iter().map(|z| z.norm_sqr()).sum();
                3.0 * response / norm_sq - 1.0
            };
            let got = impact_factor(&modes, 8, i).unwrap();
            assert!((got - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn companion_angle_of_twenty_degrees() {
        let geometry = ArrayGeometry::new(8, 0.5).unwrap();
        let out = phase_related_angles(20.0, &geometry, &[-1]).unwrap();
        assert_eq!(out.angles_deg.len(), 1);
        assert!((out.angles_deg[0] - 3.23).abs() < 0.01, "{}", out.angles_deg[0]);
        assert!(out.dropped.is_empty());
    }

    #[test]
    fn companion_angle_three_steps_down() {
        let geometry = ArrayGeometry::new(8, 0.5).unwrap();
        let out = phase_related_angles(3.23, &geometry, &[-3]).unwrap();
        assert!((out.angles_deg[0] + 53.2).abs() < 0.05, "{}", out.angles_deg[0]);
    }

    #[test]
    fn zero_step_returns_the_anchor_angle() {
        let geometry = ArrayGeometry::new(8, 0.5).unwrap();
        let out = phase_related_angles(12.5, &geometry, &[0]).unwrap();
        assert!((out.angles_deg[0] - 12.5).abs() < 1e-12);
    }

    #[test]
    fn all_candidates_out_of_domain_is_an_error() {
        let geometry = ArrayGeometry::new(8, 0.5).unwrap();
        assert!(matches!(
            phase_related_angles(80.0, &geometry, &[3, 4]),
            Err(Error::EmptyResult(_))
        ));
    }

    #[test]
    fn phase_related_norm_is_thirty_for_m8_d3() {
        for k in 1..=3 {
            let modes = ModeSet::phase_related(8, 3, k, 0.17).unwrap();
            let n = sum_norm_squared(&modes, 8).unwrap();
            assert!((n - 30.0).abs() < 1e-10, "k={k}: {n}");
        }
    }

    #[test]
    fn single_mode_norm_is_m() {
        let modes = ModeSet::new(vec![0.4]).unwrap();
        assert!((sum_norm_squared(&modes, 8).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn norm_matches_vector_sum_oracle() {
        let modes = ModeSet::new(vec![-2.6, -0.4, 1.2, 2.9]).unwrap();
        let direct: f64 = summed_steering(&modes, 9).iter().map(|z| z.norm_sqr()).sum();
        let got = sum_norm_squared(&modes, 9).unwrap();
        assert!((got - direct).abs() < 1e-12);
    }

    #[test]
    fn colliding_progressions_are_rejected() {
        // M - 1 = 4 and k = 2 collide at the third mode.
        assert!(ModeSet::phase_related(5, 3, 2, 0.0).is_err());
        // M - 1 = 2 and k = 2 collide immediately.
        assert!(ModeSet::phase_related(3, 2, 2, 0.0).is_err());
        // Coprime step is fine.
        assert!(ModeSet::phase_related(8, 7, 3, 0.0).is_ok());
    }

    #[test]
    fn grid_csv_has_header_and_theta_column() {
        let geometry = ArrayGeometry::new(8, 0.5).unwrap();
        let w = steering_vector(&geometry, 0.5);
        let grid = BeamResponseGrid::compute(&w, 16);
        let csv = grid.to_csv(&geometry);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "mu,theta_deg,re,im,abs");
        assert_eq!(csv.lines().count(), 17);
    }
}
