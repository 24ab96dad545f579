//! From weight vectors to directions of arrival: root polynomial
//! construction, root finding and selection (model order), angle recovery,
//! and the pseudoinverse preconditioning weights.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::array::{steering_matrix, ArrayGeometry};
use crate::error::{Error, Result};
use crate::numerics::{
    companion_eigenvalues, eval_poly, monic_from_roots, simultaneous_roots, Cholesky,
    ComplexMatrix,
};

const LEADING_COEFFICIENT_FLOOR: f64 = 1e-12;
const RECONSTRUCTION_BACKWARD_ERROR: f64 = 1e-8;
const CONDITION_GUARD: f64 = 1e12;

/// Angles closer than this are merged before reconstruction.
const ANGLE_MERGE_DEG: f64 = 0.1;

/// Monic root polynomial built from a weight vector and the target constant.
#[derive(Debug, Clone, PartialEq)]
pub struct RootPolynomial {
    /// Ascending powers, constant term first; leading coefficient exactly 1.
    coefficients: Vec<Complex64>,
    c_constant: f64,
}

impl RootPolynomial {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn c_constant(&self) -> f64 {
        self.c_constant
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        eval_poly(&self.coefficients, z)
    }
}

/// P(z) = v*_{M-1} z^{M-1} + ... + v*_1 z + (v*_0 - C), normalized by the
/// leading coefficient.
pub fn build_polynomial(v: &[Complex64], c: f64) -> Result<RootPolynomial> {
    if v.len() < 2 {
        return Err(Error::DegeneratePolynomial(
            "weight vector must have at least two entries".into(),
        ));
    }
    let lead = v[v.len() - 1].conj();
    if lead.norm() <= LEADING_COEFFICIENT_FLOOR {
        return Err(Error::DegeneratePolynomial(format!(
            "vanishing leading coefficient |v_{}| = {:e}",
            v.len() - 1,
            lead.norm()
        )));
    }
    let mut coefficients: Vec<Complex64> = v.iter().map(|vi| vi.conj() / lead).collect();
    coefficients[0] -= c / lead;
    let last = coefficients.len() - 1;
    coefficients[last] = Complex64::new(1.0, 0.0);
    Ok(RootPolynomial {
        coefficients,
        c_constant: c,
    })
}

/// Roots with their distance from the unit circle, beam-response scores, and
/// selection flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    roots: Vec<Complex64>,
    unit_distance: Vec<f64>,
    beam_score: Vec<f64>,
    selected: Vec<bool>,
}

impl RootSet {
    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    /// Signed distance |z| - 1 per root.
    pub fn unit_distance(&self) -> &[f64] {
        &self.unit_distance
    }

    /// Real part of the beam response at each root's angle; filled by
    /// `select_roots`.
    pub fn beam_score(&self) -> &[f64] {
        &self.beam_score
    }

    pub fn selected(&self) -> &[bool] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn selected_roots(&self) -> Vec<Complex64> {
        self.roots
            .iter()
            .zip(&self.selected)
            .filter(|(_, &s)| s)
            .map(|(z, _)| *z)
            .collect()
    }
}

/// All M-1 roots of the polynomial by simultaneous iteration, with the
/// companion-eigenvalue backend as fallback; the product over the returned
/// roots reproduces the coefficients within a small backward error.
pub fn find_roots(p: &RootPolynomial) -> Result<RootSet> {
    if p.degree() < 1 {
        return Err(Error::DegeneratePolynomial(
            "cannot factor a constant polynomial".into(),
        ));
    }
    let coeff_norm: f64 = p
        .coefficients
        .iter()
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let backward_error = |roots: &[Complex64]| -> f64 {
        let rebuilt = monic_from_roots(roots);
        rebuilt
            .iter()
            .zip(&p.coefficients)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / coeff_norm
    };

    let roots = match simultaneous_roots(&p.coefficients) {
        Ok(roots) if backward_error(&roots) <= RECONSTRUCTION_BACKWARD_ERROR => roots,
        primary => {
            let fallback = companion_eigenvalues(&p.coefficients)?;
            if backward_error(&fallback) <= RECONSTRUCTION_BACKWARD_ERROR {
                fallback
            } else {
                return Err(match primary {
                    Err(e) => e,
                    Ok(roots) => Error::RootFindingFailed {
                        sweeps: 0,
                        partial: roots,
                    },
                });
            }
        }
    };

    let unit_distance = roots.iter().map(|z| z.norm() - 1.0).collect();
    let n = roots.len();
    Ok(RootSet {
        roots,
        unit_distance,
        beam_score: vec![0.0; n],
        selected: vec![false; n],
    })
}

/// Closed-form roots for two phase-related unit-amplitude sources, from the
/// second entry v_1 = e^{i mu_1} + e^{i mu_2} of the steering-vector sum.
/// Valid for mu_1 + mu_2 in [0, pi], where the recovered sine is nonnegative.
pub fn analytic_roots_two_sources(v1: Complex64) -> Result<(Complex64, Complex64)> {
    if v1.norm() <= LEADING_COEFFICIENT_FLOOR {
        return Err(Error::DegenerateInput(
            "v_1 vanishes; the two modes are antipodal".into(),
        ));
    }
    let q1 = -v1;
    let re_q0 = ((v1.re * v1.re - v1.im * v1.im) / v1.norm_sqr()).clamp(-1.0, 1.0);
    let im_q0 = re_q0.acos().sin();
    let q0 = Complex64::new(re_q0, im_q0);
    let disc = (q1 * q1 * 0.25 - q0).sqrt();
    let z1 = -q1 * 0.5 + disc;
    let z2 = -q1 * 0.5 - disc;
    Ok((z1, z2))
}

/// Root-selection criterion for the model order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// Keep roots with ||z| - 1| below an absolute threshold.
    UnitDistance,
    /// Keep roots whose real beam response exceeds a relative fraction of the
    /// strongest score.
    BeamResponse,
}

/// Estimates the model order by flagging signal roots. Fills the beam scores
/// (real part of the weight response at each root's angle) in both modes and
/// returns the number of selected roots.
pub fn select_roots(
    rs: &mut RootSet,
    weights: &[Complex64],
    mode: SelectionMode,
    threshold: f64,
) -> Result<usize> {
    if rs.is_empty() {
        return Err(Error::EmptyModel("root set is empty".into()));
    }
    for (idx, z) in rs.roots.iter().enumerate() {
        let mu = z.arg();
        let response: Complex64 = weights
            .iter()
            .enumerate()
            .map(|(m, w)| w.conj() * Complex64::from_polar(1.0, mu * m as f64))
            .sum();
        rs.beam_score[idx] = response.re;
    }
    match mode {
        SelectionMode::UnitDistance => {
            for idx in 0..rs.len() {
                rs.selected[idx] = rs.unit_distance[idx].abs() < threshold;
            }
        }
        SelectionMode::BeamResponse => {
            let best = rs.beam_score.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if best <= 0.0 {
                return Err(Error::EmptyModel(
                    "no root has a positive real beam response".into(),
                ));
            }
            for idx in 0..rs.len() {
                rs.selected[idx] = rs.beam_score[idx] >= threshold * best;
            }
        }
    }
    let count = rs.selected.iter().filter(|&&s| s).count();
    if count == 0 {
        return Err(Error::EmptyModel(format!(
            "threshold {threshold} rejected every root"
        )));
    }
    Ok(count)
}

/// Inclination angles arcsin(arg z / (2 pi Delta/lambda)) of the selected
/// roots, ascending; roots outside the visible region are skipped.
pub fn doa_from_roots(rs: &RootSet, geometry: &ArrayGeometry) -> Result<Vec<f64>> {
    let selected = rs.selected_roots();
    if selected.is_empty() {
        return Err(Error::EmptyModel("no roots are selected".into()));
    }
    let scale = 2.0 * PI * geometry.spacing_ratio();
    let mut angles: Vec<f64> = selected
        .iter()
        .filter_map(|z| {
            let ratio = z.arg() / scale;
            if ratio.abs() <= 1.0 {
                Some(ratio.asin().to_degrees())
            } else {
                None
            }
        })
        .collect();
    if angles.is_empty() {
        return Err(Error::NoValidAngle);
    }
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Estimated directions with the reconstructed response matrix and the
/// pseudoinverse preconditioning weights.
#[derive(Debug, Clone)]
pub struct DoaEstimate {
    pub angles_deg: Vec<f64>,
    pub model_order: usize,
    /// Steering matrix A rebuilt from the estimated angles (M x D).
    pub response_matrix: ComplexMatrix,
    /// W = A (A^H A)^{-1}, so that W^H A = I.
    pub steering_weights: ComplexMatrix,
}

/// Rebuilds the array response matrix from estimated angles (merging
/// near-duplicates) and forms the Moore-Penrose preconditioning weights
/// W = A (A^H A)^{-1}.
pub fn reconstruct_and_precondition(
    angles_deg: &[f64],
    geometry: &ArrayGeometry,
) -> Result<DoaEstimate> {
    if angles_deg.is_empty() {
        return Err(Error::EmptyModel("no angles to reconstruct from".into()));
    }
    let mut sorted = angles_deg.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(sorted.len());
    let mut cluster: Vec<f64> = vec![sorted[0]];
    for &a in &sorted[1..] {
        if a - cluster.last().unwrap() < ANGLE_MERGE_DEG {
            cluster.push(a);
        } else {
            merged.push(cluster.iter().sum::<f64>() / cluster.len() as f64);
            cluster = vec![a];
        }
    }
    merged.push(cluster.iter().sum::<f64>() / cluster.len() as f64);

    let m = geometry.num_elements();
    if merged.len() > m {
        return Err(Error::InvalidScenario(format!(
            "{} angles exceed the {m} array elements",
            merged.len()
        )));
    }
    let a = steering_matrix(geometry, &merged)?;
    let gram = a.hermitian().mul(&a);
    let chol = Cholesky::new(&gram)?;
    let cond = chol.condition_estimate();
    if cond > CONDITION_GUARD {
        return Err(Error::IllConditioned(cond));
    }
    let d = merged.len();
    let mut inv = ComplexMatrix::zeros(d, d);
    for col in 0..d {
        let mut e = vec![Complex64::new(0.0, 0.0); d];
        e[col] = Complex64::new(1.0, 0.0);
        let solved = chol.solve(&e)?;
        for row in 0..d {
            inv[(row, col)] = solved[row];
        }
    }
    let w = a.mul(&inv);
    Ok(DoaEstimate {
        angles_deg: merged,
        model_order: d,
        response_matrix: a,
        steering_weights: w,
    })
}

/// CSV rows (re, im, abs_minus_1, beam_score, selected) for a root set.
pub fn root_set_to_csv(rs: &RootSet) -> String {
    let mut out = String::from("re,im,abs_minus_1,beam_score,selected\n");
    for i in 0..rs.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            rs.roots[i].re,
            rs.roots[i].im,
            rs.unit_distance[i],
            rs.beam_score[i],
            rs.selected[i] as u8
        ));
    }
    out
}
