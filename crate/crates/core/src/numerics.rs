//! Small dense complex numerics: matrices, Hermitian positive-definite
//! solves, and the two polynomial root-finding backends.
//!
//! Everything in the crate works with matrices no larger than 16x16 and
//! polynomials of degree at most 15, so the dense O(n^3) algorithms below are
//! written for clarity rather than asymptotics and carry no external
//! linear-algebra dependency.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Hermitian (conjugate) transpose.
    pub fn hermitian(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "inner dimensions must agree");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(a, x)| a * x)
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Largest absolute deviation from Hermitian symmetry.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn trace_real(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self[(i, i)].re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add_diagonal(&mut self, s: f64) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            self[(i, i)] += Complex64::new(s, 0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Cholesky factor of a Hermitian positive-definite matrix.
pub struct Cholesky {
    l: ComplexMatrix,
}

impl Cholesky {
    pub fn new(g: &ComplexMatrix) -> Result<Self> {
        if g.rows() != g.cols() {
            return Err(Error::DimensionMismatch(format!(
                "Cholesky needs a square matrix, got {}x{}",
                g.rows(),
                g.cols()
            )));
        }
        let scale = g.trace_real().abs().max(1.0);
        let asym = g.asymmetry();
        if asym > HERMITIAN_TOLERANCE * scale {
            return Err(Error::NotHermitian(asym));
        }
        let n = g.rows();
        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = g[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = g[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    /// Cheap condition estimate from the extreme Cholesky pivots. A lower
    /// bound on the true 2-norm condition number, adequate as a guard at the
    /// sizes handled here.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.l.rows();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..n {
            let p = self.l[(i, i)].re;
            lo = lo.min(p);
            hi = hi.max(p);
        }
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            (hi / lo).powi(2)
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.l.rows();
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "solve expects a length-{n} right-hand side, got {}",
                b.len()
            )));
        }
        // Forward: L y = b.
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[(i, k)];
                y[i] = y[i] - lik * y[k];
            }
            y[i] /= self.l[(i, i)].re;
        }
        // Backward: L^H x = y.
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let lki = self.l[(k, i)].conj();
                y[i] = y[i] - lki * y[k];
            }
            y[i] /= self.l[(i, i)].re;
        }
        Ok(y)
    }
}

/// Solves G x = b for Hermitian positive-definite G.
pub fn hpd_solve(g: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    Cholesky::new(g)?.solve(b)
}

/// Pivots below this fraction of the largest diagonal terminate the
/// rank-revealing factorization.
const PIVOT_RANK_TOLERANCE: f64 = 1e-10;

/// Minimum-norm solution of a consistent Hermitian positive-semidefinite
/// system G x = b via diagonally pivoted Cholesky: G ~= C C^H with C of
/// revealed rank r, then x = C (C^H C)^{-1} (C^H C)^{-1} C^H b, which projects
/// onto the range of G and inverts there.
pub fn hpsd_min_norm_solve(g: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = g.rows();
    if g.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has length {}, matrix is {n}x{n}",
            b.len()
        )));
    }
    let scale = g.trace_real().abs().max(1.0);
    let asym = g.asymmetry();
    if asym > HERMITIAN_TOLERANCE * scale {
        return Err(Error::NotHermitian(asym));
    }

    // Outer-product Cholesky with diagonal pivoting on a working copy.
    let mut a = g.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let max_diag = (0..n).map(|i| a[(i, i)].re).fold(0.0f64, f64::max);
    if max_diag <= 0.0 {
        return Err(Error::RankDeficient("matrix has no positive pivot".into()));
    }
    let threshold = PIVOT_RANK_TOLERANCE * max_diag;
    let mut rank = n;
    for k in 0..n {
        let pivot_row = (k..n)
            .max_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re))
            .unwrap();
        if a[(pivot_row, pivot_row)].re <= threshold {
            rank = k;
            break;
        }
        if pivot_row != k {
            perm.swap(k, pivot_row);
            for j in 0..n {
                let tmp = a[(k, j)];
                a[(k, j)] = a[(pivot_row, j)];
                a[(pivot_row, j)] = tmp;
            }
            for i in 0..n {
                let tmp = a[(i, k)];
                a[(i, k)] = a[(i, pivot_row)];
                a[(i, pivot_row)] = tmp;
            }
        }
        let pivot = a[(k, k)].re.sqrt();
        a[(k, k)] = Complex64::new(pivot, 0.0);
        for i in (k + 1)..n {
            a[(i, k)] /= pivot;
            a[(k, i)] = a[(i, k)].conj();
        }
        // Update the full trailing block so later symmetric swaps stay valid.
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let update = a[(i, k)] * a[(j, k)].conj();
                a[(i, j)] -= update;
            }
        }
        for i in (k + 1)..n {
            let diag = a[(i, i)].re;
            a[(i, i)] = Complex64::new(diag, 0.0);
        }
    }
    if rank == 0 {
        return Err(Error::RankDeficient("matrix is numerically zero".into()));
    }

    // C in original row order: row perm[i] of C is row i of the factor.
    let mut c = ComplexMatrix::zeros(n, rank);
    for i in 0..n {
        for j in 0..rank.min(i + 1) {
            c[(perm[i], j)] = a[(i, j)];
        }
    }

    let gram = c.hermitian().mul(&c);
    let chol = Cholesky::new(&gram)?;
    let t = c.hermitian().mul_vec(b);
    let y = chol.solve(&chol.solve(&t)?)?;
    Ok(c.mul_vec(&y))
}

/// Companion matrix of a monic polynomial, laid out with the negated
/// coefficients across the top row and ones on the subdiagonal.
#[derive(Debug, Clone)]
pub struct CompanionMatrix {
    matrix: ComplexMatrix,
}

impl CompanionMatrix {
    /// `monic` holds ascending-power coefficients with the leading one last.
    pub fn from_monic(monic: &[Complex64]) -> Result<Self> {
        let degree = check_monic(monic)?;
        let mut m = ComplexMatrix::zeros(degree, degree);
        for j in 0..degree {
            // Top row: -c_{n-1}, -c_{n-2}, ..., -c_0 for ascending coefficients c_k.
            m[(0, j)] = -monic[degree - 1 - j];
        }
        for i in 1..degree {
            m[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        Ok(Self { matrix: m })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

fn check_monic(monic: &[Complex64]) -> Result<usize> {
    if monic.len() < 2 {
        return Err(Error::DegeneratePolynomial(
            "degree must be at least 1".into(),
        ));
    }
    let lead = monic[monic.len() - 1];
    if (lead - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
        return Err(Error::DegeneratePolynomial(format!(
            "polynomial is not monic (leading coefficient {lead})"
        )));
    }
    Ok(monic.len() - 1)
}

/// All eigenvalues of the companion matrix of a monic polynomial, i.e. its
/// roots, via shifted QR iteration on the (already Hessenberg) companion form.
pub fn companion_eigenvalues(monic: &[Complex64]) -> Result<Vec<Complex64>> {
    let companion = CompanionMatrix::from_monic(monic)?;
    hessenberg_eigenvalues(companion.matrix().clone())
}

/// Shifted QR eigenvalue iteration for a complex upper Hessenberg matrix.
fn hessenberg_eigenvalues(mut h: ComplexMatrix) -> Result<Vec<Complex64>> {
    let n = h.rows();
    let mut eigs = vec![Complex64::new(0.0, 0.0); n];
    let mut active = n;
    let mut its_this_eig = 0usize;
    let mut total = 0usize;
    let max_per_eig = 60usize;
    let max_total = 80 * n + 200;

    while active > 0 {
        // Look for a negligible subdiagonal entry from the bottom of the
        // active block; l is the start of the unreduced trailing block.
        let mut l = active - 1;
        while l > 0 {
            let s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            let s = if s == 0.0 { 1.0 } else { s };
            if h[(l, l - 1)].norm() <= f64::EPSILON * s {
                h[(l, l - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }

        if l == active - 1 {
            eigs[active - 1] = h[(active - 1, active - 1)];
            active -= 1;
            its_this_eig = 0;
            continue;
        }

        if its_this_eig >= max_per_eig || total >= max_total {
            return Err(Error::RootFindingFailed {
                sweeps: total,
                partial: (active..n).map(|i| eigs[i]).collect(),
            });
        }

        // Wilkinson shift: eigenvalue of the trailing 2x2 closest to the
        // bottom-right entry, with an exceptional shift every 10 stalls.
        let a = h[(active - 2, active - 2)];
        let b = h[(active - 2, active - 1)];
        let c = h[(active - 1, active - 2)];
        let d = h[(active - 1, active - 1)];
        let shift = if its_this_eig > 0 && its_this_eig.is_multiple_of(10) {
            d + Complex64::new(h[(active - 1, active - 2)].norm(), 0.0)
        } else {
            let tr = a + d;
            let det = a * d - b * c;
            let disc = (tr * tr * 0.25 - det).sqrt();
            let mu1 = tr * 0.5 + disc;
            let mu2 = tr * 0.5 - disc;
            if (mu1 - d).norm() <= (mu2 - d).norm() {
                mu1
            } else {
                mu2
            }
        };

        qr_step(&mut h, l, active, shift);
        its_this_eig += 1;
        total += 1;
    }
    Ok(eigs)
}

/// One explicit shifted QR step on the Hessenberg block `lo..hi`:
/// H - sI = QR via Givens rotations, then H <- RQ + sI.
fn qr_step(h: &mut ComplexMatrix, lo: usize, hi: usize, shift: Complex64) {
    for i in lo..hi {
        h[(i, i)] -= shift;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for i in lo..hi - 1 {
        let (c, s) = givens(h[(i, i)], h[(i + 1, i)]);
        // Left rotation on rows i, i+1; Hessenberg form keeps columns
        // before i zero below the diagonal.
        for j in i..hi {
            let top = h[(i, j)];
            let bot = h[(i + 1, j)];
            h[(i, j)] = c * top + s * bot;
            h[(i + 1, j)] = -s.conj() * top + c * bot;
        }
        rotations.push((c, s));
    }
    for (idx, (c, s)) in rotations.iter().enumerate() {
        let i = lo + idx;
        // Right multiplication by the conjugate rotation on columns i, i+1;
        // R is upper triangular so rows below i+1 stay zero.
        for r in lo..(i + 2).min(hi) {
            let left = h[(r, i)];
            let right = h[(r, i + 1)];
            h[(r, i)] = c * left + s.conj() * right;
            h[(r, i + 1)] = -s * left + c * right;
        }
    }
    for i in lo..hi {
        h[(i, i)] += shift;
    }
}

/// Complex Givens rotation zeroing g against f:
/// [c s; -conj(s) c] * [f; g] = [r; 0] with real c.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    if g.norm() == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if f.norm() == 0.0 {
        // r = |g|, s = conj(g)/|g|.
        return (0.0, g.conj() / g.norm());
    }
    let fa = f.norm();
    let denom = (f.norm_sqr() + g.norm_sqr()).sqrt();
    let c = fa / denom;
    let s = (f / fa) * (g.conj() / denom);
    (c, s)
}

/// Evaluates a polynomial (ascending coefficients) and its derivative.
pub fn eval_poly_and_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Evaluates a polynomial with ascending coefficients at z.
pub fn eval_poly(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

const ABERTH_TOLERANCE: f64 = 1e-12;
const ABERTH_MAX_SWEEPS: usize = 200;

/// All roots of a monic polynomial by Aberth-Ehrlich simultaneous iteration.
///
/// Initial guesses sit on a slightly perturbed circle whose radius is the
/// Cauchy coefficient bound, so every root lies inside the starting circle.
pub fn simultaneous_roots(monic: &[Complex64]) -> Result<Vec<Complex64>> {
    let degree = check_monic(monic)?;

    let radius = 1.0 + monic[..degree]
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    let mut z: Vec<Complex64> = (0..degree)
        .map(|k| {
            // Asymmetric angular offset so the start never coincides with a
            // symmetric root pattern such as the roots of unity.
            let angle = 2.0 * std::f64::consts::PI * (k as f64) / (degree as f64) + 0.7 / (degree as f64)
                + 0.23;
            Complex64::from_polar(radius, angle)
        })
        .collect();

    for _sweep in 0..ABERTH_MAX_SWEEPS {
        let mut worst_step = 0.0f64;
        for k in 0..degree {
            let (p, dp) = eval_poly_and_derivative(monic, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = if dp.norm() == 0.0 {
                // Stationary point of the polynomial; nudge off it.
                Complex64::new(ABERTH_TOLERANCE, ABERTH_TOLERANCE)
            } else {
                p / dp
            };
            let mut deflate = Complex64::new(0.0, 0.0);
            for j in 0..degree {
                if j != k {
                    let diff = z[k] - z[j];
                    if diff.norm() > 0.0 {
                        deflate += Complex64::new(1.0, 0.0) / diff;
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - ratio * deflate;
            let step = if denom.norm() < 1e-300 { ratio } else { ratio / denom };
            z[k] -= step;
            if !(z[k].re.is_finite() && z[k].im.is_finite()) {
                return Err(Error::RootFindingFailed {
                    sweeps: _sweep,
                    partial: z.clone(),
                });
            }
            worst_step = worst_step.max(step.norm() / (1.0 + z[k].norm()));
        }
        if worst_step < ABERTH_TOLERANCE {
            return Ok(z);
        }
    }
    Err(Error::RootFindingFailed {
        sweeps: ABERTH_MAX_SWEEPS,
        partial: z,
    })
}

/// Expands prod (z - z_k) into ascending monic coefficients.
pub fn monic_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * r;
        }
        coeffs = next;
    }
    coeffs
}

/// Greedy nearest-neighbor pairing; returns the largest matched distance.
/// Adequate at the tolerances and degrees used by the cross-checks.
pub fn max_pairing_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "root sets must have equal cardinality");
    let mut unused: Vec<Complex64> = b.to_vec();
    let mut worst: f64 = 0.0;
    for &ra in a {
        let (idx, dist) = unused
            .iter()
            .enumerate()
            .map(|(i, &rb)| (i, (ra - rb).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty root set");
        unused.swap_remove(idx);
        worst = worst.max(dist);
    }
    worst
}
