//! Uniform-linear-array measurement model: steering vectors, constant-modulus
//! sources, and seeded synthesis of the snapshot matrix X = A diag(c) S^H + N.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

/// RNG stream indices carved out of a scenario seed, so that symbol and
/// noise draws never interleave.
const SIGNAL_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// Element count and spacing-to-wavelength ratio of a uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    num_elements: usize,
    spacing_ratio: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing_ratio: f64) -> Result<Self> {
        if num_elements < 2 {
            return Err(Error::InvalidScenario(format!(
                "array needs at least 2 elements, got {num_elements}"
            )));
        }
        if !(spacing_ratio.is_finite() && spacing_ratio > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "spacing ratio must be finite and positive, got {spacing_ratio}"
            )));
        }
        Ok(Self {
            num_elements,
            spacing_ratio,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing_ratio(&self) -> f64 {
        self.spacing_ratio
    }
}

/// One far-field constant-modulus source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    pub angle_deg: f64,
    pub amplitude: f64,
}

impl SourceConfig {
    pub fn new(angle_deg: f64, amplitude: f64) -> Result<Self> {
        if !(angle_deg.is_finite() && angle_deg.abs() < 90.0) {
            return Err(Error::AngleOutOfRange(angle_deg));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "source amplitude must be positive, got {amplitude}"
            )));
        }
        Ok(Self {
            angle_deg,
            amplitude,
        })
    }
}

/// Fully determines a synthetic data set: geometry, sources, noise level,
/// snapshot count, and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub sources: Vec<SourceConfig>,
    /// `None` disables noise entirely, keeping exactness assertions valid.
    pub snr_db: Option<f64>,
    pub num_snapshots: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn new(
        geometry: ArrayGeometry,
        sources: Vec<SourceConfig>,
        snr_db: Option<f64>,
        num_snapshots: usize,
        seed: u64,
    ) -> Result<Self> {
        let scenario = Self {
            geometry,
            sources,
            snr_db,
            num_snapshots,
            seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.geometry.num_elements();
        let d = self.sources.len();
        if d == 0 || d > m - 1 {
            return Err(Error::InvalidScenario(format!(
                "source count must satisfy 1 <= D <= M-1, got D={d} for M={m}"
            )));
        }
        if self.num_snapshots < 10 * m {
            return Err(Error::InvalidScenario(format!(
                "snapshot count must satisfy N >= 10*M, got N={} for M={m}",
                self.num_snapshots
            )));
        }
        for (i, s) in self.sources.iter().enumerate() {
            SourceConfig::new(s.angle_deg, s.amplitude)?;
            for t in &self.sources[i + 1..] {
                if (s.angle_deg - t.angle_deg).abs() < 1e-9 {
                    return Err(Error::InvalidScenario(format!(
                        "source angles must be distinct, found duplicate {} deg",
                        s.angle_deg
                    )));
                }
            }
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidScenario(
                    "snr_db must be finite; use the noise-free mode instead of an infinite SNR"
                        .into(),
                ));
            }
        }
        Ok(())
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn angles_deg(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.angle_deg).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.amplitude).collect()
    }

    /// Per-element noise variance implied by the SNR definition
    /// SNR(dB) = 10 log10(c_max^2 / sigma^2); zero when noise is disabled.
    pub fn noise_variance(&self) -> f64 {
        match self.snr_db {
            None => 0.0,
            Some(snr) => {
                let c_max = self
                    .sources
                    .iter()
                    .map(|s| s.amplitude)
                    .fold(0.0f64, f64::max);
                c_max * c_max * 10f64.powf(-snr / 10.0)
            }
        }
    }
}

/// Unit-modulus source symbols, one column per source.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    entries: ComplexMatrix,
}

impl SignalMatrix {
    pub fn num_snapshots(&self) -> usize {
        self.entries.rows()
    }

    pub fn num_sources(&self) -> usize {
        self.entries.cols()
    }

    pub fn symbol(&self, snapshot: usize, source: usize) -> Complex64 {
        self.entries[(snapshot, source)]
    }

    pub fn entries(&self) -> &ComplexMatrix {
        &self.entries
    }
}

/// M x N measurement matrix together with the scenario that produced it.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    entries: ComplexMatrix,
    scenario: Scenario,
}

impl SnapshotMatrix {
    #[cfg(test)]
    pub(crate) fn from_parts_for_tests(entries: ComplexMatrix, scenario: Scenario) -> Self {
        Self { entries, scenario }
    }

    pub fn entries(&self) -> &ComplexMatrix {
        &self.entries
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn num_elements(&self) -> usize {
        self.entries.rows()
    }

    pub fn num_snapshots(&self) -> usize {
        self.entries.cols()
    }

    /// One snapshot x(n) across all elements.
    pub fn snapshot(&self, n: usize) -> Vec<Complex64> {
        self.entries.column(n)
    }
}

/// Spatial frequency xi = (delta/lambda) sin(theta); the angular frequency is
/// mu = 2 pi xi.
pub fn spatial_frequency(geometry: &ArrayGeometry, angle_deg: f64) -> Result<f64> {
    if !(angle_deg.is_finite() && angle_deg.abs() < 90.0) {
        return Err(Error::AngleOutOfRange(angle_deg));
    }
    Ok(geometry.spacing_ratio() * angle_deg.to_radians().sin())
}

/// Steering vector a_m = exp(i mu m), m = 0..M-1, referenced to the first
/// element at the spatial origin.
pub fn steering_vector(geometry: &ArrayGeometry, mu: f64) -> Vec<Complex64> {
    (0..geometry.num_elements())
        .map(|m| Complex64::from_polar(1.0, mu * m as f64))
        .collect()
}

/// Array response matrix with one steering-vector column per source angle.
pub fn steering_matrix(geometry: &ArrayGeometry, angles_deg: &[f64]) -> Result<ComplexMatrix> {
    if angles_deg.is_empty() {
        return Err(Error::InvalidScenario("no source angles given".into()));
    }
    for (i, a) in angles_deg.iter().enumerate() {
        for b in &angles_deg[i + 1..] {
            if (a - b).abs() < 1e-9 {
                return Err(Error::InvalidScenario(format!(
                    "duplicate source angle {a} deg"
                )));
            }
        }
    }
    let m = geometry.num_elements();
    let mut out = ComplexMatrix::zeros(m, angles_deg.len());
    for (d, &angle) in angles_deg.iter().enumerate() {
        let mu = 2.0 * std::f64::consts::PI * spatial_frequency(geometry, angle)?;
        for (row, value) in steering_vector(geometry, mu).into_iter().enumerate() {
            out[(row, d)] = value;
        }
    }
    Ok(out)
}

/// I.i.d. QPSK symbols drawn uniformly from {(+-1 +- i)/sqrt(2)};
/// deterministic for a fixed seed.
pub fn generate_cm_signals(num_sources: usize, num_snapshots: usize, seed: u64) -> SignalMatrix {
    assert!(num_sources >= 1 && num_snapshots >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(SIGNAL_STREAM);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let constellation = [
        Complex64::new(half, half),
        Complex64::new(half, -half),
        Complex64::new(-half, half),
        Complex64::new(-half, -half),
    ];
    let entries = ComplexMatrix::from_fn(num_snapshots, num_sources, |_, _| {
        constellation[rng.random_range(0..4usize)]
    });
    SignalMatrix { entries }
}

/// Synthesizes X = A diag(c) S^H + N with circularly symmetric complex
/// Gaussian noise of per-element variance sigma^2; a pure function of the
/// scenario.
pub fn synthesize(scenario: &Scenario) -> Result<SnapshotMatrix> {
    scenario.validate()?;
    let m = scenario.geometry.num_elements();
    let n = scenario.num_snapshots;
    let d = scenario.num_sources();

    let a = steering_matrix(&scenario.geometry, &scenario.angles_deg())?;
    let amplitudes = scenario.amplitudes();
    let signals = generate_cm_signals(d, n, scenario.seed);

    let mut x = ComplexMatrix::zeros(m, n);
    for row in 0..m {
        for col in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for src in 0..d {
                acc += a[(row, src)] * amplitudes[src] * signals.symbol(col, src).conj();
            }
            x[(row, col)] = acc;
        }
    }

    let sigma_sq = scenario.noise_variance();
    if sigma_sq > 0.0 {
        let component_std = (sigma_sq / 2.0).sqrt();
        let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed);
        rng.set_stream(NOISE_STREAM);
        for row in 0..m {
            for col in 0..n {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                x[(row, col)] += Complex64::new(re * component_std, im * component_std);
            }
        }
    }

    if !x.is_finite() {
        return Err(Error::InvalidScenario(
            "synthesized snapshot matrix contains non-finite entries".into(),
        ));
    }

    Ok(SnapshotMatrix {
        entries: x,
        scenario: scenario.clone(),
    })
}

/// Decorrelated per-trial seed for Monte Carlo sweeps (SplitMix64 finalizer
/// over the pair).
pub fn derive_trial_seed(base_seed: u64, trial_index: u64) -> u64 {
    let mut z = base_seed
        .wrapping_add(trial_index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_wave(m: usize) -> ArrayGeometry {
        ArrayGeometry::new(m, 0.5).unwrap()
    }

    #[test]
    fn spatial_frequency_at_broadside_is_zero() {
        assert_eq!(spatial_frequency(&half_wave(8), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn spatial_frequency_at_twenty_degrees() {
        let xi = spatial_frequency(&half_wave(8), 20.0).unwrap();
        assert!((xi - 0.171010071662834).abs() < 1e-12, "xi = {xi}");
    }

    #[test]
    fn spatial_frequency_saturates_toward_endfire() {
        let xi = spatial_frequency(&half_wave(8), 90.0 - 1e-9).unwrap();
        assert!((xi - 0.5).abs() < 1e-9);
        assert!(xi <= 0.5);
        // Visibly below the limit for a visibly interior angle.
        let xi = spatial_frequency(&half_wave(8), 89.0).unwrap();
        assert!(xi < 0.5);
    }

    #[test]
    fn spatial_frequency_rejects_out_of_range_angles() {
        assert!(matches!(
            spatial_frequency(&half_wave(8), 90.0),
            Err(Error::AngleOutOfRange(_))
        ));
        assert!(matches!(
            spatial_frequency(&half_wave(8), -123.0),
            Err(Error::AngleOutOfRange(_))
        ));
    }

    #[test]
    fn steering_vector_at_zero_is_all_ones() {
        let a = steering_vector(&half_wave(8), 0.0);
        assert!(a.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() == 0.0));
    }

    #[test]
    fn steering_vector_at_pi_alternates_sign() {
        let a = steering_vector(&half_wave(4), std::f64::consts::PI);
        let expected = [1.0, -1.0, 1.0, -1.0];
        for (z, e) in a.iter().zip(expected) {
            assert!((z - Complex64::new(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn steering_vector_is_two_pi_periodic() {
        let geometry = half_wave(8);
        for &mu in &[-2.3, 0.0, 0.9, 3.1] {
            let a = steering_vector(&geometry, mu);
            let b = steering_vector(&geometry, mu + 2.0 * std::f64::consts::PI);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn steering_vector_norm_squared_is_element_count() {
        for &mu in &[0.0, 0.37, -2.6, 3.0] {
            let a = steering_vector(&half_wave(8), mu);
            let norm_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            assert!((norm_sq - 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_matrix_single_column_matches_steering_vector() {
        let geometry = half_wave(8);
        let a = steering_matrix(&geometry, &[20.0]).unwrap();
        let mu = 2.0 * std::f64::consts::PI * spatial_frequency(&geometry, 20.0).unwrap();
        let v = steering_vector(&geometry, mu);
        for m in 0..8 {
            assert!((a[(m, 0)] - v[m]).norm() < 1e-15);
        }
    }

    #[test]
    fn steering_matrix_gram_diagonal_is_m() {
        let a = steering_matrix(&half_wave(8), &[-53.2, 3.23, 20.0]).unwrap();
        let g = a.hermitian().mul(&a);
        for d in 0..3 {
            assert!((g[(d, d)].re - 8.0).abs() < 1e-12);
            assert!(g[(d, d)].im.abs() < 1e-12);
        }
    }

    #[test]
    fn caption_angles_are_phase_related_multiples() {
        // The published angles are rounded to three digits, so the multiples
        // hold to about 1e-3 in units of 2 pi / (M - 1).
        let geometry = half_wave(8);
        let angles = [-53.2, 3.23, 20.0];
        let mus: Vec<f64> = angles
            .iter()
            .map(|&a| 2.0 * std::f64::consts::PI * spatial_frequency(&geometry, a).unwrap())
            .collect();
        let unit = 2.0 * std::f64::consts::PI / 7.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let k = (mus[j] - mus[i]).abs() / unit;
                assert!((k - k.round()).abs() < 5e-3, "k = {k}");
                assert!(k.round() >= 1.0);
            }
        }
    }

    #[test]
    fn steering_matrix_rejects_duplicate_angles() {
        assert!(matches!(
            steering_matrix(&half_wave(8), &[10.0, 10.0]),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn qpsk_symbols_have_unit_modulus() {
        let s = generate_cm_signals(3, 500, 42);
        for n in 0..500 {
            for d in 0..3 {
                assert!((s.symbol(n, d).norm() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn qpsk_columns_decorrelate() {
        let n = 10_000;
        let s = generate_cm_signals(2, n, 7);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            acc += s.symbol(i, 0) * s.symbol(i, 1).conj();
        }
        let rho = acc.norm() / n as f64;
        assert!(rho < 0.05, "rho = {rho}");
    }

    #[test]
    fn qpsk_generation_is_deterministic() {
        let a = generate_cm_signals(3, 256, 1234);
        let b = generate_cm_signals(3, 256, 1234);
        assert_eq!(a, b);
    }

    fn three_source_scenario(snr_db: Option<f64>, n: usize, seed: u64) -> Scenario {
        Scenario::new(
            half_wave(8),
            vec![
                SourceConfig::new(-53.2, 1.0).unwrap(),
                SourceConfig::new(3.23, 1.0).unwrap(),
                SourceConfig::new(20.0, 1.0).unwrap(),
            ],
            snr_db,
            n,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_synthesis_matches_triple_loop_oracle() {
        let scenario = three_source_scenario(None, 200, 5);
        let x = synthesize(&scenario).unwrap();
        let a = steering_matrix(&scenario.geometry, &scenario.angles_deg()).unwrap();
        let s = generate_cm_signals(3, 200, 5);
        for row in 0..8 {
            for col in 0..200 {
                let mut expect = Complex64::new(0.0, 0.0);
                for d in 0..3 {
                    expect += a[(row, d)] * 1.0 * s.symbol(col, d).conj();
                }
                assert!((x.entries()[(row, col)] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn single_unit_source_produces_unit_modulus_snapshots() {
        let scenario = Scenario::new(
            half_wave(8),
            vec![SourceConfig::new(20.0, 1.0).unwrap()],
            None,
            100,
            9,
        )
        .unwrap();
        let x = synthesize(&scenario).unwrap();
        for row in 0..8 {
            for col in 0..100 {
                assert!((x.entries()[(row, col)].norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empirical_noise_power_tracks_sigma_squared() {
        let scenario = three_source_scenario(Some(20.0), 10_000, 77);
        let sigma_sq = scenario.noise_variance();
        assert!((sigma_sq - 0.01).abs() < 1e-15);

        let noisy = synthesize(&scenario).unwrap();
        let clean = synthesize(&three_source_scenario(None, 10_000, 77)).unwrap();
        for row in 0..8 {
            let mut power = 0.0;
            for col in 0..10_000 {
                power += (noisy.entries()[(row, col)] - clean.entries()[(row, col)]).norm_sqr();
            }
            power /= 10_000.0;
            assert!(
                (power - sigma_sq).abs() < 0.05 * sigma_sq,
                "row {row}: power = {power}"
            );
        }
    }

    #[test]
    fn synthesis_is_bit_identical_for_equal_seeds() {
        let scenario = three_source_scenario(Some(20.0), 400, 31);
        let a = synthesize(&scenario).unwrap();
        let b = synthesize(&scenario).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn scenario_invariants_are_enforced() {
        let geometry = half_wave(4);
        // Too many sources for M = 4.
        assert!(Scenario::new(
            geometry,
            (0..4)
                .map(|i| SourceConfig::new(i as f64 * 10.0, 1.0).unwrap())
                .collect(),
            None,
            400,
            0,
        )
        .is_err());
        // Too few snapshots.
        assert!(Scenario::new(
            geometry,
            vec![SourceConfig::new(5.0, 1.0).unwrap()],
            None,
            39,
            0,
        )
        .is_err());
    }

    #[test]
    fn trial_seeds_are_decorrelated() {
        let a = derive_trial_seed(1, 0);
        let b = derive_trial_seed(1, 1);
        let c = derive_trial_seed(2, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_trial_seed(1, 0));
    }
}
