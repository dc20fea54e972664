//! Channel realizations: single path, LOS Rician and NLOS multipath.
//!
//! Every generator is normalized to unit average total path power, so the
//! pre-beamforming SNR is `P_T / σ²` for all models.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::array::UniformLinearArray;
use crate::error::{invalid, Result};
use crate::rng::complex_normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationPath {
    pub complex_gain: Complex64,
    pub aod_deg: f64,
    pub aoa_deg: f64,
}

impl PropagationPath {
    pub fn aod_sine(&self) -> f64 {
        self.aod_deg.to_radians().sin()
    }

    pub fn aoa_sine(&self) -> f64 {
        self.aoa_deg.to_radians().sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    SinglePath,
    LosRician,
    NlosMultipath,
}

/// `N_R × N_T` channel matrix, row-major, with the specular paths it was
/// built from. For Rician models the stored path gains already include the
/// `sqrt(K/(K+1))` factor; the diffuse part exists only in the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    n_r: usize,
    n_t: usize,
    matrix: Vec<Complex64>,
    paths: Vec<PropagationPath>,
    model: ChannelModel,
}

impl ChannelRealization {
    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn get(&self, r: usize, t: usize) -> Complex64 {
        self.matrix[r * self.n_t + t]
    }

    pub fn paths(&self) -> &[PropagationPath] {
        &self.paths
    }

    pub fn model(&self) -> ChannelModel {
        self.model
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.matrix.iter().map(|h| h.norm_sqr()).sum()
    }

    /// `H w†`, an `N_R` vector.
    pub fn apply_tx(&self, w: &[Complex64]) -> Vec<Complex64> {
        self.matrix
            .chunks_exact(self.n_t)
            .map(|row| row.iter().zip(w).map(|(h, w)| h * w.conj()).sum())
            .collect()
    }
}

/// Folds any angle onto `[-90, 90]` degrees with the same sine, the only
/// quantity a linear array can observe.
pub fn fold_angle_deg(angle_deg: f64) -> f64 {
    angle_deg.to_radians().sin().asin().to_degrees()
}

/// Rank-one matrix `alpha · u†(φ) v(ψ)`.
pub fn single_path(
    aod_deg: f64,
    aoa_deg: f64,
    gain: Complex64,
    tx: &UniformLinearArray,
    rx: &UniformLinearArray,
) -> ChannelRealization {
    let mut matrix = vec![Complex64::new(0.0, 0.0); rx.num_elements() * tx.num_elements()];
    add_path(&mut matrix, tx, rx, aod_deg, aoa_deg, gain);
    ChannelRealization {
        n_r: rx.num_elements(),
        n_t: tx.num_elements(),
        matrix,
        paths: vec![PropagationPath {
            complex_gain: gain,
            aod_deg,
            aoa_deg,
        }],
        model: ChannelModel::SinglePath,
    }
}

fn add_path(
    matrix: &mut [Complex64],
    tx: &UniformLinearArray,
    rx: &UniformLinearArray,
    aod_deg: f64,
    aoa_deg: f64,
    gain: Complex64,
) {
    let v = tx.steering_vector(aod_deg);
    let u = rx.steering_vector(aoa_deg);
    let n_t = v.len();
    for (r, ur) in u.iter().enumerate() {
        let left = gain * ur.conj();
        for (t, vt) in v.iter().enumerate() {
            matrix[r * n_t + t] += left * vt;
        }
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Unit-power dominant path plus an i.i.d. CN(0, 1) diffuse matrix, mixed
/// with weights `sqrt(K/(K+1))` and `sqrt(1/(K+1))`.
pub fn los_rician<R: Rng + ?Sized>(
    aod_deg: f64,
    aoa_deg: f64,
    k_factor_db: f64,
    tx: &UniformLinearArray,
    rx: &UniformLinearArray,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if !k_factor_db.is_finite() {
        return Err(invalid(format!("K-factor must be finite, got {k_factor_db}")));
    }
    let mut matrix = vec![Complex64::new(0.0, 0.0); rx.num_elements() * tx.num_elements()];
    let path = rician_component(
        &mut matrix,
        tx,
        rx,
        aod_deg,
        aoa_deg,
        Complex64::new(1.0, 0.0),
        db_to_linear(k_factor_db),
        rng,
    );
    Ok(ChannelRealization {
        n_r: rx.num_elements(),
        n_t: tx.num_elements(),
        matrix,
        paths: vec![path],
        model: ChannelModel::LosRician,
    })
}

#[allow(clippy::too_many_arguments)]
fn rician_component<R: Rng + ?Sized>(
    matrix: &mut [Complex64],
    tx: &UniformLinearArray,
    rx: &UniformLinearArray,
    aod_deg: f64,
    aoa_deg: f64,
    gain: Complex64,
    k: f64,
    rng: &mut R,
) -> PropagationPath {
    let specular = gain * (k / (k + 1.0)).sqrt();
    let diffuse = gain.norm() * (1.0 / (k + 1.0)).sqrt();
    add_path(matrix, tx, rx, aod_deg, aoa_deg, specular);
    for h in matrix.iter_mut() {
        *h += complex_normal(rng) * diffuse;
    }
    PropagationPath {
        complex_gain: specular,
        aod_deg,
        aoa_deg,
    }
}

/// Angles drawn uniformly in degrees over `[lo, hi)`, then folded onto
/// `[-90, 90]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeRange {
    pub lo: f64,
    pub hi: f64,
}

impl DegreeRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo >= hi || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid(format!("degree range must satisfy lo < hi, got [{lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        fold_angle_deg(rng.random_range(self.lo..self.hi))
    }
}

/// `M = max(1, Poisson(mean_paths))` Rician paths sharing one K-factor.
/// Power fractions are normalized i.i.d. unit exponentials, sorted
/// descending; each path has a uniform random phase.
pub fn nlos_multipath<R: Rng + ?Sized>(
    tx: &UniformLinearArray,
    rx: &UniformLinearArray,
    k_factor_db: f64,
    mean_paths: f64,
    aod_range: DegreeRange,
    aoa_range: DegreeRange,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if !k_factor_db.is_finite() {
        return Err(invalid(format!("K-factor must be finite, got {k_factor_db}")));
    }
    if mean_paths <= 0.0 || !mean_paths.is_finite() {
        return Err(invalid(format!("mean path count must be positive, got {mean_paths}")));
    }
    let poisson = Poisson::new(mean_paths).map_err(|e| invalid(e.to_string()))?;
    let m = (poisson.sample(rng) as usize).max(1);
    let mut fractions: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = fractions.iter().sum();
    fractions.iter_mut().for_each(|p| *p /= total);
    fractions.sort_by(|a, b| b.total_cmp(a));

    let k = db_to_linear(k_factor_db);
    let mut matrix = vec![Complex64::new(0.0, 0.0); rx.num_elements() * tx.num_elements()];
    let mut paths = Vec::with_capacity(m);
    for p in fractions {
        let aod = aod_range.sample(rng);
        let aoa = aoa_range.sample(rng);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let gain = Complex64::from_polar(p.sqrt(), phase);
        paths.push(rician_component(&mut matrix, tx, rx, aod, aoa, gain, k, rng));
    }
    Ok(ChannelRealization {
        n_r: rx.num_elements(),
        n_t: tx.num_elements(),
        matrix,
        paths,
        model: ChannelModel::NlosMultipath,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrSpec {
    pub snr_db: f64,
    pub transmit_power: f64,
    pub noise_power: f64,
}

/// Fixes `σ² = 1` and `P_T = 10^(snr_db/10)`.
pub fn calibrate_snr(snr_db: f64) -> SnrSpec {
    SnrSpec {
        snr_db,
        transmit_power: db_to_linear(snr_db),
        noise_power: 1.0,
    }
}

/// Random channel generator used by the simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ChannelSpec {
    /// Unit-gain single path.
    SinglePath { aod: DegreeRange, aoa: DegreeRange },
    LosRician {
        aod: DegreeRange,
        aoa: DegreeRange,
        k_factor_db: f64,
    },
    NlosMultipath {
        aod: DegreeRange,
        aoa: DegreeRange,
        k_factor_db: f64,
        mean_paths: f64,
    },
}

impl ChannelSpec {
    pub fn model(&self) -> ChannelModel {
        match self {
            Self::SinglePath { .. } => ChannelModel::SinglePath,
            Self::LosRician { .. } => ChannelModel::LosRician,
            Self::NlosMultipath { .. } => ChannelModel::NlosMultipath,
        }
    }

    pub fn draw<R: Rng + ?Sized>(
        &self,
        tx: &UniformLinearArray,
        rx: &UniformLinearArray,
        rng: &mut R,
    ) -> Result<ChannelRealization> {
        match *self {
            Self::SinglePath { aod, aoa } => {
                let (d, a) = (aod.sample(rng), aoa.sample(rng));
                Ok(single_path(d, a, Complex64::new(1.0, 0.0), tx, rx))
            }
            Self::LosRician {
                aod,
                aoa,
                k_factor_db,
            } => {
                let (d, a) = (aod.sample(rng), aoa.sample(rng));
                los_rician(d, a, k_factor_db, tx, rx, rng)
            }
            Self::NlosMultipath {
                aod,
                aoa,
                k_factor_db,
                mean_paths,
            } => nlos_multipath(tx, rx, k_factor_db, mean_paths, aod, aoa, rng),
        }
    }
}
