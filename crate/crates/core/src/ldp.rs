//! Misalignment bounds, rate functions and asymptotic exponents.
//!
//! Everything here is expressed through the per-pilot non-centralities
//! `ξ_l = 2 P_T g_l / σ²`, so a pair measured with `N` pilots has
//! `λ_l = N ξ_l`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::channel::SnrSpec;
use crate::codebook::HierarchicalCodebook;
use crate::error::{invalid, Result};
use crate::specfun::{pairwise_error_prob, DoublyNoncentralF};
use crate::training::ScanSchedule;

/// Per-pilot non-centralities of the pairs examined at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelGainProfile {
    xi: Vec<f64>,
    opt_index: usize,
    runner_up_index: Option<usize>,
}

impl LevelGainProfile {
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        if xi.is_empty() {
            return Err(invalid("gain profile needs at least one pair"));
        }
        if let Some(bad) = xi.iter().find(|x| **x < 0.0 || !x.is_finite()) {
            return Err(invalid(format!("non-centralities must be finite and >= 0, got {bad}")));
        }
        let opt_index = argmax(xi.iter().copied().enumerate()).expect("nonempty");
        let runner_up_index = argmax(xi.iter().copied().enumerate().filter(|(i, _)| *i != opt_index));
        Ok(Self {
            xi,
            opt_index,
            runner_up_index,
        })
    }

    /// `pairs` pairs of which only the first has gain `gain`.
    pub fn ideal(pairs: usize, gain: f64, snr: &SnrSpec) -> Result<Self> {
        let mut xi = vec![0.0; pairs.max(1)];
        xi[0] = 2.0 * snr.transmit_power * gain / snr.noise_power;
        Self::new(xi)
    }

    /// Profile from effective channel gains `|h_l|²`.
    pub fn from_gains(gains: &[f64], snr: &SnrSpec) -> Result<Self> {
        Self::new(
            gains
                .iter()
                .map(|g| 2.0 * snr.transmit_power * g / snr.noise_power)
                .collect(),
        )
    }

    /// Every `ξ` multiplied by `factor`, e.g. a level's share `N^(k)/N`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.xi.iter().map(|x| x * factor).collect())
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn opt_index(&self) -> usize {
        self.opt_index
    }

    pub fn runner_up_index(&self) -> Option<usize> {
        self.runner_up_index
    }

    pub fn xi_opt(&self) -> f64 {
        self.xi[self.opt_index]
    }

    pub fn xi_runner_up(&self) -> Option<f64> {
        self.runner_up_index.map(|i| self.xi[i])
    }

    /// Rate of the dominant pairwise error, `I₁(ξ_opt, ξ_0)`; infinite for a
    /// single pair.
    pub fn rate(&self) -> f64 {
        self.xi_runner_up()
            .map_or(f64::INFINITY, |x0| rate_i1(self.xi_opt(), x0))
    }

    fn others(&self) -> impl Iterator<Item = f64> + '_ {
        self.xi
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != self.opt_index)
            .map(|(_, &x)| x)
    }
}

fn argmax(it: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in it {
        if best.is_none_or(|(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}

/// Union bound `Σ_{l≠opt} F_(2,2)(1 | N ξ_opt, N ξ_l)`.
pub fn upper_bound(profile: &LevelGainProfile, pilots: f64, tol: f64) -> Result<f64> {
    let lam_opt = pilots * profile.xi_opt();
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut sum = 0.0;
    for x in profile.others() {
        let v = match cache.get(&x.to_bits()) {
            Some(&v) => v,
            None => {
                let v = pairwise_error_prob(lam_opt, pilots * x, tol)?;
                cache.insert(x.to_bits(), v);
                v
            }
        };
        sum += v;
    }
    Ok(sum)
}

/// Second-order Bonferroni bound: the union bound minus
/// `Σ_{i<j; i,j≠opt} F_(2,4)(1 | N ξ_opt, N(ξ_i + ξ_j))`. Can be negative.
pub fn lower_bound(profile: &LevelGainProfile, pilots: f64, tol: f64) -> Result<f64> {
    Ok(upper_bound(profile, pilots, tol)? - pair_correction(profile, pilots, tol)?)
}

fn pair_correction(profile: &LevelGainProfile, pilots: f64, tol: f64) -> Result<f64> {
    let lam_opt = pilots * profile.xi_opt();
    let others: Vec<f64> = profile.others().collect();
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut sum = 0.0;
    for i in 0..others.len() {
        for j in i + 1..others.len() {
            let s = others[i] + others[j];
            let v = match cache.get(&s.to_bits()) {
                Some(&v) => v,
                None => {
                    let v = DoublyNoncentralF::new(2, 4, lam_opt, pilots * s)?.cdf(1.0, tol)?;
                    cache.insert(s.to_bits(), v);
                    v
                }
            };
            sum += v;
        }
    }
    Ok(sum)
}

/// `(sqrt ξ_opt - sqrt ξ_l)² / 4`.
pub fn rate_i1(xi_opt: f64, xi_l: f64) -> f64 {
    (xi_opt.sqrt() - xi_l.sqrt()).powi(2) / 4.0
}

/// `(sqrt(2 ξ_opt) - sqrt(ξ_i + ξ_j))² / 6`.
pub fn rate_i2(xi_opt: f64, xi_i: f64, xi_j: f64) -> f64 {
    ((2.0 * xi_opt).sqrt() - (xi_i + xi_j).sqrt()).powi(2) / 6.0
}

/// `(L - 1) exp(-N ξ_opt / 4)`, the exponential behaviour of the union
/// bound when every non-optimal pair has zero gain.
pub fn ldp_approximation(profile: &LevelGainProfile, pilots: f64) -> f64 {
    if profile.others().any(|x| x > 0.0) {
        log::warn!("exponential approximation applied to a profile with leakage");
    }
    (profile.len() as f64 - 1.0) * (-pilots * profile.xi_opt() / 4.0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub p_up: f64,
    pub p_low: f64,
    pub p_low_clamped: f64,
    pub ldp_approx: f64,
    pub rate: f64,
}

pub fn bound_report(profile: &LevelGainProfile, pilots: f64, tol: f64) -> Result<BoundReport> {
    let p_up = upper_bound(profile, pilots, tol)?;
    let p_low = p_up - pair_correction(profile, pilots, tol)?;
    Ok(BoundReport {
        p_up,
        p_low,
        p_low_clamped: p_low.max(0.0),
        ldp_approx: ldp_approximation(profile, pilots),
        rate: profile.rate(),
    })
}

/// Probability that some level fails, levels failing independently given
/// that all earlier ones succeeded.
pub fn overall_miss(per_level: &[f64]) -> Result<f64> {
    let mut survive = 1.0;
    let mut total = 0.0;
    for &p in per_level {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("per-level probability {p} is outside [0, 1]")));
        }
        total += p * survive;
        survive *= 1.0 - p;
    }
    Ok(total)
}

/// Level with the smallest dominant rate (lowest level on ties) and that rate.
pub fn dominant_level(profiles: &[LevelGainProfile]) -> Result<(usize, f64)> {
    if profiles.is_empty() {
        return Err(invalid("need at least one level"));
    }
    let mut best = (0, profiles[0].rate());
    for (k, p) in profiles.iter().enumerate().skip(1) {
        let r = p.rate();
        if r < best.1 {
            best = (k, r);
        }
    }
    Ok(best)
}

/// `I(u, v) = (sqrt ξ_opt - sqrt u)² / 2 + (sqrt ξ_l - sqrt v)² / 2`, the
/// joint rate function of the per-pilot statistics of two pairs.
pub fn joint_rate_function(u: f64, v: f64, xi_opt: f64, xi_l: f64) -> f64 {
    0.5 * (xi_opt.sqrt() - u.sqrt()).powi(2) + 0.5 * (xi_l.sqrt() - v.sqrt()).powi(2)
}

/// Ideal (flat-top) per-stage profiles of a schedule: the pair toward the
/// path has the product of the two ideal level gains, every other pair zero.
pub fn ideal_stage_profiles(
    tx: &HierarchicalCodebook,
    rx: &HierarchicalCodebook,
    schedule: &ScanSchedule,
    snr: &SnrSpec,
) -> Result<Vec<LevelGainProfile>> {
    schedule.check(tx, rx)?;
    schedule
        .stages()
        .iter()
        .zip(schedule.pair_counts(tx, rx))
        .map(|(s, count)| {
            let g = tx.ideal_level_gain(s.tx_level) * rx.ideal_level_gain(s.rx_level);
            LevelGainProfile::ideal(count, g, snr)
        })
        .collect()
}

/// Decay exponents per total pilot, `-(1/N_tot) ln p_miss` as `N_tot → ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    /// `ξ^(K) / (4 L_ex)`.
    pub exhaustive: f64,
    /// Smallest per-stage exponent under equal allocation.
    pub hierarchical_equal: f64,
    /// Smallest per-stage exponent under `γ` allocation.
    pub hierarchical_unequal: f64,
    pub equal_stage_rates: Vec<f64>,
    pub unequal_stage_rates: Vec<f64>,
    pub gamma: f64,
    pub first_stage_pairs: usize,
    pub total_pairs: usize,
    pub exhaustive_pairs: usize,
}

impl Exponents {
    pub fn equal_ratio(&self) -> f64 {
        self.hierarchical_equal / self.exhaustive
    }

    pub fn unequal_ratio(&self) -> f64 {
        self.hierarchical_unequal / self.exhaustive
    }
}

/// Exponents of exhaustive and multi-level search with ideal beams. Stage
/// `k` with `N^(k)` pilots per pair decays as `(N^(k)/N_tot) ξ^(k)/4`.
pub fn asymptotic_exponents(
    tx: &HierarchicalCodebook,
    rx: &HierarchicalCodebook,
    schedule: &ScanSchedule,
    snr: &SnrSpec,
) -> Result<Exponents> {
    let profiles = ideal_stage_profiles(tx, rx, schedule, snr)?;
    let counts = schedule.pair_counts(tx, rx);
    let sizes = schedule.codebook_sizes(tx, rx);
    let total_pairs: usize = counts.iter().sum();
    let exhaustive_pairs = tx.top_size() * rx.top_size();
    let top_gain = tx.ideal_level_gain(tx.num_levels() - 1) * rx.ideal_level_gain(rx.num_levels() - 1);
    let xi_top = 2.0 * snr.transmit_power * top_gain / snr.noise_power;
    let exhaustive = rate_i1(xi_top, 0.0) / exhaustive_pairs as f64;

    let gamma = schedule.gamma(tx, rx);
    let equal_stage_rates: Vec<f64> = profiles.iter().map(|p| p.rate() / total_pairs as f64).collect();
    let unequal_stage_rates: Vec<f64> = profiles
        .iter()
        .zip(&sizes)
        .map(|(p, &(lt, lr))| p.rate() * gamma / (lt * lr) as f64)
        .collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Exponents {
        exhaustive,
        hierarchical_equal: min(&equal_stage_rates),
        hierarchical_unequal: min(&unequal_stage_rates),
        equal_stage_rates,
        unequal_stage_rates,
        gamma,
        first_stage_pairs: counts[0],
        total_pairs,
        exhaustive_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{AngleInterval, UniformLinearArray};
    use crate::channel::calibrate_snr;
    use crate::codebook::Synthesis;
    use crate::specfun::DEFAULT_TOL;
    use proptest::prelude::*;

    const FIG2_XI: f64 = 1.011_928_851_253_881_3;

    fn fig2_profile() -> LevelGainProfile {
        LevelGainProfile::ideal(8, 16.0, &calibrate_snr(-15.0)).unwrap()
    }

    /// Exact miss probability of an ideal profile: the optimal statistic
    /// loses to the largest of `L-1` central χ²₂ variables,
    /// `Σ_m C(L-1, m) (-1)^(m+1) exp(-m λ / (2(1+m))) / (1+m)`.
    fn ideal_exact_miss(pairs: usize, lambda: f64) -> f64 {
        let r = pairs - 1;
        let mut binom = 1.0;
        let mut s = 0.0;
        for m in 1..=r {
            binom *= (r - m + 1) as f64 / m as f64;
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * binom * (-(m as f64) * lambda / (2.0 * (1.0 + m as f64))).exp() / (1.0 + m as f64);
        }
        s
    }

    #[test]
    fn fig2_constants() {
        assert!((fig2_profile().xi_opt() - FIG2_XI).abs() < 1e-14);
        assert!((rate_i1(FIG2_XI, 0.0) - 0.252_982).abs() < 1e-6);
        assert!((fig2_profile().xi_opt() - 2.0 * 10f64.powf(-1.5) * 16.0).abs() < 1e-15);
    }

    #[test]
    fn upper_bound_examples() {
        let flat = LevelGainProfile::new(vec![0.0; 5]).unwrap();
        assert!((upper_bound(&flat, 10.0, DEFAULT_TOL).unwrap() - 2.0).abs() < 1e-9);
        let p = fig2_profile();
        for n in [1.0, 7.0, 40.0, 100.0] {
            let want = 7.0 * 0.5 * (-n * FIG2_XI / 4.0).exp();
            let got = upper_bound(&p, n, DEFAULT_TOL).unwrap();
            assert!((got / want - 1.0).abs() < 1e-8);
        }
        let at100 = upper_bound(&p, 100.0, DEFAULT_TOL).unwrap();
        assert!((at100 - 3.6e-11).abs() < 0.05e-11, "{at100}");
    }

    #[test]
    fn lower_bound_examples() {
        let two = LevelGainProfile::new(vec![3.0, 1.0]).unwrap();
        assert_eq!(
            lower_bound(&two, 5.0, DEFAULT_TOL).unwrap(),
            upper_bound(&two, 5.0, DEFAULT_TOL).unwrap()
        );
        let flat3 = LevelGainProfile::new(vec![0.0; 3]).unwrap();
        assert!((lower_bound(&flat3, 4.0, DEFAULT_TOL).unwrap() - 4.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn bounds_sandwich_exact_miss() {
        let p = fig2_profile();
        for n in [2.0, 10.0, 30.0, 60.0, 100.0] {
            let exact = ideal_exact_miss(8, n * FIG2_XI);
            let r = bound_report(&p, n, DEFAULT_TOL).unwrap();
            assert!(r.p_low <= exact * (1.0 + 1e-9) && exact <= r.p_up * (1.0 + 1e-9), "N={n}");
        }
    }

    #[test]
    fn bound_ratio_closes() {
        let p = fig2_profile();
        let r = bound_report(&p, 100.0, DEFAULT_TOL).unwrap();
        let gap = (r.p_up / r.p_low).ln().abs();
        assert!(gap < 0.01, "{gap}");
        let r = bound_report(&p, 60.0, DEFAULT_TOL).unwrap();
        assert!((r.p_up / r.p_low).ln().abs() > gap);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate_i1(2.5, 2.5), 0.0);
        assert_eq!(rate_i1(4.0, 0.0), 1.0);
        assert!(rate_i2(1.7, 1.7, 1.7).abs() < 1e-15);
        assert!((rate_i2(2.0, 0.0, 0.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ldp_examples() {
        let p = fig2_profile();
        assert_eq!(ldp_approximation(&p, 0.0), 7.0);
        let v = ldp_approximation(&p, 100.0);
        assert!((v - 7.0 * (-25.298_221_281_347_03f64).exp()).abs() < 1e-20);
        assert!((v - 7.2e-11).abs() < 0.05e-11);
        let slope = (ldp_approximation(&p, 51.0) / ldp_approximation(&p, 50.0)).ln();
        assert!((slope + FIG2_XI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn overall_miss_examples() {
        assert!((overall_miss(&[0.1, 0.2]).unwrap() - 0.28).abs() < 1e-15);
        assert_eq!(overall_miss(&[0.37]).unwrap(), 0.37);
        assert_eq!(overall_miss(&[0.0, 0.0, 1.0]).unwrap(), 1.0);
        assert!(overall_miss(&[1.2]).is_err());
    }

    fn fig3() -> (HierarchicalCodebook, HierarchicalCodebook, ScanSchedule) {
        let tx = HierarchicalCodebook::build(
            UniformLinearArray::new(64).unwrap(),
            AngleInterval::new(-0.5, 0.5).unwrap(),
            &[2, 4, 8, 16, 32],
            Synthesis::Ideal,
        )
        .unwrap();
        let rx = HierarchicalCodebook::build(
            UniformLinearArray::new(4).unwrap(),
            AngleInterval::full(),
            &[4],
            Synthesis::Ideal,
        )
        .unwrap();
        (tx, rx, ScanSchedule::fixed_receiver(5))
    }

    #[test]
    fn dominant_level_examples() {
        let (tx, rx, s) = fig3();
        let snr = calibrate_snr(-15.0);
        let profiles = ideal_stage_profiles(&tx, &rx, &s, &snr).unwrap();
        assert_eq!(dominant_level(&profiles).unwrap().0, 0);
        assert_eq!(dominant_level(&profiles[2..3]).unwrap().0, 0);
        let gamma = s.gamma(&tx, &rx);
        let scaled: Vec<_> = profiles
            .iter()
            .zip(s.codebook_sizes(&tx, &rx))
            .map(|(p, (lt, lr))| p.scaled(gamma * 16.0 / (lt * lr) as f64).unwrap())
            .collect();
        let rates: Vec<f64> = scaled.iter().map(|p| p.rate()).collect();
        assert!(rates.iter().all(|r| (r - rates[0]).abs() < 1e-12 * rates[0]));
    }

    #[test]
    fn fig3_exponents() {
        let (tx, rx, s) = fig3();
        let e = asymptotic_exponents(&tx, &rx, &s, &calibrate_snr(-15.0)).unwrap();
        assert_eq!((e.first_stage_pairs, e.total_pairs, e.exhaustive_pairs), (8, 16, 128));
        assert!((e.exhaustive - 0.031_622_776_601_683_79).abs() < 1e-12);
        assert!((e.equal_ratio() - 0.5).abs() < 1e-15);
        assert!((e.gamma - 0.810_126_582_278_481).abs() < 1e-12);
        assert!((e.unequal_ratio() - e.gamma).abs() < 1e-12);
        assert!(e.hierarchical_equal < e.hierarchical_unequal && e.hierarchical_unequal < e.exhaustive);
    }

    #[test]
    fn single_level_hierarchy_matches_exhaustive() {
        let tx = HierarchicalCodebook::build(
            UniformLinearArray::new(8).unwrap(),
            AngleInterval::new(-0.5, 0.5).unwrap(),
            &[4],
            Synthesis::Ideal,
        )
        .unwrap();
        let rx = HierarchicalCodebook::build(
            UniformLinearArray::new(4).unwrap(),
            AngleInterval::full(),
            &[4],
            Synthesis::Ideal,
        )
        .unwrap();
        let e = asymptotic_exponents(&tx, &rx, &ScanSchedule::fixed_receiver(1), &calibrate_snr(-10.0)).unwrap();
        assert!((e.hierarchical_equal - e.exhaustive).abs() < 1e-15);
        assert!((e.hierarchical_unequal - e.exhaustive).abs() < 1e-15);
    }

    /// Compass search over `{0 <= u <= v}` started from a coarse grid.
    fn minimize_joint(xi_opt: f64, xi_l: f64) -> (f64, f64, f64) {
        let f = |u: f64, v: f64| joint_rate_function(u, v, xi_opt, xi_l);
        let hi = 1.5 * xi_opt.max(xi_l) + 1.0;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=60 {
            for j in i..=60 {
                let (u, v) = (hi * i as f64 / 60.0, hi * j as f64 / 60.0);
                if f(u, v) < best.0 {
                    best = (f(u, v), u, v);
                }
            }
        }
        let (mut val, mut u, mut v) = best;
        let mut step = hi / 60.0;
        while step > 1e-13 {
            let mut moved = false;
            for (du, dv) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0)] {
                let (nu, nv) = (u + du * step, v + dv * step);
                if nu >= 0.0 && nu <= nv && f(nu, nv) < val {
                    (val, u, v) = (f(nu, nv), nu, nv);
                    moved = true;
                }
            }
            if !moved {
                step /= 2.0;
            }
        }
        (val, u, v)
    }

    #[test]
    fn joint_rate_infimum_is_i1() {
        assert_eq!(joint_rate_function(3.0, 1.0, 3.0, 1.0), 0.0);
        let mut rng = crate::rng::Stream::root(77).rng();
        use rand::Rng;
        for _ in 0..20 {
            let a: f64 = rng.random_range(0.1..20.0);
            let b: f64 = rng.random_range(0.0..a);
            let (val, u, v) = minimize_joint(a, b);
            assert!((val - rate_i1(a, b)).abs() < 1e-8, "({a}, {b}): {val}");
            let m = ((a.sqrt() + b.sqrt()) / 2.0).powi(2);
            assert!((u - m).abs() < 1e-4 && (v - m).abs() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn i2_exceeds_i1(xo in 0.01f64..50.0, f0 in 0.0f64..0.999, fi in 0.0f64..1.0, fj in 0.0f64..1.0) {
            let x0 = f0 * xo;
            let (xi, xj) = (fi * x0, fj * x0);
            prop_assert!(rate_i2(xo, xi, xj) > rate_i1(xo, x0));
        }

        #[test]
        fn i1_decreases_toward_runner_up(xo in 0.01f64..50.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9 && hi < 1.0);
            prop_assert!(rate_i1(xo, hi * xo) < rate_i1(xo, lo * xo));
        }

        #[test]
        fn overall_miss_identity(ps in proptest::collection::vec(0.0f64..=1.0, 1..8)) {
            let prod: f64 = ps.iter().map(|p| 1.0 - p).product();
            prop_assert!((overall_miss(&ps).unwrap() - (1.0 - prod)).abs() < 1e-12);
        }

        #[test]
        fn lower_never_exceeds_upper(
            xi in proptest::collection::vec(0.0f64..3.0, 2..6), n in 1.0f64..60.0,
        ) {
            let p = LevelGainProfile::new(xi).unwrap();
            let r = bound_report(&p, n, DEFAULT_TOL).unwrap();
            prop_assert!(r.p_low <= r.p_up);
            prop_assert!(r.ldp_approx > 0.0);
        }

        #[test]
        fn runner_up_is_second_largest(xi in proptest::collection::vec(0.0f64..5.0, 2..10)) {
            let p = LevelGainProfile::new(xi.clone()).unwrap();
            let o = p.opt_index();
            prop_assert!(xi.iter().all(|&x| x <= xi[o]));
            let r = p.runner_up_index().unwrap();
            prop_assert!(r != o);
            prop_assert!(xi.iter().enumerate().all(|(i, &x)| i == o || x <= xi[r]));
        }
    }
}
