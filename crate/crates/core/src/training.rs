//! Beam-training measurements, exhaustive search and multi-level search.
//!
//! A pilot sequence of length `N` through effective channel `h` is reduced
//! to its matched-filter output, so one measurement is a single complex
//! Gaussian draw:
//!
//! ```text
//! T = (2/σ²) |h sqrt(N P_T) + σ z|²,   z ~ CN(0, 1)   =>   T ~ χ²₂(2 N P_T |h|² / σ²)
//! ```
//!
//! Noise for a beam pair comes from a stream keyed by the pair, so a search
//! run twice on the same channel with different budgets, or by different
//! strategies, sees the same `z` on every pair it measures.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::Beamformer;
use crate::channel::ChannelRealization;
use crate::codebook::{HierarchicalCodebook, Synthesis};
use crate::error::{invalid, Error, Result};
use crate::rng::{complex_normal, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    /// Same pilot length on every examined pair.
    Equal,
    /// Pilot length inversely proportional to the level's codebook product
    /// `L_T L_R`, scaled by `γ` so the budget is spent exactly.
    UnequalGamma,
}

impl std::str::FromStr for Allocation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(Self::Equal),
            "unequal_gamma" | "unequal" => Ok(Self::UnequalGamma),
            other => Err(invalid(format!("unknown allocation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub total_pilots: usize,
    pub allocation: Allocation,
    pub transmit_power: f64,
    pub noise_power: f64,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.transmit_power > 0.0 && self.transmit_power.is_finite()) {
            return Err(invalid(format!(
                "transmit power must be positive, got {}",
                self.transmit_power
            )));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(invalid(format!(
                "noise power must be positive, got {}",
                self.noise_power
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeamRef {
    pub level: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeamPair {
    pub tx: BeamRef,
    pub rx: BeamRef,
}

impl BeamPair {
    /// Key of the pair's noise stream.
    pub fn key(&self) -> u64 {
        ((self.tx.level as u64) << 48)
            | ((self.tx.index as u64 & 0xffff) << 32)
            | ((self.rx.level as u64 & 0xffff) << 16)
            | (self.rx.index as u64 & 0xffff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementStat {
    pub value: f64,
    pub pair_index: usize,
    pub level: usize,
}

/// `f H w†`.
pub fn effective_channel(
    tx: &Beamformer,
    rx: &Beamformer,
    channel: &ChannelRealization,
) -> Result<Complex64> {
    if tx.weights.len() != channel.n_t() {
        return Err(Error::DimensionMismatch {
            expected: channel.n_t(),
            got: tx.weights.len(),
        });
    }
    if rx.weights.len() != channel.n_r() {
        return Err(Error::DimensionMismatch {
            expected: channel.n_r(),
            got: rx.weights.len(),
        });
    }
    let hw = channel.apply_tx(&tx.weights);
    Ok(rx.weights.iter().zip(&hw).map(|(f, g)| f * g).sum())
}

/// Normalized statistic for a given noise sample `z ~ CN(0, 1)`.
pub fn statistic_with_noise(
    h: Complex64,
    pilots: usize,
    transmit_power: f64,
    noise_power: f64,
    z: Complex64,
) -> f64 {
    let signal = h * (pilots as f64 * transmit_power).sqrt();
    2.0 / noise_power * (signal + z * noise_power.sqrt()).norm_sqr()
}

/// Draws the statistic of one pair measured with `pilots` symbols.
pub fn measure_statistic<R: Rng + ?Sized>(
    h: Complex64,
    pilots: usize,
    cfg: &TrainingConfig,
    rng: &mut R,
) -> f64 {
    statistic_with_noise(
        h,
        pilots,
        cfg.transmit_power,
        cfg.noise_power,
        complex_normal(rng),
    )
}

/// Source of the measurement noise of each beam pair.
pub trait PairNoise {
    fn noise(&self, pair: &BeamPair) -> Complex64;
}

/// Noise derived from a per-trial stream and the pair key.
#[derive(Debug, Clone, Copy)]
pub struct KeyedNoise(pub Stream);

impl PairNoise for KeyedNoise {
    fn noise(&self, pair: &BeamPair) -> Complex64 {
        self.0.derive(pair.key()).complex_normal()
    }
}

/// Effective channels `h` of every (tx codeword, rx codeword) combination
/// across all levels of both codebooks, for one channel realization.
///
/// Ideal codebooks use their flat-top responses on the specular paths, so a
/// diffuse matrix component is invisible to them. Deactivation codebooks
/// use the full matrix.
#[derive(Debug, Clone)]
pub struct LinkGains {
    tx_offsets: Vec<usize>,
    rx_offsets: Vec<usize>,
    rx_total: usize,
    values: Vec<Complex64>,
}

impl LinkGains {
    pub fn compute(
        tx: &HierarchicalCodebook,
        rx: &HierarchicalCodebook,
        channel: &ChannelRealization,
    ) -> Result<Self> {
        if tx.array().num_elements() != channel.n_t() {
            return Err(Error::DimensionMismatch {
                expected: channel.n_t(),
                got: tx.array().num_elements(),
            });
        }
        if rx.array().num_elements() != channel.n_r() {
            return Err(Error::DimensionMismatch {
                expected: channel.n_r(),
                got: rx.array().num_elements(),
            });
        }
        if tx.synthesis() != rx.synthesis() {
            return Err(invalid("transmit and receive codebooks use different synthesis"));
        }
        let offsets = |cb: &HierarchicalCodebook| {
            let mut acc = 0;
            let mut v = Vec::with_capacity(cb.num_levels());
            for k in 0..cb.num_levels() {
                v.push(acc);
                acc += cb.level_size(k);
            }
            (v, acc)
        };
        let (tx_offsets, tx_total) = offsets(tx);
        let (rx_offsets, rx_total) = offsets(rx);
        let mut values = vec![Complex64::new(0.0, 0.0); tx_total * rx_total];

        match tx.synthesis() {
            Synthesis::Ideal => {
                for path in channel.paths() {
                    let (s_t, s_r) = (path.aod_sine(), path.aoa_sine());
                    for (kt, &t_off) in tx_offsets.iter().enumerate() {
                        let Some(it) = tx.locate(kt, s_t) else { continue };
                        let wt = tx.ideal_level_gain(kt).sqrt();
                        for (kr, &r_off) in rx_offsets.iter().enumerate() {
                            let Some(ir) = rx.locate(kr, s_r) else { continue };
                            let wr = rx.ideal_level_gain(kr).sqrt();
                            let slot = (t_off + it) * rx_total + r_off + ir;
                            values[slot] += path.complex_gain * wt * wr;
                        }
                    }
                }
            }
            Synthesis::Deactivation => {
                let n_t = channel.n_t();
                let m = channel.matrix();
                let mut hw = vec![Complex64::new(0.0, 0.0); channel.n_r()];
                for (kt, &t_off) in tx_offsets.iter().enumerate() {
                    for beam in tx.level(kt) {
                        let active: Vec<(usize, Complex64)> = beam
                            .weights
                            .iter()
                            .enumerate()
                            .filter(|(_, w)| w.norm_sqr() > 0.0)
                            .map(|(t, w)| (t, w.conj()))
                            .collect();
                        for (r, slot) in hw.iter_mut().enumerate() {
                            let row = &m[r * n_t..(r + 1) * n_t];
                            *slot = active.iter().map(|&(t, w)| row[t] * w).sum();
                        }
                        let base = (t_off + beam.index) * rx_total;
                        for kr in 0..rx.num_levels() {
                            for f in rx.level(kr) {
                                let h: Complex64 =
                                    f.weights.iter().zip(&hw).map(|(a, b)| a * b).sum();
                                values[base + rx_offsets[kr] + f.index] = h;
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            tx_offsets,
            rx_offsets,
            rx_total,
            values,
        })
    }

    pub fn h(&self, pair: &BeamPair) -> Complex64 {
        let t = self.tx_offsets[pair.tx.level] + pair.tx.index;
        let r = self.rx_offsets[pair.rx.level] + pair.rx.index;
        self.values[t * self.rx_total + r]
    }

    pub fn gain(&self, pair: &BeamPair) -> f64 {
        self.h(pair).norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanRule {
    /// Every codeword of the level.
    All,
    /// Children of the previous level's winner (the level must be one finer).
    ChildrenOfWinner,
    /// The previous winner itself.
    HoldWinner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelPlan {
    pub tx_level: usize,
    pub tx_rule: ScanRule,
    pub rx_level: usize,
    pub rx_rule: ScanRule,
}

/// Which pairs each stage of a multi-level search examines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanSchedule {
    stages: Vec<LevelPlan>,
}

impl ScanSchedule {
    pub fn new(stages: Vec<LevelPlan>) -> Result<Self> {
        if stages.is_empty() {
            return Err(invalid("scan schedule needs at least one stage"));
        }
        let first = stages[0];
        if first.tx_rule != ScanRule::All || first.rx_rule != ScanRule::All {
            return Err(invalid("the first stage must scan all codewords"));
        }
        for w in stages.windows(2) {
            for (prev, cur, rule) in [
                (w[0].tx_level, w[1].tx_level, w[1].tx_rule),
                (w[0].rx_level, w[1].rx_level, w[1].rx_rule),
            ] {
                let ok = match rule {
                    ScanRule::All => true,
                    ScanRule::ChildrenOfWinner => cur == prev + 1,
                    ScanRule::HoldWinner => cur == prev,
                };
                if !ok {
                    return Err(invalid(format!(
                        "stage rule {rule:?} cannot move from level {prev} to level {cur}"
                    )));
                }
            }
        }
        Ok(Self { stages })
    }

    /// Full scan of the widest level pair, then transmit refinement with the
    /// receive codeword held at its first-stage winner.
    pub fn fixed_receiver(tx_levels: usize) -> Self {
        let mut stages = vec![LevelPlan {
            tx_level: 0,
            tx_rule: ScanRule::All,
            rx_level: 0,
            rx_rule: ScanRule::All,
        }];
        for k in 1..tx_levels {
            stages.push(LevelPlan {
                tx_level: k,
                tx_rule: ScanRule::ChildrenOfWinner,
                rx_level: 0,
                rx_rule: ScanRule::HoldWinner,
            });
        }
        Self { stages }
    }

    /// Both sides refine together until each reaches its finest level.
    pub fn joint_descent(tx_levels: usize, rx_levels: usize) -> Self {
        let mut stages = vec![LevelPlan {
            tx_level: 0,
            tx_rule: ScanRule::All,
            rx_level: 0,
            rx_rule: ScanRule::All,
        }];
        for k in 1..tx_levels.max(rx_levels) {
            let step = |levels: usize| {
                if k < levels {
                    (k, ScanRule::ChildrenOfWinner)
                } else {
                    (levels - 1, ScanRule::HoldWinner)
                }
            };
            let (tx_level, tx_rule) = step(tx_levels);
            let (rx_level, rx_rule) = step(rx_levels);
            stages.push(LevelPlan {
                tx_level,
                tx_rule,
                rx_level,
                rx_rule,
            });
        }
        Self { stages }
    }

    /// Single stage over the finest level of both codebooks.
    pub fn exhaustive(tx: &HierarchicalCodebook, rx: &HierarchicalCodebook) -> Self {
        Self {
            stages: vec![LevelPlan {
                tx_level: tx.num_levels() - 1,
                tx_rule: ScanRule::All,
                rx_level: rx.num_levels() - 1,
                rx_rule: ScanRule::All,
            }],
        }
    }

    pub fn stages(&self) -> &[LevelPlan] {
        &self.stages
    }

    pub fn check(&self, tx: &HierarchicalCodebook, rx: &HierarchicalCodebook) -> Result<()> {
        for s in &self.stages {
            if s.tx_level >= tx.num_levels() || s.rx_level >= rx.num_levels() {
                return Err(invalid(format!(
                    "stage refers to level ({}, {}) but codebooks have {} and {} levels",
                    s.tx_level,
                    s.rx_level,
                    tx.num_levels(),
                    rx.num_levels()
                )));
            }
        }
        Ok(())
    }

    /// Pairs examined per stage, `L^(k)`.
    pub fn pair_counts(&self, tx: &HierarchicalCodebook, rx: &HierarchicalCodebook) -> Vec<usize> {
        let count = |cb: &HierarchicalCodebook, level: usize, rule: ScanRule| match rule {
            ScanRule::All => cb.level_size(level),
            ScanRule::ChildrenOfWinner => cb.level_size(level) / cb.level_size(level - 1),
            ScanRule::HoldWinner => 1,
        };
        self.stages
            .iter()
            .map(|s| count(tx, s.tx_level, s.tx_rule) * count(rx, s.rx_level, s.rx_rule))
            .collect()
    }

    /// Codebook sizes `(L_T^(k), L_R^(k))` of the levels used at each stage.
    pub fn codebook_sizes(
        &self,
        tx: &HierarchicalCodebook,
        rx: &HierarchicalCodebook,
    ) -> Vec<(usize, usize)> {
        self.stages
            .iter()
            .map(|s| (tx.level_size(s.tx_level), rx.level_size(s.rx_level)))
            .collect()
    }

    /// `γ = (Σ_k L^(k) / (L_T^(k) L_R^(k)))^-1`.
    pub fn gamma(&self, tx: &HierarchicalCodebook, rx: &HierarchicalCodebook) -> f64 {
        let counts = self.pair_counts(tx, rx);
        let sizes = self.codebook_sizes(tx, rx);
        let s: f64 = counts
            .iter()
            .zip(&sizes)
            .map(|(&l, &(lt, lr))| l as f64 / (lt * lr) as f64)
            .sum();
        1.0 / s
    }

    /// Integer pilot length per pair at each stage. Equal allocation uses
    /// `floor(N_tot / L)`; unequal uses `max(1, floor(N_tot γ / (L_T L_R)))`
    /// and fails if the clamps overrun the budget.
    pub fn pilots(
        &self,
        tx: &HierarchicalCodebook,
        rx: &HierarchicalCodebook,
        total_pilots: usize,
        allocation: Allocation,
    ) -> Result<Vec<usize>> {
        let counts = self.pair_counts(tx, rx);
        let l: usize = counts.iter().sum();
        match allocation {
            Allocation::Equal => {
                let n = total_pilots / l;
                if n == 0 {
                    return Err(Error::InfeasibleBudget(format!(
                        "{total_pilots} pilots cannot cover {l} beam pairs"
                    )));
                }
                Ok(vec![n; counts.len()])
            }
            Allocation::UnequalGamma => {
                let gamma = self.gamma(tx, rx);
                let per: Vec<usize> = self
                    .codebook_sizes(tx, rx)
                    .iter()
                    .map(|&(lt, lr)| {
                        (((total_pilots as f64 * gamma) / (lt * lr) as f64 + 1e-9).floor() as usize)
                            .max(1)
                    })
                    .collect();
                let used: usize = per.iter().zip(&counts).map(|(n, c)| n * c).sum();
                if used > total_pilots {
                    return Err(Error::InfeasibleBudget(format!(
                        "unequal allocation needs at least {used} pilots, budget is {total_pilots}"
                    )));
                }
                Ok(per)
            }
        }
    }
}

/// One stage of a finished search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub stage: usize,
    pub pilots_per_pair: usize,
    pub scanned: usize,
    /// Position of the winner in the stage's scan order.
    pub chosen: usize,
    /// Position of the noiseless best pair in the scan order.
    pub optimal: usize,
    pub chosen_pair: BeamPair,
    pub optimal_pair: BeamPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub levels: Vec<LevelRecord>,
    /// Some stage picked a pair other than its scanned optimum.
    pub misaligned: bool,
    /// The final pair differs from the best pair of its level combination.
    pub misaligned_global: bool,
    pub final_pair: BeamPair,
    /// `|h|²` of the final pair.
    pub final_gain: f64,
    pub pilots_used: usize,
}

impl SearchOutcome {
    pub fn chosen(&self) -> Vec<(usize, usize)> {
        self.levels.iter().map(|r| (r.stage, r.chosen)).collect()
    }

    pub fn optimal(&self) -> Vec<(usize, usize)> {
        self.levels.iter().map(|r| (r.stage, r.optimal)).collect()
    }
}

fn candidates(
    cb: &HierarchicalCodebook,
    level: usize,
    rule: ScanRule,
    prev: Option<BeamRef>,
) -> Vec<usize> {
    match (rule, prev) {
        (ScanRule::All, _) | (_, None) => (0..cb.level_size(level)).collect(),
        (ScanRule::ChildrenOfWinner, Some(p)) => cb.children(p.level, p.index).to_vec(),
        (ScanRule::HoldWinner, Some(p)) => vec![p.index],
    }
}

/// Runs a schedule with given per-stage pilot lengths on precomputed gains.
pub fn run_schedule(
    tx: &HierarchicalCodebook,
    rx: &HierarchicalCodebook,
    gains: &LinkGains,
    schedule: &ScanSchedule,
    pilots: &[usize],
    cfg: &TrainingConfig,
    noise: &impl PairNoise,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    schedule.check(tx, rx)?;
    if pilots.len() != schedule.stages().len() {
        return Err(Error::DimensionMismatch {
            expected: schedule.stages().len(),
            got: pilots.len(),
        });
    }
    let mut prev: Option<BeamPair> = None;
    let mut levels = Vec::with_capacity(pilots.len());
    let mut used = 0;
    let mut pairs = Vec::new();
    for (stage, (plan, &n)) in schedule.stages().iter().zip(pilots).enumerate() {
        let txs = candidates(tx, plan.tx_level, plan.tx_rule, prev.map(|p| p.tx));
        let rxs = candidates(rx, plan.rx_level, plan.rx_rule, prev.map(|p| p.rx));
        pairs.clear();
        for &t in &txs {
            for &r in &rxs {
                pairs.push(BeamPair {
                    tx: BeamRef {
                        level: plan.tx_level,
                        index: t,
                    },
                    rx: BeamRef {
                        level: plan.rx_level,
                        index: r,
                    },
                });
            }
        }
        let (mut best_t, mut chosen) = (f64::NEG_INFINITY, 0);
        let (mut best_g, mut optimal) = (f64::NEG_INFINITY, 0);
        for (l, pair) in pairs.iter().enumerate() {
            let h = gains.h(pair);
            let t = statistic_with_noise(h, n, cfg.transmit_power, cfg.noise_power, noise.noise(pair));
            if t > best_t {
                best_t = t;
                chosen = l;
            }
            let g = h.norm_sqr();
            if g > best_g {
                best_g = g;
                optimal = l;
            }
        }
        used += n * pairs.len();
        levels.push(LevelRecord {
            stage,
            pilots_per_pair: n,
            scanned: pairs.len(),
            chosen,
            optimal,
            chosen_pair: pairs[chosen],
            optimal_pair: pairs[optimal],
        });
        prev = Some(pairs[chosen]);
    }
    let final_pair = prev.expect("schedule has at least one stage");
    let global = best_pair(tx, rx, gains, final_pair.tx.level, final_pair.rx.level);
    Ok(SearchOutcome {
        misaligned: levels.iter().any(|r| r.chosen != r.optimal),
        misaligned_global: final_pair != global,
        final_gain: gains.gain(&final_pair),
        final_pair,
        pilots_used: used,
        levels,
    })
}

/// Noiseless best pair among all codeword pairs of two levels, lowest
/// tx-major position on ties.
pub fn best_pair(
    tx: &HierarchicalCodebook,
    rx: &HierarchicalCodebook,
    gains: &LinkGains,
    tx_level: usize,
    rx_level: usize,
) -> BeamPair {
    let mut best = None;
    let mut best_g = f64::NEG_INFINITY;
    for t in 0..tx.level_size(tx_level) {
        for r in 0..rx.level_size(rx_level) {
            let pair = BeamPair {
                tx: BeamRef {
                    level: tx_level,
                    index: t,
                },
                rx: BeamRef {
                    level: rx_level,
                    index: r,
                },
            };
            let g = gains.gain(&pair);
            if g > best_g {
                best_g = g;
                best = Some(pair);
            }
        }
    }
    best.expect("codebook levels are nonempty")
}

/// Exhaustive search over the finest levels with `floor(N_tot / L_ex)`
/// pilots per pair.
pub fn exhaustive_with_gains(
    tx: &HierarchicalCodebook,
    rx: &HierarchicalCodebook,
    gains: &LinkGains,
    cfg: &TrainingConfig,
    noise: &impl PairNoise,
) -> Result<SearchOutcome> {
    let schedule = ScanSchedule::exhaustive(tx, rx);
    let pilots = schedule.pilots(tx, rx, cfg.total_pilots, Allocation::Equal)?;
    run_schedule(tx, rx, gains, &schedule, &pilots, cfg, noise)
}

/// Multi-level search with the pilot allocation of `cfg`.
pub fn hierarchical_with_gains(
    tx: &HierarchicalCodebook,
    rx: &HierarchicalCodebook,
    gains: &LinkGains,
    cfg: &TrainingConfig,
    schedule: &ScanSchedule,
    noise: &impl PairNoise,
) -> Result<SearchOutcome> {
    let pilots = schedule.pilots(tx, rx, cfg.total_pilots, cfg.allocation)?;
    run_schedule(tx, rx, gains, schedule, &pilots, cfg, noise)
}

/// [`exhaustive_with_gains`] on a channel, noise keyed by `noise_stream`.
pub fn exhaustive_search(
    tx: &HierarchicalCodebook,
    rx: &HierarchicalCodebook,
    channel: &ChannelRealization,
    cfg: &TrainingConfig,
    noise_stream: Stream,
) -> Result<SearchOutcome> {
    let gains = LinkGains::compute(tx, rx, channel)?;
    exhaustive_with_gains(tx, rx, &gains, cfg, &KeyedNoise(noise_stream))
}

/// [`hierarchical_with_gains`] on a channel, noise keyed by `noise_stream`.
pub fn hierarchical_search(
    tx: &HierarchicalCodebook,
    rx: &HierarchicalCodebook,
    channel: &ChannelRealization,
    cfg: &TrainingConfig,
    schedule: &ScanSchedule,
    noise_stream: Stream,
) -> Result<SearchOutcome> {
    let gains = LinkGains::compute(tx, rx, channel)?;
    hierarchical_with_gains(tx, rx, &gains, cfg, schedule, &KeyedNoise(noise_stream))
}

/// `log2(1 + P_T |h|² / σ²)` of the final pair.
pub fn spectral_efficiency(outcome: &SearchOutcome, cfg: &TrainingConfig) -> f64 {
    (1.0 + cfg.transmit_power * outcome.final_gain / cfg.noise_power).log2()
}
