//! Monte Carlo sweeps over pilot budgets.
//!
//! Trial `t` of a run with seed `s` draws its channel from
//! `root(s) / t / channel` and its measurement noise from
//! `root(s) / t / noise / pair`. Every strategy, SNR and budget in a batch
//! therefore sees the same channels and the same per-pair noise. Trials are
//! processed in fixed-size chunks whose partial results are merged in chunk
//! order, so the output does not depend on the number of worker threads.

mod output;
mod preset;

pub use output::{format_f64, rows_csv, se_samples_csv, CSV_HEADER};
pub use preset::{figure_preset, FigurePreset, FIGURE_IDS};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::AngleInterval;
use crate::array::UniformLinearArray;
use crate::channel::{calibrate_snr, ChannelSpec};
use crate::codebook::{HierarchicalCodebook, Synthesis};
use crate::error::{invalid, Error, Result};
use crate::rng::{Stream, LABEL_CHANNEL, LABEL_NOISE};
use crate::training::{
    run_schedule, spectral_efficiency, Allocation, KeyedNoise, LevelPlan, LinkGains, ScanRule,
    ScanSchedule, TrainingConfig,
};

/// Trials per work unit. Fixed so that results are independent of threading.
pub const CHUNK_TRIALS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    HierarchicalEqual,
    HierarchicalUnequal,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::Exhaustive,
        Strategy::HierarchicalEqual,
        Strategy::HierarchicalUnequal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exhaustive => "exhaustive",
            Self::HierarchicalEqual => "hierarchical_equal",
            Self::HierarchicalUnequal => "hierarchical_unequal",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| invalid(format!("unknown strategy `{s}`")))
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One side's codebook: array size, sector in degrees and level sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookSpec {
    pub num_elements: usize,
    pub sector_deg: (f64, f64),
    pub level_sizes: Vec<usize>,
}

impl CodebookSpec {
    pub fn build(&self, synthesis: Synthesis) -> Result<HierarchicalCodebook> {
        HierarchicalCodebook::build(
            UniformLinearArray::new(self.num_elements)?,
            AngleInterval::from_degrees(self.sector_deg.0, self.sector_deg.1)?,
            &self.level_sizes,
            synthesis,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    FixedReceiver,
    JointDescent,
    /// Only the full scan of the widest level pair.
    FirstLevel,
}

/// Codebooks, channel model and multi-level schedule shared by a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tx: CodebookSpec,
    pub rx: CodebookSpec,
    pub synthesis: Synthesis,
    pub channel: ChannelSpec,
    pub schedule: ScheduleKind,
}

/// Built form of a [`Scenario`].
#[derive(Debug, Clone)]
pub struct Setup {
    pub tx: HierarchicalCodebook,
    pub rx: HierarchicalCodebook,
    pub schedule: ScanSchedule,
}

impl Scenario {
    pub fn build(&self) -> Result<Setup> {
        let tx = self.tx.build(self.synthesis)?;
        let rx = self.rx.build(self.synthesis)?;
        let schedule = match self.schedule {
            ScheduleKind::FixedReceiver => ScanSchedule::fixed_receiver(tx.num_levels()),
            ScheduleKind::JointDescent => {
                ScanSchedule::joint_descent(tx.num_levels(), rx.num_levels())
            }
            ScheduleKind::FirstLevel => ScanSchedule::new(vec![LevelPlan {
                tx_level: 0,
                tx_rule: ScanRule::All,
                rx_level: 0,
                rx_rule: ScanRule::All,
            }])?,
        };
        schedule.check(&tx, &rx)?;
        Ok(Setup { tx, rx, schedule })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub strategy: Strategy,
    pub snr_db: f64,
    pub budgets: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.budgets.is_empty() {
            return Err(invalid("at least one budget is required"));
        }
        if self.budgets.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("budgets must be sorted ascending"));
        }
        if !self.snr_db.is_finite() {
            return Err(invalid("SNR must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub budget: usize,
    pub feasible: bool,
    pub n_tot_used: usize,
    pub p_miss: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
    /// Final pair different from the best finest-level pair.
    pub p_miss_global: f64,
    pub ci95_global: f64,
    pub mean_se: f64,
    pub se_p10: f64,
    pub se_p50: f64,
    pub se_p90: f64,
}

impl EstimateRow {
    fn infeasible(budget: usize) -> Self {
        Self {
            budget,
            feasible: false,
            n_tot_used: 0,
            p_miss: f64::NAN,
            ci95: f64::NAN,
            p_miss_global: f64::NAN,
            ci95_global: f64::NAN,
            mean_se: f64::NAN,
            se_p10: f64::NAN,
            se_p50: f64::NAN,
            se_p90: f64::NAN,
        }
    }
}

/// Rows of one sweep plus, optionally, every trial's spectral efficiency
/// per budget (empty for infeasible budgets).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub spec: SweepSpec,
    pub rows: Vec<EstimateRow>,
    pub se_samples: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Keep per-trial spectral efficiencies in the output.
    pub keep_se: bool,
}

/// 95% normal-approximation half-width of a binomial proportion.
pub fn binomial_ci95(p: f64, trials: usize) -> f64 {
    1.96 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Runs one sweep.
pub fn run_sweep(spec: &SweepSpec, scenario: &Scenario, threads: Option<usize>) -> Result<Vec<EstimateRow>> {
    let mut out = run_batch(
        scenario,
        std::slice::from_ref(spec),
        RunOptions {
            threads,
            keep_se: false,
        },
    )?;
    Ok(out.remove(0).rows)
}

struct Job {
    cfg: TrainingConfig,
    /// Per budget: schedule and per-stage pilots, or `None` if infeasible.
    plans: Vec<Option<(usize, Vec<usize>, usize)>>,
}

#[derive(Clone, Default)]
struct Acc {
    misses: u64,
    global_misses: u64,
    se_sum: f64,
    se: Vec<f64>,
}

/// Runs several sweeps over the same trials. All specs must share `trials`
/// and `base_seed`, which makes them use common random numbers.
pub fn run_batch(scenario: &Scenario, specs: &[SweepSpec], opts: RunOptions) -> Result<Vec<SweepOutput>> {
    let first = specs.first().ok_or_else(|| invalid("no sweeps requested"))?;
    for s in specs {
        s.validate()?;
        if s.trials != first.trials || s.base_seed != first.base_seed {
            return Err(invalid("sweeps in one batch must share trials and seed"));
        }
    }
    let setup = scenario.build()?;
    let schedules = [
        ScanSchedule::exhaustive(&setup.tx, &setup.rx),
        setup.schedule.clone(),
    ];

    let jobs: Vec<Job> = specs
        .iter()
        .map(|s| {
            let snr = calibrate_snr(s.snr_db);
            let (which, allocation) = match s.strategy {
                Strategy::Exhaustive => (0, Allocation::Equal),
                Strategy::HierarchicalEqual => (1, Allocation::Equal),
                Strategy::HierarchicalUnequal => (1, Allocation::UnequalGamma),
            };
            let sched = &schedules[which];
            let counts = sched.pair_counts(&setup.tx, &setup.rx);
            let plans = s
                .budgets
                .iter()
                .map(|&b| match sched.pilots(&setup.tx, &setup.rx, b, allocation) {
                    Ok(p) => {
                        let used = p.iter().zip(&counts).map(|(n, c)| n * c).sum();
                        Ok(Some((which, p, used)))
                    }
                    Err(Error::InfeasibleBudget(_)) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Job {
                cfg: TrainingConfig {
                    total_pilots: 0,
                    allocation,
                    transmit_power: snr.transmit_power,
                    noise_power: snr.noise_power,
                },
                plans,
            })
        })
        .collect::<Result<_>>()?;

    let trials = first.trials;
    let root = Stream::root(first.base_seed);
    let chunks: Vec<(usize, usize)> = (0..trials)
        .step_by(CHUNK_TRIALS)
        .map(|a| (a, (a + CHUNK_TRIALS).min(trials)))
        .collect();

    let process = |&(a, b): &(usize, usize)| -> Result<Vec<Vec<Acc>>> {
        let mut acc: Vec<Vec<Acc>> = jobs.iter().map(|j| vec![Acc::default(); j.plans.len()]).collect();
        for t in a..b {
            let stream = root.derive(t as u64);
            let mut rng = stream.derive(LABEL_CHANNEL).rng();
            let channel = scenario.channel.draw(setup.tx.array(), setup.rx.array(), &mut rng)?;
            let gains = LinkGains::compute(&setup.tx, &setup.rx, &channel)?;
            let noise = KeyedNoise(stream.derive(LABEL_NOISE));
            for (job, slots) in jobs.iter().zip(acc.iter_mut()) {
                for (plan, slot) in job.plans.iter().zip(slots.iter_mut()) {
                    let Some((which, pilots, _)) = plan else { continue };
                    let out = run_schedule(
                        &setup.tx,
                        &setup.rx,
                        &gains,
                        &schedules[*which],
                        pilots,
                        &job.cfg,
                        &noise,
                    )?;
                    slot.misses += out.misaligned as u64;
                    slot.global_misses += out.misaligned_global as u64;
                    let se = spectral_efficiency(&out, &job.cfg);
                    slot.se_sum += se;
                    slot.se.push(se);
                }
            }
        }
        Ok(acc)
    };

    let partials: Vec<Vec<Vec<Acc>>> = match opts.threads {
        Some(1) => chunks.iter().map(process).collect::<Result<_>>()?,
        threads => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = threads {
                builder = builder.num_threads(n);
            }
            let pool = builder
                .build()
                .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
            pool.install(|| chunks.par_iter().map(process).collect::<Result<_>>())?
        }
    };

    let mut totals: Vec<Vec<Acc>> = jobs.iter().map(|j| vec![Acc::default(); j.plans.len()]).collect();
    for part in partials {
        for (tj, pj) in totals.iter_mut().zip(part) {
            for (t, p) in tj.iter_mut().zip(pj) {
                t.misses += p.misses;
                t.global_misses += p.global_misses;
                t.se_sum += p.se_sum;
                t.se.extend(p.se);
            }
        }
    }

    let outputs = specs
        .iter()
        .zip(&jobs)
        .zip(totals)
        .map(|((spec, job), accs)| {
            let mut samples = Vec::with_capacity(accs.len());
            let rows = spec
                .budgets
                .iter()
                .zip(&job.plans)
                .zip(accs)
                .map(|((&budget, plan), acc)| {
                    let Some((_, _, used)) = plan else {
                        samples.push(Vec::new());
                        return EstimateRow::infeasible(budget);
                    };
                    let n = trials as f64;
                    let p = acc.misses as f64 / n;
                    let pg = acc.global_misses as f64 / n;
                    let cdf = EmpiricalCdf::new(acc.se.clone()).expect("trials >= 1");
                    samples.push(acc.se);
                    EstimateRow {
                        budget,
                        feasible: true,
                        n_tot_used: *used,
                        p_miss: p,
                        ci95: binomial_ci95(p, trials),
                        p_miss_global: pg,
                        ci95_global: binomial_ci95(pg, trials),
                        mean_se: acc.se_sum / n,
                        se_p10: cdf.percentile(10.0),
                        se_p50: cdf.percentile(50.0),
                        se_p90: cdf.percentile(90.0),
                    }
                })
                .collect();
            SweepOutput {
                spec: spec.clone(),
                rows,
                se_samples: opts.keep_se.then_some(samples),
            }
        })
        .collect();
    Ok(outputs)
}

/// Empirical CDF of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empirical CDF of an empty sample"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(invalid("empirical CDF input contains NaN"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `F(x) = #{v <= x} / n`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Percentile `q` in `[0, 100]` by linear interpolation between order
    /// statistics at position `q/100 (n - 1)`.
    pub fn percentile(&self, q: f64) -> f64 {
        let n = self.sorted.len();
        let pos = (q / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = pos - lo as f64;
        self.sorted[lo] + frac * (self.sorted[hi] - self.sorted[lo])
    }

    /// `(value, F(value))` at every sample, the step points of the CDF.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, (i + 1) as f64 / n))
            .collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }
}

/// Empirical CDF of spectral efficiencies.
pub fn se_cdf(values: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(values.to_vec())
}
