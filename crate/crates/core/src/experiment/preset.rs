use serde::{Deserialize, Serialize};

use super::{CodebookSpec, Scenario, ScheduleKind, Strategy};
use crate::channel::{ChannelSpec, DegreeRange};
use crate::codebook::Synthesis;
use crate::error::{Error, Result};

pub const FIGURE_IDS: [&str; 6] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

pub const DEFAULT_TRIALS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 42;

/// Everything needed to regenerate one figure's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigurePreset {
    pub id: String,
    pub scenario: Scenario,
    pub strategies: Vec<Strategy>,
    pub snrs_db: Vec<f64>,
    pub budgets: Vec<usize>,
    /// Budgets whose full spectral-efficiency samples are exported.
    pub cdf_budgets: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

fn bs_codebook() -> CodebookSpec {
    CodebookSpec {
        num_elements: 64,
        sector_deg: (-30.0, 30.0),
        level_sizes: vec![2, 4, 8, 16, 32],
    }
}

fn ue_codebook() -> CodebookSpec {
    CodebookSpec {
        num_elements: 4,
        sector_deg: (-90.0, 90.0),
        level_sizes: vec![4],
    }
}

fn aod() -> DegreeRange {
    DegreeRange { lo: -30.0, hi: 30.0 }
}

fn aoa() -> DegreeRange {
    DegreeRange { lo: 0.0, hi: 360.0 }
}

const FIG3_BUDGETS: [usize; 14] = [16, 32, 64, 128, 192, 256, 384, 512, 640, 768, 1024, 1280, 1536, 2048];
const FIELD_BUDGETS: [usize; 13] = [16, 32, 64, 128, 192, 256, 384, 512, 640, 768, 896, 1024, 1280];

pub fn figure_preset(id: &str) -> Result<FigurePreset> {
    let base = |channel, synthesis, schedule| Scenario {
        tx: bs_codebook(),
        rx: ue_codebook(),
        synthesis,
        channel,
        schedule,
    };
    let single = ChannelSpec::SinglePath { aod: aod(), aoa: aoa() };
    let los = ChannelSpec::LosRician {
        aod: aod(),
        aoa: aoa(),
        k_factor_db: 13.2,
    };
    let nlos = ChannelSpec::NlosMultipath {
        aod: aod(),
        aoa: aoa(),
        k_factor_db: 6.0,
        mean_paths: 1.8,
    };
    let field_strategies = vec![Strategy::Exhaustive, Strategy::HierarchicalEqual];
    let preset = |scenario, strategies, snrs_db, budgets: &[usize], cdf_budgets: &[usize]| FigurePreset {
        id: id.to_string(),
        scenario,
        strategies,
        snrs_db,
        budgets: budgets.to_vec(),
        cdf_budgets: cdf_budgets.to_vec(),
        trials: DEFAULT_TRIALS,
        seed: DEFAULT_SEED,
    };
    match id {
        "fig2" => {
            let budgets: Vec<usize> = (1..=100).map(|n| 8 * n).collect();
            Ok(preset(
                base(single, Synthesis::Ideal, ScheduleKind::FirstLevel),
                vec![Strategy::HierarchicalEqual],
                vec![-15.0],
                &budgets,
                &[],
            ))
        }
        "fig3" => Ok(preset(
            base(single, Synthesis::Ideal, ScheduleKind::FixedReceiver),
            Strategy::ALL.to_vec(),
            vec![-15.0],
            &FIG3_BUDGETS,
            &[],
        )),
        "fig4" => Ok(preset(
            base(los, Synthesis::Deactivation, ScheduleKind::FixedReceiver),
            field_strategies,
            vec![-15.0, -10.0],
            &FIELD_BUDGETS,
            &[],
        )),
        "fig5" => Ok(preset(
            base(los, Synthesis::Deactivation, ScheduleKind::FixedReceiver),
            field_strategies,
            vec![-15.0, -10.0],
            &[16, 640, 1280],
            &[16, 640, 1280],
        )),
        "fig6" => Ok(preset(
            base(nlos, Synthesis::Deactivation, ScheduleKind::FixedReceiver),
            field_strategies,
            vec![-15.0, -10.0],
            &FIELD_BUDGETS,
            &[],
        )),
        "fig7" => Ok(preset(
            base(nlos, Synthesis::Deactivation, ScheduleKind::FixedReceiver),
            field_strategies,
            vec![-15.0, -10.0],
            &[16, 640, 1280],
            &[16, 640, 1280],
        )),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::ScanSchedule;

    #[test]
    fn fig3_pair_counts() {
        let p = figure_preset("fig3").unwrap();
        let setup = p.scenario.build().unwrap();
        let counts = setup.schedule.pair_counts(&setup.tx, &setup.rx);
        assert_eq!(counts, vec![8, 2, 2, 2, 2]);
        assert_eq!(counts.iter().sum::<usize>(), 16);
        let ex = ScanSchedule::exhaustive(&setup.tx, &setup.rx);
        assert_eq!(ex.pair_counts(&setup.tx, &setup.rx), vec![128]);
    }

    #[test]
    fn fig2_single_level() {
        let p = figure_preset("fig2").unwrap();
        let setup = p.scenario.build().unwrap();
        assert_eq!(setup.schedule.pair_counts(&setup.tx, &setup.rx), vec![8]);
        assert_eq!(p.snrs_db, vec![-15.0]);
        assert_eq!(p.budgets.last(), Some(&800));
    }

    #[test]
    fn field_presets() {
        match figure_preset("fig6").unwrap().scenario.channel {
            ChannelSpec::NlosMultipath {
                k_factor_db,
                mean_paths,
                ..
            } => assert_eq!((k_factor_db, mean_paths), (6.0, 1.8)),
            other => panic!("{other:?}"),
        }
        assert_eq!(figure_preset("fig5").unwrap().cdf_budgets, vec![16, 640, 1280]);
        for id in FIGURE_IDS {
            figure_preset(id).unwrap().scenario.build().unwrap();
        }
        assert!(matches!(figure_preset("fig9"), Err(Error::UnknownPreset(_))));
    }
}
