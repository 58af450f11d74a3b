//! Utility fits over the tail of an episode.

use crate::agents::EpisodeLog;
use crate::choicemodel::{fit_map, ChoiceDataset, MapEstimate, PriorConfig, Trial, UtilityWeights};
use crate::error::{Error, Result};
use crate::optimize::OptimizerConfig;

/// The learner's last `window` (board, choice) pairs.
pub fn window_dataset(log: &EpisodeLog, window: usize) -> Result<ChoiceDataset> {
    if window == 0 {
        return Err(Error::InvalidInput(
            "window must cover at least one trial".into(),
        ));
    }
    if window > log.trials.len() {
        return Err(Error::InvalidInput(format!(
            "window of {window} trials exceeds the {} logged",
            log.trials.len()
        )));
    }
    let trials = log.trials[log.trials.len() - window..]
        .iter()
        .map(|t| Trial {
            board: t.board.clone(),
            choice: t.choice.clone(),
        })
        .collect();
    ChoiceDataset::new(trials)
}

pub fn fit_window_utilities(
    log: &EpisodeLog,
    window: usize,
    prior: &PriorConfig,
    config: &OptimizerConfig,
) -> Result<MapEstimate> {
    fit_map(&window_dataset(log, window)?, prior, config)
}

/// Weights expressed in the uncounterbalanced color frame.
pub fn canonical_weights(log: &EpisodeLog, theta: &UtilityWeights) -> UtilityWeights {
    if log.header.counterbalanced {
        theta.counterbalanced()
    } else {
        *theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{run_dyad, Condition, SimConfig};
    use crate::env::{conjunction_feature, Color, Shape, NUM_FEATURES};

    #[test]
    fn window_bounds() {
        let cfg = SimConfig::default();
        let log = run_dyad(Condition::SOLO_FULL, 0, 1, &cfg, &cfg.value_map).unwrap();
        let oc = OptimizerConfig::default();
        assert!(fit_window_utilities(&log, 0, &PriorConfig::default(), &oc).is_err());
        assert!(fit_window_utilities(&log, 11, &PriorConfig::default(), &oc).is_err());
        assert_eq!(
            window_dataset(&log, 3).unwrap().trials[0].board.trial_index,
            7
        );
    }

    #[test]
    fn solo_full_fit_values_pink_circles() {
        let cfg = SimConfig::default();
        let log = run_dyad(Condition::SOLO_FULL, 0, 2, &cfg, &cfg.value_map).unwrap();
        let est = fit_window_utilities(
            &log,
            10,
            &PriorConfig::default(),
            &OptimizerConfig::default(),
        )
        .unwrap();
        let theta = canonical_weights(&log, &est.theta);
        // summed weight on a pink circle's active features beats every other cell
        let pc = theta.get(conjunction_feature(Color::Pink, Shape::Circle))
            + theta.get(Color::Pink.index())
            + theta.get(crate::env::shape_feature(Shape::Circle));
        assert!(pc > 0.0, "{theta:?}");
        let sq = theta.get(crate::env::shape_feature(Shape::Square));
        assert!(sq < pc);
        assert_eq!(theta.as_array().len(), NUM_FEATURES);
    }
}
