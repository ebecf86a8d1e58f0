//! Difficulty-staged training schedule over audio-chunk availability.
//!
//! Samples are ranked by how many 500 ms chunks of audio they carry; fewer
//! chunks means less context and counts as harder. The ranked list is cut at
//! the empirical quantiles into equally sized stages, and stage epochs are
//! assigned positionally after ordering.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sample::DialogueSample;
use super::MathError;

pub const DEFAULT_EPOCHS: [u32; 4] = [5, 3, 3, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurriculumOrder {
    #[default]
    HardToEasy,
    EasyToHard,
}

impl std::str::FromStr for CurriculumOrder {
    type Err = MathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hard_to_easy" => Ok(Self::HardToEasy),
            "easy_to_hard" => Ok(Self::EasyToHard),
            other => Err(MathError::Parse(format!(
                "unknown curriculum order {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumStage {
    pub stage_index: usize,
    pub epochs: u32,
    pub min_chunks: u32,
    pub max_chunks: u32,
    pub sample_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumPlan {
    pub order: CurriculumOrder,
    pub stages: Vec<CurriculumStage>,
    pub total_steps: u64,
}

pub fn curriculum_plan(
    samples: &[DialogueSample],
    epochs: &[u32],
    order: CurriculumOrder,
    seed: u64,
) -> Result<CurriculumPlan, MathError> {
    let stage_count = epochs.len();
    if stage_count == 0 {
        return Err(MathError::Parse("at least one stage is required".into()));
    }
    if samples.len() < stage_count {
        return Err(MathError::TooFewSamples {
            samples: samples.len(),
            stages: stage_count,
        });
    }
    let mut ranked: Vec<(u32, &str)> = samples
        .iter()
        .map(|s| {
            s.chunk_count
                .map(|c| (c, s.id.as_str()))
                .ok_or_else(|| MathError::MissingChunkCount(s.id.clone()))
        })
        .collect::<Result<_, _>>()?;
    // fewest chunks first == hardest first
    ranked.sort_unstable();

    let n = ranked.len();
    let mut groups: Vec<&[(u32, &str)]> = (0..stage_count)
        .map(|g| &ranked[g * n / stage_count..(g + 1) * n / stage_count])
        .collect();
    if order == CurriculumOrder::EasyToHard {
        groups.reverse();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stages: Vec<CurriculumStage> = groups
        .into_iter()
        .zip(epochs)
        .enumerate()
        .map(|(i, (group, &ep))| {
            let mut ids: Vec<String> = group.iter().map(|(_, id)| id.to_string()).collect();
            ids.shuffle(&mut rng);
            CurriculumStage {
                stage_index: i,
                epochs: ep,
                min_chunks: group.first().map_or(0, |g| g.0),
                max_chunks: group.last().map_or(0, |g| g.0),
                sample_ids: ids,
            }
        })
        .collect();
    let total_steps = stages
        .iter()
        .map(|s| s.sample_ids.len() as u64 * s.epochs as u64)
        .sum();
    Ok(CurriculumPlan {
        order,
        stages,
        total_steps,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use super::*;

    fn sample(id: &str, chunks: u32) -> DialogueSample {
        DialogueSample::new(id, "some words here", "Well,", "ok").with_audio_ms(chunks as u64 * 500)
    }

    #[test]
    fn four_samples_hard_to_easy() {
        let s: Vec<_> = (1..=4).map(|c| sample(&format!("s{c}"), c)).collect();
        let plan = curriculum_plan(&s, &DEFAULT_EPOCHS, CurriculumOrder::HardToEasy, 0).unwrap();
        let got: Vec<_> = plan
            .stages
            .iter()
            .map(|st| (st.sample_ids.clone(), st.epochs))
            .collect();
        assert_eq!(
            got,
            vec![
                (vec!["s1".to_string()], 5),
                (vec!["s2".to_string()], 3),
                (vec!["s3".to_string()], 3),
                (vec!["s4".to_string()], 2),
            ]
        );
        assert_eq!(plan.total_steps, 13);

        let plan = curriculum_plan(&s, &DEFAULT_EPOCHS, CurriculumOrder::EasyToHard, 0).unwrap();
        assert_eq!(plan.stages[0].sample_ids, vec!["s4"]);
        assert_eq!(plan.stages[0].epochs, 5);
    }

    #[test]
    fn single_stage() {
        let s: Vec<_> = (1..=7)
            .map(|c| sample(&format!("s{c}"), c % 3 + 1))
            .collect();
        let plan = curriculum_plan(&s, &[1], CurriculumOrder::HardToEasy, 3).unwrap();
        assert_eq!(plan.stages.len(), 1);
        assert_eq!(plan.total_steps, 7);
    }

    #[test]
    fn ties_broken_by_id() {
        let s = vec![
            sample("b", 2),
            sample("a", 2),
            sample("d", 2),
            sample("c", 2),
        ];
        let plan = curriculum_plan(&s, &[1, 1], CurriculumOrder::HardToEasy, 0).unwrap();
        let mut first = plan.stages[0].sample_ids.clone();
        first.sort();
        assert_eq!(first, vec!["a", "b"]);
    }

    #[test]
    fn errors() {
        let s = vec![sample("a", 1)];
        assert!(matches!(
            curriculum_plan(&s, &DEFAULT_EPOCHS, CurriculumOrder::HardToEasy, 0),
            Err(MathError::TooFewSamples { .. })
        ));
        let bare = DialogueSample::new("x", "a", "", "b");
        let s = vec![bare.clone(), bare.clone(), bare.clone(), bare];
        assert!(matches!(
            curriculum_plan(&s, &DEFAULT_EPOCHS, CurriculumOrder::HardToEasy, 0),
            Err(MathError::MissingChunkCount(_))
        ));
    }

    proptest! {
        #[test]
        fn plan_is_a_deterministic_partition(
            chunks in prop::collection::vec(1u32..20, 4..60),
            seed in any::<u64>(),
        ) {
            let s: Vec<_> = chunks
                .iter()
                .enumerate()
                .map(|(i, &c)| sample(&format!("id{i:03}"), c))
                .collect();
            let plan = curriculum_plan(&s, &DEFAULT_EPOCHS, CurriculumOrder::HardToEasy, seed).unwrap();
            let again = curriculum_plan(&s, &DEFAULT_EPOCHS, CurriculumOrder::HardToEasy, seed).unwrap();
            prop_assert_eq!(&plan, &again);
            let mut seen = HashSet::new();
            for st in &plan.stages {
                for id in &st.sample_ids {
                    prop_assert!(seen.insert(id.clone()));
                }
            }
            prop_assert_eq!(seen.len(), s.len());
            let steps: u64 = plan.stages.iter().map(|st| st.sample_ids.len() as u64 * st.epochs as u64).sum();
            prop_assert_eq!(plan.total_steps, steps);
            // stages are ordered by non-decreasing chunk availability
            for w in plan.stages.windows(2) {
                prop_assert!(w[0].max_chunks <= w[1].min_chunks);
            }
        }
    }
}
