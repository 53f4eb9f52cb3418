use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ExperimentError, Outcome, SurveyResponse};
use crate::corpus::{CaseRegistry, TopicArea};

const STREAM_ASSIGN: u64 = 0;
const STREAM_OUTCOMES: u64 = 1;
const STREAM_CASES: u64 = 2;
const STREAM_EDUCATION: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub topic: TopicArea,
    pub case_id: String,
    pub treated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RespondentPlan {
    pub respondent_id: String,
    /// One entry per topic, in topic order.
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    pub respondents: Vec<RespondentPlan>,
}

impl AssignmentPlan {
    pub fn len(&self) -> usize {
        self.respondents.iter().map(|r| r.assignments.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws one case per topic for each respondent and a fair coin for
/// treatment on every respondent x case pair.
pub fn assign_treatment(
    registry: &CaseRegistry,
    respondent_ids: &[String],
    seed: u64,
) -> Result<AssignmentPlan, ExperimentError> {
    let pools: Vec<(TopicArea, Vec<&str>)> = TopicArea::ALL
        .into_iter()
        .map(|t| {
            let ids: Vec<&str> = registry
                .cases_for_topic(t)
                .into_iter()
                .map(|c| c.case_id.as_str())
                .collect();
            if ids.is_empty() {
                Err(ExperimentError::EmptyTopic(t.as_str().into()))
            } else {
                Ok((t, ids))
            }
        })
        .collect::<Result<_, _>>()?;
    let mut rng = rng(seed, STREAM_ASSIGN);
    let respondents = respondent_ids
        .iter()
        .map(|id| RespondentPlan {
            respondent_id: id.clone(),
            assignments: pools
                .iter()
                .map(|(topic, ids)| Assignment {
                    topic: *topic,
                    case_id: ids[rng.random_range(0..ids.len())].to_string(),
                    treated: rng.random_bool(0.5),
                })
                .collect(),
        })
        .collect();
    Ok(AssignmentPlan { respondents })
}

/// Mean structure for one outcome:
/// `baseline + case_offset + effect * T + interaction * T * non_college`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDgp {
    pub baseline: f64,
    pub effect: f64,
    #[serde(default)]
    pub interaction: f64,
    /// Standard deviation of the per-case offsets.
    #[serde(default)]
    pub case_spread: f64,
    /// Standard deviation of the shared per-respondent shock.
    #[serde(default)]
    pub respondent_sd: f64,
    /// Idiosyncratic noise for numeric outcomes; unused for binaries.
    #[serde(default = "one")]
    pub residual_sd: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dgp {
    pub outcomes: BTreeMap<Outcome, OutcomeDgp>,
    /// Multiplies every stochastic term. 0 gives the mean structure itself,
    /// rounded for binaries; 1 gives Bernoulli draws for binaries.
    pub noise: f64,
    /// Share of respondents without a college degree.
    pub education_share: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for Dgp {
    /// Effects set to the published point estimates, baselines to plausible
    /// control means, 1..5 numeric scales.
    fn default() -> Self {
        let bin = |baseline, effect, interaction| OutcomeDgp {
            baseline,
            effect,
            interaction,
            case_spread: 0.04,
            respondent_sd: 0.05,
            residual_sd: 1.0,
        };
        let num = |baseline, effect, interaction| OutcomeDgp {
            baseline,
            effect,
            interaction,
            case_spread: 0.3,
            respondent_sd: 0.5,
            residual_sd: 1.0,
        };
        let outcomes = BTreeMap::from([
            (Outcome::HeardOfCase, bin(0.15, 0.0385, 0.0)),
            (Outcome::AreaCorrect, bin(0.93, 0.00192, 0.0)),
            (Outcome::DecisionCorrect, bin(0.69, 0.107, 0.0)),
            (Outcome::DetailJustRight, bin(0.45, 0.202, 0.1)),
            (Outcome::Clarity, num(3.3, 0.431, 0.3)),
            (Outcome::ShareWithFriend, num(2.9, 0.432, 0.3)),
        ]);
        Dgp {
            outcomes,
            noise: 1.0,
            education_share: 0.5,
            scale_min: 1.0,
            scale_max: 5.0,
        }
    }
}

impl Dgp {
    pub fn noiseless() -> Self {
        Dgp {
            noise: 0.0,
            ..Dgp::default()
        }
    }

    pub fn outcome(&self, outcome: Outcome) -> OutcomeDgp {
        self.outcomes.get(&outcome).copied().unwrap_or(OutcomeDgp {
            baseline: if outcome.is_binary() { 0.5 } else { (self.scale_min + self.scale_max) / 2.0 },
            effect: 0.0,
            interaction: 0.0,
            case_spread: 0.0,
            respondent_sd: 0.0,
            residual_sd: 1.0,
        })
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |name: &str, detail: &str| {
            Err(ExperimentError::InvalidParameter {
                name: name.into(),
                detail: detail.into(),
            })
        };
        if !self.noise.is_finite() || self.noise < 0.0 {
            return bad("noise", "must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.education_share) {
            return bad("education_share", "must lie in [0, 1]");
        }
        if !self.scale_min.is_finite() || !self.scale_max.is_finite() || self.scale_min >= self.scale_max {
            return bad("scale", "scale_min must be finite and below scale_max");
        }
        for (o, p) in &self.outcomes {
            let vals = [p.baseline, p.effect, p.interaction, p.case_spread, p.respondent_sd, p.residual_sd];
            if vals.iter().any(|v| !v.is_finite()) {
                return bad(o.field(), "parameters must be finite");
            }
            if p.case_spread < 0.0 || p.respondent_sd < 0.0 || p.residual_sd < 0.0 {
                return bad(o.field(), "standard deviations must be >= 0");
            }
        }
        Ok(())
    }
}

fn respondent_id(i: usize) -> String {
    format!("r{:04}", i + 1)
}

/// Simulates a full panel: `n_respondents` x 5 rows following the assignment
/// plan drawn from `seed`.
pub fn simulate_survey(
    registry: &CaseRegistry,
    n_respondents: usize,
    dgp: &Dgp,
    seed: u64,
) -> Result<Vec<SurveyResponse>, ExperimentError> {
    dgp.validate()?;
    let ids: Vec<String> = (0..n_respondents).map(respondent_id).collect();
    let plan = assign_treatment(registry, &ids, seed)?;

    let mut case_rng = rng(seed, STREAM_CASES);
    let case_offsets: BTreeMap<(&str, Outcome), f64> = registry
        .cases()
        .iter()
        .flat_map(|c| Outcome::ALL.map(|o| (c.case_id.as_str(), o)))
        .map(|(c, o)| {
            let z: f64 = case_rng.sample(StandardNormal);
            ((c, o), dgp.outcome(o).case_spread * z)
        })
        .collect();

    let n_nc = (dgp.education_share * n_respondents as f64).round() as usize;
    let mut non_college: Vec<u8> = (0..n_respondents).map(|i| (i < n_nc) as u8).collect();
    non_college.shuffle(&mut rng(seed, STREAM_EDUCATION));

    let mut out_rng = rng(seed, STREAM_OUTCOMES);
    let mut rows = Vec::with_capacity(plan.len());
    for (j, resp) in plan.respondents.iter().enumerate() {
        let shocks: Vec<f64> = Outcome::ALL
            .iter()
            .map(|_| out_rng.sample(StandardNormal))
            .collect();
        let nc = non_college[j];
        for a in &resp.assignments {
            let t = a.treated as u8;
            let mut row = SurveyResponse {
                respondent_id: resp.respondent_id.clone(),
                case_id: a.case_id.clone(),
                treated: t,
                heard_of_case: 0,
                area_correct: 0,
                decision_correct: 0,
                detail_just_right: 0,
                clarity: 0.0,
                share_with_friend: 0.0,
                non_college: nc,
            };
            for (oi, o) in Outcome::ALL.into_iter().enumerate() {
                let p = dgp.outcome(o);
                let mean = p.baseline
                    + case_offsets[&(a.case_id.as_str(), o)]
                    + p.effect * t as f64
                    + p.interaction * (t * nc) as f64;
                let shared = dgp.noise * p.respondent_sd * shocks[oi];
                let value = if o.is_binary() {
                    let prob = (mean + shared).clamp(0.0, 1.0);
                    let threshold = if dgp.noise == 0.0 {
                        if prob >= 0.5 { 1.0 } else { 0.0 }
                    } else {
                        (0.5 + (prob - 0.5) / dgp.noise.min(1.0)).clamp(0.0, 1.0)
                    };
                    let u: f64 = out_rng.random();
                    (u < threshold) as u8 as f64
                } else {
                    let e: f64 = out_rng.sample(StandardNormal);
                    let v = mean + shared + dgp.noise * p.residual_sd * e;
                    v.clamp(dgp.scale_min, dgp.scale_max)
                };
                o.set_value(&mut row, value);
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DecisionDirection, OpinionCase};

    fn registry(per_topic: usize) -> CaseRegistry {
        let mut cases = Vec::new();
        for t in TopicArea::ALL {
            for i in 0..per_topic {
                cases.push(OpinionCase {
                    case_id: format!("{}-{i}", t.as_str()),
                    name: format!("Case {i}"),
                    year: 2000 + i as i32,
                    topic: t,
                    facts_text: "Facts.".into(),
                    syllabus_text: "Syllabus.".into(),
                    decision_direction: DecisionDirection::Favors,
                    direction_description: "d".into(),
                });
            }
        }
        CaseRegistry::from_cases(cases).unwrap()
    }

    #[test]
    fn plan_has_one_case_per_topic() {
        let reg = registry(3);
        let ids: Vec<String> = (0..120).map(respondent_id).collect();
        let plan = assign_treatment(&reg, &ids, 42).unwrap();
        assert_eq!(plan.len(), 600);
        for r in &plan.respondents {
            let topics: Vec<_> = r.assignments.iter().map(|a| a.topic).collect();
            assert_eq!(topics, TopicArea::ALL);
            for a in &r.assignments {
                assert_eq!(reg.get(&a.case_id).unwrap().topic, a.topic);
            }
        }
        assert_eq!(plan, assign_treatment(&reg, &ids, 42).unwrap());
        assert_ne!(plan, assign_treatment(&reg, &ids, 43).unwrap());
    }

    #[test]
    fn forced_draw() {
        let reg = registry(1);
        let plan = assign_treatment(&reg, &["x".into()], 0).unwrap();
        let got: Vec<_> = plan.respondents[0].assignments.iter().map(|a| a.case_id.clone()).collect();
        let want: Vec<_> = reg.cases().iter().map(|c| c.case_id.clone()).collect();
        let mut got_sorted = got.clone();
        got_sorted.sort();
        assert_eq!(got_sorted, want);
    }

    #[test]
    fn empty_topic() {
        let reg = CaseRegistry::from_cases(
            registry(1)
                .cases()
                .iter()
                .filter(|c| c.topic != TopicArea::Labor)
                .cloned()
                .collect(),
        )
        .unwrap();
        assert_eq!(
            assign_treatment(&reg, &[], 1).unwrap_err(),
            ExperimentError::EmptyTopic("labor".into())
        );
    }

    #[test]
    fn simulation_shape_and_determinism() {
        let reg = registry(3);
        let a = simulate_survey(&reg, 120, &Dgp::default(), 7).unwrap();
        assert_eq!(a.len(), 600);
        assert_eq!(a, simulate_survey(&reg, 120, &Dgp::default(), 7).unwrap());
        assert_eq!(a[0].respondent_id, "r0001");
        let nc: usize = a.iter().map(|r| r.non_college as usize).sum();
        assert_eq!(nc, 300);
        assert!(simulate_survey(&reg, 0, &Dgp::default(), 7).unwrap().is_empty());
    }

    #[test]
    fn noiseless_rows_follow_mean_structure() {
        let reg = registry(2);
        let dgp = Dgp {
            outcomes: BTreeMap::from([(
                Outcome::Clarity,
                OutcomeDgp {
                    baseline: 3.0,
                    effect: 0.25,
                    interaction: 0.0,
                    case_spread: 0.0,
                    respondent_sd: 0.5,
                    residual_sd: 1.0,
                },
            )]),
            ..Dgp::noiseless()
        };
        for r in simulate_survey(&reg, 10, &dgp, 1).unwrap() {
            assert_eq!(r.clarity, 3.0 + 0.25 * r.treated as f64);
            // unspecified binaries default to p = 0.5 which rounds up
            assert_eq!(r.heard_of_case, 1);
        }
    }

    #[test]
    fn education_share_bounds() {
        let reg = registry(1);
        let all = Dgp {
            education_share: 1.0,
            ..Dgp::default()
        };
        assert!(simulate_survey(&reg, 9, &all, 3).unwrap().iter().all(|r| r.non_college == 1));
        let bad = Dgp {
            education_share: 1.5,
            ..Dgp::default()
        };
        assert!(matches!(
            simulate_survey(&reg, 9, &bad, 3),
            Err(ExperimentError::InvalidParameter { .. })
        ));
    }
}
