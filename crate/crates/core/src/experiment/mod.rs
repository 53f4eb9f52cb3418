//! Survey experiment: dataset schema, random assignment, simulation, and
//! treatment-effect estimation.
//!
//! The main model regresses an outcome on a treatment indicator with case
//! fixed effects, `y = a_case + b * treated + e`, using OLS with CR1
//! cluster-robust standard errors clustered by respondent and t(G-1)
//! inference.

mod data;
mod ols;
mod simulate;
mod table;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use data::{read_dataset, read_dataset_from, validate_dataset, write_dataset, DATASET_HEADER};
pub use ols::{
    estimate_interaction, estimate_treatment_effect, within_transform_estimate, RegressionResult,
    TermEstimate, WithinEstimate, INTERACTION_TERM, INTERCEPT_TERM, NON_COLLEGE_TERM,
    TREATED_TERM,
};
pub use simulate::{assign_treatment, simulate_survey, Assignment, AssignmentPlan, Dgp, OutcomeDgp, RespondentPlan};
pub use table::{format_coefficient, render_table, significance_stars};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("topic `{0}` has no cases")]
    EmptyTopic(String),
    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParameter { name: String, detail: String },
    #[error("dataset row {row}: {detail}")]
    Schema { row: usize, detail: String },
    #[error("duplicate observation for respondent `{respondent_id}` and case `{case_id}`")]
    DuplicateObservation {
        respondent_id: String,
        case_id: String,
    },
    #[error("design matrix is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("need at least 2 clusters, found {0}")]
    TooFewClusters(usize),
    #[error("io error: {0}")]
    Io(String),
}

/// One respondent's answers about one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub respondent_id: String,
    pub case_id: String,
    pub treated: u8,
    pub heard_of_case: u8,
    pub area_correct: u8,
    pub decision_correct: u8,
    pub detail_just_right: u8,
    pub clarity: f64,
    pub share_with_friend: f64,
    /// 1 = no college degree.
    pub non_college: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    HeardOfCase,
    AreaCorrect,
    DecisionCorrect,
    DetailJustRight,
    Clarity,
    ShareWithFriend,
}

impl Outcome {
    pub const ALL: [Outcome; 6] = [
        Outcome::HeardOfCase,
        Outcome::AreaCorrect,
        Outcome::DecisionCorrect,
        Outcome::DetailJustRight,
        Outcome::Clarity,
        Outcome::ShareWithFriend,
    ];

    /// Column name in the dataset CSV.
    pub fn field(self) -> &'static str {
        match self {
            Outcome::HeardOfCase => "heard_of_case",
            Outcome::AreaCorrect => "area_correct",
            Outcome::DecisionCorrect => "decision_correct",
            Outcome::DetailJustRight => "detail_just_right",
            Outcome::Clarity => "clarity",
            Outcome::ShareWithFriend => "share_with_friend",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::HeardOfCase => "Heard of Case",
            Outcome::AreaCorrect => "Case Area Correct",
            Outcome::DecisionCorrect => "Case Decision Correct",
            Outcome::DetailJustRight => "Level of Detail",
            Outcome::Clarity => "Clarity",
            Outcome::ShareWithFriend => "Share with Friend",
        }
    }

    pub fn is_binary(self) -> bool {
        !matches!(self, Outcome::Clarity | Outcome::ShareWithFriend)
    }

    pub fn value(self, r: &SurveyResponse) -> f64 {
        match self {
            Outcome::HeardOfCase => r.heard_of_case as f64,
            Outcome::AreaCorrect => r.area_correct as f64,
            Outcome::DecisionCorrect => r.decision_correct as f64,
            Outcome::DetailJustRight => r.detail_just_right as f64,
            Outcome::Clarity => r.clarity,
            Outcome::ShareWithFriend => r.share_with_friend,
        }
    }

    pub fn set_value(self, r: &mut SurveyResponse, v: f64) {
        match self {
            Outcome::HeardOfCase => r.heard_of_case = v as u8,
            Outcome::AreaCorrect => r.area_correct = v as u8,
            Outcome::DecisionCorrect => r.decision_correct = v as u8,
            Outcome::DetailJustRight => r.detail_just_right = v as u8,
            Outcome::Clarity => r.clarity = v,
            Outcome::ShareWithFriend => r.share_with_friend = v,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.field())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Outcome::ALL
            .into_iter()
            .find(|o| o.field() == s)
            .ok_or_else(|| format!("unknown outcome `{s}`"))
    }
}

/// Respondent-level covariate that can be interacted with treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    NonCollege,
}

impl Covariate {
    pub fn field(self) -> &'static str {
        match self {
            Covariate::NonCollege => "non_college",
        }
    }

    pub fn value(self, r: &SurveyResponse) -> f64 {
        match self {
            Covariate::NonCollege => r.non_college as f64,
        }
    }
}

impl FromStr for Covariate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "non_college" => Ok(Covariate::NonCollege),
            other => Err(format!("unknown covariate `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterBy {
    Respondent,
    Case,
}

impl ClusterBy {
    pub fn key(self, r: &SurveyResponse) -> &str {
        match self {
            ClusterBy::Respondent => &r.respondent_id,
            ClusterBy::Case => &r.case_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub outcome: Outcome,
    pub include_case_fixed_effects: bool,
    pub interaction_with: Option<Covariate>,
    pub cluster_by: ClusterBy,
}

impl RegressionSpec {
    /// Case fixed effects, clustered by respondent.
    pub fn main(outcome: Outcome) -> Self {
        RegressionSpec {
            outcome,
            include_case_fixed_effects: true,
            interaction_with: None,
            cluster_by: ClusterBy::Respondent,
        }
    }

    /// Main model plus treatment x non-college interaction.
    pub fn interaction(outcome: Outcome) -> Self {
        RegressionSpec {
            interaction_with: Some(Covariate::NonCollege),
            ..RegressionSpec::main(outcome)
        }
    }
}
