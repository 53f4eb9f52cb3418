//! Case registry: the opinions (facts + syllabus) that feed the summarization
//! pipeline and the survey simulator.
//!
//! The registry is a single JSON document:
//!
//! ```json
//! {"cases": [{"case_id": "dobbs-2022", "name": "...", "year": 2022,
//!             "topic": "abortion", "facts_text": "...", "syllabus_text": "...",
//!             "decision_direction": "opposes", "direction_description": "..."}]}
//! ```
//!
//! Texts are kept verbatim. Any normalization happens at scoring time.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("registry file not found: {0}")]
    MissingFile(String),
    #[error("failed to read registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation at `{field}`: {detail}")]
    SchemaViolation { field: String, detail: String },
    #[error("duplicate case_id `{0}`")]
    DuplicateCaseId(String),
}

impl CorpusError {
    fn schema(field: impl Into<String>, detail: impl Into<String>) -> Self {
        CorpusError::SchemaViolation {
            field: field.into(),
            detail: detail.into(),
        }
    }
}

/// The five legal areas covered by the survey.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicArea {
    AffirmativeAction,
    Abortion,
    SearchAndSeizure,
    Labor,
    LgbtRights,
}

impl TopicArea {
    pub const ALL: [TopicArea; 5] = [
        TopicArea::AffirmativeAction,
        TopicArea::Abortion,
        TopicArea::SearchAndSeizure,
        TopicArea::Labor,
        TopicArea::LgbtRights,
    ];

    /// Wire name used in the registry JSON.
    pub fn as_str(self) -> &'static str {
        match self {
            TopicArea::AffirmativeAction => "affirmative_action",
            TopicArea::Abortion => "abortion",
            TopicArea::SearchAndSeizure => "search_and_seizure",
            TopicArea::Labor => "labor",
            TopicArea::LgbtRights => "lgbt_rights",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TopicArea::AffirmativeAction => "Affirmative Action",
            TopicArea::Abortion => "Abortion Rights",
            TopicArea::SearchAndSeizure => "Search & Seizure",
            TopicArea::Labor => "Labor",
            TopicArea::LgbtRights => "LGBT Rights",
        }
    }
}

impl fmt::Display for TopicArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopicArea {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TopicArea::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown topic `{s}`"))
    }
}

/// Ground truth for the "general direction of the decision" recall question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionDirection {
    Favors,
    Opposes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionCase {
    pub case_id: String,
    pub name: String,
    pub year: i32,
    pub topic: TopicArea,
    pub facts_text: String,
    pub syllabus_text: String,
    pub decision_direction: DecisionDirection,
    pub direction_description: String,
}

const YEAR_RANGE: std::ops::RangeInclusive<i64> = 1900..=2100;

/// Immutable, validated collection of cases sorted by `case_id`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CaseRegistry {
    cases: Vec<OpinionCase>,
    by_topic: BTreeMap<TopicArea, Vec<String>>,
}

#[derive(Serialize)]
struct RegistryDocRef<'a> {
    cases: &'a [OpinionCase],
}

#[derive(Deserialize)]
struct RegistryDoc {
    cases: Vec<OpinionCase>,
}

impl CaseRegistry {
    /// Validates `cases` and builds the topic index.
    pub fn from_cases(mut cases: Vec<OpinionCase>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, case) in cases.iter().enumerate() {
            if !seen.insert(case.case_id.as_str()) {
                return Err(CorpusError::DuplicateCaseId(case.case_id.clone()));
            }
            check_case(i, case)?;
        }
        cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));

        let mut by_topic: BTreeMap<TopicArea, Vec<String>> = BTreeMap::new();
        for case in &cases {
            by_topic
                .entry(case.topic)
                .or_default()
                .push(case.case_id.clone());
        }
        Ok(CaseRegistry { cases, by_topic })
    }

    pub fn cases(&self) -> &[OpinionCase] {
        &self.cases
    }

    pub fn by_topic(&self) -> &BTreeMap<TopicArea, Vec<String>> {
        &self.by_topic
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn get(&self, case_id: &str) -> Option<&OpinionCase> {
        self.cases
            .binary_search_by(|c| c.case_id.as_str().cmp(case_id))
            .ok()
            .map(|i| &self.cases[i])
    }

    /// All cases in `topic`, sorted by `case_id`.
    pub fn cases_for_topic(&self, topic: TopicArea) -> Vec<&OpinionCase> {
        self.cases.iter().filter(|c| c.topic == topic).collect()
    }

    /// Serializes back to the registry JSON schema.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(&RegistryDocRef { cases: &self.cases })
            .expect("registry serialization is infallible");
        out.push('\n');
        out
    }
}

fn check_case(index: usize, case: &OpinionCase) -> Result<(), CorpusError> {
    let field = |name: &str| format!("cases[{index}].{name}");
    if case.case_id.trim().is_empty() {
        return Err(CorpusError::schema(field("case_id"), "must be nonempty"));
    }
    if case.facts_text.trim().is_empty() {
        return Err(CorpusError::schema(field("facts_text"), "must be nonempty"));
    }
    if case.syllabus_text.trim().is_empty() {
        return Err(CorpusError::schema(field("syllabus_text"), "must be nonempty"));
    }
    if !YEAR_RANGE.contains(&(case.year as i64)) {
        return Err(CorpusError::schema(
            field("year"),
            format!("{} outside [1900, 2100]", case.year),
        ));
    }
    Ok(())
}

const STRING_KEYS: [&str; 5] = [
    "case_id",
    "name",
    "facts_text",
    "syllabus_text",
    "direction_description",
];

/// Structural check on the raw JSON so that errors name the offending field.
fn check_schema(doc: &Value) -> Result<(), CorpusError> {
    let obj = doc
        .as_object()
        .ok_or_else(|| CorpusError::schema("$", "top level must be an object"))?;
    let cases = obj
        .get("cases")
        .ok_or_else(|| CorpusError::schema("cases", "missing"))?
        .as_array()
        .ok_or_else(|| CorpusError::schema("cases", "must be an array"))?;

    for (i, case) in cases.iter().enumerate() {
        let field = |name: &str| format!("cases[{i}].{name}");
        let case = case
            .as_object()
            .ok_or_else(|| CorpusError::schema(format!("cases[{i}]"), "must be an object"))?;
        for key in STRING_KEYS {
            match case.get(key) {
                None => return Err(CorpusError::schema(field(key), "missing")),
                Some(Value::String(_)) => {}
                Some(_) => return Err(CorpusError::schema(field(key), "must be a string")),
            }
        }
        match case.get("year") {
            None => return Err(CorpusError::schema(field("year"), "missing")),
            Some(v) if v.as_i64().is_some() => {}
            Some(_) => return Err(CorpusError::schema(field("year"), "must be an integer")),
        }
        match case.get("topic").and_then(Value::as_str) {
            None => return Err(CorpusError::schema(field("topic"), "missing or not a string")),
            Some(t) => {
                t.parse::<TopicArea>()
                    .map_err(|e| CorpusError::schema(field("topic"), e))?;
            }
        }
        match case.get("decision_direction").and_then(Value::as_str) {
            Some("favors") | Some("opposes") => {}
            _ => {
                return Err(CorpusError::schema(
                    field("decision_direction"),
                    "must be \"favors\" or \"opposes\"",
                ))
            }
        }
    }
    Ok(())
}

/// Parses and validates a registry document.
pub fn parse_registry(json: &str) -> Result<CaseRegistry, CorpusError> {
    let doc: Value =
        serde_json::from_str(json).map_err(|e| CorpusError::schema("$", e.to_string()))?;
    check_schema(&doc)?;
    let doc: RegistryDoc =
        serde_json::from_value(doc).map_err(|e| CorpusError::schema("$", e.to_string()))?;
    CaseRegistry::from_cases(doc.cases)
}

pub fn load_registry(path: impl AsRef<Path>) -> Result<CaseRegistry, CorpusError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    if !path.exists() {
        return Err(CorpusError::MissingFile(display));
    }
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: display,
        source,
    })?;
    parse_registry(&text)
}
