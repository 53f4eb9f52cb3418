use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use super::{ExperimentError, SurveyResponse};

pub const DATASET_HEADER: [&str; 10] = [
    "respondent_id",
    "case_id",
    "treated",
    "heard_of_case",
    "area_correct",
    "decision_correct",
    "detail_just_right",
    "clarity",
    "share_with_friend",
    "non_college",
];

/// Checks binaries are 0/1, numeric codings are finite, and each
/// (respondent, case) pair occurs once.
pub fn validate_dataset(rows: &[SurveyResponse]) -> Result<(), ExperimentError> {
    let mut seen = HashSet::new();
    for (i, r) in rows.iter().enumerate() {
        // header is line 1
        let row = i + 2;
        let binaries = [
            ("treated", r.treated),
            ("heard_of_case", r.heard_of_case),
            ("area_correct", r.area_correct),
            ("decision_correct", r.decision_correct),
            ("detail_just_right", r.detail_just_right),
            ("non_college", r.non_college),
        ];
        for (name, v) in binaries {
            if v > 1 {
                return Err(ExperimentError::Schema {
                    row,
                    detail: format!("{name} must be 0 or 1, got {v}"),
                });
            }
        }
        for (name, v) in [("clarity", r.clarity), ("share_with_friend", r.share_with_friend)] {
            if !v.is_finite() {
                return Err(ExperimentError::Schema {
                    row,
                    detail: format!("{name} must be finite"),
                });
            }
        }
        if !seen.insert((r.respondent_id.as_str(), r.case_id.as_str())) {
            return Err(ExperimentError::DuplicateObservation {
                respondent_id: r.respondent_id.clone(),
                case_id: r.case_id.clone(),
            });
        }
    }
    Ok(())
}

pub fn read_dataset_from(reader: impl Read) -> Result<Vec<SurveyResponse>, ExperimentError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| ExperimentError::Schema {
        row: 1,
        detail: e.to_string(),
    })?;
    if header.iter().ne(DATASET_HEADER) {
        return Err(ExperimentError::Schema {
            row: 1,
            detail: format!(
                "header must be `{}`, got `{}`",
                DATASET_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<SurveyResponse>().enumerate() {
        let r = rec.map_err(|e| ExperimentError::Schema {
            row: i + 2,
            detail: e.to_string(),
        })?;
        rows.push(r);
    }
    validate_dataset(&rows)?;
    Ok(rows)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<SurveyResponse>, ExperimentError> {
    let path = path.as_ref();
    let f = std::fs::File::open(path)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    read_dataset_from(f)
}

/// Writes the header even when `rows` is empty.
pub fn write_dataset(writer: impl Write, rows: &[SurveyResponse]) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let io = |e: csv::Error| ExperimentError::Io(e.to_string());
    w.write_record(DATASET_HEADER).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| ExperimentError::Io(e.to_string()))
}
