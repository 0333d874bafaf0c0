//! Rater-preference records and their translation into test inputs.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preference {
    Radiologist,
    Generated,
    NoPreference,
}

impl std::str::FromStr for Preference {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radiologist" => Ok(Preference::Radiologist),
            "generated" => Ok(Preference::Generated),
            "none" => Ok(Preference::NoPreference),
            other => Err(CoreError::InvalidArgument(format!(
                "unknown preference '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RatingRecord {
    pub rater_id: String,
    pub study_id: String,
    pub preference: Preference,
    pub reasons: Vec<String>,
    pub findings: Vec<String>,
}

impl RatingRecord {
    /// 1 when the generated report is preferred or tied.
    pub fn outcome(&self) -> f64 {
        match self.preference {
            Preference::Radiologist => 0.0,
            Preference::Generated | Preference::NoPreference => 1.0,
        }
    }
}

/// Tab-separated ratings: rater_id, study_id, preference, reasons, findings.
/// Reasons and findings are comma-separated within their fields; a lone "-"
/// means empty. A record with no preference must carry no reasons.
pub fn read_ratings(path: &Path) -> Result<Vec<RatingRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(CoreError::InvalidArgument(format!(
                "ratings line {}: expected 5 tab-separated fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let list = |f: &str| -> Vec<String> {
            if f == "-" || f.is_empty() {
                Vec::new()
            } else {
                f.split(',').map(|s| s.trim().to_string()).collect()
            }
        };
        let record = RatingRecord {
            rater_id: fields[0].to_string(),
            study_id: fields[1].to_string(),
            preference: fields[2].parse()?,
            reasons: list(fields[3]),
            findings: list(fields[4]),
        };
        let no_pref = record.preference == Preference::NoPreference;
        if no_pref != record.reasons.is_empty() {
            return Err(CoreError::InvalidArgument(format!(
                "ratings line {}: reasons must be empty exactly when preference is none",
                lineno + 1
            )));
        }
        out.push(record);
    }
    Ok(out)
}

/// Items-by-raters category table for kappa: one row per study, one column
/// per rater, categories 0/1/2 for radiologist/generated/none. Studies not
/// rated by every rater are dropped.
pub fn ratings_to_items(records: &[RatingRecord]) -> Result<(Vec<Vec<usize>>, Vec<String>)> {
    let raters: Vec<String> = records
        .iter()
        .map(|r| r.rater_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let studies: Vec<String> = records
        .iter()
        .map(|r| r.study_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut items = Vec::new();
    for study in &studies {
        let mut row = Vec::with_capacity(raters.len());
        for rater in &raters {
            let Some(rec) = records
                .iter()
                .find(|r| &r.study_id == study && &r.rater_id == rater)
            else {
                row.clear();
                break;
            };
            row.push(match rec.preference {
                Preference::Radiologist => 0,
                Preference::Generated => 1,
                Preference::NoPreference => 2,
            });
        }
        if !row.is_empty() {
            items.push(row);
        }
    }
    if items.is_empty() {
        return Err(CoreError::InvalidArgument(
            "no study was rated by every rater".into(),
        ));
    }
    Ok((items, raters))
}

/// Dummy-coded design for the acceptability GLM. One row per
/// (record, reason, finding) expansion; reference levels are the readability
/// reason, the alphabetically first rater, and the "No Finding" label.
pub fn ratings_design(
    records: &[RatingRecord],
) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<String>)> {
    let collect = |f: fn(&RatingRecord) -> &[String]| -> Vec<String> {
        records
            .iter()
            .flat_map(|r| f(r).iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };
    let reasons: Vec<String> = collect(|r| &r.reasons)
        .into_iter()
        .filter(|r| r != "readability")
        .collect();
    let raters: Vec<String> = records
        .iter()
        .map(|r| r.rater_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .skip(1)
        .collect();
    let findings: Vec<String> = collect(|r| &r.findings)
        .into_iter()
        .filter(|f| f != "No Finding")
        .collect();

    let mut names = vec!["intercept".to_string()];
    names.extend(reasons.iter().map(|r| format!("reason[{r}]")));
    names.extend(raters.iter().map(|r| format!("rater[{r}]")));
    names.extend(findings.iter().map(|f| format!("finding[{f}]")));

    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in records {
        let record_reasons: Vec<Option<&String>> = if record.reasons.is_empty() {
            vec![None]
        } else {
            record.reasons.iter().map(Some).collect()
        };
        let record_findings: Vec<Option<&String>> = if record.findings.is_empty() {
            vec![None]
        } else {
            record.findings.iter().map(Some).collect()
        };
        for reason in &record_reasons {
            for finding in &record_findings {
                let mut row = vec![1.0];
                for r in &reasons {
                    row.push(f64::from(*reason == Some(r)));
                }
                for r in &raters {
                    row.push(f64::from(&record.rater_id == r));
                }
                for f in &findings {
                    row.push(f64::from(*finding == Some(f)));
                }
                x.push(row);
                y.push(record.outcome());
            }
        }
    }
    Ok((x, y, names))
}
