//! The MIAS label file: one whitespace-separated record per abnormality,
//! `id tissue class [severity x y radius]`.

use std::fmt;

use crate::cascade::{CaseLabel, Lesion, Severity};

use super::DatasetError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiasRecord {
    pub id: String,
    /// Background tissue code (F, G or D).
    pub tissue: char,
    pub lesion: Lesion,
    pub severity: Option<Severity>,
    /// Abnormality center in archive coordinates (origin at the bottom-left).
    pub center: Option<(u32, u32)>,
    pub radius: Option<u32>,
    /// 1-based line in the source text.
    pub line: usize,
}

impl MiasRecord {
    pub fn label(&self) -> Result<CaseLabel, crate::cascade::CascadeError> {
        CaseLabel::new(self.lesion, self.severity)
    }

    /// Abnormal record that cannot be located in its image.
    pub fn lacks_coordinates(&self) -> bool {
        self.lesion != Lesion::Norm && self.center.is_none()
    }
}

impl fmt::Display for MiasRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.id, self.tissue, self.lesion)?;
        if let Some(s) = self.severity {
            write!(f, " {}", if s == Severity::Benign { "B" } else { "M" })?;
        }
        if let Some((x, y)) = self.center {
            write!(f, " {x} {y}")?;
            if let Some(r) = self.radius {
                write!(f, " {r}")?;
            }
        }
        Ok(())
    }
}

/// Parses the label file. Blank lines and `#` comments are skipped. Abnormal
/// lines without coordinates (or with a `*NOTE*` marker in their place) are
/// returned with `center: None`.
pub fn parse_mias_info(text: &str) -> Result<Vec<MiasRecord>, DatasetError> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let err = |msg: String| DatasetError::Parse { line, msg };
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(err(format!("expected at least 3 fields, got {}", fields.len())));
        }
        let id = fields[0].to_string();
        let mut tissue_chars = fields[1].chars();
        let tissue = match (tissue_chars.next(), tissue_chars.next()) {
            (Some(c), None) => c,
            _ => return Err(err(format!("bad tissue code `{}`", fields[1]))),
        };
        let lesion: Lesion = fields[2]
            .parse()
            .map_err(|_| err(format!("unknown lesion class `{}`", fields[2])))?;

        let mut record = MiasRecord {
            id,
            tissue,
            lesion,
            severity: None,
            center: None,
            radius: None,
            line,
        };
        if lesion == Lesion::Norm {
            if fields.len() > 3 {
                return Err(err("normal record with extra fields".into()));
            }
            records.push(record);
            continue;
        }
        let severity = fields
            .get(3)
            .ok_or_else(|| err(format!("{lesion} record without severity")))?;
        record.severity = Some(
            severity
                .parse()
                .map_err(|_| err(format!("unknown severity `{severity}`")))?,
        );
        let coords = &fields[4..];
        if coords.is_empty() || coords[0].starts_with('*') {
            records.push(record);
            continue;
        }
        let num = |t: &str| -> Result<u32, DatasetError> {
            t.parse().map_err(|_| err(format!("non-integer coordinate `{t}`")))
        };
        match coords {
            [x, y] => record.center = Some((num(x)?, num(y)?)),
            [x, y, r] => {
                record.center = Some((num(x)?, num(y)?));
                record.radius = Some(num(r)?);
            }
            _ => return Err(err(format!("expected x y [radius], got {} fields", coords.len()))),
        }
        records.push(record);
    }
    Ok(records)
}
