use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::corpus::taxonomy::{EmotionClass, LabelMapping, SourceDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub const ASSIGNED: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

/// One manifest row. Audio is never read; only metadata travels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub source: SourceDataset,
    pub raw_label: String,
    #[serde(rename = "duration_s")]
    pub duration: f64,
    pub speaker: String,
    #[serde(default)]
    pub split: Split,
}

impl UtteranceRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Input(format!(
                "utterance `{}` has non-positive duration {}",
                self.id, self.duration
            )));
        }
        Ok(())
    }
}

/// A record after taxonomy mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    #[serde(flatten)]
    pub record: UtteranceRecord,
    pub emotion: EmotionClass,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    source: String,
    raw_label: String,
    duration_s: f64,
    speaker: String,
}

/// Parses a `id,source,raw_label,duration_s,speaker` CSV manifest.
pub fn read_manifest<R: Read>(reader: R) -> Result<Vec<UtteranceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row?;
        let rec = UtteranceRecord {
            source: row.source.parse()?,
            id: row.id,
            raw_label: row.raw_label,
            duration: row.duration_s,
            speaker: row.speaker,
            split: Split::Unassigned,
        };
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

/// Maps every record's raw label. The first unmapped label aborts.
pub fn label_records(records: Vec<UtteranceRecord>, mapping: &LabelMapping) -> Result<Vec<LabeledRecord>> {
    records
        .into_iter()
        .map(|record| {
            let emotion = mapping.map_label(&record.raw_label, record.source)?;
            Ok(LabeledRecord { record, emotion })
        })
        .collect()
}
