use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unified seven-class emotion taxonomy. Integer ids follow alphabetical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionClass {
    Angry = 0,
    Disgust = 1,
    Fear = 2,
    Happy = 3,
    Neutral = 4,
    Sad = 5,
    Upset = 6,
}

pub const NUM_CLASSES: usize = 7;

impl EmotionClass {
    pub const ALL: [EmotionClass; NUM_CLASSES] = [
        EmotionClass::Angry,
        EmotionClass::Disgust,
        EmotionClass::Fear,
        EmotionClass::Happy,
        EmotionClass::Neutral,
        EmotionClass::Sad,
        EmotionClass::Upset,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionClass::Angry => "angry",
            EmotionClass::Disgust => "disgust",
            EmotionClass::Fear => "fear",
            EmotionClass::Happy => "happy",
            EmotionClass::Neutral => "neutral",
            EmotionClass::Sad => "sad",
            EmotionClass::Upset => "upset",
        }
    }
}

impl fmt::Display for EmotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .ok_or_else(|| Error::Input(format!("unknown emotion class `{s}`")))
    }
}

/// The nine source corpora a manifest row may come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceDataset {
    Meld,
    Iemocap,
    JlCorpus,
    Esd,
    CremaD,
    EmovDb,
    Tess,
    Ravdess,
    Savee,
}

impl SourceDataset {
    pub const ALL: [SourceDataset; 9] = [
        SourceDataset::Meld,
        SourceDataset::Iemocap,
        SourceDataset::JlCorpus,
        SourceDataset::Esd,
        SourceDataset::CremaD,
        SourceDataset::EmovDb,
        SourceDataset::Tess,
        SourceDataset::Ravdess,
        SourceDataset::Savee,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceDataset::Meld => "MELD",
            SourceDataset::Iemocap => "IEMOCAP",
            SourceDataset::JlCorpus => "JL-Corpus",
            SourceDataset::Esd => "ESD",
            SourceDataset::CremaD => "CREMA-D",
            SourceDataset::EmovDb => "EmoV-DB",
            SourceDataset::Tess => "TESS",
            SourceDataset::Ravdess => "RAVDESS",
            SourceDataset::Savee => "SAVEE",
        }
    }

    fn key(s: &str) -> String {
        s.chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect()
    }
}

impl fmt::Display for SourceDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SourceDataset {
    type Err = Error;

    /// Case, hyphens and underscores are ignored: `crema_d`, `CREMA-D` and `cremad` agree.
    fn from_str(s: &str) -> Result<Self> {
        let key = Self::key(s);
        Self::ALL
            .into_iter()
            .find(|d| Self::key(d.name()) == key)
            .ok_or_else(|| Error::UnknownSource(s.to_string()))
    }
}

impl Serialize for SourceDataset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for SourceDataset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Data-driven raw-label → class table.
///
/// Lookup order: per-source table, then the shared table, then the class
/// names themselves. Keys are compared lowercased and trimmed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelMapping {
    #[serde(default)]
    pub shared: BTreeMap<String, EmotionClass>,
    #[serde(default)]
    pub per_source: BTreeMap<String, BTreeMap<String, EmotionClass>>,
}

impl Default for LabelMapping {
    fn default() -> Self {
        let shared = [
            ("frustrated", EmotionClass::Upset),
            ("excited", EmotionClass::Happy),
            ("amused", EmotionClass::Happy),
            ("calm", EmotionClass::Neutral),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            shared,
            per_source: BTreeMap::new(),
        }
    }
}

impl LabelMapping {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: LabelMapping = serde_json::from_str(text)?;
        let mut out = LabelMapping {
            shared: BTreeMap::new(),
            per_source: BTreeMap::new(),
        };
        for (k, v) in raw.shared {
            out.shared.insert(normalize(&k), v);
        }
        for (src, table) in raw.per_source {
            let src: SourceDataset = src.parse()?;
            let entry = out.per_source.entry(src.name().to_string()).or_default();
            for (k, v) in table {
                entry.insert(normalize(&k), v);
            }
        }
        Ok(out)
    }

    /// Routes `label` to `class` for every source, overriding earlier entries.
    pub fn with_override(mut self, label: &str, class: EmotionClass) -> Self {
        let key = normalize(label);
        for table in self.per_source.values_mut() {
            table.remove(&key);
        }
        self.shared.insert(key, class);
        self
    }

    pub fn map_label(&self, raw_label: &str, source: SourceDataset) -> Result<EmotionClass> {
        let key = normalize(raw_label);
        if let Some(c) = self
            .per_source
            .get(source.name())
            .and_then(|t| t.get(&key))
        {
            return Ok(*c);
        }
        if let Some(c) = self.shared.get(&key) {
            return Ok(*c);
        }
        key.parse::<EmotionClass>()
            .map_err(|_| Error::UnmappedLabel {
                label: raw_label.to_string(),
                source_name: source.name().to_string(),
            })
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_ascii_lowercase()
}
