use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One image's identifiers and label fields.
///
/// `location`, `substrate`, `season` and `image_path` are optional context
/// for the zero-shot protocol; they are omitted from the serialized line
/// when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub observation_id: String,
    pub category_id: Option<String>,
    pub species: Option<String>,
    pub genus: Option<String>,
    pub family: Option<String>,
    pub poisonous: Option<bool>,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substrate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub season: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

impl ObservationRecord {
    pub fn new(observation_id: impl Into<String>, category_id: Option<&str>, split: Split) -> Self {
        Self {
            observation_id: observation_id.into(),
            category_id: category_id.map(str::to_owned),
            species: None,
            genus: None,
            family: None,
            poisonous: None,
            split,
            location: None,
            substrate: None,
            season: None,
            image_path: None,
        }
    }

    pub fn with_taxonomy(mut self, family: &str, genus: &str, species: &str) -> Self {
        self.family = Some(family.to_owned());
        self.genus = Some(genus.to_owned());
        self.species = Some(species.to_owned());
        self
    }

    pub fn with_poisonous(mut self, poisonous: bool) -> Self {
        self.poisonous = Some(poisonous);
        self
    }

    fn validate(&self, line: usize) -> Result<()> {
        if self.observation_id.is_empty() {
            return Err(Error::SchemaViolation {
                line,
                message: "observation_id is empty".into(),
            });
        }
        let has_category = self.category_id.as_deref().is_some_and(|c| !c.is_empty());
        if self.split != Split::Test && !has_category {
            return Err(Error::SchemaViolation {
                line,
                message: format!("{} record without category_id", self.split),
            });
        }
        Ok(())
    }
}

// Mirrors `ObservationRecord`, but leaves `split` as a string so unknown
// values surface as `UnknownSplit` instead of a generic serde error.
#[derive(Deserialize)]
struct RawRecord {
    observation_id: String,
    #[serde(default)]
    category_id: Option<String>,
    #[serde(default)]
    species: Option<String>,
    #[serde(default)]
    genus: Option<String>,
    #[serde(default)]
    family: Option<String>,
    #[serde(default)]
    poisonous: Option<bool>,
    split: String,
    #[serde(default)]
    location: Option<String>,
    #[serde(default)]
    substrate: Option<String>,
    #[serde(default)]
    season: Option<String>,
    #[serde(default)]
    image_path: Option<String>,
}

/// Parses one metadata line. `line` is 1-based and only used for errors.
pub fn parse_record(text: &str, line: usize) -> Result<ObservationRecord> {
    let raw: RawRecord = serde_json::from_str(text).map_err(|e| Error::SchemaViolation {
        line,
        message: e.to_string(),
    })?;
    let split = Split::parse(&raw.split).ok_or_else(|| Error::UnknownSplit {
        line,
        value: raw.split.clone(),
    })?;
    let record = ObservationRecord {
        observation_id: raw.observation_id,
        category_id: raw.category_id,
        species: raw.species,
        genus: raw.genus,
        family: raw.family,
        poisonous: raw.poisonous,
        split,
        location: raw.location,
        substrate: raw.substrate,
        season: raw.season,
        image_path: raw.image_path,
    };
    record.validate(line)?;
    Ok(record)
}

/// Reads line-delimited JSON records. Blank lines are skipped but still
/// counted, so error line numbers match the file.
pub fn read_metadata(path: impl AsRef<Path>) -> Result<Vec<ObservationRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, i + 1)?);
    }
    Ok(out)
}

pub fn write_metadata(records: &[ObservationRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_line_parses() {
        let line = r#"{"observation_id":"o1","category_id":"17","species":"Amanita muscaria","genus":"Amanita","family":"Amanitaceae","poisonous":true,"split":"train"}"#;
        let r = parse_record(line, 1).unwrap();
        assert_eq!(r.category_id.as_deref(), Some("17"));
        assert_eq!(r.family.as_deref(), Some("Amanitaceae"));
        assert_eq!(r.poisonous, Some(true));
        assert_eq!(r.split, Split::Train);
    }

    #[test]
    fn test_split_may_lack_category() {
        let line = r#"{"observation_id":"t1","category_id":null,"species":null,"genus":null,"family":null,"poisonous":null,"split":"test"}"#;
        let r = parse_record(line, 3).unwrap();
        assert!(r.category_id.is_none());
        assert_eq!(r.split, Split::Test);
    }

    #[test]
    fn train_split_requires_category() {
        let line = r#"{"observation_id":"t1","category_id":null,"split":"train"}"#;
        assert!(matches!(
            parse_record(line, 4),
            Err(Error::SchemaViolation { line: 4, .. })
        ));
    }

    #[test]
    fn unknown_split() {
        let line = r#"{"observation_id":"t1","category_id":"1","split":"holdout"}"#;
        assert!(matches!(
            parse_record(line, 2),
            Err(Error::UnknownSplit { line: 2, .. })
        ));
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.jsonl");
        let good = r#"{"observation_id":"o","category_id":"1","split":"train"}"#;
        let mut text = String::new();
        for i in 0..16 {
            text.push_str(&good.replace("\"o\"", &format!("\"o{i}\"")));
            text.push('\n');
        }
        text.push_str("{not json\n");
        std::fs::write(&path, text).unwrap();
        let err = read_metadata(&path).unwrap_err();
        assert!(
            matches!(err, Error::SchemaViolation { line: 17, .. }),
            "{err}"
        );
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let recs = vec![
            ObservationRecord::new("a", Some("x"), Split::Train).with_taxonomy("F", "G", "S"),
            ObservationRecord::new("b", None, Split::Test),
        ];
        write_metadata(&recs, &path).unwrap();
        assert_eq!(read_metadata(&path).unwrap(), recs);
    }
}
