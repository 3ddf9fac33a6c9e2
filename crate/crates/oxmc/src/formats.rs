//! On-disk formats. Every data file is JSON Lines, one object per line:
//!
//! | file        | line schema                                                    |
//! | ----------- | -------------------------------------------------------------- |
//! | raw log     | `{"id", "text", "query", "freq"}`                              |
//! | curated     | `{"id", "text", "labels": [{"kp", "freq"}]}`                   |
//! | predictions | `{"id", "kps": [string]}`                                      |
//! | universe    | `{"id", "text", "topic", "labels": [string], "weight"}`        |
//! | judgments   | `{"id", "g": [0/1], "uni": [0/1]}`                             |
//!
//! Models are a single JSON document (see [`ModelArtifact`]); manifests and
//! reports are JSON and TSV. All writes go to a temporary sibling first and
//! are renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use oxmc_core::augmentor::Provenance;
use oxmc_core::biassim::{Universe, UniverseItem};
use oxmc_core::corpus::{
    normalize_keyphrase, Dataset, Instance, InteractionRecord, Keyphrase, Label,
};
use oxmc_core::metrics::Prediction;
use oxmc_core::seqmodel::{ModelArtifact, NgramScorer};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkbenchError};

/// Write `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| WorkbenchError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| WorkbenchError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| WorkbenchError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| WorkbenchError::io(path, e))
}

/// Non-blank lines of a JSON Lines stream, deserialized, with 1-based line
/// numbers in errors.
fn read_jsonl<T: DeserializeOwned, R: Read>(reader: R, name: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| WorkbenchError::Parse {
            path: name.into(),
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| WorkbenchError::Parse {
            path: name.into(),
            line: line_no,
            reason: e.to_string(),
        })?;
        out.push((line_no, value));
    }
    Ok(out)
}

fn to_jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut buf, &row)
            .map_err(|e| WorkbenchError::Internal(e.to_string()))?;
        buf.push(b'\n');
    }
    Ok(buf)
}

fn require<T>(value: Option<T>, name: &str, line: usize, field: &'static str) -> Result<T> {
    value.ok_or_else(|| WorkbenchError::MissingField {
        path: name.into(),
        line,
        field,
    })
}

// ---------------------------------------------------------------------------
// Raw interaction log

#[derive(Deserialize)]
struct RawLine {
    id: Option<String>,
    text: Option<String>,
    query: Option<String>,
    freq: Option<i64>,
}

/// Parse a raw interaction log. `name` is only used in error messages.
pub fn parse_interaction_log<R: Read>(reader: R, name: &str) -> Result<Vec<InteractionRecord>> {
    read_jsonl::<RawLine, _>(reader, name)?
        .into_iter()
        .map(|(line, raw)| {
            let id = require(raw.id, name, line, "id")?;
            let text = require(raw.text, name, line, "text")?;
            let query = require(raw.query, name, line, "query")?;
            let freq = require(raw.freq, name, line, "freq")?;
            if freq < 1 {
                return Err(WorkbenchError::Parse {
                    path: name.into(),
                    line,
                    reason: format!("freq must be a positive integer, got {freq}"),
                });
            }
            Ok(InteractionRecord::new(id, text, query, freq as u64))
        })
        .collect()
}

pub fn read_interaction_log(path: &Path) -> Result<Vec<InteractionRecord>> {
    parse_interaction_log(open(path)?, &path.display().to_string())
}

#[derive(Serialize)]
struct RawOut<'a> {
    id: &'a str,
    text: &'a str,
    query: &'a str,
    freq: u64,
}

pub fn interaction_log_bytes(records: &[InteractionRecord]) -> Result<Vec<u8>> {
    to_jsonl(records.iter().map(|r| RawOut {
        id: &r.item_id,
        text: &r.item_text,
        query: &r.keyphrase,
        freq: r.frequency,
    }))
}

// ---------------------------------------------------------------------------
// Curated dataset

#[derive(Serialize, Deserialize)]
struct LabelLine {
    kp: String,
    freq: u64,
}

#[derive(Serialize, Deserialize)]
struct CuratedLine {
    id: Option<String>,
    text: Option<String>,
    labels: Option<Vec<LabelLine>>,
}

pub fn parse_dataset<R: Read>(reader: R, name: &str) -> Result<Dataset> {
    let instances = read_jsonl::<CuratedLine, _>(reader, name)?
        .into_iter()
        .map(|(line, row)| {
            let id = require(row.id, name, line, "id")?;
            let text = require(row.text, name, line, "text")?;
            let labels = require(row.labels, name, line, "labels")?
                .into_iter()
                .map(|l| {
                    Ok(Label {
                        keyphrase: normalize_keyphrase(&l.kp)?,
                        frequency: l.freq,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Instance::new(id, text, labels).map_err(|e| WorkbenchError::Parse {
                path: name.into(),
                line,
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(instances, name))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(open(path)?, &path.display().to_string())
}

pub fn dataset_bytes(d: &Dataset) -> Result<Vec<u8>> {
    to_jsonl(d.iter().map(|inst| {
        CuratedLine {
            id: Some(inst.item_id.clone()),
            text: Some(inst.text.clone()),
            labels: Some(
                inst.labels()
                    .iter()
                    .map(|l| LabelLine {
                        kp: l.keyphrase.as_string(),
                        freq: l.frequency,
                    })
                    .collect(),
            ),
        }
    }))
}

// ---------------------------------------------------------------------------
// Predictions

#[derive(Serialize, Deserialize)]
struct PredictionLine {
    id: Option<String>,
    kps: Option<Vec<String>>,
}

pub fn parse_predictions<R: Read>(reader: R, name: &str) -> Result<Vec<Prediction>> {
    read_jsonl::<PredictionLine, _>(reader, name)?
        .into_iter()
        .map(|(line, row)| {
            let id = require(row.id, name, line, "id")?;
            let kps = require(row.kps, name, line, "kps")?
                .iter()
                .map(|k| normalize_keyphrase(k))
                .collect::<std::result::Result<Vec<Keyphrase>, _>>()
                .map_err(|e| WorkbenchError::Parse {
                    path: name.into(),
                    line,
                    reason: e.to_string(),
                })?;
            Ok(Prediction::new(id, kps))
        })
        .collect()
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    parse_predictions(open(path)?, &path.display().to_string())
}

pub fn predictions_bytes(preds: &[Prediction]) -> Result<Vec<u8>> {
    to_jsonl(preds.iter().map(|p| PredictionLine {
        id: Some(p.item_id.clone()),
        kps: Some(p.keyphrases.iter().map(Keyphrase::as_string).collect()),
    }))
}

// ---------------------------------------------------------------------------
// Universe

#[derive(Serialize, Deserialize)]
struct UniverseLine {
    id: String,
    text: String,
    topic: usize,
    labels: Vec<String>,
    weight: f64,
}

pub fn parse_universe<R: Read>(reader: R, name: &str) -> Result<Universe> {
    let items = read_jsonl::<UniverseLine, _>(reader, name)?
        .into_iter()
        .map(|(line, row)| {
            let labels = row
                .labels
                .iter()
                .map(|l| normalize_keyphrase(l))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| WorkbenchError::Parse {
                    path: name.into(),
                    line,
                    reason: e.to_string(),
                })?;
            if labels.is_empty() {
                return Err(WorkbenchError::Parse {
                    path: name.into(),
                    line,
                    reason: "universe item without labels".into(),
                });
            }
            Ok(UniverseItem {
                item_id: row.id,
                text: row.text,
                topic: row.topic,
                labels,
                weight: row.weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Universe { items })
}

pub fn read_universe(path: &Path) -> Result<Universe> {
    parse_universe(open(path)?, &path.display().to_string())
}

pub fn universe_bytes(u: &Universe) -> Result<Vec<u8>> {
    to_jsonl(u.items.iter().map(|i| UniverseLine {
        id: i.item_id.clone(),
        text: i.text.clone(),
        topic: i.topic,
        labels: i.labels.iter().map(Keyphrase::as_string).collect(),
        weight: i.weight,
    }))
}

// ---------------------------------------------------------------------------
// Relevance judgments

#[derive(Deserialize)]
struct JudgmentLine {
    id: Option<String>,
    g: Option<Vec<u8>>,
    uni: Option<Vec<u8>>,
}

/// Per-item (relevance, in-universe) flags for predicted keyphrases.
pub type Judgments = Vec<(String, Vec<bool>, Vec<bool>)>;

pub fn parse_judgments<R: Read>(reader: R, name: &str) -> Result<Judgments> {
    let flags = |v: Vec<u8>, line: usize| -> Result<Vec<bool>> {
        v.into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(WorkbenchError::Parse {
                    path: name.into(),
                    line,
                    reason: format!("judgment flags must be 0 or 1, got {other}"),
                }),
            })
            .collect()
    };
    read_jsonl::<JudgmentLine, _>(reader, name)?
        .into_iter()
        .map(|(line, row)| {
            let id = require(row.id, name, line, "id")?;
            let g = flags(require(row.g, name, line, "g")?, line)?;
            let uni = flags(require(row.uni, name, line, "uni")?, line)?;
            Ok((id, g, uni))
        })
        .collect()
}

pub fn read_judgments(path: &Path) -> Result<Judgments> {
    parse_judgments(open(path)?, &path.display().to_string())
}

// ---------------------------------------------------------------------------
// Models, provenance, manifests

pub fn model_bytes(model: &NgramScorer) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec(&model.to_artifact())
        .map_err(|e| WorkbenchError::Internal(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn read_model(path: &Path) -> Result<NgramScorer> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| WorkbenchError::io(path, e))?;
    let artifact: ModelArtifact =
        serde_json::from_str(&text).map_err(|e| WorkbenchError::Parse {
            path: path.display().to_string(),
            line: e.line(),
            reason: e.to_string(),
        })?;
    Ok(NgramScorer::from_artifact(artifact)?)
}

pub fn provenance_bytes(p: &BTreeMap<String, Provenance>) -> Result<Vec<u8>> {
    json_bytes(p)
}

pub fn read_provenance(path: &Path) -> Result<BTreeMap<String, Provenance>> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| WorkbenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| WorkbenchError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        reason: e.to_string(),
    })
}

/// Pretty JSON with a trailing newline. Object keys come out sorted.
pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let value = serde_json::to_value(value).map_err(|e| WorkbenchError::Internal(e.to_string()))?;
    let mut buf =
        serde_json::to_vec_pretty(&value).map_err(|e| WorkbenchError::Internal(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

/// Tab-separated table with a header row.
pub fn tsv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_log_lines() {
        let recs = parse_interaction_log(
            r#"{"id":"i1","text":"t","query":"Red Shoe","freq":3}"#.as_bytes(),
            "log",
        )
        .unwrap();
        assert_eq!(recs, vec![InteractionRecord::new("i1", "t", "Red Shoe", 3)]);
        assert!(parse_interaction_log("".as_bytes(), "log")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn raw_log_errors_carry_line_numbers() {
        let input = "{\"id\":\"a\",\"text\":\"t\",\"query\":\"q\",\"freq\":1}\n{\"id\":\"b\",\"text\":\"t\",\"freq\":1}\n";
        match parse_interaction_log(input.as_bytes(), "log") {
            Err(WorkbenchError::MissingField {
                line: 2,
                field: "query",
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_interaction_log("{not json\n".as_bytes(), "log") {
            Err(WorkbenchError::Parse { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let zero = r#"{"id":"a","text":"t","query":"q","freq":0}"#;
        assert!(matches!(
            parse_interaction_log(zero.as_bytes(), "log"),
            Err(WorkbenchError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn curated_round_trip() {
        let recs = [
            InteractionRecord::new("i1", "text one", "a", 2),
            InteractionRecord::new("i1", "text one", "b c", 1),
            InteractionRecord::new("i2", "text two", "a", 1),
        ];
        let d = oxmc_core::corpus::curate(&recs).unwrap();
        let bytes = dataset_bytes(&d).unwrap();
        assert_eq!(
            String::from_utf8(bytes.clone())
                .unwrap()
                .lines()
                .next()
                .unwrap(),
            r#"{"id":"i1","text":"text one","labels":[{"kp":"a","freq":2},{"kp":"b c","freq":1}]}"#
        );
        let back = parse_dataset(bytes.as_slice(), "d").unwrap();
        assert_eq!(back.instances, d.instances);
    }

    #[test]
    fn predictions_normalize() {
        let p = parse_predictions(r#"{"id":"x","kps":["New  iPhone","case"]}"#.as_bytes(), "p")
            .unwrap();
        assert_eq!(p[0].keyphrases[0].as_string(), "new iphone");
        assert!(matches!(
            parse_predictions(r#"{"id":"x","kps":["  "]}"#.as_bytes(), "p"),
            Err(WorkbenchError::Parse { .. })
        ));
        assert_eq!(
            String::from_utf8(predictions_bytes(&p).unwrap()).unwrap(),
            "{\"id\":\"x\",\"kps\":[\"new iphone\",\"case\"]}\n"
        );
    }

    #[test]
    fn judgments() {
        let j = parse_judgments(r#"{"id":"x","g":[1,0],"uni":[1,1]}"#.as_bytes(), "j").unwrap();
        assert_eq!(j[0].1, vec![true, false]);
        assert!(parse_judgments(r#"{"id":"x","g":[2],"uni":[1]}"#.as_bytes(), "j").is_err());
    }
}
