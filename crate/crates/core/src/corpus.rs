//! Labeled text corpus: loading, synthetic generation, splitting and the
//! request payload sent to function replicas.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::textml::{tokenize, CvConfig, PacHyperParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    /// `Real` is the positive class.
    pub fn sign(self) -> f64 {
        match self {
            Label::Real => 1.0,
            Label::Fake => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "REAL",
            Label::Fake => "FAKE",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("real") {
            Ok(Label::Real)
        } else if s.eq_ignore_ascii_case("fake") {
            Ok(Label::Fake)
        } else {
            Err(s.to_owned())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: usize,
    pub text: String,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    records: Vec<DocumentRecord>,
    source: String,
}

impl Dataset {
    /// Assigns dense ids in order. Texts without a single token are dropped.
    pub fn from_labeled(
        docs: impl IntoIterator<Item = (String, Label)>,
        source: impl Into<String>,
    ) -> Result<Self> {
        let records: Vec<DocumentRecord> = docs
            .into_iter()
            .filter(|(text, _)| !tokenize(text).is_empty())
            .enumerate()
            .map(|(id, (text, label))| DocumentRecord { id, text, label })
            .collect();
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Dataset {
            records,
            source: source.into(),
        })
    }

    pub fn records(&self) -> &[DocumentRecord] {
        &self.records
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Reads a CSV with a header row containing `text` and `label` columns.
/// Other columns are ignored; rows whose text has no tokens are skipped.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or(Error::MissingColumn(name))
    };
    let text_col = column("text")?;
    let label_col = column("label")?;

    let mut docs = Vec::new();
    let mut skipped = 0usize;
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let label_raw = row.get(label_col).unwrap_or("");
        let label = label_raw.parse::<Label>().map_err(|value| Error::UnknownLabel {
            row: row_no,
            value,
        })?;
        let text = row.get(text_col).unwrap_or("").to_owned();
        if tokenize(&text).is_empty() {
            skipped += 1;
            continue;
        }
        docs.push((text, label));
    }
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} rows without usable text", path.display());
    }
    Dataset::from_labeled(docs, path.display().to_string())
}

fn pool_word(index: usize) -> String {
    format!("w{index:05}")
}

/// Two-topic synthetic corpus: each class draws its words from its own half
/// of the vocabulary, with each word swapped for one from the other half with
/// probability `noise`. Even ids are `REAL`, odd ids `FAKE`.
pub fn generate_synthetic(n_docs: usize, vocab_size: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n_docs < 2 {
        return Err(Error::invalid("n_docs must be >= 2"));
    }
    if vocab_size < 4 {
        return Err(Error::invalid("vocab_size must be >= 4"));
    }
    if !(0.0..1.0).contains(&noise) {
        return Err(Error::invalid(format!("noise must be in [0, 1), got {noise}")));
    }
    let half = vocab_size / 2;
    let pools = [0..half, half..vocab_size];
    let mut rng = seed::rng(seed);
    let docs = (0..n_docs).map(|i| {
        let (label, own, other) = if i % 2 == 0 {
            (Label::Real, &pools[0], &pools[1])
        } else {
            (Label::Fake, &pools[1], &pools[0])
        };
        let len = rng.random_range(10..=50);
        let words: Vec<String> = (0..len)
            .map(|_| {
                let pool = if noise > 0.0 && rng.random_bool(noise) {
                    other
                } else {
                    own
                };
                pool_word(rng.random_range(pool.clone()))
            })
            .collect();
        (words.join(" "), label)
    });
    let docs: Vec<(String, Label)> = docs.collect();
    Dataset::from_labeled(docs, format!("synthetic:{seed}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub train_shards: Vec<f64>,
    pub seed: u64,
}

const FRACTION_EPS: f64 = 1e-9;

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |f: f64| f > 0.0 && f < 1.0;
        if !in_unit(self.test_fraction) {
            return Err(Error::InvalidSplit(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.train_shards.is_empty() {
            return Err(Error::InvalidSplit("train_shards is empty".into()));
        }
        if let Some(bad) = self.train_shards.iter().find(|&&f| !in_unit(f)) {
            return Err(Error::InvalidSplit(format!(
                "shard fraction must be in (0, 1), got {bad}"
            )));
        }
        let total = self.test_fraction + self.train_shards.iter().sum::<f64>();
        if total > 1.0 + FRACTION_EPS {
            return Err(Error::InvalidSplit(format!("fractions sum to {total} > 1")));
        }
        Ok(())
    }

    /// Partition sizes for `n` records: test first, then each shard.
    ///
    /// Every part takes `floor(fraction × n)`; when the fractions sum to one,
    /// the last shard takes whatever remains instead.
    pub fn sizes(&self, n: usize) -> Result<Vec<usize>> {
        self.validate()?;
        let part = |f: f64| (f * n as f64 + FRACTION_EPS).floor() as usize;
        let mut sizes = vec![part(self.test_fraction)];
        sizes.extend(self.train_shards.iter().map(|&f| part(f)));
        let total = self.test_fraction + self.train_shards.iter().sum::<f64>();
        let assigned_before_last: usize = sizes[..sizes.len() - 1].iter().sum();
        if assigned_before_last > n {
            return Err(Error::InvalidSplit(format!("parts exceed {n} records")));
        }
        if total >= 1.0 - FRACTION_EPS {
            *sizes.last_mut().unwrap() = n - assigned_before_last;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            let what = if empty == 0 {
                "test partition".to_owned()
            } else {
                format!("shard {}", empty - 1)
            };
            return Err(Error::InvalidSplit(format!("{what} is empty for {n} records")));
        }
        Ok(sizes)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitResult {
    pub test: Vec<DocumentRecord>,
    pub shards: Vec<Vec<DocumentRecord>>,
}

impl SplitResult {
    /// All shard records, shard by shard.
    pub fn train_union(&self) -> Vec<DocumentRecord> {
        self.shards.iter().flatten().cloned().collect()
    }
}

/// Seeded shuffle, then test partition followed by each shard in order.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<SplitResult> {
    let n = dataset.len();
    let parts = 1 + spec.train_shards.len();
    if n < parts {
        return Err(Error::InvalidSplit(format!(
            "{n} records cannot fill {parts} partitions"
        )));
    }
    let sizes = spec.sizes(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(spec.seed));

    let mut cursor = order.into_iter();
    let mut take = |len: usize| -> Vec<DocumentRecord> {
        cursor
            .by_ref()
            .take(len)
            .map(|i| dataset.records[i].clone())
            .collect()
    };
    let test = take(sizes[0]);
    let shards = sizes[1..].iter().map(|&len| take(len)).collect();
    Ok(SplitResult { test, shards })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub candidates: Vec<PacHyperParams>,
}

/// Payload of one training invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingRequest {
    pub docs: Vec<String>,
    pub labels: Vec<Label>,
    pub folds: usize,
    pub grid: GridSpec,
    pub seed: u64,
}

impl TrainingRequest {
    pub fn new(shard: &[DocumentRecord], cv: &CvConfig) -> Self {
        TrainingRequest {
            docs: shard.iter().map(|r| r.text.clone()).collect(),
            labels: shard.iter().map(|r| r.label).collect(),
            folds: cv.folds,
            grid: GridSpec {
                candidates: cv.grid.clone(),
            },
            seed: cv.seed,
        }
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            folds: self.folds,
            grid: self.grid.candidates.clone(),
            seed: self.seed,
        }
    }

    /// Records numbered in payload order.
    pub fn records(&self) -> Result<Vec<DocumentRecord>> {
        if self.docs.len() != self.labels.len() {
            return Err(Error::invalid(format!(
                "{} docs but {} labels",
                self.docs.len(),
                self.labels.len()
            )));
        }
        if self.docs.is_empty() {
            return Err(Error::invalid("request carries no documents"));
        }
        Ok(self
            .docs
            .iter()
            .zip(&self.labels)
            .enumerate()
            .map(|(id, (text, &label))| DocumentRecord {
                id,
                text: text.clone(),
                label,
            })
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("request serializes")
    }
}

/// Serializes a shard and its search configuration. Keys are emitted in a
/// fixed order so the byte length is reproducible.
pub fn encode_request(shard: &[DocumentRecord], cv: &CvConfig) -> Result<Vec<u8>> {
    if shard.is_empty() {
        return Err(Error::invalid("cannot encode an empty shard"));
    }
    Ok(TrainingRequest::new(shard, cv).to_bytes())
}

pub fn decode_request(bytes: &[u8]) -> Result<TrainingRequest> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Ids appearing in more than one of `parts`.
pub fn overlapping_ids<'a>(parts: impl IntoIterator<Item = &'a [DocumentRecord]>) -> Vec<usize> {
    let mut seen = HashSet::new();
    let mut dup = Vec::new();
    for part in parts {
        for r in part {
            if !seen.insert(r.id) {
                dup.push(r.id);
            }
        }
    }
    dup
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_minimal_csv() {
        let f = write_csv("title,text,label\nt1,cats are nice,REAL\nt2,\"aliens, rule senate\",fake\n");
        let ds = load_csv(f.path()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records()[0].label, Label::Real);
        assert_eq!(ds.records()[1].label, Label::Fake);
        assert_eq!(ds.records()[1].text, "aliens, rule senate");
        assert_eq!(ds.records()[1].id, 1);
    }

    #[test]
    fn unknown_label_names_row() {
        let f = write_csv("text,label\naa bb,REAL\ncc dd,FAKE\nee ff,MAYBE\n");
        match load_csv(f.path()) {
            Err(Error::UnknownLabel { row, value }) => {
                assert_eq!(row, 3);
                assert_eq!(value, "MAYBE");
            }
            other => panic!("expected label error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_file() {
        let f = write_csv("body,label\naa,REAL\n");
        assert!(matches!(load_csv(f.path()), Err(Error::MissingColumn("text"))));
        assert!(matches!(
            load_csv("/nonexistent/news.csv"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn no_usable_rows() {
        let f = write_csv("text,label\na,REAL\n!!,FAKE\n");
        assert!(matches!(load_csv(f.path()), Err(Error::EmptyDataset)));
        let f = write_csv("text,label\n");
        assert!(matches!(load_csv(f.path()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn synthetic_small_is_pure_and_balanced() {
        let ds = generate_synthetic(4, 8, 0.0, 1).unwrap();
        assert_eq!(ds.len(), 4);
        for r in ds.records() {
            let own = if r.label == Label::Real { 0..4 } else { 4..8 };
            for tok in tokenize(&r.text) {
                let idx: usize = tok[1..].parse().unwrap();
                assert!(own.contains(&idx), "{tok} leaked into {}", r.label);
            }
        }
        let reals = ds.records().iter().filter(|r| r.label == Label::Real).count();
        assert_eq!(reals, 2);
        assert_eq!(ds.source(), "synthetic:1");
    }

    #[test]
    fn synthetic_paper_size_counts() {
        let ds = generate_synthetic(3150, 2000, 0.15, 42).unwrap();
        let reals = ds.records().iter().filter(|r| r.label == Label::Real).count();
        assert_eq!((reals, ds.len() - reals), (1575, 1575));
        assert_eq!(ds, generate_synthetic(3150, 2000, 0.15, 42).unwrap());
    }

    #[test]
    fn synthetic_rejects_bad_args() {
        assert!(generate_synthetic(1, 8, 0.0, 1).is_err());
        assert!(generate_synthetic(4, 3, 0.0, 1).is_err());
        assert!(generate_synthetic(4, 8, 1.0, 1).is_err());
    }

    fn spec(test: f64, shards: &[f64]) -> SplitSpec {
        SplitSpec {
            test_fraction: test,
            train_shards: shards.to_vec(),
            seed: 7,
        }
    }

    #[test]
    fn split_sizes() {
        let ds = generate_synthetic(10, 8, 0.0, 1).unwrap();
        let s = split(&ds, &spec(0.2, &[0.4, 0.4])).unwrap();
        assert_eq!((s.test.len(), s.shards[0].len(), s.shards[1].len()), (2, 4, 4));
        assert!(overlapping_ids([s.test.as_slice(), &s.shards[0], &s.shards[1]]).is_empty());

        let big = generate_synthetic(3150, 100, 0.1, 1).unwrap();
        let s = split(&big, &spec(0.2, &[0.8])).unwrap();
        assert_eq!((s.test.len(), s.shards[0].len()), (630, 2520));
    }

    #[test]
    fn split_is_deterministic() {
        let ds = generate_synthetic(50, 20, 0.1, 3).unwrap();
        let sp = spec(0.2, &[0.4, 0.4]);
        assert_eq!(split(&ds, &sp).unwrap(), split(&ds, &sp).unwrap());
    }

    #[test]
    fn partial_split_leaves_remainder() {
        let sp = spec(0.2, &[0.3]);
        assert_eq!(sp.sizes(10).unwrap(), vec![2, 3]);
    }

    #[test]
    fn split_errors() {
        assert!(spec(0.6, &[0.6]).validate().is_err());
        assert!(spec(0.2, &[]).validate().is_err());
        assert!(spec(0.0, &[0.5]).validate().is_err());
        // 0.05 × 10 floors to zero
        assert!(spec(0.2, &[0.05, 0.75]).sizes(10).is_err());
        let ds = generate_synthetic(2, 8, 0.0, 1).unwrap();
        assert!(split(&ds, &spec(0.2, &[0.4, 0.4])).is_err());
    }

    #[test]
    fn request_structure_and_round_trip() {
        let ds = generate_synthetic(100, 40, 0.2, 9).unwrap();
        let cv = CvConfig::default().with_seed(12);
        let one = encode_request(&ds.records()[..1], &cv).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&one).unwrap();
        assert_eq!(v["docs"].as_array().unwrap().len(), 1);
        assert_eq!(v["folds"], 5);
        assert_eq!(v["seed"], 12);

        let bytes = encode_request(ds.records(), &cv).unwrap();
        let back = decode_request(&bytes).unwrap();
        assert_eq!(back, TrainingRequest::new(ds.records(), &cv));
        assert_eq!(back.cv_config(), cv);
        assert_eq!(back.records().unwrap(), ds.records());
    }

    #[test]
    fn payload_grows_with_records() {
        let ds = generate_synthetic(20, 40, 0.2, 9).unwrap();
        let cv = CvConfig::default();
        let sizes: Vec<usize> = (1..=20)
            .map(|n| encode_request(&ds.records()[..n], &cv).unwrap().len())
            .collect();
        assert!(sizes.windows(2).all(|w| w[0] < w[1]));
        assert!(encode_request(&[], &cv).is_err());
    }
}
