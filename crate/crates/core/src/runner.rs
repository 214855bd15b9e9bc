//! Scenario execution: split, fan out training requests, pick the best
//! hyperparameters, train locally on the full training data and score on
//! the held-out test set.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{self, encode_request, load_csv, overlapping_ids, Dataset, SplitResult, SplitSpec};
use crate::error::{Error, Result};
use crate::faas::{deploy, invoke_all, ComputeNode, DispatchPolicy, InvocationRecord, InvokeOptions};
use crate::netlink::LinkSpec;
use crate::seed;
use crate::stats::{mean, median, FiveNumber};
use crate::textml::{accuracy, pac_train, tokenize, CvConfig, CvResult, PacHyperParams, TfIdfModel};

const CV_STREAM: u64 = 0x4356;
const NET_STREAM: u64 = 0x4E45_5400;
const SPLIT_STREAM: u64 = 0x5350;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    pub vocab_size: usize,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Csv { path: PathBuf },
    Synthetic(SyntheticSpec),
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Csv { path } => load_csv(path),
            DatasetSource::Synthetic(s) => corpus::generate_synthetic(s.n_docs, s.vocab_size, s.noise, s.seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub node_id: String,
    pub link: LinkSpec,
    #[serde(default = "unit_scale")]
    pub compute_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl NodeSpec {
    pub fn to_node(&self) -> Result<ComputeNode> {
        Ok(ComputeNode {
            node_id: self.node_id.clone(),
            link: self.link.to_profile()?,
            compute_scale: self.compute_scale,
        })
    }
}

/// One experiment arm, as read from a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub dataset: DatasetSource,
    pub split: SplitSpec,
    /// Draw a fresh split for every repetition instead of one per run.
    #[serde(default)]
    pub resplit_each_repetition: bool,
    pub nodes: Vec<NodeSpec>,
    pub replica_count: usize,
    /// Parallel requests per repetition; one per training shard.
    pub concurrency: usize,
    pub cv: CvConfig,
    #[serde(default)]
    pub overhead_seconds: f64,
    /// Concurrent handler executions on this host; defaults to the core count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host_slots: Option<usize>,
    pub repetitions: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a scenario file. A relative CSV path is taken
    /// relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        if let DatasetSource::Csv { path: csv } = &mut cfg.dataset {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        if let DatasetSource::Synthetic(s) = &self.dataset {
            if s.n_docs < 2 || s.vocab_size < 4 || !(0.0..1.0).contains(&s.noise) {
                return Err(Error::config(
                    "dataset.synthetic",
                    "need n_docs >= 2, vocab_size >= 4 and noise in [0, 1)",
                ));
            }
        }
        self.split.validate().map_err(|e| Error::config("split", e.to_string()))?;
        if self.concurrency != self.split.train_shards.len() {
            return Err(Error::config(
                "concurrency",
                format!(
                    "{} parallel requests but {} training shards",
                    self.concurrency,
                    self.split.train_shards.len()
                ),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be >= 1"));
        }
        if self.replica_count == 0 {
            return Err(Error::config("replica_count", "must be >= 1"));
        }
        if self.nodes.is_empty() {
            return Err(Error::config("nodes", "at least one compute node is required"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if self.nodes[..i].iter().any(|n| n.node_id == node.node_id) {
                return Err(Error::config(format!("nodes[{i}].node_id"), format!("duplicate id `{}`", node.node_id)));
            }
            node.link
                .to_profile()
                .map_err(|e| Error::config(format!("nodes[{i}].link"), e.to_string()))?;
            if !(node.compute_scale.is_finite() && node.compute_scale > 0.0) {
                return Err(Error::config(format!("nodes[{i}].compute_scale"), "must be > 0"));
            }
        }
        self.cv.validate().map_err(|e| Error::config("cv", e.to_string()))?;
        if !(self.overhead_seconds.is_finite() && self.overhead_seconds >= 0.0) {
            return Err(Error::config("overhead_seconds", "must be >= 0"));
        }
        if self.host_slots == Some(0) {
            return Err(Error::config("host_slots", "must be >= 1"));
        }
        Ok(())
    }

    /// Search configuration sent with request `index`.
    pub fn request_cv(&self, index: usize) -> CvConfig {
        self.cv.with_seed(seed::derive(self.seed ^ self.cv.seed, CV_STREAM + index as u64))
    }

    fn split_for(&self, rep: usize) -> SplitSpec {
        if self.resplit_each_repetition {
            SplitSpec {
                seed: seed::derive(self.split.seed, SPLIT_STREAM + rep as u64),
                ..self.split.clone()
            }
        } else {
            self.split.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub rep_index: usize,
    /// Response time: all requests sent at once until the last response.
    pub elapsed_seconds: f64,
    pub chosen_params: Option<PacHyperParams>,
    /// Held-out test accuracy of the model trained on every training shard.
    pub final_accuracy: Option<f64>,
    pub records: Vec<InvocationRecord>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElapsedSummary {
    pub median: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub iqr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub median: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub elapsed_seconds: ElapsedSummary,
    pub final_accuracy: Option<AccuracySummary>,
    pub failed_repetitions: usize,
}

impl Summary {
    pub fn from_repetitions(reps: &[RepetitionResult]) -> Result<Self> {
        let elapsed: Vec<f64> = reps.iter().map(|r| r.elapsed_seconds).collect();
        let five = FiveNumber::of(&elapsed).ok_or_else(|| Error::invalid("no repetitions to summarize"))?;
        let acc: Vec<f64> = reps.iter().filter_map(|r| r.final_accuracy).collect();
        let final_accuracy = FiveNumber::of(&acc).map(|f| AccuracySummary {
            median: f.median,
            mean: mean(&acc),
            min: f.min,
            max: f.max,
        });
        Ok(Summary {
            elapsed_seconds: ElapsedSummary {
                median: five.median,
                mean: mean(&elapsed),
                min: five.min,
                max: five.max,
                iqr: five.iqr(),
            },
            final_accuracy,
            failed_repetitions: reps.iter().filter(|r| r.error.is_some()).count(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub dataset_source: String,
    /// Test partition size followed by each shard size.
    pub split_sizes: Vec<usize>,
    pub repetitions: Vec<RepetitionResult>,
    pub summary: Summary,
}

impl ScenarioResult {
    pub fn elapsed(&self) -> Vec<f64> {
        self.repetitions.iter().map(|r| r.elapsed_seconds).collect()
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.repetitions.iter().filter_map(|r| r.final_accuracy).collect()
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("result serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let result: ScenarioResult = serde_json::from_slice(bytes)?;
        if result.repetitions.is_empty() {
            return Err(Error::invalid("result holds no repetitions"));
        }
        Ok(result)
    }

    /// One row per repetition: `rep, elapsed_s, accuracy, chosen_C, chosen_epochs`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rep", "elapsed_s", "accuracy", "chosen_C", "chosen_epochs"])?;
        for r in &self.repetitions {
            let opt = |v: Option<String>| v.unwrap_or_default();
            w.write_record([
                r.rep_index.to_string(),
                r.elapsed_seconds.to_string(),
                opt(r.final_accuracy.map(|a| a.to_string())),
                opt(r.chosen_params.map(|p| p.c.to_string())),
                opt(r.chosen_params.map(|p| p.epochs.to_string())),
            ])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: PathBuf::from("<csv>"),
            source,
        })?;
        Ok(())
    }
}

/// Highest best-mean validation accuracy wins; ties go to the earliest response.
pub fn select_best(responses: &[CvResult]) -> Result<PacHyperParams> {
    let (first, rest) = responses
        .split_first()
        .ok_or_else(|| Error::invalid("no training responses to choose from"))?;
    let best = rest.iter().fold(first, |best, r| {
        if r.best_mean_accuracy > best.best_mean_accuracy {
            r
        } else {
            best
        }
    });
    Ok(best.best)
}

/// Trains on every training shard with `params` and scores the test partition.
pub fn final_accuracy(split: &SplitResult, params: PacHyperParams) -> Result<f64> {
    let train = split.train_union();
    let leaked = overlapping_ids([split.test.as_slice(), train.as_slice()]);
    if !leaked.is_empty() {
        return Err(Error::Runtime(format!(
            "{} test records also appear in training data",
            leaked.len()
        )));
    }
    let tokens: Vec<Vec<String>> = train.iter().map(|r| tokenize(&r.text)).collect();
    let vectorizer = TfIdfModel::fit(&tokens)?;
    let vectors: Vec<_> = tokens.iter().map(|t| vectorizer.transform(t)).collect();
    let labels: Vec<_> = train.iter().map(|r| r.label).collect();
    let model = pac_train(&vectors, &labels, vectorizer.len(), params)?;
    accuracy(&model, &vectorizer, &split.test)
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    config.validate()?;
    let dataset = config.dataset.load()?;
    let nodes = config.nodes.iter().map(NodeSpec::to_node).collect::<Result<Vec<_>>>()?;
    let deployment = deploy(&nodes, config.replica_count, DispatchPolicy::RoundRobin)?;
    let options = InvokeOptions {
        overhead_seconds: config.overhead_seconds,
        host_slots: config.host_slots.unwrap_or_else(|| InvokeOptions::default().host_slots),
    };
    let split_sizes = config.split.sizes(dataset.len())?;
    log::info!(
        "{}: {} records from {}, split {:?}, {} replicas on {} nodes",
        config.name,
        dataset.len(),
        dataset.source(),
        split_sizes,
        config.replica_count,
        nodes.len()
    );

    let fixed = if config.resplit_each_repetition {
        None
    } else {
        Some(corpus::split(&dataset, &config.split)?)
    };

    let mut repetitions = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions {
        let owned;
        let split = match &fixed {
            Some(s) => s,
            None => {
                owned = corpus::split(&dataset, &config.split_for(rep))?;
                &owned
            }
        };
        let requests = split
            .shards
            .iter()
            .enumerate()
            .map(|(i, shard)| encode_request(shard, &config.request_cv(i)))
            .collect::<Result<Vec<_>>>()?;
        let net_seed = seed::derive(config.seed, NET_STREAM + rep as u64);
        let batch = invoke_all(&deployment, &nodes, &requests, net_seed, &options)?;

        let responses: Vec<CvResult> = batch.records.iter().filter_map(|r| r.cv_result.clone()).collect();
        let (chosen_params, final_acc, error) = if responses.is_empty() {
            let reasons: Vec<&str> = batch.records.iter().filter_map(|r| r.error.as_deref()).collect();
            (None, None, Some(format!("all invocations failed: {}", reasons.join("; "))))
        } else {
            let params = select_best(&responses)?;
            (Some(params), Some(final_accuracy(split, params)?), None)
        };
        match (&final_acc, &error) {
            (Some(acc), _) => log::info!(
                "{} rep {rep}: elapsed {:.4} s, accuracy {acc:.4}",
                config.name,
                batch.elapsed_seconds
            ),
            (_, Some(e)) => log::warn!("{} rep {rep}: {e}", config.name),
            _ => {}
        }
        repetitions.push(RepetitionResult {
            rep_index: rep,
            elapsed_seconds: batch.elapsed_seconds,
            chosen_params,
            final_accuracy: final_acc,
            records: batch.records,
            error,
        });
    }

    let summary = Summary::from_repetitions(&repetitions)?;
    Ok(ScenarioResult {
        config: config.clone(),
        dataset_source: dataset.source().to_owned(),
        split_sizes,
        repetitions,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario_a: String,
    pub scenario_b: String,
    /// `(median_b − median_a) / median_b × 100`; negative when `a` is slower.
    pub median_response_reduction_pct: f64,
    /// `(median_accuracy_a − median_accuracy_b) × 100`.
    pub median_accuracy_delta_pp: f64,
    pub summary_a: Summary,
    pub summary_b: Summary,
}

/// Compares scenario `a` (the proposed arm) against baseline `b`.
pub fn compare(a: &ScenarioResult, b: &ScenarioResult) -> Result<ComparisonReport> {
    let (ea, eb) = (a.elapsed(), b.elapsed());
    let (aa, ab) = (a.accuracies(), b.accuracies());
    if ea.is_empty() || eb.is_empty() {
        return Err(Error::invalid("both results need at least one repetition"));
    }
    if aa.is_empty() || ab.is_empty() {
        return Err(Error::invalid("both results need at least one successful repetition"));
    }
    let (ma, mb) = (median(&ea), median(&eb));
    Ok(ComparisonReport {
        scenario_a: a.config.name.clone(),
        scenario_b: b.config.name.clone(),
        median_response_reduction_pct: (mb - ma) / mb * 100.0,
        median_accuracy_delta_pp: (median(&aa) - median(&ab)) * 100.0,
        summary_a: Summary::from_repetitions(&a.repetitions)?,
        summary_b: Summary::from_repetitions(&b.repetitions)?,
    })
}
