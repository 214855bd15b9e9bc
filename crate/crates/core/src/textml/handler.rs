//! Function entry point: request bytes in, response bytes out.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::cv::{kfold_cv, CandidateScore, CvResult};
use super::pac::PacHyperParams;
use crate::corpus::decode_request;
use crate::error::{Error, Result};

pub const STATUS_OK: u16 = 200;
pub const STATUS_BAD_REQUEST: u16 = 400;
pub const STATUS_UNPROCESSABLE: u16 = 422;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandlerOutput {
    pub status: u16,
    pub body: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainingResponse {
    Success { result: CvResult, compute_seconds: f64 },
    Failure { error: String },
}

#[derive(Serialize)]
struct SuccessBody<'a> {
    best: &'a PacHyperParams,
    best_mean_accuracy: f64,
    per_candidate: &'a [CandidateScore],
    compute_seconds: Box<RawValue>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuccessWire {
    best: PacHyperParams,
    best_mean_accuracy: f64,
    per_candidate: Vec<CandidateScore>,
    compute_seconds: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ErrorBody {
    error: String,
}

/// Decodes a training request, runs the grid search and encodes the result.
///
/// `compute_seconds` is the wall-clock time of the cross-validation alone and
/// is written with a fixed nine-digit fraction, so the response length does
/// not depend on the measured value (below 10 s). Nothing is retained between
/// calls.
pub fn handle_training_request(request: &[u8]) -> HandlerOutput {
    let req = match decode_request(request) {
        Ok(req) => req,
        Err(e) => return failure(STATUS_BAD_REQUEST, format!("malformed request: {e}")),
    };
    let records = match req.records() {
        Ok(r) => r,
        Err(e) => return failure(STATUS_BAD_REQUEST, e.to_string()),
    };
    let cv = req.cv_config();

    let started = Instant::now();
    let outcome = kfold_cv(&records, &cv);
    let compute_seconds = started.elapsed().as_secs_f64();

    match outcome {
        Ok(result) => {
            let body = SuccessBody {
                best: &result.best,
                best_mean_accuracy: result.best_mean_accuracy,
                per_candidate: &result.per_candidate,
                compute_seconds: RawValue::from_string(format!("{compute_seconds:.9}"))
                    .expect("fixed-point float is valid json"),
            };
            HandlerOutput {
                status: STATUS_OK,
                body: serde_json::to_vec(&body).expect("response serializes"),
            }
        }
        Err(e) => failure(STATUS_UNPROCESSABLE, e.to_string()),
    }
}

fn failure(status: u16, error: String) -> HandlerOutput {
    HandlerOutput {
        status,
        body: serde_json::to_vec(&ErrorBody { error }).expect("error body serializes"),
    }
}

pub fn decode_response(body: &[u8]) -> Result<TrainingResponse> {
    let value: serde_json::Value = serde_json::from_slice(body)?;
    if value.get("error").is_some() {
        let ErrorBody { error } = serde_json::from_value(value)?;
        return Ok(TrainingResponse::Failure { error });
    }
    let wire: SuccessWire = serde_json::from_value(value)?;
    if wire.per_candidate.iter().all(|c| c.params != wire.best) {
        return Err(Error::invalid("response `best` is not among the scored candidates"));
    }
    Ok(TrainingResponse::Success {
        result: CvResult {
            per_candidate: wire.per_candidate,
            best: wire.best,
            best_mean_accuracy: wire.best_mean_accuracy,
        },
        compute_seconds: wire.compute_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode_request, generate_synthetic};
    use crate::textml::CvConfig;

    fn request(n: usize) -> (Vec<u8>, CvConfig) {
        let ds = generate_synthetic(n, 60, 0.1, 17).unwrap();
        let cfg = CvConfig::default().with_seed(5);
        (encode_request(ds.records(), &cfg).unwrap(), cfg)
    }

    #[test]
    fn success_response_best_in_grid() {
        let (bytes, cfg) = request(80);
        let out = handle_training_request(&bytes);
        assert_eq!(out.status, STATUS_OK);
        match decode_response(&out.body).unwrap() {
            TrainingResponse::Success {
                result,
                compute_seconds,
            } => {
                assert!(cfg.grid.contains(&result.best));
                assert_eq!(result.per_candidate.len(), cfg.grid.len());
                assert!(compute_seconds >= 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn response_key_order() {
        let (bytes, _) = request(20);
        let body = String::from_utf8(handle_training_request(&bytes).body).unwrap();
        let pos = |k: &str| body.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("best") < pos("best_mean_accuracy"));
        assert!(pos("per_candidate") < pos("compute_seconds"));
    }

    #[test]
    fn truncated_request_is_an_error_response() {
        let (bytes, _) = request(20);
        let out = handle_training_request(&bytes[..bytes.len() / 2]);
        assert_eq!(out.status, STATUS_BAD_REQUEST);
        assert!(matches!(
            decode_response(&out.body).unwrap(),
            TrainingResponse::Failure { .. }
        ));
    }

    #[test]
    fn infeasible_cv_is_unprocessable() {
        let ds = generate_synthetic(3, 8, 0.0, 1).unwrap();
        let bytes = encode_request(ds.records(), &CvConfig::default()).unwrap();
        assert_eq!(handle_training_request(&bytes).status, STATUS_UNPROCESSABLE);
    }

    #[test]
    fn identical_requests_identical_results() {
        let (bytes, _) = request(40);
        let a = decode_response(&handle_training_request(&bytes).body).unwrap();
        let b = decode_response(&handle_training_request(&bytes).body).unwrap();
        match (a, b) {
            (
                TrainingResponse::Success { result: ra, .. },
                TrainingResponse::Success { result: rb, .. },
            ) => assert_eq!(ra, rb),
            other => panic!("unexpected {other:?}"),
        }
    }
}
