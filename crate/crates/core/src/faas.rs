//! In-process serverless platform: replicas pinned to compute nodes, a
//! round-robin dispatcher and concurrent invocation over emulated links.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::thread;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlink::{transfer_time, LinkProfile};
use crate::seed;
use crate::textml::{decode_response, handle_training_request, CvResult, HandlerOutput, TrainingResponse};

#[derive(Clone, Debug, PartialEq)]
pub struct ComputeNode {
    pub node_id: String,
    /// Path from the requesting base station to this node.
    pub link: LinkProfile,
    /// Multiplier applied to measured compute time.
    pub compute_scale: f64,
}

impl ComputeNode {
    pub fn new(node_id: impl Into<String>, link: LinkProfile) -> Self {
        ComputeNode {
            node_id: node_id.into(),
            link,
            compute_scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchPolicy {
    #[default]
    RoundRobin,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replica {
    pub replica_id: usize,
    pub node_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deployment {
    pub replicas: Vec<Replica>,
    pub policy: DispatchPolicy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub request_id: usize,
    pub replica_id: usize,
}

/// Places replica `i` on node `i mod |nodes|`.
pub fn deploy(nodes: &[ComputeNode], replica_count: usize, policy: DispatchPolicy) -> Result<Deployment> {
    if nodes.is_empty() {
        return Err(Error::invalid("cannot deploy without compute nodes"));
    }
    if replica_count == 0 {
        return Err(Error::invalid("replica_count must be >= 1"));
    }
    let mut ids = std::collections::HashSet::new();
    if let Some(dup) = nodes.iter().find(|n| !ids.insert(n.node_id.as_str())) {
        return Err(Error::invalid(format!("duplicate node id `{}`", dup.node_id)));
    }
    let replicas = (0..replica_count)
        .map(|replica_id| Replica {
            replica_id,
            node_id: nodes[replica_id % nodes.len()].node_id.clone(),
        })
        .collect();
    Ok(Deployment { replicas, policy })
}

impl Deployment {
    /// Assigns requests to replicas in request order, starting at replica 0.
    pub fn dispatch(&self, request_count: usize) -> Vec<Assignment> {
        match self.policy {
            DispatchPolicy::RoundRobin => (0..request_count)
                .map(|request_id| Assignment {
                    request_id,
                    replica_id: request_id % self.replicas.len(),
                })
                .collect(),
        }
    }

    pub fn node_of(&self, replica_id: usize) -> Option<&str> {
        self.replicas.get(replica_id).map(|r| r.node_id.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub request_id: usize,
    pub replica_id: usize,
    pub node_id: String,
    pub status: u16,
    pub request_bytes: usize,
    pub response_bytes: usize,
    pub request_transfer_seconds: f64,
    pub response_transfer_seconds: f64,
    pub network_seconds: f64,
    pub compute_seconds: f64,
    pub compute_scale: f64,
    pub overhead_seconds: f64,
    /// `network + compute × scale + overhead`.
    pub total_seconds: f64,
    pub cv_result: Option<CvResult>,
    pub error: Option<String>,
}

impl InvocationRecord {
    pub fn is_success(&self) -> bool {
        self.cv_result.is_some()
    }

    /// Time the replica is busy with this request.
    pub fn service_seconds(&self) -> f64 {
        self.compute_seconds * self.compute_scale + self.overhead_seconds
    }
}

#[derive(Clone, Debug)]
pub struct InvokeOptions {
    /// Fixed platform cost added to every invocation.
    pub overhead_seconds: f64,
    /// Handlers allowed to execute on the host at the same time. Distinct
    /// emulated nodes share the host's cores; capping this at the core count
    /// keeps each measured compute time free of cross-node contention.
    pub host_slots: usize,
}

impl Default for InvokeOptions {
    fn default() -> Self {
        InvokeOptions {
            overhead_seconds: 0.0,
            host_slots: thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

struct HostGate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl HostGate {
    fn new(slots: usize) -> Self {
        HostGate {
            free: Mutex::new(slots.max(1)),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().unwrap();
            while *free == 0 {
                free = self.cv.wait(free).unwrap();
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
        out
    }
}

pub type Handler = dyn Fn(&[u8]) -> HandlerOutput + Sync;

fn execute<R: Rng + ?Sized>(
    node: &ComputeNode,
    ids: Assignment,
    request: &[u8],
    rng: &mut R,
    overhead_seconds: f64,
    handler: &Handler,
    gate: Option<&HostGate>,
) -> InvocationRecord {
    let up = transfer_time(&node.link, request.len(), rng);
    let output = match gate {
        Some(g) => g.run(|| handler(request)),
        None => handler(request),
    };
    let (cv_result, compute_seconds, error) = match decode_response(&output.body) {
        Ok(TrainingResponse::Success {
            result,
            compute_seconds,
        }) => (Some(result), compute_seconds, None),
        Ok(TrainingResponse::Failure { error }) => (None, 0.0, Some(error)),
        Err(e) => (None, 0.0, Some(format!("undecodable response: {e}"))),
    };
    let down = transfer_time(&node.link, output.body.len(), rng);
    let network_seconds = up.duration + down.duration;
    InvocationRecord {
        request_id: ids.request_id,
        replica_id: ids.replica_id,
        node_id: node.node_id.clone(),
        status: output.status,
        request_bytes: request.len(),
        response_bytes: output.body.len(),
        request_transfer_seconds: up.duration,
        response_transfer_seconds: down.duration,
        network_seconds,
        compute_seconds,
        compute_scale: node.compute_scale,
        overhead_seconds,
        total_seconds: network_seconds + compute_seconds * node.compute_scale + overhead_seconds,
        cv_result,
        error,
    }
}

/// Runs one request on `node`: request transfer, the training handler (timed
/// in real time), response transfer.
pub fn invoke<R: Rng + ?Sized>(node: &ComputeNode, request: &[u8], rng: &mut R) -> InvocationRecord {
    let ids = Assignment {
        request_id: 0,
        replica_id: 0,
    };
    execute(node, ids, request, rng, 0.0, &handle_training_request, None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutcome {
    /// Time from sending every request at t = 0 until the last response arrives.
    pub elapsed_seconds: f64,
    /// In request order.
    pub records: Vec<InvocationRecord>,
}

/// Fans `requests` out over the deployment and waits for all of them.
///
/// Request `i` draws its network samples from stream `i` of `net_seed`.
pub fn invoke_all(
    deployment: &Deployment,
    nodes: &[ComputeNode],
    requests: &[Vec<u8>],
    net_seed: u64,
    options: &InvokeOptions,
) -> Result<BatchOutcome> {
    invoke_all_with(deployment, nodes, requests, net_seed, options, &handle_training_request)
}

pub fn invoke_all_with(
    deployment: &Deployment,
    nodes: &[ComputeNode],
    requests: &[Vec<u8>],
    net_seed: u64,
    options: &InvokeOptions,
    handler: &Handler,
) -> Result<BatchOutcome> {
    if requests.is_empty() {
        return Err(Error::invalid("no requests to invoke"));
    }
    let by_id: HashMap<&str, &ComputeNode> = nodes.iter().map(|n| (n.node_id.as_str(), n)).collect();
    let mut queues: Vec<Vec<Assignment>> = vec![Vec::new(); deployment.replicas.len()];
    for a in deployment.dispatch(requests.len()) {
        queues[a.replica_id].push(a);
    }
    let mut placement = Vec::with_capacity(queues.len());
    for replica in &deployment.replicas {
        let node = by_id.get(replica.node_id.as_str()).ok_or_else(|| {
            Error::invalid(format!(
                "replica {} references unknown node `{}`",
                replica.replica_id, replica.node_id
            ))
        })?;
        placement.push(*node);
    }

    let gate = HostGate::new(options.host_slots);
    let mut slots: Vec<Option<InvocationRecord>> = vec![None; requests.len()];
    thread::scope(|scope| {
        let workers: Vec<_> = queues
            .iter()
            .zip(&placement)
            .filter(|(q, _)| !q.is_empty())
            .map(|(queue, node)| {
                let gate = &gate;
                scope.spawn(move || {
                    queue
                        .iter()
                        .map(|&a| {
                            let mut rng = seed::stream(net_seed, a.request_id as u64);
                            execute(
                                node,
                                a,
                                &requests[a.request_id],
                                &mut rng,
                                options.overhead_seconds,
                                handler,
                                Some(gate),
                            )
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for worker in workers {
            for record in worker.join().expect("replica worker panicked") {
                let id = record.request_id;
                slots[id] = Some(record);
            }
        }
    });
    let records: Vec<InvocationRecord> = slots.into_iter().map(|r| r.expect("every request ran")).collect();
    Ok(BatchOutcome {
        elapsed_seconds: batch_elapsed(&records),
        records,
    })
}

/// Completion time of the last response when every request leaves at t = 0.
///
/// A replica serves one request at a time in request order; a request starts
/// once it has arrived and the replica is free, and the response transfer does
/// not occupy the replica.
pub fn batch_elapsed(records: &[InvocationRecord]) -> f64 {
    let mut free_at: HashMap<usize, f64> = HashMap::new();
    let mut elapsed: f64 = 0.0;
    for r in records {
        let free = free_at.entry(r.replica_id).or_insert(0.0);
        let start = free.max(r.request_transfer_seconds);
        let done_computing = start + r.service_seconds();
        *free = done_computing;
        elapsed = elapsed.max(done_computing + r.response_transfer_seconds);
    }
    elapsed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link() -> LinkProfile {
        LinkProfile::new(0.001, 0.0, 0.0, 1e9, 1448).unwrap()
    }

    fn nodes(n: usize) -> Vec<ComputeNode> {
        (0..n).map(|i| ComputeNode::new(format!("cn{i}"), link())).collect()
    }

    #[test]
    fn deploy_round_robin() {
        let d = deploy(&nodes(2), 2, DispatchPolicy::RoundRobin).unwrap();
        assert_eq!(d.node_of(0), Some("cn0"));
        assert_eq!(d.node_of(1), Some("cn1"));

        let d = deploy(&nodes(1), 1, DispatchPolicy::RoundRobin).unwrap();
        assert_eq!(d.replicas.len(), 1);

        let d = deploy(&nodes(2), 3, DispatchPolicy::RoundRobin).unwrap();
        let on0: Vec<usize> = d
            .replicas
            .iter()
            .filter(|r| r.node_id == "cn0")
            .map(|r| r.replica_id)
            .collect();
        assert_eq!(on0, vec![0, 2]);
    }

    #[test]
    fn deploy_errors() {
        assert!(deploy(&[], 1, DispatchPolicy::RoundRobin).is_err());
        assert!(deploy(&nodes(1), 0, DispatchPolicy::RoundRobin).is_err());
        let mut dup = nodes(2);
        dup[1].node_id = "cn0".into();
        assert!(deploy(&dup, 2, DispatchPolicy::RoundRobin).is_err());
    }

    #[test]
    fn dispatch_assignments() {
        let d = deploy(&nodes(2), 2, DispatchPolicy::RoundRobin).unwrap();
        let a = d.dispatch(2);
        assert_eq!((a[0].replica_id, a[1].replica_id), (0, 1));
        let per_replica = |n: usize, r: usize| d.dispatch(n).iter().filter(|a| a.replica_id == r).count();
        assert_eq!((per_replica(4, 0), per_replica(4, 1)), (2, 2));

        let d = deploy(&nodes(3), 3, DispatchPolicy::RoundRobin).unwrap();
        assert_eq!(d.dispatch(1)[0].replica_id, 0);
    }

    fn timed(request_id: usize, replica_id: usize, compute: f64) -> InvocationRecord {
        InvocationRecord {
            request_id,
            replica_id,
            node_id: String::new(),
            status: 200,
            request_bytes: 0,
            response_bytes: 0,
            request_transfer_seconds: 0.0,
            response_transfer_seconds: 0.0,
            network_seconds: 0.0,
            compute_seconds: compute,
            compute_scale: 1.0,
            overhead_seconds: 0.0,
            total_seconds: compute,
            cv_result: None,
            error: None,
        }
    }

    #[test]
    fn elapsed_is_max_over_distinct_replicas() {
        assert_eq!(batch_elapsed(&[timed(0, 0, 3.0), timed(1, 1, 5.0)]), 5.0);
    }

    #[test]
    fn elapsed_serializes_on_one_replica() {
        assert_eq!(batch_elapsed(&[timed(0, 0, 3.0), timed(1, 0, 3.0)]), 6.0);
    }

    #[test]
    fn elapsed_waits_for_arrival() {
        let mut r = timed(0, 0, 1.0);
        r.request_transfer_seconds = 0.5;
        r.response_transfer_seconds = 0.25;
        assert_eq!(batch_elapsed(&[r]), 1.75);
    }
}
