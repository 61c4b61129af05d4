//! Latency estimation for a single deployment.
//!
//! The detailed model follows one request through the fault-free Mod-SMaRt
//! pattern: the client's Request reaches the leader, the leader sends
//! Propose to every replica, every replica broadcasts Write on Propose and
//! Accept once it holds a Write quorum, and replies after an Accept quorum.
//! A client accepts the result after `f + 1` matching responses. Processing
//! time is ignored; every hop costs half the RTT of its link.
//!
//! The simple model adds the mean request leg, the sum of one-way delays
//! over all replica pairs and the mean response leg.

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    AcceptTiming, ClientSet, Deployment, EstimatorVariant, ProtocolParams, RttMatrix, SiteId,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("the latency models need a leader-based deployment")]
    Leaderless,
    #[error("deployment has {deployment} replicas but parameters say n = {params}")]
    ReplicaCountMismatch { deployment: usize, params: usize },
    #[error("order statistic k = {k} out of range for {len} values")]
    RankOutOfRange { k: usize, len: usize },
}

/// Returns the `k`-th smallest value (1-based), counting duplicates.
pub fn kth_smallest(values: &[f64], k: usize) -> Result<f64, EstimateError> {
    let mut buf = values.to_vec();
    select(&mut buf, k)
}

fn select(buf: &mut [f64], k: usize) -> Result<f64, EstimateError> {
    if k == 0 || k > buf.len() {
        return Err(EstimateError::RankOutOfRange { k, len: buf.len() });
    }
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Per-client completion time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientResponse {
    pub site: SiteId,
    pub count: u32,
    pub latency_ms: f64,
}

/// Phase timings of one traced request. Replica vectors are indexed like
/// `replicas`, leader first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub replicas: Vec<SiteId>,
    pub s_req: f64,
    pub s_pro: Vec<f64>,
    pub s_wrt: Vec<f64>,
    pub s_acc: Vec<f64>,
    pub responses: Vec<ClientResponse>,
    pub latency_ms: f64,
}

fn leader_and_replicas(x: &Deployment, p: &ProtocolParams) -> Result<(SiteId, Vec<SiteId>), EstimateError> {
    let leader = x.leader().ok_or(EstimateError::Leaderless)?;
    if x.n() != p.n {
        return Err(EstimateError::ReplicaCountMismatch {
            deployment: x.n(),
            params: p.n,
        });
    }
    Ok((leader, x.replicas().collect()))
}

/// Client-weighted mean of `value(site)`.
fn weighted_mean(clients: &ClientSet, mut value: impl FnMut(SiteId) -> f64) -> f64 {
    let sum: f64 = clients
        .entries()
        .iter()
        .map(|&(site, count)| f64::from(count) * value(site))
        .sum();
    sum / clients.total() as f64
}

/// Traces the detailed message pattern and returns the mean client latency
/// together with every intermediate timing.
pub fn estimate_detailed(
    x: &Deployment,
    clients: &ClientSet,
    m: &RttMatrix,
    p: &ProtocolParams,
) -> Result<(f64, PhaseTimings), EstimateError> {
    let (leader, replicas) = leader_and_replicas(x, p)?;
    let n = replicas.len();
    let quorum = p.quorum();
    let mut buf = vec![0.0; n];

    let s_req = weighted_mean(clients, |c| m.delay(c, leader));
    let s_pro: Vec<f64> = replicas.iter().map(|&r| s_req + m.delay(leader, r)).collect();

    let mut s_wrt = Vec::with_capacity(n);
    for &ri in &replicas {
        for (slot, (&rj, &t)) in buf.iter_mut().zip(replicas.iter().zip(&s_pro)) {
            *slot = t + m.delay(rj, ri);
        }
        s_wrt.push(select(&mut buf, quorum)?);
    }

    let mut s_acc = Vec::with_capacity(n);
    for (i, &ri) in replicas.iter().enumerate() {
        for (j, (slot, &rj)) in buf.iter_mut().zip(&replicas).enumerate() {
            let sent = match p.accept_timing {
                AcceptTiming::SenderBased => s_wrt[j],
                AcceptTiming::PaperLiteral => s_wrt[i],
            };
            *slot = sent + m.delay(rj, ri);
        }
        s_acc.push(select(&mut buf, quorum)?);
    }

    let mut responses = Vec::with_capacity(clients.entries().len());
    for &(c, count) in clients.entries() {
        for (slot, (&ri, &t)) in buf.iter_mut().zip(replicas.iter().zip(&s_acc)) {
            *slot = t + m.delay(ri, c);
        }
        responses.push(ClientResponse {
            site: c,
            count,
            latency_ms: select(&mut buf, p.reply_quorum())?,
        });
    }
    let total: f64 = responses
        .iter()
        .map(|r| f64::from(r.count) * r.latency_ms)
        .sum();
    let latency_ms = total / clients.total() as f64;

    Ok((
        latency_ms,
        PhaseTimings {
            replicas,
            s_req,
            s_pro,
            s_wrt,
            s_acc,
            responses,
            latency_ms,
        },
    ))
}

/// Baseline estimate: request leg + all-pairs consensus delay + response leg.
pub fn estimate_simple(
    x: &Deployment,
    clients: &ClientSet,
    m: &RttMatrix,
) -> Result<f64, EstimateError> {
    let leader = x.leader().ok_or(EstimateError::Leaderless)?;
    let replicas: Vec<SiteId> = x.replicas().collect();

    let s_req = weighted_mean(clients, |c| m.delay(c, leader));
    let mut s_con = 0.0;
    for (i, &a) in replicas.iter().enumerate() {
        for &b in &replicas[i + 1..] {
            s_con += m.delay(a, b);
        }
    }
    let s_res = weighted_mean(clients, |c| {
        replicas.iter().map(|&r| m.delay(r, c)).sum::<f64>() / replicas.len() as f64
    });
    Ok(s_req + s_con + s_res)
}

/// Latency of `x` under the estimator selected in `p`.
pub fn estimate(
    x: &Deployment,
    clients: &ClientSet,
    m: &RttMatrix,
    p: &ProtocolParams,
) -> Result<f64, EstimateError> {
    match p.variant {
        EstimatorVariant::ModSmartDetailed => estimate_detailed(x, clients, m, p).map(|(l, _)| l),
        EstimatorVariant::ModSmartSimple => {
            leader_and_replicas(x, p)?;
            estimate_simple(x, clients, m)
        }
    }
}
