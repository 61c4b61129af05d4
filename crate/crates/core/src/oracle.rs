//! Discrete-event simulation of the fault-free request path, used to
//! cross-check [`crate::estimator::estimate_detailed`]. It replays every
//! message through a time-ordered queue instead of evaluating order
//! statistics, and is not used when ranking.
//!
//! Accepts are always sent when the sender reaches its Write quorum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::estimator::EstimateError;
use crate::model::{ClientSet, Deployment, ProtocolParams, RttMatrix, SiteId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    RequestArrive,
    ProposeArrive,
    WriteArrive,
    AcceptArrive,
    ResponseArrive,
}

/// A delivered message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub from: SiteId,
    pub to: SiteId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    /// Client-count-weighted mean completion time.
    pub latency_ms: f64,
    /// Completion time per client entry, in client-set order.
    pub per_client: Vec<f64>,
    /// Every delivered message in delivery order.
    pub events: Vec<SimEvent>,
}

#[derive(Debug, Clone, Copy)]
enum Endpoint {
    Client(usize),
    Replica(usize),
}

#[derive(Debug)]
struct Pending {
    time: f64,
    seq: u64,
    kind: EventKind,
    from: Endpoint,
    to: Endpoint,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // Reversed: BinaryHeap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Sim<'a> {
    m: &'a RttMatrix,
    replicas: Vec<SiteId>,
    clients: Vec<SiteId>,
    queue: BinaryHeap<Pending>,
    seq: u64,
}

impl Sim<'_> {
    fn site(&self, e: Endpoint) -> SiteId {
        match e {
            Endpoint::Client(c) => self.clients[c],
            Endpoint::Replica(r) => self.replicas[r],
        }
    }

    fn send(&mut self, now: f64, kind: EventKind, from: Endpoint, to: Endpoint) {
        let (a, b) = (self.site(from), self.site(to));
        let hop = if a == b { 0.0 } else { self.m.get(a.0, b.0) * 0.5 };
        self.seq += 1;
        self.queue.push(Pending {
            time: now + hop,
            seq: self.seq,
            kind,
            from,
            to,
        });
    }

    fn broadcast(&mut self, now: f64, kind: EventKind, from: usize) {
        for to in 0..self.replicas.len() {
            self.send(now, kind, Endpoint::Replica(from), Endpoint::Replica(to));
        }
    }
}

/// Simulates one request and returns per-client completion times.
pub fn simulate(
    x: &Deployment,
    clients: &ClientSet,
    m: &RttMatrix,
    p: &ProtocolParams,
) -> Result<SimulationReport, EstimateError> {
    if x.leader().is_none() {
        return Err(EstimateError::Leaderless);
    }
    if x.n() != p.n {
        return Err(EstimateError::ReplicaCountMismatch {
            deployment: x.n(),
            params: p.n,
        });
    }
    let quorum = p.quorum();
    let reply_quorum = p.reply_quorum();
    let mut sim = Sim {
        m,
        replicas: x.replicas().collect(),
        clients: clients.entries().iter().map(|&(s, _)| s).collect(),
        queue: BinaryHeap::new(),
        seq: 0,
    };
    let n = sim.replicas.len();

    // The leader sees the request at the client-averaged arrival time. Copies
    // sent to other replicas are not acted upon in the fault-free case.
    let mut weighted = 0.0;
    for &(site, count) in clients.entries() {
        let one_way = if site == sim.replicas[0] {
            0.0
        } else {
            m.get(site.0, sim.replicas[0].0) * 0.5
        };
        weighted += f64::from(count) * one_way;
    }
    let arrival = weighted / clients.total() as f64;
    sim.seq += 1;
    sim.queue.push(Pending {
        time: arrival,
        seq: sim.seq,
        kind: EventKind::RequestArrive,
        from: Endpoint::Client(0),
        to: Endpoint::Replica(0),
    });

    let mut writes = vec![0usize; n];
    let mut accepts = vec![0usize; n];
    let mut replies = vec![0usize; sim.clients.len()];
    let mut done = vec![f64::NAN; sim.clients.len()];
    let mut events = Vec::new();

    while let Some(ev) = sim.queue.pop() {
        let now = ev.time;
        events.push(SimEvent {
            time: now,
            kind: ev.kind,
            from: sim.site(ev.from),
            to: sim.site(ev.to),
        });
        match (ev.kind, ev.to) {
            (EventKind::RequestArrive, Endpoint::Replica(leader)) => {
                sim.broadcast(now, EventKind::ProposeArrive, leader);
            }
            (EventKind::ProposeArrive, Endpoint::Replica(r)) => {
                sim.broadcast(now, EventKind::WriteArrive, r);
            }
            (EventKind::WriteArrive, Endpoint::Replica(r)) => {
                writes[r] += 1;
                if writes[r] == quorum {
                    sim.broadcast(now, EventKind::AcceptArrive, r);
                }
            }
            (EventKind::AcceptArrive, Endpoint::Replica(r)) => {
                accepts[r] += 1;
                if accepts[r] == quorum {
                    for c in 0..sim.clients.len() {
                        sim.send(now, EventKind::ResponseArrive, Endpoint::Replica(r), Endpoint::Client(c));
                    }
                }
            }
            (EventKind::ResponseArrive, Endpoint::Client(c)) => {
                replies[c] += 1;
                if replies[c] == reply_quorum {
                    done[c] = now;
                }
            }
            (kind, to) => unreachable!("{kind:?} delivered to {to:?}"),
        }
    }

    let total: f64 = clients
        .entries()
        .iter()
        .zip(&done)
        .map(|(&(_, count), &t)| f64::from(count) * t)
        .sum();
    Ok(SimulationReport {
        latency_ms: total / clients.total() as f64,
        per_client: done,
        events,
    })
}
