//! Ranking of every deployment in a space, plus comparison of two rankings
//! (rank RMSE against the ideal diagonal and rank correlation).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::num::NonZeroUsize;

use rayon::prelude::*;
use thiserror::Error;

use crate::enumerate::DeploymentSpace;
use crate::estimator::{estimate, EstimateError};
use crate::model::{parse_site_list, ClientSet, Deployment, ProtocolParams, RttMatrix, SiteCatalog, ValidationError};

/// Raw measured samples per deployment expected by [`load_reference`].
pub const RAW_SAMPLES_PER_DEPLOYMENT: usize = 50;
/// Samples dropped from each end before averaging raw measurements.
pub const RAW_TRIM_EACH_SIDE: usize = 5;

const CHUNK: u128 = 512;
const MISMATCH_LIMIT: usize = 10;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("{0} deployments do not fit in memory")]
    TooLarge(u128),
    #[error("rankings cover different deployments: {0}")]
    Mismatch(DeploymentMismatch),
    #[error("deployment {0} appears more than once")]
    Duplicate(String),
    #[error("deployment {deployment} has {found} samples, expected {RAW_SAMPLES_PER_DEPLOYMENT}")]
    SampleCount { deployment: String, found: usize },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("cannot start worker pool: {0}")]
    WorkerPool(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Up to ten deployments present in only one of two rankings.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentMismatch {
    pub only_estimated: Vec<Deployment>,
    pub only_reference: Vec<Deployment>,
    /// Size of the full symmetric difference.
    pub total: usize,
}

impl DeploymentMismatch {
    pub fn describe(&self, catalog: &SiteCatalog) -> String {
        let labels = |ds: &[Deployment]| ds.iter().map(|d| d.label(catalog)).collect::<Vec<_>>().join(" ");
        format!(
            "{} differing; only in estimated: [{}]; only in reference: [{}]",
            self.total,
            labels(&self.only_estimated),
            labels(&self.only_reference)
        )
    }
}

impl fmt::Display for DeploymentMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} differing ({} shown only in estimated, {} only in reference)",
            self.total,
            self.only_estimated.len(),
            self.only_reference.len()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingEntry {
    /// 1-based position.
    pub rank: usize,
    pub deployment: Deployment,
    pub latency_ms: f64,
}

/// Deployments sorted by latency; equal latencies keep canonical order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ranking {
    entries: Vec<RankingEntry>,
}

impl Ranking {
    /// Sorts `(deployment, latency)` pairs into a ranking.
    pub fn from_latencies(mut evaluated: Vec<(Deployment, f64)>) -> Result<Self, RankingError> {
        evaluated.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        let mut seen = HashSet::with_capacity(evaluated.len());
        for (d, _) in &evaluated {
            if !seen.insert(d) {
                return Err(RankingError::Duplicate(format!("{d:?}")));
            }
        }
        let entries = evaluated
            .into_iter()
            .enumerate()
            .map(|(i, (deployment, latency_ms))| RankingEntry {
                rank: i + 1,
                deployment,
                latency_ms,
            })
            .collect();
        Ok(Ranking { entries })
    }

    pub fn entries(&self) -> &[RankingEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best(&self) -> Option<&RankingEntry> {
        self.entries.first()
    }

    /// Writes `rank,leader,followers,latency_ms` with `;`-joined followers.
    /// Latencies are written in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, catalog: &SiteCatalog, output: W) -> Result<(), RankingError> {
        let mut w = csv::Writer::from_writer(output);
        w.write_record(["rank", "leader", "followers", "latency_ms"])?;
        for e in &self.entries {
            let name = |id| catalog.name(id).unwrap_or("?").to_owned();
            let leader = e.deployment.leader().map(name).unwrap_or_default();
            let followers: Vec<String> = e.deployment.followers().iter().map(|&id| name(id)).collect();
            w.write_record([
                e.rank.to_string(),
                leader,
                followers.join(";"),
                e.latency_ms.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Estimates every deployment in `space`, in canonical order. With more than
/// one worker the index range is split into chunks evaluated in parallel;
/// the result is identical either way.
pub fn evaluate_all(
    space: &DeploymentSpace,
    clients: &ClientSet,
    m: &RttMatrix,
    p: &ProtocolParams,
    workers: NonZeroUsize,
) -> Result<Vec<(Deployment, f64)>, RankingError> {
    let total = space.count();
    usize::try_from(total).map_err(|_| RankingError::TooLarge(total))?;
    let eval = |d: Deployment| -> Result<(Deployment, f64), EstimateError> {
        let l = estimate(&d, clients, m, p)?;
        Ok((d, l))
    };
    if workers.get() == 1 {
        return Ok(space.iter().map(eval).collect::<Result<_, _>>()?);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.get())
        .build()
        .map_err(|e| RankingError::WorkerPool(e.to_string()))?;
    let chunks = total.div_ceil(CHUNK) as usize;
    let parts: Vec<Vec<(Deployment, f64)>> = pool.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c as u128 * CHUNK;
                space.range(start..start + CHUNK).map(eval).collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()
    })?;
    Ok(parts.into_iter().flatten().collect())
}

/// Evaluates and sorts the whole space.
pub fn rank(
    space: &DeploymentSpace,
    clients: &ClientSet,
    m: &RttMatrix,
    p: &ProtocolParams,
    workers: NonZeroUsize,
) -> Result<Ranking, RankingError> {
    Ranking::from_latencies(evaluate_all(space, clients, m, p, workers)?)
}

/// Agreement between an estimated and a reference ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingComparison {
    /// Root mean square distance of `(estimated, reference)` rank pairs from `y = x`.
    pub rmse: f64,
    /// Pearson correlation of the rank pairs.
    pub cc: f64,
    /// Pearson correlation of the raw latencies; `None` when either side is constant.
    pub latency_cc: Option<f64>,
    /// `(deployment, estimated rank, reference rank)` in estimated order.
    pub pairs: Vec<(Deployment, usize, usize)>,
}

impl RankingComparison {
    /// Writes `deployment,rank_estimated,rank_reference`.
    pub fn write_scatter_csv<W: Write>(&self, catalog: &SiteCatalog, output: W) -> Result<(), RankingError> {
        let mut w = csv::Writer::from_writer(output);
        w.write_record(["deployment", "rank_estimated", "rank_reference"])?;
        for (d, e, r) in &self.pairs {
            w.write_record([d.label(catalog), e.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pearson correlation; `None` if either series has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.is_empty() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Matches deployments across the two rankings and measures rank agreement.
pub fn compare(estimated: &Ranking, reference: &Ranking) -> Result<RankingComparison, RankingError> {
    let by_deployment: HashMap<&Deployment, &RankingEntry> =
        reference.entries.iter().map(|e| (&e.deployment, e)).collect();
    let est_set: HashSet<&Deployment> = estimated.entries.iter().map(|e| &e.deployment).collect();

    let only_estimated: Vec<&Deployment> = estimated
        .entries
        .iter()
        .map(|e| &e.deployment)
        .filter(|d| !by_deployment.contains_key(d))
        .collect();
    let only_reference: Vec<&Deployment> = reference
        .entries
        .iter()
        .map(|e| &e.deployment)
        .filter(|d| !est_set.contains(d))
        .collect();
    let total = only_estimated.len() + only_reference.len();
    if total > 0 {
        let take_est = only_estimated.len().min(MISMATCH_LIMIT);
        let take_ref = only_reference.len().min(MISMATCH_LIMIT - take_est);
        return Err(RankingError::Mismatch(DeploymentMismatch {
            only_estimated: only_estimated[..take_est].iter().map(|&d| d.clone()).collect(),
            only_reference: only_reference[..take_ref].iter().map(|&d| d.clone()).collect(),
            total,
        }));
    }

    let mut pairs = Vec::with_capacity(estimated.len());
    let mut est_ranks = Vec::with_capacity(estimated.len());
    let mut ref_ranks = Vec::with_capacity(estimated.len());
    let mut est_lat = Vec::with_capacity(estimated.len());
    let mut ref_lat = Vec::with_capacity(estimated.len());
    let mut sq = 0.0;
    for e in &estimated.entries {
        let r = by_deployment[&e.deployment];
        let diff = e.rank as f64 - r.rank as f64;
        sq += diff * diff;
        pairs.push((e.deployment.clone(), e.rank, r.rank));
        est_ranks.push(e.rank as f64);
        ref_ranks.push(r.rank as f64);
        est_lat.push(e.latency_ms);
        ref_lat.push(r.latency_ms);
    }
    let n = pairs.len().max(1) as f64;
    // Ranks are a permutation of 1..=N, so they only lack variance when N <= 1.
    let cc = pearson(&est_ranks, &ref_ranks).unwrap_or(1.0);
    Ok(RankingComparison {
        rmse: (sq / n).sqrt(),
        cc,
        latency_cc: pearson(&est_lat, &ref_lat),
        pairs,
    })
}

/// Mean of 50 raw latency samples after dropping the five highest and five lowest.
pub fn trimmed_latency(samples: &[f64]) -> Option<f64> {
    if samples.len() != RAW_SAMPLES_PER_DEPLOYMENT {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let kept = &sorted[RAW_TRIM_EACH_SIDE..sorted.len() - RAW_TRIM_EACH_SIDE];
    Some(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Loads a reference ranking. Accepted layouts, told apart by header:
///
/// * `rank,leader,followers,latency_ms`: a ranking written by [`Ranking::write_csv`];
/// * `deployment,latency_ms`: one measured latency per deployment;
/// * `deployment,sample_ms`: raw measurements, exactly 50 rows per deployment.
///
/// Deployments are labelled `leader|f1,f2,f3`. In every case the rows are
/// re-ranked by latency.
pub fn load_reference<R: Read>(input: R, catalog: &SiteCatalog) -> Result<Ranking, RankingError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    match header[..] {
        ["rank", "leader", "followers", "latency_ms"] => load_ranking_rows(reader, catalog),
        ["deployment", "latency_ms"] => load_aggregated(reader, catalog),
        ["deployment", "sample_ms"] => load_raw(reader, catalog),
        _ => Err(RankingError::Malformed {
            line: 1,
            message: format!("unrecognised header {:?}", header.join(",")),
        }),
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_latency(field: &str, line: u64) -> Result<f64, RankingError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(RankingError::Malformed {
            line,
            message: format!("bad latency {field:?}"),
        }),
    }
}

fn parse_deployment(label: &str, catalog: &SiteCatalog, line: u64) -> Result<Deployment, RankingError> {
    Deployment::parse_label(label, catalog).map_err(|e| RankingError::Malformed {
        line,
        message: format!("deployment {label:?}: {e}"),
    })
}

fn insert_unique(
    seen: &mut HashSet<Deployment>,
    d: &Deployment,
    catalog: &SiteCatalog,
) -> Result<(), RankingError> {
    if seen.insert(d.clone()) {
        Ok(())
    } else {
        Err(RankingError::Duplicate(d.label(catalog)))
    }
}

fn load_ranking_rows<R: Read>(mut reader: csv::Reader<R>, catalog: &SiteCatalog) -> Result<Ranking, RankingError> {
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let followers = parse_site_list(&record[2], ';', catalog).map_err(|e| RankingError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let d = if record[1].is_empty() {
            Deployment::leaderless(followers)
        } else {
            let leader = catalog.lookup(&record[1]).ok_or_else(|| RankingError::Malformed {
                line,
                message: format!("unknown site {:?}", &record[1]),
            })?;
            Deployment::leader_based(leader, followers)
        }
        .map_err(|e| RankingError::Malformed {
            line,
            message: e.to_string(),
        })?;
        insert_unique(&mut seen, &d, catalog)?;
        rows.push((d, parse_latency(&record[3], line)?));
    }
    Ranking::from_latencies(rows)
}

fn load_aggregated<R: Read>(mut reader: csv::Reader<R>, catalog: &SiteCatalog) -> Result<Ranking, RankingError> {
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let d = parse_deployment(&record[0], catalog, line)?;
        insert_unique(&mut seen, &d, catalog)?;
        rows.push((d, parse_latency(&record[1], line)?));
    }
    Ranking::from_latencies(rows)
}

fn load_raw<R: Read>(mut reader: csv::Reader<R>, catalog: &SiteCatalog) -> Result<Ranking, RankingError> {
    let mut order: Vec<Deployment> = Vec::new();
    let mut samples: HashMap<Deployment, Vec<f64>> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let d = parse_deployment(&record[0], catalog, line)?;
        let v = parse_latency(&record[1], line)?;
        samples
            .entry(d.clone())
            .or_insert_with(|| {
                order.push(d);
                Vec::new()
            })
            .push(v);
    }
    let mut rows = Vec::with_capacity(order.len());
    for d in order {
        let values = &samples[&d];
        let latency = trimmed_latency(values).ok_or_else(|| RankingError::SampleCount {
            deployment: d.label(catalog),
            found: values.len(),
        })?;
        rows.push((d, latency));
    }
    Ranking::from_latencies(rows)
}
