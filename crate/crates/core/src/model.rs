//! Domain types shared by every stage of the pipeline: sites, the RTT
//! matrix, deployments, client sets and protocol parameters.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when checking matrix symmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Index of a site inside a [`SiteCatalog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub usize);

impl SiteId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Site {
    pub id: SiteId,
    pub name: String,
}

/// An ordered list of sites; the position of each site is its id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SiteCatalog {
    sites: Vec<Site>,
}

impl SiteCatalog {
    /// Builds a catalog from names, assigning ids in order.
    pub fn from_names<I, S>(names: I) -> Result<Self, ValidationError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sites = names
            .into_iter()
            .enumerate()
            .map(|(i, name)| Site {
                id: SiteId(i),
                name: name.into(),
            })
            .collect();
        let catalog = SiteCatalog { sites };
        let issues = catalog.issues();
        if issues.is_empty() {
            Ok(catalog)
        } else {
            Err(ValidationError { issues })
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn ids(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.sites.iter().map(|s| s.id)
    }

    pub fn name(&self, id: SiteId) -> Option<&str> {
        self.sites.get(id.0).map(|s| s.name.as_str())
    }

    pub fn lookup(&self, name: &str) -> Option<SiteId> {
        self.sites.iter().find(|s| s.name == name).map(|s| s.id)
    }

    pub fn contains(&self, id: SiteId) -> bool {
        id.0 < self.sites.len()
    }

    fn issues(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        let mut seen = HashSet::new();
        for (i, site) in self.sites.iter().enumerate() {
            if site.id.0 != i {
                issues.push(Issue::SiteIdMismatch {
                    position: i,
                    id: site.id.0,
                });
            }
            if site.name.trim().is_empty() {
                issues.push(Issue::EmptySiteName { position: i });
            } else if !seen.insert(site.name.as_str()) {
                issues.push(Issue::DuplicateSiteName(site.name.clone()));
            }
        }
        issues
    }
}

/// Square matrix of mean round-trip times in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RttMatrix {
    size: usize,
    values: Vec<f64>,
}

impl RttMatrix {
    /// Builds a matrix and checks every invariant: zero diagonal, finite
    /// positive off-diagonal entries, symmetry. Entries that agree within
    /// [`SYMMETRY_TOLERANCE`] are replaced by their mean so the stored matrix
    /// is exactly symmetric.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ValidationError> {
        let mut m = Self::from_rows_unchecked(rows)?;
        let issues = m.issues(false);
        if !issues.is_empty() {
            return Err(ValidationError { issues });
        }
        for a in 0..m.size {
            for b in (a + 1)..m.size {
                let (x, y) = (m.get(a, b), m.get(b, a));
                if x != y {
                    let mean = (x + y) / 2.0;
                    m.values[a * m.size + b] = mean;
                    m.values[b * m.size + a] = mean;
                }
            }
        }
        Ok(m)
    }

    /// Builds a matrix checking only that it is square. Use
    /// [`validate_inputs`] (or [`RttMatrix::new`]) before estimating with it.
    pub fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Result<Self, ValidationError> {
        let size = rows.len();
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != size) {
            return Err(ValidationError {
                issues: vec![Issue::NotSquare {
                    row,
                    len: r.len(),
                    expected: size,
                }],
            });
        }
        Ok(RttMatrix {
            size,
            values: rows.into_iter().flatten().collect(),
        })
    }

    /// A matrix where every pair of distinct sites is `rtt` apart.
    pub fn uniform(size: usize, rtt: f64) -> Self {
        let mut values = vec![rtt; size * size];
        for i in 0..size {
            values[i * size + i] = 0.0;
        }
        RttMatrix { size, values }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.size + b]
    }

    /// One-way delay between two sites: half the round-trip time.
    pub fn link_delay(&self, a: SiteId, b: SiteId) -> Result<f64, ValidationError> {
        for id in [a, b] {
            if id.0 >= self.size {
                return Err(ValidationError {
                    issues: vec![Issue::SiteOutOfRange {
                        id: id.0,
                        size: self.size,
                    }],
                });
            }
        }
        Ok(self.delay(a, b))
    }

    /// Unchecked form of [`RttMatrix::link_delay`] for the hot path.
    #[inline]
    pub(crate) fn delay(&self, a: SiteId, b: SiteId) -> f64 {
        if a == b {
            0.0
        } else {
            self.get(a.0, b.0) / 2.0
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.size.max(1)).take(self.size)
    }

    /// Returns a copy with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        RttMatrix {
            size: self.size,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Sets both `(a, b)` and `(b, a)`.
    pub fn set_symmetric(&mut self, a: usize, b: usize, rtt: f64) {
        self.values[a * self.size + b] = rtt;
        self.values[b * self.size + a] = rtt;
    }

    /// Relabels sites: entry `(perm[a], perm[b])` of the result equals `(a, b)`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.size);
        let mut values = vec![0.0; self.values.len()];
        for a in 0..self.size {
            for b in 0..self.size {
                values[perm[a] * self.size + perm[b]] = self.get(a, b);
            }
        }
        RttMatrix {
            size: self.size,
            values,
        }
    }

    fn issues(&self, allow_zero_links: bool) -> Vec<Issue> {
        let mut issues = Vec::new();
        for a in 0..self.size {
            let d = self.get(a, a);
            if d != 0.0 {
                issues.push(Issue::NonZeroDiagonal { site: a, value: d });
            }
            for b in 0..self.size {
                if a == b {
                    continue;
                }
                let v = self.get(a, b);
                let ok = v.is_finite() && (v > 0.0 || (allow_zero_links && v == 0.0));
                if !ok {
                    issues.push(Issue::InvalidRtt { a, b, value: v });
                }
                if b > a {
                    let w = self.get(b, a);
                    let scale = v.abs().max(w.abs());
                    if (v - w).abs() > SYMMETRY_TOLERANCE * scale {
                        issues.push(Issue::Asymmetric {
                            a,
                            b,
                            forward: v,
                            backward: w,
                        });
                    }
                }
            }
        }
        issues
    }
}

/// Replica placement: an optional leader plus the remaining replica sites,
/// kept sorted so equal placements compare and serialize identically.
///
/// Ordering is canonical: by leader, then lexicographically by the other sites.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Deployment {
    leader: Option<SiteId>,
    others: Vec<SiteId>,
}

impl Deployment {
    /// A leader-based deployment. Follower order does not matter.
    pub fn leader_based(
        leader: SiteId,
        followers: impl IntoIterator<Item = SiteId>,
    ) -> Result<Self, ValidationError> {
        let mut others: Vec<SiteId> = followers.into_iter().collect();
        others.sort_unstable();
        let d = Deployment {
            leader: Some(leader),
            others,
        };
        d.check_distinct()?;
        Ok(d)
    }

    /// A leaderless deployment: just a set of `n` sites.
    pub fn leaderless(sites: impl IntoIterator<Item = SiteId>) -> Result<Self, ValidationError> {
        let mut others: Vec<SiteId> = sites.into_iter().collect();
        others.sort_unstable();
        let d = Deployment {
            leader: None,
            others,
        };
        d.check_distinct()?;
        Ok(d)
    }

    /// Caller guarantees `followers` is sorted and distinct from `leader`.
    pub(crate) fn from_sorted(leader: Option<SiteId>, others: Vec<SiteId>) -> Self {
        debug_assert!(others.windows(2).all(|w| w[0] < w[1]));
        Deployment { leader, others }
    }

    fn check_distinct(&self) -> Result<(), ValidationError> {
        let dup = self.others.windows(2).find(|w| w[0] == w[1]).map(|w| w[0]);
        let dup = dup.or_else(|| self.leader.filter(|l| self.others.binary_search(l).is_ok()));
        match dup {
            Some(id) => Err(ValidationError {
                issues: vec![Issue::DuplicateReplicaSite(id.0)],
            }),
            None => Ok(()),
        }
    }

    pub fn leader(&self) -> Option<SiteId> {
        self.leader
    }

    pub fn is_leaderless(&self) -> bool {
        self.leader.is_none()
    }

    /// Followers for leader-based deployments, every site for leaderless ones.
    pub fn followers(&self) -> &[SiteId] {
        &self.others
    }

    /// Number of replicas.
    pub fn n(&self) -> usize {
        self.others.len() + usize::from(self.leader.is_some())
    }

    /// Replica sites with the leader (if any) first.
    pub fn replicas(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.leader.into_iter().chain(self.others.iter().copied())
    }

    /// Canonical label `leader|f1,f2,f3` using site names. Leaderless
    /// deployments have an empty leader part: `|s1,s2,s3,s4`.
    pub fn label(&self, catalog: &SiteCatalog) -> String {
        let name = |id: SiteId| catalog.name(id).map(str::to_owned).unwrap_or(id.to_string());
        let leader = self.leader.map(name).unwrap_or_default();
        let rest: Vec<String> = self.others.iter().map(|&id| name(id)).collect();
        format!("{}|{}", leader, rest.join(","))
    }

    /// Parses the output of [`Deployment::label`].
    pub fn parse_label(label: &str, catalog: &SiteCatalog) -> Result<Self, ValidationError> {
        let (leader, rest) = label.split_once('|').ok_or_else(|| ValidationError {
            issues: vec![Issue::BadDeploymentLabel(label.to_owned())],
        })?;
        let others = parse_site_list(rest, ',', catalog)?;
        if leader.trim().is_empty() {
            Self::leaderless(others)
        } else {
            Self::leader_based(resolve_site(leader, catalog)?, others)
        }
    }

    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let map = |s: SiteId| SiteId(perm[s.0]);
        let mut others: Vec<SiteId> = self.others.iter().copied().map(map).collect();
        others.sort_unstable();
        Deployment {
            leader: self.leader.map(map),
            others,
        }
    }
}

pub(crate) fn resolve_site(name: &str, catalog: &SiteCatalog) -> Result<SiteId, ValidationError> {
    let name = name.trim();
    catalog.lookup(name).ok_or_else(|| ValidationError {
        issues: vec![Issue::UnknownSite(name.to_owned())],
    })
}

/// Resolves a `sep`-separated list of site names. An empty string is an empty list.
pub fn parse_site_list(
    list: &str,
    sep: char,
    catalog: &SiteCatalog,
) -> Result<Vec<SiteId>, ValidationError> {
    if list.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut ids = Vec::new();
    let mut issues = Vec::new();
    for name in list.split(sep) {
        match resolve_site(name, catalog) {
            Ok(id) => ids.push(id),
            Err(e) => issues.extend(e.issues),
        }
    }
    if issues.is_empty() {
        Ok(ids)
    } else {
        Err(ValidationError { issues })
    }
}

/// Client locations with multiplicities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientSet {
    entries: Vec<(SiteId, u32)>,
}

impl ClientSet {
    pub fn new(entries: Vec<(SiteId, u32)>) -> Result<Self, ValidationError> {
        let set = ClientSet { entries };
        let issues = set.issues(None);
        if issues.is_empty() {
            Ok(set)
        } else {
            Err(ValidationError { issues })
        }
    }

    /// One client at `site`.
    pub fn single(site: SiteId) -> Self {
        ClientSet {
            entries: vec![(site, 1)],
        }
    }

    /// Parses `Name:count,Name:count`; a missing count means 1.
    pub fn parse(spec: &str, catalog: &SiteCatalog) -> Result<Self, ValidationError> {
        let mut entries = Vec::new();
        let mut issues = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, count) = match part.rsplit_once(':') {
                Some((name, count)) => match count.trim().parse::<u32>() {
                    Ok(c) => (name, c),
                    Err(_) => {
                        issues.push(Issue::BadClientSpec(part.to_owned()));
                        continue;
                    }
                },
                None => (part, 1),
            };
            match resolve_site(name, catalog) {
                Ok(id) => entries.push((id, count)),
                Err(e) => issues.extend(e.issues),
            }
        }
        if !issues.is_empty() {
            return Err(ValidationError { issues });
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(SiteId, u32)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| u64::from(c)).sum()
    }

    pub fn relabeled(&self, perm: &[usize]) -> Self {
        ClientSet {
            entries: self
                .entries
                .iter()
                .map(|&(s, c)| (SiteId(perm[s.0]), c))
                .collect(),
        }
    }

    fn issues(&self, catalog_len: Option<usize>) -> Vec<Issue> {
        let mut issues = Vec::new();
        let mut seen = HashSet::new();
        for &(site, count) in &self.entries {
            if !seen.insert(site) {
                issues.push(Issue::DuplicateClientSite(site.0));
            }
            if count == 0 {
                issues.push(Issue::ZeroClientCount(site.0));
            }
            if let Some(len) = catalog_len {
                if site.0 >= len {
                    issues.push(Issue::SiteOutOfRange {
                        id: site.0,
                        size: len,
                    });
                }
            }
        }
        if self.total() == 0 {
            issues.push(Issue::NoClients);
        }
        issues
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultModel {
    /// Byzantine faults, `n >= 3f + 1`.
    #[default]
    Bft,
    /// Crash faults, `n >= 2f + 1`.
    Cft,
}

/// Which latency model to evaluate deployments with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorVariant {
    /// Full Request/Propose/Write/Accept/Response trace.
    #[default]
    #[serde(alias = "detailed")]
    ModSmartDetailed,
    /// Request leg + sum of pairwise replica delays + mean response leg.
    #[serde(alias = "simple")]
    ModSmartSimple,
}

/// How Accept arrival times are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptTiming {
    /// Accept from `r_j` leaves when `r_j` has its Write quorum.
    #[default]
    SenderBased,
    /// Accept from `r_j` to `r_i` is stamped with the receiver's own Write
    /// quorum time, as in the published closed form.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolParams {
    pub n: usize,
    pub f: usize,
    pub fault_model: FaultModel,
    pub variant: EstimatorVariant,
    pub accept_timing: AcceptTiming,
}

impl ProtocolParams {
    /// BFT parameters with the detailed estimator and sender-based accepts.
    pub fn bft(n: usize, f: usize) -> Self {
        ProtocolParams {
            n,
            f,
            fault_model: FaultModel::Bft,
            variant: EstimatorVariant::default(),
            accept_timing: AcceptTiming::default(),
        }
    }

    pub fn with_variant(mut self, variant: EstimatorVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_accept_timing(mut self, timing: AcceptTiming) -> Self {
        self.accept_timing = timing;
        self
    }

    pub fn with_fault_model(mut self, model: FaultModel) -> Self {
        self.fault_model = model;
        self
    }

    /// Matching messages needed to advance a phase: `ceil((n + 1) / 2)`.
    pub fn quorum(&self) -> usize {
        (self.n + 2) / 2
    }

    /// Matching responses a client waits for.
    pub fn reply_quorum(&self) -> usize {
        self.f + 1
    }

    fn issues(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        if self.f < 1 {
            issues.push(Issue::FaultBoundTooSmall);
        }
        let min_n = match self.fault_model {
            FaultModel::Bft => 3 * self.f + 1,
            FaultModel::Cft => 2 * self.f + 1,
        };
        if self.n < min_n {
            issues.push(Issue::TooFewReplicas {
                n: self.n,
                f: self.f,
                model: self.fault_model,
                min: min_n,
            });
        }
        issues
    }
}

/// A single invariant violation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Issue {
    #[error("site at position {position} has id {id}")]
    SiteIdMismatch { position: usize, id: usize },
    #[error("site at position {position} has an empty name")]
    EmptySiteName { position: usize },
    #[error("duplicate site name {0:?}")]
    DuplicateSiteName(String),
    #[error("unknown site {0:?}")]
    UnknownSite(String),
    #[error("site id {id} out of range for {size} sites")]
    SiteOutOfRange { id: usize, size: usize },
    #[error("matrix row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("matrix has {matrix} sites but the catalog has {catalog}")]
    MatrixCatalogMismatch { matrix: usize, catalog: usize },
    #[error("diagonal entry ({site}, {site}) is {value}, expected 0")]
    NonZeroDiagonal { site: usize, value: f64 },
    #[error("RTT ({a}, {b}) = {value} is not finite and positive")]
    InvalidRtt { a: usize, b: usize, value: f64 },
    #[error("RTT ({a}, {b}) = {forward} but ({b}, {a}) = {backward}")]
    Asymmetric {
        a: usize,
        b: usize,
        forward: f64,
        backward: f64,
    },
    #[error("site {0} appears more than once in the deployment")]
    DuplicateReplicaSite(usize),
    #[error("malformed deployment label {0:?}")]
    BadDeploymentLabel(String),
    #[error("client site {0} listed more than once")]
    DuplicateClientSite(usize),
    #[error("client site {0} has count 0")]
    ZeroClientCount(usize),
    #[error("malformed client entry {0:?}")]
    BadClientSpec(String),
    #[error("client set is empty")]
    NoClients,
    #[error("fault bound f must be at least 1")]
    FaultBoundTooSmall,
    #[error("n = {n} is below {min} required for f = {f} ({model:?})")]
    TooFewReplicas {
        n: usize,
        f: usize,
        model: FaultModel,
        min: usize,
    },
    #[error("n = {n} exceeds the {sites} available sites")]
    MoreReplicasThanSites { n: usize, sites: usize },
    #[error("replica count must be at least 1")]
    NoReplicas,
}

/// One or more invariant violations, collected without stopping at the first.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationError {
    pub issues: Vec<Issue>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        f.write_str(&msgs.join("; "))
    }
}

impl From<Issue> for ValidationError {
    fn from(issue: Issue) -> Self {
        ValidationError {
            issues: vec![issue],
        }
    }
}

/// Checks every input invariant at once and reports all violations.
pub fn validate_inputs(
    catalog: &SiteCatalog,
    matrix: &RttMatrix,
    clients: &ClientSet,
    params: &ProtocolParams,
) -> Result<(), ValidationError> {
    let mut issues = catalog.issues();
    if matrix.size() != catalog.len() {
        issues.push(Issue::MatrixCatalogMismatch {
            matrix: matrix.size(),
            catalog: catalog.len(),
        });
    }
    issues.extend(matrix.issues(false));
    issues.extend(clients.issues(Some(catalog.len())));
    issues.extend(params.issues());
    if params.n > catalog.len() {
        issues.push(Issue::MoreReplicasThanSites {
            n: params.n,
            sites: catalog.len(),
        });
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(ValidationError { issues })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog(n: usize) -> SiteCatalog {
        SiteCatalog::from_names((0..n).map(|i| format!("s{i}"))).unwrap()
    }

    #[test]
    fn link_delay_halves_rtt() {
        let m = RttMatrix::new(vec![vec![0.0, 180.3], vec![180.3, 0.0]]).unwrap();
        assert_eq!(m.link_delay(SiteId(0), SiteId(1)).unwrap(), 90.15);
        assert_eq!(m.link_delay(SiteId(1), SiteId(1)).unwrap(), 0.0);
        let m = RttMatrix::uniform(2, 1.0);
        assert_eq!(m.link_delay(SiteId(1), SiteId(0)).unwrap(), 0.5);
        assert!(m.link_delay(SiteId(2), SiteId(0)).is_err());
    }

    #[test]
    fn fifteen_sites_n4_f1_is_valid() {
        let c = catalog(15);
        let m = RttMatrix::uniform(15, 50.0);
        let clients = ClientSet::single(SiteId(3));
        validate_inputs(&c, &m, &clients, &ProtocolParams::bft(4, 1)).unwrap();
    }

    #[test]
    fn n4_f2_violates_bft_bound() {
        let c = catalog(15);
        let m = RttMatrix::uniform(15, 50.0);
        let clients = ClientSet::single(SiteId(0));
        let err = validate_inputs(&c, &m, &clients, &ProtocolParams::bft(4, 2)).unwrap_err();
        assert!(matches!(
            err.issues[..],
            [Issue::TooFewReplicas { n: 4, f: 2, min: 7, .. }]
        ));
        // Crash-fault bound accepts n = 5, f = 2.
        let cft = ProtocolParams::bft(5, 2).with_fault_model(FaultModel::Cft);
        validate_inputs(&c, &m, &clients, &cft).unwrap();
    }

    #[test]
    fn asymmetry_names_both_indices() {
        let c = catalog(3);
        let m = RttMatrix::from_rows_unchecked(vec![
            vec![0.0, 10.0, 20.0],
            vec![10.0, 0.0, 30.0],
            vec![20.0, 31.0, 0.0],
        ])
        .unwrap();
        let err =
            validate_inputs(&c, &m, &ClientSet::single(SiteId(0)), &ProtocolParams::bft(3, 1))
                .unwrap_err();
        // n = 3 < 4 is reported too: validation never stops early.
        assert_eq!(err.issues.len(), 2);
        assert!(err
            .issues
            .iter()
            .any(|i| matches!(i, Issue::Asymmetric { a: 1, b: 2, .. })));
        assert!(err.to_string().contains("(1, 2)"));
    }

    #[test]
    fn collects_every_violation() {
        let c = catalog(2);
        let m = RttMatrix::from_rows_unchecked(vec![vec![1.0, -3.0], vec![-3.0, 0.0]]).unwrap();
        let clients = ClientSet {
            entries: vec![(SiteId(5), 0)],
        };
        let err = validate_inputs(&c, &m, &clients, &ProtocolParams::bft(4, 0)).unwrap_err();
        let has = |pred: fn(&Issue) -> bool| err.issues.iter().any(pred);
        assert!(has(|i| matches!(i, Issue::NonZeroDiagonal { site: 0, .. })));
        assert!(has(|i| matches!(i, Issue::InvalidRtt { .. })));
        assert!(has(|i| matches!(i, Issue::ZeroClientCount(5))));
        assert!(has(|i| matches!(i, Issue::SiteOutOfRange { id: 5, .. })));
        assert!(has(|i| matches!(i, Issue::NoClients)));
        assert!(has(|i| matches!(i, Issue::FaultBoundTooSmall)));
        assert!(has(|i| matches!(i, Issue::MoreReplicasThanSites { .. })));
    }

    #[test]
    fn matrix_new_rejects_and_symmetrizes() {
        assert!(RttMatrix::new(vec![vec![0.0, 100.0], vec![90.0, 0.0]]).is_err());
        assert!(RttMatrix::new(vec![vec![0.0, 100.0]]).is_err());
        let tiny = 100.0 * (1.0 + 1e-12);
        let m = RttMatrix::new(vec![vec![0.0, 100.0], vec![tiny, 0.0]]).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
    }

    #[test]
    fn catalog_rejects_duplicates_and_empty_names() {
        let err = SiteCatalog::from_names(["a", "b", "a", " "]).unwrap_err();
        assert_eq!(err.issues.len(), 2);
    }

    #[test]
    fn deployment_is_canonical() {
        let a = Deployment::leader_based(SiteId(2), [SiteId(7), SiteId(1), SiteId(4)]).unwrap();
        let b = Deployment::leader_based(SiteId(2), [SiteId(4), SiteId(7), SiteId(1)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.followers(), &[SiteId(1), SiteId(4), SiteId(7)]);
        assert_eq!(a.n(), 4);
        assert!(Deployment::leader_based(SiteId(2), [SiteId(2), SiteId(1)]).is_err());
        assert!(Deployment::leaderless([SiteId(1), SiteId(1)]).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let c = SiteCatalog::from_names(["Tokyo", "Ireland", "Sydney", "Oregon"]).unwrap();
        let d = Deployment::leader_based(SiteId(0), [SiteId(3), SiteId(1), SiteId(2)]).unwrap();
        assert_eq!(d.label(&c), "Tokyo|Ireland,Sydney,Oregon");
        assert_eq!(Deployment::parse_label(&d.label(&c), &c).unwrap(), d);
        let l = Deployment::leaderless([SiteId(3), SiteId(0)]).unwrap();
        assert_eq!(l.label(&c), "|Tokyo,Oregon");
        assert_eq!(Deployment::parse_label("|Oregon,Tokyo", &c).unwrap(), l);
        assert!(Deployment::parse_label("Tokyo", &c).is_err());
        assert!(Deployment::parse_label("Paris|Tokyo", &c).is_err());
    }

    #[test]
    fn client_spec_parsing() {
        let c = SiteCatalog::from_names(["Ireland", "Sydney", "NVirginia"]).unwrap();
        let set = ClientSet::parse("Ireland:10,Sydney:3,NVirginia:5", &c).unwrap();
        assert_eq!(set.total(), 18);
        assert_eq!(set.entries()[1], (SiteId(1), 3));
        assert_eq!(ClientSet::parse("Sydney", &c).unwrap().total(), 1);
        assert!(ClientSet::parse("Ireland:x", &c).is_err());
        assert!(ClientSet::parse("Ireland:0", &c).is_err());
        assert!(ClientSet::parse("Ireland,Ireland", &c).is_err());
        assert!(ClientSet::parse("", &c).is_err());
    }

    #[test]
    fn quorum_sizes() {
        let q = |n| ProtocolParams::bft(n, 1).quorum();
        assert_eq!(q(4), 3);
        assert_eq!(q(5), 3);
        assert_eq!(q(7), 4);
        assert_eq!(q(13), 7);
        assert_eq!(ProtocolParams::bft(7, 2).reply_quorum(), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn symmetric_matrix() -> impl Strategy<Value = RttMatrix> {
            (2usize..8).prop_flat_map(|n| {
                proptest::collection::vec(1.0f64..300.0, n * n).prop_map(move |raw| {
                    let mut m = RttMatrix::uniform(n, 1.0);
                    for a in 0..n {
                        for b in (a + 1)..n {
                            m.set_symmetric(a, b, raw[a * n + b]);
                        }
                    }
                    m
                })
            })
        }

        proptest! {
            #[test]
            fn link_delay_symmetric_zero_diagonal(m in symmetric_matrix()) {
                for a in 0..m.size() {
                    prop_assert_eq!(m.link_delay(SiteId(a), SiteId(a)).unwrap(), 0.0);
                    for b in 0..m.size() {
                        prop_assert_eq!(
                            m.link_delay(SiteId(a), SiteId(b)).unwrap(),
                            m.link_delay(SiteId(b), SiteId(a)).unwrap()
                        );
                    }
                }
            }

            #[test]
            fn follower_permutation_is_irrelevant(
                followers in proptest::sample::subsequence((1usize..20).collect::<Vec<_>>(), 3),
                shuffle in any::<proptest::sample::Index>(),
            ) {
                let c = SiteCatalog::from_names((0..20).map(|i| format!("s{i}"))).unwrap();
                let ids: Vec<SiteId> = followers.iter().copied().map(SiteId).collect();
                let mut rotated = ids.clone();
                rotated.rotate_left(shuffle.index(ids.len()));
                rotated.reverse();
                let a = Deployment::leader_based(SiteId(0), ids).unwrap();
                let b = Deployment::leader_based(SiteId(0), rotated).unwrap();
                prop_assert_eq!(a.label(&c), b.label(&c));
                prop_assert_eq!(a, b);
            }
        }
    }
}
