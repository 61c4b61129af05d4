//! Candidate deployment enumeration.
//!
//! Deployments are generated lazily in canonical order (ascending leader,
//! then lexicographic follower set). Every deployment can also be computed
//! directly from its index, so the stream splits into disjoint ranges for
//! parallel evaluation.

use std::ops::Range;

use crate::model::{Deployment, Issue, SiteCatalog, SiteId, ValidationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// One leader plus `n - 1` followers; the leader's site matters.
    #[default]
    LeaderBased,
    /// A plain set of `n` sites.
    Leaderless,
}

/// The set of all deployments of `n` replicas over the allowed sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeploymentSpace {
    allowed: Vec<SiteId>,
    n: usize,
    mode: Mode,
}

impl DeploymentSpace {
    /// `allowed` may be given in any order; duplicates are rejected.
    pub fn new(
        catalog: &SiteCatalog,
        allowed: impl IntoIterator<Item = SiteId>,
        n: usize,
        mode: Mode,
    ) -> Result<Self, ValidationError> {
        let mut allowed: Vec<SiteId> = allowed.into_iter().collect();
        allowed.sort_unstable();
        let mut issues = Vec::new();
        for w in allowed.windows(2) {
            if w[0] == w[1] {
                issues.push(Issue::DuplicateReplicaSite(w[0].0));
            }
        }
        for &id in &allowed {
            if !catalog.contains(id) {
                issues.push(Issue::SiteOutOfRange {
                    id: id.0,
                    size: catalog.len(),
                });
            }
        }
        if n == 0 {
            issues.push(Issue::NoReplicas);
        }
        if allowed.len() < n {
            issues.push(Issue::MoreReplicasThanSites {
                n,
                sites: allowed.len(),
            });
        }
        if !issues.is_empty() {
            return Err(ValidationError { issues });
        }
        Ok(DeploymentSpace { allowed, n, mode })
    }

    /// Every site of the catalog is a candidate.
    pub fn all_sites(catalog: &SiteCatalog, n: usize, mode: Mode) -> Result<Self, ValidationError> {
        Self::new(catalog, catalog.ids(), n, mode)
    }

    pub fn allowed(&self) -> &[SiteId] {
        &self.allowed
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of deployments: `|SC| * C(|SC| - 1, n - 1)` with a leader,
    /// `C(|SC|, n)` without.
    pub fn count(&self) -> u128 {
        let m = self.allowed.len();
        match self.mode {
            Mode::LeaderBased => m as u128 * binomial(m - 1, self.n - 1),
            Mode::Leaderless => binomial(m, self.n),
        }
    }

    /// The deployment at position `index` of the canonical order.
    pub fn nth(&self, index: u128) -> Option<Deployment> {
        if index >= self.count() {
            return None;
        }
        let cursor = Cursor::at(self, index);
        Some(cursor.deployment(self))
    }

    pub fn iter(&self) -> Deployments<'_> {
        Deployments {
            space: self,
            cursor: Some(Cursor::at(self, 0)),
            remaining: self.count(),
        }
    }

    /// Deployments with canonical index in `range`.
    pub fn range(&self, range: Range<u128>) -> Deployments<'_> {
        let end = range.end.min(self.count());
        let start = range.start.min(end);
        Deployments {
            space: self,
            cursor: (start < end).then(|| Cursor::at(self, start)),
            remaining: end - start,
        }
    }

    fn pool_len(&self) -> usize {
        match self.mode {
            Mode::LeaderBased => self.allowed.len() - 1,
            Mode::Leaderless => self.allowed.len(),
        }
    }

    fn combo_len(&self) -> usize {
        match self.mode {
            Mode::LeaderBased => self.n - 1,
            Mode::Leaderless => self.n,
        }
    }
}

impl<'a> IntoIterator for &'a DeploymentSpace {
    type Item = Deployment;
    type IntoIter = Deployments<'a>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

/// `C(n, k)`, exact.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Position in the canonical order: a leader slot plus a combination of
/// indices into the leader's follower pool.
#[derive(Debug, Clone)]
struct Cursor {
    leader: usize,
    combo: Vec<usize>,
}

impl Cursor {
    fn at(space: &DeploymentSpace, index: u128) -> Self {
        let pool = space.pool_len();
        let k = space.combo_len();
        let (leader, mut rank) = match space.mode {
            Mode::LeaderBased => {
                let per_leader = binomial(pool, k);
                ((index / per_leader) as usize, index % per_leader)
            }
            Mode::Leaderless => (0, index),
        };
        let mut combo = Vec::with_capacity(k);
        let mut next = 0;
        for pos in 0..k {
            loop {
                let skipped = binomial(pool - next - 1, k - pos - 1);
                if rank < skipped {
                    break;
                }
                rank -= skipped;
                next += 1;
            }
            combo.push(next);
            next += 1;
        }
        Cursor { leader, combo }
    }

    fn deployment(&self, space: &DeploymentSpace) -> Deployment {
        match space.mode {
            Mode::LeaderBased => {
                let skip = self.leader;
                let followers = self
                    .combo
                    .iter()
                    .map(|&j| space.allowed[j + usize::from(j >= skip)])
                    .collect();
                Deployment::from_sorted(Some(space.allowed[self.leader]), followers)
            }
            Mode::Leaderless => {
                let sites = self.combo.iter().map(|&j| space.allowed[j]).collect();
                Deployment::from_sorted(None, sites)
            }
        }
    }

    /// Moves to the next position; false once past the end.
    fn advance(&mut self, space: &DeploymentSpace) -> bool {
        let pool = space.pool_len();
        let k = self.combo.len();
        if let Some(i) = (0..k).rev().find(|&i| self.combo[i] < pool - k + i) {
            self.combo[i] += 1;
            for j in (i + 1)..k {
                self.combo[j] = self.combo[j - 1] + 1;
            }
            return true;
        }
        if space.mode == Mode::Leaderless || self.leader + 1 >= space.allowed.len() {
            return false;
        }
        self.leader += 1;
        for (j, c) in self.combo.iter_mut().enumerate() {
            *c = j;
        }
        true
    }
}

/// Lazy stream of deployments in canonical order.
#[derive(Debug, Clone)]
pub struct Deployments<'a> {
    space: &'a DeploymentSpace,
    cursor: Option<Cursor>,
    remaining: u128,
}

impl Iterator for Deployments<'_> {
    type Item = Deployment;

    fn next(&mut self) -> Option<Deployment> {
        if self.remaining == 0 {
            return None;
        }
        let cursor = self.cursor.as_mut()?;
        let out = cursor.deployment(self.space);
        self.remaining -= 1;
        if self.remaining > 0 && !cursor.advance(self.space) {
            self.remaining = 0;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        match usize::try_from(self.remaining) {
            Ok(n) => (n, Some(n)),
            Err(_) => (usize::MAX, None),
        }
    }
}
