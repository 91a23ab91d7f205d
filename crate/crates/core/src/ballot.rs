// Copyright 2026 The stv-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Candidates, ballots and elections.
//!
//! Ballots are stored aggregated: each distinct ranking appears once with a
//! multiplicity. Every bound and assertion in this crate is linear in those
//! multiplicities, so nothing is lost by not keeping individual records.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Dense candidate index, `0..num_candidates`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateId(pub u32);

impl CandidateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A set of candidates, stored as a bitset.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CandidateSet {
    // Invariant: no trailing zero words, so derived equality is set equality.
    words: SmallVec<[u64; 2]>,
}

impl CandidateSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// The set `{0, 1, ..., n-1}`.
    pub fn all(n: usize) -> Self {
        (0..n as u32).map(CandidateId).collect()
    }

    #[inline]
    pub fn contains(&self, c: CandidateId) -> bool {
        let (w, b) = (c.index() / 64, c.index() % 64);
        self.words.get(w).is_some_and(|word| word & (1 << b) != 0)
    }

    pub fn insert(&mut self, c: CandidateId) -> bool {
        let (w, b) = (c.index() / 64, c.index() % 64);
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    pub fn remove(&mut self, c: CandidateId) -> bool {
        let (w, b) = (c.index() / 64, c.index() % 64);
        let Some(word) = self.words.get_mut(w) else {
            return false;
        };
        let present = *word & (1 << b) != 0;
        *word &= !(1 << b);
        self.trim();
        present
    }

    /// Copy of the set without `c`.
    pub fn without(&self, c: CandidateId) -> Self {
        let mut s = self.clone();
        s.remove(c);
        s
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = CandidateId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            (0..64u32)
                .filter(move |b| word & (1 << b) != 0)
                .map(move |b| CandidateId(wi as u32 * 64 + b))
        })
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    fn zip_with(&self, other: &Self, op: impl Fn(u64, u64) -> u64) -> Self {
        let n = self.words.len().max(other.words.len());
        let mut words = SmallVec::with_capacity(n);
        for i in 0..n {
            let a = self.words.get(i).copied().unwrap_or(0);
            let b = other.words.get(i).copied().unwrap_or(0);
            words.push(op(a, b));
        }
        let mut s = Self { words };
        s.trim();
        s
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }
}

impl FromIterator<CandidateId> for CandidateSet {
    fn from_iter<T: IntoIterator<Item = CandidateId>>(iter: T) -> Self {
        let mut s = Self::new();
        for c in iter {
            s.insert(c);
        }
        s
    }
}

impl<'a> FromIterator<&'a CandidateId> for CandidateSet {
    fn from_iter<T: IntoIterator<Item = &'a CandidateId>>(iter: T) -> Self {
        iter.into_iter().copied().collect()
    }
}

impl fmt::Debug for CandidateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|c| c.0)).finish()
    }
}

/// A preference sequence, most preferred first. Never contains duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ballot(Vec<CandidateId>);

impl Ballot {
    pub fn new(prefs: Vec<CandidateId>) -> Result<Self> {
        let mut seen = CandidateSet::new();
        for &c in &prefs {
            if !seen.insert(c) {
                return Err(Error::invalid(format!("candidate {c} ranked twice")));
            }
        }
        Ok(Ballot(prefs))
    }

    /// Convenience for tests and examples; panics on duplicates.
    pub fn from_ids(ids: &[u32]) -> Self {
        Self::new(ids.iter().map(|&i| CandidateId(i)).collect()).expect("duplicate candidate")
    }

    pub fn empty() -> Self {
        Ballot(Vec::new())
    }

    pub fn prefs(&self) -> &[CandidateId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<CandidateId> {
        self.0.first().copied()
    }

    pub fn contains(&self, c: CandidateId) -> bool {
        self.0.contains(&c)
    }

    pub fn position(&self, c: CandidateId) -> Option<usize> {
        self.0.iter().position(|&x| x == c)
    }

    /// `first(project(self, {a, b})) == a`: `a` is ranked, and either `b` is
    /// not ranked or is ranked below `a`.
    pub fn prefers(&self, a: CandidateId, b: CandidateId) -> bool {
        for &c in &self.0 {
            if c == a {
                return true;
            }
            if c == b {
                return false;
            }
        }
        false
    }

    /// First preference among the candidates in `keep`.
    pub fn first_in(&self, keep: &CandidateSet) -> Option<CandidateId> {
        self.0.iter().copied().find(|&c| keep.contains(c))
    }

    /// First preference ignoring the candidates in `skip`.
    pub fn first_outside(&self, skip: &CandidateSet) -> Option<CandidateId> {
        self.0.iter().copied().find(|&c| !skip.contains(c))
    }
}

/// The largest subsequence of `ballot` made of members of `keep`, in ballot
/// order.
pub fn project(ballot: &Ballot, keep: &CandidateSet) -> Ballot {
    Ballot(ballot.0.iter().copied().filter(|&c| keep.contains(c)).collect())
}

/// `floor(total / (seats + 1)) + 1`.
pub fn droop_quota(total_ballots: u64, seats: u32) -> Result<u64> {
    if seats == 0 {
        return Err(Error::invalid("seats must be at least 1"));
    }
    Ok(total_ballots / (u64::from(seats) + 1) + 1)
}

/// One distinct ranking and the number of ballots cast with it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BallotGroup {
    pub ballot: Ballot,
    pub count: u64,
}

/// Candidates, aggregated ballots, seats and the Droop quota.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Election {
    names: Vec<String>,
    groups: Vec<BallotGroup>,
    seats: u32,
    total: u64,
    quota: u64,
}

impl Election {
    /// Builds an election, merging repeated rankings (first occurrence keeps
    /// its position) and computing the quota.
    pub fn new(
        names: Vec<String>,
        ballots: impl IntoIterator<Item = (Ballot, u64)>,
        seats: u32,
    ) -> Result<Self> {
        if seats == 0 {
            return Err(Error::invalid("seats must be at least 1"));
        }
        let mut seen_names = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::invalid(format!("candidate {i} has an empty name")));
            }
            if seen_names.insert(name.as_str(), i).is_some() {
                return Err(Error::invalid(format!("duplicate candidate name {name:?}")));
            }
        }
        if names.len() < seats as usize {
            return Err(Error::invalid(format!(
                "{} candidates cannot fill {seats} seats",
                names.len()
            )));
        }
        let mut index: HashMap<Ballot, usize> = HashMap::new();
        let mut groups: Vec<BallotGroup> = Vec::new();
        for (ballot, count) in ballots {
            if count == 0 {
                return Err(Error::invalid("ballot counts must be positive"));
            }
            if let Some(c) = ballot.prefs().iter().find(|c| c.index() >= names.len()) {
                return Err(Error::invalid(format!("unknown candidate {c}")));
            }
            match index.get(&ballot) {
                Some(&i) => groups[i].count += count,
                None => {
                    index.insert(ballot.clone(), groups.len());
                    groups.push(BallotGroup { ballot, count });
                }
            }
        }
        let total: u64 = groups.iter().map(|g| g.count).sum();
        if total == 0 {
            return Err(Error::invalid("an election needs at least one ballot"));
        }
        let quota = droop_quota(total, seats)?;
        Ok(Election {
            names,
            groups,
            seats,
            total,
            quota,
        })
    }

    /// Candidates named `c1, c2, ...` (ids 0, 1, ...). Handy for tests.
    pub fn with_numbered_candidates(
        num_candidates: usize,
        ballots: impl IntoIterator<Item = (Ballot, u64)>,
        seats: u32,
    ) -> Result<Self> {
        let names = (1..=num_candidates).map(|i| format!("c{i}")).collect();
        Self::new(names, ballots, seats)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, c: CandidateId) -> &str {
        &self.names[c.index()]
    }

    pub fn candidate(&self, name: &str) -> Option<CandidateId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| CandidateId(i as u32))
    }

    pub fn num_candidates(&self) -> usize {
        self.names.len()
    }

    pub fn candidates(&self) -> impl Iterator<Item = CandidateId> + Clone {
        (0..self.names.len() as u32).map(CandidateId)
    }

    pub fn candidate_set(&self) -> CandidateSet {
        CandidateSet::all(self.names.len())
    }

    pub fn groups(&self) -> &[BallotGroup] {
        &self.groups
    }

    pub fn seats(&self) -> u32 {
        self.seats
    }

    /// Number of ballots cast, empty ballots included.
    pub fn total_ballots(&self) -> u64 {
        self.total
    }

    pub fn quota(&self) -> u64 {
        self.quota
    }

    pub fn empty_ballots(&self) -> u64 {
        self.groups
            .iter()
            .filter(|g| g.ballot.is_empty())
            .map(|g| g.count)
            .sum()
    }

    /// The same election with empty ballots dropped, which lowers the quota
    /// when there were any.
    pub fn without_empty_ballots(&self) -> Result<Self> {
        Self::new(
            self.names.clone(),
            self.groups
                .iter()
                .filter(|g| !g.ballot.is_empty())
                .map(|g| (g.ballot.clone(), g.count)),
            self.seats,
        )
    }

    pub(crate) fn check_candidate(&self, c: CandidateId) -> Result<()> {
        if c.index() < self.names.len() {
            Ok(())
        } else {
            Err(Error::invalid(format!("unknown candidate {c}")))
        }
    }

    /// Expands the aggregated groups into one ballot per voter, in group
    /// order. Ballot `i` of the result is the ballot with id `i`.
    pub fn expand(&self) -> Vec<Ballot> {
        self.groups
            .iter()
            .flat_map(|g| std::iter::repeat_n(g.ballot.clone(), g.count as usize))
            .collect()
    }
}
