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

//! Lower and upper bounds on candidate tallies.
//!
//! Each bound is a sum over ballots of a per-ballot contribution; the
//! per-ballot forms are public because assorters are built from them.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::ballot::{Ballot, CandidateId, CandidateSet, Election};
use crate::error::{Error, Result};
use crate::rational::{int, to_small, Rational};
use crate::tabulator::max_transfer_value;

/// Upper bounds on the transfer values of a set of assumed winners. The key
/// set is the winner set `W` itself.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransferCaps(BTreeMap<CandidateId, Rational>);

impl TransferCaps {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(winner: CandidateId, cap: Rational) -> Self {
        let mut m = BTreeMap::new();
        m.insert(winner, cap);
        TransferCaps(m)
    }

    pub fn insert(&mut self, winner: CandidateId, cap: Rational) {
        self.0.insert(winner, cap);
    }

    pub fn get(&self, winner: CandidateId) -> Option<&Rational> {
        self.0.get(&winner)
    }

    pub fn winners(&self) -> CandidateSet {
        self.0.keys().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CandidateId, &Rational)> {
        self.0.iter().map(|(c, v)| (*c, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks every cap lies in `[0, S/(S+1)]`.
    pub fn validate(&self, seats: u32) -> Result<()> {
        let s = i128::from(seats);
        for (c, v) in self.iter() {
            let above = match to_small(v) {
                Some(x) => x
                    .numer()
                    .checked_mul(s + 1)
                    .zip(x.denom().checked_mul(s))
                    .map_or_else(|| *v > max_transfer_value(seats), |(a, b)| a > b),
                None => *v > max_transfer_value(seats),
            };
            if v.is_negative() || above {
                return Err(Error::invalid(format!(
                    "transfer cap {v} for {c} outside [0, {}]",
                    max_transfer_value(seats)
                )));
            }
        }
        Ok(())
    }
}

impl FromIterator<(CandidateId, Rational)> for TransferCaps {
    fn from_iter<T: IntoIterator<Item = (CandidateId, Rational)>>(iter: T) -> Self {
        TransferCaps(iter.into_iter().collect())
    }
}

/// Per-ballot contribution to [`upper_complex`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComplexScore {
    Zero,
    /// The ballot starts with a member of `W`; it is worth at most the cap
    /// of the given winner (the largest cap among `W` members ranked
    /// above `c`).
    Capped(CandidateId),
    Full,
}

impl ComplexScore {
    pub fn value(self, caps: &TransferCaps) -> Rational {
        match self {
            ComplexScore::Zero => Rational::zero(),
            ComplexScore::Capped(w) => caps.get(w).cloned().expect("cap for W member"),
            ComplexScore::Full => int(1),
        }
    }
}

/// Does `ballot` count towards `lower_basic(c)`?
#[inline]
pub fn counts_first(ballot: &Ballot, c: CandidateId) -> bool {
    ballot.first() == Some(c)
}

/// Does `ballot` count towards `lower_elim(w, excluded)`?
#[inline]
pub fn counts_elim(ballot: &Ballot, w: CandidateId, excluded: &CandidateSet) -> bool {
    ballot.first_outside(excluded) == Some(w)
}

/// The case analysis behind [`upper_complex`] for a single ballot. `g_rest`
/// must already be `G - W`.
pub fn complex_score(
    ballot: &Ballot,
    c: CandidateId,
    b: CandidateId,
    caps: &TransferCaps,
    g_rest: &CandidateSet,
) -> ComplexScore {
    let mut best: Option<(CandidateId, &Rational)> = None;
    for &x in ballot.prefs() {
        if x == c {
            let first = ballot.first().expect("non-empty");
            if caps.get(first).is_none() {
                return ComplexScore::Full;
            }
            let (w, _) = best.expect("first preference is a W member ranked above c");
            return ComplexScore::Capped(w);
        }
        if x == b || g_rest.contains(x) {
            return ComplexScore::Zero;
        }
        if let Some(cap) = caps.get(x) {
            if best.is_none_or(|(_, v)| cap > v) {
                best = Some((x, cap));
            }
        }
    }
    ComplexScore::Zero
}

/// First-preference count of `c`.
pub fn lower_basic(election: &Election, c: CandidateId) -> u64 {
    election
        .groups()
        .iter()
        .filter(|g| counts_first(&g.ballot, c))
        .map(|g| g.count)
        .sum()
}

/// Number of ballots mentioning `c` anywhere.
pub fn upper_basic(election: &Election, c: CandidateId) -> u64 {
    election
        .groups()
        .iter()
        .filter(|g| g.ballot.contains(c))
        .map(|g| g.count)
        .sum()
}

/// Ballots on which `c` is ranked above `other` (or `other` is unranked).
pub fn upper_comp(election: &Election, c: CandidateId, other: CandidateId) -> u64 {
    election
        .groups()
        .iter()
        .filter(|g| g.ballot.prefers(c, other))
        .map(|g| g.count)
        .sum()
}

/// Ballots whose first preference, once `excluded` is struck out, is `w`.
///
/// Only a lower bound on `w`'s tally at a point where it could be eliminated
/// if `w` always beats every member of `excluded`; establishing that is the
/// caller's job.
pub fn lower_elim(election: &Election, w: CandidateId, excluded: &CandidateSet) -> u64 {
    election
        .groups()
        .iter()
        .filter(|g| counts_elim(&g.ballot, w, excluded))
        .map(|g| g.count)
        .sum()
}

/// Upper bound on the tally of `c` while `b` is still eligible, assuming the
/// members of `W` (the keys of `caps`) are all seated with transfer values at
/// most their caps, nobody outside `W ∪ {b, c}` is seated, and every member
/// of `g` always beats `c`.
pub fn upper_complex(
    election: &Election,
    c: CandidateId,
    b: CandidateId,
    caps: &TransferCaps,
    g: &CandidateSet,
) -> Result<Rational> {
    election.check_candidate(c)?;
    election.check_candidate(b)?;
    if b == c {
        return Err(Error::invalid("upper_complex needs two distinct candidates"));
    }
    if caps.get(c).is_some() || caps.get(b).is_some() {
        return Err(Error::invalid("upper_complex: candidates must lie outside W"));
    }
    for (w, _) in caps.iter() {
        election.check_candidate(w)?;
    }
    Ok(upper_complex_unchecked(election, c, b, caps, g))
}

pub(crate) fn upper_complex_unchecked(
    election: &Election,
    c: CandidateId,
    b: CandidateId,
    caps: &TransferCaps,
    g: &CandidateSet,
) -> Rational {
    let (full, capped) = complex_counts(election, c, b, caps, g);
    let mut total = int(full);
    for (w, n) in capped {
        total += caps.get(w).expect("cap present") * int(n);
    }
    total
}

/// Ballot counts behind [`upper_complex`]: those worth a full vote, and
/// those worth at most the cap of each listed winner.
pub(crate) fn complex_counts(
    election: &Election,
    c: CandidateId,
    b: CandidateId,
    caps: &TransferCaps,
    g: &CandidateSet,
) -> (u64, Vec<(CandidateId, u64)>) {
    let g_rest = g.difference(&caps.winners());
    let mut full = 0u64;
    let mut capped: Vec<(CandidateId, u64)> = Vec::new();
    for grp in election.groups() {
        match complex_score(&grp.ballot, c, b, caps, &g_rest) {
            ComplexScore::Zero => {}
            ComplexScore::Full => full += grp.count,
            ComplexScore::Capped(w) => match capped.iter_mut().find(|(x, _)| *x == w) {
                Some((_, n)) => *n += grp.count,
                None => capped.push((w, grp.count)),
            },
        }
    }
    (full, capped)
}
