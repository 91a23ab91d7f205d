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

//! STV counting with unweighted Gregory surplus transfers.
//!
//! All values are exact rationals. A round records the tallies of the
//! candidates still eligible at its start and the actions taken in it.
//! Elimination ties go to the lowest candidate id and set
//! [`TabulationRecord::tie_occurred`]. When several candidates reach the
//! quota in the same round they are all seated, and their surpluses are
//! distributed largest tally first.

use num_traits::Zero;

use crate::ballot::{CandidateId, CandidateSet, Election};
use crate::rational::{int, ratio, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum ActionKind {
    ElectOnQuota,
    Eliminate,
    ElectRemaining,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundAction {
    pub kind: ActionKind,
    pub candidate: CandidateId,
    /// `(V - Q) / |pile|`; present only for [`ActionKind::ElectOnQuota`].
    pub transfer_value: Option<Rational>,
    /// `V - Q`.
    pub surplus: Option<Rational>,
    /// Number of ballots in the pile when seated.
    pub pile_size: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    /// Tallies of every candidate eligible at the start of the round, by id.
    pub tallies: Vec<(CandidateId, Rational)>,
    pub actions: Vec<RoundAction>,
    /// Cumulative exhausted value at the start of the round.
    pub exhausted: Rational,
}

impl Round {
    pub fn tally(&self, c: CandidateId) -> Option<&Rational> {
        self.tallies.iter().find(|(x, _)| *x == c).map(|(_, t)| t)
    }

    pub fn eligible(&self) -> CandidateSet {
        self.tallies.iter().map(|(c, _)| *c).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TabulationRecord {
    pub rounds: Vec<Round>,
    /// Winners in the order they were seated.
    pub winners: Vec<CandidateId>,
    pub exhausted_value: Rational,
    pub tie_occurred: bool,
    pub quota: u64,
    pub total_ballots: u64,
}

impl TabulationRecord {
    pub fn winner_set(&self) -> CandidateSet {
        self.winners.iter().collect()
    }

    pub fn actions(&self) -> impl Iterator<Item = &RoundAction> {
        self.rounds.iter().flat_map(|r| r.actions.iter())
    }

    /// Transfer value of `c`, if it was seated on a quota.
    pub fn transfer_value(&self, c: CandidateId) -> Option<&Rational> {
        self.actions()
            .find(|a| a.candidate == c && a.kind == ActionKind::ElectOnQuota)
            .and_then(|a| a.transfer_value.as_ref())
    }

    /// Index of the round in which `c` was seated or eliminated.
    pub fn decided_in(&self, c: CandidateId) -> Option<(usize, ActionKind)> {
        self.rounds.iter().enumerate().find_map(|(i, r)| {
            r.actions
                .iter()
                .find(|a| a.candidate == c)
                .map(|a| (i, a.kind))
        })
    }

    /// Candidates seated by quota in the first round.
    pub fn first_round_quota_winners(&self) -> Vec<CandidateId> {
        self.rounds
            .first()
            .map(|r| {
                r.actions
                    .iter()
                    .filter(|a| a.kind == ActionKind::ElectOnQuota)
                    .map(|a| a.candidate)
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// `S / (S + 1)`: no unweighted Gregory transfer value reaches this.
pub fn max_transfer_value(seats: u32) -> Rational {
    ratio(seats, seats + 1)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Eligible,
    Seated,
    Eliminated,
}

struct Count<'e> {
    election: &'e Election,
    status: Vec<Status>,
    /// Per ballot group: current holder and position of the holder in the
    /// ranking. `None` once exhausted.
    holder: Vec<Option<(CandidateId, usize)>>,
    value: Vec<Rational>,
    exhausted: Rational,
}

impl<'e> Count<'e> {
    fn new(election: &'e Election) -> Self {
        let n = election.num_candidates();
        let mut count = Count {
            election,
            status: vec![Status::Eligible; n],
            holder: Vec::with_capacity(election.groups().len()),
            value: vec![int(1); election.groups().len()],
            exhausted: Rational::zero(),
        };
        for (gi, g) in election.groups().iter().enumerate() {
            match g.ballot.first() {
                Some(c) => count.holder.push(Some((c, 0))),
                None => {
                    count.holder.push(None);
                    count.exhausted += int(g.count);
                    count.value[gi] = Rational::zero();
                }
            }
        }
        count
    }

    fn eligible(&self) -> Vec<CandidateId> {
        self.election
            .candidates()
            .filter(|c| self.status[c.index()] == Status::Eligible)
            .collect()
    }

    fn tallies(&self) -> Vec<Rational> {
        let mut t = vec![Rational::zero(); self.status.len()];
        for (gi, g) in self.election.groups().iter().enumerate() {
            if let Some((c, _)) = self.holder[gi] {
                t[c.index()] += &self.value[gi] * int(g.count);
            }
        }
        t
    }

    fn pile(&self, c: CandidateId) -> impl Iterator<Item = usize> + '_ {
        (0..self.holder.len()).filter(move |&gi| matches!(self.holder[gi], Some((h, _)) if h == c))
    }

    /// Moves every ballot held by `from` to its next eligible preference,
    /// optionally resetting its value.
    fn distribute(&mut self, from: CandidateId, new_value: Option<&Rational>) {
        let groups: Vec<usize> = self.pile(from).collect();
        for gi in groups {
            let g = &self.election.groups()[gi];
            if let Some(v) = new_value {
                self.value[gi] = v.clone();
            }
            let (_, pos) = self.holder[gi].expect("pile member has a holder");
            let next = g.ballot.prefs()[pos + 1..]
                .iter()
                .position(|c| self.status[c.index()] == Status::Eligible)
                .map(|off| pos + 1 + off);
            match next {
                Some(p) => self.holder[gi] = Some((g.ballot.prefs()[p], p)),
                None => {
                    self.holder[gi] = None;
                    self.exhausted += &self.value[gi] * int(g.count);
                }
            }
        }
    }
}

/// Runs the count and returns the full round-by-round record.
pub fn tabulate(election: &Election) -> TabulationRecord {
    let quota = election.quota();
    let quota_r = int(quota);
    let seats = election.seats() as usize;
    let mut count = Count::new(election);
    let mut rounds = Vec::new();
    let mut winners = Vec::new();
    let mut tie_occurred = false;

    while winners.len() < seats {
        let eligible = count.eligible();
        let all_tallies = count.tallies();
        let mut round = Round {
            tallies: eligible
                .iter()
                .map(|&c| (c, all_tallies[c.index()].clone()))
                .collect(),
            actions: Vec::new(),
            exhausted: count.exhausted.clone(),
        };
        let remaining = seats - winners.len();

        if eligible.len() <= remaining {
            for &c in &eligible {
                count.status[c.index()] = Status::Seated;
                winners.push(c);
                round.actions.push(RoundAction {
                    kind: ActionKind::ElectRemaining,
                    candidate: c,
                    transfer_value: None,
                    surplus: None,
                    pile_size: None,
                });
            }
            rounds.push(round);
            break;
        }

        let mut reached: Vec<CandidateId> = eligible
            .iter()
            .copied()
            .filter(|c| all_tallies[c.index()] >= quota_r)
            .collect();
        reached.sort_by(|a, b| all_tallies[b.index()].cmp(&all_tallies[a.index()]).then(a.cmp(b)));
        reached.truncate(remaining);

        if !reached.is_empty() {
            let mut transfers = Vec::with_capacity(reached.len());
            for &c in &reached {
                let pile_size: u64 = count.pile(c).map(|gi| election.groups()[gi].count).sum();
                let surplus = &all_tallies[c.index()] - &quota_r;
                let tv = &surplus / int(pile_size);
                count.status[c.index()] = Status::Seated;
                winners.push(c);
                transfers.push((c, tv.clone()));
                round.actions.push(RoundAction {
                    kind: ActionKind::ElectOnQuota,
                    candidate: c,
                    transfer_value: Some(tv),
                    surplus: Some(surplus),
                    pile_size: Some(pile_size),
                });
            }
            if winners.len() < seats {
                for (c, tv) in transfers {
                    count.distribute(c, Some(&tv));
                }
            }
        } else {
            let lowest = eligible
                .iter()
                .map(|c| &all_tallies[c.index()])
                .min()
                .expect("more eligible candidates than seats")
                .clone();
            let at_lowest: Vec<CandidateId> = eligible
                .iter()
                .copied()
                .filter(|c| all_tallies[c.index()] == lowest)
                .collect();
            if at_lowest.len() > 1 {
                tie_occurred = true;
            }
            let out = at_lowest[0];
            count.status[out.index()] = Status::Eliminated;
            round.actions.push(RoundAction {
                kind: ActionKind::Eliminate,
                candidate: out,
                transfer_value: None,
                surplus: None,
                pile_size: None,
            });
            count.distribute(out, None);
        }
        rounds.push(round);
    }

    TabulationRecord {
        rounds,
        winners,
        exhausted_value: count.exhausted,
        tie_occurred,
        quota,
        total_ballots: election.total_ballots(),
    }
}
