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

//! Structural check that a plan rules out every alternative winner pair.
//!
//! This does not reuse any planner logic. A pair `P` is covered when one
//! of the following is in the plan (all holding on the CVRs):
//!
//! * `IQ(c)` for some `c` outside `P`;
//! * two AG assertions over the same member of `P` from distinct winners;
//! * `NL(w, l, W, caps, G, O)` with `l` in `P`, `W = P - {l}`, `w` outside
//!   `P`, every `AG(w, o)` for `o` in `O`, every `AG(g, l)` for `g` in
//!   `G - W`, and each cap either at least `S/(S+1)` or backed by
//!   `IQ(x)` and `UT(x, t)` with `t <= cap`.

use std::collections::HashSet;

use crate::assertions::Assertion;
use crate::ballot::{CandidateId, CandidateSet, Election};
use crate::bounds::TransferCaps;
use crate::planner::AuditPlan;
use crate::tabulator::max_transfer_value;

struct Index<'p> {
    holding: Vec<&'p Assertion>,
    set: HashSet<&'p Assertion>,
}

impl<'p> Index<'p> {
    fn new(plan: &'p AuditPlan) -> Self {
        let holding: Vec<&Assertion> = plan
            .assertions
            .iter()
            .filter(|r| r.holds)
            .map(|r| &r.assertion)
            .collect();
        let set = holding.iter().copied().collect();
        Index { holding, set }
    }

    fn has(&self, a: &Assertion) -> bool {
        self.set.contains(a)
    }

    fn has_ag(&self, winner: CandidateId, loser: CandidateId) -> bool {
        self.has(&Assertion::AlwaysGreater { winner, loser })
    }

    fn seated_initially(&self, c: CandidateId) -> bool {
        self.has(&Assertion::InitialQuota { candidate: c })
    }

    fn dominators(&self, c: CandidateId) -> usize {
        self.holding
            .iter()
            .filter_map(|a| match a {
                Assertion::AlwaysGreater { winner, loser } if *loser == c && *winner != c => {
                    Some(*winner)
                }
                _ => None,
            })
            .collect::<HashSet<_>>()
            .len()
    }

    fn cap_is_valid(&self, x: CandidateId, cap: &crate::rational::Rational, seats: u32) -> bool {
        if *cap >= max_transfer_value(seats) {
            return true;
        }
        self.seated_initially(x)
            && self.holding.iter().any(|a| {
                matches!(a, Assertion::TransferBelow { candidate, cap: t } if *candidate == x && t <= cap)
            })
    }

    fn nl_covers(
        &self,
        pair: [CandidateId; 2],
        seats: u32,
        (w, l, caps, g, o): (CandidateId, CandidateId, &TransferCaps, &CandidateSet, &CandidateSet),
    ) -> bool {
        let pair_set: CandidateSet = pair.iter().collect();
        let seated = caps.winners();
        if !pair_set.contains(l) || pair_set.contains(w) || seated != pair_set.without(l) {
            return false;
        }
        caps.iter().all(|(x, cap)| self.cap_is_valid(x, cap, seats))
            && o.iter().all(|x| self.has_ag(w, x))
            && g.difference(&seated).iter().all(|x| self.has_ag(x, l))
    }

    fn covers(&self, pair: [CandidateId; 2], seats: u32) -> bool {
        self.holding.iter().any(|a| match a {
            Assertion::InitialQuota { candidate } => !pair.contains(candidate),
            Assertion::NeverLoses {
                winner,
                loser,
                caps,
                g,
                o,
            } => self.nl_covers(pair, seats, (*winner, *loser, caps, g, o)),
            _ => false,
        }) || pair.iter().any(|&c| self.dominators(c) >= 2)
    }
}

/// Alternative winner pairs that `plan` fails to rule out.
pub fn uncovered_pairs(plan: &AuditPlan, election: &Election) -> Vec<(CandidateId, CandidateId)> {
    let index = Index::new(plan);
    let mut reported = plan.reported_winners;
    reported.sort();
    let n = election.num_candidates() as u32;
    let mut missing = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let pair = [CandidateId(a), CandidateId(b)];
            if pair != reported && !index.covers(pair, election.seats()) {
                missing.push((pair[0], pair[1]));
            }
        }
    }
    missing
}

/// True when every alternative winner pair is ruled out by the plan.
pub fn check_sufficiency(plan: &AuditPlan, election: &Election) -> bool {
    uncovered_pairs(plan, election).is_empty()
}
