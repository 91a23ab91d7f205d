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

//! Test support: an independent reference tabulator and bound
//! implementations, small-election enumeration, and random elections.

#![allow(dead_code)]

pub mod checks;
pub mod sweep;

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use stv_audit::rational::{int, Rational};
use stv_audit::{Ballot, CandidateId, Election};

/// Outcome of the reference count.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveOutcome {
    pub winners: Vec<CandidateId>,
    pub transfer_values: BTreeMap<CandidateId, Rational>,
    pub exhausted: Rational,
    pub tie: bool,
    pub rounds: usize,
}

/// Straightforward count over individual ballot papers. Each paper holds
/// a pointer into its ranking and a value.
pub fn naive_tabulate(election: &Election) -> NaiveOutcome {
    let n = election.num_candidates();
    let q = int(election.quota());
    let mut seats_left = election.seats() as usize;
    let papers: Vec<Vec<usize>> = election
        .expand()
        .iter()
        .map(|b| b.prefs().iter().map(|c| c.0 as usize).collect())
        .collect();
    // 0 = eligible, 1 = seated, 2 = eliminated
    let mut state = vec![0u8; n];
    let mut at: Vec<Option<usize>> = papers.iter().map(|p| if p.is_empty() { None } else { Some(0) }).collect();
    let mut value: Vec<Rational> = vec![Rational::one(); papers.len()];
    let mut exhausted = Rational::zero();
    for (i, p) in papers.iter().enumerate() {
        if p.is_empty() {
            exhausted += &value[i];
        }
    }
    let mut out = NaiveOutcome {
        winners: vec![],
        transfer_values: BTreeMap::new(),
        exhausted: Rational::zero(),
        tie: false,
        rounds: 0,
    };
    let holder = |at: &Vec<Option<usize>>, i: usize| at[i].map(|k| papers[i][k]);
    let advance = |at: &mut Vec<Option<usize>>, state: &Vec<u8>, i: usize| -> bool {
        let mut k = at[i].unwrap() + 1;
        while k < papers[i].len() && state[papers[i][k]] != 0 {
            k += 1;
        }
        if k < papers[i].len() {
            at[i] = Some(k);
            true
        } else {
            at[i] = None;
            false
        }
    };
    loop {
        let eligible: Vec<usize> = (0..n).filter(|&c| state[c] == 0).collect();
        if seats_left == 0 {
            break;
        }
        out.rounds += 1;
        if eligible.len() <= seats_left {
            for c in eligible {
                state[c] = 1;
                out.winners.push(CandidateId(c as u32));
            }
            break;
        }
        let mut tally = vec![Rational::zero(); n];
        for (i, v) in value.iter().enumerate() {
            if let Some(c) = holder(&at, i) {
                tally[c] += v;
            }
        }
        let mut reached: Vec<usize> = eligible.iter().copied().filter(|&c| tally[c] >= q).collect();
        if !reached.is_empty() {
            reached.sort_by(|&a, &b| tally[b].cmp(&tally[a]).then(a.cmp(&b)));
            reached.truncate(seats_left);
            for &c in &reached {
                state[c] = 1;
                seats_left -= 1;
                out.winners.push(CandidateId(c as u32));
            }
            for &c in &reached {
                let pile: Vec<usize> = (0..papers.len()).filter(|&i| holder(&at, i) == Some(c)).collect();
                let tv = (&tally[c] - &q) / int(pile.len() as u64);
                out.transfer_values.insert(CandidateId(c as u32), tv.clone());
                if seats_left == 0 {
                    continue;
                }
                for i in pile {
                    value[i] = tv.clone();
                    if !advance(&mut at, &state, i) {
                        exhausted += &value[i];
                    }
                }
            }
        } else {
            let low = eligible.iter().map(|&c| tally[c].clone()).min().unwrap();
            let lowest: Vec<usize> = eligible.iter().copied().filter(|&c| tally[c] == low).collect();
            if lowest.len() > 1 {
                out.tie = true;
            }
            let e = lowest[0];
            state[e] = 2;
            for (i, v) in value.iter().enumerate() {
                if holder(&at, i) == Some(e) && !advance(&mut at, &state, i) {
                    exhausted += v;
                }
            }
        }
    }
    out.exhausted = exhausted;
    out
}

fn first_of(b: &Ballot, among: &[CandidateId]) -> Option<CandidateId> {
    b.prefs().iter().copied().find(|c| among.contains(c))
}

pub fn naive_lower_basic(e: &Election, c: CandidateId) -> u64 {
    e.expand().iter().filter(|b| b.prefs().first() == Some(&c)).count() as u64
}

pub fn naive_upper_basic(e: &Election, c: CandidateId) -> u64 {
    e.expand().iter().filter(|b| b.prefs().contains(&c)).count() as u64
}

pub fn naive_upper_comp(e: &Election, c: CandidateId, d: CandidateId) -> u64 {
    e.expand().iter().filter(|b| first_of(b, &[c, d]) == Some(c)).count() as u64
}

pub fn naive_lower_elim(e: &Election, w: CandidateId, o: &[CandidateId]) -> u64 {
    let rest: Vec<CandidateId> = e.candidates().filter(|c| !o.contains(c)).collect();
    e.expand().iter().filter(|b| first_of(b, &rest) == Some(w)).count() as u64
}

/// Per-ballot case table, applied ballot by ballot.
pub fn naive_upper_complex(
    e: &Election,
    c: CandidateId,
    b: CandidateId,
    caps: &[(CandidateId, Rational)],
    g: &[CandidateId],
) -> Rational {
    let w: Vec<CandidateId> = caps.iter().map(|(x, _)| *x).collect();
    let mut total = Rational::zero();
    for ballot in e.expand() {
        let p = ballot.prefs();
        let Some(pos_c) = p.iter().position(|&x| x == c) else { continue };
        let before = &p[..pos_c];
        if before.iter().any(|x| g.contains(x) && !w.contains(x)) {
            continue;
        }
        if before.contains(&b) {
            continue;
        }
        if w.contains(&p[0]) {
            let mt = caps
                .iter()
                .filter(|(x, _)| before.contains(x))
                .map(|(_, v)| v.clone())
                .max()
                .expect("first preference precedes c");
            total += mt;
        } else {
            total += int(1);
        }
    }
    total
}

/// Every ranking over `n` candidates, including the empty one.
pub fn all_rankings(n: usize) -> Vec<Vec<u32>> {
    fn extend(n: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        out.push(cur.clone());
        for c in 0..n as u32 {
            if !cur.contains(&c) {
                cur.push(c);
                extend(n, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(n, &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

/// Ballot multisets over `n` candidates with exactly `k` ballots, one per
/// relabeling class: first-preference counts are non-increasing in the
/// candidate id, and among relabelings that keep them so, the sorted
/// ranking-index vector is minimal.
pub struct SmallElections {
    pub n: usize,
    rankings: Vec<Vec<u32>>,
    index: BTreeMap<Vec<u32>, usize>,
    /// Rankings by first preference; slot `n` is the empty ranking.
    by_first: Vec<Vec<usize>>,
}

impl SmallElections {
    pub fn new(n: usize) -> Self {
        let rankings = all_rankings(n);
        let index = rankings.iter().enumerate().map(|(i, r)| (r.clone(), i)).collect();
        let mut by_first = vec![Vec::new(); n + 1];
        for (i, r) in rankings.iter().enumerate() {
            by_first[r.first().map_or(n, |&c| c as usize)].push(i);
        }
        SmallElections {
            n,
            rankings,
            index,
            by_first,
        }
    }

    pub fn ranking(&self, i: usize) -> &[u32] {
        &self.rankings[i]
    }

    fn relabel(&self, multiset: &[usize], perm: &[u32]) -> Vec<usize> {
        let mut out: Vec<usize> = multiset
            .iter()
            .map(|&i| {
                let r: Vec<u32> = self.rankings[i].iter().map(|&c| perm[c as usize]).collect();
                self.index[&r]
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn is_canonical(&self, multiset: &[usize], firsts: &[usize]) -> bool {
        // Permutations that only shuffle candidates with equal first counts.
        let mut perm: Vec<u32> = (0..self.n as u32).collect();
        let mut ok = true;
        permute_within_ties(&mut perm, 0, firsts, &mut |p| {
            if ok && self.relabel(multiset, p) < multiset.to_vec() {
                ok = false;
            }
        });
        ok
    }

    /// Calls `f` with each canonical multiset of exactly `k` ballots, as
    /// sorted ranking indices.
    pub fn for_each(&self, k: usize, mut f: impl FnMut(&[usize])) {
        let mut firsts = vec![0usize; self.n + 1];
        self.compositions(k, 0, k, &mut firsts, &mut |firsts| {
            let mut parts: Vec<Vec<Vec<usize>>> = Vec::new();
            for (slot, &count) in firsts.iter().enumerate() {
                parts.push(multisets(&self.by_first[slot], count));
            }
            let mut chosen = Vec::with_capacity(k);
            product(&parts, 0, &mut chosen, &mut |ms| {
                let mut sorted = ms.to_vec();
                sorted.sort_unstable();
                if self.is_canonical(&sorted, &firsts[..self.n]) {
                    f(&sorted);
                }
            });
        });
    }

    fn compositions(
        &self,
        left: usize,
        slot: usize,
        cap: usize,
        firsts: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if slot == self.n {
            firsts[self.n] = left;
            f(firsts);
            return;
        }
        for v in (0..=left.min(cap)).rev() {
            firsts[slot] = v;
            self.compositions(left - v, slot + 1, v, firsts, f);
        }
    }

    pub fn election(&self, multiset: &[usize], seats: u32) -> Election {
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for &i in multiset {
            *counts.entry(i).or_default() += 1;
        }
        Election::with_numbered_candidates(
            self.n,
            counts.into_iter().map(|(i, k)| (Ballot::from_ids(&self.rankings[i]), k)),
            seats,
        )
        .expect("valid small election")
    }
}

fn permute_within_ties(perm: &mut Vec<u32>, i: usize, firsts: &[usize], f: &mut impl FnMut(&[u32])) {
    if i == perm.len() {
        f(perm);
        return;
    }
    for j in i..perm.len() {
        if firsts[perm[j] as usize] == firsts[i] && (j == i || firsts[perm[i] as usize] == firsts[i]) {
            perm.swap(i, j);
            permute_within_ties(perm, i + 1, firsts, f);
            perm.swap(i, j);
        }
    }
}

/// Multisets of size `k` drawn from `items`, as nondecreasing sequences.
fn multisets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn go(items: &[usize], start: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            go(items, i, k - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(items, 0, k, &mut Vec::new(), &mut out);
    out
}

fn product(parts: &[Vec<Vec<usize>>], i: usize, chosen: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if i == parts.len() {
        f(chosen);
        return;
    }
    for p in &parts[i] {
        let len = chosen.len();
        chosen.extend_from_slice(p);
        product(parts, i + 1, chosen, f);
        chosen.truncate(len);
    }
}

pub fn random_ranking(n: usize, rng: &mut impl Rng) -> Ballot {
    let mut ids: Vec<u32> = (0..n as u32).collect();
    ids.shuffle(rng);
    let len = rng.gen_range(0..=n);
    Ballot::from_ids(&ids[..len])
}

/// A random 2-seat election with up to `max_candidates` candidates and up
/// to `max_ballots` ballots, drawn from a handful of rankings so that some
/// candidates are clearly stronger than others.
pub fn random_election(rng: &mut impl Rng, max_candidates: usize, max_ballots: u64) -> Election {
    let n = rng.gen_range(2..=max_candidates);
    let kinds = rng.gen_range(1..=8);
    let total = rng.gen_range(1..=max_ballots);
    let rankings: Vec<Ballot> = (0..kinds).map(|_| random_ranking(n, rng)).collect();
    let weights: Vec<f64> = (0..kinds).map(|_| rng.gen::<f64>().powi(2) + 0.01).collect();
    let sum: f64 = weights.iter().sum();
    let mut counts = vec![0u64; kinds];
    for _ in 0..total {
        let mut x = rng.gen::<f64>() * sum;
        let mut i = 0;
        while i + 1 < kinds && x >= weights[i] {
            x -= weights[i];
            i += 1;
        }
        counts[i] += 1;
    }
    Election::with_numbered_candidates(
        n,
        rankings.into_iter().zip(counts).filter(|(_, k)| *k > 0),
        2,
    )
    .expect("valid random election")
}

/// Replaces `edits` randomly chosen ballots with random rankings; the
/// ballot count is unchanged.
pub fn perturb(election: &Election, edits: usize, rng: &mut impl Rng) -> Election {
    let mut ballots = election.expand();
    let n = election.num_candidates();
    for _ in 0..edits {
        let i = rng.gen_range(0..ballots.len());
        ballots[i] = if rng.gen_bool(0.5) {
            random_ranking(n, rng)
        } else {
            // Small edit: swap, truncate or extend.
            let mut p: Vec<u32> = ballots[i].prefs().iter().map(|c| c.0).collect();
            match rng.gen_range(0..3) {
                0 if p.len() >= 2 => {
                    let j = rng.gen_range(0..p.len() - 1);
                    p.swap(j, j + 1);
                }
                1 if !p.is_empty() => {
                    p.pop();
                }
                _ => {
                    let missing: Vec<u32> = (0..n as u32).filter(|c| !p.contains(c)).collect();
                    if let Some(&c) = missing.choose(rng) {
                        p.insert(rng.gen_range(0..=p.len()), c);
                    }
                }
            }
            Ballot::from_ids(&p)
        };
    }
    Election::with_numbered_candidates(n, ballots.into_iter().map(|b| (b, 1)), election.seats())
        .expect("perturbed election stays valid")
}
