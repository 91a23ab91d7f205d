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

//! Drivers that run the per-election checks over the small-election
//! enumeration and over random elections.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stv_audit::{tabulate, Ballot, CandidateSet, Election};

use super::checks::{lemmas_hold, plans_sound, tabulation_invariants, tabulation_matches};
use super::{random_election, SmallElections};

#[derive(Debug, Default, Clone, Copy)]
pub struct Tally {
    pub elections: u64,
    /// Extra relabelings checked because the count involved a tie.
    pub relabelled: u64,
    pub plans: u64,
}

pub fn permutations(n: usize) -> Vec<Vec<u32>> {
    fn go(cur: &mut Vec<u32>, n: usize, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for c in 0..n as u32 {
            if !cur.contains(&c) {
                cur.push(c);
                go(cur, n, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), n, &mut out);
    out
}

/// `e` with candidate `i` renamed to `perm[i]`.
pub fn relabel(e: &Election, perm: &[u32]) -> Election {
    let groups = e.groups().iter().map(|g| {
        let ids: Vec<u32> = g.ballot.prefs().iter().map(|c| perm[c.index()]).collect();
        (Ballot::from_ids(&ids), g.count)
    });
    Election::with_numbered_candidates(e.num_candidates(), groups, e.seats()).expect("relabeling is valid")
}

/// Relabelings of `e` that the canonical enumeration does not stand in
/// for: when the count breaks a tie by candidate id, a relabeled copy can
/// elect a different pair.
fn tie_variants(e: &Election, perms: &[Vec<u32>]) -> Vec<Election> {
    let rec = tabulate(e);
    if !rec.tie_occurred {
        return Vec::new();
    }
    let winners = rec.winner_set();
    perms
        .iter()
        .filter_map(|p| {
            let moved: CandidateSet = winners.iter().map(|c| stv_audit::CandidateId(p[c.index()])).collect();
            let r = relabel(e, p);
            (tabulate(&r).winner_set() != moved).then_some(r)
        })
        .collect()
}

/// Runs `check` on every canonical election with 2 to 4 candidates and
/// 1 to `max_ballots` ballots. Tie-sensitive relabelings are added for
/// elections with at most `relabel_up_to` ballots.
pub fn over_small_elections(
    max_ballots: usize,
    relabel_up_to: usize,
    mut check: impl FnMut(&Election) -> Result<u64, String>,
) -> Result<Tally, String> {
    let mut tally = Tally::default();
    let mut failure: Option<String> = None;
    for n in 2..=4 {
        let gen = SmallElections::new(n);
        let perms = permutations(n);
        for k in 1..=max_ballots {
            gen.for_each(k, |ms| {
                if failure.is_some() {
                    return;
                }
                let e = gen.election(ms, 2);
                let mut run = |e: &Election| match check(e) {
                    Ok(p) => tally.plans += p,
                    Err(msg) => failure = Some(format!("{msg}\n  election: {:?}", e.groups())),
                };
                run(&e);
                tally.elections += 1;
                if k > relabel_up_to {
                    return;
                }
                for v in tie_variants(&e, &perms) {
                    run(&v);
                    tally.relabelled += 1;
                }
            });
        }
    }
    match failure {
        Some(f) => Err(f),
        None => Ok(tally),
    }
}

/// Runs `check` on `count` random 2-seat elections with up to 5
/// candidates and 200 ballots.
pub fn over_random_elections(
    count: u64,
    seed: u64,
    mut check: impl FnMut(&Election, &mut ChaCha8Rng) -> Result<u64, String>,
) -> Result<Tally, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    for _ in 0..count {
        let e = random_election(&mut rng, 5, 200);
        tally.plans += check(&e, &mut rng).map_err(|m| format!("{m}\n  election: {:?}", e.groups()))?;
        tally.elections += 1;
    }
    Ok(tally)
}

/// Soundness of every produced plan on the small-election enumeration.
pub fn small_soundness(max_ballots: usize, relabel_up_to: usize, tries: usize, seed: u64) -> Result<Tally, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    over_small_elections(max_ballots, relabel_up_to, |e| plans_sound(e, tries, &mut rng).map(|p| p as u64))
}

pub fn random_soundness(count: u64, tries: usize, seed: u64) -> Result<Tally, String> {
    over_random_elections(count, seed, |e, rng| plans_sound(e, tries, rng).map(|p| p as u64))
}

/// Count agreement, count invariants and the tally lemmas.
pub fn lemma_check(e: &Election) -> Result<u64, String> {
    let rec = tabulate(e);
    tabulation_matches(e, &rec)?;
    tabulation_invariants(e, &rec)?;
    lemmas_hold(e, &rec)?;
    Ok(0)
}

pub fn small_lemmas(max_ballots: usize, relabel_up_to: usize) -> Result<Tally, String> {
    over_small_elections(max_ballots, relabel_up_to, lemma_check)
}

pub fn random_lemmas(count: u64, seed: u64) -> Result<Tally, String> {
    over_random_elections(count, seed, |e, _| lemma_check(e))
}
