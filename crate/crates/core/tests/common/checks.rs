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

//! Reusable checks over a single election: agreement with the reference
//! tabulator, the tally lemmas along the actual count, and soundness of
//! every plan the planner produces.

use num_traits::Zero;
use rand::Rng;
use stv_audit::planner::PlanMethod;
use stv_audit::rational::{ratio, Rational};
use stv_audit::{
    check_sufficiency, evaluate, lower_elim, tabulate, upper_complex, ActionKind, AsnMethod,
    Assertion, AuditParameters, AuditPlan, CandidateId, CandidateSet, Election, Planner,
    TabulationRecord, TransferCaps,
};

use super::{naive_tabulate, perturb};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// The library count agrees with the reference count.
pub fn tabulation_matches(e: &Election, rec: &TabulationRecord) -> Check {
    let naive = naive_tabulate(e);
    ensure!(rec.winners == naive.winners, "winners {:?} vs reference {:?}", rec.winners, naive.winners);
    ensure!(rec.tie_occurred == naive.tie, "tie flag differs");
    ensure!(rec.rounds.len() == naive.rounds, "round count {} vs {}", rec.rounds.len(), naive.rounds);
    ensure!(rec.exhausted_value == naive.exhausted, "exhausted {} vs {}", rec.exhausted_value, naive.exhausted);
    for (c, tv) in &naive.transfer_values {
        ensure!(rec.transfer_value(*c) == Some(tv), "transfer value of {c} differs");
    }
    Ok(())
}

/// Structural invariants of a count.
pub fn tabulation_invariants(e: &Election, rec: &TabulationRecord) -> Check {
    let seats = e.seats() as usize;
    ensure!(rec.winners.len() == seats.min(e.num_candidates()), "wrong number of winners");
    let n = Rational::from_integer(e.total_ballots().into());
    let cap = ratio(e.seats() as i64, e.seats() as i64 + 1);
    for r in &rec.rounds {
        let sum: Rational = r.tallies.iter().map(|(_, t)| t.clone()).sum::<Rational>() + &r.exhausted;
        ensure!(sum <= n, "tallies plus exhausted exceed N");
        for a in &r.actions {
            if let Some(tv) = &a.transfer_value {
                ensure!(!tv.is_zero() || a.surplus.as_ref().is_some_and(|s| s.is_zero()), "bad zero τ");
                ensure!(*tv < cap, "τ = {tv} reaches S/(S+1)");
            }
        }
    }
    Ok(())
}

/// Status of each candidate along the count: the index of the round in
/// which it stopped being eligible, and how.
fn fate(rec: &TabulationRecord, c: CandidateId) -> (usize, Option<ActionKind>) {
    match rec.decided_in(c) {
        Some((i, k)) => (i, Some(k)),
        None => (usize::MAX, None),
    }
}

fn eligible_at(rec: &TabulationRecord, c: CandidateId, round: usize) -> bool {
    rec.rounds.get(round).is_some_and(|r| r.tally(c).is_some())
}

/// Caps equal to the realized transfer values (zero for candidates seated
/// without a quota).
fn realized_caps(rec: &TabulationRecord, members: &CandidateSet) -> TransferCaps {
    members
        .iter()
        .map(|w| (w, rec.transfer_value(w).cloned().unwrap_or_else(Rational::zero)))
        .collect()
}

/// AG, elimination bound, complex bound, NL, IQ and UT checked against
/// the actual count of `e`.
pub fn lemmas_hold(e: &Election, rec: &TabulationRecord) -> Check {
    let cands: Vec<CandidateId> = e.candidates().collect();
    let ag = |w: CandidateId, l: CandidateId| {
        evaluate(&Assertion::AlwaysGreater { winner: w, loser: l }, e).unwrap()
    };
    let mut beats = vec![vec![false; cands.len()]; cands.len()];
    for &w in &cands {
        for &l in &cands {
            if w != l {
                beats[w.index()][l.index()] = ag(w, l);
            }
        }
    }
    let winners = rec.winner_set();

    for &w in &cands {
        for &l in &cands {
            if w == l || !beats[w.index()][l.index()] {
                continue;
            }
            for r in &rec.rounds {
                if let (Some(tw), Some(tl)) = (r.tally(w), r.tally(l)) {
                    ensure!(tw > tl, "AG({w},{l}) holds but tallies {tw} <= {tl}");
                }
            }
            ensure!(!(winners.contains(l) && !winners.contains(w)), "AG({w},{l}) holds but {l} beat {w}");
            let (rw, kw) = fate(rec, w);
            if kw == Some(ActionKind::Eliminate) {
                let (rl, kl) = fate(rec, l);
                ensure!(kl == Some(ActionKind::Eliminate) && rl < rw, "AG({w},{l}) holds but {w} eliminated first");
            }
        }
    }

    // Elimination bound with the largest admissible O.
    for &w in &cands {
        let o: CandidateSet = cands.iter().copied().filter(|&x| x != w && beats[w.index()][x.index()]).collect();
        let bound = Rational::from_integer(lower_elim(e, w, &o).into());
        for (i, r) in rec.rounds.iter().enumerate() {
            let Some(t) = r.tally(w) else { continue };
            let o_gone = o.iter().all(|x| !eligible_at(rec, x, i));
            if o_gone {
                ensure!(*t >= bound, "tally of {w} is {t} < L_elim {bound}");
            }
        }
    }

    // Complex bound and NL, with W = winners - {b, c}.
    for &c in &cands {
        for &b in &cands {
            if b == c {
                continue;
            }
            let mut w_set = winners.clone();
            w_set.remove(b);
            w_set.remove(c);
            let caps = realized_caps(rec, &w_set);
            let g: CandidateSet = cands.iter().copied().filter(|&x| x != c && beats[x.index()][c.index()]).collect();
            let bound = upper_complex(e, c, b, &caps, &g).map_err(|x| x.to_string())?;
            for r in &rec.rounds {
                if let (Some(_), Some(t)) = (r.tally(b), r.tally(c)) {
                    ensure!(*t <= bound, "tally of {c} is {t} > U_complex {bound} (b = {b})");
                }
            }
            // NL(b, c): b never loses to c.
            let (w, l) = (b, c);
            let o: CandidateSet = cands
                .iter()
                .copied()
                .filter(|&x| x != w && beats[w.index()][x.index()])
                .collect();
            let nl = Assertion::NeverLoses {
                winner: w,
                loser: l,
                caps: caps.clone(),
                g: g.clone(),
                o,
            };
            if caps.validate(e.seats()).is_ok() && evaluate(&nl, e).map_err(|x| x.to_string())? {
                ensure!(!(winners.contains(l) && !winners.contains(w)), "NL({w},{l}) holds but {l} beat {w}");
                let (rw, kw) = fate(rec, w);
                if kw == Some(ActionKind::Eliminate) {
                    ensure!(!eligible_at(rec, l, rw), "NL({w},{l}) holds but {w} eliminated while {l} eligible");
                }
            }
        }
    }

    for &c in &cands {
        if evaluate(&Assertion::InitialQuota { candidate: c }, e).unwrap() {
            ensure!(rec.first_round_quota_winners().contains(&c) || rec.rounds[0].actions.iter().any(|a| a.candidate == c),
                "IQ({c}) holds but {c} not seated in the first round");
            ensure!(winners.contains(c), "IQ({c}) holds but {c} lost");
            if let Some(tv) = rec.transfer_value(c) {
                for k in 0..20 {
                    let cap = ratio(k, 20);
                    let ut = Assertion::TransferBelow { candidate: c, cap: cap.clone() };
                    if evaluate(&ut, e).unwrap() {
                        ensure!(*tv < cap, "UT({c}, {cap}) holds but τ = {tv}");
                    }
                }
            }
        }
    }
    Ok(())
}

/// Planner settings used by the soundness suites: closed-form ASN, no
/// error allowance (every positive margin is auditable) and a coarse δ.
pub fn soundness_params() -> AuditParameters {
    AuditParameters {
        risk_limit: 0.1,
        error_rate: 0.0,
        asn: AsnMethod::ClosedForm,
    }
}

pub fn coarse_delta() -> Rational {
    ratio(1, 4)
}

/// Every plan for `e` (all three methods) is sufficient and, on `tries`
/// random perturbations of `e` with the same ballot count, the assertions
/// all holding implies the same winners. Returns the number of plans.
pub fn plans_sound(e: &Election, tries: usize, rng: &mut impl Rng) -> Result<usize, String> {
    if e.num_candidates() < 2 {
        return Ok(0);
    }
    let planner = Planner::new(e, soundness_params()).map_err(|x| x.to_string())?;
    let reported: CandidateSet = planner.winners().iter().collect();
    let mut plans: Vec<AuditPlan> = Vec::new();
    for method in [PlanMethod::General, PlanMethod::OneQuota, PlanMethod::TwoQuota] {
        let out = planner.plan_with(method, &coarse_delta()).map_err(|x| x.to_string())?;
        if let Some(p) = out.into_plan() {
            plans.push(p);
        }
    }
    for plan in &plans {
        ensure!(check_sufficiency(plan, e), "{} plan not sufficient: {:?}", plan.method, plan.assertion_list());
        let assertions = plan.assertion_list();
        for _ in 0..tries {
            let edits = rng.gen_range(1..=3.min(e.total_ballots() as usize).max(1));
            let p = perturb(e, edits, rng);
            if assertions.iter().all(|a| evaluate(a, &p).unwrap()) {
                let got = tabulate(&p).winner_set();
                ensure!(
                    got == reported,
                    "{} plan {:?} holds on perturbed {:?} but winners are {:?}",
                    plan.method,
                    assertions,
                    p.groups(),
                    got
                );
            }
        }
    }
    Ok(plans.len())
}
