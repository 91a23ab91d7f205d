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

//! Audit assertions and their assorters.
//!
//! Every assertion is reduced to a linear form: a per-ballot coefficient
//! `f` with `lo <= f <= hi` such that the assertion holds exactly when the
//! sum of `f` over all ballots is positive. Quota-based assertions use the
//! `|B| / (S + 1)` form, which is what gets audited; [`evaluate`] uses the
//! same form so that it always agrees with the assorter.

use num_traits::{CheckedDiv, CheckedMul, CheckedSub, One, Signed, Zero};

use crate::audit::{estimate_asn, AsnQuery, AuditParameters};
use crate::ballot::{Ballot, CandidateId, CandidateSet, Election};
use crate::bounds::{
    complex_counts, complex_score, counts_elim, counts_first, lower_basic, lower_elim, upper_comp,
    upper_complex_unchecked, TransferCaps,
};
use crate::error::{Error, Result};
use crate::rational::{from_small, int, ratio, to_small, Rational, Small};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assertion {
    /// IQ: `candidate` has a quota on first preferences.
    InitialQuota { candidate: CandidateId },
    /// UT: if `candidate` is seated on first preferences, its transfer
    /// value is below `cap`.
    TransferBelow { candidate: CandidateId, cap: Rational },
    /// AG: `winner`'s tally always exceeds `loser`'s.
    AlwaysGreater { winner: CandidateId, loser: CandidateId },
    /// NL: `winner` never loses to `loser` given the seated set `W` (the
    /// keys of `caps`), the transfer caps, the candidates `g` that always
    /// beat `loser`, and the candidates `o` that `winner` always beats.
    NeverLoses {
        winner: CandidateId,
        loser: CandidateId,
        caps: TransferCaps,
        g: CandidateSet,
        o: CandidateSet,
    },
}

impl Assertion {
    pub fn tag(&self) -> &'static str {
        match self {
            Assertion::InitialQuota { .. } => "IQ",
            Assertion::TransferBelow { .. } => "UT",
            Assertion::AlwaysGreater { .. } => "AG",
            Assertion::NeverLoses { .. } => "NL",
        }
    }

    /// Checks candidate references and side conditions.
    pub fn validate(&self, election: &Election) -> Result<()> {
        match self {
            Assertion::InitialQuota { candidate } => election.check_candidate(*candidate),
            Assertion::TransferBelow { candidate, cap } => {
                election.check_candidate(*candidate)?;
                if cap.is_negative() || *cap >= Rational::one() {
                    return Err(Error::invalid(format!("UT cap {cap} must lie in [0, 1)")));
                }
                Ok(())
            }
            Assertion::AlwaysGreater { winner, loser } => {
                election.check_candidate(*winner)?;
                election.check_candidate(*loser)?;
                if winner == loser {
                    return Err(Error::invalid("AG needs two distinct candidates"));
                }
                Ok(())
            }
            Assertion::NeverLoses {
                winner,
                loser,
                caps,
                g,
                o,
            } => {
                election.check_candidate(*winner)?;
                election.check_candidate(*loser)?;
                if winner == loser {
                    return Err(Error::invalid("NL needs two distinct candidates"));
                }
                if caps.get(*winner).is_some() || caps.get(*loser).is_some() {
                    return Err(Error::invalid("NL winner and loser must lie outside W"));
                }
                for c in caps.winners().iter().chain(g.iter()).chain(o.iter()) {
                    election.check_candidate(c)?;
                }
                if o.contains(*winner) {
                    return Err(Error::invalid("NL winner cannot be in O"));
                }
                caps.validate(election.seats())
            }
        }
    }
}

/// Truth of the audited form of `assertion` on `election`, in exact
/// arithmetic.
pub fn evaluate(assertion: &Assertion, election: &Election) -> Result<bool> {
    assertion.validate(election)?;
    let n = u128::from(election.total_ballots());
    Ok(match assertion {
        Assertion::InitialQuota { candidate } => {
            u128::from(lower_basic(election, *candidate)) * u128::from(election.seats() + 1) > n
        }
        Assertion::AlwaysGreater { winner, loser } => {
            lower_basic(election, *winner) > upper_comp(election, *loser, *winner)
        }
        _ => holds_unchecked(assertion, election),
    })
}

/// Truth of the quota-based form: IQ as `L >= Q`, UT as `L < Q / (1 - cap)`.
/// Implied by the audited form; AG and NL are unaffected.
pub fn evaluate_quota_form(assertion: &Assertion, election: &Election) -> Result<bool> {
    assertion.validate(election)?;
    let q = int(election.quota());
    Ok(match assertion {
        Assertion::InitialQuota { candidate } => int(lower_basic(election, *candidate)) >= q,
        Assertion::TransferBelow { candidate, cap } => {
            int(lower_basic(election, *candidate)) < q / (int(1) - cap)
        }
        _ => holds_unchecked(assertion, election),
    })
}

/// Sign test of the audited form without validating `assertion`.
pub(crate) fn holds_unchecked(assertion: &Assertion, election: &Election) -> bool {
    match small_total(assertion, election) {
        Some(total) => total.is_positive(),
        None => big_total(assertion, election).is_positive(),
    }
}

fn small_total(assertion: &Assertion, election: &Election) -> Option<Small> {
    let n = i128::from(election.total_ballots());
    let s1 = i128::from(election.seats()) + 1;
    let first = |c| i128::from(lower_basic(election, c));
    Some(match assertion {
        Assertion::InitialQuota { candidate } => Small::new(first(*candidate) * s1 - n, s1),
        Assertion::TransferBelow { candidate, cap } => {
            let rest = Small::one().checked_sub(&to_small(cap)?)?;
            let bound = Small::from_integer(n).checked_div(&rest.checked_mul(&Small::from_integer(s1))?)?;
            bound.checked_sub(&Small::from_integer(first(*candidate)))?
        }
        Assertion::AlwaysGreater { winner, loser } => {
            Small::from_integer(first(*winner) - i128::from(upper_comp(election, *loser, *winner)))
        }
        Assertion::NeverLoses {
            winner,
            loser,
            caps,
            g,
            o,
        } => {
            let (full, capped) = complex_counts(election, *loser, *winner, caps, g);
            let mut total =
                Small::from_integer(i128::from(lower_elim(election, *winner, o)) - i128::from(full));
            for (w, k) in capped {
                let part = to_small(caps.get(w)?)?.checked_mul(&Small::from_integer(i128::from(k)))?;
                total = total.checked_sub(&part)?;
            }
            total
        }
    })
}

fn big_total(assertion: &Assertion, election: &Election) -> Rational {
    let share = ratio(election.total_ballots(), election.seats() + 1);
    match assertion {
        Assertion::InitialQuota { candidate } => int(lower_basic(election, *candidate)) - share,
        Assertion::TransferBelow { candidate, cap } => {
            share / (int(1) - cap) - int(lower_basic(election, *candidate))
        }
        Assertion::AlwaysGreater { winner, loser } => {
            int(lower_basic(election, *winner)) - int(upper_comp(election, *loser, *winner))
        }
        Assertion::NeverLoses {
            winner,
            loser,
            caps,
            g,
            o,
        } => {
            int(lower_elim(election, *winner, o))
                - upper_complex_unchecked(election, *loser, *winner, caps, g)
        }
    }
}

/// Per-ballot coefficient of an assertion's linear form, with its range.
#[derive(Clone, Debug)]
pub struct LinearAssertion {
    assertion: Assertion,
    /// `1 / (S + 1)`.
    share: Rational,
    /// `G - W`, precomputed for NL.
    g_rest: CandidateSet,
    lo: Rational,
    hi: Rational,
}

/// Rewrites `assertion` as a linear assertion over `election`'s ballots.
pub fn to_linear(assertion: &Assertion, election: &Election) -> Result<LinearAssertion> {
    assertion.validate(election)?;
    let (lo, hi) = linear_range(assertion, election.seats());
    let g_rest = match assertion {
        Assertion::NeverLoses { caps, g, .. } => g.difference(&caps.winners()),
        _ => CandidateSet::new(),
    };
    Ok(LinearAssertion {
        assertion: assertion.clone(),
        share: ratio(1, election.seats() + 1),
        g_rest,
        lo,
        hi,
    })
}

/// `(lo, hi)`: the range of the per-ballot coefficient.
fn linear_range(assertion: &Assertion, seats: u32) -> (Rational, Rational) {
    let share = ratio(1, seats + 1);
    match assertion {
        Assertion::InitialQuota { .. } => (-share.clone(), int(1) - &share),
        Assertion::TransferBelow { cap, .. } => {
            let scaled = &share / (int(1) - cap);
            (&scaled - int(1), scaled)
        }
        Assertion::AlwaysGreater { .. } | Assertion::NeverLoses { .. } => (int(-1), int(1)),
    }
}

impl LinearAssertion {
    pub fn assertion(&self) -> &Assertion {
        &self.assertion
    }

    pub fn lower(&self) -> &Rational {
        &self.lo
    }

    pub fn upper(&self) -> &Rational {
        &self.hi
    }

    pub fn coefficient(&self, ballot: &Ballot) -> Rational {
        let indicator = |b: bool| if b { int(1) } else { Rational::zero() };
        match &self.assertion {
            Assertion::InitialQuota { candidate } => {
                indicator(counts_first(ballot, *candidate)) - &self.share
            }
            Assertion::TransferBelow { candidate, cap } => {
                &self.share / (int(1) - cap) - indicator(counts_first(ballot, *candidate))
            }
            Assertion::AlwaysGreater { winner, loser } => {
                indicator(counts_first(ballot, *winner)) - indicator(ballot.prefers(*loser, *winner))
            }
            Assertion::NeverLoses {
                winner,
                loser,
                caps,
                o,
                ..
            } => {
                indicator(counts_elim(ballot, *winner, o))
                    - complex_score(ballot, *loser, *winner, caps, &self.g_rest).value(caps)
            }
        }
    }

    /// `sum_b f(b)`, ballot by ballot.
    pub fn total(&self, election: &Election) -> Rational {
        election
            .groups()
            .iter()
            .map(|g| self.coefficient(&g.ballot) * int(g.count))
            .sum()
    }
}

/// Assorter built from a linear assertion: `score(b) = (f(b) - lo) / (-2 lo)`.
/// Ballots with `f = 0` score exactly 1/2.
#[derive(Clone, Debug)]
pub struct Assorter {
    linear: LinearAssertion,
    scale: Rational,
    upper_bound: Rational,
}

pub fn to_assorter(linear: LinearAssertion) -> Result<Assorter> {
    if !linear.lo.is_negative() {
        return Err(Error::DegenerateAssertion);
    }
    let scale = -int(2) * &linear.lo;
    let upper_bound = (&linear.hi - &linear.lo) / &scale;
    Ok(Assorter {
        linear,
        scale,
        upper_bound,
    })
}

impl Assorter {
    pub fn linear(&self) -> &LinearAssertion {
        &self.linear
    }

    pub fn score(&self, ballot: &Ballot) -> Rational {
        (self.linear.coefficient(ballot) - &self.linear.lo) / &self.scale
    }

    pub fn upper_bound(&self) -> &Rational {
        &self.upper_bound
    }

    /// Mean score over every ballot cast, computed ballot by ballot.
    pub fn mean(&self, election: &Election) -> Rational {
        let sum: Rational = election
            .groups()
            .iter()
            .map(|g| self.score(&g.ballot) * int(g.count))
            .sum();
        sum / int(election.total_ballots())
    }
}

/// An assertion together with its standing on the reported CVRs.
#[derive(Clone, Debug, PartialEq)]
pub struct AssertionReport {
    pub assertion: Assertion,
    pub holds: bool,
    pub mean: Rational,
    /// `2 * mean - 1`.
    pub margin: Rational,
    pub upper_bound: Rational,
    /// Expected sample size; `f64::INFINITY` when it cannot be audited.
    pub asn: f64,
}

pub fn report(
    assertion: &Assertion,
    election: &Election,
    params: &AuditParameters,
) -> Result<AssertionReport> {
    params.validate()?;
    report_with(assertion, election, params, |q| estimate_asn(q, &params.asn))
}

/// [`report`] with a caller-supplied ASN estimator.
pub(crate) fn report_with(
    assertion: &Assertion,
    election: &Election,
    params: &AuditParameters,
    asn: impl FnOnce(&AsnQuery) -> Result<f64>,
) -> Result<AssertionReport> {
    assertion.validate(election)?;
    let (mean, margin, upper_bound) = match small_figures(assertion, election) {
        Some(Ok([mean, margin, upper])) => (from_small(mean), from_small(margin), from_small(upper)),
        Some(Err(e)) => return Err(e),
        None => big_figures(assertion, election)?,
    };
    let holds = margin.is_positive();
    let asn = if holds {
        asn(&AsnQuery {
            margin: margin.clone(),
            upper_bound: upper_bound.clone(),
            risk_limit: params.risk_limit,
            error_rate: params.error_rate,
            total_ballots: election.total_ballots(),
        })?
    } else {
        f64::INFINITY
    };
    Ok(AssertionReport {
        assertion: assertion.clone(),
        holds,
        mean,
        margin,
        upper_bound,
        asn,
    })
}


/// `[mean, margin, upper bound]` in fixed-width arithmetic, or `None` on
/// overflow. With `depth = -lo`: `margin = total / (N depth)` and
/// `upper = (hi - lo) / (2 depth)`.
fn small_figures(assertion: &Assertion, election: &Election) -> Option<Result<[Small; 3]>> {
    let s1 = i128::from(election.seats()) + 1;
    // depth = dp / dq; width = hi - lo.
    let (dp, dq, width) = match assertion {
        Assertion::InitialQuota { .. } => (1, s1, 1),
        Assertion::TransferBelow { cap, .. } => {
            let (p, q) = to_small(cap)?.into_raw();
            let m = s1.checked_mul(q.checked_sub(p)?)?;
            (m.checked_sub(q)?, m, 1i128)
        }
        _ => (1, 1, 2),
    };
    if dp <= 0 {
        return Some(Err(Error::DegenerateAssertion));
    }
    let upper = Small::new(width.checked_mul(dq)?, dp.checked_mul(2)?);
    let total = small_total(assertion, election)?;
    let n = i128::from(election.total_ballots());
    let (tn, td) = total.into_raw();
    let margin = Small::new(tn.checked_mul(dq)?, td.checked_mul(dp)?.checked_mul(n)?);
    let (mn, md) = (*margin.numer(), *margin.denom());
    let mean = Small::new(mn.checked_add(md)?, md.checked_mul(2)?);
    Some(Ok([mean, margin, upper]))
}

fn big_figures(assertion: &Assertion, election: &Election) -> Result<(Rational, Rational, Rational)> {
    let (lo, hi) = linear_range(assertion, election.seats());
    if !lo.is_negative() {
        return Err(Error::DegenerateAssertion);
    }
    let scale = int(-2) * &lo;
    let upper = (hi - &lo) / &scale;
    let total = big_total(assertion, election);
    let margin = total * int(2) / (int(election.total_ballots()) * &scale);
    let mean = (int(1) + &margin) / int(2);
    Ok((mean, margin, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::AsnMethod;

    fn c(i: u32) -> CandidateId {
        CandidateId(i)
    }

    fn worked_example() -> Election {
        Election::with_numbered_candidates(
            4,
            vec![
                (Ballot::from_ids(&[0, 2]), 8001),
                (Ballot::from_ids(&[0]), 1000),
                (Ballot::from_ids(&[1, 2, 3]), 3000),
                (Ballot::from_ids(&[2, 3]), 5000),
                (Ballot::from_ids(&[3, 0, 1]), 4000),
            ],
            2,
        )
        .unwrap()
    }

    fn capped_example() -> Election {
        Election::with_numbered_candidates(
            4,
            vec![
                (Ballot::from_ids(&[0, 1]), 30),
                (Ballot::from_ids(&[3, 0, 1]), 20),
                (Ballot::from_ids(&[2, 0, 1]), 4),
                (Ballot::from_ids(&[1, 3]), 2),
                (Ballot::from_ids(&[2]), 4),
            ],
            2,
        )
        .unwrap()
    }

    fn nl_capped_example() -> Assertion {
        Assertion::NeverLoses {
            winner: c(3),
            loser: c(1),
            caps: TransferCaps::single(c(0), ratio(3, 10)),
            g: CandidateSet::new(),
            o: CandidateSet::new(),
        }
    }

    #[test]
    fn evaluates_worked_examples() {
        let e = worked_example();
        assert!(evaluate(&Assertion::InitialQuota { candidate: c(0) }, &e).unwrap());
        assert!(!evaluate(&Assertion::InitialQuota { candidate: c(2) }, &e).unwrap());
        let ag = Assertion::AlwaysGreater {
            winner: c(0),
            loser: c(1),
        };
        assert!(evaluate(&ag, &e).unwrap());

        let e2 = capped_example();
        assert!(evaluate(&nl_capped_example(), &e2).unwrap());
        let ag42 = Assertion::AlwaysGreater {
            winner: c(3),
            loser: c(1),
        };
        assert!(!evaluate(&ag42, &e2).unwrap());
    }

    #[test]
    fn linear_totals() {
        let e = worked_example();
        let iq = to_linear(&Assertion::InitialQuota { candidate: c(0) }, &e).unwrap();
        assert_eq!(iq.total(&e), int(2000) + ratio(2, 3));
        let ag = Assertion::AlwaysGreater {
            winner: c(0),
            loser: c(1),
        };
        assert_eq!(to_linear(&ag, &e).unwrap().total(&e), int(6001));

        let e2 = capped_example();
        let nl = to_linear(&nl_capped_example(), &e2).unwrap();
        assert_eq!(nl.total(&e2), int(5));
        assert_eq!((nl.lower(), nl.upper()), (&int(-1), &int(1)));
        for g in e2.groups() {
            let f = nl.coefficient(&g.ballot);
            assert!(f >= int(-1) && f <= int(1));
        }
    }

    #[test]
    fn assorter_scores() {
        let e = worked_example();
        let ag = Assertion::AlwaysGreater {
            winner: c(0),
            loser: c(1),
        };
        let a = to_assorter(to_linear(&ag, &e).unwrap()).unwrap();
        assert_eq!(a.score(&Ballot::from_ids(&[0])), int(1));
        assert_eq!(a.score(&Ballot::from_ids(&[1, 0])), int(0));
        assert_eq!(a.score(&Ballot::from_ids(&[2])), ratio(1, 2));
        assert_eq!(a.score(&Ballot::from_ids(&[3, 0])), ratio(1, 2));
        assert_eq!(a.score(&Ballot::empty()), ratio(1, 2));
        assert_eq!(a.mean(&e), (ratio(6001, 21001) + int(1)) / int(2));
        assert_eq!(a.upper_bound(), &int(1));
    }

    #[test]
    fn plurality_style_assorter() {
        // Alice (0) vs Bob (1) on single-mark ballots.
        let e = Election::with_numbered_candidates(
            3,
            vec![
                (Ballot::from_ids(&[0]), 1),
                (Ballot::from_ids(&[1]), 1),
                (Ballot::from_ids(&[2]), 1),
            ],
            1,
        )
        .unwrap();
        let ag = Assertion::AlwaysGreater {
            winner: c(0),
            loser: c(1),
        };
        let a = to_assorter(to_linear(&ag, &e).unwrap()).unwrap();
        assert_eq!(a.score(&Ballot::from_ids(&[0])), int(1));
        assert_eq!(a.score(&Ballot::from_ids(&[1])), int(0));
        assert_eq!(a.score(&Ballot::from_ids(&[2])), ratio(1, 2));
        assert_eq!(a.mean(&e), ratio(1, 2));
        assert!(!evaluate(&ag, &e).unwrap());
    }

    #[test]
    fn degenerate_transfer_cap() {
        let e = worked_example();
        let ut = Assertion::TransferBelow {
            candidate: c(0),
            cap: ratio(2, 3),
        };
        let lin = to_linear(&ut, &e).unwrap();
        assert!(matches!(to_assorter(lin), Err(Error::DegenerateAssertion)));
    }

    #[test]
    fn quota_form_differs_for_transfer_caps() {
        // T = 10, N = 24, Q = 9: T < Q/(1-cap) needs cap > 1/10, the audited
        // form T < 8/(1-cap) needs cap > 1/5.
        let e = Election::with_numbered_candidates(
            3,
            vec![
                (Ballot::from_ids(&[0]), 10),
                (Ballot::from_ids(&[1]), 10),
                (Ballot::from_ids(&[2]), 4),
            ],
            2,
        )
        .unwrap();
        let ut = Assertion::TransferBelow {
            candidate: c(0),
            cap: ratio(3, 20),
        };
        assert!(evaluate_quota_form(&ut, &e).unwrap());
        assert!(!evaluate(&ut, &e).unwrap());
    }

    #[test]
    fn validation_errors() {
        let e = worked_example();
        let bad = Assertion::AlwaysGreater {
            winner: c(0),
            loser: c(9),
        };
        assert!(evaluate(&bad, &e).is_err());
        let same = Assertion::AlwaysGreater {
            winner: c(0),
            loser: c(0),
        };
        assert!(evaluate(&same, &e).is_err());
        let nl_in_w = Assertion::NeverLoses {
            winner: c(0),
            loser: c(1),
            caps: TransferCaps::single(c(0), ratio(1, 2)),
            g: CandidateSet::new(),
            o: CandidateSet::new(),
        };
        assert!(evaluate(&nl_in_w, &e).is_err());
        let ut = Assertion::TransferBelow {
            candidate: c(0),
            cap: int(1),
        };
        assert!(evaluate(&ut, &e).is_err());
    }

    #[test]
    fn reports() {
        let e = worked_example();
        let params = AuditParameters {
            risk_limit: 0.1,
            error_rate: 0.0,
            asn: AsnMethod::ClosedForm,
        };
        let ag = Assertion::AlwaysGreater {
            winner: c(0),
            loser: c(1),
        };
        let r = report(&ag, &e, &params).unwrap();
        assert!(r.holds);
        assert_eq!(r.margin, ratio(6001, 21001));
        assert!(r.asn.is_finite());

        let iq = report(&Assertion::InitialQuota { candidate: c(0) }, &e, &params).unwrap();
        let a = to_assorter(to_linear(&iq.assertion, &e).unwrap()).unwrap();
        assert_eq!(iq.mean, a.mean(&e));
        assert_eq!(iq.margin, ratio(6002, 21001));
        assert_eq!(iq.upper_bound, ratio(3, 2));

        let lost = Assertion::AlwaysGreater {
            winner: c(1),
            loser: c(0),
        };
        let r = report(&lost, &e, &params).unwrap();
        assert!(!r.holds);
        assert_eq!(r.asn, f64::INFINITY);
    }

    #[test]
    fn fixed_width_figures_match_exact_ones() {
        let e = worked_example();
        let mut cases = vec![
            Assertion::InitialQuota { candidate: c(0) },
            Assertion::InitialQuota { candidate: c(3) },
            Assertion::AlwaysGreater { winner: c(0), loser: c(1) },
            Assertion::AlwaysGreater { winner: c(3), loser: c(2) },
        ];
        for k in 1..12 {
            cases.push(Assertion::TransferBelow { candidate: c(0), cap: ratio(k, 13) });
        }
        for cap in [ratio(2000, 9001), ratio(1, 3), ratio(2, 3)] {
            cases.push(Assertion::NeverLoses {
                winner: c(3),
                loser: c(1),
                caps: TransferCaps::single(c(0), cap),
                g: [c(2)].into_iter().collect(),
                o: [c(1)].into_iter().collect(),
            });
        }
        for a in &cases {
            let small = small_figures(a, &e).expect("fits");
            let big = big_figures(a, &e);
            match (small, big) {
                (Ok([mean, margin, upper]), Ok(b)) => {
                    assert_eq!((from_small(mean), from_small(margin), from_small(upper)), b, "{a:?}");
                    assert_eq!(holds_unchecked(a, &e), b.1.is_positive());
                }
                (Err(_), Err(_)) => {}
                (x, y) => panic!("{a:?}: {x:?} vs {y:?}"),
            }
        }
    }
}