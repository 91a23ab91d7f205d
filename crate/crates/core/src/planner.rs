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

//! Assertion generation for 2-seat elections.
//!
//! Three methods are provided. The general method first finds candidates
//! that are beaten by two others on every count ([`Planner::non_winners`])
//! and then rules out each remaining alternative winner pair with a single
//! never-loses assertion plus the always-greater facts it relies on
//! ([`Planner::find_auditable_assertions`]). The two-quota method applies
//! when both reported winners have a quota on first preferences. The
//! one-quota method applies when at least one does; it searches over an
//! assumed cap on that winner's transfer value.

use std::cell::{OnceCell, RefCell};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::assertions::{evaluate, holds_unchecked, report_with, Assertion, AssertionReport};
use crate::audit::{estimate_asn, AsnMethod, AuditParameters};
use crate::ballot::{CandidateId, CandidateSet, Election};
use crate::bounds::{lower_basic, TransferCaps};
use crate::error::{Error, Result};
use crate::rational::{int, ratio, Rational};
use crate::tabulator::{max_transfer_value, tabulate};

pub const PLANNING_SEATS: u32 = 2;

/// Default step of the one-quota transfer-cap search.
pub fn default_delta() -> Rational {
    ratio(1, 100)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMethod {
    General,
    OneQuota,
    TwoQuota,
}

impl PlanMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanMethod::General => "general",
            PlanMethod::OneQuota => "one-quota",
            PlanMethod::TwoQuota => "two-quota",
        }
    }
}

impl fmt::Display for PlanMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PlanMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(PlanMethod::General),
            "one-quota" => Ok(PlanMethod::OneQuota),
            "two-quota" => Ok(PlanMethod::TwoQuota),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditPlan {
    pub method: PlanMethod,
    pub assertions: Vec<AssertionReport>,
    /// Largest member ASN; 0 for an empty plan.
    pub overall_asn: f64,
    pub reported_winners: [CandidateId; 2],
    pub risk_limit: f64,
    pub error_rate: f64,
    /// One-quota search step.
    pub delta: Option<Rational>,
    /// One-quota transfer-value cap chosen for the first winner.
    pub transfer_cap: Option<Rational>,
    /// The tabulation broke an elimination tie.
    pub tie_sensitive: bool,
}

impl AuditPlan {
    pub fn contains(&self, assertion: &Assertion) -> bool {
        self.assertions.iter().any(|r| &r.assertion == assertion)
    }

    pub fn assertion_list(&self) -> Vec<Assertion> {
        self.assertions.iter().map(|r| r.assertion.clone()).collect()
    }

    /// Copy without `assertion`; the overall ASN is recomputed.
    pub fn without(&self, assertion: &Assertion) -> AuditPlan {
        let mut plan = self.clone();
        plan.assertions.retain(|r| &r.assertion != assertion);
        plan.overall_asn = max_asn(&plan.assertions);
        plan
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MethodOutcome {
    NotApplicable(String),
    /// No assertion set was found; `pair` is the first alternative winner
    /// pair that could not be ruled out, if any.
    Unauditable { pair: Option<(CandidateId, CandidateId)> },
    Planned(AuditPlan),
}

impl MethodOutcome {
    pub fn plan(&self) -> Option<&AuditPlan> {
        match self {
            MethodOutcome::Planned(p) => Some(p),
            _ => None,
        }
    }

    pub fn into_plan(self) -> Option<AuditPlan> {
        match self {
            MethodOutcome::Planned(p) => Some(p),
            _ => None,
        }
    }

    pub fn entry(&self) -> RowEntry {
        match self {
            MethodOutcome::NotApplicable(_) => RowEntry::NotApplicable,
            MethodOutcome::Unauditable { .. } => RowEntry::Asn(f64::INFINITY),
            MethodOutcome::Planned(p) => RowEntry::Asn(p.overall_asn),
        }
    }
}

/// One cell of a method comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RowEntry {
    NotApplicable,
    Asn(f64),
}

impl fmt::Display for RowEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowEntry::NotApplicable => f.write_str("--"),
            RowEntry::Asn(a) => f.write_str(&format_asn(*a)),
        }
    }
}

/// `+∞` for infinite values, otherwise rounded up to a whole ballot.
pub fn format_asn(asn: f64) -> String {
    if asn.is_infinite() {
        "+∞".to_string()
    } else {
        format!("{}", asn.ceil() as u64)
    }
}

/// ASNs of the three methods side by side.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub two_quota: RowEntry,
    pub one_quota: RowEntry,
    pub general: RowEntry,
}

impl fmt::Display for ComparisonRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "two-quota: {}  one-quota: {}  general: {}",
            self.two_quota, self.one_quota, self.general
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AutoPlan {
    /// The cheapest plan with a finite ASN.
    pub selected: Option<AuditPlan>,
    pub two_quota: MethodOutcome,
    pub one_quota: MethodOutcome,
    pub general: MethodOutcome,
}

impl AutoPlan {
    pub fn row(&self) -> ComparisonRow {
        ComparisonRow {
            two_quota: self.two_quota.entry(),
            one_quota: self.one_quota.entry(),
            general: self.general.entry(),
        }
    }
}

/// Always-greater relations, definite non-winners, and the assertions
/// supporting them.
#[derive(Clone, Debug, PartialEq)]
pub struct NonWinners {
    pub ag: BTreeSet<(CandidateId, CandidateId)>,
    pub nw: CandidateSet,
    pub nwa: Vec<AssertionReport>,
}

fn max_asn(reports: &[AssertionReport]) -> f64 {
    reports.iter().map(|r| r.asn).fold(0.0, f64::max)
}

/// An ordered, duplicate-free assertion set.
#[derive(Default)]
struct Bundle {
    reports: Vec<AssertionReport>,
    seen: HashSet<Assertion>,
}

impl Bundle {
    fn push(&mut self, report: AssertionReport) {
        if self.seen.insert(report.assertion.clone()) {
            self.reports.push(report);
        }
    }

    fn extend(&mut self, reports: impl IntoIterator<Item = AssertionReport>) {
        for r in reports {
            self.push(r);
        }
    }

    fn asn(&self) -> f64 {
        max_asn(&self.reports)
    }
}

/// A candidate way to rule something out, compared by `(asn, size)`.
struct Cover {
    asn: f64,
    reports: Vec<AssertionReport>,
}

impl Cover {
    fn new(reports: Vec<AssertionReport>) -> Self {
        Cover {
            asn: max_asn(&reports),
            reports,
        }
    }

    fn beats(&self, other: &Option<Cover>) -> bool {
        match other {
            None => self.asn.is_finite(),
            Some(o) => (self.asn, self.reports.len()) < (o.asn, o.reports.len()),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Memo {
    Quota(CandidateId),
    Greater(CandidateId, CandidateId),
}

impl Memo {
    fn of(assertion: &Assertion) -> Option<Memo> {
        match *assertion {
            Assertion::InitialQuota { candidate } => Some(Memo::Quota(candidate)),
            Assertion::AlwaysGreater { winner, loser } => Some(Memo::Greater(winner, loser)),
            _ => None,
        }
    }
}

pub struct Planner<'e> {
    election: &'e Election,
    params: AuditParameters,
    winners: [CandidateId; 2],
    tie_sensitive: bool,
    reports: RefCell<HashMap<Memo, AssertionReport>>,
    asns: RefCell<HashMap<(Rational, Rational), f64>>,
    non_winners: OnceCell<NonWinners>,
}

impl<'e> Planner<'e> {
    /// Plans for the outcome produced by [`tabulate`].
    pub fn new(election: &'e Election, params: AuditParameters) -> Result<Self> {
        Self::build(election, None, params, false)
    }

    /// Plans for `reported`. Unless `allow_mismatch` is set, `reported` must
    /// agree with our own tabulation.
    pub fn for_reported(
        election: &'e Election,
        reported: [CandidateId; 2],
        params: AuditParameters,
        allow_mismatch: bool,
    ) -> Result<Self> {
        Self::build(election, Some(reported), params, allow_mismatch)
    }

    fn build(
        election: &'e Election,
        reported: Option<[CandidateId; 2]>,
        params: AuditParameters,
        allow_mismatch: bool,
    ) -> Result<Self> {
        if election.seats() != PLANNING_SEATS {
            return Err(Error::invalid(format!(
                "audit planning needs a 2-seat election, got {} seats",
                election.seats()
            )));
        }
        params.validate()?;
        let record = tabulate(election);
        let mut tabulated = record.winners.clone();
        tabulated.sort();
        let winners = match reported {
            None => [tabulated[0], tabulated[1]],
            Some(mut r) => {
                election.check_candidate(r[0])?;
                election.check_candidate(r[1])?;
                if r[0] == r[1] {
                    return Err(Error::invalid("reported winners must be distinct"));
                }
                r.sort();
                if !allow_mismatch && r[..] != tabulated[..] {
                    return Err(Error::WinnerMismatch {
                        reported: r.to_vec(),
                        tabulated,
                    });
                }
                r
            }
        };
        Ok(Planner {
            election,
            params,
            winners,
            tie_sensitive: record.tie_occurred,
            reports: RefCell::new(HashMap::new()),
            asns: RefCell::new(HashMap::new()),
            non_winners: OnceCell::new(),
        })
    }

    pub fn election(&self) -> &Election {
        self.election
    }

    pub fn winners(&self) -> [CandidateId; 2] {
        self.winners
    }

    pub fn parameters(&self) -> &AuditParameters {
        &self.params
    }

    /// Report for `assertion`. IQ and AG reports are memoized, and
    /// Monte-Carlo ASNs are shared between assertions with the same margin
    /// and upper bound.
    pub fn report(&self, assertion: &Assertion) -> Result<AssertionReport> {
        let key = Memo::of(assertion);
        if let Some(r) = key.and_then(|k| self.reports.borrow().get(&k).cloned()) {
            return Ok(r);
        }
        let r = report_with(assertion, self.election, &self.params, |q| {
            if self.params.asn == AsnMethod::ClosedForm {
                return estimate_asn(q, &self.params.asn);
            }
            let key = (q.margin.clone(), q.upper_bound.clone());
            if let Some(&a) = self.asns.borrow().get(&key) {
                return Ok(a);
            }
            let a = estimate_asn(q, &self.params.asn)?;
            self.asns.borrow_mut().insert(key, a);
            Ok(a)
        })?;
        if let Some(k) = key {
            self.reports.borrow_mut().insert(k, r.clone());
        }
        Ok(r)
    }

    fn plan(&self, method: PlanMethod, bundle: Bundle) -> AuditPlan {
        AuditPlan {
            method,
            overall_asn: bundle.asn(),
            assertions: bundle.reports,
            reported_winners: self.winners,
            risk_limit: self.params.risk_limit,
            error_rate: self.params.error_rate,
            delta: None,
            transfer_cap: None,
            tie_sensitive: self.tie_sensitive,
        }
    }

    fn ag(w: CandidateId, l: CandidateId) -> Assertion {
        Assertion::AlwaysGreater { winner: w, loser: l }
    }

    /// Every holding AG relation, the candidates dominated by at least two
    /// others, and the two cheapest AG assertions for each such candidate.
    pub fn non_winners(&self) -> Result<NonWinners> {
        if let Some(nw) = self.non_winners.get() {
            return Ok(nw.clone());
        }
        let mut ag = BTreeSet::new();
        for w in self.election.candidates() {
            for l in self.election.candidates().filter(|&l| l != w) {
                if evaluate(&Self::ag(w, l), self.election)? {
                    ag.insert((w, l));
                }
            }
        }
        let mut nw = CandidateSet::new();
        let mut nwa = Vec::new();
        for c in self.election.candidates() {
            let dominators: Vec<CandidateId> =
                ag.iter().filter(|(_, l)| *l == c).map(|(w, _)| *w).collect();
            if dominators.len() < 2 {
                continue;
            }
            nw.insert(c);
            let mut ranked = dominators
                .into_iter()
                .map(|w| Ok((self.report(&Self::ag(w, c))?, w)))
                .collect::<Result<Vec<_>>>()?;
            ranked.sort_by(|(a, wa), (b, wb)| a.asn.total_cmp(&b.asn).then(wa.cmp(wb)));
            nwa.extend(ranked.into_iter().take(2).map(|(r, _)| r));
        }
        let result = NonWinners { ag, nw, nwa };
        let _ = self.non_winners.set(result.clone());
        Ok(result)
    }

    fn pairs(&self) -> Vec<(CandidateId, CandidateId)> {
        let n = self.election.num_candidates() as u32;
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let pair = (CandidateId(a), CandidateId(b));
                if [pair.0, pair.1] != self.winners {
                    pairs.push(pair);
                }
            }
        }
        pairs
    }

    /// The general method: rule out every alternative pair with the
    /// non-winner AGs or one NL assertion (seated set `{c_i}`, cap 2/3).
    pub fn find_auditable_assertions(&self) -> Result<MethodOutcome> {
        let NonWinners { ag, nw, nwa } = self.non_winners()?;
        let mut plan = Bundle::default();
        plan.extend(nwa);
        let max_tv = max_transfer_value(PLANNING_SEATS);
        let dominated_by = |l: CandidateId, w: CandidateId| -> CandidateSet {
            ag.iter()
                .filter(|&&(g, x)| x == l && g != w)
                .map(|&(g, _)| g)
                .collect()
        };
        for (c1, c2) in self.pairs() {
            if nw.contains(c1) || nw.contains(c2) {
                continue;
            }
            let g1 = dominated_by(c1, c2);
            let g2 = dominated_by(c2, c1);
            let mut best: Option<Cover> = None;
            for o in self.election.candidates().filter(|&o| o != c1 && o != c2) {
                let o_set: CandidateSet =
                    ag.iter().filter(|(w, _)| *w == o).map(|&(_, l)| l).collect();
                for (seated, loser, g) in [(c1, c2, &g2), (c2, c1, &g1)] {
                    let nl = Assertion::NeverLoses {
                        winner: o,
                        loser,
                        caps: TransferCaps::single(seated, max_tv.clone()),
                        g: g.clone(),
                        o: o_set.without(seated),
                    };
                    if !holds_unchecked(&nl, self.election) {
                        continue;
                    }
                    let mut la = vec![self.report(&nl)?];
                    for x in o_set.iter() {
                        la.push(self.report(&Self::ag(o, x))?);
                    }
                    for x in g.iter() {
                        la.push(self.report(&Self::ag(x, loser))?);
                    }
                    let option = Cover::new(la);
                    if option.beats(&best) {
                        best = Some(option);
                    }
                }
            }
            match best {
                Some(b) => plan.extend(b.reports),
                None => {
                    return Ok(MethodOutcome::Unauditable {
                        pair: Some((c1, c2)),
                    })
                }
            }
        }
        Ok(MethodOutcome::Planned(self.plan(PlanMethod::General, plan)))
    }

    /// `{IQ(w1), IQ(w2)}`, when both reported winners reach a quota on first
    /// preferences.
    pub fn two_quota_plan(&self) -> Result<MethodOutcome> {
        let q = self.election.quota();
        if let Some(w) = self.winners.iter().find(|&&w| lower_basic(self.election, w) < q) {
            return Ok(MethodOutcome::NotApplicable(format!(
                "{} has no quota on first preferences",
                self.election.name(*w)
            )));
        }
        let mut plan = Bundle::default();
        for w in self.winners {
            plan.push(self.report(&Assertion::InitialQuota { candidate: w })?);
        }
        Ok(MethodOutcome::Planned(self.plan(PlanMethod::TwoQuota, plan)))
    }

    /// Reported winners ordered so that the first has the larger first
    /// preference tally (lower id on ties).
    fn quota_order(&self) -> [CandidateId; 2] {
        let [a, b] = self.winners;
        if lower_basic(self.election, b) > lower_basic(self.election, a) {
            [b, a]
        } else {
            [a, b]
        }
    }

    /// Cheapest way to show `c` cannot be seated alongside `w1` given the cap
    /// on `w1`'s transfer value: an NL from `w2`, or two AGs over `c`.
    fn one_quota_cover(
        &self,
        [w1, w2]: [CandidateId; 2],
        c: CandidateId,
        cap: &Rational,
        ag: &BTreeSet<(CandidateId, CandidateId)>,
    ) -> Result<Option<Cover>> {
        let mut best: Option<Cover> = None;
        let o_full: CandidateSet = ag
            .iter()
            .filter(|&&(w, l)| w == w2 && l != w1)
            .map(|&(_, l)| l)
            .collect();
        let g_full: CandidateSet = ag
            .iter()
            .filter(|&&(g, l)| l == c && g != w1)
            .map(|&(g, _)| g)
            .collect();
        let empty = CandidateSet::new();
        for (o, g) in [
            (&o_full, &g_full),
            (&empty, &g_full),
            (&o_full, &empty),
            (&empty, &empty),
        ] {
            let nl = Assertion::NeverLoses {
                winner: w2,
                loser: c,
                caps: TransferCaps::single(w1, cap.clone()),
                g: g.clone(),
                o: o.clone(),
            };
            if !holds_unchecked(&nl, self.election) {
                continue;
            }
            let mut la = vec![self.report(&nl)?];
            for x in o.iter() {
                la.push(self.report(&Self::ag(w2, x))?);
            }
            for x in g.iter() {
                la.push(self.report(&Self::ag(x, c))?);
            }
            let option = Cover::new(la);
            if option.beats(&best) {
                best = Some(option);
            }
        }
        let mut dominators = ag
            .iter()
            .filter(|&&(_, l)| l == c)
            .map(|&(w, _)| Ok((self.report(&Self::ag(w, c))?, w)))
            .collect::<Result<Vec<_>>>()?;
        if dominators.len() >= 2 {
            dominators.sort_by(|(a, wa), (b, wb)| a.asn.total_cmp(&b.asn).then(wa.cmp(wb)));
            let option = Cover::new(dominators.into_iter().take(2).map(|(r, _)| r).collect());
            if option.beats(&best) {
                best = Some(option);
            }
        }
        Ok(best)
    }

    /// Assertions for one value of the cap, or `None` if some candidate
    /// cannot be ruled out.
    fn one_quota_config(
        &self,
        order: [CandidateId; 2],
        cap: &Rational,
        ag: &BTreeSet<(CandidateId, CandidateId)>,
    ) -> Result<Option<Bundle>> {
        let [w1, w2] = order;
        let mut bundle = Bundle::default();
        bundle.push(self.report(&Assertion::InitialQuota { candidate: w1 })?);
        if *cap < max_transfer_value(PLANNING_SEATS) {
            bundle.push(self.report(&Assertion::TransferBelow {
                candidate: w1,
                cap: cap.clone(),
            })?);
        }
        for c in self.election.candidates().filter(|&c| c != w1 && c != w2) {
            match self.one_quota_cover(order, c, cap, ag)? {
                Some(option) => bundle.extend(option.reports),
                None => return Ok(None),
            }
        }
        Ok(Some(bundle))
    }

    /// The one-quota method. The cap on the first winner's transfer value
    /// starts one step above its actual value and grows by `delta` while
    /// the overall ASN does not increase; the cap 2/3 (which needs no UT
    /// assertion) is always tried as well.
    pub fn one_quota_plan(&self, delta: &Rational) -> Result<MethodOutcome> {
        if !delta.is_positive() {
            return Err(Error::invalid("delta must be positive"));
        }
        let order = self.quota_order();
        let w1 = order[0];
        let first = lower_basic(self.election, w1);
        let q = self.election.quota();
        if first < q {
            return Ok(MethodOutcome::NotApplicable(
                "no reported winner has a quota on first preferences".into(),
            ));
        }
        let tau = int(1) - ratio(q, first);
        let max_tv = max_transfer_value(PLANNING_SEATS);
        let ag = self.non_winners()?.ag;

        let mut best: Option<(Rational, Bundle)> = None;
        let mut consider = |cap: Rational, bundle: Option<Bundle>| -> f64 {
            let asn = bundle.as_ref().map_or(f64::INFINITY, Bundle::asn);
            let better = match (&best, &bundle) {
                (_, None) => false,
                (None, Some(b)) => b.asn().is_finite(),
                (Some((_, cur)), Some(b)) => b.asn() < cur.asn(),
            };
            if better {
                best = Some((cap, bundle.expect("checked above")));
            }
            asn
        };

        let mut previous: Option<f64> = None;
        let mut k = 1u64;
        loop {
            let cap = &tau + delta * int(k);
            if cap >= max_tv {
                break;
            }
            let asn = consider(cap.clone(), self.one_quota_config(order, &cap, &ag)?);
            if previous.is_some_and(|p| asn > p) {
                break;
            }
            previous = Some(asn);
            k += 1;
        }
        consider(max_tv.clone(), self.one_quota_config(order, &max_tv, &ag)?);

        Ok(match best {
            Some((cap, bundle)) => {
                let mut plan = self.plan(PlanMethod::OneQuota, bundle);
                plan.delta = Some(delta.clone());
                plan.transfer_cap = Some(cap);
                MethodOutcome::Planned(plan)
            }
            None => MethodOutcome::Unauditable { pair: None },
        })
    }

    pub fn plan_with(&self, method: PlanMethod, delta: &Rational) -> Result<MethodOutcome> {
        match method {
            PlanMethod::General => self.find_auditable_assertions(),
            PlanMethod::OneQuota => self.one_quota_plan(delta),
            PlanMethod::TwoQuota => self.two_quota_plan(),
        }
    }

    /// Runs all three methods and selects the cheapest finite plan (ties go
    /// to one-quota, then two-quota, then general).
    pub fn auto_plan(&self, delta: &Rational) -> Result<AutoPlan> {
        let one_quota = self.one_quota_plan(delta)?;
        let two_quota = self.two_quota_plan()?;
        let general = self.find_auditable_assertions()?;
        let mut selected: Option<&AuditPlan> = None;
        for plan in [&one_quota, &two_quota, &general].into_iter().filter_map(|o| o.plan()) {
            if plan.overall_asn.is_finite()
                && selected.is_none_or(|s| plan.overall_asn < s.overall_asn)
            {
                selected = Some(plan);
            }
        }
        Ok(AutoPlan {
            selected: selected.cloned(),
            two_quota,
            one_quota,
            general,
        })
    }
}

/// Shorthand for `Planner::new(election, params)?.auto_plan(delta)`.
pub fn auto_plan(election: &Election, params: AuditParameters, delta: &Rational) -> Result<AutoPlan> {
    Planner::new(election, params)?.auto_plan(delta)
}
