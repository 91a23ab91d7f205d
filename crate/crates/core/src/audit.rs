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

//! Sample-size estimation and simulated ballot-comparison audits.
//!
//! Each assertion's assorter is audited through the comparison transform
//! `B = (1 - omega/u) / (2 - v/u)`, where `omega` is the overstatement (CVR
//! score minus MVR score), `u` the assorter's upper bound and `v` the diluted
//! margin on the CVRs. The risk of each assertion is measured with a betting
//! martingale `T_n = prod (1 + lambda (2 B_i - 1))`; the assertion is
//! confirmed once `T_n >= 1/alpha`. Draws are made with replacement.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assertions::{to_assorter, to_linear, Assertion, Assorter};
use crate::ballot::{Ballot, CandidateId, Election};
use crate::error::{Error, Result};
use crate::planner::AuditPlan;
use crate::rational::{to_f64, Rational};

/// Largest bet the martingale will place.
pub const LAMBDA_MAX: f64 = 0.99;

pub const DEFAULT_ASN_TRIALS: usize = 1000;
pub const DEFAULT_ASN_SEED: u64 = 0x5354_5652_4c41;

/// Seeds an independent stream for trial `trial` of a run seeded by `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AsnMethod {
    /// Mean draws over simulated audits in which each draw is a one-vote
    /// overstatement with probability `error_rate`.
    MonteCarlo { trials: usize, seed: u64 },
    /// `ceil(ln(1/alpha) / g)` where `g` is the expected log-growth per draw.
    ClosedForm,
}

impl Default for AsnMethod {
    fn default() -> Self {
        AsnMethod::MonteCarlo {
            trials: DEFAULT_ASN_TRIALS,
            seed: DEFAULT_ASN_SEED,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditParameters {
    pub risk_limit: f64,
    pub error_rate: f64,
    pub asn: AsnMethod,
}

impl Default for AuditParameters {
    fn default() -> Self {
        AuditParameters {
            risk_limit: 0.10,
            error_rate: 0.002,
            asn: AsnMethod::default(),
        }
    }
}

impl AuditParameters {
    pub fn validate(&self) -> Result<()> {
        check_risk_limit(self.risk_limit)?;
        check_error_rate(self.error_rate)?;
        if let AsnMethod::MonteCarlo { trials, .. } = self.asn {
            if trials == 0 {
                return Err(Error::invalid("Monte-Carlo ASN needs at least one trial"));
            }
        }
        Ok(())
    }
}

fn check_risk_limit(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("risk limit {alpha} must lie in (0, 1)")))
    }
}

fn check_error_rate(eps: f64) -> Result<()> {
    if (0.0..1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::invalid(format!("error rate {eps} must lie in [0, 1)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsnQuery {
    pub margin: Rational,
    pub upper_bound: Rational,
    pub risk_limit: f64,
    pub error_rate: f64,
    pub total_ballots: u64,
}

/// Comparison-audit constants for one assorter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetProfile {
    /// `B` for a ballot with no error: `1 / (2 - v/u)`.
    pub clean: f64,
    pub lambda: f64,
}

impl BetProfile {
    /// `None` when the margin is not positive.
    pub fn new(margin: f64, upper_bound: f64, error_rate: f64) -> Option<Self> {
        if margin.is_nan() || margin <= 0.0 || upper_bound.is_nan() || upper_bound <= 0.0 {
            return None;
        }
        let clean = 1.0 / (2.0 - margin / upper_bound);
        Some(BetProfile {
            clean,
            lambda: kelly_bet(clean, error_rate),
        })
    }

    /// `B` for a ballot overstated by `omega`.
    pub fn value(&self, omega: f64, upper_bound: f64) -> f64 {
        (1.0 - omega / upper_bound) * self.clean
    }

    fn clean_step(&self) -> f64 {
        (self.lambda * (2.0 * self.clean - 1.0)).ln_1p()
    }

    /// Log-growth of a one-vote overstatement, which halves `B`.
    fn error_step(&self) -> f64 {
        (self.lambda * (self.clean - 1.0)).ln_1p()
    }
}

/// Growth-optimal fixed bet when clean draws give `x0` and a fraction
/// `eps` of draws are one-vote overstatements (`x0 / 2`), clamped to
/// `[0, LAMBDA_MAX]`.
pub fn kelly_bet(x0: f64, eps: f64) -> f64 {
    let a = 2.0 * x0 - 1.0;
    let b = 1.0 - x0;
    if a <= 0.0 {
        return 0.0;
    }
    if b <= 0.0 || eps == 0.0 {
        return LAMBDA_MAX;
    }
    ((1.0 - eps) / b - eps / a).clamp(0.0, LAMBDA_MAX)
}

/// Average sample number for one assertion, or `f64::INFINITY`. Results are
/// capped at the number of ballots (a full hand count).
pub fn estimate_asn(query: &AsnQuery, method: &AsnMethod) -> Result<f64> {
    check_risk_limit(query.risk_limit)?;
    check_error_rate(query.error_rate)?;
    let Some(bet) = BetProfile::new(
        to_f64(&query.margin),
        to_f64(&query.upper_bound),
        query.error_rate,
    ) else {
        return Ok(f64::INFINITY);
    };
    let eps = query.error_rate;
    let up = bet.clean_step();
    let down = bet.error_step();
    let growth = (1.0 - eps) * up + eps * down;
    if bet.lambda == 0.0 || growth.is_nan() || growth <= 0.0 || up.is_nan() || up <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let threshold = (1.0 / query.risk_limit).ln();
    let cap = query.total_ballots.max(1) as f64;
    match *method {
        AsnMethod::ClosedForm => Ok((threshold / growth).ceil().min(cap)),
        AsnMethod::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::invalid("Monte-Carlo ASN needs at least one trial"));
            }
            if eps == 0.0 {
                return Ok((threshold / up).ceil().min(cap));
            }
            let geometric = Geometric::new(eps)
                .map_err(|e| Error::invalid(format!("error rate {eps}: {e}")))?;
            let draws: Vec<u64> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(seed, t);
                    simulated_draws(&geometric, &mut rng, up, down, threshold, query.total_ballots)
                })
                .collect();
            let total: u64 = draws.iter().sum();
            Ok(total as f64 / trials as f64)
        }
    }
}

/// Draws until the log-martingale reaches `threshold`, jumping over runs of
/// clean ballots between errors.
fn simulated_draws(
    geometric: &Geometric,
    rng: &mut ChaCha8Rng,
    up: f64,
    down: f64,
    threshold: f64,
    cap: u64,
) -> u64 {
    let cap = cap.max(1);
    let mut log_t = 0.0;
    let mut n: u64 = 0;
    loop {
        let gap = geometric.sample(rng);
        let needed = ((threshold - log_t) / up).ceil().max(0.0) as u64;
        if needed <= gap {
            return (n + needed).min(cap);
        }
        n = n.saturating_add(gap);
        log_t += gap as f64 * up;
        n += 1;
        log_t += down;
        if n >= cap {
            return cap;
        }
        if log_t >= threshold {
            return n;
        }
    }
}

/// A sequential test of `H0: E[X] <= 1/2` fed one observation at a time.
pub trait SequentialTest {
    fn observe(&mut self, x: f64);
    /// Natural log of the current test statistic.
    fn log_statistic(&self) -> f64;
    fn rejects(&self, risk_limit: f64) -> bool {
        self.log_statistic() >= (1.0 / risk_limit).ln()
    }
}

/// `T_n = prod (1 + lambda (2 x_i - 1))`, a nonnegative supermartingale
/// under the null for `0 <= lambda <= 1` and `x_i >= 0`.
#[derive(Clone, Debug)]
pub struct BettingMartingale {
    lambda: f64,
    log_t: f64,
}

impl BettingMartingale {
    pub fn new(lambda: f64) -> Self {
        BettingMartingale {
            lambda: lambda.clamp(0.0, 1.0),
            log_t: 0.0,
        }
    }
}

impl SequentialTest for BettingMartingale {
    fn observe(&mut self, x: f64) {
        self.log_t += (self.lambda * (2.0 * x - 1.0)).ln_1p();
    }

    fn log_statistic(&self) -> f64 {
        self.log_t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "result")]
pub enum AuditOutcome {
    Certified { draws: u64 },
    Escalated { draws: u64 },
}

impl AuditOutcome {
    pub fn certified(&self) -> bool {
        matches!(self, AuditOutcome::Certified { .. })
    }

    pub fn draws(&self) -> u64 {
        match *self {
            AuditOutcome::Certified { draws } | AuditOutcome::Escalated { draws } => draws,
        }
    }
}

#[derive(Clone, Debug)]
struct AuditedAssertion {
    assorter: Assorter,
    upper_bound: f64,
    bet: BetProfile,
}

/// A ballot-comparison audit of a fixed set of assertions against CVRs.
#[derive(Clone, Debug)]
pub struct ComparisonAudit {
    audited: Vec<AuditedAssertion>,
    risk_limit: f64,
}

impl ComparisonAudit {
    pub fn new(plan: &AuditPlan, cvrs: &Election) -> Result<Self> {
        let assertions: Vec<Assertion> =
            plan.assertions.iter().map(|r| r.assertion.clone()).collect();
        Self::from_assertions(&assertions, cvrs, plan.risk_limit, plan.error_rate)
    }

    /// Margins are taken from `cvrs`; every assertion must hold there.
    pub fn from_assertions(
        assertions: &[Assertion],
        cvrs: &Election,
        risk_limit: f64,
        error_rate: f64,
    ) -> Result<Self> {
        check_risk_limit(risk_limit)?;
        check_error_rate(error_rate)?;
        let audited = assertions
            .iter()
            .map(|a| {
                let assorter = to_assorter(to_linear(a, cvrs)?)?;
                let mean = assorter.mean(cvrs);
                let margin = to_f64(&(Rational::from_integer(2.into()) * mean))
                    - 1.0;
                let upper_bound = to_f64(assorter.upper_bound());
                let bet = BetProfile::new(margin, upper_bound, error_rate).ok_or_else(|| {
                    Error::invalid(format!("assertion {} does not hold on the CVRs", a.tag()))
                })?;
                Ok(AuditedAssertion {
                    assorter,
                    upper_bound,
                    bet,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ComparisonAudit {
            audited,
            risk_limit,
        })
    }

    pub fn with_risk_limit(mut self, risk_limit: f64) -> Result<Self> {
        check_risk_limit(risk_limit)?;
        self.risk_limit = risk_limit;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.audited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.audited.is_empty()
    }

    fn scores(&self, ballot: &Ballot) -> Vec<f64> {
        self.audited
            .iter()
            .map(|a| to_f64(&a.assorter.score(ballot)))
            .collect()
    }

    /// Per-position comparison values `B` for every assertion.
    fn comparison_table(&self, cvrs: &[Ballot], mvrs: &[Ballot]) -> Result<Vec<Vec<f64>>> {
        if cvrs.len() != mvrs.len() {
            return Err(Error::Data(format!(
                "{} CVRs but {} MVRs",
                cvrs.len(),
                mvrs.len()
            )));
        }
        let mut cache: HashMap<&Ballot, Vec<f64>> = HashMap::new();
        for b in cvrs.iter().chain(mvrs) {
            if !cache.contains_key(b) {
                cache.insert(b, self.scores(b));
            }
        }
        let mut pair_cache: HashMap<(&Ballot, &Ballot), usize> = HashMap::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut index = Vec::with_capacity(cvrs.len());
        for (c, m) in cvrs.iter().zip(mvrs) {
            let next = rows.len();
            let i = *pair_cache.entry((c, m)).or_insert(next);
            if i == next {
                let (sc, sm) = (&cache[c], &cache[m]);
                rows.push(
                    self.audited
                        .iter()
                        .enumerate()
                        .map(|(k, a)| a.bet.value(sc[k] - sm[k], a.upper_bound))
                        .collect(),
                );
            }
            index.push(i);
        }
        Ok(index.into_iter().map(|i| rows[i].clone()).collect())
    }

    /// Samples ballot positions uniformly with replacement until every
    /// assertion is confirmed or `max_draws` is reached. `cvrs[i]` and
    /// `mvrs[i]` describe the same physical ballot.
    pub fn run(
        &self,
        cvrs: &[Ballot],
        mvrs: &[Ballot],
        rng: &mut impl Rng,
        max_draws: u64,
    ) -> Result<AuditOutcome> {
        let table = self.comparison_table(cvrs, mvrs)?;
        Ok(self.run_table(&table, rng, max_draws))
    }

    fn run_table(&self, table: &[Vec<f64>], rng: &mut impl Rng, max_draws: u64) -> AuditOutcome {
        let mut tests: Vec<BettingMartingale> = self
            .audited
            .iter()
            .map(|a| BettingMartingale::new(a.bet.lambda))
            .collect();
        let mut open: Vec<usize> = (0..tests.len()).collect();
        if open.is_empty() {
            return AuditOutcome::Certified { draws: 0 };
        }
        if table.is_empty() {
            return AuditOutcome::Escalated { draws: 0 };
        }
        let mut draws = 0;
        while draws < max_draws {
            let row = &table[rng.gen_range(0..table.len())];
            draws += 1;
            open.retain(|&k| {
                tests[k].observe(row[k]);
                !tests[k].rejects(self.risk_limit)
            });
            if open.is_empty() {
                return AuditOutcome::Certified { draws };
            }
        }
        AuditOutcome::Escalated { draws }
    }
}

/// One simulated audit: CVRs, the hand-read ballots in the same order, and
/// the plan being audited.
#[derive(Clone, Copy, Debug)]
pub struct AuditTrial<'a> {
    pub seed: u64,
    pub cvrs: &'a Election,
    pub mvrs: &'a [Ballot],
    pub plan: &'a AuditPlan,
    pub max_draws: u64,
}

/// Runs `trial` at risk limit `risk_limit`. The CVR ballot order is
/// `trial.cvrs.expand()`.
pub fn run_audit(trial: &AuditTrial<'_>, risk_limit: f64) -> Result<AuditOutcome> {
    let audit = ComparisonAudit::new(trial.plan, trial.cvrs)?.with_risk_limit(risk_limit)?;
    let cvrs = trial.cvrs.expand();
    let mut rng = ChaCha8Rng::seed_from_u64(trial.seed);
    audit.run(&cvrs, trial.mvrs, &mut rng, trial.max_draws)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorPolicy {
    /// Swap, truncate or substitute, chosen uniformly.
    #[default]
    Mixed,
    TruncateOnly,
    SwapOnly,
    SubstituteOnly,
}

fn truncate(b: &Ballot) -> Ballot {
    let prefs = b.prefs();
    Ballot::new(prefs[..prefs.len().saturating_sub(1)].to_vec()).expect("prefix of a valid ballot")
}

fn swap_adjacent(b: &Ballot, rng: &mut impl Rng) -> Option<Ballot> {
    let mut prefs = b.prefs().to_vec();
    if prefs.len() < 2 {
        return None;
    }
    let i = rng.gen_range(0..prefs.len() - 1);
    prefs.swap(i, i + 1);
    Some(Ballot::new(prefs).expect("permutation of a valid ballot"))
}

fn random_ranking(num_candidates: usize, rng: &mut impl Rng) -> Ballot {
    let mut ids: Vec<CandidateId> = (0..num_candidates as u32).map(CandidateId).collect();
    let len = rng.gen_range(0..=num_candidates);
    let (chosen, _) = rand::seq::SliceRandom::partial_shuffle(&mut ids[..], rng, len);
    Ballot::new(chosen.to_vec()).expect("distinct candidates")
}

/// Copies `ballots`, editing each one independently with probability `rate`.
pub fn inject_errors(
    ballots: &[Ballot],
    num_candidates: usize,
    rate: f64,
    policy: ErrorPolicy,
    rng: &mut impl Rng,
) -> Result<Vec<Ballot>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!("error rate {rate} must lie in [0, 1]")));
    }
    Ok(ballots
        .iter()
        .map(|b| {
            if rate == 0.0 || !rng.gen_bool(rate) {
                return b.clone();
            }
            let policy = match policy {
                ErrorPolicy::Mixed => [
                    ErrorPolicy::SwapOnly,
                    ErrorPolicy::TruncateOnly,
                    ErrorPolicy::SubstituteOnly,
                ][rng.gen_range(0..3)],
                p => p,
            };
            match policy {
                ErrorPolicy::TruncateOnly => truncate(b),
                ErrorPolicy::SwapOnly => {
                    swap_adjacent(b, rng).unwrap_or_else(|| random_ranking(num_candidates, rng))
                }
                _ => random_ranking(num_candidates, rng),
            }
        })
        .collect())
}

/// [`inject_errors`] applied to a whole election; the ballot count is kept.
pub fn inject_errors_election(
    election: &Election,
    rate: f64,
    policy: ErrorPolicy,
    seed: u64,
) -> Result<Election> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edited = inject_errors(
        &election.expand(),
        election.num_candidates(),
        rate,
        policy,
        &mut rng,
    )?;
    let mut counts: Vec<(Ballot, u64)> = Vec::new();
    let mut index: HashMap<Ballot, usize> = HashMap::new();
    for b in edited {
        match index.get(&b) {
            Some(&i) => counts[i].1 += 1,
            None => {
                index.insert(b.clone(), counts.len());
                counts.push((b, 1));
            }
        }
    }
    Election::new(election.names().to_vec(), counts, election.seats())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationReport {
    pub trials: usize,
    pub cert_rate: f64,
    pub mean_draws: f64,
    /// `(p, draws)` pairs over all trials.
    pub quantiles: Vec<(f64, u64)>,
}

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub trials: usize,
    pub seed: u64,
    pub error_rate: f64,
    pub policy: ErrorPolicy,
    /// Defaults to the number of ballots.
    pub max_draws: Option<u64>,
}

/// Repeats the audit of `plan` with freshly error-injected MVRs per trial.
/// Trial `t` uses stream `t` of `seed`, so results do not depend on thread
/// scheduling.
pub fn simulate(plan: &AuditPlan, cvrs: &Election, config: &SimulationConfig) -> Result<SimulationReport> {
    if config.trials == 0 {
        return Err(Error::invalid("simulation needs at least one trial"));
    }
    check_error_rate(config.error_rate)?;
    let audit = ComparisonAudit::new(plan, cvrs)?;
    let ballots = cvrs.expand();
    let max_draws = config.max_draws.unwrap_or(cvrs.total_ballots());
    let outcomes = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(config.seed, t);
            let mvrs = inject_errors(
                &ballots,
                cvrs.num_candidates(),
                config.error_rate,
                config.policy,
                &mut rng,
            )?;
            audit.run(&ballots, &mvrs, &mut rng, max_draws)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&outcomes))
}

/// Repeats the audit of `plan` against fixed MVRs with independent samples.
pub fn simulate_fixed(
    audit: &ComparisonAudit,
    cvrs: &[Ballot],
    mvrs: &[Ballot],
    trials: usize,
    seed: u64,
    max_draws: u64,
) -> Result<SimulationReport> {
    if trials == 0 {
        return Err(Error::invalid("simulation needs at least one trial"));
    }
    let table = audit.comparison_table(cvrs, mvrs)?;
    let outcomes: Vec<AuditOutcome> = (0..trials as u64)
        .into_par_iter()
        .map(|t| audit.run_table(&table, &mut trial_rng(seed, t), max_draws))
        .collect();
    Ok(summarize(&outcomes))
}

fn summarize(outcomes: &[AuditOutcome]) -> SimulationReport {
    let n = outcomes.len();
    let certified = outcomes.iter().filter(|o| o.certified()).count();
    let mut draws: Vec<u64> = outcomes.iter().map(|o| o.draws()).collect();
    let mean_draws = draws.iter().sum::<u64>() as f64 / n as f64;
    draws.sort_unstable();
    let quantiles = [0.1, 0.25, 0.5, 0.75, 0.9, 0.99]
        .iter()
        .map(|&p| {
            let i = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
            (p, draws[i])
        })
        .collect();
    SimulationReport {
        trials: n,
        cert_rate: certified as f64 / n as f64,
        mean_draws,
        quantiles,
    }
}
