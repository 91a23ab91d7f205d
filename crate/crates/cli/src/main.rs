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


//! `stv-audit`: tabulate 2-seat STV elections, plan risk-limiting audits
//! and simulate them.
//!
//! Exit codes: 0 on success, 1 when the outcome cannot be audited (an ASN
//! of +∞), 2 on bad input.

mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use stv_audit::export::{auto_plan_document, comparison_values, plan_document, plan_from_json, tabulation_json};
use stv_audit::planner::format_asn;
use stv_audit::rational::{format_decimal, int, parse_rational, to_fraction_string, Rational};
use stv_audit::{
    estimate_asn, load_election, simulate, tabulate, AsnMethod, AsnQuery, AuditParameters, CandidateId,
    CandidateSet, Election, ErrorPolicy, MethodOutcome, PlanMethod, Planner, SimulationConfig, TransferCaps,
};

#[derive(Parser)]
#[command(name = "stv-audit", version, about = "Risk-limiting audit planning for 2-seat STV elections")]
struct Cli {
    /// Worker threads for simulations (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count the election and print the round table.
    Tabulate(TabulateArgs),
    /// Evaluate one tally bound.
    Bounds(BoundsArgs),
    /// Generate audit assertions and estimate the sample size.
    Plan(PlanArgs),
    /// Expected sample size for an assertion with the given margin.
    Asn(AsnArgs),
    /// Simulate ballot-comparison audits of a saved plan.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ElectionArgs {
    /// Ballot file (`.json` for JSON, anything else for the text format).
    ballots: PathBuf,

    /// Number of seats; overrides the file header.
    #[arg(long)]
    seats: Option<u32>,

    /// Drop empty ballots before counting (they count toward the quota by
    /// default).
    #[arg(long)]
    drop_empty: bool,
}

#[derive(Args)]
struct TabulateArgs {
    #[command(flatten)]
    election: ElectionArgs,

    /// Emit JSON instead of the aligned table.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    LowerBasic,
    UpperBasic,
    UpperComp,
    LowerElim,
    UpperComplex,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    election: ElectionArgs,

    #[arg(value_enum)]
    kind: BoundKind,

    /// The candidate whose tally is bounded.
    candidate: String,

    /// The second candidate (`upper-comp`: the rival; `upper-complex`: the
    /// candidate assumed still eligible).
    other: Option<String>,

    /// `lower-elim`: candidates assumed eliminated (comma separated).
    #[arg(long, value_delimiter = ',')]
    excluded: Vec<String>,

    /// `upper-complex`: a seated candidate and its transfer-value cap, as
    /// `name=value` (repeatable).
    #[arg(long = "cap", value_parser = parse_cap)]
    caps: Vec<(String, Rational)>,

    /// `upper-complex`: candidates that always beat `candidate`.
    #[arg(long, value_delimiter = ',')]
    beaten_by: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    General,
    OneQuota,
    TwoQuota,
}

#[derive(Args)]
struct AsnOptions {
    /// Risk limit α.
    #[arg(long, default_value_t = 0.10)]
    risk_limit: f64,

    /// Expected rate of one-vote overstatements ε.
    #[arg(long, default_value_t = 0.002)]
    error_rate: f64,

    /// Use the closed-form ASN instead of Monte-Carlo.
    #[arg(long)]
    closed_form: bool,

    /// Monte-Carlo trials per ASN estimate.
    #[arg(long, default_value_t = 1000)]
    asn_trials: usize,

    /// Monte-Carlo seed.
    #[arg(long, default_value_t = 0x5354_5652_4c41)]
    asn_seed: u64,
}

impl AsnOptions {
    fn method(&self) -> AsnMethod {
        if self.closed_form {
            AsnMethod::ClosedForm
        } else {
            AsnMethod::MonteCarlo {
                trials: self.asn_trials,
                seed: self.asn_seed,
            }
        }
    }

    fn params(&self) -> AuditParameters {
        AuditParameters {
            risk_limit: self.risk_limit,
            error_rate: self.error_rate,
            asn: self.method(),
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    election: ElectionArgs,

    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,

    #[command(flatten)]
    asn: AsnOptions,

    /// Step of the one-quota transfer-value sweep.
    #[arg(long, default_value = "0.01", value_parser = parse_rational_arg)]
    delta: Rational,

    /// Reported winners (comma separated); defaults to our own count.
    #[arg(long, value_delimiter = ',')]
    reported: Vec<String>,

    /// Plan for `--reported` even when it disagrees with our count.
    #[arg(long, requires = "reported")]
    allow_mismatch: bool,

    /// Write the plan JSON here; the comparison row then goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AsnArgs {
    /// Diluted margin, as a fraction or decimal.
    #[arg(long, value_parser = parse_rational_arg)]
    margin: Rational,

    /// Assorter upper bound.
    #[arg(long, default_value = "1", value_parser = parse_rational_arg)]
    upper_bound: Rational,

    /// Number of ballots cast (caps the ASN).
    #[arg(long, default_value_t = 1_000_000)]
    ballots: u64,

    #[command(flatten)]
    asn: AsnOptions,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Mixed,
    TruncateOnly,
    SwapOnly,
    SubstituteOnly,
}

impl From<PolicyArg> for ErrorPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Mixed => ErrorPolicy::Mixed,
            PolicyArg::TruncateOnly => ErrorPolicy::TruncateOnly,
            PolicyArg::SwapOnly => ErrorPolicy::SwapOnly,
            PolicyArg::SubstituteOnly => ErrorPolicy::SubstituteOnly,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Plan JSON written by `plan --out`.
    #[arg(long)]
    plan: PathBuf,

    /// Ballot file with the reported CVRs.
    #[arg(long)]
    ballots: PathBuf,

    #[arg(long)]
    seats: Option<u32>,

    #[arg(long)]
    drop_empty: bool,

    #[arg(long, default_value_t = 1000)]
    trials: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Probability that a hand-read ballot differs from its CVR.
    #[arg(long, default_value_t = 0.002)]
    error_rate: f64,

    #[arg(long, value_enum, default_value = "mixed")]
    policy: PolicyArg,

    /// Draw limit per audit (default: the number of ballots).
    #[arg(long)]
    max_draws: Option<u64>,
}

/// Failure to audit, as opposed to bad input.
#[derive(Debug)]
struct NotAuditable;

impl std::fmt::Display for NotAuditable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("not auditable")
    }
}

impl std::error::Error for NotAuditable {}

fn parse_rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn parse_cap(s: &str) -> Result<(String, Rational), String> {
    let (name, value) = s.split_once('=').ok_or("expected name=value")?;
    Ok((name.trim().to_string(), parse_rational_arg(value.trim())?))
}

fn load(path: &Path, seats: Option<u32>, drop_empty: bool) -> Result<Election> {
    let election = load_election(path, seats).with_context(|| format!("reading {}", path.display()))?;
    let empty = election.empty_ballots();
    if empty == 0 {
        return Ok(election);
    }
    if drop_empty {
        eprintln!("warning: dropping {empty} empty ballot(s)");
        return Ok(election.without_empty_ballots()?);
    }
    eprintln!("warning: {empty} empty ballot(s) count toward the quota but not toward any tally");
    Ok(election)
}

fn candidate(election: &Election, name: &str) -> Result<CandidateId> {
    election
        .candidate(name)
        .ok_or_else(|| anyhow!("unknown candidate {name:?}"))
}

fn candidates(election: &Election, names: &[String]) -> Result<CandidateSet> {
    names.iter().map(|n| candidate(election, n)).collect()
}

fn run_tabulate(args: &TabulateArgs) -> Result<()> {
    let a = &args.election;
    let election = load(&a.ballots, a.seats, a.drop_empty)?;
    let record = tabulate(&election);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&tabulation_json(&record, &election))?);
    } else {
        print!("{}", render::round_table(&record, &election));
    }
    Ok(())
}

fn run_bounds(args: &BoundsArgs) -> Result<()> {
    let a = &args.election;
    let election = load(&a.ballots, a.seats, a.drop_empty)?;
    let c = candidate(&election, &args.candidate)?;
    let other = || -> Result<CandidateId> {
        let name = args.other.as_deref().ok_or_else(|| anyhow!("this bound needs a second candidate"))?;
        candidate(&election, name)
    };
    let value: Rational = match args.kind {
        BoundKind::LowerBasic => int(stv_audit::lower_basic(&election, c)),
        BoundKind::UpperBasic => int(stv_audit::upper_basic(&election, c)),
        BoundKind::UpperComp => int(stv_audit::upper_comp(&election, c, other()?)),
        BoundKind::LowerElim => {
            int(stv_audit::lower_elim(&election, c, &candidates(&election, &args.excluded)?))
        }
        BoundKind::UpperComplex => {
            let mut caps = TransferCaps::new();
            for (name, cap) in &args.caps {
                caps.insert(candidate(&election, name)?, cap.clone());
            }
            caps.validate(election.seats())?;
            let g = candidates(&election, &args.beaten_by)?;
            stv_audit::upper_complex(&election, c, other()?, &caps, &g)?
        }
    };
    println!("{} ({})", to_fraction_string(&value), format_decimal(&value, 4));
    Ok(())
}

fn run_plan(args: &PlanArgs) -> Result<()> {
    let a = &args.election;
    let election = load(&a.ballots, a.seats, a.drop_empty)?;
    let params = args.asn.params();
    let planner = if args.reported.is_empty() {
        Planner::new(&election, params)?
    } else {
        let r = candidates(&election, &args.reported)?;
        let ids: Vec<CandidateId> = r.iter().collect();
        if ids.len() != 2 {
            bail!("--reported needs exactly two distinct candidates");
        }
        Planner::for_reported(&election, [ids[0], ids[1]], params, args.allow_mismatch)?
    };
    let auto = planner.auto_plan(&args.delta)?;
    let row = render::comparison_row(&auto.row());
    let (outcome, mut doc) = match args.method {
        MethodArg::Auto => (None, auto_plan_document(&auto, &election)),
        MethodArg::General => (Some(&auto.general), None),
        MethodArg::OneQuota => (Some(&auto.one_quota), None),
        MethodArg::TwoQuota => (Some(&auto.two_quota), None),
    };
    if let Some(outcome) = outcome {
        if let MethodOutcome::NotApplicable(why) = outcome {
            eprintln!("method not applicable: {why}");
        }
        doc = outcome
            .plan()
            .filter(|p| p.overall_asn.is_finite())
            .map(|p| plan_document(p, &election));
        if let Some(d) = doc.as_mut() {
            d.comparison = Some(comparison_values(&auto));
        }
    }
    let Some(doc) = doc else {
        println!("{row}");
        if let Some(plan) = outcome.and_then(|o| o.plan()) {
            let method: PlanMethod = plan.method;
            eprintln!("{method} plan has ASN {}", format_asn(plan.overall_asn));
        }
        return Err(NotAuditable.into());
    };
    let json = serde_json::to_string_pretty(&doc)?;
    match &args.out {
        Some(path) => {
            fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
            println!("{row}");
        }
        None => {
            println!("{json}");
            eprintln!("{row}");
        }
    }
    Ok(())
}

fn run_asn(args: &AsnArgs) -> Result<()> {
    let query = AsnQuery {
        margin: args.margin.clone(),
        upper_bound: args.upper_bound.clone(),
        risk_limit: args.asn.risk_limit,
        error_rate: args.asn.error_rate,
        total_ballots: args.ballots,
    };
    let asn = estimate_asn(&query, &args.asn.method())?;
    if asn.is_infinite() {
        println!("+inf");
        return Err(NotAuditable.into());
    }
    println!("{asn}");
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let election = load(&args.ballots, args.seats, args.drop_empty)?;
    let json = fs::read_to_string(&args.plan).with_context(|| format!("reading {}", args.plan.display()))?;
    let plan = plan_from_json(&json, &election)?;
    let config = SimulationConfig {
        trials: args.trials,
        seed: args.seed,
        error_rate: args.error_rate,
        policy: args.policy.into(),
        max_draws: args.max_draws,
    };
    let report = simulate(&plan, &election, &config)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Tabulate(a) => run_tabulate(a),
        Command::Bounds(a) => run_bounds(a),
        Command::Plan(a) => run_plan(a),
        Command::Asn(a) => run_asn(a),
        Command::Simulate(a) => run_simulate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<NotAuditable>() => {
            eprintln!("error: not auditable: no assertion set with a finite sample size");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
