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

//! Tabulation, assertion generation and risk-limiting audit planning for
//! 2-seat single transferable vote elections.
//!
//! The main entry points are [`tabulate`] for counting, [`Planner`] for
//! building an assertion set and [`ComparisonAudit`] / [`simulate`] for
//! exercising the resulting audit.

pub mod assertions;
pub mod audit;
pub mod ballot;
pub mod ballot_file;
pub mod bounds;
pub mod error;
pub mod export;
pub mod planner;
pub mod rational;
pub mod sufficiency;
pub mod tabulator;

pub use assertions::{evaluate, evaluate_quota_form, report, to_assorter, to_linear, Assertion, AssertionReport, Assorter, LinearAssertion};
pub use audit::{
    estimate_asn, inject_errors, inject_errors_election, run_audit, simulate, AsnMethod, AsnQuery,
    AuditOutcome, AuditParameters, AuditTrial, ComparisonAudit, ErrorPolicy, SimulationConfig,
    SimulationReport,
};
pub use ballot::{droop_quota, project, Ballot, BallotGroup, CandidateId, CandidateSet, Election};
pub use ballot_file::{load_election, parse_election, BallotFormat};
pub use bounds::{lower_basic, lower_elim, upper_basic, upper_comp, upper_complex, TransferCaps};
pub use error::{Error, Result};
pub use planner::{auto_plan, AuditPlan, AutoPlan, MethodOutcome, PlanMethod, Planner};
pub use rational::Rational;
pub use sufficiency::check_sufficiency;
pub use tabulator::{max_transfer_value, tabulate, ActionKind, Round, RoundAction, TabulationRecord};
