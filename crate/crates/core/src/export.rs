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

//! JSON interchange for assertions, plans and tabulations.
//!
//! Candidates are written by name and rationals as `"num/den"` strings.
//! ASNs are numbers, or the string `"+inf"` when infinite.

use std::collections::BTreeMap;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assertions::{Assertion, AssertionReport};
use crate::ballot::{CandidateId, CandidateSet, Election};
use crate::bounds::TransferCaps;
use crate::error::{Error, Result};
use crate::planner::{AuditPlan, AutoPlan, PlanMethod, RowEntry};
use crate::rational::{format_decimal, parse_rational, to_fraction_string, Rational};
use crate::tabulator::{ActionKind, TabulationRecord};

/// A sample size that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Asn(pub f64);

impl Serialize for Asn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("+inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Asn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n
                .as_f64()
                .map(Asn)
                .ok_or_else(|| de::Error::custom("ASN out of range")),
            Value::String(s) if s == "+inf" => Ok(Asn(f64::INFINITY)),
            other => Err(de::Error::custom(format!("invalid ASN {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssertionRecord {
    #[serde(rename = "type")]
    pub kind: String,
    pub winner: String,
    pub loser: Option<String>,
    #[serde(rename = "W")]
    pub seated: Vec<String>,
    pub caps: BTreeMap<String, String>,
    #[serde(rename = "G")]
    pub g: Vec<String>,
    #[serde(rename = "O")]
    pub o: Vec<String>,
    pub holds: bool,
    pub mean: String,
    pub margin: String,
    pub upper_bound: String,
    pub asn: Asn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanDocument {
    pub method: PlanMethod,
    pub reported_winners: [String; 2],
    pub risk_limit: f64,
    pub error_rate: f64,
    pub delta: Option<String>,
    pub transfer_cap: Option<String>,
    pub tie_sensitive: bool,
    pub overall_asn: Asn,
    pub assertions: Vec<AssertionRecord>,
    /// Per-method ASNs: a number, `"+inf"`, or `"--"` when not applicable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<BTreeMap<String, Value>>,
}

fn names(election: &Election, set: &CandidateSet) -> Vec<String> {
    set.iter().map(|c| election.name(c).to_string()).collect()
}

pub fn assertion_record(report: &AssertionReport, election: &Election) -> AssertionRecord {
    let name = |c: CandidateId| election.name(c).to_string();
    let mut record = AssertionRecord {
        kind: report.assertion.tag().to_string(),
        winner: String::new(),
        loser: None,
        seated: Vec::new(),
        caps: BTreeMap::new(),
        g: Vec::new(),
        o: Vec::new(),
        holds: report.holds,
        mean: to_fraction_string(&report.mean),
        margin: to_fraction_string(&report.margin),
        upper_bound: to_fraction_string(&report.upper_bound),
        asn: Asn(report.asn),
    };
    match &report.assertion {
        Assertion::InitialQuota { candidate } => record.winner = name(*candidate),
        Assertion::TransferBelow { candidate, cap } => {
            record.winner = name(*candidate);
            record.caps.insert(name(*candidate), to_fraction_string(cap));
        }
        Assertion::AlwaysGreater { winner, loser } => {
            record.winner = name(*winner);
            record.loser = Some(name(*loser));
        }
        Assertion::NeverLoses {
            winner,
            loser,
            caps,
            g,
            o,
        } => {
            record.winner = name(*winner);
            record.loser = Some(name(*loser));
            record.seated = names(election, &caps.winners());
            record.caps = caps
                .iter()
                .map(|(c, v)| (name(c), to_fraction_string(v)))
                .collect();
            record.g = names(election, g);
            record.o = names(election, o);
        }
    }
    record
}

fn lookup(election: &Election, name: &str) -> Result<CandidateId> {
    election
        .candidate(name)
        .ok_or_else(|| Error::Data(format!("unknown candidate {name:?}")))
}

fn lookup_set(election: &Election, list: &[String]) -> Result<CandidateSet> {
    list.iter().map(|n| lookup(election, n)).collect()
}

fn rational_field(field: &str, s: &str) -> Result<Rational> {
    parse_rational(s).map_err(|e| Error::Data(format!("{field}: {e}")))
}

pub fn assertion_from_record(record: &AssertionRecord, election: &Election) -> Result<AssertionReport> {
    let winner = lookup(election, &record.winner)?;
    let loser = || -> Result<CandidateId> {
        let l = record
            .loser
            .as_deref()
            .ok_or_else(|| Error::Data(format!("{} assertion needs a loser", record.kind)))?;
        lookup(election, l)
    };
    let assertion = match record.kind.as_str() {
        "IQ" => Assertion::InitialQuota { candidate: winner },
        "UT" => {
            let cap = record
                .caps
                .get(&record.winner)
                .ok_or_else(|| Error::Data("UT assertion needs a cap for its candidate".into()))?;
            Assertion::TransferBelow {
                candidate: winner,
                cap: rational_field("cap", cap)?,
            }
        }
        "AG" => Assertion::AlwaysGreater {
            winner,
            loser: loser()?,
        },
        "NL" => {
            let mut caps = TransferCaps::new();
            for (n, v) in &record.caps {
                caps.insert(lookup(election, n)?, rational_field("cap", v)?);
            }
            if caps.winners() != lookup_set(election, &record.seated)? {
                return Err(Error::Data("NL caps must cover exactly W".into()));
            }
            Assertion::NeverLoses {
                winner,
                loser: loser()?,
                caps,
                g: lookup_set(election, &record.g)?,
                o: lookup_set(election, &record.o)?,
            }
        }
        other => return Err(Error::Data(format!("unknown assertion type {other:?}"))),
    };
    assertion.validate(election)?;
    Ok(AssertionReport {
        assertion,
        holds: record.holds,
        mean: rational_field("mean", &record.mean)?,
        margin: rational_field("margin", &record.margin)?,
        upper_bound: rational_field("upperBound", &record.upper_bound)?,
        asn: record.asn.0,
    })
}

fn entry_value(entry: RowEntry) -> Value {
    match entry {
        RowEntry::NotApplicable => Value::String("--".into()),
        RowEntry::Asn(a) => serde_json::to_value(Asn(a)).expect("ASN serializes"),
    }
}

pub fn plan_document(plan: &AuditPlan, election: &Election) -> PlanDocument {
    PlanDocument {
        method: plan.method,
        reported_winners: plan
            .reported_winners
            .map(|c| election.name(c).to_string()),
        risk_limit: plan.risk_limit,
        error_rate: plan.error_rate,
        delta: plan.delta.as_ref().map(to_fraction_string),
        transfer_cap: plan.transfer_cap.as_ref().map(to_fraction_string),
        tie_sensitive: plan.tie_sensitive,
        overall_asn: Asn(plan.overall_asn),
        assertions: plan
            .assertions
            .iter()
            .map(|r| assertion_record(r, election))
            .collect(),
        comparison: None,
    }
}

/// Document for the selected plan of `auto`, annotated with every method's
/// ASN. `None` when no method produced a finite plan.
pub fn auto_plan_document(auto: &AutoPlan, election: &Election) -> Option<PlanDocument> {
    let mut doc = plan_document(auto.selected.as_ref()?, election);
    doc.comparison = Some(comparison_values(auto));
    Some(doc)
}

pub fn comparison_values(auto: &AutoPlan) -> BTreeMap<String, Value> {
    let row = auto.row();
    BTreeMap::from([
        ("twoQuota".to_string(), entry_value(row.two_quota)),
        ("oneQuota".to_string(), entry_value(row.one_quota)),
        ("general".to_string(), entry_value(row.general)),
    ])
}

pub fn plan_from_document(doc: &PlanDocument, election: &Election) -> Result<AuditPlan> {
    let [a, b] = &doc.reported_winners;
    let mut reported = [lookup(election, a)?, lookup(election, b)?];
    reported.sort();
    Ok(AuditPlan {
        method: doc.method,
        assertions: doc
            .assertions
            .iter()
            .map(|r| assertion_from_record(r, election))
            .collect::<Result<_>>()?,
        overall_asn: doc.overall_asn.0,
        reported_winners: reported,
        risk_limit: doc.risk_limit,
        error_rate: doc.error_rate,
        delta: doc.delta.as_deref().map(|d| rational_field("delta", d)).transpose()?,
        transfer_cap: doc
            .transfer_cap
            .as_deref()
            .map(|d| rational_field("transferCap", d))
            .transpose()?,
        tie_sensitive: doc.tie_sensitive,
    })
}

pub fn plan_to_json(plan: &AuditPlan, election: &Election) -> Result<String> {
    Ok(serde_json::to_string_pretty(&plan_document(plan, election))?)
}

pub fn plan_from_json(json: &str, election: &Election) -> Result<AuditPlan> {
    let doc: PlanDocument = serde_json::from_str(json)?;
    plan_from_document(&doc, election)
}

/// `{"exact": "n/d", "decimal": "x.xxxx"}`.
pub fn value_json(v: &Rational) -> Value {
    serde_json::json!({
        "exact": to_fraction_string(v),
        "decimal": format_decimal(v, 4),
    })
}

fn kind_str(kind: ActionKind) -> &'static str {
    match kind {
        ActionKind::ElectOnQuota => "elect-on-quota",
        ActionKind::Eliminate => "eliminate",
        ActionKind::ElectRemaining => "elect-remaining",
    }
}

pub fn tabulation_json(record: &TabulationRecord, election: &Election) -> Value {
    let name = |c: CandidateId| election.name(c).to_string();
    let rounds: Vec<Value> = record
        .rounds
        .iter()
        .enumerate()
        .map(|(i, round)| {
            let tallies: Vec<Value> = round
                .tallies
                .iter()
                .map(|(c, v)| {
                    let mut t = value_json(v);
                    t["candidate"] = Value::String(name(*c));
                    t
                })
                .collect();
            let actions: Vec<Value> = round
                .actions
                .iter()
                .map(|a| {
                    serde_json::json!({
                        "kind": kind_str(a.kind),
                        "candidate": name(a.candidate),
                        "transferValue": a.transfer_value.as_ref().map(value_json),
                        "surplus": a.surplus.as_ref().map(value_json),
                        "pileSize": a.pile_size,
                    })
                })
                .collect();
            serde_json::json!({
                "round": i + 1,
                "tallies": tallies,
                "exhausted": value_json(&round.exhausted),
                "actions": actions,
            })
        })
        .collect();
    serde_json::json!({
        "candidates": election.names(),
        "seats": election.seats(),
        "totalBallots": record.total_ballots,
        "quota": record.quota,
        "winners": record.winners.iter().map(|&c| name(c)).collect::<Vec<_>>(),
        "exhaustedValue": value_json(&record.exhausted_value),
        "tieOccurred": record.tie_occurred,
        "rounds": rounds,
    })
}
