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


//! Aligned text tables. JSON is the machine-readable output; these are for
//! people.

use std::fmt::Write;

use stv_audit::planner::ComparisonRow;
use stv_audit::rational::format_decimal;
use stv_audit::{ActionKind, Election, TabulationRecord};

fn table(rows: &[Vec<String>], left: usize) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|i| rows.iter().filter_map(|r| r.get(i)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                let pad = widths[i] - cell.chars().count();
                if i < left {
                    format!("{cell}{}", " ".repeat(pad))
                } else {
                    format!("{}{cell}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Round-by-round tallies, the exhausted value and each round's actions.
pub fn round_table(record: &TabulationRecord, election: &Election) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "ballots {}, seats {}, quota {}",
        record.total_ballots,
        election.seats(),
        record.quota
    );
    let mut header = vec!["round".to_string()];
    header.extend(election.names().iter().cloned());
    header.push("exhausted".into());
    let mut rows = vec![header];
    let mut actions = Vec::new();
    for (i, round) in record.rounds.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        for c in election.candidates() {
            row.push(round.tally(c).map_or("-".into(), |t| format_decimal(t, 4)));
        }
        row.push(format_decimal(&round.exhausted, 4));
        rows.push(row);
        for a in &round.actions {
            let name = election.name(a.candidate);
            let text = match a.kind {
                ActionKind::ElectOnQuota => match &a.transfer_value {
                    Some(tv) => format!("{name} elected on quota, transfer value {}", format_decimal(tv, 4)),
                    None => format!("{name} elected on quota"),
                },
                ActionKind::Eliminate => format!("{name} eliminated"),
                ActionKind::ElectRemaining => format!("{name} elected to a remaining seat"),
            };
            actions.push(format!("round {}: {text}", i + 1));
        }
    }
    out.push_str(&table(&rows, 1));
    for a in actions {
        let _ = writeln!(out, "{a}");
    }
    let winners: Vec<&str> = record.winners.iter().map(|&w| election.name(w)).collect();
    let _ = writeln!(out, "winners: {}", winners.join(", "));
    let _ = writeln!(out, "exhausted value: {}", format_decimal(&record.exhausted_value, 4));
    if record.tie_occurred {
        let _ = writeln!(out, "note: an elimination tie was broken by candidate order");
    }
    out
}

/// The three methods' ASNs side by side; `--` marks a method that does not
/// apply and `+∞` one that found no auditable assertion set.
pub fn comparison_row(row: &ComparisonRow) -> String {
    let rows = vec![
        vec!["two-quota".to_string(), "one-quota".into(), "general".into()],
        vec![row.two_quota.to_string(), row.one_quota.to_string(), row.general.to_string()],
    ];
    table(&rows, 0).trim_end().to_string()
}
