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

//! Reading and writing ballot files.
//!
//! Text format:
//!
//! ```text
//! # comments and blank lines are ignored
//! candidates: Alice, Bob, Carol
//! seats: 2
//! 8001 : Alice > Carol
//! [Bob, Carol] : 3000
//! 12 :
//! ```
//!
//! A ballot line is either `count : name > name > ...` or
//! `[name, name, ...] : count`. An empty ranking denotes empty ballots.
//! Repeated rankings are merged by summing their counts.
//!
//! The JSON form is `{"candidates": [...], "seats": n,
//! "ballots": [{"ranking": [...], "count": n}]}`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ballot::{Ballot, CandidateId, Election};
use crate::error::{Error, Result};

/// Seat count used when neither the file nor the caller gives one.
pub const DEFAULT_SEATS: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallotFormat {
    Text,
    Json,
}

impl BallotFormat {
    /// `.json` files are JSON; everything else is the text format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => BallotFormat::Json,
            _ => BallotFormat::Text,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonElection {
    candidates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seats: Option<u32>,
    ballots: Vec<JsonBallot>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonBallot {
    ranking: Vec<String>,
    count: i64,
}

/// Reads an election from disk, choosing the format from the extension.
/// `seats` overrides any seat count given in the file.
pub fn load_election(path: &Path, seats: Option<u32>) -> Result<Election> {
    let contents = std::fs::read_to_string(path)?;
    parse_election(&contents, BallotFormat::from_path(path), seats)
}

pub fn parse_election(contents: &str, format: BallotFormat, seats: Option<u32>) -> Result<Election> {
    match format {
        BallotFormat::Text => parse_text(contents, seats),
        BallotFormat::Json => parse_json(contents, seats),
    }
}

struct NameTable {
    index: HashMap<String, CandidateId>,
}

impl NameTable {
    fn new(names: &[String], line: usize) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::parse(line, "empty candidate name"));
            }
            if index.insert(name.clone(), CandidateId(i as u32)).is_some() {
                return Err(Error::parse(line, format!("duplicate candidate {name:?}")));
            }
        }
        Ok(NameTable { index })
    }

    fn ballot<'a>(&self, names: impl IntoIterator<Item = &'a str>, line: usize) -> Result<Ballot> {
        let mut prefs = Vec::new();
        for name in names {
            let id = self
                .index
                .get(name)
                .ok_or_else(|| Error::parse(line, format!("unknown candidate {name:?}")))?;
            if prefs.contains(id) {
                return Err(Error::parse(line, format!("candidate {name:?} ranked twice")));
            }
            prefs.push(*id);
        }
        Ok(Ballot::new(prefs).expect("duplicates already rejected"))
    }
}

fn parse_count(s: &str, line: usize) -> Result<u64> {
    let n: i64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid ballot count {:?}", s.trim())))?;
    if n <= 0 {
        return Err(Error::parse(line, format!("ballot count must be positive, got {n}")));
    }
    Ok(n as u64)
}

fn parse_text(contents: &str, seats_override: Option<u32>) -> Result<Election> {
    let mut names: Option<(Vec<String>, NameTable)> = None;
    let mut seats: Option<u32> = None;
    let mut ballots = Vec::new();
    let mut last_line = 0;

    for (i, raw) in contents.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let (key, value) = text
            .split_once(':')
            .ok_or_else(|| Error::parse(line, "expected `key: value` or `count : ranking`"))?;
        let (key, value) = (key.trim(), value.trim());

        if key.eq_ignore_ascii_case("candidates") {
            if names.is_some() {
                return Err(Error::parse(line, "candidates given twice"));
            }
            let list: Vec<String> = value.split(',').map(|n| n.trim().to_string()).collect();
            let table = NameTable::new(&list, line)?;
            names = Some((list, table));
            continue;
        }
        if key.eq_ignore_ascii_case("seats") {
            let n: u32 = value
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid seat count {value:?}")))?;
            if n == 0 {
                return Err(Error::parse(line, "seats must be at least 1"));
            }
            seats = Some(n);
            continue;
        }

        let (_, table) = names
            .as_ref()
            .ok_or_else(|| Error::parse(line, "ballot line before the candidates header"))?;
        let (ballot, count) = if let Some(list) = key.strip_prefix('[') {
            let list = list
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(line, "unterminated `[` in ranking"))?;
            let ranking = list.split(',').map(str::trim).filter(|s| !s.is_empty());
            (table.ballot(ranking, line)?, parse_count(value, line)?)
        } else {
            let count = parse_count(key, line)?;
            let ranking: Vec<&str> = if value.is_empty() {
                Vec::new()
            } else {
                value.split('>').map(str::trim).collect()
            };
            if ranking.iter().any(|s| s.is_empty()) {
                return Err(Error::parse(line, "empty name in ranking"));
            }
            (table.ballot(ranking, line)?, count)
        };
        ballots.push((ballot, count));
    }

    let (names, _) = names.ok_or_else(|| Error::parse(last_line, "missing `candidates:` header"))?;
    let seats = seats_override.or(seats).unwrap_or(DEFAULT_SEATS);
    Election::new(names, ballots, seats).map_err(|e| match e {
        Error::InvalidParameter(m) => Error::parse(last_line, m),
        other => other,
    })
}

fn parse_json(contents: &str, seats_override: Option<u32>) -> Result<Election> {
    let doc: JsonElection = serde_json::from_str(contents)
        .map_err(|e| Error::parse(e.line(), e.to_string()))?;
    let table = NameTable::new(&doc.candidates, 0)?;
    let mut ballots = Vec::with_capacity(doc.ballots.len());
    for (i, b) in doc.ballots.iter().enumerate() {
        let ctx = |e: Error| match e {
            Error::Parse { message, .. } => Error::parse(0, format!("ballots[{i}]: {message}")),
            other => other,
        };
        if b.count <= 0 {
            return Err(Error::parse(0, format!("ballots[{i}]: count must be positive")));
        }
        let ballot = table.ballot(b.ranking.iter().map(String::as_str), 0).map_err(ctx)?;
        ballots.push((ballot, b.count as u64));
    }
    let seats = seats_override.or(doc.seats).unwrap_or(DEFAULT_SEATS);
    if seats == 0 {
        return Err(Error::parse(0, "seats must be at least 1"));
    }
    Election::new(doc.candidates, ballots, seats).map_err(|e| match e {
        Error::InvalidParameter(m) => Error::parse(0, m),
        other => other,
    })
}

/// Writes the text format. `parse_election(to_text(e), Text, None) == e`.
pub fn to_text(election: &Election) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "candidates: {}", election.names().join(", "));
    let _ = writeln!(out, "seats: {}", election.seats());
    for g in election.groups() {
        let ranking: Vec<&str> = g.ballot.prefs().iter().map(|&c| election.name(c)).collect();
        let _ = writeln!(out, "{} : {}", g.count, ranking.join(" > "));
    }
    out
}

pub fn to_json(election: &Election) -> String {
    let doc = JsonElection {
        candidates: election.names().to_vec(),
        seats: Some(election.seats()),
        ballots: election
            .groups()
            .iter()
            .map(|g| JsonBallot {
                ranking: g.ballot.prefs().iter().map(|&c| election.name(c).to_string()).collect(),
                count: g.count as i64,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("election serializes")
}
