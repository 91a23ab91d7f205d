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


//! Inputs shared by the benchmarks in `benches/`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stv_audit::{Ballot, Election};

pub fn worked_example() -> Election {
    let groups: [(&[u32], u64); 5] = [
        (&[0, 2], 8001),
        (&[0], 1000),
        (&[1, 2, 3], 3000),
        (&[2, 3], 5000),
        (&[3, 0, 1], 4000),
    ];
    Election::with_numbered_candidates(4, groups.map(|(r, k)| (Ballot::from_ids(r), k)), 2).expect("valid election")
}

/// A 2-seat election with `candidates` candidates, `kinds` distinct
/// rankings and `ballots` ballots. Earlier candidates are favoured so that
/// the count is not a near tie.
pub fn synthetic(candidates: usize, kinds: usize, ballots: u64, seed: u64) -> Election {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<u32> = (0..candidates as u32).collect();
    let mut groups = Vec::with_capacity(kinds);
    let weights: Vec<f64> = (0..kinds).map(|i| 1.0 / (i + 1) as f64).collect();
    let total: f64 = weights.iter().sum();
    for w in weights {
        ids.shuffle(&mut rng);
        let len = rng.gen_range(1..=candidates);
        let count = ((w / total) * ballots as f64).ceil() as u64;
        groups.push((Ballot::from_ids(&ids[..len]), count.max(1)));
    }
    Election::with_numbered_candidates(candidates, groups, 2).expect("valid election")
}
