// Copyright 2026 The altgrasp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Runs the demo scene for a few seeds and prints per-strategy means.
//!
//! `cargo run --release --example compare_strategies -- 1 2 3`

use std::time::Instant;

use altgrasp_core::scenario::{demo_scenario, run_experiment};

fn main() {
    let seeds: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("seeds are integers"))
        .collect();
    let seeds = if seeds.is_empty() {
        vec![1, 2, 3]
    } else {
        seeds
    };
    for seed in seeds {
        let started = Instant::now();
        let report = run_experiment(&demo_scenario(seed, 50));
        println!("seed {seed} ({:.1} s)", started.elapsed().as_secs_f64());
        for (strategy, agg) in &report.aggregate {
            println!(
                "  {:<20} path {:.4} m  rotation {:.4} rad  no-worse {:.3}  failed {}",
                strategy.as_str(),
                agg.mean_path_length,
                agg.mean_orientation_travel,
                agg.no_worse_rate,
                agg.failures
            );
        }
    }
}
