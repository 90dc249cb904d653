/*
Copyright 2026 The sonpath Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Options;

/// Convex clustering paths, tree recovery and related checks.
///
/// Exit status: 0 success, 1 usage or input error, 2 a fused pair separated
/// along the path, 3 the solver hit its iteration cap, 4 a verification
/// check failed.
#[derive(Parser)]
#[command(name = "sonpath", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the affinity triplet file `affinities.csv`
    Affinities(Options),
    /// Solve a γ path; write path.csv, merges.csv, tree.nwk and report.json
    Path(Options),
    /// Recover the dendrogram (or read --merges) and compare it with --tree
    Tree(Options),
    /// Check witness scores on random or given point sets
    LemmaCheck(Options),
    /// Run LLA steps for a folded concave penalty
    Mm(Options),
    /// Single or average linkage dendrogram
    Baseline(Options),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SONPATH_LOG", "warn")).init();
    let cli = Cli::parse();
    let (run, opts): (fn(&Options) -> anyhow::Result<commands::Outcome>, Options) =
        match cli.command {
            Command::Affinities(o) => (commands::affinities, o),
            Command::Path(o) => (commands::path, o),
            Command::Tree(o) => (commands::tree, o),
            Command::LemmaCheck(o) => (commands::lemma_check, o),
            Command::Mm(o) => (commands::mm, o),
            Command::Baseline(o) => (commands::baseline, o),
        };
    match opts.resolve().and_then(|o| run(&o)) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
