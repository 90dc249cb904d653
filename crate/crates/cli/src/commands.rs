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

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sonpath::affinity::{
    gaussian_affinities, tree_affinities, unit_affinities, GaussianConfig, TreeWeightConfig,
    DEFAULT_EPSILON,
};
use sonpath::concave::{lla_run, Penalty};
use sonpath::formats::{
    read_affinities, read_data_csv, read_merge_table, read_tree_json, write_affinities,
    write_merge_table, write_newick, write_path_table,
};
use sonpath::geometry::{witness, witness_set, GeometryError, PointSet};
use sonpath::path::{
    auto_gamma_max, detect_fusions, linkage_baseline, recover_tree, resolve_grid,
    solve_path_on_grid, tree_agreement, GammaMax, GridKind, Linkage, PathError, PathOptions,
    TreeAgreement, Violation,
};
use sonpath::solver::SolveOptions;
use sonpath::synthetic::gaussian_cloud;
use sonpath::{AffinityMatrix, DataSet, Dendrogram, NormKind, PartitionTree, SolutionPath};

use crate::config::{AffinityKind, Auto, GridArg, GridKindArg, Options, PenaltyArg};

/// How a command finished; mapped to the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Unfused,
    NotConverged,
    CheckFailed,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Unfused => 2,
            Outcome::NotConverged => 3,
            Outcome::CheckFailed => 4,
        }
    }
}

const LEMMA_TOLERANCE: f64 = 1e-9;
const SCAD_DEFAULT_A: f64 = 3.7;
const MCP_DEFAULT_A: f64 = 3.0;

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_data(opts: &Options) -> Result<DataSet> {
    let path = opts.input()?;
    read_data_csv(open(path)?).with_context(|| format!("reading data {}", path.display()))
}

fn load_tree(path: &Path, data: &DataSet) -> Result<PartitionTree> {
    read_tree_json(open(path)?, data.ids())
        .with_context(|| format!("reading tree {}", path.display()))
}

fn affinity_kind(opts: &Options) -> AffinityKind {
    opts.affinity.unwrap_or(if opts.tree.is_some() {
        AffinityKind::Tree
    } else if opts.weights.is_some() {
        AffinityKind::File
    } else {
        AffinityKind::Unit
    })
}

fn gaussian_config(opts: &Options, data: &DataSet) -> Result<GaussianConfig> {
    Ok(match opts.sigma.map(|s| s.0).unwrap_or(Auto::Auto) {
        Auto::Auto => GaussianConfig::median_heuristic(data)?,
        Auto::Value(s) => GaussianConfig::new(s)?,
    })
}

fn build_affinity(opts: &Options, data: &DataSet) -> Result<AffinityMatrix> {
    Ok(match affinity_kind(opts) {
        AffinityKind::Unit => unit_affinities(data.n()),
        AffinityKind::Gaussian => gaussian_affinities(data, &gaussian_config(opts, data)?),
        AffinityKind::Tree => {
            let Some(path) = &opts.tree else {
                bail!("--affinity tree needs --tree");
            };
            let tree = load_tree(path, data)?;
            let cfg = match &opts.level_weights {
                Some(w) => TreeWeightConfig::with_level_weights(w.clone())?,
                None => TreeWeightConfig::new(opts.epsilon.unwrap_or(DEFAULT_EPSILON))?,
            };
            tree_affinities(&tree, &cfg)?
        }
        AffinityKind::File => {
            let Some(path) = &opts.weights else {
                bail!("--affinity file needs --weights");
            };
            read_affinities(open(path)?, data.ids())
                .with_context(|| format!("reading {}", path.display()))?
        }
    })
}

fn solve_options(opts: &Options) -> SolveOptions {
    let mut s = SolveOptions::with_norm(opts.norm.unwrap_or(NormKind::Euclidean));
    if let Some(t) = opts.tolerance {
        s.tolerance = t;
    }
    if let Some(m) = opts.max_iter {
        s.max_iterations = m;
    }
    s
}

fn path_options(opts: &Options) -> PathOptions {
    let mut p = PathOptions {
        gamma_min: opts.gamma_min,
        ..PathOptions::default()
    };
    if let Some(g) = opts.gamma_max {
        p.gamma_max = match g.0 {
            Auto::Auto => GammaMax::Auto,
            Auto::Value(v) => GammaMax::Fixed(v),
        };
    }
    match &opts.grid {
        Some(GridArg::Size(k)) => p.grid_size = *k,
        Some(GridArg::Values(v)) => p.grid = Some(v.clone()),
        None => {}
    }
    if let Some(k) = opts.grid_kind {
        p.grid_kind = match k {
            GridKindArg::Geometric => GridKind::Geometric,
            GridKindArg::Linear => GridKind::Linear,
        };
    }
    if let Some(t) = opts.fusion_tol {
        p.fusion_tolerance = t;
    }
    p
}

pub fn affinities(opts: &Options) -> Result<Outcome> {
    let data = load_data(opts)?;
    let aff = build_affinity(opts, &data)?;
    let out = opts.out_dir()?.join("affinities.csv");
    let mut w = create(&out)?;
    write_affinities(&mut w, &aff, data.ids())?;
    w.flush()?;
    println!("wrote {} pairs to {}", aff.nnz(), out.display());
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct PathReport {
    n: usize,
    p: usize,
    norm: NormKind,
    gamma_max: f64,
    /// γ₀ found by the doubling search, when it ran.
    auto_gamma_max: Option<f64>,
    grid: Vec<f64>,
    cluster_counts: Vec<usize>,
    converged: Vec<bool>,
    all_converged: bool,
    unfusion_detected: bool,
    violations: Vec<Violation>,
    dendrogram_complete: bool,
    merges: usize,
}

struct PathRun {
    data: DataSet,
    report: PathReport,
    dendrogram: Option<Dendrogram>,
}

fn run_path(opts: &Options) -> Result<PathRun> {
    let data = load_data(opts)?;
    let aff = build_affinity(opts, &data)?;
    let solve_opts = solve_options(opts);
    let mut popts = path_options(opts);
    let mut auto = None;
    if popts.grid.is_none() && popts.gamma_max == GammaMax::Auto {
        let g = auto_gamma_max(&data, &aff, &popts, &solve_opts)?;
        log::info!("auto gamma_max = {g}");
        auto = Some(g);
        popts.gamma_max = GammaMax::Fixed(g);
    }
    let grid = resolve_grid(&data, &aff, &popts, &solve_opts)?;
    let path = solve_path_on_grid(&data, &aff, &grid, &solve_opts)?;
    let fusions = detect_fusions(&path, &data, popts.fusion_tolerance);

    let out = opts.out_dir()?;
    let mut w = create(&out.join("path.csv"))?;
    write_path_table(&mut w, &path, data.ids())?;
    w.flush()?;

    let (dendrogram, complete) = match recover_tree(&fusions, data.ids()) {
        Ok(d) => (Some(d), true),
        Err(PathError::IncompleteFusion(d)) => (Some(d), false),
        Err(PathError::UnfusionDetected(_)) => (None, false),
        Err(e) => return Err(e.into()),
    };
    if let Some(d) = &dendrogram {
        let mut w = create(&out.join("merges.csv"))?;
        write_merge_table(&mut w, d)?;
        w.flush()?;
        write_text(&out.join("tree.nwk"), &write_newick(d))?;
    }
    let report = PathReport {
        n: data.n(),
        p: data.p(),
        norm: solve_opts.norm_kind,
        gamma_max: *grid.last().expect("grid is non-empty"),
        auto_gamma_max: auto,
        cluster_counts: fusions.cluster_counts(),
        converged: path.converged().to_vec(),
        all_converged: path.all_converged(),
        unfusion_detected: !fusions.violations.is_empty(),
        violations: fusions.violations,
        dendrogram_complete: complete,
        merges: dendrogram.as_ref().map_or(0, |d| d.merges().len()),
        grid,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(PathRun {
        data,
        report,
        dendrogram,
    })
}

fn path_outcome(report: &PathReport) -> Outcome {
    if report.unfusion_detected {
        eprintln!(
            "unfusion detected: {} pair(s) fused and later separated (see report.json)",
            report.violations.len()
        );
        Outcome::Unfused
    } else if !report.all_converged {
        eprintln!("solver stopped at the iteration cap for some grid values");
        Outcome::NotConverged
    } else {
        Outcome::Success
    }
}

pub fn path(opts: &Options) -> Result<Outcome> {
    let run = run_path(opts)?;
    let r = &run.report;
    println!(
        "{} grid values, gamma_max {}, clusters {} -> {}, {} merges{}",
        r.grid.len(),
        r.gamma_max,
        r.cluster_counts.first().copied().unwrap_or(0),
        r.cluster_counts.last().copied().unwrap_or(0),
        r.merges,
        if r.dendrogram_complete {
            ""
        } else {
            " (incomplete)"
        }
    );
    Ok(path_outcome(r))
}

pub fn tree(opts: &Options) -> Result<Outcome> {
    let Some(target_path) = &opts.tree else {
        bail!("tree needs --tree with the target partition tree");
    };
    let (data, dendro, outcome) = match &opts.merges {
        Some(m) => {
            let data = load_data(opts)?;
            let d = read_merge_table(open(m)?, data.ids())
                .with_context(|| format!("reading {}", m.display()))?;
            (data, d, Outcome::Success)
        }
        None => {
            let run = run_path(opts)?;
            let outcome = path_outcome(&run.report);
            match run.dendrogram {
                Some(d) => (run.data, d, outcome),
                None => return Ok(outcome),
            }
        }
    };
    let target = load_tree(target_path, &data)?;
    let agreement: TreeAgreement = tree_agreement(&dendro, &target)?;
    write_json(&opts.out_dir()?.join("agreement.json"), &agreement)?;
    match agreement.first_mismatch {
        None => println!("exact: true"),
        Some(l) => println!("exact: false (first mismatch at level {l})"),
    }
    Ok(if outcome != Outcome::Success {
        outcome
    } else if agreement.exact {
        Outcome::Success
    } else {
        Outcome::CheckFailed
    })
}

#[derive(Serialize)]
struct LemmaTrial {
    n: usize,
    p: usize,
    witness_score: f64,
    witnesses: usize,
    required_witnesses: usize,
    min_full_set_score: f64,
}

#[derive(Serialize)]
struct LemmaReport {
    seed: Option<u64>,
    trials: Vec<LemmaTrial>,
    min_witness_score: f64,
    min_full_set_score: f64,
    equilateral_score: f64,
    pass: bool,
}

fn lemma_trial(set: &PointSet) -> Result<LemmaTrial> {
    let w = witness(set)?;
    let ws = witness_set(set)?;
    Ok(LemmaTrial {
        n: set.n(),
        p: set.p(),
        witness_score: w.score,
        witnesses: ws.len(),
        required_witnesses: set.n().div_ceil(6),
        min_full_set_score: ws.iter().map(|w| w.score).fold(f64::INFINITY, f64::min),
    })
}

pub fn lemma_check(opts: &Options) -> Result<Outcome> {
    let mut trials = Vec::new();
    let seed = if opts.input.is_some() {
        let data = load_data(opts)?;
        trials.push(lemma_trial(&PointSet::new(data.points().clone())?)?);
        None
    } else {
        let (lo, hi) = (opts.n_min.unwrap_or(3), opts.n_max.unwrap_or(50));
        if lo < 3 {
            return Err(GeometryError::TooFewPoints { n: lo }.into());
        }
        if hi < lo {
            bail!("--n-max must be at least --n-min");
        }
        let p = opts.dim.unwrap_or(2);
        if p == 0 {
            bail!("--dim must be positive");
        }
        let count = opts.trials.unwrap_or(100);
        if count == 0 {
            bail!("--trials must be at least 1");
        }
        let seed = opts.seed.unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..count {
            let n = rng.random_range(lo..=hi);
            trials.push(lemma_trial(&PointSet::new(gaussian_cloud(
                &mut rng, n, p,
            ))?)?);
        }
        Some(seed)
    };
    let triangle = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]])?;
    let equilateral_score = witness(&triangle)?.score;
    let min_witness_score = trials
        .iter()
        .map(|t| t.witness_score)
        .fold(f64::INFINITY, f64::min);
    let min_full_set_score = trials
        .iter()
        .map(|t| t.min_full_set_score)
        .fold(f64::INFINITY, f64::min);
    let pass = min_witness_score >= 0.5 - LEMMA_TOLERANCE
        && min_full_set_score >= 0.25 - LEMMA_TOLERANCE
        && trials.iter().all(|t| t.witnesses >= t.required_witnesses)
        && (equilateral_score - 0.5).abs() <= 1e-12;
    println!(
        "{} trial(s): min witness score {min_witness_score}, min full-set score {min_full_set_score}, equilateral {equilateral_score}: {}",
        trials.len(),
        if pass { "pass" } else { "FAIL" }
    );
    let report = LemmaReport {
        seed,
        trials,
        min_witness_score,
        min_full_set_score,
        equilateral_score,
        pass,
    };
    write_json(&opts.out_dir()?.join("lemma.json"), &report)?;
    Ok(if pass {
        Outcome::Success
    } else {
        Outcome::CheckFailed
    })
}

#[derive(Serialize)]
struct MmReport {
    penalty: Penalty,
    gamma: f64,
    steps: usize,
    energies: Vec<f64>,
    descending: bool,
    converged: Vec<bool>,
    kept_anchor: Vec<bool>,
}

fn penalty(opts: &Options, data: &DataSet) -> Result<Penalty> {
    let lambda = opts.lambda.unwrap_or(1.0);
    Ok(match opts.penalty.unwrap_or(PenaltyArg::Erf) {
        PenaltyArg::Erf => Penalty::erf(gaussian_config(opts, data)?.sigma())?,
        PenaltyArg::Scad => Penalty::scad(lambda, opts.a.unwrap_or(SCAD_DEFAULT_A))?,
        PenaltyArg::Mcp => Penalty::mcp(lambda, opts.a.unwrap_or(MCP_DEFAULT_A))?,
    })
}

pub fn mm(opts: &Options) -> Result<Outcome> {
    let data = load_data(opts)?;
    let pen = penalty(opts, &data)?;
    let Some(gamma) = opts.gamma else {
        bail!("mm needs --gamma");
    };
    let steps = opts.steps.unwrap_or(1);
    let solve_opts = solve_options(opts);
    let trace = lla_run(&data, &pen, gamma, steps, &solve_opts)?;
    let out = opts.out_dir()?;
    for (k, u) in trace.iterates.iter().enumerate() {
        let converged = k == 0 || trace.converged[k - 1];
        let single = SolutionPath::new(
            vec![gamma],
            vec![u.clone()],
            vec![converged],
            NormKind::Euclidean,
        )?;
        let mut w = create(&out.join(format!("step_{k}.csv")))?;
        write_path_table(&mut w, &single, data.ids())?;
        w.flush()?;
    }
    for (k, weights) in trace.weights_per_step.iter().enumerate() {
        let mut w = create(&out.join(format!("weights_{}.csv", k + 1)))?;
        write_affinities(&mut w, weights, data.ids())?;
        w.flush()?;
    }
    let mut w = create(&out.join("energies.csv"))?;
    writeln!(w, "step,energy")?;
    for (k, e) in trace.energies.iter().enumerate() {
        writeln!(w, "{k},{}", sonpath::formats::fmt_f64(*e))?;
    }
    w.flush()?;
    let descending = trace.is_descending(1e-10);
    let all_converged = trace.converged.iter().all(|&c| c);
    println!(
        "{steps} LLA step(s): energy {} -> {}, descending: {descending}",
        trace.energies[0], trace.energies[steps]
    );
    write_json(
        &out.join("report.json"),
        &MmReport {
            penalty: pen,
            gamma,
            steps,
            energies: trace.energies,
            descending,
            converged: trace.converged,
            kept_anchor: trace.kept_anchor,
        },
    )?;
    Ok(if !descending {
        Outcome::CheckFailed
    } else if !all_converged {
        Outcome::NotConverged
    } else {
        Outcome::Success
    })
}

pub fn baseline(opts: &Options) -> Result<Outcome> {
    let data = load_data(opts)?;
    if data.n() < 2 {
        bail!("baseline needs at least 2 points");
    }
    let method = opts.method.unwrap_or(Linkage::Average);
    let d = linkage_baseline(&data, method);
    let out = opts.out_dir()?;
    let mut w = create(&out.join("merges.csv"))?;
    write_merge_table(&mut w, &d)?;
    w.flush()?;
    write_text(&out.join("tree.nwk"), &write_newick(&d))?;
    println!("{} merges ({method:?} linkage)", d.merges().len());
    Ok(Outcome::Success)
}
