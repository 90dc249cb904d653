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

//! Run configuration: command-line flags merged over an optional JSON file
//! whose keys are the flag names in snake_case. Flags win.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

use sonpath::path::Linkage;
use sonpath::NormKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffinityKind {
    /// All pairs weighted 1.
    Unit,
    /// Gaussian kernel `exp(-‖x_i − x_j‖² / σ)`.
    Gaussian,
    /// Tree affinities from `--tree`.
    Tree,
    /// Triplets read from `--weights`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyArg {
    Erf,
    Scad,
    Mcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKindArg {
    Geometric,
    Linear,
}

/// A number, or a keyword accepted by the flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

fn parse_auto(s: &str, keyword: &str) -> Result<Auto, String> {
    if s.eq_ignore_ascii_case(keyword) {
        return Ok(Auto::Auto);
    }
    s.parse::<f64>()
        .map(Auto::Value)
        .map_err(|_| format!("expected a number or '{keyword}', got '{s}'"))
}

/// `--sigma`: a positive number or `median`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaArg(pub Auto);

impl FromStr for SigmaArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_auto(s, "median").map(SigmaArg)
    }
}

/// `--gamma-max`: a positive number or `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMaxArg(pub Auto);

impl FromStr for GammaMaxArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_auto(s, "auto").map(GammaMaxArg)
    }
}

/// `--grid`: an integer grid size, or a comma-separated list of γ values
/// (a single value needs a decimal point, e.g. `0.5` or `2.0`).
#[derive(Debug, Clone, PartialEq)]
pub enum GridArg {
    Size(usize),
    Values(Vec<f64>),
}

impl FromStr for GridArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if !s.contains(',') {
            if let Ok(k) = s.trim().parse::<usize>() {
                return Ok(GridArg::Size(k));
            }
        }
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad grid value '{v}'"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(GridArg::Values)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Int(usize),
    Num(f64),
    Text(String),
    List(Vec<f64>),
}

macro_rules! deserialize_via_str {
    ($t:ty, $from_num:expr, $from_list:expr) => {
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let convert: fn(Raw) -> Result<$t, String> = |raw| match raw {
                    Raw::Int(k) => $from_num(k as f64, Some(k)),
                    Raw::Num(v) => $from_num(v, None),
                    Raw::Text(s) => s.parse(),
                    Raw::List(l) => $from_list(l),
                };
                convert(Raw::deserialize(d)?).map_err(serde::de::Error::custom)
            }
        }
    };
}

deserialize_via_str!(
    SigmaArg,
    |v: f64, _: Option<usize>| Ok(SigmaArg(Auto::Value(v))),
    |_| Err("sigma must be a number or \"median\"".to_string())
);
deserialize_via_str!(
    GammaMaxArg,
    |v: f64, _: Option<usize>| Ok(GammaMaxArg(Auto::Value(v))),
    |_| Err("gamma_max must be a number or \"auto\"".to_string())
);
deserialize_via_str!(
    GridArg,
    |v: f64, k: Option<usize>| Ok(match k {
        Some(k) => GridArg::Size(k),
        None => GridArg::Values(vec![v]),
    }),
    |l| Ok(GridArg::Values(l))
);

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// JSON file with default values for any of these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Data CSV: one point per row, optional header, optional leading id column
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Affinity construction (default: tree if --tree is given, file if
    /// --weights is given, unit otherwise)
    #[arg(long, value_enum)]
    pub affinity: Option<AffinityKind>,
    /// Base ε of tree affinities (weight ε^(level−1) for pairs joining at `level`)
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Explicit tree weights per join level, comma-separated, strictly decreasing
    #[arg(long, value_delimiter = ',')]
    pub level_weights: Option<Vec<f64>>,
    /// Gaussian kernel scale, or `median` for the median squared pairwise distance
    #[arg(long)]
    pub sigma: Option<SigmaArg>,
    /// Partition tree JSON
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Affinity triplet CSV for `--affinity file`
    #[arg(long)]
    pub weights: Option<PathBuf>,

    /// Largest grid γ, or `auto`
    #[arg(long)]
    pub gamma_max: Option<GammaMaxArg>,
    /// Smallest grid γ
    #[arg(long)]
    pub gamma_min: Option<f64>,
    /// Grid size, or a comma-separated list of γ values
    #[arg(long)]
    pub grid: Option<GridArg>,
    #[arg(long, value_enum)]
    pub grid_kind: Option<GridKindArg>,
    /// Fusion threshold relative to the data diameter
    #[arg(long)]
    pub fusion_tol: Option<f64>,

    /// Penalty norm on centroid differences
    #[arg(long)]
    pub norm: Option<NormKind>,
    /// Solver stopping tolerance
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Solver iteration cap per γ
    #[arg(long)]
    pub max_iter: Option<usize>,

    /// Regularization strength for single-γ runs
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyArg>,
    /// λ of SCAD and MCP
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Shape parameter `a` of SCAD (> 2) and MCP (> 1)
    #[arg(long)]
    pub a: Option<f64>,
    /// Number of LLA steps
    #[arg(long)]
    pub steps: Option<usize>,

    /// Linkage for `baseline`
    #[arg(long)]
    pub method: Option<Linkage>,
    /// Merge table to compare instead of solving a path
    #[arg(long)]
    pub merges: Option<PathBuf>,

    /// Random seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Smallest random set size for `lemma-check`
    #[arg(long)]
    pub n_min: Option<usize>,
    /// Largest random set size for `lemma-check`
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Dimension of random sets for `lemma-check`
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of random sets for `lemma-check`
    #[arg(long)]
    pub trials: Option<usize>,
}

macro_rules! merge_fields {
    ($flags:expr, $file:expr, $($f:ident),*) => {
        Options { config: $flags.config, $($f: $flags.$f.or($file.$f)),* }
    };
}

impl Options {
    /// Applies the `--config` file underneath the flags. Relative paths in
    /// the file are resolved against the file's directory.
    pub fn resolve(self) -> Result<Options> {
        let Some(cfg) = &self.config else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(cfg)
            .with_context(|| format!("reading config {}", cfg.display()))?;
        let mut file: Options = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", cfg.display()))?;
        let base = cfg.parent().unwrap_or(Path::new("."));
        for p in [
            &mut file.input,
            &mut file.tree,
            &mut file.weights,
            &mut file.merges,
            &mut file.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(merge_fields!(
            self,
            file,
            input,
            out,
            affinity,
            epsilon,
            level_weights,
            sigma,
            tree,
            weights,
            gamma_max,
            gamma_min,
            grid,
            grid_kind,
            fusion_tol,
            norm,
            tolerance,
            max_iter,
            gamma,
            penalty,
            lambda,
            a,
            steps,
            method,
            merges,
            seed,
            n_min,
            n_max,
            dim,
            trials
        ))
    }

    pub fn input(&self) -> Result<&Path> {
        match &self.input {
            Some(p) => Ok(p),
            None => bail!("--input is required"),
        }
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("sonpath_out"));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}
