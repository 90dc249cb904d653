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

//! Text formats: data CSV, affinity triplets, tree JSON, path and merge
//! tables and Newick.
//!
//! Floats are written with Rust's shortest round-trip representation, so
//! every writer here has a reader that recovers an equal value.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{
    validate_tree, AffinityMatrix, CentroidSet, CoreError, DataSet, Dendrogram, Merge,
    PartitionTree, PointMatrix, SolutionPath,
};

/// Prefix of internal cluster labels in merge tables (`@1`, `@2`, …).
pub const INTERNAL_PREFIX: char = '@';

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: unknown id '{id}'")]
    UnknownId { line: u64, id: String },
    #[error("id '{0}' is reserved: ids may not start with '@'")]
    ReservedId(String),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("newick, byte {pos}: {message}")]
    Newick { pos: usize, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: u64, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn records<R: Read>(reader: R) -> Result<Vec<(u64, Vec<String>)>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn numeric(s: &str) -> bool {
    s.parse::<f64>().is_ok()
}

fn parse_f64(line: u64, s: &str) -> Result<f64, FormatError> {
    s.parse::<f64>()
        .map_err(|_| parse_err(line, format!("'{s}' is not a number")))
}

fn parse_usize(line: u64, s: &str) -> Result<usize, FormatError> {
    s.parse::<usize>()
        .map_err(|_| parse_err(line, format!("'{s}' is not a nonnegative integer")))
}

fn id_lookup(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect()
}

fn lookup(map: &HashMap<&str, usize>, line: u64, id: &str) -> Result<usize, FormatError> {
    map.get(id).copied().ok_or_else(|| FormatError::UnknownId {
        line,
        id: id.to_owned(),
    })
}

/// Reads one point per row. A first row with a non-numeric coordinate (or a
/// first field `id`) is a header. The first column holds ids when the header
/// names it `id` or when any row has a non-numeric first field; otherwise ids
/// are 1-based row numbers.
pub fn read_data_csv<R: Read>(reader: R) -> Result<DataSet, FormatError> {
    let mut recs = records(reader)?;
    let Some((_, first)) = recs.first() else {
        return Err(CoreError::EmptyData.into());
    };
    let header_names_id = first[0].eq_ignore_ascii_case("id");
    let has_header = if first.len() == 1 {
        !numeric(&first[0])
    } else {
        header_names_id || first[1..].iter().any(|s| !numeric(s))
    };
    if has_header {
        recs.remove(0);
    }
    if recs.is_empty() {
        return Err(CoreError::EmptyData.into());
    }
    let width = recs[0].1.len();
    let has_ids =
        (has_header && header_names_id) || (width > 1 && recs.iter().any(|(_, r)| !numeric(&r[0])));
    let skip = usize::from(has_ids);
    let p = width - skip;
    if p == 0 {
        return Err(parse_err(recs[0].0, "no coordinate columns"));
    }
    let mut values = Vec::with_capacity(recs.len() * p);
    let mut ids = Vec::with_capacity(recs.len());
    for (k, (line, rec)) in recs.iter().enumerate() {
        if rec.len() != width {
            return Err(parse_err(
                *line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        for s in &rec[skip..] {
            let v = parse_f64(*line, s)?;
            if !v.is_finite() {
                return Err(parse_err(*line, format!("non-finite value '{s}'")));
            }
            values.push(v);
        }
        let id = if has_ids {
            rec[0].clone()
        } else {
            (k + 1).to_string()
        };
        if id.starts_with(INTERNAL_PREFIX) {
            return Err(FormatError::ReservedId(id));
        }
        ids.push(id);
    }
    let points = PointMatrix::from_row_major(recs.len(), p, values)?;
    Ok(DataSet::new(points, ids)?)
}

/// Writes `id,x1,…,xp` and one row per point.
pub fn write_data_csv<W: Write>(writer: W, data: &DataSet) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_owned()];
    header.extend((1..=data.p()).map(|d| format!("x{d}")));
    w.write_record(&header)?;
    for (i, id) in data.ids().iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(data.point(i).iter().map(|&v| fmt_f64(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `id_i,id_j,weight` triplets; absent pairs have weight 0.
pub fn read_affinities<R: Read>(reader: R, ids: &[String]) -> Result<AffinityMatrix, FormatError> {
    let map = id_lookup(ids);
    let mut aff = AffinityMatrix::empty(ids.len());
    let mut seen = std::collections::HashSet::new();
    for (k, (line, rec)) in records(reader)?.into_iter().enumerate() {
        if rec.len() != 3 {
            return Err(parse_err(
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        if k == 0 && !numeric(&rec[2]) {
            continue;
        }
        let i = lookup(&map, line, &rec[0])?;
        let j = lookup(&map, line, &rec[1])?;
        let w = parse_f64(line, &rec[2])?;
        if i == j {
            return Err(parse_err(line, format!("self pair '{}'", rec[0])));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(parse_err(
                line,
                format!("duplicate pair '{}','{}'", rec[0], rec[1]),
            ));
        }
        aff.set(i.min(j), i.max(j), w)
            .map_err(|e| parse_err(line, e.to_string()))?;
    }
    Ok(aff)
}

/// Writes nonzero weights as `id_i,id_j,weight` with `id_i < id_j`, sorted.
pub fn write_affinities<W: Write>(
    writer: W,
    aff: &AffinityMatrix,
    ids: &[String],
) -> Result<(), FormatError> {
    let mut rows: Vec<(&str, &str, f64)> = aff
        .pairs()
        .map(|(i, j, w)| {
            let (a, b) = (ids[i].as_str(), ids[j].as_str());
            if a < b {
                (a, b, w)
            } else {
                (b, a, w)
            }
        })
        .collect();
    rows.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    let mut w = csv::Writer::from_writer(writer);
    for (a, b, v) in rows {
        w.write_record([a, b, &fmt_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeFile {
    levels: Vec<Vec<Vec<String>>>,
}

/// Reads `{"levels": [[["id", …], …], …]}`, levels listed from level 1 up.
pub fn read_tree_json<R: Read>(reader: R, ids: &[String]) -> Result<PartitionTree, FormatError> {
    let file: TreeFile = serde_json::from_reader(reader)?;
    let map = id_lookup(ids);
    let upper = file
        .levels
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|folder| folder.iter().map(|id| lookup(&map, 0, id)).collect())
                .collect()
        })
        .collect::<Result<Vec<Vec<Vec<usize>>>, _>>()?;
    let tree = PartitionTree::from_upper_levels(ids.len(), upper);
    validate_tree(&tree, ids.len())?;
    Ok(tree)
}

pub fn write_tree_json(tree: &PartitionTree, ids: &[String]) -> Result<String, FormatError> {
    let file = TreeFile {
        levels: tree.levels()[1..]
            .iter()
            .map(|level| {
                level
                    .iter()
                    .map(|folder| folder.iter().map(|&i| ids[i].clone()).collect())
                    .collect()
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Long-form `gamma,id,dim,value` rows; `dim` is 1-based.
pub fn write_path_table<W: Write>(
    writer: W,
    path: &SolutionPath,
    ids: &[String],
) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["gamma", "id", "dim", "value"])?;
    for (gamma, snap) in path.gammas().iter().zip(path.snapshots()) {
        let g = fmt_f64(*gamma);
        for (i, id) in ids.iter().enumerate() {
            for (d, v) in snap.centroid(i).iter().enumerate() {
                w.write_record([g.as_str(), id, &(d + 1).to_string(), &fmt_f64(*v)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a path table back into its grid and snapshots.
pub fn read_path_table<R: Read>(
    reader: R,
    ids: &[String],
) -> Result<(Vec<f64>, Vec<CentroidSet>), FormatError> {
    let map = id_lookup(ids);
    let n = ids.len();
    let mut gammas: Vec<f64> = Vec::new();
    let mut cells: Vec<BTreeMap<(usize, usize), f64>> = Vec::new();
    let mut p = 0;
    for (k, (line, rec)) in records(reader)?.into_iter().enumerate() {
        if rec.len() != 4 {
            return Err(parse_err(
                line,
                format!("expected 4 fields, found {}", rec.len()),
            ));
        }
        if k == 0 && !numeric(&rec[0]) {
            continue;
        }
        let g = parse_f64(line, &rec[0])?;
        let i = lookup(&map, line, &rec[1])?;
        let d = parse_usize(line, &rec[2])?;
        if d == 0 {
            return Err(parse_err(line, "dim is 1-based"));
        }
        let v = parse_f64(line, &rec[3])?;
        if gammas.last() != Some(&g) {
            if gammas.contains(&g) {
                return Err(parse_err(
                    line,
                    format!("rows for gamma {g} are not contiguous"),
                ));
            }
            gammas.push(g);
            cells.push(BTreeMap::new());
        }
        p = p.max(d);
        if cells.last_mut().unwrap().insert((i, d - 1), v).is_some() {
            return Err(parse_err(line, "duplicate cell"));
        }
    }
    let snapshots = cells
        .into_iter()
        .zip(&gammas)
        .map(|(c, g)| {
            if c.len() != n * p {
                return Err(parse_err(
                    0,
                    format!("gamma {g}: expected {} cells, found {}", n * p, c.len()),
                ));
            }
            let values = c.into_values().collect();
            Ok(CentroidSet::new(PointMatrix::from_row_major(
                n, p, values,
            )?)?)
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    Ok((gammas, snapshots))
}

fn cluster_label(ids: &[String], c: usize) -> String {
    if c < ids.len() {
        ids[c].clone()
    } else {
        format!("{INTERNAL_PREFIX}{}", c - ids.len() + 1)
    }
}

/// `step,gamma,cluster_a,cluster_b,new_cluster,size`, with leaves named by id
/// and the cluster created at step `k` named `@k`.
pub fn write_merge_table<W: Write>(writer: W, dendro: &Dendrogram) -> Result<(), FormatError> {
    let ids = dendro.leaf_ids();
    if let Some(bad) = ids.iter().find(|s| s.starts_with(INTERNAL_PREFIX)) {
        return Err(FormatError::ReservedId(bad.clone()));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "step",
        "gamma",
        "cluster_a",
        "cluster_b",
        "new_cluster",
        "size",
    ])?;
    for (s, m) in dendro.merges().iter().enumerate() {
        w.write_record([
            (s + 1).to_string(),
            fmt_f64(m.gamma),
            cluster_label(ids, m.cluster_a),
            cluster_label(ids, m.cluster_b),
            cluster_label(ids, m.new_cluster),
            m.size.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_merge_table<R: Read>(
    reader: R,
    leaf_ids: &[String],
) -> Result<Dendrogram, FormatError> {
    let map = id_lookup(leaf_ids);
    let n = leaf_ids.len();
    let cluster = |line: u64, s: &str| -> Result<usize, FormatError> {
        match s.strip_prefix(INTERNAL_PREFIX) {
            Some(k) => {
                let k = parse_usize(line, k)?;
                if k == 0 {
                    return Err(parse_err(line, "internal labels start at @1"));
                }
                Ok(n + k - 1)
            }
            None => lookup(&map, line, s),
        }
    };
    let mut merges = Vec::new();
    for (k, (line, rec)) in records(reader)?.into_iter().enumerate() {
        if rec.len() != 6 {
            return Err(parse_err(
                line,
                format!("expected 6 fields, found {}", rec.len()),
            ));
        }
        if k == 0 && !numeric(&rec[0]) {
            continue;
        }
        let step = parse_usize(line, &rec[0])?;
        if step != merges.len() + 1 {
            return Err(parse_err(
                line,
                format!("expected step {}, found {step}", merges.len() + 1),
            ));
        }
        merges.push(Merge {
            gamma: parse_f64(line, &rec[1])?,
            cluster_a: cluster(line, &rec[2])?,
            cluster_b: cluster(line, &rec[3])?,
            new_cluster: cluster(line, &rec[4])?,
            size: parse_usize(line, &rec[5])?,
        });
    }
    Ok(Dendrogram::new(leaf_ids.to_vec(), merges)?)
}

/// A Newick tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct NewickNode {
    pub name: Option<String>,
    pub length: Option<f64>,
    pub children: Vec<NewickNode>,
}

/// One Newick tree per root of `dendro`. Node heights are merge γ values
/// (0 for leaves) and branch lengths are height differences.
pub fn newick_trees(dendro: &Dendrogram) -> Vec<NewickNode> {
    let n = dendro.n_leaves();
    let merges = dendro.merges();
    let height = |c: usize| if c < n { 0.0 } else { merges[c - n].gamma };
    fn build(
        c: usize,
        parent: Option<f64>,
        dendro: &Dendrogram,
        height: &dyn Fn(usize) -> f64,
    ) -> NewickNode {
        let n = dendro.n_leaves();
        let length = parent.map(|h| h - height(c));
        if c < n {
            NewickNode {
                name: Some(dendro.leaf_ids()[c].clone()),
                length,
                children: Vec::new(),
            }
        } else {
            let m = &dendro.merges()[c - n];
            NewickNode {
                name: None,
                length,
                children: vec![
                    build(m.cluster_a, Some(m.gamma), dendro, height),
                    build(m.cluster_b, Some(m.gamma), dendro, height),
                ],
            }
        }
    }
    dendro
        .roots()
        .into_iter()
        .map(|r| build(r, None, dendro, &height))
        .collect()
}

fn bare_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '@' | '+' | '/'))
}

fn write_node(out: &mut String, node: &NewickNode) {
    if !node.children.is_empty() {
        out.push('(');
        for (k, child) in node.children.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write_node(out, child);
        }
        out.push(')');
    }
    if let Some(name) = &node.name {
        if bare_name(name) {
            out.push_str(name);
        } else {
            let _ = write!(out, "'{}'", name.replace('\'', "''"));
        }
    }
    if let Some(len) = node.length {
        let _ = write!(out, ":{}", fmt_f64(len));
    }
}

/// Newick text with one `;`-terminated tree per line.
pub fn to_newick(trees: &[NewickNode]) -> String {
    let mut out = String::new();
    for t in trees {
        write_node(&mut out, t);
        out.push_str(";\n");
    }
    out
}

pub fn write_newick(dendro: &Dendrogram) -> String {
    to_newick(&newick_trees(dendro))
}

struct NewickParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl NewickParser<'_> {
    fn err(&self, message: impl Into<String>) -> FormatError {
        FormatError::Newick {
            pos: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), FormatError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", c as char)))
        }
    }

    fn name(&mut self) -> Result<Option<String>, FormatError> {
        match self.peek() {
            Some(b'\'') => {
                self.pos += 1;
                let mut bytes = Vec::new();
                loop {
                    match self.src.get(self.pos) {
                        None => return Err(self.err("unterminated quoted name")),
                        Some(b'\'') if self.src.get(self.pos + 1) == Some(&b'\'') => {
                            bytes.push(b'\'');
                            self.pos += 2;
                        }
                        Some(b'\'') => {
                            self.pos += 1;
                            break;
                        }
                        Some(&c) => {
                            bytes.push(c);
                            self.pos += 1;
                        }
                    }
                }
                String::from_utf8(bytes)
                    .map(Some)
                    .map_err(|_| self.err("name is not UTF-8"))
            }
            _ => {
                let start = self.pos;
                while let Some(&c) = self.src.get(self.pos) {
                    if matches!(c, b'(' | b')' | b',' | b':' | b';') || c.is_ascii_whitespace() {
                        break;
                    }
                    self.pos += 1;
                }
                let s = std::str::from_utf8(&self.src[start..self.pos])
                    .map_err(|_| self.err("name is not UTF-8"))?;
                Ok((!s.is_empty()).then(|| s.to_owned()))
            }
        }
    }

    fn node(&mut self) -> Result<NewickNode, FormatError> {
        let mut children = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                children.push(self.node()?);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ',' or ')'")),
                }
            }
        }
        let name = self.name()?;
        let length = if self.peek() == Some(b':') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while let Some(&c) = self.src.get(self.pos) {
                if matches!(c, b'(' | b')' | b',' | b';') || c.is_ascii_whitespace() {
                    break;
                }
                self.pos += 1;
            }
            let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            Some(
                s.parse::<f64>()
                    .map_err(|_| self.err(format!("bad branch length '{s}'")))?,
            )
        } else {
            None
        };
        Ok(NewickNode {
            name,
            length,
            children,
        })
    }
}

/// Parses one or more `;`-terminated Newick trees.
pub fn parse_newick(text: &str) -> Result<Vec<NewickNode>, FormatError> {
    let mut p = NewickParser {
        src: text.as_bytes(),
        pos: 0,
    };
    let mut trees = Vec::new();
    while p.peek().is_some() {
        trees.push(p.node()?);
        p.expect(b';')?;
    }
    Ok(trees)
}
