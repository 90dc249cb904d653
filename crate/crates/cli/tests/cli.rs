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

use std::path::{Path, PathBuf};
use std::process::Command;

use sonpath::formats::{
    parse_newick, read_merge_table, read_path_table, write_data_csv, write_tree_json,
};
use sonpath::synthetic::{three_level_instance, ThreeLevelLayout};
use sonpath::{DataSet, Dendrogram};

fn sonpath(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sonpath"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&read(p)).unwrap()
}

fn ids(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// The 18-point three-level instance with its tree, written to disk.
fn tree_instance_files(dir: &Path) -> (PathBuf, PathBuf, DataSet) {
    let (data, tree) = three_level_instance(ThreeLevelLayout::default(), 7);
    let data_path = dir.join("points.csv");
    write_data_csv(std::fs::File::create(&data_path).unwrap(), &data).unwrap();
    let tree_path = dir.join("three_level_tree.json");
    std::fs::write(&tree_path, write_tree_json(&tree, data.ids()).unwrap()).unwrap();
    (data_path, tree_path, data)
}

#[test]
fn unit_affinities_for_three_points() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "0,0\n1,0\n0,1\n");
    let out = dir.path().join("o");
    let (code, _, _) = sonpath(&["affinities", "--input", &input, "--out", s(&out)]);
    assert_eq!(code, 0);
    assert_eq!(
        read(out.join("affinities.csv")),
        "1,2,1.0\n1,3,1.0\n2,3,1.0\n"
    );
}

#[test]
fn tree_affinities_take_three_values() {
    let dir = tempfile::tempdir().unwrap();
    let (data, tree, _) = tree_instance_files(dir.path());
    let out = dir.path().join("o");
    let (code, _, err) = sonpath(&[
        "affinities",
        "--input",
        s(&data),
        "--affinity",
        "tree",
        "--tree",
        s(&tree),
        "--epsilon",
        "0.01",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = read(out.join("affinities.csv"));
    let mut values: Vec<String> = text
        .lines()
        .map(|l| l.rsplit(',').next().unwrap().to_owned())
        .collect();
    assert_eq!(values.len(), 18 * 17 / 2);
    values.sort();
    values.dedup();
    assert_eq!(values, vec!["0.0001", "0.01", "1.0"]);
}

#[test]
fn gaussian_weight_of_coincident_points_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "id,x\na,0.5\nb,0.5\nc,3\n");
    let out = dir.path().join("o");
    let (code, _, _) = sonpath(&[
        "affinities",
        "--input",
        &input,
        "--affinity",
        "gaussian",
        "--sigma",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    assert!(read(out.join("affinities.csv")).starts_with("a,b,1.0\n"));
}

#[test]
fn two_point_path_merges_near_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "0\n1\n");
    let out = dir.path().join("o");
    let (code, _, err) = sonpath(&["path", "--input", &input, "--out", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let ids = ids(&["1", "2"]);
    let d = read_merge_table(std::fs::File::open(out.join("merges.csv")).unwrap(), &ids).unwrap();
    assert_eq!(d.merges().len(), 1);
    let g = d.merges()[0].gamma;
    assert!((0.5..0.6).contains(&g), "{g}");
    let report = json(out.join("report.json"));
    assert!(report["auto_gamma_max"].as_f64().unwrap() >= 0.5);
    assert_eq!(
        report["cluster_counts"].as_array().unwrap().last().unwrap(),
        1
    );
    assert_eq!(report["unfusion_detected"], false);
    assert_eq!(parse_newick(&read(out.join("tree.nwk"))).unwrap().len(), 1);
}

#[test]
fn grid_with_zero_starts_at_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "0.25,1\n1,-2\n3,0.5\n");
    let out = dir.path().join("o");
    let (code, _, _) = sonpath(&[
        "path",
        "--input",
        &input,
        "--grid",
        "0,0.5,1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let table = read(out.join("path.csv"));
    let first: Vec<&str> = table.lines().skip(1).take(6).collect();
    assert_eq!(
        first,
        vec![
            "0.0,1,1,0.25",
            "0.0,1,2,1.0",
            "0.0,2,1,1.0",
            "0.0,2,2,-2.0",
            "0.0,3,1,3.0",
            "0.0,3,2,0.5"
        ]
    );
    let (gammas, snaps) = read_path_table(table.as_bytes(), &ids(&["1", "2", "3"])).unwrap();
    assert_eq!(gammas, vec![0.0, 0.5, 1.0]);
    assert_eq!(snaps.len(), 3);
}

fn clade_leaves(node: &sonpath::formats::NewickNode, out: &mut Vec<Vec<String>>) -> Vec<String> {
    if node.children.is_empty() {
        return vec![node.name.clone().unwrap()];
    }
    let mut all = Vec::new();
    for c in &node.children {
        all.extend(clade_leaves(c, out));
    }
    all.sort();
    out.push(all.clone());
    all
}

#[test]
fn tree_affinity_path_recovers_the_input_tree() {
    let dir = tempfile::tempdir().unwrap();
    let (data_path, tree_path, data) = tree_instance_files(dir.path());
    let out = dir.path().join("o");
    let (code, stdout, err) = sonpath(&[
        "tree",
        "--input",
        s(&data_path),
        "--tree",
        s(&tree_path),
        "--gamma-min",
        "0.001",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0, "{stdout}{err}");
    assert!(stdout.contains("exact: true"));
    assert_eq!(json(out.join("agreement.json"))["exact"], true);

    // Every folder of the input tree is a clade of the Newick tree.
    let trees = parse_newick(&read(out.join("tree.nwk"))).unwrap();
    assert_eq!(trees.len(), 1);
    let mut clades = Vec::new();
    clade_leaves(&trees[0], &mut clades);
    let tree =
        sonpath::formats::read_tree_json(std::fs::File::open(&tree_path).unwrap(), data.ids())
            .unwrap();
    for level in &tree.levels()[1..] {
        for folder in level {
            let mut names: Vec<String> = folder.iter().map(|&i| data.ids()[i].clone()).collect();
            names.sort();
            assert!(names.len() == 1 || clades.contains(&names), "{names:?}");
        }
    }

    // Comparing the written merge table gives the same answer.
    let (code, stdout, _) = sonpath(&[
        "tree",
        "--input",
        s(&data_path),
        "--tree",
        s(&tree_path),
        "--merges",
        s(&out.join("merges.csv")),
        "--out",
        s(&dir.path().join("o2")),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("exact: true"));
}

#[test]
fn wrong_tree_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "id,x\na,0\nb,1\nc,10\nd,11\n");
    let merges = write(
        dir.path(),
        "m.csv",
        "step,gamma,cluster_a,cluster_b,new_cluster,size\n1,1.0,a,c,@1,2\n2,2.0,b,d,@2,2\n3,3.0,@1,@2,@3,4\n",
    );
    let tree = write(
        dir.path(),
        "t.json",
        r#"{"levels": [[["a","b"],["c","d"]], [["a","b","c","d"]]]}"#,
    );
    let out = dir.path().join("o");
    let (code, stdout, _) = sonpath(&[
        "tree",
        "--input",
        &input,
        "--tree",
        &tree,
        "--merges",
        &merges,
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 4);
    assert!(stdout.contains("first mismatch at level 1"));
}

const UNFUSION_DATA: &str = "0.961026522794783,-0.04589657052772722
0.5058571284764803,-0.8443398594551872
0.946787279661141,-0.15491461440330312
0.40619885538300204,-0.2705012796343347
-0.24153320668903833,0.19254011367681256
";

const UNFUSION_WEIGHTS: &str = "1,2,0.4961135916048139
1,3,0.043740985758899356
1,5,0.8527518225346123
2,4,0.07694036259458126
3,4,0.16406256697561888
3,5,0.8469527071761779
4,5,0.04238402409602258
";

#[test]
fn unfusion_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", UNFUSION_DATA);
    let weights = write(dir.path(), "w.csv", UNFUSION_WEIGHTS);
    let out = dir.path().join("o");
    let (code, _, err) = sonpath(&[
        "path",
        "--input",
        &input,
        "--weights",
        &weights,
        "--grid",
        "0.3,0.4,0.7",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 2, "{err}");
    let report = json(out.join("report.json"));
    assert_eq!(report["unfusion_detected"], true);
    let v = &report["violations"][0];
    assert_eq!((v["i"].as_u64(), v["j"].as_u64()), (Some(0), Some(2)));
    assert!(!out.join("merges.csv").exists());
}

#[test]
fn iteration_cap_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "0,0\n1,0\n0,1\n3,3\n");
    let out = dir.path().join("o");
    let (code, _, _) = sonpath(&[
        "path",
        "--input",
        &input,
        "--grid",
        "0.1,0.2",
        "--max-iter",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 3);
    assert_eq!(json(out.join("report.json"))["all_converged"], false);
}

#[test]
fn usage_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, _, _) = sonpath(&["path", "--out", s(&out)]);
    assert_eq!(code, 1);
    let bad = write(dir.path(), "bad.csv", "1,2\n3\n");
    let (code, _, err) = sonpath(&["path", "--input", &bad, "--out", s(&out)]);
    assert_eq!(code, 1);
    assert!(err.contains("line 2"), "{err}");
    let (code, _, _) = sonpath(&["lemma-check", "--n-min", "2", "--out", s(&out)]);
    assert_eq!(code, 1);
}

#[test]
fn lemma_check_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, _, _) = sonpath(&[
            "lemma-check",
            "--trials",
            "100",
            "--n-min",
            "3",
            "--n-max",
            "50",
            "--dim",
            "2",
            "--seed",
            "9",
            "--out",
            s(out),
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(read(a.join("lemma.json")), read(b.join("lemma.json")));
    let r = json(a.join("lemma.json"));
    assert!(r["min_witness_score"].as_f64().unwrap() >= 0.5 - 1e-9);
    assert!(r["min_full_set_score"].as_f64().unwrap() >= 0.25 - 1e-9);
    assert!((r["equilateral_score"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn lemma_check_on_the_equilateral_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.csv", "0,0\n1,0\n0.5,0.8660254037844386\n");
    let out = dir.path().join("o");
    let (code, _, _) = sonpath(&["lemma-check", "--input", &input, "--out", s(&out)]);
    assert_eq!(code, 0);
    let r = json(out.join("lemma.json"));
    assert!((r["min_witness_score"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn one_lla_step_matches_the_gaussian_path_solve() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "0,0\n0.3,0.2\n2,2\n2.1,1.7\n5,0\n");
    let mm = dir.path().join("mm");
    let path = dir.path().join("path");
    let (code, _, _) = sonpath(&[
        "mm",
        "--input",
        &input,
        "--penalty",
        "erf",
        "--sigma",
        "1.5",
        "--gamma",
        "0.4",
        "--steps",
        "1",
        "--out",
        s(&mm),
    ]);
    assert_eq!(code, 0);
    let (code, _, _) = sonpath(&[
        "path",
        "--input",
        &input,
        "--affinity",
        "gaussian",
        "--sigma",
        "1.5",
        "--grid",
        "0.4",
        "--out",
        s(&path),
    ]);
    assert_eq!(code, 0);
    assert_eq!(
        std::fs::read(mm.join("step_1.csv")).unwrap(),
        std::fs::read(path.join("path.csv")).unwrap()
    );
}

#[test]
fn lla_at_zero_gamma_keeps_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "0,0\n0.3,0.2\n2,2\n");
    let out = dir.path().join("o");
    let (code, _, _) = sonpath(&[
        "mm",
        "--input",
        &input,
        "--penalty",
        "scad",
        "--gamma",
        "0",
        "--steps",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let first = read(out.join("step_0.csv"));
    for k in 1..=3 {
        assert_eq!(read(out.join(format!("step_{k}.csv"))), first);
    }
}

#[test]
fn mcp_lla_descends_on_two_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "d.csv",
        "0,0\n0.2,0.1\n0.1,0.3\n6,6\n6.1,5.8\n5.9,6.2\n",
    );
    let out = dir.path().join("o");
    let (code, _, _) = sonpath(&[
        "mm",
        "--input",
        &input,
        "--penalty",
        "mcp",
        "--lambda",
        "1",
        "--a",
        "2",
        "--gamma",
        "0.5",
        "--steps",
        "5",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let r = json(out.join("report.json"));
    assert_eq!(r["descending"], true);
    assert_eq!(r["energies"].as_array().unwrap().len(), 6);
    assert!(out.join("weights_5.csv").exists());
}

#[test]
fn baseline_heights() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "0\n1\n10\n");
    for (method, second) in [("single", 9.0), ("average", 9.5)] {
        let out = dir.path().join(method);
        let (code, _, _) = sonpath(&[
            "baseline",
            "--input",
            &input,
            "--method",
            method,
            "--out",
            s(&out),
        ]);
        assert_eq!(code, 0);
        let d: Dendrogram = read_merge_table(
            std::fs::File::open(out.join("merges.csv")).unwrap(),
            &ids(&["1", "2", "3"]),
        )
        .unwrap();
        let h: Vec<f64> = d.merges().iter().map(|m| m.gamma).collect();
        assert_eq!(h, vec![1.0, second]);
    }
    let two = write(dir.path(), "two.csv", "0,0\n3,4\n");
    let out = dir.path().join("two");
    let (code, _, _) = sonpath(&["baseline", "--input", &two, "--out", s(&out)]);
    assert_eq!(code, 0);
    assert_eq!(read(out.join("tree.nwk")), "(1:5.0,2:5.0);\n");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "d.csv", "0\n1\n10\n");
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"input": "d.csv", "affinity": "gaussian", "sigma": 100, "grid": [0.1, 0.2], "out": "cfg_out"}"#,
    );
    let (code, _, err) = sonpath(&["path", "--config", &cfg]);
    assert_eq!(code, 0, "{err}");
    let r = json(dir.path().join("cfg_out/report.json"));
    assert_eq!(r["grid"], serde_json::json!([0.1, 0.2]));

    let out = dir.path().join("flag_out");
    let (code, _, _) = sonpath(&[
        "path",
        "--config",
        &cfg,
        "--grid",
        "0.3,0.4,0.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    assert_eq!(
        json(out.join("report.json"))["grid"],
        serde_json::json!([0.3, 0.4, 0.5])
    );

    let bad = write(dir.path(), "bad.json", r#"{"inptu": "d.csv"}"#);
    let (code, _, _) = sonpath(&["path", "--config", &bad]);
    assert_eq!(code, 1);
}

#[test]
fn path_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "0,0\n0.3,0.2\n2,2\n2.1,1.7\n5,0\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, _, _) = sonpath(&[
            "path",
            "--input",
            &input,
            "--affinity",
            "gaussian",
            "--grid",
            "30",
            "--out",
            s(out),
        ]);
        assert_eq!(code, 0);
    }
    for f in ["path.csv", "merges.csv", "tree.nwk", "report.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}
