#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn valconf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_valconf")).args(args).env("RUST_LOG", "error").output().expect("spawn valconf")
}

pub fn valconf_ok(args: &[&str]) -> Output {
    let out = valconf(args);
    assert!(
        out.status.success(),
        "valconf {args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// filter, extract, profile, bftest on the fixture corpus.
pub fn core_pipeline(dir: &Path) {
    let fx = fixtures();
    let o = |name: &str| dir.join(name);
    valconf_ok(&[
        "filter",
        "--in",
        s(&fx.join("comments.jsonl")),
        "--out",
        s(&o("filtered.jsonl")),
        "--exclude",
        s(&fx.join("exclude.txt")),
        "--min-forum-posts",
        "5",
        "--english-only",
    ]);
    valconf_ok(&[
        "extract",
        "--lexicon",
        s(&fx.join("lexicon.json")),
        "--in",
        s(&o("filtered.jsonl")),
        "--out",
        s(&o("labels.jsonl")),
    ]);
    valconf_ok(&[
        "profile",
        "--labels",
        s(&o("labels.jsonl")),
        "--comments",
        s(&o("filtered.jsonl")),
        "--out",
        s(&o("profiles.csv")),
    ]);
    valconf_ok(&[
        "bftest",
        "--agreement",
        s(&fx.join("agreement.csv")),
        "--profiles",
        s(&o("profiles.csv")),
        "--thresholds",
        "1,5,10,20,30",
        "--out",
        s(&o("grid.csv")),
        "--ranked",
        s(&o("ranked.csv")),
        "--summary",
        s(&o("summary.csv")),
        "--plot",
        s(&o("bf.svg")),
    ]);
}

pub const KINDS: [&str; 5] = ["none", "noise", "centroid", "user-features", "value-profile"];

/// Every subcommand on the fixtures, writing into `dir`.
pub fn full_pipeline(dir: &Path) {
    core_pipeline(dir);
    let fx = fixtures();
    let o = |name: &str| dir.join(name);
    std::fs::write(o("pairs.csv"), "user_a,user_b\nuser01,user02\nuser01,user03\nuser04,user09\n").unwrap();
    valconf_ok(&["kernel", "--sigma", "1", "--out", s(&o("kernel.csv"))]);
    for metric in ["tau", "md", "co", "wc", "rho"] {
        let out = o(&format!("sim_{metric}.csv"));
        valconf_ok(&[
            "similarity",
            "--metric",
            metric,
            "--profiles",
            s(&o("profiles.csv")),
            "--pairs",
            s(&o("pairs.csv")),
            "--out",
            s(&out),
        ]);
    }
    valconf_ok(&[
        "mds",
        "--profiles",
        s(&o("profiles.csv")),
        "--out",
        s(&o("mds.csv")),
        "--covariance",
        s(&o("cov.csv")),
        "--plot",
        s(&o("mds.svg")),
    ]);
    valconf_ok(&["pvq", "--in", s(&fx.join("pvq.csv")), "--out", s(&o("pvq.csv")), "--alpha", s(&o("alpha.csv"))]);
    let mut bundles = Vec::new();
    for kind in KINDS {
        let out = o(&format!("bundles_{kind}.jsonl"));
        valconf_ok(&[
            "agree-features",
            "--agreement",
            s(&fx.join("agreement.csv")),
            "--kind",
            kind,
            "--profiles",
            s(&o("profiles.csv")),
            "--user-features",
            s(&fx.join("user_features.csv")),
            "--comments",
            s(&o("filtered.jsonl")),
            "--lexicon",
            s(&fx.join("lexicon.json")),
            "--seed",
            "7",
            "--out",
            s(&out),
        ]);
        bundles.push(out.to_str().unwrap().to_string());
    }
    valconf_ok(&[
        "agree-train",
        "--bundles",
        &bundles.join(","),
        "--epochs",
        "200",
        "--out",
        s(&o("results.csv")),
        "--plot",
        s(&o("f1.svg")),
    ]);
    valconf_ok(&["report", "--kind", "mds-scatter", "--in", s(&o("mds.csv")), "--out", s(&o("mds_report.svg"))]);
}

/// Every file under `dir` by relative name. Manifests have their timestamp removed.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = std::fs::read(&path).unwrap();
        if name.ends_with(".manifest.json") {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("created_unix");
            // input paths differ between run directories; hashes must not
            for list in ["inputs", "outputs"] {
                for e in v[list].as_array_mut().unwrap() {
                    let p = e["path"].as_str().unwrap().replace(dir.to_str().unwrap(), "<run>");
                    e["path"] = p.into();
                }
            }
            strip_dir(&mut v["config"], dir.to_str().unwrap());
            bytes = serde_json::to_vec(&v).unwrap();
        }
        out.insert(name, bytes);
    }
    out
}

fn strip_dir(v: &mut serde_json::Value, dir: &str) {
    match v {
        serde_json::Value::String(s) => *s = s.replace(dir, "<run>"),
        serde_json::Value::Array(a) => a.iter_mut().for_each(|x| strip_dir(x, dir)),
        serde_json::Value::Object(m) => m.values_mut().for_each(|x| strip_dir(x, dir)),
        _ => {}
    }
}
