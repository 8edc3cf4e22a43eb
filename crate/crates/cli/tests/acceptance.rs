//! One line per acceptance criterion, computed from two `verify --suite all --seed 42` runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn verify_into(dir: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_twistshear"))
        .args(["verify", "--suite", "all", "--seed", "42", "--out"])
        .arg(dir)
        .output()
        .expect("binary runs");
    assert!(
        status.status.code() == Some(0) || status.status.code() == Some(1),
        "unexpected exit: {:?}\n{}",
        status.status,
        String::from_utf8_lossy(&status.stderr)
    );
}

/// Relative path -> bytes for every file below `root`.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn report(root: &Path, name: &str) -> Value {
    let text = fs::read_to_string(root.join(name).join("report.json")).unwrap_or_else(|e| panic!("{name}: {e}"));
    serde_json::from_str(&text).unwrap()
}

/// Checks that every listed claim is present and passing; an empty list means all entries.
fn claims_pass(r: &Value, claims: &[&str], failures: &mut Vec<String>) {
    let exp = r["experiment"].as_str().unwrap_or("?").to_string();
    if !r["error"].is_null() {
        failures.push(format!("{exp}: {}", r["error"]));
    }
    let entries = r["entries"].as_array().cloned().unwrap_or_default();
    if claims.is_empty() {
        for e in &entries {
            if e["pass"] != Value::Bool(true) {
                failures.push(format!("{exp}/{} = {}", e["claim"], e["value"]));
            }
        }
        if entries.is_empty() {
            failures.push(format!("{exp}: no entries"));
        }
        return;
    }
    for c in claims {
        match entries.iter().find(|e| e["claim"] == *c) {
            Some(e) if e["pass"] == Value::Bool(true) => {}
            Some(e) => failures.push(format!("{exp}/{c} = {}", e["value"])),
            None => failures.push(format!("{exp}/{c} missing")),
        }
    }
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let (first, second) = (tmp.path().join("first"), tmp.path().join("second"));
    verify_into(&first);
    verify_into(&second);

    let twist: Vec<Value> = (1..=5).map(|n| report(&first, &format!("twist-explicit-N{n}"))).collect();
    let over_twist = |claims: &[&str]| {
        let mut f = Vec::new();
        for r in &twist {
            claims_pass(r, claims, &mut f);
        }
        f
    };
    let mut results: Vec<(u32, &str, Vec<String>)> = vec![
        (
            1,
            "explicit twist construction, N = 1..5",
            over_twist(&["rho_b", "psi_b", "em_radial", "em_angular", "first_integral_constant"]),
        ),
        (2, "quarter-twist bound, N = 1..5", over_twist(&["quarter_twist"])),
        (3, "Jacobian structure and winding", over_twist(&["det_hedgehog_zero", "det_outer_positive", "winding"])),
        (4, "Jacobian boundary identity", over_twist(&["jacobian_boundary_identity"])),
        (
            5,
            "minimality batteries",
            over_twist(&["minimality_outer", "minimality_outer_margin", "minimality_cone", "minimality_cone_margin"]),
        ),
    ];
    let mut f = Vec::new();
    for n in 1..=2 {
        claims_pass(&report(&first, &format!("twist-penalized-N{n}")), &[], &mut f);
    }
    results.push((6, "penalized twist, N = 1, 2", f));
    let mut f = Vec::new();
    claims_pass(&report(&first, "shear-weak-n64"), &[], &mut f);
    results.push((7, "weak shear problem, n = 64 and 128", f));
    let mut f = Vec::new();
    claims_pass(&report(&first, "shear-strong-default-n64"), &[], &mut f);
    claims_pass(
        &report(&first, "shear-strong-default-n64"),
        &["unique_minimizer", "natural_bc", "corner_gap", "corner_gap_persists", "negcontrol_corner_gap_absent"],
        &mut f,
    );
    claims_pass(&report(&first, "shear-strong-negcontrol-n64"), &["corner_gap_absent"], &mut f);
    results.push((8, "strong shear problem and corner gap", f));
    let mut f = Vec::new();
    claims_pass(&report(&first, "kernel"), &[], &mut f);
    results.push((9, "kernel identities and winding invariances", f));

    let (a, b) = (snapshot(&first), snapshot(&second));
    let mut f = Vec::new();
    if a.keys().ne(b.keys()) {
        f.push("file sets differ".to_string());
    }
    for (k, v) in &a {
        if b.get(k) != Some(v) {
            f.push(format!("{} differs", k.display()));
        }
    }
    if !a.keys().any(|k| k.ends_with("report.json")) {
        f.push("no reports written".to_string());
    }
    results.push((10, "byte-identical repeated runs", f));

    for (id, name, fails) in &results {
        let status = if fails.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status} {name}");
        for x in fails {
            println!("    {x}");
        }
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.is_empty()).map(|r| r.0).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
