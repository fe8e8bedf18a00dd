//! Criterion 10: every CLI command reruns byte-identically under a fixed
//! seed; only the manifest's wall_time field may differ.

use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_expfun"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_dir_payloads(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().into_string().unwrap();
        let mut bytes = std::fs::read(entry.path()).unwrap();
        if name == "manifest.json" {
            // wall_time is the only timestamp-like field; strip it
            let text = String::from_utf8(bytes).unwrap();
            bytes = text
                .lines()
                .filter(|l| !l.contains("wall_time"))
                .collect::<Vec<_>>()
                .join("\n")
                .into_bytes();
        }
        out.push((name, bytes));
    }
    out.sort();
    out
}

#[test]
fn criterion_10_cli_reruns_are_byte_identical() {
    let tmp = std::env::temp_dir().join(format!("expfun-determinism-{}", std::process::id()));
    std::fs::create_dir_all(&tmp).unwrap();
    let cfg = tmp.join("model.conf");
    std::fs::write(&cfg, "family = brownian_drift\ngamma = 1.0\n").unwrap();
    let cfg = cfg.to_str().unwrap().to_string();

    let jobs: Vec<(&str, Vec<String>)> = vec![
        (
            "moments",
            vec!["moments".into(), "--config".into(), cfg.clone(), "--n".into(), "6".into()],
        ),
        (
            "density",
            vec![
                "density".into(),
                "--config".into(),
                cfg.clone(),
                "--grid".into(),
                "1e-3:1e3:512".into(),
            ],
        ),
        (
            "verify",
            vec![
                "verify".into(),
                "--config".into(),
                cfg.clone(),
                "--suite".into(),
                "all".into(),
                "--n".into(),
                "4000".into(),
                "--seed".into(),
                "11".into(),
            ],
        ),
    ];
    let mut all_pass = true;
    for (name, args) in &jobs {
        let out_a = tmp.join(format!("{name}_a"));
        let out_b = tmp.join(format!("{name}_b"));
        for out in [&out_a, &out_b] {
            let mut full: Vec<String> = args.clone();
            full.push("--out".into());
            full.push(out.to_str().unwrap().into());
            let argv: Vec<&str> = full.iter().map(|s| s.as_str()).collect();
            let result = run(&argv);
            assert!(
                result.status.success(),
                "{name} failed: {}",
                String::from_utf8_lossy(&result.stderr)
            );
        }
        let identical = read_dir_payloads(&out_a) == read_dir_payloads(&out_b);
        all_pass &= identical;
        println!(
            "criterion 10 ({name} rerun byte-identical): {}",
            if identical { "PASS" } else { "FAIL" }
        );
    }
    std::fs::remove_dir_all(&tmp).ok();
    assert!(all_pass, "a CLI rerun was not byte-identical");
}
