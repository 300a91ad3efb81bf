use std::path::Path;
use std::process::{Command, Output};

fn entgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entgen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth(dir: &Path, games: &str) {
    ok(&entgen(&[
        "synth",
        "--seed",
        "1",
        "--games",
        games,
        "--entities",
        "6",
        "--types",
        "3",
        "--out",
        p(dir),
    ]));
}

const TINY_MODEL: [&str; 10] = [
    "--hidden",
    "8",
    "--memory",
    "6",
    "--epochs",
    "2",
    "--batch-size",
    "2",
    "--dropout",
    "0.1",
];

#[test]
fn synth_rerun_writes_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    synth(&d, "8");
    let first: Vec<_> = ["train.jsonl", "dev.jsonl", "test.jsonl", "config.resolved"]
        .iter()
        .map(|f| read(&d.join(f)))
        .collect();
    synth(&d, "8");
    for (f, before) in ["train.jsonl", "dev.jsonl", "test.jsonl", "config.resolved"]
        .iter()
        .zip(first)
    {
        assert_eq!(read(&d.join(f)), before, "{f}");
    }
    let lines = String::from_utf8(read(&d.join("train.jsonl")))
        .unwrap()
        .lines()
        .count();
    assert_eq!(lines, 6);
}

#[test]
fn gradcheck_exit_code_follows_tolerance() {
    let out = entgen(&["gradcheck", "--mode", "gate"]);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("max relative error"), "{text}");
    let strict = entgen(&["gradcheck", "--mode", "edcc", "--tolerance", "1e-14"]);
    assert_eq!(strict.status.code(), Some(3));
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    let out = entgen(&["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(entgen(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(entgen(&["train", "--out", "x"]).status.code(), Some(1));
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nothing");
    let out = entgen(&[
        "train",
        "--data",
        p(&missing),
        "--out",
        p(&tmp.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let bad = tmp.path().join("bad");
    std::fs::create_dir(&bad).unwrap();
    std::fs::write(bad.join("train.jsonl"), "{not json\n").unwrap();
    let out = entgen(&[
        "ingest",
        "--input",
        p(&bad),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "games = 5\nseed = 4\ndev = 0\ntest = 0\n").unwrap();
    let d = tmp.path().join("d");
    ok(&entgen(&[
        "synth",
        "--config",
        p(&cfg),
        "--seed",
        "9",
        "--out",
        p(&d),
    ]));
    let resolved = String::from_utf8(read(&d.join("config.resolved"))).unwrap();
    assert!(
        resolved.contains("games = 5") && resolved.contains("seed = 9"),
        "{resolved}"
    );
    std::fs::write(&cfg, "gmaes = 5\n").unwrap();
    let out = entgen(&["synth", "--config", p(&cfg), "--out", p(&d)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn training_rerun_from_resolved_config_is_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, m1, m2) = (
        tmp.path().join("d"),
        tmp.path().join("m1"),
        tmp.path().join("m2"),
    );
    synth(&d, "6");
    let mut args = vec!["train", "--data", p(&d), "--out", p(&m1), "--mode", "hier"];
    args.extend(TINY_MODEL);
    ok(&entgen(&args));
    let cfg = m1.join("config.resolved");
    ok(&entgen(&["train", "--config", p(&cfg), "--out", p(&m2)]));
    for f in [
        "params.ckpt",
        "best.ckpt",
        "metrics.csv",
        "metrics.json",
        "checkpoints/epoch-002.ckpt",
    ] {
        assert_eq!(read(&m1.join(f)), read(&m2.join(f)), "{f}");
    }

    let gens: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let g = tmp.path().join(format!("g{i}"));
            ok(&entgen(&[
                "generate",
                "--model",
                p(&m1),
                "--data",
                p(&d),
                "--beam",
                "2",
                "--max-len",
                "15",
                "--dump-attention",
                "--out",
                p(&g),
            ]));
            assert!(g.join("attention.jsonl").exists());
            read(&g.join("generations.jsonl"))
        })
        .collect();
    assert_eq!(gens[0], gens[1]);
    let out = entgen(&[
        "generate",
        "--model",
        p(&m1),
        "--data",
        p(&d),
        "--mode",
        "gate",
        "--out",
        p(&tmp.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn template_generations_evaluate_with_perfect_rg() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, g) = (tmp.path().join("d"), tmp.path().join("g"));
    ok(&entgen(&[
        "synth",
        "--seed",
        "3",
        "--games",
        "10",
        "--dev",
        "0",
        "--test",
        "4",
        "--out",
        p(&d),
    ]));
    ok(&entgen(&[
        "generate",
        "--system",
        "templ",
        "--data",
        p(&d),
        "--out",
        p(&g),
    ]));
    let gold = d.join("test.jsonl");
    let cand = g.join("generations.jsonl");
    let out = entgen(&[
        "evaluate",
        "--gold",
        p(&gold),
        "--candidate",
        p(&cand),
        "--format",
        "json",
        "--out",
        p(&g),
    ]);
    ok(&out);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["instances"], 4);
    assert_eq!(report["rg_precision"], 1.0);
    assert_eq!(
        read(&g.join("metrics.json")),
        [out.stdout.as_slice()].concat()
    );
    let table = entgen(&["evaluate", "--gold", p(&gold), "--candidate", p(&cand)]);
    ok(&table);
    let text = String::from_utf8(table.stdout).unwrap();
    for col in ["RG #", "RG P%", "CS P%", "CS R%", "CO", "BLEU"] {
        assert!(text.contains(col), "{text}");
    }
    // a candidate with no table is a data error
    std::fs::write(&cand, "{\"id\":\"elsewhere\",\"summary\":[]}\n").unwrap();
    assert_eq!(
        entgen(&["evaluate", "--gold", p(&gold), "--candidate", p(&cand)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn ablate_writes_four_row_report() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, r) = (tmp.path().join("d"), tmp.path().join("r"));
    synth(&d, "8");
    let mut args = vec![
        "ablate",
        "--data",
        p(&d),
        "--out",
        p(&r),
        "--beam",
        "1",
        "--max-len",
        "10",
    ];
    args.extend(TINY_MODEL);
    ok(&entgen(&args));
    let table = String::from_utf8(read(&r.join("ablation.txt"))).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 5, "{table}");
    let header: Vec<&str> = lines[0]
        .split("  ")
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    assert_eq!(
        header,
        ["Model", "RG #", "RG P%", "CS P%", "CS R%", "CO", "BLEU"]
    );
    for (line, label) in lines[1..].iter().zip(["ED+CC", "+Hier", "+Dyn", "+Gate"]) {
        assert!(line.starts_with(label), "{line}");
    }
    let json: serde_json::Value = serde_json::from_slice(&read(&r.join("ablation.json"))).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
    assert!(r.join("config.resolved").exists());
}

#[test]
fn ingest_converts_rotowire_file() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("games.json");
    let game = |i: usize| {
        format!(
            r#"{{"home_name": "Celtics", "vis_name": "Heat", "home_city": "Boston", "vis_city": "Miami",
            "box_score": {{"PLAYER_NAME": {{"0": "Al Horford"}}, "TEAM_CITY": {{"0": "Boston"}}, "PTS": {{"0": "{i}"}}}},
            "home_line": {{"TEAM-NAME": "Celtics", "TEAM-PTS": "100"}},
            "vis_line": {{"TEAM-NAME": "Heat", "TEAM-PTS": "90"}},
            "summary": "Al Horford scored {i} points ."}}"#
        )
    };
    let games: Vec<String> = (0..5).map(game).collect();
    std::fs::write(&src, format!("[{}]", games.join(","))).unwrap();
    let out_dir = tmp.path().join("o");
    ok(&entgen(&[
        "ingest",
        "--input",
        p(&src),
        "--schema",
        "rw4",
        "--min-count",
        "1",
        "--dev",
        "1",
        "--test",
        "1",
        "--out",
        p(&out_dir),
    ]));
    for f in [
        "train.jsonl",
        "dev.jsonl",
        "test.jsonl",
        "vocab.words.tsv",
        "vocab.feature0.tsv",
        "config.resolved",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let train = String::from_utf8(read(&out_dir.join("train.jsonl"))).unwrap();
    assert_eq!(train.lines().count(), 3);
    assert!(train.contains("Al Horford"));
}
