use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};

use cfa_cli::formats::ScoreMatrix;
use cfa_core::LabelSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfa"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Three systems over `docs` documents, labels SDG1..SDG6, with the true
/// label boosted; returns the system args and the expert file.
fn fixture(dir: &Path, docs: usize) -> (Vec<String>, PathBuf) {
    let labels = LabelSet::new((1..=6).map(|i| format!("SDG{i}"))).unwrap();
    let ids: Vec<String> = (1..=docs).map(|i| format!("doc{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut args = Vec::new();
    for sys in ["A", "B", "C"] {
        let scores = (0..docs)
            .map(|d| {
                (0..6)
                    .map(|l| rng.gen::<f64>() + if l == d % 6 { 0.5 } else { 0.0 })
                    .collect()
            })
            .collect();
        let path = dir.join(format!("{sys}.csv"));
        ScoreMatrix {
            labels: labels.clone(),
            docs: ids.clone(),
            scores,
        }
        .write(&path)
        .unwrap();
        args.push("--system".to_string());
        args.push(format!("{sys}={}", path.display()));
    }
    let experts = dir.join("experts.csv");
    let mut text = String::from("doc_id,label\n");
    for (d, id) in ids.iter().enumerate() {
        text.push_str(&format!("{id},SDG{}\n", d % 6 + 1));
    }
    fs::write(&experts, text).unwrap();
    (args, experts)
}

fn run(cmd: &str, extra: &[&str], systems: &[String]) -> Output {
    let mut args = vec![cmd];
    args.extend_from_slice(extra);
    args.extend(systems.iter().map(String::as_str));
    cfa(&args)
}

#[test]
fn fuse_and_evaluate_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (systems, experts) = fixture(dir.path(), 30);
    let mut outputs = Vec::new();
    for run_dir in ["r1", "r2"] {
        let out = dir.path().join(run_dir);
        let o = run("fuse", &["--out", s(&out)], &systems);
        assert!(o.status.success(), "{}", stderr(&o));
        let o = run(
            "evaluate",
            &["--out", s(&out), "--experts", s(&experts)],
            &systems,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let o = run("diversity", &["--out", s(&out), "--doc", "doc3"], &systems);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                )
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    for want in [
        "fused.csv",
        "report.json",
        "grid_stats.csv",
        "disagreements.csv",
        "rsc_doc3.csv",
        "diversity_cd.csv",
    ] {
        assert!(names.contains(&want), "missing {want}");
    }
    // 4 subsets x 4 strategies x 30 docs
    let fused = &outputs[0].iter().find(|(n, _)| n == "fused.csv").unwrap().1;
    assert_eq!(String::from_utf8_lossy(fused).lines().count(), 1 + 16 * 30);
    let report: serde_json::Value = serde_json::from_slice(
        &outputs[0]
            .iter()
            .find(|(n, _)| n == "report.json")
            .unwrap()
            .1,
    )
    .unwrap();
    assert_eq!(report["documents"], 30);
    assert_eq!(report["grid"]["overall_vs_best"]["denominator"], 16);
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (systems, experts) = fixture(dir.path(), 12);
    let cfg = serde_json::json!({
        "systems": [
            {"id": "A", "path": "A.csv"},
            {"id": "B", "path": "B.csv"},
            {"id": "C", "path": "C.csv"}
        ],
        "experts": "experts.csv",
        "strategies": ["asc", "wrc"],
        "weights": "perf",
        "tie_mode": "lenient",
        "out": "cfg-out"
    });
    let cfg_path = dir.path().join("run.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    assert!(experts.exists() && !systems.is_empty());

    let o = cfa(&["fuse", "--config", s(&cfg_path), "--min-subset", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fused = fs::read_to_string(dir.path().join("cfg-out/fused.csv")).unwrap();
    let combos: BTreeSet<&str> = fused
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(combos, BTreeSet::from(["A+B+C:asc", "A+B+C:wrc-perf"]));

    let o = cfa(&["evaluate", "--config", s(&cfg_path), "--min-subset", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cfg-out/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["tie_mode"], "lenient");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (systems, _) = fixture(dir.path(), 6);

    // usage errors
    assert_eq!(cfa(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        cfa(&["score", "--scorer", "bogus", "--corpus", "x"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run("fuse", &["--strategies", "asc,nope"], &systems)
            .status
            .code(),
        Some(1)
    );

    // missing score file
    let o = cfa(&[
        "fuse",
        "--system",
        "A=/definitely/not/here.csv",
        "--system",
        "B=/nor/here.csv",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    // label mismatch names the system
    let other = dir.path().join("D.csv");
    ScoreMatrix {
        labels: LabelSet::new(["SDG1", "SDG2", "SDG3", "SDG4", "SDG5", "SDG7"]).unwrap(),
        docs: (1..=6).map(|i| format!("doc{i}")).collect(),
        scores: vec![vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]; 6],
    }
    .write(&other)
    .unwrap();
    let mut args = systems.clone();
    args.push("--system".into());
    args.push(format!("D={}", other.display()));
    let o = run("fuse", &["--out", s(&dir.path().join("o"))], &args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("'D'"), "{}", stderr(&o));

    // perf weights without experts
    let o = run(
        "fuse",
        &["--weights", "perf", "--out", s(&dir.path().join("o"))],
        &systems,
    );
    assert_eq!(o.status.code(), Some(1));

    // unknown --doc
    let o = run(
        "diversity",
        &["--doc", "nope", "--out", s(&dir.path().join("o"))],
        &systems,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope"));
}

#[test]
fn scorers_and_corpus_stats() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    fs::write(
        &corpus,
        concat!(
            r#"{"doc_id":"d1","label":"SDG6","text":"Clean water and sanitation for all."}"#,
            "\n",
            r#"{"doc_id":"d2","label":"SDG7","text":"Affordable clean energy, solar and wind energy."}"#,
            "\n",
            r#"{"doc_id":"d3","label":"SDG13","text":"Climate action: cut emissions now."}"#,
            "\n"
        ),
    )
    .unwrap();
    let lexicon = dir.path().join("lexicon.json");
    fs::write(
        &lexicon,
        r#"{"SDG6":["water","sanitation"],"SDG7":["energy","solar"],"SDG13":["climate","emissions"]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = cfa(&[
        "score",
        "--scorer",
        "keyword",
        "--corpus",
        s(&corpus),
        "--lexicon",
        s(&lexicon),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = ScoreMatrix::read(&out.join("keyword.csv"), None).unwrap();
    assert_eq!(m.labels.labels(), ["SDG6", "SDG7", "SDG13"]);
    for (d, row) in m.scores.iter().enumerate() {
        let best = (0..3).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(best, d, "doc {}", m.docs[d]);
    }

    let o = cfa(&[
        "score",
        "--scorer",
        "tfidf",
        "--corpus",
        s(&corpus),
        "--train",
        s(&corpus),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = ScoreMatrix::read(&out.join("tfidf.csv"), None).unwrap();
    assert_eq!(m.docs, ["d1", "d2", "d3"]);

    let o = cfa(&["corpus-stats", "--corpus", s(&corpus), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stats = fs::read_to_string(out.join("corpus_stats.csv")).unwrap();
    let groups: Vec<&str> = stats
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(groups, ["SDG6", "SDG7", "SDG13", "overall"]);
}

/// Minimal HTTP server: replies `{"text": "echo: <prompt>"}` unless the
/// prompt mentions `FAIL`, in which case it answers 500.
fn mock_server() -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/generate", listener.local_addr().unwrap());
    let auth = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&auth);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let seen = Arc::clone(&seen);
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        return;
                    }
                    let line = line.trim_end();
                    if line.is_empty() {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        seen.lock()
                            .unwrap()
                            .push(line["authorization:".len()..].trim().to_string());
                    }
                }
                let mut body = vec![0; length];
                reader.read_exact(&mut body).unwrap();
                let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
                let prompt = req["prompt"].as_str().unwrap();
                let (status, reply) = if prompt.contains("FAIL") {
                    (
                        "500 Internal Server Error",
                        r#"{"error":"boom"}"#.to_string(),
                    )
                } else {
                    (
                        "200 OK",
                        serde_json::json!({ "text": format!("echo: {prompt}") }).to_string(),
                    )
                };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            });
        }
    });
    (url, auth)
}

#[test]
fn prompts_and_generation_resume() {
    let dir = tempfile::tempdir().unwrap();
    let specs = dir.path().join("specs.json");
    fs::write(
        &specs,
        r#"[{"publication_type":"report","template":"Write about {label} using {source}.","sources":["ok one","FAIL two"]},
            {"publication_type":"blog","template":"{source}: {label}","sources":["ok three"]}]"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = cfa(&[
        "gen-prompts",
        "--specs",
        s(&specs),
        "--labels",
        "SDG1,SDG2",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let prompts = out.join("prompts.csv");
    assert_eq!(
        fs::read_to_string(&prompts).unwrap().lines().count(),
        1 + 3 * 2
    );

    let (url, auth) = mock_server();
    let o = cfa(&[
        "generate",
        "--prompts",
        s(&prompts),
        "--endpoint",
        &url,
        "--token",
        "secret",
        "--out",
        s(&out),
    ]);
    // two prompts fail, so the run reports an error but keeps the rest
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let corpus = fs::read_to_string(out.join("corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 4);
    assert!(corpus.contains("echo: Write about SDG2 using ok one."));
    let errors = fs::read_to_string(out.join("generation_errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 1 + 2);
    assert!(auth.lock().unwrap().iter().all(|a| a == "Bearer secret"));
    assert_eq!(auth.lock().unwrap().len(), 6);

    // second run only retries the failures
    let o = cfa(&[
        "generate",
        "--prompts",
        s(&prompts),
        "--endpoint",
        &url,
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("skipped: 4"));
    assert_eq!(
        fs::read_to_string(out.join("corpus.jsonl")).unwrap(),
        corpus
    );
}

#[test]
fn unreachable_endpoint_records_every_prompt() {
    let dir = tempfile::tempdir().unwrap();
    let specs = dir.path().join("specs.json");
    fs::write(
        &specs,
        r#"[{"publication_type":"t","template":"{source} {label}","sources":["a"]}]"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    assert!(cfa(&[
        "gen-prompts",
        "--specs",
        s(&specs),
        "--labels",
        "x,y,z",
        "--out",
        s(&out)
    ])
    .status
    .success());
    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let url = format!("http://127.0.0.1:{port}/generate");
    let o = cfa(&[
        "generate",
        "--prompts",
        s(&out.join("prompts.csv")),
        "--endpoint",
        &url,
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let errors = fs::read_to_string(out.join("generation_errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 1 + 3);
    assert_eq!(fs::read_to_string(out.join("corpus.jsonl")).unwrap(), "");
}
