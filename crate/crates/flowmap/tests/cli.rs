use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn flowmap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowmap"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&flowmap(&["--help"], p)), 0);
    assert_eq!(code(&flowmap(&[], p)), 1);
    assert_eq!(code(&flowmap(&["simulate", "--bogus"], p)), 1);
    assert_eq!(code(&flowmap(&["simulate", "--out", "d", "--scenes", "0"], p)), 1);
    assert_eq!(code(&flowmap(&["build", "--data", "missing", "--out", "m"], p)), 2);

    std::fs::write(p.join("bad.toml"), "seed = \"seven\"\n").unwrap();
    assert_eq!(
        code(&flowmap(&["--config", "bad.toml", "simulate", "--out", "d"], p)),
        2
    );
}

#[test]
fn corrupt_stream_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&flowmap(&["simulate", "--out", "d", "--scenes", "1"], p)), 0);
    let stream = p.join("d/scene-00.stream.csv");
    let mut text = std::fs::read_to_string(&stream).unwrap();
    text.push_str("0.0,0,1.0,1.0,0.0,0.0\n");
    let bad_line = text.lines().count();
    std::fs::write(&stream, text).unwrap();
    let out = flowmap(&["build", "--data", "d", "--out", "m"], p);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(&format!("stream.csv:{bad_line}:")), "{stderr}");
}

#[test]
fn end_to_end_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for run in ["a", "b"] {
        let (data, models, reports) = (format!("{run}/data"), format!("{run}/models"), format!("{run}/reports"));
        assert_eq!(
            code(&flowmap(
                &["simulate", "--out", &data, "--scenes", "2", "--seed", "3"],
                p
            )),
            0
        );
        assert_eq!(code(&flowmap(&["build", "--data", &data, "--out", &models], p)), 0);
        let out = flowmap(&["evaluate", "--models", &models, "--out", &reports], p);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in [
        "data/scene-00.stream.csv",
        "models/scene-01.model.json",
        "reports/aggregate.json",
        "reports/report.txt",
    ] {
        let a = std::fs::read(p.join("a").join(file)).unwrap();
        let b = std::fs::read(p.join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }

    let model = "a/models/scene-00.model.json";
    let out = flowmap(
        &[
            "plan", "--model", model, "--start", "0", "--goal", "20", "--out", "plans",
        ],
        p,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(p.join("plans/scene-00.plan.json").exists());
    assert!(p.join("plans/scene-00.overlay.csv").exists());
    assert_eq!(
        code(&flowmap(
            &["plan", "--model", model, "--start", "0", "--goal", "99999"],
            p
        )),
        2
    );

    let mut child = Command::new(env!("CARGO_BIN_EXE_flowmap"))
        .args(["serve", "--model", model, "--stdio"])
        .current_dir(p)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut input = String::from("not json\n\n");
    for node in 0..30 {
        input.push_str(&format!("{{\"query\":\"predict\",\"node\":{node},\"t\":60}}\n"));
    }
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let replies: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(replies.len(), 31);
    assert_eq!(replies[0]["error"], "bad_request");
    let answered = replies[1..].iter().filter(|r| r["ok"] == true).count();
    assert!(answered > 0);
    assert!(replies[1..]
        .iter()
        .all(|r| r["ok"] == true || r["error"] == "not_found"));
}
