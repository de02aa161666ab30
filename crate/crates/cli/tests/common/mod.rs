//! Helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::ffi::OsStr;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

pub const BIN: &str = env!("CARGO_BIN_EXE_rubicon");

pub fn rubicon<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(BIN).args(args).output().expect("spawn rubicon")
}

/// Every file below `dir`, keyed by relative path.
pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    if dir.exists() {
        walk(dir, dir, &mut out);
    }
    out
}

pub const ANNOTATION_HEADER: &str = "annotation_id,video_id,verb,noun,annotator_id,schema,start_sec,end_sec,pre_start_sec,pre_end_sec,act_start_sec,act_end_sec,instance_key";

/// Two multiply-annotated conventional instances and one Rubicon instance.
pub fn consistency_fixture(dir: &Path) -> PathBuf {
    let rows = [
        "c1,v1,open,jar,ann1,conventional,0.000,10.000,,,,,k1",
        "c2,v1,open,jar,ann2,conventional,0.000,10.000,,,,,k1",
        "c3,v1,open,jar,ann3,conventional,5.000,15.000,,,,,k1",
        "c4,v1,pour,oil,ann1,conventional,20.000,24.000,,,,,k2",
        "c5,v1,pour,oil,ann2,conventional,20.500,24.500,,,,,k2",
        "r1,v1,take,cup,ann1,rubicon,,,30.000,31.000,31.000,34.000,k3",
        "r2,v1,take,cup,ann2,rubicon,,,29.500,31.500,31.500,33.000,k3",
    ];
    let path = dir.join("consistency.csv");
    fs::write(&path, format!("{ANNOTATION_HEADER}\n{}\n", rows.join("\n"))).unwrap();
    path
}

/// A running `rubicon serve`; killed with SIGKILL on drop.
pub struct Server {
    pub child: Child,
    pub addr: String,
}

impl Server {
    pub fn start(project: &Path, env: &[(&str, String)]) -> Server {
        let mut cmd = Command::new(BIN);
        cmd.args(["serve", "--bind", "127.0.0.1:0", "--project"])
            .arg(project)
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        for (k, v) in env {
            cmd.env(k, v);
        }
        let mut child = cmd.spawn().expect("spawn rubicon serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on http://")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_string();
        Server { child, addr }
    }

    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.kill();
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(10)))
        .build()
        .into()
}

/// Status and body, or `None` when the connection failed.
pub fn post(addr: &str, path: &str, body: &serde_json::Value) -> Option<(u16, String)> {
    let mut resp = agent()
        .post(&format!("http://{addr}{path}"))
        .header("content-type", "application/json")
        .send(body.to_string())
        .ok()?;
    let status = resp.status().as_u16();
    Some((status, resp.body_mut().read_to_string().ok()?))
}

pub fn get(addr: &str, path: &str) -> Option<(u16, String)> {
    let mut resp = agent().get(&format!("http://{addr}{path}")).call().ok()?;
    let status = resp.status().as_u16();
    Some((status, resp.body_mut().read_to_string().ok()?))
}

/// Project directory with one 60 s video and a two-question gate.
pub fn service_project(dir: &Path) {
    fs::create_dir_all(dir.join("videos")).unwrap();
    fs::write(
        dir.join("config.json"),
        br#"{"control_questions": [
              {"prompt": "Which phase comes first?", "choices": ["actional", "pre-actional"], "correct_index": 1},
              {"prompt": "Where does the actional phase start?", "choices": ["at the pre-actional end", "anywhere"], "correct_index": 0}
            ],
            "service": {"snapshot_every": 5}}"#,
    )
    .unwrap();
    fs::write(
        dir.join("videos.json"),
        br#"[{"video_id": "v1", "duration": 60.0, "frame_rate": 25.0}]"#,
    )
    .unwrap();
    fs::write(
        dir.join("tasks.json"),
        br#"[{"video_id": "v1", "instance_key": "k1", "verb": "open", "noun": "jar"}]"#,
    )
    .unwrap();
}

pub fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("{e}: {s}"))
}

/// One subcommand invocation of [`pipeline`].
pub struct Step {
    pub name: &'static str,
    pub code: Option<i32>,
    pub stdout: Vec<u8>,
}

/// Runs every file-producing subcommand once, chaining outputs into inputs,
/// with everything written below `dir`.
pub fn pipeline(dir: &Path, config: &str) -> Vec<Step> {
    fs::create_dir_all(dir).unwrap();
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let fixture = consistency_fixture(dir);
    let p = |rel: &str| dir.join(rel).into_os_string();
    let ann = p("synth/annotations.csv");
    let videos = p("synth/videos.json");
    let generated = p("gen/generated.csv");
    let folds = p("folds/folds.csv");
    let preds = p("eval/baseline/predictions.csv");
    let steps: Vec<(&'static str, Vec<std::ffi::OsString>)> = vec![
        ("synth", vec!["synth".into(), "-o".into(), p("synth")]),
        ("synth-eval", vec!["synth-eval".into(), "-o".into(), p("eval")]),
        (
            "validate",
            vec!["validate".into(), "-i".into(), ann.clone(), "-i".into(), videos.clone()],
        ),
        (
            "consistency",
            vec![
                "consistency".into(),
                "-i".into(),
                fixture.into_os_string(),
                "-o".into(),
                p("cons"),
            ],
        ),
        (
            "generate",
            vec![
                "generate".into(),
                "-i".into(),
                ann.clone(),
                "-i".into(),
                videos.clone(),
                "-o".into(),
                p("gen"),
            ],
        ),
        (
            "folds",
            vec!["folds".into(), "-i".into(), ann.clone(), "-o".into(), p("folds")],
        ),
        (
            "augment",
            vec![
                "augment".into(),
                "-i".into(),
                folds.clone(),
                "-i".into(),
                generated.clone(),
                "-o".into(),
                p("aug"),
            ],
        ),
        (
            "evaluate",
            vec![
                "evaluate".into(),
                "-i".into(),
                ann,
                "-i".into(),
                generated,
                "-i".into(),
                folds,
                "-i".into(),
                preds,
                "-o".into(),
                p("evaluate"),
            ],
        ),
    ];
    steps
        .into_iter()
        .map(|(name, mut args)| {
            args.extend(["--config".into(), cfg.clone().into_os_string()]);
            let out = rubicon(&args);
            Step {
                name,
                code: out.status.code(),
                stdout: out.stdout,
            }
        })
        .collect()
}
