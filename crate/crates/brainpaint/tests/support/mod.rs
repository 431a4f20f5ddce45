//! Helpers shared by the binary and service tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;

pub const FIG1_CSV: &str = "Biomarkers,Hippocampus,Inferior temporal,Superior parietal\n\
                            Brain 1,0.6,2.3,1.3\n\
                            Brain 2,1.2,0.0,3.0\n";
pub const FIXTURE_SEED: u64 = 7;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_brainpaint"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn brainpaint")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A scratch directory with fixture assets and the Fig. 1 CSV.
pub struct Scratch {
    pub dir: tempfile::TempDir,
}

impl Scratch {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let assets = dir.path().join("assets");
        let o = run(&[
            "fixtures",
            "--out",
            assets.to_str().unwrap(),
            "--seed",
            &FIXTURE_SEED.to_string(),
            "--atlas",
            "desikan_killiany",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::write(dir.path().join("fig1.csv"), FIG1_CSV).unwrap();
        Scratch { dir }
    }

    pub fn path(&self, p: &str) -> PathBuf {
        self.dir.path().join(p)
    }

    pub fn s(&self, p: &str) -> String {
        self.path(p).to_str().unwrap().to_string()
    }

    pub fn write_config(&self, name: &str, json: &str) -> String {
        std::fs::write(self.path(name), json).unwrap();
        self.s(name)
    }
}

pub fn read_dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

pub fn unzip(bytes: &[u8]) -> BTreeMap<String, Vec<u8>> {
    let mut z = zip::ZipArchive::new(Cursor::new(bytes)).unwrap();
    let mut out = BTreeMap::new();
    for i in 0..z.len() {
        let mut f = z.by_index(i).unwrap();
        let mut buf = Vec::new();
        f.read_to_end(&mut buf).unwrap();
        out.insert(f.name().unwrap().to_string(), buf);
    }
    out
}

/// A multipart/form-data body. Returns the content type and the bytes.
pub fn multipart(fields: &[(&str, &[u8])]) -> (String, Vec<u8>) {
    let boundary = "brainpaint-test-boundary-7f3a";
    let mut body = Vec::new();
    for (name, value) in fields {
        body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
        if *name == "csv" {
            body.extend_from_slice(
                b"Content-Disposition: form-data; name=\"csv\"; filename=\"input.csv\"\r\nContent-Type: text/csv\r\n\r\n",
            );
        } else {
            body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes());
        }
        body.extend_from_slice(value);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn get_json(app: &Router, uri: &str) -> (StatusCode, serde_json::Value) {
    let (s, b) = get(app, uri).await;
    (s, serde_json::from_slice(&b).unwrap_or(serde_json::Value::Null))
}

pub async fn submit(app: &Router, fields: &[(&str, &[u8])]) -> (StatusCode, serde_json::Value) {
    let (ct, body) = multipart(fields);
    let req = Request::post("/api/render")
        .header("content-type", ct)
        .body(Body::from(body))
        .unwrap();
    let (s, b) = send(app, req).await;
    (s, serde_json::from_slice(&b).unwrap_or(serde_json::Value::Null))
}

/// Polls a job until it leaves the queued and running states.
pub async fn wait_for_job(app: &Router, id: &str, timeout: Duration) -> serde_json::Value {
    let start = Instant::now();
    loop {
        let (status, body) = get_json(app, &format!("/api/jobs/{id}")).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let state = body["state"].as_str().unwrap().to_string();
        if state == "done" || state == "failed" {
            return body;
        }
        assert!(start.elapsed() < timeout, "job {id} still {state}");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}
