mod support;

use std::path::Path;
use std::time::Duration;

use axum::http::StatusCode;
use brainpaint::service::{JobRecord, JobState, JobStore, Service, ServiceConfig};
use brainpaint_core::atlas::atlas_definition;
use brainpaint_core::mesh::write_fixture_assets;
use brainpaint_core::RunConfig;
use support::{get, get_json, submit, unzip, wait_for_job, FIG1_CSV, FIXTURE_SEED};

const SMALL: &[u8] = br#"{"resolution": [80, 60]}"#;
const WAIT: Duration = Duration::from_secs(120);

struct Env {
    dir: tempfile::TempDir,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let assets = dir.path().join("assets");
        let atlas = atlas_definition("desikan_killiany", &assets).unwrap();
        write_fixture_assets(&atlas, &assets, FIXTURE_SEED).unwrap();
        Env { dir }
    }

    fn config(&self) -> ServiceConfig {
        ServiceConfig {
            data_dir: self.dir.path().join("data"),
            asset_root: self.dir.path().join("assets"),
            ..ServiceConfig::default()
        }
    }

    fn data(&self) -> &Path {
        self.dir.path()
    }
}

fn job_id(v: &serde_json::Value) -> String {
    v["job_id"]
        .as_str()
        .unwrap_or_else(|| panic!("no job id in {v}"))
        .to_string()
}

#[tokio::test(flavor = "multi_thread")]
async fn health_atlases_and_presets() {
    let env = Env::new();
    let app = Service::start(env.config()).unwrap().router();

    let (s, body) = get(&app, "/healthz").await;
    assert_eq!((s, body.as_slice()), (StatusCode::OK, b"ok".as_slice()));

    let (s, v) = get_json(&app, "/api/atlases").await;
    assert_eq!(s, StatusCode::OK);
    let list = v["atlases"].as_array().unwrap();
    let dk = list.iter().find(|a| a["name"] == "desikan_killiany").unwrap();
    assert_eq!(dk["builtin"], true);
    assert_eq!(dk["assets"]["pial"], true);
    assert!(dk["regions"].to_string().contains("\"hippocampus\""));
    let dx = list.iter().find(|a| a["name"] == "destrieux").unwrap();
    assert_eq!(dx["assets"]["pial"], false, "no fixtures were written for destrieux");

    let (s, v) = get_json(&app, "/api/presets").await;
    assert_eq!(s, StatusCode::OK);
    let stops: Vec<&str> = v["gradients"]["default"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_str().unwrap())
        .collect();
    assert_eq!(stops.first().copied(), Some("#FFFFFF"));
    assert_eq!(stops.len(), 4);
    assert_eq!(
        v["default_views"],
        serde_json::json!(["cortical_front", "cortical_back", "subcortical_front"])
    );
    assert_eq!(v["defaults"]["resolution"], serde_json::json!([1200, 900]));
}

#[tokio::test(flavor = "multi_thread")]
async fn fig1_job_runs_to_a_deterministic_archive() {
    let env = Env::new();
    let app = Service::start(env.config()).unwrap().router();

    let (s, v) = submit(&app, &[("csv", FIG1_CSV.as_bytes()), ("config", SMALL)]).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{v}");
    let id = job_id(&v);
    let done = wait_for_job(&app, &id, WAIT).await;
    assert_eq!(done["state"], "done", "{done}");
    assert_eq!(done["manifest"]["outputs"].as_array().unwrap().len(), 6);

    let (s, zip_a) = get(&app, &format!("/api/jobs/{id}/archive")).await;
    assert_eq!(s, StatusCode::OK);
    let (_, zip_b) = get(&app, &format!("/api/jobs/{id}/archive")).await;
    assert_eq!(zip_a, zip_b);
    let files = unzip(&zip_a);
    let pngs: Vec<&String> = files.keys().filter(|k| k.ends_with(".png")).collect();
    assert_eq!(pngs.len(), 6);
    assert!(files.contains_key("manifest.json"));
    assert!(files.contains_key("Brain_2_subcortical_front.png"));

    let (s, png) = get(&app, &format!("/api/jobs/{id}/files/Brain_1_cortical_front.png")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(png, files["Brain_1_cortical_front.png"]);
    for bad in ["input.csv", "job.json", "..%2Fjob.json", "nope.png"] {
        let (s, _) = get(&app, &format!("/api/jobs/{id}/files/{bad}")).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{bad}");
    }

    // A second identical submission produces identical image bytes.
    let (_, v) = submit(&app, &[("csv", FIG1_CSV.as_bytes()), ("config", SMALL)]).await;
    let id2 = job_id(&v);
    assert_eq!(wait_for_job(&app, &id2, WAIT).await["state"], "done");
    let (_, zip_c) = get(&app, &format!("/api/jobs/{id2}/archive")).await;
    let other = unzip(&zip_c);
    for name in pngs {
        assert_eq!(files[name], other[name], "{name}");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn misspelled_region_is_rejected_with_suggestions() {
    let env = Env::new();
    let app = Service::start(env.config()).unwrap().router();
    let (s, v) = submit(&app, &[("csv", b"id,Hipocampus\nA,1.0\n"), ("config", SMALL)]).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
    assert_eq!(v["code"], "invalid_input");
    let d = &v["details"][0];
    assert_eq!(d["code"], "unresolved_region");
    assert_eq!((d["row"].as_u64(), d["column"].as_u64()), (Some(1), Some(2)));
    assert_eq!(d["suggestions"][0], "hippocampus");
    assert!(
        !env.data().join("data/jobs").read_dir().unwrap().any(|_| true),
        "no job stored"
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_requests() {
    let env = Env::new();
    let app = Service::start(env.config()).unwrap().router();

    let (s, v) = submit(&app, &[("config", SMALL)]).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("missing_csv")));

    let (s, v) = submit(&app, &[("csv", FIG1_CSV.as_bytes()), ("colour", b"red")]).await;
    assert_eq!(
        (s, v["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_field"))
    );

    let (s, v) = submit(
        &app,
        &[("csv", FIG1_CSV.as_bytes()), ("config", br#"{"resolutoin": [1, 1]}"#)],
    )
    .await;
    assert_eq!(
        (s, v["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_config"))
    );
    assert!(v["message"].as_str().unwrap().contains("resolutoin"), "{v}");

    let (s, v) = submit(&app, &[("csv", b"id,Hippocampus\nA,abc\n")]).await;
    assert_eq!(
        (s, v["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_input"))
    );
    assert_eq!(v["details"][0]["code"], "non_numeric");

    for uri in [
        "/api/jobs/0123456789abcdef0123456789abcdef",
        "/api/jobs/not-an-id",
        "/api/jobs/../etc",
    ] {
        let (s, v) = get_json(&app, uri).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        if !v.is_null() {
            assert_eq!(v["code"], "not_found");
        }
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn oversized_csv_gets_413() {
    let env = Env::new();
    let app = Service::start(env.config()).unwrap().router();
    let mut big = String::from("id,Hippocampus\n");
    let mut i = 0;
    while big.len() < 10 * 1024 * 1024 {
        big.push_str(&format!("row{i},1.0\n"));
        i += 1;
    }
    let (s, v) = submit(&app, &[("csv", big.as_bytes())]).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE, "{v}");
    assert_eq!(v["code"], "payload_too_large");

    // Just over the CSV cap but within the body limit is still refused.
    let mut over = String::from("id,Hippocampus\n");
    while over.len() <= 5 * 1024 * 1024 {
        over.push_str("r,1.0\n");
    }
    let (s, _) = submit(&app, &[("csv", over.as_bytes())]).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test(flavor = "multi_thread")]
async fn full_queue_gets_429() {
    let env = Env::new();
    let cfg = ServiceConfig {
        queue_capacity: 1,
        workers: 1,
        ..env.config()
    };
    let app = Service::start(cfg).unwrap().router();
    // Large enough that the first job is still rendering while the rest arrive.
    let slow = br#"{"resolution": [600, 450], "supersample": 2}"#;
    let mut statuses = Vec::new();
    for _ in 0..5 {
        let (s, _) = submit(&app, &[("csv", FIG1_CSV.as_bytes()), ("config", slow)]).await;
        statuses.push(s);
    }
    assert_eq!(statuses[0], StatusCode::ACCEPTED);
    assert!(statuses.contains(&StatusCode::TOO_MANY_REQUESTS), "{statuses:?}");
    let (_, v) = submit(&app, &[("csv", FIG1_CSV.as_bytes()), ("config", slow)]).await;
    assert_eq!(v["code"], "queue_full");
}

#[tokio::test(flavor = "multi_thread")]
async fn expired_jobs_return_404_and_are_swept() {
    let env = Env::new();
    let cfg = ServiceConfig {
        retention: Duration::ZERO,
        ..env.config()
    };
    let service = Service::start(cfg).unwrap();
    let app = service.router();
    let (s, v) = submit(&app, &[("csv", FIG1_CSV.as_bytes()), ("config", SMALL)]).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let id = job_id(&v);

    let start = std::time::Instant::now();
    loop {
        let (s, v) = get_json(&app, &format!("/api/jobs/{id}")).await;
        if s == StatusCode::NOT_FOUND {
            break;
        }
        assert_ne!(v["state"], "done", "a finished job with zero retention was served");
        assert!(start.elapsed() < WAIT);
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    let (s, _) = get(&app, &format!("/api/jobs/{id}/archive")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    service.sweep();
    assert!(!env.data().join("data/jobs").join(&id).exists());
}

#[tokio::test(flavor = "multi_thread")]
async fn validate_only_does_not_queue() {
    let env = Env::new();
    let app = Service::start(env.config()).unwrap().router();
    let (s, v) = submit(
        &app,
        &[
            ("csv", FIG1_CSV.as_bytes()),
            ("config", SMALL),
            ("validate_only", b"true"),
        ],
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["valid"], true);
    assert_eq!(v["rows"], 2);
    assert_eq!(v["regions"].as_array().unwrap().len(), 3);
    assert_eq!(v["views"].as_array().unwrap().len(), 3);
    assert!(!env.data().join("data/jobs").read_dir().unwrap().any(|_| true));
}

#[tokio::test(flavor = "multi_thread")]
async fn jobs_survive_a_restart() {
    let env = Env::new();
    let first = Service::start(env.config()).unwrap();
    let app = first.router();
    let (_, v) = submit(&app, &[("csv", FIG1_CSV.as_bytes()), ("config", SMALL)]).await;
    let done_id = job_id(&v);
    assert_eq!(wait_for_job(&app, &done_id, WAIT).await["state"], "done");
    let (_, zip_before) = get(&app, &format!("/api/jobs/{done_id}/archive")).await;

    // A job a crashed process left in the running state.
    let store = JobStore::open(&env.config().data_dir).unwrap();
    let stale = "fedcba9876543210fedcba9876543210".to_string();
    let now = brainpaint::service::now_secs();
    let mut cfg: RunConfig = brainpaint_core::config::parse_config(std::str::from_utf8(SMALL).unwrap()).unwrap();
    cfg.asset_root = env.config().asset_root;
    cfg.output_dir = store.output_dir(&stale);
    let record = JobRecord {
        id: stale.clone(),
        state: JobState::Running,
        created_at: now,
        expires_at: now + 3600,
        manifest: None,
        error: None,
    };
    store.create(&record, FIG1_CSV, &cfg).unwrap();
    drop(first);

    let second = Service::start(env.config()).unwrap();
    let app = second.router();
    let (s, v) = get_json(&app, &format!("/api/jobs/{done_id}")).await;
    assert_eq!((s, v["state"].as_str()), (StatusCode::OK, Some("done")));
    let (_, zip_after) = get(&app, &format!("/api/jobs/{done_id}/archive")).await;
    assert_eq!(zip_before, zip_after);

    let resumed = wait_for_job(&app, &stale, WAIT).await;
    assert_eq!(resumed["state"], "done", "{resumed}");
    let (_, zip_resumed) = get(&app, &format!("/api/jobs/{stale}/archive")).await;
    let (a, b) = (unzip(&zip_before), unzip(&zip_resumed));
    for (name, bytes) in &a {
        if name.ends_with(".png") {
            assert_eq!(bytes, &b[name], "{name}");
        }
    }
}

fn keys(v: &serde_json::Value) -> Vec<&str> {
    let mut k: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    k.sort();
    k
}

/// Field sets must stay in step with docs/API.md.
#[tokio::test(flavor = "multi_thread")]
async fn responses_have_the_documented_shapes() {
    let env = Env::new();
    let app = Service::start(env.config()).unwrap().router();

    let (_, v) = get_json(&app, "/api/presets").await;
    assert_eq!(
        keys(&v),
        [
            "default_views",
            "defaults",
            "gradients",
            "named_colors",
            "surfaces",
            "views"
        ]
    );
    assert_eq!(
        keys(&v["defaults"]),
        [
            "atlas",
            "background",
            "glass_opacity",
            "resolution",
            "supersample",
            "surface"
        ]
    );
    assert_eq!(keys(&v["views"][0]), ["name", "scene"]);

    let (_, v) = get_json(&app, "/api/atlases").await;
    assert_eq!(keys(&v), ["atlases"]);
    let atlas = &v["atlases"][0];
    assert_eq!(keys(atlas), ["assets", "builtin", "name", "regions"]);
    assert_eq!(keys(&atlas["assets"]), ["inflated", "pial"]);
    assert_eq!(
        keys(&atlas["regions"][0]),
        ["canonical_name", "class", "hemisphere", "mesh_key"]
    );

    let (_, v) = submit(&app, &[("csv", b"id,Hipocampus\nA,1\n")]).await;
    assert_eq!(keys(&v), ["code", "details", "message"]);
    assert_eq!(
        keys(&v["details"][0]),
        ["code", "column", "level", "message", "row", "suggestions"]
    );
    assert_eq!(v["details"][0]["level"], "error");

    let (_, v) = submit(
        &app,
        &[("csv", FIG1_CSV.as_bytes()), ("config", SMALL), ("validate_only", b"1")],
    )
    .await;
    assert_eq!(keys(&v), ["regions", "rows", "valid", "views", "warnings"]);
    assert_eq!(keys(&v["warnings"][0]), ["code", "level", "message"]);

    let (_, v) = submit(&app, &[("csv", FIG1_CSV.as_bytes()), ("config", SMALL)]).await;
    assert_eq!(keys(&v), ["job_id"]);
    let id = job_id(&v);
    assert!(brainpaint::service::valid_job_id(&id));
    let done = wait_for_job(&app, &id, WAIT).await;
    assert_eq!(keys(&done), ["created_at", "expires_at", "id", "manifest", "state"]);
    assert_eq!(
        keys(&done["manifest"]),
        ["config", "input", "outputs", "tool", "warnings"]
    );
    assert_eq!(keys(&done["manifest"]["input"]), ["regions", "rows", "sha256"]);
    assert_eq!(
        keys(&done["manifest"]["outputs"][0]),
        ["file", "height", "image_name", "row", "sha256", "view", "width"]
    );
}
