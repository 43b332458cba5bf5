use axum::body::Body;
use axum::http::{Request, StatusCode};
use gcx_cli::service::router;
use gcx_core::artifact::{DatasetSource, RunArtifact};
use gcx_core::gnn::{train, Preset};
use gcx_core::synth::{build_dataset, SynthName};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(dir: &std::path::Path) -> RunArtifact {
    let d = build_dataset(SynthName::BaShapes, 0).unwrap();
    let mut cfg = Preset::BaShapes.config(d.num_classes(), 0);
    cfg.epochs = 60;
    let model = train(&d, &cfg).unwrap();
    let source = DatasetSource::Synthetic { name: "ba_shapes".into(), seed: 0 };
    RunArtifact::create(dir, source, Some("ba_shapes".into()), d, model).unwrap()
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(b) => {
            req = req.header("content-type", "application/json");
            Body::from(b.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn kmeans(k: usize) -> Value {
    json!({ "algorithm": "kmeans", "params": { "k": k }, "seed": 1 })
}

#[tokio::test]
async fn run_endpoint_lists_layers_and_classes() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(fixture(dir.path()));
    let (status, body) = call(&app, "GET", "/api/run", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["class_names"], json!(["base", "top", "middle", "bottom"]));
    assert_eq!(body["layers"].as_array().unwrap().len(), 4);
    assert_eq!(body["manifest"]["version"], 1);
}

#[tokio::test]
async fn discovery_is_idempotent_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(fixture(dir.path()));
    let (status, first) = call(&app, "POST", "/api/concepts", Some(kmeans(6))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["sizes"].as_array().unwrap().len(), 6);
    assert_eq!(first["sizes"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum::<u64>(), 700);
    assert!(first["silhouette"].as_f64().unwrap().abs() <= 1.0);
    let (_, second) = call(&app, "POST", "/api/concepts", Some(kmeans(6))).await;
    assert_eq!(first, second);

    let (status, err) = call(&app, "POST", "/api/concepts", Some(kmeans(0))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["fields"], json!(["k"]));

    let bad_layer = json!({ "algorithm": "kmeans", "layer": 3, "params": { "k": 2 } });
    let (status, err) = call(&app, "POST", "/api/concepts", Some(bad_layer)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["fields"], json!(["layer"]));

    let dbscan = json!({ "algorithm": "dbscan", "params": { "eps": -1.0, "min_pts": 3 } });
    let (_, err) = call(&app, "POST", "/api/concepts", Some(dbscan)).await;
    assert_eq!(err["fields"], json!(["eps"]));

    let (status, _) = call(&app, "POST", "/api/concepts", Some(json!({ "params": {} }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let pca = json!({ "algorithm": "ahc", "params": { "num_clusters": 4 }, "dr": "pca:3" });
    let (status, body) = call(&app, "POST", "/api/concepts", Some(pca)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["num_concepts"], 4);
}

#[tokio::test]
async fn scores_are_cached_and_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(fixture(dir.path()));
    let (_, made) = call(&app, "POST", "/api/concepts", Some(kmeans(10))).await;
    let id = made["id"].as_str().unwrap().to_string();
    let uri = format!("/api/concepts/{id}/scores?n=2&top=3");
    let (status, scores) = call(&app, "GET", &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    let c = scores["completeness"]["score"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&c));
    assert!(scores["heuristics"]["recovered"].as_u64().unwrap() <= 8);
    let (_, again) = call(&app, "GET", &uri, None).await;
    assert_eq!(scores, again);
    assert!(dir.path().join("scores").join(format!("{id}-n2-top3.json")).exists());

    let (status, err) = call(&app, "GET", &format!("/api/concepts/{id}/scores?top=1"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["fields"], json!(["top"]));
    let (status, _) = call(&app, "GET", "/api/concepts/nope/scores", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn representations_respect_top_and_order() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(fixture(dir.path()));
    let (_, made) = call(&app, "POST", "/api/concepts", Some(kmeans(10))).await;
    let id = made["id"].as_str().unwrap();
    let (status, body) = call(&app, "GET", &format!("/api/concepts/{id}/reps?concept=0&n=1&top=5"), None).await;
    assert_eq!(status, StatusCode::OK);
    let reps = body["representations"].as_array().unwrap();
    assert!(!reps.is_empty() && reps.len() <= 5);
    assert_eq!(reps[0]["subgraph"]["anchor_ids"], json!([0]));
    assert!(reps[0]["subgraph"]["node_labels"].is_array());

    let member = reps.last().unwrap()["node"].as_u64().unwrap();
    let uri = format!("/api/concepts/{id}/reps?concept=0&n=1&top=3&order=node:{member}");
    let (_, local) = call(&app, "GET", &uri, None).await;
    assert_eq!(local["representations"][0]["node"], member);

    let (status, _) = call(&app, "GET", &format!("/api/concepts/{id}/reps?concept=99"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, err) = call(&app, "GET", &format!("/api/concepts/{id}/reps?concept=0&order=sideways"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["fields"], json!(["order"]));
}

#[tokio::test]
async fn explanations_and_activations() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(fixture(dir.path()));
    let (status, _) = call(&app, "GET", "/api/explain/node/514", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (_, made) = call(&app, "POST", "/api/concepts", Some(kmeans(8))).await;
    let id = made["id"].as_str().unwrap();

    let (status, body) = call(&app, "GET", &format!("/api/explain/node/514?model={id}&n=2"), None).await;
    assert_eq!(status, StatusCode::OK);
    let e = &body["explanation"];
    assert_eq!(e["local"][0]["node"], 514);
    assert_eq!(e["actual_class"], 1);
    assert!(e["global"].as_array().unwrap().len() <= 5);

    let (status, _) = call(&app, "GET", "/api/explain/node/9999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "GET", "/api/explain/graph/0", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, pts) = call(&app, "GET", &format!("/api/activations?layer=2&dr=pca:2&model={id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(pts["dims"], 2);
    assert_eq!(pts["points"].as_array().unwrap().len(), 700);
    assert_eq!(pts["labels"].as_array().unwrap().len(), 700);
    assert_eq!(pts["concepts"].as_array().unwrap().len(), 700);
    let (_, raw) = call(&app, "GET", "/api/activations?layer=0&dr=none", None).await;
    assert_eq!(raw["dims"], 20);
    let (status, _) = call(&app, "GET", "/api/activations?layer=7", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}
