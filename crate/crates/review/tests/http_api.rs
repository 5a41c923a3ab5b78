use std::path::Path;

use kbc::{Answer, EntityRef, PromptVariant, RelationConfig, ScoredPrediction};
use kbc_review::{serve, ReviewConfig};
use reqwest::StatusCode;
use serde_json::{json, Value};

fn write_retained(dir: &Path, relation: &str, n: usize) {
    let mut text = String::new();
    for i in 0..n {
        let p = ScoredPrediction::new(
            EntityRef::new(format!("Q{}", 500 + i), format!("Subject {i}")),
            relation,
            Answer::Objects(vec!["english".into()]),
            Some(0.95),
            " English",
            PromptVariant::Standard,
        );
        text.push_str(&serde_json::to_string(&p).unwrap());
        text.push('\n');
    }
    std::fs::write(dir.join(format!("{relation}.retained.jsonl")), text).unwrap();
}

struct Service {
    base: String,
    client: reqwest::Client,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    handle: tokio::task::JoinHandle<()>,
}

impl Service {
    async fn start(root: &Path) -> Self {
        let static_dir = root.join("ui");
        std::fs::create_dir_all(&static_dir).unwrap();
        std::fs::write(static_dir.join("index.html"), "<html>review</html>").unwrap();
        let config = ReviewConfig {
            store: root.join("review.jsonl"),
            retained_dir: root.to_path_buf(),
            relations: RelationConfig::bundled(),
            static_dir: Some(static_dir),
        };
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let handle = tokio::spawn(async move {
            serve(&config, listener, async {
                rx.await.ok();
            })
            .await
            .unwrap();
        });
        Self {
            base,
            client: reqwest::Client::new(),
            stop: Some(tx),
            handle,
        }
    }

    async fn stop(mut self) {
        self.stop.take().unwrap().send(()).unwrap();
        self.handle.await.unwrap();
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status();
        let text = r.text().await.unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self.client.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }
}

#[tokio::test]
async fn rate_a_batch_over_http() {
    let tmp = tempfile::tempdir().unwrap();
    write_retained(tmp.path(), "P103", 50);
    let svc = Service::start(tmp.path()).await;

    let (status, batch) = svc.post("/api/v1/batches", json!({"relation": "nativeLanguage", "n": 10, "seed": 7})).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = batch["id"].as_str().unwrap().to_string();
    let items = batch["items"].as_array().unwrap().clone();
    assert_eq!(items.len(), 10);
    assert!(items[0]["search_query"].as_str().unwrap().ends_with(" native language"));

    let values = ["correct", "correct", "correct", "correct", "likely", "unknown", "unknown", "false", "false", "false"];
    for value in values {
        let (status, item) = svc.get(&format!("/api/v1/batches/{id}/next?annotator=ann")).await;
        assert_eq!(status, StatusCode::OK);
        let body = json!({"prediction_id": item["prediction_id"], "value": value, "annotator": "ann"});
        let (status, stored) = svc.post("/api/v1/ratings", body).await;
        assert_eq!(status, StatusCode::CREATED, "{stored}");
    }
    let (status, _) = svc.get(&format!("/api/v1/batches/{id}/next?annotator=ann")).await;
    assert_eq!(status, StatusCode::NO_CONTENT);

    let (status, report) = svc.get("/api/v1/reports/P103").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["accuracy"], json!(0.5));
    assert_eq!(report["rated"], json!(10));
    assert_eq!(report["decision"], json!("rejected"));

    let (_, list) = svc.get("/api/v1/batches").await;
    assert_eq!(list[0]["rated_items"], json!(10));
    svc.stop().await;

    // Replaying the log reproduces the report.
    let svc = Service::start(tmp.path()).await;
    let (_, again) = svc.get("/api/v1/reports/nativeLanguage").await;
    assert_eq!(again, report);
    svc.stop().await;
}

#[tokio::test]
async fn errors_have_codes() {
    let tmp = tempfile::tempdir().unwrap();
    write_retained(tmp.path(), "P103", 3);
    let svc = Service::start(tmp.path()).await;

    let (status, body) = svc.post("/api/v1/batches", json!({"relation": "P103", "n": 4})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], json!("sample_too_large"));
    assert!(body["error"]["message"].as_str().unwrap().contains("only 3"));

    let (status, body) = svc
        .post("/api/v1/ratings", json!({"prediction_id": "missing", "value": "correct", "annotator": "a"}))
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], json!("not_found"));

    let (_, batch) = svc.post("/api/v1/batches", json!({"relation": "P103", "n": 3, "seed": 1})).await;
    let id = batch["id"].as_str().unwrap();
    let item = batch["items"][0]["prediction_id"].clone();
    let (status, body) = svc.get("/api/v1/reports/P103").await;
    assert_eq!((status, body["error"]["code"].clone()), (StatusCode::UNPROCESSABLE_ENTITY, json!("no_ratings")));
    let (status, _) = svc.post(&format!("/api/v1/batches/{id}/close"), json!({})).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = svc
        .post("/api/v1/ratings", json!({"prediction_id": item, "value": "correct", "annotator": "a"}))
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], json!("batch_closed"));

    let (status, _) = svc.get("/api/v1/batches/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = svc.get("/api/v1/reports/P999").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let page = reqwest::get(format!("{}/index.html", svc.base)).await.unwrap().text().await.unwrap();
    assert_eq!(page, "<html>review</html>");
    svc.stop().await;
}

#[tokio::test]
async fn fully_correct_relation_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    write_retained(tmp.path(), "P30", 4);
    let svc = Service::start(tmp.path()).await;
    let (_, batch) = svc.post("/api/v1/batches", json!({"relation": "P30", "n": 4})).await;
    for item in batch["items"].as_array().unwrap() {
        let body = json!({"prediction_id": item["prediction_id"], "value": "correct", "annotator": "a"});
        svc.post("/api/v1/ratings", body).await;
    }
    let (_, report) = svc.get("/api/v1/reports/P30").await;
    assert_eq!(report["accuracy"], json!(1.0));
    assert_eq!(report["decision"], json!("accepted"));
    svc.stop().await;
}
