use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::routing::get;
use axum::{Json, Router};
use kbc::ingest::{
    find_all_missing_subjects, gap_report, CachedEndpoint, FixtureKb, HttpSparqlEndpoint, IngestError,
    SparqlEndpoint, SparqlResults,
};
use kbc::RelationConfig;

struct Server {
    kb: FixtureKb,
    hits: AtomicUsize,
    fail_first: AtomicUsize,
}

async fn sparql(
    State(s): State<Arc<Server>>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<SparqlResults>, StatusCode> {
    s.hits.fetch_add(1, Ordering::SeqCst);
    if s.fail_first.load(Ordering::SeqCst) > 0 {
        s.fail_first.fetch_sub(1, Ordering::SeqCst);
        return Err(StatusCode::SERVICE_UNAVAILABLE);
    }
    let query = params.get("query").ok_or(StatusCode::BAD_REQUEST)?;
    s.kb.select(query).await.map(Json).map_err(|_| StatusCode::BAD_REQUEST)
}

async fn start(fail_first: usize) -> (String, Arc<Server>) {
    let mut kb = FixtureKb::new("test");
    for i in 0..25 {
        kb.add_typed(&format!("Q{}", 100 + i), "Q5", &format!("Person {i}"));
    }
    for i in 0..5 {
        kb.add(&format!("Q{}", 100 + i), "P103", "Q1860");
    }
    let state = Arc::new(Server {
        kb,
        hits: AtomicUsize::new(0),
        fail_first: AtomicUsize::new(fail_first),
    });
    let app = Router::new().route("/sparql", get(sparql)).with_state(state.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/sparql"), state)
}

fn native_language() -> kbc::RelationSpec {
    RelationConfig::bundled().get("nativeLanguage").unwrap().clone()
}

#[tokio::test]
async fn pages_are_concatenated_in_id_order() {
    let (url, _) = start(0).await;
    let endpoint = HttpSparqlEndpoint::new(url).unwrap();
    let subjects = find_all_missing_subjects(&native_language(), &endpoint, 7, 3).await.unwrap();
    let ids: Vec<_> = subjects.iter().map(|s| s.id.as_str()).collect();
    let expected: Vec<String> = (105..125).map(|i| format!("Q{i}")).collect();
    assert_eq!(ids, expected);
    assert_eq!(subjects[0].label, "Person 5");

    let report = gap_report(&native_language(), &endpoint).await.unwrap();
    assert_eq!((report.current_statements, report.missing_subjects), (5, 20));
}

#[tokio::test]
async fn cache_answers_repeat_queries_offline() {
    let (url, server) = start(0).await;
    let dir = tempfile::tempdir().unwrap();
    let cached = CachedEndpoint::new(HttpSparqlEndpoint::new(url.clone()).unwrap(), dir.path());
    let first = find_all_missing_subjects(&native_language(), &cached, 10, 2).await.unwrap();
    let hits = server.hits.load(Ordering::SeqCst);
    assert_eq!(hits, 3);
    let again = CachedEndpoint::new(HttpSparqlEndpoint::new(url).unwrap(), dir.path());
    let second = find_all_missing_subjects(&native_language(), &again, 10, 2).await.unwrap();
    assert_eq!(first, second);
    assert_eq!(server.hits.load(Ordering::SeqCst), hits);
}

#[tokio::test]
async fn server_errors_are_retryable() {
    let (url, _) = start(1).await;
    let endpoint = HttpSparqlEndpoint::new(url).unwrap();
    let err = gap_report(&native_language(), &endpoint).await.unwrap_err();
    assert!(matches!(err, IngestError::Endpoint { retryable: true, .. }), "{err}");
    assert!(gap_report(&native_language(), &endpoint).await.is_ok());
}
