use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use faqrank_core::fusion::search_fused;
use faqrank_core::relevance::{RelevanceScorer, RemoteScorer, RemoteScorerConfig, ScorePair, ScorerError};
use faqrank_core::{Bm25Params, DefaultAnalyzer, FaqCorpus, FaqEntry, FusionParams, LexicalIndex, NormalizationParams};
use serde_json::{json, Value};

#[derive(Clone, Copy)]
enum Mode {
    /// Score = answer length mod 10 / 10.
    Echo,
    ShortBy(usize),
    OutOfRange,
    FailFirst(usize),
    Status(u16),
}

#[derive(Clone)]
struct Mock {
    mode: Mode,
    calls: Arc<AtomicUsize>,
    batch_sizes: Arc<Mutex<Vec<usize>>>,
}

fn echo_score(answer: &str) -> f64 {
    (answer.len() % 10) as f64 / 10.0
}

async fn score(State(m): State<Mock>, Json(body): Json<Value>) -> Response {
    let call = m.calls.fetch_add(1, Ordering::SeqCst);
    let pairs = body["pairs"].as_array().cloned().unwrap_or_default();
    m.batch_sizes.lock().unwrap().push(pairs.len());
    let scores: Vec<f64> = pairs
        .iter()
        .map(|p| echo_score(p["answer"].as_str().unwrap_or_default()))
        .collect();
    match m.mode {
        Mode::Echo => Json(json!({ "scores": scores })).into_response(),
        Mode::ShortBy(n) => Json(json!({ "scores": scores[..scores.len().saturating_sub(n)] })).into_response(),
        Mode::OutOfRange => Json(json!({ "scores": vec![1.5; scores.len()] })).into_response(),
        Mode::FailFirst(n) if call < n => StatusCode::INTERNAL_SERVER_ERROR.into_response(),
        Mode::FailFirst(_) => Json(json!({ "scores": scores })).into_response(),
        Mode::Status(code) => StatusCode::from_u16(code).unwrap().into_response(),
    }
}

struct Server {
    url: String,
    mock: Mock,
    _rt: tokio::runtime::Runtime,
}

fn spawn(mode: Mode) -> Server {
    let mock = Mock {
        mode,
        calls: Arc::default(),
        batch_sizes: Arc::default(),
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let app = Router::new()
        .route("/v1/score", post(score))
        .route("/health", get(|| async { "ok" }))
        .with_state(mock.clone());
    rt.spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server { url, mock, _rt: rt }
}

fn client(url: &str) -> RemoteScorer {
    RemoteScorer::new(RemoteScorerConfig {
        url: url.into(),
        timeout_ms: 2_000,
        max_attempts: 3,
        backoff_ms: 5,
        ..RemoteScorerConfig::default()
    })
    .unwrap()
}

fn pairs<'a>(answers: &'a [&'a str]) -> Vec<ScorePair<'a>> {
    answers.iter().map(|a| ScorePair { query: "q", answer: a }).collect()
}

fn dead_url() -> String {
    // bind then drop so nothing listens on the port
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", l.local_addr().unwrap());
    drop(l);
    url
}

#[test]
fn scores_pass_through_in_order() {
    let s = spawn(Mode::Echo);
    let answers = ["a", "abc", "abcdefg", ""];
    let got = client(&s.url).score_batch(&pairs(&answers)).unwrap();
    let want: Vec<f64> = answers.iter().map(|a| echo_score(a)).collect();
    assert_eq!(got, want);
}

#[test]
fn length_mismatch_is_protocol_error() {
    let s = spawn(Mode::ShortBy(1));
    let err = client(&s.url).score_batch(&pairs(&["a", "b"])).unwrap_err();
    assert!(matches!(err, ScorerError::Protocol(_)), "{err}");
    // not retried
    assert_eq!(s.mock.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn out_of_range_is_protocol_error() {
    let s = spawn(Mode::OutOfRange);
    let err = client(&s.url).score_batch(&pairs(&["a"])).unwrap_err();
    assert!(matches!(err, ScorerError::Protocol(_)), "{err}");
}

#[test]
fn client_errors_are_not_retried() {
    let s = spawn(Mode::Status(422));
    let err = client(&s.url).score_batch(&pairs(&["a"])).unwrap_err();
    assert!(matches!(err, ScorerError::Protocol(_)));
    assert_eq!(s.mock.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn server_errors_are_retried() {
    let s = spawn(Mode::FailFirst(2));
    let got = client(&s.url).score_batch(&pairs(&["abc"])).unwrap();
    assert_eq!(got, vec![0.3]);
    assert_eq!(s.mock.calls.load(Ordering::SeqCst), 3);

    let s = spawn(Mode::Status(503));
    let err = client(&s.url).score_batch(&pairs(&["abc"])).unwrap_err();
    assert!(err.is_transport());
    assert_eq!(s.mock.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn unreachable_is_transport_error() {
    let scorer = client(&dead_url());
    let err = scorer.score_batch(&pairs(&["a"])).unwrap_err();
    assert!(err.is_transport(), "{err}");
    assert!(!scorer.is_reachable());
}

#[test]
fn large_batches_are_chunked() {
    let s = spawn(Mode::Echo);
    let scorer = RemoteScorer::new(RemoteScorerConfig {
        url: s.url.clone(),
        max_batch: 4,
        ..RemoteScorerConfig::default()
    })
    .unwrap();
    let owned: Vec<String> = (0..10).map(|i| "x".repeat(i)).collect();
    let answers: Vec<&str> = owned.iter().map(String::as_str).collect();
    let got = scorer.score_batch(&pairs(&answers)).unwrap();
    assert_eq!(got, answers.iter().map(|a| echo_score(a)).collect::<Vec<_>>());
    assert_eq!(*s.mock.batch_sizes.lock().unwrap(), vec![4, 4, 2]);
}

#[test]
fn concurrent_callers_share_the_client() {
    let s = spawn(Mode::Echo);
    let scorer = RemoteScorer::new(RemoteScorerConfig {
        url: s.url.clone(),
        max_in_flight: 2,
        ..RemoteScorerConfig::default()
    })
    .unwrap();
    std::thread::scope(|sc| {
        for _ in 0..6 {
            sc.spawn(|| assert_eq!(scorer.score_batch(&pairs(&["ab"])).unwrap(), vec![0.2]));
        }
    });
    assert_eq!(s.mock.calls.load(Ordering::SeqCst), 6);
}

#[test]
fn health_probe() {
    let s = spawn(Mode::Echo);
    assert!(client(&s.url).is_reachable());
}

#[test]
fn invalid_config_rejected() {
    for cfg in [
        RemoteScorerConfig {
            url: "localhost:8500".into(),
            ..RemoteScorerConfig::default()
        },
        RemoteScorerConfig {
            max_batch: 0,
            ..RemoteScorerConfig::default()
        },
    ] {
        assert!(RemoteScorer::new(cfg).is_err());
    }
}

fn small_corpus() -> FaqCorpus {
    let e = |id: &str, q: &str, a: &str| FaqEntry::new(id, q, a, "t");
    FaqCorpus::new(
        "t",
        vec![
            e("1", "renew driver license", "visit office"),
            e("2", "license fee amount", "twenty dollars"),
            e("3", "office hours", "nine to five"),
        ],
    )
    .unwrap()
}

#[test]
fn unreachable_scorer_degrades_to_lexical() {
    let corpus = small_corpus();
    let analyzer = DefaultAnalyzer::english();
    let index = LexicalIndex::build(&corpus, &analyzer, Bm25Params::default()).unwrap();
    let scorer = client(&dead_url());
    let norm = NormalizationParams::default();
    let out = search_fused(
        &index,
        &analyzer,
        &scorer,
        "renew license",
        &corpus,
        &FusionParams::default(),
        norm,
    )
    .unwrap();
    assert!(out.degraded);
    let lexical = index.search(&analyzer.analyze_text("renew license"), 10, norm);
    let got: Vec<&str> = out.candidates.iter().map(|c| c.faq_id.as_str()).collect();
    let want: Vec<&str> = lexical.iter().map(|h| h.faq_id.as_str()).collect();
    assert_eq!(got, want);
    assert!(out.candidates.iter().all(|c| c.relevance == 0.0));
}

#[test]
fn protocol_errors_are_not_masked_by_degraded_mode() {
    let s = spawn(Mode::ShortBy(1));
    let corpus = small_corpus();
    let analyzer = DefaultAnalyzer::english();
    let index = LexicalIndex::build(&corpus, &analyzer, Bm25Params::default()).unwrap();
    let res = search_fused(
        &index,
        &analyzer,
        &client(&s.url),
        "renew license",
        &corpus,
        &FusionParams::default(),
        NormalizationParams::default(),
    );
    assert!(res.is_err());
}
