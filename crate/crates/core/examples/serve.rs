//! The HTTP API end to end: register a model, classify, list runs.
//!
//! Binds an ephemeral port, makes a few requests and exits. For a long-lived
//! server use `tcls serve`.
//!
//! `cargo run --example serve`

use std::sync::Arc;

use serde_json::json;
use tcls::service::{router, Service, ServiceConfig};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Arc::new(Service::new(ServiceConfig::new(dir.path().join("runs"))).unwrap());
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    rt.spawn(async move { axum::serve(listener, router(svc)).await });

    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let show = |method: &str, path: &str, mut resp: ureq::http::Response<ureq::Body>| {
        println!("{method} {path} -> {}\n{}\n", resp.status(), resp.body_mut().read_to_string().unwrap());
    };

    let register = json!({"model_id": "echo", "version": "v1", "backend": {"kind": "echo", "model": "echo-1"}});
    show("POST", "/v1/models", agent.post(format!("{base}/v1/models")).send_json(&register).unwrap());
    show("GET", "/v1/models", agent.get(format!("{base}/v1/models")).call().unwrap());

    // the echo backend answers with the prompt, so the parser sees the text itself
    for text in ["this is negative", "positive or negative, hard to say"] {
        let req = json!({"text": text, "labels": ["positive", "negative"], "model": "echo"});
        show("POST", "/v1/classify", agent.post(format!("{base}/v1/classify")).send_json(&req).unwrap());
    }
    let unknown = json!({"text": "hi", "schema": "sms", "model": "nope"});
    show("POST", "/v1/classify", agent.post(format!("{base}/v1/classify")).send_json(&unknown).unwrap());
    show("GET", "/v1/runs", agent.get(format!("{base}/v1/runs")).call().unwrap());
}
