use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use proptest::prelude::*;

use super::transport::{ChatRequest, Replay, Transport};
use super::Strategy;
use super::*;
use crate::corpus::{Dataset, LabelSchema, LabeledExample, Provenance, Split};

fn dataset(schema: &str, counts: &[usize]) -> Dataset {
    let schema = LabelSchema::builtin(schema).unwrap();
    let mut examples = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for i in 0..n {
            let label = schema.label(c).to_owned();
            examples.push(LabeledExample::new(format!("{label}-{i}"), format!("text {i} about {label}"), label));
        }
    }
    Dataset::new(schema, Split::Train, examples, Provenance::default()).unwrap()
}

fn prompt(text: &str) -> RenderedPrompt {
    render_prompt(&PromptTemplate::default(), text, &LabelSchema::builtin("sms").unwrap(), "SMS", None).unwrap()
}

#[test]
fn one_exemplar_per_class() {
    let ex = select_exemplars(&dataset("sentiment3", &[5, 5, 5]), 1, 3).unwrap();
    let labels: Vec<&str> = ex.iter().map(|e| e.label.as_str()).collect();
    assert_eq!(labels, ["negative", "neutral", "positive"]);
}

#[test]
fn exemplars_are_seeded() {
    let ds = dataset("sentiment3", &[20, 20, 20]);
    let a = select_exemplars(&ds, 2, 11).unwrap();
    let b = select_exemplars(&ds, 2, 11).unwrap();
    assert_eq!(a, b);
    let c = select_exemplars(&ds, 2, 12).unwrap();
    assert_ne!(a, c);
}

#[test]
fn sms_exemplars_alternate() {
    let ex = select_exemplars(&dataset("sms", &[30, 6]), 2, 42).unwrap();
    let labels: Vec<&str> = ex.iter().map(|e| e.label.as_str()).collect();
    assert_eq!(labels, ["normal", "spam", "normal", "spam"]);
    assert_ne!(ex[0].id, ex[2].id);
    assert_ne!(ex[1].id, ex[3].id);
}

#[test]
fn small_class_is_rejected() {
    let err = select_exemplars(&dataset("sms", &[30, 1]), 2, 0).unwrap_err();
    assert!(matches!(err, LlmError::ClassTooSmall { ref label, have: 1, need: 2 } if label == "spam"));
}

#[test]
fn datasets_differ_only_at_substitution_sites() {
    let t = PromptTemplate::default();
    let covid = LabelSchema::builtin("sentiment3").unwrap();
    let sms = LabelSchema::builtin("sms").unwrap();
    let a = render_prompt(&t, "same text", &covid, "COVID-19 tweets", None).unwrap();
    let b = render_prompt(&t, "same text", &sms, "SMS spam", None).unwrap();
    let mask = |s: &str, labels: &str, name: &str| s.replace(labels, "<L>").replace(name, "<D>");
    assert_ne!(a, b);
    assert_eq!(
        mask(&a.system, "negative, neutral, positive", "COVID-19 tweets"),
        mask(&b.system, "normal, spam", "SMS spam")
    );
    assert_eq!(a.user, b.user);
}

#[test]
fn labels_listed_once_in_order() {
    let p =
        render_prompt(&PromptTemplate::default(), "x", &LabelSchema::builtin("ecommerce").unwrap(), "E", None).unwrap();
    assert!(p.system.contains("household, books, clothing & accessories, electronics"));
    assert_eq!(p.system.matches("electronics").count(), 1);
}

#[test]
fn empty_exemplars_equal_zero_shot() {
    let t = PromptTemplate::default();
    let s = LabelSchema::builtin("sms").unwrap();
    let zero = render_prompt(&t, "win a prize", &s, "SMS", None).unwrap();
    let empty = render_prompt(&t, "win a prize", &s, "SMS", Some(&[])).unwrap();
    assert_eq!(zero, empty);
    assert_eq!(zero, render_prompt(&t, "win a prize", &s, "SMS", None).unwrap());
}

#[test]
fn exemplar_blocks_precede_input() {
    let t = PromptTemplate::default();
    let s = LabelSchema::builtin("sms").unwrap();
    let ex = vec![
        Exemplar { id: "1".into(), text: "see you at 5".into(), label: "normal".into() },
        Exemplar { id: "2".into(), text: "FREE entry".into(), label: "spam".into() },
    ];
    let p = render_prompt(&t, "call now", &s, "SMS", Some(&ex)).unwrap();
    assert_eq!(p.user, "Text: see you at 5\nLabel: normal\n\nText: FREE entry\nLabel: spam\n\ncall now");
}

#[test]
fn template_errors() {
    let s = LabelSchema::builtin("sms").unwrap();
    let mut t = PromptTemplate::default();
    t.system_text.push_str(" {audience}");
    let err = render_prompt(&t, "x", &s, "SMS", None).unwrap_err();
    assert!(err.to_string().contains("{audience}"), "{err}");

    let mut t = PromptTemplate::default();
    t.system_text = "Labels: {labels}. Again: {labels}".into();
    assert!(t.validate().is_err());

    let mut t = PromptTemplate::default();
    t.user_text = "no input here".into();
    assert!(t.validate().is_err());

    let mut t = PromptTemplate::default();
    t.user_text = "{{literal}} {input}".into();
    assert_eq!(render_prompt(&t, "x", &s, "SMS", None).unwrap().user, "{literal} x");

    let mut t = PromptTemplate::default();
    t.user_text = "{input".into();
    assert!(t.validate().is_err());
}

#[test]
fn cache_key_sensitivity() {
    let d = DecodeParams { temperature: 0.0, max_tokens: 64 };
    let p = prompt("hello");
    assert_eq!(cache_key("m", &p, &d), cache_key("m", &p, &d));
    assert_eq!(cache_key("m", &p, &d).len(), 64);
    assert_ne!(cache_key("m", &p, &d), cache_key("m", &p, &DecodeParams { temperature: 0.7, ..d }));
    assert_ne!(cache_key("m", &p, &d), cache_key("m", &prompt("hellp"), &d));
    assert_ne!(cache_key("m", &p, &d), cache_key("m@v2", &p, &d));
    assert_ne!(cache_key("m", &p, &d), cache_key("m", &p, &DecodeParams { max_tokens: 65, ..d }));
}

proptest! {
    #[test]
    fn one_char_changes_key(text in "[a-z ]{1,30}", at in 0usize..30, c in "[A-Z]") {
        let d = DecodeParams { temperature: 0.0, max_tokens: 64 };
        let mut other: Vec<char> = text.chars().collect();
        let i = at % other.len();
        other[i] = c.chars().next().unwrap();
        let other: String = other.into_iter().collect();
        prop_assert_ne!(cache_key("m", &prompt(&text), &d), cache_key("m", &prompt(&other), &d));
    }
}

fn replay_backend(records: Vec<ReplayRecord>) -> (Backend, Arc<Replay>) {
    let mut cfg = BackendConfig::new("r", BackendKind::Replay, "gpt-3.5-turbo");
    cfg.replay_file = Some("unused.jsonl".into());
    let replay = Arc::new(Replay::from_records(records));
    (Backend::with_transport(cfg, replay.clone()), replay)
}

#[test]
fn replay_then_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path().join("cache")).unwrap();
    let (probe, _) = replay_backend(vec![]);
    let p = prompt("WINNER!! claim your prize");
    let key = probe.request_key(&p);
    let (backend, replay) = replay_backend(vec![ReplayRecord { cache_key: key.clone(), response: " Spam.\n".into() }]);

    let first = backend.complete(&p, &cache).unwrap();
    assert_eq!(first.text, " Spam.\n");
    assert!(!first.from_cache);
    assert_eq!(first.request_digest, key);
    let second = backend.complete(&p, &cache).unwrap();
    assert!(second.from_cache);
    assert_eq!(second.text, first.text);
    assert_eq!(replay.calls(), 1);
    assert_eq!(cache.len(), 1);
}

#[test]
fn replay_miss_names_digest() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    let (backend, _) = replay_backend(vec![]);
    let p = prompt("unrecorded");
    let err = backend.complete(&p, &cache).unwrap_err();
    assert!(err.to_string().contains(&backend.request_key(&p)), "{err}");
    assert!(err.is_permanent());
}

#[test]
fn replay_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.jsonl");
    let recs = vec![
        ReplayRecord { cache_key: "a".into(), response: "x".into() },
        ReplayRecord { cache_key: "b".into(), response: "line\nbreak".into() },
    ];
    transport::write_replay_file(&path, &recs).unwrap();
    let mut cfg = BackendConfig::new("r", BackendKind::Replay, "m");
    cfg.replay_file = Some("fixture.jsonl".into());
    let backend = Backend::from_config(&cfg, dir.path()).unwrap();
    assert_eq!(backend.transport_calls(), 0);
    assert_eq!(Replay::load(&path).unwrap().len(), 2);
}

/// Fails with the given errors in turn, then answers "positive".
struct Flaky {
    script: Mutex<Vec<TransportError>>,
    calls: AtomicU64,
}

impl Flaky {
    fn new(mut script: Vec<TransportError>) -> Arc<Self> {
        script.reverse();
        Arc::new(Self { script: Mutex::new(script), calls: AtomicU64::new(0) })
    }
}

impl Transport for Flaky {
    fn send(&self, _: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match self.script.lock().unwrap().pop() {
            Some(e) => Err(e),
            None => Ok("positive".into()),
        }
    }
    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

fn fast_config(kind: BackendKind) -> BackendConfig {
    let mut cfg = BackendConfig::new("b", kind, "m");
    cfg.retry = RetryPolicy { max_attempts: 3, initial_backoff_ms: 1, max_backoff_ms: 4 };
    cfg.rate_limit = 1000.0;
    cfg
}

#[test]
fn transient_errors_are_retried() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    let t =
        Flaky::new(vec![TransportError::Transient("reset".into()), TransportError::RateLimited { retry_after: None }]);
    let b = Backend::with_transport(fast_config(BackendKind::RemoteChat), t.clone());
    assert_eq!(b.complete(&prompt("x"), &cache).unwrap().text, "positive");
    assert_eq!(t.calls(), 3);
}

#[test]
fn retries_are_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    let t = Flaky::new(vec![TransportError::Transient("down".into()); 5]);
    let b = Backend::with_transport(fast_config(BackendKind::RemoteChat), t.clone());
    let err = b.complete(&prompt("x"), &cache).unwrap_err();
    assert!(matches!(err, LlmError::Exhausted { attempts: 3, .. }));
    assert!(!err.is_permanent());
    assert_eq!(t.calls(), 3);
    assert!(cache.is_empty());
}

#[test]
fn permanent_errors_are_not_retried() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    for e in [TransportError::Permanent("HTTP 401".into()), TransportError::AuthMissing("KEY".into())] {
        let t = Flaky::new(vec![e]);
        let b = Backend::with_transport(fast_config(BackendKind::RemoteChat), t.clone());
        assert!(b.complete(&prompt("x"), &cache).unwrap_err().is_permanent());
        assert_eq!(t.calls(), 1);
    }
}

#[test]
fn backoff_doubles_and_caps() {
    let p = RetryPolicy { max_attempts: 5, initial_backoff_ms: 100, max_backoff_ms: 350 };
    let ms: Vec<u128> = (1..=4).map(|a| p.backoff(a).as_millis()).collect();
    assert_eq!(ms, [100, 200, 350, 350]);
}

proptest! {
    #[test]
    fn network_calls_bounded_by_distinct_keys(seq in prop::collection::vec(0usize..6, 1..40)) {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let b = Backend::with_transport(fast_config(BackendKind::Echo), Arc::new(transport::Echo::default()));
        for i in &seq {
            b.complete(&prompt(&format!("doc {i}")), &cache).unwrap();
        }
        let distinct = seq.iter().collect::<std::collections::BTreeSet<_>>().len() as u64;
        prop_assert_eq!(b.transport_calls(), distinct);
    }
}

#[test]
fn config_validation() {
    let mut c = BackendConfig::new("x", BackendKind::Echo, "m");
    assert!(c.validate().is_ok());
    c.temperature = -0.1;
    assert!(c.validate().is_err());
    let mut c = BackendConfig::new("x", BackendKind::Echo, "m");
    c.strategy = Strategy::FewShot { k_per_class: 0, seed: 0 };
    assert!(c.validate().is_err());
    let c = BackendConfig::new("x", BackendKind::Replay, "m");
    assert!(c.validate().is_err());
}

#[test]
fn config_from_toml_with_defaults() {
    let c: BackendConfig = toml::from_str(
        r#"
        id = "llama-s"
        kind = "remote-chat"
        model = "llama-3-8b"
        base = "llama"
        strategy = { type = "few_shot" }
        "#,
    )
    .unwrap();
    assert_eq!(c.temperature, 0.0);
    assert_eq!(c.max_tokens, 64);
    assert_eq!(c.rate_limit, 2.0);
    assert_eq!(c.strategy, Strategy::FewShot { k_per_class: 2, seed: 0 });
    assert_eq!(c.display(), "llama-3-8b(S)");
    let f: BackendConfig =
        toml::from_str("id='f'\nkind='echo'\nmodel='base'\nstrategy={type='finetuned', model='ft:base:1'}").unwrap();
    assert_eq!(f.effective_model(), "ft:base:1");
    assert_eq!(f.display(), "base(F)");
    assert!(toml::from_str::<BackendConfig>("id='f'\nkind='echo'\nmodel='m'\ncolour=1").is_err());
}

/// Serves the canned `(status, body)` responses in order, recording request heads.
fn canned_server(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                head.push_str(&line);
            }
            let mut body_in = vec![0; len];
            reader.read_exact(&mut body_in).unwrap();
            head.push_str(&String::from_utf8_lossy(&body_in));
            log.lock().unwrap().push(head);
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, seen)
}

#[test]
fn http_chat_wire_format() {
    let ok = r#"{"choices":[{"message":{"role":"assistant","content":"Negative"}}]}"#.to_owned();
    let (url, seen) = canned_server(vec![(503, "busy".into()), (200, ok)]);
    std::env::set_var("TCLS_TEST_KEY_WIRE", "sk-test");
    let mut cfg = fast_config(BackendKind::RemoteChat);
    cfg.endpoint = format!("{url}/v1");
    cfg.auth_env = "TCLS_TEST_KEY_WIRE".into();
    let b = Backend::from_config(&cfg, std::path::Path::new(".")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    let r = b.complete(&prompt("broken, want refund"), &cache).unwrap();
    assert_eq!(r.text, "Negative");
    assert_eq!(b.transport_calls(), 2);
    let reqs = seen.lock().unwrap();
    assert!(reqs[1].starts_with("POST /v1/chat/completions"));
    assert!(reqs[1].to_ascii_lowercase().contains("authorization: bearer sk-test"));
    let body: serde_json::Value = serde_json::from_str(&reqs[1][reqs[1].find('{').unwrap()..]).unwrap();
    assert_eq!(body["model"], "m");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "broken, want refund");
}

#[test]
fn http_auth_missing_is_permanent() {
    let mut cfg = fast_config(BackendKind::RemoteChat);
    cfg.endpoint = "http://127.0.0.1:9".into();
    cfg.auth_env = "TCLS_TEST_KEY_DEFINITELY_UNSET".into();
    let b = Backend::from_config(&cfg, std::path::Path::new(".")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = b.complete(&prompt("x"), &ResponseCache::open(dir.path()).unwrap()).unwrap_err();
    assert!(matches!(err, LlmError::Transport(TransportError::AuthMissing(_))));
}

#[test]
fn status_classification() {
    use transport::classify_status;
    assert!(classify_status(500, None, "").is_retryable());
    assert!(classify_status(429, Some("2"), "").is_retryable());
    assert!(!classify_status(401, None, "").is_retryable());
    assert!(!classify_status(400, None, "").is_retryable());
    assert!(transport::extract_content("{}").is_err());
}

#[test]
fn finetune_export_round_trip() {
    let ds = dataset("sms", &[7, 3]);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ft/train.jsonl");
    let manifest = export_finetune_data(&ds, &PromptTemplate::default(), "SMS", &out).unwrap();
    let records = read_finetune_file(&out).unwrap();
    assert_eq!(records.len(), 10);
    assert_eq!(manifest.records, 10);
    let gold: Vec<&str> = ds.examples().iter().map(|e| e.gold.as_str()).collect();
    let back: Vec<&str> = records.iter().map(|r| r.assistant().unwrap()).collect();
    assert_eq!(gold, back);
    assert_eq!(records[0].messages[1].content, ds.examples()[0].text);
    assert_eq!(manifest.label_counts, crate::corpus::label_distribution(&ds));
    let on_disk: FineTuneManifest =
        serde_json::from_slice(&std::fs::read(finetune_manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
}

#[test]
fn scripted_job_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("train.jsonl");
    std::fs::write(&file, "{\"messages\":[]}\n").unwrap();
    let store = JobStore::new(dir.path().join("jobs.json"));
    let provider = ScriptedProvider::default();
    let mut job = submit_finetune_job(&provider, &store, "gpt-3.5-turbo", &file).unwrap();
    assert_eq!(job.status, JobStatus::Pending);
    for _ in 0..3 {
        job = poll_finetune_job(&provider, &store, &job).unwrap();
    }
    assert_eq!(job.status, JobStatus::Succeeded);
    let model = job.fine_tuned_model.clone().unwrap();

    let reloaded = JobStore::new(dir.path().join("jobs.json")).get(&job.job_id).unwrap().unwrap();
    assert_eq!(reloaded, job);
    let mut cfg = BackendConfig::new("ft", BackendKind::Echo, "gpt-3.5-turbo");
    cfg.strategy = Strategy::Finetuned { model: model.clone() };
    assert!(cfg.validate().is_ok());
    assert_eq!(cfg.effective_model(), model);
}

#[test]
fn empty_training_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("empty.jsonl");
    std::fs::write(&file, "").unwrap();
    let store = JobStore::new(dir.path().join("jobs.json"));
    let err = submit_finetune_job(&ScriptedProvider::default(), &store, "m", &file).unwrap_err();
    assert!(err.to_string().contains("empty"));
    assert!(store.load().unwrap().is_empty());
}

#[test]
fn status_never_goes_backwards() {
    let provider = ScriptedProvider::new(vec![JobStatus::Running, JobStatus::Pending]);
    let dir = tempfile::tempdir().unwrap();
    let store = JobStore::new(dir.path().join("jobs.json"));
    let job = provider.submit("m", b"x").unwrap();
    let job = poll_finetune_job(&provider, &store, &job).unwrap();
    assert!(poll_finetune_job(&provider, &store, &job).is_err());
    let mut done = job.clone();
    done.advance(JobStatus::Failed).unwrap();
    assert!(done.advance(JobStatus::Succeeded).is_err());
}

#[test]
fn waiting_times_out() {
    let provider = ScriptedProvider::new(vec![JobStatus::Running]);
    let dir = tempfile::tempdir().unwrap();
    let store = JobStore::new(dir.path().join("jobs.json"));
    let job = provider.submit("m", b"x").unwrap();
    let err = wait_for_job(&provider, &store, &job, Duration::from_millis(1), Duration::from_millis(20)).unwrap_err();
    assert!(err.to_string().contains("Running"), "{err}");
    let scripted = ScriptedProvider::default();
    let job = scripted.submit("m", b"x").unwrap();
    let ok = wait_for_job(&scripted, &store, &job, Duration::from_millis(1), Duration::from_secs(5)).unwrap();
    assert_eq!(ok.status, JobStatus::Succeeded);
}
