use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use vsc_core::vlm::{
    build_zero_shot_prompt, query, ImageDetail, ParseOptions, ProviderClient, ProviderError, QueryContext,
    ResponseCache, RetryPolicy,
};
use vsc_core::{Prompt, RenderedSpectrogram, ResponseStatus};

// `QueryContext::sleep` is a plain fn pointer, so waits are recorded globally.
static SLEPT_MS: AtomicU64 = AtomicU64::new(0);
static SLEEPS: Mutex<Vec<u64>> = Mutex::new(Vec::new());
static SERIAL: Mutex<()> = Mutex::new(());

fn record_sleep(d: Duration) {
    SLEPT_MS.fetch_add(d.as_millis() as u64, Ordering::SeqCst);
    SLEEPS.lock().unwrap().push(d.as_millis() as u64);
}

fn reset_sleeps() {
    SLEPT_MS.store(0, Ordering::SeqCst);
    SLEEPS.lock().unwrap().clear();
}

struct Scripted {
    errors: Vec<ProviderError>,
    reply: String,
    calls: AtomicUsize,
}

impl Scripted {
    fn new(errors: Vec<ProviderError>, reply: &str) -> Self {
        Scripted { errors, reply: reply.into(), calls: AtomicUsize::new(0) }
    }
    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ProviderClient for Scripted {
    fn provider(&self) -> &str {
        "scripted"
    }
    fn model(&self) -> &str {
        "v1"
    }
    fn complete(&self, _: &Prompt) -> Result<String, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        match self.errors.get(n) {
            Some(e) => Err(e.clone()),
            None => Ok(self.reply.clone()),
        }
    }
}

fn classes() -> Vec<String> {
    ["dog", "rain", "sea_waves"].iter().map(|s| s.to_string()).collect()
}

fn prompt(tag: u8) -> Prompt {
    let img = RenderedSpectrogram { image_bytes: vec![tag; 4], config_hash: "c".into(), clip_hash: None, width_px: 1, height_px: 1 };
    build_zero_shot_prompt(&img, &classes(), ImageDetail::Auto).unwrap()
}

fn ctx(cache: Option<&ResponseCache>) -> QueryContext<'_> {
    QueryContext { cache, retry: RetryPolicy::default(), parse: ParseOptions::default(), offline: false, sleep: record_sleep }
}

fn rate_limited(n: usize) -> Vec<ProviderError> {
    (0..n).map(|i| ProviderError::RateLimited(format!("429 #{i}"))).collect()
}

#[test]
fn transient_failures_back_off_exponentially() {
    let _g = SERIAL.lock().unwrap();
    reset_sleeps();
    let p = Scripted::new(rate_limited(4), "Rain");
    let r = query(&p, &prompt(1), &ctx(None));
    assert_eq!(r.status, ResponseStatus::Ok);
    assert_eq!(r.parsed_label.as_deref(), Some("rain"));
    assert_eq!(p.calls(), 5);
    assert_eq!(*SLEEPS.lock().unwrap(), vec![1000, 2000, 4000, 8000]);
}

#[test]
fn retries_stop_after_the_attempt_budget() {
    let _g = SERIAL.lock().unwrap();
    reset_sleeps();
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path(), "scripted", "v1").unwrap();
    let p = Scripted::new(rate_limited(10), "rain");
    let r = query(&p, &prompt(2), &ctx(Some(&cache)));
    assert_eq!(r.status, ResponseStatus::TransportError);
    assert_eq!(p.calls(), 5);
    assert_eq!(SLEPT_MS.load(Ordering::SeqCst), 1000 + 2000 + 4000 + 8000);
    assert!(cache.is_empty(), "transport errors must not be cached");
}

#[test]
fn fatal_errors_are_not_retried() {
    let _g = SERIAL.lock().unwrap();
    reset_sleeps();
    let p = Scripted::new(vec![ProviderError::Fatal("401".into())], "rain");
    let r = query(&p, &prompt(3), &ctx(None));
    assert_eq!(r.status, ResponseStatus::TransportError);
    assert_eq!(p.calls(), 1);
    assert!(SLEEPS.lock().unwrap().is_empty());
}

#[test]
fn delays_are_capped() {
    let policy = RetryPolicy::default();
    let got: Vec<u64> = (1..=8).map(|n| policy.delay(n).as_millis() as u64).collect();
    assert_eq!(got, vec![1000, 2000, 4000, 8000, 16000, 30000, 30000, 30000]);
}

#[test]
fn cache_short_circuits_and_survives_reopen() {
    let _g = SERIAL.lock().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let first = {
        let cache = ResponseCache::open(dir.path(), "scripted", "v1").unwrap();
        let p = Scripted::new(vec![], "dog");
        let r = query(&p, &prompt(4), &ctx(Some(&cache)));
        assert_eq!(p.calls(), 1);
        let again = query(&p, &prompt(4), &ctx(Some(&cache)));
        assert_eq!(p.calls(), 1);
        assert_eq!(again, r);
        r
    };
    assert!(dir.path().join("scripted").join("v1.jsonl").is_file());
    let cache = ResponseCache::open(dir.path(), "scripted", "v1").unwrap();
    assert_eq!(cache.len(), 1);
    // a provider that would answer differently is never consulted
    let p = Scripted::new(vec![], "rain");
    let r = query(&p, &prompt(4), &ctx(Some(&cache)));
    assert_eq!(p.calls(), 0);
    assert_eq!(r, first);
}

#[test]
fn offline_misses_become_transport_errors() {
    let _g = SERIAL.lock().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path(), "scripted", "v1").unwrap();
    let online = Scripted::new(vec![], "sea waves");
    let warm = query(&online, &prompt(5), &ctx(Some(&cache)));
    assert_eq!(warm.parsed_label.as_deref(), Some("sea_waves"));

    let offline = QueryContext { offline: true, ..ctx(Some(&cache)) };
    let p = Scripted::new(vec![], "dog");
    assert_eq!(query(&p, &prompt(5), &offline), warm);
    let miss = query(&p, &prompt(6), &offline);
    assert_eq!(miss.status, ResponseStatus::TransportError);
    assert_eq!(p.calls(), 0);
    assert_eq!(cache.len(), 1);
}

#[test]
fn unparseable_answers_are_cached_as_such() {
    let _g = SERIAL.lock().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path(), "scripted", "v1").unwrap();
    let p = Scripted::new(vec![], "a thunderstorm, probably");
    let r = query(&p, &prompt(7), &ctx(Some(&cache)));
    assert_eq!(r.status, ResponseStatus::Unparseable);
    assert_eq!(r.parsed_label, None);
    assert_eq!(cache.len(), 1);
}
