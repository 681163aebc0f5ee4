use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use ediref_core::corpus::EmotionLabel;
use ediref_core::promptlab::{
    classify_via_prompt, CompletionClient, EndpointConfig, HttpCompletionClient, PromptSettings,
};
use ediref_core::Error;

struct Seen {
    authorization: Option<String>,
    body: serde_json::Value,
}

/// Answers every POST with `status` and `reply`, recording what it saw.
fn stub(status: u16, reply: &'static str) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}/complete", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut len, mut auth) = (0, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Seen {
                authorization: auth,
                body: serde_json::from_slice(&body).unwrap(),
            });
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    (addr, seen)
}

fn endpoint(address: String, auth_env: &str) -> EndpointConfig {
    EndpointConfig {
        address,
        auth_env: auth_env.to_string(),
        timeout_secs: 5,
        ..Default::default()
    }
}

#[test]
fn posts_prompt_and_reads_completion() {
    let (addr, seen) = stub(200, r#"{"completion": " Joy."}"#);
    std::env::set_var("EDIREF_ENDPOINT_TEST_TOKEN", "s3cret");
    let client = HttpCompletionClient::new(endpoint(addr, "EDIREF_ENDPOINT_TEST_TOKEN")).unwrap();
    assert_eq!(client.complete("hello").unwrap(), " Joy.");
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer s3cret"));
    assert_eq!(seen[0].body["prompt"], "hello");
    assert_eq!(seen[0].body["temperature"], 0.0);
    assert_eq!(seen[0].body["max_tokens"], 8);
}

#[test]
fn classify_through_http() {
    let (addr, seen) = stub(200, r#"{"completion": "fear"}"#);
    let client = HttpCompletionClient::new(endpoint(addr, "EDIREF_ENDPOINT_UNSET")).unwrap();
    let settings = PromptSettings {
        parallelism: 2,
        ..Default::default()
    };
    let run = classify_via_prompt(&client, &["a", "b", "c"], &settings, None).unwrap();
    assert_eq!(run.labels, vec![EmotionLabel::Fear; 3]);
    assert_eq!(run.invalid_rate, 0.0);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen.iter().all(|s| s.authorization.is_none()));
}

#[test]
fn server_errors_and_unreachable_hosts() {
    let (addr, _) = stub(500, r#"{"error": "overloaded"}"#);
    let client = HttpCompletionClient::new(endpoint(addr, "EDIREF_ENDPOINT_UNSET")).unwrap();
    assert!(matches!(client.complete("x"), Err(Error::Endpoint(_))));

    let (addr, _) = stub(200, r#"{"text": "joy"}"#);
    let client = HttpCompletionClient::new(endpoint(addr, "EDIREF_ENDPOINT_UNSET")).unwrap();
    assert!(matches!(client.complete("x"), Err(Error::Endpoint(_))));

    let client = HttpCompletionClient::new(endpoint("http://127.0.0.1:9/".into(), "EDIREF_ENDPOINT_UNSET")).unwrap();
    let settings = PromptSettings {
        max_retries: 1,
        retry_backoff_ms: 1,
        ..Default::default()
    };
    let err = classify_via_prompt(&client, &["a", "b"], &settings, None).unwrap_err();
    assert!(matches!(err, Error::Aborted(_)));
    assert!(HttpCompletionClient::new(EndpointConfig::default()).is_err());
}
