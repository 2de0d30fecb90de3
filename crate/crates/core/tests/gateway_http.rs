use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use localeval::gateway::*;

/// Serve the given (status, body) responses in order, one per connection,
/// recording each request body.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let seen2 = seen.clone();
    let handle = thread::spawn(move || {
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut content_length = 0usize;
            let mut headers = Vec::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut buf = vec![0u8; content_length];
            reader.read_exact(&mut buf).unwrap();
            seen2
                .lock()
                .unwrap()
                .push(format!("{}\n{}", headers.join(""), String::from_utf8(buf).unwrap()));
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen, handle)
}

fn ok_body(text: &str) -> String {
    format!(r#"{{"choices":[{{"message":{{"role":"assistant","content":"{text}"}},"finish_reason":"stop"}}],"usage":{{"prompt_tokens":5,"completion_tokens":1}}}}"#)
}

#[test]
fn retries_429_then_succeeds() {
    let (url, seen, handle) = serve(vec![(429, "{}".into()), (200, ok_body("C"))]);
    let gw = Gateway::new().without_backoff_sleep();
    let ep = EndpointConfig::remote("local", url, "qwen2.5-7b");
    let req = ChatRequest::new(vec![ChatMessage::user("Question?")], 64).with_tag("eval");
    let resp = gw.complete(&req, &ep).unwrap();
    handle.join().unwrap();
    assert_eq!(resp.text, "C");
    assert_eq!(resp.attempts, 2);
    let log = gw.call_log();
    assert_eq!(log.len(), 2);
    assert_eq!(log[0].status, Some(429));
    assert!(!log[0].ok);
    assert_eq!(log[1].attempt, 2);
    assert!(log[1].ok);
    let requests = seen.lock().unwrap();
    assert!(requests[0].starts_with("POST /v1/chat/completions"));
    let body: serde_json::Value = serde_json::from_str(requests[0].split_once("\n\n").unwrap().1.trim_start_matches('\n')).unwrap();
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["model"], "qwen2.5-7b");
}

#[test]
fn exhausted_retries_carry_last_status() {
    let (url, _, handle) = serve(vec![(500, "{}".into()), (503, "{}".into())]);
    let gw = Gateway::new().without_backoff_sleep();
    let mut ep = EndpointConfig::remote("local", url, "m");
    ep.retry = RetryPolicy { max_attempts: 2, base_backoff_ms: 1 };
    let req = ChatRequest::new(vec![ChatMessage::user("q")], 8);
    let err = gw.complete(&req, &ep).unwrap_err();
    handle.join().unwrap();
    match err {
        GatewayError::Exhausted { attempts, last_status, .. } => {
            assert_eq!(attempts, 2);
            assert_eq!(last_status, Some(503));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(gw.call_log().len(), 2);
}

#[test]
fn client_errors_are_not_retried_and_auth_is_sent() {
    std::env::set_var("LOCALEVAL_HTTP_TEST_TOKEN", "sekrit");
    let (url, seen, handle) = serve(vec![(401, r#"{"error":"nope"}"#.into())]);
    let gw = Gateway::new().without_backoff_sleep();
    let mut ep = EndpointConfig::remote("local", url, "m");
    ep.auth_env = Some("LOCALEVAL_HTTP_TEST_TOKEN".into());
    let req = ChatRequest::new(vec![ChatMessage::user("q")], 8);
    let err = gw.complete(&req, &ep).unwrap_err();
    handle.join().unwrap();
    assert!(matches!(err, GatewayError::Exhausted { attempts: 1, last_status: Some(401), .. }));
    let requests = seen.lock().unwrap();
    assert!(requests[0].to_ascii_lowercase().contains("authorization: bearer sekrit"));
}
