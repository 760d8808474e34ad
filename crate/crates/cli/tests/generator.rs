use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use talechat_cli::generator::{from_settings, HttpGenerator};
use talechat_core::config::GenerationSettings;
use talechat_core::dialogue::generation::{active_listen, GenError, TextGenerator, CONFIRMATION, PARAPHRASE_PROMPT};

/// Minimal HTTP endpoint: records each request body and answers with
/// `respond(body)` after `delay`.
fn stub(delay: Duration, status: u16, respond: fn(&str) -> String) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/generate", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 {
                    break;
                }
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let body = String::from_utf8(body).unwrap();
            log.lock().unwrap().push(body.clone());
            thread::sleep(delay);
            let reply = respond(&body);
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: text/plain\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    (url, seen)
}

#[test]
fn posts_the_prompt_and_returns_the_body() {
    let (url, seen) = stub(Duration::ZERO, 200, |_| "  You care a lot about them.  ".into());
    let g = HttpGenerator::new(&url, Duration::from_secs(5));
    assert!(g.is_enabled());
    assert_eq!(g.generate("hello there").unwrap(), "You care a lot about them.");
    assert_eq!(*seen.lock().unwrap(), vec!["hello there".to_string()]);
}

#[test]
fn active_listen_sends_the_template_over_http() {
    let (url, seen) = stub(Duration::ZERO, 200, |_| "Your children matter to you".into());
    let g = HttpGenerator::new(&url, Duration::from_secs(5));
    let reply = active_listen(&g, "To my children");
    assert_eq!(reply, format!("Your children matter to you {CONFIRMATION}"));
    let prompts = seen.lock().unwrap().clone();
    assert_eq!(prompts, vec![format!("{PARAPHRASE_PROMPT}To my children")]);
}

#[test]
fn slow_service_times_out() {
    let (url, _) = stub(Duration::from_millis(800), 200, |_| "late".into());
    let g = HttpGenerator::new(&url, Duration::from_millis(150));
    assert!(matches!(g.generate("x"), Err(GenError::Timeout)));
}

#[test]
fn error_status_and_empty_body_fail() {
    let (url, _) = stub(Duration::ZERO, 500, |_| "boom".into());
    let g = HttpGenerator::new(&url, Duration::from_secs(5));
    assert!(matches!(g.generate("x"), Err(GenError::Failed(_))));
    let (url, _) = stub(Duration::ZERO, 200, |_| String::new());
    let g = HttpGenerator::new(&url, Duration::from_secs(5));
    assert!(matches!(g.generate("x"), Err(GenError::Failed(_))));
}

#[test]
fn settings_choose_the_client() {
    let off = GenerationSettings::default();
    assert!(!from_settings(&off).is_enabled());
    let on = GenerationSettings {
        enabled: true,
        endpoint: "http://127.0.0.1:9/generate".into(),
        timeout_ms: 100,
    };
    let g = from_settings(&on);
    assert!(g.is_enabled());
    // nothing listens on the discard port: the failure surfaces as an error
    assert!(g.generate("x").is_err());
}
