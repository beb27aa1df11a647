//! Minimal blocking HTTP/1.1 server for exercising the service client.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use infuse::scorer::LexicalScorer;
use infuse::service::{HealthResponse, NliRequest, NliResponse, SplitRequest, SplitResponse};

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub body: String,
}

pub type Handler = dyn Fn(&Request, usize) -> (u16, String) + Send + Sync;

pub struct Stub {
    pub url: String,
    log: Arc<Mutex<Vec<Request>>>,
}

impl Stub {
    /// `handler` gets the request and its 0-based arrival number.
    pub fn start(handler: Box<Handler>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let log: Arc<Mutex<Vec<Request>>> = Arc::default();
        let handler: Arc<Handler> = Arc::from(handler);
        let log2 = Arc::clone(&log);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let log = Arc::clone(&log2);
                let handler = Arc::clone(&handler);
                thread::spawn(move || serve(stream, &*handler, &log));
            }
        });
        Self { url, log }
    }

    pub fn requests(&self) -> Vec<Request> {
        self.log.lock().unwrap().clone()
    }

    pub fn count(&self, path: &str) -> usize {
        self.requests().iter().filter(|r| r.path == path).count()
    }
}

fn serve(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<Request>>) {
    let mut reader = BufReader::new(stream.try_clone().expect("clone"));
    let mut stream = stream;
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let (Some(method), Some(path)) = (parts.next(), parts.next()) else {
        return;
    };
    let (method, path) = (method.to_owned(), path.to_owned());
    let mut length = 0;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header).unwrap_or(0) == 0 {
            return;
        }
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let req = Request {
        method,
        path,
        body: String::from_utf8_lossy(&body).into_owned(),
    };
    let n = {
        let mut log = log.lock().unwrap();
        log.push(req.clone());
        log.len() - 1
    };
    let (status, body) = handler(&req, n);
    let reply = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(reply.as_bytes());
    let _ = stream.flush();
}

pub const NLI_MODEL: &str = "stub-nli";
pub const SPLIT_MODEL: &str = "stub-split";

pub fn health_ok() -> String {
    serde_json::to_string(&HealthResponse {
        status: "ok".into(),
        model_ids: [
            ("nli".to_owned(), NLI_MODEL.to_owned()),
            ("split".to_owned(), SPLIT_MODEL.to_owned()),
        ]
        .into_iter()
        .collect(),
    })
    .unwrap()
}

/// Answers `/v1/nli` with lexical verdicts and `/v1/split` by cutting at " and ".
pub fn lexical_response(req: &Request) -> (u16, String) {
    match req.path.as_str() {
        "/healthz" => (200, health_ok()),
        "/v1/nli" => {
            let Ok(body) = serde_json::from_str::<NliRequest>(&req.body) else {
                return (400, "{}".into());
            };
            let verdicts = body
                .pairs
                .iter()
                .map(|p| LexicalScorer::verdict(&p.premise, &p.hypothesis))
                .collect::<Vec<_>>();
            let truncated = vec![false; verdicts.len()];
            let resp = NliResponse {
                verdicts,
                model_id: NLI_MODEL.into(),
                truncated,
            };
            (200, serde_json::to_string(&resp).unwrap())
        }
        "/v1/split" => {
            let Ok(body) = serde_json::from_str::<SplitRequest>(&req.body) else {
                return (400, "{}".into());
            };
            let splits = body
                .sentences
                .iter()
                .map(|s| s.split(" and ").map(str::to_owned).collect())
                .collect();
            let resp = SplitResponse {
                splits,
                model_id: SPLIT_MODEL.into(),
            };
            (200, serde_json::to_string(&resp).unwrap())
        }
        _ => (404, "{}".into()),
    }
}
