//! A minimal local completion server for dry runs and tests.
//!
//! Answers every POST with `{"choices":[{"text": ...}]}` built from a
//! handler that sees the decoded JSON request body.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum MockReply {
    Text(String),
    /// Text sent after a pause, to simulate service time.
    Delayed(Duration, String),
    /// An error status with an empty body.
    Status(u16),
    /// Drop the connection without answering.
    Close,
}

type Handler = dyn Fn(&Value) -> MockReply + Send + Sync;

pub struct MockEndpoint {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    requests: Arc<AtomicUsize>,
    busy_nanos: Arc<AtomicU64>,
    accept: Option<JoinHandle<()>>,
}

impl MockEndpoint {
    pub fn spawn<F>(handler: F) -> io::Result<Self>
    where
        F: Fn(&Value) -> MockReply + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicUsize::new(0));
        let busy_nanos = Arc::new(AtomicU64::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let accept = {
            let (stop, requests, busy) = (stop.clone(), requests.clone(), busy_nanos.clone());
            thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(conn) = conn else { continue };
                    let (handler, requests, busy) = (handler.clone(), requests.clone(), busy.clone());
                    thread::spawn(move || {
                        let _ = serve(conn, &*handler, &requests, &busy);
                    });
                }
            })
        };
        Ok(MockEndpoint {
            addr,
            stop,
            requests,
            busy_nanos,
            accept: Some(accept),
        })
    }

    /// Completion URL of the server.
    pub fn url(&self) -> String {
        format!("http://{}/v1/completions", self.addr)
    }

    /// Requests received so far, including dropped ones.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Total time spent answering, from a fully read request to the flushed reply.
    pub fn busy(&self) -> Duration {
        Duration::from_nanos(self.busy_nanos.load(Ordering::SeqCst))
    }
}

impl Drop for MockEndpoint {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn serve(conn: TcpStream, handler: &Handler, requests: &AtomicUsize, busy: &AtomicU64) -> io::Result<()> {
    let mut reader = BufReader::new(conn.try_clone()?);
    let mut length = 0usize;
    let mut first = true;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let line = line.trim_end();
        if line.is_empty() {
            if first {
                continue;
            }
            break;
        }
        first = false;
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    requests.fetch_add(1, Ordering::SeqCst);
    let started = Instant::now();
    let request: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let mut conn = conn;
    let (code, payload) = match handler(&request) {
        MockReply::Close => return Ok(()),
        MockReply::Status(code) => (code, String::new()),
        MockReply::Delayed(d, text) => {
            thread::sleep(d);
            (200, serde_json::json!({"choices": [{"text": text}]}).to_string())
        }
        MockReply::Text(text) => (200, serde_json::json!({"choices": [{"text": text}]}).to_string()),
    };
    write!(
        conn,
        "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    conn.flush()?;
    busy.fetch_add(started.elapsed().as_nanos() as u64, Ordering::SeqCst);
    Ok(())
}
