//! Blocking transport: one thread per connection. A connection is either a
//! WebSocket session or a plain `GET /snapshot/<session_id>` request.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use tungstenite::{Error as WsError, Message};

use crate::protocol::{codes, Phase, Snapshot};
use crate::session::Session;

#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    /// How long a deferral may wait for an answer before the episode is
    /// aborted. `None` waits forever.
    pub mentor_timeout: Option<Duration>,
}

type Registry = Arc<Mutex<HashMap<String, Snapshot>>>;

/// Accepts connections until the listener fails.
pub fn serve(listener: TcpListener, cfg: ServerConfig) -> io::Result<()> {
    let registry: Registry = Arc::default();
    for stream in listener.incoming() {
        let stream = stream?;
        let (registry, cfg) = (Arc::clone(&registry), cfg.clone());
        thread::spawn(move || {
            let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
            if let Err(e) = handle_connection(stream, &registry, &cfg) {
                log::debug!("{peer}: {e}");
            }
        });
    }
    Ok(())
}

fn handle_connection(stream: TcpStream, registry: &Registry, cfg: &ServerConfig) -> io::Result<()> {
    let head = peek_head(&stream)?;
    if head.to_ascii_lowercase().contains("upgrade: websocket") {
        run_websocket(stream, registry, cfg).map_err(io::Error::other)
    } else {
        answer_http(stream, &head, registry)
    }
}

/// Peeks until the request headers are complete, without consuming them.
fn peek_head(stream: &TcpStream) -> io::Result<String> {
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut buf = vec![0u8; 8192];
    loop {
        let n = stream.peek(&mut buf)?;
        if n == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "closed before a request arrived"));
        }
        let text = String::from_utf8_lossy(&buf[..n]);
        if text.contains("\r\n\r\n") || n == buf.len() {
            stream.set_read_timeout(None)?;
            return Ok(text.into_owned());
        }
        // Headers still arriving.
        thread::sleep(Duration::from_millis(2));
    }
}

fn answer_http(mut stream: TcpStream, head: &str, registry: &Registry) -> io::Result<()> {
    let mut drain = vec![0u8; head.len()];
    stream.read_exact(&mut drain)?;
    let mut parts = head.lines().next().unwrap_or("").split_whitespace();
    let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
    let (status, body) = match (method, path.strip_prefix("/snapshot/")) {
        ("GET", Some(id)) => match registry.lock().expect("registry lock").get(id) {
            Some(s) => ("200 OK", serde_json::to_string(s).expect("snapshots serialize")),
            None => ("404 Not Found", error_body(codes::UNKNOWN_SESSION, &format!("no session `{id}`"))),
        },
        _ => ("404 Not Found", error_body("not_found", "only GET /snapshot/<session_id> is served")),
    };
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

fn error_body(code: &str, detail: &str) -> String {
    serde_json::json!({ "code": code, "detail": detail }).to_string()
}

#[allow(clippy::result_large_err)] // the error comes straight from tungstenite
fn run_websocket(stream: TcpStream, registry: &Registry, cfg: &ServerConfig) -> Result<(), WsError> {
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => WsError::Io(io::ErrorKind::WouldBlock.into()),
    })?;
    let mut session = Session::new();
    loop {
        let waiting = session.phase() == Phase::AwaitingMentor;
        ws.get_ref().set_read_timeout(if waiting { cfg.mentor_timeout } else { None })?;
        let frames = match ws.read() {
            Ok(Message::Text(text)) => session.handle_text(&text),
            Ok(Message::Binary(bytes)) => session.handle_text(&String::from_utf8_lossy(&bytes)),
            Ok(Message::Close(_)) | Err(WsError::ConnectionClosed | WsError::AlreadyClosed) => break,
            Ok(_) => continue,
            Err(WsError::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                log::info!("mentor timed out in session {}", session.id().unwrap_or("?"));
                session.timeout()
            }
            Err(e) => return Err(e),
        };
        if let Some(id) = session.id() {
            registry.lock().expect("registry lock").insert(id.to_string(), session.snapshot());
        }
        for f in frames {
            ws.send(Message::Text(f.to_json()))?;
        }
    }
    Ok(())
}
