//! Network transports for the session hub: newline-delimited JSON over TCP
//! and one message per text frame over WebSocket. Each session gets a clock
//! task once it is configured.

use std::collections::HashMap;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use serde_json::json;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc::{unbounded_channel, UnboundedSender};
use tokio_tungstenite::tungstenite::Message;

use feedback_loom::server::{ConnId, Delivery, Hub, MessageType, ProtocolMessage};

struct Shared {
    hub: Hub,
    outboxes: HashMap<ConnId, UnboundedSender<String>>,
}

#[derive(Clone)]
struct Server {
    inner: Arc<Mutex<Shared>>,
    started: Instant,
}

impl Server {
    fn now(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }

    fn connect(&self) -> (ConnId, tokio::sync::mpsc::UnboundedReceiver<String>) {
        let (tx, rx) = unbounded_channel();
        let mut shared = self.inner.lock().expect("hub lock");
        let conn = shared.hub.connect();
        shared.outboxes.insert(conn, tx);
        (conn, rx)
    }

    fn disconnect(&self, conn: ConnId) {
        let mut shared = self.inner.lock().expect("hub lock");
        shared.hub.disconnect(conn);
        shared.outboxes.remove(&conn);
    }

    fn deliver(shared: &Shared, deliveries: Vec<Delivery>) {
        for d in deliveries {
            if let Some(tx) = shared.outboxes.get(&d.conn) {
                let _ = tx.send(d.message.to_line());
            }
        }
    }

    /// Feeds one inbound line to the hub and starts a clock for new sessions.
    fn inbound(&self, conn: ConnId, line: &str) {
        if line.trim().is_empty() {
            return;
        }
        let ts = self.now();
        let mut shared = self.inner.lock().expect("hub lock");
        let msg = match ProtocolMessage::from_line(line) {
            Ok(msg) => msg,
            Err(e) => {
                let reply = ProtocolMessage {
                    kind: MessageType::Error,
                    session_id: String::new(),
                    seq: None,
                    ts,
                    payload: json!({"code": e.code(), "message": e.to_string()}),
                };
                Self::deliver(&shared, vec![Delivery { conn, message: reply }]);
                return;
            }
        };
        let is_new = msg.kind == MessageType::Configure && shared.hub.session(&msg.session_id).is_none();
        let session_id = msg.session_id.clone();
        let deliveries = shared.hub.handle(conn, msg, ts);
        Self::deliver(&shared, deliveries);
        if is_new {
            if let Some(session) = shared.hub.session(&session_id) {
                let hz = session.state().config.tick_hz;
                tokio::spawn(self.clone().clock(session_id, hz));
            }
        }
    }

    async fn clock(self, session_id: String, hz: u32) {
        let mut interval = tokio::time::interval(Duration::from_secs_f64(1.0 / f64::from(hz.max(1))));
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        interval.tick().await;
        loop {
            interval.tick().await;
            let ts = self.now();
            let mut shared = self.inner.lock().expect("hub lock");
            let Some(session) = shared.hub.session(&session_id) else { break };
            if session.state().phase.is_closed() {
                break;
            }
            match shared.hub.clock_tick(&session_id, ts) {
                Ok(deliveries) => Self::deliver(&shared, deliveries),
                Err(e) => {
                    eprintln!("session {session_id}: clock stopped: {e}");
                    break;
                }
            }
        }
    }
}

async fn tcp_client(server: Server, stream: TcpStream) {
    let (conn, mut outbox) = server.connect();
    let (read, mut write) = stream.into_split();
    let writer = tokio::spawn(async move {
        while let Some(line) = outbox.recv().await {
            if write.write_all(line.as_bytes()).await.is_err() || write.write_all(b"\n").await.is_err() {
                break;
            }
        }
    });
    let mut lines = BufReader::new(read).lines();
    while let Ok(Some(line)) = lines.next_line().await {
        server.inbound(conn, &line);
    }
    server.disconnect(conn);
    writer.abort();
}

async fn ws_client(server: Server, stream: TcpStream) {
    let Ok(socket) = tokio_tungstenite::accept_async(stream).await else { return };
    let (mut sink, mut source) = socket.split();
    let (conn, mut outbox) = server.connect();
    let writer = tokio::spawn(async move {
        while let Some(line) = outbox.recv().await {
            if sink.send(Message::text(line)).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(frame)) = source.next().await {
        match frame {
            Message::Text(text) => {
                for line in text.as_str().lines() {
                    server.inbound(conn, line);
                }
            }
            Message::Close(_) => break,
            _ => {}
        }
    }
    server.disconnect(conn);
    writer.abort();
}

pub async fn serve(host: IpAddr, port: u16, ws_port: Option<u16>, log_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let server = Server {
        inner: Arc::new(Mutex::new(Shared { hub: Hub::new(log_dir), outboxes: HashMap::new() })),
        started: Instant::now(),
    };
    let tcp = TcpListener::bind(SocketAddr::new(host, port)).await?;
    eprintln!("listening for NDJSON clients on {}", tcp.local_addr()?);
    if let Some(ws_port) = ws_port {
        let ws = TcpListener::bind(SocketAddr::new(host, ws_port)).await?;
        eprintln!("listening for WebSocket clients on {}", ws.local_addr()?);
        let server = server.clone();
        tokio::spawn(async move {
            while let Ok((stream, _)) = ws.accept().await {
                tokio::spawn(ws_client(server.clone(), stream));
            }
        });
    }
    loop {
        let (stream, _) = tcp.accept().await?;
        tokio::spawn(tcp_client(server.clone(), stream));
    }
}
