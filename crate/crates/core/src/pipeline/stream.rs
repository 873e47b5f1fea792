//! Newline-delimited JSON stream of pipeline messages over TCP.
//!
//! Every line is one object with `seq`, `stamp_ns`, `type` and a
//! type-specific payload. Labeled clouds carry `points` as an array of
//! `[x, y, z, class, instance]` arrays.

use std::fmt::Write as _;
use std::io::{ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::queue::{BoundedQueue, DropPolicy};
use super::{Payload, PipelineError, Sink, StampedMessage};

/// Serializes one message as a JSON line (trailing newline included).
pub fn encode_json_line(msg: &StampedMessage) -> String {
    let mut s = String::with_capacity(64);
    let _ = write!(s, "{{\"seq\":{},\"stamp_ns\":{},", msg.seq, msg.stamp_ns);
    match msg.payload.as_ref() {
        Payload::PointCloud(c) => {
            let _ = write!(
                s,
                "\"type\":\"point_cloud\",\"frame_id\":{},\"point_count\":{},\"points\":[",
                json_string(&c.frame_id),
                c.points.len()
            );
            for (k, p) in c.points.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "[{:?},{:?},{:?},{:?}]", p.x as f32, p.y as f32, p.z as f32, p.intensity as f32);
            }
            s.push(']');
        }
        Payload::RangeImage(img) => {
            let _ = write!(
                s,
                "\"type\":\"range_image\",\"height\":{},\"width\":{},\"range\":[",
                img.height(),
                img.width()
            );
            for (k, r) in img.ranges().iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{:?}", *r as f32);
            }
            s.push(']');
        }
        Payload::LabelImage(l) => {
            let _ = write!(
                s,
                "\"type\":\"label_image\",\"height\":{},\"width\":{},\"labels\":[",
                l.height(),
                l.width()
            );
            for (k, v) in l.labels.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v}");
            }
            s.push(']');
        }
        Payload::LabeledCloud(lc) => {
            let _ = write!(
                s,
                "\"type\":\"labeled_cloud\",\"frame_id\":{},\"point_count\":{},\"points\":[",
                json_string(&lc.cloud.frame_id),
                lc.len()
            );
            for (k, ((p, c), i)) in lc.cloud.points.iter().zip(&lc.classes).zip(&lc.instances).enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "[{:?},{:?},{:?},{},{}]", p.x as f32, p.y as f32, p.z as f32, c, i);
            }
            s.push(']');
        }
    }
    s.push_str("}\n");
    s
}

fn json_string(v: &str) -> String {
    serde_json::to_string(v).unwrap_or_else(|_| "\"\"".into())
}

struct Client {
    queue: Arc<BoundedQueue<Arc<String>>>,
    writer: Option<JoinHandle<()>>,
}

struct Shared {
    clients: Mutex<Vec<Client>>,
    shutdown: AtomicBool,
    policy: DropPolicy,
    capacity: usize,
}

/// Accepts clients and fans published messages out to them, each through
/// its own bounded buffer governed by the drop policy.
pub struct StreamServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
}

/// Binds `port` on localhost (0 picks a free port).
pub fn serve_stream(port: u16, policy: DropPolicy, capacity: usize) -> Result<StreamServer, PipelineError> {
    StreamServer::bind(SocketAddr::from(([127, 0, 0, 1], port)), policy, capacity)
}

impl StreamServer {
    pub fn bind(addr: SocketAddr, policy: DropPolicy, capacity: usize) -> Result<Self, PipelineError> {
        let listener = TcpListener::bind(addr).map_err(|e| match e.kind() {
            ErrorKind::AddrInUse => PipelineError::PortInUse(addr.port()),
            _ => PipelineError::Io(e.to_string()),
        })?;
        let addr = listener.local_addr().map_err(|e| PipelineError::Io(e.to_string()))?;
        listener
            .set_nonblocking(true)
            .map_err(|e| PipelineError::Io(e.to_string()))?;
        let shared = Arc::new(Shared {
            clients: Mutex::new(Vec::new()),
            shutdown: AtomicBool::new(false),
            policy,
            capacity: capacity.max(1),
        });
        let acceptor = {
            let shared = shared.clone();
            thread::Builder::new()
                .name("stream-accept".into())
                .spawn(move || accept_loop(listener, shared))
                .map_err(|e| PipelineError::Io(e.to_string()))?
        };
        Ok(Self {
            addr,
            shared,
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn client_count(&self) -> usize {
        let mut clients = self.shared.clients.lock().unwrap_or_else(|e| e.into_inner());
        prune(&mut clients);
        clients.len()
    }

    /// Sends `msg` to every connected client. Serialization is skipped
    /// when nobody is listening.
    pub fn publish(&self, msg: &StampedMessage) {
        let queues: Vec<_> = {
            let mut clients = self.shared.clients.lock().unwrap_or_else(|e| e.into_inner());
            prune(&mut clients);
            clients.iter().map(|c| c.queue.clone()).collect()
        };
        if queues.is_empty() {
            return;
        }
        let line = Arc::new(encode_json_line(msg));
        for q in queues {
            // a closed queue means the client went away
            let _ = q.push(line.clone());
        }
    }

    /// Flushes client buffers and stops all threads.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
        let clients: Vec<Client> = std::mem::take(&mut *self.shared.clients.lock().unwrap_or_else(|e| e.into_inner()));
        for c in &clients {
            c.queue.close();
        }
        for mut c in clients {
            if let Some(w) = c.writer.take() {
                let _ = w.join();
            }
        }
    }
}

impl Drop for StreamServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn prune(clients: &mut Vec<Client>) {
    clients.retain_mut(|c| {
        if c.queue.is_closed() && c.queue.is_empty() {
            if let Some(w) = c.writer.take() {
                let _ = w.join();
            }
            false
        } else {
            true
        }
    });
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    while !shared.shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let queue = Arc::new(BoundedQueue::new("stream-client", shared.capacity, shared.policy));
                let writer = {
                    let queue = queue.clone();
                    thread::Builder::new()
                        .name("stream-client".into())
                        .spawn(move || client_loop(stream, queue))
                        .ok()
                };
                if writer.is_none() {
                    queue.abort();
                    continue;
                }
                shared
                    .clients
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .push(Client { queue, writer });
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(_) => thread::sleep(Duration::from_millis(5)),
        }
    }
}

fn client_loop(stream: TcpStream, queue: Arc<BoundedQueue<Arc<String>>>) {
    let _ = stream.set_nonblocking(false);
    let _ = stream.set_nodelay(true);
    let _ = stream.set_write_timeout(Some(Duration::from_secs(5)));
    let mut stream = stream;
    while let Some(line) = queue.pop() {
        if stream.write_all(line.as_bytes()).is_err() {
            break;
        }
    }
    let _ = stream.flush();
    queue.abort();
}

/// Pipeline sink that forwards every message to a [`StreamServer`].
pub struct StreamSink {
    server: Arc<StreamServer>,
}

impl StreamSink {
    pub fn new(server: Arc<StreamServer>) -> Self {
        Self { server }
    }
}

impl Sink for StreamSink {
    fn name(&self) -> String {
        format!("stream@{}", self.server.local_addr())
    }

    fn consume(&mut self, msg: &StampedMessage) -> Result<(), String> {
        self.server.publish(msg);
        Ok(())
    }
}
