//! Asynchronous manager–worker execution. Idle workers pull candidates
//! from the manager, evaluate them and return fitness with their next
//! request, so load balances naturally. Two transports sit behind one
//! interface: in-process channels and TCP; both speak the same
//! length-prefixed JSON wire format.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::colony::{evaluate_candidate, Colony, Mode};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::RnnGenome;
use crate::rnn::{FitnessReport, WORST_FITNESS};

pub const WIRE_SCHEMA_VERSION: u32 = 1;

/// Frames larger than this are treated as corrupt rather than
/// allocated.
const MAX_FRAME_LEN: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    /// An idle worker asking for work, carrying the previous
    /// assignment's result when it has one.
    WorkRequest {
        worker_id: u64,
        prev_result: Option<(String, FitnessReport)>,
    },
    /// A serialized genome plus everything the worker needs to
    /// evaluate it.
    WorkAssignment {
        genome: String,
        mode: Mode,
        epochs: usize,
        lr: f64,
        seed: u64,
    },
    Shutdown,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    version: u32,
    msg: Message,
}

/// 4-byte big-endian length prefix followed by the UTF-8 JSON
/// envelope.
pub fn encode(msg: &Message) -> Vec<u8> {
    let payload = serde_json::to_vec(&Envelope { version: WIRE_SCHEMA_VERSION, msg: msg.clone() })
        .expect("message serialization cannot fail");
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Decode one frame; framing problems (short buffer, absurd length)
/// and schema problems (bad JSON, wrong version) are distinct errors.
pub fn decode(bytes: &[u8]) -> Result<Message> {
    if bytes.len() < 4 {
        return Err(Error::Framing(format!("frame header needs 4 bytes, got {}", bytes.len())));
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
    if len > MAX_FRAME_LEN {
        return Err(Error::Framing(format!("frame length {len} exceeds limit")));
    }
    if bytes.len() != 4 + len {
        return Err(Error::Framing(format!(
            "frame length prefix says {len} but {} payload bytes follow",
            bytes.len() - 4
        )));
    }
    let env: Envelope =
        serde_json::from_slice(&bytes[4..]).map_err(|e| Error::Parse(e.to_string()))?;
    if env.version != WIRE_SCHEMA_VERSION {
        return Err(Error::UnsupportedVersion(env.version));
    }
    Ok(env.msg)
}

fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<()> {
    w.write_all(&encode(msg)).map_err(|e| Error::Transport(e.to_string()))?;
    w.flush().map_err(|e| Error::Transport(e.to_string()))
}

fn read_frame<R: Read>(r: &mut R) -> Result<Message> {
    let mut header = [0u8; 4];
    r.read_exact(&mut header).map_err(|e| Error::Transport(e.to_string()))?;
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_LEN {
        return Err(Error::Framing(format!("frame length {len} exceeds limit")));
    }
    let mut buf = vec![0u8; 4 + len];
    buf[..4].copy_from_slice(&header);
    r.read_exact(&mut buf[4..]).map_err(|e| Error::Transport(e.to_string()))?;
    decode(&buf)
}

/// Manager side of a transport: receive a request, reply to exactly
/// that requester via the returned token.
pub trait ManagerTransport {
    type Token;
    /// Block up to `timeout`; `Ok(None)` means nothing arrived.
    fn receive(&mut self, timeout: Duration) -> Result<Option<(Message, Self::Token)>>;
    fn reply(&mut self, token: Self::Token, msg: &Message) -> Result<()>;
}

/// Worker side: one blocking request/reply exchange.
pub trait WorkerTransport {
    fn request(&mut self, msg: &Message) -> Result<Message>;
}

// ---------- in-process transport ----------

type FrameAndReply = (Vec<u8>, Sender<Vec<u8>>);

pub struct InProcessManager {
    rx: Receiver<FrameAndReply>,
}

#[derive(Clone)]
pub struct InProcessWorker {
    tx: Sender<FrameAndReply>,
    reply_timeout: Duration,
}

/// A connected manager endpoint plus a cloneable worker endpoint.
pub fn in_process(reply_timeout: Duration) -> (InProcessManager, InProcessWorker) {
    let (tx, rx) = channel();
    (InProcessManager { rx }, InProcessWorker { tx, reply_timeout })
}

impl ManagerTransport for InProcessManager {
    type Token = Sender<Vec<u8>>;

    fn receive(&mut self, timeout: Duration) -> Result<Option<(Message, Self::Token)>> {
        match self.rx.recv_timeout(timeout) {
            Ok((frame, token)) => Ok(Some((decode(&frame)?, token))),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::Transport("all workers disconnected".into()))
            }
        }
    }

    fn reply(&mut self, token: Self::Token, msg: &Message) -> Result<()> {
        token
            .send(encode(msg))
            .map_err(|_| Error::Transport("worker hung up before reply".into()))
    }
}

impl WorkerTransport for InProcessWorker {
    fn request(&mut self, msg: &Message) -> Result<Message> {
        let (reply_tx, reply_rx) = channel();
        self.tx
            .send((encode(msg), reply_tx))
            .map_err(|_| Error::Transport("manager is gone".into()))?;
        match reply_rx.recv_timeout(self.reply_timeout) {
            Ok(frame) => decode(&frame),
            Err(_) => Err(Error::Transport("no reply from manager".into())),
        }
    }
}

// ---------- TCP transport ----------

/// Listens on a socket; every connection gets a forwarding thread so
/// the single-threaded manager loop sees one uniform request queue.
pub struct TcpManager {
    rx: Receiver<FrameAndReply>,
    stop: Arc<AtomicBool>,
    local_addr: SocketAddr,
}

impl TcpManager {
    pub fn bind<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        let listener = TcpListener::bind(addr).map_err(|e| Error::Transport(e.to_string()))?;
        let local_addr = listener.local_addr().map_err(|e| Error::Transport(e.to_string()))?;
        listener
            .set_nonblocking(true)
            .map_err(|e| Error::Transport(e.to_string()))?;
        let (tx, rx) = channel::<FrameAndReply>();
        let stop = Arc::new(AtomicBool::new(false));
        let stop_accept = stop.clone();
        std::thread::spawn(move || {
            while !stop_accept.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let tx = tx.clone();
                        std::thread::spawn(move || connection_pump(stream, tx));
                    }
                    Err(ref e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(10));
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(TcpManager { rx, stop, local_addr })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }
}

impl Drop for TcpManager {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
    }
}

/// Pump one worker connection: read a frame, hand it to the manager
/// queue, write the routed reply back. Exits when the peer closes.
fn connection_pump(mut stream: TcpStream, tx: Sender<FrameAndReply>) {
    loop {
        let mut header = [0u8; 4];
        if stream.read_exact(&mut header).is_err() {
            return;
        }
        let len = u32::from_be_bytes(header) as usize;
        if len > MAX_FRAME_LEN {
            return;
        }
        let mut frame = vec![0u8; 4 + len];
        frame[..4].copy_from_slice(&header);
        if stream.read_exact(&mut frame[4..]).is_err() {
            return;
        }
        let (reply_tx, reply_rx) = channel();
        if tx.send((frame, reply_tx)).is_err() {
            return;
        }
        let Ok(reply) = reply_rx.recv() else { return };
        if stream.write_all(&reply).and_then(|_| stream.flush()).is_err() {
            return;
        }
    }
}

impl ManagerTransport for TcpManager {
    type Token = Sender<Vec<u8>>;

    fn receive(&mut self, timeout: Duration) -> Result<Option<(Message, Self::Token)>> {
        match self.rx.recv_timeout(timeout) {
            Ok((frame, token)) => Ok(Some((decode(&frame)?, token))),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::Transport("listener thread died".into()))
            }
        }
    }

    fn reply(&mut self, token: Self::Token, msg: &Message) -> Result<()> {
        token
            .send(encode(msg))
            .map_err(|_| Error::Transport("worker connection closed before reply".into()))
    }
}

pub struct TcpWorker {
    stream: TcpStream,
}

impl TcpWorker {
    pub fn connect<A: ToSocketAddrs>(addr: A, timeout: Duration) -> Result<Self> {
        let addr = addr
            .to_socket_addrs()
            .map_err(|e| Error::Transport(e.to_string()))?
            .next()
            .ok_or_else(|| Error::Transport("address resolves to nothing".into()))?;
        let stream = TcpStream::connect_timeout(&addr, timeout)
            .map_err(|e| Error::Transport(e.to_string()))?;
        stream
            .set_nodelay(true)
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(TcpWorker { stream })
    }
}

impl WorkerTransport for TcpWorker {
    fn request(&mut self, msg: &Message) -> Result<Message> {
        write_frame(&mut self.stream, msg)?;
        read_frame(&mut self.stream)
    }
}

// ---------- manager ----------

/// Manager protocol state around a colony: hands out exactly
/// `iterations` assignments, applies results as they come back, and
/// forgets assignments whose worker never returns.
#[derive(Clone)]
pub struct Manager {
    colony: Colony,
    outstanding: HashMap<String, (RnnGenome, f64)>,
    handed_out: usize,
}

impl Manager {
    pub fn new(colony: Colony) -> Self {
        Manager { colony, outstanding: HashMap::new(), handed_out: 0 }
    }

    pub fn colony(&self) -> &Colony {
        &self.colony
    }

    pub fn into_colony(self) -> Colony {
        self.colony
    }

    /// All assignments handed out and every outstanding one resolved.
    pub fn finished(&self) -> bool {
        self.handed_out >= self.colony.config().iterations && self.outstanding.is_empty()
    }

    /// Handle one worker request and produce the reply.
    pub fn handle_request(&mut self, msg: &Message) -> Result<Message> {
        let Message::WorkRequest { prev_result, .. } = msg else {
            return Err(Error::Transport(format!("manager expected a work request, got {msg:?}")));
        };
        if let Some((hash, report)) = prev_result {
            // unknown hashes are results for forgotten (timed-out or
            // corrupt) assignments; steady-state tolerates the loss
            if let Some((genome, gen_time)) = self.outstanding.remove(hash) {
                self.colony.on_result(genome, report, gen_time);
            }
        }
        if self.handed_out >= self.colony.config().iterations {
            return Ok(Message::Shutdown);
        }
        let (genome, gen_time) = self.colony.generate_candidate()?;
        let cfg = self.colony.config();
        let reply = Message::WorkAssignment {
            genome: genome.serialize(),
            mode: cfg.mode,
            epochs: cfg.epochs,
            lr: cfg.lr,
            seed: cfg.seed,
        };
        self.outstanding.insert(genome.hash(), (genome, gen_time));
        self.handed_out += 1;
        Ok(reply)
    }

    /// Drop in-flight assignments (worker timeout policy: forget,
    /// never reissue).
    pub fn forget_outstanding(&mut self) {
        self.outstanding.clear();
    }
}

/// Serve requests until the budget is spent and in-flight results are
/// drained; a quiet period of `timeout` forgets lost work and ends the
/// run. `on_progress` fires after every applied result.
pub fn manager_loop<T: ManagerTransport>(
    manager: &mut Manager,
    transport: &mut T,
    timeout: Duration,
    mut on_progress: Option<&mut dyn FnMut(&Colony)>,
) -> Result<()> {
    while !manager.finished() {
        match transport.receive(timeout)? {
            Some((msg, token)) => {
                let before = manager.colony.records().len();
                let reply = manager.handle_request(&msg)?;
                // a vanished worker is its own timeout; ignore
                let _ = transport.reply(token, &reply);
                if manager.colony.records().len() > before {
                    if let Some(cb) = on_progress.as_mut() {
                        cb(&manager.colony);
                    }
                }
            }
            None => {
                manager.forget_outstanding();
                if manager.handed_out < manager.colony.config().iterations {
                    return Err(Error::Transport(
                        "no worker activity before the request timeout".into(),
                    ));
                }
            }
        }
    }
    Ok(())
}

// ---------- worker ----------

/// Request/evaluate loop; returns the number of genomes evaluated.
/// A corrupt assignment reports the sentinel instead of crashing.
pub fn worker_loop<T: WorkerTransport>(
    transport: &mut T,
    worker_id: u64,
    ds: &Dataset,
) -> Result<usize> {
    let mut prev_result: Option<(String, FitnessReport)> = None;
    let mut evaluated = 0usize;
    loop {
        let reply = transport.request(&Message::WorkRequest {
            worker_id,
            prev_result: prev_result.take(),
        })?;
        match reply {
            Message::Shutdown => return Ok(evaluated),
            Message::WorkAssignment { genome, mode, epochs, lr, .. } => {
                match RnnGenome::deserialize(&genome) {
                    Ok(genome) => {
                        let hash = genome.hash();
                        let report = evaluate_candidate(&genome, ds, mode, epochs, lr)?;
                        evaluated += 1;
                        prev_result = Some((hash, report));
                    }
                    Err(_) => {
                        // the manager will not recognize this hash and
                        // the candidate is simply lost
                        prev_result = Some((
                            String::from("corrupt-assignment"),
                            FitnessReport {
                                mse: WORST_FITNESS,
                                eval_wall_time: 0.0,
                                train_wall_time: 0.0,
                                epochs_used: 0,
                                numerical_failure: true,
                            },
                        ));
                    }
                }
            }
            other => {
                return Err(Error::Transport(format!("worker expected assignment, got {other:?}")))
            }
        }
    }
}
