//! TCP pipeline from the embedding host to a display endpoint.
//!
//! Each frame on the wire is `"SBB1"`, `u8` frame index, `u8` total frames,
//! `u32` big-endian payload length, then the payload (an image file). The
//! receiver answers every frame with one byte: `0x06` to accept or `0x15` to
//! reject, after which it drops the connection. One connection carries the
//! frames of one message.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use thiserror::Error;

use crate::codec::{Codec, DEFAULT_RGB_CHANNEL};
use crate::imageio::{read_image, Format};
use crate::key::StegoKey;

pub const WIRE_MAGIC: [u8; 4] = *b"SBB1";
pub const WIRE_HEADER_LEN: usize = 10;
pub const ACK: u8 = 0x06;
pub const NAK: u8 = 0x15;
pub const DEFAULT_ACK_TIMEOUT: Duration = Duration::from_secs(5);
/// Largest payload the receiver will buffer.
pub const MAX_PAYLOAD_LEN: u32 = 256 * 1024 * 1024;
pub const MESSAGE_FILE: &str = "message.bin";

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("could not connect to {addr}: {source}")]
    ConnectionFailed { addr: String, source: io::Error },
    #[error("no acknowledgment for frame {frame_index} within {timeout:?}")]
    AckTimeout { frame_index: u8, timeout: Duration },
    #[error("receiver rejected frame {frame_index}")]
    AckRejected { frame_index: u8 },
    #[error("receiver sent unexpected byte 0x{byte:02x} for frame {frame_index}")]
    UnexpectedAck { frame_index: u8, byte: u8 },
    #[error("receiver closed the connection before acknowledging frame {frame_index}")]
    Disconnected { frame_index: u8 },
    #[error("could not bind {addr}: {source}")]
    BindFailed { addr: String, source: io::Error },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl TransportError {
    pub fn code(&self) -> &'static str {
        match self {
            TransportError::InvalidBatch(_) => "invalid-batch",
            TransportError::ConnectionFailed { .. } => "connection-failed",
            TransportError::AckTimeout { .. } => "ack-timeout",
            TransportError::AckRejected { .. } => "ack-rejected",
            TransportError::UnexpectedAck { .. } => "unexpected-ack",
            TransportError::Disconnected { .. } => "disconnected",
            TransportError::BindFailed { .. } => "bind-failed",
            TransportError::Protocol(_) => "protocol",
            TransportError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireFrame {
    frame_index: u8,
    total_frames: u8,
    payload: Vec<u8>,
}

impl WireFrame {
    pub fn new(
        frame_index: u8,
        total_frames: u8,
        payload: Vec<u8>,
    ) -> Result<Self, TransportError> {
        if frame_index >= total_frames {
            return Err(TransportError::Protocol(format!(
                "frame index {frame_index} not below total {total_frames}"
            )));
        }
        if payload.len() > MAX_PAYLOAD_LEN as usize {
            return Err(TransportError::Protocol(format!(
                "payload of {} bytes exceeds {MAX_PAYLOAD_LEN}",
                payload.len()
            )));
        }
        Ok(WireFrame {
            frame_index,
            total_frames,
            payload,
        })
    }

    pub fn frame_index(&self) -> u8 {
        self.frame_index
    }

    pub fn total_frames(&self) -> u8 {
        self.total_frames
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.payload
    }

    pub fn header(&self) -> [u8; WIRE_HEADER_LEN] {
        encode_header(
            self.frame_index,
            self.total_frames,
            self.payload.len() as u32,
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(WIRE_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.header());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_frame(w, self.frame_index, self.total_frames, &self.payload)
    }

    /// Reads one frame. Returns `Ok(None)` on a clean end of stream at a frame
    /// boundary.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<WireFrame>, TransportError> {
        let mut header = [0u8; WIRE_HEADER_LEN];
        // Distinguish EOF before the first byte from EOF mid-header.
        let first = loop {
            match r.read(&mut header[..1]) {
                Ok(n) => break n,
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            }
        };
        if first == 0 {
            return Ok(None);
        }
        r.read_exact(&mut header[1..])?;
        if header[..4] != WIRE_MAGIC {
            return Err(TransportError::Protocol(format!(
                "bad magic {:02x?}",
                &header[..4]
            )));
        }
        let frame_index = header[4];
        let total_frames = header[5];
        let len = u32::from_be_bytes([header[6], header[7], header[8], header[9]]);
        if frame_index >= total_frames {
            return Err(TransportError::Protocol(format!(
                "frame index {frame_index} not below total {total_frames}"
            )));
        }
        if len > MAX_PAYLOAD_LEN {
            return Err(TransportError::Protocol(format!(
                "declared payload {len} exceeds {MAX_PAYLOAD_LEN}"
            )));
        }
        let mut payload = vec![0u8; len as usize];
        r.read_exact(&mut payload)?;
        Ok(Some(WireFrame {
            frame_index,
            total_frames,
            payload,
        }))
    }
}

fn encode_header(frame_index: u8, total_frames: u8, len: u32) -> [u8; WIRE_HEADER_LEN] {
    let mut h = [0u8; WIRE_HEADER_LEN];
    h[..4].copy_from_slice(&WIRE_MAGIC);
    h[4] = frame_index;
    h[5] = total_frames;
    h[6..].copy_from_slice(&len.to_be_bytes());
    h
}

fn write_frame<W: Write>(
    w: &mut W,
    frame_index: u8,
    total_frames: u8,
    payload: &[u8],
) -> io::Result<()> {
    w.write_all(&encode_header(
        frame_index,
        total_frames,
        payload.len() as u32,
    ))?;
    w.write_all(payload)?;
    w.flush()
}

#[derive(Debug, Clone)]
pub struct SendOptions {
    pub ack_timeout: Duration,
    pub connect_timeout: Duration,
}

impl Default for SendOptions {
    fn default() -> Self {
        SendOptions {
            ack_timeout: DEFAULT_ACK_TIMEOUT,
            connect_timeout: Duration::from_secs(5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameAck {
    pub frame_index: u8,
    pub bytes: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryReport {
    pub peer: SocketAddr,
    pub frames: Vec<FrameAck>,
}

impl DeliveryReport {
    pub fn all_acked(&self) -> bool {
        self.frames.iter().all(|f| f.accepted)
    }
}

pub fn send(address: &str, image_files: &[Vec<u8>]) -> Result<DeliveryReport, TransportError> {
    send_with(address, image_files, &SendOptions::default())
}

/// Streams `image_files` as frames `0..n` of one message and waits for each
/// acknowledgment.
pub fn send_with(
    address: &str,
    image_files: &[Vec<u8>],
    options: &SendOptions,
) -> Result<DeliveryReport, TransportError> {
    if image_files.is_empty() || image_files.len() > u8::MAX as usize {
        return Err(TransportError::InvalidBatch(format!(
            "need 1..=255 files, got {}",
            image_files.len()
        )));
    }
    if let Some(big) = image_files
        .iter()
        .find(|f| f.len() > MAX_PAYLOAD_LEN as usize)
    {
        return Err(TransportError::InvalidBatch(format!(
            "file of {} bytes exceeds the {MAX_PAYLOAD_LEN}-byte frame limit",
            big.len()
        )));
    }
    let mut stream = connect(address, options.connect_timeout)?;
    let peer = stream.peer_addr()?;
    stream.set_read_timeout(Some(options.ack_timeout))?;
    stream.set_nodelay(true)?;
    let total = image_files.len() as u8;
    let mut frames = Vec::with_capacity(image_files.len());
    for (i, file) in image_files.iter().enumerate() {
        let frame_index = i as u8;
        write_frame(&mut stream, frame_index, total, file)?;
        let mut ack = [0u8; 1];
        match stream.read_exact(&mut ack) {
            Ok(()) => {}
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                return Err(TransportError::AckTimeout {
                    frame_index,
                    timeout: options.ack_timeout,
                })
            }
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => {
                return Err(TransportError::Disconnected { frame_index })
            }
            Err(e) => return Err(e.into()),
        }
        match ack[0] {
            ACK => {}
            NAK => return Err(TransportError::AckRejected { frame_index }),
            byte => return Err(TransportError::UnexpectedAck { frame_index, byte }),
        }
        debug!("frame {frame_index}/{total} acknowledged by {peer}");
        frames.push(FrameAck {
            frame_index,
            bytes: file.len(),
            accepted: true,
        });
    }
    stream.shutdown(Shutdown::Write)?;
    Ok(DeliveryReport { peer, frames })
}

fn connect(address: &str, timeout: Duration) -> Result<TcpStream, TransportError> {
    let failed = |source| TransportError::ConnectionFailed {
        addr: address.to_string(),
        source,
    };
    let addrs: Vec<SocketAddr> = address.to_socket_addrs().map_err(failed)?.collect();
    let mut last = io::Error::new(ErrorKind::AddrNotAvailable, "address resolved to nothing");
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(s) => return Ok(s),
            Err(e) => last = e,
        }
    }
    Err(failed(last))
}

#[derive(Debug, Clone)]
pub struct ReceiverConfig {
    pub out_dir: PathBuf,
    /// When set, complete frame sets are decoded into `message.bin`.
    pub key: Option<StegoKey>,
    pub rgb_channel: usize,
    /// Read timeout for an idle client connection.
    pub idle_timeout: Duration,
}

impl ReceiverConfig {
    pub fn new(out_dir: impl Into<PathBuf>, key: Option<StegoKey>) -> Self {
        ReceiverConfig {
            out_dir: out_dir.into(),
            key,
            rgb_channel: DEFAULT_RGB_CHANNEL,
            idle_timeout: Duration::from_secs(30),
        }
    }
}

/// File name a received frame is persisted under.
pub fn frame_file_name(total_frames: u8, frame_index: u8, payload: &[u8]) -> String {
    let ext = Format::sniff(payload).map_or("bin", Format::extension);
    format!("frame_{total_frames}_{frame_index}.{ext}")
}

/// Display endpoint: accepts connections, persists frames and optionally
/// decodes the hidden message.
pub struct Receiver {
    listener: TcpListener,
    config: Arc<ReceiverConfig>,
    stop: Arc<AtomicBool>,
}

impl Receiver {
    pub fn bind(address: &str, config: ReceiverConfig) -> Result<Self, TransportError> {
        let listener = TcpListener::bind(address).map_err(|source| TransportError::BindFailed {
            addr: address.to_string(),
            source,
        })?;
        fs::create_dir_all(&config.out_dir)?;
        Ok(Receiver {
            listener,
            config: Arc::new(config),
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until stopped, one thread per connection.
    pub fn run(self) -> Result<(), TransportError> {
        info!(
            "receiver listening on {} (output {})",
            self.listener.local_addr()?,
            self.config.out_dir.display()
        );
        for conn in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match conn {
                Ok(s) => s,
                Err(e) => {
                    warn!("accept failed: {e}");
                    continue;
                }
            };
            let config = Arc::clone(&self.config);
            thread::spawn(move || {
                let peer = stream
                    .peer_addr()
                    .map_or_else(|_| "?".to_string(), |a| a.to_string());
                match handle_connection(stream, &config) {
                    Ok(n) => info!("{peer}: connection closed after {n} frames"),
                    Err(e) => warn!("{peer}: {e}"),
                }
            });
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> io::Result<ReceiverHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::clone(&self.stop);
        let thread = thread::spawn(move || self.run());
        Ok(ReceiverHandle { addr, stop, thread })
    }
}

pub struct ReceiverHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: JoinHandle<Result<(), TransportError>>,
}

impl ReceiverHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting new connections and waits for the accept loop to exit.
    /// Connections already in progress finish on their own threads.
    pub fn shutdown(self) -> Result<(), TransportError> {
        self.stop.store(true, Ordering::SeqCst);
        let mut wake = self.addr;
        if wake.ip().is_unspecified() {
            wake.set_ip(match wake {
                SocketAddr::V4(_) => [127, 0, 0, 1].into(),
                SocketAddr::V6(_) => std::net::Ipv6Addr::LOCALHOST.into(),
            });
        }
        let _ = TcpStream::connect_timeout(&wake, Duration::from_secs(1));
        self.thread
            .join()
            .unwrap_or_else(|_| Err(TransportError::Protocol("accept loop panicked".into())))
    }
}

/// Binds `address` and serves until the process is stopped.
pub fn serve(
    address: &str,
    out_dir: impl Into<PathBuf>,
    key: Option<StegoKey>,
) -> Result<(), TransportError> {
    Receiver::bind(address, ReceiverConfig::new(out_dir, key))?.run()
}

fn handle_connection(
    mut stream: TcpStream,
    config: &ReceiverConfig,
) -> Result<usize, TransportError> {
    stream.set_read_timeout(Some(config.idle_timeout))?;
    stream.set_nodelay(true)?;
    let mut pending: HashMap<u8, BTreeMap<u8, Vec<u8>>> = HashMap::new();
    let mut received = 0;
    loop {
        let frame = match WireFrame::read_from(&mut stream) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(received),
            Err(e @ TransportError::Protocol(_)) => {
                let _ = stream.write_all(&[NAK]);
                let _ = stream.shutdown(Shutdown::Both);
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        let started = Instant::now();
        let name = frame_file_name(frame.total_frames(), frame.frame_index(), frame.payload());
        if let Err(e) = write_atomically(&config.out_dir.join(&name), frame.payload()) {
            let _ = stream.write_all(&[NAK]);
            let _ = stream.shutdown(Shutdown::Both);
            return Err(e.into());
        }
        received += 1;
        debug!("stored {name} ({} bytes)", frame.payload().len());

        if let Some(key) = &config.key {
            let total = frame.total_frames();
            let set = pending.entry(total).or_default();
            set.insert(frame.frame_index(), frame.into_payload());
            if set.len() == total as usize {
                match decode_set(set, key, config.rgb_channel) {
                    Ok(message) => {
                        write_atomically(&config.out_dir.join(MESSAGE_FILE), &message)?;
                        info!(
                            "recovered {}-byte message from {total} frames in {:?}",
                            message.len(),
                            started.elapsed()
                        );
                    }
                    Err(e) => warn!("frame set of {total} did not decode: {e}"),
                }
            }
        }
        stream.write_all(&[ACK])?;
    }
}

fn decode_set(
    set: &BTreeMap<u8, Vec<u8>>,
    key: &StegoKey,
    rgb_channel: usize,
) -> Result<Vec<u8>, Box<dyn std::error::Error + Send + Sync>> {
    let images = set
        .values()
        .map(|bytes| read_image(bytes))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Codec::new(*key)
        .with_rgb_channel(rgb_channel)
        .extract_message(&images)?)
}

/// Writes through a temporary sibling and renames, so readers never observe a
/// partial file.
fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension(format!(
        "tmp.{}.{:?}",
        std::process::id(),
        thread::current().id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
