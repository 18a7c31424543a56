//! Live mode: the far edge streams windows as length-prefixed packets over
//! TCP; the near edge listens, reconstructs, and persists. Both sides run
//! the same per-window code as batch replay, so a loopback run reproduces
//! the batch store byte for byte.

use std::collections::VecDeque;
use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::time::Duration;

use super::config::ScenarioConfig;
use super::replay::{flag_records, load_records, prepare_model, select_one, window_groups};
use super::HarnessError;
use crate::anomaly::AnomalyHistory;
use crate::compress::{BudgetSpec, WindowBatch};
use crate::core_model::TimeWindow;
use crate::near_edge::{persist, redetect, ReconstructedStore};
use crate::wire::{self, framing};

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct FarEdgeReport {
    pub records: u64,
    pub windows_sent: u64,
    /// Windows whose packet was dropped from the send buffer before it
    /// could be transmitted.
    pub windows_dropped: u64,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct NearEdgeReport {
    pub packets: u64,
    pub points: u64,
    pub corrupt: u64,
    pub store_path: PathBuf,
}

fn stage<E: std::fmt::Display>(name: &'static str) -> impl Fn(E) -> HarnessError {
    move |e| HarnessError::Stage {
        stage: name,
        message: e.to_string(),
    }
}

fn connect_with_backoff(addr: &str, attempts: u32) -> Option<TcpStream> {
    let mut delay = Duration::from_millis(20);
    for attempt in 0..attempts {
        match TcpStream::connect(addr) {
            Ok(s) => {
                let _ = s.set_nodelay(true);
                return Some(s);
            }
            Err(_) if attempt + 1 < attempts => {
                std::thread::sleep(delay);
                delay = (delay * 2).min(Duration::from_secs(2));
            }
            Err(_) => {}
        }
    }
    None
}

struct Sender {
    addr: String,
    stream: Option<TcpStream>,
    buffer: VecDeque<Vec<u8>>,
    buffered_bytes: usize,
    capacity_bytes: usize,
    dropped: u64,
    // sends to skip before the next reconnection attempt
    cooldown: u32,
}

impl Sender {
    fn new(addr: String, capacity_bytes: usize) -> Self {
        Self {
            addr,
            stream: None,
            buffer: VecDeque::new(),
            buffered_bytes: 0,
            capacity_bytes,
            dropped: 0,
            cooldown: 0,
        }
    }

    /// Queues a packet (dropping it when the buffer is full) and tries to
    /// flush everything queued.
    fn send(&mut self, packet: Vec<u8>) {
        if self.buffered_bytes + packet.len() > self.capacity_bytes {
            self.dropped += 1; // overflow drops the newest packet
        } else {
            self.buffered_bytes += packet.len();
            self.buffer.push_back(packet);
        }
        if self.cooldown > 0 {
            self.cooldown -= 1;
            return;
        }
        if !self.flush(1) {
            self.cooldown = 4;
        }
    }

    /// Writes out everything buffered; false when the link stayed down.
    fn flush(&mut self, reconnect_attempts: u32) -> bool {
        while let Some(front) = self.buffer.front() {
            if self.stream.is_none() {
                self.stream = connect_with_backoff(&self.addr, reconnect_attempts);
                if self.stream.is_none() {
                    return false; // stays buffered; retried on a later send
                }
            }
            let stream = self.stream.as_mut().unwrap();
            match framing::write_frame(stream, front) {
                Ok(()) => {
                    self.buffered_bytes -= front.len();
                    self.buffer.pop_front();
                }
                Err(_) => {
                    self.stream = None;
                }
            }
        }
        true
    }
}

/// Far-edge process: consume the configured input, flag it, compress each
/// window under `algorithms[0]` x `fractions[0]`, and stream the packets to
/// the near edge.
pub fn run_far_edge(config: &ScenarioConfig) -> Result<FarEdgeReport, HarnessError> {
    config
        .validate()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let (mut records, _report) = load_records(config)?;
    if records.is_empty() {
        return Err(HarnessError::Input("no records survived cleaning".into()));
    }
    let model = prepare_model(config, &records)?;
    flag_records(&model, &mut records)?;
    let record_count = records.len() as u64;

    let algorithm = config.pipeline.algorithms[0];
    let fraction = config.pipeline.fractions[0];
    let budget = BudgetSpec::with_floor(fraction, config.pipeline.budget_floor)
        .map_err(stage("compress"))?;
    let groups = window_groups(&records, config.pipeline.window_seconds)?;
    let mut history = AnomalyHistory::new(config.pipeline.history_windows);
    let mut sender = Sender::new(config.live.near_addr.clone(), config.channel.queue_bytes);
    let mut windows_sent = 0;

    let (Some(&first), Some(&last)) = (groups.keys().next(), groups.keys().next_back()) else {
        return Ok(FarEdgeReport::default());
    };
    for index in first..=last {
        let window = TimeWindow::from_index(index, config.pipeline.window_seconds)
            .map_err(stage("window"))?;
        let flagged = match groups.get(&index) {
            Some(window_records) => {
                let batch = WindowBatch::new(window, window_records.iter().copied())
                    .map_err(stage("window"))?;
                let selection = select_one(
                    algorithm,
                    &batch,
                    &budget,
                    &history,
                    config.pipeline.boost_factor,
                    config.pipeline.dr_threshold_m,
                )?;
                let bytes = wire::encode(&selection, &window, config.live.far_edge_id)
                    .map_err(stage("encode"))?;
                sender.send(bytes);
                windows_sent += 1;
                batch.flagged_vessels()
            }
            None => Default::default(),
        };
        history.push_completed(index, flagged);
    }
    // final flush with a more patient reconnect budget
    sender.flush(5);
    if let Some(stream) = sender.stream.take() {
        let _ = stream.shutdown(std::net::Shutdown::Write);
    }

    Ok(FarEdgeReport {
        records: record_count,
        windows_sent,
        windows_dropped: sender.dropped + sender.buffer.len() as u64,
    })
}

/// Near-edge process bound to the configured address. With `once` the
/// server exits after the first connection closes (and is what the
/// loopback tests use); otherwise it accepts connections until killed,
/// logging a heartbeat while idle.
pub fn run_near_edge(config: &ScenarioConfig, once: bool) -> Result<NearEdgeReport, HarnessError> {
    let listener = TcpListener::bind(&config.live.near_addr)
        .map_err(|e| HarnessError::Input(format!("bind {}: {e}", config.live.near_addr)))?;
    serve_near_edge(listener, config, once)
}

/// Serves an already-bound listener; split out so tests can bind port 0.
pub fn serve_near_edge(
    listener: TcpListener,
    config: &ScenarioConfig,
    once: bool,
) -> Result<NearEdgeReport, HarnessError> {
    config
        .validate()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    std::fs::create_dir_all(&config.out_dir).map_err(stage("setup"))?;
    listener.set_nonblocking(true).map_err(stage("listen"))?;

    let mut store = ReconstructedStore::new();
    let mut report = NearEdgeReport {
        store_path: config.out_dir.join("near_store.csv"),
        ..Default::default()
    };
    let mut status_windows = 0u32;
    let mut idle_loops = 0u32;

    loop {
        match listener.accept() {
            Ok((stream, _peer)) => {
                idle_loops = 0;
                stream
                    .set_nodelay(true)
                    .and_then(|_| stream.set_nonblocking(false))
                    .map_err(stage("listen"))?;
                handle_connection(stream, config, &mut store, &mut report, &mut status_windows)?;
                if once {
                    break;
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(200));
                idle_loops += 1;
                if idle_loops.is_multiple_of(25) {
                    println!(
                        "heartbeat: windows={} packets={} points={}",
                        store.receipts.len(),
                        report.packets,
                        report.points
                    );
                }
            }
            Err(e) => return Err(stage("listen")(e)),
        }
    }

    if config.model.path.is_some() || config.model.train.is_some() {
        let originals: Vec<crate::core_model::AisRecord> =
            store.points().map(|p| p.record).collect();
        let model = prepare_model(config, &originals)?;
        redetect(&mut store, &model).map_err(stage("redetect"))?;
    }
    persist(&store, &report.store_path).map_err(stage("persist"))?;
    Ok(report)
}

fn handle_connection(
    stream: TcpStream,
    config: &ScenarioConfig,
    store: &mut ReconstructedStore,
    report: &mut NearEdgeReport,
    status_windows: &mut u32,
) -> Result<(), HarnessError> {
    let mut reader = std::io::BufReader::new(stream.try_clone().map_err(stage("listen"))?);
    loop {
        let frame = match framing::read_frame(&mut reader) {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(_) => {
                report.corrupt += 1;
                break;
            }
        };
        report.packets += 1;
        match wire::decode(&frame, config.pipeline.window_seconds) {
            Ok(packet) => {
                report.points += packet.points.len() as u64;
                store
                    .insert_packet(&packet.window, packet.edge_id, &packet.points)
                    .map_err(stage("merge"))?;
                *status_windows += 1;
                if config.live.snapshot_every_windows > 0
                    && (*status_windows).is_multiple_of(config.live.snapshot_every_windows)
                {
                    let status = config.out_dir.join("near_status.csv");
                    let line = format!(
                        "{},{},{}\n",
                        store.receipts.len(),
                        report.packets,
                        store.point_count()
                    );
                    let _ = std::fs::OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(status)
                        .and_then(|mut f| f.write_all(line.as_bytes()));
                }
            }
            Err(_) => report.corrupt += 1,
        }
    }
    let _ = stream.shutdown(std::net::Shutdown::Both);
    Ok(())
}
