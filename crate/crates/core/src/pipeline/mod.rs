//! In-process staged pipeline: source -> super-resolution -> segmentation
//! -> sinks. Each stage is a worker thread; stages talk only through
//! bounded queues of immutable, sequence-numbered messages.

mod queue;
mod stream;

pub use queue::{BoundedQueue, DropPolicy, EdgeStats};
pub use stream::{encode_json_line, serve_stream, StreamServer, StreamSink};

use std::any::Any;
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{low_res_cloud, LatencyStats, SceneSpec};
use crate::io;
use crate::rangeview::{project, PointCloud, ProjectionConfig, RangeImage};
use crate::sampling::RowSelection;
use crate::segment::{labels_to_cloud, ClassMap, GeometricSegmenter, LabelImage, LabeledCloud, Segmenter, SegmenterConfig};
use crate::solver::{superresolve, SolverConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("io: {0}")]
    Io(String),
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("stage {stage} panicked: {message}")]
    StagePanicked {
        stage: String,
        message: String,
        report: Box<RunReport>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    PointCloud(PointCloud),
    RangeImage(RangeImage),
    LabelImage(LabelImage),
    LabeledCloud(LabeledCloud),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::PointCloud(_) => "point_cloud",
            Payload::RangeImage(_) => "range_image",
            Payload::LabelImage(_) => "label_image",
            Payload::LabeledCloud(_) => "labeled_cloud",
        }
    }

    /// Points carried by cloud payloads, pixels otherwise.
    pub fn len(&self) -> usize {
        match self {
            Payload::PointCloud(c) => c.len(),
            Payload::RangeImage(i) => i.ranges().len(),
            Payload::LabelImage(l) => l.labels.len(),
            Payload::LabeledCloud(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct StampedMessage {
    pub seq: u64,
    pub stamp_ns: u64,
    pub payload: Arc<Payload>,
}

/// Stage identifier passed to [`StageHook`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Source,
    SuperResolution,
    Segmentation,
    Sink(usize),
}

impl Stage {
    fn name(&self) -> String {
        match self {
            Stage::Source => "source".into(),
            Stage::SuperResolution => "sr".into(),
            Stage::Segmentation => "segment".into(),
            Stage::Sink(i) => format!("sink{i}"),
        }
    }
}

/// Called before a stage handles message `seq`; used to inject delays and
/// faults in tests.
pub type StageHook = Arc<dyn Fn(Stage, u64) + Send + Sync>;

pub trait Sink: Send {
    fn name(&self) -> String;
    fn consume(&mut self, msg: &StampedMessage) -> Result<(), String>;
    fn finish(&mut self) -> Result<(), String> {
        Ok(())
    }
}

/// Keeps every message in memory; the handle stays readable after the run.
#[derive(Clone, Default)]
pub struct CollectSink {
    pub messages: Arc<Mutex<Vec<StampedMessage>>>,
}

impl CollectSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn take(&self) -> Vec<StampedMessage> {
        std::mem::take(&mut *self.messages.lock().unwrap_or_else(|e| e.into_inner()))
    }
}

impl Sink for CollectSink {
    fn name(&self) -> String {
        "collect".into()
    }

    fn consume(&mut self, msg: &StampedMessage) -> Result<(), String> {
        self.messages.lock().unwrap_or_else(|e| e.into_inner()).push(msg.clone());
        Ok(())
    }
}

/// Writes each labeled cloud as `<seq>.bin` plus SemanticKITTI `<seq>.label`.
pub struct DirectorySink {
    dir: PathBuf,
    classes: ClassMap,
}

impl DirectorySink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| PipelineError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            classes: ClassMap::default(),
        })
    }
}

impl Sink for DirectorySink {
    fn name(&self) -> String {
        format!("dir:{}", self.dir.display())
    }

    fn consume(&mut self, msg: &StampedMessage) -> Result<(), String> {
        let Payload::LabeledCloud(lc) = msg.payload.as_ref() else {
            return Ok(());
        };
        let stem = self.dir.join(format!("{:06}", msg.seq));
        io::write_kitti_bin(&lc.cloud, stem.with_extension("bin")).map_err(|e| e.to_string())?;
        io::write_labels(&lc.kitti_labels(&self.classes), stem.with_extension("label")).map_err(|e| e.to_string())
    }
}

/// Where scans come from.
#[derive(Debug, Clone)]
pub enum SourceSpec {
    /// Sorted `.bin` files of a directory.
    Directory(PathBuf),
    /// `scans` low-resolution scans of [`SceneSpec::urban`] scenes.
    Synthetic { scans: usize, seed: u64, noise_sigma: f64 },
    Clouds(Vec<PointCloud>),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Rate {
    #[default]
    MaxSpeed,
    Hz(f64),
}

/// Stage wiring and queueing parameters.
pub struct NodeGraph {
    pub sinks: Vec<Box<dyn Sink>>,
    pub queue_capacity: usize,
    pub drop_policy: DropPolicy,
    /// Low-resolution projection of incoming scans.
    pub projection: ProjectionConfig,
    pub selection: RowSelection,
    pub hook: Option<StageHook>,
}

impl NodeGraph {
    /// 16-row input, stride-4 selection into 64 rows, capacity 2.
    pub fn new(drop_policy: DropPolicy) -> Self {
        Self {
            sinks: Vec::new(),
            queue_capacity: 2,
            drop_policy,
            projection: ProjectionConfig::low_res(),
            selection: RowSelection::uniform(64, 16, 0).expect("64 rows divide into 16"),
            hook: None,
        }
    }

    pub fn with_sink(mut self, sink: impl Sink + 'static) -> Self {
        self.sinks.push(Box::new(sink));
        self
    }

    pub fn with_hook(mut self, hook: StageHook) -> Self {
        self.hook = Some(hook);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub processed: u64,
    pub errors: u64,
    pub latency: LatencyStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scans_produced: u64,
    /// Scans that left the segmentation stage.
    pub scans_completed: u64,
    pub wall_time_s: f64,
    /// `scans_completed / wall_time_s`.
    pub fps: f64,
    pub drop_policy: DropPolicy,
    pub queue_capacity: usize,
    pub stages: BTreeMap<String, StageReport>,
    pub edges: Vec<EdgeStats>,
    pub errors: Vec<String>,
}

impl RunReport {
    pub fn total_dropped(&self) -> u64 {
        self.edges.iter().map(|e| e.dropped).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run report serializes")
    }
}

type Edge = Arc<BoundedQueue<StampedMessage>>;

struct StageOutcome {
    stage: Stage,
    latencies_ms: Vec<f64>,
    errors: Vec<String>,
    panic: Option<String>,
}

fn panic_message(p: Box<dyn Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".into()
    }
}

/// Pushes to every output; false once any output is closed.
fn fan_out(outputs: &[Edge], msg: StampedMessage) -> bool {
    let mut ok = true;
    for q in outputs {
        ok &= q.push(msg.clone()).is_ok();
    }
    ok
}

/// Runs a message-transforming stage until its input is drained or a
/// downstream edge closes.
fn run_stage(
    stage: Stage,
    input: Edge,
    outputs: Vec<Edge>,
    hook: Option<StageHook>,
    all_edges: Vec<Edge>,
    mut work: impl FnMut(&StampedMessage) -> Result<Option<Payload>, String>,
) -> StageOutcome {
    let mut out = StageOutcome {
        stage,
        latencies_ms: Vec::new(),
        errors: Vec::new(),
        panic: None,
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        while let Some(msg) = input.pop() {
            if let Some(h) = &hook {
                h(stage, msg.seq);
            }
            let t = Instant::now();
            let produced = work(&msg);
            out.latencies_ms.push(t.elapsed().as_secs_f64() * 1e3);
            match produced {
                Ok(Some(payload)) => {
                    let next = StampedMessage {
                        seq: msg.seq,
                        stamp_ns: msg.stamp_ns,
                        payload: Arc::new(payload),
                    };
                    if !fan_out(&outputs, next) {
                        input.abort();
                        break;
                    }
                }
                Ok(None) => {}
                Err(e) => out.errors.push(format!("{} seq {}: {e}", stage.name(), msg.seq)),
            }
        }
    }));
    if let Err(p) = result {
        out.panic = Some(panic_message(p));
        for e in &all_edges {
            e.abort();
        }
    }
    for q in &outputs {
        q.close();
    }
    out
}

fn source_iter(source: SourceSpec, hi: ProjectionConfig, sel: RowSelection) -> Box<dyn Iterator<Item = Result<PointCloud, String>> + Send> {
    match source {
        SourceSpec::Clouds(c) => Box::new(c.into_iter().map(Ok)),
        SourceSpec::Directory(dir) => match io::list_scans(&dir) {
            Ok(paths) => Box::new(paths.into_iter().enumerate().map(|(i, p)| {
                io::read_kitti_bin(&p)
                    .map(|mut c| {
                        c.stamp = i as u64 * 100_000_000;
                        c
                    })
                    .map_err(|e| e.to_string())
            })),
            Err(e) => Box::new(std::iter::once(Err(e.to_string()))),
        },
        SourceSpec::Synthetic { scans, seed, noise_sigma } => Box::new((0..scans).map(move |i| {
            let scene = SceneSpec::urban(seed.wrapping_add(i as u64), noise_sigma);
            low_res_cloud(&scene, &hi, &sel)
                .map(|mut c| {
                    c.stamp = i as u64 * 100_000_000;
                    c
                })
                .map_err(|e| e.to_string())
        })),
    }
}

/// Runs every scan of `source` through projection, super-resolution,
/// segmentation and back-projection, delivering labeled clouds to the
/// graph's sinks in sequence order.
pub fn run_pipeline(
    source: SourceSpec,
    graph: NodeGraph,
    solver_cfg: &SolverConfig,
    seg_cfg: &SegmenterConfig,
    rate: Rate,
) -> Result<RunReport, PipelineError> {
    solver_cfg.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let segmenter = GeometricSegmenter::new(*seg_cfg).map_err(|e| PipelineError::Config(e.to_string()))?;
    graph
        .projection
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    if graph.selection.h_lo() != graph.projection.height {
        return Err(PipelineError::Config(format!(
            "selection observes {} rows but the projection has {}",
            graph.selection.h_lo(),
            graph.projection.height
        )));
    }
    if graph.queue_capacity == 0 {
        return Err(PipelineError::Config("queue_capacity must be >= 1".into()));
    }
    if let Rate::Hz(hz) = rate {
        if !(hz > 0.0 && hz.is_finite()) {
            return Err(PipelineError::Config(format!("rate must be > 0 Hz, got {hz}")));
        }
    }

    let NodeGraph {
        sinks,
        queue_capacity,
        drop_policy,
        projection,
        selection,
        hook,
    } = graph;
    let hi = projection.with_height(selection.h_hi());
    let edge = |name: String| Arc::new(BoundedQueue::new(name, queue_capacity, drop_policy));
    let to_sr = edge("source->sr".into());
    let to_seg = edge("sr->segment".into());
    let sink_names: Vec<String> = sinks.iter().map(|s| s.name()).collect();
    let to_sinks: Vec<Edge> = sink_names.iter().map(|n| edge(format!("segment->{n}"))).collect();
    let mut all_edges = vec![to_sr.clone(), to_seg.clone()];
    all_edges.extend(to_sinks.iter().cloned());

    let start = Instant::now();
    let produced = Arc::new(Mutex::new((0u64, Vec::<String>::new(), None::<String>)));

    thread::scope(|scope| {
        let source_handle = {
            let out = to_sr.clone();
            let hook = hook.clone();
            let produced = produced.clone();
            let all_edges = all_edges.clone();
            let items = source_iter(source, hi, selection.clone());
            scope.spawn(move || {
                let res = catch_unwind(AssertUnwindSafe(|| {
                    let period = match rate {
                        Rate::Hz(hz) => Some(Duration::from_secs_f64(1.0 / hz)),
                        Rate::MaxSpeed => None,
                    };
                    let t0 = Instant::now();
                    let mut seq = 0u64;
                    for (i, item) in items.enumerate() {
                        if let Some(p) = period {
                            let due = t0 + p.mul_f64(i as f64);
                            let now = Instant::now();
                            if due > now {
                                thread::sleep(due - now);
                            }
                        }
                        let cloud = match item {
                            Ok(c) => c,
                            Err(e) => {
                                produced.lock().unwrap_or_else(|e| e.into_inner()).1.push(format!("source: {e}"));
                                continue;
                            }
                        };
                        if let Some(h) = &hook {
                            h(Stage::Source, seq);
                        }
                        let msg = StampedMessage {
                            seq,
                            stamp_ns: cloud.stamp,
                            payload: Arc::new(Payload::PointCloud(cloud)),
                        };
                        if out.push(msg).is_err() {
                            break;
                        }
                        seq += 1;
                        produced.lock().unwrap_or_else(|e| e.into_inner()).0 = seq;
                    }
                }));
                if let Err(p) = res {
                    produced.lock().unwrap_or_else(|e| e.into_inner()).2 = Some(panic_message(p));
                    for e in &all_edges {
                        e.abort();
                    }
                }
                out.close();
            })
        };

        let sr_handle = {
            let (input, output) = (to_sr.clone(), to_seg.clone());
            let (hook, all_edges, selection) = (hook.clone(), all_edges.clone(), selection.clone());
            scope.spawn(move || {
                run_stage(Stage::SuperResolution, input, vec![output], hook, all_edges, |msg| {
                    let Payload::PointCloud(cloud) = msg.payload.as_ref() else {
                        return Err(format!("unexpected {} payload", msg.payload.kind()));
                    };
                    let s = project(cloud, &projection);
                    let (t_hat, _) = superresolve(&s, &selection, solver_cfg).map_err(|e| e.to_string())?;
                    Ok(Some(Payload::RangeImage(t_hat)))
                })
            })
        };

        let seg_handle = {
            let (input, outputs) = (to_seg.clone(), to_sinks.clone());
            let (hook, all_edges) = (hook.clone(), all_edges.clone());
            scope.spawn(move || {
                run_stage(Stage::Segmentation, input, outputs, hook, all_edges, |msg| {
                    let Payload::RangeImage(img) = msg.payload.as_ref() else {
                        return Err(format!("unexpected {} payload", msg.payload.kind()));
                    };
                    let labels = segmenter.segment(img).map_err(|e| e.to_string())?;
                    let mut lc = labels_to_cloud(img, &labels).map_err(|e| e.to_string())?;
                    lc.cloud.stamp = msg.stamp_ns;
                    Ok(Some(Payload::LabeledCloud(lc)))
                })
            })
        };

        let sink_handles: Vec<_> = sinks
            .into_iter()
            .zip(to_sinks.iter().cloned())
            .enumerate()
            .map(|(k, (mut sink, input))| {
                let (hook, all_edges) = (hook.clone(), all_edges.clone());
                scope.spawn(move || {
                    let mut outcome = run_stage(Stage::Sink(k), input, Vec::new(), hook, all_edges, |msg| {
                        sink.consume(msg).map(|_| None)
                    });
                    if let Err(e) = sink.finish() {
                        outcome.errors.push(format!("sink{k} finish: {e}"));
                    }
                    outcome
                })
            })
            .collect();

        let _ = source_handle.join();
        let mut outcomes = vec![
            sr_handle.join().unwrap_or_else(|_| unreachable_outcome(Stage::SuperResolution)),
            seg_handle.join().unwrap_or_else(|_| unreachable_outcome(Stage::Segmentation)),
        ];
        for (k, h) in sink_handles.into_iter().enumerate() {
            outcomes.push(h.join().unwrap_or_else(|_| unreachable_outcome(Stage::Sink(k))));
        }

        let wall = start.elapsed().as_secs_f64();
        let (scans_produced, source_errors, source_panic) = std::mem::take(&mut *produced.lock().unwrap_or_else(|e| e.into_inner()));
        let mut report = RunReport {
            scans_produced,
            wall_time_s: wall,
            drop_policy,
            queue_capacity,
            edges: all_edges.iter().map(|e| e.stats()).collect(),
            errors: source_errors,
            ..Default::default()
        };
        let mut first_panic = source_panic.map(|m| ("source".to_string(), m));
        for o in outcomes {
            let name = match o.stage {
                Stage::Sink(k) => format!("sink:{}", sink_names[k]),
                s => s.name(),
            };
            if o.stage == Stage::Segmentation {
                report.scans_completed = o.latencies_ms.len() as u64 - o.errors.len() as u64;
            }
            report.stages.insert(
                name.clone(),
                StageReport {
                    processed: o.latencies_ms.len() as u64,
                    errors: o.errors.len() as u64,
                    latency: LatencyStats::from_durations_ms(&o.latencies_ms),
                },
            );
            report.errors.extend(o.errors);
            if let Some(m) = o.panic {
                report.errors.push(format!("{name} panicked: {m}"));
                first_panic.get_or_insert((name, m));
            }
        }
        report.fps = if wall > 0.0 {
            report.scans_completed as f64 / wall
        } else {
            0.0
        };
        match first_panic {
            Some((stage, message)) => Err(PipelineError::StagePanicked {
                stage,
                message,
                report: Box::new(report),
            }),
            None => Ok(report),
        }
    })
}

fn unreachable_outcome(stage: Stage) -> StageOutcome {
    // run_stage catches panics itself, so a join error only follows a
    // panic in the outcome bookkeeping
    StageOutcome {
        stage,
        latencies_ms: Vec::new(),
        errors: Vec::new(),
        panic: Some("stage thread aborted".into()),
    }
}
