//! Evaluation metrics over sliding prequential windows and full datasets:
//! accuracy, statistical parity difference, average odds difference, burden.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{FeamoeError, Result};
use crate::loss::StreamInstance;
use crate::model::MixtureModel;

/// Cold-flag bits: a set bit means the metric had an empty denominator and
/// was reported as 0.
pub mod cold {
    pub const SPD: u8 = 0b0001;
    pub const AOD: u8 = 0b0010;
    pub const BURDEN: u8 = 0b0100;
    pub const ACCURACY: u8 = 0b1000;
}

/// One scored observation kept by a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowEntry {
    pub predicted: u8,
    pub label: u8,
    pub group: u8,
    pub distance: f64,
}

/// Sliding window of recent predictions with incrementally maintained counts
/// per (group, label, prediction) cell and per-group distance sums over
/// negatively classified entries.
#[derive(Debug, Clone)]
pub struct MetricsWindow {
    capacity: usize,
    ring: VecDeque<WindowEntry>,
    counts: [[[u64; 2]; 2]; 2],
    neg_dist_sum: [f64; 2],
    correct: u64,
}

impl MetricsWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(FeamoeError::InvalidConfig("window capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            ring: VecDeque::with_capacity(capacity.min(1 << 20)),
            counts: [[[0; 2]; 2]; 2],
            neg_dist_sum: [0.0, 0.0],
            correct: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &WindowEntry> {
        self.ring.iter()
    }

    /// Insert one entry, evicting the oldest when full.
    pub fn push(&mut self, entry: WindowEntry) {
        if self.ring.len() == self.capacity {
            let old = self.ring.pop_front().expect("non-empty at capacity");
            self.apply(&old, -1);
        }
        self.apply(&entry, 1);
        self.ring.push_back(entry);
    }

    fn apply(&mut self, e: &WindowEntry, sign: i64) {
        let cell = &mut self.counts[e.group as usize][e.label as usize][e.predicted as usize];
        *cell = cell.checked_add_signed(sign).expect("count underflow");
        if e.predicted == 0 {
            self.neg_dist_sum[e.group as usize] += sign as f64 * e.distance;
        }
        if e.predicted == e.label {
            self.correct = self.correct.checked_add_signed(sign).expect("count underflow");
        }
    }

    fn group_total(&self, group: usize) -> u64 {
        self.counts[group].iter().flatten().sum()
    }

    fn group_positive_predictions(&self, group: usize) -> u64 {
        self.counts[group][0][1] + self.counts[group][1][1]
    }

    fn neg_count(&self, group: usize) -> u64 {
        self.counts[group][0][0] + self.counts[group][1][0]
    }

    /// |P(pred=1 | group 0) - P(pred=1 | group 1)|; cold when a group is absent.
    pub fn spd(&self) -> (f64, bool) {
        let n0 = self.group_total(0);
        let n1 = self.group_total(1);
        if n0 == 0 || n1 == 0 {
            return (0.0, true);
        }
        let r0 = self.group_positive_predictions(0) as f64 / n0 as f64;
        let r1 = self.group_positive_predictions(1) as f64 / n1 as f64;
        ((r0 - r1).abs(), false)
    }

    /// |0.5 ((FPR0-FPR1) + (TPR0-TPR1))|; rates with empty denominators count
    /// as 0 and set the cold flag.
    pub fn aod(&self) -> (f64, bool) {
        let mut cold = false;
        let mut rate = |group: usize, label: usize| -> f64 {
            let denom = self.counts[group][label][0] + self.counts[group][label][1];
            if denom == 0 {
                cold = true;
                0.0
            } else {
                self.counts[group][label][1] as f64 / denom as f64
            }
        };
        let tpr0 = rate(0, 1);
        let tpr1 = rate(1, 1);
        let fpr0 = rate(0, 0);
        let fpr1 = rate(1, 0);
        ((0.5 * ((fpr0 - fpr1) + (tpr0 - tpr1))).abs(), cold)
    }

    /// |mean distance of negatively classified group-0 entries - same for
    /// group 1|, exact window means; cold when either group has none.
    pub fn burden(&self) -> (f64, bool) {
        let n0 = self.neg_count(0);
        let n1 = self.neg_count(1);
        if n0 == 0 || n1 == 0 {
            return (0.0, true);
        }
        let m0 = self.neg_dist_sum[0] / n0 as f64;
        let m1 = self.neg_dist_sum[1] / n1 as f64;
        ((m0 - m1).abs(), false)
    }

    /// Fraction of entries with prediction equal to label; cold when empty.
    pub fn accuracy(&self) -> (f64, bool) {
        if self.ring.is_empty() {
            (0.0, true)
        } else {
            (self.correct as f64 / self.ring.len() as f64, false)
        }
    }

    /// Snapshot all metrics for the window covering stream positions
    /// [window_start, window_end).
    pub fn report(&self, window_start: u64, window_end: u64, segment_index: u64) -> MetricsReport {
        let (accuracy, acc_cold) = self.accuracy();
        let (spd, spd_cold) = self.spd();
        let (aod, aod_cold) = self.aod();
        let (burden, burden_cold) = self.burden();
        let mut cold_flags = 0;
        if spd_cold {
            cold_flags |= cold::SPD;
        }
        if aod_cold {
            cold_flags |= cold::AOD;
        }
        if burden_cold {
            cold_flags |= cold::BURDEN;
        }
        if acc_cold {
            cold_flags |= cold::ACCURACY;
        }
        MetricsReport {
            window_start,
            window_end,
            accuracy,
            spd,
            aod,
            burden,
            cold_flags,
            segment_index,
        }
    }
}

/// Metrics for one window or dataset; fairness values are absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    pub window_start: u64,
    pub window_end: u64,
    pub accuracy: f64,
    pub spd: f64,
    pub aod: f64,
    pub burden: f64,
    pub cold_flags: u8,
    pub segment_index: u64,
}

/// Score a full dataset in one pass (window = everything).
pub fn evaluate_dataset(model: &MixtureModel, instances: &[StreamInstance]) -> Result<MetricsReport> {
    if instances.is_empty() {
        return Err(FeamoeError::EmptyDataset);
    }
    let mut window = MetricsWindow::new(instances.len())?;
    for inst in instances {
        let out = model.forward(&inst.features)?;
        let predicted = u8::from(out.mixture_probability >= 0.5);
        let distance = model.boundary_distance_from_output(&out).value;
        window.push(WindowEntry { predicted, label: inst.label, group: inst.group, distance });
    }
    Ok(window.report(0, instances.len() as u64, 0))
}

/// Receives prequential observations from the trainer: each instance's score
/// is recorded strictly before that instance updates the model.
pub trait MetricsSink {
    fn observe(&mut self, predicted: u8, label: u8, group: u8, distance: f64);
    fn segment_boundary(&mut self) {}
}

/// Sink that discards everything.
pub struct NullSink;

impl MetricsSink for NullSink {
    fn observe(&mut self, _predicted: u8, _label: u8, _group: u8, _distance: f64) {}
}

/// Sliding-window sink emitting a [`MetricsReport`] every `emit_every`
/// observations (report windows overlap when `emit_every` is smaller than
/// the window size).
pub struct PrequentialTracker {
    window: MetricsWindow,
    emit_every: u64,
    seen: u64,
    segment_index: u64,
    last_emit: u64,
    reports: Vec<MetricsReport>,
}

impl PrequentialTracker {
    pub fn new(window_size: usize, emit_every: u64) -> Result<Self> {
        if emit_every == 0 {
            return Err(FeamoeError::InvalidConfig("emit cadence must be >= 1".into()));
        }
        Ok(Self {
            window: MetricsWindow::new(window_size)?,
            emit_every,
            seen: 0,
            segment_index: 0,
            last_emit: 0,
            reports: Vec::new(),
        })
    }

    /// Window covering the last W observations, positions [seen - len, seen).
    fn emit(&mut self) {
        let start = self.seen - self.window.len() as u64;
        self.reports.push(self.window.report(start, self.seen, self.segment_index));
        self.last_emit = self.seen;
    }

    /// Emit a final report for any observations since the last cadence point.
    pub fn finalize(&mut self) {
        if self.seen > self.last_emit {
            self.emit();
        }
    }

    pub fn reports(&self) -> &[MetricsReport] {
        &self.reports
    }

    pub fn into_reports(self) -> Vec<MetricsReport> {
        self.reports
    }

    pub fn window(&self) -> &MetricsWindow {
        &self.window
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }
}

impl MetricsSink for PrequentialTracker {
    fn observe(&mut self, predicted: u8, label: u8, group: u8, distance: f64) {
        self.window.push(WindowEntry { predicted, label, group, distance });
        self.seen += 1;
        if self.seen % self.emit_every == 0 {
            self.emit();
        }
    }

    fn segment_boundary(&mut self) {
        self.segment_index += 1;
    }
}

pub const REPORT_CSV_HEADER: &str =
    "windowStart,windowEnd,accuracy,spd,aod,burden,coldFlags,segmentIndex";

/// Write reports as CSV with the fixed column order
/// windowStart,windowEnd,accuracy,spd,aod,burden,coldFlags,segmentIndex.
pub fn write_reports_csv<W: Write>(mut w: W, reports: &[MetricsReport]) -> Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.window_start, r.window_end, r.accuracy, r.spd, r.aod, r.burden, r.cold_flags, r.segment_index
        )?;
    }
    Ok(())
}

/// Write reports as JSON lines, one object per report.
pub fn write_reports_jsonl<W: Write>(mut w: W, reports: &[MetricsReport]) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}
