use serde::{Deserialize, Serialize};

/// Green-time shares an intersection ran over one decision period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub intersection: usize,
    pub start_s: f64,
    pub duration_s: f64,
    pub splits: Vec<f64>,
}

/// Episode outcome. Times are in hours.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsLog {
    pub total_time_spent_h: f64,
    /// Stop-line waiting plus virtual-queue waiting.
    pub total_queue_time_h: f64,
    pub total_virtual_queue_time_h: f64,
    pub generated: usize,
    pub exited: usize,
    /// Vehicles still in the network or waiting to enter at the horizon.
    pub remaining: usize,
    /// Highest occupancy each real link reached.
    pub max_occupancy: Vec<usize>,
    /// Measured queue vector after every step, when tracing is enabled.
    pub queue_trace: Option<Vec<Vec<f64>>>,
    pub splits: Vec<SplitRecord>,
    pub state_digest: String,
}

impl MetricsLog {
    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            tts_h: self.total_time_spent_h,
            queue_h: self.total_queue_time_h,
            virtual_queue_h: self.total_virtual_queue_time_h,
            generated: self.generated,
            exited: self.exited,
        }
    }
}

/// The per-episode numbers that go into result tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub tts_h: f64,
    pub queue_h: f64,
    pub virtual_queue_h: f64,
    pub generated: usize,
    pub exited: usize,
}
