mod analyze;
mod fit;
mod plot;
mod preprocess;
mod simulate;
mod stats;

use std::path::PathBuf;

pub use analyze::{cmd_classify, cmd_segment, ClassifyRecord, SegmentRecord};
pub use fit::{cmd_fit, cmd_segment_fit, group_table, FitRecord, FitReport, WHOLE_TRIAL};
pub use plot::cmd_plot;
pub use preprocess::cmd_preprocess;
pub use simulate::{cmd_simulate, SimulateOptions};
pub use stats::cmd_stats;

use crate::io::Failure;

/// What a command wrote and how many per-trial failures it recorded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub failures: Vec<Failure>,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}
