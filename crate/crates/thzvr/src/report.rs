//! CSV assembly. Every file opens with a '#'-prefixed provenance block so
//! a result can always be traced back to the exact resolved parameters and
//! seed that produced it.

use crate::config::ExperimentConfig;
use crate::{Error, Result};

/// An in-memory CSV document: comment block, header, rows.
///
/// Cells are plain strings; commas, quotes, and line breaks are rejected
/// rather than escaped, since every consumer here emits bare numbers.
#[derive(Clone, Debug, Default)]
pub struct CsvReport {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvReport {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            header: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// One provenance line; the leading "# " is added when rendering.
    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn comment_all(&mut self, lines: impl IntoIterator<Item = String>) {
        self.comments.extend(lines);
    }

    pub fn push_row(&mut self, cells: Vec<String>) -> Result<()> {
        if cells.len() != self.header.len() {
            return Err(Error::Config(format!(
                "row has {} cells, header has {}",
                cells.len(),
                self.header.len()
            )));
        }
        for cell in &cells {
            if cell.contains([',', '"', '\n', '\r']) {
                return Err(Error::Config(format!(
                    "cell '{cell}' contains a CSV delimiter"
                )));
            }
        }
        self.rows.push(cells);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.comments {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip decimal form, used for every numeric cell.
pub fn cell(x: f64) -> String {
    format!("{x}")
}

/// The resolved parameter set as `key = value` lines: config inputs with
/// the radio arrival rate and grid step already resolved, plus the derived
/// interference moments when the deployment admits them.
pub fn provenance_lines(cfg: &ExperimentConfig) -> Vec<String> {
    let queues = cfg.queue_params();
    let spec = cfg.analysis_spec();
    let ch = &cfg.channel;
    let dep = &cfg.deployment;
    let mut lines = vec![
        format!("channel.carrier_hz = {}", ch.carrier_hz),
        format!("channel.bandwidth_hz = {}", ch.bandwidth_hz),
        format!("channel.tx_power_w = {}", ch.tx_power_w),
        format!("channel.absorption_per_m = {}", ch.absorption_per_m),
        format!("channel.serving_distance_m = {}", ch.serving_distance_m),
        format!("channel.noise_temp_k = {}", ch.noise_temp_k),
        format!("deployment.hard_core_radius_m = {}", dep.hard_core_radius_m),
        format!(
            "deployment.cell_intensity_per_m2 = {}",
            dep.cell_intensity_per_m2
        ),
        format!("deployment.region_radius_m = {}", dep.region_radius_m),
        format!("deployment.window_side_m = {}", dep.window_side_m),
        format!("queues.request_rate_hz = {}", queues.request_rate_hz),
        format!("queues.processing_rate_hz = {}", queues.processing_rate_hz),
        format!(
            "queues.radio_arrival_rate_hz = {}",
            queues.radio_arrival_rate_hz
        ),
        format!("payload_bits = {}", cfg.payload_bits),
        format!("interference_std_scale = {}", cfg.interference_std_scale),
        format!(
            "deadlines_s = [{}]",
            cfg.deadlines_s
                .iter()
                .map(|d| cell(*d))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        format!("grid.step_s = {}", spec.grid_step_s),
        format!("grid.tail_epsilon = {}", spec.tail_epsilon),
        format!("sim.n_requests = {}", cfg.sim.n_requests),
        format!("sim.warmup = {}", cfg.sim_config().warmup),
        format!("sim.seed = {}", cfg.sim.seed),
        format!(
            "sim.interference_mode = {}",
            cfg.sim.interference_mode.name()
        ),
        format!("sim.queue_cap = {}", cfg.sim.queue_cap),
        format!("sim.replications = {}", cfg.sim.replications),
    ];
    if let Ok(stats) = cfg.interference_stats() {
        lines.push(format!("interference.mean_w = {}", stats.mean_w));
        lines.push(format!("interference.std_w = {}", stats.std_w));
    }
    lines
}
