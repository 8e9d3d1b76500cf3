use serde::Serialize;
use std::io::Write;
use std::time::Duration;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ControllerMetrics {
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub messages_sent: u64,
    pub messages_received: u64,
}

/// Transport and protocol counters. Byte counts include the fixed header.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metrics {
    pub controllers: Vec<ControllerMetrics>,
    /// Tree rounds: iterations of the baseline protocol or CR rounds.
    pub rounds: u64,
    pub secif_count: u64,
    pub cmp_count: u64,
    pub wall: Duration,
}

impl Metrics {
    pub fn new(n: usize) -> Self {
        Self { controllers: vec![ControllerMetrics::default(); n], ..Self::default() }
    }

    pub fn total_sent(&self) -> u64 {
        self.controllers.iter().map(|c| c.bytes_sent).sum()
    }

    pub fn total_received(&self) -> u64 {
        self.controllers.iter().map(|c| c.bytes_received).sum()
    }

    pub fn total_messages(&self) -> u64 {
        self.controllers.iter().map(|c| c.messages_sent).sum()
    }

    /// Bytes sent per controller, averaged over all controllers.
    pub fn bytes_per_domain_avg(&self) -> f64 {
        if self.controllers.is_empty() {
            return 0.0;
        }
        self.total_sent() as f64 / self.controllers.len() as f64
    }

    /// Counters accumulated since `earlier`.
    pub fn since(&self, earlier: &Metrics) -> Metrics {
        let controllers = self
            .controllers
            .iter()
            .zip(earlier.controllers.iter().chain(std::iter::repeat(&ControllerMetrics::default())))
            .map(|(a, b)| ControllerMetrics {
                bytes_sent: a.bytes_sent - b.bytes_sent,
                bytes_received: a.bytes_received - b.bytes_received,
                messages_sent: a.messages_sent - b.messages_sent,
                messages_received: a.messages_received - b.messages_received,
            })
            .collect();
        Metrics {
            controllers,
            rounds: self.rounds - earlier.rounds,
            secif_count: self.secif_count - earlier.secif_count,
            cmp_count: self.cmp_count - earlier.cmp_count,
            wall: self.wall.saturating_sub(earlier.wall),
        }
    }

    /// Same counters with the wall clock cleared, for exact comparisons.
    pub fn without_wall(&self) -> Metrics {
        Metrics { wall: Duration::ZERO, ..self.clone() }
    }
}

/// One line of the benchmark CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub topo_id: String,
    pub mode: String,
    pub backend: String,
    pub n_domains: usize,
    pub n_inter_links: usize,
    pub n_gateways: usize,
    pub wall_ms: f64,
    pub bytes_per_domain_avg: f64,
    pub secif_count: u64,
    pub cmp_count: u64,
}

pub fn write_csv<W: Write>(out: W, rows: &[CsvRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
