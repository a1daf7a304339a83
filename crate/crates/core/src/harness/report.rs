//! Simulation reports and their JSON/CSV forms.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::scenario::{EnergyModel, ProtocolKind};
use crate::medium::JamLevel;
use crate::phy::Micros;
use crate::primitives::RadioTime;
use crate::protocols::PatternSample;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean_us: f64,
    pub median_us: u64,
    pub p95_us: u64,
}

impl LatencyStats {
    /// Nearest-rank statistics; `samples` need not be sorted.
    pub fn from_samples(samples: &mut [u64]) -> Self {
        samples.sort_unstable();
        let n = samples.len();
        if n == 0 {
            return Self {
                count: 0,
                mean_us: 0.0,
                median_us: 0,
                p95_us: 0,
            };
        }
        let rank = |q: f64| samples[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        let sum: u128 = samples.iter().map(|&s| s as u128).sum();
        Self {
            count: n as u64,
            mean_us: sum as f64 / n as f64,
            median_us: rank(0.5),
            p95_us: rank(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRadio {
    pub node: usize,
    pub tx_us: u64,
    pub rx_us: u64,
    pub energy_mj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentUtilization {
    pub start_us: u64,
    pub end_us: u64,
    pub level: JamLevel,
    pub epochs: u64,
    /// Sum of per-epoch fast utilization in percent, for exact pooling.
    pub utilization_sum: u64,
    pub mean_fast_utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaReport {
    pub replica: u32,
    pub epochs: u64,
    /// Messages generated (collection) or destination-epochs (dissemination).
    pub generated: u64,
    pub delivered: u64,
    pub reliability: f64,
    pub latency: LatencyStats,
    pub radio_on_us: u64,
    pub radio_on_us_per_node: f64,
    pub energy_mj: f64,
    pub nodes: Vec<NodeRadio>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pattern_timeline: Vec<PatternSample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentUtilization>,
    #[serde(skip)]
    pub(crate) latency_samples: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub replicas: u32,
    pub generated: u64,
    pub delivered: u64,
    pub reliability: f64,
    pub latency: LatencyStats,
    pub radio_on_us: u64,
    pub radio_on_us_per_node: f64,
    pub energy_mj: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentUtilization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema_version: u32,
    pub name: String,
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub replicas: Vec<ReplicaReport>,
    pub aggregate: AggregateReport,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl ReplicaReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn build(
        replica: u32,
        epochs: u64,
        generated: u64,
        delivered: u64,
        mut latency_samples: Vec<u64>,
        radio: &[RadioTime],
        energy: &EnergyModel,
        pattern_timeline: Vec<PatternSample>,
        segments: Vec<SegmentUtilization>,
    ) -> Self {
        let latency = LatencyStats::from_samples(&mut latency_samples);
        let nodes: Vec<NodeRadio> = radio
            .iter()
            .enumerate()
            .map(|(node, r)| NodeRadio {
                node,
                tx_us: r.tx.as_u64(),
                rx_us: r.rx.as_u64(),
                energy_mj: energy.millijoules(r.tx, r.rx),
            })
            .collect();
        let total: u64 = radio.iter().map(|r| r.total().as_u64()).sum();
        let (tx, rx) = radio
            .iter()
            .fold((Micros::ZERO, Micros::ZERO), |(t, r), x| (t + x.tx, r + x.rx));
        Self {
            replica,
            epochs,
            generated,
            delivered,
            reliability: ratio(delivered, generated),
            latency,
            radio_on_us: total,
            radio_on_us_per_node: if radio.is_empty() {
                0.0
            } else {
                total as f64 / radio.len() as f64
            },
            energy_mj: energy.millijoules(tx, rx),
            nodes,
            pattern_timeline,
            segments,
            latency_samples,
        }
    }
}

impl AggregateReport {
    /// Pool replicas; the result does not depend on their order.
    pub(crate) fn pool(replicas: &[ReplicaReport], energy: &EnergyModel) -> Self {
        let generated = replicas.iter().map(|r| r.generated).sum();
        let delivered = replicas.iter().map(|r| r.delivered).sum();
        let mut samples: Vec<u64> = replicas
            .iter()
            .flat_map(|r| r.latency_samples.iter().copied())
            .collect();
        let radio_on_us: u64 = replicas.iter().map(|r| r.radio_on_us).sum();
        let node_count: u64 = replicas.iter().map(|r| r.nodes.len() as u64).sum();
        let (tx, rx) = replicas
            .iter()
            .flat_map(|r| &r.nodes)
            .fold((0u64, 0u64), |(t, x), n| (t + n.tx_us, x + n.rx_us));
        let count = replicas.len().max(1) as f64;

        let mut segments: Vec<SegmentUtilization> = Vec::new();
        for r in replicas {
            for (i, s) in r.segments.iter().enumerate() {
                if let Some(acc) = segments.get_mut(i) {
                    acc.epochs += s.epochs;
                    acc.utilization_sum += s.utilization_sum;
                } else {
                    segments.push(s.clone());
                }
            }
        }
        for s in &mut segments {
            s.mean_fast_utilization = s.utilization_sum as f64 / s.epochs.max(1) as f64;
        }

        Self {
            replicas: replicas.len() as u32,
            generated,
            delivered,
            reliability: ratio(delivered, generated),
            latency: LatencyStats::from_samples(&mut samples),
            radio_on_us,
            radio_on_us_per_node: if node_count == 0 {
                0.0
            } else {
                radio_on_us as f64 / node_count as f64
            },
            energy_mj: energy.millijoules(Micros(tx), Micros(rx)) / count,
            segments,
        }
    }
}

impl SimReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `scope,replica,metric,value` rows; header only when there are no replicas.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scope", "replica", "metric", "value"])?;
        for r in &self.replicas {
            let id = r.replica.to_string();
            for (metric, value) in metric_rows(
                r.generated,
                r.delivered,
                r.reliability,
                &r.latency,
                r.radio_on_us,
                r.radio_on_us_per_node,
                r.energy_mj,
            ) {
                w.write_record(["replica", &id, metric, &value])?;
            }
            for s in &r.segments {
                let metric = format!("fast_utilization_{}_{}", s.start_us, s.end_us);
                w.write_record(["replica", &id, &metric, &s.mean_fast_utilization.to_string()])?;
            }
        }
        if !self.replicas.is_empty() {
            let a = &self.aggregate;
            for (metric, value) in metric_rows(
                a.generated,
                a.delivered,
                a.reliability,
                &a.latency,
                a.radio_on_us,
                a.radio_on_us_per_node,
                a.energy_mj,
            ) {
                w.write_record(["aggregate", "", metric, &value])?;
            }
            for s in &a.segments {
                let metric = format!("fast_utilization_{}_{}", s.start_us, s.end_us);
                w.write_record(["aggregate", "", &metric, &s.mean_fast_utilization.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

fn metric_rows(
    generated: u64,
    delivered: u64,
    reliability: f64,
    latency: &LatencyStats,
    radio_on_us: u64,
    per_node: f64,
    energy_mj: f64,
) -> [(&'static str, String); 10] {
    [
        ("generated", generated.to_string()),
        ("delivered", delivered.to_string()),
        ("reliability", reliability.to_string()),
        ("latency_count", latency.count.to_string()),
        ("latency_mean_us", latency.mean_us.to_string()),
        ("latency_median_us", latency.median_us.to_string()),
        ("latency_p95_us", latency.p95_us.to_string()),
        ("radio_on_us", radio_on_us.to_string()),
        ("radio_on_us_per_node", per_node.to_string()),
        ("energy_mj", energy_mj.to_string()),
    ]
}
