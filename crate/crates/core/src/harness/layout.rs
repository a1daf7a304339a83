//! Named 48-node layouts built from the shipped coordinate file.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::{NodeId, NodeRole, PathLoss, Topology};
use crate::rng::{stream, Purpose};

const TESTBED_CSV: &str = include_str!("../../layouts/testbed48.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayoutName {
    #[serde(rename = "all_to_one_47")]
    AllToOne47,
    #[serde(rename = "sparse_12")]
    Sparse12,
    #[serde(rename = "dense_19")]
    Dense19,
    #[serde(rename = "broadcast_1_to_47")]
    Broadcast1To47,
}

impl LayoutName {
    pub const ALL: [LayoutName; 4] = [Self::AllToOne47, Self::Sparse12, Self::Dense19, Self::Broadcast1To47];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AllToOne47 => "all_to_one_47",
            Self::Sparse12 => "sparse_12",
            Self::Dense19 => "dense_19",
            Self::Broadcast1To47 => "broadcast_1_to_47",
        }
    }
}

impl fmt::Display for LayoutName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayoutName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown layout {s:?}")))
    }
}

pub const DENSE_SINK: NodeId = 28;
pub const HUB: NodeId = 17;
pub const SPARSE_SINK: NodeId = 0;
pub const SPARSE_SOURCES: [NodeId; 12] = [11, 13, 15, 19, 21, 23, 24, 27, 33, 37, 41, 46];

/// Node coordinates in metres, indexed by node id.
pub fn testbed_positions() -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(48);
    let mut reader = csv::Reader::from_reader(TESTBED_CSV.as_bytes());
    for rec in reader.records() {
        let rec = rec.expect("shipped layout is valid csv");
        let x: f64 = rec[1].parse().expect("x coordinate");
        let y: f64 = rec[2].parse().expect("y coordinate");
        out.push((x, y));
    }
    out
}

/// Node roles for a layout. Sinks and the broadcast source are singletons:
/// the collection sink is the only `Destination`, the broadcast source the
/// only `Source`.
pub fn layout_roles(name: LayoutName) -> Vec<NodeRole> {
    use NodeRole::*;
    let n = 48;
    match name {
        LayoutName::AllToOne47 => (0..n).map(|i| if i == HUB { Destination } else { Source }).collect(),
        LayoutName::Broadcast1To47 => (0..n).map(|i| if i == HUB { Source } else { Destination }).collect(),
        LayoutName::Dense19 => (0..n)
            .map(|i| match i {
                DENSE_SINK => Destination,
                29..=47 => Source,
                _ => Forwarder,
            })
            .collect(),
        LayoutName::Sparse12 => (0..n)
            .map(|i| {
                if i == SPARSE_SINK {
                    Destination
                } else if SPARSE_SOURCES.contains(&i) {
                    Source
                } else {
                    Forwarder
                }
            })
            .collect(),
    }
}

/// Build the RSS matrix for `positions`, with optional log-normal
/// shadowing of standard deviation `shadowing_db` drawn from `seed`.
pub fn positioned_topology(
    roles: Vec<NodeRole>,
    positions: &[(f64, f64)],
    model: &PathLoss,
    shadowing_db: f64,
    seed: u64,
) -> Result<Topology> {
    if shadowing_db <= 0.0 {
        return Topology::from_positions(roles, positions, model);
    }
    let normal = Normal::new(0.0, shadowing_db).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    let mut rng = stream(seed, 0, 0, Purpose::Layout);
    // Draw in a fixed (a, b) order regardless of how the closure is called.
    let n = positions.len();
    let mut table = vec![0.0; n * n];
    for a in 0..n {
        for b in a + 1..n {
            table[a * n + b] = normal.sample(&mut rng);
        }
    }
    Topology::from_positions_with(roles, positions, model, |a, b| table[a * n + b])
}

pub fn layout_topology(name: LayoutName, model: &PathLoss, shadowing_db: f64, seed: u64) -> Result<Topology> {
    positioned_topology(layout_roles(name), &testbed_positions(), model, shadowing_db, seed)
}
