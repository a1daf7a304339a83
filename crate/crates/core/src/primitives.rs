//! Flooding primitives.
//!
//! A round is `nslots` synchronous slots. Initiators transmit in slot 0 and
//! every other node listens until its first reception, after which it
//! relays the first frame it decoded:
//!
//! * **RoF** (time-triggered, Rx-Tx-Tx-Tx): `ntx` consecutive transmissions
//!   right after the first reception, then sleep.
//! * **Glossy** (reception-triggered, Rx-Tx-Rx-Tx): transmissions on every
//!   other slot after the first reception, listening in between, until
//!   `ntx` transmissions are done.
//!
//! Initiators behave as if they had received in slot -1, so their own
//! transmissions count toward `ntx`.

use serde::{Deserialize, Serialize};

use crate::driver::{hop_channel, run_slot, slot_radio_on, NodeSlotLog, SlotAction, SlotDecision, SlotTimes};
use crate::error::{Error, Result};
use crate::medium::{
    dbm_to_mw, jam_sample, resolve_signals, DataId, InterferenceScenario, MediumParams, NodeId, Signal, Topology,
};
use crate::phy::{Micros, PhyId, PhyTable, SlotTiming};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Glossy,
    Rof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Initiator {
    pub node: NodeId,
    pub data: DataId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundConfig {
    pub primitive: Primitive,
    pub phy: PhyId,
    pub ntx: u32,
    pub nslots: u32,
    pub tx_power_dbm: f64,
    pub channel_sequence: Vec<u8>,
    pub initiators: Vec<Initiator>,
    pub payload_len: usize,
}

impl RoundConfig {
    pub fn new(primitive: Primitive, phy: PhyId, ntx: u32, nslots: u32) -> Self {
        Self {
            primitive,
            phy,
            ntx,
            nslots,
            tx_power_dbm: 0.0,
            channel_sequence: vec![11, 17, 23],
            initiators: Vec::new(),
            payload_len: 8,
        }
    }

    pub fn with_initiators(mut self, initiators: impl IntoIterator<Item = Initiator>) -> Self {
        self.initiators = initiators.into_iter().collect();
        self
    }

    pub fn with_payload(mut self, payload_len: usize) -> Self {
        self.payload_len = payload_len;
        self
    }

    pub fn with_channels(mut self, channels: Vec<u8>) -> Self {
        self.channel_sequence = channels;
        self
    }

    /// Check the structural invariants (not topology membership).
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.nslots == 0 {
            return Err("nslots must be at least 1".into());
        }
        if self.ntx == 0 || self.ntx > self.nslots {
            return Err(format!("ntx must lie in [1, nslots={}], got {}", self.nslots, self.ntx));
        }
        if self.channel_sequence.is_empty() {
            return Err("channel sequence is empty".into());
        }
        if !self.tx_power_dbm.is_finite() {
            return Err("tx_power_dbm must be finite".into());
        }
        let mut nodes: Vec<_> = self.initiators.iter().map(|i| i.node).collect();
        nodes.sort_unstable();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err("a node may initiate at most once per round".into());
        }
        Ok(())
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        self.check().map_err(Error::ConfigInvalid)?;
        if let Some(i) = self.initiators.iter().find(|i| i.node >= topology.node_count()) {
            return Err(Error::ConfigInvalid(format!(
                "initiator {} is not in the topology",
                i.node
            )));
        }
        Ok(())
    }
}

/// Per-node view of a round after extensions have been applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodePlan {
    pub phy: PhyId,
    pub ntx: u32,
    pub initiate: Option<DataId>,
}

impl NodePlan {
    pub fn uniform(config: &RoundConfig, nodes: usize) -> Vec<NodePlan> {
        let mut plans = vec![
            NodePlan {
                phy: config.phy,
                ntx: config.ntx,
                initiate: None,
            };
            nodes
        ];
        for i in &config.initiators {
            plans[i.node].initiate = Some(i.data);
        }
        plans
    }
}

/// Radio-on time split by state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadioTime {
    pub tx: Micros,
    pub rx: Micros,
}

impl RadioTime {
    pub fn total(&self) -> Micros {
        self.tx + self.rx
    }

    pub fn add(&mut self, other: RadioTime) {
        self.tx += other.tx;
        self.rx += other.rx;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub received: Vec<Option<DataId>>,
    pub first_rx_slot: Vec<Option<u32>>,
    pub tx_counts: Vec<u32>,
    pub radio: Vec<RadioTime>,
    /// Every node's log for every slot, slot-major. Empty unless recorded.
    pub logs: Vec<NodeSlotLog>,
    pub slot_duration: Micros,
    pub nslots: u32,
}

impl RoundResult {
    pub fn duration(&self) -> Micros {
        self.slot_duration * self.nslots as u64
    }

    /// End of the slot in which `node` first received, relative to round start.
    pub fn reception_offset(&self, node: NodeId) -> Option<Micros> {
        self.first_rx_slot[node].map(|s| self.slot_duration * (s as u64 + 1))
    }
}

/// Everything a round needs besides its configuration.
#[derive(Debug, Clone, Copy)]
pub struct Environment<'a> {
    pub topology: &'a Topology,
    pub phys: &'a PhyTable,
    pub medium: &'a MediumParams,
    pub interference: &'a InterferenceScenario,
    pub timing: SlotTiming,
}

/// Where a round sits on the global timeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoundStart {
    pub time: Micros,
    /// Global index of the round's first slot, used for channel hopping.
    pub slot: u64,
}

struct NodeRun {
    plan: NodePlan,
    have: Option<DataId>,
    anchor: Option<i64>,
    tx_count: u32,
}

impl NodeRun {
    fn decide(&self, primitive: Primitive, slot: u32) -> SlotDecision {
        let (Some(data), Some(k)) = (self.have, self.anchor) else {
            return SlotDecision::Listen;
        };
        let since = slot as i64 - k;
        match primitive {
            Primitive::Rof => {
                if since <= self.plan.ntx as i64 {
                    SlotDecision::Transmit(data)
                } else {
                    SlotDecision::Sleep
                }
            }
            Primitive::Glossy => {
                if self.tx_count >= self.plan.ntx {
                    SlotDecision::Sleep
                } else if since % 2 == 1 {
                    SlotDecision::Transmit(data)
                } else {
                    SlotDecision::Listen
                }
            }
        }
    }
}

/// Run one round with every node following `config`.
pub fn run_round(
    config: &RoundConfig,
    env: &Environment<'_>,
    start: RoundStart,
    rng: &mut SimRng,
) -> Result<RoundResult> {
    config.validate(env.topology)?;
    let plans = NodePlan::uniform(config, env.topology.node_count());
    run_planned_round(config, &plans, env, start, rng, true)
}

/// Run one round with per-node PHY, NTX and initiator overrides.
///
/// `config.phy` sets the nominal slot grid; nodes whose plan names another
/// PHY can only hear each other.
pub fn run_planned_round(
    config: &RoundConfig,
    plans: &[NodePlan],
    env: &Environment<'_>,
    start: RoundStart,
    rng: &mut SimRng,
    record: bool,
) -> Result<RoundResult> {
    let topo = env.topology;
    let n = topo.node_count();
    if plans.len() != n {
        return Err(Error::ConfigInvalid(format!("{} plans for {n} nodes", plans.len())));
    }
    config.check().map_err(Error::ConfigInvalid)?;
    if let Some(p) = plans.iter().find(|p| p.ntx == 0 || p.ntx > config.nslots) {
        return Err(Error::ConfigInvalid(format!(
            "node ntx {} outside [1, nslots={}]",
            p.ntx, config.nslots
        )));
    }

    let mut times: [Option<SlotTimes>; 5] = [None; 5];
    let mut times_for = |phy: PhyId| -> Result<SlotTimes> {
        if let Some(t) = times[phy.index()] {
            return Ok(t);
        }
        let t = SlotTimes::new(env.phys.get(phy), config.payload_len, &env.timing)?;
        times[phy.index()] = Some(t);
        Ok(t)
    };
    let nominal = times_for(config.phy)?;
    let node_times = plans.iter().map(|p| times_for(p.phy)).collect::<Result<Vec<_>>>()?;

    let mut nodes: Vec<NodeRun> = plans
        .iter()
        .map(|&plan| NodeRun {
            plan,
            have: plan.initiate,
            anchor: plan.initiate.map(|_| -1),
            tx_count: 0,
        })
        .collect();

    let power_mw = dbm_to_mw(config.tx_power_dbm);
    let mut result = RoundResult {
        received: plans.iter().map(|p| p.initiate).collect(),
        first_rx_slot: plans.iter().map(|p| p.initiate.map(|_| 0)).collect(),
        tx_counts: vec![0; n],
        radio: vec![RadioTime::default(); n],
        logs: Vec::with_capacity(if record { n * config.nslots as usize } else { 0 }),
        slot_duration: nominal.slot_duration,
        nslots: config.nslots,
    };

    let mut decisions = vec![SlotDecision::Sleep; n];
    let mut transmitters: Vec<(NodeId, DataId)> = Vec::with_capacity(n);
    let mut signals: Vec<Signal> = Vec::with_capacity(n);

    for slot in 0..config.nslots {
        let channel = hop_channel(&config.channel_sequence, start.slot + slot as u64)?;
        let slot_start = start.time + nominal.slot_duration * slot as u64;

        transmitters.clear();
        for (i, node) in nodes.iter().enumerate() {
            decisions[i] = node.decide(config.primitive, slot);
            if let SlotDecision::Transmit(d) = decisions[i] {
                transmitters.push((i, d));
            }
        }

        for rx in 0..n {
            let outcome = if decisions[rx] == SlotDecision::Listen {
                let phy = nodes[rx].plan.phy;
                signals.clear();
                for &(tx, data) in &transmitters {
                    if nodes[tx].plan.phy != phy {
                        continue;
                    }
                    if let Some(rss) = topo.rss(tx, rx) {
                        signals.push(Signal {
                            data,
                            rss_dbm: rss + config.tx_power_dbm,
                            rss_mw: topo.rss_mw(tx, rx) * power_mw,
                        });
                    }
                }
                let jam = jam_sample(env.interference, slot_start, &mut rng.jam[rx]);
                Some(resolve_signals(
                    &signals,
                    jam,
                    env.phys.get(phy),
                    env.medium,
                    &mut rng.medium[rx],
                ))
            } else {
                None
            };

            let t = &node_times[rx];
            let (action, on) = if record {
                let run = run_slot(rx, slot, channel, decisions[rx], outcome, t);
                let out = (run.log.action, run.log.radio_on);
                result.logs.push(run.log);
                out
            } else {
                slot_radio_on(decisions[rx], outcome, t)
            };
            match action {
                SlotAction::Tx => {
                    result.radio[rx].tx += on;
                    result.tx_counts[rx] += 1;
                    nodes[rx].tx_count += 1;
                }
                _ => result.radio[rx].rx += on,
            }

            if let Some(d) = outcome.and_then(|o| o.decoded()) {
                let node = &mut nodes[rx];
                if node.have.is_none() {
                    node.have = Some(d);
                    node.anchor = Some(slot as i64);
                    result.received[rx] = Some(d);
                    result.first_rx_slot[rx] = Some(slot);
                }
            }
        }
    }
    if !record {
        result.logs.clear();
    }
    Ok(result)
}
