//! Per-slot reception resolution.
//!
//! Concurrent transmissions are resolved per receiver from the received
//! signal strengths, an optional jammer and the PHY's capture and beating
//! characteristics. Transmissions on a different channel or PHY are
//! orthogonal and never interact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{Micros, PhyId, PhyMode};

pub type NodeId = usize;

/// Identity of a frame's content. Equal ids mean bit-identical frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DataId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Source,
    Destination,
    Forwarder,
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Log-distance path loss: `rss = p_tx - reference_loss - 10 n log10(d / 1 m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLoss {
    pub exponent: f64,
    pub reference_loss_db: f64,
    /// Links weaker than this (at 0 dBm) are stored as disconnected.
    pub disconnect_dbm: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            exponent: 3.0,
            reference_loss_db: 40.0,
            disconnect_dbm: -105.0,
        }
    }
}

impl PathLoss {
    pub fn rss_dbm(&self, distance_m: f64) -> f64 {
        -self.reference_loss_db - 10.0 * self.exponent * distance_m.max(1.0).log10()
    }
}

/// Node set with the received signal strength of every directed link at
/// 0 dBm transmit power. `f64::NEG_INFINITY` marks a disconnected link.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    roles: Vec<NodeRole>,
    rss_dbm: Vec<f64>,
    rss_mw: Vec<f64>,
}

impl Topology {
    pub fn new(roles: Vec<NodeRole>, rss_dbm: Vec<Vec<f64>>) -> Result<Self> {
        let n = roles.len();
        if rss_dbm.len() != n || rss_dbm.iter().any(|row| row.len() != n) {
            return Err(Error::ConfigInvalid(format!(
                "RSS matrix must be {n}x{n} to match the node roles"
            )));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (tx, row) in rss_dbm.iter().enumerate() {
            for (rx, &v) in row.iter().enumerate() {
                if tx == rx {
                    flat.push(f64::NEG_INFINITY);
                } else if v.is_nan() || v == f64::INFINITY {
                    return Err(Error::ConfigInvalid(format!("RSS[{tx}][{rx}] must be finite or -inf")));
                } else {
                    flat.push(v);
                }
            }
        }
        let rss_mw = flat.iter().map(|&v| dbm_to_mw(v)).collect();
        Ok(Self {
            roles,
            rss_dbm: flat,
            rss_mw,
        })
    }

    /// Symmetric topology from planar coordinates.
    pub fn from_positions(roles: Vec<NodeRole>, positions: &[(f64, f64)], model: &PathLoss) -> Result<Self> {
        Self::from_positions_with(roles, positions, model, |_, _| 0.0)
    }

    /// As [`Topology::from_positions`], adding `shadowing(a, b)` dB to the
    /// link between `a < b` in both directions.
    pub fn from_positions_with(
        roles: Vec<NodeRole>,
        positions: &[(f64, f64)],
        model: &PathLoss,
        mut shadowing: impl FnMut(NodeId, NodeId) -> f64,
    ) -> Result<Self> {
        let n = positions.len();
        let mut m = vec![vec![f64::NEG_INFINITY; n]; n];
        for a in 0..n {
            for b in a + 1..n {
                let (xa, ya) = positions[a];
                let (xb, yb) = positions[b];
                let d = ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt();
                let rss = model.rss_dbm(d) + shadowing(a, b);
                let v = if rss < model.disconnect_dbm {
                    f64::NEG_INFINITY
                } else {
                    rss
                };
                m[a][b] = v;
                m[b][a] = v;
            }
        }
        Self::new(roles, m)
    }

    pub fn node_count(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[NodeRole] {
        &self.roles
    }

    pub fn role(&self, node: NodeId) -> NodeRole {
        self.roles[node]
    }

    /// RSS of `tx -> rx` at 0 dBm, `None` if disconnected.
    pub fn rss(&self, tx: NodeId, rx: NodeId) -> Option<f64> {
        let v = self.rss_dbm[tx * self.node_count() + rx];
        v.is_finite().then_some(v)
    }

    pub(crate) fn rss_mw(&self, tx: NodeId, rx: NodeId) -> f64 {
        self.rss_mw[tx * self.node_count() + rx]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.node_count();
        (0..n).all(|a| (0..n).all(|b| self.rss_dbm[a * n + b] == self.rss_dbm[b * n + a]))
    }

    pub fn destinations(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes_with(NodeRole::Destination)
    }

    pub fn sources(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes_with(NodeRole::Source)
    }

    fn nodes_with(&self, role: NodeRole) -> impl Iterator<Item = NodeId> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(move |(_, r)| **r == role)
            .map(|(i, _)| i)
    }

    /// Hop distances from `root` over links that `phy` can decode.
    pub fn hop_distances(&self, root: NodeId, phy: &PhyMode) -> Vec<Option<u32>> {
        let n = self.node_count();
        let mut dist = vec![None; n];
        dist[root] = Some(0);
        let mut frontier = vec![root];
        let mut d = 0;
        while !frontier.is_empty() {
            d += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for (v, slot) in dist.iter_mut().enumerate() {
                    if slot.is_none() && self.rss(u, v).is_some_and(|r| r >= phy.sensitivity_dbm) {
                        *slot = Some(d);
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        dist
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JamLevel {
    None,
    Mild,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JamParams {
    pub jam_power_dbm: f64,
    pub duty_cycle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSegment {
    pub start: Micros,
    pub end: Micros,
    pub level: JamLevel,
}

/// Piecewise-constant jamming timeline. Time not covered by a segment is
/// jam-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceScenario {
    segments: Vec<InterferenceSegment>,
    pub mild: JamParams,
    pub strong: JamParams,
}

impl Default for InterferenceScenario {
    fn default() -> Self {
        Self {
            segments: Vec::new(),
            mild: JamParams {
                jam_power_dbm: -75.0,
                duty_cycle: 0.5,
            },
            strong: JamParams {
                jam_power_dbm: -60.0,
                duty_cycle: 0.9,
            },
        }
    }
}

impl InterferenceScenario {
    pub fn none() -> Self {
        Self::default()
    }

    /// Segments must be non-empty intervals in increasing, non-overlapping order.
    pub fn new(segments: Vec<InterferenceSegment>, mild: JamParams, strong: JamParams) -> Result<Self> {
        for (i, s) in segments.iter().enumerate() {
            if s.end <= s.start {
                return Err(Error::ConfigInvalid(format!("interference segment {i} is empty")));
            }
            if i > 0 && s.start < segments[i - 1].end {
                return Err(Error::ConfigInvalid(format!(
                    "interference segment {i} overlaps its predecessor"
                )));
            }
        }
        for (name, p) in [("mild", mild), ("strong", strong)] {
            if !(0.0..=1.0).contains(&p.duty_cycle) {
                return Err(Error::ConfigInvalid(format!("{name} duty_cycle must lie in [0, 1]")));
            }
        }
        Ok(Self { segments, mild, strong })
    }

    /// Whole-horizon constant level.
    pub fn constant(level: JamLevel, horizon: Micros) -> Self {
        let d = Self::default();
        Self::new(
            vec![InterferenceSegment {
                start: Micros::ZERO,
                end: horizon,
                level,
            }],
            d.mild,
            d.strong,
        )
        .expect("single segment is valid")
    }

    pub fn segments(&self) -> &[InterferenceSegment] {
        &self.segments
    }

    pub fn level_at(&self, time: Micros) -> JamLevel {
        // segments are sorted, so a binary search finds the only candidate
        let idx = self.segments.partition_point(|s| s.end <= time);
        match self.segments.get(idx) {
            Some(s) if s.start <= time => s.level,
            _ => JamLevel::None,
        }
    }

    pub fn params(&self, level: JamLevel) -> Option<JamParams> {
        match level {
            JamLevel::None => None,
            JamLevel::Mild => Some(self.mild),
            JamLevel::Strong => Some(self.strong),
        }
    }
}

/// Jammer power seen by one receiver at `time`, drawn from its own stream.
pub fn jam_sample<R: Rng + ?Sized>(scenario: &InterferenceScenario, time: Micros, rng: &mut R) -> Option<f64> {
    let p = scenario.params(scenario.level_at(time))?;
    if p.duty_cycle >= 1.0 || (p.duty_cycle > 0.0 && rng.gen_bool(p.duty_cycle)) {
        Some(p.jam_power_dbm)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionAttempt {
    pub tx_node: NodeId,
    pub channel: u8,
    pub phy: PhyId,
    pub power_dbm: f64,
    pub data_id: DataId,
    pub slot_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailReason {
    Silence,
    BelowSensitivity,
    CaptureFail,
    BeatingLoss,
    Jammed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReceptionOutcome {
    Decoded(DataId),
    Failed(FailReason),
}

impl ReceptionOutcome {
    pub fn decoded(self) -> Option<DataId> {
        match self {
            ReceptionOutcome::Decoded(d) => Some(d),
            ReceptionOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceptionModel {
    /// Capture, beating and jamming as described on [`resolve_reception`].
    Stochastic,
    /// Lossless links: the strongest decodable signal always wins.
    Ideal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumParams {
    pub model: ReceptionModel,
    pub noise_floor_dbm: f64,
    /// Half-width of the linear ramp of the link function around the capture margin.
    pub soft_edge_db: f64,
}

impl Default for MediumParams {
    fn default() -> Self {
        Self {
            model: ReceptionModel::Stochastic,
            noise_floor_dbm: -100.0,
            soft_edge_db: 3.0,
        }
    }
}

/// One signal arriving at a receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signal {
    pub data: DataId,
    pub rss_dbm: f64,
    pub rss_mw: f64,
}

/// Probability of locking onto a signal with the given SINR.
pub fn link_probability(sinr_db: f64, margin_db: f64, soft_edge_db: f64) -> f64 {
    let lo = margin_db - soft_edge_db;
    let hi = margin_db + soft_edge_db;
    if sinr_db >= hi {
        1.0
    } else if sinr_db <= lo {
        0.0
    } else {
        (sinr_db - lo) / (hi - lo)
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.gen::<f64>() < p
    }
}

/// Resolve one receiver's slot from the signals that reach it.
///
/// Signals must already be restricted to the receiver's channel and PHY.
pub fn resolve_signals<R: Rng + ?Sized>(
    signals: &[Signal],
    jam_dbm: Option<f64>,
    phy: &PhyMode,
    params: &MediumParams,
    rng: &mut R,
) -> ReceptionOutcome {
    use FailReason::*;
    use ReceptionOutcome::*;

    let Some(strongest) = signals.iter().copied().reduce(|best, s| {
        if s.rss_dbm > best.rss_dbm || (s.rss_dbm == best.rss_dbm && s.data < best.data) {
            s
        } else {
            best
        }
    }) else {
        return Failed(Silence);
    };

    if strongest.rss_dbm < phy.sensitivity_dbm {
        return Failed(BelowSensitivity);
    }
    if params.model == ReceptionModel::Ideal {
        return Decoded(strongest.data);
    }

    let noise_mw = dbm_to_mw(params.noise_floor_dbm);
    let jam_mw = jam_dbm.map_or(0.0, dbm_to_mw);
    let jammed = jam_mw > noise_mw;

    let mut same = 0i32;
    let mut other_mw = 0.0;
    for s in signals {
        if s.data == strongest.data {
            same += 1;
        } else {
            other_mw += s.rss_mw;
        }
    }
    let beating = phy.beating_penalty.powi(same - 1);

    if same as usize == signals.len() {
        let sinr = strongest.rss_dbm - mw_to_dbm(jam_mw + noise_mw);
        let p_link = link_probability(sinr, phy.capture_margin_db, params.soft_edge_db);
        if !draw(rng, p_link) {
            return Failed(if jammed { Jammed } else { CaptureFail });
        }
    } else {
        let needed = mw_to_dbm(other_mw + jam_mw + noise_mw) + phy.capture_margin_db;
        if strongest.rss_dbm < needed {
            let without_jam = mw_to_dbm(other_mw + noise_mw) + phy.capture_margin_db;
            return Failed(if jammed && strongest.rss_dbm >= without_jam {
                Jammed
            } else {
                CaptureFail
            });
        }
    }

    if draw(rng, beating) {
        Decoded(strongest.data)
    } else {
        Failed(BeatingLoss)
    }
}

/// Resolve reception at `rx_node` for the given concurrent attempts.
///
/// Attempts on another channel or PHY, from `rx_node` itself, or over a
/// disconnected link do not reach the receiver.
#[allow(clippy::too_many_arguments)]
pub fn resolve_reception<R: Rng + ?Sized>(
    rx_node: NodeId,
    attempts: &[TransmissionAttempt],
    jam_dbm: Option<f64>,
    phy: &PhyMode,
    channel: u8,
    topology: &Topology,
    params: &MediumParams,
    rng: &mut R,
) -> ReceptionOutcome {
    let signals: Vec<Signal> = attempts
        .iter()
        .filter(|a| a.channel == channel && a.phy == phy.id && a.tx_node != rx_node)
        .filter_map(|a| {
            let rss = topology.rss(a.tx_node, rx_node)? + a.power_dbm;
            Some(Signal {
                data: a.data_id,
                rss_dbm: rss,
                rss_mw: dbm_to_mw(rss),
            })
        })
        .collect();
    resolve_signals(&signals, jam_dbm, phy, params, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::PhyMode;
    use crate::rng::{stream, Purpose};

    fn star(rss: &[f64]) -> Topology {
        // node 0 receives, nodes 1.. transmit with the given RSS
        let n = rss.len() + 1;
        let mut m = vec![vec![f64::NEG_INFINITY; n]; n];
        for (i, &r) in rss.iter().enumerate() {
            m[i + 1][0] = r;
            m[0][i + 1] = r;
        }
        let mut roles = vec![NodeRole::Forwarder; n];
        roles[0] = NodeRole::Destination;
        Topology::new(roles, m).unwrap()
    }

    fn attempt(tx: NodeId, data: u64, phy: PhyId) -> TransmissionAttempt {
        TransmissionAttempt {
            tx_node: tx,
            channel: 11,
            phy,
            power_dbm: 0.0,
            data_id: DataId(data),
            slot_index: 0,
        }
    }

    fn decode_rate(topo: &Topology, attempts: &[TransmissionAttempt], jam: Option<f64>, phy: PhyId, n: usize) -> f64 {
        let mode = PhyMode::builtin(phy);
        let params = MediumParams::default();
        let mut rng = stream(1, 0, 0, Purpose::Medium);
        let ok = (0..n)
            .filter(|_| {
                matches!(
                    resolve_reception(0, attempts, jam, &mode, 11, topo, &params, &mut rng),
                    ReceptionOutcome::Decoded(_)
                )
            })
            .count();
        ok as f64 / n as f64
    }

    #[test]
    fn no_attempts_is_silence() {
        let topo = star(&[-60.0]);
        let mut rng = stream(1, 0, 0, Purpose::Medium);
        let out = resolve_reception(
            0,
            &[],
            None,
            &PhyMode::builtin(PhyId::Ble2M),
            11,
            &topo,
            &MediumParams::default(),
            &mut rng,
        );
        assert_eq!(out, ReceptionOutcome::Failed(FailReason::Silence));
    }

    #[test]
    fn lone_strong_transmitter_decodes() {
        let topo = star(&[-60.0]);
        let a = [attempt(1, 5, PhyId::Ble2M)];
        let mut rng = stream(1, 0, 0, Purpose::Medium);
        let out = resolve_reception(
            0,
            &a,
            None,
            &PhyMode::builtin(PhyId::Ble2M),
            11,
            &topo,
            &MediumParams::default(),
            &mut rng,
        );
        assert_eq!(out, ReceptionOutcome::Decoded(DataId(5)));
    }

    #[test]
    fn other_channel_or_phy_is_orthogonal() {
        let topo = star(&[-60.0, -60.0]);
        let mut off = attempt(1, 5, PhyId::Ble2M);
        off.channel = 12;
        let a = [off, attempt(2, 6, PhyId::Ble1M)];
        let mut rng = stream(1, 0, 0, Purpose::Medium);
        let out = resolve_reception(
            0,
            &a,
            None,
            &PhyMode::builtin(PhyId::Ble2M),
            11,
            &topo,
            &MediumParams::default(),
            &mut rng,
        );
        assert_eq!(out, ReceptionOutcome::Failed(FailReason::Silence));
    }

    #[test]
    fn below_sensitivity_wins_over_everything() {
        let topo = star(&[-95.0]);
        let a = [attempt(1, 5, PhyId::Ble2M)];
        let mut rng = stream(1, 0, 0, Purpose::Medium);
        let out = resolve_reception(
            0,
            &a,
            Some(-50.0),
            &PhyMode::builtin(PhyId::Ble2M),
            11,
            &topo,
            &MediumParams::default(),
            &mut rng,
        );
        assert_eq!(out, ReceptionOutcome::Failed(FailReason::BelowSensitivity));
    }

    #[test]
    fn dense_same_data_2m_collapses() {
        let topo = star(&[-50.0; 19]);
        let a: Vec<_> = (1..=19).map(|i| attempt(i, 9, PhyId::Ble2M)).collect();
        // closed form: link term is 1 at 50 dB SINR, beating 0.8^18
        let expected = 0.8f64.powi(18);
        assert!(expected <= 0.0181);
        let rate = decode_rate(&topo, &a, None, PhyId::Ble2M, 200_000);
        assert!((rate - expected).abs() < 0.002, "rate {rate} vs {expected}");
    }

    #[test]
    fn coded_capture_of_stronger_different_data() {
        let topo = star(&[-50.0, -70.0]);
        let a = [attempt(1, 1, PhyId::Ble125K), attempt(2, 2, PhyId::Ble125K)];
        let mut rng = stream(1, 0, 0, Purpose::Medium);
        let out = resolve_reception(
            0,
            &a,
            None,
            &PhyMode::builtin(PhyId::Ble125K),
            11,
            &topo,
            &MediumParams::default(),
            &mut rng,
        );
        assert_eq!(out, ReceptionOutcome::Decoded(DataId(1)));
    }

    #[test]
    fn equal_power_different_data_fails_capture() {
        let topo = star(&[-60.0, -61.0]);
        let a = [attempt(1, 1, PhyId::Ble2M), attempt(2, 2, PhyId::Ble2M)];
        let mut rng = stream(1, 0, 0, Purpose::Medium);
        let out = resolve_reception(
            0,
            &a,
            None,
            &PhyMode::builtin(PhyId::Ble2M),
            11,
            &topo,
            &MediumParams::default(),
            &mut rng,
        );
        assert_eq!(out, ReceptionOutcome::Failed(FailReason::CaptureFail));
    }

    #[test]
    fn jammer_blocks_capture_and_is_reported() {
        let topo = star(&[-60.0, -75.0]);
        let a = [attempt(1, 1, PhyId::Ble2M), attempt(2, 2, PhyId::Ble2M)];
        let mut rng = stream(1, 0, 0, Purpose::Medium);
        let mode = PhyMode::builtin(PhyId::Ble2M);
        let params = MediumParams::default();
        assert_eq!(
            resolve_reception(0, &a, None, &mode, 11, &topo, &params, &mut rng),
            ReceptionOutcome::Decoded(DataId(1))
        );
        assert_eq!(
            resolve_reception(0, &a, Some(-60.0), &mode, 11, &topo, &params, &mut rng),
            ReceptionOutcome::Failed(FailReason::Jammed)
        );
        let single = [attempt(1, 1, PhyId::Ble2M)];
        assert_eq!(
            resolve_reception(0, &single, Some(-55.0), &mode, 11, &topo, &params, &mut rng),
            ReceptionOutcome::Failed(FailReason::Jammed)
        );
    }

    #[test]
    fn ideal_model_ignores_contention_and_jamming() {
        let topo = star(&[-60.0, -60.0]);
        let a = [attempt(1, 4, PhyId::Ble2M), attempt(2, 3, PhyId::Ble2M)];
        let params = MediumParams {
            model: ReceptionModel::Ideal,
            ..MediumParams::default()
        };
        let mut rng = stream(1, 0, 0, Purpose::Medium);
        let out = resolve_reception(
            0,
            &a,
            Some(-40.0),
            &PhyMode::builtin(PhyId::Ble2M),
            11,
            &topo,
            &params,
            &mut rng,
        );
        // tie on power resolves to the lower data id
        assert_eq!(out, ReceptionOutcome::Decoded(DataId(3)));
    }

    #[test]
    fn link_function_shape() {
        assert_eq!(link_probability(11.0, 8.0, 3.0), 1.0);
        assert_eq!(link_probability(5.0, 8.0, 3.0), 0.0);
        assert!((link_probability(8.0, 8.0, 3.0) - 0.5).abs() < 1e-12);
        assert_eq!(link_probability(8.0, 8.0, 0.0), 1.0);
        assert_eq!(link_probability(7.9, 8.0, 0.0), 0.0);
    }

    #[test]
    fn jam_sample_levels() {
        let horizon = Micros::from_secs(10);
        let mut rng = stream(3, 0, 0, Purpose::Jam);
        let none = InterferenceScenario::constant(JamLevel::None, horizon);
        assert!((0..1000).all(|i| jam_sample(&none, Micros(i * 7919), &mut rng).is_none()));

        let mut strong = InterferenceScenario::constant(JamLevel::Strong, horizon);
        strong.strong.duty_cycle = 1.0;
        assert!((0..1000).all(|i| jam_sample(&strong, Micros(i * 7919), &mut rng) == Some(-60.0)));
    }

    #[test]
    fn jam_duty_cycle_is_bernoulli() {
        let horizon = Micros::from_secs(10);
        let mut s = InterferenceScenario::constant(JamLevel::Mild, horizon);
        s.mild.duty_cycle = 0.5;
        let mut rng = stream(4, 0, 0, Purpose::Jam);
        let n = 100_000;
        let hits = (0..n).filter(|_| jam_sample(&s, Micros(1), &mut rng).is_some()).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn uncovered_time_defaults_to_no_jamming() {
        let d = InterferenceScenario::default();
        let s = InterferenceScenario::new(
            vec![InterferenceSegment {
                start: Micros(100),
                end: Micros(200),
                level: JamLevel::Strong,
            }],
            d.mild,
            d.strong,
        )
        .unwrap();
        assert_eq!(s.level_at(Micros(99)), JamLevel::None);
        assert_eq!(s.level_at(Micros(100)), JamLevel::Strong);
        assert_eq!(s.level_at(Micros(199)), JamLevel::Strong);
        assert_eq!(s.level_at(Micros(200)), JamLevel::None);
    }

    #[test]
    fn overlapping_segments_rejected() {
        let d = InterferenceScenario::default();
        let seg = |a, b| InterferenceSegment {
            start: Micros(a),
            end: Micros(b),
            level: JamLevel::Mild,
        };
        assert!(InterferenceScenario::new(vec![seg(0, 10), seg(5, 20)], d.mild, d.strong).is_err());
        assert!(InterferenceScenario::new(vec![seg(10, 10)], d.mild, d.strong).is_err());
    }

    #[test]
    fn path_loss_topology_is_symmetric_and_thresholded() {
        let roles = vec![NodeRole::Destination, NodeRole::Source, NodeRole::Source];
        let pos = [(0.0, 0.0), (10.0, 0.0), (1000.0, 0.0)];
        let t = Topology::from_positions(roles, &pos, &PathLoss::default()).unwrap();
        assert!(t.is_symmetric());
        assert!((t.rss(0, 1).unwrap() - -70.0).abs() < 1e-9);
        assert_eq!(t.rss(0, 2), None);
    }
}
