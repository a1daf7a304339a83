//! Scenario files (TOML) and their validation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, FieldError, Result};
use crate::harness::layout::{layout_topology, positioned_topology, LayoutName};
use crate::medium::{
    InterferenceScenario, InterferenceSegment, JamLevel, JamParams, MediumParams, NodeId, NodeRole, PathLoss, Topology,
};
use crate::middleware::{build_schedule, ExtensionRegistry, MphyPattern, PatternName, ScheduleParams};
use crate::phy::{Micros, PhyId, PhyOverride, PhyTable, SlotTiming};
use crate::primitives::{Primitive, RoundConfig};
use crate::protocols::{Backoff, CollectionParams, PeriodicPhase, Rntx, TrafficModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Dissemination,
    Collection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicas: u32,
    pub duration_s: f64,
    pub protocol: ProtocolKind,
    #[serde(default = "default_payload")]
    pub payload_len: usize,
    pub topology: TopologySpec,
    #[serde(default)]
    pub round: RoundSpec,
    #[serde(default)]
    pub collection: CollectionSpec,
    #[serde(default)]
    pub dissemination: DisseminationSpec,
    pub multiphy: Option<MultiphySpec>,
    #[serde(default)]
    pub traffic: TrafficSpec,
    #[serde(default)]
    pub extensions: ExtensionSpec,
    #[serde(default)]
    pub medium: MediumParams,
    #[serde(default)]
    pub interference: InterferenceSpec,
    /// PHY parameter overrides keyed by PHY name.
    #[serde(default)]
    pub phy: BTreeMap<String, PhyOverride>,
    #[serde(default)]
    pub energy: EnergyModel,
}

fn one() -> u32 {
    1
}

fn default_payload() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub layout: Option<LayoutName>,
    pub positions: Option<Vec<[f64; 2]>>,
    /// Square matrix, `rss_dbm[tx][rx]` at 0 dBm; `-inf` means no link.
    pub rss_dbm: Option<Vec<Vec<f64>>>,
    pub roles: Option<Vec<NodeRole>>,
    #[serde(default)]
    pub path_loss: PathLoss,
    #[serde(default)]
    pub shadowing_db: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoundSpec {
    pub primitive: Primitive,
    pub phy: PhyId,
    pub ntx: u32,
    pub nslots: u32,
    pub tx_power_dbm: f64,
    pub channels: Vec<u8>,
    pub processing_gap_us: u64,
    pub miss_guard_us: u64,
}

impl Default for RoundSpec {
    fn default() -> Self {
        let t = SlotTiming::default();
        Self {
            primitive: Primitive::Rof,
            phy: PhyId::Ble2M,
            ntx: 6,
            nslots: 12,
            tx_power_dbm: 0.0,
            channels: vec![11, 17, 23],
            processing_gap_us: t.processing_gap.as_u64(),
            miss_guard_us: t.miss_guard.as_u64(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectionSpec {
    pub nta: usize,
    pub exit_threshold: usize,
    pub epoch_ms: f64,
}

impl Default for CollectionSpec {
    fn default() -> Self {
        Self {
            nta: 12,
            exit_threshold: 4,
            epoch_ms: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisseminationSpec {
    pub epoch_ms: f64,
}

impl Default for DisseminationSpec {
    fn default() -> Self {
        Self { epoch_ms: 200.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiphySpec {
    pub fast_phy: PhyId,
    pub robust_phy: PhyId,
    #[serde(default = "default_pattern")]
    pub pattern: PatternName,
    #[serde(default)]
    pub dynamic: bool,
}

fn default_pattern() -> PatternName {
    PatternName::Mphy0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficMode {
    Aperiodic,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSpec {
    pub mode: TrafficMode,
    pub window_s: f64,
    pub period_s: f64,
    pub phase: PeriodicPhase,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        Self {
            mode: TrafficMode::Aperiodic,
            window_s: 30.0,
            period_s: 5.0,
            phase: PeriodicPhase::Aligned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtensionSpec {
    pub rntx: bool,
    pub backoff: bool,
    pub backoff_probability: f64,
}

impl Default for ExtensionSpec {
    fn default() -> Self {
        Self {
            rntx: false,
            backoff: false,
            backoff_probability: crate::protocols::DEFAULT_BACKOFF_PROBABILITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub start_s: f64,
    pub end_s: f64,
    pub level: JamLevel,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferenceSpec {
    pub mild: JamParams,
    pub strong: JamParams,
    pub segments: Vec<SegmentSpec>,
}

impl Default for InterferenceSpec {
    fn default() -> Self {
        let d = InterferenceScenario::default();
        Self {
            mild: d.mild,
            strong: d.strong,
            segments: Vec::new(),
        }
    }
}

/// Current draw per radio state. Approximate; radio-on time is reported
/// alongside so comparisons never depend on these constants.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyModel {
    pub tx_ma: f64,
    pub rx_ma: f64,
    pub voltage_v: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            tx_ma: 6.0,
            rx_ma: 6.0,
            voltage_v: 3.0,
        }
    }
}

impl EnergyModel {
    /// Energy in millijoules for the given radio-on times.
    pub fn millijoules(&self, tx: Micros, rx: Micros) -> f64 {
        (tx.as_u64() as f64 * self.tx_ma + rx.as_u64() as f64 * self.rx_ma) * self.voltage_v * 1e-6
    }
}

/// A validated scenario ready to run.
#[derive(Debug)]
pub struct Prepared {
    pub name: String,
    pub seed: u64,
    pub replicas: u32,
    pub protocol: ProtocolKind,
    pub horizon: Micros,
    pub topology: Topology,
    pub phys: PhyTable,
    pub medium: MediumParams,
    pub interference: InterferenceScenario,
    pub timing: SlotTiming,
    pub base: RoundConfig,
    pub registry: ExtensionRegistry,
    pub energy: EnergyModel,
    pub plan: ProtocolPlan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolPlan {
    Collection {
        params: CollectionParams,
        initial: MphyPattern,
        sources: Vec<NodeId>,
        traffic: TrafficModel,
    },
    Dissemination {
        source: NodeId,
        destinations: Vec<NodeId>,
        epoch_period: Micros,
    },
}

fn seconds(v: f64) -> Option<Micros> {
    (v.is_finite() && v >= 0.0).then(|| Micros((v * 1e6).round() as u64))
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Check every field and build the runtime objects.
    pub fn prepare(&self) -> Result<Prepared> {
        let mut errs = Vec::new();
        let mut err = |field: &str, msg: String| errs.push(FieldError::new(field, msg));

        let horizon = match seconds(self.duration_s) {
            Some(h) if h > Micros::ZERO => h,
            _ => {
                err("duration_s", "must be a positive number of seconds".into());
                Micros::ZERO
            }
        };

        let mut phys = PhyTable::default();
        for (name, ov) in &self.phy {
            match name.parse::<PhyId>() {
                Ok(id) => {
                    let mode = phys.get_mut(id);
                    ov.apply(mode);
                    if let Err(e) = mode.validate() {
                        err(&format!("phy.{name}"), e);
                    }
                }
                Err(_) => err(&format!("phy.{name}"), "unknown PHY".into()),
            }
        }

        let r = &self.round;
        let timing = SlotTiming {
            processing_gap: Micros(r.processing_gap_us),
            miss_guard: Micros(r.miss_guard_us),
        };
        let base = RoundConfig {
            primitive: r.primitive,
            phy: r.phy,
            ntx: r.ntx,
            nslots: r.nslots,
            tx_power_dbm: r.tx_power_dbm,
            channel_sequence: r.channels.clone(),
            initiators: Vec::new(),
            payload_len: self.payload_len,
        };
        if let Err(e) = base.check() {
            err("round", e);
        }

        let pattern = match (&self.multiphy, self.protocol) {
            (Some(_), ProtocolKind::Dissemination) => {
                err("multiphy", "multi-PHY patterns apply to collection only".into());
                MphyPattern::single_phy(r.phy)
            }
            (Some(m), _) => MphyPattern::new(m.pattern, m.fast_phy, m.robust_phy),
            (None, _) => MphyPattern::single_phy(r.phy),
        };
        let dynamic = self.multiphy.is_some_and(|m| m.dynamic);
        let mut used_phys = vec![r.phy, pattern.fast_phy, pattern.robust_phy];
        used_phys.dedup();
        for phy in used_phys {
            let max = phys.get(phy).max_payload;
            if self.payload_len > max {
                err(
                    "payload_len",
                    format!("{} bytes exceeds the {max}-byte maximum of {phy}", self.payload_len),
                );
            }
        }

        let ext = &self.extensions;
        let mut registry = ExtensionRegistry::new();
        if ext.rntx {
            if 2 * r.ntx > r.nslots {
                err(
                    "extensions.rntx",
                    format!("needs round.nslots >= {} (2 x ntx), got {}", 2 * r.ntx, r.nslots),
                );
            }
            registry = registry.with_driver(Rntx);
        }
        if ext.backoff {
            if !(0.0..=1.0).contains(&ext.backoff_probability) {
                err("extensions.backoff_probability", "must lie in [0, 1]".into());
            }
            registry = registry.with_protocol(Backoff {
                probability: ext.backoff_probability.clamp(0.0, 1.0),
            });
        }

        if !(self.medium.noise_floor_dbm.is_finite()
            && self.medium.soft_edge_db.is_finite()
            && self.medium.soft_edge_db >= 0.0)
        {
            err(
                "medium",
                "noise_floor_dbm and soft_edge_db must be finite, soft_edge_db >= 0".into(),
            );
        }
        let e = &self.energy;
        if ![e.tx_ma, e.rx_ma, e.voltage_v]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            err("energy", "currents and voltage must be finite and non-negative".into());
        }

        let interference = self.interference_scenario().unwrap_or_else(|e| {
            err("interference", e);
            InterferenceScenario::none()
        });

        let topology = match self.build_topology() {
            Ok(t) => Some(t),
            Err(e) => {
                err("topology", e);
                None
            }
        };

        let mut plan = None;
        if let Some(topo) = &topology {
            let of_role = |role| {
                topo.roles()
                    .iter()
                    .enumerate()
                    .filter(move |(_, &r)| r == role)
                    .map(|(i, _)| i)
            };
            match self.protocol {
                ProtocolKind::Collection => {
                    let sinks: Vec<_> = of_role(NodeRole::Destination).collect();
                    let sources: Vec<_> = of_role(NodeRole::Source).collect();
                    let c = &self.collection;
                    let epoch = seconds(c.epoch_ms / 1000.0).unwrap_or(Micros::ZERO);
                    if sinks.len() != 1 {
                        err(
                            "topology.roles",
                            format!("collection needs exactly one destination (sink), found {}", sinks.len()),
                        );
                    }
                    if c.nta == 0 {
                        err("collection.nta", "must be at least 1".into());
                    }
                    if c.exit_threshold == 0 {
                        err("collection.exit_threshold", "must be at least 1".into());
                    }
                    if epoch == Micros::ZERO {
                        err("collection.epoch_ms", "must be positive".into());
                    }
                    let traffic = match self.traffic.mode {
                        TrafficMode::Aperiodic => seconds(self.traffic.window_s)
                            .filter(|w| *w > Micros::ZERO)
                            .map(|window| TrafficModel::Aperiodic { window }),
                        TrafficMode::Periodic => {
                            seconds(self.traffic.period_s)
                                .filter(|p| *p > Micros::ZERO)
                                .map(|period| TrafficModel::Periodic {
                                    period,
                                    phase: self.traffic.phase,
                                })
                        }
                    };
                    if traffic.is_none() {
                        err("traffic", "window_s / period_s must be positive".into());
                    }
                    if dynamic && sources.is_empty() {
                        err("multiphy.dynamic", "the controller needs at least one source".into());
                    }
                    if c.nta > 0 && epoch > Micros::ZERO && base.check().is_ok() {
                        let candidates: Vec<PatternName> = if dynamic {
                            PatternName::ALL.to_vec()
                        } else {
                            vec![pattern.name]
                        };
                        for name in candidates {
                            let p = MphyPattern { name, ..pattern };
                            let sp = ScheduleParams {
                                epoch_period: epoch,
                                nta: c.nta,
                            };
                            match build_schedule(&sp, &p, &base, &phys, &timing) {
                                Err(Error::PayloadTooLarge { .. }) => {}
                                Err(e) => err("collection.epoch_ms", format!("{name}: {e}")),
                                Ok(_) => {}
                            }
                        }
                    }
                    if let (1, Some(traffic)) = (sinks.len(), traffic) {
                        plan = Some(ProtocolPlan::Collection {
                            params: CollectionParams {
                                sink: sinks[0],
                                nta: c.nta,
                                exit_threshold: c.exit_threshold,
                                epoch_period: epoch,
                                dynamic: dynamic.then_some(pattern),
                            },
                            initial: if dynamic {
                                MphyPattern {
                                    name: PatternName::Mphy0,
                                    ..pattern
                                }
                            } else {
                                pattern
                            },
                            sources,
                            traffic,
                        });
                    }
                }
                ProtocolKind::Dissemination => {
                    let sources: Vec<_> = of_role(NodeRole::Source).collect();
                    let epoch = seconds(self.dissemination.epoch_ms / 1000.0).unwrap_or(Micros::ZERO);
                    if sources.len() != 1 {
                        err(
                            "topology.roles",
                            format!("dissemination needs exactly one source, found {}", sources.len()),
                        );
                    }
                    if epoch == Micros::ZERO {
                        err("dissemination.epoch_ms", "must be positive".into());
                    } else if base.check().is_ok() {
                        let sp = ScheduleParams {
                            epoch_period: epoch,
                            nta: 0,
                        };
                        match build_schedule(&sp, &pattern, &base, &phys, &timing) {
                            Err(Error::PayloadTooLarge { .. }) | Ok(_) => {}
                            Err(e) => err("dissemination.epoch_ms", e.to_string()),
                        }
                    }
                    if sources.len() == 1 {
                        plan = Some(ProtocolPlan::Dissemination {
                            source: sources[0],
                            destinations: of_role(NodeRole::Destination).collect(),
                            epoch_period: epoch,
                        });
                    }
                }
            }
        }

        if !errs.is_empty() {
            return Err(Error::ScenarioInvalid(errs));
        }
        let (Some(topology), Some(plan)) = (topology, plan) else {
            return Err(Error::ScenarioInvalid(vec![FieldError::new(
                "topology",
                "could not be built",
            )]));
        };
        Ok(Prepared {
            name: self.name.clone(),
            seed: self.seed,
            replicas: self.replicas,
            protocol: self.protocol,
            horizon,
            topology,
            phys,
            medium: self.medium,
            interference,
            timing,
            base,
            registry,
            energy: self.energy,
            plan,
        })
    }

    fn interference_scenario(&self) -> std::result::Result<InterferenceScenario, String> {
        let i = &self.interference;
        let mut segments = Vec::with_capacity(i.segments.len());
        for (k, s) in i.segments.iter().enumerate() {
            match (seconds(s.start_s), seconds(s.end_s)) {
                (Some(start), Some(end)) => segments.push(InterferenceSegment {
                    start,
                    end,
                    level: s.level,
                }),
                _ => return Err(format!("segment {k}: times must be finite and non-negative")),
            }
        }
        InterferenceScenario::new(segments, i.mild, i.strong).map_err(|e| e.to_string())
    }

    fn build_topology(&self) -> std::result::Result<Topology, String> {
        let t = &self.topology;
        let given = [t.layout.is_some(), t.positions.is_some(), t.rss_dbm.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err("give exactly one of layout, positions or rss_dbm".into());
        }
        if !(t.shadowing_db.is_finite() && t.shadowing_db >= 0.0) {
            return Err("shadowing_db must be finite and non-negative".into());
        }
        let need_roles = |n: usize| -> std::result::Result<Vec<NodeRole>, String> {
            let roles = t.roles.clone().ok_or("roles are required with positions or rss_dbm")?;
            if roles.len() != n {
                return Err(format!("{} roles for {n} nodes", roles.len()));
            }
            Ok(roles)
        };
        if let Some(layout) = t.layout {
            if t.roles.is_some() {
                return Err("roles come from the layout and cannot be given".into());
            }
            return layout_topology(layout, &t.path_loss, t.shadowing_db, self.seed).map_err(|e| e.to_string());
        }
        if let Some(pos) = &t.positions {
            let roles = need_roles(pos.len())?;
            let pts: Vec<(f64, f64)> = pos.iter().map(|p| (p[0], p[1])).collect();
            if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err("positions must be finite".into());
            }
            return positioned_topology(roles, &pts, &t.path_loss, t.shadowing_db, self.seed)
                .map_err(|e| e.to_string());
        }
        let m = t.rss_dbm.clone().unwrap_or_default();
        let roles = need_roles(m.len())?;
        if m.iter().any(|row| row.len() != m.len()) {
            return Err("rss_dbm must be square".into());
        }
        Topology::new(roles, m).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        duration_s = 10
        protocol = "collection"
        [topology]
        layout = "dense_19"
    "#;

    fn fields(text: &str) -> Vec<String> {
        match Scenario::from_toml_str(text).unwrap().prepare() {
            Err(Error::ScenarioInvalid(f)) => f.into_iter().map(|f| f.field).collect(),
            other => panic!("expected ScenarioInvalid, got {other:?}"),
        }
    }

    #[test]
    fn minimal_scenario_uses_defaults() {
        let p = Scenario::from_toml_str(MINIMAL).unwrap().prepare().unwrap();
        assert_eq!(p.base.ntx, 6);
        assert_eq!(p.base.nslots, 12);
        assert_eq!(p.horizon, Micros::from_secs(10));
        match p.plan {
            ProtocolPlan::Collection { params, sources, .. } => {
                assert_eq!(params.nta, 12);
                assert_eq!(params.exit_threshold, 4);
                assert_eq!(params.epoch_period, Micros::from_secs(1));
                assert_eq!(sources.len(), 19);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        assert!(matches!(Scenario::from_toml_str(&text), Err(Error::Parse(_))));
        let text = MINIMAL.replace("layout = \"dense_19\"", "layout = \"dense_19\"\ncolour = 3");
        assert!(matches!(Scenario::from_toml_str(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn field_errors_name_the_offender() {
        assert!(fields(&MINIMAL.replace("duration_s = 10", "duration_s = -1")).contains(&"duration_s".to_string()));
        let t = format!("{MINIMAL}\n[round]\nntx = 13\n");
        assert!(fields(&t).contains(&"round".to_string()));
        let t = format!("{MINIMAL}\n[round]\nnslots = 10\n[extensions]\nrntx = true\n");
        assert!(fields(&t).contains(&"extensions.rntx".to_string()));
        let t = MINIMAL.replace("duration_s = 10", "duration_s = 10\npayload_len = 200\n")
            + "[round]\nphy = \"IEEE802154\"\n";
        assert!(fields(&t).contains(&"payload_len".to_string()));
        let t = format!("{MINIMAL}\n[phy.BLE_9M]\nbitrate = 1\n");
        assert!(fields(&t).contains(&"phy.BLE_9M".to_string()));
    }

    #[test]
    fn infeasible_epoch_is_rejected() {
        let t = r#"
            duration_s = 10
            protocol = "dissemination"
            payload_len = 248
            [topology]
            layout = "broadcast_1_to_47"
            [round]
            phy = "BLE_125K"
        "#;
        assert!(fields(t).contains(&"dissemination.epoch_ms".to_string()));
    }

    #[test]
    fn inline_rss_topology() {
        let t = r#"
            duration_s = 1
            protocol = "dissemination"
            [topology]
            rss_dbm = [[-inf, -60.0], [-60.0, -inf]]
            roles = ["source", "destination"]
        "#;
        let p = Scenario::from_toml_str(t).unwrap().prepare().unwrap();
        assert_eq!(p.topology.rss(0, 1), Some(-60.0));
        let bad = t.replace("roles = [\"source\", \"destination\"]", "roles = [\"source\"]");
        assert!(fields(&bad).contains(&"topology".to_string()));
    }

    #[test]
    fn overlapping_segments_are_rejected() {
        let t = format!(
            "{MINIMAL}\n[[interference.segments]]\nstart_s = 0\nend_s = 5\nlevel = \"mild\"\n[[interference.segments]]\nstart_s = 4\nend_s = 8\nlevel = \"strong\"\n"
        );
        assert!(fields(&t).contains(&"interference".to_string()));
    }

    #[test]
    fn energy_is_linear() {
        let e = EnergyModel::default();
        let a = e.millijoules(Micros(1000), Micros(3000));
        let b = e.millijoules(Micros(2000), Micros(6000));
        assert_eq!(b, 2.0 * a);
        assert!((a - 4000.0 * 6.0 * 3.0 * 1e-6).abs() < 1e-12);
    }
}
