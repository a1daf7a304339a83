//! Epoch schedules, multi-PHY patterns and extension hooks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::NodeId;
use crate::phy::{slot_duration, Micros, PhyId, PhyTable, SlotTiming};
use crate::primitives::RoundConfig;
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundRole {
    S,
    T,
    A,
    Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternName {
    #[serde(rename = "MPHY0")]
    Mphy0,
    #[serde(rename = "MPHY25")]
    Mphy25,
    #[serde(rename = "MPHY50")]
    Mphy50,
    #[serde(rename = "MPHY75")]
    Mphy75,
    #[serde(rename = "MPHY100")]
    Mphy100,
}

impl PatternName {
    pub const ALL: [PatternName; 5] = [Self::Mphy0, Self::Mphy25, Self::Mphy50, Self::Mphy75, Self::Mphy100];

    pub fn fast_utilization(self) -> u8 {
        match self {
            Self::Mphy0 => 0,
            Self::Mphy25 => 25,
            Self::Mphy50 => 50,
            Self::Mphy75 => 75,
            Self::Mphy100 => 100,
        }
    }

    pub fn from_utilization(percent: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.fast_utilization() == percent)
            .ok_or_else(|| Error::PatternInvalid(format!("fast utilization {percent}% is not a multiple of 25")))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mphy0 => "MPHY0",
            Self::Mphy25 => "MPHY25",
            Self::Mphy50 => "MPHY50",
            Self::Mphy75 => "MPHY75",
            Self::Mphy100 => "MPHY100",
        }
    }
}

impl fmt::Display for PatternName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::PatternInvalid(format!("unknown pattern {s:?}")))
    }
}

/// Which PHY each TA pair uses, repeated in blocks of four pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MphyPattern {
    pub name: PatternName,
    pub fast_phy: PhyId,
    pub robust_phy: PhyId,
}

impl MphyPattern {
    pub fn new(name: PatternName, fast_phy: PhyId, robust_phy: PhyId) -> Self {
        Self {
            name,
            fast_phy,
            robust_phy,
        }
    }

    /// Every round on one PHY.
    pub fn single_phy(phy: PhyId) -> Self {
        Self::new(PatternName::Mphy0, phy, phy)
    }

    pub fn fast_utilization(&self) -> u8 {
        self.name.fast_utilization()
    }

    /// PHY of the zero-based TA pair `pair`. Robust pairs sit at the end of
    /// each block of four.
    pub fn pair_phy(&self, pair: usize) -> PhyId {
        let fast_per_block = self.fast_utilization() as usize / 25;
        if pair % 4 < fast_per_block {
            self.fast_phy
        } else {
            self.robust_phy
        }
    }
}

/// Parameters that shape an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleParams {
    pub epoch_period: Micros,
    /// TA pairs per epoch; zero builds a single payload round.
    pub nta: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSchedule {
    pub epoch_period: Micros,
    pub rounds: Vec<(RoundRole, RoundConfig)>,
    pub pattern: MphyPattern,
}

impl EpochSchedule {
    /// Sum of nominal round lengths.
    pub fn scheduled_time(&self, phys: &PhyTable, timing: &SlotTiming) -> Result<Micros> {
        self.rounds
            .iter()
            .map(|(_, c)| Ok(slot_duration(phys.get(c.phy), c.payload_len, timing)? * c.nslots as u64))
            .sum()
    }

    /// `(T, A)` configs of each pair, in order.
    pub fn pair_rounds(&self) -> impl Iterator<Item = (&RoundConfig, &RoundConfig)> {
        let pairs = self.rounds.iter().skip_while(|(r, _)| *r == RoundRole::S);
        let t = pairs.clone().step_by(2);
        let a = pairs.skip(1).step_by(2);
        t.zip(a).map(|((_, t), (_, a))| (t, a))
    }
}

/// Build the round sequence of one epoch.
///
/// With `nta > 0` this is an S round on the robust PHY followed by `nta`
/// T/A pairs; otherwise a single payload round on the robust PHY.
pub fn build_schedule(
    params: &ScheduleParams,
    pattern: &MphyPattern,
    base: &RoundConfig,
    phys: &PhyTable,
    timing: &SlotTiming,
) -> Result<EpochSchedule> {
    if pattern.fast_utilization() % 25 != 0 || pattern.fast_utilization() > 100 {
        return Err(Error::PatternInvalid(format!("{}", pattern.name)));
    }
    base.check().map_err(Error::ConfigInvalid)?;
    let on = |phy: PhyId| RoundConfig {
        phy,
        initiators: Vec::new(),
        ..base.clone()
    };

    let mut rounds = Vec::with_capacity(1 + 2 * params.nta);
    if params.nta == 0 {
        rounds.push((RoundRole::Payload, on(pattern.robust_phy)));
    } else {
        rounds.push((RoundRole::S, on(pattern.robust_phy)));
        for pair in 0..params.nta {
            let phy = pattern.pair_phy(pair);
            rounds.push((RoundRole::T, on(phy)));
            rounds.push((RoundRole::A, on(phy)));
        }
    }
    let schedule = EpochSchedule {
        epoch_period: params.epoch_period,
        rounds,
        pattern: *pattern,
    };
    let used = schedule.scheduled_time(phys, timing)?;
    if used > params.epoch_period {
        return Err(Error::ConfigInvalid(format!(
            "epoch needs {used} but the period is {}",
            params.epoch_period
        )));
    }
    Ok(schedule)
}

/// What a hook knows about the round it is shaping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HookContext {
    pub epoch: u64,
    pub role: RoundRole,
    pub node: NodeId,
}

/// Mutates a node's view of the round before it runs.
pub trait DriverExtension: Send + Sync {
    fn name(&self) -> &str;
    fn apply(&self, config: &mut RoundConfig, ctx: &HookContext, rng: &mut StreamRng) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRoundRole {
    Initiator,
    Forwarder,
}

/// Decides per round whether a node with data initiates.
pub trait ProtocolExtension: Send + Sync {
    fn name(&self) -> &str;
    fn decide(&self, role: NodeRoundRole, has_data: bool, ctx: &HookContext, rng: &mut StreamRng) -> NodeRoundRole;
}

/// Hooks in registration order.
#[derive(Default)]
pub struct ExtensionRegistry {
    driver: Vec<Box<dyn DriverExtension>>,
    protocol: Vec<Box<dyn ProtocolExtension>>,
}

impl ExtensionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_driver(mut self, hook: impl DriverExtension + 'static) -> Self {
        self.driver.push(Box::new(hook));
        self
    }

    pub fn with_protocol(mut self, hook: impl ProtocolExtension + 'static) -> Self {
        self.protocol.push(Box::new(hook));
        self
    }

    pub fn driver_hooks(&self) -> impl Iterator<Item = &dyn DriverExtension> {
        self.driver.iter().map(|h| h.as_ref())
    }

    pub fn protocol_hooks(&self) -> impl Iterator<Item = &dyn ProtocolExtension> {
        self.protocol.iter().map(|h| h.as_ref())
    }

    pub fn has_driver_hooks(&self) -> bool {
        !self.driver.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.driver.is_empty() && self.protocol.is_empty()
    }

    /// Run every protocol hook in order; a node without data never initiates.
    pub fn decide(&self, has_data: bool, ctx: &HookContext, rng: &mut StreamRng) -> NodeRoundRole {
        let mut role = if has_data {
            NodeRoundRole::Initiator
        } else {
            NodeRoundRole::Forwarder
        };
        for hook in &self.protocol {
            role = hook.decide(role, has_data, ctx, rng);
        }
        if has_data {
            role
        } else {
            NodeRoundRole::Forwarder
        }
    }
}

impl fmt::Debug for ExtensionRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExtensionRegistry")
            .field("driver", &self.driver.iter().map(|h| h.name()).collect::<Vec<_>>())
            .field("protocol", &self.protocol.iter().map(|h| h.name()).collect::<Vec<_>>())
            .finish()
    }
}

/// Apply driver hooks in order, checking invariants after each one.
pub fn apply_extensions(
    registry: &ExtensionRegistry,
    config: &RoundConfig,
    ctx: &HookContext,
    rng: &mut StreamRng,
) -> Result<RoundConfig> {
    let mut out = config.clone();
    apply_extensions_in_place(registry, &mut out, ctx, rng)?;
    Ok(out)
}

pub(crate) fn apply_extensions_in_place(
    registry: &ExtensionRegistry,
    config: &mut RoundConfig,
    ctx: &HookContext,
    rng: &mut StreamRng,
) -> Result<()> {
    for hook in &registry.driver {
        hook.apply(config, ctx, rng).map_err(|e| match e {
            Error::HookViolation(_) => e,
            other => Error::HookViolation(format!("{}: {other}", hook.name())),
        })?;
        config
            .check()
            .map_err(|e| Error::HookViolation(format!("{}: {e}", hook.name())))?;
    }
    Ok(())
}
