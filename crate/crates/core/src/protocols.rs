//! Dissemination and collection over the flooding primitives, plus the
//! RNTX and backoff extensions and the late-ratio pattern controller.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::driver::NodeSlotLog;
use crate::error::{Error, Result};
use crate::medium::{DataId, NodeId};
use crate::middleware::{
    apply_extensions_in_place, build_schedule, DriverExtension, EpochSchedule, ExtensionRegistry, HookContext,
    MphyPattern, NodeRoundRole, PatternName, ProtocolExtension, RoundRole, ScheduleParams,
};
use crate::phy::Micros;
use crate::primitives::{run_planned_round, Environment, NodePlan, RadioTime, RoundConfig, RoundResult, RoundStart};
use crate::rng::{SimRng, StreamRng};

/// Draw `ntx'` uniformly from `[ntx, 2 ntx]`.
pub fn rntx_extension(config: &RoundConfig, rng: &mut StreamRng) -> Result<RoundConfig> {
    let mut out = config.clone();
    Rntx::draw(&mut out, rng)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Rntx;

impl Rntx {
    fn draw(config: &mut RoundConfig, rng: &mut StreamRng) -> Result<()> {
        if 2 * config.ntx > config.nslots {
            return Err(Error::HookViolation(format!(
                "rntx needs nslots >= {} but nslots is {}",
                2 * config.ntx,
                config.nslots
            )));
        }
        config.ntx = rng.gen_range(config.ntx..=2 * config.ntx);
        Ok(())
    }
}

impl DriverExtension for Rntx {
    fn name(&self) -> &str {
        "rntx"
    }

    fn apply(&self, config: &mut RoundConfig, _: &HookContext, rng: &mut StreamRng) -> Result<()> {
        Self::draw(config, rng)
    }
}

pub const DEFAULT_BACKOFF_PROBABILITY: f64 = 0.8;

/// A source with data initiates with probability 0.8, otherwise forwards.
pub fn backoff_extension(source_has_data: bool, rng: &mut StreamRng) -> NodeRoundRole {
    Backoff::default().role(source_has_data, rng)
}

#[derive(Debug, Clone, Copy)]
pub struct Backoff {
    pub probability: f64,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            probability: DEFAULT_BACKOFF_PROBABILITY,
        }
    }
}

impl Backoff {
    fn role(&self, has_data: bool, rng: &mut StreamRng) -> NodeRoundRole {
        if has_data && rng.gen_bool(self.probability) {
            NodeRoundRole::Initiator
        } else {
            NodeRoundRole::Forwarder
        }
    }
}

impl ProtocolExtension for Backoff {
    fn name(&self) -> &str {
        "backoff"
    }

    fn decide(&self, role: NodeRoundRole, has_data: bool, ctx: &HookContext, rng: &mut StreamRng) -> NodeRoundRole {
        if ctx.role != RoundRole::T || role == NodeRoundRole::Forwarder {
            return role;
        }
        self.role(has_data, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LateRatioReport {
    pub expected_sources: usize,
    pub late_sources: usize,
    pub ratio: f64,
}

impl LateRatioReport {
    pub fn new(expected_sources: usize, late_sources: usize) -> Self {
        let ratio = if expected_sources == 0 {
            0.0
        } else {
            late_sources as f64 / expected_sources as f64
        };
        Self {
            expected_sources,
            late_sources,
            ratio,
        }
    }

    pub fn from_ratio(expected_sources: usize, ratio: f64) -> Self {
        Self {
            expected_sources,
            late_sources: (ratio * expected_sources as f64).round() as usize,
            ratio,
        }
    }
}

/// Map the share of late sources to a fast-PHY utilization.
pub fn select_pattern_name(report: &LateRatioReport) -> Result<PatternName> {
    if report.expected_sources == 0 {
        return Err(Error::NoSources);
    }
    let r = report.ratio;
    Ok(if r <= 0.25 {
        PatternName::Mphy75
    } else if r <= 0.5 {
        PatternName::Mphy50
    } else if r <= 0.75 {
        PatternName::Mphy25
    } else {
        PatternName::Mphy0
    })
}

pub fn select_pattern(report: &LateRatioReport, split: &MphyPattern) -> Result<MphyPattern> {
    Ok(MphyPattern {
        name: select_pattern_name(report)?,
        ..*split
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodicPhase {
    /// Every source generates on the same grid `k * period`.
    Aligned,
    /// Each source draws one offset in `[0, period)`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TrafficModel {
    Aperiodic { window: Micros },
    Periodic { period: Micros, phase: PeriodicPhase },
}

impl Default for TrafficModel {
    fn default() -> Self {
        TrafficModel::Aperiodic {
            window: Micros::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: u64,
    pub source: NodeId,
    pub generated: Micros,
    /// Deadline after which an undelivered message makes its source late.
    pub window_end: Micros,
}

impl TrafficModel {
    /// Every message `source` generates before `horizon`, in time order.
    pub fn generate(&self, source: NodeId, horizon: Micros, rng: &mut StreamRng) -> Vec<Message> {
        let mut out = Vec::new();
        match *self {
            TrafficModel::Aperiodic { window } => {
                let w = window.as_u64().max(1);
                let mut start = 0;
                while start < horizon.as_u64() {
                    let t = start + rng.gen_range(0..w);
                    if t < horizon.as_u64() {
                        out.push((t, start + w));
                    }
                    start += w;
                }
            }
            TrafficModel::Periodic { period, phase } => {
                let p = period.as_u64().max(1);
                let mut t = match phase {
                    PeriodicPhase::Aligned => 0,
                    PeriodicPhase::Random => rng.gen_range(0..p),
                };
                while t < horizon.as_u64() {
                    out.push((t, t + p));
                    t += p;
                }
            }
        }
        out.into_iter()
            .map(|(g, w)| Message {
                id: 0,
                source,
                generated: Micros(g),
                window_end: Micros(w),
            })
            .collect()
    }
}

const TAG_SHIFT: u32 = 60;
const TAG_DATA: u64 = 1;
const TAG_ACK: u64 = 2;
const TAG_EMPTY: u64 = 3;
const TAG_SYNC: u64 = 4;
const TAG_PAYLOAD: u64 = 5;

fn tagged(tag: u64, value: u64) -> DataId {
    DataId((tag << TAG_SHIFT) | value)
}

fn untag(id: DataId, tag: u64) -> Option<u64> {
    (id.0 >> TAG_SHIFT == tag).then_some(id.0 & ((1 << TAG_SHIFT) - 1))
}

/// One node's log line with its place in the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: u64,
    pub round: usize,
    pub role: RoundRole,
    pub round_start: Micros,
    #[serde(flatten)]
    pub log: NodeSlotLog,
}

/// Shared, read-only inputs of a protocol run.
pub struct ProtocolContext<'a> {
    pub env: Environment<'a>,
    pub registry: &'a ExtensionRegistry,
    pub base: RoundConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSample {
    pub epoch: u64,
    pub time: Micros,
    pub pattern: PatternName,
    pub fast_utilization: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u64,
    pub start: Micros,
    pub pairs_used: usize,
    pub new_deliveries: usize,
    pub pattern: PatternName,
    pub late: Option<LateRatioReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollectionParams {
    pub sink: NodeId,
    pub nta: usize,
    pub exit_threshold: usize,
    pub epoch_period: Micros,
    /// Robust/fast PHY pair the controller picks patterns over, if dynamic.
    pub dynamic: Option<MphyPattern>,
}

/// Crystal-style collection state of one replica.
#[derive(Debug, Clone)]
pub struct CollectionState {
    params: CollectionParams,
    sources: Vec<NodeId>,
    messages: Vec<Message>,
    /// Per node: ids of its messages in generation order.
    produced: Vec<Vec<usize>>,
    next_release: Vec<usize>,
    /// Per node: released messages the source has not seen acked.
    queues: Vec<VecDeque<usize>>,
    sink_delivery: Vec<Option<Micros>>,
    ack_latency: Vec<Option<Micros>>,
    pub consecutive_empty_ta: usize,
    node_patterns: Vec<MphyPattern>,
    schedules: Vec<(PatternName, EpochSchedule)>,
    slot_cursor: u64,
}

impl CollectionState {
    /// Set up a run: pre-draws every source's traffic up to `horizon`.
    pub fn new(
        params: CollectionParams,
        initial: MphyPattern,
        sources: Vec<NodeId>,
        traffic: &TrafficModel,
        horizon: Micros,
        ctx: &ProtocolContext<'_>,
        rng: &mut SimRng,
    ) -> Result<Self> {
        let n = ctx.env.topology.node_count();
        if params.sink >= n {
            return Err(Error::ConfigInvalid(format!(
                "sink {} is not in the topology",
                params.sink
            )));
        }
        if let Some(&s) = sources.iter().find(|&&s| s >= n || s == params.sink) {
            return Err(Error::ConfigInvalid(format!("node {s} cannot be a source")));
        }
        if params.exit_threshold == 0 {
            return Err(Error::ConfigInvalid("exit threshold must be at least 1".into()));
        }
        let mut messages = Vec::new();
        let mut produced = vec![Vec::new(); n];
        for &s in &sources {
            for mut m in traffic.generate(s, horizon, &mut rng.traffic[s]) {
                m.id = messages.len() as u64;
                produced[s].push(messages.len());
                messages.push(m);
            }
        }
        let count = messages.len();
        let mut state = Self {
            params,
            sources,
            messages,
            produced,
            next_release: vec![0; n],
            queues: vec![VecDeque::new(); n],
            sink_delivery: vec![None; count],
            ack_latency: vec![None; count],
            consecutive_empty_ta: 0,
            node_patterns: vec![initial; n],
            schedules: Vec::new(),
            slot_cursor: 0,
        };
        state.schedule_for(&initial, ctx)?;
        Ok(state)
    }

    pub fn params(&self) -> &CollectionParams {
        &self.params
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn sources(&self) -> &[NodeId] {
        &self.sources
    }

    /// Sink decode time of each message.
    pub fn sink_delivery(&self) -> &[Option<Micros>] {
        &self.sink_delivery
    }

    /// Ack-decode time minus generation time of each message.
    pub fn ack_latency(&self) -> &[Option<Micros>] {
        &self.ack_latency
    }

    pub fn node_pattern(&self, node: NodeId) -> MphyPattern {
        self.node_patterns[node]
    }

    pub fn sink_pattern(&self) -> MphyPattern {
        self.node_patterns[self.params.sink]
    }

    /// Sources holding released messages at the last release point.
    pub fn pending_sources(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.sources.iter().copied().filter(|&s| !self.queues[s].is_empty())
    }

    /// Messages generated at or before `now`.
    pub fn generated_by(&self, now: Micros) -> usize {
        self.messages.iter().filter(|m| m.generated <= now).count()
    }

    fn release(&mut self, now: Micros) {
        for &s in &self.sources {
            let list = &self.produced[s];
            let next = &mut self.next_release[s];
            while *next < list.len() && self.messages[list[*next]].generated <= now {
                self.queues[s].push_back(list[*next]);
                *next += 1;
            }
        }
    }

    /// Sources with a message whose window has closed before the sink got it.
    pub fn late_report(&mut self, now: Micros) -> LateRatioReport {
        self.release(now);
        let late = self
            .sources
            .iter()
            .filter(|&&s| {
                self.queues[s]
                    .iter()
                    .any(|&m| self.messages[m].window_end <= now && self.sink_delivery[m].is_none())
            })
            .count();
        LateRatioReport::new(self.sources.len(), late)
    }

    fn schedule_for(&mut self, pattern: &MphyPattern, ctx: &ProtocolContext<'_>) -> Result<usize> {
        if let Some(i) = self
            .schedules
            .iter()
            .position(|(n, s)| *n == pattern.name && s.pattern == *pattern)
        {
            return Ok(i);
        }
        let sp = ScheduleParams {
            epoch_period: self.params.epoch_period,
            nta: self.params.nta,
        };
        let s = build_schedule(&sp, pattern, &ctx.base, ctx.env.phys, &ctx.env.timing)?;
        self.schedules.push((pattern.name, s));
        Ok(self.schedules.len() - 1)
    }
}

struct RoundRunner<'c, 'a> {
    ctx: &'c ProtocolContext<'a>,
    scratch: RoundConfig,
    plans: Vec<NodePlan>,
}

impl<'c, 'a> RoundRunner<'c, 'a> {
    fn new(ctx: &'c ProtocolContext<'a>) -> Self {
        Self {
            ctx,
            scratch: ctx.base.clone(),
            plans: Vec::new(),
        }
    }

    /// Plans with each node's PHY and hooked NTX; no initiators yet.
    fn prepare(
        &mut self,
        config: &RoundConfig,
        epoch: u64,
        role: RoundRole,
        node_phy: impl Fn(NodeId) -> crate::phy::PhyId,
        rng: &mut SimRng,
    ) -> Result<()> {
        let n = self.ctx.env.topology.node_count();
        self.plans.clear();
        for node in 0..n {
            let mut plan = NodePlan {
                phy: node_phy(node),
                ntx: config.ntx,
                initiate: None,
            };
            if self.ctx.registry.has_driver_hooks() {
                self.scratch.clone_from(config);
                self.scratch.phy = plan.phy;
                let hctx = HookContext { epoch, role, node };
                apply_extensions_in_place(self.ctx.registry, &mut self.scratch, &hctx, &mut rng.rntx[node])?;
                plan.phy = self.scratch.phy;
                plan.ntx = self.scratch.ntx;
            }
            self.plans.push(plan);
        }
        Ok(())
    }

    fn run(&self, config: &RoundConfig, start: RoundStart, rng: &mut SimRng, record: bool) -> Result<RoundResult> {
        run_planned_round(config, &self.plans, &self.ctx.env, start, rng, record)
    }
}

fn push_trace(
    trace: &mut Option<&mut Vec<TraceRecord>>,
    epoch: u64,
    round: usize,
    role: RoundRole,
    start: Micros,
    r: &RoundResult,
) {
    if let Some(t) = trace.as_deref_mut() {
        t.extend(r.logs.iter().map(|&log| TraceRecord {
            epoch,
            round,
            role,
            round_start: start,
            log,
        }));
    }
}

fn add_radio(acc: &mut [RadioTime], r: &RoundResult) {
    for (a, t) in acc.iter_mut().zip(&r.radio) {
        a.add(*t);
    }
}

/// Run one collection epoch starting at `start`.
///
/// Radio-on time of every round is added to `radio`.
pub fn run_collection_epoch(
    state: &mut CollectionState,
    ctx: &ProtocolContext<'_>,
    epoch: u64,
    start: Micros,
    rng: &mut SimRng,
    radio: &mut [RadioTime],
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<EpochMetrics> {
    let sink = state.params.sink;
    let sink_pattern = state.sink_pattern();
    let idx = state.schedule_for(&sink_pattern, ctx)?;
    let schedule = state.schedules[idx].1.clone();
    let record = trace.is_some();
    let mut runner = RoundRunner::new(ctx);
    let mut cursor = start;
    let mut round_index = 0usize;
    state.consecutive_empty_ta = 0;

    let run = |state: &mut CollectionState,
               runner: &mut RoundRunner<'_, '_>,
               config: &RoundConfig,
               role: RoundRole,
               pair: usize,
               cursor: &mut Micros,
               initiators: &mut dyn FnMut(&mut CollectionState, &mut [NodePlan], &mut SimRng),
               rng: &mut SimRng|
     -> Result<(Micros, RoundResult)> {
        let patterns = &state.node_patterns;
        if role == RoundRole::S {
            runner.prepare(config, epoch, role, |n| patterns[n].robust_phy, rng)?;
        } else {
            runner.prepare(config, epoch, role, |n| patterns[n].pair_phy(pair), rng)?;
        }
        initiators(state, &mut runner.plans, rng);
        let round_start = *cursor;
        let rs = RoundStart {
            time: round_start,
            slot: state.slot_cursor,
        };
        let r = runner.run(config, rs, rng, record)?;
        state.slot_cursor += config.nslots as u64;
        *cursor = round_start + r.duration();
        Ok((round_start, r))
    };

    // S round: the sink floods sync and its current pattern.
    let s_config = &schedule.rounds[0].1;
    let (s_start, r) = run(
        state,
        &mut runner,
        s_config,
        RoundRole::S,
        0,
        &mut cursor,
        &mut |_, plans, _| plans[sink].initiate = Some(tagged(TAG_SYNC, epoch)),
        rng,
    )?;
    add_radio(radio, &r);
    push_trace(&mut trace, epoch, round_index, RoundRole::S, s_start, &r);
    round_index += 1;
    for node in 0..state.node_patterns.len() {
        if r.received[node].is_some() {
            state.node_patterns[node] = sink_pattern;
        }
    }

    let mut pairs_used = 0;
    let mut new_deliveries = 0;
    for (pair, (t_cfg, a_cfg)) in schedule.pair_rounds().enumerate() {
        pairs_used += 1;
        state.release(cursor);

        let registry = ctx.registry;
        let (t_start, r) = run(
            state,
            &mut runner,
            t_cfg,
            RoundRole::T,
            pair,
            &mut cursor,
            &mut |state, plans, rng| {
                for &s in &state.sources {
                    let head = state.queues[s].front().copied();
                    let hctx = HookContext {
                        epoch,
                        role: RoundRole::T,
                        node: s,
                    };
                    let role = registry.decide(head.is_some(), &hctx, &mut rng.backoff[s]);
                    if let (Some(m), NodeRoundRole::Initiator) = (head, role) {
                        plans[s].initiate = Some(tagged(TAG_DATA, m as u64));
                    }
                }
            },
            rng,
        )?;
        add_radio(radio, &r);
        push_trace(&mut trace, epoch, round_index, RoundRole::T, t_start, &r);
        round_index += 1;

        let decoded = r.received[sink].and_then(|d| untag(d, TAG_DATA)).map(|m| m as usize);
        let mut fresh = false;
        if let Some(m) = decoded {
            if state.sink_delivery[m].is_none() {
                let at = t_start + r.reception_offset(sink).unwrap_or_default();
                state.sink_delivery[m] = Some(at);
                fresh = true;
                new_deliveries += 1;
            }
        }
        if fresh {
            state.consecutive_empty_ta = 0;
        } else {
            state.consecutive_empty_ta += 1;
        }

        let ack = decoded.map_or(tagged(TAG_EMPTY, 0), |m| tagged(TAG_ACK, m as u64));
        let (a_start, r) = run(
            state,
            &mut runner,
            a_cfg,
            RoundRole::A,
            pair,
            &mut cursor,
            &mut |_, plans, _| plans[sink].initiate = Some(ack),
            rng,
        )?;
        add_radio(radio, &r);
        push_trace(&mut trace, epoch, round_index, RoundRole::A, a_start, &r);
        round_index += 1;

        if let Some(m) = decoded {
            let src = state.messages[m].source;
            if r.received[src] == Some(ack) && state.queues[src].front() == Some(&m) {
                state.queues[src].pop_front();
                let at = a_start + r.reception_offset(src).unwrap_or_default();
                state.ack_latency[m] = Some(at.saturating_sub(state.messages[m].generated));
            }
        }

        if state.consecutive_empty_ta >= state.params.exit_threshold {
            break;
        }
    }

    let mut late = None;
    if let Some(split) = state.params.dynamic {
        let report = state.late_report(start + state.params.epoch_period);
        let next = select_pattern(&report, &split)?;
        state.node_patterns[sink] = next;
        late = Some(report);
    }

    Ok(EpochMetrics {
        epoch,
        start,
        pairs_used,
        new_deliveries,
        pattern: sink_pattern.name,
        late,
    })
}

/// One flood from `source` carrying this epoch's payload.
pub fn run_dissemination_epoch(
    schedule: &EpochSchedule,
    ctx: &ProtocolContext<'_>,
    source: NodeId,
    epoch: u64,
    start: RoundStart,
    rng: &mut SimRng,
    record: bool,
) -> Result<RoundResult> {
    let (role, config) = schedule
        .rounds
        .first()
        .ok_or_else(|| Error::ConfigInvalid("empty schedule".into()))?;
    if source >= ctx.env.topology.node_count() {
        return Err(Error::ConfigInvalid(format!("source {source} is not in the topology")));
    }
    let mut runner = RoundRunner::new(ctx);
    runner.prepare(config, epoch, *role, |_| config.phy, rng)?;
    runner.plans[source].initiate = Some(tagged(TAG_PAYLOAD, epoch));
    runner.run(config, start, rng, record)
}
