//! Replica execution.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::harness::report::{AggregateReport, ReplicaReport, SegmentUtilization, SimReport, SCHEMA_VERSION};
use crate::harness::scenario::{Prepared, ProtocolPlan, Scenario};
use crate::medium::JamLevel;
use crate::middleware::{build_schedule, MphyPattern, ScheduleParams};
use crate::phy::Micros;
use crate::primitives::{Environment, RadioTime, RoundStart};
use crate::protocols::{
    run_collection_epoch, run_dissemination_epoch, CollectionState, PatternSample, ProtocolContext, TraceRecord,
};
use crate::rng::SimRng;

/// Validate and run every replica.
pub fn run_scenario(scenario: &Scenario) -> Result<SimReport> {
    scenario.prepare()?.run(None)
}

/// As [`run_scenario`], streaming every slot log as NDJSON to `trace`.
pub fn run_scenario_traced(scenario: &Scenario, trace: &mut dyn Write) -> Result<SimReport> {
    scenario.prepare()?.run(Some(trace))
}

#[derive(Serialize)]
struct TraceLine<'a> {
    replica: u32,
    #[serde(flatten)]
    record: &'a TraceRecord,
}

fn flush_trace(out: &mut dyn Write, replica: u32, buf: &mut Vec<TraceRecord>) -> Result<()> {
    for record in buf.drain(..) {
        serde_json::to_writer(
            &mut *out,
            &TraceLine {
                replica,
                record: &record,
            },
        )?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

impl Prepared {
    fn context(&self) -> ProtocolContext<'_> {
        ProtocolContext {
            env: Environment {
                topology: &self.topology,
                phys: &self.phys,
                medium: &self.medium,
                interference: &self.interference,
                timing: self.timing,
            },
            registry: &self.registry,
            base: self.base.clone(),
        }
    }

    /// Run all replicas. With a trace sink they run in order on one thread.
    pub fn run(&self, trace: Option<&mut dyn Write>) -> Result<SimReport> {
        let replicas: Vec<ReplicaReport> = match trace {
            Some(out) => (0..self.replicas)
                .map(|r| self.run_replica(r, Some(&mut *out)))
                .collect::<Result<_>>()?,
            None => (0..self.replicas)
                .into_par_iter()
                .map(|r| self.run_replica(r, None))
                .collect::<Result<_>>()?,
        };
        Ok(self.report(replicas))
    }

    pub fn report(&self, replicas: Vec<ReplicaReport>) -> SimReport {
        let aggregate = AggregateReport::pool(&replicas, &self.energy);
        SimReport {
            schema_version: SCHEMA_VERSION,
            name: self.name.clone(),
            protocol: self.protocol,
            seed: self.seed,
            replicas,
            aggregate,
        }
    }

    pub fn run_replica(&self, replica: u32, mut trace: Option<&mut dyn Write>) -> Result<ReplicaReport> {
        let n = self.topology.node_count();
        let mut rng = SimRng::new(self.seed, replica as u64, n);
        let ctx = self.context();
        let mut radio = vec![RadioTime::default(); n];
        let mut buf = Vec::new();

        match &self.plan {
            ProtocolPlan::Collection {
                params,
                initial,
                sources,
                traffic,
            } => {
                let mut state = CollectionState::new(
                    *params,
                    *initial,
                    sources.clone(),
                    traffic,
                    self.horizon,
                    &ctx,
                    &mut rng,
                )?;
                let epochs = self.horizon.as_u64().div_ceil(params.epoch_period.as_u64());
                let mut timeline = Vec::new();
                for e in 0..epochs {
                    let start = params.epoch_period * e;
                    let m = run_collection_epoch(
                        &mut state,
                        &ctx,
                        e,
                        start,
                        &mut rng,
                        &mut radio,
                        trace.is_some().then_some(&mut buf),
                    )?;
                    if let Some(out) = trace.as_deref_mut() {
                        flush_trace(out, replica, &mut buf)?;
                    }
                    if params.dynamic.is_some() {
                        timeline.push(PatternSample {
                            epoch: e,
                            time: start,
                            pattern: m.pattern,
                            fast_utilization: m.pattern.fast_utilization(),
                        });
                    }
                }
                let generated = state.messages().len() as u64;
                let delivered = state.sink_delivery().iter().filter(|d| d.is_some()).count() as u64;
                let latency: Vec<u64> = state.ack_latency().iter().flatten().map(|l| l.as_u64()).collect();
                let segments = if params.dynamic.is_some() {
                    self.segment_utilization(&timeline)
                } else {
                    Vec::new()
                };
                Ok(ReplicaReport::build(
                    replica,
                    epochs,
                    generated,
                    delivered,
                    latency,
                    &radio,
                    &self.energy,
                    timeline,
                    segments,
                ))
            }
            ProtocolPlan::Dissemination {
                source,
                destinations,
                epoch_period,
            } => {
                let sp = ScheduleParams {
                    epoch_period: *epoch_period,
                    nta: 0,
                };
                let schedule = build_schedule(
                    &sp,
                    &MphyPattern::single_phy(self.base.phy),
                    &self.base,
                    &self.phys,
                    &self.timing,
                )?;
                let epochs = self.horizon.as_u64().div_ceil(epoch_period.as_u64());
                let nslots = schedule.rounds[0].1.nslots as u64;
                let mut delivered = 0u64;
                let mut latency = Vec::new();
                for e in 0..epochs {
                    let start = *epoch_period * e;
                    let rs = RoundStart {
                        time: start,
                        slot: e * nslots,
                    };
                    let r = run_dissemination_epoch(&schedule, &ctx, *source, e, rs, &mut rng, trace.is_some())?;
                    radio.iter_mut().zip(&r.radio).for_each(|(a, t)| a.add(*t));
                    for &d in destinations {
                        if let Some(off) = r.reception_offset(d) {
                            delivered += 1;
                            latency.push(off.as_u64());
                        }
                    }
                    if let Some(out) = trace.as_deref_mut() {
                        buf.extend(r.logs.iter().map(|&log| TraceRecord {
                            epoch: e,
                            round: 0,
                            role: schedule.rounds[0].0,
                            round_start: start,
                            log,
                        }));
                        flush_trace(out, replica, &mut buf)?;
                    }
                }
                let generated = epochs * destinations.len() as u64;
                Ok(ReplicaReport::build(
                    replica,
                    epochs,
                    generated,
                    delivered,
                    latency,
                    &radio,
                    &self.energy,
                    Vec::new(),
                    Vec::new(),
                ))
            }
        }
    }

    /// Mean fast utilization of epochs starting inside each timeline
    /// segment. Without segments the whole run is one quiet segment.
    fn segment_utilization(&self, timeline: &[PatternSample]) -> Vec<SegmentUtilization> {
        let mut spans: Vec<(Micros, Micros, JamLevel)> = self
            .interference
            .segments()
            .iter()
            .map(|s| (s.start, s.end, s.level))
            .collect();
        if spans.is_empty() {
            spans.push((Micros::ZERO, self.horizon, JamLevel::None));
        }
        spans
            .into_iter()
            .map(|(start, end, level)| {
                let inside = timeline.iter().filter(|p| p.time >= start && p.time < end);
                let (epochs, sum) = inside.fold((0u64, 0u64), |(n, s), p| (n + 1, s + p.fast_utilization as u64));
                SegmentUtilization {
                    start_us: start.as_u64(),
                    end_us: end.as_u64(),
                    level,
                    epochs,
                    utilization_sum: sum,
                    mean_fast_utilization: sum as f64 / epochs.max(1) as f64,
                }
            })
            .collect()
    }
}
