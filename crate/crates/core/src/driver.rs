//! Slot-level radio state machine.
//!
//! Each active slot starts with the radio ramp-up. A transmitting radio then
//! fires READY, ADDRESS and END; a listening radio fires ADDRESS when a
//! preamble and access address are detected and END once the frame is in.
//! HOP sits at the integer midpoint of ADDRESS and END. A listening radio
//! that never sees ADDRESS is shut down by the END_MISS guard timer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::{DataId, FailReason, NodeId, ReceptionOutcome};
use crate::phy::{airtime, slot_duration, Micros, PhyId, PhyMode, SlotTiming, RADIO_RAMP_UP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SlotEventKind {
    RruDone,
    Address,
    Ready,
    Hop,
    End,
    EndMiss,
    /// Slot timer expiry that arms the next slot.
    Timer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotEvent {
    pub kind: SlotEventKind,
    /// Offset from slot start.
    pub time: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RadioStateKind {
    Off,
    RampUp,
    RxListen,
    RxActive,
    TxActive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RadioState {
    pub state: RadioStateKind,
    pub entered_at: Micros,
}

impl Default for RadioState {
    fn default() -> Self {
        Self {
            state: RadioStateKind::Off,
            entered_at: Micros::ZERO,
        }
    }
}

impl RadioState {
    pub fn is_allowed(from: RadioStateKind, to: RadioStateKind) -> bool {
        use RadioStateKind::*;
        matches!(
            (from, to),
            (Off, RampUp) | (RampUp, RxListen) | (RampUp, TxActive) | (RxListen, RxActive)
        ) || (to == Off && from != Off)
    }

    pub fn transition(&mut self, to: RadioStateKind, at: Micros) -> Result<()> {
        if !Self::is_allowed(self.state, to) || at < self.entered_at {
            return Err(Error::ConfigInvalid(format!(
                "illegal radio transition {:?} -> {:?} at {at}",
                self.state, to
            )));
        }
        self.state = to;
        self.entered_at = at;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotAction {
    Tx,
    RxSuccess,
    RxFail,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSlotLog {
    pub slot_index: u32,
    pub node: NodeId,
    pub action: SlotAction,
    pub radio_on: Micros,
    pub channel: u8,
    pub phy: PhyId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotDecision {
    Transmit(DataId),
    Listen,
    Sleep,
}

/// Precomputed timing of one (PHY, payload) slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotTimes {
    pub phy: PhyId,
    pub airtime: Micros,
    pub address_offset: Micros,
    pub slot_duration: Micros,
    pub miss_guard: Micros,
}

impl SlotTimes {
    pub fn new(phy: &PhyMode, payload_len: usize, timing: &SlotTiming) -> Result<Self> {
        Ok(Self {
            phy: phy.id,
            airtime: airtime(phy, payload_len)?,
            address_offset: phy.address_offset(),
            slot_duration: slot_duration(phy, payload_len, timing)?,
            miss_guard: timing.miss_guard,
        })
    }

    fn end(&self) -> Micros {
        RADIO_RAMP_UP + self.airtime
    }

    fn address(&self) -> Micros {
        RADIO_RAMP_UP + self.address_offset
    }

    fn hop(&self) -> Micros {
        let (a, e) = (self.address(), self.end());
        a + Micros((e - a).as_u64() / 2)
    }
}

/// Result of driving one node through one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotRun {
    pub log: NodeSlotLog,
    pub events: Vec<SlotEvent>,
    pub decoded: Option<DataId>,
}

struct Trace {
    radio: RadioState,
    events: Vec<SlotEvent>,
}

impl Trace {
    fn new() -> Self {
        Self {
            radio: RadioState::default(),
            events: Vec::with_capacity(6),
        }
    }

    fn event(&mut self, kind: SlotEventKind, time: Micros) {
        self.events.push(SlotEvent { kind, time });
    }

    fn enter(&mut self, state: RadioStateKind, at: Micros) {
        self.radio
            .transition(state, at)
            .expect("slot sequences only use legal transitions");
    }
}

/// Drive one node's radio through a slot.
///
/// `outcome` is the medium's verdict for a listening node and is ignored
/// otherwise.
pub fn run_slot(
    node: NodeId,
    slot_index: u32,
    channel: u8,
    decision: SlotDecision,
    outcome: Option<ReceptionOutcome>,
    times: &SlotTimes,
) -> SlotRun {
    let mut t = Trace::new();
    let (action, radio_on, decoded) = match decision {
        SlotDecision::Sleep => (SlotAction::Idle, Micros::ZERO, None),
        SlotDecision::Transmit(_) => {
            t.enter(RadioStateKind::RampUp, Micros::ZERO);
            t.event(SlotEventKind::RruDone, RADIO_RAMP_UP);
            t.event(SlotEventKind::Ready, RADIO_RAMP_UP);
            t.enter(RadioStateKind::TxActive, RADIO_RAMP_UP);
            t.event(SlotEventKind::Address, times.address());
            t.event(SlotEventKind::Hop, times.hop());
            t.event(SlotEventKind::End, times.end());
            t.enter(RadioStateKind::Off, times.end());
            (SlotAction::Tx, times.end(), None)
        }
        SlotDecision::Listen => {
            t.enter(RadioStateKind::RampUp, Micros::ZERO);
            t.event(SlotEventKind::RruDone, RADIO_RAMP_UP);
            t.enter(RadioStateKind::RxListen, RADIO_RAMP_UP);
            match outcome.unwrap_or(ReceptionOutcome::Failed(FailReason::Silence)) {
                ReceptionOutcome::Failed(FailReason::Silence) => {
                    let miss = (times.end() + times.miss_guard).min(times.slot_duration);
                    t.event(SlotEventKind::EndMiss, miss);
                    t.enter(RadioStateKind::Off, miss);
                    (SlotAction::RxFail, miss, None)
                }
                other => {
                    t.event(SlotEventKind::Address, times.address());
                    t.enter(RadioStateKind::RxActive, times.address());
                    t.event(SlotEventKind::Hop, times.hop());
                    t.event(SlotEventKind::End, times.end());
                    t.enter(RadioStateKind::Off, times.end());
                    match other.decoded() {
                        Some(d) => (SlotAction::RxSuccess, times.end(), Some(d)),
                        None => (SlotAction::RxFail, times.end(), None),
                    }
                }
            }
        }
    };
    if action != SlotAction::Idle {
        t.event(SlotEventKind::Timer, times.slot_duration);
    }
    SlotRun {
        log: NodeSlotLog {
            slot_index,
            node,
            action,
            radio_on,
            channel,
            phy: times.phy,
        },
        events: t.events,
        decoded,
    }
}

/// Radio-on time of a slot without materializing its event trace.
pub(crate) fn slot_radio_on(
    decision: SlotDecision,
    outcome: Option<ReceptionOutcome>,
    times: &SlotTimes,
) -> (SlotAction, Micros) {
    match decision {
        SlotDecision::Sleep => (SlotAction::Idle, Micros::ZERO),
        SlotDecision::Transmit(_) => (SlotAction::Tx, times.end()),
        SlotDecision::Listen => match outcome.unwrap_or(ReceptionOutcome::Failed(FailReason::Silence)) {
            ReceptionOutcome::Failed(FailReason::Silence) => (
                SlotAction::RxFail,
                (times.end() + times.miss_guard).min(times.slot_duration),
            ),
            ReceptionOutcome::Decoded(_) => (SlotAction::RxSuccess, times.end()),
            ReceptionOutcome::Failed(_) => (SlotAction::RxFail, times.end()),
        },
    }
}

/// Channel used by every node in global slot `slot_index`.
pub fn hop_channel(sequence: &[u8], slot_index: u64) -> Result<u8> {
    if sequence.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(sequence[(slot_index % sequence.len() as u64) as usize])
}
