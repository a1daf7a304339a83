//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use sfsim_core::driver::SlotAction;
use sfsim_core::harness::{Scenario, SimReport};
use sfsim_core::medium::{DataId, InterferenceScenario, JamLevel, MediumParams, NodeRole, ReceptionModel, Topology};
use sfsim_core::middleware::{ExtensionRegistry, MphyPattern, NodeRoundRole, PatternName};
use sfsim_core::phy::{airtime, Micros, PhyId, PhyMode, PhyTable, SlotTiming};
use sfsim_core::primitives::{run_round, Environment, Initiator, Primitive, RadioTime, RoundConfig, RoundStart};
use sfsim_core::protocols::{
    backoff_extension, rntx_extension, run_collection_epoch, select_pattern_name, CollectionParams, CollectionState,
    LateRatioReport, PeriodicPhase, ProtocolContext, TrafficModel,
};
use sfsim_core::rng::{stream, Purpose, SimRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn manifest(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn scenario(file: &str) -> Scenario {
    Scenario::from_path(manifest(&format!("scenarios/{file}"))).expect("bundled scenario parses")
}

fn run(sc: &Scenario) -> SimReport {
    sfsim_core::run_scenario(sc).expect("bundled scenario runs")
}

fn within(elapsed: Duration, limit: Duration) -> (bool, String) {
    (elapsed < limit, format!("{:.3}s", elapsed.as_secs_f64()))
}

fn c1_pattern_table() -> Outcome {
    let t = Instant::now();
    let eps = 1e-9;
    let cases = [
        (0.0, PatternName::Mphy75),
        (0.25, PatternName::Mphy75),
        (0.25 + eps, PatternName::Mphy50),
        (0.5, PatternName::Mphy50),
        (0.5 + eps, PatternName::Mphy25),
        (0.75, PatternName::Mphy25),
        (0.75 + eps, PatternName::Mphy0),
        (1.0, PatternName::Mphy0),
    ];
    let mut bad = Vec::new();
    for (ratio, want) in cases {
        let got = select_pattern_name(&LateRatioReport::from_ratio(48, ratio)).unwrap();
        if got != want {
            bad.push(format!("{ratio} -> {got}"));
        }
    }
    // Integer late counts hit the boundaries exactly too.
    for (late, want) in [
        (12, PatternName::Mphy75),
        (13, PatternName::Mphy50),
        (36, PatternName::Mphy25),
        (37, PatternName::Mphy0),
    ] {
        let got = select_pattern_name(&LateRatioReport::new(48, late)).unwrap();
        if got != want {
            bad.push(format!("{late}/48 -> {got}"));
        }
    }
    let (fast, time) = within(t.elapsed(), Duration::from_secs(1));
    outcome(bad.is_empty() && fast, format!("mismatches {bad:?}, {time}"))
}

fn c2_rntx_distribution() -> Outcome {
    let t = Instant::now();
    let cfg = RoundConfig::new(Primitive::Rof, PhyId::Ble2M, 6, 12);
    let mut rng = stream(2, 0, 0, Purpose::Rntx);
    let draws = 100_000;
    let mut counts = [0u32; 13];
    let mut out_of_range = 0;
    for _ in 0..draws {
        let n = rntx_extension(&cfg, &mut rng).unwrap().ntx as usize;
        if (6..=12).contains(&n) {
            counts[n] += 1;
        } else {
            out_of_range += 1;
        }
    }
    let worst = counts[6..]
        .iter()
        .map(|&c| (c as f64 / draws as f64 - 1.0 / 7.0).abs())
        .fold(0.0, f64::max);
    let (fast, time) = within(t.elapsed(), Duration::from_secs(1));
    outcome(
        out_of_range == 0 && worst <= 0.01 && fast,
        format!("max |freq - 1/7| = {worst:.4}, out of range {out_of_range}, {time}"),
    )
}

fn c3_backoff_rate() -> Outcome {
    let t = Instant::now();
    let mut rng = stream(3, 0, 0, Purpose::Backoff);
    let trials = 100_000;
    let initiators = (0..trials)
        .filter(|_| backoff_extension(true, &mut rng) == NodeRoundRole::Initiator)
        .count();
    let ratio = initiators as f64 / trials as f64;
    let (fast, time) = within(t.elapsed(), Duration::from_secs(1));
    outcome(
        (ratio - 0.8).abs() <= 0.01 && fast,
        format!("initiator ratio {ratio:.4}, {time}"),
    )
}

fn line(n: usize) -> Topology {
    let mut m = vec![vec![f64::NEG_INFINITY; n]; n];
    for i in 0..n - 1 {
        m[i][i + 1] = -60.0;
        m[i + 1][i] = -60.0;
    }
    Topology::new(vec![NodeRole::Forwarder; n], m).unwrap()
}

fn golden_matches(primitive: Primitive, file: &str) -> Result<(), String> {
    let topo = line(8);
    let phys = PhyTable::default();
    let medium = MediumParams {
        model: ReceptionModel::Ideal,
        ..MediumParams::default()
    };
    let none = InterferenceScenario::none();
    let env = Environment {
        topology: &topo,
        phys: &phys,
        medium: &medium,
        interference: &none,
        timing: SlotTiming::default(),
    };
    let cfg = RoundConfig::new(primitive, PhyId::Ble1M, 6, 12).with_initiators([Initiator {
        node: 0,
        data: DataId(1),
    }]);
    let r = run_round(&cfg, &env, RoundStart::default(), &mut SimRng::new(0, 0, 8)).map_err(|e| e.to_string())?;
    let mut reader = csv::Reader::from_path(manifest(&format!("tests/golden/{file}"))).map_err(|e| e.to_string())?;
    let rows: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    if rows.len() != r.logs.len() {
        return Err(format!("{} rows vs {} logs", rows.len(), r.logs.len()));
    }
    for (row, log) in rows.iter().zip(&r.logs) {
        let action = match log.action {
            SlotAction::Tx => "Tx",
            SlotAction::RxSuccess => "RxSuccess",
            SlotAction::RxFail => "RxFail",
            SlotAction::Idle => "Idle",
        };
        let got = [
            log.slot_index.to_string(),
            log.node.to_string(),
            action.to_string(),
            log.channel.to_string(),
            log.radio_on.as_u64().to_string(),
        ];
        if got.iter().zip(row.iter()).any(|(a, b)| a != b) {
            return Err(format!("row {row:?} vs {got:?}"));
        }
    }
    for (node, first) in r.first_rx_slot.iter().enumerate().skip(1) {
        if *first != Some(node as u32 - 1) {
            return Err(format!("node {node} first rx {first:?}"));
        }
    }
    Ok(())
}

fn c4_primitive_traces() -> Outcome {
    let t = Instant::now();
    let rof = golden_matches(Primitive::Rof, "line8_rof.csv");
    let glossy = golden_matches(Primitive::Glossy, "line8_glossy.csv");
    let (fast, time) = within(t.elapsed(), Duration::from_secs(1));
    outcome(
        rof.is_ok() && glossy.is_ok() && fast,
        format!("rof {rof:?}, glossy {glossy:?}, {time}"),
    )
}

fn c5_airtime_oracle() -> Outcome {
    let mut reader = csv::Reader::from_path(manifest("docs/framing.csv")).unwrap();
    let mut rows = 0;
    let mut bad = Vec::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let phy: PhyId = rec[0].parse().unwrap();
        let len: usize = rec[1].parse().unwrap();
        let want: u64 = rec[2].parse().unwrap();
        match airtime(&PhyMode::builtin(phy), len) {
            Ok(got) if got.as_u64() == want => {}
            other => bad.push(format!("{phy:?}/{len}: {other:?} != {want}")),
        }
        rows += 1;
    }
    // Lower data rate means strictly longer airtime along the BLE chain.
    // 802.15.4 sits between 1M and 125K; coded 500K framing overhead puts
    // it above 802.15.4 for empty payloads, so that pair is not ordered.
    let chains: [&[PhyId]; 2] = [
        &[PhyId::Ble2M, PhyId::Ble1M, PhyId::Ble500K, PhyId::Ble125K],
        &[PhyId::Ble1M, PhyId::Ieee802154, PhyId::Ble125K],
    ];
    let mut monotone = true;
    for chain in chains {
        for len in [0usize, 8, 64, 118, 248] {
            let times: Vec<Micros> = chain
                .iter()
                .filter_map(|&p| airtime(&PhyMode::builtin(p), len).ok())
                .collect();
            monotone &= times.windows(2).all(|w| w[0] < w[1]);
        }
    }
    outcome(
        bad.is_empty() && monotone && rows > 0,
        format!("{rows} rows, mismatches {bad:?}, cross-PHY monotone {monotone}"),
    )
}

fn c6_dense_collapse_and_rescue() -> Outcome {
    let t = Instant::now();
    let plain = run(&scenario("dense_2m.toml")).aggregate;
    let rntx = run(&scenario("dense_2m_rntx.toml")).aggregate;
    let backoff = run(&scenario("dense_2m_backoff.toml")).aggregate;
    let pass = plain.reliability < 0.5
        && rntx.reliability >= 0.99
        && backoff.reliability >= 0.99
        && backoff.radio_on_us_per_node < rntx.radio_on_us_per_node;
    outcome(
        pass,
        format!(
            "plain {:.4}, rntx {:.4}, backoff {:.4}; radio-on/node backoff {:.0} us vs rntx {:.0} us, {:.1}s",
            plain.reliability,
            rntx.reliability,
            backoff.reliability,
            backoff.radio_on_us_per_node,
            rntx.radio_on_us_per_node,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn c7_static_trend() -> Outcome {
    let base = scenario("static_mphy.toml");
    let mut results = Vec::new();
    for name in PatternName::ALL {
        let mut sc = base.clone();
        sc.multiphy.as_mut().expect("multiphy section").pattern = name;
        let a = run(&sc).aggregate;
        results.push((name, a.reliability, a.radio_on_us));
    }
    results.sort_by_key(|r| r.0.fast_utilization());
    let reliable = results.iter().all(|r| r.1 >= 0.99);
    let decreasing = results.windows(2).all(|w| w[1].2 < w[0].2);
    let on = |n: PatternName| results.iter().find(|r| r.0 == n).unwrap().2 as f64;
    let ratio = on(PatternName::Mphy75) / on(PatternName::Mphy0);
    let rows: Vec<String> = results
        .iter()
        .map(|(n, rel, radio)| format!("{n} {rel:.4}/{radio}"))
        .collect();
    outcome(
        reliable && decreasing && ratio <= 0.65,
        format!("{}; MPHY75/MPHY0 radio-on {ratio:.3}", rows.join(", ")),
    )
}

fn c8_dynamic_controller() -> Outcome {
    let dynamic = run(&scenario("dynamic_timeline.toml")).aggregate;
    let single = run(&scenario("timeline_500k.toml")).aggregate;
    let rel_ok = (dynamic.reliability - single.reliability).abs() <= 0.02;
    let radio_ratio = dynamic.radio_on_us_per_node / single.radio_on_us_per_node;
    let mean = |level: JamLevel| -> Vec<f64> {
        dynamic
            .segments
            .iter()
            .filter(|s| s.level == level)
            .map(|s| s.mean_fast_utilization)
            .collect()
    };
    let strong = mean(JamLevel::Strong);
    let quiet = mean(JamLevel::None);
    let seg_ok = !strong.is_empty() && !quiet.is_empty() && strong.iter().all(|s| quiet.iter().all(|q| s < q));
    let segs: Vec<String> = dynamic
        .segments
        .iter()
        .map(|s| format!("{:?} {:.2}", s.level, s.mean_fast_utilization))
        .collect();
    outcome(
        rel_ok && radio_ratio <= 0.9 && seg_ok,
        format!(
            "reliability {:.4} vs {:.4}; radio-on ratio {radio_ratio:.3}; fast utilization [{}]",
            dynamic.reliability,
            single.reliability,
            segs.join(", ")
        ),
    )
}

fn c9_determinism() -> Outcome {
    let mut sc = scenario("static_mphy.toml");
    sc.medium = MediumParams::default();
    sc.replicas = 6;
    let a = run(&sc).to_json().unwrap();
    let b = run(&sc).to_json().unwrap();
    let prepared = sc.prepare().unwrap();
    let forward: Vec<_> = (0..sc.replicas)
        .map(|r| prepared.run_replica(r, None).unwrap())
        .collect();
    let mut reversed = forward.clone();
    reversed.reverse();
    let same_aggregate = prepared.report(forward).aggregate == prepared.report(reversed).aggregate;
    outcome(
        a == b && same_aggregate,
        format!(
            "identical JSON {}, permutation-invariant aggregate {same_aggregate}",
            a == b
        ),
    )
}

fn star(n: usize) -> Topology {
    let mut m = vec![vec![f64::NEG_INFINITY; n]; n];
    for row in m.iter_mut().skip(1) {
        row[0] = -60.0;
    }
    m[0][1..].fill(-60.0);
    let mut roles = vec![NodeRole::Source; n];
    roles[0] = NodeRole::Destination;
    Topology::new(roles, m).unwrap()
}

fn c10_collection_state_machine() -> Outcome {
    let topo = star(3);
    let phys = PhyTable::default();
    let medium = MediumParams {
        model: ReceptionModel::Ideal,
        ..MediumParams::default()
    };
    let none = InterferenceScenario::none();
    let registry = ExtensionRegistry::new();
    let ctx = ProtocolContext {
        env: Environment {
            topology: &topo,
            phys: &phys,
            medium: &medium,
            interference: &none,
            timing: SlotTiming::default(),
        },
        registry: &registry,
        base: RoundConfig::new(Primitive::Rof, PhyId::Ble2M, 6, 12),
    };
    let params = CollectionParams {
        sink: 0,
        nta: 12,
        exit_threshold: 4,
        epoch_period: Micros::from_secs(1),
        dynamic: None,
    };
    let pattern = MphyPattern::single_phy(PhyId::Ble2M);

    let mut rng = SimRng::new(10, 0, 3);
    let traffic = TrafficModel::Periodic {
        period: Micros::from_secs(10),
        phase: PeriodicPhase::Aligned,
    };
    let mut st =
        CollectionState::new(params, pattern, vec![2], &traffic, Micros::from_secs(1), &ctx, &mut rng).unwrap();
    let mut radio = vec![RadioTime::default(); 3];
    let mut trace = Vec::new();
    let one = run_collection_epoch(&mut st, &ctx, 0, Micros::ZERO, &mut rng, &mut radio, Some(&mut trace)).unwrap();
    // The delivering pair is the first T round whose sink log is a success.
    let first_pair = trace
        .iter()
        .filter(|r| r.log.node == 0 && r.log.action == SlotAction::RxSuccess && r.round % 2 == 1)
        .map(|r| r.round.div_ceil(2))
        .min();
    let single_ok = one.new_deliveries == 1 && first_pair == Some(1) && one.pairs_used == 5;

    let mut rng = SimRng::new(10, 1, 3);
    let mut idle =
        CollectionState::new(params, pattern, vec![], &traffic, Micros::from_secs(1), &ctx, &mut rng).unwrap();
    let zero = run_collection_epoch(&mut idle, &ctx, 0, Micros::ZERO, &mut rng, &mut radio, None).unwrap();
    let zero_ok = zero.pairs_used == 4 && zero.new_deliveries == 0;

    outcome(
        single_ok && zero_ok,
        format!(
            "single source: delivered in pair {first_pair:?}, {} pairs total; zero traffic: {} pairs",
            one.pairs_used, zero.pairs_used
        ),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 10] = [
        ("pattern table exactness", c1_pattern_table),
        ("RNTX distribution", c2_rntx_distribution),
        ("backoff rate", c3_backoff_rate),
        ("primitive traces", c4_primitive_traces),
        ("airtime oracle", c5_airtime_oracle),
        ("dense 2M collapse and rescue", c6_dense_collapse_and_rescue),
        ("static multi-PHY trend", c7_static_trend),
        ("dynamic controller behaviour", c8_dynamic_controller),
        ("determinism", c9_determinism),
        ("collection state machine", c10_collection_state_machine),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
