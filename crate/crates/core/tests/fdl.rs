mod common;

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64 as C;

use gridfault::estimator::{build_estimator_bank, default_partition, BankOptions, EstimatorBank, MeasurementFrame};
use gridfault::fdl::{calibrate, calibrate_with_min, characterize, phases_from_currents, FaultEvent, FdlConfig, Pipeline};
use gridfault::grid::NetworkModel;
use gridfault::phase::Phase;
use gridfault::placement::{place, Objective};
use gridfault::simulator::{generate_frames, FaultKind, FaultSpec, NoiseSpec, Scenario};
use gridfault::Error;

/// Three 4-bus branches off bus 3, metered for maximum resolution.
fn three_branch_net() -> NetworkModel {
    let mut edges = vec![(1, 2), (2, 3), (3, 4), (4, 5)];
    edges.extend([(3, 6), (6, 7), (7, 8), (8, 9), (3, 10), (10, 11), (11, 12), (12, 13)]);
    let mut net = NetworkModel::from_edges(13, &edges, C::new(0.16, 0.12), C::new(0.6, 0.35));
    for b in 2..=13 {
        net.injections.insert(b, common::balanced(C::from_polar(-8.0, -0.3)));
    }
    place(&net, Objective::MaxResolution, &BTreeMap::new(), &[], &[]).unwrap().net
}

fn bank(net: &NetworkModel) -> EstimatorBank {
    build_estimator_bank(net, &default_partition(net).unwrap(), &BankOptions::default()).unwrap()
}

fn faulted(net: &NetworkModel, spec: FaultSpec, fault_time: usize, horizon: usize, seed: u64) -> Vec<MeasurementFrame> {
    generate_frames(&Scenario {
        net: net.clone(),
        fault: Some(spec),
        fault_time,
        horizon,
        noise: NoiseSpec::with_seed(seed),
    })
    .unwrap()
}

fn run(p: &mut Pipeline, frames: &[MeasurementFrame]) -> Vec<FaultEvent> {
    frames.iter().filter_map(|f| p.step(f).unwrap()).collect()
}

#[test]
fn noiseless_calibration_is_near_zero() {
    let net = three_branch_net();
    let bank = bank(&net);
    let frames = generate_frames(&Scenario::no_fault(net, 50, NoiseSpec::noiseless())).unwrap();
    let cal = calibrate_with_min(&bank, &frames, 10).unwrap();
    assert_eq!(cal.mu_w.len(), bank.r());
    assert!(cal.th_w < 1e-8 && cal.mu_w.iter().all(|&m| m < 1e-8), "{cal:?}");
    assert!(matches!(calibrate(&bank, &frames), Err(Error::Calibration(_))));
}

#[test]
fn zero_sequence_threshold_far_below_ground_fault() {
    let net = three_branch_net();
    let bank = bank(&net);
    let cal = calibrate(&bank, &generate_frames(&Scenario::no_fault(net.clone(), 1000, NoiseSpec::with_seed(3))).unwrap()).unwrap();
    let f = &faulted(&net, FaultSpec::new(6, 0.5, "1ph-e".parse().unwrap()), 0, 1, 4)[0];
    let out = bank.evaluate(&bank.z(f).unwrap());
    let zs = out.zero_seq[1..].iter().copied().fold(0.0, f64::max);
    assert!(zs > 100.0 * cal.th_0ng, "{zs} vs {}", cal.th_0ng);
}

#[test]
fn phase_rule() {
    assert_eq!(phases_from_currents(&[1000.0, 900.0, 5.0], 0.2).unwrap(), [Phase::A, Phase::B]);
    assert_eq!(phases_from_currents(&[10.0, 10.0, 10.0], 0.2).unwrap(), Phase::ALL);
    assert!(matches!(phases_from_currents(&[0.0; 3], 0.2), Err(Error::Inconclusive)));
}

#[test]
fn single_sagged_phase_overrides_currents() {
    let net = three_branch_net();
    let bank = bank(&net);
    let member = &bank.members[1];
    let model = &member.model;
    let vb = model.virtual_bus.unwrap();
    let v_phase = net.base.phase_voltage();
    let n3 = 3 * model.n_buses;
    let mut x = DVector::zeros(2 * n3);
    for (p, pu) in [0.02, 0.98, 1.01].into_iter().enumerate() {
        x[3 * (vb - 1) + p] = pu * v_phase;
    }
    let base_buses = bank.members[0].model.n_buses;
    assert_eq!(characterize(model, &x, base_buses, 0.2, 0.05, v_phase).unwrap(), [Phase::A]);
}

#[test]
fn bolted_fault_is_found_at_onset() {
    let net = three_branch_net();
    let bank = bank(&net);
    let cal = calibrate(&bank, &generate_frames(&Scenario::no_fault(net.clone(), 1000, NoiseSpec::with_seed(5))).unwrap()).unwrap();
    let line = 10;
    let frames = faulted(&net, FaultSpec::new(line, 0.5, FaultKind::ThreePhaseGround), 25, 40, 6);
    let mut p = Pipeline::new(&bank, cal, FdlConfig::default(), net.base.phase_voltage()).unwrap();
    let events = run(&mut p, &frames);
    assert_eq!(events.len(), 1, "{events:?}");
    let ev = &events[0];
    assert_eq!(ev.t_f, 25);
    assert_eq!(ev.cluster, bank.partition.cluster_of(line).unwrap());
    assert_eq!(ev.phases, Phase::ALL);
}

#[test]
fn two_faults_two_events() {
    let net = three_branch_net();
    let bank = bank(&net);
    let cal = calibrate(&bank, &generate_frames(&Scenario::no_fault(net.clone(), 1000, NoiseSpec::with_seed(7))).unwrap()).unwrap();
    // fault, clear, fault elsewhere
    let mut frames = faulted(&net, FaultSpec::new(3, 0.5, FaultKind::ThreePhaseGround), 10, 20, 8);
    frames.extend(generate_frames(&Scenario::no_fault(net.clone(), 20, NoiseSpec::with_seed(9))).unwrap());
    frames.extend(faulted(&net, FaultSpec::new(11, 0.5, "2ph/bc".parse().unwrap()), 10, 20, 10));
    for (t, f) in frames.iter_mut().enumerate() {
        f.t = t;
    }
    let mut p = Pipeline::new(&bank, cal, FdlConfig { delta: 2, ..FdlConfig::default() }, net.base.phase_voltage()).unwrap();
    let events = run(&mut p, &frames);
    let got: Vec<(usize, usize)> = events.iter().map(|e| (e.t_f, e.cluster)).collect();
    let want = [
        (10, bank.partition.cluster_of(3).unwrap()),
        (50, bank.partition.cluster_of(11).unwrap()),
    ];
    assert_eq!(got, want);
}

#[test]
fn quiet_stream_stays_quiet() {
    let net = three_branch_net();
    let bank = bank(&net);
    let cal = calibrate(&bank, &generate_frames(&Scenario::no_fault(net.clone(), 2000, NoiseSpec::with_seed(11))).unwrap()).unwrap();
    let frames = generate_frames(&Scenario::no_fault(net.clone(), 1000, NoiseSpec::with_seed(12))).unwrap();
    let mut p = Pipeline::new(&bank, cal, FdlConfig::default(), net.base.phase_voltage()).unwrap();
    let events = run(&mut p, &frames);
    assert!(events.len() <= 6, "{} false alarms", events.len());
}

#[test]
fn config_bounds() {
    assert!(FdlConfig { delta: 11, ..FdlConfig::default() }.validate().is_err());
    assert!(FdlConfig { gamma: 1.0, ..FdlConfig::default() }.validate().is_err());
    FdlConfig { delta: 10, ..FdlConfig::default() }.validate().unwrap();
}
