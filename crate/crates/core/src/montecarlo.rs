//! Seeded Monte Carlo campaigns over fault scenarios, and the PMU-count
//! curves of the placement bounds.

use std::io::Write;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{build_estimator_bank, default_partition, BankOptions, EstimatorBank};
use crate::fdl::{calibrate_outputs, Calibration, FdlConfig, Pipeline, MIN_CALIBRATION_FRAMES};
use crate::grid::{LineId, NetworkModel};
use crate::observability::PartitionKind;
use crate::par::Exec;
use crate::simulator::{
    apply_fault, placed_benchmark, solve_steady_state, BenchmarkGrounding, FaultKind, FaultSpec,
    FrameSource, NoiseSpec, Scenario, Snapshot,
};

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Noise seed of one run.
pub fn run_seed(campaign_seed: u64, scenario: usize, run: usize) -> u64 {
    mix(mix(mix(campaign_seed) ^ scenario as u64) ^ run as u64)
}

/// Seed of the no-fault calibration stream of one topology.
pub fn calibration_seed(campaign_seed: u64, topology: usize) -> u64 {
    mix(mix(campaign_seed ^ 0xca1b) ^ topology as u64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub name: String,
    /// Placed network: monitoring, splits and grounding included.
    pub net: NetworkModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioDef {
    pub label: String,
    pub topology: usize,
    pub fault: FaultSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Campaign {
    pub topologies: Vec<Topology>,
    pub scenarios: Vec<ScenarioDef>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default = "default_calibration_frames")]
    pub calibration_frames: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_th_v")]
    pub th_v: f64,
    /// First faulted frame; earlier frames are fault-free.
    #[serde(default = "default_fault_time")]
    pub fault_time: usize,
}

fn default_runs() -> usize {
    100
}
fn default_deltas() -> Vec<usize> {
    vec![0, 2, 3, 4, 5]
}
fn default_calibration_frames() -> usize {
    MIN_CALIBRATION_FRAMES
}
fn default_gamma() -> f64 {
    0.2
}
fn default_th_v() -> f64 {
    0.05
}
fn default_fault_time() -> usize {
    1
}

impl Campaign {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.deltas.is_empty() || self.fault_time == 0 {
            return Err(Error::Domain(
                "campaign needs runs >= 1, at least one delta and fault_time >= 1".into(),
            ));
        }
        for s in &self.scenarios {
            if s.topology >= self.topologies.len() {
                return Err(Error::Domain(format!(
                    "scenario {} refers to topology {}",
                    s.label, s.topology
                )));
            }
        }
        for &delta in &self.deltas {
            self.fdl(delta).validate()?;
        }
        self.noise.validate()
    }

    fn fdl(&self, delta: usize) -> FdlConfig {
        FdlConfig {
            delta,
            gamma: self.gamma,
            th_v: self.th_v,
        }
    }
}

/// Tallies of one scenario at one delta.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub delta: usize,
    pub detected_localized: usize,
    pub detected_mislocalized: usize,
    /// Includes runs aborted by an error.
    pub undetected: usize,
    /// Detected runs whose phases match the fault.
    pub characterized: usize,
    pub errors: usize,
    /// Events raised before the fault.
    pub false_alarms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub label: String,
    pub topology: String,
    pub line: LineId,
    pub fraction: f64,
    pub kind: FaultKind,
    /// Cluster (or line, with every bus monitored) expected in the event.
    pub expected: usize,
    pub cells: Vec<Cell>,
}

impl ScenarioResult {
    pub fn cell(&self, delta: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.delta == delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub seed: u64,
    pub runs: usize,
    pub calibrations: Vec<Calibration>,
    pub scenarios: Vec<ScenarioResult>,
}

pub const RESULT_HEADER: [&str; 12] = [
    "scenario",
    "topology",
    "kind",
    "line",
    "fraction",
    "delta",
    "detected_localized",
    "detected_mislocalized",
    "undetected",
    "characterized",
    "errors",
    "false_alarms",
];

impl CampaignResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RESULT_HEADER)?;
        for s in &self.scenarios {
            for c in &s.cells {
                w.write_record([
                    s.label.clone(),
                    s.topology.clone(),
                    s.kind.to_string(),
                    s.line.to_string(),
                    s.fraction.to_string(),
                    c.delta.to_string(),
                    c.detected_localized.to_string(),
                    c.detected_mislocalized.to_string(),
                    c.undetected.to_string(),
                    c.characterized.to_string(),
                    c.errors.to_string(),
                    c.false_alarms.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Bank and calibration of one topology.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub bank: EstimatorBank,
    pub calibration: Calibration,
    pub v_phase: f64,
}

/// Build the bank and calibrate it on a seeded no-fault stream.
pub fn prepare_topology(
    net: &NetworkModel,
    noise: NoiseSpec,
    frames: usize,
    seed: u64,
    exec: Exec,
) -> Result<Prepared> {
    let partition = default_partition(net)?;
    let opts = BankOptions {
        noise,
        exec,
        ..BankOptions::default()
    };
    let mut bank = build_estimator_bank(net, &partition, &opts)?;
    let mut noise = noise;
    noise.seed = seed;
    let source = FrameSource::new(&Scenario::no_fault(net.clone(), frames, noise))?;
    let frames: Vec<_> = source.collect();
    let outputs = exec.map(&frames, |f| bank.z(f).map(|z| bank.evaluate(&z)));
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;
    let calibration = calibrate_outputs(&outputs, MIN_CALIBRATION_FRAMES.min(frames.len()).max(2))?;
    // runs are the parallel unit from here on
    bank.exec = Exec::Sequential;
    Ok(Prepared {
        bank,
        calibration,
        v_phase: net.base.phase_voltage(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Localized,
    Mislocalized,
    Undetected,
    Error,
}

/// Run every scenario `runs` times. Runs of one scenario share noise across
/// deltas, so the delta columns differ only through the window length.
pub fn run_campaign(campaign: &Campaign, exec: Exec) -> Result<CampaignResult> {
    campaign.validate()?;
    let used: Vec<bool> = (0..campaign.topologies.len())
        .map(|t| campaign.scenarios.iter().any(|s| s.topology == t))
        .collect();
    let mut prepared = Vec::with_capacity(campaign.topologies.len());
    for (t, topo) in campaign.topologies.iter().enumerate() {
        if !used[t] {
            prepared.push(None);
            continue;
        }
        info!("preparing topology {}", topo.name);
        let p = prepare_topology(
            &topo.net,
            campaign.noise,
            campaign.calibration_frames,
            calibration_seed(campaign.seed, t),
            exec,
        )?;
        prepared.push(Some(p));
    }
    let calibrations = prepared
        .iter()
        .flatten()
        .map(|p| p.calibration.clone())
        .collect();

    let mut scenarios = Vec::with_capacity(campaign.scenarios.len());
    for (si, def) in campaign.scenarios.iter().enumerate() {
        let topo = &campaign.topologies[def.topology];
        let prep = prepared[def.topology].as_ref().expect("prepared above");
        scenarios.push(run_scenario(campaign, si, def, topo, prep, exec)?);
    }
    Ok(CampaignResult {
        seed: campaign.seed,
        runs: campaign.runs,
        calibrations,
        scenarios,
    })
}

fn run_scenario(
    campaign: &Campaign,
    si: usize,
    def: &ScenarioDef,
    topo: &Topology,
    prep: &Prepared,
    exec: Exec,
) -> Result<ScenarioResult> {
    let partition = &prep.bank.partition;
    let line = def.fault.line;
    let expected = match partition.kind {
        PartitionKind::Lines => line,
        _ => partition
            .cluster_of(line)
            .ok_or_else(|| Error::Domain(format!("scenario {}: line {line} is not in service", def.label)))?,
    };
    info!("scenario {} ({} runs)", def.label, campaign.runs);
    let pre = Snapshot::from_state(&topo.net, &solve_steady_state(&topo.net)?);
    let (faulted, _) = apply_fault(&topo.net, &def.fault)?;
    let post = Snapshot::from_state(&topo.net, &solve_steady_state(&faulted)?);
    let max_delta = campaign.deltas.iter().copied().max().unwrap_or(0);
    let horizon = campaign.fault_time + max_delta + 1;
    let truth = def.fault.kind.phases();

    let runs = exec.map_range(campaign.runs, |run| {
        let mut noise = campaign.noise;
        noise.seed = run_seed(campaign.seed, si, run);
        let source = FrameSource::from_snapshots(pre.clone(), Some(post.clone()), campaign.fault_time, horizon, noise);
        let frames: Vec<_> = source.collect();
        let mut evaluated = Vec::with_capacity(frames.len());
        for f in &frames {
            match prep.bank.z(f) {
                Ok(z) => {
                    let out = prep.bank.evaluate(&z);
                    evaluated.push((f.t, z, out));
                }
                Err(_) => return vec![(Outcome::Error, false, 0); campaign.deltas.len()],
            }
        }
        campaign
            .deltas
            .iter()
            .map(|&delta| {
                let pipeline = Pipeline::new(&prep.bank, prep.calibration.clone(), campaign.fdl(delta), prep.v_phase);
                let mut pipeline = match pipeline {
                    Ok(p) => p,
                    Err(_) => return (Outcome::Error, false, 0),
                };
                let mut false_alarms = 0;
                for (t, z, out) in &evaluated {
                    match pipeline.step_output(*t, z, out) {
                        Ok(Some(ev)) if ev.t_f < campaign.fault_time => false_alarms += 1,
                        Ok(Some(ev)) => {
                            let outcome = if ev.cluster == expected {
                                Outcome::Localized
                            } else {
                                Outcome::Mislocalized
                            };
                            return (outcome, ev.phases == truth, false_alarms);
                        }
                        Ok(None) => {}
                        Err(_) => return (Outcome::Error, false, false_alarms),
                    }
                }
                (Outcome::Undetected, false, false_alarms)
            })
            .collect::<Vec<_>>()
    });

    let mut cells: Vec<Cell> = campaign
        .deltas
        .iter()
        .map(|&delta| Cell {
            delta,
            ..Cell::default()
        })
        .collect();
    for run in &runs {
        for (cell, &(outcome, phases_ok, fa)) in cells.iter_mut().zip(run) {
            match outcome {
                Outcome::Localized => cell.detected_localized += 1,
                Outcome::Mislocalized => cell.detected_mislocalized += 1,
                Outcome::Undetected => cell.undetected += 1,
                Outcome::Error => {
                    cell.undetected += 1;
                    cell.errors += 1;
                }
            }
            cell.characterized += phases_ok as usize;
            cell.false_alarms += fa;
        }
    }
    Ok(ScenarioResult {
        label: def.label.clone(),
        topology: topo.name.clone(),
        line,
        fraction: def.fault.fraction,
        kind: def.fault.kind,
        expected,
        cells,
    })
}

/// Slots of the benchmark scenario table: (kind, line, fraction, neutral).
/// The two compensated faults flagged `true` are the hard cases, where one
/// sample is not enough to localize reliably.
pub const BENCHMARK_SCENARIOS: [(&str, LineId, f64, bool); 20] = [
    ("3ph", 27, 0.25, false),
    ("2ph", 52, 0.5, false),
    ("3ph", 66, 0.75, false),
    ("1ph-e", 13, 0.25, false),
    ("1ph-c", 13, 0.25, false),
    ("2ph", 79, 0.5, false),
    ("3ph", 31, 0.75, false),
    ("1ph-e", 25, 0.25, false),
    ("1ph-c", 25, 0.25, false),
    ("2ph", 60, 0.5, false),
    ("2ph", 43, 0.5, false),
    ("1ph-e", 47, 0.75, false),
    ("1ph-c", 47, 0.75, false),
    ("3ph", 8, 0.5, false),
    ("2ph", 72, 0.5, false),
    ("2ph", 3, 0.5, false),
    ("1ph-e", 50, 0.25, false),
    ("1ph-c", 50, 0.25, true),
    ("1ph-e", 19, 0.5, false),
    ("1ph-c", 19, 0.5, true),
];

/// Is this benchmark slot one of the hard compensated cases?
pub fn is_critical(label: &str) -> bool {
    BENCHMARK_SCENARIOS
        .iter()
        .any(|&(k, l, f, c)| c && benchmark_label(k, l, f) == label)
}

fn benchmark_label(kind: &str, line: LineId, fraction: f64) -> String {
    format!("{kind} line {line} at {:.0}%", fraction * 100.0)
}

/// The 20 benchmark scenarios on both switch states. Topologies 0 and 1 are
/// the normal state (earthed, compensated), 2 and 3 the second state.
pub fn benchmark_campaign(runs: usize, seed: u64) -> Result<Campaign> {
    let earthed = placed_benchmark(BenchmarkGrounding::Earthed)?;
    let compensated = placed_benchmark(BenchmarkGrounding::Compensated)?;
    let topo = |name: &str, net: &NetworkModel| Topology {
        name: name.into(),
        net: net.clone(),
    };
    let topologies = vec![
        topo("normal/earthed", &earthed.net),
        topo("normal/compensated", &compensated.net),
        topo("second/earthed", &earthed.topologies[0]),
        topo("second/compensated", &compensated.topologies[0]),
    ];

    let mut scenarios = Vec::new();
    for state in 0..2 {
        for &(kind, line, fraction, _) in &BENCHMARK_SCENARIOS {
            let compensated = kind == "1ph-c";
            let topology = 2 * state + compensated as usize;
            scenarios.push(ScenarioDef {
                label: benchmark_label(kind, line, fraction),
                topology,
                fault: FaultSpec::new(line, fraction, kind.parse()?),
            });
        }
    }
    Ok(Campaign {
        topologies,
        scenarios,
        runs,
        deltas: default_deltas(),
        seed,
        noise: NoiseSpec::default(),
        calibration_frames: MIN_CALIBRATION_FRAMES,
        gamma: default_gamma(),
        th_v: default_th_v(),
        fault_time: default_fault_time(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveGrid {
    pub sizes: Vec<usize>,
    /// Extra meters (forks, splits) as a fraction of n.
    pub extra_fractions: Vec<f64>,
    /// Percent.
    pub resolutions: Vec<f64>,
    /// Percent.
    pub resolution_gains: Vec<f64>,
}

impl Default for CurveGrid {
    fn default() -> Self {
        CurveGrid {
            sizes: (1..=100).map(|k| 10 * k).collect(),
            extra_fractions: vec![0.0, 0.05, 0.1, 0.2],
            resolutions: (0..=10).map(|k| 5.0 * k as f64).collect(),
            resolution_gains: vec![0.0, 5.0, 10.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub n: usize,
    pub extras_pct: f64,
    pub d_bar_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRow {
    pub r_pct: f64,
    pub delta_r_pct: f64,
    pub d_bar_pct: f64,
}

/// Upper bound on the meter share versus grid size:
/// `floor(n/2) + 1 + extras` out of `n`.
pub fn size_curve(grid: &CurveGrid) -> Vec<SizeRow> {
    let mut rows = Vec::new();
    for &f in &grid.extra_fractions {
        for &n in &grid.sizes {
            let extras = (f * n as f64).round() as usize;
            let d_bar = n / 2 + 1 + extras;
            rows.push(SizeRow {
                n,
                extras_pct: 100.0 * extras as f64 / n as f64,
                d_bar_pct: 100.0 * d_bar as f64 / n as f64,
            });
        }
    }
    rows
}

/// Meter share versus resolution for large grids: `r% + 50% + dr%`.
pub fn resolution_curve(grid: &CurveGrid) -> Vec<ResolutionRow> {
    let mut rows = Vec::new();
    for &dr in &grid.resolution_gains {
        for &r in &grid.resolutions {
            rows.push(ResolutionRow {
                r_pct: r,
                delta_r_pct: dr,
                d_bar_pct: r + 50.0 + dr,
            });
        }
    }
    rows
}

/// Both curves in one long-format CSV: `curve,x,level,d_bar_pct`, where
/// `x` is `n` or `r%` and `level` the extra-meter or resolution-gain share.
pub fn emit_curves<W: Write>(grid: &CurveGrid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["curve", "x", "level", "d_bar_pct"])?;
    for row in size_curve(grid) {
        w.write_record([
            "size".to_string(),
            row.n.to_string(),
            format!("{:.4}", row.extras_pct),
            format!("{:.4}", row.d_bar_pct),
        ])?;
    }
    for row in resolution_curve(grid) {
        w.write_record([
            "resolution".to_string(),
            format!("{:.4}", row.r_pct),
            format!("{:.4}", row.delta_r_pct),
            format!("{:.4}", row.d_bar_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}
