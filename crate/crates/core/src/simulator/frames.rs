use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{apply_fault, solve_steady_state, FaultSpec, NoiseSpec, SteadyState};
use crate::error::{Error, Result};
use crate::estimator::{BusReading, MeasurementFrame, Polar};
use crate::grid::{BusId, NetworkModel};

type C = Complex64;

/// Exact meter readings: voltage, and current where the meter has it.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub readings: BTreeMap<BusId, ([C; 3], Option<[C; 3]>)>,
}

impl Snapshot {
    /// Readings of every physical meter of `net`: full PMUs on monitored
    /// buses, voltage only on voltage-only buses.
    pub fn from_state(net: &NetworkModel, ss: &SteadyState) -> Self {
        let mut readings = BTreeMap::new();
        for &b in &net.monitored {
            if !net.is_fictitious(b) {
                readings.insert(b, (ss.voltage(b), Some(ss.current(b))));
            }
        }
        for &b in &net.voltage_only {
            readings.insert(b, (ss.voltage(b), None));
        }
        Snapshot { readings }
    }

    pub fn voltage(&self, bus: BusId) -> Option<[C; 3]> {
        self.readings.get(&bus).map(|r| r.0)
    }

    pub fn current(&self, bus: BusId) -> Option<[C; 3]> {
        self.readings.get(&bus).and_then(|r| r.1)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub net: NetworkModel,
    pub fault: Option<FaultSpec>,
    /// First faulted sample.
    pub fault_time: usize,
    /// Number of samples.
    pub horizon: usize,
    pub noise: NoiseSpec,
}

impl Scenario {
    pub fn no_fault(net: NetworkModel, horizon: usize, noise: NoiseSpec) -> Self {
        Scenario {
            net,
            fault: None,
            fault_time: horizon,
            horizon,
            noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.fault.is_some() && self.fault_time >= self.horizon {
            return Err(Error::Domain(format!(
                "fault time {} not before horizon {}",
                self.fault_time, self.horizon
            )));
        }
        Ok(())
    }
}

/// Seeded stream of noisy frames switching from the pre-fault to the
/// post-fault snapshot at `fault_time`.
#[derive(Debug, Clone)]
pub struct FrameSource {
    pre: Snapshot,
    post: Option<Snapshot>,
    fault_time: usize,
    horizon: usize,
    noise: NoiseSpec,
    rng: ChaCha8Rng,
    t: usize,
}

impl FrameSource {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let pre = Snapshot::from_state(&scenario.net, &solve_steady_state(&scenario.net)?);
        let post = match &scenario.fault {
            Some(spec) => {
                let (faulted, _) = apply_fault(&scenario.net, spec)?;
                Some(Snapshot::from_state(&scenario.net, &solve_steady_state(&faulted)?))
            }
            None => None,
        };
        Ok(Self::from_snapshots(
            pre,
            post,
            scenario.fault_time,
            scenario.horizon,
            scenario.noise,
        ))
    }

    /// Reuse already solved snapshots (Monte Carlo runs share them).
    pub fn from_snapshots(
        pre: Snapshot,
        post: Option<Snapshot>,
        fault_time: usize,
        horizon: usize,
        noise: NoiseSpec,
    ) -> Self {
        FrameSource {
            pre,
            post,
            fault_time,
            horizon,
            noise,
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
            t: 0,
        }
    }

    fn noisy(&mut self, x: C, rel: f64, ang: f64) -> Polar {
        let a: f64 = self.rng.sample(StandardNormal);
        let b: f64 = self.rng.sample(StandardNormal);
        Polar::new(x.norm() * (1.0 + rel * a), x.arg() + ang * b)
    }
}

impl Iterator for FrameSource {
    type Item = MeasurementFrame;

    fn next(&mut self) -> Option<MeasurementFrame> {
        if self.t >= self.horizon {
            return None;
        }
        let snap = match &self.post {
            Some(post) if self.t >= self.fault_time => post.clone(),
            _ => self.pre.clone(),
        };
        let n = self.noise;
        let mut readings = BTreeMap::new();
        for (&bus, (v, i)) in &snap.readings {
            let mut vp = [Polar::default(); 3];
            let mut ip = i.map(|_| [Polar::default(); 3]);
            for p in 0..3 {
                vp[p] = self.noisy(v[p], n.sigma_vmag_rel, n.sigma_vang);
                if let (Some(i), Some(ip)) = (i, ip.as_mut()) {
                    ip[p] = self.noisy(i[p], n.sigma_imag_rel, n.sigma_iang);
                }
            }
            readings.insert(bus, BusReading { v: vp, i: ip });
        }
        let frame = MeasurementFrame {
            t: self.t,
            readings,
        };
        self.t += 1;
        Some(frame)
    }
}

pub fn generate_frames(scenario: &Scenario) -> Result<Vec<MeasurementFrame>> {
    Ok(FrameSource::new(scenario)?.collect())
}
