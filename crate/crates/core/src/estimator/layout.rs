use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::frame::MeasurementFrame;
use crate::error::{Error, Result};
use crate::grid::{BusId, NetworkModel};
use crate::simulator::NoiseSpec;

/// Which bus feeds each measurement row.
///
/// Voltage rows come first, then current rows; within each block the order is
/// `[re | im]`, bus-major, phase-minor. A fictitious terminal bus takes its
/// voltage from the meter on the real bus it hangs off and carries a
/// zero-current pseudo-measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementLayout {
    /// (model bus, meter bus)
    pub v_rows: Vec<(BusId, BusId)>,
    /// (model bus, meter bus or `None` for a zero pseudo-measurement)
    pub i_rows: Vec<(BusId, Option<BusId>)>,
    /// Variance given to pseudo-measurement components.
    pub epsilon: f64,
}

/// One block of a block-diagonal covariance: a single component or a
/// (re, im) pair of the same phasor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovBlock {
    Single { idx: usize, var: f64 },
    Pair { re: usize, im: usize, cov: [[f64; 2]; 2] },
}

/// Block-diagonal measurement covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    pub dim: usize,
    pub blocks: Vec<CovBlock>,
}

impl Covariance {
    pub fn identity(dim: usize) -> Self {
        Covariance::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(var: &[f64]) -> Self {
        Covariance {
            dim: var.len(),
            blocks: var
                .iter()
                .enumerate()
                .map(|(idx, &var)| CovBlock::Single { idx, var })
                .collect(),
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.dim, self.dim);
        for b in &self.blocks {
            match *b {
                CovBlock::Single { idx, var } => r[(idx, idx)] = var,
                CovBlock::Pair { re, im, cov } => {
                    r[(re, re)] = cov[0][0];
                    r[(re, im)] = cov[0][1];
                    r[(im, re)] = cov[1][0];
                    r[(im, im)] = cov[1][1];
                }
            }
        }
        r
    }

    /// Per-block inverse Cholesky factor `W` with `W^T W = R^{-1}`.
    pub fn whitening(&self) -> Result<Whitening> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            blocks.push(match *b {
                CovBlock::Single { idx, var } => {
                    if !(var > 0.0) {
                        return Err(Error::Domain(format!("variance {var} at row {idx}")));
                    }
                    CovBlock::Single { idx, var: 1.0 / var.sqrt() }
                }
                CovBlock::Pair { re, im, cov } => {
                    let l11 = cov[0][0].sqrt();
                    let l21 = cov[1][0] / l11;
                    let d = cov[1][1] - l21 * l21;
                    if !(l11 > 0.0 && d > 0.0) {
                        return Err(Error::Domain(format!(
                            "covariance block at rows {re},{im} is not positive definite"
                        )));
                    }
                    let l22 = d.sqrt();
                    CovBlock::Pair {
                        re,
                        im,
                        cov: [[1.0 / l11, 0.0], [-l21 / (l11 * l22), 1.0 / l22]],
                    }
                }
            });
        }
        Ok(Whitening {
            dim: self.dim,
            blocks,
        })
    }
}

/// Lower-triangular per-block factor applied to the left of `H` and `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitening {
    pub dim: usize,
    blocks: Vec<CovBlock>,
}

impl Whitening {
    pub fn apply_rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for b in &self.blocks {
            match *b {
                CovBlock::Single { idx, var: w } => out.row_mut(idx).scale_mut(w),
                CovBlock::Pair { re, im, cov: w } => {
                    for c in 0..m.ncols() {
                        let (a, b) = (m[(re, c)], m[(im, c)]);
                        out[(re, c)] = w[0][0] * a;
                        out[(im, c)] = w[1][0] * a + w[1][1] * b;
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = z.clone();
        for b in &self.blocks {
            match *b {
                CovBlock::Single { idx, var: w } => out[idx] *= w,
                CovBlock::Pair { re, im, cov: w } => {
                    out[re] = w[0][0] * z[re];
                    out[im] = w[1][0] * z[re] + w[1][1] * z[im];
                }
            }
        }
        out
    }

    pub fn dense(&self) -> DMatrix<f64> {
        self.apply_rows(&DMatrix::identity(self.dim, self.dim))
    }
}

/// Covariance of the rectangular components of `m e^{j theta}` when the
/// magnitude has standard deviation `s_mag` and the angle `s_ang` (radians).
/// The tangential deviation `m * s_ang` and `s_mag` are both floored at
/// `floor` so that near-zero phasors keep a positive-definite block.
pub fn polar_to_rect_cov(phasor: Complex64, s_mag: f64, s_ang: f64, floor: f64) -> [[f64; 2]; 2] {
    let m = phasor.norm();
    let (s, c) = if m > 0.0 {
        (phasor.im / m, phasor.re / m)
    } else {
        (0.0, 1.0)
    };
    let radial = s_mag.max(floor).powi(2);
    let tangential = (m * s_ang).max(floor).powi(2);
    [
        [c * c * radial + s * s * tangential, c * s * (radial - tangential)],
        [c * s * (radial - tangential), s * s * radial + c * c * tangential],
    ]
}

impl MeasurementLayout {
    /// Rows for `net`: every monitored bus gets voltage and current rows,
    /// every voltage-only bus without a fictitious partner a voltage row.
    pub fn from_network(net: &NetworkModel, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("pseudo-measurement variance {epsilon}")));
        }
        let mut v_rows = Vec::new();
        let mut i_rows = Vec::new();
        let mut v_buses: Vec<BusId> = net.monitored.iter().copied().collect();
        for &b in &net.voltage_only {
            if net.fictitious_partner(b).is_none() {
                v_buses.push(b);
            }
        }
        v_buses.sort_unstable();
        for b in v_buses {
            let bus = net.bus(b)?;
            let meter = bus.fictitious_of.unwrap_or(b);
            if bus.fictitious_of.is_some() && !net.voltage_only.contains(&meter) {
                return Err(Error::Domain(format!(
                    "fictitious bus {b} needs a voltage-only meter at bus {meter}"
                )));
            }
            v_rows.push((b, meter));
            if net.monitored.contains(&b) {
                i_rows.push((b, if bus.fictitious_of.is_some() { None } else { Some(b) }));
            }
        }
        Ok(MeasurementLayout {
            v_rows,
            i_rows,
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        6 * (self.v_rows.len() + self.i_rows.len())
    }

    pub fn v_re(&self, row: usize, phase: usize) -> usize {
        3 * row + phase
    }

    pub fn v_im(&self, row: usize, phase: usize) -> usize {
        3 * self.v_rows.len() + 3 * row + phase
    }

    pub fn i_re(&self, row: usize, phase: usize) -> usize {
        6 * self.v_rows.len() + 3 * row + phase
    }

    pub fn i_im(&self, row: usize, phase: usize) -> usize {
        6 * self.v_rows.len() + 3 * self.i_rows.len() + 3 * row + phase
    }

    /// Physical meters: (bus, has current channel).
    pub fn meters(&self) -> Vec<(BusId, bool)> {
        let mut out: Vec<(BusId, bool)> = self
            .v_rows
            .iter()
            .map(|&(model, meter)| {
                let current = self.i_rows.iter().any(|&(b, m)| b == model && m.is_some());
                (meter, current)
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Assemble `z` from rectangular phasors supplied per meter bus.
    pub fn assemble<FV, FI>(&self, voltage: FV, current: FI) -> Result<DVector<f64>>
    where
        FV: Fn(BusId) -> Option<[Complex64; 3]>,
        FI: Fn(BusId) -> Option<[Complex64; 3]>,
    {
        let mut z = DVector::zeros(self.dim());
        for (r, &(_, meter)) in self.v_rows.iter().enumerate() {
            let v = voltage(meter)
                .ok_or_else(|| Error::Parse(format!("no voltage reading for bus {meter}")))?;
            for p in 0..3 {
                z[self.v_re(r, p)] = v[p].re;
                z[self.v_im(r, p)] = v[p].im;
            }
        }
        for (r, &(_, meter)) in self.i_rows.iter().enumerate() {
            let Some(meter) = meter else { continue };
            let i = current(meter)
                .ok_or_else(|| Error::Parse(format!("no current reading for bus {meter}")))?;
            for p in 0..3 {
                z[self.i_re(r, p)] = i[p].re;
                z[self.i_im(r, p)] = i[p].im;
            }
        }
        Ok(z)
    }

    pub fn z(&self, frame: &MeasurementFrame) -> Result<DVector<f64>> {
        self.assemble(
            |b| frame.readings.get(&b).map(|r| r.v.map(|p| p.to_rect())),
            |b| {
                frame
                    .readings
                    .get(&b)
                    .and_then(|r| r.i.map(|i| i.map(|p| p.to_rect())))
            },
        )
    }

    /// Covariance from the meter noise model, linearized at the given
    /// nominal phasors.
    pub fn covariance<FV, FI>(&self, noise: &NoiseSpec, voltage: FV, current: FI) -> Result<Covariance>
    where
        FV: Fn(BusId) -> Option<[Complex64; 3]>,
        FI: Fn(BusId) -> Option<[Complex64; 3]>,
    {
        let mut blocks = Vec::with_capacity(self.dim());
        for (r, &(_, meter)) in self.v_rows.iter().enumerate() {
            let v = voltage(meter)
                .ok_or_else(|| Error::Parse(format!("no nominal voltage for bus {meter}")))?;
            for p in 0..3 {
                let cov = polar_to_rect_cov(
                    v[p],
                    noise.sigma_vmag_rel * v[p].norm(),
                    noise.sigma_vang,
                    noise.voltage_floor,
                );
                blocks.push(CovBlock::Pair {
                    re: self.v_re(r, p),
                    im: self.v_im(r, p),
                    cov,
                });
            }
        }
        for (r, &(_, meter)) in self.i_rows.iter().enumerate() {
            for p in 0..3 {
                let (re, im) = (self.i_re(r, p), self.i_im(r, p));
                match meter {
                    None => {
                        blocks.push(CovBlock::Single { idx: re, var: self.epsilon });
                        blocks.push(CovBlock::Single { idx: im, var: self.epsilon });
                    }
                    Some(m) => {
                        let i = current(m).ok_or_else(|| {
                            Error::Parse(format!("no nominal current for bus {m}"))
                        })?;
                        let cov = polar_to_rect_cov(
                            i[p],
                            noise.sigma_imag_rel * i[p].norm(),
                            noise.sigma_iang,
                            noise.current_floor,
                        );
                        blocks.push(CovBlock::Pair { re, im, cov });
                    }
                }
            }
        }
        Ok(Covariance {
            dim: self.dim(),
            blocks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rect_cov_of_real_phasor() {
        let c = polar_to_rect_cov(Complex64::new(100.0, 0.0), 2.0, 0.01, 0.0);
        assert!((c[0][0] - 4.0).abs() < 1e-12);
        assert!((c[1][1] - 1.0).abs() < 1e-12);
        assert!(c[0][1].abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn whitening_inverts_covariance(
            mag in 0.1f64..1e4, ang in -3.2f64..3.2, rel in 1e-5f64..1e-1, sa in 1e-5f64..1e-1
        ) {
            let ph = Complex64::from_polar(mag, ang);
            let cov = polar_to_rect_cov(ph, rel * mag, sa, 1e-9);
            let r = Covariance { dim: 2, blocks: vec![CovBlock::Pair { re: 0, im: 1, cov }] };
            let w = r.whitening().unwrap().dense();
            let prod = &w * r.dense() * w.transpose();
            prop_assert!((prod - DMatrix::<f64>::identity(2, 2)).norm() < 1e-8);
        }
    }
}
