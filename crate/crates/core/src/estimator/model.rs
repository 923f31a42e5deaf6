use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::layout::{Covariance, MeasurementLayout};
use crate::error::{Error, Result};
use crate::grid::{AdmittanceMatrix, BusId, LineId};
use crate::linalg::numeric_rank;

/// Which network a measurement model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelTag {
    /// The grid as metered, no virtual bus.
    Base,
    /// Virtual bus in the middle of the given line.
    Virtual { line: LineId },
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelTag::Base => f.write_str("base"),
            ModelTag::Virtual { line } => write!(f, "virtual bus on line {line}"),
        }
    }
}

/// `z = H x + v` for one network, with `x = [Re V ; Im V]` bus-major.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    pub tag: ModelTag,
    pub n_buses: usize,
    pub h: DMatrix<f64>,
    pub cov: Covariance,
    /// Estimator admittance of the modelled network (lines and charging).
    pub y: AdmittanceMatrix,
    pub layout: MeasurementLayout,
    pub virtual_bus: Option<BusId>,
}

/// Real `[[G, -B], [B, G]]` rows for one complex row of `Y`.
pub(crate) fn current_rows(y: &AdmittanceMatrix, row: usize) -> (DVector<f64>, DVector<f64>) {
    let n3 = y.order();
    let mut re = DVector::zeros(2 * n3);
    let mut im = DVector::zeros(2 * n3);
    for j in 0..n3 {
        let e = y.y[(row, j)];
        re[j] = e.re;
        re[n3 + j] = -e.im;
        im[j] = e.im;
        im[n3 + j] = e.re;
    }
    (re, im)
}

/// Assemble `H` (voltage selectors stacked on admittance rows) for the
/// network whose estimator admittance is `y`.
pub fn build_measurement_model(
    y: &AdmittanceMatrix,
    layout: &MeasurementLayout,
    cov: Covariance,
    tag: ModelTag,
    virtual_bus: Option<BusId>,
) -> Result<MeasurementModel> {
    let n = y.n_buses();
    let d = layout.dim();
    if cov.dim != d {
        return Err(Error::Domain(format!(
            "covariance has dimension {}, layout needs {d}",
            cov.dim
        )));
    }
    let n3 = 3 * n;
    let mut h = DMatrix::zeros(d, 2 * n3);
    for (r, &(b, _)) in layout.v_rows.iter().enumerate() {
        if b > n {
            return Err(Error::UnknownBus(b));
        }
        for p in 0..3 {
            let col = 3 * (b - 1) + p;
            h[(layout.v_re(r, p), col)] = 1.0;
            h[(layout.v_im(r, p), n3 + col)] = 1.0;
        }
    }
    for (r, &(b, _)) in layout.i_rows.iter().enumerate() {
        if b > n {
            return Err(Error::UnknownBus(b));
        }
        for p in 0..3 {
            let (re, im) = current_rows(y, 3 * (b - 1) + p);
            h.row_mut(layout.i_re(r, p)).copy_from(&re.transpose());
            h.row_mut(layout.i_im(r, p)).copy_from(&im.transpose());
        }
    }
    Ok(MeasurementModel {
        tag,
        n_buses: n,
        h,
        cov,
        y: y.clone(),
        layout: layout.clone(),
        virtual_bus,
    })
}

impl MeasurementModel {
    /// Build from raw parts (used for synthetic problems).
    pub fn from_parts(h: DMatrix<f64>, cov: Covariance, tag: ModelTag) -> Result<Self> {
        if cov.dim != h.nrows() {
            return Err(Error::Domain("covariance and H disagree in size".into()));
        }
        let n_buses = h.ncols() / 6;
        Ok(MeasurementModel {
            tag,
            n_buses,
            h,
            cov,
            y: AdmittanceMatrix::zeros(0),
            layout: MeasurementLayout {
                v_rows: vec![],
                i_rows: vec![],
                epsilon: 1.0,
            },
            virtual_bus: None,
        })
    }

    pub fn n_states(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_measurements(&self) -> usize {
        self.h.nrows()
    }

    pub fn rank(&self) -> usize {
        numeric_rank(&self.h, 1e-8)
    }

    /// Rank-deficient models are reported rather than silently accepted.
    pub fn check_observable(&self) -> Result<()> {
        let rank = self.rank();
        if rank < self.n_states() {
            return Err(Error::Observability {
                tag: self.tag.to_string(),
                detail: format!("rank(H) = {rank} < {} states", self.n_states()),
            });
        }
        Ok(())
    }

    /// Complex bus voltages from a state vector.
    pub fn voltages(&self, x: &DVector<f64>, bus: BusId) -> [Complex64; 3] {
        let n3 = 3 * self.n_buses;
        std::array::from_fn(|p| {
            let c = 3 * (bus - 1) + p;
            Complex64::new(x[c], x[n3 + c])
        })
    }

    /// Injected current at any bus of the model, `Y V` on its rows.
    pub fn injected_current(&self, x: &DVector<f64>, bus: BusId) -> Result<[Complex64; 3]> {
        if bus == 0 || bus > self.n_buses {
            return Err(Error::UnknownBus(bus));
        }
        let n3 = 3 * self.n_buses;
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (p, o) in out.iter_mut().enumerate() {
            let row = 3 * (bus - 1) + p;
            for j in 0..n3 {
                *o += self.y.y[(row, j)] * Complex64::new(x[j], x[n3 + j]);
            }
        }
        Ok(out)
    }
}

/// `H_I x` reshaped to per-bus phasors for the current-measured buses.
pub fn injected_current_estimates(
    model: &MeasurementModel,
    x_hat: &DVector<f64>,
) -> BTreeMap<BusId, [Complex64; 3]> {
    let zi = &model.h * x_hat;
    let lay = &model.layout;
    lay.i_rows
        .iter()
        .enumerate()
        .map(|(r, &(b, _))| {
            (
                b,
                std::array::from_fn(|p| Complex64::new(zi[lay.i_re(r, p)], zi[lay.i_im(r, p)])),
            )
        })
        .collect()
}

/// `|(Ia + Ib + Ic) / 3|`.
pub fn zero_sequence_magnitude(currents: &[Complex64; 3]) -> f64 {
    ((currents[0] + currents[1] + currents[2]) / 3.0).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sequence_of_balanced_set() {
        let a = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let i = [Complex64::new(7.0, 0.0), a * a * 7.0, a * 7.0];
        assert!(zero_sequence_magnitude(&i) < 1e-12);
        let i = [Complex64::new(3.0, 0.0), Complex64::default(), Complex64::default()];
        assert!((zero_sequence_magnitude(&i) - 1.0).abs() < 1e-15);
    }
}
