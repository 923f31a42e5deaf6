use nalgebra::DVector;

use super::model::{MeasurementModel, ModelTag};
use crate::error::{Error, Result};
use crate::linalg::triangular_condition_estimate;

/// Triangular factors worse conditioned than this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e13;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub x_hat: DVector<f64>,
    /// Weighted measurement residual `sqrt((z - H x)^T R^-1 (z - H x))`.
    pub wmr: f64,
    pub tag: ModelTag,
}

/// Weighted least squares through a QR factorization of `R^{-1/2} H`.
pub fn wls(model: &MeasurementModel, z: &DVector<f64>) -> Result<EstimateResult> {
    let (d, n) = model.h.shape();
    if z.len() != d {
        return Err(Error::Domain(format!("z has {} entries, model expects {d}", z.len())));
    }
    let singular = |detail: String| Error::Observability {
        tag: model.tag.to_string(),
        detail,
    };
    if d < n {
        return Err(singular(format!("{d} measurements for {n} states")));
    }
    let w = model.cov.whitening()?;
    let hw = w.apply_rows(&model.h);
    let zw = w.apply(z);
    let qr = hw.clone().qr();
    let r = qr.r();
    let cond = triangular_condition_estimate(&r);
    if !(cond < CONDITION_LIMIT) {
        return Err(singular(format!("normal matrix is singular (condition ~{cond:.1e})")));
    }
    let mut qtz = zw.clone();
    qr.q_tr_mul(&mut qtz);
    let x_hat = r
        .solve_upper_triangular(&qtz.rows(0, n).into_owned())
        .ok_or_else(|| singular("triangular solve failed".into()))?;
    let wmr = (zw - hw * &x_hat).norm();
    Ok(EstimateResult {
        x_hat,
        wmr,
        tag: model.tag,
    })
}
