//! Weighted least-squares state estimation and the bank of per-cluster
//! estimators.

mod bank;
mod frame;
mod layout;
mod model;
mod wls;

pub use bank::{
    build_estimator_bank, default_partition, member_network, BankMember, BankOptions, BankOutput,
    EstimatorBank, PSEUDO_VARIANCE,
};
pub use frame::{read_csv, write_csv, BusReading, MeasurementFrame, Polar, CSV_HEADER};
pub use layout::{polar_to_rect_cov, CovBlock, Covariance, MeasurementLayout, Whitening};
pub use model::{
    build_measurement_model, injected_current_estimates, zero_sequence_magnitude,
    MeasurementModel, ModelTag,
};
pub use wls::{wls, EstimateResult, CONDITION_LIMIT};
