use nalgebra::{DMatrix, DVector};

use super::frame::MeasurementFrame;
use super::layout::{Covariance, MeasurementLayout};
use super::model::{build_measurement_model, current_rows, MeasurementModel, ModelTag};
use super::wls::{EstimateResult, CONDITION_LIMIT};
use crate::error::{Error, Result};
use crate::grid::{build_branch_admittance, split_line, BusId, NetworkModel};
use crate::linalg::triangular_condition_estimate;
use crate::observability::{compute_ufc2, per_line_partition, ClusterPartition, PartitionKind};
use crate::par::Exec;
use crate::simulator::{solve_steady_state, NoiseSpec, Snapshot};

/// Variance of the zero-current pseudo-measurements at fictitious buses.
pub const PSEUDO_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct BankOptions {
    /// Meter noise; the covariance is linearized at the no-fault state.
    pub noise: NoiseSpec,
    pub epsilon: f64,
    pub exec: Exec,
}

impl Default for BankOptions {
    fn default() -> Self {
        BankOptions {
            noise: NoiseSpec::default(),
            epsilon: PSEUDO_VARIANCE,
            exec: Exec::default(),
        }
    }
}

/// One estimator with its WLS solution folded into fixed linear maps of `z`.
///
/// With `W H = Q R` and `Q^T W = [A; B]`: `x_hat = R^-1 A z` and the
/// residual norm is `|B z|`.
#[derive(Debug, Clone)]
pub struct BankMember {
    /// 0 for the base model, otherwise the cluster id.
    pub cluster: usize,
    pub model: MeasurementModel,
    residual: DMatrix<f64>,
    estimator: DMatrix<f64>,
    /// Per grounding bus, maps `z` to (Re, Im) of the estimated
    /// zero-sequence injection.
    zero_seq: Vec<DMatrix<f64>>,
}

impl BankMember {
    pub fn new(model: MeasurementModel, cluster: usize, grounding: &[BusId]) -> Result<Self> {
        let (d, n) = model.h.shape();
        let fail = |detail: String| Error::Observability {
            tag: if cluster == 0 {
                "base".into()
            } else {
                format!("cluster {cluster}, {}", model.tag)
            },
            detail,
        };
        if d < n {
            return Err(fail(format!("{d} measurements for {n} states")));
        }
        let w = model.cov.whitening()?;
        let qr = w.apply_rows(&model.h).qr();
        let r = qr.r();
        let cond = triangular_condition_estimate(&r);
        if !(cond < CONDITION_LIMIT) {
            return Err(fail(format!("normal matrix is singular (condition ~{cond:.1e})")));
        }
        let mut qtw = w.dense();
        qr.q_tr_mul(&mut qtw);
        let residual = qtw.rows(n, d - n).into_owned();
        let estimator = r
            .solve_upper_triangular(&qtw.rows(0, n).into_owned())
            .ok_or_else(|| fail("triangular solve failed".into()))?;

        let mut zero_seq = Vec::with_capacity(grounding.len());
        for &g in grounding {
            if g == 0 || g > model.n_buses {
                return Err(Error::UnknownBus(g));
            }
            let mut rows = DMatrix::zeros(2, n);
            for p in 0..3 {
                let (re, im) = current_rows(&model.y, 3 * (g - 1) + p);
                for j in 0..n {
                    rows[(0, j)] += re[j] / 3.0;
                    rows[(1, j)] += im[j] / 3.0;
                }
            }
            zero_seq.push(rows * &estimator);
        }
        Ok(BankMember {
            cluster,
            model,
            residual,
            estimator,
            zero_seq,
        })
    }

    pub fn tag(&self) -> ModelTag {
        self.model.tag
    }

    pub fn wmr(&self, z: &DVector<f64>) -> f64 {
        (&self.residual * z).norm()
    }

    /// Largest estimated zero-sequence injection over the grounding buses.
    pub fn zero_sequence(&self, z: &DVector<f64>) -> f64 {
        self.zero_seq
            .iter()
            .map(|g| (g * z).norm())
            .fold(0.0, f64::max)
    }

    pub fn estimate(&self, z: &DVector<f64>) -> EstimateResult {
        EstimateResult {
            x_hat: &self.estimator * z,
            wmr: self.wmr(z),
            tag: self.model.tag,
        }
    }
}

/// Per-frame output of every member, indexed like [`EstimatorBank::members`].
#[derive(Debug, Clone, PartialEq)]
pub struct BankOutput {
    pub wmr: Vec<f64>,
    pub zero_seq: Vec<f64>,
}

/// Base estimator plus one virtual-bus estimator per cluster.
#[derive(Debug, Clone)]
pub struct EstimatorBank {
    pub partition: ClusterPartition,
    pub layout: MeasurementLayout,
    /// `members[0]` is the base model, `members[l]` belongs to cluster `l`.
    pub members: Vec<BankMember>,
    pub grounding_buses: Vec<BusId>,
    pub exec: Exec,
}

impl EstimatorBank {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Number of clusters.
    pub fn r(&self) -> usize {
        self.members.len() - 1
    }

    pub fn z(&self, frame: &MeasurementFrame) -> Result<DVector<f64>> {
        self.layout.z(frame)
    }

    pub fn evaluate(&self, z: &DVector<f64>) -> BankOutput {
        let out = self
            .exec
            .map(&self.members, |m| (m.wmr(z), m.zero_sequence(z)));
        let (wmr, zero_seq) = out.into_iter().unzip();
        BankOutput { wmr, zero_seq }
    }

    pub fn estimate(&self, k: usize, z: &DVector<f64>) -> Result<EstimateResult> {
        self.members
            .get(k)
            .map(|m| m.estimate(z))
            .ok_or_else(|| Error::Domain(format!("bank has no member {k}")))
    }
}

/// Per-line clusters on a fully monitored grid, otherwise the UFC² partition.
pub fn default_partition(net: &NetworkModel) -> Result<ClusterPartition> {
    if net.fully_monitored() {
        Ok(per_line_partition(net))
    } else {
        compute_ufc2(net)
    }
}

fn both_monitored(net: &NetworkModel, line: usize) -> bool {
    let l = &net.lines[line - 1];
    net.is_monitored(l.from_bus) && net.is_monitored(l.to_bus)
}

/// Network seen by the estimator of cluster `l`, with its virtual bus.
///
/// For UFC² clusters every line between two monitored buses of the cluster is
/// also split at its midpoint, leaving room for a fault anywhere in the
/// cluster. When the representative line is itself such a line the virtual
/// bus goes to the middle of its first half.
pub fn member_network(
    net: &NetworkModel,
    partition: &ClusterPartition,
    l: usize,
) -> Result<(NetworkModel, BusId)> {
    if l == 0 || l > partition.r() {
        return Err(Error::Domain(format!("no cluster {l}")));
    }
    let rep = partition.representative(l);
    if partition.kind != PartitionKind::Ufc2 {
        return split_line(net, rep, 0.5);
    }
    let mut out = net.clone();
    for &line in &partition.clusters[l - 1] {
        if both_monitored(net, line) {
            out = split_line(&out, line, 0.5)?.0;
        }
    }
    split_line(&out, rep, 0.5)
}

/// Build the bank, with the covariance linearized at the no-fault state of
/// `net`. Fails naming the first cluster whose model is not observable.
pub fn build_estimator_bank(
    net: &NetworkModel,
    partition: &ClusterPartition,
    opts: &BankOptions,
) -> Result<EstimatorBank> {
    net.validate()?;
    opts.noise.validate()?;
    let layout = MeasurementLayout::from_network(net, opts.epsilon)?;
    let snap = Snapshot::from_state(net, &solve_steady_state(net)?);
    let cov = layout.covariance(&opts.noise, |b| snap.voltage(b), |b| snap.current(b))?;
    build_bank_with_covariance(net, partition, &layout, &cov, opts.exec)
}

/// Lower-level constructor with an explicit layout and covariance.
pub(crate) fn build_bank_with_covariance(
    net: &NetworkModel,
    partition: &ClusterPartition,
    layout: &MeasurementLayout,
    cov: &Covariance,
    exec: Exec,
) -> Result<EstimatorBank> {
    let grounding = net.grounding_buses();
    let members = exec.map_range(partition.r() + 1, |k| -> Result<BankMember> {
        let (member_net, tag, vb) = if k == 0 {
            (net.clone(), ModelTag::Base, None)
        } else {
            let (mn, vb) = member_network(net, partition, k)?;
            let tag = ModelTag::Virtual {
                line: partition.representative(k),
            };
            (mn, tag, Some(vb))
        };
        let y = build_branch_admittance(&member_net)?;
        let model = build_measurement_model(&y, layout, cov.clone(), tag, vb)?;
        BankMember::new(model, k, &grounding)
    });
    let members = members.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(EstimatorBank {
        partition: partition.clone(),
        layout: layout.clone(),
        members,
        grounding_buses: grounding,
        exec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::wls;
    use num_complex::Complex64 as C;

    fn chain(n: usize, monitored: &[usize]) -> NetworkModel {
        let mut net = NetworkModel::chain(n, C::new(0.3, 0.2), C::new(0.9, 0.5));
        for l in &mut net.lines {
            l.shunt_b1 = 1e-4;
            l.shunt_b0 = 1e-4;
        }
        net.monitored = monitored.iter().copied().collect();
        net
    }

    #[test]
    fn full_monitoring_has_one_member_per_line() {
        let net = chain(4, &[1, 2, 3, 4]);
        let part = default_partition(&net).unwrap();
        let bank = build_estimator_bank(&net, &part, &BankOptions::default()).unwrap();
        assert_eq!(bank.len(), 4);
    }

    #[test]
    fn single_cluster_bank() {
        let net = chain(3, &[1, 3]);
        let part = default_partition(&net).unwrap();
        let bank = build_estimator_bank(&net, &part, &BankOptions::default()).unwrap();
        assert_eq!(bank.len(), 2);
    }

    #[test]
    fn folded_kernels_match_direct_wls() {
        let net = chain(5, &[1, 2, 4, 5]);
        let part = default_partition(&net).unwrap();
        let bank = build_estimator_bank(&net, &part, &BankOptions::default()).unwrap();
        let d = bank.layout.dim();
        let z = DVector::from_fn(d, |i, _| ((i * 37 % 11) as f64 - 5.0) * 10.0);
        for m in &bank.members {
            let direct = wls(&m.model, &z).unwrap();
            let folded = m.estimate(&z);
            assert!((direct.wmr - folded.wmr).abs() < 1e-8 * direct.wmr.max(1.0));
            let scale = direct.x_hat.norm().max(1.0);
            assert!((&direct.x_hat - &folded.x_hat).norm() < 1e-8 * scale);
        }
    }
}
