use super::{Bus, BusId, Line, LineId, NetworkModel};
use crate::error::{Error, Result};

/// Insert a bus at fraction `p` along `line_id`, measured from its `from_bus`.
///
/// The original line keeps its id and becomes the `from_bus` segment with
/// impedance `p z`; a new line `m + 1` carries `(1 - p) z` to the old
/// `to_bus`. Line charging stays at the original terminals, so eliminating
/// the new (shunt-free, zero-injection) bus gives back the original matrix
/// exactly. Returns the new network and the id of the inserted bus.
pub fn split_line(net: &NetworkModel, line_id: LineId, p: f64) -> Result<(NetworkModel, BusId)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("split fraction {p} outside (0, 1)")));
    }
    let line = net.line(line_id)?.clone();
    if !line.is_closed() {
        return Err(Error::Topology(format!("line {line_id} is open")));
    }
    let mut out = net.clone();
    let mid = out.n_buses() + 1;
    out.buses.push(Bus::new(mid));

    let f = line.charging_at_from;
    let first = &mut out.lines[line_id - 1];
    first.to_bus = mid;
    first.z1 = line.z1 * p;
    first.z0 = line.z0 * p;
    first.shunt_b1 = line.shunt_b1 * f;
    first.shunt_b0 = line.shunt_b0 * f;
    first.charging_at_from = 1.0;

    let mut second = Line::new(
        out.lines.len() + 1,
        mid,
        line.to_bus,
        line.z1 * (1.0 - p),
        line.z0 * (1.0 - p),
    );
    second.shunt_b1 = line.shunt_b1 * (1.0 - f);
    second.shunt_b0 = line.shunt_b0 * (1.0 - f);
    second.charging_at_from = 0.0;
    out.lines.push(second);
    Ok((out, mid))
}
