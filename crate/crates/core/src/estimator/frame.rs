use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BusId;
use crate::phase::Phase;

/// Phasor in polar form: rms magnitude and angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Polar {
    pub mag: f64,
    pub ang: f64,
}

impl Polar {
    pub fn new(mag: f64, ang: f64) -> Self {
        Polar { mag, ang }
    }

    pub fn from_rect(c: Complex64) -> Self {
        Polar {
            mag: c.norm(),
            ang: c.arg(),
        }
    }

    pub fn to_rect(self) -> Complex64 {
        Complex64::from_polar(self.mag, self.ang)
    }
}

/// What one meter reports for its bus at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct BusReading {
    pub v: [Polar; 3],
    /// Injected currents; `None` for voltage-only meters.
    pub i: Option<[Polar; 3]>,
}

/// One synchronized sample of every meter.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    pub t: usize,
    pub readings: BTreeMap<BusId, BusReading>,
}

pub const CSV_HEADER: [&str; 7] = ["t", "bus", "phase", "Vmag", "Vang", "Imag", "Iang"];

/// Write frames as `t,bus,phase,Vmag,Vang,Imag,Iang` rows.
pub fn write_csv<W: Write>(out: W, frames: &[MeasurementFrame]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for f in frames {
        for (bus, r) in &f.readings {
            for p in Phase::ALL {
                let v = r.v[p.index()];
                let (im, ia) = match &r.i {
                    Some(i) => (i[p.index()].mag.to_string(), i[p.index()].ang.to_string()),
                    None => (String::new(), String::new()),
                };
                w.write_record([
                    f.t.to_string(),
                    bus.to_string(),
                    p.label().to_string(),
                    v.mag.to_string(),
                    v.ang.to_string(),
                    im,
                    ia,
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn field(rec: &csv::StringRecord, i: usize, line: u64) -> Result<&str> {
    rec.get(i)
        .ok_or_else(|| Error::Parse(format!("row {line}: missing column {}", CSV_HEADER[i])))
}

fn number<T: std::str::FromStr>(s: &str, what: &str, line: u64) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("row {line}: bad {what} {s:?}")))
}

/// Read a stream written by [`write_csv`]. Rows of one sample must be
/// contiguous; every bus needs all three phases.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<MeasurementFrame>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(CSV_HEADER) {
        return Err(Error::Parse(format!(
            "unexpected header {:?}, expected {}",
            header.iter().collect::<Vec<_>>(),
            CSV_HEADER.join(",")
        )));
    }
    type Partial = BTreeMap<BusId, ([Option<Polar>; 3], [Option<Polar>; 3], bool)>;
    let mut frames = Vec::new();
    let mut current: Option<(usize, Partial)> = None;

    let finish = |t: usize, part: Partial| -> Result<MeasurementFrame> {
        let mut readings = BTreeMap::new();
        for (bus, (v, i, has_i)) in part {
            let missing = |what: &str| Error::Parse(format!("t={t} bus {bus}: missing {what}"));
            let [Some(a), Some(b), Some(c)] = v else {
                return Err(missing("phase"));
            };
            let v = [a, b, c];
            let i = if has_i {
                let [Some(a), Some(b), Some(c)] = i else {
                    return Err(missing("current"));
                };
                Some([a, b, c])
            } else {
                None
            };
            readings.insert(bus, BusReading { v, i });
        }
        Ok(MeasurementFrame { t, readings })
    };

    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let t: usize = number(field(&rec, 0, line)?, "sample index", line)?;
        let bus: BusId = number(field(&rec, 1, line)?, "bus", line)?;
        let ph = Phase::parse(field(&rec, 2, line)?)
            .ok_or_else(|| Error::Parse(format!("row {line}: bad phase")))?;
        let v = Polar::new(
            number(field(&rec, 3, line)?, "Vmag", line)?,
            number(field(&rec, 4, line)?, "Vang", line)?,
        );
        let (im, ia) = (field(&rec, 5, line)?, field(&rec, 6, line)?);
        let i = if im.trim().is_empty() && ia.trim().is_empty() {
            None
        } else {
            Some(Polar::new(number(im, "Imag", line)?, number(ia, "Iang", line)?))
        };

        match &current {
            Some((ct, _)) if *ct == t => {}
            Some((ct, _)) if *ct > t => {
                return Err(Error::Parse(format!("row {line}: sample {t} after {ct}")));
            }
            _ => {
                if let Some((ct, part)) = current.take() {
                    frames.push(finish(ct, part)?);
                }
                current = Some((t, BTreeMap::new()));
            }
        }
        let part = &mut current.as_mut().expect("frame in progress").1;
        let entry = part.entry(bus).or_insert(([None; 3], [None; 3], i.is_some()));
        entry.0[ph.index()] = Some(v);
        if let Some(i) = i {
            entry.1[ph.index()] = Some(i);
            entry.2 = true;
        }
    }
    if let Some((ct, part)) = current {
        frames.push(finish(ct, part)?);
    }
    Ok(frames)
}
