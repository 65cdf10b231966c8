//! TOML network file.
//!
//! ```toml
//! name = "two-bus"
//!
//! [[buses]]
//! id = 1
//! phases = "abc"
//! kv = 4.8                       # nominal line-to-line
//! source = true
//! base = { a = "2771.28∠0" }     # optional solved phasor, volts L-N ∠ degrees
//!
//! [[buses]]
//! id = 2
//! phases = "abc"
//! kv = 4.8
//! load_kw = [140.0, 140.0, 350.0]
//! load_kvar = [70.0, 70.0, 175.0]
//!
//! [[lines]]
//! from = 1
//! to = 2
//! r = [[0.1, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.0, 0.1]]   # ohms
//! x = [[0.1, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.0, 0.1]]
//! ```

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Bus, BusId, LineSegment, NetworkModel, Polar};
use crate::error::{Error, Result};
use crate::phase::{Phase, PhaseSet};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    buses: Vec<BusRecord>,
    #[serde(default)]
    lines: Vec<LineRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusRecord {
    id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    phases: PhaseSet,
    kv: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    source: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    base: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    load_kw: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    load_kvar: Option<[f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRecord {
    from: u32,
    to: u32,
    r: [[f64; 3]; 3],
    x: [[f64; 3]; 3],
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
    (line, column)
}

pub(crate) fn toml_error(text: &str, err: toml::de::Error) -> Error {
    let (line, column) = err
        .span()
        .map(|span| position(text, span.start))
        .unwrap_or((0, 0));
    Error::Parse {
        line,
        column,
        message: err.message().to_string(),
    }
}

fn parse_polar(field: &str, s: &str) -> Result<Polar> {
    let (mag, ang) = s
        .split_once('∠')
        .or_else(|| s.split_once('@'))
        .ok_or_else(|| Error::field(field, format!("expected magnitude∠angle, got `{s}`")))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|e| Error::field(field, format!("`{v}`: {e}")))
    };
    Ok(Polar::new(num(mag)?, num(ang)?))
}

/// Parses and validates a network file.
pub fn parse_network(text: &str) -> Result<NetworkModel> {
    let file: NetworkFile = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let mut buses = Vec::with_capacity(file.buses.len());
    for (k, rec) in file.buses.into_iter().enumerate() {
        let mut bus = Bus::new(rec.id, rec.phases, rec.kv);
        bus.name = rec.name;
        bus.is_source = rec.source;
        for (key, value) in &rec.base {
            let field = format!("buses[{k}].base.{key}");
            let phase: Phase = key
                .parse()
                .map_err(|_| Error::field(&field, "unknown phase"))?;
            bus.base[phase.index()] = Some(parse_polar(&field, value)?);
        }
        let kw = rec.load_kw.unwrap_or_default();
        let kvar = rec.load_kvar.unwrap_or_default();
        for i in 0..3 {
            bus.load[i] = Complex64::new(kw[i], kvar[i]);
        }
        buses.push(bus);
    }
    let lines = file
        .lines
        .into_iter()
        .map(|rec| LineSegment::from_rx(rec.from, rec.to, rec.r, rec.x))
        .collect();
    let mut net = NetworkModel::new(buses, lines)?;
    net.name = file.name;
    Ok(net)
}

impl NetworkModel {
    /// Serializes back to the network file format.
    pub fn to_toml_string(&self) -> String {
        let buses = self
            .buses
            .iter()
            .map(|bus| BusRecord {
                id: bus.id.0,
                name: bus.name.clone(),
                phases: bus.phases,
                kv: bus.nominal_kv,
                source: bus.is_source,
                base: Phase::ALL
                    .into_iter()
                    .filter_map(|p| {
                        bus.base[p.index()]
                            .map(|v| (p.to_string(), format!("{}∠{}", v.magnitude, v.angle_deg)))
                    })
                    .collect(),
                load_kw: bus
                    .load
                    .iter()
                    .any(|s| s.re != 0.0)
                    .then(|| bus.load.map(|s| s.re)),
                load_kvar: bus
                    .load
                    .iter()
                    .any(|s| s.im != 0.0)
                    .then(|| bus.load.map(|s| s.im)),
            })
            .collect();
        let lines = self
            .lines
            .iter()
            .map(|line| LineRecord {
                from: line.from.0,
                to: line.to.0,
                r: std::array::from_fn(|i| std::array::from_fn(|j| line.z[(i, j)].re)),
                x: std::array::from_fn(|i| std::array::from_fn(|j| line.z[(i, j)].im)),
            })
            .collect();
        let file = NetworkFile {
            name: self.name.clone(),
            buses,
            lines,
        };
        toml::to_string(&file).expect("network serializes")
    }
}

impl Bus {
    /// Base load of `phase` in VA (the file stores kW / kvar).
    pub fn load_va(&self, phase: Phase) -> Complex64 {
        self.load[phase.index()] * 1000.0
    }
}

impl BusId {
    pub fn parse(s: &str) -> Result<BusId> {
        s.trim()
            .parse::<u32>()
            .map(BusId)
            .map_err(|e| Error::field("bus id", format!("`{s}`: {e}")))
    }
}
