//! Radial unbalanced feeder model.
//!
//! Buses carry their phase set, nominal voltage, optional solved base
//! phasors and a constant-power base load. Segments carry the total 3×3
//! series impedance of the run, with structural zeros on absent phases.
//! The model is validated once on construction and is immutable afterwards.

mod file;

use std::collections::{HashMap, VecDeque};
use std::fmt;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{Phase, PhaseSet};

pub use file::parse_network;
pub(crate) use file::toml_error as file_error;

/// 3×3 complex matrix indexed by phase (a, b, c).
pub type Mat3 = Matrix3<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl From<u32> for BusId {
    fn from(v: u32) -> Self {
        BusId(v)
    }
}

/// Phasor stored in polar form so that file values survive a round trip bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polar {
    /// Volts, line-to-neutral.
    pub magnitude: f64,
    pub angle_deg: f64,
}

impl Polar {
    pub fn new(magnitude: f64, angle_deg: f64) -> Self {
        Polar {
            magnitude,
            angle_deg,
        }
    }

    pub fn from_complex(v: Complex64) -> Self {
        Polar::new(v.norm(), v.arg().to_degrees())
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.angle_deg.to_radians())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    /// Free-form label, e.g. the feeder's original bus number.
    pub name: Option<String>,
    pub phases: PhaseSet,
    /// Nominal line-to-line voltage in kV.
    pub nominal_kv: f64,
    /// Solved base operating point, when the file supplies one.
    pub base: [Option<Polar>; 3],
    /// Constant-power base load per phase, kW + j·kvar (consumption positive).
    pub load: [Complex64; 3],
    pub is_source: bool,
}

impl Bus {
    pub fn new(id: impl Into<BusId>, phases: PhaseSet, nominal_kv: f64) -> Self {
        Bus {
            id: id.into(),
            name: None,
            phases,
            nominal_kv,
            base: [None; 3],
            load: [Complex64::new(0.0, 0.0); 3],
            is_source: false,
        }
    }

    pub fn source(mut self) -> Self {
        self.is_source = true;
        self
    }

    /// Nominal line-to-neutral magnitude in volts.
    pub fn nominal_ln_volts(&self) -> f64 {
        self.nominal_kv * 1000.0 / 3f64.sqrt()
    }

    /// Base phasor of `phase` (volts, line-to-neutral). Falls back to the
    /// balanced nominal set when no solved base point was given.
    pub fn base_voltage(&self, phase: Phase) -> Option<Complex64> {
        if !self.phases.contains(phase) {
            return None;
        }
        Some(match self.base[phase.index()] {
            Some(p) => p.to_complex(),
            None => Polar::new(self.nominal_ln_volts(), phase.nominal_angle_deg()).to_complex(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSegment {
    pub from: BusId,
    pub to: BusId,
    /// Total series impedance of the segment in ohms.
    pub z: Mat3,
}

impl LineSegment {
    pub fn new(from: impl Into<BusId>, to: impl Into<BusId>, z: Mat3) -> Self {
        LineSegment {
            from: from.into(),
            to: to.into(),
            z,
        }
    }

    /// Builds the impedance from separate resistance and reactance matrices.
    pub fn from_rx(
        from: impl Into<BusId>,
        to: impl Into<BusId>,
        r: [[f64; 3]; 3],
        x: [[f64; 3]; 3],
    ) -> Self {
        let z = Mat3::from_fn(|i, j| Complex64::new(r[i][j], x[i][j]));
        LineSegment::new(from, to, z)
    }

    fn phases_used(&self) -> PhaseSet {
        let mut set = PhaseSet::EMPTY;
        for i in 0..3 {
            for j in 0..3 {
                if self.z[(i, j)] != Complex64::new(0.0, 0.0) {
                    set.insert(Phase::from_index(i).unwrap());
                    set.insert(Phase::from_index(j).unwrap());
                }
            }
        }
        set
    }
}

/// Upstream link of a non-source bus.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Upstream {
    parent: usize,
    line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    buses: Vec<Bus>,
    lines: Vec<LineSegment>,
    source: usize,
    index: HashMap<BusId, usize>,
    upstream: Vec<Option<Upstream>>,
    depth: Vec<usize>,
    /// Bus indices in breadth-first order from the source.
    order: Vec<usize>,
    children: Vec<Vec<usize>>,
    /// Summed impedance of the source→bus path, accumulated source-outward.
    path_z: Vec<Mat3>,
    pub name: Option<String>,
}

impl NetworkModel {
    /// Validates and indexes a radial feeder.
    pub fn new(buses: Vec<Bus>, lines: Vec<LineSegment>) -> Result<Self> {
        let mut index = HashMap::with_capacity(buses.len());
        let mut source: Option<usize> = None;
        for (i, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, i).is_some() {
                return Err(Error::DuplicateBus(bus.id));
            }
            validate_bus(bus)?;
            if bus.is_source {
                if let Some(prev) = source {
                    return Err(Error::MultipleSources(buses[prev].id, bus.id));
                }
                source = Some(i);
            }
        }
        let source = source.ok_or(Error::MissingSource)?;

        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); buses.len()];
        for (k, line) in lines.iter().enumerate() {
            let from = *index.get(&line.from).ok_or(Error::UnknownBus(line.from))?;
            let to = *index.get(&line.to).ok_or(Error::UnknownBus(line.to))?;
            if from == to {
                return Err(Error::Cycle {
                    from: line.from,
                    to: line.to,
                });
            }
            validate_segment(k, line, &buses[from], &buses[to])?;
            adjacency[from].push((to, k));
            adjacency[to].push((from, k));
        }

        let n = buses.len();
        let mut upstream: Vec<Option<Upstream>> = vec![None; n];
        let mut visited = vec![false; n];
        let mut depth = vec![0; n];
        let mut order = Vec::with_capacity(n);
        let mut children = vec![Vec::new(); n];
        let mut queue = VecDeque::from([source]);
        visited[source] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let via = upstream[u].map(|up| up.line);
            for &(v, k) in &adjacency[u] {
                if Some(k) == via {
                    continue;
                }
                if visited[v] {
                    return Err(Error::Cycle {
                        from: lines[k].from,
                        to: lines[k].to,
                    });
                }
                visited[v] = true;
                upstream[v] = Some(Upstream { parent: u, line: k });
                depth[v] = depth[u] + 1;
                children[u].push(v);
                queue.push_back(v);
            }
        }
        if let Some(i) = visited.iter().position(|seen| !seen) {
            return Err(Error::Disconnected(buses[i].id));
        }

        let mut path_z = vec![Mat3::zeros(); n];
        for &u in &order {
            if let Some(up) = upstream[u] {
                let child = &buses[u];
                let parent = &buses[up.parent];
                for p in child.phases.iter() {
                    if !parent.phases.contains(p) {
                        return Err(Error::PhaseMismatch {
                            bus: parent.id,
                            phase: p,
                            context: format!("feeds downstream bus {}", child.id),
                        });
                    }
                }
                path_z[u] = path_z[up.parent] + lines[up.line].z;
            }
        }

        Ok(NetworkModel {
            buses,
            lines,
            source,
            index,
            upstream,
            depth,
            order,
            children,
            path_z,
            name: None,
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[LineSegment] {
        &self.lines
    }

    pub fn source(&self) -> BusId {
        self.buses[self.source].id
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    pub fn bus(&self, id: BusId) -> Result<&Bus> {
        self.bus_index(id).map(|i| &self.buses[i])
    }

    pub fn bus_index(&self, id: BusId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownBus(id))
    }

    pub fn contains(&self, id: BusId) -> bool {
        self.index.contains_key(&id)
    }

    /// Bus indices, source first, parents before children.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Parent bus index and the index of the segment joining them.
    pub fn upstream(&self, bus: usize) -> Option<(usize, usize)> {
        self.upstream[bus].map(|up| (up.parent, up.line))
    }

    pub fn children(&self, bus: usize) -> &[usize] {
        &self.children[bus]
    }

    /// Every (bus, phase) pair except those of the source.
    pub fn observation_points(&self) -> Vec<(BusId, Phase)> {
        let mut ids: Vec<&Bus> = self.buses.iter().filter(|b| !b.is_source).collect();
        ids.sort_by_key(|b| b.id);
        ids.into_iter()
            .flat_map(|b| b.phases.iter().map(move |p| (b.id, p)))
            .collect()
    }

    fn common_ancestor(&self, mut u: usize, mut v: usize) -> usize {
        while self.depth[u] > self.depth[v] {
            u = self.upstream[u].unwrap().parent;
        }
        while self.depth[v] > self.depth[u] {
            v = self.upstream[v].unwrap().parent;
        }
        while u != v {
            u = self.upstream[u].unwrap().parent;
            v = self.upstream[v].unwrap().parent;
        }
        u
    }

    /// Segments common to the source→`o` and source→`a` paths, source-outward.
    pub fn shared_path(&self, o: BusId, a: BusId) -> Result<Vec<&LineSegment>> {
        let oi = self.bus_index(o)?;
        let ai = self.bus_index(a)?;
        let mut u = self.common_ancestor(oi, ai);
        let mut path = Vec::with_capacity(self.depth[u]);
        while let Some(up) = self.upstream[u] {
            path.push(&self.lines[up.line]);
            u = up.parent;
        }
        path.reverse();
        Ok(path)
    }

    /// Summed impedance of [`shared_path`](Self::shared_path), in ohms.
    pub fn shared_path_impedance(&self, o: BusId, a: BusId) -> Result<Mat3> {
        let oi = self.bus_index(o)?;
        let ai = self.bus_index(a)?;
        Ok(self.path_z[self.common_ancestor(oi, ai)])
    }

    /// Copy of the model with every bus base point replaced by `voltages`
    /// (indexed like [`buses`](Self::buses); absent phases ignored).
    pub fn with_base_voltages(&self, voltages: &[[Complex64; 3]]) -> Self {
        let mut net = self.clone();
        for (bus, v) in net.buses.iter_mut().zip(voltages) {
            for p in bus.phases.iter() {
                bus.base[p.index()] = Some(Polar::from_complex(v[p.index()]));
            }
        }
        net
    }

    /// Copy of the model whose non-source buses use nominal balanced
    /// phasors as their base point. The source keeps its slack phasors.
    pub fn with_nominal_base(&self) -> Self {
        let mut net = self.clone();
        for bus in &mut net.buses {
            if !bus.is_source {
                bus.base = [None; 3];
            }
        }
        net
    }

    /// Copy of the model with all base loads removed. Stored base points
    /// of non-source buses are dropped as well, so sensitivities fall back
    /// to the nominal phasors of the unloaded feeder.
    pub fn without_loads(&self) -> Self {
        let mut net = self.clone();
        for bus in &mut net.buses {
            bus.load = [Complex64::new(0.0, 0.0); 3];
            if !bus.is_source {
                bus.base = [None; 3];
            }
        }
        net
    }
}

fn validate_bus(bus: &Bus) -> Result<()> {
    if bus.phases.is_empty() {
        return Err(Error::field(format!("bus {}", bus.id), "no phases"));
    }
    if !(bus.nominal_kv.is_finite() && bus.nominal_kv > 0.0) {
        return Err(Error::field(
            format!("bus {}", bus.id),
            "nominal voltage must be positive",
        ));
    }
    for p in Phase::ALL {
        let present = bus.phases.contains(p);
        if let Some(base) = bus.base[p.index()] {
            if !present {
                return Err(Error::PhaseMismatch {
                    bus: bus.id,
                    phase: p,
                    context: "base voltage".into(),
                });
            }
            if !(base.magnitude.is_finite() && base.magnitude > 0.0 && base.angle_deg.is_finite()) {
                return Err(Error::field(
                    format!("bus {} base.{p}", bus.id),
                    "base voltage magnitude must be positive",
                ));
            }
        }
        let load = bus.load[p.index()];
        if !present && load != Complex64::new(0.0, 0.0) {
            return Err(Error::PhaseMismatch {
                bus: bus.id,
                phase: p,
                context: "load".into(),
            });
        }
        if !(load.re.is_finite() && load.im.is_finite()) {
            return Err(Error::field(format!("bus {} load", bus.id), "non-finite"));
        }
    }
    Ok(())
}

fn validate_segment(k: usize, line: &LineSegment, from: &Bus, to: &Bus) -> Result<()> {
    let ctx = || format!("segment {} -> {}", line.from, line.to);
    let scale = line.z.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..3 {
        for j in 0..3 {
            let zij = line.z[(i, j)];
            if !(zij.re.is_finite() && zij.im.is_finite()) {
                return Err(Error::field(format!("lines[{k}]"), "non-finite impedance"));
            }
            if (zij - line.z[(j, i)]).norm() > 1e-12 * scale {
                return Err(Error::field(
                    format!("lines[{k}]"),
                    format!("impedance matrix of {} is not symmetric", ctx()),
                ));
            }
        }
        if line.z[(i, i)].re < 0.0 {
            return Err(Error::field(
                format!("lines[{k}]"),
                format!("negative resistance on {}", ctx()),
            ));
        }
    }
    for p in line.phases_used().iter() {
        for bus in [from, to] {
            if !bus.phases.contains(p) {
                return Err(Error::PhaseMismatch {
                    bus: bus.id,
                    phase: p,
                    context: ctx(),
                });
            }
        }
    }
    Ok(())
}
