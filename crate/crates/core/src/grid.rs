//! Discrete phase space: a uniform node grid over a 2D box times an energy
//! interval, inflow/outflow classification of its faces, and field storage.
//!
//! Values live at nodes (endpoints included). Storage is row-major with `x`
//! outermost and energy innermost, so the energy samples of one spatial node
//! are contiguous.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Tolerance on `|ω| = 1` accepted by [`classify_boundary`].
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub e_min: f64,
    pub e_max: f64,
    pub ne: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            x_min: 0.0,
            x_max: 4.0,
            y_min: -2.0,
            y_max: 2.0,
            nx: 33,
            ny: 33,
            e_min: 1.0,
            e_max: 60.0,
            ne: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub e: Vec<f64>,
    pub dx: f64,
    pub dy: f64,
    pub de: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + h * i as f64 })
        .collect()
}

/// Materialize a uniform node grid.
pub fn build_grid(cfg: &GridConfig) -> Result<PhaseGrid> {
    let finite = [
        cfg.x_min, cfg.x_max, cfg.y_min, cfg.y_max, cfg.e_min, cfg.e_max,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !finite {
        return Err(Error::Grid("non-finite bounds".into()));
    }
    if cfg.x_min >= cfg.x_max || cfg.y_min >= cfg.y_max {
        return Err(Error::Grid("degenerate extent".into()));
    }
    if cfg.e_min <= 0.0 {
        return Err(Error::Grid("E_min must be positive".into()));
    }
    if cfg.e_min >= cfg.e_max {
        return Err(Error::Grid("degenerate extent in energy".into()));
    }
    if cfg.nx < 2 || cfg.ny < 2 || cfg.ne < 2 {
        return Err(Error::Grid("node counts must be at least 2".into()));
    }
    Ok(PhaseGrid {
        x: linspace(cfg.x_min, cfg.x_max, cfg.nx),
        y: linspace(cfg.y_min, cfg.y_max, cfg.ny),
        e: linspace(cfg.e_min, cfg.e_max, cfg.ne),
        dx: (cfg.x_max - cfg.x_min) / (cfg.nx - 1) as f64,
        dy: (cfg.y_max - cfg.y_min) / (cfg.ny - 1) as f64,
        de: (cfg.e_max - cfg.e_min) / (cfg.ne - 1) as f64,
    })
}

impl PhaseGrid {
    pub fn nx(&self) -> usize {
        self.x.len()
    }
    pub fn ny(&self) -> usize {
        self.y.len()
    }
    pub fn ne(&self) -> usize {
        self.e.len()
    }
    pub fn x_min(&self) -> f64 {
        self.x[0]
    }
    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }
    pub fn y_min(&self) -> f64 {
        self.y[0]
    }
    pub fn y_max(&self) -> f64 {
        self.y[self.y.len() - 1]
    }
    pub fn e_min(&self) -> f64 {
        self.e[0]
    }
    pub fn e_max(&self) -> f64 {
        self.e[self.e.len() - 1]
    }
    pub fn dims(&self) -> Dims {
        Dims {
            nx: self.nx(),
            ny: self.ny(),
            ne: self.ne(),
        }
    }
    pub fn len(&self) -> usize {
        self.nx() * self.ny() * self.ne()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Number of spatial nodes.
    pub fn spatial_len(&self) -> usize {
        self.nx() * self.ny()
    }
    #[inline]
    pub fn index(&self, k: usize, l: usize, m: usize) -> usize {
        (k * self.ny() + l) * self.ne() + m
    }
    pub fn config(&self) -> GridConfig {
        GridConfig {
            x_min: self.x_min(),
            x_max: self.x_max(),
            y_min: self.y_min(),
            y_max: self.y_max(),
            nx: self.nx(),
            ny: self.ny(),
            e_min: self.e_min(),
            e_max: self.e_max(),
            ne: self.ne(),
        }
    }
    pub fn contains(&self, x: f64, y: f64, e: f64) -> bool {
        x >= self.x_min()
            && x <= self.x_max()
            && y >= self.y_min()
            && y <= self.y_max()
            && e >= self.e_min()
            && e <= self.e_max()
    }
}

/// Trapezoid weights for a uniform node set.
pub fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (nodes[i + 1] - nodes[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub ne: usize,
}

impl Dims {
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.ne
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    /// x = x_min, outward normal (-1, 0).
    Left,
    /// x = x_max, outward normal (1, 0).
    Right,
    /// y = y_min, outward normal (0, -1).
    Bottom,
    /// y = y_max, outward normal (0, 1).
    Top,
    /// E = E_max.
    EnergyTop,
    /// E = E_min.
    EnergyBottom,
}

impl Face {
    pub const SPATIAL: [Face; 4] = [Face::Left, Face::Right, Face::Bottom, Face::Top];

    pub fn outward_normal(self) -> Option<[f64; 2]> {
        match self {
            Face::Left => Some([-1.0, 0.0]),
            Face::Right => Some([1.0, 0.0]),
            Face::Bottom => Some([0.0, -1.0]),
            Face::Top => Some([0.0, 1.0]),
            Face::EnergyTop | Face::EnergyBottom => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    SpatialInflow,
    SpatialOutflow,
    EnergyInflowTop,
    EnergyOutflowBottom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryClassification {
    pub faces: [(Face, BoundaryTag); 6],
}

impl BoundaryClassification {
    pub fn tag(&self, face: Face) -> BoundaryTag {
        self.faces
            .iter()
            .find(|(f, _)| *f == face)
            .map(|(_, t)| *t)
            .expect("every face is classified")
    }

    pub fn inflow_faces(&self) -> impl Iterator<Item = Face> + '_ {
        self.faces
            .iter()
            .filter(|(_, t)| matches!(t, BoundaryTag::SpatialInflow))
            .map(|(f, _)| *f)
    }
}

/// Tag every face of the phase grid for transport in direction `omega`.
///
/// A spatial face is inflow iff `ω·n < 0`; grazing faces read no data and are
/// tagged outflow. The energy faces do not depend on `ω` because `S > 0`.
pub fn classify_boundary(_grid: &PhaseGrid, omega: [f64; 2]) -> Result<BoundaryClassification> {
    let norm = (omega[0] * omega[0] + omega[1] * omega[1]).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::Input(format!(
            "direction must be a unit vector, |ω| = {norm}"
        )));
    }
    let spatial = |face: Face| {
        let n = face.outward_normal().unwrap();
        let dot = omega[0] * n[0] + omega[1] * n[1];
        if dot < 0.0 {
            (face, BoundaryTag::SpatialInflow)
        } else {
            (face, BoundaryTag::SpatialOutflow)
        }
    };
    Ok(BoundaryClassification {
        faces: [
            spatial(Face::Left),
            spatial(Face::Right),
            spatial(Face::Bottom),
            spatial(Face::Top),
            (Face::EnergyTop, BoundaryTag::EnergyInflowTop),
            (Face::EnergyBottom, BoundaryTag::EnergyOutflowBottom),
        ],
    })
}

/// One direction's values over the full phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalField {
    dims: Dims,
    values: Vec<f64>,
}

impl DirectionalField {
    pub fn zeros(dims: Dims) -> Self {
        DirectionalField {
            dims,
            values: vec![0.0; dims.len()],
        }
    }

    pub fn from_values(dims: Dims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                dims.len(),
                values.len()
            )));
        }
        Ok(DirectionalField { dims, values })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    fn offset(&self, k: usize, l: usize, m: usize) -> usize {
        (k * self.dims.ny + l) * self.dims.ne + m
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize, m: usize) -> f64 {
        self.values[self.offset(k, l, m)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, l: usize, m: usize, v: f64) {
        let i = self.offset(k, l, m);
        self.values[i] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Export as `x_cm,y_cm,E_MeV,value`, x outermost and E innermost.
    pub fn to_csv_string(&self, grid: &PhaseGrid) -> Result<String> {
        if self.dims != grid.dims() {
            return Err(Error::Shape("field does not match grid".into()));
        }
        let mut s = String::from("x_cm,y_cm,E_MeV,value\n");
        for (k, x) in grid.x.iter().enumerate() {
            for (l, y) in grid.y.iter().enumerate() {
                for (m, e) in grid.e.iter().enumerate() {
                    let _ = writeln!(s, "{x},{y},{e},{}", self.get(k, l, m));
                }
            }
        }
        Ok(s)
    }

    pub fn write_csv(&self, grid: &PhaseGrid, path: &Path) -> Result<()> {
        let s = self.to_csv_string(grid)?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Per-direction fields sharing one grid and one direction set.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularField {
    components: Vec<DirectionalField>,
}

impl AngularField {
    pub fn zeros(dims: Dims, q: usize) -> Self {
        AngularField {
            components: (0..q).map(|_| DirectionalField::zeros(dims)).collect(),
        }
    }

    pub fn from_components(components: Vec<DirectionalField>) -> Result<Self> {
        if let Some(first) = components.first() {
            if components.iter().any(|c| c.dims() != first.dims()) {
                return Err(Error::Shape(
                    "angular components must share grid dimensions".into(),
                ));
            }
        }
        Ok(AngularField { components })
    }

    pub fn q(&self) -> usize {
        self.components.len()
    }

    pub fn dims(&self) -> Option<Dims> {
        self.components.first().map(|c| c.dims())
    }

    pub fn components(&self) -> &[DirectionalField] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [DirectionalField] {
        &mut self.components
    }

    pub fn component(&self, i: usize) -> &DirectionalField {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<DirectionalField> {
        self.components
    }

    pub fn same_shape(&self, other: &AngularField) -> bool {
        self.q() == other.q() && self.dims() == other.dims()
    }

    /// Weighted angular sum `Σ_i w_i Ψ_i` (the scalar fluence for outer weights).
    pub fn weighted_sum(&self, weights: &[f64]) -> Result<DirectionalField> {
        if weights.len() != self.q() {
            return Err(Error::Shape(format!(
                "{} weights for {} directions",
                weights.len(),
                self.q()
            )));
        }
        let dims = self
            .dims()
            .ok_or_else(|| Error::Shape("empty angular field".into()))?;
        let mut out = vec![0.0; dims.len()];
        for (w, c) in weights.iter().zip(&self.components) {
            for (o, v) in out.iter_mut().zip(c.values()) {
                *o += w * v;
            }
        }
        DirectionalField::from_values(dims, out)
    }
}
