//! Spatial domain: grid cells, ground-truth fields, candidate sets and scoring.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A grid cell. `x` is the column, `y` the row, both 0-indexed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub x: u32,
    pub y: u32,
}

impl Location {
    pub const fn new(x: u32, y: u32) -> Self {
        Location { x, y }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl From<(u32, u32)> for Location {
    fn from((x, y): (u32, u32)) -> Self {
        Location { x, y }
    }
}

/// Travel length between two cells, in cells.
pub fn manhattan_distance(a: Location, b: Location) -> u32 {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

pub(crate) fn euclidean_distance(a: Location, b: Location) -> f64 {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    dx.hypot(dy)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridSpec {
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
struct RawGrid {
    width: u32,
    height: u32,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridSpec::new(raw.width, raw.height)
    }
}

impl GridSpec {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::param(format!(
                "grid must be at least 2x2, got {width}x{height}"
            )));
        }
        Ok(GridSpec { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn contains(&self, loc: Location) -> bool {
        loc.x < self.width && loc.y < self.height
    }

    /// Row-major index of `loc`.
    pub fn index(&self, loc: Location) -> Result<usize> {
        if !self.contains(loc) {
            return Err(Error::Domain(format!(
                "{loc} outside {}x{} grid",
                self.width, self.height
            )));
        }
        Ok(loc.y as usize * self.width as usize + loc.x as usize)
    }

    pub fn location(&self, index: usize) -> Location {
        let w = self.width as usize;
        Location::new((index % w) as u32, (index / w) as u32)
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Location> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Location::new(x, y)))
    }

    pub fn lower_right(&self) -> Location {
        Location::new(self.width - 1, self.height - 1)
    }
}

/// One isotropic Gaussian bump. The center is real-valued.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub center: (f64, f64),
    pub amplitude: f64,
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureField {
    components: Vec<MixtureComponent>,
    grid: GridSpec,
}

impl MixtureField {
    pub fn new(grid: GridSpec, components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::param("mixture needs at least one component"));
        }
        for (i, c) in components.iter().enumerate() {
            if !(c.spread > 0.0 && c.spread.is_finite()) {
                return Err(Error::param(format!(
                    "component {i}: spread must be positive, got {}",
                    c.spread
                )));
            }
            if !c.amplitude.is_finite() || !c.center.0.is_finite() || !c.center.1.is_finite() {
                return Err(Error::param(format!("component {i}: non-finite parameter")));
            }
        }
        Ok(MixtureField { components, grid })
    }

    /// Draws 3 to 5 components with centers uniform on the grid, amplitudes
    /// in [1, 5] and spreads in [2, 6].
    pub fn random<R: Rng + ?Sized>(grid: GridSpec, rng: &mut R) -> Self {
        let count = rng.random_range(3..=5);
        let components = (0..count)
            .map(|_| MixtureComponent {
                center: (
                    rng.random_range(0.0..=(grid.width - 1) as f64),
                    rng.random_range(0.0..=(grid.height - 1) as f64),
                ),
                amplitude: rng.random_range(1.0..=5.0),
                spread: rng.random_range(2.0..=6.0),
            })
            .collect();
        MixtureField { components, grid }
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    fn value(&self, loc: Location) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let dx = loc.x as f64 - c.center.0;
                let dy = loc.y as f64 - c.center.1;
                c.amplitude * (-(dx * dx + dy * dy) / (2.0 * c.spread * c.spread)).exp()
            })
            .sum()
    }
}

/// Dense row-major raster.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::param(format!(
                "raster has {} values, grid needs {}",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("raster value {i} is not finite")));
        }
        Ok(GridField { grid, values })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rescales values to zero mean and unit variance.
    pub fn standardized(&self) -> GridField {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let var = self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        GridField {
            grid: self.grid,
            values: self.values.iter().map(|v| (v - mean) / sd).collect(),
        }
    }
}

/// Ground truth `h`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarField {
    Mixture(MixtureField),
    Grid(GridField),
}

impl From<MixtureField> for ScalarField {
    fn from(f: MixtureField) -> Self {
        ScalarField::Mixture(f)
    }
}

impl From<GridField> for ScalarField {
    fn from(f: GridField) -> Self {
        ScalarField::Grid(f)
    }
}

impl ScalarField {
    pub fn grid(&self) -> GridSpec {
        match self {
            ScalarField::Mixture(m) => m.grid,
            ScalarField::Grid(g) => g.grid,
        }
    }

    pub fn eval(&self, loc: Location) -> Result<f64> {
        let idx = self.grid().index(loc)?;
        Ok(match self {
            ScalarField::Mixture(m) => m.value(loc),
            ScalarField::Grid(g) => g.values[idx],
        })
    }

    /// Field values at every cell, row-major.
    pub fn dense(&self) -> Vec<f64> {
        match self {
            ScalarField::Mixture(m) => m.grid.cells().map(|l| m.value(l)).collect(),
            ScalarField::Grid(g) => g.values.clone(),
        }
    }
}

/// A sensor reading: the field value plus optional Gaussian noise.
pub fn sample_measurement<R: Rng + ?Sized>(
    field: &ScalarField,
    loc: Location,
    noise_sd: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::param(format!(
            "noise_sd must be finite and >= 0, got {noise_sd}"
        )));
    }
    let value = field.eval(loc)?;
    if noise_sd == 0.0 {
        return Ok(value);
    }
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::param(e.to_string()))?;
    Ok(value + noise.sample(rng))
}

/// Reads a raster CSV with header `x,y,value`, one row per cell.
pub fn load_grid_field(path: impl AsRef<Path>) -> Result<GridField> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grid_csv(&text)
}

pub fn parse_grid_csv(text: &str) -> Result<GridField> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Format {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["x", "y", "value"] {
        return Err(Error::Format {
            line: 1,
            msg: format!("expected header `x,y,value`, got `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut cells: Vec<(u32, u32, f64, usize)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize, name: &str| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Format {
                line,
                msg: format!("missing `{name}` column"),
            })
        };
        let x: u32 = field(0, "x")?.parse().map_err(|_| Error::Format {
            line,
            msg: format!("x is not a non-negative integer: `{}`", &record[0]),
        })?;
        let y: u32 = field(1, "y")?.parse().map_err(|_| Error::Format {
            line,
            msg: format!("y is not a non-negative integer: `{}`", &record[1]),
        })?;
        let value: f64 = field(2, "value")?.parse().map_err(|_| Error::Format {
            line,
            msg: format!("value is not numeric: `{}`", &record[2]),
        })?;
        if !value.is_finite() {
            return Err(Error::Format {
                line,
                msg: "value is not finite".into(),
            });
        }
        cells.push((x, y, value, line));
    }

    let width = cells.iter().map(|c| c.0).max().map_or(0, |m| m + 1);
    let height = cells.iter().map(|c| c.1).max().map_or(0, |m| m + 1);
    let grid = GridSpec::new(width, height).map_err(|e| Error::Format {
        line: cells.last().map_or(1, |c| c.3),
        msg: e.to_string(),
    })?;

    let mut values = vec![f64::NAN; grid.cell_count()];
    let mut seen = vec![false; grid.cell_count()];
    for &(x, y, v, line) in &cells {
        let idx = grid.index(Location::new(x, y))?;
        if seen[idx] {
            return Err(Error::Format {
                line,
                msg: format!("duplicate cell ({x}, {y})"),
            });
        }
        seen[idx] = true;
        values[idx] = v;
    }
    if let Some(idx) = seen.iter().position(|s| !s) {
        let loc = grid.location(idx);
        return Err(Error::Format {
            line: cells.len() + 2,
            msg: format!("missing cell {loc} of {width}x{height} grid"),
        });
    }
    GridField::new(grid, values)
}

pub fn write_grid_field<W: Write>(field: &GridField, mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,y,value")?;
    for (loc, v) in field.grid.cells().zip(&field.values) {
        writeln!(out, "{},{},{}", loc.x, loc.y, v)?;
    }
    Ok(())
}

/// Distinct locations in insertion order.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Location>", into = "Vec<Location>")]
pub struct LocationSet {
    order: Vec<Location>,
    members: HashSet<Location>,
}

impl LocationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `loc`; returns false when it was already present.
    pub fn insert(&mut self, loc: Location) -> bool {
        if self.members.insert(loc) {
            self.order.push(loc);
            true
        } else {
            false
        }
    }

    pub fn contains(&self, loc: &Location) -> bool {
        self.members.contains(loc)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Location> {
        self.order.iter()
    }

    pub fn as_slice(&self) -> &[Location] {
        &self.order
    }

    /// Keeps only members for which `keep` returns true, preserving order.
    pub fn retain(&mut self, mut keep: impl FnMut(&Location) -> bool) {
        self.order.retain(|l| keep(l));
        self.members = self.order.iter().copied().collect();
    }
}

impl PartialEq for LocationSet {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
    }
}

impl Eq for LocationSet {}

impl FromIterator<Location> for LocationSet {
    fn from_iter<I: IntoIterator<Item = Location>>(iter: I) -> Self {
        let mut set = LocationSet::new();
        for loc in iter {
            set.insert(loc);
        }
        set
    }
}

impl Extend<Location> for LocationSet {
    fn extend<I: IntoIterator<Item = Location>>(&mut self, iter: I) {
        for loc in iter {
            self.insert(loc);
        }
    }
}

impl From<Vec<Location>> for LocationSet {
    fn from(v: Vec<Location>) -> Self {
        v.into_iter().collect()
    }
}

impl From<LocationSet> for Vec<Location> {
    fn from(s: LocationSet) -> Self {
        s.order
    }
}

impl<'a> IntoIterator for &'a LocationSet {
    type Item = &'a Location;
    type IntoIter = std::slice::Iter<'a, Location>;

    fn into_iter(self) -> Self::IntoIter {
        self.order.iter()
    }
}

/// `n` distinct cells drawn uniformly without replacement.
pub fn initial_locations<R: Rng + ?Sized>(grid: GridSpec, n: usize, rng: &mut R) -> Result<LocationSet> {
    let cells = grid.cell_count();
    if n > cells {
        return Err(Error::param(format!(
            "cannot draw {n} distinct locations from {cells} cells"
        )));
    }
    Ok(index::sample(rng, cells, n)
        .into_iter()
        .map(|i| grid.location(i))
        .collect())
}

/// Mean squared error of a dense row-major estimate against the truth.
pub fn mse(estimate: &[f64], truth: &ScalarField) -> Result<f64> {
    let grid = truth.grid();
    if estimate.len() != grid.cell_count() {
        return Err(Error::param(format!(
            "estimate has {} cells, grid has {}",
            estimate.len(),
            grid.cell_count()
        )));
    }
    let truth = truth.dense();
    let sum: f64 = estimate
        .iter()
        .zip(&truth)
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    Ok(sum / estimate.len() as f64)
}
