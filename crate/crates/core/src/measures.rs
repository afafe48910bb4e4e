//! Discrete measures on `R^d` and mass counting inside closed `l_inf` cubes.
//!
//! Two representations are supported: an explicit list of weighted Dirac
//! deltas ([`DeltaMeasure`]) and the integer lattice restricted to an
//! axis-aligned box ([`LatticeWindow`]), which is never materialized. The
//! lattice count factorizes over axes, so every cube query on a window costs
//! `O(d)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance below which `x +- r` is treated as lying on an integer.
pub const SNAP_TOLERANCE: f64 = 1.0 / (1u64 << 40) as f64;

/// Rounds `v` to the nearest integer when it is within [`SNAP_TOLERANCE`] of it.
pub(crate) fn snap(v: f64) -> f64 {
    let nearest = v.round();
    if (v - nearest).abs() <= SNAP_TOLERANCE {
        nearest
    } else {
        v
    }
}

/// Number of integers `n` with `x - r <= n <= x + r`, clipped to `[lo, hi]`.
///
/// `None` bounds mean the axis is unbounded in that direction. Returns 0 when
/// the intersection is empty.
pub fn axis_count(x: f64, r: f64, lo: Option<i64>, hi: Option<i64>) -> u64 {
    let mut first = snap(x - r).ceil();
    let mut last = snap(x + r).floor();
    if let Some(lo) = lo {
        first = first.max(lo as f64);
    }
    if let Some(hi) = hi {
        last = last.min(hi as f64);
    }
    if last < first {
        0
    } else {
        (last - first) as u64 + 1
    }
}

/// The closed cube `Q(center, radius)`, sidelength `2 * radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    center: Vec<f64>,
    radius: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("must be positive and finite, got {radius}")));
        }
        if center.is_empty() {
            return Err(Error::invalid("center", "cube needs at least one dimension"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("center", "coordinates must be finite"));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.radius).powi(self.dimension() as i32)
    }

    /// `l_inf` membership, closed.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.center.len()
            && p.iter()
                .zip(&self.center)
                .all(|(a, c)| (a - c).abs() <= self.radius)
    }
}

/// Common surface of the discrete measures.
pub trait DiscreteMeasure {
    fn dimension(&self) -> usize;

    /// Total mass inside the closed cube.
    fn count_in_cube(&self, cube: &Cube) -> Result<f64>;

    /// Total mass; infinite measures are rejected.
    fn mass(&self) -> Result<f64>;

    fn check_dimension(&self, got: usize) -> Result<()> {
        if got != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got,
            });
        }
        Ok(())
    }
}

/// A single point mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub x: Vec<f64>,
    pub w: f64,
}

/// Finite sum of weighted Dirac deltas in a fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDeltaMeasure")]
pub struct DeltaMeasure {
    dimension: usize,
    points: Vec<Delta>,
}

#[derive(Deserialize)]
struct RawDeltaMeasure {
    dimension: usize,
    points: Vec<Delta>,
}

impl TryFrom<RawDeltaMeasure> for DeltaMeasure {
    type Error = Error;

    fn try_from(raw: RawDeltaMeasure) -> Result<Self> {
        DeltaMeasure::new(raw.dimension, raw.points)
    }
}

impl DeltaMeasure {
    pub fn new(dimension: usize, points: Vec<Delta>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        for p in &points {
            if p.x.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: p.x.len(),
                });
            }
            if p.x.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("points", "coordinates must be finite"));
            }
            if !(p.w > 0.0 && p.w.is_finite()) {
                return Err(Error::invalid("points", format!("weight must be positive and finite, got {}", p.w)));
            }
        }
        Ok(Self { dimension, points })
    }

    /// Unit-weight deltas at the given points.
    pub fn unit<I>(dimension: usize, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let points = points.into_iter().map(|x| Delta { x, w: 1.0 }).collect();
        Self::new(dimension, points)
    }

    pub fn points(&self) -> &[Delta] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Returns a copy with one more delta.
    pub fn with_delta(&self, delta: Delta) -> Result<Self> {
        let mut points = self.points.clone();
        points.push(delta);
        Self::new(self.dimension, points)
    }
}

impl DiscreteMeasure for DeltaMeasure {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn count_in_cube(&self, cube: &Cube) -> Result<f64> {
        self.check_dimension(cube.dimension())?;
        Ok(self
            .points
            .iter()
            .filter(|p| cube.contains(&p.x))
            .map(|p| p.w)
            .sum())
    }

    fn mass(&self) -> Result<f64> {
        Ok(self.points.iter().map(|p| p.w).sum())
    }
}

/// Per-axis extent of a lattice window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extent {
    Bounded { lo: i64, hi: i64 },
    Infinite,
}

/// Unit point masses on `Z^d`, optionally restricted to `[lo, hi]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow", into = "RawWindow")]
pub struct LatticeWindow {
    dimension: usize,
    extent: Extent,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum RawWindow {
    Bounded { dimension: usize, lo: i64, hi: i64 },
    Infinite { dimension: usize, infinite: bool },
}

impl TryFrom<RawWindow> for LatticeWindow {
    type Error = Error;

    fn try_from(raw: RawWindow) -> Result<Self> {
        match raw {
            RawWindow::Bounded { dimension, lo, hi } => LatticeWindow::bounded(dimension, lo, hi),
            RawWindow::Infinite {
                dimension,
                infinite: true,
            } => LatticeWindow::infinite(dimension),
            RawWindow::Infinite { .. } => Err(Error::invalid(
                "infinite",
                "must be true when lo/hi are absent",
            )),
        }
    }
}

impl From<LatticeWindow> for RawWindow {
    fn from(w: LatticeWindow) -> Self {
        match w.extent {
            Extent::Bounded { lo, hi } => RawWindow::Bounded {
                dimension: w.dimension,
                lo,
                hi,
            },
            Extent::Infinite => RawWindow::Infinite {
                dimension: w.dimension,
                infinite: true,
            },
        }
    }
}

impl LatticeWindow {
    pub fn bounded(dimension: usize, lo: i64, hi: i64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        if !(lo <= 0 && 0 <= hi) {
            return Err(Error::invalid("window", format!("need lo <= 0 <= hi, got [{lo}, {hi}]")));
        }
        Ok(Self {
            dimension,
            extent: Extent::Bounded { lo, hi },
        })
    }

    pub fn infinite(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        Ok(Self {
            dimension,
            extent: Extent::Infinite,
        })
    }

    /// Window `[-floor(reach), side + floor(reach)]^d` holding every lattice
    /// point reachable by a cube of radius `<= reach` centered in `[0, side]^d`.
    pub fn for_certificate(dimension: usize, side: u64, reach: f64) -> Result<Self> {
        if !(reach >= 0.0 && reach.is_finite()) {
            return Err(Error::invalid("reach", format!("must be finite and nonnegative, got {reach}")));
        }
        let margin = snap(reach).floor() as i64;
        Self::bounded(dimension, -margin, side as i64 + margin)
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    pub fn is_infinite(&self) -> bool {
        self.extent == Extent::Infinite
    }

    pub fn axis_bounds(&self) -> (Option<i64>, Option<i64>) {
        match self.extent {
            Extent::Bounded { lo, hi } => (Some(lo), Some(hi)),
            Extent::Infinite => (None, None),
        }
    }

    /// Explicit delta list for a bounded window (tests and small cases only).
    pub fn to_delta_measure(&self) -> Result<DeltaMeasure> {
        let Extent::Bounded { lo, hi } = self.extent else {
            return Err(Error::InfiniteMass);
        };
        let width = (hi - lo + 1) as usize;
        let total = width
            .checked_pow(self.dimension as u32)
            .filter(|&n| n <= 10_000_000)
            .ok_or_else(|| Error::invalid("window", "too many lattice points to materialize"))?;
        let points = (0..total).map(|mut idx| {
            let mut x = vec![0.0; self.dimension];
            for c in x.iter_mut() {
                *c = (lo + (idx % width) as i64) as f64;
                idx /= width;
            }
            x
        });
        DeltaMeasure::unit(self.dimension, points)
    }
}

impl DiscreteMeasure for LatticeWindow {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn count_in_cube(&self, cube: &Cube) -> Result<f64> {
        self.check_dimension(cube.dimension())?;
        let (lo, hi) = self.axis_bounds();
        let mut product = 1.0;
        for &c in cube.center() {
            let n = axis_count(c, cube.radius(), lo, hi);
            if n == 0 {
                return Ok(0.0);
            }
            product *= n as f64;
        }
        Ok(product)
    }

    fn mass(&self) -> Result<f64> {
        match self.extent {
            Extent::Bounded { lo, hi } => Ok(((hi - lo + 1) as f64).powi(self.dimension as i32)),
            Extent::Infinite => Err(Error::InfiniteMass),
        }
    }
}

/// Either representation, as read from a JSON measure file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Measure {
    Deltas(DeltaMeasure),
    Lattice(LatticeWindow),
}

impl DiscreteMeasure for Measure {
    fn dimension(&self) -> usize {
        match self {
            Measure::Deltas(m) => m.dimension(),
            Measure::Lattice(w) => w.dimension(),
        }
    }

    fn count_in_cube(&self, cube: &Cube) -> Result<f64> {
        match self {
            Measure::Deltas(m) => m.count_in_cube(cube),
            Measure::Lattice(w) => w.count_in_cube(cube),
        }
    }

    fn mass(&self) -> Result<f64> {
        match self {
            Measure::Deltas(m) => m.mass(),
            Measure::Lattice(w) => w.mass(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_lattice_count(window: &LatticeWindow, cube: &Cube) -> f64 {
        let m = window.to_delta_measure().unwrap();
        m.points().iter().filter(|p| cube.contains(&p.x)).count() as f64
    }

    #[test]
    fn axis_count_examples() {
        assert_eq!(axis_count(0.5, 0.5, None, None), 2);
        // centered coordinate at level 1/4 with s = 1: radius s - u/2
        assert_eq!(axis_count(0.5, 0.875, None, None), 2);
        // off-center at level 1/4 loses one delta
        assert_eq!(axis_count(0.95, 0.875, None, None), 1);
        assert_eq!(axis_count(-5.0, 1.0, Some(0), Some(3)), 0);
        assert_eq!(axis_count(1.5, 10.0, Some(0), Some(3)), 4);
    }

    #[test]
    fn axis_count_snaps_roundoff() {
        // 0.1 + 0.2 lands just above 0.3; the closed boundary must survive
        assert_eq!(axis_count(0.7, 0.1 + 0.2, None, None), 1);
        assert_eq!(axis_count(0.3, 0.1 + 0.2, None, None), 1);
        assert_eq!(axis_count(0.5, 0.5 - 1e-14, None, None), 2);
    }

    #[test]
    fn count_in_cube_examples() {
        let m = DeltaMeasure::unit(1, [vec![0.0], vec![1.0]]).unwrap();
        let c = Cube::new(vec![0.5], 0.5).unwrap();
        assert_eq!(m.count_in_cube(&c).unwrap(), 2.0);

        let w = LatticeWindow::infinite(2).unwrap();
        let c = Cube::new(vec![0.5, 0.5], 0.875).unwrap();
        assert_eq!(w.count_in_cube(&c).unwrap(), 4.0);

        let w = LatticeWindow::bounded(1, 0, 3).unwrap();
        let c = Cube::new(vec![-5.0], 1.0).unwrap();
        assert_eq!(w.count_in_cube(&c).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let w = LatticeWindow::infinite(3).unwrap();
        let c = Cube::new(vec![0.5, 0.5], 1.0).unwrap();
        assert!(matches!(
            w.count_in_cube(&c),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn mass_examples() {
        assert_eq!(LatticeWindow::bounded(3, 0, 1).unwrap().mass().unwrap(), 8.0);
        let m = DeltaMeasure::unit(1, [vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(m.mass().unwrap(), 3.0);
        assert_eq!(LatticeWindow::bounded(2, -4, 14).unwrap().mass().unwrap(), 361.0);
        assert!(matches!(
            LatticeWindow::infinite(2).unwrap().mass(),
            Err(Error::InfiniteMass)
        ));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(Cube::new(vec![0.0], 0.0).is_err());
        assert!(LatticeWindow::bounded(2, 1, 3).is_err());
        assert!(DeltaMeasure::new(1, vec![Delta { x: vec![0.0], w: 0.0 }]).is_err());
        assert!(DeltaMeasure::new(2, vec![Delta { x: vec![0.0], w: 1.0 }]).is_err());
    }

    #[test]
    fn certificate_window_keeps_reachable_points() {
        let w = LatticeWindow::for_certificate(2, 10, 2f64.sqrt()).unwrap();
        assert_eq!(w.extent(), Extent::Bounded { lo: -1, hi: 11 });
        let w = LatticeWindow::for_certificate(4, 10, 2.0).unwrap();
        assert_eq!(w.extent(), Extent::Bounded { lo: -2, hi: 12 });
    }

    #[test]
    fn product_identity_matches_enumeration() {
        let windows = [
            LatticeWindow::bounded(1, -5, 5).unwrap(),
            LatticeWindow::bounded(2, -3, 4).unwrap(),
            LatticeWindow::bounded(3, -2, 2).unwrap(),
        ];
        let centers = [-2.3, -0.5, 0.0, 0.25, 1.0, 1.7, 3.5];
        let radii = [0.1, 0.5, 0.75, 1.0, 1.5, 2.25, 4.0];
        for w in &windows {
            let d = w.dimension();
            for (i, &r) in radii.iter().enumerate() {
                let center: Vec<f64> = (0..d).map(|j| centers[(i + 2 * j) % centers.len()]).collect();
                let cube = Cube::new(center, r).unwrap();
                assert_eq!(w.count_in_cube(&cube).unwrap(), brute_lattice_count(w, &cube));
            }
        }
    }

    #[test]
    fn closed_boundary_counted() {
        let m = DeltaMeasure::unit(2, [vec![1.0, 0.25]]).unwrap();
        let c = Cube::new(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(m.count_in_cube(&c).unwrap(), 1.0);
    }

    #[test]
    fn json_schemas() {
        let m: Measure = serde_json::from_str(r#"{"dimension": 1, "points": [{"x": [0.0], "w": 1.0}]}"#).unwrap();
        assert!(matches!(m, Measure::Deltas(_)));
        let w: Measure = serde_json::from_str(r#"{"dimension": 2, "lo": -1, "hi": 3}"#).unwrap();
        assert_eq!(w, Measure::Lattice(LatticeWindow::bounded(2, -1, 3).unwrap()));
        let w: LatticeWindow = serde_json::from_str(r#"{"dimension": 2, "infinite": true}"#).unwrap();
        assert!(w.is_infinite());
        assert_eq!(
            serde_json::to_string(&w).unwrap(),
            r#"{"dimension":2,"infinite":true}"#
        );
        assert!(serde_json::from_str::<LatticeWindow>(r#"{"dimension": 2, "infinite": false}"#).is_err());
        assert!(serde_json::from_str::<DeltaMeasure>(r#"{"dimension": 2, "points": [{"x": [0.0], "w": 1.0}]}"#).is_err());
    }
}
