//! Conductor layouts and the circular computational domain around them.
//!
//! All lengths are in meters. The domain boundary is a circle centered on the
//! centroid of the conductor centers whose radius is the distance to the
//! farthest center plus a fixed margin.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vacuum permeability in Vs/Am.
pub const MU0: f64 = 4.0e-7 * PI;

/// Default conductor radius (5 mm).
pub const DEFAULT_RADIUS_M: f64 = 5.0e-3;
/// Default distance between the outermost center and the boundary (3 r_c).
pub const DEFAULT_BOUNDARY_MARGIN_M: f64 = 3.0 * DEFAULT_RADIUS_M;
/// Copper conductivity in S/m.
pub const SIGMA_CU: f64 = 58.1e6;
/// Default imposed current amplitude in A.
pub const DEFAULT_CURRENT_A: f64 = 1.0;
/// Default excitation frequency in Hz.
pub const DEFAULT_FREQUENCY_HZ: f64 = 50.0;

/// Relative slack on the overlap test; tangent circles count as overlapping.
const OVERLAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("layout contains no conductors")]
    EmptyLayout,
    #[error("conductor {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("invalid {what}: {value}")]
    InvalidParameter { what: &'static str, value: f64 },
    #[error("material is not conductive (sigma = 0)")]
    NonConductive,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(p: [f64; 2]) -> Self {
        Point2::new(p[0], p[1])
    }
}

/// Conductor centers sharing one radius, plus the boundary margin.
///
/// Serializes as `{"radius_m": .., "boundary_margin_m": .., "centers": [[x, y], ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductorLayout {
    pub radius_m: f64,
    pub boundary_margin_m: f64,
    #[serde(with = "xy_pairs")]
    pub centers: Vec<Point2>,
}

mod xy_pairs {
    use super::Point2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(pts: &[Point2], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<[f64; 2]> = pts.iter().map(|p| [p.x, p.y]).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Point2>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(Point2::from).collect())
    }
}

impl ConductorLayout {
    pub fn new(centers: Vec<Point2>, radius_m: f64, boundary_margin_m: f64) -> Self {
        Self { radius_m, boundary_margin_m, centers }
    }

    /// Layout with the default radius and margin.
    pub fn with_defaults(centers: Vec<Point2>) -> Self {
        Self::new(centers, DEFAULT_RADIUS_M, DEFAULT_BOUNDARY_MARGIN_M)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Structural checks: non-empty, finite coordinates, positive lengths.
    /// Overlap is reported separately by [`check_overlap`].
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.centers.is_empty() {
            return Err(GeometryError::EmptyLayout);
        }
        if !(self.radius_m > 0.0 && self.radius_m.is_finite()) {
            return Err(GeometryError::InvalidParameter { what: "radius_m", value: self.radius_m });
        }
        if !(self.boundary_margin_m > 0.0 && self.boundary_margin_m.is_finite()) {
            return Err(GeometryError::InvalidParameter {
                what: "boundary_margin_m",
                value: self.boundary_margin_m,
            });
        }
        if let Some(index) = self.centers.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite { index });
        }
        Ok(())
    }

    pub fn translated(&self, t: Point2) -> Self {
        Self {
            centers: self.centers.iter().map(|&p| p + t).collect(),
            ..self.clone()
        }
    }
}

/// The circular outer boundary of the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBoundary {
    pub center: Point2,
    pub radius_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    pub current_amplitude_a: f64,
    pub frequency_hz: f64,
}

impl ExcitationSpec {
    pub fn new(current_amplitude_a: f64, frequency_hz: f64) -> Result<Self, GeometryError> {
        if !current_amplitude_a.is_finite() {
            return Err(GeometryError::InvalidParameter {
                what: "current_amplitude_a",
                value: current_amplitude_a,
            });
        }
        // zero frequency is the DC limit and is accepted by the solver
        if !(frequency_hz >= 0.0 && frequency_hz.is_finite()) {
            return Err(GeometryError::InvalidParameter { what: "frequency_hz", value: frequency_hz });
        }
        Ok(Self { current_amplitude_a, frequency_hz })
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.frequency_hz
    }
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        Self { current_amplitude_a: DEFAULT_CURRENT_A, frequency_hz: DEFAULT_FREQUENCY_HZ }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub conductivity_s_per_m: f64,
    pub reluctivity: f64,
}

impl MaterialSpec {
    pub fn new(conductivity_s_per_m: f64) -> Result<Self, GeometryError> {
        if !(conductivity_s_per_m >= 0.0 && conductivity_s_per_m.is_finite()) {
            return Err(GeometryError::InvalidParameter {
                what: "conductivity_s_per_m",
                value: conductivity_s_per_m,
            });
        }
        Ok(Self { conductivity_s_per_m, reluctivity: 1.0 / MU0 })
    }

    pub fn mu(&self) -> f64 {
        1.0 / self.reluctivity
    }
}

impl Default for MaterialSpec {
    fn default() -> Self {
        Self { conductivity_s_per_m: SIGMA_CU, reluctivity: 1.0 / MU0 }
    }
}

/// Arithmetic mean of the points.
pub fn centroid(centers: &[Point2]) -> Result<Point2, GeometryError> {
    if centers.is_empty() {
        return Err(GeometryError::EmptyLayout);
    }
    let n = centers.len() as f64;
    let (sx, sy) = centers.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Ok(Point2::new(sx / n, sy / n))
}

/// Circle centered at the centroid whose radius is the largest
/// centroid-to-center distance plus the layout's boundary margin.
pub fn boundary(layout: &ConductorLayout) -> Result<DomainBoundary, GeometryError> {
    let center = centroid(&layout.centers)?;
    let reach = layout.centers.iter().map(|p| p.dist(center)).fold(0.0, f64::max);
    Ok(DomainBoundary { center, radius_m: reach + layout.boundary_margin_m })
}

/// Index pairs `(i, j)`, `i < j`, whose disks overlap or touch.
pub fn check_overlap(layout: &ConductorLayout) -> Vec<(usize, usize)> {
    let min_dist = 2.0 * layout.radius_m * (1.0 + OVERLAP_TOLERANCE);
    let c = &layout.centers;
    let mut pairs = Vec::new();
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            if c[i].dist(c[j]) < min_dist {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Skin depth `sqrt(2 / (omega mu sigma))`; infinite at DC.
pub fn skin_depth(material: &MaterialSpec, excitation: &ExcitationSpec) -> Result<f64, GeometryError> {
    if material.conductivity_s_per_m <= 0.0 {
        return Err(GeometryError::NonConductive);
    }
    let omega = excitation.angular_frequency();
    Ok((2.0 / (omega * material.mu() * material.conductivity_s_per_m)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pts(raw: &[(f64, f64)]) -> Vec<Point2> {
        raw.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&pts(&[(0.0, 0.0)])).unwrap(), Point2::new(0.0, 0.0));
        let c = centroid(&pts(&[(0.0, 0.0), (0.02, 0.0), (0.0, 0.02)])).unwrap();
        assert_relative_eq!(c.x, 0.02 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(c.y, 0.02 / 3.0, epsilon = 1e-15);
        let c = centroid(&pts(&[(-0.37, 0.0), (0.37, 0.0)])).unwrap();
        assert_eq!(c, Point2::new(0.0, 0.0));
        assert_eq!(centroid(&[]), Err(GeometryError::EmptyLayout));
    }

    #[test]
    fn boundary_examples() {
        let one = ConductorLayout::new(pts(&[(0.0, 0.0)]), 0.005, 0.015);
        let b = boundary(&one).unwrap();
        assert_eq!(b.center, Point2::new(0.0, 0.0));
        assert_relative_eq!(b.radius_m, 0.015, epsilon = 1e-15);

        // max distance is from (0.02, 0) or (0, 0.02) to (0.02/3, 0.02/3):
        // sqrt((0.04/3)^2 + (0.02/3)^2) = 0.0149071..., plus 0.015
        let three = ConductorLayout::new(pts(&[(0.0, 0.0), (0.02, 0.0), (0.0, 0.02)]), 0.005, 0.015);
        assert_relative_eq!(boundary(&three).unwrap().radius_m, 0.029907119849998597, epsilon = 1e-12);

        let pair = ConductorLayout::new(pts(&[(-0.01, 0.0), (0.01, 0.0)]), 0.005, 0.015);
        let b = boundary(&pair).unwrap();
        assert_eq!(b.center, Point2::new(0.0, 0.0));
        assert_relative_eq!(b.radius_m, 0.025, epsilon = 1e-15);

        let empty = ConductorLayout::new(vec![], 0.005, 0.015);
        assert_eq!(boundary(&empty), Err(GeometryError::EmptyLayout));
    }

    #[test]
    fn overlap_examples() {
        let l = ConductorLayout::new(pts(&[(0.0, 0.0), (0.009, 0.0)]), 0.005, 0.015);
        assert_eq!(check_overlap(&l), vec![(0, 1)]);
        // tangent circles are rejected
        let l = ConductorLayout::new(pts(&[(0.0, 0.0), (0.010, 0.0)]), 0.005, 0.015);
        assert_eq!(check_overlap(&l), vec![(0, 1)]);
        let ring: Vec<Point2> = (0..12)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 12.0;
                Point2::new(0.03 * t.cos(), 0.03 * t.sin())
            })
            .collect();
        assert!(check_overlap(&ConductorLayout::new(ring, 0.005, 0.015)).is_empty());
    }

    #[test]
    fn skin_depth_examples() {
        let cu = MaterialSpec::default();
        let d = skin_depth(&cu, &ExcitationSpec::default()).unwrap();
        // 1/sqrt(pi f mu sigma) evaluated separately
        let expected = 1.0 / (PI * 50.0 * 4e-7 * PI * 58.1e6).sqrt();
        assert_relative_eq!(d, expected, max_relative = 1e-14);
        assert!((d - 9.34e-3).abs() < 0.005e-3);

        let cu4 = MaterialSpec::new(4.0 * SIGMA_CU).unwrap();
        assert_relative_eq!(skin_depth(&cu4, &ExcitationSpec::default()).unwrap(), d / 2.0, max_relative = 1e-14);
        let f4 = ExcitationSpec::new(1.0, 200.0).unwrap();
        assert_relative_eq!(skin_depth(&cu, &f4).unwrap(), d / 2.0, max_relative = 1e-14);

        let air = MaterialSpec::new(0.0).unwrap();
        assert_eq!(skin_depth(&air, &ExcitationSpec::default()), Err(GeometryError::NonConductive));
    }

    #[test]
    fn layout_json_field_names() {
        let l = ConductorLayout::new(pts(&[(0.0, 0.0), (0.02, 0.0)]), 0.005, 0.015);
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(s, r#"{"radius_m":0.005,"boundary_margin_m":0.015,"centers":[[0.0,0.0],[0.02,0.0]]}"#);
        let back: ConductorLayout = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn validate_rejects_bad_layouts() {
        assert_eq!(ConductorLayout::with_defaults(vec![]).validate(), Err(GeometryError::EmptyLayout));
        let l = ConductorLayout::with_defaults(pts(&[(0.0, 0.0), (f64::NAN, 0.0)]));
        assert_eq!(l.validate(), Err(GeometryError::NonFinite { index: 1 }));
        let l = ConductorLayout::new(pts(&[(0.0, 0.0)]), -1.0, 0.015);
        assert!(l.validate().is_err());
    }

    fn layout_strategy() -> impl Strategy<Value = ConductorLayout> {
        prop::collection::vec((-0.2f64..0.2, -0.2f64..0.2), 1..10)
            .prop_map(|raw| ConductorLayout::new(pts(&raw), 0.005, 0.015))
    }

    proptest! {
        #[test]
        fn boundary_radius_at_least_margin(l in layout_strategy()) {
            let b = boundary(&l).unwrap();
            prop_assert!(b.radius_m >= l.boundary_margin_m);
            for p in &l.centers {
                prop_assert!(p.dist(b.center) <= b.radius_m - l.boundary_margin_m + 1e-15);
            }
        }

        #[test]
        fn translation_moves_boundary_center(l in layout_strategy(), tx in -1.0f64..1.0, ty in -1.0f64..1.0) {
            let t = Point2::new(tx, ty);
            let b0 = boundary(&l).unwrap();
            let b1 = boundary(&l.translated(t)).unwrap();
            let scale = 1.0 + tx.abs().max(ty.abs());
            prop_assert!((b1.center.x - (b0.center.x + tx)).abs() <= 1e-12 * scale);
            prop_assert!((b1.center.y - (b0.center.y + ty)).abs() <= 1e-12 * scale);
            prop_assert!((b1.radius_m - b0.radius_m).abs() <= 1e-12 * scale);
        }

        #[test]
        fn overlap_symmetric_under_reordering_and_rotation(l in layout_strategy(), angle in 0.0f64..(2.0 * PI)) {
            let base: Vec<(usize, usize)> = check_overlap(&l);
            // reversing the input maps index i -> n-1-i
            let n = l.len();
            let mut rev = l.clone();
            rev.centers.reverse();
            let mut mapped: Vec<(usize, usize)> = check_overlap(&rev)
                .into_iter()
                .map(|(i, j)| {
                    let (a, b) = (n - 1 - i, n - 1 - j);
                    (a.min(b), a.max(b))
                })
                .collect();
            mapped.sort();
            prop_assert_eq!(&mapped, &base);

            // skip near-threshold pairs where rotation round-off could flip the verdict
            let thr = 2.0 * l.radius_m;
            let near = l.centers.iter().enumerate().any(|(i, p)| {
                l.centers[i + 1..].iter().any(|q| (p.dist(*q) - thr).abs() < 1e-9)
            });
            prop_assume!(!near);
            let (s, c) = angle.sin_cos();
            let mut rot = l.clone();
            for p in &mut rot.centers {
                *p = Point2::new(c * p.x - s * p.y, s * p.x + c * p.y);
            }
            prop_assert_eq!(check_overlap(&rot), base);
        }
    }
}
