//! Planar positions, distances, and the angle test used by the forwarding
//! inhibition rule.
//!
//! All coordinates are meters in a flat plane. The scenarios are straight
//! road segments of at most a few tens of kilometers, where a flat plane is
//! exact enough; geodetic conversion is out of scope.

use std::fmt;

use thiserror::Error;

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Position {
        Position { x, y }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?})", self.x, self.y)
    }
}

/// An angle in degrees, always within `[0, 180]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AngleDeg(f64);

impl AngleDeg {
    pub fn degrees(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("angle vertex coincides with an endpoint; edge vector has zero length")]
    DegenerateVertex,
}

/// Euclidean distance between two points, meters.
pub fn distance(p: Position, q: Position) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// Distance metric of the world the nodes live in: an open plane, or a
/// plane whose x axis closes into a ring of a given circumference (the
/// wrap-around highway). The ring variant measures x separations the short
/// way around, so the wrap point is not a radio obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadMetric {
    ring: Option<f64>,
}

impl RoadMetric {
    pub fn open_plane() -> RoadMetric {
        RoadMetric { ring: None }
    }

    pub fn ring(circumference: f64) -> RoadMetric {
        assert!(circumference > 0.0);
        RoadMetric {
            ring: Some(circumference),
        }
    }

    /// Shortest-way x separation from `from` to `to` (signed).
    fn dx(&self, from: f64, to: f64) -> f64 {
        let raw = to - from;
        match self.ring {
            None => raw,
            Some(len) => {
                let m = raw.rem_euclid(len);
                if m > len / 2.0 {
                    m - len
                } else {
                    m
                }
            }
        }
    }

    pub fn distance(&self, p: Position, q: Position) -> f64 {
        self.dx(p.x, q.x).hypot(q.y - p.y)
    }

    /// `p` re-expressed with its x unwrapped to the representative nearest
    /// `anchor`, so that plane geometry (angles) applies locally.
    pub fn near(&self, p: Position, anchor: Position) -> Position {
        Position::new(anchor.x + self.dx(anchor.x, p.x), p.y)
    }
}

/// The angle at `vertex` between the rays `vertex -> a` and `vertex -> b`,
/// in `[0, 180]` degrees.
///
/// Computed as `arccos(u . v / (|u| |v|))` with the quotient clamped to
/// `[-1, 1]`; without the clamp, collinear points can drift just outside the
/// domain and produce NaN. Fails with [`GeometryError::DegenerateVertex`]
/// when either point coincides with the vertex.
pub fn angle_at(vertex: Position, a: Position, b: Position) -> Result<AngleDeg, GeometryError> {
    let (ux, uy) = (a.x - vertex.x, a.y - vertex.y);
    let (vx, vy) = (b.x - vertex.x, b.y - vertex.y);
    let nu = ux.hypot(uy);
    let nv = vx.hypot(vy);
    if nu == 0.0 || nv == 0.0 {
        return Err(GeometryError::DegenerateVertex);
    }
    let cos = ((ux * vx + uy * vy) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(AngleDeg(cos.acos().to_degrees()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const O: Position = Position { x: 0.0, y: 0.0 };

    #[test]
    fn distance_identity_and_pythagorean() {
        assert_eq!(distance(O, O), 0.0);
        assert_eq!(distance(O, Position::new(3.0, 4.0)), 5.0);
    }

    #[test]
    fn distance_along_the_interference_road() {
        // Distance between the backward and forward relays of the four-node
        // interference geometry.
        assert_eq!(
            distance(Position::new(-160.0, 0.0), Position::new(130.0, 0.0)),
            290.0
        );
    }

    #[test]
    fn angle_trivial_cases_are_exact() {
        let a = angle_at(O, Position::new(1.0, 0.0), Position::new(0.0, 1.0)).unwrap();
        assert_eq!(a.degrees(), 90.0);
        let a = angle_at(O, Position::new(1.0, 0.0), Position::new(2.0, 0.0)).unwrap();
        assert_eq!(a.degrees(), 0.0);
        let a = angle_at(O, Position::new(1.0, 0.0), Position::new(-1.0, 0.0)).unwrap();
        assert_eq!(a.degrees(), 180.0);
    }

    #[test]
    fn degenerate_vertex_is_an_error() {
        assert_eq!(
            angle_at(O, O, Position::new(1.0, 0.0)),
            Err(GeometryError::DegenerateVertex)
        );
        assert_eq!(
            angle_at(O, Position::new(1.0, 0.0), O),
            Err(GeometryError::DegenerateVertex)
        );
    }

    fn coord() -> impl Strategy<Value = f64> {
        -1.0e4..1.0e4
    }

    fn point() -> impl Strategy<Value = Position> {
        (coord(), coord()).prop_map(|(x, y)| Position::new(x, y))
    }

    proptest! {
        #[test]
        fn angle_is_symmetric(v in point(), a in point(), b in point()) {
            prop_assume!(distance(v, a) > 1e-6 && distance(v, b) > 1e-6);
            let lhs = angle_at(v, a, b).unwrap().degrees();
            let rhs = angle_at(v, b, a).unwrap().degrees();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn angle_is_rigid_motion_invariant(
            v in point(), a in point(), b in point(),
            dx in coord(), dy in coord(),
            rot in 0.0..std::f64::consts::TAU,
        ) {
            prop_assume!(distance(v, a) > 1.0 && distance(v, b) > 1.0);
            let base = angle_at(v, a, b).unwrap().degrees();
            // Near 0 and 180 degrees the arccos conditioning error alone
            // exceeds the tolerance; stay a tenth of a degree away.
            prop_assume!(base > 0.1 && base < 179.9);
            let (s, c) = rot.sin_cos();
            let moved = |p: Position| {
                Position::new(p.x * c - p.y * s + dx, p.x * s + p.y * c + dy)
            };
            let m = angle_at(moved(v), moved(a), moved(b)).unwrap().degrees();
            prop_assert!((m - base).abs() < 1e-9, "base={base} moved={m}");
        }

        #[test]
        fn distance_triangle_inequality(a in point(), b in point(), c in point()) {
            let lhs = distance(a, c);
            let rhs = distance(a, b) + distance(b, c);
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs));
        }

        #[test]
        fn angle_always_in_range(v in point(), a in point(), b in point()) {
            prop_assume!(distance(v, a) > 1e-6 && distance(v, b) > 1e-6);
            let deg = angle_at(v, a, b).unwrap().degrees();
            prop_assert!((0.0..=180.0).contains(&deg));
        }
    }

    #[test]
    fn ring_metric_measures_the_short_way_around() {
        let m = RoadMetric::ring(3000.0);
        let a = Position::new(2950.0, 0.0);
        let b = Position::new(50.0, 3.5);
        assert!((m.distance(a, b) - 100.0f64.hypot(3.5)).abs() < 1e-12);
        // Unwrapping pulls b next to a.
        let b_near = m.near(b, a);
        assert_eq!(b_near.x, 3050.0);
        // The open plane is unchanged.
        assert_eq!(RoadMetric::open_plane().distance(a, b), distance(a, b));
    }

    #[test]
    fn matches_atan2_reference_on_a_worked_triple() {
        let v = Position::new(3.0, -2.0);
        let a = Position::new(10.0, 5.0);
        let b = Position::new(-4.0, 1.0);
        let (ux, uy) = (a.x - v.x, a.y - v.y);
        let (vx, vy) = (b.x - v.x, b.y - v.y);
        let reference = (ux * vy - uy * vx).abs().atan2(ux * vx + uy * vy).to_degrees();
        let got = angle_at(v, a, b).unwrap().degrees();
        assert_relative_eq!(got, reference, max_relative = 1e-12);
    }
}
