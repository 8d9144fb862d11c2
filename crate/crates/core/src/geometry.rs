//! 3D geometry: points, distances, obstacle-aware line-of-sight tests.

use serde::{Deserialize, Serialize};

use crate::numerics::{lit, Scalar};

/// 3D point/vector in meters. `x`/`y` horizontal, `z` altitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3 {
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    pub fn add(self, other: Self) -> Self {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn sub(self, other: Self) -> Self {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn scale(self, k: T) -> Self {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn norm(self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Euclidean distance between two points.
pub fn distance<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> T {
    a.sub(b).norm()
}

/// Axis-aligned box obstacle standing on the ground plane (z from 0 to
/// `height`), centered at (`center_x`, `center_y`) in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

impl Obstacle {
    pub fn validate(&self) -> crate::Result<()> {
        if self.width <= 0.0 || self.depth <= 0.0 || self.height <= 0.0 {
            return Err(crate::Error::validation(
                "obstacles",
                "width, depth and height must be positive",
            ));
        }
        Ok(())
    }
}

/// True when the open segment (a, b) passes through the interior of the box.
/// Grazing a face does not count as blockage.
fn segment_intersects_box<T: Scalar>(a: Vec3<T>, b: Vec3<T>, obstacle: &Obstacle) -> bool {
    let half_w = lit::<T>(obstacle.width / 2.0);
    let half_d = lit::<T>(obstacle.depth / 2.0);
    let lo = [
        lit::<T>(obstacle.center_x) - half_w,
        lit::<T>(obstacle.center_y) - half_d,
        T::zero(),
    ];
    let hi = [
        lit::<T>(obstacle.center_x) + half_w,
        lit::<T>(obstacle.center_y) + half_d,
        lit::<T>(obstacle.height),
    ];
    let start = [a.x, a.y, a.z];
    let delta = [b.x - a.x, b.y - a.y, b.z - a.z];

    // Slab test over the open parameter interval (0, 1).
    let mut t_enter = T::zero();
    let mut t_exit = T::one();
    for axis in 0..3 {
        if delta[axis] == T::zero() {
            if start[axis] <= lo[axis] || start[axis] >= hi[axis] {
                return false;
            }
        } else {
            let inv = T::one() / delta[axis];
            let mut t0 = (lo[axis] - start[axis]) * inv;
            let mut t1 = (hi[axis] - start[axis]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
            if t_enter >= t_exit {
                return false;
            }
        }
    }
    true
}

/// Line-of-sight indicator: 1 when the open segment (a, b) intersects no
/// obstacle, 0 otherwise. Symmetric in (a, b).
pub fn los_between<T: Scalar>(a: Vec3<T>, b: Vec3<T>, obstacles: &[Obstacle]) -> u8 {
    for obstacle in obstacles {
        if segment_intersects_box(a, b, obstacle) {
            return 0;
        }
    }
    1
}

/// Elevation angle in degrees from a ground point up to an aerial point;
/// 90 when the aerial point is directly overhead.
pub fn elevation_angle_deg<T: Scalar>(uav: Vec3<T>, gu: Vec3<T>) -> T {
    let dx = uav.x - gu.x;
    let dy = uav.y - gu.y;
    let horizontal = (dx * dx + dy * dy).sqrt();
    if horizontal == T::zero() {
        return lit::<T>(90.0);
    }
    (uav.z - gu.z).atan2(horizontal) * lit::<T>(180.0) / T::from_f64(std::f64::consts::PI).unwrap()
}
