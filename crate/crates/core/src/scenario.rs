//! World geometry, mobility, and K-means initial placement.
//!
//! A [`WorldState`] is an immutable snapshot: step functions return new
//! snapshots rather than mutating in place, so replicas can share a world
//! read-only.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{distance, Vec3};
use crate::{Error, Obstacle, Real, Result};

pub type Point = Vec3<Real>;

/// One UAV: kinematic state plus radio power and battery bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub id: usize,
    pub position: Point,
    pub velocity: Point,
    pub tx_power: Real,
    pub residual_energy: Real,
}

/// One ground user, pinned to the ground plane (z = 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundUser {
    pub id: usize,
    pub position: Point,
}

impl GroundUser {
    pub fn at(id: usize, x: Real, y: Real) -> Self {
        GroundUser {
            id,
            position: Point::new(x, y, 0.0),
        }
    }
}

/// A scripted ground-user relocation, applied when the world reaches `slot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMove {
    pub slot: u64,
    pub user: usize,
    pub to: [Real; 2],
}

/// Snapshot of the whole scene at one time slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub slot: u64,
    pub uavs: Vec<UavState>,
    pub users: Vec<GroundUser>,
    pub obstacles: Vec<Obstacle>,
    /// Horizontal extent in meters: positions live in [0, x_max] x [0, y_max].
    pub area: (Real, Real),
    /// Permitted flight altitudes (z_min, z_max).
    pub altitude_band: (Real, Real),
    /// Slot length in seconds.
    pub slot_length: Real,
}

impl WorldState {
    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.uavs.len() < 2 {
            return Err(Error::validation("uavs.count", "at least 2 UAVs required"));
        }
        if self.users.is_empty() {
            return Err(Error::validation("users", "at least 1 ground user required"));
        }
        let (zmin, zmax) = self.altitude_band;
        if zmin > zmax {
            return Err(Error::validation(
                "uavs.altitude_band",
                format!("z_min {zmin} exceeds z_max {zmax}"),
            ));
        }
        if self.area.0 <= 0.0 || self.area.1 <= 0.0 {
            return Err(Error::validation("area", "extents must be positive"));
        }
        if self.slot_length <= 0.0 {
            return Err(Error::validation("slot_length", "must be positive"));
        }
        for uav in &self.uavs {
            if !uav.position.is_finite() {
                return Err(Error::validation("uavs.positions", "non-finite coordinate"));
            }
            if uav.position.z < zmin || uav.position.z > zmax {
                return Err(Error::validation(
                    "uavs.positions",
                    format!("UAV {} altitude {} outside [{zmin}, {zmax}]", uav.id, uav.position.z),
                ));
            }
            if uav.position.x < 0.0
                || uav.position.x > self.area.0
                || uav.position.y < 0.0
                || uav.position.y > self.area.1
            {
                return Err(Error::validation(
                    "uavs.positions",
                    format!("UAV {} outside the area", uav.id),
                ));
            }
            if uav.residual_energy < 0.0 {
                return Err(Error::validation("uavs.energy", "negative residual energy"));
            }
        }
        for user in &self.users {
            if user.position.z != 0.0 {
                return Err(Error::validation("users.positions", "ground users must have z = 0"));
            }
        }
        for obstacle in &self.obstacles {
            obstacle.validate()?;
        }
        Ok(())
    }

    /// Clamp a point into the flight box, used by movement and projection.
    pub fn clamp_position(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(0.0, self.area.0),
            p.y.clamp(0.0, self.area.1),
            p.z.clamp(self.altitude_band.0, self.altitude_band.1),
        )
    }

    /// Apply every scripted user move registered for the current slot.
    pub fn apply_user_script(&mut self, script: &[UserMove]) {
        for entry in script.iter().filter(|e| e.slot == self.slot) {
            if let Some(user) = self.users.get_mut(entry.user) {
                user.position = Point::new(entry.to[0], entry.to[1], 0.0);
            }
        }
    }
}

/// Advance one slot: velocity update first (v += a * dt), then position
/// (q += v * dt). Positions are clamped to the flight box and the violating
/// velocity component zeroed on clamp.
pub fn step_mobility(world: &WorldState, accelerations: &[Point]) -> WorldState {
    assert_eq!(
        accelerations.len(),
        world.uavs.len(),
        "one acceleration per UAV"
    );
    let dt = world.slot_length;
    let mut next = world.clone();
    next.slot += 1;
    for (uav, accel) in next.uavs.iter_mut().zip(accelerations) {
        let mut v = uav.velocity.add(accel.scale(dt));
        let raw = uav.position.add(v.scale(dt));
        let clamped = world.clamp_position(raw);
        if clamped.x != raw.x {
            v.x = 0.0;
        }
        if clamped.y != raw.y {
            v.y = 0.0;
        }
        if clamped.z != raw.z {
            v.z = 0.0;
        }
        uav.velocity = v;
        uav.position = clamped;
    }
    next
}

/// K-means (Lloyd's algorithm, squared Euclidean) over the horizontal user
/// positions. Centroids are initialized from `n_uavs` distinct user
/// positions drawn with the seeded RNG, iterated to a fixed point or 100
/// rounds, and lifted to the given altitude.
pub fn kmeans_init(
    users: &[GroundUser],
    n_uavs: usize,
    altitude: Real,
    seed: u64,
) -> Result<Vec<Point>> {
    let (centroids, _) = kmeans_run(users, n_uavs, seed)?;
    Ok(centroids
        .into_iter()
        .map(|(x, y)| Point::new(x, y, altitude))
        .collect())
}

/// Lloyd's iterations; also returns the assignment cost after each
/// iteration so tests can audit monotone descent.
pub fn kmeans_run(
    users: &[GroundUser],
    n_uavs: usize,
    seed: u64,
) -> Result<(Vec<(Real, Real)>, Vec<Real>)> {
    if n_uavs == 0 {
        return Err(Error::validation("uavs.count", "at least one cluster required"));
    }
    if n_uavs > users.len() {
        return Err(Error::validation(
            "uavs.count",
            format!("{} UAVs but only {} users", n_uavs, users.len()),
        ));
    }

    let mut distinct: Vec<(Real, Real)> = Vec::new();
    for u in users {
        let p = (u.position.x, u.position.y);
        if !distinct.iter().any(|&q| q == p) {
            distinct.push(p);
        }
    }
    if distinct.len() < n_uavs {
        return Err(Error::DuplicateCentroids {
            requested: n_uavs,
            distinct: distinct.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    distinct.shuffle(&mut rng);
    let mut centroids: Vec<(Real, Real)> = distinct[..n_uavs].to_vec();

    let mut assignment = vec![0usize; users.len()];
    let mut cost_series = Vec::new();
    for _ in 0..100 {
        // Assignment step; ties broken toward the lowest centroid index.
        let mut changed = false;
        for (ui, user) in users.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = Real::INFINITY;
            for (ci, &(cx, cy)) in centroids.iter().enumerate() {
                let dx = user.position.x - cx;
                let dy = user.position.y - cy;
                let d = dx * dx + dy * dy;
                if d < best_d {
                    best_d = d;
                    best = ci;
                }
            }
            if assignment[ui] != best {
                assignment[ui] = best;
                changed = true;
            }
        }
        // Update step; empty clusters keep their centroid.
        for (ci, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&GroundUser> = users
                .iter()
                .enumerate()
                .filter(|(ui, _)| assignment[*ui] == ci)
                .map(|(_, u)| u)
                .collect();
            if !members.is_empty() {
                let inv = 1.0 / members.len() as Real;
                centroid.0 = members.iter().map(|u| u.position.x).sum::<Real>() * inv;
                centroid.1 = members.iter().map(|u| u.position.y).sum::<Real>() * inv;
            }
        }
        cost_series.push(
            users
                .iter()
                .map(|u| {
                    centroids
                        .iter()
                        .map(|&(cx, cy)| {
                            let dx = u.position.x - cx;
                            let dy = u.position.y - cy;
                            dx * dx + dy * dy
                        })
                        .fold(Real::INFINITY, Real::min)
                })
                .sum(),
        );
        if !changed {
            break;
        }
    }

    Ok((centroids, cost_series))
}

/// Sum of squared horizontal distances from each user to its nearest
/// centroid; the quantity Lloyd's iterations drive downward.
pub fn kmeans_cost(users: &[GroundUser], centroids: &[Point]) -> Real {
    users
        .iter()
        .map(|u| {
            centroids
                .iter()
                .map(|c| {
                    let dx = u.position.x - c.x;
                    let dy = u.position.y - c.y;
                    dx * dx + dy * dy
                })
                .fold(Real::INFINITY, Real::min)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hover_world(n: usize) -> WorldState {
        let uavs = (0..n)
            .map(|i| UavState {
                id: i,
                position: Point::new(100.0 * i as Real, 50.0, 200.0),
                velocity: Point::zero(),
                tx_power: 1.0,
                residual_energy: 1e5,
            })
            .collect();
        WorldState {
            slot: 0,
            uavs,
            users: vec![GroundUser::at(0, 10.0, 10.0)],
            obstacles: vec![],
            area: (10_000.0, 10_000.0),
            altitude_band: (100.0, 300.0),
            slot_length: 1.0,
        }
    }

    #[test]
    fn mobility_pure_drift() {
        let mut world = hover_world(2);
        world.uavs[0].position = Point::new(0.0, 0.0, 100.0);
        world.uavs[0].velocity = Point::new(1.0, 2.0, 0.0);
        let next = step_mobility(&world, &[Point::zero(), Point::zero()]);
        assert_eq!(next.uavs[0].position, Point::new(1.0, 2.0, 100.0));
        assert_eq!(next.slot, 1);
    }

    #[test]
    fn mobility_fixed_point() {
        let world = hover_world(2);
        let next = step_mobility(&world, &[Point::zero(), Point::zero()]);
        assert_eq!(next.uavs[0].position, world.uavs[0].position);
    }

    #[test]
    fn mobility_velocity_then_position() {
        // v' = (2,0,0) applied before the position update: q' = q + v' * dt.
        let mut world = hover_world(2);
        world.uavs[0].position = Point::new(0.0, 0.0, 100.0);
        let next = step_mobility(&world, &[Point::new(2.0, 0.0, 0.0), Point::zero()]);
        assert_eq!(next.uavs[0].velocity, Point::new(2.0, 0.0, 0.0));
        assert_eq!(next.uavs[0].position, Point::new(2.0, 0.0, 100.0));
    }

    #[test]
    fn mobility_clamps_and_zeroes_velocity() {
        let mut world = hover_world(2);
        world.uavs[0].position = Point::new(0.0, 0.0, 299.0);
        world.uavs[0].velocity = Point::new(-5.0, 0.0, 10.0);
        let next = step_mobility(&world, &[Point::zero(), Point::zero()]);
        let u = &next.uavs[0];
        assert_eq!(u.position.x, 0.0);
        assert_eq!(u.position.z, 300.0);
        assert_eq!(u.velocity.x, 0.0);
        assert_eq!(u.velocity.z, 0.0);
    }

    #[test]
    fn kmeans_single_cluster_mean() {
        let users = vec![GroundUser::at(0, 0.0, 0.0), GroundUser::at(1, 2.0, 0.0)];
        let c = kmeans_init(&users, 1, 200.0, 7).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].x - 1.0).abs() < 1e-12);
        assert!((c[0].y - 0.0).abs() < 1e-12);
        assert_eq!(c[0].z, 200.0);
    }

    #[test]
    fn kmeans_square_corners() {
        let users = vec![
            GroundUser::at(0, 0.0, 0.0),
            GroundUser::at(1, 0.0, 10.0),
            GroundUser::at(2, 10.0, 0.0),
            GroundUser::at(3, 10.0, 10.0),
        ];
        let mut c = kmeans_init(&users, 4, 150.0, 3).unwrap();
        c.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
        let expected = [(0.0, 0.0), (0.0, 10.0), (10.0, 0.0), (10.0, 10.0)];
        for (got, want) in c.iter().zip(expected) {
            assert_eq!((got.x, got.y), want);
        }
    }

    #[test]
    fn kmeans_duplicate_centroid_error() {
        let users = vec![
            GroundUser::at(0, 1.0, 1.0),
            GroundUser::at(1, 1.0, 1.0),
            GroundUser::at(2, 2.0, 2.0),
        ];
        assert!(matches!(
            kmeans_init(&users, 3, 150.0, 0),
            Err(Error::DuplicateCentroids { .. })
        ));
    }

    #[test]
    fn kmeans_cost_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let users: Vec<GroundUser> = (0..20)
            .map(|i| {
                GroundUser::at(
                    i,
                    rand::Rng::random_range(&mut rng, 0.0..1000.0),
                    rand::Rng::random_range(&mut rng, 0.0..1000.0),
                )
            })
            .collect();
        let (_, costs) = kmeans_run(&users, 10, 17).unwrap();
        for pair in costs.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "cost rose: {pair:?}");
        }
    }

    #[test]
    fn kmeans_reproducible_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let users: Vec<GroundUser> = (0..20)
            .map(|i| {
                GroundUser::at(
                    i,
                    rand::Rng::random_range(&mut rng, 0.0..1000.0),
                    rand::Rng::random_range(&mut rng, 0.0..1000.0),
                )
            })
            .collect();
        let a = kmeans_init(&users, 10, 200.0, 42).unwrap();
        let b = kmeans_init(&users, 10, 200.0, 42).unwrap();
        assert_eq!(a, b);
    }
}
