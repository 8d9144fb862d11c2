//! Ground-user association: which UAV serves which user.

use serde::{Deserialize, Serialize};

use crate::geometry::distance;
use crate::scenario::WorldState;
use crate::{Error, Real, Result};

/// Assignment of every ground user to exactly one serving UAV.
///
/// Exported as the dense N x M indicator matrix; internally each user
/// column carries a single serving index, which keeps the coverage
/// invariant (every user served) true by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    n_uavs: usize,
    serving: Vec<usize>,
}

impl Association {
    pub fn new(n_uavs: usize, serving: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = serving.iter().find(|&&i| i >= n_uavs) {
            return Err(Error::ContractViolation(format!(
                "association references UAV {bad} but only {n_uavs} exist"
            )));
        }
        Ok(Association { n_uavs, serving })
    }

    pub fn n_uavs(&self) -> usize {
        self.n_uavs
    }

    pub fn n_users(&self) -> usize {
        self.serving.len()
    }

    /// Serving UAV of user `m`.
    pub fn serving(&self, m: usize) -> usize {
        self.serving[m]
    }

    /// Indicator c_im.
    pub fn indicator(&self, i: usize, m: usize) -> bool {
        self.serving[m] == i
    }

    /// Users served by UAV `i`.
    pub fn served_by(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.serving
            .iter()
            .enumerate()
            .filter(move |(_, &s)| s == i)
            .map(|(m, _)| m)
    }

    /// Dense N x M 0/1 matrix for export.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        (0..self.n_uavs)
            .map(|i| {
                self.serving
                    .iter()
                    .map(|&s| u8::from(s == i))
                    .collect()
            })
            .collect()
    }

    /// Range-constraint check: every association within `comm_radius` meters.
    pub fn within_range(&self, world: &WorldState, comm_radius: Real) -> bool {
        self.serving.iter().enumerate().all(|(m, &i)| {
            distance(world.uavs[i].position, world.users[m].position) <= comm_radius
        })
    }
}
