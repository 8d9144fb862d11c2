//! Energy (communication + flight) and latency accounting.

use serde::{Deserialize, Serialize};

use crate::association::Association;
use crate::channel::{RadioEnvironment, LIGHT_SPEED};
use crate::geometry::distance;
use crate::scenario::WorldState;
use crate::topology::LinkTopology;
use crate::Real;

/// Rotary-wing power-model constants. The defaults are standard
/// rotary-wing values, overridable in scenario files, and not asserted as
/// measured ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyParams {
    pub circuit_power_w: Real,
    pub profile_drag: Real,
    pub air_density: Real,
    pub rotor_area: Real,
    pub tip_speed: Real,
    pub induced_correction: Real,
    pub weight_n: Real,
    pub fuselage_drag: Real,
    pub gravity: Real,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            circuit_power_w: 0.1,
            profile_drag: 0.012,
            air_density: 1.225,
            rotor_area: 0.503,
            tip_speed: 120.0,
            induced_correction: 0.1,
            weight_n: 20.0,
            fuselage_drag: 0.6,
            gravity: 9.8,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> crate::Result<()> {
        let fields = [
            ("circuit_power_w", self.circuit_power_w),
            ("profile_drag", self.profile_drag),
            ("air_density", self.air_density),
            ("rotor_area", self.rotor_area),
            ("tip_speed", self.tip_speed),
            ("induced_correction", self.induced_correction),
            ("weight_n", self.weight_n),
            ("fuselage_drag", self.fuselage_drag),
            ("gravity", self.gravity),
        ];
        for (name, v) in fields {
            if v <= 0.0 {
                return Err(crate::Error::validation(
                    format!("energy.{name}"),
                    "must be strictly positive",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyParams {
    pub packet_bits: Real,
}

impl Default for LatencyParams {
    fn default() -> Self {
        LatencyParams { packet_bits: 1.0e6 }
    }
}

/// Transmission plus circuit energy over one slot.
pub fn comm_energy_j(tx_power_w: Real, params: &EnergyParams, dt: Real) -> Real {
    (tx_power_w + params.circuit_power_w) * dt
}

/// Blade profile + induced + parasite power at the given airspeed.
pub fn flight_power_w(speed: Real, params: &EnergyParams) -> Real {
    let blade = params.profile_drag / 8.0
        * params.air_density
        * params.rotor_area
        * params.tip_speed.powi(3);
    let induced = (1.0 + params.induced_correction) * params.weight_n.powf(1.5)
        / (2.0 * params.air_density * params.rotor_area).sqrt();
    let parasite = 0.5 * params.fuselage_drag * speed.powi(3);
    blade + induced + parasite
}

/// Flight energy over a slot, including the kinetic-energy change when the
/// speed changes; deceleration cannot push the total below zero (no
/// regenerative braking).
pub fn flight_energy_j(v_now: Real, v_next: Real, params: &EnergyParams, dt: Real) -> Real {
    let hover = flight_power_w(v_now, params) * dt;
    let accel = 0.5 * (v_next * v_next - v_now * v_now) * params.weight_n / params.gravity;
    (hover + accel).max(0.0)
}

/// Single-packet latency of one link: transmission plus propagation.
/// A zero-rate link is unusable and reports infinite latency.
pub fn link_latency_s(rate_bps: Real, d: Real, params: &LatencyParams) -> Real {
    if rate_bps <= 0.0 {
        return Real::INFINITY;
    }
    params.packet_bits / rate_bps + d / LIGHT_SPEED
}

/// Network-wide energy and latency with per-UAV decompositions. A2A links
/// are credited to the transmitter (lower index); A2G links to the serving
/// UAV. Flight energy uses each UAV's current speed with no slot-to-slot
/// acceleration term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTotals {
    pub energy_total: Real,
    pub latency_total: Real,
    pub per_uav_energy: Vec<Real>,
    pub per_uav_latency: Vec<Real>,
}

pub fn network_totals(
    world: &WorldState,
    topo: &LinkTopology,
    assoc: &Association,
    env: &RadioEnvironment,
    eparams: &EnergyParams,
    lparams: &LatencyParams,
) -> NetworkTotals {
    let n = world.n_uavs();
    let dt = world.slot_length;

    let per_uav_energy: Vec<Real> = world
        .uavs
        .iter()
        .map(|u| {
            comm_energy_j(u.tx_power, eparams, dt)
                + flight_power_w(u.velocity.norm(), eparams) * dt
        })
        .collect();

    let mut per_uav_latency = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if topo.has_link(i, j) {
                let d = distance(world.uavs[i].position, world.uavs[j].position);
                per_uav_latency[i] += link_latency_s(env.rate_a2a.get(i, j), d, lparams);
            }
        }
    }
    for m in 0..assoc.n_users() {
        let i = assoc.serving(m);
        let d = distance(world.uavs[i].position, world.users[m].position);
        per_uav_latency[i] += link_latency_s(env.rate_a2g.get(i, m), d, lparams);
    }

    NetworkTotals {
        energy_total: per_uav_energy.iter().sum(),
        latency_total: per_uav_latency.iter().sum(),
        per_uav_energy,
        per_uav_latency,
    }
}

/// Subtract one slot of energy from every UAV's battery; flags any UAV that
/// would exceed its budget and floors the residual at zero.
pub fn apply_energy(world: &mut WorldState, eparams: &EnergyParams) -> Vec<usize> {
    let dt = world.slot_length;
    let mut depleted = Vec::new();
    for uav in &mut world.uavs {
        let spent = comm_energy_j(uav.tx_power, eparams, dt)
            + flight_power_w(uav.velocity.norm(), eparams) * dt;
        if spent > uav.residual_energy {
            depleted.push(uav.id);
            uav.residual_energy = 0.0;
        } else {
            uav.residual_energy -= spent;
        }
    }
    depleted
}
