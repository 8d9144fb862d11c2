//! Shared exact-potential-game engine: configuration, utility/potential
//! evaluation, deviation auditing, and the round-robin revision loop both
//! games run on.
//!
//! Two utility conventions are supported. `Literal` evaluates the written
//! per-UAV utilities, under which a unilateral move's utility change only
//! approximates the potential change (the audit records the residuals and
//! the run-level correlation). `Aligned` makes the identity exact: the
//! link game's potential counts edges once instead of summing degrees, and
//! the deployment game scores moves by the global potential delta.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::association::Association;
use crate::channel::{build_environment, throughput, RadioParams, ThroughputReport};
use crate::geometry::distance;
use crate::metrics::{comm_energy_j, network_totals, EnergyParams, LatencyParams, NetworkTotals};
use crate::numerics::pearson;
use crate::scenario::WorldState;
use crate::topology::{algebraic_connectivity, LinkTopology, CONNECTIVITY_TOL};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityConvention {
    #[default]
    Literal,
    Aligned,
}

/// Which links a UAV may propose to drop in the link game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropGate {
    /// Only line-of-sight links are drop-eligible.
    #[default]
    LosOnly,
    /// Inverted gate: only occluded links are drop-eligible.
    NlosOnly,
    /// Every active link is drop-eligible.
    Any,
}

/// All game weights, schedules, and step sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    /// Link-game weights (degree, interference, communication energy).
    pub eta: [Real; 3],
    /// Deployment-game weights (throughput, energy, latency).
    pub psi: [Real; 3],
    /// Global objective weights (throughput, energy, latency).
    pub objective_weights: [Real; 3],
    /// Softmax temperature for log-linear link updates.
    pub temperature: Real,
    /// Position step length in meters for gradient moves.
    pub grad_step_pos: Real,
    /// Power step in watts for gradient moves.
    pub grad_step_power: Real,
    /// Central finite-difference probe size (meters / watts).
    pub fd_epsilon: Real,
    /// Exploration schedule: probability eps0 * decay^round.
    pub explore_eps0: Real,
    pub explore_decay: Real,
    /// Exploration proposal radii around the incumbent strategy.
    pub explore_radius_pos: Real,
    pub explore_radius_alt: Real,
    pub explore_radius_power: Real,
    pub max_rounds: usize,
    /// Rounds without an accepted change before the run is declared stalled.
    pub stall_window: usize,
    /// Inner gradient-ascent iterations per revision opportunity.
    pub inner_iters: usize,
    pub convention: UtilityConvention,
    pub drop_gate: DropGate,
    /// Experimental: allow the link game to propose re-adding links.
    pub allow_readd: bool,
    /// Reject deployment moves that would lower the potential. This is the
    /// exact-potential-game alignment; the non-cooperative baseline turns
    /// it off.
    pub potential_gate: bool,
    /// Record a per-round adjacency snapshot in the trace.
    pub record_snapshots: bool,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            eta: [1.0, 1.0, 1.0],
            psi: [1.0, 1.0, 1.0],
            objective_weights: [1.0, 1.0, 1.0],
            temperature: 1.0,
            grad_step_pos: 100.0,
            grad_step_power: 0.1,
            fd_epsilon: 1.0,
            explore_eps0: 0.2,
            explore_decay: 0.99,
            explore_radius_pos: 1500.0,
            explore_radius_alt: 100.0,
            explore_radius_power: 0.75,
            max_rounds: 200,
            stall_window: 5,
            inner_iters: 12,
            convention: UtilityConvention::Literal,
            drop_gate: DropGate::LosOnly,
            allow_readd: false,
            potential_gate: true,
            record_snapshots: false,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, triple) in [
            ("weights.eta", &self.eta),
            ("weights.psi", &self.psi),
            ("weights.objective", &self.objective_weights),
        ] {
            if triple.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::validation(name, "weights must be finite and non-negative"));
            }
        }
        if self.temperature <= 0.0 {
            return Err(Error::validation("game.temperature", "must be positive"));
        }
        for (name, v) in [
            ("game.grad_step_pos", self.grad_step_pos),
            ("game.grad_step_power", self.grad_step_power),
            ("game.fd_epsilon", self.fd_epsilon),
        ] {
            if v <= 0.0 {
                return Err(Error::validation(name, "must be positive"));
            }
        }
        if self.stall_window == 0 {
            return Err(Error::validation("game.stall_window", "must be at least 1"));
        }
        Ok(())
    }
}

/// Everything fixed across a run: radio, energy, latency models plus the
/// game configuration and the deployment box constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub radio: RadioParams,
    pub energy: EnergyParams,
    pub latency: LatencyParams,
    pub game: GameConfig,
    pub comm_radius: Real,
    pub power_bounds: (Real, Real),
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            radio: RadioParams::default(),
            energy: EnergyParams::default(),
            latency: LatencyParams::default(),
            game: GameConfig::default(),
            comm_radius: 4000.0,
            power_bounds: (0.5, 2.0),
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.energy.validate()?;
        self.game.validate()?;
        if self.latency.packet_bits <= 0.0 {
            return Err(Error::validation("latency.packet_bits", "must be positive"));
        }
        if self.comm_radius <= 0.0 {
            return Err(Error::validation("uavs.comm_radius", "must be positive"));
        }
        if self.power_bounds.0 > self.power_bounds.1 || self.power_bounds.0 < 0.0 {
            return Err(Error::validation(
                "uavs.power_bounds",
                "need 0 <= p_min <= p_max",
            ));
        }
        Ok(())
    }
}

/// Full game state: the world, the link topology, the user association and
/// the radio environment derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub world: WorldState,
    pub topo: LinkTopology,
    pub assoc: Association,
    pub env: crate::channel::RadioEnvironment,
}

impl GameState {
    pub fn build(
        world: WorldState,
        topo: LinkTopology,
        assoc: Association,
        radio: &RadioParams,
    ) -> Result<Self> {
        let env = build_environment(&world, radio, None)?;
        Ok(GameState {
            world,
            topo,
            assoc,
            env,
        })
    }

    /// Recompute the radio environment after a world mutation.
    pub fn refresh_env(&mut self, radio: &RadioParams) -> Result<()> {
        self.env = build_environment(&self.world, radio, None)?;
        Ok(())
    }
}

/// One full evaluation of a state: throughput and totals decompositions
/// plus both games' literal per-UAV utilities.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub throughput: ThroughputReport,
    pub totals: NetworkTotals,
    pub link_utilities: Vec<Real>,
    pub deploy_utilities: Vec<Real>,
}

pub fn evaluate(state: &GameState, params: &SimParams) -> Evaluation {
    let th = throughput(&state.topo, &state.assoc, &state.env);
    let totals = network_totals(
        &state.world,
        &state.topo,
        &state.assoc,
        &state.env,
        &params.energy,
        &params.latency,
    );
    let [eta1, eta2, eta3] = params.game.eta;
    let dt = state.world.slot_length;
    let link_utilities: Vec<Real> = state
        .world
        .uavs
        .iter()
        .enumerate()
        .map(|(i, uav)| {
            -(eta1 * state.topo.degree(i) as Real
                + eta2 * state.env.interference[i]
                + eta3 * comm_energy_j(uav.tx_power, &params.energy, dt))
        })
        .collect();
    let [psi1, psi2, psi3] = params.game.psi;
    let deploy_utilities: Vec<Real> = (0..state.world.n_uavs())
        .map(|i| {
            psi1 * th.per_uav[i] - psi2 * totals.per_uav_energy[i] - psi3 * totals.per_uav_latency[i]
        })
        .collect();
    Evaluation {
        throughput: th,
        totals,
        link_utilities,
        deploy_utilities,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameKind {
    Link,
    Deploy,
}

/// Literal link-game utility of one UAV.
pub fn link_utility(i: usize, state: &GameState, params: &SimParams) -> Real {
    evaluate(state, params).link_utilities[i]
}

/// Link-game potential. Literal: sum of utilities. Aligned: the summed
/// degree terms collapse to one edge-count term so a unilateral drop moves
/// the potential by exactly the mover's utility change.
pub fn link_potential(state: &GameState, params: &SimParams) -> Real {
    let eval = evaluate(state, params);
    link_potential_from(&eval, state, params)
}

pub(crate) fn link_potential_from(eval: &Evaluation, state: &GameState, params: &SimParams) -> Real {
    match params.game.convention {
        UtilityConvention::Literal => eval.link_utilities.iter().sum(),
        UtilityConvention::Aligned => {
            let [eta1, eta2, eta3] = params.game.eta;
            let dt = state.world.slot_length;
            let interference: Real = state.env.interference.iter().sum();
            let comm: Real = state
                .world
                .uavs
                .iter()
                .map(|u| comm_energy_j(u.tx_power, &params.energy, dt))
                .sum();
            -(eta1 * state.topo.link_count() as Real + eta2 * interference + eta3 * comm)
        }
    }
}

/// Deployment-game utility used for scoring moves. Literal: the UAV's own
/// weighted throughput/energy/latency. Aligned: the global potential, so
/// utility deltas equal potential deltas identically.
pub fn deploy_utility(i: usize, state: &GameState, params: &SimParams) -> Real {
    let eval = evaluate(state, params);
    deploy_score_from(&eval, i, params.game.convention)
}

pub(crate) fn deploy_score_from(eval: &Evaluation, i: usize, convention: UtilityConvention) -> Real {
    match convention {
        UtilityConvention::Literal => eval.deploy_utilities[i],
        UtilityConvention::Aligned => eval.deploy_utilities.iter().sum(),
    }
}

/// Deployment-game potential: the sum of the literal per-UAV utilities
/// (identical under both conventions).
pub fn deploy_potential(state: &GameState, params: &SimParams) -> Real {
    evaluate(state, params).deploy_utilities.iter().sum()
}

pub(crate) fn deploy_potential_from(eval: &Evaluation) -> Real {
    eval.deploy_utilities.iter().sum()
}

/// Structured constraint-violation report for the global problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Every user served by at least one UAV.
    pub coverage_ok: bool,
    /// Every served user within the communication radius.
    pub range_ok: bool,
    pub out_of_range_users: Vec<usize>,
    /// Transmit powers inside the permitted band.
    pub power_ok: bool,
    pub power_violations: Vec<usize>,
    /// Positions inside the flight region.
    pub region_ok: bool,
    pub region_violations: Vec<usize>,
    /// Algebraic connectivity above the numerical-zero threshold.
    pub connectivity_ok: bool,
    pub lambda2: Real,
    /// No UAV exhausted its energy budget.
    pub energy_ok: bool,
    pub depleted_uavs: Vec<usize>,
}

impl ConstraintReport {
    pub fn all_ok(&self) -> bool {
        self.coverage_ok
            && self.range_ok
            && self.power_ok
            && self.region_ok
            && self.connectivity_ok
            && self.energy_ok
    }
}

/// Global objective report: the scalarized minimization objective plus the
/// term decomposition and constraint flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub value: Real,
    pub link_count: usize,
    pub throughput_total: Real,
    pub energy_total: Real,
    pub latency_total: Real,
    pub constraints: ConstraintReport,
}

/// Evaluate the global objective `links - Y*Th + mu*E + tau*T` and audit
/// every constraint.
pub fn global_objective(state: &GameState, params: &SimParams) -> ObjectiveReport {
    let eval = evaluate(state, params);
    let [upsilon, mu, tau] = params.game.objective_weights;
    let link_count = state.topo.link_count();
    let value = link_count as Real - upsilon * eval.throughput.total
        + mu * eval.totals.energy_total
        + tau * eval.totals.latency_total;

    let world = &state.world;
    let out_of_range_users: Vec<usize> = (0..state.assoc.n_users())
        .filter(|&m| {
            let i = state.assoc.serving(m);
            distance(world.uavs[i].position, world.users[m].position) > params.comm_radius
        })
        .collect();
    let power_violations: Vec<usize> = world
        .uavs
        .iter()
        .filter(|u| u.tx_power < params.power_bounds.0 || u.tx_power > params.power_bounds.1)
        .map(|u| u.id)
        .collect();
    let region_violations: Vec<usize> = world
        .uavs
        .iter()
        .filter(|u| {
            u.position.x < 0.0
                || u.position.x > world.area.0
                || u.position.y < 0.0
                || u.position.y > world.area.1
                || u.position.z < world.altitude_band.0
                || u.position.z > world.altitude_band.1
        })
        .map(|u| u.id)
        .collect();
    let lambda2 = algebraic_connectivity(&state.topo);
    let depleted_uavs: Vec<usize> = world
        .uavs
        .iter()
        .filter(|u| u.residual_energy <= 0.0)
        .map(|u| u.id)
        .collect();

    let constraints = ConstraintReport {
        coverage_ok: state.assoc.n_users() == world.n_users(),
        range_ok: out_of_range_users.is_empty(),
        out_of_range_users,
        power_ok: power_violations.is_empty(),
        power_violations,
        region_ok: region_violations.is_empty(),
        region_violations,
        connectivity_ok: lambda2 > CONNECTIVITY_TOL,
        lambda2,
        energy_ok: depleted_uavs.is_empty(),
        depleted_uavs,
    };

    ObjectiveReport {
        value,
        link_count,
        throughput_total: eval.throughput.total,
        energy_total: eval.totals.energy_total,
        latency_total: eval.totals.latency_total,
        constraints,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveKind {
    Noop,
    LinkDrop,
    LinkAdd,
    Continuous,
    Associate,
}

/// Record of one accepted unilateral move: the mover's utility change, the
/// potential change, and their mismatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationAudit {
    pub round: usize,
    pub player: usize,
    pub kind: MoveKind,
    pub delta_utility: Real,
    pub delta_potential: Real,
    pub residual: Real,
    pub potential_after: Real,
    pub link_count_after: usize,
}

/// Compare two states that differ by one player's move and measure how the
/// mover's utility change tracks the potential change.
///
/// Errors when the diff touches more than one player's strategy.
pub fn audit_deviation(
    before: &GameState,
    after: &GameState,
    player: usize,
    params: &SimParams,
    game: GameKind,
    round: usize,
) -> Result<DeviationAudit> {
    let kind = classify_diff(before, after, player)?;

    let eval_before = evaluate(before, params);
    let eval_after = evaluate(after, params);
    let (delta_utility, delta_potential) = match game {
        GameKind::Link => {
            let du = eval_after.link_utilities[player] - eval_before.link_utilities[player];
            let dp = link_potential_from(&eval_after, after, params)
                - link_potential_from(&eval_before, before, params);
            (du, dp)
        }
        GameKind::Deploy => {
            let du = deploy_score_from(&eval_after, player, params.game.convention)
                - deploy_score_from(&eval_before, player, params.game.convention);
            let dp = deploy_potential_from(&eval_after) - deploy_potential_from(&eval_before);
            (du, dp)
        }
    };

    Ok(DeviationAudit {
        round,
        player,
        kind,
        delta_utility,
        delta_potential,
        residual: (delta_utility - delta_potential).abs(),
        potential_after: match game {
            GameKind::Link => link_potential_from(&eval_after, after, params),
            GameKind::Deploy => deploy_potential_from(&eval_after),
        },
        link_count_after: after.topo.link_count(),
    })
}

fn classify_diff(before: &GameState, after: &GameState, player: usize) -> Result<MoveKind> {
    let n = before.world.n_uavs();
    if after.world.n_uavs() != n || after.assoc.n_users() != before.assoc.n_users() {
        return Err(Error::ContractViolation(
            "deviation audit requires identically shaped states".into(),
        ));
    }

    let mut dropped = Vec::new();
    let mut added = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            match (before.topo.has_link(i, j), after.topo.has_link(i, j)) {
                (true, false) => dropped.push((i, j)),
                (false, true) => added.push((i, j)),
                _ => {}
            }
        }
    }
    let continuous_movers: Vec<usize> = (0..n)
        .filter(|&i| {
            before.world.uavs[i].position != after.world.uavs[i].position
                || before.world.uavs[i].tx_power != after.world.uavs[i].tx_power
        })
        .collect();
    let assoc_changes: Vec<usize> = (0..before.assoc.n_users())
        .filter(|&m| before.assoc.serving(m) != after.assoc.serving(m))
        .collect();

    for &(i, j) in dropped.iter().chain(added.iter()) {
        if i != player && j != player {
            return Err(Error::ContractViolation(format!(
                "link ({i},{j}) changed but player {player} moved"
            )));
        }
    }
    if continuous_movers.iter().any(|&i| i != player) {
        return Err(Error::ContractViolation(format!(
            "players {continuous_movers:?} moved; expected only {player}"
        )));
    }
    if assoc_changes.len() > 1 {
        return Err(Error::ContractViolation(
            "more than one association changed in a single audit".into(),
        ));
    }
    if let Some(&m) = assoc_changes.first() {
        if after.assoc.serving(m) != player {
            return Err(Error::ContractViolation(format!(
                "user {m} switched to UAV {} but player {player} was audited",
                after.assoc.serving(m)
            )));
        }
    }

    let changes = usize::from(!dropped.is_empty())
        + usize::from(!added.is_empty())
        + usize::from(!continuous_movers.is_empty())
        + usize::from(!assoc_changes.is_empty());
    if changes > 1 {
        return Err(Error::ContractViolation(
            "multiple strategy dimensions changed in one audit".into(),
        ));
    }

    Ok(if !dropped.is_empty() {
        MoveKind::LinkDrop
    } else if !added.is_empty() {
        MoveKind::LinkAdd
    } else if !continuous_movers.is_empty() {
        MoveKind::Continuous
    } else if !assoc_changes.is_empty() {
        MoveKind::Associate
    } else {
        MoveKind::Noop
    })
}

/// Per-run record: potential and utility series, link counts, audits and
/// connectivity checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub game: GameKind,
    pub rounds: usize,
    pub converged_at: Option<usize>,
    pub potential: Vec<Real>,
    pub per_uav_utility: Vec<Vec<Real>>,
    pub link_count: Vec<usize>,
    pub audits: Vec<DeviationAudit>,
    /// BFS-vs-lambda2 agreement bookkeeping over every guarded mutation.
    pub lambda2_checks: usize,
    pub lambda2_agreements: usize,
    /// Minimum algebraic connectivity over accepted topology mutations
    /// (infinity when no mutation was accepted).
    pub min_accepted_lambda2: Real,
    pub snapshots: Vec<(usize, Vec<Vec<u8>>)>,
}

impl ConvergenceTrace {
    pub fn new(game: GameKind) -> Self {
        ConvergenceTrace {
            game,
            rounds: 0,
            converged_at: None,
            potential: Vec::new(),
            per_uav_utility: Vec::new(),
            link_count: Vec::new(),
            audits: Vec::new(),
            lambda2_checks: 0,
            lambda2_agreements: 0,
            min_accepted_lambda2: Real::INFINITY,
            snapshots: Vec::new(),
        }
    }

    /// Pooled Pearson correlation between utility deltas and potential
    /// deltas over all audited moves.
    pub fn correlation(&self) -> Option<Real> {
        let xs: Vec<Real> = self.audits.iter().map(|a| a.delta_utility).collect();
        let ys: Vec<Real> = self.audits.iter().map(|a| a.delta_potential).collect();
        pearson(&xs, &ys)
    }

    pub fn r_squared(&self) -> Option<Real> {
        self.correlation().map(|r| r * r)
    }

    /// Correlation restricted to one player's moves.
    pub fn per_uav_correlation(&self, n_uavs: usize) -> Vec<Option<Real>> {
        (0..n_uavs)
            .map(|i| {
                let xs: Vec<Real> = self
                    .audits
                    .iter()
                    .filter(|a| a.player == i)
                    .map(|a| a.delta_utility)
                    .collect();
                let ys: Vec<Real> = self
                    .audits
                    .iter()
                    .filter(|a| a.player == i)
                    .map(|a| a.delta_potential)
                    .collect();
                pearson(&xs, &ys)
            })
            .collect()
    }

    /// Largest relative audit residual, the aligned-convention exactness
    /// measure: max |du - dp| / max(1, |dp|).
    pub fn max_relative_residual(&self) -> Real {
        self.audits
            .iter()
            .map(|a| a.residual / a.delta_potential.abs().max(1.0))
            .fold(0.0, Real::max)
    }

    pub fn record_round(&mut self, round: usize, state: &GameState, params: &SimParams) {
        let eval = evaluate(state, params);
        let (potential, utilities) = match self.game {
            GameKind::Link => (
                link_potential_from(&eval, state, params),
                eval.link_utilities.clone(),
            ),
            GameKind::Deploy => (deploy_potential_from(&eval), eval.deploy_utilities.clone()),
        };
        self.potential.push(potential);
        self.per_uav_utility.push(utilities);
        self.link_count.push(state.topo.link_count());
        if params.game.record_snapshots {
            self.snapshots.push((round, state.topo.matrix()));
        }
        self.rounds = round + 1;
    }
}

/// One revision protocol: a stepper visits players round-robin and mutates
/// the state; `run_game` owns scheduling, stall detection and the trace.
pub trait Stepper {
    fn game(&self) -> GameKind;

    /// Play one full round (every player gets one revision opportunity).
    /// Returns whether any strategy changed.
    fn step_round(
        &mut self,
        state: &mut GameState,
        params: &SimParams,
        round: usize,
        trace: &mut ConvergenceTrace,
        rng: &mut ChaCha8Rng,
    ) -> Result<bool>;
}

/// Run a stepper to convergence: stop after `stall_window` rounds without
/// an accepted change, or at `max_rounds`. Deterministic given the seed.
pub fn run_game<S: Stepper>(
    stepper: &mut S,
    mut state: GameState,
    params: &SimParams,
    seed: u64,
) -> Result<(GameState, ConvergenceTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = ConvergenceTrace::new(stepper.game());
    let mut stall = 0usize;
    for round in 0..params.game.max_rounds {
        let changed = stepper.step_round(&mut state, params, round, &mut trace, &mut rng)?;
        trace.record_round(round, &state, params);
        if changed {
            stall = 0;
        } else {
            stall += 1;
            if stall >= params.game.stall_window {
                trace.converged_at = Some(round);
                break;
            }
        }
    }
    Ok((state, trace))
}
