//! Log-linear-learning link pruning over the discrete adjacency strategy
//! space. Starting from full connectivity, scheduled UAVs sample among
//! keep/drop moves with probabilities exponential in utility; drops pass
//! through the connectivity guard.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::epg::{
    audit_deviation, evaluate, run_game, ConvergenceTrace, DeviationAudit, DropGate, GameKind,
    GameState, MoveKind, SimParams, Stepper,
};
use crate::geometry::{distance, los_between};
use crate::numerics::softmax;
use crate::scenario::WorldState;
use crate::topology::{algebraic_connectivity, is_connected, LinkTopology, CONNECTIVITY_TOL};
use crate::{Association, Error, Real, Result};

/// One candidate revision of a UAV's link strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMove {
    Keep,
    Drop(usize),
    Add(usize),
}

/// Candidate moves for UAV `i`: the no-op plus one drop per active link
/// passing the drop gate (and, when re-adding is enabled, one add per
/// absent in-range link).
pub fn candidate_moves(i: usize, state: &GameState, params: &SimParams) -> Vec<LinkMove> {
    let mut moves = vec![LinkMove::Keep];
    let world = &state.world;
    for j in state.topo.neighbors(i) {
        let los = los_between(world.uavs[i].position, world.uavs[j].position, &world.obstacles);
        let eligible = match params.game.drop_gate {
            DropGate::LosOnly => los == 1,
            DropGate::NlosOnly => los == 0,
            DropGate::Any => true,
        };
        if eligible {
            moves.push(LinkMove::Drop(j));
        }
    }
    if params.game.allow_readd {
        for j in 0..world.n_uavs() {
            if j != i
                && !state.topo.has_link(i, j)
                && distance(world.uavs[i].position, world.uavs[j].position) <= params.comm_radius
            {
                moves.push(LinkMove::Add(j));
            }
        }
    }
    moves
}

/// Log-linear selection probabilities over candidate utilities.
pub fn move_probabilities(utilities: &[Real], temperature: Real) -> Vec<Real> {
    softmax(utilities, temperature)
}

fn sample_index(probabilities: &[Real], rng: &mut ChaCha8Rng) -> usize {
    let draw: Real = rng.random_range(0.0..1.0);
    let mut acc = 0.0;
    for (idx, &p) in probabilities.iter().enumerate() {
        acc += p;
        if draw < acc {
            return idx;
        }
    }
    probabilities.len() - 1
}

/// Outcome of one revision opportunity.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub player: usize,
    pub chosen: LinkMove,
    /// Whether the chosen move survived the connectivity guard.
    pub accepted: bool,
}

/// One log-linear revision by `player`: sample a candidate by softmax over
/// hypothetical utilities, then apply it through the connectivity guard.
/// A guard-rejected drop leaves the topology unchanged.
pub fn l3_step(
    state: &mut GameState,
    params: &SimParams,
    player: usize,
    round: usize,
    trace: &mut ConvergenceTrace,
    rng: &mut ChaCha8Rng,
) -> Result<StepOutcome> {
    let moves = candidate_moves(player, state, params);
    // The environment does not depend on the adjacency (every UAV transmits
    // each slot), so candidate utilities differ only in the degree term.
    let eval = evaluate(state, params);
    let eta1 = params.game.eta[0];
    let current = eval.link_utilities[player];
    let utilities: Vec<Real> = moves
        .iter()
        .map(|mv| match mv {
            LinkMove::Keep => current,
            LinkMove::Drop(_) => current + eta1,
            LinkMove::Add(_) => current - eta1,
        })
        .collect();
    let probabilities = move_probabilities(&utilities, params.game.temperature);
    let chosen = moves[sample_index(&probabilities, rng)];

    let before = state.clone();
    let accepted = match chosen {
        LinkMove::Keep => true,
        LinkMove::Drop(j) => {
            let mut candidate = state.topo.clone();
            candidate.set_link(player, j, false);
            let connected = is_connected(&candidate);
            let lambda2 = algebraic_connectivity(&candidate);
            trace.lambda2_checks += 1;
            if connected == (lambda2 > CONNECTIVITY_TOL) {
                trace.lambda2_agreements += 1;
            }
            if connected {
                state.topo = candidate;
                trace.min_accepted_lambda2 = trace.min_accepted_lambda2.min(lambda2);
                true
            } else {
                false
            }
        }
        LinkMove::Add(j) => {
            state.topo.set_link(player, j, true);
            trace.lambda2_checks += 1;
            let lambda2 = algebraic_connectivity(&state.topo);
            if lambda2 > CONNECTIVITY_TOL {
                trace.lambda2_agreements += 1;
            }
            trace.min_accepted_lambda2 = trace.min_accepted_lambda2.min(lambda2);
            true
        }
    };

    if accepted {
        let audit: DeviationAudit =
            audit_deviation(&before, state, player, params, GameKind::Link, round)?;
        trace.audits.push(audit);
    }

    Ok(StepOutcome {
        player,
        chosen,
        accepted,
    })
}

/// Round-robin log-linear stepper over all UAVs.
pub struct L3Stepper;

impl Stepper for L3Stepper {
    fn game(&self) -> GameKind {
        GameKind::Link
    }

    fn step_round(
        &mut self,
        state: &mut GameState,
        params: &SimParams,
        round: usize,
        trace: &mut ConvergenceTrace,
        rng: &mut ChaCha8Rng,
    ) -> Result<bool> {
        let mut changed = false;
        for player in 0..state.world.n_uavs() {
            let outcome = l3_step(state, params, player, round, trace, rng)?;
            if outcome.accepted && outcome.chosen != LinkMove::Keep {
                changed = true;
            }
        }
        Ok(changed)
    }
}

/// Initial topology for the discrete phase: fully connected, minus any pair
/// beyond the communication radius. Errors if the radius prunes the graph
/// apart.
pub fn initial_topology(world: &WorldState, comm_radius: Real) -> Result<(LinkTopology, usize)> {
    let n = world.n_uavs();
    let mut topo = LinkTopology::complete(n);
    let mut pruned = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if distance(world.uavs[i].position, world.uavs[j].position) > comm_radius {
                topo.set_link(i, j, false);
                pruned += 1;
            }
        }
    }
    if !is_connected(&topo) {
        return Err(Error::Infeasible(format!(
            "initial topology disconnected after pruning {pruned} link(s) beyond {comm_radius} m"
        )));
    }
    Ok((topo, pruned))
}

/// Solve the discrete link-minimization stage: run log-linear learning from
/// full connectivity and return the pruned (still connected) topology with
/// its convergence trace.
pub fn solve_p1(
    world: &WorldState,
    params: &SimParams,
    seed: u64,
) -> Result<(GameState, ConvergenceTrace)> {
    let (topo, _) = initial_topology(world, params.comm_radius)?;
    // The link game never reads the association; a placeholder keeps the
    // state complete until the deployment stage assigns users properly.
    let assoc = Association::new(world.n_uavs(), vec![0; world.n_users()])?;
    let state = GameState::build(world.clone(), topo, assoc, &params.radio)?;
    run_game(&mut L3Stepper, state, params, seed)
}
