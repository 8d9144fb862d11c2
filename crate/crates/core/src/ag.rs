//! Approximate-gradient deployment game: joint optimization of UAV
//! positions, transmit powers and user association on a fixed topology.
//!
//! Moves are generated by central finite differences through the full
//! channel/metrics stack, projected onto the feasible box, and accepted
//! only when the mover's score improves and the potential does not drop.
//! A decaying random-exploration schedule proposes feasible perturbations
//! around the incumbent to escape gradient-blind spots (for example a
//! line-of-sight cliff behind an obstacle edge).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::association::Association;
use crate::epg::{
    audit_deviation, deploy_potential_from, deploy_score_from, evaluate, run_game,
    ConvergenceTrace, GameKind, GameState, SimParams, Stepper,
};
use crate::geometry::distance;
use crate::scenario::WorldState;
use crate::{Error, Point, Real, Result};

/// Improvement threshold below which the inner ascent stops.
const MIN_GAIN: Real = 1e-9;

/// Backtracking halvings tried per inner iteration.
const BACKTRACKS: u32 = 4;

/// One UAV's continuous strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployStrategy {
    pub position: Point,
    pub power: Real,
    pub served: Vec<usize>,
}

impl DeployStrategy {
    pub fn of(i: usize, state: &GameState) -> Self {
        DeployStrategy {
            position: state.world.uavs[i].position,
            power: state.world.uavs[i].tx_power,
            served: state.assoc.served_by(i).collect(),
        }
    }
}

fn clamp_power(p: Real, params: &SimParams) -> Real {
    p.clamp(params.power_bounds.0, params.power_bounds.1)
}

/// Score of player `i` with its strategy overridden, everything else (other
/// players, association) frozen. Probes re-run the full channel stack.
fn probe_score(
    i: usize,
    state: &GameState,
    params: &SimParams,
    position: Point,
    power: Real,
) -> Result<Real> {
    let mut probe = state.clone();
    probe.world.uavs[i].position = position;
    probe.world.uavs[i].tx_power = power;
    probe.refresh_env(&params.radio)?;
    let eval = evaluate(&probe, params);
    Ok(deploy_score_from(&eval, i, params.game.convention))
}

/// Central finite-difference gradient of the deployment score with respect
/// to (x, y, z, power). Probes are clamped to the feasible box before
/// evaluation and each component divides by the actual probe separation, so
/// boundary components degrade to one-sided differences.
pub fn approx_gradient(i: usize, state: &GameState, params: &SimParams) -> Result<(Point, Real)> {
    let eps = params.game.fd_epsilon;
    let world = &state.world;
    let base_pos = world.uavs[i].position;
    let base_pow = world.uavs[i].tx_power;

    let mut grad_pos = Point::zero();
    for axis in 0..3 {
        let shift = |p: Point, delta: Real| -> Point {
            let mut q = p;
            match axis {
                0 => q.x += delta,
                1 => q.y += delta,
                _ => q.z += delta,
            }
            world.clamp_position(q)
        };
        let up = shift(base_pos, eps);
        let down = shift(base_pos, -eps);
        let separation = match axis {
            0 => up.x - down.x,
            1 => up.y - down.y,
            _ => up.z - down.z,
        };
        let g = if separation == 0.0 {
            0.0
        } else {
            (probe_score(i, state, params, up, base_pow)?
                - probe_score(i, state, params, down, base_pow)?)
                / separation
        };
        match axis {
            0 => grad_pos.x = g,
            1 => grad_pos.y = g,
            _ => grad_pos.z = g,
        }
    }

    let p_up = clamp_power(base_pow + eps, params);
    let p_down = clamp_power(base_pow - eps, params);
    let grad_pow = if p_up == p_down {
        0.0
    } else {
        (probe_score(i, state, params, base_pos, p_up)?
            - probe_score(i, state, params, base_pos, p_down)?)
            / (p_up - p_down)
    };

    Ok((grad_pos, grad_pow))
}

/// Outcome of one revision opportunity in the deployment game.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub strategy: DeployStrategy,
    pub changed: bool,
    pub explored: bool,
}

/// Compute one player's best response. With probability
/// `eps0 * decay^round` a uniform feasible perturbation of the incumbent is
/// proposed instead of the gradient ascent; either way the returned
/// strategy never scores below the incumbent and never lowers the
/// potential.
pub fn best_response_continuous(
    i: usize,
    state: &GameState,
    params: &SimParams,
    round: usize,
    rng: &mut ChaCha8Rng,
) -> Result<BestResponse> {
    let incumbent = DeployStrategy::of(i, state);
    let eval = evaluate(state, params);
    let incumbent_score = deploy_score_from(&eval, i, params.game.convention);
    let incumbent_potential = deploy_potential_from(&eval);

    let eps_round = params.game.explore_eps0 * params.game.explore_decay.powi(round as i32);
    let coin: Real = rng.random_range(0.0..1.0);
    if coin < eps_round {
        let proposal_pos = state.world.clamp_position(Point::new(
            incumbent.position.x
                + rng.random_range(-params.game.explore_radius_pos..=params.game.explore_radius_pos),
            incumbent.position.y
                + rng.random_range(-params.game.explore_radius_pos..=params.game.explore_radius_pos),
            incumbent.position.z
                + rng.random_range(-params.game.explore_radius_alt..=params.game.explore_radius_alt),
        ));
        let proposal_pow = clamp_power(
            incumbent.power
                + rng.random_range(
                    -params.game.explore_radius_power..=params.game.explore_radius_power,
                ),
            params,
        );
        let mut probe = state.clone();
        probe.world.uavs[i].position = proposal_pos;
        probe.world.uavs[i].tx_power = proposal_pow;
        probe.refresh_env(&params.radio)?;
        let probe_eval = evaluate(&probe, params);
        let score = deploy_score_from(&probe_eval, i, params.game.convention);
        let potential = deploy_potential_from(&probe_eval);
        let gate_ok = !params.game.potential_gate || potential >= incumbent_potential;
        if score > incumbent_score + MIN_GAIN && gate_ok {
            return Ok(BestResponse {
                strategy: DeployStrategy {
                    position: proposal_pos,
                    power: proposal_pow,
                    served: incumbent.served,
                },
                changed: true,
                explored: true,
            });
        }
        return Ok(BestResponse {
            strategy: incumbent,
            changed: false,
            explored: true,
        });
    }

    // Projected gradient ascent with backtracking; every accepted inner
    // step must improve the score without lowering the potential.
    let mut work = state.clone();
    let mut score = incumbent_score;
    let mut potential = incumbent_potential;
    let mut changed = false;
    for _ in 0..params.game.inner_iters {
        let (g_pos, g_pow) = approx_gradient(i, &work, params)?;
        let g_norm = g_pos.norm();
        if g_norm == 0.0 && g_pow == 0.0 {
            break;
        }
        let pos_dir = if g_norm > 0.0 {
            g_pos.scale(1.0 / g_norm)
        } else {
            Point::zero()
        };
        let pow_dir = if g_pow > 0.0 {
            1.0
        } else if g_pow < 0.0 {
            -1.0
        } else {
            0.0
        };

        let current_pos = work.world.uavs[i].position;
        let current_pow = work.world.uavs[i].tx_power;
        let mut stepped = false;
        let mut scale = 1.0;
        for _ in 0..=BACKTRACKS {
            let cand_pos = work.world.clamp_position(
                current_pos.add(pos_dir.scale(scale * params.game.grad_step_pos)),
            );
            let cand_pow =
                clamp_power(current_pow + pow_dir * scale * params.game.grad_step_power, params);
            if cand_pos == current_pos && cand_pow == current_pow {
                scale /= 2.0;
                continue;
            }
            let mut probe = work.clone();
            probe.world.uavs[i].position = cand_pos;
            probe.world.uavs[i].tx_power = cand_pow;
            probe.refresh_env(&params.radio)?;
            let probe_eval = evaluate(&probe, params);
            let cand_score = deploy_score_from(&probe_eval, i, params.game.convention);
            let cand_potential = deploy_potential_from(&probe_eval);
            let gate_ok = !params.game.potential_gate || cand_potential >= potential;
            if cand_score > score + MIN_GAIN && gate_ok {
                work = probe;
                score = cand_score;
                potential = cand_potential;
                stepped = true;
                changed = true;
                break;
            }
            scale /= 2.0;
        }
        if !stepped {
            break;
        }
    }

    Ok(BestResponse {
        strategy: DeployStrategy {
            position: work.world.uavs[i].position,
            power: work.world.uavs[i].tx_power,
            served: incumbent.served,
        },
        changed,
        explored: false,
    })
}

/// Greedy association: every user joins the in-range UAV offering the
/// highest rate; ties break toward the lower UAV index. Errors with the
/// offending user when nobody is in range.
pub fn reassign_users(
    world: &WorldState,
    env: &crate::channel::RadioEnvironment,
    comm_radius: Real,
) -> Result<Association> {
    let n = world.n_uavs();
    let mut serving = Vec::with_capacity(world.n_users());
    for (m, user) in world.users.iter().enumerate() {
        let mut best: Option<(usize, Real)> = None;
        for i in 0..n {
            if distance(world.uavs[i].position, user.position) > comm_radius {
                continue;
            }
            let rate = env.rate_a2g.get(i, m);
            let better = match best {
                None => true,
                Some((_, r)) => rate > r,
            };
            if better {
                best = Some((i, rate));
            }
        }
        match best {
            Some((i, _)) => serving.push(i),
            None => return Err(Error::InfeasibleCoverage { user: m }),
        }
    }
    Association::new(n, serving)
}

/// Round-robin deployment stepper: one best response per UAV, then one
/// potential-gated greedy association pass. `explore = false` turns the
/// same loop into plain best-response dynamics.
pub struct AgStepper {
    pub explore: bool,
}

impl Stepper for AgStepper {
    fn game(&self) -> GameKind {
        GameKind::Deploy
    }

    fn step_round(
        &mut self,
        state: &mut GameState,
        params: &SimParams,
        round: usize,
        trace: &mut ConvergenceTrace,
        rng: &mut ChaCha8Rng,
    ) -> Result<bool> {
        let mut effective = params.clone();
        if !self.explore {
            effective.game.explore_eps0 = 0.0;
        }
        let mut changed = false;

        for player in 0..state.world.n_uavs() {
            let response = best_response_continuous(player, state, &effective, round, rng)?;
            if response.changed {
                let before = state.clone();
                state.world.uavs[player].position = response.strategy.position;
                state.world.uavs[player].tx_power = response.strategy.power;
                state.refresh_env(&params.radio)?;
                let audit =
                    audit_deviation(&before, state, player, params, GameKind::Deploy, round)?;
                trace.audits.push(audit);
                changed = true;
            }
        }

        changed |= reassign_pass(state, params, round, trace)?;
        Ok(changed)
    }
}

/// Re-run the greedy association user by user. Discretionary switches must
/// not lower the potential; a user whose serving UAV left communication
/// range is switched unconditionally (or errors when uncovered).
pub fn reassign_pass(
    state: &mut GameState,
    params: &SimParams,
    round: usize,
    trace: &mut ConvergenceTrace,
) -> Result<bool> {
    let greedy = reassign_users(&state.world, &state.env, params.comm_radius)?;
    let mut changed = false;
    for m in 0..state.assoc.n_users() {
        let current = state.assoc.serving(m);
        let target = greedy.serving(m);
        if target == current {
            continue;
        }
        let forced = distance(
            state.world.uavs[current].position,
            state.world.users[m].position,
        ) > params.comm_radius;

        let before = state.clone();
        let mut serving: Vec<usize> = (0..state.assoc.n_users())
            .map(|u| state.assoc.serving(u))
            .collect();
        serving[m] = target;
        let candidate = Association::new(state.world.n_uavs(), serving)?;
        let potential_before = deploy_potential_from(&evaluate(state, params));
        let mut next = state.clone();
        next.assoc = candidate;
        let potential_after = deploy_potential_from(&evaluate(&next, params));
        let gate_ok = !params.game.potential_gate || potential_after >= potential_before;
        if forced || gate_ok {
            *state = next;
            let audit = audit_deviation(&before, state, target, params, GameKind::Deploy, round)?;
            trace.audits.push(audit);
            changed = true;
        }
    }
    Ok(changed)
}

/// Solve the continuous stage on the topology fixed by the discrete stage:
/// greedy initial association, then round-robin best responses with the
/// exploration schedule until the run stalls.
pub fn solve_p2(
    mut state: GameState,
    params: &SimParams,
    seed: u64,
) -> Result<(GameState, ConvergenceTrace)> {
    state.assoc = reassign_users(&state.world, &state.env, params.comm_radius)?;
    run_game(&mut AgStepper { explore: true }, state, params, seed)
}
