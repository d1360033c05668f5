//! The alternating outer loop: association, power, then the trajectory and
//! phase block, with a safeguard that keeps the recorded Γ non-decreasing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assoc::{round_association, solve_association_lp};
use crate::channel::{EveModel, PhaseSchedule};
use crate::convex::SolveStatus;
use crate::error::Result;
use crate::power::{optimize_power, PowerProblem};
use crate::rates::{evaluate_with, link_gains, rate_bs, secrecy_rate, Allocation, SolutionState};
use crate::scenario::{initial_trajectory, ScenarioConfig, Trajectory};
use crate::scheme1::{aligned_phases, optimize_trajectory_s1, schedule_phases, TrajectoryOutcome};
use crate::scheme2::optimize_trajectory_s2;

/// Which trajectory/phase block runs in the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Closed-form phase alignment plus trajectory SCA.
    One,
    /// Joint phase/trajectory SCA.
    Two,
}

/// What the safeguard rolled back in an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reversion {
    None,
    Trajectory,
    All,
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub gamma: f64,
    pub zeta: f64,
    /// ζ with the coherent eavesdropper bound.
    pub zeta_bound: f64,
    pub association_status: SolveStatus,
    pub dinkelbach_iterations: usize,
    pub power_inner_iterations: usize,
    pub power_status: SolveStatus,
    pub trajectory_iterations: usize,
    pub trajectory_status: SolveStatus,
    pub reverted: Reversion,
    pub wall_time_s: f64,
}

/// Per-iteration record of a run; row 0 is the starting state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

impl IterationTrace {
    pub fn gammas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gamma).collect()
    }

    /// Outer iterations performed, excluding the starting row.
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }
}

/// Objective pieces of an evaluated state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Score {
    pub zeta: f64,
    pub zeta_bound: f64,
    pub gamma: f64,
}

/// The blocks that differ between the RIS schemes and the relay baseline.
pub(crate) trait BlockModel {
    fn cfg(&self) -> &ScenarioConfig;
    /// Secrecy rate each (user, slot) pair would get if associated.
    fn candidate_rates(&self, state: &SolutionState) -> Vec<Vec<f64>>;
    /// Phases after the association or power block changed `next`.
    fn realign(&self, prev: &Allocation, next: &Allocation, trajectory: &Trajectory, phases: &PhaseSchedule) -> PhaseSchedule;
    fn power_problem(&self, allocation: &Allocation, trajectory: &Trajectory, phases: &PhaseSchedule) -> PowerProblem;
    fn trajectory_block(&self, allocation: &Allocation, trajectory: &Trajectory, phases: &PhaseSchedule) -> TrajectoryOutcome;
    fn score(&self, allocation: &Allocation, trajectory: &Trajectory, phases: &PhaseSchedule) -> Result<Score>;
}

struct RisModel<'a> {
    cfg: &'a ScenarioConfig,
    scheme: Scheme,
}

impl BlockModel for RisModel<'_> {
    fn cfg(&self) -> &ScenarioConfig {
        self.cfg
    }

    fn candidate_rates(&self, state: &SolutionState) -> Vec<Vec<f64>> {
        let cfg = self.cfg;
        let a = &state.allocation;
        (0..cfg.num_users())
            .map(|k| {
                (0..cfg.num_slots)
                    .map(|s| {
                        let q = state.trajectory.slot_position(s);
                        let keep = a.assoc[k][s] > 0.5 && a.power[k][s] > 0.0;
                        let p = if keep { a.power[k][s] } else { cfg.max_power_w[k] };
                        let theta = match (self.scheme, keep) {
                            (Scheme::Two, true) => state.phases.slot(s).to_vec(),
                            _ => aligned_phases(q, cfg.users[k], cfg),
                        };
                        let (g_b, g_e) = link_gains(cfg, q, cfg.users[k], &theta, EveModel::Exact);
                        secrecy_rate(1.0, rate_bs(p, g_b, cfg.noise_w), rate_bs(p, g_e, cfg.noise_w))
                    })
                    .collect()
            })
            .collect()
    }

    fn realign(&self, prev: &Allocation, next: &Allocation, trajectory: &Trajectory, phases: &PhaseSchedule) -> PhaseSchedule {
        match self.scheme {
            Scheme::One => schedule_phases(self.cfg, next, trajectory, phases),
            Scheme::Two => {
                // Keep optimized phases unless the served user changed.
                let mut out = phases.clone();
                for s in 0..self.cfg.num_slots {
                    if let Some(k) = next.served_user(s) {
                        if prev.served_user(s) != Some(k) || prev.is_silent(s) {
                            out.slots[s] = aligned_phases(trajectory.slot_position(s), self.cfg.users[k], self.cfg);
                        }
                    }
                }
                out
            }
        }
    }

    fn power_problem(&self, allocation: &Allocation, trajectory: &Trajectory, phases: &PhaseSchedule) -> PowerProblem {
        PowerProblem::ris(self.cfg, &allocation.assoc, trajectory, phases)
    }

    fn trajectory_block(&self, allocation: &Allocation, trajectory: &Trajectory, phases: &PhaseSchedule) -> TrajectoryOutcome {
        match self.scheme {
            Scheme::One => optimize_trajectory_s1(self.cfg, allocation, trajectory, phases),
            Scheme::Two => optimize_trajectory_s2(self.cfg, allocation, trajectory, phases),
        }
    }

    fn score(&self, allocation: &Allocation, trajectory: &Trajectory, phases: &PhaseSchedule) -> Result<Score> {
        let exact = evaluate_with(self.cfg, allocation, trajectory, phases, EveModel::Exact)?;
        let bound = evaluate_with(self.cfg, allocation, trajectory, phases, EveModel::Bound)?;
        Ok(Score { zeta: exact.zeta, zeta_bound: bound.zeta, gamma: exact.gamma })
    }
}

/// Runs the alternating optimization for one RIS scheme.
pub fn run_algorithm2(cfg: &ScenarioConfig, scheme: Scheme) -> Result<(SolutionState, IterationTrace)> {
    cfg.validate()?;
    run_loop(&RisModel { cfg, scheme }, PhaseSchedule::zeros(cfg.num_slots, cfg.ris_elements))
}

/// Clears the association of served slots that ended with zero power.
pub(crate) fn drop_idle_slots(allocation: &mut Allocation) {
    for k in 0..allocation.num_users() {
        for s in 0..allocation.num_slots() {
            if allocation.power[k][s] <= 0.0 {
                allocation.assoc[k][s] = 0.0;
                allocation.power[k][s] = 0.0;
            }
        }
    }
}

fn converged(prev: f64, next: f64, tol: f64) -> bool {
    (next - prev).abs() <= tol * next.abs().max(prev.abs()) || next == prev
}

pub(crate) fn run_loop(model: &dyn BlockModel, phases0: PhaseSchedule) -> Result<(SolutionState, IterationTrace)> {
    let cfg = model.cfg();
    let started = Instant::now();
    let trajectory = initial_trajectory(cfg);
    let allocation = Allocation::new(cfg.num_users(), cfg.num_slots);
    let score = model.score(&allocation, &trajectory, &phases0)?;
    let mut state = SolutionState { allocation, trajectory, phases: phases0, zeta: score.zeta, gamma: score.gamma };
    let mut trace = IterationTrace::default();
    trace.rows.push(TraceRow {
        iteration: 0,
        gamma: score.gamma,
        zeta: score.zeta,
        zeta_bound: score.zeta_bound,
        association_status: SolveStatus::Optimal,
        dinkelbach_iterations: 0,
        power_inner_iterations: 0,
        power_status: SolveStatus::Optimal,
        trajectory_iterations: 0,
        trajectory_status: SolveStatus::Optimal,
        reverted: Reversion::None,
        wall_time_s: started.elapsed().as_secs_f64(),
    });

    for t in 1..=cfg.tolerances.max_outer_iterations.max(1) {
        let prev = state.clone();
        let prev_score = Score { zeta: prev.zeta, zeta_bound: f64::NAN, gamma: prev.gamma };

        // Association.
        let rates = model.candidate_rates(&state);
        let (assoc, association_status) = match solve_association_lp(&rates) {
            Ok(lp) => (round_association(&lp.assoc), lp.status),
            Err(_) => (prev.allocation.assoc.clone(), SolveStatus::NumericalFailure),
        };
        let mut allocation = Allocation::new(cfg.num_users(), cfg.num_slots);
        for k in 0..cfg.num_users() {
            for s in 0..cfg.num_slots {
                if assoc[k][s] > 0.5 {
                    allocation.assoc[k][s] = 1.0;
                    let old = &prev.allocation;
                    allocation.power[k][s] = if old.assoc[k][s] > 0.5 && old.power[k][s] > 0.0 {
                        old.power[k][s]
                    } else {
                        cfg.max_power_w[k]
                    };
                }
            }
        }
        let phases = model.realign(&prev.allocation, &allocation, &prev.trajectory, &prev.phases);

        // Power.
        let problem = model.power_problem(&allocation, &prev.trajectory, &phases);
        let power = optimize_power(&problem, &allocation.power, &cfg.tolerances);
        let before_power = allocation.clone();
        allocation.power = power.power.clone();
        drop_idle_slots(&mut allocation);
        let phases = model.realign(&before_power, &allocation, &prev.trajectory, &phases);

        // Trajectory and phases.
        let block = model.trajectory_block(&allocation, &prev.trajectory, &phases);
        let mut score = model.score(&allocation, &block.trajectory, &block.phases)?;
        let mut next = SolutionState {
            allocation,
            trajectory: block.trajectory,
            phases: block.phases,
            zeta: score.zeta,
            gamma: score.gamma,
        };

        // Safeguard.
        let mut reverted = Reversion::None;
        if score.gamma < prev_score.gamma {
            let s2 = model.score(&next.allocation, &prev.trajectory, &prev.phases)?;
            if s2.gamma >= prev_score.gamma {
                next.trajectory = prev.trajectory.clone();
                next.phases = prev.phases.clone();
                score = s2;
                reverted = Reversion::Trajectory;
            } else {
                next = prev.clone();
                score = model.score(&next.allocation, &next.trajectory, &next.phases)?;
                reverted = Reversion::All;
            }
            next.zeta = score.zeta;
            next.gamma = score.gamma;
        }
        state = next;
        trace.rows.push(TraceRow {
            iteration: t,
            gamma: score.gamma,
            zeta: score.zeta,
            zeta_bound: score.zeta_bound,
            association_status,
            dinkelbach_iterations: power.dinkelbach_trace.len(),
            power_inner_iterations: power.inner_iterations,
            power_status: power.status,
            trajectory_iterations: block.iterations,
            trajectory_status: block.status,
            reverted,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        if converged(prev_score.gamma, score.gamma, cfg.tolerances.outer) {
            trace.converged = true;
            break;
        }
    }
    Ok((state, trace))
}

/// Operation counts of the three subproblem solvers, from their interior-point
/// complexity bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub association: f64,
    pub power: f64,
    pub trajectory: f64,
}

impl ComplexityEstimate {
    pub fn total(&self) -> f64 {
        self.association + self.power + self.trajectory
    }
}

/// KN for association, (KN)^3.5·log2(1/ε₁) for power, (2KN)^3.5·log2(1/ε₂)
/// for Scheme I and ((6K + M)N)^3.5·log2(1/ε₃) for Scheme II.
pub fn complexity_estimate(cfg: &ScenarioConfig, scheme: Scheme) -> ComplexityEstimate {
    let k = cfg.num_users() as f64;
    let n = cfg.num_slots as f64;
    let m = cfg.ris_elements as f64;
    let tol = &cfg.tolerances;
    let bits = |eps: f64| (1.0 / eps).log2();
    let trajectory = match scheme {
        Scheme::One => (2.0 * k * n).powf(3.5) * bits(tol.inner_sca),
        Scheme::Two => ((6.0 * k + m) * n).powf(3.5) * bits(tol.inner_sca),
    };
    ComplexityEstimate { association: k * n, power: (k * n).powf(3.5) * bits(tol.dinkelbach), trajectory }
}
