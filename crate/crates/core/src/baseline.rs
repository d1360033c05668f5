//! The relay baseline: the UAV carries no RIS and forwards each served
//! user's signal as a half-duplex amplify-and-forward relay with power P_UAV.

use crate::channel::{distance, PhaseSchedule};
use crate::convex::{solve, AffineExpr, Constraint, ConvexProgram, SolveStatus, SolverOptions};
use crate::error::Result;
use crate::orchestrator::{run_loop, BlockModel, IterationTrace, Score};
use crate::power::{LinkModel, PowerProblem, SlotLinks};
use crate::rates::{min_avg_secrecy, secrecy_rate, Allocation, SolutionState};
use crate::scenario::{Point, ScenarioConfig, Trajectory};
use crate::scheme1::{line_search, TrajectoryOutcome};

/// ½·log2(1 + γ₁γ₂/(γ₁ + γ₂ + 1)) with γ₁ = p·h0/(σ²d_k^α) and
/// γ₂ = P_UAV·h0/(σ²d_b^α).
pub fn af_rate(p_user: f64, d_k: f64, d_b: f64, cfg: &ScenarioConfig) -> f64 {
    af_link(d_k, d_b, cfg).rate(p_user)
}

fn af_link(d_k: f64, d_rx: f64, cfg: &ScenarioConfig) -> LinkModel {
    let a = cfg.pathloss_exponent;
    LinkModel::AmplifyForward {
        snr_per_watt: cfg.ref_gain / (cfg.noise_w * d_k.powf(a)),
        relay_snr: cfg.relay_power_w * cfg.ref_gain / (cfg.noise_w * d_rx.powf(a)),
    }
}

/// Relay links of user `k` with the UAV at `q`.
pub fn af_links(cfg: &ScenarioConfig, q: Point, k: usize) -> SlotLinks {
    let h = cfg.altitude_m;
    let d_k = distance(q, cfg.users[k], h);
    SlotLinks { bs: af_link(d_k, distance(q, cfg.bs, h), cfg), eve: af_link(d_k, distance(q, cfg.eve, h), cfg) }
}

/// Number of slots in which some user transmits.
pub fn active_slots(allocation: &Allocation) -> usize {
    (0..allocation.num_slots())
        .filter(|&s| (0..allocation.num_users()).any(|k| allocation.assoc[k][s] > 0.5 && allocation.power[k][s] > 0.0))
        .count()
}

/// Per-slot relay secrecy rates, `[user][slot]`.
pub fn af_secrecy_matrix(cfg: &ScenarioConfig, allocation: &Allocation, trajectory: &Trajectory) -> Vec<Vec<f64>> {
    (0..cfg.num_users())
        .map(|k| {
            (0..cfg.num_slots)
                .map(|s| af_slot_secrecy(cfg, allocation.assoc[k][s], allocation.power[k][s], trajectory.slot_position(s), k))
                .collect()
        })
        .collect()
}

fn af_slot_secrecy(cfg: &ScenarioConfig, a: f64, p: f64, q: Point, k: usize) -> f64 {
    if a <= 0.0 || p <= 0.0 {
        return 0.0;
    }
    let links = af_links(cfg, q, k);
    secrecy_rate(a, links.bs.rate(p), links.eve.rate(p))
}

/// ζ and Γ of a relay solution; the relay power is charged on active slots.
pub fn af_evaluate(cfg: &ScenarioConfig, allocation: &Allocation, trajectory: &Trajectory) -> (f64, f64) {
    let zeta = min_avg_secrecy(&af_secrecy_matrix(cfg, allocation, trajectory));
    let denom = allocation.total_power() + cfg.relay_power_w * active_slots(allocation) as f64 + cfg.circuit_power_w;
    (zeta, zeta / denom)
}

fn af_zeta(cfg: &ScenarioConfig, allocation: &Allocation, trajectory: &Trajectory) -> f64 {
    af_evaluate(cfg, allocation, trajectory).0
}

/// One sequential-LP step: each user's average secrecy rate is linearized in
/// the slot positions (central differences) and ζ is maximized over a trust
/// region of radius `radius` per waypoint, subject to the speed limit.
fn slp_step(cfg: &ScenarioConfig, allocation: &Allocation, q_ref: &Trajectory, radius: f64) -> (Trajectory, SolveStatus) {
    let n = cfg.num_slots;
    let l = cfg.altitude_m;
    let s_max = cfg.s_max() / l;
    let r: Vec<Point> = q_ref.points.iter().map(|p| [p[0] / l, p[1] / l]).collect();
    let rates = af_secrecy_matrix(cfg, allocation, q_ref);
    let r0 = rates.iter().flatten().copied().fold(0.0, f64::max);
    if s_max <= 1e-9 || r0 <= 0.0 {
        return (q_ref.clone(), SolveStatus::Optimal);
    }
    let weight = 1.0 / (n as f64 * r0);
    let step = 1e-4;

    let mut prog = ConvexProgram::default();
    let zeta = prog.add_var("zeta");
    prog.objective = AffineExpr::var(zeta);
    let qx: Vec<usize> = (1..=n).map(|i| prog.add_var(format!("qx[{i}]"))).collect();
    let qy: Vec<usize> = (1..=n).map(|i| prog.add_var(format!("qy[{i}]"))).collect();
    let mut start = vec![0.0; prog.num_vars()];
    for i in 0..n {
        start[qx[i]] = r[i + 1][0];
        start[qy[i]] = r[i + 1][1];
    }
    prog.equalities.push(AffineExpr::var(qx[n - 1]).shifted(-r[0][0]));
    prog.equalities.push(AffineExpr::var(qy[n - 1]).shifted(-r[0][1]));
    for i in 0..n {
        let (dx, dy) = if i == 0 {
            (AffineExpr::var(qx[0]).shifted(-r[0][0]), AffineExpr::var(qy[0]).shifted(-r[0][1]))
        } else {
            (AffineExpr::var(qx[i]).with_term(qx[i - 1], -1.0), AffineExpr::var(qy[i]).with_term(qy[i - 1], -1.0))
        };
        prog.add(Constraint::Cone { rows: vec![dx, dy], bound: AffineExpr::constant(s_max) });
        if i < n - 1 {
            prog.add(Constraint::Cone {
                rows: vec![AffineExpr::var(qx[i]).shifted(-r[i + 1][0]), AffineExpr::var(qy[i]).shifted(-r[i + 1][1])],
                bound: AffineExpr::constant(radius / l),
            });
        }
    }

    let mut worst = f64::INFINITY;
    for k in 0..cfg.num_users() {
        let mut c = AffineExpr { terms: vec![(zeta, -1.0)], constant: 0.0 };
        for s in 0..n {
            let value = rates[k][s];
            if value <= 0.0 {
                continue;
            }
            let (a, p) = (allocation.assoc[k][s], allocation.power[k][s]);
            let at = |dx: f64, dy: f64| {
                let q = [(r[s + 1][0] + dx) * l, (r[s + 1][1] + dy) * l];
                af_slot_secrecy(cfg, a, p, q, k)
            };
            let gx = (at(step, 0.0) - at(-step, 0.0)) / (2.0 * step);
            let gy = (at(0.0, step) - at(0.0, -step)) / (2.0 * step);
            c.constant += weight * (value - gx * r[s + 1][0] - gy * r[s + 1][1]);
            c.add_term(qx[s], weight * gx);
            c.add_term(qy[s], weight * gy);
        }
        worst = worst.min(c.constant + c.terms.iter().skip(1).map(|&(i, v)| v * start[i]).sum::<f64>());
        prog.add(Constraint::Affine(c));
    }
    start[zeta] = worst - 1.0;

    let report = solve(&prog, &start, &SolverOptions::default());
    if report.status == SolveStatus::NumericalFailure && report.max_violation > 1e-7 {
        return (q_ref.clone(), report.status);
    }
    let mut points = q_ref.points.clone();
    for i in 0..n - 1 {
        points[i + 1] = [report.x[qx[i]] * l, report.x[qy[i]] * l];
    }
    points[n] = points[0];
    (Trajectory { points }, report.status)
}

/// Trajectory block of the relay baseline; the exact ζ never drops.
pub fn optimize_trajectory_af(cfg: &ScenarioConfig, allocation: &Allocation, q_init: &Trajectory) -> TrajectoryOutcome {
    let phases = PhaseSchedule::zeros(cfg.num_slots, cfg.ris_elements);
    let mut trajectory = q_init.clone();
    let mut zeta = af_zeta(cfg, allocation, &trajectory);
    let mut zeta_trace = vec![zeta];
    let mut status = SolveStatus::Optimal;
    let mut iterations = 0;
    let mut radius = cfg.s_max().min(0.2 * cfg.altitude_m);
    for _ in 0..cfg.tolerances.max_inner_iterations.max(1) {
        iterations += 1;
        let (step, st) = slp_step(cfg, allocation, &trajectory, radius);
        if st != SolveStatus::Optimal {
            status = st;
        }
        let accepted = line_search(zeta, |lambda| {
            let traj = trajectory.blend(&step, lambda);
            let z = af_zeta(cfg, allocation, &traj);
            (traj, phases.clone(), z)
        });
        let Some((z_new, traj, _)) = accepted else { break };
        let gain = z_new - zeta;
        if gain <= cfg.tolerances.inner_sca * zeta.abs() {
            radius *= 0.5;
        }
        trajectory = traj;
        zeta = z_new;
        zeta_trace.push(zeta);
        if radius < 1e-3 * cfg.altitude_m {
            break;
        }
    }
    TrajectoryOutcome { trajectory, phases, zeta, iterations, status, zeta_trace }
}

struct AfModel<'a> {
    cfg: &'a ScenarioConfig,
}

impl BlockModel for AfModel<'_> {
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
                        let keep = a.assoc[k][s] > 0.5 && a.power[k][s] > 0.0;
                        let p = if keep { a.power[k][s] } else { cfg.max_power_w[k] };
                        af_slot_secrecy(cfg, 1.0, p, state.trajectory.slot_position(s), k)
                    })
                    .collect()
            })
            .collect()
    }

    fn realign(&self, _: &Allocation, _: &Allocation, _: &Trajectory, phases: &PhaseSchedule) -> PhaseSchedule {
        phases.clone()
    }

    fn power_problem(&self, allocation: &Allocation, trajectory: &Trajectory, _: &PhaseSchedule) -> PowerProblem {
        let cfg = self.cfg;
        let links = (0..cfg.num_users())
            .map(|k| (0..cfg.num_slots).map(|s| af_links(cfg, trajectory.slot_position(s), k)).collect())
            .collect();
        let served = (0..cfg.num_slots).filter(|&s| allocation.served_user(s).is_some()).count();
        PowerProblem {
            assoc: allocation.assoc.clone(),
            links,
            max_power_w: cfg.max_power_w.clone(),
            fixed_power_w: cfg.circuit_power_w + cfg.relay_power_w * served as f64,
        }
    }

    fn trajectory_block(&self, allocation: &Allocation, trajectory: &Trajectory, _: &PhaseSchedule) -> TrajectoryOutcome {
        optimize_trajectory_af(self.cfg, allocation, trajectory)
    }

    fn score(&self, allocation: &Allocation, trajectory: &Trajectory, _: &PhaseSchedule) -> Result<Score> {
        allocation.check(self.cfg)?;
        let (zeta, gamma) = af_evaluate(self.cfg, allocation, trajectory);
        Ok(Score { zeta, zeta_bound: zeta, gamma })
    }
}

/// Runs the alternating optimization with relay rates in place of the RIS
/// links; the phase schedule of the result is all zeros.
pub fn run_baseline(cfg: &ScenarioConfig) -> Result<(SolutionState, IterationTrace)> {
    cfg.validate()?;
    run_loop(&AfModel { cfg }, PhaseSchedule::zeros(cfg.num_slots, cfg.ris_elements))
}
