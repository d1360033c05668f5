//! Scheme I: align the RIS phases in closed form for the served user, then
//! improve the trajectory by SCA over a slack-variable surrogate.
//!
//! Inside the convex program lengths are measured in units of the altitude
//! H, so every squared distance is at least one, and the slack variables are
//! in units of H^{2α}.

use std::f64::consts::LN_2;

use crate::channel::{aoa_cosine, coherent_phases, EveModel, PhaseSchedule};
use crate::convex::{solve, AffineExpr, ConcaveExpr, ConcaveTerm, Constraint, ConvexProgram, SolveStatus, SolverOptions};
use crate::power::Tangent;
use crate::rates::{evaluate_with, Allocation};
use crate::scenario::{Point, ScenarioConfig, Trajectory};

/// θ_m = 2π m (d/λ)(φ_k − φ_b), wrapped; zero common offset.
pub fn aligned_phases(q: Point, w_k: Point, cfg: &ScenarioConfig) -> Vec<f64> {
    let h = cfg.altitude_m;
    coherent_phases(aoa_cosine(q, cfg.bs, h), aoa_cosine(q, w_k, h), cfg.ris_elements, cfg.spacing_ratio)
}

/// Phases for every slot: aligned to the served user, silent slots copy the
/// nearest earlier served slot (cyclically) or keep `previous`.
pub fn schedule_phases(
    cfg: &ScenarioConfig,
    allocation: &Allocation,
    trajectory: &Trajectory,
    previous: &PhaseSchedule,
) -> PhaseSchedule {
    let n = cfg.num_slots;
    let served: Vec<Option<usize>> =
        (0..n).map(|s| (!allocation.is_silent(s)).then(|| allocation.served_user(s)).flatten()).collect();
    let mut slots = previous.slots.clone();
    for s in 0..n {
        if let Some(k) = served[s] {
            slots[s] = aligned_phases(trajectory.slot_position(s), cfg.users[k], cfg);
        }
    }
    for s in 0..n {
        if served[s].is_none() {
            if let Some(src) = (1..n).map(|d| (s + n - d) % n).find(|&t| served[t].is_some()) {
                slots[s] = slots[src].clone();
            }
        }
    }
    PhaseSchedule { slots }
}

/// r(z) = log2(1 + B/z).
pub fn rate_in_slack(z: f64, b: f64) -> f64 {
    (b / z).ln_1p() / LN_2
}

/// Tangent of the convex r(z) at z_ref, a global lower bound.
pub fn linearize_rate_slack(z_ref: f64, b: f64) -> Tangent {
    let slope = -b / (z_ref * (z_ref + b) * LN_2);
    Tangent { intercept: rate_in_slack(z_ref, b) - slope * z_ref, slope }
}

fn d2(q: Point, w: Point, h: f64) -> f64 {
    (q[0] - w[0]).powi(2) + (q[1] - w[1]).powi(2) + h * h
}

fn dot_diff(g: [f64; 2], q: Point, r: Point) -> f64 {
    g[0] * (q[0] - r[0]) + g[1] * (q[1] - r[1])
}

/// Horizontal gradient of d⁴ at r: 4d²(r)(r − w).
fn grad_d4(r: Point, w: Point, h: f64) -> [f64; 2] {
    let s = 4.0 * d2(r, w, h);
    [s * (r[0] - w[0]), s * (r[1] - w[1])]
}

/// Convex majorant of d_k²d_b²: ½(d_k² + d_b²)² minus the tangents of
/// ½d_k⁴ and ½d_b⁴ at q_ref.
pub fn product_upper_bound_f(q: Point, q_ref: Point, w_k: Point, w_b: Point, h: f64) -> f64 {
    let s = d2(q, w_k, h) + d2(q, w_b, h);
    let tk = d2(q_ref, w_k, h).powi(2) + dot_diff(grad_d4(q_ref, w_k, h), q, q_ref);
    let tb = d2(q_ref, w_b, h).powi(2) + dot_diff(grad_d4(q_ref, w_b, h), q, q_ref);
    0.5 * s * s - 0.5 * tk - 0.5 * tb
}

/// Concave minorant of d_k²d_e²: the tangent of ½(d_k² + d_e²)² at q_ref
/// minus ½d_k⁴ and ½d_e⁴.
pub fn product_lower_bound_g(q: Point, q_ref: Point, w_k: Point, w_e: Point, h: f64) -> f64 {
    let s_ref = d2(q_ref, w_k, h) + d2(q_ref, w_e, h);
    let grad = [
        2.0 * (2.0 * q_ref[0] - w_k[0] - w_e[0]),
        2.0 * (2.0 * q_ref[1] - w_k[1] - w_e[1]),
    ];
    0.5 * s_ref * s_ref + s_ref * dot_diff(grad, q, q_ref) - 0.5 * d2(q, w_k, h).powi(2) - 0.5 * d2(q, w_e, h).powi(2)
}

/// Tangent of the concave v^{2/α} at v_ref.
pub fn concave_tangent_h(v: f64, v_ref: f64, alpha: f64) -> f64 {
    let e = 2.0 / alpha;
    v_ref.powf(e) + e * v_ref.powf(e - 1.0) * (v - v_ref)
}

/// Result of one convex trajectory subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub trajectory: Trajectory,
    /// Surrogate ζ in bits/s/Hz.
    pub surrogate_zeta: f64,
    pub status: SolveStatus,
}

struct SlotRef {
    user: usize,
    /// Scaled horizontal positions.
    w_k: Point,
    b: f64,
    z_ref: f64,
    v_ref: f64,
}

/// Solves the slack-variable trajectory surrogate at `q_ref` for fixed
/// association and power.
pub fn solve_trajectory_subproblem(
    cfg: &ScenarioConfig,
    allocation: &Allocation,
    q_ref: &Trajectory,
) -> TrajectoryStep {
    let unchanged = |status| TrajectoryStep { trajectory: q_ref.clone(), surrogate_zeta: 0.0, status };
    let n = cfg.num_slots;
    let l = cfg.altitude_m;
    let s_max = cfg.s_max() / l;
    if s_max <= 1e-9 {
        return unchanged(SolveStatus::Optimal);
    }
    let alpha = cfg.pathloss_exponent;
    let e = 2.0 / alpha;
    let scale = |p: Point| [p[0] / l, p[1] / l];
    let (w_b, w_e) = (scale(cfg.bs), scale(cfg.eve));
    let r: Vec<Point> = q_ref.points.iter().map(|&p| scale(p)).collect();
    let b_unit = cfg.ref_gain.powi(2) * (cfg.ris_elements as f64).powi(2) / cfg.noise_w / l.powf(2.0 * alpha);

    // Served slots with a positive worst-case margin at the reference.
    let mut slots: Vec<Option<SlotRef>> = Vec::with_capacity(n);
    for s in 0..n {
        let entry = allocation.served_user(s).and_then(|k| {
            let p = allocation.power[k][s];
            let w_k = scale(cfg.users[k]);
            let q = r[s + 1];
            let z_ref = (d2(q, w_k, 1.0) * d2(q, w_b, 1.0)).powf(alpha / 2.0);
            let v_ref = (d2(q, w_k, 1.0) * d2(q, w_e, 1.0)).powf(alpha / 2.0);
            (p > 1e-12 && v_ref > z_ref).then_some(SlotRef { user: k, w_k, b: p * b_unit, z_ref, v_ref })
        });
        slots.push(entry);
    }
    let r0 = slots
        .iter()
        .flatten()
        .map(|sr| rate_in_slack(sr.z_ref, sr.b))
        .fold(0.0, f64::max);
    if r0 <= 0.0 {
        return unchanged(SolveStatus::Optimal);
    }
    let weight = 1.0 / (n as f64 * r0);

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
    start[qx[n - 1]] = r[0][0];
    start[qy[n - 1]] = r[0][1];
    for i in 0..n {
        let (dx, dy) = if i == 0 {
            (AffineExpr::var(qx[0]).shifted(-r[0][0]), AffineExpr::var(qy[0]).shifted(-r[0][1]))
        } else {
            (AffineExpr::var(qx[i]).with_term(qx[i - 1], -1.0), AffineExpr::var(qy[i]).with_term(qy[i - 1], -1.0))
        };
        prog.add(Constraint::Cone { rows: vec![dx, dy], bound: AffineExpr::constant(s_max) });
    }

    let mut user_exprs: Vec<ConcaveExpr> = (0..cfg.num_users())
        .map(|_| ConcaveExpr { affine: AffineExpr { terms: vec![(zeta, -1.0)], constant: 0.0 }, terms: Vec::new() })
        .collect();
    let mut user_start = vec![0.0; cfg.num_users()];
    for (s, entry) in slots.iter().enumerate() {
        let Some(sr) = entry else { continue };
        let (ix, iy) = (qx[s], qy[s]);
        let q = r[s + 1];
        let z = prog.add_var(format!("z[{s}]"));
        let v = prog.add_var(format!("v[{s}]"));
        prog.add_bounds(z, 1.0, f64::INFINITY);
        prog.add_bounds(v, 1e-6, f64::INFINITY);

        // z^{2/α} − f(q) ≥ 0, scaled by the reference product.
        let pb = d2(q, sr.w_k, 1.0) * d2(q, w_b, 1.0);
        let c = 1.0 / pb;
        let mut affine = AffineExpr::constant(0.0);
        for w in [sr.w_k, w_b] {
            let g = grad_d4(q, w, 1.0);
            affine.constant += 0.5 * c * (d2(q, w, 1.0).powi(2) - g[0] * q[0] - g[1] * q[1]);
            affine.add_term(ix, 0.5 * c * g[0]);
            affine.add_term(iy, 0.5 * c * g[1]);
        }
        prog.add(Constraint::Concave(ConcaveExpr {
            affine,
            terms: vec![
                ConcaveTerm::Power { arg: AffineExpr::var(z), exponent: e, weight: c },
                ConcaveTerm::NegDistanceSum { ix, iy, anchors: vec![sr.w_k, w_b], offset: 2.0, squared: true, weight: 0.5 * c },
            ],
        }));

        // g(q) − h(v) ≥ 0, scaled by the reference product.
        let pe = d2(q, sr.w_k, 1.0) * d2(q, w_e, 1.0);
        let c = 1.0 / pe;
        let s_ref = d2(q, sr.w_k, 1.0) + d2(q, w_e, 1.0);
        let grad = [2.0 * (2.0 * q[0] - sr.w_k[0] - w_e[0]), 2.0 * (2.0 * q[1] - sr.w_k[1] - w_e[1])];
        let h_slope = e * sr.v_ref.powf(e - 1.0);
        let mut affine = AffineExpr::constant(
            c * (0.5 * s_ref * s_ref - s_ref * (grad[0] * q[0] + grad[1] * q[1]) - sr.v_ref.powf(e) + h_slope * sr.v_ref),
        );
        affine.add_term(ix, c * s_ref * grad[0]);
        affine.add_term(iy, c * s_ref * grad[1]);
        affine.add_term(v, -c * h_slope);
        prog.add(Constraint::Concave(ConcaveExpr {
            affine,
            terms: vec![
                ConcaveTerm::NegDistanceSum { ix, iy, anchors: vec![sr.w_k], offset: 1.0, squared: true, weight: 0.5 * c },
                ConcaveTerm::NegDistanceSum { ix, iy, anchors: vec![w_e], offset: 1.0, squared: true, weight: 0.5 * c },
            ],
        }));

        let t = linearize_rate_slack(sr.z_ref, sr.b);
        let expr = &mut user_exprs[sr.user];
        expr.affine.add_term(z, weight * t.slope);
        expr.affine.constant += weight * t.intercept;
        expr.terms.push(ConcaveTerm::NegLog2OnePlusRatio { arg: AffineExpr::var(v), numerator: sr.b, weight });

        let z0 = (pb * (1.0 + 1e-6)).powf(alpha / 2.0).max(1.0 + 1e-9);
        let v0 = sr.v_ref * (1.0 - 1e-6);
        start.push(z0);
        start.push(v0);
        user_start[sr.user] += weight * (t.eval(z0) - rate_in_slack(v0, sr.b));
    }
    for expr in user_exprs {
        prog.add(Constraint::Concave(expr));
    }
    start[zeta] = user_start.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;

    let report = solve(&prog, &start, &SolverOptions::default());
    if report.status == SolveStatus::NumericalFailure && report.max_violation > 1e-7 {
        return unchanged(report.status);
    }
    let mut points = q_ref.points.clone();
    for i in 0..n - 1 {
        points[i + 1] = [report.x[qx[i]] * l, report.x[qy[i]] * l];
    }
    points[n] = points[0];
    TrajectoryStep { trajectory: Trajectory { points }, surrogate_zeta: report.x[zeta] * r0, status: report.status }
}

/// Outcome of the Scheme I trajectory/phase block.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub trajectory: Trajectory,
    pub phases: PhaseSchedule,
    /// Exact ζ after the block.
    pub zeta: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Exact ζ after every inner iteration, starting with the input.
    pub zeta_trace: Vec<f64>,
}

pub(crate) fn exact_zeta(cfg: &ScenarioConfig, allocation: &Allocation, trajectory: &Trajectory, phases: &PhaseSchedule) -> f64 {
    evaluate_with(cfg, allocation, trajectory, phases, EveModel::Exact).map_or(f64::NEG_INFINITY, |e| e.zeta)
}

/// Accepts the largest λ ∈ {1, ½, ¼, …} whose blend does not lower the
/// exact ζ; phases are re-aligned for each candidate.
pub(crate) fn line_search<F>(zeta_ref: f64, mut candidate: F) -> Option<(f64, Trajectory, PhaseSchedule)>
where
    F: FnMut(f64) -> (Trajectory, PhaseSchedule, f64),
{
    let mut lambda = 1.0;
    for _ in 0..8 {
        let (traj, phases, zeta) = candidate(lambda);
        if zeta >= zeta_ref {
            return Some((zeta, traj, phases));
        }
        lambda *= 0.5;
    }
    None
}

/// SCA over the trajectory with closed-form phases; the exact ζ never drops.
pub fn optimize_trajectory_s1(
    cfg: &ScenarioConfig,
    allocation: &Allocation,
    q_init: &Trajectory,
    phases_init: &PhaseSchedule,
) -> TrajectoryOutcome {
    let mut trajectory = q_init.clone();
    let mut phases = schedule_phases(cfg, allocation, &trajectory, phases_init);
    let mut zeta = exact_zeta(cfg, allocation, &trajectory, &phases);
    if zeta < exact_zeta(cfg, allocation, q_init, phases_init) {
        phases = phases_init.clone();
        zeta = exact_zeta(cfg, allocation, q_init, phases_init);
    }
    let mut zeta_trace = vec![zeta];
    let mut status = SolveStatus::Optimal;
    let mut iterations = 0;
    for _ in 0..cfg.tolerances.max_inner_iterations.max(1) {
        iterations += 1;
        let step = solve_trajectory_subproblem(cfg, allocation, &trajectory);
        if step.status != SolveStatus::Optimal {
            status = step.status;
        }
        let accepted = line_search(zeta, |lambda| {
            let traj = trajectory.blend(&step.trajectory, lambda);
            let ph = schedule_phases(cfg, allocation, &traj, &phases);
            let z = exact_zeta(cfg, allocation, &traj, &ph);
            (traj, ph, z)
        });
        let Some((z_new, traj, ph)) = accepted else { break };
        let gain = z_new - zeta;
        trajectory = traj;
        phases = ph;
        zeta = z_new;
        zeta_trace.push(zeta);
        if gain <= cfg.tolerances.inner_sca * zeta.abs() {
            break;
        }
    }
    TrajectoryOutcome { trajectory, phases, zeta, iterations, status, zeta_trace }
}
