//! Scheme II: one SCA program over the trajectory and the RIS phases
//! jointly, with AoA cosines linearized around the previous distances and
//! the squared phase sums replaced by their first-order expansions.
//!
//! The slacks are parametrized relative to their reference values,
//! z = z_ref·(1 + δz), so that rate differences of order 1e−9 are not lost
//! to cancellation between logarithms of order one.

use std::f64::consts::{LN_2, TAU};

use crate::channel::{aoa_cosine, phase_sum, wrap_phase, EveModel, PhaseSchedule};
use crate::convex::{solve, AffineExpr, ConcaveExpr, ConcaveTerm, Constraint, ConvexProgram, SolveStatus, SolverOptions};
use crate::rates::{link_gains, Allocation};
use crate::scenario::{Point, ScenarioConfig, Trajectory};
use crate::scheme1::{exact_zeta, line_search, TrajectoryOutcome};

/// Largest per-iteration phase change, radians.
pub const PHASE_TRUST_RADIUS: f64 = 0.5;

/// (x − x_w)/d_ref, the AoA cosine with the distance frozen.
pub fn approx_aoa(q: Point, w: Point, d_ref: f64) -> f64 {
    (q[0] - w[0]) / d_ref
}

/// First-order expansion of |Σ_m e^{j t_m}|² at `t_ref`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSumTangent {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub t_ref: Vec<f64>,
}

impl PhaseSumTangent {
    pub fn eval(&self, t: &[f64]) -> f64 {
        self.value + self.gradient.iter().zip(t).zip(&self.t_ref).map(|((g, t), r)| g * (t - r)).sum::<f64>()
    }
}

/// ∂/∂t_m = −2(Σcos)·sin t_m + 2(Σsin)·cos t_m.
pub fn linearize_phase_sum(t_ref: &[f64]) -> PhaseSumTangent {
    let c: f64 = t_ref.iter().map(|t| t.cos()).sum();
    let s: f64 = t_ref.iter().map(|t| t.sin()).sum();
    PhaseSumTangent {
        value: c * c + s * s,
        gradient: t_ref.iter().map(|t| -2.0 * c * t.sin() + 2.0 * s * t.cos()).collect(),
        t_ref: t_ref.to_vec(),
    }
}

/// Reference values of one slot's joint surrogate. `kappa` multiplies the
/// squared phase sums inside the logarithms (p·h0²/σ² in slack units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointReference {
    pub z_ref: f64,
    pub v_ref: f64,
    pub g_e_ref: f64,
    pub kappa: f64,
}

/// R̂: log2(z + κg_b) + log2 v with −log2 z and −log2(v + κg_e) replaced by
/// their tangents; a lower bound on r − c that is tight at the reference.
pub fn secrecy_lower_bound_joint(r: &JointReference, z: f64, v: f64, g_b: f64, g_e: f64) -> f64 {
    let dz = z / r.z_ref - 1.0;
    let dv = v / r.v_ref - 1.0;
    let eps = r.kappa * r.g_e_ref / r.v_ref;
    let denom = r.v_ref + r.kappa * r.g_e_ref;
    (dz + r.kappa * g_b / r.z_ref).ln_1p() / LN_2 - dz / LN_2 + dv.ln_1p() / LN_2
        - eps.ln_1p() / LN_2
        - (r.v_ref * dv + r.kappa * (g_e - r.g_e_ref)) / (LN_2 * denom)
}

/// Exact r − c in the same slack variables.
pub fn secrecy_in_slacks(kappa: f64, z: f64, v: f64, g_b: f64, g_e: f64) -> f64 {
    ((kappa * g_b / z).ln_1p() - (kappa * g_e / v).ln_1p()) / LN_2
}

fn d2(q: Point, w: Point) -> f64 {
    (q[0] - w[0]).powi(2) + (q[1] - w[1]).powi(2) + 1.0
}

/// Affine expression `Σ coef·var + constant` for 2πm(d/λ)·Δφ(q), Δφ being
/// the approximate AoA difference between receiver `rx` and user `w_k`.
fn aoa_difference(ix: usize, q: Point, rx: Point, w_k: Point) -> (AffineExpr, f64) {
    let (d_rx, d_k) = (d2(q, rx).sqrt(), d2(q, w_k).sqrt());
    // (x − x_rx)/d_rx − (x − x_k)/d_k
    let slope = 1.0 / d_rx - 1.0 / d_k;
    let expr = AffineExpr { terms: vec![(ix, slope)], constant: -rx[0] / d_rx + w_k[0] / d_k };
    let at_ref = approx_aoa(q, rx, d_rx) - approx_aoa(q, w_k, d_k);
    (expr, at_ref)
}

/// Joint trajectory/phase SCA step at (q_ref, θ_ref).
pub fn solve_joint_subproblem(
    cfg: &ScenarioConfig,
    allocation: &Allocation,
    q_ref: &Trajectory,
    phases: &PhaseSchedule,
) -> (Trajectory, PhaseSchedule, SolveStatus) {
    let n = cfg.num_slots;
    let m_el = cfg.ris_elements;
    let l = cfg.altitude_m;
    let alpha = cfg.pathloss_exponent;
    let e = 2.0 / alpha;
    let unchanged = |status| (q_ref.clone(), phases.clone(), status);
    let s_max = cfg.s_max() / l;
    let scale = |p: Point| [p[0] / l, p[1] / l];
    let (w_b, w_e) = (scale(cfg.bs), scale(cfg.eve));
    let r: Vec<Point> = q_ref.points.iter().map(|&p| scale(p)).collect();
    let kappa_unit = cfg.ref_gain.powi(2) / cfg.noise_w / l.powf(2.0 * alpha);
    let spacing = TAU * cfg.spacing_ratio;

    struct Slot {
        user: usize,
        w_k: Point,
        kappa: f64,
        z_ref: f64,
        v_ref: f64,
        g_e_ref: f64,
    }
    let mut slots: Vec<Option<Slot>> = Vec::with_capacity(n);
    for s in 0..n {
        let entry = allocation.served_user(s).and_then(|k| {
            let p = allocation.power[k][s];
            let (g_b, g_e) = link_gains(cfg, q_ref.slot_position(s), cfg.users[k], phases.slot(s), EveModel::Exact);
            if p <= 1e-12 || g_b <= g_e {
                return None;
            }
            let w_k = scale(cfg.users[k]);
            let q = r[s + 1];
            let eve_cos = aoa_cosine(q_ref.slot_position(s), cfg.eve, cfg.altitude_m)
                - aoa_cosine(q_ref.slot_position(s), cfg.users[k], cfg.altitude_m);
            Some(Slot {
                user: k,
                w_k,
                kappa: p * kappa_unit,
                z_ref: (d2(q, w_k) * d2(q, w_b)).powf(alpha / 2.0),
                v_ref: (d2(q, w_k) * d2(q, w_e)).powf(alpha / 2.0),
                g_e_ref: phase_sum(phases.slot(s), cfg.spacing_ratio, eve_cos).norm_sqr(),
            })
        });
        slots.push(entry);
    }
    let r0 = slots
        .iter()
        .flatten()
        .map(|sl| secrecy_in_slacks(sl.kappa, sl.z_ref, sl.v_ref, (m_el * m_el) as f64, sl.g_e_ref))
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
    let trust = s_max.min(0.2);
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
                bound: AffineExpr::constant(trust),
            });
        }
    }

    let mut user_exprs: Vec<ConcaveExpr> = (0..cfg.num_users())
        .map(|_| ConcaveExpr { affine: AffineExpr { terms: vec![(zeta, -1.0)], constant: 0.0 }, terms: Vec::new() })
        .collect();
    let mut user_start = vec![0.0; cfg.num_users()];
    let mut theta_vars: Vec<Option<Vec<Option<usize>>>> = vec![None; n];
    for (s, entry) in slots.iter().enumerate() {
        let Some(sl) = entry else { continue };
        let (ix, iy) = (qx[s], qy[s]);
        let q = r[s + 1];
        let theta_ref: Vec<f64> = phases.slot(s).iter().map(|&t| wrap_phase(t)).collect();
        // θ_0 stays fixed: the squared phase sums ignore a common offset.
        let th: Vec<Option<usize>> = (0..m_el)
            .map(|m| (m > 0).then(|| prog.add_var(format!("theta[{s}][{m}]"))))
            .collect();
        for (m, v) in th.iter().enumerate() {
            if let Some(v) = *v {
                prog.add_bounds(v, theta_ref[m] - PHASE_TRUST_RADIUS, theta_ref[m] + PHASE_TRUST_RADIUS);
                start.push(theta_ref[m]);
            }
        }
        theta_vars[s] = Some(th.clone());
        let dz = prog.add_var(format!("dz[{s}]"));
        let dv = prog.add_var(format!("dv[{s}]"));
        prog.add_bounds(dz, 1.0 / sl.z_ref - 1.0, f64::INFINITY);
        prog.add_bounds(dv, 1e-6 / sl.v_ref - 1.0, f64::INFINITY);

        // Affine surrogates of the squared phase sums.
        let phase_surrogate = |rx: Point| {
            let (u, u_ref) = aoa_difference(ix, q, rx, sl.w_k);
            let t_ref: Vec<f64> = (0..m_el).map(|m| theta_ref[m] + spacing * m as f64 * u_ref).collect();
            let tan = linearize_phase_sum(&t_ref);
            let mut g = AffineExpr::constant(tan.value);
            for m in 0..m_el {
                // t_m − t_ref,m = (θ_m − θ_ref,m) + 2πm(d/λ)(u − u_ref)
                let c = tan.gradient[m];
                if let Some(v) = th[m] {
                    g.add_term(v, c);
                    g.constant -= c * theta_ref[m];
                }
                let mut um = u.clone();
                um.constant -= u_ref;
                g.add_expr(&um, c * spacing * m as f64);
            }
            g
        };
        let g_b = phase_surrogate(w_b);
        let g_e = phase_surrogate(w_e);
        let m2 = (m_el * m_el) as f64;
        let scaled = |g: &AffineExpr, sign: f64, offset: f64| AffineExpr {
            terms: g.terms.iter().map(|&(i, v)| (i, sign * v / m2)).collect(),
            constant: offset + sign * g.constant / m2,
        };
        prog.add(Constraint::Affine(scaled(&g_b, 1.0, 0.0)));
        prog.add(Constraint::Affine(scaled(&g_b, -1.0, 1.0 + 1e-9)));
        prog.add(Constraint::Affine(scaled(&g_e, 1.0, 0.0)));

        // z^{2/α} ≥ f(q) with z = z_ref(1 + δz), scaled by the reference product.
        let pb = d2(q, sl.w_k) * d2(q, w_b);
        let c = 1.0 / pb;
        let mut affine = AffineExpr::constant(0.0);
        for w in [sl.w_k, w_b] {
            let s4 = 4.0 * d2(q, w);
            let g = [s4 * (q[0] - w[0]), s4 * (q[1] - w[1])];
            affine.constant += 0.5 * c * (d2(q, w).powi(2) - g[0] * q[0] - g[1] * q[1]);
            affine.add_term(ix, 0.5 * c * g[0]);
            affine.add_term(iy, 0.5 * c * g[1]);
        }
        prog.add(Constraint::Concave(ConcaveExpr {
            affine,
            terms: vec![
                ConcaveTerm::Power {
                    arg: AffineExpr { terms: vec![(dz, sl.z_ref)], constant: sl.z_ref },
                    exponent: e,
                    weight: c,
                },
                ConcaveTerm::NegDistanceSum { ix, iy, anchors: vec![sl.w_k, w_b], offset: 2.0, squared: true, weight: 0.5 * c },
            ],
        }));

        // h(v) ≤ g(q), scaled by the reference product.
        let pe = d2(q, sl.w_k) * d2(q, w_e);
        let c = 1.0 / pe;
        let s_ref = d2(q, sl.w_k) + d2(q, w_e);
        let grad = [2.0 * (2.0 * q[0] - sl.w_k[0] - w_e[0]), 2.0 * (2.0 * q[1] - sl.w_k[1] - w_e[1])];
        // h(v) = v_ref^e + e·v_ref^e·δv
        let mut affine = AffineExpr::constant(c * (0.5 * s_ref * s_ref - s_ref * (grad[0] * q[0] + grad[1] * q[1]) - sl.v_ref.powf(e)));
        affine.add_term(ix, c * s_ref * grad[0]);
        affine.add_term(iy, c * s_ref * grad[1]);
        affine.add_term(dv, -c * e * sl.v_ref.powf(e));
        prog.add(Constraint::Concave(ConcaveExpr {
            affine,
            terms: vec![
                ConcaveTerm::NegDistanceSum { ix, iy, anchors: vec![sl.w_k], offset: 1.0, squared: true, weight: 0.5 * c },
                ConcaveTerm::NegDistanceSum { ix, iy, anchors: vec![w_e], offset: 1.0, squared: true, weight: 0.5 * c },
            ],
        }));

        // R̂ in relative slacks.
        let jr = JointReference { z_ref: sl.z_ref, v_ref: sl.v_ref, g_e_ref: sl.g_e_ref, kappa: sl.kappa };
        let denom = sl.v_ref + sl.kappa * sl.g_e_ref;
        let expr = &mut user_exprs[sl.user];
        let mut rate_arg = AffineExpr::var(dz);
        rate_arg.add_expr(&g_b, sl.kappa / sl.z_ref);
        expr.terms.push(ConcaveTerm::Log2OnePlus { arg: rate_arg, weight });
        expr.terms.push(ConcaveTerm::Log2OnePlus { arg: AffineExpr::var(dv), weight });
        expr.affine.add_term(dz, -weight / LN_2);
        expr.affine.add_term(dv, -weight * sl.v_ref / (LN_2 * denom));
        expr.affine.add_expr(&g_e, -weight * sl.kappa / (LN_2 * denom));
        expr.affine.constant +=
            weight * (sl.kappa * sl.g_e_ref / (LN_2 * denom) - (sl.kappa * sl.g_e_ref / sl.v_ref).ln_1p() / LN_2);

        start.push(1e-6);
        start.push(-1e-6);
        let g_b_ref = g_b.eval(&start);
        user_start[sl.user] += weight * secrecy_lower_bound_joint(&jr, sl.z_ref * (1.0 + 1e-6), sl.v_ref * (1.0 - 1e-6), g_b_ref, sl.g_e_ref);
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
    let mut next = phases.clone();
    for (s, th) in theta_vars.iter().enumerate() {
        if let Some(th) = th {
            next.slots[s] = th.iter().zip(phases.slot(s)).map(|(v, &t)| wrap_phase(v.map_or(t, |v| report.x[v]))).collect();
        }
    }
    (Trajectory { points }, next, report.status)
}

/// Signed difference q − p taken along the shorter arc.
fn shortest_arc(p: f64, q: f64) -> f64 {
    let d = wrap_phase(q - p);
    if d > std::f64::consts::PI { d - TAU } else { d }
}

fn blend_phases(a: &PhaseSchedule, b: &PhaseSchedule, t: f64) -> PhaseSchedule {
    PhaseSchedule {
        slots: a
            .slots
            .iter()
            .zip(&b.slots)
            .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| wrap_phase(p + t * shortest_arc(p, q))).collect())
            .collect(),
    }
}

/// SCA over trajectory and phases jointly; steps that lower the exact ζ are
/// shortened and finally rejected.
pub fn optimize_trajectory_s2(
    cfg: &ScenarioConfig,
    allocation: &Allocation,
    q_init: &Trajectory,
    phases_init: &PhaseSchedule,
) -> TrajectoryOutcome {
    let mut trajectory = q_init.clone();
    let mut phases = PhaseSchedule { slots: phases_init.slots.iter().map(|s| s.iter().map(|&t| wrap_phase(t)).collect()).collect() };
    let mut zeta = exact_zeta(cfg, allocation, &trajectory, &phases);
    let mut zeta_trace = vec![zeta];
    let mut status = SolveStatus::Optimal;
    let mut iterations = 0;
    for _ in 0..cfg.tolerances.max_inner_iterations.max(1) {
        iterations += 1;
        let (traj_step, phase_step, st) = solve_joint_subproblem(cfg, allocation, &trajectory, &phases);
        if st != SolveStatus::Optimal {
            status = st;
        }
        let accepted = line_search(zeta, |lambda| {
            let traj = trajectory.blend(&traj_step, lambda);
            let ph = blend_phases(&phases, &phase_step, lambda);
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
