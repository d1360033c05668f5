//! Power control: a Dinkelbach outer loop over η with an SCA inner loop that
//! upper-bounds the eavesdropper rate by its tangent.

use std::f64::consts::LN_2;

use crate::convex::{solve, AffineExpr, ConcaveExpr, ConcaveTerm, Constraint, ConvexProgram, SolveStatus, SolverOptions};
use crate::rates::{link_gains, Allocation};
use crate::channel::{EveModel, PhaseSchedule};
use crate::scenario::{ScenarioConfig, Tolerances, Trajectory};

/// Affine upper bound `intercept + slope·p` of a concave rate, tight at p_ref.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent {
    pub intercept: f64,
    pub slope: f64,
}

impl Tangent {
    pub fn eval(&self, p: f64) -> f64 {
        self.intercept + self.slope * p
    }
}

/// ĉ(p) = log2(1 + p_ref·g/σ²) + g·(p − p_ref)/(ln2·(σ² + p_ref·g)).
pub fn linearize_eve_rate(p_ref: f64, gain_e: f64, noise_w: f64) -> Tangent {
    LinkModel::Direct { snr_per_watt: gain_e / noise_w }.tangent(p_ref)
}

/// η = ζ / (Σp + P0).
pub fn dinkelbach_eta(zeta: f64, allocation: &Allocation, circuit_power_w: f64) -> f64 {
    zeta / (allocation.total_power() + circuit_power_w)
}

/// Rate of one hop set as a function of the user's transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkModel {
    /// log2(1 + s·p).
    Direct { snr_per_watt: f64 },
    /// ½·log2(1 + γ₁γ₂/(γ₁ + γ₂ + 1)) with γ₁ = s·p.
    AmplifyForward { snr_per_watt: f64, relay_snr: f64 },
}

impl LinkModel {
    pub fn rate(&self, p: f64) -> f64 {
        match *self {
            LinkModel::Direct { snr_per_watt } => (snr_per_watt * p).ln_1p() / LN_2,
            LinkModel::AmplifyForward { snr_per_watt, relay_snr } => {
                let g1 = snr_per_watt * p;
                if g1 <= 0.0 || relay_snr <= 0.0 {
                    return 0.0;
                }
                0.5 * (g1 * relay_snr / (g1 + relay_snr + 1.0)).ln_1p() / LN_2
            }
        }
    }

    pub fn derivative(&self, p: f64) -> f64 {
        match *self {
            LinkModel::Direct { snr_per_watt: s } => s / ((1.0 + s * p) * LN_2),
            LinkModel::AmplifyForward { snr_per_watt: s, relay_snr: c } => {
                let u = s * p;
                let d = c + 1.0;
                0.5 * s * ((1.0 + c) / ((1.0 + c) * u + d) - 1.0 / (u + d)) / LN_2
            }
        }
    }

    pub fn tangent(&self, p_ref: f64) -> Tangent {
        let slope = self.derivative(p_ref);
        Tangent { intercept: self.rate(p_ref) - slope * p_ref, slope }
    }

    /// `weight·rate(scale·x)` as a solver term of variable `x`.
    fn term(&self, x: usize, scale: f64, weight: f64) -> ConcaveTerm {
        match *self {
            LinkModel::Direct { snr_per_watt } => ConcaveTerm::Log2OnePlus {
                arg: AffineExpr { terms: vec![(x, snr_per_watt * scale)], constant: 0.0 },
                weight,
            },
            LinkModel::AmplifyForward { snr_per_watt, relay_snr } => ConcaveTerm::Log2OnePlusSaturating {
                arg: AffineExpr { terms: vec![(x, snr_per_watt * scale)], constant: 0.0 },
                gain: relay_snr,
                offset: relay_snr + 1.0,
                weight: 0.5 * weight,
            },
        }
    }
}

/// Legitimate and eavesdropper links of one (user, slot) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotLinks {
    pub bs: LinkModel,
    pub eve: LinkModel,
}

/// Everything the power block needs, with the geometry already folded into
/// per-slot link models.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblem {
    /// Binary association, `[user][slot]`.
    pub assoc: Vec<Vec<f64>>,
    pub links: Vec<Vec<SlotLinks>>,
    pub max_power_w: Vec<f64>,
    /// Power charged regardless of p: P0 plus any fixed relay power.
    pub fixed_power_w: f64,
}

impl PowerProblem {
    /// RIS links under the current trajectory and phases, exact Eve gain.
    pub fn ris(cfg: &ScenarioConfig, assoc: &[Vec<f64>], trajectory: &Trajectory, phases: &PhaseSchedule) -> Self {
        let links = (0..cfg.num_users())
            .map(|k| {
                (0..cfg.num_slots)
                    .map(|s| {
                        let (g_b, g_e) =
                            link_gains(cfg, trajectory.slot_position(s), cfg.users[k], phases.slot(s), EveModel::Exact);
                        SlotLinks {
                            bs: LinkModel::Direct { snr_per_watt: g_b / cfg.noise_w },
                            eve: LinkModel::Direct { snr_per_watt: g_e / cfg.noise_w },
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            assoc: assoc.to_vec(),
            links,
            max_power_w: cfg.max_power_w.clone(),
            fixed_power_w: cfg.circuit_power_w,
        }
    }

    fn num_users(&self) -> usize {
        self.assoc.len()
    }

    fn num_slots(&self) -> usize {
        self.assoc.first().map_or(0, Vec::len)
    }

    /// Served pairs whose legitimate link beats the eavesdropper at every power.
    fn included(&self, k: usize, s: usize) -> bool {
        let l = &self.links[k][s];
        self.assoc[k][s] > 0.5 && l.bs.rate(self.max_power_w[k]) > l.eve.rate(self.max_power_w[k])
    }

    /// Exact min average secrecy rate.
    pub fn zeta(&self, power: &[Vec<f64>]) -> f64 {
        let n = self.num_slots().max(1) as f64;
        (0..self.num_users())
            .map(|k| {
                (0..self.num_slots())
                    .map(|s| {
                        let l = &self.links[k][s];
                        let p = power[k][s];
                        self.assoc[k][s] * (l.bs.rate(p) - l.eve.rate(p)).max(0.0)
                    })
                    .sum::<f64>()
                    / n
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_power(&self, power: &[Vec<f64>]) -> f64 {
        power.iter().flatten().sum::<f64>() + self.fixed_power_w
    }

    pub fn gamma(&self, power: &[Vec<f64>]) -> f64 {
        self.zeta(power) / self.total_power(power)
    }
}

/// Solution of one parametric subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSubproblemResult {
    pub power: Vec<Vec<f64>>,
    /// Surrogate ζ at the returned powers.
    pub zeta: f64,
    /// Surrogate ζ − η(Σp + fixed).
    pub objective: f64,
    pub status: SolveStatus,
}

/// Maximizes ζ − η(Σp + P_fixed) with the eavesdropper rates replaced by
/// their tangents at `p_ref`. Pairs that are unserved or cannot carry
/// secrecy get zero power.
pub fn solve_power_subproblem(problem: &PowerProblem, eta: f64, p_ref: &[Vec<f64>]) -> PowerSubproblemResult {
    let (k_users, n_slots) = (problem.num_users(), problem.num_slots());
    let zero = vec![vec![0.0; n_slots]; k_users];
    let included: Vec<Vec<bool>> =
        (0..k_users).map(|k| (0..n_slots).map(|s| problem.included(k, s)).collect()).collect();
    if k_users == 0 || included.iter().any(|row| !row.iter().any(|&b| b)) {
        return PowerSubproblemResult {
            power: zero,
            zeta: 0.0,
            objective: -eta * problem.fixed_power_w,
            status: SolveStatus::Optimal,
        };
    }

    // Rates are scaled by R0 and powers by P_k so the program is O(1).
    let r0 = (0..k_users)
        .flat_map(|k| (0..n_slots).map(move |s| (k, s)))
        .filter(|&(k, s)| included[k][s])
        .map(|(k, s)| problem.links[k][s].bs.rate(problem.max_power_w[k]))
        .fold(0.0, f64::max);
    let weight = 1.0 / (n_slots as f64 * r0);

    let mut prog = ConvexProgram::default();
    let zeta = prog.add_var("zeta");
    let mut index = vec![vec![None; n_slots]; k_users];
    prog.objective = AffineExpr::var(zeta);
    let mut start = vec![0.0];
    let mut worst = f64::INFINITY;
    for k in 0..k_users {
        let pk = problem.max_power_w[k];
        let mut expr = ConcaveExpr { affine: AffineExpr { terms: vec![(zeta, -1.0)], constant: 0.0 }, terms: Vec::new() };
        let mut start_value = 0.0;
        for s in 0..n_slots {
            if !included[k][s] {
                continue;
            }
            let x = prog.add_var(format!("p[{k}][{s}]"));
            prog.add_bounds(x, 0.0, 1.0);
            index[k][s] = Some(x);
            prog.objective.add_term(x, -eta * pk / r0);
            let links = &problem.links[k][s];
            let tangent = links.eve.tangent(p_ref[k][s].clamp(0.0, pk));
            expr.terms.push(links.bs.term(x, pk, weight));
            expr.affine.add_term(x, -weight * tangent.slope * pk);
            expr.affine.constant -= weight * tangent.intercept;
            let x0 = (p_ref[k][s] / pk).clamp(1e-9, 1.0 - 1e-9);
            start.push(x0);
            start_value += weight * (links.bs.rate(x0 * pk) - tangent.eval(x0 * pk));
        }
        worst = worst.min(start_value);
        prog.add(Constraint::Concave(expr));
    }
    start[zeta] = worst - 1.0;

    let report = solve(&prog, &start, &SolverOptions::default());
    let mut power = zero;
    for k in 0..k_users {
        for s in 0..n_slots {
            if let Some(x) = index[k][s] {
                let pk = problem.max_power_w[k];
                let p = (report.x[x] * pk).clamp(0.0, pk);
                power[k][s] = if p <= 1e-12 { 0.0 } else { p };
            }
        }
    }
    let zeta_hat = surrogate_zeta(problem, &included, &power, p_ref);
    PowerSubproblemResult {
        objective: zeta_hat - eta * problem.total_power(&power),
        zeta: zeta_hat,
        power,
        status: report.status,
    }
}

fn surrogate_zeta(problem: &PowerProblem, included: &[Vec<bool>], power: &[Vec<f64>], p_ref: &[Vec<f64>]) -> f64 {
    let n = problem.num_slots() as f64;
    (0..problem.num_users())
        .map(|k| {
            (0..problem.num_slots())
                .filter(|&s| included[k][s])
                .map(|s| {
                    let l = &problem.links[k][s];
                    let t = l.eve.tangent(p_ref[k][s].clamp(0.0, problem.max_power_w[k]));
                    l.bs.rate(power[k][s]) - t.eval(power[k][s])
                })
                .sum::<f64>()
                / n
        })
        .fold(f64::INFINITY, f64::min)
}

/// Outcome of the full power block.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    pub power: Vec<Vec<f64>>,
    pub zeta: f64,
    pub gamma: f64,
    /// F(η) of each Dinkelbach iteration, exact rates.
    pub dinkelbach_trace: Vec<f64>,
    /// Exact ζ after each Dinkelbach iteration.
    pub zeta_trace: Vec<f64>,
    pub inner_iterations: usize,
    pub status: SolveStatus,
}

/// Dinkelbach iterations with inner SCA, stopped once η settles and
/// |F(η)| ≤ 1e−6·(Σp + P_fixed); never returns a Γ below the start.
pub fn optimize_power(problem: &PowerProblem, p_init: &[Vec<f64>], tol: &Tolerances) -> PowerOutcome {
    let gamma_init = problem.gamma(p_init);
    let mut power = p_init.to_vec();
    let mut eta = gamma_init;
    let mut dinkelbach_trace = Vec::new();
    let mut zeta_trace = Vec::new();
    let mut inner_iterations = 0;
    let mut status = SolveStatus::Optimal;
    let exact_f = |p: &[Vec<f64>], eta: f64| problem.zeta(p) - eta * problem.total_power(p);

    for _ in 0..tol.max_dinkelbach_iterations.max(1) {
        let mut f_cur = exact_f(&power, eta);
        for _ in 0..tol.max_inner_iterations.max(1) {
            inner_iterations += 1;
            let sub = solve_power_subproblem(problem, eta, &power);
            if sub.status != SolveStatus::Optimal {
                status = sub.status;
            }
            let f_new = exact_f(&sub.power, eta);
            if f_new < f_cur {
                break;
            }
            let gain = f_new - f_cur;
            power = sub.power;
            f_cur = f_new;
            if gain <= tol.inner_sca * f_cur.abs() + 1e-12 * problem.zeta(&power) {
                break;
            }
        }
        dinkelbach_trace.push(f_cur);
        zeta_trace.push(problem.zeta(&power));
        let eta_new = problem.gamma(&power);
        let settled = (eta_new - eta).abs() <= tol.dinkelbach * eta_new.abs();
        let converged = (settled && f_cur.abs() <= 1e-6 * problem.total_power(&power)) || eta_new <= 0.0;
        eta = eta_new;
        if converged {
            break;
        }
    }

    if problem.gamma(&power) < gamma_init {
        power = p_init.to_vec();
    }
    PowerOutcome {
        zeta: problem.zeta(&power),
        gamma: problem.gamma(&power),
        power,
        dinkelbach_trace,
        zeta_trace,
        inner_iterations,
        status,
    }
}
