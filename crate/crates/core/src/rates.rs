//! Rates, secrecy rates, the fairness metric ζ and the efficiency Γ.
//!
//! [`evaluate`] is the single place the reported objective comes from. It
//! always uses the exact eavesdropper phase sum; the coherent bound only
//! appears inside the optimization surrogates.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::{cascaded_gain, eve_gain_power, steering_channel, EveModel, PhaseSchedule};
use crate::error::{Error, Result};
use crate::scenario::{Point, ScenarioConfig, Trajectory};

/// Feasibility slack used when checking a state, meters for positions and
/// watts for powers.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// log2(1 + p·gain/σ²), accurate for tiny SNR.
pub fn rate_bs(p: f64, gain_power: f64, noise_w: f64) -> f64 {
    (p * gain_power / noise_w).ln_1p() / LN_2
}

/// Same functional form as [`rate_bs`] with the eavesdropper's gain.
pub fn rate_eve(p: f64, gain_power_eve: f64, noise_w: f64) -> f64 {
    rate_bs(p, gain_power_eve, noise_w)
}

/// a · max{r − c, 0}.
pub fn secrecy_rate(a: f64, r: f64, c: f64) -> f64 {
    a * (r - c).max(0.0)
}

/// ζ = min_k (1/N) Σ_n R_k[n].
pub fn min_avg_secrecy(secrecy: &[Vec<f64>]) -> f64 {
    secrecy
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len().max(1) as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Γ = ζ / (Σ p + P0).
pub fn secrecy_ee(zeta: f64, allocation: &Allocation, circuit_power_w: f64) -> f64 {
    zeta / (allocation.total_power() + circuit_power_w)
}

/// Association a_k[n] and transmit power p_k[n], both indexed `[user][slot]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub assoc: Vec<Vec<f64>>,
    pub power: Vec<Vec<f64>>,
}

impl Allocation {
    pub fn new(num_users: usize, num_slots: usize) -> Self {
        Self {
            assoc: vec![vec![0.0; num_slots]; num_users],
            power: vec![vec![0.0; num_slots]; num_users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.assoc.len()
    }

    pub fn num_slots(&self) -> usize {
        self.assoc.first().map_or(0, Vec::len)
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().flatten().sum()
    }

    /// The user with a_k[s] > ½, if any (binary associations only).
    pub fn served_user(&self, s: usize) -> Option<usize> {
        (0..self.num_users()).find(|&k| self.assoc[k][s] > 0.5)
    }

    /// Slot has no associated user or the served user transmits nothing.
    pub fn is_silent(&self, s: usize) -> bool {
        match self.served_user(s) {
            None => true,
            Some(k) => self.power[k][s] <= 1e-12,
        }
    }

    pub fn check(&self, cfg: &ScenarioConfig) -> Result<()> {
        let (k_users, n_slots) = (cfg.num_users(), cfg.num_slots);
        if self.assoc.len() != k_users || self.power.len() != k_users {
            return Err(Error::LengthMismatch { expected: k_users, actual: self.assoc.len().min(self.power.len()) });
        }
        for k in 0..k_users {
            if self.assoc[k].len() != n_slots || self.power[k].len() != n_slots {
                return Err(Error::LengthMismatch { expected: n_slots, actual: self.assoc[k].len() });
            }
            for s in 0..n_slots {
                let a = self.assoc[k][s];
                if !(-1e-9..=1.0 + 1e-9).contains(&a) {
                    return Err(Error::Infeasible(format!("a[{k}][{s}] = {a} outside [0, 1]")));
                }
                let p = self.power[k][s];
                if !(p >= -1e-12 && p <= cfg.max_power_w[k] + 1e-12) {
                    return Err(Error::Infeasible(format!("p[{k}][{s}] = {p} outside [0, P_k]")));
                }
            }
        }
        for s in 0..n_slots {
            let col: f64 = (0..k_users).map(|k| self.assoc[k][s]).sum();
            if col > 1.0 + 1e-9 {
                return Err(Error::Infeasible(format!("slot {s} associates {col} users")));
            }
        }
        Ok(())
    }
}

/// One complete iterate of the alternating optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionState {
    pub allocation: Allocation,
    pub trajectory: Trajectory,
    pub phases: PhaseSchedule,
    /// Min average secrecy rate, bits/s/Hz.
    pub zeta: f64,
    /// Secrecy energy efficiency, (bits/s/Hz)/W.
    pub gamma: f64,
}

/// Result of [`evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub zeta: f64,
    pub gamma: f64,
    /// R_k[n], `[user][slot]`.
    pub secrecy: Vec<Vec<f64>>,
}

/// |g_bᴴΘg_k|² and |g_eᴴΘg_k|² for user `w_k` with the UAV at `q`.
pub fn link_gains(cfg: &ScenarioConfig, q: Point, w_k: Point, theta: &[f64], eve: EveModel) -> (f64, f64) {
    let bs = steering_channel(q, cfg.bs, cfg);
    let user = steering_channel(q, w_k, cfg);
    let g_b = cascaded_gain(&bs, theta, &user).map(|g| g.norm_sqr()).unwrap_or(0.0);
    let g_e = eve_gain_power(eve, q, w_k, cfg, theta);
    (g_b, g_e)
}

/// Per-slot secrecy matrix for arbitrary association values.
pub fn secrecy_matrix(
    cfg: &ScenarioConfig,
    allocation: &Allocation,
    trajectory: &Trajectory,
    phases: &PhaseSchedule,
    eve: EveModel,
) -> Vec<Vec<f64>> {
    let (k_users, n_slots) = (cfg.num_users(), cfg.num_slots);
    let mut out = vec![vec![0.0; n_slots]; k_users];
    for s in 0..n_slots {
        let q = trajectory.slot_position(s);
        for k in 0..k_users {
            let a = allocation.assoc[k][s];
            let p = allocation.power[k][s];
            if a <= 0.0 || p <= 0.0 {
                continue;
            }
            let (g_b, g_e) = link_gains(cfg, q, cfg.users[k], phases.slot(s), eve);
            out[k][s] = secrecy_rate(a, rate_bs(p, g_b, cfg.noise_w), rate_eve(p, g_e, cfg.noise_w));
        }
    }
    out
}

/// Checks feasibility and recomputes ζ and Γ from scratch with the given
/// eavesdropper model.
pub fn evaluate_with(
    cfg: &ScenarioConfig,
    allocation: &Allocation,
    trajectory: &Trajectory,
    phases: &PhaseSchedule,
    eve: EveModel,
) -> Result<Evaluation> {
    allocation.check(cfg)?;
    if trajectory.num_slots() != cfg.num_slots {
        return Err(Error::LengthMismatch { expected: cfg.num_slots + 1, actual: trajectory.points.len() });
    }
    trajectory.check(cfg.s_max(), FEASIBILITY_TOL)?;
    if phases.slots.len() != cfg.num_slots || phases.slots.iter().any(|t| t.len() != cfg.ris_elements) {
        return Err(Error::LengthMismatch { expected: cfg.num_slots, actual: phases.slots.len() });
    }
    let secrecy = secrecy_matrix(cfg, allocation, trajectory, phases, eve);
    let zeta = min_avg_secrecy(&secrecy);
    let gamma = secrecy_ee(zeta, allocation, cfg.circuit_power_w);
    Ok(Evaluation { zeta, gamma, secrecy })
}

/// The reported objective: exact eavesdropper gain, from scratch.
pub fn evaluate(cfg: &ScenarioConfig, state: &SolutionState) -> Result<Evaluation> {
    evaluate_with(cfg, &state.allocation, &state.trajectory, &state.phases, EveModel::Exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{coherent_phases, distance};
    use crate::scenario::default_paper_scenario;

    #[test]
    fn rate_examples() {
        assert!((rate_bs(1.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(rate_bs(0.0, 3.0, 1.0), 0.0);
        let r = rate_bs(1.0, 1.6e-19, 1e-15);
        assert!((r - (1.0 + 1.6e-4f64).log2()).abs() < 1e-15);
        assert!((r - 2.308_127_420_151_446e-4).abs() < 1e-15);
        assert_eq!(rate_eve(3.0, 0.0, 1e-15), 0.0);
        assert!((rate_eve(1.0, 1e-16, 1e-15) - 0.137_503_523_749_934_9).abs() < 1e-12);
    }

    #[test]
    fn secrecy_examples() {
        assert_eq!(secrecy_rate(1.0, 2.0, 3.0), 0.0);
        assert_eq!(secrecy_rate(0.0, 5.0, 1.0), 0.0);
        assert_eq!(secrecy_rate(1.0, 2.0, 0.5), 1.5);
    }

    #[test]
    fn min_avg_examples() {
        assert_eq!(min_avg_secrecy(&[vec![1.0, 3.0], vec![2.0, 2.0]]), 2.0);
        assert_eq!(min_avg_secrecy(&[vec![1.0, 3.0], vec![0.0, 0.0]]), 0.0);
        assert_eq!(min_avg_secrecy(&[vec![1.0, 0.0], vec![0.0, 1.0]]), 0.5);
    }

    #[test]
    fn ee_examples() {
        let mut alloc = Allocation::new(1, 3);
        alloc.power[0] = vec![1.0, 1.0, 1.0];
        assert_eq!(secrecy_ee(2.0, &alloc, 1.0), 0.5);
        assert_eq!(secrecy_ee(0.0, &alloc, 1.0), 0.0);
        let mut last = f64::INFINITY;
        for p0 in [1.0, 10.0, 100.0, 1e6] {
            let g = secrecy_ee(2.0, &alloc, p0);
            assert!(g < last);
            last = g;
        }
    }

    fn one_user_one_slot() -> (ScenarioConfig, SolutionState) {
        let mut cfg = default_paper_scenario();
        cfg.users = vec![[250.0, -120.0]];
        cfg.max_power_w = vec![1.0];
        cfg.num_slots = 1;
        let q = [60.0, -40.0];
        let traj = Trajectory::hover(q, 1);
        let bs = steering_channel(q, cfg.bs, &cfg);
        let user = steering_channel(q, cfg.users[0], &cfg);
        let phases = PhaseSchedule { slots: vec![coherent_phases(bs.cosine, user.cosine, cfg.ris_elements, cfg.spacing_ratio)] };
        let mut alloc = Allocation::new(1, 1);
        alloc.assoc[0][0] = 1.0;
        alloc.power[0][0] = 0.8;
        let state = SolutionState { allocation: alloc, trajectory: traj, phases, zeta: 0.0, gamma: 0.0 };
        (cfg, state)
    }

    #[test]
    fn evaluate_matches_manual_composition() {
        let (cfg, state) = one_user_one_slot();
        let q = state.trajectory.points[1];
        let w = cfg.users[0];
        let h = cfg.altitude_m;
        let a = cfg.pathloss_exponent;
        let m = cfg.ris_elements as f64;
        let (dk, db, de) = (distance(q, w, h), distance(q, cfg.bs, h), distance(q, cfg.eve, h));
        let h0 = cfg.ref_gain;
        let snr_b = 0.8 * h0 * h0 * m * m / (dk.powf(a) * db.powf(a)) / cfg.noise_w;
        // Manual exact Eve phase sum.
        let phi_k = (q[0] - w[0]) / dk;
        let phi_e = (q[0] - cfg.eve[0]) / de;
        let (mut re, mut im) = (0.0, 0.0);
        for (mm, t) in state.phases.slots[0].iter().enumerate() {
            let arg = t + 2.0 * std::f64::consts::PI * mm as f64 * 0.5 * (phi_e - phi_k);
            re += arg.cos();
            im += arg.sin();
        }
        let snr_e = 0.8 * h0 * h0 * (re * re + im * im) / (dk.powf(a) * de.powf(a)) / cfg.noise_w;
        let zeta = ((1.0 + snr_b).log2() - (1.0 + snr_e).log2()).max(0.0);
        let ev = evaluate(&cfg, &state).unwrap();
        assert!((ev.zeta - zeta).abs() <= 1e-6 * zeta.abs().max(1e-300));
        assert!((ev.gamma - zeta / 1.8).abs() <= 1e-6 * ev.gamma);
        assert!((ev.gamma * 1.8 - ev.zeta).abs() <= 1e-9 * ev.zeta);
    }

    #[test]
    fn zero_power_gives_zero() {
        let (cfg, mut state) = one_user_one_slot();
        state.allocation.power[0][0] = 0.0;
        let ev = evaluate(&cfg, &state).unwrap();
        assert_eq!((ev.zeta, ev.gamma), (0.0, 0.0));
    }

    #[test]
    fn evaluate_rejects_infeasible_states() {
        let (cfg, mut state) = one_user_one_slot();
        state.allocation.power[0][0] = 2.0;
        assert!(matches!(evaluate(&cfg, &state), Err(Error::Infeasible(_))));
        let (cfg, mut state) = one_user_one_slot();
        state.trajectory.points[1] = [1e4, 0.0];
        assert!(matches!(evaluate(&cfg, &state), Err(Error::Infeasible(_))));
    }

    #[test]
    fn bound_eve_never_beats_exact() {
        let (cfg, state) = one_user_one_slot();
        let exact = evaluate(&cfg, &state).unwrap();
        let bound = evaluate_with(&cfg, &state.allocation, &state.trajectory, &state.phases, EveModel::Bound).unwrap();
        assert!(bound.zeta <= exact.zeta);
    }
}
