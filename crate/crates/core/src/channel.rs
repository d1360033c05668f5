//! Deterministic line-of-sight geometry for the user → RIS → receiver links.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Point, ScenarioConfig};

/// 3-D distance between the UAV at horizontal point `q` and altitude `h`
/// and a ground node at `w`.
pub fn distance(q: Point, w: Point, h: f64) -> f64 {
    let dx = q[0] - w[0];
    let dy = q[1] - w[1];
    (dx * dx + dy * dy + h * h).sqrt()
}

/// Cosine of the angle of arrival along the array axis (the x axis).
pub fn aoa_cosine(q: Point, w: Point, h: f64) -> f64 {
    ((q[0] - w[0]) / distance(q, w, h)).clamp(-1.0, 1.0)
}

/// Wraps an angle into [0, 2π).
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Uniform-linear-array LoS channel `amplitude · [e^{-j2π m (d/λ) φ}]_{m=0..M}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringChannel {
    pub amplitude: f64,
    /// AoA cosine φ in [-1, 1].
    pub cosine: f64,
    pub elements: usize,
    pub spacing_ratio: f64,
}

impl SteeringChannel {
    pub fn element(&self, m: usize) -> Complex64 {
        Complex64::from_polar(self.amplitude, -TAU * m as f64 * self.spacing_ratio * self.cosine)
    }

    pub fn to_vec(&self) -> Vec<Complex64> {
        (0..self.elements).map(|m| self.element(m)).collect()
    }
}

/// Channel from ground node `w` to the RIS at `q`.
pub fn steering_channel(q: Point, w: Point, cfg: &ScenarioConfig) -> SteeringChannel {
    let h = cfg.altitude_m;
    let d = distance(q, w, h);
    SteeringChannel {
        amplitude: (cfg.ref_gain * d.powf(-cfg.pathloss_exponent)).sqrt(),
        cosine: aoa_cosine(q, w, h),
        elements: cfg.ris_elements,
        spacing_ratio: cfg.spacing_ratio,
    }
}

/// Unit-modulus phase sum `Σ_m e^{j(θ_m + 2π m (d/λ) Δφ)}`.
pub fn phase_sum(theta: &[f64], spacing_ratio: f64, cosine_diff: f64) -> Complex64 {
    theta
        .iter()
        .enumerate()
        .map(|(m, &t)| Complex64::from_polar(1.0, t + TAU * m as f64 * spacing_ratio * cosine_diff))
        .sum()
}

/// End-to-end gain `g_rxᴴ Θ g_tx`.
pub fn cascaded_gain(rx: &SteeringChannel, theta: &[f64], tx: &SteeringChannel) -> Result<Complex64> {
    if rx.elements != tx.elements || theta.len() != rx.elements {
        return Err(Error::LengthMismatch {
            expected: rx.elements,
            actual: if theta.len() != rx.elements { theta.len() } else { tx.elements },
        });
    }
    let sum = phase_sum(theta, rx.spacing_ratio, rx.cosine - tx.cosine);
    Ok(sum * (rx.amplitude * tx.amplitude))
}

/// Phases that add every path coherently at `rx`:
/// θ_m = 2π m (d/λ)(φ_tx − φ_rx), with the common offset fixed to zero.
pub fn coherent_phases(rx_cosine: f64, tx_cosine: f64, elements: usize, spacing_ratio: f64) -> Vec<f64> {
    (0..elements)
        .map(|m| wrap_phase(TAU * m as f64 * spacing_ratio * (tx_cosine - rx_cosine)))
        .collect()
}

/// Squared cascaded gain under coherent alignment, h0²M²/(d_rx^α d_tx^α).
pub fn aligned_gain_power(d_rx: f64, d_tx: f64, cfg: &ScenarioConfig) -> f64 {
    let m = cfg.ris_elements as f64;
    let a = cfg.pathloss_exponent;
    cfg.ref_gain * cfg.ref_gain * m * m / (d_rx.powf(a) * d_tx.powf(a))
}

/// How the eavesdropper's cascaded gain is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EveModel {
    /// True phase sum for the given schedule.
    Exact,
    /// Coherent worst case, phase sum replaced by M.
    Bound,
}

/// |g_eᴴ Θ g_k|² for user `w_k` with the UAV at `q`.
pub fn eve_gain_power(model: EveModel, q: Point, w_k: Point, cfg: &ScenarioConfig, theta: &[f64]) -> f64 {
    let h = cfg.altitude_m;
    match model {
        EveModel::Bound => aligned_gain_power(distance(q, cfg.eve, h), distance(q, w_k, h), cfg),
        EveModel::Exact => {
            let eve = steering_channel(q, cfg.eve, cfg);
            let user = steering_channel(q, w_k, cfg);
            let sum = phase_sum(theta, cfg.spacing_ratio, eve.cosine - user.cosine);
            (eve.amplitude * user.amplitude).powi(2) * sum.norm_sqr()
        }
    }
}

/// Per-slot RIS phases θ_m[n], each wrapped into [0, 2π).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub slots: Vec<Vec<f64>>,
}

impl PhaseSchedule {
    pub fn zeros(num_slots: usize, elements: usize) -> Self {
        Self { slots: vec![vec![0.0; elements]; num_slots] }
    }

    pub fn slot(&self, s: usize) -> &[f64] {
        &self.slots[s]
    }

    pub fn is_wrapped(&self) -> bool {
        self.slots.iter().flatten().all(|t| (0.0..=TAU).contains(t))
    }
}
