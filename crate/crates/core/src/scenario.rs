//! Scenario configuration, file parsing and the initial trajectory.
//!
//! All quantities are held in linear SI units: meters, seconds, watts and
//! plain power ratios. Decibel inputs are accepted only at the file boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Horizontal ground-plane coordinate in meters.
pub type Point = [f64; 2];

/// Iteration limits and stopping tolerances for the nested loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Outer alternating loop, on |ΔΓ| ≤ outer·max(1, Γ) after rescaling.
    pub outer: f64,
    /// Dinkelbach loop, relative change of the min average secrecy rate.
    pub dinkelbach: f64,
    /// Inner SCA loops, relative change of the block objective.
    pub inner_sca: f64,
    pub max_outer_iterations: usize,
    pub max_dinkelbach_iterations: usize,
    pub max_inner_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            outer: 1e-4,
            dinkelbach: 1e-4,
            inner_sca: 1e-3,
            max_outer_iterations: 50,
            max_dinkelbach_iterations: 30,
            max_inner_iterations: 30,
        }
    }
}

/// Every physical and algorithmic parameter of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_slots: usize,
    /// Flight period T in seconds.
    pub period_s: f64,
    /// Fixed flight altitude H in meters.
    pub altitude_m: f64,
    pub v_max_mps: f64,
    pub users: Vec<Point>,
    /// Per-user maximum transmit power P_k in watts.
    pub max_power_w: Vec<f64>,
    pub eve: Point,
    pub bs: Point,
    pub pathloss_exponent: f64,
    pub ris_elements: usize,
    /// Element spacing over carrier wavelength, d/λ.
    pub spacing_ratio: f64,
    /// Channel power gain at the 1 m reference distance, linear.
    pub ref_gain: f64,
    /// Receiver noise power σ² in watts.
    pub noise_w: f64,
    pub circuit_power_w: f64,
    /// Transmit power of the UAV when it acts as an AF relay (baseline only).
    pub relay_power_w: f64,
    pub tolerances: Tolerances,
}

impl ScenarioConfig {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Slot duration δ = T/N.
    pub fn slot_s(&self) -> f64 {
        self.period_s / self.num_slots as f64
    }

    /// Largest horizontal move per slot, S_max = v_max·T/N.
    pub fn s_max(&self) -> f64 {
        self.v_max_mps * self.period_s / self.num_slots as f64
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, value: f64) -> Result<()> {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {value}")))
            }
        }
        if self.users.is_empty() {
            return Err(Error::InvalidConfig("at least one user is required".into()));
        }
        if self.num_slots == 0 {
            return Err(Error::InvalidConfig("num_slots must be at least 1".into()));
        }
        if self.ris_elements == 0 {
            return Err(Error::InvalidConfig("ris_elements must be at least 1".into()));
        }
        if self.max_power_w.len() != self.users.len() {
            return Err(Error::InvalidConfig(format!(
                "{} max powers for {} users",
                self.max_power_w.len(),
                self.users.len()
            )));
        }
        positive("period_s", self.period_s)?;
        positive("altitude_m", self.altitude_m)?;
        positive("h0", self.ref_gain)?;
        positive("sigma2_w", self.noise_w)?;
        positive("circuit_power_w", self.circuit_power_w)?;
        positive("relay_power_w", self.relay_power_w)?;
        positive("spacing_ratio", self.spacing_ratio)?;
        for (k, &p) in self.max_power_w.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidConfig(format!("users[{k}].max_power_w must be non-negative, got {p}")));
            }
        }
        if !(self.v_max_mps.is_finite() && self.v_max_mps >= 0.0) {
            return Err(Error::InvalidConfig(format!("v_max_mps must be non-negative, got {}", self.v_max_mps)));
        }
        if !(self.pathloss_exponent.is_finite() && self.pathloss_exponent >= 2.0) {
            return Err(Error::InvalidConfig(format!(
                "pathloss_exponent must be at least 2, got {}",
                self.pathloss_exponent
            )));
        }
        let all_points = self.users.iter().chain([&self.eve, &self.bs]);
        if all_points.flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("positions must be finite".into()));
        }
        let t = &self.tolerances;
        for (name, v) in [("outer", t.outer), ("dinkelbach", t.dinkelbach), ("inner_sca", t.inner_sca)] {
            positive(&format!("solver.{name}"), v)?;
        }
        Ok(())
    }

    /// Renders the configuration as a scenario file in linear units.
    pub fn to_toml_string(&self) -> String {
        let file = ScenarioFile {
            num_slots: Some(self.num_slots),
            period_s: Some(self.period_s),
            altitude_m: Some(self.altitude_m),
            v_max_mps: Some(self.v_max_mps),
            s_max_m: Some(self.s_max()),
            pathloss_exponent: Some(self.pathloss_exponent),
            ris_elements: Some(self.ris_elements),
            spacing_ratio: Some(self.spacing_ratio),
            h0: Some(self.ref_gain),
            h0_db: None,
            sigma2_w: Some(self.noise_w),
            sigma2_dbm: None,
            circuit_power_w: Some(self.circuit_power_w),
            relay_power_w: Some(self.relay_power_w),
            bs: Some(self.bs),
            eve: Some(self.eve),
            users: self
                .users
                .iter()
                .zip(&self.max_power_w)
                .map(|(&position, &p)| UserEntry { position, max_power_w: Some(p) })
                .collect(),
            max_power_w: None,
            solver: Some(self.tolerances.clone()),
        };
        toml::to_string(&file).expect("scenario file is always serializable")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserEntry {
    position: Point,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_power_w: Option<f64>,
}

/// On-disk layout. Decibel keys are mutually exclusive with their linear twins.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    num_slots: Option<usize>,
    period_s: Option<f64>,
    altitude_m: Option<f64>,
    v_max_mps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s_max_m: Option<f64>,
    pathloss_exponent: Option<f64>,
    ris_elements: Option<usize>,
    spacing_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h0_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma2_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma2_dbm: Option<f64>,
    circuit_power_w: Option<f64>,
    relay_power_w: Option<f64>,
    bs: Option<Point>,
    eve: Option<Point>,
    /// Default P_k for users that do not set their own.
    #[serde(skip_serializing_if = "Option::is_none")]
    max_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<Tolerances>,
    #[serde(default)]
    users: Vec<UserEntry>,
}

/// Power ratio from decibels.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Watts from dBm.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::MissingKey(key.to_string()))
}

fn linear_or_db(linear: Option<f64>, db: Option<f64>, key: &str, db_key: &str, convert: fn(f64) -> f64) -> Result<f64> {
    match (linear, db) {
        (Some(v), None) => Ok(v),
        (None, Some(v)) => Ok(convert(v)),
        (Some(_), Some(_)) => Err(Error::InvalidConfig(format!("both {key} and {db_key} given"))),
        (None, None) => Err(Error::MissingKey(format!("{key} (or {db_key})"))),
    }
}

/// Parses and validates a TOML scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.users.is_empty() {
        return Err(Error::MissingKey("users".into()));
    }
    let max_power_w = file
        .users
        .iter()
        .enumerate()
        .map(|(k, u)| {
            u.max_power_w
                .or(file.max_power_w)
                .ok_or_else(|| Error::MissingKey(format!("users[{k}].max_power_w (or max_power_w)")))
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = ScenarioConfig {
        num_slots: required(file.num_slots, "num_slots")?,
        period_s: required(file.period_s, "period_s")?,
        altitude_m: required(file.altitude_m, "altitude_m")?,
        v_max_mps: required(file.v_max_mps, "v_max_mps")?,
        users: file.users.iter().map(|u| u.position).collect(),
        max_power_w,
        eve: required(file.eve, "eve")?,
        bs: required(file.bs, "bs")?,
        pathloss_exponent: required(file.pathloss_exponent, "pathloss_exponent")?,
        ris_elements: required(file.ris_elements, "ris_elements")?,
        spacing_ratio: required(file.spacing_ratio, "spacing_ratio")?,
        ref_gain: linear_or_db(file.h0, file.h0_db, "h0", "h0_db", db_to_linear)?,
        noise_w: linear_or_db(file.sigma2_w, file.sigma2_dbm, "sigma2_w", "sigma2_dbm", dbm_to_watts)?,
        circuit_power_w: required(file.circuit_power_w, "circuit_power_w")?,
        relay_power_w: required(file.relay_power_w, "relay_power_w")?,
        tolerances: file.solver.unwrap_or_default(),
    };
    cfg.validate()?;
    if let Some(s_max) = file.s_max_m {
        let expected = cfg.s_max();
        if (s_max - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "s_max_m = {s_max} disagrees with v_max·T/N = {expected}"
            )));
        }
    }
    Ok(cfg)
}

/// Four users on the corners of a 600 m square around the BS, Eve at (0, 200) m.
pub fn default_paper_scenario() -> ScenarioConfig {
    ScenarioConfig {
        num_slots: 12,
        period_s: 80.0,
        altitude_m: 100.0,
        v_max_mps: 50.0,
        users: vec![[300.0, 300.0], [-300.0, 300.0], [-300.0, -300.0], [300.0, -300.0]],
        max_power_w: vec![1.0; 4],
        eve: [0.0, 200.0],
        bs: [0.0, 0.0],
        pathloss_exponent: 2.2,
        ris_elements: 10,
        spacing_ratio: 0.5,
        ref_gain: db_to_linear(-80.0),
        noise_w: dbm_to_watts(-120.0),
        circuit_power_w: 1.0,
        relay_power_w: 0.2,
        tolerances: Tolerances::default(),
    }
}

/// UAV horizontal positions q[0..=N]; q[0] is the fixed start and q[N] = q[0].
///
/// Slot n (1-based) is flown at `points[n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Point>,
}

impl Trajectory {
    pub fn hover(at: Point, num_slots: usize) -> Self {
        Self { points: vec![at; num_slots + 1] }
    }

    pub fn num_slots(&self) -> usize {
        self.points.len() - 1
    }

    /// Position used in zero-based slot `s`.
    pub fn slot_position(&self, s: usize) -> Point {
        self.points[s + 1]
    }

    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| dist2d(w[0], w[1]))
    }

    pub fn max_step(&self) -> f64 {
        self.steps().fold(0.0, f64::max)
    }

    /// Checks closure and the per-slot speed limit.
    pub fn check(&self, s_max: f64, tol: f64) -> Result<()> {
        let first = self.points[0];
        let last = *self.points.last().expect("trajectory has at least one point");
        if dist2d(first, last) > tol {
            return Err(Error::Infeasible(format!("trajectory not closed: |q[N] - q[0]| = {}", dist2d(first, last))));
        }
        for (n, step) in self.steps().enumerate() {
            if step > s_max + tol {
                return Err(Error::Infeasible(format!(
                    "step {} moves {step} m, limit {s_max} m",
                    n + 1
                )));
            }
        }
        Ok(())
    }

    /// Axis-aligned bounding-box area of all points, m².
    pub fn bounding_box_area(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.points {
            for i in 0..2 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        (hi[0] - lo[0]) * (hi[1] - lo[1])
    }

    /// Pointwise convex combination `(1-t)·self + t·other`.
    pub fn blend(&self, other: &Trajectory, t: f64) -> Trajectory {
        let points = self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
            .collect();
        Trajectory { points }
    }
}

pub(crate) fn dist2d(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Closed polygon through half-scaled user positions, resampled to N equal
/// arc-length steps and shrunk toward its centroid when a step would exceed
/// S_max.
pub fn initial_trajectory(cfg: &ScenarioConfig) -> Trajectory {
    let n = cfg.num_slots;
    let mut waypoints: Vec<Point> = cfg
        .users
        .iter()
        .map(|w| [0.5 * w[0], 0.5 * w[1]])
        .collect();
    waypoints.sort_by(|a, b| {
        let ta = (a[1] - cfg.bs[1]).atan2(a[0] - cfg.bs[0]);
        let tb = (b[1] - cfg.bs[1]).atan2(b[0] - cfg.bs[0]);
        ta.total_cmp(&tb)
    });
    waypoints.dedup_by(|a, b| dist2d(*a, *b) < 1e-12);

    let perimeter: f64 = (0..waypoints.len())
        .map(|i| dist2d(waypoints[i], waypoints[(i + 1) % waypoints.len()]))
        .sum();
    let mut points = if perimeter <= 0.0 {
        vec![waypoints[0]; n + 1]
    } else {
        (0..=n)
            .map(|i| point_at_arc_length(&waypoints, perimeter * i as f64 / n as f64))
            .collect::<Vec<_>>()
    };
    points[n] = points[0];

    let spacing = perimeter / n as f64;
    let s_max = cfg.s_max();
    if spacing > s_max {
        // Steps scale linearly with the shrink factor.
        let factor = if s_max > 0.0 { s_max / spacing * (1.0 - 1e-12) } else { 0.0 };
        let count = waypoints.len() as f64;
        let centroid = [
            waypoints.iter().map(|p| p[0]).sum::<f64>() / count,
            waypoints.iter().map(|p| p[1]).sum::<f64>() / count,
        ];
        for p in &mut points {
            *p = [
                centroid[0] + factor * (p[0] - centroid[0]),
                centroid[1] + factor * (p[1] - centroid[1]),
            ];
        }
    }
    Trajectory { points }
}

fn point_at_arc_length(waypoints: &[Point], mut s: f64) -> Point {
    let m = waypoints.len();
    for i in 0..m {
        let a = waypoints[i];
        let b = waypoints[(i + 1) % m];
        let len = dist2d(a, b);
        if s <= len || i == m - 1 {
            let t = if len > 0.0 { (s / len).clamp(0.0, 1.0) } else { 0.0 };
            return [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        }
        s -= len;
    }
    waypoints[0]
}
