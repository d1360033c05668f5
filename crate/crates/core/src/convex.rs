//! A small primal barrier solver for the convex subproblems, plus the
//! brute-force and finite-difference oracles the tests check it against.
//!
//! Programs maximize a linear objective over three constraint families:
//! affine inequalities `aᵀx + b ≥ 0`, second-order cones `‖Ax + b‖ ≤ cᵀx + d`
//! and smooth concave expressions `f(x) ≥ 0` assembled from the
//! [`ConcaveTerm`] atoms. Affine equalities are kept in the Newton KKT system.
//!
//! Callers are expected to scale their programs so the objective and the
//! constraint values are of order one.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Sparse affine expression `Σ cᵢ·x[iᵢ] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(i: usize) -> Self {
        Self { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn with_term(mut self, i: usize, c: f64) -> Self {
        self.add_term(i, c);
        self
    }

    pub fn add_term(&mut self, i: usize, c: f64) {
        if c != 0.0 {
            self.terms.push((i, c));
        }
    }

    pub fn add_expr(&mut self, other: &AffineExpr, scale: f64) {
        for &(i, c) in &other.terms {
            self.add_term(i, c * scale);
        }
        self.constant += other.constant * scale;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

/// Smooth concave building blocks. `arg` expressions are affine in x.
#[derive(Debug, Clone, PartialEq)]
pub enum ConcaveTerm {
    /// `w·log2(1 + u)`, u > −1.
    Log2OnePlus { arg: AffineExpr, weight: f64 },
    /// `w·log2(u)`, u > 0.
    Log2 { arg: AffineExpr, weight: f64 },
    /// `−w·log2(1 + b/u)`, u > 0, b ≥ 0.
    NegLog2OnePlusRatio { arg: AffineExpr, numerator: f64, weight: f64 },
    /// `w·u^e` with 0 < e ≤ 1, u > 0.
    Power { arg: AffineExpr, exponent: f64, weight: f64 },
    /// `w·log2(1 + c·u/(u + d))`, c ≥ 0, d > 0, u + d > 0.
    Log2OnePlusSaturating { arg: AffineExpr, gain: f64, offset: f64, weight: f64 },
    /// `−w·S` (or `−w·S²` when `squared`) with
    /// `S = Σ_a ‖(x[ix], x[iy]) − a‖² + offset ≥ 0`.
    NegDistanceSum { ix: usize, iy: usize, anchors: Vec<[f64; 2]>, offset: f64, squared: bool, weight: f64 },
}

/// Scalar value with first and second derivative.
struct Scalar3 {
    v: f64,
    d1: f64,
    d2: f64,
}

impl ConcaveTerm {
    fn scalar(&self, u: f64) -> Option<Scalar3> {
        match *self {
            ConcaveTerm::Log2OnePlus { weight: w, .. } => (u > -1.0).then(|| {
                let y = 1.0 + u;
                Scalar3 { v: w * u.ln_1p() / LN_2, d1: w / (y * LN_2), d2: -w / (y * y * LN_2) }
            }),
            ConcaveTerm::Log2 { weight: w, .. } => {
                (u > 0.0).then(|| Scalar3 { v: w * u.ln() / LN_2, d1: w / (u * LN_2), d2: -w / (u * u * LN_2) })
            }
            ConcaveTerm::NegLog2OnePlusRatio { numerator: b, weight: w, .. } => (u > 0.0).then(|| {
                // φ(u) = −w·[ln(u + b) − ln u]/ln2
                let ub = u + b;
                Scalar3 {
                    v: -w * (b / u).ln_1p() / LN_2,
                    d1: w * b / (u * ub * LN_2),
                    d2: -w * b * (2.0 * u + b) / (u * u * ub * ub * LN_2),
                }
            }),
            ConcaveTerm::Power { exponent: e, weight: w, .. } => (u > 0.0).then(|| {
                let pw = u.powf(e);
                Scalar3 { v: w * pw, d1: w * e * pw / u, d2: w * e * (e - 1.0) * pw / (u * u) }
            }),
            ConcaveTerm::Log2OnePlusSaturating { gain: c, offset: d, weight: w, .. } => {
                let y = u + d;
                let z = (1.0 + c) * u + d;
                (y > 0.0 && z > 0.0).then(|| Scalar3 {
                    v: w * (c * u / y).ln_1p() / LN_2,
                    d1: w * ((1.0 + c) / z - 1.0 / y) / LN_2,
                    d2: w * (1.0 / (y * y) - (1.0 + c) * (1.0 + c) / (z * z)) / LN_2,
                })
            }
            ConcaveTerm::NegDistanceSum { .. } => unreachable!("handled separately"),
        }
    }

    fn arg(&self) -> Option<&AffineExpr> {
        match self {
            ConcaveTerm::Log2OnePlus { arg, .. }
            | ConcaveTerm::Log2 { arg, .. }
            | ConcaveTerm::NegLog2OnePlusRatio { arg, .. }
            | ConcaveTerm::Power { arg, .. }
            | ConcaveTerm::Log2OnePlusSaturating { arg, .. } => Some(arg),
            ConcaveTerm::NegDistanceSum { .. } => None,
        }
    }

    /// Value, accumulating gradient and Hessian into the sparse buffers.
    fn eval(&self, x: &[f64], grad: Option<&mut Vec<(usize, f64)>>, hess: Option<&mut Vec<(usize, usize, f64)>>) -> Option<f64> {
        if let ConcaveTerm::NegDistanceSum { ix, iy, anchors, offset, squared, weight } = self {
            let (px, py) = (x[*ix], x[*iy]);
            let n = anchors.len() as f64;
            let mut s = *offset;
            let (mut gx, mut gy) = (0.0, 0.0);
            for a in anchors {
                let (dx, dy) = (px - a[0], py - a[1]);
                s += dx * dx + dy * dy;
                gx += 2.0 * dx;
                gy += 2.0 * dy;
            }
            let w = *weight;
            // ∇S = (gx, gy), ∇²S = 2n·I
            let (v, d1, d2) = if *squared { (s * s, 2.0 * s, 2.0) } else { (s, 1.0, 0.0) };
            if let Some(g) = grad {
                g.push((*ix, -w * d1 * gx));
                g.push((*iy, -w * d1 * gy));
            }
            if let Some(h) = hess {
                let diag = -w * d1 * 2.0 * n;
                h.push((*ix, *ix, diag - w * d2 * gx * gx));
                h.push((*iy, *iy, diag - w * d2 * gy * gy));
                h.push((*ix, *iy, -w * d2 * gx * gy));
                h.push((*iy, *ix, -w * d2 * gx * gy));
            }
            return Some(-w * v);
        }
        let arg = self.arg().expect("scalar term");
        let u = arg.eval(x);
        let s = self.scalar(u)?;
        if !s.v.is_finite() {
            return None;
        }
        if let Some(g) = grad {
            for &(i, c) in &arg.terms {
                g.push((i, s.d1 * c));
            }
        }
        if let Some(h) = hess {
            for &(i, ci) in &arg.terms {
                for &(j, cj) in &arg.terms {
                    h.push((i, j, s.d2 * ci * cj));
                }
            }
        }
        Some(s.v)
    }
}

/// `affine + Σ terms`, required to be ≥ 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConcaveExpr {
    pub affine: AffineExpr,
    pub terms: Vec<ConcaveTerm>,
}

impl ConcaveExpr {
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        let mut v = self.affine.eval(x);
        for t in &self.terms {
            v += t.eval(x, None, None)?;
        }
        Some(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// expr ≥ 0
    Affine(AffineExpr),
    /// ‖rows‖₂ ≤ bound
    Cone { rows: Vec<AffineExpr>, bound: AffineExpr },
    /// expr ≥ 0, expr concave
    Concave(ConcaveExpr),
}

impl Constraint {
    /// Signed slack: positive strictly inside. `None` outside a term domain.
    pub fn slack(&self, x: &[f64]) -> Option<f64> {
        match self {
            Constraint::Affine(e) => Some(e.eval(x)),
            Constraint::Cone { rows, bound } => {
                let norm = rows.iter().map(|r| r.eval(x).powi(2)).sum::<f64>().sqrt();
                Some(bound.eval(x) - norm)
            }
            Constraint::Concave(e) => e.eval(x),
        }
    }

    fn barrier_weight(&self) -> f64 {
        match self {
            Constraint::Cone { .. } => 2.0,
            _ => 1.0,
        }
    }
}

/// A linear-objective convex program (maximization).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvexProgram {
    pub names: Vec<String>,
    pub objective: AffineExpr,
    pub constraints: Vec<Constraint>,
    /// expr = 0
    pub equalities: Vec<AffineExpr>,
}

impl ConvexProgram {
    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn add(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    /// lo ≤ x[i] ≤ hi; pass infinities to skip a side.
    pub fn add_bounds(&mut self, i: usize, lo: f64, hi: f64) {
        if lo.is_finite() {
            self.add(Constraint::Affine(AffineExpr::var(i).shifted(-lo)));
        }
        if hi.is_finite() {
            self.add(Constraint::Affine(AffineExpr { terms: vec![(i, -1.0)], constant: hi }));
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Largest constraint violation (0 when feasible); infinite outside a
    /// term domain.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let ineq = self
            .constraints
            .iter()
            .map(|c| c.slack(x).map_or(f64::INFINITY, |s| (-s).max(0.0)))
            .fold(0.0, f64::max);
        let eq = self.equalities.iter().map(|e| e.eval(x).abs()).fold(0.0, f64::max);
        ineq.max(eq)
    }

    fn strictly_feasible(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|c| c.slack(x).is_some_and(|s| s > 0.0))
            && self.constraints.iter().all(|c| match c {
                Constraint::Cone { bound, .. } => bound.eval(x) > 0.0,
                _ => true,
            })
    }
}

impl AffineExpr {
    pub fn shifted(mut self, delta: f64) -> Self {
        self.constant += delta;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Largest constraint violation at `x`.
    pub max_violation: f64,
    /// Newton steps, phase I included.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Duality-gap target relative to max(|objective|, 1).
    pub tol: f64,
    pub feasibility_tol: f64,
    pub max_newton_steps: usize,
    pub barrier_growth: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-6, feasibility_tol: 1e-7, max_newton_steps: 600, barrier_growth: 12.0 }
    }
}

/// Barrier function value, gradient and Hessian at x for parameter t.
struct Barrier<'a> {
    prog: &'a ConvexProgram,
    n: usize,
}

impl Barrier<'_> {
    /// `t·(−cᵀx) − Σ wᵢ log sᵢ(x)`; None outside the domain.
    fn value(&self, x: &[f64], t: f64) -> Option<f64> {
        let mut v = -t * self.prog.objective.eval(x);
        for c in &self.prog.constraints {
            match c {
                Constraint::Cone { rows, bound } => {
                    let b = bound.eval(x);
                    let psi = b * b - rows.iter().map(|r| r.eval(x).powi(2)).sum::<f64>();
                    if b <= 0.0 || psi <= 0.0 {
                        return None;
                    }
                    v -= psi.ln();
                }
                _ => {
                    let s = c.slack(x)?;
                    if s <= 0.0 {
                        return None;
                    }
                    v -= s.ln();
                }
            }
        }
        v.is_finite().then_some(v)
    }

    fn derivatives(&self, x: &[f64], t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.n;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for &(i, c) in &self.prog.objective.terms {
            g[i] -= t * c;
        }
        let mut sg: Vec<(usize, f64)> = Vec::new();
        let mut sh: Vec<(usize, usize, f64)> = Vec::new();
        for c in &self.prog.constraints {
            sg.clear();
            sh.clear();
            // Value s with ∇s, ∇²s; barrier −log s.
            let s = match c {
                Constraint::Affine(e) => {
                    sg.extend(e.terms.iter().copied());
                    e.eval(x)
                }
                Constraint::Concave(e) => {
                    sg.extend(e.affine.terms.iter().copied());
                    let mut v = e.affine.eval(x);
                    for term in &e.terms {
                        v += term.eval(x, Some(&mut sg), Some(&mut sh))?;
                    }
                    v
                }
                Constraint::Cone { rows, bound } => {
                    // ψ = b² − Σ r², ∇ψ = 2b∇b − 2Σ r∇r, ∇²ψ = 2∇b∇bᵀ − 2Σ∇r∇rᵀ
                    let b = bound.eval(x);
                    if b <= 0.0 {
                        return None;
                    }
                    let mut psi = b * b;
                    for &(i, ci) in &bound.terms {
                        sg.push((i, 2.0 * b * ci));
                        for &(j, cj) in &bound.terms {
                            sh.push((i, j, 2.0 * ci * cj));
                        }
                    }
                    for r in rows {
                        let rv = r.eval(x);
                        psi -= rv * rv;
                        for &(i, ci) in &r.terms {
                            sg.push((i, -2.0 * rv * ci));
                            for &(j, cj) in &r.terms {
                                sh.push((i, j, -2.0 * ci * cj));
                            }
                        }
                    }
                    psi
                }
            };
            if s.is_nan() || s <= 0.0 || !s.is_finite() {
                return None;
            }
            // Dense ∇s for the rank-one term.
            let mut dense: Vec<(usize, f64)> = Vec::with_capacity(sg.len());
            for &(i, v) in &sg {
                match dense.iter_mut().find(|(j, _)| *j == i) {
                    Some(e) => e.1 += v,
                    None => dense.push((i, v)),
                }
            }
            let inv = 1.0 / s;
            for &(i, gi) in &dense {
                g[i] -= gi * inv;
                for &(j, gj) in &dense {
                    h[(i, j)] += gi * gj * inv * inv;
                }
            }
            for &(i, j, v) in &sh {
                h[(i, j)] -= v * inv;
            }
        }
        Some((g, h))
    }
}

/// Newton direction for `min φ` with `E dx = 0`.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>, eq: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = g.len();
    let p = eq.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += reg;
        }
        if p == 0 {
            if let Some(ch) = hr.clone().cholesky() {
                let d = ch.solve(&(-g));
                if d.iter().all(|v| v.is_finite()) {
                    return Some(d);
                }
            }
        } else {
            let mut kkt = DMatrix::zeros(n + p, n + p);
            kkt.view_mut((0, 0), (n, n)).copy_from(&hr);
            kkt.view_mut((n, 0), (p, n)).copy_from(eq);
            kkt.view_mut((0, n), (n, p)).copy_from(&eq.transpose());
            let mut rhs = DVector::zeros(n + p);
            rhs.rows_mut(0, n).copy_from(&(-g));
            if let Some(sol) = kkt.lu().solve(&rhs) {
                let d = sol.rows(0, n).into_owned();
                if d.iter().all(|v| v.is_finite()) {
                    return Some(d);
                }
            }
        }
        reg = if reg == 0.0 { 1e-12 * scale } else { reg * 100.0 };
    }
    None
}

fn equality_matrix(prog: &ConvexProgram, n: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(prog.equalities.len(), n);
    for (r, eq) in prog.equalities.iter().enumerate() {
        for &(i, c) in &eq.terms {
            e[(r, i)] += c;
        }
    }
    e
}

enum BarrierOutcome {
    Converged,
    StopRequested,
    MaxIterations,
    Failed,
}

/// Runs the barrier method from a strictly feasible `x`; `stop` is polled
/// after every Newton step.
fn barrier_method(
    prog: &ConvexProgram,
    x: &mut [f64],
    opts: &SolverOptions,
    steps: &mut usize,
    stop: &dyn Fn(&[f64]) -> bool,
) -> BarrierOutcome {
    let n = prog.num_vars();
    let barrier = Barrier { prog, n };
    let eq = equality_matrix(prog, n);
    let m: f64 = prog.constraints.iter().map(Constraint::barrier_weight).sum::<f64>().max(1.0);
    let mut t = 1.0;
    loop {
        // Centering.
        let mut stalled = false;
        loop {
            if *steps >= opts.max_newton_steps {
                return BarrierOutcome::MaxIterations;
            }
            let Some((g, h)) = barrier.derivatives(x, t) else {
                return BarrierOutcome::Failed;
            };
            let Some(dx) = newton_direction(&g, &h, &eq) else {
                return BarrierOutcome::Failed;
            };
            *steps += 1;
            let slope = g.dot(&dx);
            if -slope / 2.0 <= 1e-10 {
                break;
            }
            let Some(f0) = barrier.value(x, t) else {
                return BarrierOutcome::Failed;
            };
            let mut step = 1.0;
            let mut trial = vec![0.0; n];
            let mut accepted = false;
            for _ in 0..80 {
                for i in 0..n {
                    trial[i] = x[i] + step * dx[i];
                }
                if let Some(f1) = barrier.value(&trial, t) {
                    if f1 <= f0 + 0.25 * step * slope {
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                stalled = true;
                break;
            }
            x.copy_from_slice(&trial);
            if stop(x) {
                return BarrierOutcome::StopRequested;
            }
        }
        let obj = prog.objective.eval(x);
        if m / t <= opts.tol * obj.abs().max(1.0) {
            return BarrierOutcome::Converged;
        }
        if stalled {
            // Round-off floor reached; accept if the gap is within 100× target.
            return if m / t <= 100.0 * opts.tol * obj.abs().max(1.0) {
                BarrierOutcome::Converged
            } else {
                BarrierOutcome::Failed
            };
        }
        t *= opts.barrier_growth;
    }
}

/// Finds a strictly feasible point by maximizing −σ subject to the
/// constraints relaxed by σ.
fn phase_one(prog: &ConvexProgram, start: &[f64], opts: &SolverOptions, steps: &mut usize) -> Option<Vec<f64>> {
    let n = prog.num_vars();
    let sigma = n;
    let mut aux = ConvexProgram {
        names: prog.names.iter().cloned().chain(["phase1.sigma".to_string()]).collect(),
        objective: AffineExpr { terms: vec![(sigma, -1.0)], constant: 0.0 },
        constraints: Vec::with_capacity(prog.constraints.len() + 1),
        equalities: prog.equalities.clone(),
    };
    let mut worst: f64 = 0.0;
    for c in &prog.constraints {
        worst = worst.max(-c.slack(start)?);
        let relaxed = match c.clone() {
            Constraint::Affine(e) => Constraint::Affine(e.with_term(sigma, 1.0)),
            Constraint::Cone { rows, bound } => Constraint::Cone { rows, bound: bound.with_term(sigma, 1.0) },
            Constraint::Concave(mut e) => {
                e.affine.add_term(sigma, 1.0);
                Constraint::Concave(e)
            }
        };
        aux.add(relaxed);
    }
    let floor = 1.0 + worst;
    aux.add(Constraint::Affine(AffineExpr { terms: vec![(sigma, 1.0)], constant: floor }));
    // A box around the start keeps the relaxed problem bounded.
    for (i, &s) in start.iter().enumerate() {
        let radius = 1e3 * (1.0 + s.abs());
        aux.add(Constraint::Affine(AffineExpr { terms: vec![(i, 1.0)], constant: radius - s }));
        aux.add(Constraint::Affine(AffineExpr { terms: vec![(i, -1.0)], constant: radius + s }));
    }
    let mut x: Vec<f64> = start.iter().copied().chain([worst + 1.0 + 0.1 * worst]).collect();
    // Cones also need a positive right-hand side at the start.
    for c in &aux.constraints {
        if let Constraint::Cone { bound, .. } = c {
            let b = bound.eval(&x);
            if b <= 0.0 {
                x[sigma] += 1.0 - b;
            }
        }
    }
    if !aux.strictly_feasible(&x) {
        return None;
    }
    let stop = |x: &[f64]| x[sigma] < 0.0 && prog.strictly_feasible(&x[..n]);
    let phase_opts = SolverOptions { tol: 1e-9, ..*opts };
    barrier_method(&aux, &mut x, &phase_opts, steps, &stop);
    x.truncate(n);
    prog.strictly_feasible(&x).then_some(x)
}

/// Maximizes `program.objective` starting from `start`.
///
/// The start must satisfy the equalities and lie in every term's domain; it
/// need not be strictly feasible. The returned point is never worse than a
/// feasible start.
pub fn solve(program: &ConvexProgram, start: &[f64], opts: &SolverOptions) -> SolveReport {
    let n = program.num_vars();
    let mut steps = 0;
    let report = |status, x: Vec<f64>, steps| {
        let objective = program.objective_value(&x);
        let max_violation = program.max_violation(&x);
        SolveReport { status, x, objective, max_violation, iterations: steps }
    };
    if start.len() != n {
        return report(SolveStatus::NumericalFailure, vec![0.0; n], 0);
    }
    let start_ok = program.max_violation(start) <= opts.feasibility_tol;
    let start_obj = program.objective_value(start);

    let mut x = if program.strictly_feasible(start) {
        start.to_vec()
    } else {
        match phase_one(program, start, opts, &mut steps) {
            Some(x) => x,
            None => return report(SolveStatus::NumericalFailure, start.to_vec(), steps),
        }
    };
    let outcome = barrier_method(program, &mut x, opts, &mut steps, &|_| false);
    let status = match outcome {
        BarrierOutcome::Converged | BarrierOutcome::StopRequested => SolveStatus::Optimal,
        BarrierOutcome::MaxIterations => SolveStatus::MaxIterations,
        BarrierOutcome::Failed => SolveStatus::NumericalFailure,
    };
    if start_ok && program.objective_value(&x) < start_obj {
        return report(status, start.to_vec(), steps);
    }
    report(status, x, steps)
}

/// Exhaustive grid maximizer over a box; at most 4 variables.
pub fn grid_oracle(
    objective: impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    resolution: usize,
) -> Result<(Vec<f64>, f64)> {
    let dim = bounds.len();
    if dim == 0 || dim > 4 {
        return Err(Error::Dimension(dim));
    }
    let res = resolution.max(2);
    let total = res.pow(dim as u32);
    let mut best = (vec![0.0; dim], f64::NEG_INFINITY);
    let mut point = vec![0.0; dim];
    for idx in 0..total {
        let mut r = idx;
        for (d, &(lo, hi)) in bounds.iter().enumerate() {
            let i = r % res;
            r /= res;
            point[d] = lo + (hi - lo) * i as f64 / (res - 1) as f64;
        }
        let v = objective(&point);
        if v > best.1 {
            best = (point.clone(), v);
        }
    }
    Ok(best)
}

/// Central finite-difference Hessian.
pub fn finite_difference_hessian(f: impl Fn(&[f64]) -> f64, point: &[f64], step: f64) -> DMatrix<f64> {
    let n = point.len();
    let mut h = DMatrix::zeros(n, n);
    let mut x = point.to_vec();
    for i in 0..n {
        for j in i..n {
            let mut eval = |di: f64, dj: f64| {
                x[i] += di;
                x[j] += dj;
                let v = f(&x);
                x[i] -= di;
                x[j] -= dj;
                v
            };
            let v = if i == j {
                (eval(step, 0.0) - 2.0 * f(point) + eval(-step, 0.0)) / (step * step)
            } else {
                (eval(step, step) - eval(step, -step) - eval(-step, step) + eval(-step, -step)) / (4.0 * step * step)
            };
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// True iff every finite-difference Hessian eigenvalue is at least
/// −1e−6·(1 + |λ_max|).
pub fn hessian_psd_check(f: impl Fn(&[f64]) -> f64, point: &[f64], step: f64) -> bool {
    let h = finite_difference_hessian(f, point, step);
    let eig = SymmetricEigen::new(h).eigenvalues;
    let max_abs = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    eig.iter().all(|&l| l >= -1e-6 * (1.0 + max_abs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn lp_corner() {
        let mut p = ConvexProgram::default();
        let x = p.add_var("x");
        p.objective = AffineExpr::var(x);
        p.add_bounds(x, f64::NEG_INFINITY, 3.0);
        let r = solve(&p, &[0.0], &opts());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-5);
    }

    #[test]
    fn log_boundary() {
        // max t s.t. t ≤ log2(1 + u), 0 ≤ u ≤ 1
        let mut p = ConvexProgram::default();
        let t = p.add_var("t");
        let u = p.add_var("u");
        p.objective = AffineExpr::var(t);
        p.add_bounds(u, 0.0, 1.0);
        p.add(Constraint::Concave(ConcaveExpr {
            affine: AffineExpr { terms: vec![(t, -1.0)], constant: 0.0 },
            terms: vec![ConcaveTerm::Log2OnePlus { arg: AffineExpr::var(u), weight: 1.0 }],
        }));
        let r = solve(&p, &[0.0, 0.5], &opts());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-5, "{:?}", r);
        assert!((r.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn neg_log_ratio_bounds_zeta() {
        // max t s.t. t ≤ 2 − log2(1 + 1/v), v ≤ 1 → v = 1, t = 1.
        let mut p = ConvexProgram::default();
        let t = p.add_var("t");
        let v = p.add_var("v");
        p.objective = AffineExpr::var(t);
        p.add_bounds(v, 0.0, 1.0);
        p.add(Constraint::Concave(ConcaveExpr {
            affine: AffineExpr { terms: vec![(t, -1.0)], constant: 2.0 },
            terms: vec![ConcaveTerm::NegLog2OnePlusRatio { arg: AffineExpr::var(v), numerator: 1.0, weight: 1.0 }],
        }));
        let r = solve(&p, &[0.0, 0.5], &opts());
        assert!((r.x[0] - 1.0).abs() < 1e-5, "{:?}", r);
    }

    #[test]
    fn cone_projection() {
        // max x + y s.t. ‖(x, y)‖ ≤ 1 → (1/√2, 1/√2)
        let mut p = ConvexProgram::default();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.objective = AffineExpr::var(x).with_term(y, 1.0);
        p.add(Constraint::Cone { rows: vec![AffineExpr::var(x), AffineExpr::var(y)], bound: AffineExpr::constant(1.0) });
        let r = solve(&p, &[0.9, 0.0], &opts());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.x[0] - s).abs() < 1e-5 && (r.x[1] - s).abs() < 1e-5, "{:?}", r);
    }

    #[test]
    fn phase_one_from_infeasible_start() {
        // max x s.t. x ≤ 3, x ≥ 2, start at x = 10.
        let mut p = ConvexProgram::default();
        let x = p.add_var("x");
        p.objective = AffineExpr::var(x);
        p.add_bounds(x, 2.0, 3.0);
        let r = solve(&p, &[10.0], &opts());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-5);
        assert!(r.max_violation <= 1e-9);
    }

    #[test]
    fn infeasible_program_reports_failure() {
        let mut p = ConvexProgram::default();
        let x = p.add_var("x");
        p.objective = AffineExpr::var(x);
        p.add_bounds(x, 2.0, 1.0);
        let r = solve(&p, &[0.0], &opts());
        assert_eq!(r.status, SolveStatus::NumericalFailure);
    }

    #[test]
    fn equality_constraints_hold() {
        // max x + 2y s.t. x + y = 1, x, y ≥ 0 → y = 1
        let mut p = ConvexProgram::default();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.objective = AffineExpr::var(x).with_term(y, 2.0);
        p.add_bounds(x, 0.0, f64::INFINITY);
        p.add_bounds(y, 0.0, f64::INFINITY);
        p.equalities.push(AffineExpr::var(x).with_term(y, 1.0).shifted(-1.0));
        let r = solve(&p, &[0.5, 0.5], &opts());
        assert!((r.x[1] - 1.0).abs() < 1e-5, "{:?}", r);
        assert!((r.x[0] + r.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn power_and_distance_terms() {
        // max t s.t. t ≤ −(‖q − a‖² + 1)² + 5 → q = a, t = 4
        let mut p = ConvexProgram::default();
        let t = p.add_var("t");
        let qx = p.add_var("qx");
        let qy = p.add_var("qy");
        p.objective = AffineExpr::var(t);
        p.add(Constraint::Concave(ConcaveExpr {
            affine: AffineExpr { terms: vec![(t, -1.0)], constant: 5.0 },
            terms: vec![ConcaveTerm::NegDistanceSum {
                ix: qx,
                iy: qy,
                anchors: vec![[0.3, -0.2]],
                offset: 1.0,
                squared: true,
                weight: 1.0,
            }],
        }));
        let r = solve(&p, &[0.0, 1.0, 1.0], &opts());
        assert!((r.x[0] - 4.0).abs() < 1e-5, "{:?}", r);
        assert!((r.x[1] - 0.3).abs() < 1e-3 && (r.x[2] + 0.2).abs() < 1e-3);

        // max t s.t. t ≤ u^0.5, u ≤ 4
        let mut p = ConvexProgram::default();
        let t = p.add_var("t");
        let u = p.add_var("u");
        p.objective = AffineExpr::var(t);
        p.add_bounds(u, 0.0, 4.0);
        p.add(Constraint::Concave(ConcaveExpr {
            affine: AffineExpr { terms: vec![(t, -1.0)], constant: 0.0 },
            terms: vec![ConcaveTerm::Power { arg: AffineExpr::var(u), exponent: 0.5, weight: 1.0 }],
        }));
        let r = solve(&p, &[0.0, 1.0], &opts());
        assert!((r.x[0] - 2.0).abs() < 1e-5, "{:?}", r);
    }

    #[test]
    fn never_worse_than_feasible_start() {
        let mut p = ConvexProgram::default();
        let x = p.add_var("x");
        p.objective = AffineExpr::var(x);
        p.add_bounds(x, 0.0, 1.0);
        // Start exactly at the optimum (on the boundary).
        let r = solve(&p, &[1.0], &opts());
        assert!(r.objective >= 1.0 - 1e-12);
        // Re-solving from the result does not decrease.
        let r2 = solve(&p, &r.x, &opts());
        assert!(r2.objective >= r.objective);
    }

    #[test]
    fn deterministic() {
        let mut p = ConvexProgram::default();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.objective = AffineExpr::var(x).with_term(y, 0.3);
        p.add(Constraint::Cone { rows: vec![AffineExpr::var(x), AffineExpr::var(y)], bound: AffineExpr::constant(2.0) });
        let a = solve(&p, &[0.0, 0.0], &opts());
        let b = solve(&p, &[0.0, 0.0], &opts());
        assert_eq!(a, b);
    }

    #[test]
    fn grid_oracle_examples() {
        let (x, v) = grid_oracle(|x| -x[0] * x[0], &[(-1.0, 1.0)], 101).unwrap();
        assert!(x[0].abs() < 1e-12 && v.abs() < 1e-24);
        let (x, _) = grid_oracle(|x| x[0] + 2.0 * x[1], &[(0.0, 1.0), (-1.0, 3.0)], 11).unwrap();
        assert_eq!(x, vec![1.0, 3.0]);
        assert!(matches!(grid_oracle(|_| 0.0, &[(0.0, 1.0); 5], 3), Err(Error::Dimension(5))));
    }

    #[test]
    fn hessian_check_examples() {
        assert!(hessian_psd_check(|q| q[0] * q[0] + q[1] * q[1], &[0.3, -2.0], 1e-3));
        assert!(!hessian_psd_check(|q| -(q[0] * q[0] + q[1] * q[1]), &[0.3, -2.0], 1e-3));
        let h = finite_difference_hessian(|q| q[0] * q[0] + q[1] * q[1], &[1.0, 1.0], 1e-3);
        assert!((h[(0, 0)] - 2.0).abs() < 1e-6 && h[(0, 1)].abs() < 1e-6);
    }
}
