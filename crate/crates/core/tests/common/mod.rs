//! Sampling checks shared by the integration suites and the acceptance report.
#![allow(dead_code)]

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyris_core::assoc::{round_association, solve_association_lp};
use skyris_core::channel::{aoa_cosine, cascaded_gain, coherent_phases, distance, eve_gain_power, steering_channel, EveModel};
use skyris_core::convex::{grid_oracle, hessian_psd_check};
use skyris_core::power::{linearize_eve_rate, optimize_power, LinkModel, PowerProblem, SlotLinks};
use skyris_core::scenario::{default_paper_scenario, Point, ScenarioConfig, Tolerances};
use skyris_core::scheme1::{aligned_phases, concave_tangent_h, linearize_rate_slack, product_lower_bound_g, product_upper_bound_f, rate_in_slack};
use skyris_core::scheme2::{secrecy_in_slacks, secrecy_lower_bound_joint, JointReference};

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn point(rng: &mut ChaCha8Rng, half: f64) -> Point {
    [rng.gen_range(-half..half), rng.gen_range(-half..half)]
}

fn d2(q: Point, w: Point, h: f64) -> f64 {
    distance(q, w, h).powi(2)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Runs `samples` draws of a bound check; `draw` returns (bound holds, tangent holds).
fn sample(name: &str, samples: usize, seed: u64, mut draw: impl FnMut(&mut ChaCha8Rng) -> (bool, bool, String)) -> Check {
    let mut rng = rng(seed);
    for i in 0..samples {
        let (bound, tangent, detail) = draw(&mut rng);
        if !bound {
            return Err(format!("{name}: bound violated at sample {i}: {detail}"));
        }
        if !tangent {
            return Err(format!("{name}: not tight at the expansion point, sample {i}: {detail}"));
        }
    }
    Ok(format!("{name}: {samples} samples"))
}

pub fn eve_rate_upper_bound(samples: usize, seed: u64) -> Check {
    sample("eve rate tangent", samples, seed, |rng| {
        let noise = log_uniform(rng, 1e-16, 1e-10);
        let gain = noise * log_uniform(rng, 1e-12, 1e4);
        let (p_ref, p) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        let c = |p: f64| (p * gain / noise).ln_1p() / std::f64::consts::LN_2;
        let t = linearize_eve_rate(p_ref, gain, noise);
        let bound = t.eval(p) >= c(p) - 1e-12 * c(p).abs();
        let tangent = (t.eval(p_ref) - c(p_ref)).abs() <= 1e-9 * c(p_ref).abs().max(1e-300);
        (bound, tangent, format!("p_ref={p_ref} p={p} snr={}", gain / noise))
    })
}

pub fn rate_slack_lower_bound(samples: usize, seed: u64) -> Check {
    sample("rate slack tangent", samples, seed, |rng| {
        let b = log_uniform(rng, 1e-12, 1e3);
        let (z_ref, z) = (log_uniform(rng, 1.0, 1e6), log_uniform(rng, 1.0, 1e6));
        let t = linearize_rate_slack(z_ref, b);
        let r = rate_in_slack(z, b);
        let bound = t.eval(z) <= r + 1e-12 * r.abs();
        let tangent = close(t.eval(z_ref), rate_in_slack(z_ref, b), 1e-9);
        (bound, tangent, format!("b={b} z_ref={z_ref} z={z}"))
    })
}

pub fn product_majorant(samples: usize, seed: u64) -> Check {
    sample("distance product majorant", samples, seed, |rng| {
        let h = rng.gen_range(30.0..200.0);
        let (q, r, w_k, w_b) = (point(rng, 600.0), point(rng, 600.0), point(rng, 600.0), point(rng, 600.0));
        let exact = d2(q, w_k, h) * d2(q, w_b, h);
        let f = product_upper_bound_f(q, r, w_k, w_b, h);
        let bound = f >= exact * (1.0 - 1e-12);
        let tangent = close(product_upper_bound_f(r, r, w_k, w_b, h), d2(r, w_k, h) * d2(r, w_b, h), 1e-9);
        (bound, tangent, format!("q={q:?} r={r:?}"))
    })
}

pub fn product_minorant(samples: usize, seed: u64) -> Check {
    sample("distance product minorant", samples, seed, |rng| {
        let h = rng.gen_range(30.0..200.0);
        let (q, r, w_k, w_e) = (point(rng, 600.0), point(rng, 600.0), point(rng, 600.0), point(rng, 600.0));
        let exact = d2(q, w_k, h) * d2(q, w_e, h);
        let g = product_lower_bound_g(q, r, w_k, w_e, h);
        let bound = g <= exact * (1.0 + 1e-12);
        let tangent = close(product_lower_bound_g(r, r, w_k, w_e, h), d2(r, w_k, h) * d2(r, w_e, h), 1e-9);
        (bound, tangent, format!("q={q:?} r={r:?}"))
    })
}

pub fn slack_power_majorant(samples: usize, seed: u64) -> Check {
    sample("slack power tangent", samples, seed, |rng| {
        let alpha = rng.gen_range(2.0..4.0);
        let (v, v_ref) = (log_uniform(rng, 1e-3, 1e6), log_uniform(rng, 1e-3, 1e6));
        let exact = v.powf(2.0 / alpha);
        let bound = concave_tangent_h(v, v_ref, alpha) >= exact * (1.0 - 1e-12);
        let tangent = close(concave_tangent_h(v_ref, v_ref, alpha), v_ref.powf(2.0 / alpha), 1e-9);
        (bound, tangent, format!("alpha={alpha} v={v} v_ref={v_ref}"))
    })
}

fn random_config(rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let mut cfg = default_paper_scenario();
    cfg.altitude_m = rng.gen_range(30.0..200.0);
    cfg.ris_elements = rng.gen_range(2..=16);
    cfg.pathloss_exponent = rng.gen_range(2.0..3.0);
    cfg.bs = point(rng, 500.0);
    cfg.eve = point(rng, 500.0);
    cfg
}

pub fn eve_gain_bound(samples: usize, seed: u64) -> Check {
    sample("eve gain coherent bound", samples, seed, |rng| {
        let cfg = random_config(rng);
        let (q, w_k) = (point(rng, 600.0), point(rng, 600.0));
        let theta: Vec<f64> = (0..cfg.ris_elements).map(|_| rng.gen_range(0.0..TAU)).collect();
        let bound_value = eve_gain_power(EveModel::Bound, q, w_k, &cfg, &theta);
        let exact = eve_gain_power(EveModel::Exact, q, w_k, &cfg, &theta);
        let h = cfg.altitude_m;
        let toward_eve = coherent_phases(aoa_cosine(q, cfg.eve, h), aoa_cosine(q, w_k, h), cfg.ris_elements, cfg.spacing_ratio);
        let aligned = eve_gain_power(EveModel::Exact, q, w_k, &cfg, &toward_eve);
        (exact <= bound_value * (1.0 + 1e-12), close(aligned, bound_value, 1e-9), format!("M={}", cfg.ris_elements))
    })
}

pub fn joint_secrecy_lower_bound(samples: usize, seed: u64) -> Check {
    sample("joint secrecy minorant", samples, seed, |rng| {
        let m2 = rng.gen_range(4.0..256.0);
        let kappa = log_uniform(rng, 1e-12, 1.0);
        let r = JointReference {
            z_ref: log_uniform(rng, 1.0, 1e4),
            v_ref: log_uniform(rng, 1.0, 1e4),
            g_e_ref: rng.gen_range(0.0..m2),
            kappa,
        };
        let (z, v) = (log_uniform(rng, 1.0, 1e4), log_uniform(rng, 1.0, 1e4));
        let (g_b, g_e) = (rng.gen_range(0.0..m2), rng.gen_range(0.0..m2));
        let exact = secrecy_in_slacks(kappa, z, v, g_b, g_e);
        let bound = secrecy_lower_bound_joint(&r, z, v, g_b, g_e) <= exact + 1e-12 * exact.abs().max(kappa * m2);
        let at_ref = secrecy_in_slacks(kappa, r.z_ref, r.v_ref, g_b, r.g_e_ref);
        let tangent = (secrecy_lower_bound_joint(&r, r.z_ref, r.v_ref, g_b, r.g_e_ref) - at_ref).abs() <= 1e-9 * at_ref.abs().max(1e-300);
        (bound, tangent, format!("{r:?} z={z} v={v}"))
    })
}

pub fn bound_suite(samples: usize, seed: u64) -> Vec<Check> {
    vec![
        eve_rate_upper_bound(samples, seed),
        rate_slack_lower_bound(samples, seed + 1),
        product_majorant(samples, seed + 2),
        product_minorant(samples, seed + 3),
        slack_power_majorant(samples, seed + 4),
        eve_gain_bound(samples, seed + 5),
    ]
}

pub fn distance_hessians(points: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for i in 0..points {
        let h = rng.gen_range(30.0..200.0);
        let (w, q) = (point(&mut rng, 600.0), point(&mut rng, 600.0));
        let sq = |x: &[f64]| (x[0] - w[0]).powi(2) + (x[1] - w[1]).powi(2) + h * h;
        let scale = sq(&q);
        if !hessian_psd_check(|x| sq(x) / scale, &q, 1e-2) {
            return Err(format!("d² Hessian not PSD at point {i}"));
        }
        if !hessian_psd_check(|x| (sq(x) / scale).powi(2), &q, 1e-2) {
            return Err(format!("d⁴ Hessian not PSD at point {i}"));
        }
    }
    Ok(format!("d², d⁴ Hessians PSD at {points} points"))
}

pub fn rate_slack_midpoint_convexity(points: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for i in 0..points {
        let b = log_uniform(&mut rng, 1e-12, 1e3);
        let (a, c) = (log_uniform(&mut rng, 1e-3, 1e6), log_uniform(&mut rng, 1e-3, 1e6));
        let mid = rate_in_slack(0.5 * (a + c), b);
        let chord = 0.5 * (rate_in_slack(a, b) + rate_in_slack(c, b));
        if mid > chord * (1.0 + 1e-12) {
            return Err(format!("log2(1+B/z) not midpoint convex at point {i}: b={b} z=({a}, {c})"));
        }
    }
    Ok(format!("log2(1+B/z) midpoint convex at {points} points"))
}

pub fn lemma_suite(points: usize, seed: u64) -> Vec<Check> {
    vec![distance_hessians(points, seed), rate_slack_midpoint_convexity(points, seed + 1)]
}

pub fn phase_optimality(geometries: usize, theta_samples: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for i in 0..geometries {
        let cfg = random_config(&mut rng);
        let (q, w_k) = (point(&mut rng, 600.0), point(&mut rng, 600.0));
        let rx = steering_channel(q, cfg.bs, &cfg);
        let tx = steering_channel(q, w_k, &cfg);
        let maximum = rx.amplitude * tx.amplitude * cfg.ris_elements as f64;
        let aligned = cascaded_gain(&rx, &aligned_phases(q, w_k, &cfg), &tx).map_err(|e| e.to_string())?.norm();
        if !close(aligned, maximum, 1e-9) {
            return Err(format!("geometry {i}: aligned gain {aligned:e} vs maximum {maximum:e}"));
        }
        for _ in 0..theta_samples {
            let theta: Vec<f64> = (0..cfg.ris_elements).map(|_| rng.gen_range(0.0..TAU)).collect();
            let g = cascaded_gain(&rx, &theta, &tx).map_err(|e| e.to_string())?.norm();
            if g > maximum * (1.0 + 1e-12) {
                return Err(format!("geometry {i}: random phases reach {g:e} > {maximum:e}"));
            }
        }
    }
    Ok(format!("{geometries} geometries, {theta_samples} random schedules each"))
}

fn enumerate_best(rates: &[Vec<f64>]) -> f64 {
    let (k, n) = (rates.len(), rates[0].len());
    let mut best = 0.0f64;
    let mut choice = vec![0usize; n];
    loop {
        let zeta = (0..k)
            .map(|u| (0..n).filter(|&s| choice[s] == u + 1).map(|s| rates[u][s]).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min);
        best = best.max(zeta);
        let mut s = 0;
        while s < n {
            choice[s] += 1;
            if choice[s] <= k {
                break;
            }
            choice[s] = 0;
            s += 1;
        }
        if s == n {
            return best;
        }
    }
}

/// Association LP plus rounding against exhaustive enumeration on every
/// small instance whose LP optimum is integral.
pub fn association_enumeration(instances: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut integral = 0;
    for i in 0..instances {
        let (k, n) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let rates: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.gen_range(0..4) as f64).collect()).collect();
        let lp = solve_association_lp(&rates).map_err(|e| e.to_string())?;
        let best = enumerate_best(&rates);
        if lp.zeta < best - 1e-7 {
            return Err(format!("instance {i}: LP {} below enumeration {best}", lp.zeta));
        }
        if !lp.assoc.iter().flatten().all(|&a| a < 1e-6 || a > 1.0 - 1e-6) {
            continue;
        }
        integral += 1;
        let rounded = round_association(&lp.assoc);
        let zeta = (0..k)
            .map(|u| (0..n).map(|s| rounded[u][s] * rates[u][s]).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min);
        if (zeta - best).abs() > 1e-7 {
            return Err(format!("instance {i}: rounded {zeta} vs enumeration {best} for {rates:?}"));
        }
    }
    if integral == 0 {
        return Err("no instance had an integral LP optimum".into());
    }
    Ok(format!("{integral} of {instances} instances integral and matched"))
}

fn direct(snr: f64) -> LinkModel {
    LinkModel::Direct { snr_per_watt: snr }
}

fn tolerances() -> Tolerances {
    default_paper_scenario().tolerances
}

/// One user, one slot: the power block against a grid over [0, P_k].
pub fn power_grid_oracle(instances: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut worst = 1.0f64;
    for i in 0..instances {
        let s_b = log_uniform(&mut rng, 0.1, 1e3);
        let s_e = s_b * rng.gen_range(0.0..0.9);
        let p_max = rng.gen_range(0.1..2.0);
        let p0 = rng.gen_range(0.05..2.0);
        let problem = PowerProblem {
            assoc: vec![vec![1.0]],
            links: vec![vec![SlotLinks { bs: direct(s_b), eve: direct(s_e) }]],
            max_power_w: vec![p_max],
            fixed_power_w: p0,
        };
        let out = optimize_power(&problem, &[vec![p_max]], &tolerances());
        let objective = |x: &[f64]| problem.gamma(&[vec![x[0]]]);
        let (_, grid) = grid_oracle(objective, &[(0.0, p_max)], 10_000).map_err(|e| e.to_string())?;
        let ratio = out.gamma / grid;
        worst = worst.min(ratio);
        if ratio < 0.98 {
            return Err(format!("instance {i}: Γ {:e} vs grid {grid:e}", out.gamma));
        }
    }
    Ok(format!("{instances} instances, worst ratio to grid {worst:.6}"))
}

/// The final parametric value of every Dinkelbach run is within 1e−6 of the
/// total power.
pub fn dinkelbach_residual(instances: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for i in 0..instances {
        let (k, n) = (rng.gen_range(1..=3), rng.gen_range(1..=4));
        let mut assoc = vec![vec![0.0; n]; k];
        for s in 0..n {
            assoc[rng.gen_range(0..k)][s] = 1.0;
        }
        let links = (0..k)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let s_b = log_uniform(&mut rng, 0.1, 1e3);
                        SlotLinks { bs: direct(s_b), eve: direct(s_b * rng.gen_range(0.0..0.9)) }
                    })
                    .collect()
            })
            .collect();
        let max_power_w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..2.0)).collect();
        let problem = PowerProblem { assoc, links, max_power_w: max_power_w.clone(), fixed_power_w: rng.gen_range(0.05..2.0) };
        let p_init: Vec<Vec<f64>> = (0..k).map(|u| vec![max_power_w[u]; n]).collect();
        let out = optimize_power(&problem, &p_init, &tolerances());
        let f = *out.dinkelbach_trace.last().unwrap_or(&0.0);
        let denom = problem.total_power(&out.power);
        if f.abs() > 1e-6 * denom {
            return Err(format!("instance {i}: |F| = {:e} > 1e-6·{denom}, trace {:?}", f.abs(), out.dinkelbach_trace));
        }
    }
    Ok(format!("{instances} Dinkelbach runs terminated with |F| ≤ 1e-6·(Σp+P0)"))
}
