//! Acceptance suite: one pass/fail line per criterion; exits non-zero if
//! any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strider::run::{run_scenario, simulate, RunSummary};
use strider::scenario::{scale_to_plant, Perturbations, Plant, Scenario};
use strider::sweep::{expand, sweep, Axes, Grid};
use strider::formats::Source;
use strider_core::control::{NetworkConfig, NeuralApproximator, RegulatorMode};
use strider_core::dynamics::{
    forward_dynamics, impact_map, kinetic_energy, mass_matrix, total_energy, Anchors, ContactSet, GeneralizedState,
};
use strider_core::estimation::NoiseModel;
use strider_core::gait::*;
use strider_core::hybrid::{integrate, Integrator};
use strider_core::lateral::LateralConfig;
use strider_core::linalg::{dot, Cholesky, Mat};
use strider_core::model::{RobotModel, NQ, NU};
use strider_core::walker::Push;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn within_budget(start: Instant, budget_s: f64, detail: String) -> Outcome {
    let el = start.elapsed().as_secs_f64();
    check(
        el < budget_s,
        format!("{detail}, {el:.1} s"),
        format!("{detail}, but took {el:.1} s (budget {budget_s} s)"),
    )
}

fn random_model(rng: &mut ChaCha8Rng) -> RobotModel {
    let mut m = RobotModel::planar_biped();
    for l in &mut m.links {
        l.mass *= rng.random_range(0.5..1.5);
        l.inertia *= rng.random_range(0.5..1.5);
        l.com_along *= rng.random_range(0.7..1.3);
    }
    m
}

fn random_state(rng: &mut ChaCha8Rng) -> GeneralizedState {
    let mut q = [0.0; NQ];
    q[0] = rng.random_range(-1.0..1.0);
    q[1] = rng.random_range(0.6..0.9);
    for v in &mut q[2..] {
        *v = rng.random_range(-0.8..0.8);
    }
    GeneralizedState::new(q, std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
}

fn dynamics_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let sets = [ContactSet::LEFT, ContactSet::RIGHT, ContactSet::BOTH];
    let (mut worst_res, mut worst_ke) = (0.0f64, f64::NEG_INFINITY);
    for i in 0..10_000 {
        let model = random_model(&mut rng);
        let s = random_state(&mut rng);
        let m = mass_matrix(&model, &s.q).map_err(|e| e.to_string())?;
        if m.asymmetry() > 1e-12 * m.max_abs() || !Cholesky::new(&m).is_some_and(|c| c.min_pivot() > 0.0) {
            return Err(format!("mass matrix not symmetric positive definite at state {i}"));
        }
        let contacts = sets[i % 3];
        let u: [f64; NU] = std::array::from_fn(|_| rng.random_range(-50.0..50.0));
        let acc = forward_dynamics(&model, &s, &u, contacts, [0.0, 0.0]).map_err(|e| e.to_string())?;
        worst_res = worst_res.max(acc.constraint_residual);
        let (qp, _) = impact_map(&model, &s, contacts).map_err(|e| e.to_string())?;
        let gain = kinetic_energy(&model, &GeneralizedState::new(s.q, qp)) - kinetic_energy(&model, &s);
        worst_ke = worst_ke.max(gain);
    }
    // unforced flight, 1 s at dt = 1e-3
    let model = RobotModel::planar_biped();
    let mut worst_drift = 0.0f64;
    for _ in 0..3 {
        let mut s = random_state(&mut rng);
        s.qd.iter_mut().for_each(|v| *v *= 0.5);
        let e0 = total_energy(&model, &s);
        for _ in 0..1000 {
            s = integrate(&model, &s, &[0.0; NU], ContactSet::NONE, &Anchors::default(), [0.0, 0.0], 1e-3, Integrator::Rk4)
                .map_err(|e| e.to_string())?
                .0;
            worst_drift = worst_drift.max((total_energy(&model, &s) - e0).abs() / model.total_mass());
        }
    }
    let detail = format!(
        "10^4 states SPD, residual {worst_res:.1e} (<= 1e-8), impact KE gain {worst_ke:.1e} (<= 1e-10), drift {worst_drift:.1e} J/kg (< 1e-3)"
    );
    if worst_res > 1e-8 || worst_ke > 1e-10 || worst_drift >= 1e-3 {
        return Err(detail);
    }
    within_budget(start, 30.0, detail)
}

fn sine_samples() -> Vec<f64> {
    (0..200).map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / 199.0).collect()
}

fn sine_rmse(n: &NeuralApproximator, zs: &[f64]) -> f64 {
    let se: f64 = zs.iter().map(|z| (n.forward(&[*z]).0 - z.sin()).powi(2)).sum();
    (se / zs.len() as f64).sqrt()
}

fn network_mechanics() -> Outcome {
    let start = Instant::now();
    // linearity of the read-out in the output weights
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut n = NeuralApproximator::new(&NetworkConfig {
        hidden: 32,
        scales: vec![1.0, 1.0, 1.0],
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        n.set_weights(&w);
        let (y, h) = n.forward(&x);
        if y != dot(&w, &h) {
            return Err("read-out is not exactly the weighted feature sum".into());
        }
    }
    // one delta-rule step with hand values
    let mut hand = NeuralApproximator::new(&NetworkConfig {
        hidden: 4,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    hand.update(&[0.5; 4], 0.1, -1.0);
    if hand.weights().iter().any(|w| (w - 5e-6).abs() > 1e-20) {
        return Err(format!("delta rule gave {:?}, expected 5e-6 each", hand.weights()));
    }
    // online sine regression and the least-squares oracle on the same features
    let cfg = |seed| NetworkConfig {
        hidden: 1000,
        scales: vec![2.0],
        gamma: 2e-3,
        seed,
        init_std: 3.0,
    };
    let mut worst = 0.0f64;
    for seed in [4, 5, 6] {
        let mut zs = sine_samples();
        let mut net = NeuralApproximator::new(&cfg(seed)).map_err(|e| e.to_string())?;
        let mut order = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            if sine_rmse(&net, &zs) < 0.05 {
                break;
            }
            zs.shuffle(&mut order);
            for z in &zs {
                let (y, h) = net.forward(&[*z]);
                net.update(&h, z.sin() - y, -1.0);
            }
        }
        worst = worst.max(sine_rmse(&net, &zs));
    }
    let zs = sine_samples();
    let mut fit = NeuralApproximator::new(&cfg(4)).map_err(|e| e.to_string())?;
    let hs: Vec<Vec<f64>> = zs.iter().map(|z| fit.features(&[*z])).collect();
    let h = Mat::from_fn(zs.len(), fit.hidden(), |r, c| hs[r][c]);
    let mut a = h.transpose().mul(&h);
    for i in 0..fit.hidden() {
        a[(i, i)] += 1e-8;
    }
    let b = h.tr_mul_vec(&zs.iter().map(|z| z.sin()).collect::<Vec<_>>());
    let w = Cholesky::new(&a).ok_or("normal equations not positive definite")?.solve(&b);
    fit.set_weights(&w);
    let ls = sine_rmse(&fit, &zs);
    let detail = format!("linearity exact, hand step 5e-6, online RMSE {worst:.4} (< 0.05), LS RMSE {ls:.4} (< 0.02)");
    if worst >= 0.05 || ls >= 0.02 {
        return Err(detail);
    }
    within_budget(start, 60.0, detail)
}

fn base() -> &'static Path {
    Path::new(".")
}

fn run(sc: &Scenario) -> Result<RunSummary, String> {
    simulate(sc, base()).map_err(|e| e.to_string())
}

fn scenario(id: &str, mode: RegulatorMode) -> Scenario {
    Scenario {
        id: id.into(),
        mode,
        ..Scenario::default()
    }
}

fn plant_mass() -> f64 {
    RobotModel::planar_biped().total_mass()
}

fn nominal_walking() -> Outcome {
    let start = Instant::now();
    let s = run(&scenario("nominal", RegulatorMode::None))?;
    let mean = s.final_mean_speed.ok_or("no steps recorded")?;
    let rel = (mean - s.v_des).abs() / s.v_des;
    let detail = format!(
        "{} steps, fell = {}, mean {mean:.4} m/s vs 0.15 (gap {:.1}%)",
        s.steps,
        s.fell,
        100.0 * rel
    );
    if s.fell || s.steps < 20 || rel > 0.2 || rel < 0.01 {
        return Err(detail);
    }
    within_budget(start, 60.0, detail)
}

fn heavy(mode: RegulatorMode) -> Scenario {
    Scenario {
        perturbations: Perturbations {
            pelvis_mass_delta: 0.22 * plant_mass(),
            ..Default::default()
        },
        ..scenario("heavy", mode)
    }
}

fn mass_adaptation() -> (Outcome, Outcome) {
    let start = Instant::now();
    let pair = run(&heavy(RegulatorMode::Heuristic)).and_then(|h| run(&heavy(RegulatorMode::Adaptive)).map(|a| (h, a)));
    let (h, a) = match pair {
        Ok(p) => p,
        Err(e) => return (Err(e.clone()), Err(e)),
    };
    let c4 = (|| {
        let mean = a.final_mean_speed.ok_or("no adaptive steps")?;
        let (ra, rh) = (a.final_rms.unwrap_or(f64::INFINITY), h.final_rms.unwrap_or(f64::INFINITY));
        let detail = format!(
            "+{:.2} kg: adaptive mean {mean:.4} m/s, final RMS adaptive {ra:.2e} vs heuristic {rh:.2e}",
            0.22 * plant_mass()
        );
        if a.fell || (mean - a.v_des).abs() > 0.1 * a.v_des || !(ra < 0.5 * rh) {
            return Err(detail);
        }
        within_budget(start, 240.0, detail)
    })();
    let c5 = (|| {
        let k = a.step_at(a_activation()).ok_or("no step after activation")?;
        if k + 30 >= a.rms.len() {
            return Err(format!("only {} steps after activation", a.rms.len() - k));
        }
        let (r0, r30) = (a.rms[k], a.rms[k + 30]);
        check(
            r30 <= 0.7 * r0,
            format!("RMS at activation {r0:.2e}, 30 steps later {r30:.2e} (ratio {:.3} <= 0.7)", r30 / r0),
            format!("RMS at activation {r0:.2e}, 30 steps later {r30:.2e}"),
        )
    })();
    (c4, c5)
}

fn a_activation() -> f64 {
    Scenario::default().activation.x
}

fn push_recovery() -> Outcome {
    let m = plant_mass();
    let pushed = |mode, force: f64| Scenario {
        pushes: vec![Push {
            t_start: 30.0,
            duration: 0.1,
            force,
        }],
        ..scenario("push", mode)
    };
    let (fwd, back) = (scale_to_plant(400.0, m), -scale_to_plant(200.0, m));
    let mut notes = Vec::new();
    let mut adaptive_back_err = 0.0;
    for force in [fwd, back] {
        let a = run(&pushed(RegulatorMode::Adaptive, force))?;
        let steps = a.recovery.first().and_then(|r| r.steps);
        notes.push(format!("{force:+.2} N: adaptive back in band after {steps:?} steps"));
        if a.fell || !steps.is_some_and(|k| k <= 8) {
            return Err(notes.join("; "));
        }
        if force < 0.0 {
            adaptive_back_err = (a.final_mean_speed.unwrap_or(f64::NAN) - a.v_des).abs();
        }
    }
    let h = run(&pushed(RegulatorMode::Heuristic, back))?;
    let herr = (h.final_mean_speed.unwrap_or(f64::NAN) - h.v_des).abs();
    notes.push(format!(
        "backward push: heuristic fell = {}, steady error {herr:.2e} vs adaptive {adaptive_back_err:.2e}",
        h.fell
    ));
    check(h.fell || herr >= 2.0 * adaptive_back_err, notes.join("; "), notes.join("; "))
}

/// Mean speed of the heuristic's settled two-step cycle on the LIP toy,
/// from the fixed point of the affine step map.
fn lateral_cycle_mean(cfg: &LateralConfig) -> f64 {
    let w = (cfg.gravity / cfg.height).sqrt();
    let t = cfg.step_time;
    let (c, s) = ((w * t).cosh(), (w * t).sinh());
    let d = cfg.bias_force / cfg.mass / (w * w);
    let (b, l, kp, vd) = (cfg.half_width, cfg.lever, cfg.channel.kp, cfg.v_des);
    let a = [[-l * kp * (c - 1.0) / t, -l * kp * s / (w * t)], [w * s, c]];
    let e = |sigma: f64| [sigma * b + l * kp * vd - l * kp * d * (c - 1.0) / t, d * w * s];
    let mul = |m: [[f64; 2]; 2], v: [f64; 2]| [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
    let col = |j: usize| mul(a, [a[0][j], a[1][j]]);
    let a2 = [[col(0)[0], col(1)[0]], [col(0)[1], col(1)[1]]];
    let ae = mul(a, e(1.0));
    let rhs = [ae[0] + e(-1.0)[0], ae[1] + e(-1.0)[1]];
    let m = [[1.0 - a2[0][0], -a2[0][1]], [-a2[1][0], 1.0 - a2[1][1]]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let z = [(m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det, (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det];
    let speed = |z: [f64; 2]| ((c - 1.0) * z[0] + s / w * z[1] + d * (c - 1.0)) / t;
    let az = mul(a, z);
    0.5 * (speed(z) + speed([az[0] + e(1.0)[0], az[1] + e(1.0)[1]]))
}

fn lateral_channel() -> Outcome {
    let toy = |mode| Scenario {
        plant: Plant::LateralLip,
        ..scenario("lateral", mode)
    };
    let cfg = toy(RegulatorMode::Heuristic).lateral_config(base()).map_err(|e| e.to_string())?;
    let h = run(&toy(RegulatorMode::Heuristic))?;
    let a = run(&toy(RegulatorMode::Adaptive))?;
    let oracle = lateral_cycle_mean(&cfg);
    let n = h.v.len();
    let oracle_gap = (n - 20..n)
        .step_by(2)
        .map(|k| (0.5 * (h.v[k] + h.v[k + 1]) - oracle).abs())
        .fold(0.0f64, f64::max);
    let err = |s: &RunSummary| s.v[s.v.len() - 20..].iter().map(|v| (v - s.v_des).abs()).sum::<f64>() / 20.0;
    let (eh, ea) = (err(&h), err(&a));
    let detail = format!("heuristic vs closed-form cycle {oracle_gap:.1e} (<= 1e-9), mean |error| adaptive {ea:.2e} vs heuristic {eh:.2e}");
    check(!a.fell && oracle_gap <= 1e-9 && ea <= 0.5 * eh, detail.clone(), detail)
}

fn gait_checker() -> Outcome {
    let m = RobotModel::planar_biped();
    let g = synthesize_gait(&m, &SynthParams::for_speed(0.15)).map_err(|e| e.to_string())?;
    let b = GaitBounds::default();
    let clean = check_gait(&m, &g, &b);
    if !clean.all_satisfied() {
        let names: Vec<_> = clean.violations().map(|c| c.name.clone()).collect();
        return Err(format!("synthesized gait violates {names:?}"));
    }
    let flat = SynthParams {
        clearance: 0.0,
        liftoff_speed: 0.0,
        touchdown_speed: 0.0,
        fit_tolerance: 1e-2,
        ..SynthParams::for_speed(0.15)
    };
    let flat_gait = synthesize_gait(&m, &flat).map_err(|e| e.to_string())?;
    let cases = [
        ("torso offset", check_gait(&m, &g.with_pitch_offset(&m, 0.5), &b), TORSO_PITCH),
        ("zero clearance", check_gait(&m, &flat_gait, &b), SWING_CLEARANCE_MIN),
        (
            "zero impact-velocity bound",
            check_gait(&m, &g, &GaitBounds { touchdown_speed_max: 0.0, ..b }),
            IMPACT_VELOCITY,
        ),
        ("mu = 0", check_gait(&m, &g, &GaitBounds { friction: Some(0.0), ..b }), FRICTION_CONE),
    ];
    for (what, report, name) in &cases {
        if report.get(name).is_none_or(|c| c.satisfied) {
            return Err(format!("{what} not flagged as {name}"));
        }
    }
    Ok(format!("synthesized gait clean, {} injected violations named correctly", cases.len()))
}

fn read(p: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn tree(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, read(&p)?));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sc = Scenario {
        duration: 30.0,
        noise: Some(Source::Inline(NoiseModel {
            enabled: true,
            ..Default::default()
        })),
        ..heavy(RegulatorMode::Adaptive)
    };
    let (d1, d2) = (tmp.path().join("a"), tmp.path().join("b"));
    run_scenario(&sc, base(), &d1).map_err(|e| e.to_string())?;
    run_scenario(&sc, base(), &d2).map_err(|e| e.to_string())?;
    for f in ["trace.csv", "summary.json"] {
        if read(&d1.join(f))? != read(&d2.join(f))? {
            return Err(format!("{f} differs between identical runs"));
        }
    }
    let grid = Grid {
        template: Source::Inline(Scenario {
            id: "det".into(),
            duration: 25.0,
            ..Scenario::default()
        }),
        axes: Axes {
            mode: vec![RegulatorMode::Heuristic, RegulatorMode::Adaptive],
            mass_delta_pct: vec![-15.0, 0.0, 22.0],
            ..Default::default()
        },
        ..Default::default()
    };
    let scenarios = expand(&grid, base()).map_err(|e| e.to_string())?;
    let (p, s) = (tmp.path().join("par"), tmp.path().join("seq"));
    sweep(&scenarios, base(), Some(&p), true).map_err(|e| e.to_string())?;
    sweep(&scenarios, base(), Some(&s), false).map_err(|e| e.to_string())?;
    let (tp, ts) = (tree(&p)?, tree(&s)?);
    check(
        tp == ts,
        format!("repeat run identical; parallel and sequential sweeps identical over {} files", tp.len()),
        "parallel sweep output differs from sequential".into(),
    )
}

fn main() -> ExitCode {
    let (c4, c5) = mass_adaptation();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 dynamics invariants", dynamics_invariants()),
        ("2 network mechanics", network_mechanics()),
        ("3 nominal walking", nominal_walking()),
        ("4 mass adaptation", c4),
        ("5 RMS decay", c5),
        ("6 push recovery", push_recovery()),
        ("7 lateral channel", lateral_channel()),
        ("8 gait checker", gait_checker()),
        ("9 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{}/{} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
