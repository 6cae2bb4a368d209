//! Dense reference implementations of the solver updates and objective.

use narmsr::degradation::{make_gaussian_kernel, DegradationOp};
use narmsr::narm::{build_narm_matrix, NarmParams};
use narmsr::solver::{Solver, SolverConfig, SolverMode, StageState, StepSizes};
use narmsr::ImageGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

/// Random problem: operator, weights, and a state with a genuine NARM `S`.
pub struct Instance {
    pub solver: Solver,
    pub state: StageState,
    pub y: ImageGrid,
    pub a: Dense,
    pub s: Dense,
}

pub fn random_op(rng: &mut ChaCha8Rng, scale: usize) -> DegradationOp {
    match rng.gen_range(0..3) {
        0 => DegradationOp::bicubic(scale).unwrap(),
        1 => DegradationOp::direct(scale).unwrap(),
        _ => DegradationOp::blur_direct(scale, make_gaussian_kernel(rng.gen_range(0.4..1.6), 7).unwrap()).unwrap(),
    }
}

pub fn instance(rng: &mut ChaCha8Rng, n: usize, weights: Option<(f64, f64, f64)>) -> Instance {
    let op = random_op(rng, 2);
    let mut cfg = SolverConfig::default();
    let (mu, gamma, eta) = weights.unwrap_or_else(|| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)));
    cfg.mu = mu;
    cfg.gamma_narm = gamma;
    cfg.eta = eta;
    cfg.narm = NarmParams {
        patch_size: 3,
        neighbors: 4,
        search_window: 5,
        ..NarmParams::default()
    };
    let solver = Solver::new(op.clone(), cfg.clone()).unwrap();
    let x = rand_image(rng, n, n);
    let s = build_narm_matrix(&rand_image(rng, n, n), &cfg.narm).unwrap();
    let lx = solver.lipschitz_x(&s, (n, n), 100).unwrap();
    let le = solver.lipschitz_e((n, n), 100).unwrap();
    let l = lx.max(le);
    let steps = StepSizes {
        delta: 0.8 / l,
        delta_prime: 0.8 / l,
        lipschitz: l,
    };
    let e = rand_image(rng, n, n).scale(0.2);
    let v = rand_image(rng, n, n);
    let y = op.apply(&rand_image(rng, n, n)).unwrap();
    let a = materialize(n, n, |z| op.apply(z).unwrap());
    let s_dense = s.to_dense();
    let state = StageState::from_parts(x, v, e, s, steps).unwrap();
    Instance {
        solver,
        state,
        y,
        a,
        s: s_dense,
    }
}

pub fn sq(v: &[f64]) -> f64 {
    dot(v, v)
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

pub fn addv(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + q).collect()
}

/// `||y - A x||^2 + mu ||y - A(x + e)||^2 + gamma ||S x - (x + e)||^2 + eta ||x - v||^2`
/// from dense matrices.
pub fn dense_objective(inst: &Instance, x: &[f64], e: &[f64]) -> f64 {
    let cfg = inst.solver.config();
    let y = inst.y.data();
    let xe = addv(x, e);
    sq(&sub(y, &matvec(&inst.a, x)))
        + cfg.mu * sq(&sub(y, &matvec(&inst.a, &xe)))
        + cfg.gamma_narm * sq(&sub(&matvec(&inst.s, x), &xe))
        + cfg.eta * sq(&sub(x, inst.state.v.data()))
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|k| {
            let mut p = at.to_vec();
            let mut m = at.to_vec();
            p[k] += h;
            m[k] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// Worst relative error of the update brackets against half the central
/// finite-difference gradients, over `count` random 8x8 instances.
pub fn gradient_check(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let inst = instance(&mut rng, 8, None);
        let (x, e) = (inst.state.x.data().to_vec(), inst.state.e.data().to_vec());
        let fd_e = central_difference(|z| dense_objective(&inst, &x, z), &e, 1e-5);
        let fd_x = central_difference(|z| dense_objective(&inst, z, &e), &x, 1e-5);
        let half = |g: Vec<f64>| g.into_iter().map(|v| v / 2.0).collect::<Vec<f64>>();
        let ge = inst.solver.gradient_e(&inst.state, &inst.y).unwrap();
        let gx = inst.solver.gradient_x(&inst.state, &inst.y).unwrap();
        worst = worst.max(rel_err(ge.data(), &half(fd_e)));
        worst = worst.max(rel_err(gx.data(), &half(fd_x)));
    }
    worst
}

/// Number of objective increases across e- and x-updates.
pub fn descent_violations(seed: u64, count: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..count {
        let inst = instance(&mut rng, 8, None);
        let (solver, y) = (&inst.solver, &inst.y);
        let mut st = inst.state.clone();
        let f0 = solver.objective_value(&st, y).unwrap();
        st.e = solver.update_e(&st, y).unwrap();
        let f1 = solver.objective_value(&st, y).unwrap();
        st.x = solver.update_x(&st, y).unwrap();
        let f2 = solver.objective_value(&st, y).unwrap();
        let tol = 1e-12 * f0.abs().max(1.0);
        bad += usize::from(f1 > f0 + tol) + usize::from(f2 > f1 + tol);
    }
    bad
}

/// Minimiser of the x sub-problem via its normal equations
/// `[(1 + mu) A^T A + gamma (I - S)^T (I - S) + eta I] x = A^T y + mu A^T (y - A e) - gamma (I - S)^T e + eta v`.
pub fn exact_x(inst: &Instance) -> Vec<f64> {
    let cfg = inst.solver.config();
    let n = inst.s.len();
    let at = transpose(&inst.a);
    let ata = matmul(&at, &inst.a);
    let ims = add(&eye(n), &inst.s, -1.0);
    let imst = transpose(&ims);
    let w = add(
        &add(&scale(&ata, 1.0 + cfg.mu), &matmul(&imst, &ims), cfg.gamma_narm),
        &eye(n),
        cfg.eta,
    );
    let (y, e, v) = (inst.y.data(), inst.state.e.data(), inst.state.v.data());
    let ae = matvec(&inst.a, e);
    let b: Vec<f64> = (0..n)
        .map(|i| {
            matvec(&at, y)[i] + cfg.mu * matvec(&at, &sub(y, &ae))[i] - cfg.gamma_narm * matvec(&imst, e)[i]
                + cfg.eta * v[i]
        })
        .collect();
    matvec(&inverse(&w), &b)
}

/// `(objective after exact solve <= after one step, relative error of the
/// 200-step iterate)` on a 12x12 instance.
pub fn exact_solver_check(seed: u64) -> (bool, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = instance(&mut rng, 12, None);
    let star = exact_x(&inst);
    let one = inst.solver.update_x(&inst.state, &inst.y).unwrap();
    let e = inst.state.e.data();
    let ok = dense_objective(&inst, &star, e) <= dense_objective(&inst, one.data(), e) + 1e-12;
    let mut cfg = inst.solver.config().clone();
    cfg.inner_x_steps = 200;
    let long = Solver::new(inst.solver.op().clone(), cfg).unwrap();
    let x200 = long.update_x(&inst.state, &inst.y).unwrap();
    (ok, rel_err(x200.data(), &star))
}

/// Max per-stage difference between MoG at mu = gamma = 0 and DPDNN.
pub fn mode_equivalence_gap(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let op = random_op(&mut rng, 2);
        let mut cfg = SolverConfig::default();
        cfg.mu = 0.0;
        cfg.gamma_narm = 0.0;
        cfg.eta = rng.gen_range(0.1..1.0);
        cfg.denoiser.kind = ["identity", "gaussian", "nlm"][rng.gen_range(0..3)].into();
        cfg.denoiser.strength = rng.gen_range(0.05..0.8);
        let mog = Solver::new(op.clone(), cfg.clone()).unwrap();
        cfg.mode = SolverMode::Dpdnn;
        let dp = Solver::new(op.clone(), cfg).unwrap();
        let y = op.apply(&rand_image(&mut rng, 12, 12)).unwrap();
        let (mut a, mut b) = (mog.init_state(&y).unwrap(), dp.init_state(&y).unwrap());
        assert_eq!(a.steps, b.steps);
        for _ in 0..4 {
            a = mog.run_stage(&a, &y).unwrap();
            b = dp.run_stage(&b, &y).unwrap();
            worst = worst.max(a.x.sub(&b.x).max_abs());
        }
    }
    worst
}

