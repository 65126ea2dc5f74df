//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use dgtnash::engine::{DgtState, EstimateMatrix, Initialization, StopCriteria};
use dgtnash::game::{
    build_cournot, random_monotone_game, AffineObjective, ClusterGameSpec, CournotParams,
    RandomGameOptions,
};
use dgtnash::oracle::{solve_ne_descent, solve_ne_linear};
use dgtnash::simnet::spawn_network;
use dgtnash::stepsize::{alpha_star, gain_constants, max_step, phi_matrix, spectral_radius_3x3};
use dgtnash::topology::{compose_adjacency, generators, metropolis_weights, CompositeMixing, GraphKind, GraphTopology};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PUBLISHED_NE: [f64; 5] = [3.9478, 9.3400, 14.7321, 20.1243, 25.5165];
const CONSERVATION_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cournot() -> (ClusterGameSpec, CompositeMixing) {
    let inter = GraphTopology::uniform_complete(5).unwrap();
    let game = build_cournot(CournotParams::default(), &inter).unwrap();
    let intra = (0..5).map(|_| GraphKind::Ring.metropolis(20).unwrap()).collect();
    (game, compose_adjacency(inter, intra).unwrap())
}

fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> GraphTopology {
    let extra = rng.random_range(0.0..0.6);
    metropolis_weights(n, generators::random_connected(n, extra, rng)).unwrap()
}

fn random_mixing(sizes: &[usize], rng: &mut ChaCha8Rng) -> CompositeMixing {
    let inter = random_graph(sizes.len(), rng);
    let intra = sizes.iter().map(|&n| random_graph(n, rng)).collect();
    compose_adjacency(inter, intra).unwrap()
}

/// Tracks the worst conservation residual seen over every step of every run.
#[derive(Default)]
struct Conservation {
    worst: f64,
    checks: usize,
}

impl Conservation {
    fn observe(&mut self, state: &DgtState) {
        self.worst = self.worst.max(state.conservation_residual());
        self.checks += 1;
    }
}

struct CournotRun {
    alpha: f64,
    residuals: Vec<f64>,
    rate: Option<f64>,
    fit_r2: Option<f64>,
}

fn criterion_1(cons: &mut Conservation) -> (Outcome, Option<CournotRun>) {
    let (game, mixing) = cournot();
    let oracle = solve_ne_linear(&game).unwrap();
    let ne = oracle.point.clone();
    let alpha = 0.02;
    let mut state = DgtState::init(&game, &mixing, Initialization::seeded(1), Some(ne.clone())).unwrap();
    let started = Instant::now();
    let mut steps = 0;
    cons.observe(&state);
    while state.trace().last().unwrap().ne_residual > 1e-6 && steps < 100_000 {
        if let Err(e) = state.step_compact(alpha) {
            return (Err(format!("run failed: {e}")), None);
        }
        cons.observe(&state);
        steps += 1;
    }
    let elapsed = started.elapsed();
    let run = CournotRun {
        alpha,
        residuals: state.trace().residuals(),
        rate: state.trace().empirical_rate(),
        fit_r2: state.trace().log_residual_fit(1.0 / 3.0).map(|f| f.r_squared),
    };
    let dgt = state.average_point();
    let err = (dgt.as_vector() - ne.as_vector()).amax();
    let published = ne
        .as_slice()
        .iter()
        .zip(PUBLISHED_NE)
        .map(|(x, p)| (x - p).abs())
        .fold(0.0, f64::max);
    let outcome = (|| {
        ensure(state.trace().last().unwrap().ne_residual <= 1e-6, || {
            format!("no convergence in {steps} iterations")
        })?;
        ensure(err <= 1e-5, || format!("DGT vs oracle error {err:e}"))?;
        ensure(published <= 5e-5, || format!("oracle vs published values {published:e}"))?;
        ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
        Ok(format!(
            "{steps} iterations in {:.2}s, max |DGT - NE| = {err:.2e}, max |NE - published| = {published:.2e}",
            elapsed.as_secs_f64()
        ))
    })();
    (outcome, Some(run))
}

/// Power iteration on `𝒜ᵀ`, normalized to sum one.
fn power_left_eigenvector(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let at = a.transpose();
    let mut p = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..2_000_000 {
        let mut next = &at * &p;
        next /= next.sum();
        let done = (&next - &p).amax() < 1e-16;
        p = next;
        if done {
            break;
        }
    }
    p
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.random_range(1..=5);
        let sizes: Vec<usize> = (0..m).map(|_| rng.random_range(1..=10)).collect();
        let mixing = random_mixing(&sizes, &mut rng);
        let left = power_left_eigenvector(mixing.matrix());
        worst = worst.max((left - mixing.pi()).amax());
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("50 topologies, max |pi_closed - pi_numeric| = {worst:.2e}"))
}

fn criterion_4(cons: &mut Conservation) -> Outcome {
    let (game, mixing) = cournot();
    let c = gain_constants(&mixing, &game).unwrap();
    let alpha = 0.5 * max_step(&c).unwrap();
    let phi = phi_matrix(alpha, &c).unwrap();
    let ne = solve_ne_linear(&game).unwrap().point;
    let mut state = DgtState::init(&game, &mixing, Initialization::seeded(4), Some(ne.clone())).unwrap();
    let mut xi = Vector3::from(state.xi_metrics(&ne).unwrap());
    let mut worst = f64::NEG_INFINITY;
    let steps = 3000;
    for t in 0..steps {
        state.step_compact(alpha).map_err(|e| e.to_string())?;
        cons.observe(&state);
        let next = Vector3::from(state.xi_metrics(&ne).unwrap());
        let excess = (next - phi * xi).max();
        worst = worst.max(excess);
        ensure(excess <= 1e-9, || format!("violated at t = {t} by {excess:e}"))?;
        xi = next;
    }
    Ok(format!(
        "alpha = {alpha:.3e}, {steps} steps, max entry of xi(t+1) - Phi xi(t) = {worst:.2e}"
    ))
}

fn criterion_5(run: Option<&CournotRun>) -> Outcome {
    let run = run.ok_or("criterion 1 run unavailable")?;
    let (game, mixing) = cournot();
    let c = gain_constants(&mixing, &game).unwrap();
    let rho = spectral_radius_3x3(&phi_matrix(run.alpha, &c).map_err(|e| e.to_string())?);
    let r2 = run.fit_r2.ok_or("too few records for a fit")?;
    let rate = run.rate.ok_or("too few records for a rate")?;
    ensure(r2 >= 0.99, || format!("R^2 = {r2}"))?;
    ensure(rate <= rho + 0.05, || format!("rate {rate} exceeds rho(Phi) + 0.05 = {}", rho + 0.05))?;
    Ok(format!(
        "{} records, R^2 = {r2:.6}, empirical rate = {rate:.6}, rho(Phi({})) = {rho:.4}",
        run.residuals.len(),
        run.alpha
    ))
}

fn criterion_6() -> Outcome {
    let (game, mixing) = cournot();
    let c = gain_constants(&mixing, &game).unwrap();
    let bound = max_step(&c).unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..=20 {
        let alpha = bound * k as f64 / 21.0;
        let rho = spectral_radius_3x3(&phi_matrix(alpha, &c).unwrap());
        worst = worst.max(rho);
        ensure(rho < 1.0, || format!("rho(Phi({alpha:e})) = {rho}"))?;
    }
    let star = alpha_star(&c).map_err(|e| e.to_string())?;
    let det = (Matrix3::identity() - phi_matrix(star.value, &c).unwrap()).determinant();
    ensure(det.abs() <= 1e-8, || format!("det(I - Phi(alpha*)) = {det:e}"))?;
    Ok(format!(
        "max_step = {bound:.4e}, max rho over 20 samples = {worst:.10}, det(I - Phi(alpha*)) = {det:.2e}"
    ))
}

fn criterion_7(cons: &mut Conservation) -> Outcome {
    // agent-by-agent vs compact, one step at a time from shared random states
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_step: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(1..=6);
        let sizes = vec![n; m];
        let dims: Vec<usize> = (0..m).map(|_| rng.random_range(1..=3)).collect();
        let game = random_monotone_game(&sizes, &dims, RandomGameOptions::default(), &mut rng)
            .unwrap()
            .into_spec()
            .unwrap();
        let mixing = random_mixing(&sizes, &mut rng);
        let seed = rng.random();
        let mut a = DgtState::init(&game, &mixing, Initialization::seeded(seed), None).unwrap();
        for _ in 0..rng.random_range(0..5) {
            a.step_compact(0.01).unwrap();
        }
        let mut b = a.clone();
        let alpha = rng.random_range(0.0..0.05);
        a.step_compact(alpha).map_err(|e| e.to_string())?;
        b.step_agentwise(alpha).map_err(|e| e.to_string())?;
        cons.observe(&a);
        cons.observe(&b);
        let dx = (a.estimates() - b.estimates()).amax();
        let dv = a
            .trackers()
            .blocks()
            .iter()
            .zip(b.trackers().blocks())
            .map(|(u, v)| (u - v).amax())
            .fold(0.0, f64::max);
        worst_step = worst_step.max(dx).max(dv);
    }
    ensure(worst_step <= 1e-12, || format!("agentwise vs compact {worst_step:e}"))?;

    // simulated network vs engine over 1000 Cournot rounds
    let (game, mixing) = cournot();
    let mut engine = DgtState::init(&game, &mixing, Initialization::seeded(70), None).unwrap();
    let mut net = spawn_network(&game, &mixing, Initialization::seeded(70), None).unwrap();
    for _ in 0..1000 {
        engine.step_compact(0.02).map_err(|e| e.to_string())?;
        net.round(0.02).map_err(|e| e.to_string())?;
        cons.observe(&engine);
    }
    let drift = (engine.estimates() - net.estimates()).amax();
    ensure(drift <= 1e-9, || format!("simnet vs engine {drift:e}"))?;

    // identical seeds give identical traces, byte for byte
    let csv = |simnet: bool| -> Vec<u8> {
        let mut out = Vec::new();
        if simnet {
            let mut n = spawn_network(&game, &mixing, Initialization::seeded(71), None).unwrap();
            for _ in 0..200 {
                n.round(0.02).unwrap();
            }
            n.trace().write_csv(&mut out).unwrap();
        } else {
            let mut s = DgtState::init(&game, &mixing, Initialization::seeded(71), None).unwrap();
            for _ in 0..200 {
                s.step_compact(0.02).unwrap();
            }
            s.trace().write_csv(&mut out).unwrap();
        }
        out
    };
    ensure(csv(false) == csv(false), || "engine traces differ between runs".into())?;
    ensure(csv(true) == csv(true), || "simnet traces differ between runs".into())?;
    Ok(format!(
        "agentwise vs compact {worst_step:.2e} over 100 steps, simnet vs engine {drift:.2e} after 1000 rounds, traces reproducible"
    ))
}

fn criterion_8(cons: &mut Conservation) -> Outcome {
    // single cluster: plain gradient tracking over the degenerate composite matrix
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 8;
    let game = random_monotone_game(&[n], &[2], RandomGameOptions::default(), &mut rng)
        .unwrap()
        .into_spec()
        .unwrap();
    let intra = GraphKind::Ring.metropolis(n).unwrap();
    let mixing = compose_adjacency(GraphTopology::uniform_complete(1).unwrap(), vec![intra.clone()]).unwrap();
    let mut w = intra.weights().clone();
    for c in 0..n {
        w[(0, c)] *= 0.5;
    }
    w[(0, 0)] += 0.5;
    let x0 = EstimateMatrix::seeded(&game, 80, -1.0, 1.0).unwrap();
    let grad = |x: &DMatrix<f64>| DMatrix::from_fn(n, 2, |j, c| game.gradient(0, j, &[x[(j, 0)], x[(j, 1)]])[c]);
    let alpha = 0.05;
    let mut x = x0.data().clone();
    let mut g = grad(&x);
    let mut v = g.clone();
    let mut state = DgtState::init(&game, &mixing, Initialization::Matrix(x0), None).unwrap();
    let mut worst_gt: f64 = 0.0;
    for _ in 0..300 {
        let xn = &w * &x - &v * alpha;
        let gn = grad(&xn);
        v = intra.weights() * &v + &gn - &g;
        x = xn;
        g = gn;
        state.step_compact(alpha).map_err(|e| e.to_string())?;
        cons.observe(&state);
        worst_gt = worst_gt
            .max((state.estimates() - &x).amax())
            .max((state.trackers().block(0) - &v).amax());
    }
    ensure(worst_gt <= 1e-12, || format!("single cluster vs reference {worst_gt:e}"))?;

    // singleton clusters: a five-player quadratic game
    let q = 5;
    let mut d = DMatrix::<f64>::zeros(q, q);
    for r in 0..q {
        for c in r + 1..q {
            let v = rng.random_range(-0.5..0.5);
            d[(r, c)] = v;
            d[(c, r)] = v;
        }
    }
    for r in 0..q {
        d[(r, r)] = 3.0 + rng.random_range(0.0..1.0);
    }
    let mut s = DMatrix::<f64>::zeros(q, q);
    for r in 0..q {
        for c in r + 1..q {
            let v = rng.random_range(-0.5..0.5);
            s[(r, c)] = v;
            s[(c, r)] = -v;
        }
    }
    let jac = d + s;
    let b = DVector::from_fn(q, |_, _| rng.random_range(-5.0..5.0));
    let ne_direct = jac.clone().lu().solve(&(-&b)).ok_or("player game is singular")?;
    let objective = AffineObjective::new(
        (0..q).map(|i| vec![jac.rows(i, 1).into_owned()]).collect(),
        (0..q).map(|i| vec![b.rows(i, 1).into_owned()]).collect(),
    )
    .unwrap();
    let players = objective.into_spec().unwrap();
    let mixing = compose_adjacency(
        GraphKind::Ring.metropolis(q).unwrap(),
        vec![GraphTopology::uniform_complete(1).unwrap(); q],
    )
    .unwrap();
    let mut state = DgtState::init(&players, &mixing, Initialization::seeded(81), None).unwrap();
    let stop = StopCriteria { max_iters: 200_000, residual_tol: 1e-10 };
    let report = state.run(0.02, stop).map_err(|e| e.to_string())?;
    cons.observe(&state);
    let err = (state.average_point().as_vector() - &ne_direct).amax();
    ensure(report.converged, || format!("player game did not converge: {report:?}"))?;
    ensure(err <= 1e-6, || format!("player game NE error {err:e}"))?;
    Ok(format!(
        "single cluster vs reference {worst_gt:.2e}, five-player NE error {err:.2e} after {} iterations",
        report.iterations
    ))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(1..=5);
        let dims: Vec<usize> = (0..m).map(|_| rng.random_range(1..=3)).collect();
        let game = random_monotone_game(&vec![n; m], &dims, RandomGameOptions::default(), &mut rng)
            .unwrap()
            .into_spec()
            .unwrap();
        let lin = solve_ne_linear(&game).map_err(|e| e.to_string())?;
        let gd = solve_ne_descent(&game, None, 1e-10, 1_000_000).map_err(|e| e.to_string())?;
        worst = worst.max((lin.point.as_vector() - gd.point.as_vector()).amax());
    }
    ensure(worst <= 1e-6, || format!("max disagreement {worst:e}"))?;
    Ok(format!("20 games, max |linear - descent| = {worst:.2e}"))
}

fn report(id: u32, title: &str, outcome: &Outcome) -> bool {
    match outcome {
        Ok(detail) => println!("criterion {id} [{title}]: PASS ({detail})"),
        Err(detail) => println!("criterion {id} [{title}]: FAIL ({detail})"),
    }
    outcome.is_ok()
}

fn main() {
    let mut cons = Conservation::default();
    let (c1, run) = criterion_1(&mut cons);
    let c2 = criterion_2();
    let c4 = criterion_4(&mut cons);
    let c5 = criterion_5(run.as_ref());
    let c6 = criterion_6();
    let c7 = criterion_7(&mut cons);
    let c8 = criterion_8(&mut cons);
    let c9 = criterion_9();
    let c3: Outcome = if cons.worst <= CONSERVATION_TOL {
        Ok(format!("{} checks, worst relative residual {:.2e}", cons.checks, cons.worst))
    } else {
        Err(format!("worst relative residual {:e}", cons.worst))
    };

    let results = [
        report(1, "Cournot equilibrium", &c1),
        report(2, "stationary weights", &c2),
        report(3, "tracking conservation", &c3),
        report(4, "gain recursion", &c4),
        report(5, "linear rate", &c5),
        report(6, "step-size boundary", &c6),
        report(7, "equivalence", &c7),
        report(8, "degenerate cases", &c8),
        report(9, "oracle cross-check", &c9),
    ];
    let passed = results.iter().filter(|ok| **ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
