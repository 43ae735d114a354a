use moqd_core::neuro::{
    actor_objective_grad, critic_loss_grad, train_networks, Mlp, MlpSpec, ObjectiveTrainState, OutputActivation,
    ReplayBuffer, RewardSelector, Td3Config, Transition,
};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rel_err(a: f64, f: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(1e-7)
}

fn central_difference(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let x = p[i];
            p[i] = x + H;
            let up = f(&p);
            p[i] = x - H;
            let down = f(&p);
            p[i] = x;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn random_spec(rng: &mut ChaCha8Rng, input: usize, output: usize, act: OutputActivation) -> MlpSpec {
    let depth = rng.random_range(1..=2);
    let mut sizes = vec![input];
    sizes.extend((0..depth).map(|_| rng.random_range(2..=6)));
    sizes.push(output);
    MlpSpec::new(sizes, act).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn worst(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic.iter().zip(numeric).map(|(&a, &f)| rel_err(a, f)).fold(0.0, f64::max)
}

#[test]
fn critic_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..50 {
        let input = rng.random_range(1..=5);
        let spec = random_spec(&mut rng, input, 1, OutputActivation::Identity);
        assert!(spec.param_count() <= 200);
        let net = Mlp::random(spec.clone(), &mut rng);
        let rows = rng.random_range(1..=6);
        let x = random_matrix(&mut rng, rows, input);
        let y: Array1<f64> = (0..x.nrows()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, analytic) = critic_loss_grad(&net, x.view(), y.view()).unwrap();
        let numeric = central_difference(net.params(), |p| {
            let m = Mlp::from_genotype(spec.clone(), p).unwrap();
            critic_loss_grad(&m, x.view(), y.view()).unwrap().0
        });
        let e = worst(&analytic, &numeric);
        assert!(e < TOL, "case {case}: relative error {e}");
    }
}

#[test]
fn actor_objective_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..50 {
        let (s_dim, a_dim) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let actor_spec = random_spec(&mut rng, s_dim, a_dim, OutputActivation::Tanh);
        let critic_spec = random_spec(&mut rng, s_dim + a_dim, 1, OutputActivation::Identity);
        let actor = Mlp::random(actor_spec.clone(), &mut rng);
        let critic = Mlp::random(critic_spec, &mut rng);
        let rows = rng.random_range(1..=6);
        let states = random_matrix(&mut rng, rows, s_dim);
        let (_, analytic) = actor_objective_grad(&actor, &critic, states.view()).unwrap();
        let numeric = central_difference(actor.params(), |p| {
            let a = Mlp::from_genotype(actor_spec.clone(), p).unwrap();
            actor_objective_grad(&a, &critic, states.view()).unwrap().0
        });
        let e = worst(&analytic, &numeric);
        assert!(e < TOL, "case {case}: relative error {e}");
    }
}

#[test]
fn backward_input_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in 0..50 {
        let (input, output) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let act = if case % 2 == 0 { OutputActivation::Tanh } else { OutputActivation::Identity };
        let net = Mlp::random(random_spec(&mut rng, input, output, act), &mut rng);
        let x = random_matrix(&mut rng, 3, input);
        let weights = random_matrix(&mut rng, 3, output);
        let objective = |x: &Array2<f64>| (net.forward_batch(x.view()).unwrap() * &weights).sum();
        let cache = net.forward_cached(x.view()).unwrap();
        let (grad_params, grad_x) = net.backward(&cache, weights.view()).unwrap();
        let numeric_x = central_difference(x.as_slice().unwrap(), |v| {
            objective(&Array2::from_shape_vec(x.raw_dim(), v.to_vec()).unwrap())
        });
        assert!(worst(grad_x.as_slice().unwrap(), &numeric_x) < TOL, "case {case}: input gradient");
        let numeric_p = central_difference(net.params(), |p| {
            let m = Mlp::from_genotype(net.spec().clone(), p).unwrap();
            (m.forward_batch(x.view()).unwrap() * &weights).sum()
        });
        assert!(worst(&grad_params, &numeric_p) < TOL, "case {case}: parameter gradient");
    }
}

/// Two states that alternate deterministically; rewards depend on the state
/// only, so Q*(s, a) = V*(s) for every action.
#[test]
fn critic_learns_two_state_values() {
    let rewards = [1.0, 0.5];
    let gamma = 0.5;
    let mut v = [0.0f64; 2];
    for _ in 0..200 {
        v = [rewards[0] + gamma * v[1], rewards[1] + gamma * v[0]];
    }
    let encode = |s: usize| vec![if s == 0 { -1.0 } else { 1.0 }];

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut buffer = ReplayBuffer::new(10_000, 1, 1, 1).unwrap();
    for i in 0..2_000 {
        let s = i % 2;
        buffer
            .push(&Transition {
                state: encode(s),
                action: vec![rng.random_range(-1.0..1.0)],
                reward: vec![rewards[s]],
                next_state: encode(1 - s),
                done: false,
            })
            .unwrap();
    }
    let hp = Td3Config {
        discount: gamma,
        critic_steps: 4_000,
        critic_lr: 3e-3,
        actor_lr: 3e-4,
        tau: 0.05,
        ..Td3Config::desk()
    };
    let policy = MlpSpec::policy(1, &[8], 1).unwrap();
    let mut states = vec![ObjectiveTrainState::new(&policy, &[32, 32], RewardSelector::Objective(0), 3).unwrap()];
    train_networks(&mut states, &buffer, &hp).unwrap();
    let critic = &states[0].critic1;
    for s in 0..2 {
        for a in [-0.8, 0.0, 0.8] {
            let q = critic.forward(&[encode(s)[0], a]).unwrap()[0];
            assert!((q - v[s]).abs() <= 0.05 * v[s], "state {s} action {a}: {q} vs {}", v[s]);
        }
    }
}
