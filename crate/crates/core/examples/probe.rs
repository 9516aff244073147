use std::time::Instant;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sfrl_core::agent::Diagnostics;
use sfrl_core::envs::TaskSpec;
use sfrl_core::harness::{build_initial_agent, ExperimentConfig};

fn main() {
    let task = TaskSpec::builtin("A").unwrap();
    let cfg = ExperimentConfig::for_task(task.clone());
    let mut agent = build_initial_agent(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut diag = Diagnostics::default();

    // Time selection alone, then full steps, on a fixed state.
    let state = task.reset(&mut rng);
    let obs: DVector<f64> = task.observe(&state);
    let t0 = Instant::now();
    for _ in 0..100 {
        agent.select_action(&obs, &mut diag).unwrap();
    }
    println!("select: {:.1} us ({} shrinks)", t0.elapsed().as_secs_f64() * 1e4, diag.resolvent_shrinks);

    let t0 = Instant::now();
    let mut steps = 0u64;
    let record = agent.run_episode(&task, 200, &mut rng, &mut diag, false).unwrap();
    steps += record.length as u64;
    println!(
        "one episode: {} steps in {:.2} s -> {:.1} us/step; shrinks {}",
        record.length,
        t0.elapsed().as_secs_f64(),
        t0.elapsed().as_secs_f64() * 1e6 / steps as f64,
        diag.resolvent_shrinks
    );
}
