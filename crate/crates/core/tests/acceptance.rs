//! End-to-end checks of the simulator and agents. Prints one `PASS` or
//! `FAIL` line per criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::sync::{Arc, OnceLock};

use antijam::agent::{AgentParams, ChannelAgent, JointAgent, Observation, ReplayMemory};
use antijam::env::{EnvConfig, Environment};
use antijam::harness::{
    compare_convergence, random_fh_oracle, run_experiment, run_trials, ConvergenceInput,
    ExperimentConfig, ExperimentResult,
};
use antijam::jammer::{FixedJammer, FixedJammerConfig, FixedMode};
use antijam::nn::gradcheck::{run_suite, CheckKind, EPSILON, TOLERANCE};
use antijam::nn::{Architecture, JointNet, ParameterSet};
use rand::{Rng, SeedableRng};

const TARGET: f64 = 0.9;

fn report(id: u32, name: &str, passed: bool, detail: &str) {
    println!(
        "criterion {id} {name}: {} ({detail})",
        if passed { "PASS" } else { "FAIL" }
    );
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).expect("valid experiment config")
}

fn cached(cell: &'static OnceLock<ExperimentResult>, text: &str) -> &'static ExperimentResult {
    cell.get_or_init(|| run_trials(&config(text)).expect("experiment runs"))
}

const SWEEP: &str = "[[jammers]]\nkind = \"fixed\"\nmode = \"sweep\"\n";
const COMB: &str = "[[jammers]]\nkind = \"fixed\"\nmode = \"comb\"\n";

fn fixed(agent: &str, jammer: &str) -> String {
    format!("agent = \"{agent}\"\nstop_after_sustained = 20\n{jammer}")
}

fn intelligent(agent: &str, step: &str) -> String {
    format!(
        "agent = \"{agent}\"\n{SWEEP}\n[[jammers]]\nkind = \"intelligent\"\nupdate_step = {step}\n"
    )
}

fn joint_sweep() -> &'static ExperimentResult {
    static CELL: OnceLock<ExperimentResult> = OnceLock::new();
    cached(&CELL, &fixed("joint", SWEEP))
}

fn joint_comb() -> &'static ExperimentResult {
    static CELL: OnceLock<ExperimentResult> = OnceLock::new();
    cached(&CELL, &fixed("joint", COMB))
}

fn dqn_sweep() -> &'static ExperimentResult {
    static CELL: OnceLock<ExperimentResult> = OnceLock::new();
    cached(&CELL, &fixed("dqn", SWEEP))
}

fn joint_drl(step: &str) -> &'static ExperimentResult {
    static ONE: OnceLock<ExperimentResult> = OnceLock::new();
    static TEN: OnceLock<ExperimentResult> = OnceLock::new();
    static FROZEN: OnceLock<ExperimentResult> = OnceLock::new();
    let cell = match step {
        "1" => &ONE,
        "10" => &TEN,
        _ => &FROZEN,
    };
    cached(cell, &intelligent("joint", step))
}

fn dqn_drl() -> &'static ExperimentResult {
    static CELL: OnceLock<ExperimentResult> = OnceLock::new();
    cached(&CELL, &intelligent("dqn", "10"))
}

fn predictor_drl() -> &'static ExperimentResult {
    static CELL: OnceLock<ExperimentResult> = OnceLock::new();
    cached(&CELL, &intelligent("predictor_only", "10"))
}

fn late_throughput(r: &ExperimentResult) -> f64 {
    let xs: Vec<f64> = r
        .trials
        .iter()
        .map(|t| t.mean_throughput(201, 300).expect("episodes 201..=300 ran"))
        .collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn mean_episodes_to_target(r: &ExperimentResult) -> f64 {
    let cap = r.config.episodes + 1;
    let xs: Vec<u64> = r
        .trials
        .iter()
        .map(|t| t.episodes_to_target(TARGET).unwrap_or(cap))
        .collect();
    xs.iter().sum::<u64>() as f64 / xs.len() as f64
}

fn criterion_01_gradient_fidelity() {
    let results = run_suite(0, 20);
    let worst = results.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let kinds_covered = CheckKind::ALL
        .iter()
        .all(|k| results.iter().filter(|r| r.kind == *k).count() >= 20);
    let passed = kinds_covered && results.iter().all(|r| r.passed()) && worst < 1e-4;
    report(
        1,
        "gradient fidelity",
        passed,
        &format!(
            "{} checks, eps {EPSILON:e}, worst relative error {worst:.2e}, limit {TOLERANCE:e}",
            results.len()
        ),
    );
    assert!(passed);
}

fn criterion_02_random_hopping_matches_the_oracle() {
    let cfg = config(&format!(
        "scale = \"paper\"\nagent = \"random_fh\"\nepisodes = 100\ntrials = 1\nbase_seed = 2\n{SWEEP}"
    ));
    let simulated = run_trials(&cfg).unwrap().trials[0]
        .mean_throughput(1, 100)
        .unwrap();
    let oracle = random_fh_oracle(&cfg.env, &[FixedJammerConfig::default()], 10_000, 77).unwrap();
    let gap = (simulated - oracle.monte_carlo).abs();
    let passed = gap <= 0.02;
    report(
        2,
        "environment oracle equivalence",
        passed,
        &format!(
            "simulated {simulated:.4}, oracle {:.4}, exact {:?}, gap {gap:.4}",
            oracle.monte_carlo, oracle.exact
        ),
    );
    assert!(passed);
}

fn criterion_03_fixed_jammer_convergence() {
    let mut passed = true;
    let mut details = Vec::new();
    for (name, r) in [("sweep", joint_sweep()), ("comb", joint_comb())] {
        let starts: Vec<Option<u64>> = r
            .trials
            .iter()
            .map(|t| t.sustained_from(TARGET, 20))
            .collect();
        let ok = starts.iter().filter(|s| s.is_some()).count();
        passed &= ok >= 4;
        details.push(format!("{name} {ok}/5 sustained from {starts:?}"));
    }
    report(3, "fixed-jammer convergence", passed, &details.join("; "));
    assert!(passed);
}

fn criterion_04_convergence_acceleration() {
    let joint = ConvergenceInput::from_result(joint_sweep());
    let dqn = ConvergenceInput::from_result(dqn_sweep());
    let cmp = compare_convergence(&joint, &dqn).unwrap();
    let passed = cmp.ratio <= 0.5;
    report(
        4,
        "convergence acceleration",
        passed,
        &format!(
            "joint {:.1} vs dqn {:.1} episodes, ratio {:.3}, joint {:?}, dqn {:?}",
            cmp.a.mean_episodes_to_target,
            cmp.b.mean_episodes_to_target,
            cmp.ratio,
            joint.episodes_to_target,
            dqn.episodes_to_target
        ),
    );
    assert!(passed);
}

fn criterion_05_intelligent_jammer_advantage() {
    let joint = late_throughput(joint_drl("10"));
    let dqn = late_throughput(dqn_drl());
    let passed = joint - dqn >= 0.05;
    report(
        5,
        "intelligent-jammer advantage",
        passed,
        &format!("joint {joint:.3} vs dqn {dqn:.3} over episodes 201-300"),
    );
    assert!(passed);
}

fn criterion_06_update_step_monotonicity() {
    let one = late_throughput(joint_drl("1"));
    let ten = late_throughput(joint_drl("10"));
    let frozen = late_throughput(joint_drl("\"infinity\""));
    let passed = one <= ten && ten <= frozen && frozen >= TARGET;
    report(
        6,
        "update-step monotonicity",
        passed,
        &format!("step 1 {one:.3}, step 10 {ten:.3}, infinity {frozen:.3}"),
    );
    assert!(passed);
}

fn criterion_07_ablation_ordering() {
    let (joint, pred, dqn) = (joint_drl("10"), predictor_drl(), dqn_drl());
    let (tj, tp) = (late_throughput(joint), late_throughput(pred));
    let (ej, ep, ed) = (
        mean_episodes_to_target(joint),
        mean_episodes_to_target(pred),
        mean_episodes_to_target(dqn),
    );
    let passed = tj > tp && ej < ep && ep < ed;
    report(
        7,
        "ablation ordering",
        passed,
        &format!(
            "throughput joint {tj:.3} vs predictor {tp:.3}; episodes to target joint {ej:.1}, predictor {ep:.1}, dqn {ed:.1}"
        ),
    );
    assert!(passed);
}

fn criterion_08_determinism() {
    let text = format!(
        "agent = \"joint\"\nepisodes = 4\nhops_per_episode = 50\ntrials = 2\nbase_seed = 9\n{SWEEP}\n[[jammers]]\nkind = \"intelligent\"\nupdate_step = 3\n"
    );
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let mut cfg = config(&text);
        let path = dir.path().join(name);
        cfg.output_path = Some(path.clone());
        run_experiment(&cfg).unwrap();
        files.push(std::fs::read(&path).unwrap());
    }
    let passed = !files[0].is_empty() && files[0] == files[1];
    report(
        8,
        "determinism",
        passed,
        &format!("{} and {} bytes", files[0].len(), files[1].len()),
    );
    assert!(passed);
}

fn criterion_09_fifo_and_target_sync() {
    let full = AgentParams::paper();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut fifo_ok = true;
    for capacity in [full.memory_q, full.memory_c] {
        for _ in 0..20 {
            let pushes = rng.random_range(0..3 * capacity);
            let mut m = ReplayMemory::new(capacity);
            for i in 0..pushes {
                m.push(i);
            }
            let expected: Vec<usize> = (pushes.saturating_sub(capacity)..pushes).collect();
            fifo_ok &= m.iter().copied().eq(expected) && m.len() <= capacity;
        }
    }

    let env_cfg = EnvConfig::desk();
    let mut hp = AgentParams::desk();
    hp.target_sync_hops = full.target_sync_hops;
    let mut agent = JointAgent::new(hp, &Observation::of(&env_cfg), 4).unwrap();
    let jammer =
        FixedJammer::new(FixedJammerConfig::of_mode(FixedMode::Sweep), &env_cfg, 4).unwrap();
    let mut env = Environment::new(env_cfg).unwrap();
    let snapshot = |p: &ParameterSet| -> Vec<Vec<f64>> {
        p.ids().map(|id| p.value(id).data().to_vec()).collect()
    };
    let mut target = snapshot(agent.target_params());
    let mut history = Vec::new();
    let mut changes = Vec::new();
    let mut synced_exactly = true;
    for hop in 1..=2100u64 {
        let s = Arc::clone(env.state());
        let a = agent.act(&s).unwrap();
        let out = env
            .step_hop(a, &[jammer.emission(hop - 1, &history)])
            .unwrap();
        history.push(a);
        agent.observe(&s, a, &out, hop).unwrap();
        let now = snapshot(agent.target_params());
        if now != target {
            changes.push(hop);
            synced_exactly &= now == snapshot(agent.params());
            target = now;
        }
    }
    let sync_ok = full.target_sync_hops == 1000 && changes == [1000, 2000] && synced_exactly;
    let passed = fifo_ok && sync_ok && full.memory_q == 1000 && full.memory_c == 256;
    report(
        9,
        "fifo and target-network invariants",
        passed,
        &format!("fifo {fifo_ok}, target changed at hops {changes:?}"),
    );
    assert!(passed);
}

fn criterion_10_full_scale_architecture_shapes() {
    let mut params = ParameterSet::new();
    let net = JointNet::build(&Architecture::table(), [200, 200], 10, 10, &mut params).unwrap();
    let chain = net.shape_chain();
    let expected: Vec<Vec<usize>> = vec![
        vec![1, 200, 200],
        vec![16, 100, 100],
        vec![32, 50, 50],
        vec![512],
        vec![1024],
        vec![256],
        vec![10],
    ];
    let out = net.forward(&params, &vec![0.5; 200 * 200], None).unwrap();
    let passed = chain == expected && out.q.len() == 10 && out.c.len() == 10;
    report(
        10,
        "architecture shape check",
        passed,
        &format!("chain {chain:?}"),
    );
    assert!(passed);
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|info| eprintln!("{info}")));
    let criteria: [(&str, fn()); 10] = [
        (
            "criterion_01_gradient_fidelity",
            criterion_01_gradient_fidelity,
        ),
        (
            "criterion_02_random_hopping_matches_the_oracle",
            criterion_02_random_hopping_matches_the_oracle,
        ),
        (
            "criterion_03_fixed_jammer_convergence",
            criterion_03_fixed_jammer_convergence,
        ),
        (
            "criterion_04_convergence_acceleration",
            criterion_04_convergence_acceleration,
        ),
        (
            "criterion_05_intelligent_jammer_advantage",
            criterion_05_intelligent_jammer_advantage,
        ),
        (
            "criterion_06_update_step_monotonicity",
            criterion_06_update_step_monotonicity,
        ),
        (
            "criterion_07_ablation_ordering",
            criterion_07_ablation_ordering,
        ),
        ("criterion_08_determinism", criterion_08_determinism),
        (
            "criterion_09_fifo_and_target_sync",
            criterion_09_fifo_and_target_sync,
        ),
        (
            "criterion_10_full_scale_architecture_shapes",
            criterion_10_full_scale_architecture_shapes,
        ),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        if std::panic::catch_unwind(check).is_err() {
            failed.push(name);
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed.len(),
        criteria.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
