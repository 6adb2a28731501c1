//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::time::{Duration, Instant};

use deepstruct::config::{parse, Instance};
use deepstruct::data::{encode_dataset, decode_dataset, generate_dataset, generate_split, DatasetSpec, Split};
use deepstruct::gradcheck::structured_gradient_check;
use deepstruct::inference::{message_pass, run_to_convergence, Convergence, MessageSet};
use deepstruct::learning::{evaluate, objective_value, run_strategy, Sample, Strategy, TrainConfig, Trainer};
use deepstruct::model_file::{decode_model, encode_model};
use deepstruct::oracle::brute_force_log_partition;
use deepstruct::potentials::{evaluate_potentials, loss_augment, score_configuration};
use deepstruct::suites::{exactness_errors, random_tables, worst_block_increase, CONVERGED};
use deepstruct::{build_chain_model, TensorValue};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SEEDS: [u64; 3] = [0, 1, 2];
const MAIN_ITERATIONS: usize = 400;
const PRETRAIN_ITERATIONS: usize = 400;
const BLEND_BUDGET: Duration = Duration::from_secs(45);
const BLEND_CHECKPOINTS: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn tree_exactness() -> Outcome {
    let start = Instant::now();
    let graph = build_chain_model(5, 6, 1).unwrap();
    let (mut dual_err, mut belief_err) = (0.0f64, 0.0f64);
    for seed in 0..50 {
        let (d, b) = exactness_errors(&graph, &random_tables(&graph, seed), 1.0).unwrap();
        dual_err = dual_err.max(d.abs());
        belief_err = belief_err.max(b);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        dual_err <= 1e-8 && belief_err <= 1e-8 && secs < 10.0,
        format!("max |dual - ln Z| {dual_err:.3e}, max belief error {belief_err:.3e}, {secs:.1}s"),
    )
}

fn dual_monotonicity() -> Outcome {
    let start = Instant::now();
    let graph = build_chain_model(4, 3, 2).unwrap();
    let (mut rise, mut deficit) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for seed in 0..50 {
        let tables = random_tables(&graph, seed);
        rise = rise.max(worst_block_increase(&graph, &tables, 1.0, 20));
        let mut m = MessageSet::zeros(&graph, 1.0);
        let dual = run_to_convergence(&graph, &tables, &mut m, CONVERGED).dual;
        deficit = deficit.max(brute_force_log_partition(&graph, &tables, 1.0).unwrap() - dual);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        rise <= 1e-9 && deficit <= 1e-9 && secs < 10.0,
        format!("largest block increase {rise:.3e}, largest ln Z - dual {deficit:.3e}, {secs:.1}s"),
    )
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let inst = parse("[network]\ninput = 784\nhidden = 8\n[graph]\nvariables = 3\ncardinality = 26\norder = 1\n")
        .unwrap()
        .instantiate()
        .unwrap();
    let params = inst.model.init_params(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let spec = DatasetSpec {
        vocabulary: vec!["cat".into(), "dog".into(), "sun".into()],
        ..DatasetSpec::default()
    };
    let data = generate_split(&spec, Split::Train, 2).unwrap().to_samples();
    let refs: Vec<&Sample> = data.iter().collect();
    let messages: Vec<MessageSet> = data
        .iter()
        .map(|s| {
            let t = evaluate_potentials(&inst.graph, &inst.model, &params, &s.x).unwrap();
            let mut m = MessageSet::zeros(&inst.graph, 1.0);
            message_pass(&inst.graph, &loss_augment(&inst.graph, &t, &s.y, 0.0), &mut m, 3);
            m
        })
        .collect();
    let r = structured_gradient_check(&inst.graph, &inst.model, &params, &refs, &messages, 0.0, 1e-5).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        r.max_relative_error < 1e-4 && secs < 60.0,
        format!(
            "max relative error {:.3e} at {}[{}] over {} scalars, {secs:.1}s",
            r.max_relative_error, r.worst_parameter, r.worst_index, r.checked
        ),
    )
}

/// Log-linear unaries on one-hot slot inputs so every table is free.
fn hinge_recovery() -> Outcome {
    let inst = parse("[network]\ninput = 5\nhidden =\n[graph]\nvariables = 5\ncardinality = 6\norder = 1\n")
        .unwrap()
        .instantiate()
        .unwrap();
    let (graph, model) = (&inst.graph, &inst.model);
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = model.init_params(&mut rng).unwrap();
        for t in params.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        }
        let mut eye = vec![0.0; 25];
        (0..5).for_each(|i| eye[i * 6] = 1.0);
        let sample = Sample {
            x: TensorValue::new(vec![5, 5], eye).unwrap(),
            y: (0..5).map(|_| rng.gen_range(0..6)).collect(),
        };
        let tables = evaluate_potentials(graph, model, &params, &sample.x).unwrap();
        let mut m = MessageSet::zeros(graph, 0.0);
        run_to_convergence(graph, &tables, &mut m, CONVERGED);
        let value = objective_value(graph, model, &params, &[&sample], &[m], 0.0).unwrap();
        let hinge = brute_force_log_partition(graph, &tables, 0.0).unwrap()
            - score_configuration(graph, &tables, &sample.y).unwrap();
        worst = worst.max((value - hinge).abs());
    }
    outcome(worst <= 1e-8, format!("max |objective - hinge| {worst:.3e} over 20 instances"))
}

fn convex_agreement() -> Outcome {
    let spec = DatasetSpec {
        train: 200,
        validation: 50,
        test: 0,
        ..DatasetSpec::default()
    };
    let splits = generate_dataset(&spec).unwrap();
    let (train, val) = (splits.train.to_samples(), splits.validation.to_samples());
    let inst = parse("[network]\ninput = 784\nhidden =\n[graph]\nvariables = 5\ncardinality = 26\n")
        .unwrap()
        .instantiate()
        .unwrap();
    let graph = inst.graph.unary_subgraph();
    let config = TrainConfig {
        max_iterations: 2000,
        ..TrainConfig::default()
    };
    let rule = Convergence::default();
    let mut finals = Vec::new();
    let mut decayed = Vec::new();
    for algorithm in ["blended", "doubleloop"] {
        let config = TrainConfig {
            algorithm: algorithm.parse().unwrap(),
            ..config.clone()
        };
        let params = inst.model.init_params(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut t = Trainer::new(&graph, &inst.model, &train, params, &config)
            .unwrap()
            .with_validation(&val);
        t.run(config.max_iterations).unwrap();
        decayed.push(t.state().step_size < config.step_size);
        finals.push(t.converged_objective(&train, rule).unwrap());
    }
    let gap = (finals[0] - finals[1]).abs();
    outcome(
        gap <= 1e-6,
        format!(
            "final objectives {:.9} vs {:.9} (gap {gap:.3e}), step size decayed: {:?}",
            finals[0], finals[1], decayed
        ),
    )
}

struct Desk {
    train: Vec<Sample>,
    validation: Vec<Sample>,
    test: Vec<Sample>,
}

fn desk(seed: u64) -> Desk {
    let splits = generate_dataset(&DatasetSpec {
        seed,
        ..DatasetSpec::default()
    })
    .unwrap();
    Desk {
        train: splits.train.to_samples(),
        validation: splits.validation.to_samples(),
        test: splits.test.to_samples(),
    }
}

fn desk_instance(order: usize, pairwise: &str, strategy: Strategy, seed: u64) -> Instance {
    let text = format!(
        "[network]\ninput = 784\nhidden = 128\n\
         [graph]\nvariables = 5\ncardinality = 26\norder = {order}\npairwise = {pairwise}\n\
         [train]\nmax_iterations = {MAIN_ITERATIONS}\npretrain_iterations = {PRETRAIN_ITERATIONS}\n\
         strategy = {strategy}\nseed = {seed}\n"
    );
    parse(&text).unwrap().instantiate().unwrap()
}

/// Test word accuracy in percent.
fn desk_run(d: &Desk, order: usize, pairwise: &str, strategy: Strategy, seed: u64) -> f64 {
    let inst = desk_instance(order, pairwise, strategy, seed);
    let state = run_strategy(&inst.graph, &inst.model, &d.train, &d.validation, &inst.train).unwrap();
    let acc = evaluate(&inst.graph, &inst.model, &state.params, &d.test, inst.train.epsilon, inst.train.eval_sweeps).unwrap();
    100.0 * acc.word
}

struct DeskResults {
    unary: Vec<f64>,
    joint: Vec<f64>,
    pw: Vec<f64>,
    pretrain_joint: Vec<f64>,
    joint_order2: Vec<f64>,
    joint_mlp: Vec<f64>,
}

fn desk_results() -> DeskResults {
    let mut r = DeskResults {
        unary: vec![],
        joint: vec![],
        pw: vec![],
        pretrain_joint: vec![],
        joint_order2: vec![],
        joint_mlp: vec![],
    };
    for seed in SEEDS {
        let d = desk(seed);
        r.unary.push(desk_run(&d, 1, "linear", Strategy::UnaryOnly, seed));
        r.joint.push(desk_run(&d, 1, "linear", Strategy::JointTrain, seed));
        r.pw.push(desk_run(&d, 1, "linear", Strategy::PwTrain, seed));
        r.pretrain_joint.push(desk_run(&d, 1, "linear", Strategy::PreTrainJoint, seed));
        r.joint_order2.push(desk_run(&d, 2, "linear", Strategy::JointTrain, seed));
        r.joint_mlp.push(desk_run(&d, 1, "mlp", Strategy::JointTrain, seed));
        println!(
            "  seed {seed}: unary {:.1}, joint {:.1}, pw {:.1}, pretrainjoint {:.1}, joint order-2 {:.1}, joint mlp-pairwise {:.1}",
            r.unary[r.unary.len() - 1],
            r.joint[r.joint.len() - 1],
            r.pw[r.pw.len() - 1],
            r.pretrain_joint[r.pretrain_joint.len() - 1],
            r.joint_order2[r.joint_order2.len() - 1],
            r.joint_mlp[r.joint_mlp.len() - 1],
        );
    }
    r
}

fn trend(r: &DeskResults, secs: f64) -> Outcome {
    let (u, j, pw, ptj) = (
        median(r.unary.clone()),
        median(r.joint.clone()),
        median(r.pw.clone()),
        median(r.pretrain_joint.clone()),
    );
    outcome(
        j - u >= 5.0 && ptj >= pw && secs < 900.0,
        format!("median word accuracy: joint {j:.1} vs unary {u:.1}, pretrainjoint {ptj:.1} vs pw {pw:.1}, {secs:.0}s"),
    )
}

fn structure(r: &DeskResults) -> Outcome {
    let (o1, o2) = (median(r.joint.clone()), median(r.joint_order2.clone()));
    outcome(o2 >= o1, format!("median word accuracy: order 2 {o2:.1} vs order 1 {o1:.1}"))
}

fn nonlinear_pairwise(r: &DeskResults) -> Outcome {
    let (lin, mlp) = (median(r.joint.clone()), median(r.joint_mlp.clone()));
    outcome(mlp >= lin - 1.0, format!("median word accuracy: mlp pairwise {mlp:.1} vs linear {lin:.1}"))
}

/// Probe objectives at evenly spaced points of training time (probe
/// evaluations excluded from the clock).
fn timed_curve(d: &Desk, sweeps: usize, reset: bool, probe: &[Sample]) -> Vec<f64> {
    let inst = desk_instance(1, "linear", Strategy::JointTrain, 0);
    let params = inst.model.init_params(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut t = Trainer::new(&inst.graph, &inst.model, &d.train, params, &inst.train)
        .unwrap()
        .with_validation(&d.validation)
        .with_schedule(sweeps, reset);
    let rule = Convergence {
        tolerance: 1e-6,
        max_sweeps: 200,
    };
    let mut spent = Duration::ZERO;
    let mut curve = Vec::with_capacity(BLEND_CHECKPOINTS);
    for k in 1..=BLEND_CHECKPOINTS {
        let until = BLEND_BUDGET * k as u32 / BLEND_CHECKPOINTS as u32;
        while spent < until {
            let start = Instant::now();
            t.step().unwrap();
            spent += start.elapsed();
        }
        curve.push(t.converged_objective(probe, rule).unwrap());
    }
    curve
}

fn blending_efficiency() -> Outcome {
    let d = desk(0);
    let probe = &d.train[..100];
    let blended = timed_curve(&d, 1, false, probe);
    let double_loop = timed_curve(&d, 20, true, probe);
    let skip = BLEND_CHECKPOINTS / 10;
    let wins = blended[skip..].iter().zip(&double_loop[skip..]).filter(|(b, dl)| b <= dl).count();
    let total = BLEND_CHECKPOINTS - skip;
    outcome(
        wins * 5 >= total * 4,
        format!(
            "blended <= double-loop at {wins}/{total} checkpoints; final probe objective {:.2} vs {:.2}",
            blended[BLEND_CHECKPOINTS - 1],
            double_loop[BLEND_CHECKPOINTS - 1]
        ),
    )
}

fn serialization() -> Outcome {
    let spec = DatasetSpec {
        train: 100,
        validation: 20,
        test: 20,
        ..DatasetSpec::default()
    };
    let splits = generate_dataset(&spec).unwrap();
    let bytes = encode_dataset(&splits.train);
    let data_ok = encode_dataset(&decode_dataset(&bytes).unwrap()) == bytes
        && encode_dataset(&generate_dataset(&spec).unwrap().train) == bytes;

    let text = "[network]\ninput = 784\nhidden = 16\n[graph]\nvariables = 5\ncardinality = 26\n\
                [train]\nmax_iterations = 30\nbatch_size = 20\nvalidate_every = 10\n";
    let train = |text: &str| {
        let doc = parse(text).unwrap();
        let inst = doc.instantiate().unwrap();
        let (tr, va) = (splits.train.to_samples(), splits.validation.to_samples());
        let state = run_strategy(&inst.graph, &inst.model, &tr, &va, &inst.train).unwrap();
        encode_model(&doc, &state.params)
    };
    let (a, b) = (train(text), train(text));
    let back = decode_model(&a).unwrap();
    let model_ok = encode_model(&back.doc, &back.params) == a;
    let crc = |v: &[u8]| u32::from_le_bytes(v[v.len() - 4..].try_into().unwrap());
    outcome(
        data_ok && model_ok && a == b,
        format!(
            "dataset round trip {data_ok}, model round trip {model_ok}, run checksums {:08x} / {:08x}",
            crc(&a),
            crc(&b)
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        println!("criterion {n:>2} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    report(1, "tree exactness", tree_exactness());
    report(2, "dual monotonicity and upper bound", dual_monotonicity());
    report(3, "gradient fidelity", gradient_fidelity());
    report(4, "hinge recovery", hinge_recovery());
    report(5, "convex agreement", convex_agreement());
    let start = Instant::now();
    let desk = desk_results();
    let secs = start.elapsed().as_secs_f64();
    report(6, "trend reproduction", trend(&desk, secs));
    report(7, "structure trend", structure(&desk));
    report(8, "blending efficiency", blending_efficiency());
    report(9, "nonlinear pairwise", nonlinear_pairwise(&desk));
    report(10, "serialization and determinism", serialization());
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
