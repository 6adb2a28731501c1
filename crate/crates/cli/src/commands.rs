use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deepstruct::config::{parse, Instance, ModelSpecDoc};
use deepstruct::data::{generate_dataset, read_dataset, write_splits, Split};
use deepstruct::gradcheck::structured_gradient_check;
use deepstruct::inference::message_pass;
use deepstruct::learning::{evaluate, initial_params, run_strategy_observed, Algorithm, Sample, Strategy, TraceRow};
use deepstruct::model_file::{read_model, write_model};
use deepstruct::potentials::{evaluate_potentials, loss_augment};
use deepstruct::suites::{run_suites, Suite};
use deepstruct::{Error, MessageSet, ParameterStore, TensorValue};

use crate::Failure;

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_THRESHOLD: f64 = 1e-4;
const GRADCHECK_SWEEPS: usize = 3;
const TOP_ENTRIES: usize = 10;

/// Prefixes I/O errors with the path involved.
fn in_path(e: Error, path: &Path) -> Failure {
    let mut f = Failure::from(e);
    if f.code == 2 {
        f.message = format!("{}: {}", path.display(), f.message);
    }
    f
}

fn load_spec(path: &Path, seed: Option<u64>) -> Result<ModelSpecDoc, Failure> {
    let text = fs::read_to_string(path).map_err(|e| in_path(e.into(), path))?;
    let mut doc = parse(&text)?;
    if let Some(s) = seed {
        doc.train.seed = s;
        doc.data.spec.seed = s;
    }
    Ok(doc)
}

pub fn gen_data(spec: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let doc = load_spec(spec, seed)?;
    doc.check_data_spec()?;
    let d = &doc.data.spec;
    let splits = generate_dataset(d)?;
    write_splits(out, &splits, d).map_err(|e| in_path(e, out))?;
    let counts = [
        (Split::Train, splits.train.len()),
        (Split::Validation, splits.validation.len()),
        (Split::Test, splits.test.len()),
    ];
    for (split, n) in counts {
        println!("{}\t{n}", split.name());
    }
    println!("total\t{}", counts.iter().map(|c| c.1).sum::<usize>());
    Ok(())
}

pub struct TrainArgs {
    pub spec: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub strategy: Option<Strategy>,
    pub algorithm: Option<Algorithm>,
    pub log: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn split_samples(inst: &Instance, dir: &Path, split: Split) -> Result<Vec<Sample>, Failure> {
    let path = dir.join(format!("{}.bin", split.name()));
    let d = read_dataset(&path).map_err(|e| in_path(e, &path))?;
    inst.check_dataset(&d)?;
    Ok(d.to_samples())
}

pub fn train(args: &TrainArgs) -> Result<(), Failure> {
    let mut doc = load_spec(&args.spec, args.seed)?;
    if let Some(s) = args.strategy {
        doc.train.strategy = s;
    }
    if let Some(a) = args.algorithm {
        doc.train.algorithm = a;
    }
    let inst = doc.instantiate()?;
    let train = split_samples(&inst, &args.data, Split::Train)?;
    let validation = split_samples(&inst, &args.data, Split::Validation)?;

    let log_path = args.log.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".log.tsv");
        p.into()
    });
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| in_path(e.into(), &log_path))?);
    writeln!(log, "{}", TraceRow::HEADER).map_err(Error::from)?;

    let mut last_good: ParameterStore = initial_params(&inst.model, &inst.train)?;
    let mut log_error = None;
    let result = run_strategy_observed(&inst.graph, &inst.model, &train, &validation, &inst.train, &mut |row, params| {
        if log_error.is_none() {
            if let Err(e) = writeln!(log, "{}", row.to_tsv()).and_then(|_| log.flush()) {
                log_error = Some(e);
            }
        }
        if params.tensors().iter().all(|t| t.is_finite()) {
            last_good.clone_from(params);
        }
    });
    if let Some(e) = log_error {
        return Err(Error::from(e).into());
    }
    match result {
        Ok(state) => {
            write_model(&args.out, &doc, &state.params).map_err(|e| in_path(e, &args.out))?;
            let last = state.trace.last();
            println!("iterations\t{}", state.trace.len());
            if let Some(row) = last {
                println!("objective\t{:.6}", row.objective);
            }
            println!("model\t{}", args.out.display());
            println!("log\t{}", log_path.display());
            Ok(())
        }
        Err(e @ (Error::NonFiniteObjective(_) | Error::NonFiniteGradient { .. })) => {
            write_model(&args.out, &doc, &last_good)?;
            Err(Failure::check(format!("{e}; last good parameters written to {}", args.out.display())))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn eval(model: &Path, data: &Path) -> Result<(), Failure> {
    let saved = read_model(model).map_err(|e| in_path(e, model))?;
    let dataset = read_dataset(data).map_err(|e| in_path(e, data))?;
    saved.instance.check_dataset(&dataset)?;
    let t = &saved.instance.train;
    let acc = evaluate(
        &saved.instance.graph,
        &saved.instance.model,
        &saved.params,
        &dataset.to_samples(),
        t.epsilon,
        t.eval_sweeps,
    )?;
    println!("word accuracy\t{:.2}%", 100.0 * acc.word);
    println!("char accuracy\t{:.2}%", 100.0 * acc.char);
    Ok(())
}

/// Random inputs in `[0, 1)` and uniform labels.
fn random_samples(inst: &Instance, count: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let n = inst.graph.space().num_variables();
    let d = inst.model.input_dim();
    (0..count)
        .map(|_| Sample {
            x: TensorValue::new(vec![n, d], (0..n * d).map(|_| rng.gen()).collect()).expect("sized"),
            y: (0..n).map(|i| rng.gen_range(0..inst.graph.space().cardinality(i))).collect(),
        })
        .collect()
}

pub fn gradcheck(spec: &Path, samples: usize, seed: Option<u64>) -> Result<(), Failure> {
    let doc = load_spec(spec, seed)?;
    let inst = doc.instantiate()?;
    if samples == 0 {
        return Err(Failure::validation("--samples must be at least 1"));
    }
    let cfg = &inst.train;
    let params = inst.model.init_params(&mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let data = random_samples(&inst, samples, &mut rng);
    let refs: Vec<&Sample> = data.iter().collect();

    // A few sweeps so the fixed messages are not all zero.
    let messages = data
        .iter()
        .map(|s| {
            let tables = evaluate_potentials(&inst.graph, &inst.model, &params, &s.x)?;
            let aug = loss_augment(&inst.graph, &tables, &s.y, cfg.loss_augment_weight);
            let mut m = MessageSet::zeros(&inst.graph, cfg.epsilon);
            message_pass(&inst.graph, &aug, &mut m, GRADCHECK_SWEEPS);
            Ok(m)
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let report = structured_gradient_check(
        &inst.graph,
        &inst.model,
        &params,
        &refs,
        &messages,
        cfg.loss_augment_weight,
        GRADCHECK_STEP,
    )?;
    println!("checked\t{}", report.checked);
    println!("max relative error\t{:.3e}", report.max_relative_error);
    println!(
        "worst\t{}[{}] analytic {:.6e} numeric {:.6e}",
        report.worst_parameter, report.worst_index, report.analytic, report.numeric
    );
    if report.max_relative_error < GRADCHECK_THRESHOLD {
        Ok(())
    } else {
        Err(Failure::check(format!(
            "gradient check failed: relative error {:.3e} at {}[{}]",
            report.max_relative_error, report.worst_parameter, report.worst_index
        )))
    }
}

fn label(i: usize, k: usize) -> String {
    if k <= 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        i.to_string()
    }
}

/// Aligned grid with row and column labels, then the largest entries
/// ordered by value (descending), row, column.
pub fn format_table(class: usize, rows: usize, cols: usize, table: &[f64]) -> String {
    let cells: Vec<String> = table.iter().map(|v| format!("{v:.3}")).collect();
    let width = cells
        .iter()
        .map(String::len)
        .chain((0..cols).map(|c| label(c, cols).len()))
        .max()
        .unwrap_or(1);
    let row_width = (0..rows).map(|r| label(r, rows).len()).max().unwrap_or(1);

    let mut out = format!("pairwise class {class} ({rows} x {cols})\n");
    out.push_str(&" ".repeat(row_width));
    for c in 0..cols {
        out.push_str(&format!(" {:>width$}", label(c, cols)));
    }
    out.push('\n');
    for r in 0..rows {
        out.push_str(&format!("{:>row_width$}", label(r, rows)));
        for c in 0..cols {
            out.push_str(&format!(" {:>width$}", cells[r * cols + c]));
        }
        out.push('\n');
    }

    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table[b].total_cmp(&table[a]).then(a.cmp(&b)));
    out.push_str(&format!("top {}\n", TOP_ENTRIES.min(table.len())));
    for &i in order.iter().take(TOP_ENTRIES) {
        out.push_str(&format!("{} {} {:?}\n", label(i / cols, rows), label(i % cols, cols), table[i]));
    }
    out
}

pub fn inspect(model: &Path, class: Option<usize>) -> Result<(), Failure> {
    let saved = read_model(model).map_err(|e| in_path(e, model))?;
    let pairwise = saved.instance.model.pairwise();
    let classes: Vec<usize> = match class {
        Some(c) if c < pairwise.len() => vec![c],
        Some(c) => {
            return Err(Failure::validation(format!(
                "unknown pairwise class {c}; the model has {}",
                pairwise.len()
            )))
        }
        None => (0..pairwise.len()).collect(),
    };
    println!("structure hash\t{:016x}", saved.doc.structure_hash());
    println!("parameters\t{}", saved.params.num_scalars());
    for c in classes {
        let p = &pairwise[c];
        let table = p.table(&saved.params)?;
        print!("\n{}", format_table(c, p.rows, p.cols, &table));
    }
    Ok(())
}

pub fn oracle_check(spec: &Path, trials: usize, seed: Option<u64>) -> Result<(), Failure> {
    let doc = load_spec(spec, seed)?;
    let inst = doc.instantiate()?;
    let report = run_suites(&inst.graph, inst.train.epsilon, trials, inst.train.seed)?;
    for suite in Suite::ALL {
        let failed = report.failures.iter().filter(|f| f.suite == suite).count();
        let skipped = suite == Suite::TreeExactness && !inst.graph.is_tree();
        let status = match (skipped, failed) {
            (true, _) => "skipped (graph has cycles)".to_string(),
            (false, 0) => "pass".to_string(),
            (false, n) => format!("FAIL ({n} of {trials})"),
        };
        println!("{}\t{status}", suite.name());
    }
    for f in &report.failures {
        println!("{f}");
    }
    if report.passed() {
        println!("all {trials} trials passed");
        Ok(())
    } else {
        let first = &report.failures[0];
        Err(Failure::check(format!(
            "{} failures; replay with --seed {} --trials 1",
            report.failures.len(),
            first.seed
        )))
    }
}
