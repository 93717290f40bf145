//! One PASS/FAIL line per acceptance criterion. Criterion 9 needs the DataCo
//! CSV at `$RLCAUSAL_DATACO_CSV` and never fails the run.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use rlcausal::data::{Dataset, VariableTable};
use rlcausal::graph::{AdjacencyMatrix, ACYCLIC_TOLERANCE};
use rlcausal::pipeline::{self, indirect_paths, PipelineConfig};
use rlcausal::policy::{train, TrainerConfig};
use rlcausal::scoring::{exhaustive_best, BicScorer, RegressionKind};
use rlcausal::sim::structural_hamming_distance;
use rlcausal::strength::{digamma, spacing_entropy};

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

fn median(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v[v.len() / 2]
}

fn oracle_d4() -> Outcome {
    let mut hits = 0;
    let mut slowest = 0.0f64;
    let mut parts = Vec::new();
    let mut pure = Vec::new();
    for seed in 0..3 {
        let model = common::linear_scm(4, seed);
        let ds = common::standardized_sample(&model, 2000, seed);
        let scorer = BicScorer::new(&ds, RegressionKind::Linear).unwrap();
        let (_, best) = exhaustive_best(&scorer).unwrap();
        let cfg = TrainerConfig {
            iterations: 2000,
            graphs_per_iteration: 32,
            seed,
            ..TrainerConfig::default()
        };
        let t = Instant::now();
        let (g, _) = train(&cfg, &ds, &scorer).unwrap();
        let secs = t.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        let rel = (scorer.graph_bic(&g.adjacency).unwrap() - best) / best.abs();
        if rel <= 0.01 {
            hits += 1;
        }
        parts.push(format!("{rel:.2e}"));

        let (g0, _) = train(&TrainerConfig { refine_candidates: 0, ..cfg }, &ds, &scorer).unwrap();
        pure.push(format!("{:.2e}", (scorer.graph_bic(&g0.adjacency).unwrap() - best) / best.abs()));
    }
    outcome(
        hits >= 2 && slowest <= 300.0,
        format!(
            "{hits}/3 seeds within 1% of exhaustive minimum (rel gap {}), slowest run {slowest:.1}s; without refinement: {}",
            parts.join(", "),
            pure.join(", ")
        ),
    )
}

fn recovery_d8() -> Outcome {
    let mut shd = Vec::new();
    let mut pure = Vec::new();
    let mut slowest = 0.0f64;
    for seed in 0..3 {
        let model = common::linear_scm(8, seed);
        let ds = common::standardized_sample(&model, 5000, seed);
        let scorer = BicScorer::new(&ds, RegressionKind::Linear).unwrap();
        let cfg = TrainerConfig {
            seed,
            ..TrainerConfig::default()
        };
        let t = Instant::now();
        let (g, _) = train(&cfg, &ds, &scorer).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        shd.push(structural_hamming_distance(&g.adjacency, &model.graph).unwrap());
        let (g0, _) = train(&TrainerConfig { refine_candidates: 0, ..cfg }, &ds, &scorer).unwrap();
        pure.push(structural_hamming_distance(&g0.adjacency, &model.graph).unwrap());
    }
    let med = median(shd.clone());
    outcome(
        med <= 3 && slowest <= 900.0,
        format!("median SHD {med} (per seed {shd:?}), slowest run {slowest:.1}s; without refinement: {pure:?}"),
    )
}

fn acyclicity() -> Outcome {
    let mut checked = 0;
    let mut wrong = 0;
    let mut check = |a: &AdjacencyMatrix| {
        checked += 1;
        if (a.acyclicity_penalty() <= ACYCLIC_TOLERANCE) != a.is_dag() {
            wrong += 1;
        }
    };
    let off: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();
    for bits in 0u32..64 {
        let edges = off.iter().enumerate().filter(|(k, _)| bits >> k & 1 == 1).map(|(_, &e)| e);
        check(&AdjacencyMatrix::from_edges(3, edges).unwrap());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let d = rng.gen_range(1..=6);
        let p = rng.gen_range(0.05..0.6);
        let mut a = AdjacencyMatrix::empty(d);
        for i in 0..d {
            for j in (0..d).filter(|&j| j != i) {
                if rng.gen_bool(p) {
                    a.insert(i, j).unwrap();
                }
            }
        }
        check(&a);
    }
    outcome(wrong == 0, format!("{checked} matrices, {wrong} disagreements with the peeling test"))
}

fn gradients() -> Outcome {
    let ops = common::check_tape_ops(5);
    let (worst_op, worst) = ops
        .iter()
        .map(|(n, g)| (*n, g.max_relative_error))
        .fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let actor = (0..3).map(|s| common::check_actor_loss(s).max_relative_error).fold(0.0, f64::max);
    outcome(
        worst <= 1e-4 && actor <= 1e-4,
        format!(
            "{} ops, worst {worst:.2e} ({worst_op}); composite actor loss worst {actor:.2e}",
            ops.len()
        ),
    )
}

fn entropy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 10_000;
    let uniform: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let normal: Vec<f64> = Normal::new(0.0, 1.0).unwrap().sample_iter(&mut rng).take(n).collect();
    let su = spacing_entropy(&uniform).unwrap().value;
    let sn = spacing_entropy(&normal).unwrap().value;
    let gauss = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();

    let fixed: Vec<f64> = (0..200).map(|k| f64::from(k * 37 % 211) * 0.5 - 40.0).collect();
    let base = spacing_entropy(&fixed).unwrap().value;
    let mut affine_err = 0.0f64;
    for (a, b) in [(2.0, 0.0), (0.25, 3.0), (-3.0, 1.5), (7.5, -20.0)] {
        let moved: Vec<f64> = fixed.iter().map(|x| a * x + b).collect();
        let s = spacing_entropy(&moved).unwrap().value;
        affine_err = affine_err.max((s - base - f64::ln(f64::abs(a))).abs());
    }
    outcome(
        su.abs() < 0.05 && (sn - gauss).abs() < 0.05 && affine_err < 1e-12,
        format!(
            "U(0,1) {su:.4} (target 0), N(0,1) {sn:.4} (target {gauss:.4}), affine identity max error {affine_err:.1e}"
        ),
    )
}

fn digamma_check() -> Outcome {
    let at_one = (digamma(1.0).unwrap() + 0.577_215_664_9).abs();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let x = 10f64.powf(rng.gen_range(-3.0..4.0));
        let err = (digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x).abs();
        worst = worst.max(err);
    }
    outcome(
        at_one < 1e-10 && worst < 1e-10,
        format!("|psi(1) + gamma| = {at_one:.1e}, recurrence worst {worst:.1e} over 1000 points in [1e-3, 1e4]"),
    )
}

fn permuted(ds: &Dataset, perm: &[usize]) -> Dataset {
    let d = ds.n_vars();
    let mut cols = vec![Vec::new(); d];
    for (j, &p) in perm.iter().enumerate() {
        cols[p] = ds.column(j).unwrap().to_vec();
    }
    Dataset::from_columns(cols, VariableTable::numbered(d)).unwrap()
}

fn bic_properties() -> Outcome {
    let model = common::linear_scm(6, 4);
    let ds = common::standardized_sample(&model, 1000, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut decomp_bad, mut perm_err, mut cache_bad) = (0, 0.0f64, 0);
    for kind in [RegressionKind::Linear, RegressionKind::Quadratic] {
        let cached = BicScorer::new(&ds, kind).unwrap();
        let plain = BicScorer::with_cache_capacity(&ds, kind, 0).unwrap();
        for _ in 0..200 {
            let mut a = AdjacencyMatrix::empty(6);
            for i in 0..6 {
                for j in (0..6).filter(|&j| j != i) {
                    if rng.gen_bool(0.3) {
                        a.insert(i, j).unwrap();
                    }
                }
            }
            let local: Vec<f64> = (0..6).map(|j| plain.local_bic(j, &a.parents(j).unwrap()).unwrap()).collect();
            let (child, parent) = (rng.gen_range(0..6), rng.gen_range(0..6));
            if child != parent {
                let mut b = a.clone();
                if b.has_edge(parent, child) {
                    b.remove(parent, child);
                } else {
                    b.insert(parent, child).unwrap();
                }
                for j in 0..6 {
                    let changed = plain.local_bic(j, &b.parents(j).unwrap()).unwrap() != local[j];
                    if changed != (j == child) {
                        decomp_bad += 1;
                    }
                }
            }
            let mut perm: Vec<usize> = (0..6).collect();
            for k in (1..6).rev() {
                perm.swap(k, rng.gen_range(0..=k));
            }
            let base = plain.graph_bic(&a).unwrap();
            let moved = BicScorer::new(&permuted(&ds, &perm), kind)
                .unwrap()
                .graph_bic(&a.permuted(&perm).unwrap())
                .unwrap();
            perm_err = perm_err.max((base - moved).abs() / base.abs().max(1.0));
            for _ in 0..2 {
                if cached.graph_bic(&a).unwrap().to_bits() != plain.graph_bic(&a).unwrap().to_bits() {
                    cache_bad += 1;
                }
            }
        }
    }
    outcome(
        decomp_bad == 0 && perm_err <= 1e-9 && cache_bad == 0,
        format!(
            "decomposability violations {decomp_bad}, permutation max relative error {perm_err:.1e}, cache mismatches {cache_bad} (400 graphs, linear and quadratic)"
        ),
    )
}

fn determinism(work: &Path) -> Outcome {
    let (data, _) = pipeline::generate_synthetic(&pipeline::SynthConfig {
        d: 5,
        samples: 1000,
        seed: 3,
        out_dir: work.join("synth"),
        ..Default::default()
    })
    .unwrap();
    let run = |dir: &str| {
        let mut cfg = PipelineConfig {
            data: data.clone(),
            out_dir: work.join(dir),
            seed: 17,
            ..PipelineConfig::default()
        };
        cfg.trainer.iterations = 300;
        fs::read(pipeline::run(&cfg).unwrap().paths.graph_json).unwrap()
    };
    let (a, b) = (run("first"), run("second"));
    outcome(a == b, format!("graph.json {} bytes, identical: {}", a.len(), a == b))
}

fn dataco(work: &Path) -> Option<Outcome> {
    let csv = PathBuf::from(std::env::var_os("RLCAUSAL_DATACO_CSV")?);
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let mut cfg = PipelineConfig::from_file(root.join("configs/dataco.json")).unwrap();
    cfg.data = csv;
    cfg.schema = Some(root.join("schemas/dataco.json"));
    cfg.out_dir = work.join("dataco");
    let run = match pipeline::run(&cfg) {
        Ok(r) => r,
        Err(e) => return Some(outcome(false, format!("pipeline failed: {e}"))),
    };
    let g = &run.graph;
    let vars = &g.variables;
    let target = vars.index_of("Late_delivery_risk").unwrap();
    let direct = g.adjacency.parents(target).unwrap();
    let report = fs::read_to_string(&run.paths.report).unwrap_or_default();
    let status_edge = vars.index_of("Delivery Status").is_some_and(|s| g.adjacency.has_edge(s, target));
    let shipping_path = vars.index_of("Shipping Mode").is_some_and(|s| {
        g.adjacency.has_edge(s, target)
            || indirect_paths(g, target, vars.len()).iter().any(|p| p.first() == Some(&s))
    });
    let warn = |ok: bool| if ok { "pass" } else { "warn" };
    Some(outcome(
        !direct.is_empty() && report.contains("Direct causes"),
        format!(
            "{} direct causes of Late_delivery_risk; Delivery Status -> target: {}; Shipping Mode path: {}",
            direct.len(),
            warn(status_edge),
            warn(shipping_path)
        ),
    ))
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 oracle equivalence d=4", Box::new(oracle_d4)),
        ("2 structure recovery d=8", Box::new(recovery_d8)),
        ("3 acyclicity penalty iff DAG", Box::new(acyclicity)),
        ("4 gradient fidelity", Box::new(gradients)),
        ("5 entropy estimator accuracy", Box::new(entropy)),
        ("6 digamma accuracy", Box::new(digamma_check)),
        ("7 BIC properties", Box::new(bic_properties)),
        ("8 determinism", Box::new(|| determinism(work.path()))),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        failed += usize::from(!o.pass);
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    match dataco(work.path()) {
        Some(o) => println!(
            "{} criterion 9 DataCo reproduction (non-gating): {}",
            if o.pass { "PASS" } else { "WARN" },
            o.detail
        ),
        None => println!("SKIP criterion 9 DataCo reproduction (non-gating): set RLCAUSAL_DATACO_CSV to the DataCo CSV"),
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
