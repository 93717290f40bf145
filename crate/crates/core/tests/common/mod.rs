//! Fixtures shared by the integration and acceptance targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rlcausal::data::{standardize, Dataset};
use rlcausal::numeric::{gradient_check, GradCheck, Matrix, Tape, Var};
use rlcausal::policy::{actor_surrogate, sample_adjacency, EncoderConfig, Policy};
use rlcausal::sim::{generate, random_model, GeneratorConfig, StructuralModel};
use rlcausal::Result;

pub const FD_STEP: f64 = 1e-5;

/// Random linear-Gaussian model with unequal noise scales. For `d = 8` the
/// draw is repeated until it has 10 to 12 edges.
pub fn linear_scm(d: usize, seed: u64) -> StructuralModel {
    let p = if d <= 4 { 0.5 } else { 0.4 };
    (0..)
        .map(|k| {
            random_model(&GeneratorConfig {
                d,
                edge_probability: p,
                seed: seed * 1000 + k,
                ..GeneratorConfig::default()
            })
            .unwrap()
        })
        .find(|m| d != 8 || (10..=12).contains(&m.graph.edge_count()))
        .unwrap()
}

pub fn standardized_sample(model: &StructuralModel, m: usize, seed: u64) -> Dataset {
    standardize(&generate(model, m, seed + 100).unwrap()).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.5..1.5))
}

/// Scalar readout `Σ w ⊙ v` with fixed random weights, so every output entry
/// carries a distinct gradient.
fn readout(t: &mut Tape, v: Var, seed: u64) -> Result<Var> {
    let (r, c) = t.shape(v);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = t.constant(random_matrix(&mut rng, r, c));
    let p = t.mul(v, w)?;
    Ok(t.sum(p))
}

type OpFn = fn(&mut Tape, &[Var]) -> Result<Var>;

/// Every differentiable tape operation on a 3-row instance, named.
fn op_cases() -> Vec<(&'static str, Vec<(usize, usize)>, OpFn)> {
    vec![
        ("matmul", vec![(3, 4), (4, 2)], |t, v| {
            let o = t.matmul(v[0], v[1])?;
            readout(t, o, 1)
        }),
        ("add", vec![(3, 3), (3, 3)], |t, v| {
            let o = t.add(v[0], v[1])?;
            readout(t, o, 2)
        }),
        ("sub", vec![(3, 3), (3, 3)], |t, v| {
            let o = t.sub(v[0], v[1])?;
            readout(t, o, 3)
        }),
        ("mul", vec![(3, 3), (3, 3)], |t, v| {
            let o = t.mul(v[0], v[1])?;
            readout(t, o, 4)
        }),
        ("scale", vec![(3, 2)], |t, v| {
            let o = t.scale(v[0], -2.5);
            readout(t, o, 5)
        }),
        ("add_row", vec![(3, 4), (1, 4)], |t, v| {
            let o = t.add_row(v[0], v[1])?;
            readout(t, o, 6)
        }),
        ("tanh", vec![(3, 3)], |t, v| {
            let o = t.tanh(v[0]);
            readout(t, o, 7)
        }),
        ("sigmoid", vec![(3, 3)], |t, v| {
            let o = t.sigmoid(v[0]);
            readout(t, o, 8)
        }),
        ("relu", vec![(3, 3)], |t, v| {
            let o = t.relu(v[0]);
            readout(t, o, 9)
        }),
        ("log_sigmoid", vec![(3, 3)], |t, v| {
            let o = t.log_sigmoid(v[0]);
            readout(t, o, 10)
        }),
        ("square", vec![(3, 3)], |t, v| {
            let o = t.square(v[0]);
            readout(t, o, 11)
        }),
        ("softmax_rows", vec![(3, 4)], |t, v| {
            let o = t.softmax_rows(v[0]);
            readout(t, o, 12)
        }),
        ("layer_norm", vec![(3, 5), (1, 5), (1, 5)], |t, v| {
            let o = t.layer_norm(v[0], v[1], v[2])?;
            readout(t, o, 13)
        }),
        ("transpose", vec![(3, 2)], |t, v| {
            let o = t.transpose(v[0]);
            readout(t, o, 14)
        }),
        ("slice_cols", vec![(3, 5)], |t, v| {
            let o = t.slice_cols(v[0], 1, 3)?;
            readout(t, o, 15)
        }),
        ("concat_cols", vec![(3, 2), (3, 3)], |t, v| {
            let o = t.concat_cols(&[v[0], v[1]])?;
            readout(t, o, 16)
        }),
        ("pairwise_sum", vec![(3, 2), (3, 2)], |t, v| {
            let o = t.pairwise_sum(v[0], v[1])?;
            readout(t, o, 17)
        }),
        ("reshape", vec![(3, 4)], |t, v| {
            let o = t.reshape(v[0], 4, 3)?;
            readout(t, o, 18)
        }),
        ("mask_diagonal", vec![(3, 3)], |t, v| {
            let o = t.mask_diagonal(v[0], -7.0)?;
            readout(t, o, 19)
        }),
        ("sum", vec![(3, 3)], |t, v| {
            let s = t.sum(v[0]);
            let sq = t.square(s);
            Ok(t.sum(sq))
        }),
        ("mean_rows", vec![(3, 4)], |t, v| {
            let o = t.mean_rows(v[0]);
            readout(t, o, 20)
        }),
    ]
}

/// Finite-difference checks of every tape operation, `trials` random
/// instances each; reports the worst error per operation.
pub fn check_tape_ops(trials: u64) -> Vec<(&'static str, GradCheck)> {
    op_cases()
        .into_iter()
        .map(|(name, shapes, f)| {
            let mut worst: Option<GradCheck> = None;
            for trial in 0..trials {
                let mut rng = ChaCha8Rng::seed_from_u64(7919 * trial + name.len() as u64);
                let inputs: Vec<Matrix> = shapes.iter().map(|&(r, c)| random_matrix(&mut rng, r, c)).collect();
                let g = gradient_check(&inputs, FD_STEP, f).unwrap();
                if worst.as_ref().map_or(true, |w| g.max_relative_error > w.max_relative_error) {
                    worst = Some(g);
                }
            }
            (name, worst.unwrap())
        })
        .collect()
}

/// Finite-difference check of the full actor loss (encoder, decoder and
/// policy-gradient surrogate) with respect to every actor weight, on a
/// 3-variable batch.
pub fn check_actor_loss(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = EncoderConfig {
        layers: 1,
        heads: 2,
        d_model: 4,
        d_ff: 6,
        positional_encoding: false,
    };
    let batch_width = 5;
    let policy = Policy::new(&enc, 3, 3, batch_width, &mut rng).unwrap();
    let batch = random_matrix(&mut rng, 3, batch_width);
    let logits = policy.logits(&batch).unwrap();
    let samples: Vec<_> = (0..4).map(|_| sample_adjacency(&logits, &mut rng).unwrap().0).collect();
    let advantages: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let inputs = policy.actor_params.values().to_vec();
    gradient_check(&inputs, FD_STEP, |tape, vars| {
        let mut p = policy.clone();
        for (k, v) in vars.iter().enumerate() {
            *p.actor_params.get_mut(k) = tape.value(*v).clone();
        }
        let (_, g) = p.forward(tape, &batch)?;
        actor_surrogate(tape, g, &samples, &advantages)
    })
    .unwrap()
}
