//! Central finite-difference check of tape gradients.

use crate::error::{Error, Result};

use super::matrix::Matrix;
use super::tape::{Tape, Var};

/// Magnitude below which errors are measured absolutely rather than relative
/// to the gradient entry.
pub const GRADCHECK_FLOOR: f64 = 1e-4;

/// Outcome of [`gradient_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_relative_error: f64,
    /// `(input, row, col)` of the worst entry.
    pub worst: (usize, usize, usize),
    pub entries: usize,
}

/// Compares the reverse-mode gradient of the scalar `f(inputs)` against
/// central differences with step `eps`. `f` receives the inputs as parameter
/// leaves `0..inputs.len()` on a fresh tape.
pub fn gradient_check<F>(inputs: &[Matrix], eps: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Matrix]| -> Result<(Tape, Var, Vec<Var>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().enumerate().map(|(k, m)| tape.param(k, m)).collect();
        let out = f(&mut tape, &vars)?;
        if tape.shape(out) != (1, 1) {
            return Err(Error::usage("gradient check needs a scalar function"));
        }
        Ok((tape, out, vars))
    };
    let (tape, out, _) = eval(inputs)?;
    let shapes: Vec<_> = inputs.iter().map(Matrix::shape).collect();
    let analytic = tape.backward(out)?.for_params(&shapes)?;

    let mut report = GradCheck {
        max_relative_error: 0.0,
        worst: (0, 0, 0),
        entries: 0,
    };
    let mut probe = inputs.to_vec();
    for (k, m) in inputs.iter().enumerate() {
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                let x = m.get(r, c);
                probe[k].set(r, c, x + eps);
                let (t, o, _) = eval(&probe)?;
                let up = t.value(o).sum();
                probe[k].set(r, c, x - eps);
                let (t, o, _) = eval(&probe)?;
                let down = t.value(o).sum();
                probe[k].set(r, c, x);

                let numeric = (up - down) / (2.0 * eps);
                let a = analytic[k].get(r, c);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
                if !rel.is_finite() {
                    return Err(Error::Domain(format!("non-finite gradient at input {k} ({r},{c})")));
                }
                report.entries += 1;
                if rel > report.max_relative_error {
                    report.max_relative_error = rel;
                    report.worst = (k, r, c);
                }
            }
        }
    }
    Ok(report)
}
