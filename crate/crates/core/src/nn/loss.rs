use ndarray::{Array2, Axis, Zip};

/// A differentiable batch loss: returns the mean loss and `dL/d(output)`.
pub trait Objective: Sync {
    fn evaluate(&self, output: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Mean squared error over all batch elements.
    Mse,
    /// Softmax over the (identity) output logits, then cross-entropy against
    /// one-hot targets, averaged over the batch.
    CrossEntropy,
}

pub(crate) fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.to_owned();
    for mut row in p.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

impl Objective for Loss {
    fn evaluate(&self, output: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
        assert_eq!(output.dim(), target.dim(), "output/target shape mismatch");
        let n = output.nrows().max(1) as f64;
        match self {
            Loss::Mse => {
                let count = output.len().max(1) as f64;
                let diff = output - target;
                let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
                (loss, diff * (2.0 / count))
            }
            Loss::CrossEntropy => {
                let mut loss = 0.0;
                for (z, t) in output.axis_iter(Axis(0)).zip(target.axis_iter(Axis(0))) {
                    let max = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    loss -= Zip::from(&z).and(&t).fold(0.0, |acc, &zi, &ti| acc + ti * (zi - lse));
                }
                let grad = (softmax_rows(output) - target) / n;
                (loss / n, grad)
            }
        }
    }
}
