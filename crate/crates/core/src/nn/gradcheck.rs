//! Central finite-difference oracle for parameter gradients (tests only).

use super::{Gradients, Network};

pub const STEP: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error between `grads` and central differences of `loss`
/// over every weight and bias of `net`.
pub fn max_relative_error(
    net: &Network,
    grads: &Gradients,
    loss: impl Fn(&Network) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for (li, layer) in net.layers.iter().enumerate() {
        for ((r, c), _) in layer.weights.indexed_iter() {
            let orig = probe.layers[li].weights[[r, c]];
            probe.layers[li].weights[[r, c]] = orig + STEP;
            let up = loss(&probe);
            probe.layers[li].weights[[r, c]] = orig - STEP;
            let down = loss(&probe);
            probe.layers[li].weights[[r, c]] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(relative_error(grads.layers[li].weights[[r, c]], numeric));
        }
        for j in 0..layer.bias.len() {
            let orig = probe.layers[li].bias[j];
            probe.layers[li].bias[j] = orig + STEP;
            let up = loss(&probe);
            probe.layers[li].bias[j] = orig - STEP;
            let down = loss(&probe);
            probe.layers[li].bias[j] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(relative_error(grads.layers[li].bias[j], numeric));
        }
    }
    worst
}
