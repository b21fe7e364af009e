//! Central finite-difference gradient checking.

use super::graph::{Gradients, ParamId, ParamStore};

/// Outcome of a finite-difference check on one parameter tensor.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub name: String,
    pub elements: usize,
    /// Max over elements of `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_relative_error: f64,
}

/// Compares analytic gradients of `loss` against central differences for
/// every parameter in `ids`. `loss` returns the scalar value and the analytic
/// gradients for the given store.
pub fn check_gradients<F>(
    store: &mut ParamStore<f64>,
    ids: &[ParamId],
    step: f64,
    floor: f64,
    loss: F,
) -> Vec<GradCheckReport>
where
    F: Fn(&ParamStore<f64>) -> (f64, Gradients<f64>),
{
    let (_, analytic) = loss(store);
    ids.iter()
        .map(|&id| {
            let n = store.get(id).len();
            let mut worst: f64 = 0.0;
            for i in 0..n {
                let orig = store.get(id).data()[i];
                store.get_mut(id).data_mut()[i] = orig + step;
                let (up, _) = loss(store);
                store.get_mut(id).data_mut()[i] = orig - step;
                let (down, _) = loss(store);
                store.get_mut(id).data_mut()[i] = orig;
                let numeric = (up - down) / (2.0 * step);
                let a = analytic.get(id).map_or(0.0, |g| g.data()[i]);
                let denom = a.abs().max(numeric.abs()).max(floor);
                worst = worst.max((a - numeric).abs() / denom);
            }
            GradCheckReport {
                name: store.name(id).to_string(),
                elements: n,
                max_relative_error: worst,
            }
        })
        .collect()
}
