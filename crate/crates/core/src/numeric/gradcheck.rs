//! Central finite-difference verification of analytic gradients.

use crate::error::Result;
use crate::numeric::params::ParamStore;
use crate::numeric::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Coordinates sampled per parameter; smaller parameters are checked exhaustively.
    pub coords_per_param: usize,
    /// Lower bound on the relative-error denominator, so that coordinates whose
    /// true gradient is ~0 are judged on absolute error.
    pub denom_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            coords_per_param: 16,
            denom_floor: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares the gradient accumulated by `loss_fn` against central differences.
///
/// `loss_fn` must return the loss and accumulate its gradient into the store;
/// it is called once for the analytic gradient and twice per checked coordinate.
pub fn finite_diff_check<F>(
    store: &mut ParamStore,
    mut loss_fn: F,
    config: GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore) -> Result<f64>,
{
    store.zero_grads();
    loss_fn(store)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();
    let names: Vec<String> = store.iter().map(|p| p.name.clone()).collect();
    let mut rng = RngStream::new(config.seed);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for pi in 0..names.len() {
        let n = analytic[pi].len();
        let mut coords: Vec<usize> = (0..n).collect();
        if n > config.coords_per_param {
            rng.shuffle(&mut coords);
            coords.truncate(config.coords_per_param);
            coords.sort_unstable();
        }
        for idx in coords {
            let id = store.find(&names[pi]).expect("parameter vanished");
            let orig = store.value(id).data()[idx];
            store.value_mut(id).data_mut()[idx] = orig + config.step;
            let up = loss_fn(store)?;
            store.value_mut(id).data_mut()[idx] = orig - config.step;
            let down = loss_fn(store)?;
            store.value_mut(id).data_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * config.step);
            let a = analytic[pi][idx];
            let denom = a.abs().max(numeric.abs()).max(config.denom_floor);
            let rel = (a - numeric).abs() / denom;
            report.checked += 1;
            if report.worst_param.is_empty() || rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = names[pi].clone();
                report.worst_index = idx;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    store.zero_grads();
    Ok(report)
}
