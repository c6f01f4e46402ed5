//! Central finite-difference gradient checks for single layers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ForwardCtx, Layer, Mode, NnError, Tensor};

pub const STEP: f64 = 1e-5;

/// Denominator floor for relative errors, so near-zero gradients compare absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error_input: f64,
    pub max_rel_error_params: f64,
    pub checked: usize,
    pub skipped: usize,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.max_rel_error_input.max(self.max_rel_error_params)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error() < tolerance
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Scalar objective `Σ out·r` with the dropout RNG reset to `seed` before each pass,
/// so every evaluation sees the same masks.
fn objective<L: Layer + ?Sized>(layer: &mut L, x: &Tensor, r: &[f64], seed: u64) -> Result<f64, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = layer.forward(x, &mut ForwardCtx::new(Mode::Train, &mut rng))?;
    Ok(y.data.iter().zip(r).map(|(a, b)| a * b).sum())
}

/// Compares analytic input and parameter gradients of `layer` at `x` against central
/// differences. Inputs within one step of a kink are skipped for layers that have one.
pub fn grad_check<L: Layer + ?Sized>(layer: &mut L, x: &Tensor, seed: u64) -> Result<GradCheckReport, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let dropout_seed = rng.random::<u64>();

    let mut probe = ChaCha8Rng::seed_from_u64(dropout_seed);
    let y = layer.forward(x, &mut ForwardCtx::new(Mode::Train, &mut probe))?;
    let r: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let grad_out = Tensor::new(y.shape(), r.clone())?;
    for p in layer.params_mut() {
        p.zero_grad();
    }
    let dx = layer.backward(&grad_out)?;
    let analytic_params: Vec<Option<Vec<f64>>> = layer.params().iter().map(|p| p.grad.clone()).collect();

    let mut report = GradCheckReport::default();
    let kink = layer.kink_at_zero();
    let mut xp = x.clone();
    for i in 0..x.len() {
        if kink && x.data[i].abs() <= STEP {
            report.skipped += 1;
            continue;
        }
        let orig = xp.data[i];
        xp.data[i] = orig + STEP;
        let plus = objective(layer, &xp, &r, dropout_seed)?;
        xp.data[i] = orig - STEP;
        let minus = objective(layer, &xp, &r, dropout_seed)?;
        xp.data[i] = orig;
        let numeric = (plus - minus) / (2.0 * STEP);
        report.max_rel_error_input = report.max_rel_error_input.max(rel_error(dx.data[i], numeric));
        report.checked += 1;
    }

    let n_params = layer.params().len();
    for pi in 0..n_params {
        let len = layer.params()[pi].value.len();
        let trainable = layer.params()[pi].trainable;
        if !trainable {
            continue;
        }
        for j in 0..len {
            let orig = layer.params()[pi].value.data[j];
            layer.params_mut()[pi].value.data[j] = orig + STEP;
            let plus = objective(layer, x, &r, dropout_seed)?;
            layer.params_mut()[pi].value.data[j] = orig - STEP;
            let minus = objective(layer, x, &r, dropout_seed)?;
            layer.params_mut()[pi].value.data[j] = orig;
            let numeric = (plus - minus) / (2.0 * STEP);
            let analytic = analytic_params[pi].as_ref().map_or(0.0, |g| g[j]);
            report.max_rel_error_params = report.max_rel_error_params.max(rel_error(analytic, numeric));
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Uniform random tensor in `[-1, 1)`.
pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape")
}
