//! Central finite-difference gradient checking in `f64`.

use super::{Mode, Network, Tensor};
use crate::error::{Error, Result};

/// Gradient magnitudes below this are compared on an absolute scale.
/// Central differences at `h = 1e-5` carry roughly `1e-11` of round-off,
/// which would swamp relative error for vanishing gradients.
pub const DENOM_FLOOR: f64 = 1e-6;

/// A scalar objective whose parameters can be perturbed in place.
pub trait GradientCheckable {
    fn param_names(&self) -> Vec<String>;
    fn params_mut(&mut self) -> Vec<&mut Tensor<f64>>;
    fn loss(&self) -> Result<f64>;
    /// Analytic gradients, one tensor per parameter in `params_mut` order.
    fn gradients(&self) -> Result<Vec<Tensor<f64>>>;
    /// Piecewise-linear activation pattern. Coordinates whose perturbation
    /// changes it straddle a kink and are excluded from the check.
    fn kink_pattern(&self) -> Result<Vec<bool>> {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
    /// `(coordinate, analytic, numeric, relative error)` above tolerance.
    pub flagged: Vec<(usize, f64, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.flagged.is_empty())
    }

    pub fn checked(&self) -> usize {
        self.params.iter().map(|p| p.checked).sum()
    }

    pub fn skipped(&self) -> usize {
        self.params.iter().map(|p| p.skipped).sum()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOM_FLOOR)
}

/// Compares `objective.gradients()` against `(f(θ+h) - f(θ-h)) / 2h` for
/// every coordinate of every parameter.
pub fn gradient_check<O: GradientCheckable + ?Sized>(objective: &mut O, h: f64, tol: f64) -> Result<GradCheckReport> {
    let analytic = objective.gradients()?;
    compare_gradients(objective, &analytic, h, tol)
}

/// Like [`gradient_check`] but against caller-supplied gradients.
pub fn compare_gradients<O: GradientCheckable + ?Sized>(
    objective: &mut O,
    analytic: &[Tensor<f64>],
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let names = objective.param_names();
    let sizes: Vec<usize> = objective.params_mut().iter().map(|p| p.len()).collect();
    if analytic.len() != sizes.len() || analytic.iter().zip(&sizes).any(|(a, &n)| a.len() != n) {
        return Err(Error::Shape("analytic gradients do not match parameters".into()));
    }
    let base_pattern = objective.kink_pattern()?;

    let mut params = Vec::with_capacity(sizes.len());
    for (p, (&size, name)) in sizes.iter().zip(names).enumerate() {
        let mut check = ParamCheck { name, checked: 0, skipped: 0, max_rel_error: 0.0, flagged: Vec::new() };
        for i in 0..size {
            let original = objective.params_mut()[p].data()[i];

            objective.params_mut()[p].data_mut()[i] = original + h;
            let up = objective.loss()?;
            let up_pattern = objective.kink_pattern()?;
            objective.params_mut()[p].data_mut()[i] = original - h;
            let down = objective.loss()?;
            let down_pattern = objective.kink_pattern()?;
            objective.params_mut()[p].data_mut()[i] = original;

            if up_pattern != base_pattern || down_pattern != base_pattern {
                check.skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[p].data()[i];
            let rel = relative_error(a, numeric);
            check.checked += 1;
            check.max_rel_error = check.max_rel_error.max(rel);
            if rel > tol || !rel.is_finite() {
                check.flagged.push((i, a, numeric, rel));
            }
        }
        params.push(check);
    }
    Ok(GradCheckReport { step: h, tolerance: tol, params })
}

/// A network evaluated on one fixed example. The input is exposed as a
/// final pseudo-parameter named `input` so its gradient is checked too.
#[derive(Debug, Clone)]
pub struct NetworkObjective {
    pub network: Network<f64>,
    pub input: Tensor<f64>,
    pub target: Tensor<f64>,
    pub mode: Mode,
}

impl GradientCheckable for NetworkObjective {
    fn param_names(&self) -> Vec<String> {
        let mut names = self.network.param_names();
        names.push("input".into());
        names
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        let mut params = self.network.params_mut();
        params.push(&mut self.input);
        params
    }

    fn loss(&self) -> Result<f64> {
        self.network.loss_value(&self.input, &self.target, self.mode)
    }

    fn gradients(&self) -> Result<Vec<Tensor<f64>>> {
        let back = self.network.backward(&self.input, &self.target, self.mode)?;
        let mut grads = back.param_grads;
        grads.push(back.input_grad);
        Ok(grads)
    }

    fn kink_pattern(&self) -> Result<Vec<bool>> {
        self.network.relu_pattern(&self.input, self.mode)
    }
}

/// Checks `network` on one `(input, target)` example.
pub fn check_network(
    network: &Network<f64>,
    input: &Tensor<f64>,
    target: &Tensor<f64>,
    mode: Mode,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let mut objective =
        NetworkObjective { network: network.clone(), input: input.clone(), target: target.clone(), mode };
    gradient_check(&mut objective, h, tol)
}
