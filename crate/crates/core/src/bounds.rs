//! Closed-form sample-complexity bounds for learning a hidden tree model
//! through a binary symmetric channel, together with the helper functions the
//! bounds are built from.
//!
//! Bounds are returned as real sample counts; callers take the ceiling. Every
//! bound is `+inf` once `q >= 1/2`, where the channel output is independent of
//! its input.
//!
//! Notation: `c = 1 - 2q`, `t = tanh(beta)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Parameters shared by all bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    /// Number of vertices.
    pub p: usize,
    /// Weakest interaction magnitude.
    pub alpha: f64,
    /// Strongest interaction magnitude.
    pub beta: f64,
    /// Channel crossover probability.
    pub q: f64,
    /// Allowed failure probability.
    pub delta: f64,
    /// Target second-order ssTV.
    pub eta: f64,
    /// Target symmetric KL divergence.
    pub eta_s: f64,
}

impl BoundInputs {
    pub fn new(p: usize, alpha: f64, beta: f64, q: f64, delta: f64) -> Self {
        BoundInputs { p, alpha, beta, q, delta, eta: 0.1, eta_s: 0.1 }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        BoundInputs { eta, ..self }
    }

    pub fn with_eta_s(self, eta_s: f64) -> Self {
        BoundInputs { eta_s, ..self }
    }

    pub fn with_q(self, q: f64) -> Self {
        BoundInputs { q, ..self }
    }

    /// Checks everything except the `q < 1/2` range, which bounds answer with
    /// `+inf` instead of an error.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInputs(msg));
        if self.p < 2 {
            return bad(format!("p must be at least 2, got {}", self.p));
        }
        if !(self.alpha > 0.0 && self.alpha <= self.beta && self.beta.is_finite()) {
            return bad(format!("need 0 < alpha <= beta < inf, got alpha = {}, beta = {}", self.alpha, self.beta));
        }
        if !(self.q >= 0.0) {
            return bad(format!("q must be nonnegative, got {}", self.q));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        Ok(())
    }

    fn c(&self) -> f64 {
        1.0 - 2.0 * self.q
    }

    fn channel_open(&self) -> bool {
        self.q < 0.5
    }

    fn check_eta(&self) -> Result<()> {
        if self.eta > 0.0 && self.eta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInputs(format!("eta must be positive, got {}", self.eta)))
        }
    }
}

/// `[1 - (4q(1-q))^p]^(-1)`, the strong data-processing inflation for the
/// channel on `p` coordinates. Equal to 1 at `q = 0`.
pub fn sdpi_factor(q: f64, p: usize) -> f64 {
    let contraction = 4.0 * q * (1.0 - q);
    1.0 / (1.0 - contraction.powi(p as i32))
}

/// Samples sufficient for exact structure recovery with probability `1 - delta`:
///
/// `32 [1 - c^4 t] / (c^4 (1 - t)^2 tanh^2(alpha)) * log(2 p^2 / delta)`.
pub fn n_sufficient_structure(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if !inputs.channel_open() {
        return Ok(f64::INFINITY);
    }
    let c4 = inputs.c().powi(4);
    let t = inputs.beta.tanh();
    let ta = inputs.alpha.tanh();
    let p = inputs.p as f64;
    Ok(32.0 * (1.0 - c4 * t) / (c4 * (1.0 - t).powi(2) * ta * ta) * (2.0 * p * p / inputs.delta).ln())
}

/// Below this many samples no estimator recovers the structure with
/// probability above 1/2:
///
/// `sdpi / (16 alpha tanh(alpha)) * e^(2 beta) * log p`.
pub fn n_necessary_structure(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if !inputs.channel_open() {
        return Ok(f64::INFINITY);
    }
    let a = inputs.alpha;
    Ok(sdpi_factor(inputs.q, inputs.p) / (16.0 * a * a.tanh()) * (2.0 * inputs.beta).exp() * (inputs.p as f64).ln())
}

/// Samples sufficient for second-order ssTV at most `eta` with probability
/// `1 - delta`:
///
/// `max{512 / (eta^2 c^4), 1152 e^(2 beta) B / c^4, 48 e^(4 beta) Gamma / eta^2} * log(6 p^3 / delta)`.
pub fn n_sufficient_predictive(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    inputs.check_eta()?;
    if !inputs.channel_open() {
        return Ok(f64::INFINITY);
    }
    let (beta, q, eta) = (inputs.beta, inputs.q, inputs.eta);
    let c4 = inputs.c().powi(4);
    let accuracy = 512.0 / (eta * eta * c4);
    let cascade = 1152.0 * (2.0 * beta).exp() * b_fn(beta, q) / c4;
    let weak = 48.0 * (4.0 * beta).exp() / (eta * eta) * gamma_fn(beta, q);
    let p = inputs.p as f64;
    Ok(accuracy.max(cascade).max(weak) * (6.0 * p.powi(3) / inputs.delta).ln())
}

/// Below this many samples no estimator reaches ssTV at most `eta` with
/// probability above 1/2:
///
/// `(1 - (tanh(alpha) + 2 eta)^2) / (16 eta^2) * sdpi * log p`.
///
/// Requires `tanh(alpha) + 2 eta < tanh(beta)`.
pub fn n_necessary_predictive(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    inputs.check_eta()?;
    let reach = inputs.alpha.tanh() + 2.0 * inputs.eta;
    if !(reach < inputs.beta.tanh()) {
        return Err(Error::InvalidInputs(format!(
            "need tanh(alpha) + 2 eta < tanh(beta), got {reach} >= {}",
            inputs.beta.tanh()
        )));
    }
    if !inputs.channel_open() {
        return Ok(f64::INFINITY);
    }
    let eta = inputs.eta;
    Ok((1.0 - reach * reach) / (16.0 * eta * eta) * sdpi_factor(inputs.q, inputs.p) * (inputs.p as f64).ln())
}

/// Samples sufficient for symmetric KL at most `eta_s` with probability
/// `1 - delta`:
///
/// `4 beta^2 (p - 1)^2 / (c^4 eta_s^2) * log(p^2 / delta)`.
pub fn n_sufficient_skl(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if !(inputs.eta_s > 0.0 && inputs.eta_s.is_finite()) {
        return Err(Error::InvalidInputs(format!("eta_s must be positive, got {}", inputs.eta_s)));
    }
    if !inputs.channel_open() {
        return Ok(f64::INFINITY);
    }
    let p = inputs.p as f64;
    let c4 = inputs.c().powi(4);
    Ok(4.0 * inputs.beta.powi(2) * (p - 1.0).powi(2) / (c4 * inputs.eta_s.powi(2)) * (p * p / inputs.delta).ln())
}

/// `Gamma(beta, q) = ((1 - c^2) / (1 - c^4 t^2))^2`, in `[0, 1]`, zero at `q = 0`.
pub fn gamma_fn(beta: f64, q: f64) -> f64 {
    let c2 = (1.0 - 2.0 * q).powi(2);
    let t2 = beta.tanh().powi(2);
    ((1.0 - c2) / (1.0 - c2 * c2 * t2)).powi(2)
}

/// `K(beta, q) = 10 (1 - t^2) / (9 + c^2 - t^2 c^2 (9 c^2 + 1))`; equals 1 at `q = 0`.
pub fn k_fn(beta: f64, q: f64) -> f64 {
    let c2 = (1.0 - 2.0 * q).powi(2);
    let t2 = beta.tanh().powi(2);
    10.0 * (1.0 - t2) / (9.0 + c2 - t2 * c2 * (9.0 * c2 + 1.0))
}

/// `B(beta, q) = max{1 / K, (1 + 2 e^beta sqrt(2 (1-q) q t))^2}`; equals 1 at `q = 0`.
pub fn b_fn(beta: f64, q: f64) -> f64 {
    let leak = 1.0 + 2.0 * beta.exp() * (2.0 * (1.0 - q) * q * beta.tanh()).sqrt();
    (1.0 / k_fn(beta, q)).max(leak * leak)
}

/// `S(beta, q) = 2 + c^2 (1 - c^2) t^2 / 6`.
pub fn s_fn(beta: f64, q: f64) -> f64 {
    let c2 = (1.0 - 2.0 * q).powi(2);
    2.0 + c2 * (1.0 - c2) * beta.tanh().powi(2) / 6.0
}

/// `A(beta, q) = c^2 [1 - t (1 - c^2)]`.
pub fn a_fn(beta: f64, q: f64) -> f64 {
    let c2 = (1.0 - 2.0 * q).powi(2);
    c2 * (1.0 - beta.tanh() * (1.0 - c2))
}

/// `G(beta, q; d) = 3 / (4 c^2) [d (1 - A) ((A + 2) / 3)^d + 1]` for a path of
/// `d` edges.
pub fn g_fn(beta: f64, q: f64, d: usize) -> f64 {
    let c2 = (1.0 - 2.0 * q).powi(2);
    let a = a_fn(beta, q);
    3.0 / (4.0 * c2) * (d as f64 * (1.0 - a) * ((a + 2.0) / 3.0).powi(d as i32) + 1.0)
}

/// Bound on `G` uniform in `d`: `3 (3/e * 1[q != 0] + 1) / (4 c^2)`.
pub fn g_upper(q: f64) -> f64 {
    let c2 = (1.0 - 2.0 * q).powi(2);
    let noisy = if q != 0.0 { 3.0 / std::f64::consts::E } else { 0.0 };
    3.0 * (noisy + 1.0) / (4.0 * c2)
}

/// `Delta = (1 - c^2) / (1 - c^4 t^2) * sqrt(3 log(2 p^3 / delta) / n) * t^2 e^(2 beta)`.
pub fn delta_fn(beta: f64, q: f64, p: usize, delta: f64, n: f64) -> f64 {
    let c2 = (1.0 - 2.0 * q).powi(2);
    let t2 = beta.tanh().powi(2);
    let p = p as f64;
    (1.0 - c2) / (1.0 - c2 * c2 * t2) * (3.0 * (2.0 * p.powi(3) / delta).ln() / n).sqrt() * t2 * (2.0 * beta).exp()
}

/// Correlation estimation accuracy `sqrt(2 log(2 p^2 / delta) / n)`.
pub fn eps_dagger(p: usize, delta: f64, n: f64) -> f64 {
    let p = p as f64;
    (2.0 * (2.0 * p * p / delta).ln() / n).sqrt()
}

/// Strong-edge threshold `4 eps sqrt(1 - c^4 t) / (c^2 (1 - t))`: edges with
/// `tanh|theta| >= tau` are recovered once correlations are within `eps`.
/// Reduces to `4 eps / sqrt(1 - t)` at `q = 0`.
pub fn tau_dagger(beta: f64, q: f64, eps: f64) -> f64 {
    let c2 = (1.0 - 2.0 * q).powi(2);
    let t = beta.tanh();
    4.0 * eps * (1.0 - c2 * c2 * t).sqrt() / (c2 * (1.0 - t))
}

/// Simplified structure bound with an unspecified constant:
/// `C e^(2 beta (1 + 1[q != 0])) / (c^4 tanh^2 alpha) * log(p / delta)`.
pub fn loose_n_sufficient_structure(inputs: &BoundInputs, constant: f64) -> Result<f64> {
    inputs.validate()?;
    if !inputs.channel_open() {
        return Ok(f64::INFINITY);
    }
    let noisy = if inputs.q != 0.0 { 1.0 } else { 0.0 };
    let c4 = inputs.c().powi(4);
    Ok(constant * (2.0 * inputs.beta * (1.0 + noisy)).exp() / (c4 * inputs.alpha.tanh().powi(2))
        * (inputs.p as f64 / inputs.delta).ln())
}

/// Simplified predictive bound with an unspecified constant:
/// `C max{1 / (eta^2 c^4), e^(2 beta (1 + 1[q != 0])) / c^4, e^(4 beta) 1[q != 0] / eta^2} * log(p / delta)`.
pub fn loose_n_sufficient_predictive(inputs: &BoundInputs, constant: f64) -> Result<f64> {
    inputs.validate()?;
    inputs.check_eta()?;
    if !inputs.channel_open() {
        return Ok(f64::INFINITY);
    }
    let noisy = if inputs.q != 0.0 { 1.0 } else { 0.0 };
    let (beta, eta) = (inputs.beta, inputs.eta);
    let c4 = inputs.c().powi(4);
    let terms = [
        1.0 / (eta * eta * c4),
        (2.0 * beta * (1.0 + noisy)).exp() / c4,
        (4.0 * beta).exp() * noisy / (eta * eta),
    ];
    Ok(constant * terms.into_iter().fold(0.0, f64::max) * (inputs.p as f64 / inputs.delta).ln())
}

/// Bounds for directly observed samples (`q = 0`), written in their own
/// closed forms.
pub mod noiseless {
    /// `32 / (tanh^2(alpha) (1 - tanh(beta))) * log(2 p^2 / delta)`.
    pub fn structure_sufficient(p: usize, alpha: f64, beta: f64, delta: f64) -> f64 {
        let p = p as f64;
        32.0 / (alpha.tanh().powi(2) * (1.0 - beta.tanh())) * (2.0 * p * p / delta).ln()
    }

    /// `e^(2 beta) / (16 alpha tanh(alpha)) * log p`.
    pub fn structure_necessary(p: usize, alpha: f64, beta: f64) -> f64 {
        (2.0 * beta).exp() / (16.0 * alpha * alpha.tanh()) * (p as f64).ln()
    }

    /// `max{512 / eta^2, 1152 e^(2 beta)} * log(6 p^3 / delta)`.
    pub fn predictive_sufficient(p: usize, beta: f64, delta: f64, eta: f64) -> f64 {
        (512.0 / (eta * eta)).max(1152.0 * (2.0 * beta).exp()) * (6.0 * (p as f64).powi(3) / delta).ln()
    }

    /// `(1 - (tanh(alpha) + 2 eta)^2) / (16 eta^2) * log p`.
    pub fn predictive_necessary(p: usize, alpha: f64, eta: f64) -> f64 {
        (1.0 - (alpha.tanh() + 2.0 * eta).powi(2)) / (16.0 * eta * eta) * (p as f64).ln()
    }

    /// `4 beta^2 (p - 1)^2 / eta_s^2 * log(p^2 / delta)`.
    pub fn skl_sufficient(p: usize, beta: f64, delta: f64, eta_s: f64) -> f64 {
        let p = p as f64;
        4.0 * beta * beta * (p - 1.0).powi(2) / (eta_s * eta_s) * (p * p / delta).ln()
    }
}

/// Every bound and helper for one set of inputs; bounds whose hypotheses fail
/// are `None`. Infinite values serialize as JSON `null`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub n_sufficient_structure: Option<f64>,
    pub n_necessary_structure: Option<f64>,
    pub n_sufficient_predictive: Option<f64>,
    pub n_necessary_predictive: Option<f64>,
    pub n_sufficient_skl: Option<f64>,
    pub loose_n_sufficient_structure: Option<f64>,
    pub loose_n_sufficient_predictive: Option<f64>,
    pub noiseless_structure_sufficient: f64,
    pub sdpi_factor: f64,
    pub gamma: f64,
    pub k: f64,
    pub b: f64,
    pub s: f64,
    pub g_upper: f64,
}

impl BoundReport {
    pub fn new(inputs: BoundInputs) -> Result<Self> {
        inputs.validate()?;
        let (beta, q) = (inputs.beta, inputs.q);
        Ok(BoundReport {
            inputs,
            n_sufficient_structure: n_sufficient_structure(&inputs).ok(),
            n_necessary_structure: n_necessary_structure(&inputs).ok(),
            n_sufficient_predictive: n_sufficient_predictive(&inputs).ok(),
            n_necessary_predictive: n_necessary_predictive(&inputs).ok(),
            n_sufficient_skl: n_sufficient_skl(&inputs).ok(),
            loose_n_sufficient_structure: loose_n_sufficient_structure(&inputs, 1.0).ok(),
            loose_n_sufficient_predictive: loose_n_sufficient_predictive(&inputs, 1.0).ok(),
            noiseless_structure_sufficient: noiseless::structure_sufficient(inputs.p, inputs.alpha, beta, inputs.delta),
            sdpi_factor: sdpi_factor(q, inputs.p),
            gamma: gamma_fn(beta, q),
            k: k_fn(beta, q),
            b: b_fn(beta, q),
            s: s_fn(beta, q),
            g_upper: g_upper(q),
        })
    }
}
