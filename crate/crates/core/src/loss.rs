//! Per-sample evidential objectives and their analytic gradients with respect
//! to the concentration vector.
//!
//! The full objective is
//!
//! ```text
//! L = Σj m_j(α, y) w_j  −  λ1 · ln|I(α)|  +  λt · KL(Dir(α̂) ‖ Dir(1))
//! ```
//!
//! where `m_j = (y_j − α_j/α0)² + α_j(α0 − α_j)/(α0²(α0 + 1))`, the weights
//! are `w_j = ψ1(α_j)` for the Fisher-weighted MSE and `1` for the classical
//! one, and `α̂` replaces the true-class concentration with 1.

use crate::dirichlet::{DirichletParams, LOG_DET_INNER_FLOOR};
use crate::error::{Error, Result};
use crate::specfun::{tetragamma_raw, trigamma_raw};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHotLabel {
    class: usize,
    k: usize,
}

impl OneHotLabel {
    pub fn new(class: usize, k: usize) -> Result<Self> {
        if class >= k {
            return Err(Error::LabelRange { label: class, classes: k });
        }
        Ok(Self { class, k })
    }

    /// Parses an explicit indicator vector; exactly one entry must be 1 and
    /// the rest 0.
    pub fn from_indicator(y: &[f64]) -> Result<Self> {
        let ones: Vec<usize> = y.iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(i, _)| i).collect();
        let zeros = y.iter().filter(|&&v| v == 0.0).count();
        if ones.len() != 1 || ones.len() + zeros != y.len() {
            return Err(Error::InvalidArgument(format!("{y:?} is not a one-hot vector")));
        }
        Self::new(ones[0], y.len())
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        if j == self.class {
            1.0
        } else {
            0.0
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.k).map(|j| self.get(j)).collect()
    }
}

/// How the expected squared error is weighted per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MseWeighting {
    /// Unit weights: the classical evidential MSE.
    Plain,
    /// Trigamma weights ψ1(αj): the Fisher-diagonal-weighted MSE.
    Fisher,
}

/// Coefficients of one objective. `lambda1` multiplies −ln|I(α)|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub weighting: MseWeighting,
    pub lambda1: f64,
}

impl LossConfig {
    /// Classical EDL: plain MSE, no log-determinant.
    pub const EDL: LossConfig = LossConfig {
        weighting: MseWeighting::Plain,
        lambda1: 0.0,
    };

    pub fn iedl(lambda1: f64) -> Self {
        Self {
            weighting: MseWeighting::Fisher,
            lambda1,
        }
    }

    fn validate(&self, lambda_t: f64) -> Result<()> {
        if !(self.lambda1 >= 0.0) || !self.lambda1.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda1 must be >= 0, got {}", self.lambda1)));
        }
        if !(0.0..=1.0).contains(&lambda_t) {
            return Err(Error::InvalidArgument(format!("lambda_t must lie in [0, 1], got {lambda_t}")));
        }
        Ok(())
    }
}

/// Per-sample (or batch-mean) values of the three objective terms.
///
/// `total = mse − λ1·log_det + λt·kl` for the coefficients that produced it.
/// `mse` is the Fisher-weighted MSE under [`MseWeighting::Fisher`] and the
/// plain one otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub mse: f64,
    pub log_det: f64,
    pub kl: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// First non-finite term, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [("mse", self.mse), ("log_det", self.log_det), ("kl", self.kl), ("total", self.total)]
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(n, _)| n)
    }
}

fn check_dims(d: &DirichletParams, y: &OneHotLabel) -> Result<()> {
    if d.k() != y.k() {
        return Err(Error::Dimension {
            context: "label vs concentration",
            expected: d.k(),
            found: y.k(),
        });
    }
    Ok(())
}

/// Per-class expected squared error m_j = (y_j − p̂_j)² + Var(p_j).
fn per_class_mse<'a>(d: &'a DirichletParams, y: &OneHotLabel) -> impl Iterator<Item = f64> + 'a {
    let a0 = d.precision();
    let y = *y;
    d.alpha().iter().enumerate().map(move |(j, &a)| {
        let p = a / a0;
        let r = y.get(j) - p;
        r * r + p * (1.0 - p) / (a0 + 1.0)
    })
}

/// Σj w_j m_j for arbitrary per-class weights.
pub fn weighted_mse(d: &DirichletParams, y: &OneHotLabel, weights: &[f64]) -> Result<f64> {
    check_dims(d, y)?;
    if weights.len() != d.k() {
        return Err(Error::Dimension {
            context: "mse weights",
            expected: d.k(),
            found: weights.len(),
        });
    }
    Ok(per_class_mse(d, y).zip(weights).map(|(m, w)| m * w).sum())
}

/// E_{p~Dir(α)} ‖y − p‖².
pub fn edl_mse(d: &DirichletParams, y: &OneHotLabel) -> Result<f64> {
    check_dims(d, y)?;
    Ok(per_class_mse(d, y).sum())
}

/// E_{p~Dir(α)} [(y − p)ᵀ I(α) (y − p)]. The rank-one part of I(α) drops
/// out because y and p both sum to one.
pub fn i_mse(d: &DirichletParams, y: &OneHotLabel) -> Result<f64> {
    check_dims(d, y)?;
    Ok(per_class_mse(d, y).zip(d.alpha()).map(|(m, &a)| m * trigamma_raw(a)).sum())
}

fn truth_removed(d: &DirichletParams, y: &OneHotLabel) -> DirichletParams {
    let mut a = d.alpha().to_vec();
    a[y.class()] = 1.0;
    DirichletParams::new(a).expect("truth-removed concentrations stay valid")
}

/// KL(Dir(α̂) ‖ Dir(1)) with α̂ = α ⊙ (1 − y) + y.
pub fn kl_regularizer(d: &DirichletParams, y: &OneHotLabel) -> Result<f64> {
    check_dims(d, y)?;
    Ok(truth_removed(d, y).kl_to_uniform())
}

pub fn total_loss(d: &DirichletParams, y: &OneHotLabel, cfg: &LossConfig, lambda_t: f64) -> Result<LossBreakdown> {
    cfg.validate(lambda_t)?;
    let mse = match cfg.weighting {
        MseWeighting::Plain => edl_mse(d, y)?,
        MseWeighting::Fisher => i_mse(d, y)?,
    };
    let log_det = d.log_det_fim();
    let kl = kl_regularizer(d, y)?;
    Ok(LossBreakdown {
        mse,
        log_det,
        kl,
        total: mse - cfg.lambda1 * log_det + lambda_t * kl,
    })
}

/// ∂ total / ∂α, derived term by term.
pub fn grad_total_loss(d: &DirichletParams, y: &OneHotLabel, cfg: &LossConfig, lambda_t: f64) -> Result<Vec<f64>> {
    cfg.validate(lambda_t)?;
    check_dims(d, y)?;
    let k = d.k();
    let alpha = d.alpha();
    let a0 = d.precision();
    let mut grad = vec![0.0; k];

    // Expected-MSE term. With p̂ = α/α0, ∂p̂_j/∂α_k = (δjk − p̂_j)/α0 and
    // Var_j = p̂_j(1 − p̂_j)/(α0 + 1).
    let fisher = cfg.weighting == MseWeighting::Fisher;
    let weights: Vec<f64> = if fisher {
        alpha.iter().map(|&a| trigamma_raw(a)).collect()
    } else {
        vec![1.0; k]
    };
    let mut coef = vec![0.0; k];
    let mut coef_dot_p = 0.0;
    let mut var_shift = 0.0;
    for j in 0..k {
        let p = alpha[j] / a0;
        coef[j] = weights[j] * (2.0 * (p - y.get(j)) + (1.0 - 2.0 * p) / (a0 + 1.0));
        coef_dot_p += coef[j] * p;
        var_shift += weights[j] * p * (1.0 - p);
    }
    var_shift /= (a0 + 1.0) * (a0 + 1.0);
    for j in 0..k {
        grad[j] = (coef[j] - coef_dot_p) / a0 - var_shift;
    }
    if fisher {
        for (j, m) in per_class_mse(d, y).enumerate() {
            grad[j] += tetragamma_raw(alpha[j]) * m;
        }
    }

    // −λ1 ln|I|, with ln|I| = Σ ln ψ1(αj) + ln(1 − ψ1(α0) Σ 1/ψ1(αj)).
    if cfg.lambda1 != 0.0 {
        let t0 = trigamma_raw(a0);
        let q0 = tetragamma_raw(a0);
        let t: Vec<f64> = alpha.iter().map(|&a| trigamma_raw(a)).collect();
        let q: Vec<f64> = alpha.iter().map(|&a| tetragamma_raw(a)).collect();
        let recip_sum: f64 = t.iter().map(|v| 1.0 / v).sum();
        let inner = 1.0 - t0 * recip_sum;
        let clamped = inner <= LOG_DET_INNER_FLOOR;
        for j in 0..k {
            let mut g = q[j] / t[j];
            if !clamped {
                g += (t0 * q[j] / (t[j] * t[j]) - q0 * recip_sum) / inner;
            }
            grad[j] -= cfg.lambda1 * g;
        }
    }

    // λt KL(α̂): ∂/∂α̂_j = (α̂_j − 1)ψ1(α̂_j) − (Σα̂ − K)ψ1(Σα̂), and the true
    // class has no dependence on α.
    if lambda_t != 0.0 {
        let hat = truth_removed(d, y);
        let s = hat.precision();
        let excess = (s - k as f64) * trigamma_raw(s);
        for (j, &a) in hat.alpha().iter().enumerate() {
            if j != y.class() {
                grad[j] += lambda_t * ((a - 1.0) * trigamma_raw(a) - excess);
            }
        }
    }
    Ok(grad)
}

/// The four ablation objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    /// Plain MSE + KL.
    Edl,
    /// Plain MSE − λ1·ln|I| + KL.
    EdlLogDet,
    /// Fisher-weighted MSE + KL.
    FisherMse,
    /// Fisher-weighted MSE − λ1·ln|I| + KL.
    IEdl,
}

impl Objective {
    pub const ALL: [Objective; 4] = [Objective::Edl, Objective::EdlLogDet, Objective::FisherMse, Objective::IEdl];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Edl => "edl",
            Objective::EdlLogDet => "edl-logdet",
            Objective::FisherMse => "imse",
            Objective::IEdl => "iedl",
        }
    }

    /// Coefficients for this objective; `lambda1` is ignored by the variants
    /// without a log-determinant term.
    pub fn config(self, lambda1: f64) -> LossConfig {
        match self {
            Objective::Edl => LossConfig::EDL,
            Objective::EdlLogDet => LossConfig {
                weighting: MseWeighting::Plain,
                lambda1,
            },
            Objective::FisherMse => LossConfig {
                weighting: MseWeighting::Fisher,
                lambda1: 0.0,
            },
            Objective::IEdl => LossConfig::iedl(lambda1),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown objective {s:?}; expected one of edl, edl-logdet, imse, iedl")))
    }
}
