//! The Dirichlet distribution over the probability simplex: moments, the
//! closed-form Fisher information, KL to the uniform Dirichlet, sampling and
//! the closed-form uncertainty measures used for scoring.

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::seed;
use crate::specfun::{digamma_raw, ln_gamma_raw, trigamma_raw};

/// Lower clamp applied to `1 - Σ ψ1(α0)/ψ1(αk)` before taking its log.
pub const LOG_DET_INNER_FLOOR: f64 = 1e-15;

/// Concentration parameters of a Dirichlet over K ≥ 2 classes.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
    precision: f64,
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalProb(Vec<f64>);

impl CategoricalProb {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("probabilities must be finite and nonnegative".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {s}, not 1")));
        }
        Ok(Self(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Shannon entropy -Σ p ln p (0 ln 0 = 0).
    pub fn entropy(&self) -> f64 {
        -self.0.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// The Fisher information matrix diag(ψ1(α)) − ψ1(α0)·11ᵀ.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    diag_trigamma: Vec<f64>,
    precision_trigamma: f64,
}

impl FisherMatrix {
    pub fn k(&self) -> usize {
        self.diag_trigamma.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let off = -self.precision_trigamma;
        if i == j {
            self.diag_trigamma[i] + off
        } else {
            off
        }
    }

    /// ψ1(αk) for each class.
    pub fn class_trigamma(&self) -> &[f64] {
        &self.diag_trigamma
    }

    /// ψ1(α0).
    pub fn precision_trigamma(&self) -> f64 {
        self.precision_trigamma
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.k(), self.k(), |i, j| self.get(i, j))
    }

    /// Quadratic form vᵀ I v.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let diag: f64 = v.iter().zip(&self.diag_trigamma).map(|(x, t)| t * x * x).sum();
        let s: f64 = v.iter().sum();
        diag - self.precision_trigamma * s * s
    }
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a Dirichlet needs at least 2 classes, got {}",
                alpha.len()
            )));
        }
        if let Some(&bad) = alpha.iter().find(|&&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::Domain {
                what: "concentration parameter",
                value: bad,
            });
        }
        let precision = alpha.iter().sum();
        Ok(Self { alpha, precision })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    /// α0 = Σ αk.
    pub fn precision(&self) -> f64 {
        self.precision
    }

    pub fn max_alpha(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> CategoricalProb {
        CategoricalProb(self.alpha.iter().map(|a| a / self.precision).collect())
    }

    /// Subjective-logic belief masses (αk − 1)/α0 and uncertainty K/α0.
    /// Only defined for evidence-parameterized Dirichlets (every αk ≥ 1).
    pub fn belief_and_uncertainty(&self) -> Result<(Vec<f64>, f64)> {
        if let Some(&bad) = self.alpha.iter().find(|&&a| a < 1.0) {
            return Err(Error::Domain {
                what: "concentration below 1 for belief mass",
                value: bad,
            });
        }
        let belief = self.alpha.iter().map(|a| (a - 1.0) / self.precision).collect();
        Ok((belief, self.k() as f64 / self.precision))
    }

    /// Cov(pi, pj) = (δij αi α0 − αi αj) / (α0² (α0 + 1)).
    pub fn covariance(&self) -> DenseMatrix {
        let a0 = self.precision;
        let denom = a0 * a0 * (a0 + 1.0);
        DenseMatrix::from_fn(self.k(), self.k(), |i, j| {
            let ai = self.alpha[i];
            let diag = if i == j { ai * a0 } else { 0.0 };
            (diag - ai * self.alpha[j]) / denom
        })
    }

    pub fn fim(&self) -> FisherMatrix {
        FisherMatrix {
            diag_trigamma: self.alpha.iter().map(|&a| trigamma_raw(a)).collect(),
            precision_trigamma: trigamma_raw(self.precision),
        }
    }

    /// ln |I(α)| through the matrix-determinant lemma.
    pub fn log_det_fim(&self) -> f64 {
        let t0 = trigamma_raw(self.precision);
        let mut sum_log = 0.0;
        let mut sum_ratio = 0.0;
        for &a in &self.alpha {
            let t = trigamma_raw(a);
            sum_log += t.ln();
            sum_ratio += t0 / t;
        }
        sum_log + (1.0 - sum_ratio).max(LOG_DET_INNER_FLOOR).ln()
    }

    /// KL(Dir(α) ‖ Dir(1)).
    pub fn kl_to_uniform(&self) -> f64 {
        let k = self.k() as f64;
        let a0 = self.precision;
        let psi0 = digamma_raw(a0);
        let mut kl = ln_gamma_raw(a0) - ln_gamma_raw(k);
        for &a in &self.alpha {
            kl += -ln_gamma_raw(a) + (a - 1.0) * (digamma_raw(a) - psi0);
        }
        kl
    }

    /// E_{p~Dir(α)}[H(p)] = −Σ (αk/α0)(ψ(αk + 1) − ψ(α0 + 1)).
    pub fn expected_entropy(&self) -> f64 {
        let a0 = self.precision;
        let psi0 = digamma_raw(a0 + 1.0);
        -self
            .alpha
            .iter()
            .map(|&a| a / a0 * (digamma_raw(a + 1.0) - psi0))
            .sum::<f64>()
    }

    /// H[E p] − E[H(p)], written as a single sum.
    pub fn mutual_information(&self) -> f64 {
        let a0 = self.precision;
        let psi0 = digamma_raw(a0 + 1.0);
        -self
            .alpha
            .iter()
            .map(|&a| {
                let p = a / a0;
                p * (p.ln() - digamma_raw(a + 1.0) + psi0)
            })
            .sum::<f64>()
    }

    /// Differential entropy of Dir(α).
    pub fn differential_entropy(&self) -> f64 {
        let a0 = self.precision;
        let psi0 = digamma_raw(a0);
        let mut h = -ln_gamma_raw(a0);
        for &a in &self.alpha {
            h += ln_gamma_raw(a) - (a - 1.0) * (digamma_raw(a) - psi0);
        }
        h
    }

    /// ln Dir(p | α). Returns −∞ outside the open simplex.
    pub fn log_pdf(&self, p: &[f64]) -> f64 {
        if p.len() != self.k() || p.iter().any(|&v| v <= 0.0) {
            return f64::NEG_INFINITY;
        }
        let mut lp = ln_gamma_raw(self.precision);
        for (&a, &v) in self.alpha.iter().zip(p) {
            lp += (a - 1.0) * v.ln() - ln_gamma_raw(a);
        }
        lp
    }

    /// One draw, by normalizing K independent Gamma(αk, 1) variates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CategoricalProb {
        let mut g: Vec<f64> = self
            .alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("validated shape").sample(rng))
            .collect();
        let s: f64 = g.iter().sum();
        for v in &mut g {
            *v /= s;
        }
        CategoricalProb(g)
    }
}

/// Monte-Carlo estimate of E[s sᵀ] with s = ∂ ln Dir(p|α)/∂α, alongside
/// per-entry standard errors.
#[derive(Debug, Clone)]
pub struct FimEstimate {
    pub mean: DenseMatrix,
    pub std_err: DenseMatrix,
    pub used: usize,
    pub skipped: usize,
}

pub const FIM_MC_MIN_SAMPLES: usize = 1000;

pub fn fim_monte_carlo(d: &DirichletParams, n_samples: usize, seed: u64) -> Result<FimEstimate> {
    if n_samples < FIM_MC_MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "fim_monte_carlo needs at least {FIM_MC_MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let k = d.k();
    let mut rng = seed::rng(seed);
    let psi0 = digamma_raw(d.precision());
    let base: Vec<f64> = d.alpha().iter().map(|&a| psi0 - digamma_raw(a)).collect();

    let mut sum = vec![0.0; k * k];
    let mut sum_sq = vec![0.0; k * k];
    let mut score = vec![0.0; k];
    let mut used = 0usize;
    let mut skipped = 0usize;
    for _ in 0..n_samples {
        let p = d.sample(&mut rng);
        if p.as_slice().iter().any(|&v| v <= 0.0) {
            skipped += 1;
            continue;
        }
        for ((s, b), &v) in score.iter_mut().zip(&base).zip(p.as_slice()) {
            *s = b + v.ln();
        }
        for i in 0..k {
            for j in 0..k {
                let v = score[i] * score[j];
                sum[i * k + j] += v;
                sum_sq[i * k + j] += v * v;
            }
        }
        used += 1;
    }
    if used < 2 {
        return Err(Error::InvalidArgument("every Monte-Carlo draw was degenerate".into()));
    }
    if skipped as f64 > 0.001 * n_samples as f64 {
        warn!("fim_monte_carlo skipped {skipped} of {n_samples} degenerate draws");
    }
    let n = used as f64;
    let mean = DenseMatrix::from_fn(k, k, |i, j| sum[i * k + j] / n);
    let std_err = DenseMatrix::from_fn(k, k, |i, j| {
        let m = sum[i * k + j] / n;
        let var = (sum_sq[i * k + j] / n - m * m).max(0.0) * n / (n - 1.0);
        (var / n).sqrt()
    });
    Ok(FimEstimate {
        mean,
        std_err,
        used,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn dir(a: &[f64]) -> DirichletParams {
        DirichletParams::new(a.to_vec()).unwrap()
    }

    #[test]
    fn rejects_invalid_alpha() {
        assert!(DirichletParams::new(vec![1.0]).is_err());
        assert!(DirichletParams::new(vec![1.0, 0.0]).is_err());
        assert!(DirichletParams::new(vec![1.0, f64::NAN]).is_err());
        assert!(DirichletParams::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn mean_examples() {
        assert_eq!(dir(&[1.0, 1.0]).mean().as_slice(), &[0.5, 0.5]);
        assert_eq!(dir(&[3.0, 1.0]).mean().as_slice(), &[0.75, 0.25]);
        assert_eq!(dir(&[2.0, 3.0, 5.0]).mean().as_slice(), &[0.2, 0.3, 0.5]);
    }

    #[test]
    fn belief_examples() {
        let (b, u) = dir(&[1.0, 1.0]).belief_and_uncertainty().unwrap();
        assert_eq!((b, u), (vec![0.0, 0.0], 1.0));
        let (b, u) = dir(&[3.0, 1.0]).belief_and_uncertainty().unwrap();
        assert_eq!((b.clone(), u), (vec![0.5, 0.0], 0.5));
        assert!((u + b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let mut a = vec![1.0; 10];
        a[0] = 11.0;
        assert_eq!(dir(&a).belief_and_uncertainty().unwrap().1, 0.5);
        assert!(dir(&[0.5, 2.0]).belief_and_uncertainty().is_err());
    }

    #[test]
    fn covariance_examples() {
        let c = dir(&[1.0, 1.0]).covariance();
        assert!((c.get(0, 0) - 1.0 / 12.0).abs() < 1e-15);
        assert!((c.get(0, 1) + 1.0 / 12.0).abs() < 1e-15);
        let c = dir(&[2.0, 2.0]).covariance();
        assert!((c.get(1, 1) - 0.05).abs() < 1e-15);
        assert!((c.get(1, 0) + 0.05).abs() < 1e-15);
    }

    #[test]
    fn fim_examples() {
        let f = dir(&[1.0, 1.0]).fim();
        assert!((f.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((f.get(0, 1) - (1.0 - PI * PI / 6.0)).abs() < 1e-12);
        let f = dir(&[2.0, 2.0]).fim();
        assert!((f.get(0, 0) - 13.0 / 36.0).abs() < 1e-12);
        assert!((f.get(1, 0) + 0.283_822_955_737_115_3).abs() < 1e-12);
        assert!(f.to_dense().is_symmetric(0.0));
    }

    #[test]
    fn log_det_examples() {
        let d = dir(&[1.0, 1.0]);
        assert!((d.log_det_fim() - (-0.537_751_477_093_040_3)).abs() < 1e-12);
        assert!((d.log_det_fim() - d.fim().to_dense().determinant().ln()).abs() < 1e-12);
        let d = dir(&[1.0, 1.0, 1.0]);
        assert!((d.log_det_fim() - 0.219_158_440_238_958_9).abs() < 1e-12);
    }

    #[test]
    fn log_det_clamps_in_the_degenerate_regime() {
        // Near-uniform huge concentrations make the inner term round to ≤ 0.
        let d = dir(&[1e12, 1e12, 1e12]);
        assert!(d.log_det_fim().is_finite());
    }

    #[test]
    fn kl_examples() {
        for k in 2..7 {
            assert_eq!(dir(&vec![1.0; k]).kl_to_uniform(), 0.0);
        }
        let kl21 = dir(&[2.0, 1.0]).kl_to_uniform();
        assert!((kl21 - (LN_2 - 0.5)).abs() < 1e-12);
        assert!(dir(&[10.0, 1.0]).kl_to_uniform() > kl21);
    }

    #[test]
    fn entropy_family_examples() {
        let d = dir(&[1.0, 1.0]);
        assert!((d.expected_entropy() - 0.5).abs() < 1e-12);
        assert!((d.mutual_information() - (LN_2 - 0.5)).abs() < 1e-12);
        assert!(d.differential_entropy().abs() < 1e-12);
        assert!((dir(&[1.0, 1.0, 1.0]).differential_entropy() + LN_2).abs() < 1e-12);

        let sharp = dir(&[1e6; 4]);
        assert!((sharp.expected_entropy() - 4f64.ln()).abs() < 1e-5);
        assert!(sharp.mutual_information().abs() < 1e-5);

        assert!(dir(&[5.0, 5.0]).differential_entropy() < dir(&[2.0, 2.0]).differential_entropy());
        assert!(dir(&[5.0, 5.0]).differential_entropy() < 0.0);
    }

    #[test]
    fn mutual_information_decomposes() {
        for a in [[0.7, 3.0, 12.0], [1.0, 1.0, 50.0], [4.0, 4.0, 4.0]] {
            let d = dir(&a);
            let lhs = d.mutual_information();
            let rhs = d.mean().entropy() - d.expected_entropy();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn fim_mc_rejects_small_n() {
        assert!(fim_monte_carlo(&dir(&[1.0, 1.0]), 0, 1).is_err());
        assert!(fim_monte_carlo(&dir(&[1.0, 1.0]), 999, 1).is_err());
    }

    #[test]
    fn sample_is_seeded_and_concentrates() {
        let d = dir(&[1e6, 1e6]);
        let mut rng = seed::rng(3);
        for _ in 0..100 {
            let p = d.sample(&mut rng);
            assert!((p.as_slice()[0] - 0.5).abs() < 0.01);
        }
        let d = dir(&[2.0, 3.0, 5.0]);
        let mut r1 = seed::rng(11);
        let mut r2 = seed::rng(11);
        for _ in 0..10 {
            assert_eq!(d.sample(&mut r1), d.sample(&mut r2));
        }
    }
}
