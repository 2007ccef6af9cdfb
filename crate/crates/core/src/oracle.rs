//! Independent numerical cross-checks of the closed forms and gradients:
//! Monte-Carlo estimates, direct determinants and finite differences.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use rand::Rng;

use crate::data::Dataset;
use crate::dirichlet::{fim_monte_carlo, DirichletParams};
use crate::error::Result;
use crate::loss::{edl_mse, grad_total_loss, i_mse, kl_regularizer, total_loss, LossConfig, MseWeighting, OneHotLabel};
use crate::net::{EvidentialMlp, LabeledBatch};
use crate::seed;
use crate::specfun::{trigamma, PositiveReal};

/// Outcome of one check: `measured` is compared against `bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub group: &'static str,
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn le(group: &'static str, name: String, measured: f64, bound: f64) -> Self {
        Self {
            group,
            name,
            measured,
            bound,
            passed: measured <= bound,
        }
    }
}

impl fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<14} {:<44} measured {:.3e}  bound {:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.group,
            self.name,
            self.measured,
            self.bound
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub seed: u64,
    /// Monte-Carlo draws per estimate.
    pub mc_samples: usize,
}

impl OracleConfig {
    pub const FULL_SAMPLES: usize = 200_000;

    pub fn full(seed: u64) -> Self {
        Self {
            seed,
            mc_samples: Self::FULL_SAMPLES,
        }
    }

    /// Ten times fewer Monte-Carlo draws.
    pub fn quick(seed: u64) -> Self {
        Self {
            seed,
            mc_samples: Self::FULL_SAMPLES / 10,
        }
    }
}

fn random_alpha<R: Rng>(rng: &mut R, k: usize, lo: f64, hi: f64) -> DirichletParams {
    DirichletParams::new((0..k).map(|_| rng.gen_range(lo..hi)).collect()).expect("positive draws")
}

fn fmt_alpha(d: &DirichletParams) -> String {
    let parts: Vec<String> = d.alpha().iter().map(|a| format!("{a:.2}")).collect();
    format!("({})", parts.join(","))
}

/// Largest |MC − analytic| / SE over all FIM entries, 20 random α.
pub fn fim_vs_monte_carlo(cfg: &OracleConfig) -> Result<Vec<OracleCheck>> {
    let mut rng = seed::rng(seed::derive(cfg.seed, "oracle/fim-alpha", 0));
    let mut out = Vec::new();
    for i in 0..20 {
        let k = [2, 3, 5][i % 3];
        let d = random_alpha(&mut rng, k, 0.5, 10.0);
        let est = fim_monte_carlo(&d, cfg.mc_samples, seed::derive(cfg.seed, "oracle/fim-mc", i as u64))?;
        let fim = d.fim();
        let mut worst: f64 = 0.0;
        for r in 0..k {
            for c in 0..k {
                let z = (est.mean.get(r, c) - fim.get(r, c)).abs() / est.std_err.get(r, c);
                worst = worst.max(z);
            }
        }
        out.push(OracleCheck::le("fim-mc", format!("K={k} alpha={}", fmt_alpha(&d)), worst, 3.0));
    }
    Ok(out)
}

/// Matrix-determinant-lemma log-det against an LU determinant.
pub fn log_det_vs_direct(cfg: &OracleConfig) -> Vec<OracleCheck> {
    let mut rng = seed::rng(seed::derive(cfg.seed, "oracle/logdet", 0));
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for k in 2..=6 {
        for _ in 0..20 {
            let d = random_alpha(&mut rng, k, 0.5, 10.0);
            let direct = d.fim().to_dense().determinant();
            let lemma = d.log_det_fim().exp();
            worst = worst.max((lemma - direct).abs() / direct.abs());
            cases += 1;
        }
    }
    vec![OracleCheck::le("logdet", format!("{cases} random alpha, K=2..6 (relative)"), worst, 1e-10)]
}

/// Closed-form expected MSEs against sample means, in standard errors.
pub fn mse_vs_monte_carlo(cfg: &OracleConfig) -> Result<Vec<OracleCheck>> {
    let mut rng = seed::rng(seed::derive(cfg.seed, "oracle/mse-alpha", 0));
    let mut out = Vec::new();
    for i in 0..6 {
        let k = [2, 3, 5][i % 3];
        let d = random_alpha(&mut rng, k, 0.5, 10.0);
        let y = OneHotLabel::new(rng.gen_range(0..k), k)?;
        let yv = y.to_vec();
        let fim = d.fim();
        let mut draws = seed::rng(seed::derive(cfg.seed, "oracle/mse-mc", i as u64));
        let (mut s_plain, mut s2_plain, mut s_fim, mut s2_fim) = (0.0, 0.0, 0.0, 0.0);
        let mut r = vec![0.0; k];
        for _ in 0..cfg.mc_samples {
            let p = d.sample(&mut draws);
            for ((rj, yj), pj) in r.iter_mut().zip(&yv).zip(p.as_slice()) {
                *rj = yj - pj;
            }
            let plain: f64 = r.iter().map(|v| v * v).sum();
            let weighted = fim.quadratic_form(&r);
            s_plain += plain;
            s2_plain += plain * plain;
            s_fim += weighted;
            s2_fim += weighted * weighted;
        }
        let n = cfg.mc_samples as f64;
        let z = |s: f64, s2: f64, exact: f64| {
            let m = s / n;
            let se = ((s2 / n - m * m).max(0.0) / (n - 1.0)).sqrt();
            (m - exact).abs() / se
        };
        let tag = format!("K={k} y={} alpha={}", y.class(), fmt_alpha(&d));
        out.push(OracleCheck::le("edl-mse-mc", tag.clone(), z(s_plain, s2_plain, edl_mse(&d, &y)?), 3.0));
        out.push(OracleCheck::le("i-mse-mc", tag, z(s_fim, s2_fim, i_mse(&d, &y)?), 3.0));
    }
    Ok(out)
}

/// Worst per-component mismatch between the analytic loss gradient and a
/// central difference, relative with a 1e-7 absolute floor.
pub fn loss_gradient_vs_fd(cfg: &OracleConfig) -> Result<Vec<OracleCheck>> {
    let mut rng = seed::rng(seed::derive(cfg.seed, "oracle/grad", 0));
    let mut worst: f64 = 0.0;
    let mut where_ = String::new();
    for i in 0..100 {
        let k = [2, 3, 10][i % 3];
        let d = random_alpha(&mut rng, k, 1.0, 50.0);
        let y = OneHotLabel::new(rng.gen_range(0..k), k)?;
        let lcfg = LossConfig {
            weighting: if rng.gen_bool(0.5) { MseWeighting::Fisher } else { MseWeighting::Plain },
            lambda1: rng.gen_range(0.0..0.1),
        };
        let lt = rng.gen_range(0.0..1.0);
        let g = grad_total_loss(&d, &y, &lcfg, lt)?;
        for j in 0..k {
            let h = 1e-5 * d.alpha()[j];
            let f = |delta: f64| -> Result<f64> {
                let mut a = d.alpha().to_vec();
                a[j] += delta;
                Ok(total_loss(&DirichletParams::new(a)?, &y, &lcfg, lt)?.total)
            };
            let fd = (f(h)? - f(-h)?) / (2.0 * h);
            // 1e-4 relative with a 1e-7 absolute floor.
            let err = (g[j] - fd).abs() / fd.abs().max(1e-3);
            if err > worst {
                worst = err;
                where_ = format!("point {i} K={k} component {j}");
            }
        }
    }
    Ok(vec![OracleCheck::le("loss-grad-fd", format!("100 points, worst at {where_}"), worst, 1e-4)])
}

/// Backpropagated parameter gradient of a 2-4-2 net on 3 samples against
/// central differences over every parameter.
pub fn network_gradient_vs_fd(cfg: &OracleConfig) -> Result<Vec<OracleCheck>> {
    let mut rng = seed::rng(seed::derive(cfg.seed, "oracle/net-data", 0));
    let features: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let data = Dataset::labeled("fd", features, 2, vec![0, 1, 1], 2)?;
    let batch = LabeledBatch::full(&data)?;
    let mut model = EvidentialMlp::new(&[2, 4, 2], seed::derive(cfg.seed, "oracle/net-init", 0))?;
    let mut out = Vec::new();
    for (name, lcfg) in [("edl", LossConfig::EDL), ("iedl", LossConfig::iedl(0.05))] {
        let lt = 0.5;
        let analytic = model.loss_and_gradient(&batch, &lcfg, lt)?.gradient;
        let base = model.parameters().to_vec();
        let mut worst: f64 = 0.0;
        for p in 0..base.len() {
            let h = 1e-6;
            let mut eval = |delta: f64| -> Result<f64> {
                let mut q = base.clone();
                q[p] += delta;
                model.set_parameters(&q)?;
                Ok(model.loss_and_gradient(&batch, &lcfg, lt)?.loss.total)
            };
            let fd = (eval(h)? - eval(-h)?) / (2.0 * h);
            let scale = analytic[p].abs().max(fd.abs()).max(1e-8);
            worst = worst.max((analytic[p] - fd).abs() / scale);
        }
        model.set_parameters(&base)?;
        out.push(OracleCheck::le("net-grad-fd", format!("2-4-2 net, 3 samples, {name} objective"), worst, 1e-3));
    }
    Ok(out)
}

/// Exact constants.
pub fn golden_values() -> Result<Vec<OracleCheck>> {
    let d11 = DirichletParams::new(vec![1.0, 1.0])?;
    let d111 = DirichletParams::new(vec![1.0, 1.0, 1.0])?;
    let kl = kl_regularizer(&DirichletParams::new(vec![2.0, 1.0])?, &OneHotLabel::new(0, 2)?)?;
    let err = |got: f64, want: f64| (got - want).abs();
    Ok(vec![
        OracleCheck::le("golden", "trigamma(1) = pi^2/6".into(), err(trigamma(PositiveReal::new(1.0)?), PI * PI / 6.0), 1e-10),
        OracleCheck::le("golden", "expected_entropy(1,1) = 1/2".into(), err(d11.expected_entropy(), 0.5), 1e-10),
        OracleCheck::le("golden", "mutual_information(1,1) = ln2 - 1/2".into(), err(d11.mutual_information(), LN_2 - 0.5), 1e-10),
        OracleCheck::le("golden", "differential_entropy(1,1,1) = -ln2".into(), err(d111.differential_entropy(), -LN_2), 1e-10),
        OracleCheck::le("golden", "kl_regularizer((2,1), y=0) = 0".into(), kl.abs(), 0.0),
    ])
}

/// Every check, in a fixed order.
pub fn run_all(cfg: &OracleConfig) -> Result<Vec<OracleCheck>> {
    let mut out = golden_values()?;
    out.extend(fim_vs_monte_carlo(cfg)?);
    out.extend(log_det_vs_direct(cfg));
    out.extend(mse_vs_monte_carlo(cfg)?);
    out.extend(loss_gradient_vs_fd(cfg)?);
    out.extend(network_gradient_vs_fd(cfg)?);
    Ok(out)
}
