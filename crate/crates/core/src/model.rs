//! Per-source pairs of simple hypotheses.
//!
//! Source `i` produces iid observations with density `f0` when it behaves
//! normally and `f1` when it is anomalous. All log-likelihood ratios are in
//! nats.

use alloc::format;
use alloc::sync::Arc;
use core::fmt;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::{Error, Result};

/// Kullback-Leibler numbers of one source: `anomalous = KL(f1 || f0)` and
/// `normal = KL(f0 || f1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlPair {
    pub anomalous: f64,
    pub normal: f64,
}

/// User-supplied hypothesis pair.
pub trait CustomModel: fmt::Debug + Send + Sync {
    fn sample(&self, anomalous: bool, rng: &mut dyn RngCore) -> f64;
    fn llr(&self, x: f64) -> Result<f64>;
    fn kl(&self) -> KlPair;
}

#[derive(Clone, Debug)]
pub enum SourceModel {
    /// `f0 = N(0, 1)`, `f1 = N(mean, 1)`.
    Gaussian {
        mean: f64,
    },
    /// `f0 = Exp(1)`, `f1 = Exp(rate)`.
    Exponential {
        rate: f64,
    },
    /// `f0 = Bernoulli(p0)`, `f1 = Bernoulli(p1)`.
    Bernoulli {
        p0: f64,
        p1: f64,
    },
    Custom(Arc<dyn CustomModel>),
}

impl SourceModel {
    pub fn gaussian(mean: f64) -> Result<Self> {
        let m = SourceModel::Gaussian { mean };
        m.kl_numbers()?;
        Ok(m)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let m = SourceModel::Exponential { rate };
        m.kl_numbers()?;
        Ok(m)
    }

    pub fn bernoulli(p0: f64, p1: f64) -> Result<Self> {
        let m = SourceModel::Bernoulli { p0, p1 };
        m.kl_numbers()?;
        Ok(m)
    }

    pub fn custom(model: Arc<dyn CustomModel>) -> Result<Self> {
        let m = SourceModel::Custom(model);
        m.kl_numbers()?;
        Ok(m)
    }

    /// Draw one observation, from `f1` if `anomalous` and from `f0` otherwise.
    pub fn sample<R: RngCore>(&self, anomalous: bool, rng: &mut R) -> f64 {
        match *self {
            SourceModel::Gaussian { mean } => {
                let z: f64 = StandardNormal.sample(rng);
                if anomalous {
                    z + mean
                } else {
                    z
                }
            }
            SourceModel::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                if anomalous {
                    e / rate
                } else {
                    e
                }
            }
            SourceModel::Bernoulli { p0, p1 } => {
                let p = if anomalous { p1 } else { p0 };
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            SourceModel::Custom(ref c) => c.sample(anomalous, rng),
        }
    }

    /// `g(x) = log f1(x) / f0(x)`.
    pub fn llr_increment(&self, x: f64) -> Result<f64> {
        match *self {
            SourceModel::Gaussian { mean } => {
                if !x.is_finite() {
                    return Err(Error::Domain(x));
                }
                Ok(mean * x - 0.5 * mean * mean)
            }
            SourceModel::Exponential { rate } => {
                if !(x >= 0.0) || !x.is_finite() {
                    return Err(Error::Domain(x));
                }
                Ok(libm::log(rate) - (rate - 1.0) * x)
            }
            SourceModel::Bernoulli { p0, p1 } => {
                if x == 1.0 {
                    Ok(libm::log(p1 / p0))
                } else if x == 0.0 {
                    Ok(libm::log((1.0 - p1) / (1.0 - p0)))
                } else {
                    Err(Error::Domain(x))
                }
            }
            SourceModel::Custom(ref c) => c.llr(x),
        }
    }

    /// Closed-form `(I, J)`; both must be positive and finite.
    pub fn kl_numbers(&self) -> Result<KlPair> {
        let kl = match *self {
            SourceModel::Gaussian { mean } => {
                let v = 0.5 * mean * mean;
                KlPair { anomalous: v, normal: v }
            }
            SourceModel::Exponential { rate } => {
                if !(rate > 0.0) {
                    return Err(Error::InvalidModel(format!("exponential rate {rate} must be positive")));
                }
                let ln = libm::log(rate);
                KlPair { anomalous: ln - 1.0 + 1.0 / rate, normal: -ln + rate - 1.0 }
            }
            SourceModel::Bernoulli { p0, p1 } => {
                let open = |p: f64| p > 0.0 && p < 1.0;
                if !open(p0) || !open(p1) {
                    return Err(Error::InvalidModel(format!(
                        "bernoulli probabilities ({p0}, {p1}) must lie in (0, 1)"
                    )));
                }
                KlPair { anomalous: bernoulli_kl(p1, p0), normal: bernoulli_kl(p0, p1) }
            }
            SourceModel::Custom(ref c) => c.kl(),
        };
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(kl.anomalous) || !ok(kl.normal) {
            return Err(Error::InvalidModel(format!(
                "KL numbers ({}, {}) must be positive and finite",
                kl.anomalous, kl.normal
            )));
        }
        Ok(kl)
    }
}

fn bernoulli_kl(p: f64, q: f64) -> f64 {
    p * libm::log(p / q) + (1.0 - p) * libm::log((1.0 - p) / (1.0 - q))
}
