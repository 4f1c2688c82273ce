//! Input feature transformations: the background random cos/sin Fourier
//! embedding and the derivative-vanishing cosine embeddings that make
//! Neumann data hard-constrainable.
//!
//! The derivative-vanishing family keeps only cosine components. On
//! `[α, β]` each component is `cos(π·b·(x−α)/(β−α))` with integer `b`, so its
//! spatial derivative carries a factor `sin(π·b·r)` that vanishes at both
//! endpoints; the one-sided variant uses `cos(π/2·b·r)` whose derivative
//! vanishes at `α` only, with arbitrary real `b`. The frequency-1 component
//! is always present and is one-to-one on the interval, so no information is
//! lost. The time coordinate never passes through an embedding; the model
//! appends it untransformed.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Which input transformation is applied before the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Identity,
    RandomCosSin,
    HcCosine,
    HcCosineOneSided { at_upper: bool },
    HcCosineHyperrect,
}

impl EmbeddingKind {
    pub fn name(&self) -> &'static str {
        match self {
            EmbeddingKind::Identity => "identity",
            EmbeddingKind::RandomCosSin => "random_cos_sin",
            EmbeddingKind::HcCosine => "hc_cosine",
            EmbeddingKind::HcCosineOneSided { .. } => "hc_cosine_one_sided",
            EmbeddingKind::HcCosineHyperrect => "hc_cosine_hyperrect",
        }
    }

    /// True when every component's spatial derivative vanishes at the
    /// boundary this kind constrains — the property the new hard constraint
    /// relies on.
    pub fn is_derivative_vanishing(&self) -> bool {
        matches!(
            self,
            EmbeddingKind::HcCosine
                | EmbeddingKind::HcCosineOneSided { .. }
                | EmbeddingKind::HcCosineHyperrect
        )
    }
}

/// An input transformation plus the domain geometry it is rescaled to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub kind: EmbeddingKind,
    /// Explicit frequency list; integer-valued for the hc_cosine kinds.
    pub frequencies: Vec<f64>,
    /// Domain lower bounds, one per spatial dimension.
    pub domain_lo: Vec<f64>,
    /// Domain upper bounds, one per spatial dimension.
    pub domain_hi: Vec<f64>,
    /// Seed used when the frequency list was sampled (recorded for replay).
    pub rng_seed: Option<u64>,
    /// Frequency-sampling scale σ.
    pub sigma: f64,
    /// Hyperrectangles only: dimensions with `false` bypass the embedding
    /// (identity pass-through), leaving them unconstrained.
    #[serde(default)]
    pub constrained: Vec<bool>,
}

impl EmbeddingSpec {
    /// No transformation; the spatial coordinate enters the network raw.
    pub fn identity(domain_lo: Vec<f64>, domain_hi: Vec<f64>) -> Result<Self> {
        let spec = EmbeddingSpec {
            kind: EmbeddingKind::Identity,
            frequencies: Vec::new(),
            domain_lo,
            domain_hi,
            rng_seed: None,
            sigma: 0.0,
            constrained: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit-interval identity, the common 1D case.
    pub fn identity_unit() -> Self {
        Self::identity(vec![0.0], vec![1.0]).unwrap()
    }

    /// Random cos/sin pairs with `m` real frequencies from N(0, σ²... σ scale).
    pub fn random_cos_sin(m: usize, sigma: f64, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("random_cos_sin needs at least one frequency"));
        }
        if sigma <= 0.0 {
            return Err(Error::config("sigma must be positive"));
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frequencies = (0..m).map(|_| normal.sample(&mut rng)).collect();
        let spec = EmbeddingSpec {
            kind: EmbeddingKind::RandomCosSin,
            frequencies,
            domain_lo: vec![0.0],
            domain_hi: vec![1.0],
            rng_seed: Some(seed),
            sigma,
            constrained: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Derivative-vanishing cosine embedding with an explicit integer
    /// frequency list (leading 1 required).
    pub fn hc_cosine(frequencies: Vec<f64>, domain_lo: f64, domain_hi: f64) -> Result<Self> {
        let spec = EmbeddingSpec {
            kind: EmbeddingKind::HcCosine,
            frequencies,
            domain_lo: vec![domain_lo],
            domain_hi: vec![domain_hi],
            rng_seed: None,
            sigma: 0.0,
            constrained: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Derivative-vanishing cosine embedding of size `n` with integer
    /// frequencies sampled from N(0, σ), leading 1 always included.
    pub fn hc_cosine_sampled(
        n: usize,
        sigma: f64,
        seed: u64,
        domain_lo: f64,
        domain_hi: f64,
    ) -> Result<Self> {
        let freqs = sample_integer_frequencies(n, sigma, seed)?;
        let mut spec = Self::hc_cosine(
            freqs.iter().map(|&b| b as f64).collect(),
            domain_lo,
            domain_hi,
        )?;
        spec.rng_seed = Some(seed);
        spec.sigma = sigma;
        Ok(spec)
    }

    /// One-sided derivative-vanishing embedding; frequencies may be any
    /// nonzero reals, leading 1 required. `at_upper` mirrors the constraint
    /// to x = β via the reflection x ↦ α + β − x.
    pub fn hc_cosine_one_sided(
        frequencies: Vec<f64>,
        domain_lo: f64,
        domain_hi: f64,
        at_upper: bool,
    ) -> Result<Self> {
        let spec = EmbeddingSpec {
            kind: EmbeddingKind::HcCosineOneSided { at_upper },
            frequencies,
            domain_lo: vec![domain_lo],
            domain_hi: vec![domain_hi],
            rng_seed: None,
            sigma: 0.0,
            constrained: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Component-wise embedding on a hyperrectangle; integer frequencies
    /// apply to every constrained dimension, unconstrained dimensions pass
    /// through raw.
    pub fn hc_cosine_hyperrect(
        frequencies: Vec<f64>,
        domain_lo: Vec<f64>,
        domain_hi: Vec<f64>,
        constrained: Vec<bool>,
    ) -> Result<Self> {
        let spec = EmbeddingSpec {
            kind: EmbeddingKind::HcCosineHyperrect,
            frequencies,
            domain_lo,
            domain_hi,
            rng_seed: None,
            sigma: 0.0,
            constrained,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.domain_lo.len()
    }

    pub fn n_frequencies(&self) -> usize {
        self.frequencies.len()
    }

    /// Number of features produced for the spatial coordinates (the time
    /// coordinate is appended separately by the model).
    pub fn output_len(&self) -> usize {
        match self.kind {
            EmbeddingKind::Identity => self.dim(),
            EmbeddingKind::RandomCosSin => 2 * self.frequencies.len(),
            EmbeddingKind::HcCosine | EmbeddingKind::HcCosineOneSided { .. } => {
                self.frequencies.len()
            }
            EmbeddingKind::HcCosineHyperrect => {
                let n_con = self.constrained.iter().filter(|&&c| c).count();
                let n_unc = self.dim() - n_con;
                self.frequencies.len() * n_con + n_unc
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.domain_lo.len() != self.domain_hi.len() || self.domain_lo.is_empty() {
            return Err(Error::config("domain bounds must be non-empty and same length"));
        }
        for (lo, hi) in self.domain_lo.iter().zip(&self.domain_hi) {
            if !(lo < hi) {
                return Err(Error::config("domain_lo must be < domain_hi componentwise"));
            }
        }
        match &self.kind {
            EmbeddingKind::Identity => {}
            EmbeddingKind::RandomCosSin => {
                if self.frequencies.is_empty() {
                    return Err(Error::config("random_cos_sin needs frequencies"));
                }
            }
            EmbeddingKind::HcCosine | EmbeddingKind::HcCosineHyperrect => {
                check_leading_one(&self.frequencies)?;
                for &b in &self.frequencies {
                    if b == 0.0 || b.fract() != 0.0 {
                        return Err(Error::config(format!(
                            "{} requires nonzero integer frequencies, got {b}",
                            self.kind.name()
                        )));
                    }
                }
                if matches!(self.kind, EmbeddingKind::HcCosineHyperrect) {
                    if self.constrained.len() != self.dim() {
                        return Err(Error::config(
                            "constrained mask length must equal spatial dimension",
                        ));
                    }
                    if !self.constrained.iter().any(|&c| c) {
                        return Err(Error::config("hyperrect embedding with no constrained dims"));
                    }
                }
            }
            EmbeddingKind::HcCosineOneSided { .. } => {
                check_leading_one(&self.frequencies)?;
                if self.frequencies.iter().any(|&b| b == 0.0) {
                    return Err(Error::config("one-sided frequencies must be nonzero"));
                }
            }
        }
        Ok(())
    }

    /// Applies the 1D embedding in any scalar ring (chain rule through the
    /// embedding happens via the ring operations). Panics if called for the
    /// hyperrectangle kind; use [`EmbeddingSpec::apply_nd`].
    pub(crate) fn apply_1d<S: Scalar>(&self, x: S, out: &mut Vec<S>) {
        let (alpha, beta) = (self.domain_lo[0], self.domain_hi[0]);
        match &self.kind {
            EmbeddingKind::Identity => out.push(x),
            EmbeddingKind::RandomCosSin => {
                for &b in &self.frequencies {
                    let y = x.scale(b);
                    out.push(y.cospi());
                    out.push(y.sinpi());
                }
            }
            EmbeddingKind::HcCosine => {
                // Division keeps the endpoint ratios exact (0 and 1), so the
                // boundary derivatives of every component are exactly zero.
                let r = (x - S::from_f64(alpha)).div_scale(beta - alpha);
                for &b in &self.frequencies {
                    out.push(r.scale(b).cospi());
                }
            }
            EmbeddingKind::HcCosineOneSided { at_upper } => {
                let r = if *at_upper {
                    (S::from_f64(beta) - x).div_scale(beta - alpha)
                } else {
                    (x - S::from_f64(alpha)).div_scale(beta - alpha)
                };
                for &b in &self.frequencies {
                    out.push(r.scale(0.5 * b).cospi());
                }
            }
            EmbeddingKind::HcCosineHyperrect => {
                panic!("hyperrect embedding applied to a 1D input");
            }
        }
    }

    /// Applies the embedding to a d-dimensional spatial point. Constrained
    /// dimensions produce one cosine per frequency (frequency-major order);
    /// unconstrained dimensions are appended raw.
    pub(crate) fn apply_nd<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        assert_eq!(x.len(), self.dim(), "spatial dimension");
        match &self.kind {
            EmbeddingKind::HcCosineHyperrect => {
                for &b in &self.frequencies {
                    for i in 0..x.len() {
                        if !self.constrained[i] {
                            continue;
                        }
                        let r = (x[i] - S::from_f64(self.domain_lo[i]))
                            .div_scale(self.domain_hi[i] - self.domain_lo[i]);
                        out.push(r.scale(b).cospi());
                    }
                }
                for i in 0..x.len() {
                    if !self.constrained[i] {
                        out.push(x[i]);
                    }
                }
            }
            EmbeddingKind::Identity => out.extend_from_slice(x),
            _ => {
                assert_eq!(x.len(), 1, "1D embedding applied to {}D input", x.len());
                self.apply_1d(x[0], out);
            }
        }
    }
}

fn check_leading_one(frequencies: &[f64]) -> Result<()> {
    match frequencies.first() {
        Some(&1.0) => Ok(()),
        _ => Err(Error::config("frequency list must begin with 1")),
    }
}

/// The random cos/sin Fourier embedding of a spatial coordinate:
/// `(cos(b₁πx), sin(b₁πx), …, cos(bₘπx), sin(bₘπx))`.
pub fn random_cos_sin_embed(x: f64, spec: &EmbeddingSpec) -> Result<Vec<f64>> {
    expect_kind(spec, matches!(spec.kind, EmbeddingKind::RandomCosSin))?;
    let mut out = Vec::with_capacity(spec.output_len());
    spec.apply_1d(x, &mut out);
    Ok(out)
}

/// The derivative-vanishing cosine embedding `cos(π·bᵢ·(x−α)/(β−α))`.
pub fn hc_cosine_embed(x: f64, spec: &EmbeddingSpec) -> Result<Vec<f64>> {
    expect_kind(spec, matches!(spec.kind, EmbeddingKind::HcCosine))?;
    let mut out = Vec::with_capacity(spec.output_len());
    spec.apply_1d(x, &mut out);
    Ok(out)
}

/// One-sided variant `cos(π/2·bᵢ·(x−α)/(β−α))` (or the mirror at β).
pub fn hc_cosine_embed_one_sided(x: f64, spec: &EmbeddingSpec) -> Result<Vec<f64>> {
    expect_kind(spec, matches!(spec.kind, EmbeddingKind::HcCosineOneSided { .. }))?;
    let mut out = Vec::with_capacity(spec.output_len());
    spec.apply_1d(x, &mut out);
    Ok(out)
}

/// Component-wise hyperrectangle embedding; output length n·d when all
/// dimensions are constrained.
pub fn hc_cosine_embed_hyperrect(x: &[f64], spec: &EmbeddingSpec) -> Result<Vec<f64>> {
    expect_kind(spec, matches!(spec.kind, EmbeddingKind::HcCosineHyperrect))?;
    if x.len() != spec.dim() {
        return Err(Error::config(format!(
            "point dimension {} does not match domain dimension {}",
            x.len(),
            spec.dim()
        )));
    }
    let mut out = Vec::with_capacity(spec.output_len());
    spec.apply_nd(x, &mut out);
    Ok(out)
}

fn expect_kind(spec: &EmbeddingSpec, ok: bool) -> Result<()> {
    if ok {
        spec.validate()
    } else {
        Err(Error::config(format!(
            "embedding kind {} does not support this operation",
            spec.kind.name()
        )))
    }
}

/// Samples `n` integer frequencies `(1, b₂, …, bₙ)`: draws from N(0, σ),
/// rounds to the nearest integer, resamples zeros, and stores distinct
/// absolute values (cos is even, so signs add nothing).
pub fn sample_integer_frequencies(n: usize, sigma: f64, seed: u64) -> Result<Vec<i64>> {
    if n == 0 {
        return Err(Error::config("frequency count must be at least 1"));
    }
    if sigma <= 0.0 {
        return Err(Error::config("sigma must be positive"));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut freqs: Vec<i64> = vec![1];
    while freqs.len() < n {
        let b = normal.sample(&mut rng).round().abs() as i64;
        if b != 0 && !freqs.contains(&b) {
            freqs.push(b);
        }
    }
    Ok(freqs)
}
