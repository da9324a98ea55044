//! Samplers for the source families whose mixtures the two-stage procedure
//! provably separates: spherically/elliptically symmetric variables built
//! from a generating variate, Lp-norm sphericals, 2-D sources symmetrized to
//! 90-degree rotation invariance, and i.i.d. baselines.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::RngSeed;

/// The law of the generating variate r in the stochastic representation
/// v = r * u, with u uniform on the unit sphere and r >= 0 independent of u.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialSpec {
    /// Chi distribution with as many degrees of freedom as the ambient
    /// dimension; makes the spherical sample exactly standard Gaussian.
    ChiOfDim,
    /// Point mass at c > 0: uniform on the radius-c sphere.
    Constant(f64),
    /// Uniform shell on [a, b) with 0 <= a < b.
    Uniform(f64, f64),
    /// Exponential with the given rate > 0.
    Exponential(f64),
}

impl RadialSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RadialSpec::ChiOfDim => Ok(()),
            RadialSpec::Constant(c) if c > 0.0 && c.is_finite() => Ok(()),
            RadialSpec::Constant(c) => Err(Error::InvalidArgument(format!(
                "constant radial must be positive, got {c}"
            ))),
            RadialSpec::Uniform(a, b) if 0.0 <= a && a < b && b.is_finite() => Ok(()),
            RadialSpec::Uniform(a, b) => Err(Error::InvalidArgument(format!(
                "uniform radial needs 0 <= a < b, got ({a}, {b})"
            ))),
            RadialSpec::Exponential(rate) if rate > 0.0 && rate.is_finite() => Ok(()),
            RadialSpec::Exponential(rate) => Err(Error::InvalidArgument(format!(
                "exponential radial rate must be positive, got {rate}"
            ))),
        }
    }

    fn sample(&self, dim: usize, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            RadialSpec::ChiOfDim => {
                // chi(d) = sqrt(chi-square(d)) = sqrt(Gamma(d/2, scale 2))
                let gamma = Gamma::new(dim as f64 / 2.0, 2.0).expect("valid gamma");
                gamma.sample(rng).sqrt()
            }
            RadialSpec::Constant(c) => c,
            RadialSpec::Uniform(a, b) => rng.random_range(a..b),
            RadialSpec::Exponential(rate) => Exp::new(rate).expect("valid rate").sample(rng),
        }
    }
}

/// Marginal law for the i.i.d. baseline family, scaled to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marginal {
    Uniform,
    Laplace,
    ExponentialDemeaned,
}

impl Marginal {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Marginal::Uniform => {
                let half_width = 3.0f64.sqrt();
                rng.random_range(-half_width..half_width)
            }
            Marginal::Laplace => {
                // inverse-CDF with scale 1/sqrt(2) for unit variance
                let u: f64 = rng.random_range(-0.5..0.5);
                let b = std::f64::consts::FRAC_1_SQRT_2;
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Marginal::ExponentialDemeaned => {
                Exp::new(1.0).expect("valid rate").sample(rng) - 1.0
            }
        }
    }
}

/// One hidden source component of the generative model.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Spherical {
        dim: usize,
        radial: RadialSpec,
    },
    Elliptical {
        mu: Vec<f64>,
        lambda: Matrix,
        radial: RadialSpec,
    },
    LpSpherical {
        dim: usize,
        p: f64,
        radial: RadialSpec,
    },
    /// Any 2-D base made exactly 90-degree-rotation invariant by applying a
    /// uniformly random quarter turn to every sample.
    Rot90 {
        base: Box<SourceSpec>,
    },
    IidMarginal {
        dim: usize,
        marginal: Marginal,
    },
}

impl SourceSpec {
    pub fn dim(&self) -> usize {
        match self {
            SourceSpec::Spherical { dim, .. } => *dim,
            SourceSpec::Elliptical { mu, .. } => mu.len(),
            SourceSpec::LpSpherical { dim, .. } => *dim,
            SourceSpec::Rot90 { .. } => 2,
            SourceSpec::IidMarginal { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SourceSpec::Spherical { dim, radial } => {
                ensure_dim(*dim)?;
                radial.validate()
            }
            SourceSpec::Elliptical { mu, lambda, radial } => {
                ensure_dim(mu.len())?;
                if lambda.rows() != mu.len() || lambda.cols() != mu.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "Lambda must be {}x{}, got {}x{}",
                        mu.len(),
                        mu.len(),
                        lambda.rows(),
                        lambda.cols()
                    )));
                }
                let sv = lambda.as_dmatrix().clone().singular_values();
                let (max, min) = (sv.max(), sv.min());
                if !(max > 0.0) || min < 1e-12 * max {
                    return Err(Error::SingularLambda);
                }
                radial.validate()
            }
            SourceSpec::LpSpherical { dim, p, radial } => {
                ensure_dim(*dim)?;
                if !(*p > 0.0) || !p.is_finite() {
                    return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
                }
                radial.validate()
            }
            SourceSpec::Rot90 { base } => {
                if base.dim() != 2 {
                    return Err(Error::DimensionMismatch(format!(
                        "rot90 base must be 2-dimensional, got {}",
                        base.dim()
                    )));
                }
                if matches!(**base, SourceSpec::Rot90 { .. }) {
                    return Err(Error::InvalidArgument(
                        "rot90 base may not itself be rot90".into(),
                    ));
                }
                base.validate()
            }
            SourceSpec::IidMarginal { dim, .. } => ensure_dim(*dim),
        }
    }

    /// Draws n samples; deterministic per (spec, n, seed).
    pub fn sample(&self, n: usize, seed: RngSeed) -> Result<SampleBlock> {
        self.validate()?;
        match self {
            SourceSpec::Spherical { dim, radial } => sample_spherical(*dim, radial, n, seed),
            SourceSpec::Elliptical { mu, lambda, radial } => {
                sample_elliptical(mu, lambda, radial, n, seed)
            }
            SourceSpec::LpSpherical { dim, p, radial } => {
                sample_lp_spherical(*dim, *p, radial, n, seed)
            }
            SourceSpec::Rot90 { base } => sample_rot90(base, n, seed),
            SourceSpec::IidMarginal { dim, marginal } => {
                sample_iid(*dim, *marginal, n, seed)
            }
        }
    }
}

fn ensure_dim(dim: usize) -> Result<()> {
    if dim >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("dimension must be at least 1".into()))
    }
}

/// An n x d batch of samples of one d-dimensional stochastic variable.
#[derive(Debug, Clone)]
pub struct SampleBlock {
    pub samples: Matrix,
}

impl SampleBlock {
    pub fn new(samples: Matrix) -> Self {
        SampleBlock { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    /// Projection of every sample onto the direction w.
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.dim(), "direction dimension mismatch");
        let m = self.samples.as_dmatrix();
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * w[j]).sum())
            .collect()
    }
}

/// Spherical sampler: each row is r_i * u_i with u_i uniform on the unit
/// sphere (a normalized standard-normal vector) and r_i drawn from `radial`,
/// independently.
pub fn sample_spherical(dim: usize, radial: &RadialSpec, n: usize, seed: RngSeed) -> Result<SampleBlock> {
    ensure_dim(dim)?;
    ensure_n(n)?;
    radial.validate()?;
    let mut rng = seed.rng();
    let mut data = DMatrix::zeros(n, dim);
    let mut u = vec![0.0f64; dim];
    for i in 0..n {
        sphere_direction(&mut u, &mut rng);
        let r = radial.sample(dim, &mut rng);
        for j in 0..dim {
            data[(i, j)] = r * u[j];
        }
    }
    Ok(SampleBlock::new(Matrix::from_dmatrix(data)?))
}

fn sphere_direction(u: &mut [f64], rng: &mut ChaCha8Rng) {
    loop {
        let mut norm_sq = 0.0;
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
            norm_sq += *v * *v;
        }
        if norm_sq > 0.0 {
            let norm = norm_sq.sqrt();
            for v in u.iter_mut() {
                *v /= norm;
            }
            return;
        }
    }
}

/// Elliptical sampler: mu + Lambda * (spherical draw). With mu = 0 and
/// Lambda = I this reduces, same seed to same bits, to [`sample_spherical`].
pub fn sample_elliptical(
    mu: &[f64],
    lambda: &Matrix,
    radial: &RadialSpec,
    n: usize,
    seed: RngSeed,
) -> Result<SampleBlock> {
    let spec = SourceSpec::Elliptical {
        mu: mu.to_vec(),
        lambda: lambda.clone(),
        radial: radial.clone(),
    };
    spec.validate()?;
    ensure_n(n)?;
    let spherical = sample_spherical(mu.len(), radial, n, seed)?;
    let mu_vec = DVector::from_column_slice(mu);
    let mut data = spherical.samples.into_dmatrix() * lambda.as_dmatrix().transpose();
    for mut row in data.row_iter_mut() {
        row += mu_vec.transpose();
    }
    Ok(SampleBlock::new(Matrix::from_dmatrix(data)?))
}

/// Lp-norm spherical sampler: rows are r_i * w_i where w_i is uniform (cone
/// measure) on the unit Lp sphere, built from Gamma(1/p, 1)^{1/p} magnitudes
/// with independent random signs, normalized by the Lp norm.
pub fn sample_lp_spherical(
    dim: usize,
    p: f64,
    radial: &RadialSpec,
    n: usize,
    seed: RngSeed,
) -> Result<SampleBlock> {
    let spec = SourceSpec::LpSpherical {
        dim,
        p,
        radial: radial.clone(),
    };
    spec.validate()?;
    ensure_n(n)?;
    let mut rng = seed.rng();
    let gamma = Gamma::new(1.0 / p, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut data = DMatrix::zeros(n, dim);
    let mut x = vec![0.0f64; dim];
    for i in 0..n {
        loop {
            let mut norm_p = 0.0f64;
            for v in x.iter_mut() {
                let mag: f64 = gamma.sample(&mut rng).powf(1.0 / p);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                *v = sign * mag;
                norm_p += mag.powf(p);
            }
            if norm_p > 0.0 && norm_p.is_finite() {
                let norm = norm_p.powf(1.0 / p);
                for v in x.iter_mut() {
                    *v /= norm;
                }
                break;
            }
        }
        let r = radial.sample(dim, &mut rng);
        for j in 0..dim {
            data[(i, j)] = r * x[j];
        }
    }
    Ok(SampleBlock::new(Matrix::from_dmatrix(data)?))
}

/// Symmetrizes a 2-D base law to exact 90-degree rotation invariance by
/// applying R^k with k uniform on {0,1,2,3}, R the quarter-turn ccw rotation.
pub fn sample_rot90(base: &SourceSpec, n: usize, seed: RngSeed) -> Result<SampleBlock> {
    if base.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "rot90 base must be 2-dimensional, got {}",
            base.dim()
        )));
    }
    ensure_n(n)?;
    let block = base.sample(n, seed.derive(0))?;
    let mut rng = seed.derive(1).rng();
    let mut data = block.samples.into_dmatrix();
    for i in 0..n {
        let k = rng.random_range(0..4u32);
        let (x, y) = (data[(i, 0)], data[(i, 1)]);
        let (rx, ry) = match k {
            0 => (x, y),
            1 => (-y, x),
            2 => (-x, -y),
            _ => (y, -x),
        };
        data[(i, 0)] = rx;
        data[(i, 1)] = ry;
    }
    Ok(SampleBlock::new(Matrix::from_dmatrix(data)?))
}

fn sample_iid(dim: usize, marginal: Marginal, n: usize, seed: RngSeed) -> Result<SampleBlock> {
    ensure_dim(dim)?;
    ensure_n(n)?;
    let mut rng = seed.rng();
    let mut data = DMatrix::zeros(n, dim);
    for i in 0..n {
        for j in 0..dim {
            data[(i, j)] = marginal.sample(&mut rng);
        }
    }
    Ok(SampleBlock::new(Matrix::from_dmatrix(data)?))
}

fn ensure_n(n: usize) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("sample count must be at least 1".into()))
    }
}

/// Empirically standardizes a block to zero mean and identity covariance
/// using the symmetric covariance root C^{-1/2}(x - mean), which whitens
/// without re-orienting the block.
pub fn standardize_block(block: &SampleBlock) -> Result<SampleBlock> {
    let (_, white) = linalg::whiten_symmetric(&block.samples)?;
    Ok(SampleBlock::new(white))
}
