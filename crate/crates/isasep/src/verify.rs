//! Monte Carlo verification of the entropy inequalities and invariances the
//! two-stage separation rests on: the directional entropy-power condition,
//! its entropy-combination consequence, the marginal-entropy-sum inequality
//! under orthogonal mixing, projection-entropy invariance of spherical
//! sources, and quarter-turn symmetry of 2-D sources.
//!
//! Statements that are exact in distribution are observed through finite
//! samples, so every check carries a tolerance of three combined resampling
//! standard errors rather than a fixed magic number.

use std::fmt::Write as _;
use std::path::Path;

use rand::RngExt;
use rand_distr::StandardNormal;

use crate::entropy::{entropy_1d, EntropyEstimate};
use crate::error::{Error, Result};
use crate::instance::IsaInstance;
use crate::linalg::{random_orthogonal, Matrix};
use crate::rng::RngSeed;
use crate::sources::SampleBlock;
use crate::stats::ks_statistic;

/// Unit directions on the sphere used to probe projection entropies.
#[derive(Debug, Clone)]
pub struct DirectionSet {
    dirs: Vec<Vec<f64>>,
}

impl DirectionSet {
    pub fn new(dirs: Vec<Vec<f64>>) -> Result<Self> {
        for (i, w) in dirs.iter().enumerate() {
            let norm: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "direction {i} has norm {norm}, expected 1 within 1e-12"
                )));
            }
        }
        if dirs.is_empty() {
            return Err(Error::InvalidArgument("need at least one direction".into()));
        }
        Ok(DirectionSet { dirs })
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.dirs
    }
}

/// `count` uniform directions on the unit sphere of R^l (normalized standard
/// normals), optionally preceded by the l canonical basis vectors.
pub fn sample_directions(
    l: usize,
    count: usize,
    seed: RngSeed,
    include_canonical: bool,
) -> DirectionSet {
    assert!(l >= 1, "direction dimension must be positive");
    let mut dirs = Vec::with_capacity(count + if include_canonical { l } else { 0 });
    if include_canonical {
        for i in 0..l {
            let mut e = vec![0.0; l];
            e[i] = 1.0;
            dirs.push(e);
        }
    }
    let mut rng = seed.rng();
    while dirs.len() < count + if include_canonical { l } else { 0 } {
        let mut w: Vec<f64> = (0..l).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut w {
                *v /= norm;
            }
            dirs.push(w);
        }
    }
    DirectionSet::new(dirs).expect("normalized directions")
}

/// Whether violations count margins below -tolerance only, or any |margin|
/// above tolerance (the equality-regime checks).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginMode {
    OneSided,
    TwoSided,
}

/// One probed direction (or one probed orthogonal matrix, flattened).
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub direction: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub stderr: f64,
    /// Two-sample KS statistic, recorded by the quarter-turn check.
    pub ks: Option<f64>,
}

/// Aggregated outcome of one inequality check.
#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub check: &'static str,
    pub mode: MarginMode,
    pub trials: usize,
    pub violations: usize,
    /// Most negative margin observed.
    pub worst_margin: f64,
    /// Three combined resampling standard errors (worst case over trials).
    pub tolerance: f64,
    pub per_trial: Vec<TrialRecord>,
}

impl InequalityReport {
    fn from_trials(check: &'static str, mode: MarginMode, per_trial: Vec<TrialRecord>) -> Self {
        let tolerance = 3.0 * per_trial.iter().map(|t| t.stderr).fold(0.0, f64::max);
        let worst_margin = per_trial.iter().map(|t| t.margin).fold(f64::INFINITY, f64::min);
        let violations = per_trial
            .iter()
            .filter(|t| match mode {
                MarginMode::OneSided => t.margin < -tolerance,
                MarginMode::TwoSided => t.margin.abs() > tolerance,
            })
            .count();
        InequalityReport {
            check,
            mode,
            trials: per_trial.len(),
            violations,
            worst_margin,
            tolerance,
            per_trial,
        }
    }

    pub fn passes(&self) -> bool {
        self.violations == 0
    }

    pub fn max_abs_margin(&self) -> f64 {
        self.per_trial.iter().map(|t| t.margin.abs()).fold(0.0, f64::max)
    }

    pub fn max_ks(&self) -> Option<f64> {
        self.per_trial.iter().filter_map(|t| t.ks).fold(None, |acc, v| {
            Some(acc.map_or(v, |a: f64| a.max(v)))
        })
    }

    /// One row per trial: direction components, lhs, rhs, margin, stderr,
    /// and the KS column when the check records it.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(
            out,
            "# check={} trials={} violations={} worst_margin={:.6e} tolerance={:.6e}",
            self.check, self.trials, self.violations, self.worst_margin, self.tolerance
        )
        .expect("write to string");
        let has_ks = self.per_trial.iter().any(|t| t.ks.is_some());
        for t in &self.per_trial {
            for v in &t.direction {
                write!(out, "{:.16e},", v).expect("write to string");
            }
            write!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", t.lhs, t.rhs, t.margin, t.stderr)
                .expect("write to string");
            if has_ks {
                write!(out, ",{:.16e}", t.ks.unwrap_or(f64::NAN)).expect("write to string");
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn marginal_estimates(block: &SampleBlock, seed: RngSeed) -> Result<Vec<EntropyEstimate>> {
    (0..block.dim())
        .map(|j| entropy_1d(&block.samples.column_vec(j), None, seed.derive(j as u64)))
        .collect()
}

fn require_samples(block: &SampleBlock, need: usize) -> Result<()> {
    if block.len() < need {
        return Err(Error::TooFewSamples {
            need,
            got: block.len(),
        });
    }
    Ok(())
}

/// Directional entropy-power condition: for every unit direction w,
/// exp(2 H(sum_i w_i u_i)) >= sum_i exp(2 H(u_i)) w_i^2. The right-hand side
/// uses the exact transform identity exp(2 H(w u)) = exp(2 H(u)) w^2, so its
/// error is independent of w beyond the weights.
pub fn check_w_epi(block: &SampleBlock, dirs: &DirectionSet, seed: RngSeed) -> Result<InequalityReport> {
    require_samples(block, 10_000)?;
    ensure_direction_dim(block, dirs)?;
    let marginals = marginal_estimates(block, seed.derive(1))?;
    let powers: Vec<f64> = marginals.iter().map(|e| (2.0 * e.value).exp()).collect();

    let mut per_trial = Vec::with_capacity(dirs.len());
    for (t, w) in dirs.directions().iter().enumerate() {
        let proj = block.project(w);
        let est = entropy_1d(&proj, None, seed.derive(1000 + t as u64))?;
        let lhs = (2.0 * est.value).exp();
        let mut rhs = 0.0;
        let mut rhs_var = 0.0;
        for (i, p) in powers.iter().enumerate() {
            let weight = w[i] * w[i];
            rhs += p * weight;
            rhs_var += (2.0 * p * weight * marginals[i].stderr).powi(2);
        }
        let lhs_err = 2.0 * lhs * est.stderr;
        let stderr = (lhs_err * lhs_err + rhs_var).sqrt();
        per_trial.push(TrialRecord {
            direction: w.clone(),
            lhs,
            rhs,
            margin: lhs - rhs,
            stderr,
            ks: None,
        });
    }
    Ok(InequalityReport::from_trials("w_epi", MarginMode::OneSided, per_trial))
}

/// Consequence of the directional entropy-power condition:
/// H(sum_i w_i u_i) >= sum_i w_i^2 H(u_i), in nats.
pub fn check_entropy_combination(
    block: &SampleBlock,
    dirs: &DirectionSet,
    seed: RngSeed,
) -> Result<InequalityReport> {
    require_samples(block, 10_000)?;
    ensure_direction_dim(block, dirs)?;
    let marginals = marginal_estimates(block, seed.derive(2))?;

    let mut per_trial = Vec::with_capacity(dirs.len());
    for (t, w) in dirs.directions().iter().enumerate() {
        let proj = block.project(w);
        let est = entropy_1d(&proj, None, seed.derive(2000 + t as u64))?;
        let mut rhs = 0.0;
        let mut rhs_var = 0.0;
        for (i, m) in marginals.iter().enumerate() {
            let weight = w[i] * w[i];
            rhs += weight * m.value;
            rhs_var += (weight * m.stderr).powi(2);
        }
        let stderr = (est.stderr.powi(2) + rhs_var).sqrt();
        per_trial.push(TrialRecord {
            direction: w.clone(),
            lhs: est.value,
            rhs,
            margin: est.value - rhs,
            stderr,
            ks: None,
        });
    }
    Ok(InequalityReport::from_trials(
        "entropy_combination",
        MarginMode::OneSided,
        per_trial,
    ))
}

/// Marginal-entropy-sum inequality: for orthogonal W and sources satisfying
/// the directional condition, sum_i H((W s)_i) >= sum_i H(s_i). Probes the
/// identity matrix first, then `num_w` Haar-random orthogonal matrices.
pub fn check_proposition_sum(
    instance: &IsaInstance,
    num_w: usize,
    seed: RngSeed,
) -> Result<InequalityReport> {
    let s = &instance.sources;
    let n = s.rows();
    if n < 10_000 {
        return Err(Error::TooFewSamples { need: 10_000, got: n });
    }
    let d = s.cols();
    let base_block = SampleBlock::new(s.clone());
    let base = marginal_estimates(&base_block, seed.derive(3))?;
    let base_sum: f64 = base.iter().map(|e| e.value).sum();
    let base_var: f64 = base.iter().map(|e| e.stderr.powi(2)).sum();

    let mut per_trial = Vec::with_capacity(num_w + 1);
    for t in 0..=num_w {
        let w = if t == 0 {
            Matrix::identity(d)
        } else {
            random_orthogonal(d, seed.derive(4000 + t as u64)).matrix().clone()
        };
        let y = Matrix::from_dmatrix(s.as_dmatrix() * w.as_dmatrix().transpose())?;
        let rotated = marginal_estimates(&SampleBlock::new(y), seed.derive(3))?;
        let lhs: f64 = rotated.iter().map(|e| e.value).sum();
        let var: f64 = rotated.iter().map(|e| e.stderr.powi(2)).sum();
        let mut direction = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                direction.push(w.get(i, j));
            }
        }
        per_trial.push(TrialRecord {
            direction,
            lhs,
            rhs: base_sum,
            margin: lhs - base_sum,
            stderr: (var + base_var).sqrt(),
            ks: None,
        });
    }
    Ok(InequalityReport::from_trials(
        "proposition_sum",
        MarginMode::OneSided,
        per_trial,
    ))
}

/// Projection-entropy invariance of spherical sources: H of the projection
/// onto any direction matches H of the projection onto the first direction.
pub fn check_projection_invariance(
    block: &SampleBlock,
    dirs: &DirectionSet,
    seed: RngSeed,
) -> Result<InequalityReport> {
    require_samples(block, 10_000)?;
    ensure_direction_dim(block, dirs)?;
    let reference = entropy_1d(&block.project(&dirs.directions()[0]), None, seed.derive(5))?;

    let mut per_trial = Vec::with_capacity(dirs.len());
    for (t, w) in dirs.directions().iter().enumerate() {
        let est = entropy_1d(&block.project(w), None, seed.derive(5000 + t as u64))?;
        per_trial.push(TrialRecord {
            direction: w.clone(),
            lhs: est.value,
            rhs: reference.value,
            margin: est.value - reference.value,
            stderr: (est.stderr.powi(2) + reference.stderr.powi(2)).sqrt(),
            ks: None,
        });
    }
    Ok(InequalityReport::from_trials(
        "projection_invariance",
        MarginMode::TwoSided,
        per_trial,
    ))
}

/// Quarter-turn symmetry of a 2-D block: the projection onto w and onto R w
/// (R the 90-degree ccw rotation) must agree in entropy and in distribution;
/// the per-direction KS statistic is recorded alongside the entropy margin.
pub fn check_rot90_symmetry(
    block: &SampleBlock,
    dirs: &DirectionSet,
    seed: RngSeed,
) -> Result<InequalityReport> {
    if block.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "quarter-turn check needs a 2-D block, got {}",
            block.dim()
        )));
    }
    require_samples(block, 10_000)?;
    ensure_direction_dim(block, dirs)?;

    let mut per_trial = Vec::with_capacity(dirs.len());
    for (t, w) in dirs.directions().iter().enumerate() {
        let rotated = vec![-w[1], w[0]];
        let proj = block.project(w);
        let proj_rot = block.project(&rotated);
        let a = entropy_1d(&proj, None, seed.derive(6000 + t as u64))?;
        let b = entropy_1d(&proj_rot, None, seed.derive(7000 + t as u64))?;
        per_trial.push(TrialRecord {
            direction: w.clone(),
            lhs: a.value,
            rhs: b.value,
            margin: a.value - b.value,
            stderr: (a.stderr.powi(2) + b.stderr.powi(2)).sqrt(),
            ks: Some(ks_statistic(&proj, &proj_rot)),
        });
    }
    Ok(InequalityReport::from_trials(
        "rot90_symmetry",
        MarginMode::TwoSided,
        per_trial,
    ))
}

/// Projection-entropy profile of a 2-D block at `resolution` equally spaced
/// angles spanning [0, pi/2]; the argmin direction and its quarter turn form
/// the implied orthonormal basis.
pub fn scan_entropy_on_circle(
    block: &SampleBlock,
    resolution: usize,
    seed: RngSeed,
) -> Result<Vec<(f64, EntropyEstimate)>> {
    if block.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "entropy scan needs a 2-D block, got {}",
            block.dim()
        )));
    }
    if resolution < 8 {
        return Err(Error::InvalidArgument(format!(
            "resolution must be at least 8, got {resolution}"
        )));
    }
    let mut profile = Vec::with_capacity(resolution);
    for j in 0..resolution {
        let theta = j as f64 * std::f64::consts::FRAC_PI_2 / (resolution - 1) as f64;
        let w = [theta.cos(), theta.sin()];
        let est = entropy_1d(&block.project(&w), None, seed.derive(8000 + j as u64))?;
        profile.push((theta, est));
    }
    Ok(profile)
}

/// Index of the scan angle with the smallest entropy estimate.
pub fn scan_argmin(profile: &[(f64, EntropyEstimate)]) -> usize {
    profile
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.value.total_cmp(&b.1 .1.value))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn ensure_direction_dim(block: &SampleBlock, dirs: &DirectionSet) -> Result<()> {
    for w in dirs.directions() {
        if w.len() != block.dim() {
            return Err(Error::DimensionMismatch(format!(
                "direction dimension {} does not match block dimension {}",
                w.len(),
                block.dim()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{make_instance, Mixing};
    use crate::sources::{sample_spherical, Marginal, RadialSpec, SourceSpec};
    use crate::stats::ks_critical;

    #[test]
    fn directions_include_canonical_exactly() {
        let d = sample_directions(2, 3, RngSeed::new(1), true);
        assert_eq!(d.len(), 5);
        assert_eq!(d.directions()[0], vec![1.0, 0.0]);
        assert_eq!(d.directions()[1], vec![0.0, 1.0]);
    }

    #[test]
    fn directions_are_unit_norm() {
        let d = sample_directions(4, 100, RngSeed::new(2), false);
        for w in d.directions() {
            let norm: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn direction_mean_vanishes_by_symmetry() {
        let count = 10_000;
        let d = sample_directions(3, count, RngSeed::new(3), false);
        let mut mean = [0.0f64; 3];
        for w in d.directions() {
            for (m, v) in mean.iter_mut().zip(w) {
                *m += v;
            }
        }
        let norm = mean.iter().map(|m| (m / count as f64).powi(2)).sum::<f64>().sqrt();
        assert!(norm < 0.05, "mean norm {norm}");
    }

    #[test]
    fn w_epi_equality_for_independent_gaussians_at_diagonal_direction() {
        // closed form: the sum along (1,1)/sqrt(2) of two independent
        // standard normals is standard normal; both sides equal 2 pi e
        let n = 100_000;
        let block = sample_spherical(2, &RadialSpec::ChiOfDim, n, RngSeed::new(4)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let dirs = DirectionSet::new(vec![vec![s, s]]).unwrap();
        let report = check_w_epi(&block, &dirs, RngSeed::new(5)).unwrap();
        let t = &report.per_trial[0];
        let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
        assert!((t.lhs - two_pi_e).abs() / two_pi_e < 0.02, "lhs {}", t.lhs);
        assert!((t.rhs - two_pi_e).abs() / two_pi_e < 0.02, "rhs {}", t.rhs);
        assert!(t.margin.abs() / t.lhs < 0.02);
    }

    #[test]
    fn w_epi_holds_for_independent_laplace_pair() {
        let n = 20_000;
        let spec = SourceSpec::IidMarginal {
            dim: 2,
            marginal: Marginal::Laplace,
        };
        let block = spec.sample(n, RngSeed::new(6)).unwrap();
        let dirs = sample_directions(2, 50, RngSeed::new(7), true);
        let report = check_w_epi(&block, &dirs, RngSeed::new(8)).unwrap();
        assert_eq!(report.violations, 0, "worst margin {}", report.worst_margin);
    }

    #[test]
    fn entropy_combination_collapses_at_canonical_directions() {
        let n = 20_000;
        let spec = SourceSpec::IidMarginal {
            dim: 2,
            marginal: Marginal::Uniform,
        };
        let block = spec.sample(n, RngSeed::new(9)).unwrap();
        let dirs = DirectionSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let report = check_entropy_combination(&block, &dirs, RngSeed::new(10)).unwrap();
        for t in &report.per_trial {
            assert!(
                t.margin.abs() <= 2.0 * t.stderr.max(1e-12),
                "canonical margin {} stderr {}",
                t.margin,
                t.stderr
            );
        }
    }

    #[test]
    fn entropy_combination_equality_for_spherical() {
        let n = 20_000;
        let block = sample_spherical(2, &RadialSpec::Constant(1.0), n, RngSeed::new(11)).unwrap();
        let dirs = sample_directions(2, 20, RngSeed::new(12), true);
        let report = check_entropy_combination(&block, &dirs, RngSeed::new(13)).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.max_abs_margin() <= report.tolerance, "measured equality regime");
    }

    #[test]
    fn entropy_combination_holds_for_independent_uniform_pair() {
        let n = 20_000;
        let spec = SourceSpec::IidMarginal {
            dim: 2,
            marginal: Marginal::Uniform,
        };
        let block = spec.sample(n, RngSeed::new(14)).unwrap();
        let dirs = sample_directions(2, 100, RngSeed::new(15), false);
        let combo = check_entropy_combination(&block, &dirs, RngSeed::new(16)).unwrap();
        assert_eq!(combo.violations, 0);
        // cross-check with the entropy-power report on the same data
        let epi = check_w_epi(&block, &dirs, RngSeed::new(17)).unwrap();
        assert_eq!(epi.violations, 0);
    }

    #[test]
    fn proposition_sum_identity_margin_is_exactly_zero() {
        let specs = vec![
            SourceSpec::Spherical {
                dim: 2,
                radial: RadialSpec::ChiOfDim,
            },
            SourceSpec::Spherical {
                dim: 2,
                radial: RadialSpec::Constant(1.0),
            },
        ];
        let inst = make_instance(&specs, 12_000, RngSeed::new(18), Mixing::HaarRandom).unwrap();
        let report = check_proposition_sum(&inst, 3, RngSeed::new(19)).unwrap();
        assert_eq!(report.per_trial[0].margin, 0.0);
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn projection_invariance_spherical_versus_control() {
        let n = 20_000;
        let dirs = sample_directions(2, 30, RngSeed::new(20), true);
        let spherical = sample_spherical(2, &RadialSpec::ChiOfDim, n, RngSeed::new(21)).unwrap();
        let report = check_projection_invariance(&spherical, &dirs, RngSeed::new(22)).unwrap();
        assert_eq!(report.violations, 0, "spherical max |margin| {}", report.max_abs_margin());

        // negative control: product of uniforms is anisotropic
        let control = SourceSpec::IidMarginal {
            dim: 2,
            marginal: Marginal::Uniform,
        }
        .sample(n, RngSeed::new(23))
        .unwrap();
        let control_report = check_projection_invariance(&control, &dirs, RngSeed::new(24)).unwrap();
        assert!(
            control_report.violations > 0,
            "control failed to fail: max |margin| {} tolerance {}",
            control_report.max_abs_margin(),
            control_report.tolerance
        );
    }

    #[test]
    fn rot90_symmetry_holds_for_symmetrized_block_and_fails_for_sheared() {
        let n = 20_000;
        let dirs = sample_directions(2, 25, RngSeed::new(25), true);
        let sym = SourceSpec::Rot90 {
            base: Box::new(SourceSpec::IidMarginal {
                dim: 2,
                marginal: Marginal::Uniform,
            }),
        }
        .sample(n, RngSeed::new(26))
        .unwrap();
        let report = check_rot90_symmetry(&sym, &dirs, RngSeed::new(27)).unwrap();
        assert_eq!(report.violations, 0);
        let crit = ks_critical(n, n, 0.01);
        assert!(report.max_ks().unwrap() < crit, "ks {}", report.max_ks().unwrap());

        // sheared uniform square: x' = x + 0.8 y breaks the symmetry
        let base = SourceSpec::IidMarginal {
            dim: 2,
            marginal: Marginal::Uniform,
        }
        .sample(n, RngSeed::new(28))
        .unwrap();
        let mut sheared = base.samples.as_dmatrix().clone();
        for i in 0..n {
            sheared[(i, 0)] += 0.8 * sheared[(i, 1)];
        }
        let sheared = SampleBlock::new(Matrix::from_dmatrix(sheared).unwrap());
        let control = check_rot90_symmetry(&sheared, &dirs, RngSeed::new(29)).unwrap();
        assert!(
            control.max_ks().unwrap() > crit,
            "sheared control ks {} below critical {crit}",
            control.max_ks().unwrap()
        );
    }

    #[test]
    fn spherical_block_satisfies_rot90_too() {
        let n = 15_000;
        let dirs = sample_directions(2, 10, RngSeed::new(30), false);
        let block = sample_spherical(2, &RadialSpec::Uniform(0.5, 1.5), n, RngSeed::new(31)).unwrap();
        let report = check_rot90_symmetry(&block, &dirs, RngSeed::new(32)).unwrap();
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn scan_profile_flat_for_spherical() {
        let n = 50_000;
        let block = sample_spherical(2, &RadialSpec::ChiOfDim, n, RngSeed::new(33)).unwrap();
        let profile = scan_entropy_on_circle(&block, 16, RngSeed::new(34)).unwrap();
        assert_eq!(profile.len(), 16);
        let max = profile.iter().map(|(_, e)| e.value).fold(f64::NEG_INFINITY, f64::max);
        let min = profile.iter().map(|(_, e)| e.value).fold(f64::INFINITY, f64::min);
        let stderr = profile.iter().map(|(_, e)| e.stderr).fold(0.0, f64::max);
        assert!(max - min < 3.0 * stderr, "range {} vs 3 x stderr {}", max - min, 3.0 * stderr);
    }

    #[test]
    fn scan_refinement_keeps_argmin() {
        let n = 30_000;
        let spec = SourceSpec::LpSpherical {
            dim: 2,
            p: 4.0,
            radial: RadialSpec::Constant(1.0),
        };
        let block = spec.sample(n, RngSeed::new(35)).unwrap();
        let coarse = scan_entropy_on_circle(&block, 8, RngSeed::new(36)).unwrap();
        let fine = scan_entropy_on_circle(&block, 64, RngSeed::new(36)).unwrap();
        let coarse_theta = coarse[scan_argmin(&coarse)].0;
        let fine_theta = fine[scan_argmin(&fine)].0;
        let coarse_step = std::f64::consts::FRAC_PI_2 / 7.0;
        let dist = (coarse_theta - fine_theta).abs();
        // the profile is pi/2-periodic with symmetric minima, so compare in
        // the folded metric
        let folded = dist.min((std::f64::consts::FRAC_PI_2 - dist).abs());
        assert!(
            folded <= coarse_step + 1e-9,
            "coarse argmin {coarse_theta} vs fine argmin {fine_theta}"
        );
    }

    #[test]
    fn scan_requires_minimum_resolution() {
        let block = sample_spherical(2, &RadialSpec::ChiOfDim, 15_000, RngSeed::new(37)).unwrap();
        assert!(matches!(
            scan_entropy_on_circle(&block, 4, RngSeed::new(38)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn report_csv_includes_summary_and_rows() {
        let n = 12_000;
        let block = sample_spherical(2, &RadialSpec::ChiOfDim, n, RngSeed::new(39)).unwrap();
        let dirs = sample_directions(2, 3, RngSeed::new(40), false);
        let report = check_w_epi(&block, &dirs, RngSeed::new(41)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        report.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# check=w_epi"));
        assert_eq!(text.lines().count(), 1 + report.trials);
    }
}
