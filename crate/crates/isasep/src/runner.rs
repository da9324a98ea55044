//! Command implementations behind the CLI: generate instances, run the
//! two-stage pipeline, run the verification suites, and emit plot-ready scan
//! data. Every command is reproducible from (config, seed): all output bytes
//! are seed-determined except the timestamp and timing lines of the manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{CheckKind, ExperimentConfig, MixingSpec, Strategy};
use crate::entropy::{dependence_matrix, DEFAULT_KNN_K};
use crate::error::{Error, Result};
use crate::grouping::{assemble_separation, group_exhaustive, group_greedy, SearchOutcome};
use crate::ica::{cost_with_stderr, fastica, IcaConfig};
use crate::instance::{
    block_amari_index, grouping_accuracy, make_instance, Grouping, IsaInstance, Mixing,
};
use crate::linalg::{whiten, Matrix, OrthogonalMatrix};
use crate::rng::RngSeed;
use crate::sources::{standardize_block, Marginal, SampleBlock, SourceSpec};
use crate::stats::{ks_critical, ks_statistic};
use crate::verify::{
    check_entropy_combination, check_projection_invariance, check_proposition_sum,
    check_rot90_symmetry, check_w_epi, sample_directions, scan_entropy_on_circle, InequalityReport,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

// seed streams, one per consumer
const STREAM_INSTANCE: u64 = 1;
const STREAM_ICA: u64 = 2;
const STREAM_VERIFY: u64 = 3;
const STREAM_SCAN: u64 = 4;

/// Plain-text `key = value` run record, written atomically at run end.
#[derive(Debug, Default)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    fn new(command: &str, cfg: &ExperimentConfig, seed: u64) -> Self {
        let mut m = RunManifest::default();
        m.push("version", VERSION);
        m.push("command", command);
        m.push(
            "timestamp",
            format!(
                "{}",
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            ),
        );
        m.push("seed", seed.to_string());
        for (k, v) in &cfg.echo {
            m.push(format!("config.{k}"), v.clone());
        }
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Atomic write: temp file in the target directory, then rename.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "{k} = {v}").expect("write to string");
        }
        let tmp = path.with_extension("txt.tmp");
        std::fs::write(&tmp, out)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn parse(text: &str) -> Self {
        let mut m = RunManifest::default();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                m.push(k.trim(), v.trim());
            }
        }
        m
    }
}

fn resolve_out_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| {
            Error::InvalidArgument(
                "no output directory: pass --out or set `output` in [experiment]".into(),
            )
        })?;
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn build_instance(cfg: &ExperimentConfig, seed: RngSeed) -> Result<IsaInstance> {
    if cfg.sources.is_empty() {
        return Err(Error::InvalidArgument("config declares no sources".into()));
    }
    let mixing = match &cfg.mixing {
        MixingSpec::Haar => Mixing::HaarRandom,
        MixingSpec::Identity => Mixing::Identity,
        MixingSpec::File(path) => {
            Mixing::Given(OrthogonalMatrix::new(Matrix::read_csv(path)?)?)
        }
    };
    make_instance(&cfg.sources, cfg.sample_count, seed.derive(STREAM_INSTANCE), mixing)
        .map_err(|e| e.in_stage("generate"))
}

/// Writes S, A, Z, the true grouping, and a manifest to the output directory.
pub fn cmd_generate(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<RunManifest> {
    let out_dir = resolve_out_dir(cfg, out)?;
    let seed = seed_override.unwrap_or(cfg.master_seed);
    let mut manifest = RunManifest::new("generate", cfg, seed);

    let start = Instant::now();
    let instance = build_instance(cfg, RngSeed::new(seed))?;
    manifest.push("timing.generate_ms", start.elapsed().as_millis().to_string());

    instance.sources.write_csv(&out_dir.join("S.csv"))?;
    instance.mixing.matrix().write_csv(&out_dir.join("A.csv"))?;
    instance.observations.write_csv(&out_dir.join("Z.csv"))?;
    std::fs::write(
        out_dir.join("grouping.txt"),
        format!("{}\n", instance.true_grouping.serialize()),
    )?;
    for name in ["S", "A", "Z"] {
        manifest.push(format!("files.{name}"), format!("{name}.csv"));
    }
    manifest.push("files.grouping", "grouping.txt");
    manifest.push("metrics.samples", instance.sample_count().to_string());
    manifest.push("metrics.total_dim", instance.total_dim().to_string());
    manifest.write(&out_dir.join("manifest.txt"))?;
    Ok(manifest)
}

/// Ground truth loaded back from a `generate` output directory.
struct GroundTruth {
    mixing: OrthogonalMatrix,
    grouping: Grouping,
}

/// Runs whiten -> ICA -> dependence matrix -> grouping search -> assembly.
/// `input` may point at a directory produced by `generate`; otherwise the
/// instance is generated inline from the config.
pub fn cmd_separate(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    input: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<RunManifest> {
    let out_dir = resolve_out_dir(cfg, out)?;
    let seed = seed_override.unwrap_or(cfg.master_seed);
    let run_seed = RngSeed::new(seed);
    let mut manifest = RunManifest::new("separate", cfg, seed);

    // observations + optional ground truth
    let (observations, truth, dims) = match input {
        Some(dir) => {
            let z = Matrix::read_csv(&dir.join("Z.csv"))?;
            let truth = load_ground_truth(dir)?;
            let dims = match &truth {
                Some(t) => t.grouping.sizes(),
                None => config_dims(cfg)?,
            };
            (z, truth, dims)
        }
        None => {
            let instance = build_instance(cfg, run_seed)?;
            let dims = instance.dims.clone();
            let truth = GroundTruth {
                mixing: instance.mixing.clone(),
                grouping: instance.true_grouping.clone(),
            };
            (instance.observations, Some(truth), dims)
        }
    };

    let start = Instant::now();
    let (wt, whitened) = whiten(&observations).map_err(|e| e.in_stage("whitening"))?;
    manifest.push("timing.whiten_ms", start.elapsed().as_millis().to_string());

    let start = Instant::now();
    let ica_config = IcaConfig {
        nonlinearity: cfg.ica.nonlinearity,
        max_iterations: cfg.ica.max_iterations,
        tolerance: cfg.ica.tolerance,
        restarts: cfg.ica.restarts,
        seed: run_seed.derive(STREAM_ICA),
    };
    let ica = fastica(&whitened, &ica_config).map_err(|e| e.in_stage("ica"))?;
    manifest.push("timing.ica_ms", start.elapsed().as_millis().to_string());
    manifest.push("metrics.ica_iterations", ica.iterations.to_string());
    manifest.push("metrics.ica_restart", ica.restart.to_string());
    manifest.push("metrics.ica_final_delta", format!("{:.6e}", ica.final_delta));
    if !ica.converged {
        return Err(Error::NonConvergence {
            best_delta: ica.final_delta,
        }
        .in_stage("ica"));
    }

    let y_ica = Matrix::from_dmatrix(whitened.as_dmatrix() * ica.w.as_dmatrix().transpose())?;

    let start = Instant::now();
    let dep = dependence_matrix(&y_ica, DEFAULT_KNN_K).map_err(|e| e.in_stage("grouping"))?;
    let outcome: SearchOutcome = match cfg.strategy {
        Strategy::Exhaustive => group_exhaustive(&dep, &dims),
        Strategy::Greedy => group_greedy(&dep, &dims),
    }
    .map_err(|e| e.in_stage("grouping"))?;
    manifest.push("timing.grouping_ms", start.elapsed().as_millis().to_string());
    manifest.push("metrics.grouping_score", format!("{:.6e}", outcome.score));

    let w_isa = assemble_separation(&ica.w, &outcome.grouping).map_err(|e| e.in_stage("grouping"))?;
    let recovered = Matrix::from_dmatrix(whitened.as_dmatrix() * w_isa.as_dmatrix().transpose())?;

    // the estimated grouping in block-contiguous output order
    let estimated = Grouping::contiguous(&outcome.grouping.sizes())?;

    w_isa.matrix().write_csv(&out_dir.join("W_isa.csv"))?;
    recovered.write_csv(&out_dir.join("Y.csv"))?;
    dep_to_matrix(&dep).write_csv(&out_dir.join("dependence.csv"))?;
    std::fs::write(
        out_dir.join("grouping_estimated.txt"),
        format!("{}\n", outcome.grouping.serialize()),
    )?;
    manifest.push("files.W_isa", "W_isa.csv");
    manifest.push("files.Y", "Y.csv");
    manifest.push("files.dependence", "dependence.csv");
    manifest.push("files.grouping_estimated", "grouping_estimated.txt");

    // cost descent report: marginal-entropy sum before and after rotation
    let (cost_white, err_white) = cost_with_stderr(&whitened, run_seed.derive(40))?;
    let (cost_final, err_final) = cost_with_stderr(&recovered, run_seed.derive(40))?;
    manifest.push("metrics.cost_whitened", format!("{cost_white:.6}"));
    manifest.push("metrics.cost_recovered", format!("{cost_final:.6}"));
    manifest.push(
        "metrics.cost_stderr",
        format!("{:.6}", err_white.max(err_final)),
    );

    if let Some(truth) = truth {
        // global transfer from true sources to recovered coordinates
        let g = Matrix::from_dmatrix(
            w_isa.as_dmatrix() * wt.transform.as_dmatrix() * truth.mixing.as_dmatrix(),
        )?;
        let amari = block_amari_index(&g, &truth.grouping)?;
        manifest.push("metrics.amari_index", format!("{amari:.6}"));
        if let Some(reference) = dominant_grouping(&g, &outcome.grouping.sizes(), &truth.grouping) {
            let accuracy = grouping_accuracy(&estimated, &reference)?;
            manifest.push("metrics.grouping_accuracy", format!("{accuracy:.6}"));
        } else {
            manifest.push("metrics.grouping_accuracy", "0.000000");
        }
    }

    manifest.write(&out_dir.join("manifest.txt"))?;
    Ok(manifest)
}

fn config_dims(cfg: &ExperimentConfig) -> Result<Vec<usize>> {
    if cfg.sources.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot infer block sizes: config declares no sources".into(),
        ));
    }
    Ok(cfg.sources.iter().map(|s| s.dim()).collect())
}

fn load_ground_truth(dir: &Path) -> Result<Option<GroundTruth>> {
    let a_path = dir.join("A.csv");
    let g_path = dir.join("grouping.txt");
    if !a_path.exists() || !g_path.exists() {
        return Ok(None);
    }
    let mixing = OrthogonalMatrix::new(Matrix::read_csv(&a_path)?)?;
    let grouping = Grouping::parse(&std::fs::read_to_string(&g_path)?)?;
    Ok(Some(GroundTruth { mixing, grouping }))
}

fn dep_to_matrix(dep: &crate::entropy::DependenceMatrix) -> Matrix {
    Matrix::from_dmatrix(dep.as_dmatrix().clone()).expect("dependence entries are finite")
}

/// Maps each recovered coordinate to the true block of its dominant source
/// coordinate (by |G|), expressed in the recovered row order. Returns None
/// when the mapping is not block-size compatible, i.e. recovery failed badly.
fn dominant_grouping(g: &Matrix, est_sizes: &[usize], truth: &Grouping) -> Option<Grouping> {
    let d = g.rows();
    let mut true_block_of = vec![0usize; d];
    for (m, block) in truth.blocks().iter().enumerate() {
        for &j in block {
            true_block_of[j] = m;
        }
    }
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); truth.num_blocks()];
    for i in 0..d {
        let mut best = 0usize;
        for j in 1..d {
            if g.get(i, j).abs() > g.get(i, best).abs() {
                best = j;
            }
        }
        blocks[true_block_of[best]].push(i);
    }
    let mut ref_sizes: Vec<usize> = blocks.iter().map(Vec::len).collect();
    ref_sizes.sort_unstable();
    let mut est = est_sizes.to_vec();
    est.sort_unstable();
    if ref_sizes != est {
        return None;
    }
    Grouping::new(blocks.into_iter().filter(|b| !b.is_empty()).collect()).ok()
}

/// Per-check outcome of a `verify` run.
pub struct CheckOutcome {
    pub name: String,
    pub control: bool,
    pub passed: bool,
    pub report: InequalityReport,
}

pub struct VerifyOutcome {
    pub checks: Vec<CheckOutcome>,
    pub manifest: RunManifest,
}

impl VerifyOutcome {
    /// Exit-relevant success: every non-control check passed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.control || c.passed)
    }
}

/// Runs the configured verification checks over the configured sources and
/// writes one CSV per check plus a plain-text summary.
pub fn cmd_verify(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<VerifyOutcome> {
    let out_dir = resolve_out_dir(cfg, out)?;
    let seed = seed_override.unwrap_or(cfg.master_seed);
    let run_seed = RngSeed::new(seed).derive(STREAM_VERIFY);
    let mut manifest = RunManifest::new("verify", cfg, seed);
    if cfg.sources.is_empty() {
        return Err(Error::InvalidArgument("verify needs at least one source".into()));
    }

    let n = cfg.sample_count;
    let mut checks: Vec<CheckOutcome> = Vec::new();

    for (si, spec) in cfg.sources.iter().enumerate() {
        let block_seed = run_seed.derive(si as u64);
        let raw = spec.sample(n, block_seed)?;
        // elliptical blocks are normalized to their spherical core first;
        // every other family is checked as constructed
        let block = match spec {
            SourceSpec::Elliptical { .. } => standardize_block(&raw)?,
            _ => raw,
        };
        let dirs = sample_directions(block.dim(), cfg.verify.directions, block_seed.derive(1), true);
        for check in &cfg.verify.checks {
            let label = format!("source{}_{}", si + 1, check.name());
            let report = match check {
                CheckKind::WEpi => Some(check_w_epi(&block, &dirs, block_seed.derive(2))?),
                CheckKind::EntropyCombination => {
                    Some(check_entropy_combination(&block, &dirs, block_seed.derive(3))?)
                }
                CheckKind::ProjectionInvariance => {
                    // only meaningful for rotation-invariant families
                    if matches!(spec, SourceSpec::Spherical { .. } | SourceSpec::Elliptical { .. }) {
                        Some(check_projection_invariance(&block, &dirs, block_seed.derive(4))?)
                    } else {
                        None
                    }
                }
                CheckKind::Rot90Symmetry => {
                    if block.dim() == 2
                        && matches!(
                            spec,
                            SourceSpec::Spherical { .. }
                                | SourceSpec::Elliptical { .. }
                                | SourceSpec::LpSpherical { .. }
                                | SourceSpec::Rot90 { .. }
                        )
                    {
                        Some(check_rot90_symmetry(&block, &dirs, block_seed.derive(5))?)
                    } else {
                        None
                    }
                }
                CheckKind::PropositionSum => None, // instance-level, handled below
            };
            if let Some(report) = report {
                let passed = report.passes();
                report.write_csv(&out_dir.join(format!("check_{label}.csv")))?;
                manifest.push(format!("files.check_{label}"), format!("check_{label}.csv"));
                checks.push(CheckOutcome {
                    name: label,
                    control: false,
                    passed,
                    report,
                });
            }
        }
    }

    if cfg.verify.checks.contains(&CheckKind::PropositionSum) {
        let instance = build_instance(cfg, RngSeed::new(seed))?;
        let report = check_proposition_sum(&instance, cfg.verify.trials, run_seed.derive(900))?;
        let passed = report.passes();
        report.write_csv(&out_dir.join("check_proposition_sum.csv"))?;
        manifest.push("files.check_proposition_sum", "check_proposition_sum.csv");
        checks.push(CheckOutcome {
            name: "proposition_sum".into(),
            control: false,
            passed,
            report,
        });
    }

    if cfg.verify.controls {
        for (name, report, passed) in control_checks(n, run_seed.derive(1000))? {
            report.write_csv(&out_dir.join(format!("check_control_{name}.csv")))?;
            manifest.push(
                format!("files.check_control_{name}"),
                format!("check_control_{name}.csv"),
            );
            checks.push(CheckOutcome {
                name: format!("control_{name}"),
                control: true,
                passed,
                report,
            });
        }
    }

    // summary
    let mut summary = String::new();
    for c in &checks {
        let verdict = if c.control {
            if c.passed {
                "expected-fail: observed pass (SUSPICIOUS)"
            } else {
                "expected-fail: observed fail"
            }
        } else if c.passed {
            if c.report.mode == crate::verify::MarginMode::TwoSided {
                "PASS (equality within tolerance)"
            } else {
                "PASS"
            }
        } else {
            "FAIL"
        };
        writeln!(
            summary,
            "{:<40} {:<40} trials={} violations={} worst_margin={:.4e} tolerance={:.4e}",
            c.name, verdict, c.report.trials, c.report.violations, c.report.worst_margin, c.report.tolerance
        )
        .expect("write to string");
        manifest.push(
            format!("metrics.{}", c.name),
            if c.passed { "pass" } else { "fail" },
        );
    }
    std::fs::write(out_dir.join("summary.txt"), &summary)?;
    manifest.push("files.summary", "summary.txt");
    manifest.write(&out_dir.join("manifest.txt"))?;

    Ok(VerifyOutcome { checks, manifest })
}

/// Negative controls: checks that must fail on deliberately broken inputs,
/// exercised so a silent always-pass verifier cannot hide. Returns
/// (name, report, passed); the quarter-turn control also counts its KS
/// statistic against the 1% critical value.
fn control_checks(n: usize, seed: RngSeed) -> Result<Vec<(&'static str, InequalityReport, bool)>> {
    let mut out = Vec::new();

    // anisotropic product density probed by the spherical-invariance check
    let iid = SourceSpec::IidMarginal {
        dim: 2,
        marginal: Marginal::Uniform,
    }
    .sample(n, seed.derive(1))?;
    let dirs = sample_directions(2, 24, seed.derive(2), true);
    let proj = check_projection_invariance(&iid, &dirs, seed.derive(3))?;
    let proj_passed = proj.passes();
    out.push(("projection_invariance_uniform_square", proj, proj_passed));

    // sheared uniform square probed by the quarter-turn check
    let base = SourceSpec::IidMarginal {
        dim: 2,
        marginal: Marginal::Uniform,
    }
    .sample(n, seed.derive(4))?;
    let mut sheared = base.samples.as_dmatrix().clone();
    for i in 0..n {
        sheared[(i, 0)] += 0.8 * sheared[(i, 1)];
    }
    let sheared = SampleBlock::new(Matrix::from_dmatrix(sheared)?);
    let rot = check_rot90_symmetry(&sheared, &dirs, seed.derive(5))?;
    let crit = ks_critical(n, n, 0.01);
    let rot_passed = rot.passes() && rot.max_ks().map_or(true, |ks| ks < crit);
    out.push(("rot90_sheared_square", rot, rot_passed));
    Ok(out)
}

/// Writes the (angle, entropy, stderr) profile of a configured 2-D source.
pub fn cmd_scan(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<RunManifest> {
    let out_dir = resolve_out_dir(cfg, out)?;
    let seed = seed_override.unwrap_or(cfg.master_seed);
    let run_seed = RngSeed::new(seed).derive(STREAM_SCAN);
    let mut manifest = RunManifest::new("scan", cfg, seed);

    let index = cfg.scan.source;
    let spec = cfg.sources.get(index.wrapping_sub(1)).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "scan source {} out of range: config has {} sources",
            index,
            cfg.sources.len()
        ))
    })?;
    if spec.dim() != 2 {
        return Err(Error::InvalidArgument(format!(
            "scan needs a 2-D source, source {} has dimension {}",
            index,
            spec.dim()
        )));
    }
    let block = spec.sample(cfg.sample_count, run_seed.derive(0))?;
    let start = Instant::now();
    let profile = scan_entropy_on_circle(&block, cfg.scan.resolution, run_seed.derive(1))?;
    manifest.push("timing.scan_ms", start.elapsed().as_millis().to_string());

    let mut csv = String::new();
    for (theta, est) in &profile {
        writeln!(csv, "{:.16e},{:.16e},{:.16e}", theta, est.value, est.stderr)
            .expect("write to string");
    }
    std::fs::write(out_dir.join("scan.csv"), csv)?;
    manifest.push("files.scan", "scan.csv");

    let argmin = crate::verify::scan_argmin(&profile);
    manifest.push("metrics.argmin_angle", format!("{:.6}", profile[argmin].0));
    manifest.push(
        "metrics.argmin_entropy",
        format!("{:.6}", profile[argmin].1.value),
    );
    manifest.write(&out_dir.join("manifest.txt"))?;
    Ok(manifest)
}

/// KS agreement between projections at theta and theta + pi/2, for symmetry
/// reporting on scans.
pub fn quarter_turn_ks(block: &SampleBlock, theta: f64) -> f64 {
    let w = [theta.cos(), theta.sin()];
    let r = [-w[1], w[0]];
    ks_statistic(&block.project(&w), &block.project(&r))
}
