//! Flat INI-style experiment configuration: `[section]` headers and
//! `key = value` lines, lists comma-separated, `#` or `;` full-line comments.
//! Parsing either yields a complete validated configuration or fails with a
//! line-numbered error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ica::Nonlinearity;
use crate::linalg::Matrix;
use crate::sources::{Marginal, RadialSpec, SourceSpec};

/// Which verification checks a `verify` run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    WEpi,
    EntropyCombination,
    PropositionSum,
    ProjectionInvariance,
    Rot90Symmetry,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] = [
        CheckKind::WEpi,
        CheckKind::EntropyCombination,
        CheckKind::PropositionSum,
        CheckKind::ProjectionInvariance,
        CheckKind::Rot90Symmetry,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::WEpi => "w_epi",
            CheckKind::EntropyCombination => "entropy_combination",
            CheckKind::PropositionSum => "proposition_sum",
            CheckKind::ProjectionInvariance => "projection_invariance",
            CheckKind::Rot90Symmetry => "rot90_symmetry",
        }
    }

    fn parse(name: &str) -> Option<CheckKind> {
        CheckKind::ALL.iter().copied().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone)]
pub enum MixingSpec {
    Haar,
    Identity,
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct IcaSettings {
    pub nonlinearity: Nonlinearity,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub restarts: usize,
}

impl Default for IcaSettings {
    fn default() -> Self {
        IcaSettings {
            nonlinearity: Nonlinearity::Tanh,
            max_iterations: 1000,
            tolerance: 1e-8,
            restarts: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone)]
pub struct VerifySettings {
    pub checks: Vec<CheckKind>,
    pub directions: usize,
    /// Orthogonal matrices probed by the marginal-entropy-sum check.
    pub trials: usize,
    pub controls: bool,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            checks: CheckKind::ALL.to_vec(),
            directions: 50,
            trials: 100,
            controls: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanSettings {
    pub resolution: usize,
    /// 1-based index of the configured source to scan.
    pub source: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            resolution: 16,
            source: 1,
        }
    }
}

/// A full experiment description, parsed from one INI file.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub sources: Vec<SourceSpec>,
    pub sample_count: usize,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub mixing: MixingSpec,
    pub ica: IcaSettings,
    pub strategy: Strategy,
    pub verify: VerifySettings,
    pub scan: ScanSettings,
    /// `section.key = value` echo for the manifest, in file order.
    pub echo: Vec<(String, String)>,
}

struct RawSection {
    line: usize,
    entries: BTreeMap<String, (usize, String)>,
}

impl RawSection {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn finish(self, section: &str) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().next() {
            return Err(Error::Config {
                line,
                message: format!("unknown key {key:?} in section [{section}]"),
            });
        }
        Ok(())
    }
}

pub fn parse_config_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut sections: Vec<(String, RawSection)> = Vec::new();
    let mut echo = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(Error::Config {
                line: line_no,
                message: "unterminated section header".into(),
            })?;
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(Error::Config {
                    line: line_no,
                    message: "empty section name".into(),
                });
            }
            if sections.iter().any(|(n, _)| *n == name) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("duplicate section [{name}]"),
                });
            }
            sections.push((
                name,
                RawSection {
                    line: line_no,
                    entries: BTreeMap::new(),
                },
            ));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config {
                line: line_no,
                message: format!("expected `key = value`, got {line:?}"),
            });
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        let Some((section_name, section)) = sections.last_mut() else {
            return Err(Error::Config {
                line: line_no,
                message: "key outside of any [section]".into(),
            });
        };
        if section.entries.contains_key(&key) {
            return Err(Error::Config {
                line: line_no,
                message: format!("duplicate key {key:?} in section [{section_name}]"),
            });
        }
        echo.push((format!("{section_name}.{key}"), value.clone()));
        section.entries.insert(key, (line_no, value));
    }

    let mut experiment: Option<RawSection> = None;
    let mut mixing_section: Option<RawSection> = None;
    let mut ica_section: Option<RawSection> = None;
    let mut grouping_section: Option<RawSection> = None;
    let mut verify_section: Option<RawSection> = None;
    let mut scan_section: Option<RawSection> = None;
    let mut source_sections: Vec<(usize, usize, RawSection)> = Vec::new(); // (index, line, body)

    for (name, section) in sections {
        if let Some(suffix) = name.strip_prefix("source.") {
            let index: usize = suffix.parse().map_err(|_| Error::Config {
                line: section.line,
                message: format!("bad source index {suffix:?}; use [source.1], [source.2], ..."),
            })?;
            if index == 0 {
                return Err(Error::Config {
                    line: section.line,
                    message: "source indices are 1-based".into(),
                });
            }
            source_sections.push((index, section.line, section));
            continue;
        }
        let slot = match name.as_str() {
            "experiment" => &mut experiment,
            "mixing" => &mut mixing_section,
            "ica" => &mut ica_section,
            "grouping" => &mut grouping_section,
            "verify" => &mut verify_section,
            "scan" => &mut scan_section,
            _ => {
                return Err(Error::Config {
                    line: section.line,
                    message: format!("unknown section [{name}]"),
                })
            }
        };
        *slot = Some(section);
    }

    let mut experiment = experiment.ok_or(Error::Config {
        line: 1,
        message: "missing required [experiment] section".into(),
    })?;
    let sample_count = take_parse(&mut experiment, "samples", None)?;
    let master_seed = take_parse(&mut experiment, "seed", None)?;
    let output_dir = experiment.take("output").map(|(_, v)| PathBuf::from(v));
    experiment.finish("experiment")?;

    source_sections.sort_by_key(|(index, _, _)| *index);
    for (pos, (index, line, _)) in source_sections.iter().enumerate() {
        if *index != pos + 1 {
            return Err(Error::Config {
                line: *line,
                message: format!("source sections must be numbered 1..N without gaps; found {index}"),
            });
        }
    }
    let mut sources = Vec::with_capacity(source_sections.len());
    for (index, line, mut section) in source_sections {
        let spec = parse_source(&mut section, "", line)?;
        section.finish(&format!("source.{index}"))?;
        spec.validate().map_err(|e| Error::Config {
            line,
            message: format!("invalid source {index}: {e}"),
        })?;
        sources.push(spec);
    }

    let mixing = match mixing_section {
        None => MixingSpec::Haar,
        Some(mut s) => {
            let kind: String = take_parse(&mut s, "kind", Some("haar".into()))?;
            let m = match kind.as_str() {
                "haar" => MixingSpec::Haar,
                "identity" => MixingSpec::Identity,
                "file" => {
                    let (_, path) = s.take("path").ok_or(Error::Config {
                        line: s.line,
                        message: "mixing kind `file` needs a `path` key".into(),
                    })?;
                    MixingSpec::File(PathBuf::from(path))
                }
                other => {
                    return Err(Error::Config {
                        line: s.line,
                        message: format!("unknown mixing kind {other:?} (haar | identity | file)"),
                    })
                }
            };
            s.finish("mixing")?;
            m
        }
    };

    let ica = match ica_section {
        None => IcaSettings::default(),
        Some(mut s) => {
            let defaults = IcaSettings::default();
            let nonlinearity = match s.take("nonlinearity") {
                None => defaults.nonlinearity,
                Some((line, v)) => match v.as_str() {
                    "tanh" => Nonlinearity::Tanh,
                    "cubic" => Nonlinearity::Cubic,
                    other => {
                        return Err(Error::Config {
                            line,
                            message: format!("unknown nonlinearity {other:?} (tanh | cubic)"),
                        })
                    }
                },
            };
            let settings = IcaSettings {
                nonlinearity,
                max_iterations: take_parse(&mut s, "max_iterations", Some(defaults.max_iterations))?,
                tolerance: take_parse(&mut s, "tolerance", Some(defaults.tolerance))?,
                restarts: take_parse(&mut s, "restarts", Some(defaults.restarts))?,
            };
            s.finish("ica")?;
            settings
        }
    };

    let strategy = match grouping_section {
        None => Strategy::Exhaustive,
        Some(mut s) => {
            let value: String = take_parse(&mut s, "strategy", Some("exhaustive".into()))?;
            let strategy = match value.as_str() {
                "exhaustive" => Strategy::Exhaustive,
                "greedy" => Strategy::Greedy,
                other => {
                    return Err(Error::Config {
                        line: s.line,
                        message: format!("unknown strategy {other:?} (exhaustive | greedy)"),
                    })
                }
            };
            s.finish("grouping")?;
            strategy
        }
    };

    let verify = match verify_section {
        None => VerifySettings::default(),
        Some(mut s) => {
            let defaults = VerifySettings::default();
            let checks = match s.take("checks") {
                None => defaults.checks,
                Some((line, v)) => {
                    let mut checks = Vec::new();
                    for token in v.split(',') {
                        let token = token.trim();
                        if token.is_empty() {
                            continue;
                        }
                        let check = CheckKind::parse(token).ok_or(Error::Config {
                            line,
                            message: format!("unknown check name {token:?}"),
                        })?;
                        checks.push(check);
                    }
                    if checks.is_empty() {
                        return Err(Error::Config {
                            line,
                            message: "empty check list".into(),
                        });
                    }
                    checks
                }
            };
            let controls = match s.take("controls") {
                None => defaults.controls,
                Some((line, v)) => match v.as_str() {
                    "on" => true,
                    "off" => false,
                    other => {
                        return Err(Error::Config {
                            line,
                            message: format!("controls must be `on` or `off`, got {other:?}"),
                        })
                    }
                },
            };
            let settings = VerifySettings {
                checks,
                directions: take_parse(&mut s, "directions", Some(defaults.directions))?,
                trials: take_parse(&mut s, "trials", Some(defaults.trials))?,
                controls,
            };
            s.finish("verify")?;
            settings
        }
    };

    let scan = match scan_section {
        None => ScanSettings::default(),
        Some(mut s) => {
            let defaults = ScanSettings::default();
            let settings = ScanSettings {
                resolution: take_parse(&mut s, "resolution", Some(defaults.resolution))?,
                source: take_parse(&mut s, "source", Some(defaults.source))?,
            };
            s.finish("scan")?;
            settings
        }
    };

    if sample_count == 0 {
        return Err(Error::Config {
            line: 1,
            message: "samples must be positive".into(),
        });
    }

    Ok(ExperimentConfig {
        sources,
        sample_count,
        master_seed,
        output_dir,
        mixing,
        ica,
        strategy,
        verify,
        scan,
        echo,
    })
}

fn take_parse<T: std::str::FromStr>(
    section: &mut RawSection,
    key: &str,
    default: Option<T>,
) -> Result<T> {
    match section.take(key) {
        Some((line, v)) => v.parse().map_err(|_| Error::Config {
            line,
            message: format!("cannot parse {key} value {v:?}"),
        }),
        None => default.ok_or(Error::Config {
            line: section.line,
            message: format!("missing required key {key:?}"),
        }),
    }
}

/// Parses one source description; rot90 bases use the same keys under a
/// `base.` prefix.
fn parse_source(section: &mut RawSection, prefix: &str, line: usize) -> Result<SourceSpec> {
    let key = |k: &str| format!("{prefix}{k}");
    let (kind_line, kind) = section.take(&key("kind")).ok_or(Error::Config {
        line,
        message: format!("missing {:?}", key("kind")),
    })?;
    match kind.as_str() {
        "spherical" => Ok(SourceSpec::Spherical {
            dim: take_source_dim(section, &key("dim"), line)?,
            radial: take_radial(section, &key("radial"), line)?,
        }),
        "lp_spherical" => {
            let (p_line, p_text) = section.take(&key("p")).ok_or(Error::Config {
                line,
                message: format!("lp_spherical needs {:?}", key("p")),
            })?;
            let p: f64 = p_text.parse().map_err(|_| Error::Config {
                line: p_line,
                message: format!("cannot parse p value {p_text:?}"),
            })?;
            Ok(SourceSpec::LpSpherical {
                dim: take_source_dim(section, &key("dim"), line)?,
                p,
                radial: take_radial(section, &key("radial"), line)?,
            })
        }
        "elliptical" => {
            let (mu_line, mu_text) = section.take(&key("mu")).ok_or(Error::Config {
                line,
                message: format!("elliptical needs {:?}", key("mu")),
            })?;
            let mu = parse_float_list(&mu_text).map_err(|m| Error::Config {
                line: mu_line,
                message: m,
            })?;
            let (l_line, l_text) = section.take(&key("lambda")).ok_or(Error::Config {
                line,
                message: format!("elliptical needs {:?} (row-major d*d floats)", key("lambda")),
            })?;
            let entries = parse_float_list(&l_text).map_err(|m| Error::Config {
                line: l_line,
                message: m,
            })?;
            let d = mu.len();
            let lambda = Matrix::from_rows(d, d, &entries).map_err(|e| Error::Config {
                line: l_line,
                message: format!("bad lambda: {e}"),
            })?;
            Ok(SourceSpec::Elliptical {
                mu,
                lambda,
                radial: take_radial(section, &key("radial"), line)?,
            })
        }
        "rot90" => {
            let base = parse_source(section, &format!("{prefix}base."), line)?;
            Ok(SourceSpec::Rot90 { base: Box::new(base) })
        }
        "iid" => {
            let (m_line, m_text) = section.take(&key("marginal")).ok_or(Error::Config {
                line,
                message: format!("iid needs {:?}", key("marginal")),
            })?;
            let marginal = match m_text.as_str() {
                "uniform" => Marginal::Uniform,
                "laplace" => Marginal::Laplace,
                "exponential" => Marginal::ExponentialDemeaned,
                other => {
                    return Err(Error::Config {
                        line: m_line,
                        message: format!(
                            "unknown marginal {other:?} (uniform | laplace | exponential)"
                        ),
                    })
                }
            };
            Ok(SourceSpec::IidMarginal {
                dim: take_source_dim(section, &key("dim"), line)?,
                marginal,
            })
        }
        other => Err(Error::Config {
            line: kind_line,
            message: format!(
                "unknown source kind {other:?} (spherical | elliptical | lp_spherical | rot90 | iid)"
            ),
        }),
    }
}

fn take_source_dim(section: &mut RawSection, key: &str, line: usize) -> Result<usize> {
    let (dim_line, text) = section.take(key).ok_or(Error::Config {
        line,
        message: format!("missing {key:?}"),
    })?;
    text.parse().map_err(|_| Error::Config {
        line: dim_line,
        message: format!("cannot parse {key} value {text:?}"),
    })
}

/// Radial grammar: `chi`, `constant:<c>`, `uniform:<a>,<b>`, `exponential:<rate>`.
fn take_radial(section: &mut RawSection, key: &str, line: usize) -> Result<RadialSpec> {
    let (radial_line, text) = section.take(key).ok_or(Error::Config {
        line,
        message: format!("missing {key:?}"),
    })?;
    parse_radial(&text).map_err(|m| Error::Config {
        line: radial_line,
        message: m,
    })
}

fn parse_radial(text: &str) -> std::result::Result<RadialSpec, String> {
    let (kind, args) = match text.split_once(':') {
        Some((k, a)) => (k.trim(), Some(a.trim())),
        None => (text.trim(), None),
    };
    match (kind, args) {
        ("chi", None) => Ok(RadialSpec::ChiOfDim),
        ("constant", Some(a)) => a
            .parse()
            .map(RadialSpec::Constant)
            .map_err(|_| format!("bad constant radial {a:?}")),
        ("uniform", Some(a)) => {
            let parts = parse_float_list(a)?;
            if parts.len() != 2 {
                return Err(format!("uniform radial needs two bounds, got {a:?}"));
            }
            Ok(RadialSpec::Uniform(parts[0], parts[1]))
        }
        ("exponential", Some(a)) => a
            .parse()
            .map(RadialSpec::Exponential)
            .map_err(|_| format!("bad exponential rate {a:?}")),
        _ => Err(format!(
            "unknown radial {text:?} (chi | constant:<c> | uniform:<a>,<b> | exponential:<rate>)"
        )),
    }
}

fn parse_float_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad float {:?}", t.trim()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[experiment]
samples = 20000
seed = 42

[source.1]
kind = spherical
dim = 2
radial = chi

[source.2]
kind = spherical
dim = 2
radial = constant:1.0
";

    #[test]
    fn parses_minimal_config() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.sample_count, 20_000);
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.sources.len(), 2);
        assert!(matches!(cfg.mixing, MixingSpec::Haar));
        assert_eq!(cfg.ica.max_iterations, 1000);
        assert_eq!(cfg.verify.directions, 50);
    }

    #[test]
    fn parses_every_source_kind() {
        let text = "\
[experiment]
samples = 5000
seed = 1

[source.1]
kind = elliptical
mu = 1.0,-2.0
lambda = 2.0,0.0,0.0,1.0
radial = uniform:0.5,1.5

[source.2]
kind = lp_spherical
dim = 2
p = 4
radial = constant:1.0

[source.3]
kind = rot90
base.kind = iid
base.dim = 2
base.marginal = uniform

[source.4]
kind = iid
dim = 3
marginal = laplace

[mixing]
kind = identity

[ica]
nonlinearity = cubic
max_iterations = 500
tolerance = 1e-6
restarts = 2

[grouping]
strategy = greedy

[verify]
checks = w_epi, rot90_symmetry
directions = 10
trials = 7
controls = on

[scan]
resolution = 32
source = 3
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.sources.len(), 4);
        assert!(matches!(cfg.sources[0], SourceSpec::Elliptical { .. }));
        assert!(matches!(cfg.sources[2], SourceSpec::Rot90 { .. }));
        assert!(matches!(cfg.mixing, MixingSpec::Identity));
        assert_eq!(cfg.ica.restarts, 2);
        assert_eq!(cfg.strategy, Strategy::Greedy);
        assert_eq!(cfg.verify.checks.len(), 2);
        assert!(cfg.verify.controls);
        assert_eq!(cfg.scan.resolution, 32);
        assert_eq!(cfg.scan.source, 3);
    }

    #[test]
    fn unknown_check_error_names_the_line() {
        let text = format!("{MINIMAL}\n[verify]\nchecks = w_epi, bogus_check\n");
        let err = parse_config(&text).unwrap_err();
        match err {
            Error::Config { line, message } => {
                assert_eq!(line, 16);
                assert!(message.contains("bogus_check"), "{message}");
            }
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn missing_experiment_section_is_an_error() {
        let err = parse_config("[source.1]\nkind = spherical\ndim = 2\nradial = chi\n").unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn gap_in_source_numbering_is_an_error() {
        let text = "\
[experiment]
samples = 100
seed = 0

[source.1]
kind = iid
dim = 1
marginal = uniform

[source.3]
kind = iid
dim = 1
marginal = uniform
";
        let err = parse_config(text).unwrap_err();
        match err {
            Error::Config { message, .. } => assert!(message.contains("numbered"), "{message}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_key_is_an_error() {
        let text = format!("{MINIMAL}\n[ica]\nbogus = 3\n");
        let err = parse_config(&text).unwrap_err();
        match err {
            Error::Config { line, message } => {
                assert_eq!(line, 16);
                assert!(message.contains("bogus"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_key_is_an_error() {
        let text = "\
[experiment]
samples = 100
samples = 200
seed = 0
";
        let err = parse_config(text).unwrap_err();
        match err {
            Error::Config { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rot90_of_rot90_is_rejected() {
        let text = "\
[experiment]
samples = 100
seed = 0

[source.1]
kind = rot90
base.kind = rot90
base.base.kind = iid
base.base.dim = 2
base.base.marginal = uniform
";
        let err = parse_config(text).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
    }
}
