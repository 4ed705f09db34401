//! Line-oriented run configuration.
//!
//! Every non-empty line is `section.key = value`; `#` starts a comment and
//! values may be wrapped in double quotes. Unknown keys are errors. Keys
//! that are absent take the defaults of [`RunConfig::default`], and
//! [`RunConfig::echo`] writes every key back out so that the echo parses
//! to an equal configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nlch_core::energy::{Coupling, ModelSpec};
use nlch_core::nonlocal::{Cutoff, KernelSpec};
use nlch_core::stepper::StepConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `section.key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key `{key}` is given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("`{key}`: cannot read `{value}` as {expected}")]
    Type {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    pub fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

/// A coefficient given as a scalar or as a nodal field file.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    Scalar(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    Constant,
    /// `mean + amplitude · (ξ − ⟨ξ⟩)` with seeded `ξ ~ U(−1, 1)`.
    Noise,
    File(PathBuf),
}

/// Initial data for one field. A nonzero `gradient` adds the mean-free
/// linear mode `gₓ x + g_y y`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub kind: InitKind,
    pub mean: f64,
    pub amplitude: f64,
    pub gradient: [f64; 2],
}

impl InitSpec {
    pub fn noise(mean: f64, amplitude: f64) -> Self {
        Self {
            kind: InitKind::Noise,
            mean,
            amplitude,
            gradient: [0.0, 0.0],
        }
    }

    pub fn constant(mean: f64) -> Self {
        Self {
            kind: InitKind::Constant,
            mean,
            amplitude: 0.0,
            gradient: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh_level: u32,
    pub kernel_bulk: KernelSpec,
    pub kernel_surface: KernelSpec,
    pub potential_f: FieldSource,
    pub potential_g: FieldSource,
    pub penalty_b: FieldSource,
    pub model: ModelSpec,
    pub step: StepConfig,
    pub n_steps: usize,
    /// Write field snapshots every this many steps; 0 disables them.
    pub snapshot_every: usize,
    /// Output directory, relative to the output root unless absolute.
    pub output: PathBuf,
    pub seed: u64,
    pub init_phi: InitSpec,
    pub init_psi: InitSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh_level: 4,
            kernel_bulk: KernelSpec::gaussian(1.0, 0.5),
            kernel_surface: KernelSpec::gaussian(1.0, 0.5),
            potential_f: FieldSource::Scalar(0.15),
            potential_g: FieldSource::Scalar(0.45),
            penalty_b: FieldSource::Scalar(0.0),
            model: ModelSpec::new(1.0, Coupling::Robin { l: 1.0 }),
            step: StepConfig::default(),
            n_steps: 200,
            snapshot_every: 0,
            output: PathBuf::from("run"),
            seed: 1,
            init_phi: InitSpec::noise(0.0, 0.1),
            init_psi: InitSpec::noise(0.0, 0.1),
        }
    }
}

const KEYS: &[&str] = &[
    "mesh.level",
    "kernel.bulk",
    "kernel.bulk.amplitude",
    "kernel.bulk.width",
    "kernel.bulk.omega",
    "kernel.bulk.alpha",
    "kernel.bulk.constant",
    "kernel.bulk.cutoff_inner",
    "kernel.bulk.cutoff_outer",
    "kernel.surface",
    "kernel.surface.amplitude",
    "kernel.surface.width",
    "potential.f",
    "potential.g",
    "penalty.b",
    "model.kind",
    "model.beta",
    "model.L",
    "model.m_bulk",
    "model.m_surf",
    "model.eps",
    "model.delta",
    "step.tau",
    "step.newton_tol",
    "step.max_newton",
    "step.max_halvings",
    "run.n_steps",
    "run.snapshot_every",
    "run.output",
    "run.seed",
    "init.phi",
    "init.phi.mean",
    "init.phi.amplitude",
    "init.phi.gradient",
    "init.psi",
    "init.psi.mean",
    "init.psi.amplitude",
    "init.psi.gradient",
];

/// Raw `key → value` pairs in file order.
fn tokenize(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: raw.to_string(),
            });
        };
        let key = key.trim();
        if key.is_empty() || !key.contains('.') || key.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax {
                line,
                text: raw.to_string(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        let mut value = value.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
    }
    Ok(map)
}

/// Drops a `#` comment that is not inside double quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

struct Values<'a> {
    map: BTreeMap<String, String>,
    base: &'a Path,
}

impl Values<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse_f64(key, v),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| type_error(key, v, "a nonnegative integer")),
        }
    }

    fn field(&self, key: &str, default: FieldSource) -> Result<FieldSource, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => match v.parse::<f64>() {
                Ok(x) => Ok(FieldSource::Scalar(x)),
                Err(_) if !v.is_empty() => Ok(FieldSource::File(self.base.join(v))),
                Err(_) => Err(type_error(key, v, "a number or a field-file path")),
            },
        }
    }

    fn pair(&self, key: &str, default: [f64; 2]) -> Result<[f64; 2], ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => {
                let parts: Vec<&str> = v.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
                match parts.as_slice() {
                    [a, b] => Ok([parse_f64(key, a)?, parse_f64(key, b)?]),
                    _ => Err(type_error(key, v, "two numbers `gx, gy`")),
                }
            }
        }
    }

    fn init(&self, which: &str, default: &InitSpec) -> Result<InitSpec, ConfigError> {
        let key = format!("init.{which}");
        let kind = match self.raw(&key) {
            None => default.kind.clone(),
            Some("noise") => InitKind::Noise,
            Some("constant") => InitKind::Constant,
            Some("") => return Err(type_error(&key, "", "`noise`, `constant` or a field-file path")),
            Some(path) => InitKind::File(self.base.join(path)),
        };
        Ok(InitSpec {
            kind,
            mean: self.f64(&format!("{key}.mean"), default.mean)?,
            amplitude: self.f64(&format!("{key}.amplitude"), default.amplitude)?,
            gradient: self.pair(&format!("{key}.gradient"), default.gradient)?,
        })
    }

    fn kernel(&self, prefix: &str, default: &KernelSpec, allow_singular: bool) -> Result<KernelSpec, ConfigError> {
        let name = self.raw(prefix).unwrap_or(default.name());
        let key = |k: &str| format!("{prefix}.{k}");
        let cutoff_default = match default {
            KernelSpec::TruncatedPower { cutoff, .. } | KernelSpec::RieszCutoff { cutoff, .. } => *cutoff,
            KernelSpec::Gaussian { .. } => Cutoff::default(),
        };
        let spec = match name {
            "gaussian" => {
                let (a, w) = match default {
                    KernelSpec::Gaussian { amplitude, width } => (*amplitude, *width),
                    _ => (1.0, 0.5),
                };
                KernelSpec::Gaussian {
                    amplitude: self.f64(&key("amplitude"), a)?,
                    width: self.f64(&key("width"), w)?,
                }
            }
            "truncated_power" | "riesz_cutoff" if !allow_singular => {
                return Err(ConfigError::invalid(
                    prefix,
                    format!("A2: singular kernel `{name}` is not admissible on the boundary curve; use `gaussian`"),
                ))
            }
            "truncated_power" => KernelSpec::TruncatedPower {
                omega: self.f64(&key("omega"), 0.5)?,
                cutoff: self.cutoff(prefix, cutoff_default)?,
            },
            "riesz_cutoff" => KernelSpec::RieszCutoff {
                alpha: self.f64(&key("alpha"), 1.5)?,
                constant: self.f64(&key("constant"), 1.0)?,
                cutoff: self.cutoff(prefix, cutoff_default)?,
            },
            other => {
                return Err(ConfigError::Type {
                    key: prefix.to_string(),
                    value: other.to_string(),
                    expected: "`gaussian`, `truncated_power` or `riesz_cutoff`",
                })
            }
        };
        spec.validate().map_err(|e| ConfigError::invalid(prefix, e.to_string()))?;
        Ok(spec)
    }

    fn cutoff(&self, prefix: &str, default: Cutoff) -> Result<Cutoff, ConfigError> {
        Ok(Cutoff {
            inner: self.f64(&format!("{prefix}.cutoff_inner"), default.inner)?,
            outer: self.f64(&format!("{prefix}.cutoff_outer"), default.outer)?,
        })
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    match v {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => v.parse().map_err(|_| type_error(key, v, "a number")),
    }
}

fn type_error(key: &str, value: &str, expected: &'static str) -> ConfigError {
    ConfigError::Type {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    }
}

impl RunConfig {
    /// Parses configuration text; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let v = Values {
            map: tokenize(text)?,
            base,
        };
        let d = RunConfig::default();
        let level = v.usize("mesh.level", d.mesh_level as usize)?;
        if level > nlch_core::mesh::MAX_REFINEMENT_LEVEL as usize {
            return Err(ConfigError::invalid(
                "mesh.level",
                format!("level {level} exceeds the maximum {}", nlch_core::mesh::MAX_REFINEMENT_LEVEL),
            ));
        }
        let mut used: Vec<&str> = Vec::new();
        let kernel_bulk = v.kernel("kernel.bulk", &d.kernel_bulk, true)?;
        let kernel_surface = v.kernel("kernel.surface", &d.kernel_surface, false)?;
        // parameters of other kernel families are accepted only if they match the family
        for (prefix, spec) in [("kernel.bulk", &kernel_bulk), ("kernel.surface", &kernel_surface)] {
            let allowed: &[&str] = match spec {
                KernelSpec::Gaussian { .. } => &["amplitude", "width"],
                KernelSpec::TruncatedPower { .. } => &["omega", "cutoff_inner", "cutoff_outer"],
                KernelSpec::RieszCutoff { .. } => &["alpha", "constant", "cutoff_inner", "cutoff_outer"],
            };
            for key in v.map.keys() {
                if let Some(param) = key.strip_prefix(prefix).and_then(|k| k.strip_prefix('.')) {
                    if !allowed.contains(&param) {
                        return Err(ConfigError::invalid(key, format!("not a parameter of the `{}` kernel", spec.name())));
                    }
                }
            }
            used.push(prefix);
        }

        let beta = v.f64("model.beta", d.model.beta)?;
        let coupling = match v.raw("model.kind").unwrap_or("robin") {
            "robin" => Coupling::Robin {
                l: v.f64("model.L", 1.0)?,
            },
            "dirichlet" => Coupling::Dirichlet,
            "decoupled" => Coupling::Decoupled,
            other => return Err(type_error("model.kind", other, "`robin`, `dirichlet` or `decoupled`")),
        };
        if !matches!(coupling, Coupling::Robin { .. }) && v.raw("model.L").is_some() {
            return Err(ConfigError::invalid("model.L", "only meaningful for model.kind = robin"));
        }
        let model = ModelSpec {
            beta,
            coupling,
            m_bulk: v.f64("model.m_bulk", 1.0)?,
            m_surf: v.f64("model.m_surf", 1.0)?,
            eps: v.f64("model.eps", 1.0)?,
            delta: v.f64("model.delta", 1.0)?,
        };
        model.validate().map_err(|e| {
            let key = match e.to_string() {
                s if s.contains("beta") => "model.beta",
                s if s.contains("Robin") => "model.L",
                s if s.contains("m_bulk") => "model.m_bulk",
                s if s.contains("m_surf") => "model.m_surf",
                s if s.contains("eps") => "model.eps",
                _ => "model.delta",
            };
            ConfigError::invalid(key, e.to_string())
        })?;

        let step = StepConfig {
            tau: v.f64("step.tau", d.step.tau)?,
            newton_tol: v.f64("step.newton_tol", d.step.newton_tol)?,
            max_newton: v.usize("step.max_newton", d.step.max_newton)?,
            max_halvings: v.usize("step.max_halvings", d.step.max_halvings)?,
            ..d.step
        };
        if !(step.tau > 0.0 && step.tau.is_finite()) {
            return Err(ConfigError::invalid("step.tau", "must be positive and finite"));
        }
        if !(step.newton_tol > 0.0) {
            return Err(ConfigError::invalid("step.newton_tol", "must be positive"));
        }
        if step.max_newton == 0 {
            return Err(ConfigError::invalid("step.max_newton", "must be at least 1"));
        }

        let seed = match v.raw("run.seed") {
            None => d.seed,
            Some(s) => s.parse().map_err(|_| type_error("run.seed", s, "an unsigned 64-bit integer"))?,
        };
        let cfg = RunConfig {
            mesh_level: level as u32,
            kernel_bulk,
            kernel_surface,
            potential_f: v.field("potential.f", d.potential_f.clone())?,
            potential_g: v.field("potential.g", d.potential_g.clone())?,
            penalty_b: v.field("penalty.b", d.penalty_b.clone())?,
            model,
            step,
            n_steps: v.usize("run.n_steps", d.n_steps)?,
            snapshot_every: v.usize("run.snapshot_every", d.snapshot_every)?,
            output: v.raw("run.output").map(PathBuf::from).unwrap_or(d.output.clone()),
            seed,
            init_phi: v.init("phi", &d.init_phi)?,
            init_psi: v.init("psi", &d.init_psi)?,
        };
        for (key, src) in [("potential.f", &cfg.potential_f), ("potential.g", &cfg.potential_g)] {
            if let FieldSource::Scalar(x) = src {
                if !(x.is_finite() && *x >= 0.0) {
                    return Err(ConfigError::invalid(key, format!("A3: well weight {x} must be finite and nonnegative")));
                }
            }
        }
        if let FieldSource::Scalar(x) = cfg.penalty_b {
            if !x.is_finite() {
                return Err(ConfigError::invalid("penalty.b", "A5: penalty weight must be finite"));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Every key with its value; file paths are written as given (absolute
    /// after parsing).
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("mesh.level", self.mesh_level.to_string());
        for (prefix, spec) in [("kernel.bulk", &self.kernel_bulk), ("kernel.surface", &self.kernel_surface)] {
            kv(prefix, spec.name().to_string());
            match *spec {
                KernelSpec::Gaussian { amplitude, width } => {
                    kv(&format!("{prefix}.amplitude"), fmt_f64(amplitude));
                    kv(&format!("{prefix}.width"), fmt_f64(width));
                }
                KernelSpec::TruncatedPower { omega, cutoff } => {
                    kv(&format!("{prefix}.omega"), fmt_f64(omega));
                    kv(&format!("{prefix}.cutoff_inner"), fmt_f64(cutoff.inner));
                    kv(&format!("{prefix}.cutoff_outer"), fmt_f64(cutoff.outer));
                }
                KernelSpec::RieszCutoff { alpha, constant, cutoff } => {
                    kv(&format!("{prefix}.alpha"), fmt_f64(alpha));
                    kv(&format!("{prefix}.constant"), fmt_f64(constant));
                    kv(&format!("{prefix}.cutoff_inner"), fmt_f64(cutoff.inner));
                    kv(&format!("{prefix}.cutoff_outer"), fmt_f64(cutoff.outer));
                }
            }
        }
        for (key, src) in [("potential.f", &self.potential_f), ("potential.g", &self.potential_g), ("penalty.b", &self.penalty_b)] {
            kv(key, fmt_source(src));
        }
        kv("model.kind", self.model.coupling.name().to_string());
        kv("model.beta", fmt_f64(self.model.beta));
        if let Coupling::Robin { l } = self.model.coupling {
            kv("model.L", fmt_f64(l));
        }
        kv("model.m_bulk", fmt_f64(self.model.m_bulk));
        kv("model.m_surf", fmt_f64(self.model.m_surf));
        kv("model.eps", fmt_f64(self.model.eps));
        kv("model.delta", fmt_f64(self.model.delta));
        kv("step.tau", fmt_f64(self.step.tau));
        kv("step.newton_tol", fmt_f64(self.step.newton_tol));
        kv("step.max_newton", self.step.max_newton.to_string());
        kv("step.max_halvings", self.step.max_halvings.to_string());
        kv("run.n_steps", self.n_steps.to_string());
        kv("run.snapshot_every", self.snapshot_every.to_string());
        kv("run.output", quote(&self.output.display().to_string()));
        kv("run.seed", self.seed.to_string());
        for (name, init) in [("phi", &self.init_phi), ("psi", &self.init_psi)] {
            let kind = match &init.kind {
                InitKind::Noise => "noise".to_string(),
                InitKind::Constant => "constant".to_string(),
                InitKind::File(p) => quote(&p.display().to_string()),
            };
            kv(&format!("init.{name}"), kind);
            kv(&format!("init.{name}.mean"), fmt_f64(init.mean));
            kv(&format!("init.{name}.amplitude"), fmt_f64(init.amplitude));
            kv(
                &format!("init.{name}.gradient"),
                format!("{}, {}", fmt_f64(init.gradient[0]), fmt_f64(init.gradient[1])),
            );
        }
        out
    }
}

/// Shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() && x > 0.0 {
        "inf".to_string()
    } else {
        format!("{x:e}")
    }
}

fn fmt_source(src: &FieldSource) -> String {
    match src {
        FieldSource::Scalar(x) => fmt_f64(*x),
        FieldSource::File(p) => quote(&p.display().to_string()),
    }
}

fn quote(s: &str) -> String {
    format!("\"{s}\"")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = RunConfig::parse("# nothing\n\n", Path::new(".")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.model.m_bulk, 1.0);
        assert_eq!(cfg.model.eps, 1.0);
    }

    #[test]
    fn echo_round_trips() {
        let text = "mesh.level = 3\nkernel.bulk = truncated_power\nkernel.bulk.omega = 0.25\nmodel.kind = dirichlet\nmodel.beta = 2\n\
                    potential.f = 0.01 # inline comment\ninit.phi = constant\ninit.phi.mean = 0.5\ninit.psi.gradient = 0.1, -0.2\nrun.output = \"a b\"\n";
        let cfg = RunConfig::parse(text, Path::new("/base")).unwrap();
        let again = RunConfig::parse(&cfg.echo(), Path::new("/elsewhere")).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.output, PathBuf::from("a b"));
    }

    #[test]
    fn unknown_and_malformed_keys_are_named() {
        let err = RunConfig::parse("model.gamma = 1\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("model.gamma"));
        let err = RunConfig::parse("model.beta = one\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("model.beta"), "{err}");
        assert!(matches!(RunConfig::parse("just words\n", Path::new(".")), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(
            RunConfig::parse("mesh.level = 1\nmesh.level = 2\n", Path::new(".")),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
    }

    #[test]
    fn singular_surface_kernel_is_rejected_with_tag() {
        let err = RunConfig::parse("kernel.surface = riesz_cutoff\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("A2"), "{err}");
    }

    #[test]
    fn wrong_family_parameter_is_rejected() {
        let err = RunConfig::parse("kernel.bulk.omega = 0.5\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("kernel.bulk.omega"), "{err}");
    }

    #[test]
    fn model_constraints_name_the_key() {
        let err = RunConfig::parse("model.kind = dirichlet\nmodel.beta = -1\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("model.beta"), "{err}");
        let err = RunConfig::parse("model.L = 0\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("model.L"), "{err}");
        let err = RunConfig::parse("potential.f = -1\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("A3"), "{err}");
    }

    #[test]
    fn paths_resolve_against_the_config_directory() {
        let cfg = RunConfig::parse("penalty.b = fields/b.txt\ninit.phi = phi0.txt\n", Path::new("/cfgdir")).unwrap();
        assert_eq!(cfg.penalty_b, FieldSource::File(PathBuf::from("/cfgdir/fields/b.txt")));
        assert_eq!(cfg.init_phi.kind, InitKind::File(PathBuf::from("/cfgdir/phi0.txt")));
    }
}
