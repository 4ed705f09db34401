//! Plain-text mesh, field and checkpoint files, and the diagnostics CSV.
//!
//! Floats are written in Rust's shortest round-trip `{:e}` form, so every
//! write-then-read is bitwise exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nlch_core::mesh::TriMesh;
use nlch_core::stepper::{State, StepReport};

use crate::config::fmt_f64;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Os {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: field `{name}` has {actual} values, expected {expected}")]
    Count {
        path: PathBuf,
        name: String,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: no field named `{name}`")]
    Missing { path: PathBuf, name: String },
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Os {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Os {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(path: &Path) -> Result<(), IoError> {
    fs::create_dir_all(path).map_err(|source| IoError::Os {
        path: path.to_path_buf(),
        source,
    })
}

pub fn mesh_to_string(mesh: &TriMesh) -> String {
    let mut s = String::from("# nlch-mesh 1\n");
    let _ = writeln!(s, "# vertices {}", mesh.n_bulk());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {}", fmt_f64(v[0]), fmt_f64(v[1]));
    }
    let _ = writeln!(s, "# triangles {}", mesh.triangles().len());
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "# boundary {}", mesh.n_surface());
    for b in mesh.boundary_loop() {
        let _ = writeln!(s, "{b}");
    }
    s
}

/// Named nodal fields, kept in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldSet {
    pub fields: Vec<(String, Vec<f64>)>,
}

impl FieldSet {
    pub fn push(&mut self, name: &str, values: Vec<f64>) {
        self.fields.push((name.to_string(), values));
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# nlch-fields 1\n");
        write_field_blocks(&mut s, &self.fields);
        s
    }
}

fn write_field_blocks(s: &mut String, fields: &[(String, Vec<f64>)]) {
    for (name, values) in fields {
        let _ = writeln!(s, "# field {name} {}", values.len());
        for v in values {
            s.push_str(&fmt_f64(*v));
            s.push('\n');
        }
    }
}

/// Parses `# field name count` blocks from `lines`, starting at line
/// number `first_line` (1-based) for error messages.
fn parse_field_blocks<'a>(
    path: &Path,
    lines: impl Iterator<Item = (usize, &'a str)>,
) -> Result<FieldSet, IoError> {
    let err = |line: usize, message: String| IoError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut set = FieldSet::default();
    let mut expected = 0usize;
    for (line, raw) in lines {
        let text = raw.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(header) = text.strip_prefix("# field ") {
            close_block(path, &set, expected)?;
            let mut parts = header.split_whitespace();
            let (Some(name), Some(count), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(line, format!("expected `# field <name> <count>`, found `{text}`")));
            };
            expected = count.parse().map_err(|_| err(line, format!("bad count `{count}`")))?;
            set.push(name, Vec::with_capacity(expected));
        } else if text.starts_with('#') {
            continue;
        } else {
            let Some((_, values)) = set.fields.last_mut() else {
                return Err(err(line, "value before the first `# field` header".into()));
            };
            let v: f64 = text.parse().map_err(|_| err(line, format!("cannot read `{text}` as a number")))?;
            values.push(v);
        }
    }
    close_block(path, &set, expected)?;
    Ok(set)
}

fn close_block(path: &Path, set: &FieldSet, expected: usize) -> Result<(), IoError> {
    if let Some((name, values)) = set.fields.last() {
        if values.len() != expected {
            return Err(IoError::Count {
                path: path.to_path_buf(),
                name: name.clone(),
                expected,
                actual: values.len(),
            });
        }
    }
    Ok(())
}

pub fn parse_fields(path: &Path, text: &str) -> Result<FieldSet, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, "# nlch-fields 1")) => {}
        _ => {
            return Err(IoError::Format {
                path: path.to_path_buf(),
                line: 1,
                message: "missing `# nlch-fields 1` header".into(),
            })
        }
    }
    parse_field_blocks(path, lines)
}

pub fn read_fields(path: &Path) -> Result<FieldSet, IoError> {
    parse_fields(path, &read_text(path)?)
}

/// Reads one nodal field of the given length. With `name = None` the file
/// must hold exactly one field.
pub fn load_nodal(path: &Path, name: Option<&str>, expected: usize) -> Result<Vec<f64>, IoError> {
    let set = read_fields(path)?;
    let (field_name, values) = match name {
        Some(n) => match set.fields.iter().find(|(f, _)| f == n) {
            Some(f) => f.clone(),
            None if set.fields.len() == 1 => set.fields[0].clone(),
            None => {
                return Err(IoError::Missing {
                    path: path.to_path_buf(),
                    name: n.to_string(),
                })
            }
        },
        None if set.fields.len() == 1 => set.fields[0].clone(),
        None => {
            return Err(IoError::Format {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected exactly one field, found {}", set.fields.len()),
            })
        }
    };
    if values.len() != expected {
        return Err(IoError::Count {
            path: path.to_path_buf(),
            name: field_name,
            expected,
            actual: values.len(),
        });
    }
    Ok(values)
}

pub fn state_fields(state: &State) -> FieldSet {
    let mut set = FieldSet::default();
    set.push("phi", state.phi.clone());
    set.push("psi", state.psi.clone());
    set
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub state: State,
    pub config_echo: String,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut s = String::from("# nlch-checkpoint 1\n");
        let _ = writeln!(s, "# step {}", self.step);
        let _ = writeln!(s, "# t {}", fmt_f64(self.state.t));
        s.push_str("# config-begin\n");
        for line in self.config_echo.lines() {
            let _ = writeln!(s, "#| {line}");
        }
        s.push_str("# config-end\n");
        write_field_blocks(&mut s, &state_fields(&self.state).fields);
        s
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, IoError> {
        let err = |line: usize, message: &str| IoError::Format {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        };
        let lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&"# nlch-checkpoint 1") {
            return Err(err(1, "missing `# nlch-checkpoint 1` header"));
        }
        let step = lines
            .get(1)
            .and_then(|l| l.strip_prefix("# step "))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(2, "expected `# step <n>`"))?;
        let t = lines
            .get(2)
            .and_then(|l| l.strip_prefix("# t "))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(3, "expected `# t <time>`"))?;
        if lines.get(3) != Some(&"# config-begin") {
            return Err(err(4, "expected `# config-begin`"));
        }
        let mut echo = String::new();
        let mut idx = 4;
        loop {
            match lines.get(idx) {
                Some(&"# config-end") => break,
                Some(l) => {
                    let body = l.strip_prefix("#| ").or_else(|| l.strip_prefix("#|")).ok_or_else(|| err(idx + 1, "expected `#| ` config line"))?;
                    echo.push_str(body);
                    echo.push('\n');
                }
                None => return Err(err(idx + 1, "unterminated config block")),
            }
            idx += 1;
        }
        let fields = parse_field_blocks(path, lines.iter().enumerate().skip(idx + 1).map(|(i, l)| (i + 1, *l)))?;
        let get = |name: &str| {
            fields.get(name).map(<[f64]>::to_vec).ok_or_else(|| IoError::Missing {
                path: path.to_path_buf(),
                name: name.to_string(),
            })
        };
        let mut state = State::new(get("phi")?, get("psi")?);
        state.t = t;
        Ok(Checkpoint {
            step,
            state,
            config_echo: echo,
        })
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        Self::parse(path, &read_text(path)?)
    }
}

pub const DIAGNOSTICS_HEADER: &str =
    "step,t,energy,energy_difference_form,mass_beta_weighted,mass_bulk,mass_surf,equilibrium_gap,flux_norm,newton_iters,residual";

/// One diagnostics row; everything but the step counters comes from the
/// state after the step (or the initial state for step 0).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub energy_difference_form: f64,
    pub mass_beta_weighted: f64,
    pub mass_bulk: f64,
    pub mass_surf: f64,
    pub equilibrium_gap: f64,
    pub flux_norm: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

impl DiagnosticsRow {
    pub fn from_report(step: usize, state: &State, r: &StepReport) -> Self {
        Self {
            step,
            t: state.t,
            energy: r.energy_after,
            energy_difference_form: r.energy_difference_form,
            mass_beta_weighted: r.mass_value,
            mass_bulk: r.mass_bulk,
            mass_surf: r.mass_surf,
            equilibrium_gap: r.equilibrium_gap,
            flux_norm: r.flux_norm,
            newton_iters: r.newton_iters,
            residual: r.final_residual,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            fmt_f64(self.t),
            fmt_f64(self.energy),
            fmt_f64(self.energy_difference_form),
            fmt_f64(self.mass_beta_weighted),
            fmt_f64(self.mass_bulk),
            fmt_f64(self.mass_surf),
            fmt_f64(self.equilibrium_gap),
            fmt_f64(self.flux_norm),
            self.newton_iters,
            fmt_f64(self.residual)
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 11 {
            return None;
        }
        let f = |i: usize| parse_f64_cell(c[i]);
        Some(Self {
            step: c[0].parse().ok()?,
            t: f(1)?,
            energy: f(2)?,
            energy_difference_form: f(3)?,
            mass_beta_weighted: f(4)?,
            mass_bulk: f(5)?,
            mass_surf: f(6)?,
            equilibrium_gap: f(7)?,
            flux_norm: f(8)?,
            newton_iters: c[9].parse().ok()?,
            residual: f(10)?,
        })
    }
}

fn parse_f64_cell(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        _ => s.parse().ok(),
    }
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRow>, IoError> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != DIAGNOSTICS_HEADER {
                return Err(IoError::Format {
                    path: path.to_path_buf(),
                    line: 1,
                    message: "unexpected diagnostics header".into(),
                });
            }
            continue;
        }
        rows.push(DiagnosticsRow::parse(line).ok_or_else(|| IoError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("malformed row `{line}`"),
        })?);
    }
    Ok(rows)
}
