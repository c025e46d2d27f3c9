//! The physical environment sensors live in: positions and transmission
//! ranges, energy constants, the scalar field they sample, the built-in
//! method table, and the observable log store.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::syntax::{BuiltinValue, Label, Object, Value};
use crate::types::{MethodType, Type};

pub type Position = (f64, f64);

/// Energy constants, field model, and metering switch for one run.
///
/// `e_in` is the energy needed for an internal computation step, `e_out`
/// for sending a broadcast message. With metering off (the default) the
/// thresholds still gate which rules are enabled, but energy is never
/// consumed.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub e_in: f64,
    pub e_out: f64,
    pub field: FieldModel,
    pub metering: bool,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            e_in: 1.0,
            e_out: 1.0,
            field: FieldModel::Constant(0.0),
            metering: false,
        }
    }
}

impl WorldConfig {
    /// Below this threshold a sensor can neither compute nor send: it
    /// behaves exactly like a sensor that is switched off.
    pub fn off_threshold(&self) -> f64 {
        self.e_in.min(self.e_out)
    }
}

/// The scalar field sensors measure with the `field()` builtin.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldModel {
    Constant(f64),
    Gaussian {
        center: Position,
        peak: f64,
        sigma: f64,
    },
    Grid(GridField),
}

/// A sampled field: a rectangular grid of values, bilinearly interpolated.
/// Row 0 sits at the smallest y coordinate; positions outside the grid are
/// clamped to its edge so sampling is total.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    origin: Position,
    cell: f64,
    rows: Vec<Vec<f64>>,
    cols: usize,
}

impl GridField {
    pub fn new(origin: Position, cell: f64, rows: Vec<Vec<f64>>) -> Result<Self, WorldError> {
        if !(cell.is_finite() && cell > 0.0) {
            return Err(WorldError::BadCellSize);
        }
        let cols = match rows.first() {
            None => return Err(WorldError::EmptyGrid),
            Some(r) if r.is_empty() => return Err(WorldError::EmptyGrid),
            Some(r) => r.len(),
        };
        if rows.iter().any(|r| r.len() != cols) {
            return Err(WorldError::RaggedGrid);
        }
        Ok(GridField {
            origin,
            cell,
            rows,
            cols,
        })
    }

    /// Parses CSV text: one row per line, comma-separated floats, row 0 at
    /// the smallest y.
    pub fn from_csv(origin: Position, cell: f64, text: &str) -> Result<Self, WorldError> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|cell| {
                    let cell = cell.trim();
                    cell.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| WorldError::BadGridNumber(cell.to_string()))
                })
                .collect::<Result<_, _>>()?;
            rows.push(row);
        }
        GridField::new(origin, cell, rows)
    }

    fn sample(&self, (x, y): Position) -> f64 {
        let max_x = (self.cols - 1) as f64;
        let max_y = (self.rows.len() - 1) as f64;
        let fx = ((x - self.origin.0) / self.cell).clamp(0.0, max_x);
        let fy = ((y - self.origin.1) / self.cell).clamp(0.0, max_y);
        let i0 = fx.floor() as usize;
        let j0 = fy.floor() as usize;
        let i1 = (i0 + 1).min(self.cols - 1);
        let j1 = (j0 + 1).min(self.rows.len() - 1);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let bottom = (1.0 - tx) * self.rows[j0][i0] + tx * self.rows[j0][i1];
        let top = (1.0 - tx) * self.rows[j1][i0] + tx * self.rows[j1][i1];
        (1.0 - ty) * bottom + ty * top
    }
}

/// Euclidean distance between two positions.
pub fn distance(p1: Position, p2: Position) -> f64 {
    let dx = p1.0 - p2.0;
    let dy = p1.1 - p2.1;
    (dx * dx + dy * dy).sqrt()
}

/// The field intensity at a position, as a builtin value.
pub fn sample_field(f: &FieldModel, p: Position) -> BuiltinValue {
    let v = match f {
        FieldModel::Constant(v) => *v,
        FieldModel::Gaussian {
            center,
            peak,
            sigma,
        } => {
            let d = distance(*center, p);
            peak * (-d * d / (2.0 * sigma * sigma)).exp()
        }
        FieldModel::Grid(g) => g.sample(p),
    };
    BuiltinValue::Number(v)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("field grid must be at least 1x1")]
    EmptyGrid,
    #[error("field grid rows must all have the same length")]
    RaggedGrid,
    #[error("grid cell size must be positive and finite")]
    BadCellSize,
    #[error("invalid number `{0}` in grid data")]
    BadGridNumber(String),
    #[error("gaussian sigma must be positive and finite")]
    BadSigma,
    #[error("field parameters must be finite")]
    BadFieldParam,
    #[error("energy constants must be finite and nonnegative")]
    BadEnergy,
}

/// A world block as written in a `.csn` file, before any grid file has been
/// read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldDecl {
    pub e_in: f64,
    pub e_out: f64,
    pub field: FieldDecl,
}

impl Default for WorldDecl {
    fn default() -> Self {
        WorldDecl {
            e_in: 1.0,
            e_out: 1.0,
            field: FieldDecl::Constant(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldDecl {
    Constant(f64),
    Gaussian {
        center: Position,
        peak: f64,
        sigma: f64,
    },
    GridFile {
        path: String,
        origin: Position,
        cell: f64,
    },
}

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("{0}")]
    World(#[from] WorldError),
    #[error("cannot read field grid `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Validates a world declaration and loads any grid file, resolving its
/// path relative to `base` (normally the directory of the `.csn` file).
pub fn resolve_world(decl: &WorldDecl, base: Option<&Path>) -> Result<WorldConfig, ResolveError> {
    if !(decl.e_in.is_finite() && decl.e_in >= 0.0 && decl.e_out.is_finite() && decl.e_out >= 0.0)
    {
        return Err(WorldError::BadEnergy.into());
    }
    let field = match &decl.field {
        FieldDecl::Constant(v) => {
            if !v.is_finite() {
                return Err(WorldError::BadFieldParam.into());
            }
            FieldModel::Constant(*v)
        }
        FieldDecl::Gaussian {
            center,
            peak,
            sigma,
        } => {
            if !(center.0.is_finite() && center.1.is_finite() && peak.is_finite()) {
                return Err(WorldError::BadFieldParam.into());
            }
            if !(sigma.is_finite() && *sigma > 0.0) {
                return Err(WorldError::BadSigma.into());
            }
            FieldModel::Gaussian {
                center: *center,
                peak: *peak,
                sigma: *sigma,
            }
        }
        FieldDecl::GridFile { path, origin, cell } => {
            let resolved = match base {
                Some(dir) => dir.join(path),
                None => PathBuf::from(path),
            };
            let text = std::fs::read_to_string(&resolved).map_err(|source| ResolveError::Io {
                path: resolved.clone(),
                source,
            })?;
            FieldModel::Grid(GridField::from_csv(*origin, *cell, &text)?)
        }
    };
    Ok(WorldConfig {
        e_in: decl.e_in,
        e_out: decl.e_out,
        field,
        metering: false,
    })
}

// ---------------------------------------------------------------------------
// Builtins
// ---------------------------------------------------------------------------

/// What a builtin does when called. New builtins are added by extending
/// this enum and [`BuiltinTable::standard`]; the signature declared there is
/// merged into every interface automatically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinKind {
    /// `field()`: sample the world's scalar field at the sensor's position.
    Field,
    /// `log_mac(v)`: record a MAC address observably.
    LogMac,
    /// `log_field(v)`: record a field measurement observably.
    LogField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinSpec {
    pub kind: BuiltinKind,
    pub signature: MethodType,
}

/// The table of builtins reachable through `loc` when the sensor's own
/// object does not define the label; a user-installed method with the same
/// label shadows the builtin.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinTable {
    entries: BTreeMap<Label, BuiltinSpec>,
}

impl BuiltinTable {
    pub fn standard() -> Self {
        let empty = Type::empty_obj;
        let entries = BTreeMap::from([
            (
                Label::new("field"),
                BuiltinSpec {
                    kind: BuiltinKind::Field,
                    signature: MethodType::new(vec![], Type::Builtin),
                },
            ),
            (
                Label::new("log_mac"),
                BuiltinSpec {
                    kind: BuiltinKind::LogMac,
                    signature: MethodType::new(vec![Type::Builtin], empty()),
                },
            ),
            (
                Label::new("log_field"),
                BuiltinSpec {
                    kind: BuiltinKind::LogField,
                    signature: MethodType::new(vec![Type::Builtin], empty()),
                },
            ),
        ]);
        BuiltinTable { entries }
    }

    pub fn get(&self, label: &Label) -> Option<&BuiltinSpec> {
        self.entries.get(label)
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.entries.contains_key(label)
    }
}

/// The builtin method names, for callers that need to treat them apart
/// from user-declared interface entries.
pub const BUILTIN_NAMES: [&str; 3] = ["field", "log_field", "log_mac"];

/// The signatures every interface must contain.
pub fn builtin_signatures() -> Vec<(Label, MethodType)> {
    BuiltinTable::standard()
        .entries
        .iter()
        .map(|(l, spec)| (l.clone(), spec.signature.clone()))
        .collect()
}

/// One observable record produced by a logging builtin.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub step: u64,
    pub builtin: Label,
    pub value: Value,
}

/// Per-sensor append-only logs. This is the observable output of a run: the
/// only way a program can leave a trace visible outside the network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogStore {
    entries: BTreeMap<String, Vec<LogEntry>>,
}

impl LogStore {
    pub fn new() -> Self {
        LogStore::default()
    }

    pub fn append(&mut self, sensor: &str, entry: LogEntry) {
        self.entries.entry(sensor.to_string()).or_default().push(entry);
    }

    pub fn for_sensor(&self, sensor: &str) -> &[LogEntry] {
        self.entries.get(sensor).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn sensors(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn total(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuiltinCallError {
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(Label),
    #[error("builtin `{name}` takes {expected} argument(s), got {found}")]
    BuiltinArityMismatch {
        name: Label,
        expected: usize,
        found: usize,
    },
}

/// Executes a builtin on behalf of a sensor. Logging builtins append to the
/// store and return the empty object; `field` samples the world at the
/// sensor's position.
pub fn call_builtin(
    table: &BuiltinTable,
    name: &Label,
    args: &[Value],
    sensor: &str,
    position: Position,
    world: &WorldConfig,
    logs: &mut LogStore,
    step: u64,
) -> Result<(Value, Option<LogEntry>), BuiltinCallError> {
    let spec = table
        .get(name)
        .ok_or_else(|| BuiltinCallError::UnknownBuiltin(name.clone()))?;
    let expected = spec.signature.params.len();
    if args.len() != expected {
        return Err(BuiltinCallError::BuiltinArityMismatch {
            name: name.clone(),
            expected,
            found: args.len(),
        });
    }
    match spec.kind {
        BuiltinKind::Field => Ok((
            Value::Builtin(sample_field(&world.field, position)),
            None,
        )),
        BuiltinKind::LogMac | BuiltinKind::LogField => {
            let entry = LogEntry {
                step,
                builtin: name.clone(),
                value: args[0].clone(),
            };
            logs.append(sensor, entry.clone());
            Ok((Value::Obj(Object::new()), Some(entry)))
        }
    }
}
