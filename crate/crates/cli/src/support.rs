use std::fmt;
use std::path::{Path, PathBuf};

use modex::gmm::GmmDocument;
use modex::ingest::{read_encoded, Dataset, SchemaManifest};
use modex::model::Model;
use modex::wire::{Expected, WireConfig, WireOracle};
use modex::{cartpole, DiagonalGmm, Error, Oracle};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cli::{Builtin, OracleArgs};

/// Exit statuses, one per failure class.
pub mod code {
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const MISSING_FILE: i32 = 3;
    pub const BAD_INPUT: i32 = 4;
    pub const DIMENSION: i32 = 5;
    pub const ORACLE: i32 = 6;
    pub const COMPUTATION: i32 = 7;
    pub const OUTPUT: i32 = 8;
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Missing(PathBuf, std::io::Error),
    Config(String),
    Output(PathBuf, std::io::Error),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Missing(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            Failure::Config(m) => write!(f, "config: {m}"),
            Failure::Output(p, e) => write!(f, "cannot write {}: {e}", p.display()),
            Failure::Core(Error::DimensionMismatch { expected, got }) => write!(
                f,
                "dimension mismatch: expected {expected} features, got {got}; check that the model, mixture and data come from the same manifest"
            ),
            Failure::Core(Error::Session { message, stderr }) if !stderr.is_empty() => {
                write!(f, "oracle session failed: {message}\n--- oracle stderr ---\n{stderr}")
            }
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => code::USAGE,
            Failure::Missing(..) => code::MISSING_FILE,
            Failure::Config(_) => code::BAD_INPUT,
            Failure::Output(..) => code::OUTPUT,
            Failure::Core(e) => match e.root_cause() {
                Error::Io(_) => code::MISSING_FILE,
                Error::Data(_) | Error::Json(_) | Error::Csv(_) => code::BAD_INPUT,
                Error::DimensionMismatch { .. } => code::DIMENSION,
                Error::Oracle(_)
                | Error::Protocol(_)
                | Error::Session { .. }
                | Error::Timeout(_)
                | Error::Nondeterministic(_) => code::ORACLE,
                Error::Domain(_) | Error::ZeroMass | Error::DegenerateConditioning(_) => code::COMPUTATION,
                Error::AtNode { .. } => code::INTERNAL,
            },
        }
    }
}

pub type Outcome<T = ()> = std::result::Result<T, Failure>;

pub fn read_text(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Missing(path.to_path_buf(), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())).into())
}

pub fn write_text(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Output(dir.to_path_buf(), e))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Output(path.to_path_buf(), e))
}

/// Pretty JSON with a trailing newline; key order follows the struct.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Core(e.into()))?;
    s.push('\n');
    write_text(path, &s)
}

fn manifest_path(data: &Path, manifest: Option<&Path>) -> Outcome<PathBuf> {
    if let Some(m) = manifest {
        return Ok(m.to_path_buf());
    }
    let guess = data.parent().unwrap_or(Path::new(".")).join("manifest.json");
    if guess.exists() {
        Ok(guess)
    } else {
        Err(Failure::Usage(format!(
            "no --manifest given and {} does not exist",
            guess.display()
        )))
    }
}

pub fn load_manifest(data: &Path, manifest: Option<&Path>) -> Outcome<SchemaManifest> {
    let path = manifest_path(data, manifest)?;
    Ok(SchemaManifest::from_json(&read_text(&path)?).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?)
}

pub fn load_dataset(data: &Path, manifest: Option<&Path>) -> Outcome<(Dataset, SchemaManifest)> {
    let m = load_manifest(data, manifest)?;
    if !data.exists() {
        return Err(Failure::Missing(data.to_path_buf(), std::io::ErrorKind::NotFound.into()));
    }
    let d = read_encoded(data, &m)?;
    Ok((d, m))
}

pub fn load_model(path: &Path) -> Outcome<Model> {
    Ok(Model::from_json(&read_text(path)?).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?)
}

pub fn load_tree(path: &Path) -> Outcome<modex::DecisionTree> {
    match load_model(path)? {
        Model::Tree(t) => Ok(t),
        Model::Forest(_) => Err(Failure::Usage(format!("{} is a forest, not a tree", path.display()))),
    }
}

pub fn load_gmm(path: &Path) -> Outcome<(DiagonalGmm, Vec<String>)> {
    let doc: GmmDocument = read_json(path)?;
    let names = doc.feature_names.clone();
    Ok((doc.gmm()?, names))
}

/// Opens the oracle named by the flags; `dim` is checked during a wire
/// handshake.
pub fn open_oracle(args: &OracleArgs, dim: Option<usize>, wire: WireConfig) -> Outcome<Box<dyn Oracle>> {
    if let Some(p) = &args.oracle_model {
        return Ok(Box::new(load_model(p)?));
    }
    if let Some(cmd) = &args.oracle_cmd {
        let expected = Expected { dim, task: None };
        return Ok(Box::new(WireOracle::spawn_shell(cmd, expected, wire)?));
    }
    match args.oracle_builtin {
        Some(Builtin::CartpoleExpert) => Ok(Box::new(cartpole::ExpertOracle)),
        None => Err(Failure::Usage("one of --oracle-model, --oracle-cmd, --oracle-builtin is required".into())),
    }
}

/// Sections of the `--config` file.
pub struct Overrides {
    table: toml::Table,
}

impl Overrides {
    pub fn load(path: Option<&Path>) -> Outcome<Self> {
        let table = match path {
            None => toml::Table::new(),
            Some(p) => toml::from_str(&read_text(p)?).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        };
        Ok(Overrides { table })
    }

    /// Replaces fields of `base` with the keys of `[section]`. Unknown keys
    /// are rejected rather than ignored.
    pub fn apply<T: Serialize + DeserializeOwned>(&self, section: &str, base: T) -> Outcome<T> {
        let Some(entry) = self.table.get(section) else {
            return Ok(base);
        };
        let over = entry
            .as_table()
            .ok_or_else(|| Failure::Config(format!("[{section}] must be a table")))?;
        let mut merged = toml::Table::try_from(&base).map_err(|e| Failure::Config(e.to_string()))?;
        for (k, v) in over {
            merged.insert(k.clone(), v.clone());
        }
        let value: T = merged
            .clone()
            .try_into()
            .map_err(|e| Failure::Config(format!("[{section}]: {e}")))?;
        let back = toml::Table::try_from(&value).map_err(|e| Failure::Config(e.to_string()))?;
        if let Some(k) = over.keys().find(|k| !back.contains_key(*k)) {
            return Err(Failure::Config(format!("[{section}]: unknown key '{k}'")));
        }
        Ok(value)
    }
}

/// Parses `lo:hi` where either side may be empty for an unbounded end.
pub fn parse_interval(s: &str) -> Outcome<modex::Interval> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| Failure::Usage(format!("interval '{s}' must look like lo:hi")))?;
    let bound = |t: &str, default: f64| -> Outcome<f64> {
        if t.trim().is_empty() {
            Ok(default)
        } else {
            t.trim().parse().map_err(|_| Failure::Usage(format!("bad interval bound '{t}'")))
        }
    };
    let (lo, hi) = (bound(lo, f64::NEG_INFINITY)?, bound(hi, f64::INFINITY)?);
    if !(lo < hi) {
        return Err(Failure::Usage(format!("interval '{s}' is empty")));
    }
    Ok(if lo == f64::NEG_INFINITY {
        modex::Interval::at_most(hi)
    } else {
        modex::Interval {
            lower: lo,
            upper: hi,
            lower_open: true,
        }
    })
}
