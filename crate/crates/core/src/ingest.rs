//! CSV ingestion: categorical columns become one-hot groups, two-level
//! columns become {0, 1} indicators, and the response is split off.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Labels;
use crate::rng::Stream;
use crate::space::{Feature, FeatureKind, FeatureSpace, Task};

/// Regression is inferred for numeric responses with more distinct values
/// than this, or with any non-integer value.
const MAX_INFERRED_CLASSES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Numeric,
    Categorical,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Encoding {
    Passthrough,
    /// The second level maps to 1.
    Indicator { levels: [String; 2] },
    OneHot { levels: Vec<String> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaHints {
    pub response: String,
    pub task: Option<Task>,
    pub columns: BTreeMap<String, SourceKind>,
    pub drop: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub source: SourceKind,
    pub encoding: Encoding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseSchema {
    pub name: String,
    pub task: Task,
    /// Original class values, indexed by encoded class.
    pub classes: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaManifest {
    pub columns: Vec<ColumnSchema>,
    pub response: ResponseSchema,
    pub features: FeatureSpace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Labels,
    pub space: FeatureSpace,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(ndarray::Axis(0), rows),
            y: self.y.select(rows),
            space: self.space.clone(),
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    read_table_from(file, &path.display().to_string())
}

fn read_table_from<R: std::io::Read>(source: R, origin: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() {
        return Err(Error::Data(format!("{origin}: no header row")));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = header.iter().find(|h| !seen.insert(h.as_str())) {
        return Err(Error::Data(format!("{origin}: duplicate column '{dup}'")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{origin}: {e}")))?;
        let row: Vec<String> = record.iter().map(str::to_string).collect();
        if let Some(c) = row.iter().position(String::is_empty) {
            return Err(Error::Data(format!(
                "{}: missing value in row {} column '{}'",
                origin,
                i + 1,
                header[c]
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{origin}: no data rows")));
    }
    Ok(Table { header, rows })
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Levels in numeric order when every level is a number, else lexicographic.
fn sorted_levels<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut levels: Vec<String> = values.collect::<BTreeSet<_>>().into_iter().map(str::to_string).collect();
    if levels.iter().all(|l| parse_number(l).is_some()) {
        levels.sort_by(|a, b| parse_number(a).unwrap().total_cmp(&parse_number(b).unwrap()));
    }
    levels
}

fn infer_column(name: &str, values: &[&str], hint: Option<SourceKind>) -> Result<ColumnSchema> {
    let numeric = values.iter().all(|v| parse_number(v).is_some());
    let levels = sorted_levels(values.iter().copied());
    let zero_one = numeric && levels.iter().all(|l| parse_number(l) == Some(0.0) || parse_number(l) == Some(1.0));
    let source = match hint {
        Some(k) => k,
        None if zero_one && levels.len() == 2 => SourceKind::Binary,
        None if numeric => SourceKind::Numeric,
        None if levels.len() == 2 => SourceKind::Binary,
        None => SourceKind::Categorical,
    };
    let encoding = match source {
        SourceKind::Numeric if !numeric => {
            let bad = values.iter().find(|v| parse_number(v).is_none()).unwrap();
            return Err(Error::Data(format!("column '{name}': cannot parse '{bad}' as a number")));
        }
        SourceKind::Numeric => Encoding::Passthrough,
        SourceKind::Binary if levels.len() > 2 => {
            return Err(Error::Data(format!("column '{name}' has {} levels, not 2", levels.len())))
        }
        SourceKind::Binary if levels.len() == 1 => {
            // a constant column; the single level becomes the 0 side
            Encoding::Indicator {
                levels: [levels[0].clone(), format!("not {}", levels[0])],
            }
        }
        SourceKind::Binary => Encoding::Indicator {
            levels: [levels[0].clone(), levels[1].clone()],
        },
        SourceKind::Categorical => Encoding::OneHot { levels },
    };
    Ok(ColumnSchema {
        name: name.to_string(),
        source,
        encoding,
    })
}

impl ColumnSchema {
    fn features(&self) -> Vec<Feature> {
        match &self.encoding {
            Encoding::Passthrough => vec![Feature::new(self.name.clone(), FeatureKind::Numeric)],
            Encoding::Indicator { levels } => {
                vec![Feature::new(format!("{}={}", self.name, levels[1]), FeatureKind::BinaryIndicator)]
            }
            Encoding::OneHot { levels } => levels
                .iter()
                .map(|l| Feature::new(format!("{}={l}", self.name), FeatureKind::BinaryIndicator))
                .collect(),
        }
    }

    fn width(&self) -> usize {
        match &self.encoding {
            Encoding::OneHot { levels } => levels.len(),
            _ => 1,
        }
    }

    fn encode(&self, value: &str, out: &mut Vec<f64>) -> Result<()> {
        let unknown = || Error::Data(format!("column '{}': unknown level '{value}'", self.name));
        match &self.encoding {
            Encoding::Passthrough => out.push(
                parse_number(value)
                    .ok_or_else(|| Error::Data(format!("column '{}': cannot parse '{value}'", self.name)))?,
            ),
            Encoding::Indicator { levels } => {
                let v = levels.iter().position(|l| same_level(l, value)).ok_or_else(unknown)?;
                out.push(v as f64);
            }
            Encoding::OneHot { levels } => {
                let hot = levels.iter().position(|l| same_level(l, value)).ok_or_else(unknown)?;
                out.extend((0..levels.len()).map(|i| if i == hot { 1.0 } else { 0.0 }));
            }
        }
        Ok(())
    }

    fn decode(&self, encoded: &[f64]) -> Result<String> {
        let bad = || Error::Data(format!("column '{}': {encoded:?} is not a valid encoding", self.name));
        match &self.encoding {
            Encoding::Passthrough => Ok(encoded[0].to_string()),
            Encoding::Indicator { levels } => match encoded[0] {
                0.0 => Ok(levels[0].clone()),
                1.0 => Ok(levels[1].clone()),
                _ => Err(bad()),
            },
            Encoding::OneHot { levels } => {
                let hot: Vec<usize> = (0..levels.len()).filter(|&i| encoded[i] == 1.0).collect();
                let valid = hot.len() == 1 && encoded.iter().all(|&v| v == 0.0 || v == 1.0);
                if valid {
                    Ok(levels[hot[0]].clone())
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// Numeric levels compare by value so that "1" and "1.0" are the same level.
fn same_level(level: &str, value: &str) -> bool {
    match (parse_number(level), parse_number(value)) {
        (Some(a), Some(b)) => a == b,
        _ => level == value,
    }
}

fn infer_response(name: &str, values: &[&str], task: Option<Task>) -> Result<ResponseSchema> {
    let numbers: Option<Vec<f64>> = values.iter().map(|v| parse_number(v)).collect();
    let task = match task {
        Some(t) => t,
        None => match &numbers {
            Some(v) => {
                let distinct: BTreeSet<u64> = v.iter().map(|x| x.to_bits()).collect();
                if v.iter().any(|x| x.fract() != 0.0) || distinct.len() > MAX_INFERRED_CLASSES {
                    Task::Regression
                } else {
                    Task::Classification
                }
            }
            None => Task::Classification,
        },
    };
    match task {
        Task::Regression if numbers.is_none() => Err(Error::Data(format!(
            "response '{name}' is not numeric but the task is regression"
        ))),
        Task::Regression => Ok(ResponseSchema {
            name: name.to_string(),
            task,
            classes: None,
        }),
        Task::Classification => Ok(ResponseSchema {
            name: name.to_string(),
            task,
            classes: Some(sorted_levels(values.iter().copied())),
        }),
    }
}

impl ResponseSchema {
    fn encode<'a>(&self, values: impl Iterator<Item = &'a str>) -> Result<Labels> {
        match &self.classes {
            None => values
                .map(|v| {
                    parse_number(v).ok_or_else(|| Error::Data(format!("response '{}': cannot parse '{v}'", self.name)))
                })
                .collect::<Result<Vec<_>>>()
                .map(Labels::Values),
            Some(levels) => values
                .map(|v| {
                    levels
                        .iter()
                        .position(|l| same_level(l, v))
                        .ok_or_else(|| Error::Data(format!("response '{}': unknown class '{v}'", self.name)))
                })
                .collect::<Result<Vec<_>>>()
                .map(Labels::Classes),
        }
    }
}

/// Reads a raw CSV, infers or applies column kinds, and encodes it.
pub fn load_csv(path: impl AsRef<Path>, hints: &SchemaHints) -> Result<(Dataset, SchemaManifest)> {
    load_table(read_table(path.as_ref())?, hints)
}

/// Like [`load_csv`] for CSV text already in memory.
pub fn load_csv_str(text: &str, hints: &SchemaHints) -> Result<(Dataset, SchemaManifest)> {
    load_table(read_table_from(text.as_bytes(), "<memory>")?, hints)
}

fn load_table(table: Table, hints: &SchemaHints) -> Result<(Dataset, SchemaManifest)> {
    let response_at = table
        .header
        .iter()
        .position(|h| *h == hints.response)
        .ok_or_else(|| Error::Data(format!("unknown response column '{}'", hints.response)))?;
    for name in hints.columns.keys().chain(&hints.drop) {
        if !table.header.contains(name) {
            return Err(Error::Data(format!("hint names unknown column '{name}'")));
        }
    }
    let column = |c: usize| table.rows.iter().map(move |r| r[c].as_str());
    let mut columns = Vec::new();
    for (c, name) in table.header.iter().enumerate() {
        if c == response_at || hints.drop.contains(name) {
            continue;
        }
        let values: Vec<&str> = column(c).collect();
        columns.push(infer_column(name, &values, hints.columns.get(name).copied())?);
    }
    let response_values: Vec<&str> = column(response_at).collect();
    let response = infer_response(&hints.response, &response_values, hints.task)?;
    let features = FeatureSpace::new(columns.iter().flat_map(ColumnSchema::features).collect())?;
    let manifest = SchemaManifest {
        columns,
        response,
        features,
    };
    let data = manifest.encode_table(&table)?;
    Ok((data, manifest))
}

impl SchemaManifest {
    /// Encodes another raw CSV with this schema (for example a scoring set).
    pub fn apply_csv(&self, path: impl AsRef<Path>) -> Result<Dataset> {
        self.encode_table(&read_table(path.as_ref())?)
    }

    fn encode_table(&self, table: &Table) -> Result<Dataset> {
        let find = |name: &str| {
            table
                .header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("missing column '{name}'")))
        };
        let positions = self.columns.iter().map(|c| find(&c.name)).collect::<Result<Vec<_>>>()?;
        let response_at = find(&self.response.name)?;
        let mut flat = Vec::with_capacity(table.rows.len() * self.features.dim());
        for row in &table.rows {
            for (col, &p) in self.columns.iter().zip(&positions) {
                col.encode(&row[p], &mut flat)?;
            }
        }
        let x = Array2::from_shape_vec((table.rows.len(), self.features.dim()), flat).expect("row widths match");
        let y = self.response.encode(table.rows.iter().map(|r| r[response_at].as_str()))?;
        Ok(Dataset {
            x,
            y,
            space: self.features.clone(),
        })
    }

    /// Recovers the source column values of one encoded row.
    pub fn decode_row(&self, encoded: &[f64]) -> Result<Vec<String>> {
        if encoded.len() != self.features.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.features.dim(),
                got: encoded.len(),
            });
        }
        let mut at = 0;
        self.columns
            .iter()
            .map(|c| {
                let w = c.width();
                let v = c.decode(&encoded[at..at + w]);
                at += w;
                v
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Writes the encoded matrix with the response as the last column (class
/// indices for classification).
pub fn write_encoded(path: impl AsRef<Path>, data: &Dataset, response: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = data.space.names();
    header.push(response.to_string());
    w.write_record(&header)?;
    for (i, row) in data.x.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(data.y.get(i).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file produced by [`write_encoded`] for the given manifest.
pub fn read_encoded(path: impl AsRef<Path>, manifest: &SchemaManifest) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_table(path)?;
    let mut expected = manifest.features.names();
    expected.push(manifest.response.name.clone());
    if table.header != expected {
        return Err(Error::Data(format!("{}: columns do not match the manifest", path.display())));
    }
    let d = manifest.features.dim();
    let mut flat = Vec::with_capacity(table.rows.len() * d);
    for row in &table.rows {
        for v in &row[..d] {
            flat.push(parse_number(v).ok_or_else(|| Error::Data(format!("{}: cannot parse '{v}'", path.display())))?);
        }
    }
    let x = Array2::from_shape_vec((table.rows.len(), d), flat).expect("row widths match");
    let raw = table.rows.iter().map(|r| r[d].as_str());
    let y = match manifest.response.task {
        Task::Regression => Labels::Values(
            raw.map(|v| parse_number(v).ok_or_else(|| Error::Data(format!("bad response '{v}'"))))
                .collect::<Result<_>>()?,
        ),
        Task::Classification => {
            let m = manifest.response.classes.as_ref().map_or(0, Vec::len);
            Labels::Classes(
                raw.map(|v| {
                    v.parse::<usize>()
                        .ok()
                        .filter(|&c| c < m)
                        .ok_or_else(|| Error::Data(format!("bad class index '{v}'")))
                })
                .collect::<Result<_>>()?,
            )
        }
    };
    Ok(Dataset {
        x,
        y,
        space: manifest.features.clone(),
    })
}

/// Seeded train/test split, stratified by class for classification. Both
/// sides keep the original row order.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::domain("test fraction must lie in (0, 1)"));
    }
    let n = data.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::domain(format!(
            "a test fraction of {test_fraction} on {n} rows leaves one side empty"
        )));
    }
    let mut rng = Stream::new(seed).rng();
    let groups: Vec<Vec<usize>> = match &data.y {
        Labels::Classes(c) => {
            let mut g = vec![Vec::new(); data.y.class_count()];
            for (i, &k) in c.iter().enumerate() {
                g[k].push(i);
            }
            g
        }
        Labels::Values(_) => vec![(0..n).collect()],
    };
    // largest-remainder allocation of the test rows across classes
    let quotas: Vec<f64> = groups.iter().map(|g| g.len() as f64 * n_test as f64 / n as f64).collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let short = n_test - take.iter().sum::<usize>();
    for &g in order.iter().take(short) {
        take[g] += 1;
    }
    let mut is_test = vec![false; n];
    for (g, rows) in groups.iter().enumerate() {
        let mut rows = rows.clone();
        rand::seq::SliceRandom::shuffle(rows.as_mut_slice(), &mut rng);
        for &r in &rows[..take[g]] {
            is_test[r] = true;
        }
    }
    let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
    let test: Vec<usize> = (0..n).filter(|&i| is_test[i]).collect();
    Ok((data.select(&train), data.select(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    fn hints(response: &str) -> SchemaHints {
        SchemaHints {
            response: response.into(),
            ..Default::default()
        }
    }

    #[test]
    fn numeric_passthrough() {
        let f = csv_file("a,b,y\n1.5,2,0\n-3,4e1,1\n");
        let (d, m) = load_csv(f.path(), &hints("y")).unwrap();
        assert_eq!(d.x.as_slice().unwrap(), &[1.5, 2.0, -3.0, 40.0]);
        assert_eq!(d.y, Labels::Classes(vec![0, 1]));
        assert!(m.columns.iter().all(|c| c.encoding == Encoding::Passthrough));
    }

    #[test]
    fn one_hot_rows_sum_to_one() {
        let f = csv_file("color,y\nred,1.5\ngreen,2.25\nblue,0.5\nred,1.0\n");
        let (d, m) = load_csv(f.path(), &hints("y")).unwrap();
        assert_eq!(d.space.names(), vec!["color=blue", "color=green", "color=red"]);
        assert!(d.x.rows().into_iter().all(|r| r.sum() == 1.0));
        assert_eq!(m.response.task, Task::Regression);
        assert_eq!(m.decode_row(d.x.row(1).as_slice().unwrap()).unwrap(), vec!["green"]);
    }

    #[test]
    fn two_level_column_is_an_indicator() {
        let f = csv_file("sex,age,grade\nM,15,10\nF,16,12\nF,15,11\n");
        let (d, _) = load_csv(f.path(), &hints("grade")).unwrap();
        assert_eq!(d.space.names()[0], "sex=M");
        assert_eq!(d.space.kinds()[0], FeatureKind::BinaryIndicator);
        assert_eq!(d.x.column(0).to_vec(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn errors() {
        let ragged = csv_file("a,y\n1,2\n3\n");
        assert!(load_csv(ragged.path(), &hints("y")).is_err());
        let missing = csv_file("a,y\n1,\n3,1\n");
        assert!(load_csv(missing.path(), &hints("y")).is_err());
        let bad = csv_file("a,y\n1,0\nx,1\n");
        let mut h = hints("y");
        h.columns.insert("a".into(), SourceKind::Numeric);
        assert!(load_csv(bad.path(), &h).is_err());
        assert!(load_csv(bad.path(), &hints("nope")).is_err());
    }

    fn dataset(classes: Vec<usize>) -> Dataset {
        let n = classes.len();
        Dataset {
            x: Array2::from_shape_fn((n, 1), |(i, _)| i as f64),
            y: Labels::Classes(classes),
            space: FeatureSpace::anonymous(1).unwrap(),
        }
    }

    #[test]
    fn split_sizes_and_seeds() {
        let d = dataset((0..100).map(|i| i % 2).collect());
        let (a, b) = split(&d, 0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (50, 50));
        assert_eq!(split(&d, 0.5, 1).unwrap(), (a.clone(), b));
        assert_ne!(split(&d, 0.5, 2).unwrap().0, a);
        assert!(split(&d, 0.001, 1).is_err());
        assert!(split(&d, 1.0, 1).is_err());
    }

    #[test]
    fn split_is_stratified() {
        let classes: Vec<usize> = (0..97).map(|i| if i < 20 { 0 } else if i < 59 { 1 } else { 2 }).collect();
        let d = dataset(classes);
        let (train, test) = split(&d, 0.3, 5).unwrap();
        for c in 0..3 {
            let total = d.y.classes().unwrap().iter().filter(|&&k| k == c).count() as f64;
            let t = test.y.classes().unwrap().iter().filter(|&&k| k == c).count() as f64;
            let expected = total * test.len() as f64 / d.len() as f64;
            assert!((t - expected).abs() <= 1.0, "class {c}: {t} vs {expected}");
        }
        assert_eq!(train.len() + test.len(), d.len());
    }

    #[test]
    fn encoded_round_trip() {
        let f = csv_file("sex,color,v,y\nM,red,1.25,a\nF,blue,2,b\nM,green,3,a\n");
        let (d, m) = load_csv(f.path(), &hints("y")).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_encoded(out.path(), &d, &m.response.name).unwrap();
        let back = read_encoded(out.path(), &m).unwrap();
        assert_eq!(back, d);
        let m2 = SchemaManifest::from_json(&m.to_json()).unwrap();
        assert_eq!(m2, m);
        assert_eq!(m.apply_csv(f.path()).unwrap(), d);
    }
}
