use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::data::{ColumnKind, ColumnSchema, Dataset, Schema};
use crate::error::{Error, Result};

/// Declared column types for CSV ingestion.
///
/// The text form is one `name: kind` entry per line, with an optional
/// bracketed category list fixing the category order, plus a `label:` line:
///
/// ```text
/// # adult
/// label: income
/// age: continuous
/// income: binary [<=50K, >50K]
/// ```
///
/// Columns not listed are inferred from the data.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaSpec {
    pub label: String,
    pub columns: Vec<ColumnDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDecl {
    pub name: String,
    pub kind: ColumnKind,
    pub categories: Option<Vec<String>>,
}

impl SchemaSpec {
    pub fn label_only(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            columns: Vec::new(),
        }
    }

    pub fn declare(mut self, name: impl Into<String>, kind: ColumnKind) -> Self {
        self.columns.push(ColumnDecl {
            name: name.into(),
            kind,
            categories: None,
        });
        self
    }

    pub fn declare_categories<S: Into<String>>(
        mut self,
        name: impl Into<String>,
        kind: ColumnKind,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        self.columns.push(ColumnDecl {
            name: name.into(),
            kind,
            categories: Some(categories.into_iter().map(Into::into).collect()),
        });
        self
    }

    pub fn from_schema(schema: &Schema) -> Self {
        Self {
            label: schema.label_name().to_string(),
            columns: schema
                .columns()
                .iter()
                .map(|c| ColumnDecl {
                    name: c.name.clone(),
                    kind: c.kind,
                    categories: c.is_categorical().then(|| c.categories.clone()),
                })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut label = None;
        let mut columns: Vec<ColumnDecl> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| err(format!("expected `name: kind`, found `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if key == "label" {
                label = Some(value.to_string());
                continue;
            }
            let (kind_str, cats) = match value.find('[') {
                Some(open) => {
                    let close = value
                        .rfind(']')
                        .filter(|&c| c > open)
                        .ok_or_else(|| err("unterminated category list".into()))?;
                    let cats: Vec<String> = value[open + 1..close]
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    (value[..open].trim(), Some(cats))
                }
                None => (value, None),
            };
            let kind = ColumnKind::parse(kind_str)
                .ok_or_else(|| err(format!("unknown column kind `{kind_str}`")))?;
            if columns.iter().any(|c| c.name == key) {
                return Err(err(format!("column `{key}` declared twice")));
            }
            columns.push(ColumnDecl {
                name: key.to_string(),
                kind,
                categories: cats,
            });
        }
        let label = label.ok_or_else(|| Error::config("schema config has no `label:` line"))?;
        Ok(Self { label, columns })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("label: {}\n", self.label);
        for c in &self.columns {
            let _ = write!(out, "{}: {}", c.name, c.kind.as_str());
            if let Some(cats) = &c.categories {
                let _ = write!(out, " [{}]", cats.join(", "));
            }
            out.push('\n');
        }
        out
    }

    fn decl(&self, name: &str) -> Option<&ColumnDecl> {
        self.columns.iter().find(|c| c.name == name)
    }
}

pub fn load_csv(path: impl AsRef<Path>, spec: &SchemaSpec) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, spec)
}

pub fn read_csv<R: Read>(reader: R, spec: &SchemaSpec) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::data("csv file is empty"));
    }
    let mut raw: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: i + 2,
            msg: e.to_string(),
        })?;
        if let Some(col) = rec.iter().position(str::is_empty) {
            return Err(Error::Parse {
                line: i + 2,
                msg: format!("missing value in column `{}`", header[col]),
            });
        }
        raw.push(rec.iter().map(str::to_string).collect());
    }
    if raw.is_empty() {
        return Err(Error::data("csv file has no data rows"));
    }
    if !header.iter().any(|h| *h == spec.label) {
        return Err(Error::schema(format!("label column `{}` not found", spec.label)));
    }
    for d in &spec.columns {
        if !header.contains(&d.name) {
            return Err(Error::schema(format!("declared column `{}` not in csv header", d.name)));
        }
    }

    let mut columns = Vec::with_capacity(header.len());
    let mut lookups: Vec<Option<HashMap<String, usize>>> = Vec::with_capacity(header.len());
    for (j, name) in header.iter().enumerate() {
        let values = raw.iter().map(|r| r[j].as_str());
        let col = match spec.decl(name) {
            Some(d) => declared_column(d, values)?,
            None => infer_column(name, values, *name == spec.label)?,
        };
        lookups.push(col.is_categorical().then(|| {
            col.categories
                .iter()
                .enumerate()
                .map(|(i, c)| (c.clone(), i))
                .collect()
        }));
        columns.push(col);
    }
    let schema = Arc::new(Schema::new(columns, &spec.label)?);

    let mut cells = Vec::with_capacity(raw.len() * header.len());
    for (i, r) in raw.iter().enumerate() {
        for (j, field) in r.iter().enumerate() {
            let v = match &lookups[j] {
                Some(map) => match map.get(field.as_str()) {
                    Some(&idx) => idx as f64,
                    // numeric labels may be written as 1 vs 1.0
                    None => field
                        .parse::<f64>()
                        .ok()
                        .and_then(|x| {
                            schema.column(j).categories.iter().position(|c| {
                                c.parse::<f64>().map(|y| y == x).unwrap_or(false)
                            })
                        })
                        .ok_or_else(|| Error::Parse {
                            line: i + 2,
                            msg: format!(
                                "value `{field}` is not a declared category of `{}`",
                                header[j]
                            ),
                        })? as f64,
                },
                None => parse_number(field).ok_or_else(|| Error::Parse {
                    line: i + 2,
                    msg: format!("non-numeric value `{field}` in continuous column `{}`", header[j]),
                })?,
            };
            cells.push(v);
        }
    }
    Dataset::new(schema, cells)
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn first_appearance<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashMap::new();
    let mut order = Vec::new();
    for v in values {
        if !seen.contains_key(v) {
            seen.insert(v.to_string(), order.len());
            order.push(v.to_string());
        }
    }
    order
}

fn declared_column<'a>(d: &ColumnDecl, values: impl Iterator<Item = &'a str>) -> Result<ColumnSchema> {
    if d.kind == ColumnKind::Continuous {
        return Ok(ColumnSchema::continuous(d.name.clone()));
    }
    let observed = first_appearance(values);
    let categories = match &d.categories {
        Some(cats) => {
            if let Some(extra) = observed.iter().find(|o| !cats.contains(o)) {
                return Err(Error::schema(format!(
                    "column `{}` contains undeclared category `{extra}`",
                    d.name
                )));
            }
            cats.clone()
        }
        None => observed,
    };
    let col = ColumnSchema {
        name: d.name.clone(),
        kind: d.kind,
        categories,
    };
    col.validate()?;
    Ok(col)
}

fn infer_column<'a>(
    name: &str,
    values: impl Iterator<Item = &'a str> + Clone,
    is_label: bool,
) -> Result<ColumnSchema> {
    let numeric = values.clone().all(|v| parse_number(v).is_some());
    let mut categories = first_appearance(values);
    if numeric && !(is_label && categories.len() == 2) {
        return Ok(ColumnSchema::continuous(name));
    }
    if numeric {
        // a 0/1 style label keeps numeric order so class 1 is the larger value
        categories.sort_by(|a, b| parse_number(a).unwrap().total_cmp(&parse_number(b).unwrap()));
    }
    if categories.len() < 2 {
        return Err(Error::schema(format!(
            "categorical column `{name}` has a single distinct value"
        )));
    }
    Ok(ColumnSchema::categorical(name, categories))
}

/// Writes a dataset with a header row; categorical cells are written as
/// their category label.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let schema = data.schema();
    w.write_record(schema.columns().iter().map(|c| c.name.as_str()))?;
    let mut record = Vec::with_capacity(schema.n_cols());
    for row in data.rows() {
        record.clear();
        for (j, &v) in row.iter().enumerate() {
            let c = schema.column(j);
            if c.is_categorical() {
                record.push(c.categories[v as usize].clone());
            } else {
                record.push(format!("{v}"));
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
