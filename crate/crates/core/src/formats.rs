//! On-disk formats: category lists, CSV data, matrices and mechanism spec
//! files.
//!
//! A spec file is a list of `key = value` lines (`#` starts a comment):
//!
//! ```text
//! type = exponential        # or: product
//! utility = hamming         # exponential only: hamming | l1 | table
//! k = 1.5                   # hamming steepness, or "no-noise"
//! exp_k = 10/3              # hamming, exact rational e^k (alternative to k)
//! scale = 1                 # l1 scale
//! table = utility.csv       # table utility, (m+1)^n rows of (m+1)^n values
//! fixed_normalization = true
//! p = 0.1                   # product, symmetric off-diagonal entry
//! matrix = matrix.csv       # product, general solution matrix
//! categories = hobbies.txt  # one label per line; or m = 2 for labels 0..=m
//! n = 2
//! ```
//!
//! Relative paths are resolved against the spec file's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::analysis::{k_from_p, p_from_k, Steepness};
use crate::error::{Error, Result};
use crate::exact::{parse_rational, ExactMechanism};
use crate::mechanism::{
    ExponentialSpec, MechanismSpec, ProductSpec, SolutionMatrix, UtilityFunction, UtilityKind,
    UtilityTable,
};
use crate::space::{Budget, CategorySpace, Database};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// One label per line; blank lines and `#` comments are skipped.
pub fn parse_categories(text: &str) -> Result<CategorySpace> {
    let labels: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .collect();
    CategorySpace::new(labels)
}

pub fn read_categories(path: &Path) -> Result<CategorySpace> {
    parse_categories(&read_text(path)?)
}

pub fn read_matrix(path: &Path) -> Result<SolutionMatrix> {
    SolutionMatrix::from_csv(&read_text(path)?)
}

fn csv_cells(text: &str) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record?.iter().map(str::to_owned).collect());
    }
    Ok(rows)
}

/// Square CSV of exact rationals (`1/3`, `0.25`, ...).
pub fn parse_exact_matrix(text: &str) -> Result<Vec<Vec<BigRational>>> {
    csv_cells(text)?
        .iter()
        .map(|row| row.iter().map(|c| parse_rational(c)).collect())
        .collect()
}

/// A CSV table with one categorical column to sanitise.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Option<Vec<String>>,
    pub records: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str, has_header: bool) -> Result<Self> {
        let mut rows = csv_cells(text)?;
        let header = if has_header && !rows.is_empty() {
            Some(rows.remove(0))
        } else {
            None
        };
        Ok(CsvTable {
            header,
            records: rows,
        })
    }

    pub fn read(path: &Path, has_header: bool) -> Result<Self> {
        CsvTable::parse(&read_text(path)?, has_header)
    }

    /// Column by header name, or by zero-based position. `None` picks the
    /// first column.
    pub fn column_index(&self, column: Option<&str>) -> Result<usize> {
        let Some(column) = column else {
            return Ok(0);
        };
        if let Some(i) = self
            .header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == column))
        {
            return Ok(i);
        }
        column
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("no column named {column:?}")))
    }

    pub fn database(&self, space: &CategorySpace, column: usize) -> Result<Database> {
        let labels = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.get(column)
                    .map(String::as_str)
                    .ok_or_else(|| Error::Parse(format!("record {i} has no column {column}")))
            })
            .collect::<Result<Vec<&str>>>()?;
        Database::from_labels(space, &labels)
    }

    /// Overwrite `column` with the labels of `db`.
    pub fn replace_column(&mut self, space: &CategorySpace, column: usize, db: &Database) -> Result<()> {
        if db.n() != self.records.len() {
            return Err(Error::LengthMismatch {
                left: db.n(),
                right: self.records.len(),
            });
        }
        for (record, label) in self.records.iter_mut().zip(db.labels(space)) {
            record[column] = label.to_owned();
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        if let Some(h) = &self.header {
            writer.write_record(h)?;
        }
        for r in &self.records {
            writer.write_record(r)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecKind {
    Exponential,
    Product,
}

/// A parsed spec file.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecFile {
    pub kind: SpecKind,
    pub utility: Option<UtilityKind>,
    pub k: Option<Steepness>,
    /// Exact `e^k` as written.
    pub exp_k: Option<String>,
    pub scale: Option<f64>,
    /// Symmetric off-diagonal entry as written.
    pub p: Option<String>,
    pub matrix: Option<String>,
    pub table: Option<String>,
    pub categories: Option<String>,
    pub m: Option<usize>,
    pub n: usize,
    pub fixed_normalization: bool,
    pub base_dir: PathBuf,
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().to_ascii_lowercase();
        if map.insert(key.clone(), value.trim().to_owned()).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate key {key:?}", lineno + 1)));
        }
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Parse(format!("{key} = {v:?}: {e}")))
}

/// A decimal or a fraction such as `3/16`, as a float.
fn parse_real(key: &str, v: &str) -> Result<f64> {
    let r = parse_rational(v).map_err(|_| Error::Parse(format!("{key} = {v:?}: not a number")))?;
    num_traits::ToPrimitive::to_f64(&r)
        .ok_or_else(|| Error::Parse(format!("{key} = {v:?}: out of range")))
}

impl SpecFile {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv = parse_kv(text)?;
        let mut take = |k: &str| kv.remove(k);
        let kind = match take("type").as_deref() {
            Some("exponential") | Some("exp") => SpecKind::Exponential,
            Some("product") => SpecKind::Product,
            Some(other) => return Err(Error::Parse(format!("unknown type {other:?}"))),
            None => return Err(Error::Parse("missing key \"type\"".into())),
        };
        let utility = match take("utility").as_deref() {
            None => None,
            Some("hamming") => Some(UtilityKind::Hamming),
            Some("l1") => Some(UtilityKind::L1),
            Some("table") => Some(UtilityKind::Table),
            Some(other) => return Err(Error::Parse(format!("unknown utility {other:?}"))),
        };
        let k = take("k").map(|v| v.parse::<Steepness>()).transpose()?;
        let exp_k = take("exp_k");
        let scale = take("scale").map(|v| parse_num::<f64>("scale", &v)).transpose()?;
        let p = take("p");
        let matrix = take("matrix");
        let table = take("table");
        let categories = take("categories");
        let m = take("m").map(|v| parse_num::<usize>("m", &v)).transpose()?;
        let n = take("n")
            .map(|v| parse_num::<usize>("n", &v))
            .transpose()?
            .ok_or_else(|| Error::Parse("missing key \"n\"".into()))?;
        let fixed_normalization = take("fixed_normalization")
            .map(|v| parse_num::<bool>("fixed_normalization", &v))
            .transpose()?
            .unwrap_or(false);
        if let Some(extra) = kv.keys().next() {
            return Err(Error::Parse(format!("unknown key {extra:?}")));
        }
        if n == 0 {
            return Err(Error::EmptyDatabase);
        }
        Ok(SpecFile {
            kind,
            utility,
            k,
            exp_k,
            scale,
            p,
            matrix,
            table,
            categories,
            m,
            n,
            fixed_normalization,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        SpecFile::parse(&read_text(path)?, &base)
    }

    fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn space(&self) -> Result<CategorySpace> {
        match (&self.categories, self.m) {
            (Some(path), _) => read_categories(&self.resolve(path)),
            (None, Some(m)) => CategorySpace::indexed(m),
            (None, None) => Err(Error::Parse("spec needs \"categories\" or \"m\"".into())),
        }
    }

    fn utility_kind(&self) -> UtilityKind {
        self.utility.unwrap_or(UtilityKind::Hamming)
    }

    fn steepness(&self) -> Result<Steepness> {
        match (&self.k, &self.exp_k) {
            (Some(k), _) => Ok(*k),
            (None, Some(e)) => {
                let e = parse_rational(e)?;
                if e < BigRational::one() {
                    return Err(Error::ParameterRange(format!("exp_k must be >= 1, got {e}")));
                }
                Ok(Steepness::Finite(num_traits::ToPrimitive::to_f64(&e).unwrap_or(f64::INFINITY).ln()))
            }
            (None, None) => Err(Error::Parse("hamming utility needs \"k\" or \"exp_k\"".into())),
        }
    }

    /// Build the float mechanism. A hamming utility with `k = no-noise` is
    /// built as the identity product mechanism.
    pub fn build(&self, budget: &Budget) -> Result<MechanismSpec> {
        let space = self.space()?;
        match self.kind {
            SpecKind::Product => {
                let spec = match (&self.p, &self.matrix) {
                    (Some(p), None) => ProductSpec::symmetric(space, self.n, parse_real("p", p)?)?,
                    (None, Some(path)) => {
                        ProductSpec::new(space, self.n, read_matrix(&self.resolve(path))?)?
                    }
                    _ => {
                        return Err(Error::Parse(
                            "product spec needs exactly one of \"p\" and \"matrix\"".into(),
                        ))
                    }
                };
                Ok(spec.into())
            }
            SpecKind::Exponential => {
                let utility = match self.utility_kind() {
                    UtilityKind::Hamming => match self.steepness()? {
                        Steepness::Finite(k) => UtilityFunction::hamming(k)?,
                        Steepness::NoNoise => {
                            return Ok(ProductSpec::symmetric(space, self.n, 0.0)?.into())
                        }
                    },
                    UtilityKind::L1 => UtilityFunction::NegativeL1 {
                        scale: self.scale.unwrap_or(1.0),
                    },
                    UtilityKind::Table => {
                        let path = self
                            .table
                            .as_ref()
                            .ok_or_else(|| Error::Parse("table utility needs \"table\"".into()))?;
                        let rows = csv_cells(&read_text(&self.resolve(path))?)?
                            .iter()
                            .map(|r| r.iter().map(|c| parse_num::<f64>("table", c)).collect())
                            .collect::<Result<Vec<Vec<f64>>>>()?;
                        UtilityFunction::Table(UtilityTable::new(space.universe(self.n), rows)?)
                    }
                };
                let mut spec = ExponentialSpec::new(space, self.n, utility)?.with_budget(*budget);
                if self.fixed_normalization {
                    spec = spec.assert_fixed_normalization();
                }
                Ok(spec.into())
            }
        }
    }

    /// Build the exact-rational mechanism, where the spec allows it.
    pub fn build_exact(&self) -> Result<ExactMechanism> {
        let space = self.space()?;
        match self.kind {
            SpecKind::Product => match (&self.p, &self.matrix) {
                (Some(p), None) => ExactMechanism::symmetric_product(space, self.n, parse_rational(p)?),
                (None, Some(path)) => ExactMechanism::product(
                    space,
                    self.n,
                    parse_exact_matrix(&read_text(&self.resolve(path))?)?,
                ),
                _ => Err(Error::Parse(
                    "product spec needs exactly one of \"p\" and \"matrix\"".into(),
                )),
            },
            SpecKind::Exponential => {
                if self.utility_kind() != UtilityKind::Hamming {
                    return Err(Error::NotExact(
                        "only hamming utilities have rational probabilities".into(),
                    ));
                }
                let exp_k = match (&self.exp_k, &self.k) {
                    (Some(e), _) => parse_rational(e)?,
                    (None, Some(Steepness::Finite(k))) if *k == 0.0 => BigRational::one(),
                    (None, Some(Steepness::NoNoise)) => {
                        return ExactMechanism::symmetric_product(space, self.n, BigRational::zero())
                    }
                    _ => {
                        return Err(Error::NotExact(
                            "give the steepness as a rational \"exp_k\" for exact mode".into(),
                        ))
                    }
                };
                ExactMechanism::hamming(space, self.n, exp_k)
            }
        }
    }

    /// Hamming exponential spec as the equivalent symmetric product spec and
    /// back, via `p = 1/(e^k + m)`.
    pub fn converted(&self) -> Result<SpecFile> {
        let m = self.space()?.m();
        let mut out = self.clone();
        out.utility = None;
        out.k = None;
        out.exp_k = None;
        out.p = None;
        out.scale = None;
        out.fixed_normalization = false;
        match self.kind {
            SpecKind::Exponential => {
                if self.utility_kind() != UtilityKind::Hamming {
                    return Err(Error::ParameterRange(
                        "only hamming utilities have a product equivalent".into(),
                    ));
                }
                out.kind = SpecKind::Product;
                out.p = Some(match (&self.exp_k, self.k) {
                    (Some(e), _) => {
                        let p = (parse_rational(e)? + BigRational::from_integer(BigInt::from(m))).recip();
                        p.to_string()
                    }
                    (None, Some(Steepness::NoNoise)) => "0".into(),
                    (None, Some(Steepness::Finite(k))) => format!("{}", p_from_k(k, m)?),
                    (None, None) => return Err(Error::Parse("hamming utility needs \"k\" or \"exp_k\"".into())),
                });
            }
            SpecKind::Product => {
                let p_text = self.p.as_ref().ok_or_else(|| {
                    Error::ParameterRange(
                        "only symmetric product specs (given by \"p\") have a hamming equivalent".into(),
                    )
                })?;
                out.kind = SpecKind::Exponential;
                out.utility = Some(UtilityKind::Hamming);
                match parse_rational(p_text) {
                    Ok(p) if !p.is_zero() => {
                        let exp_k = p.recip() - BigRational::from_integer(BigInt::from(m));
                        if exp_k < BigRational::one() {
                            return Err(Error::ParameterRange(format!(
                                "p = {p_text} exceeds 1/(m+1)"
                            )));
                        }
                        out.exp_k = Some(exp_k.to_string());
                        out.k = Some(k_from_p(parse_real("p", p_text)?, m)?);
                    }
                    _ => out.k = Some(k_from_p(parse_real("p", p_text)?, m)?),
                }
            }
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = match self.kind {
            SpecKind::Exponential => "exponential",
            SpecKind::Product => "product",
        };
        let _ = writeln!(s, "type = {kind}");
        if let Some(u) = self.utility {
            let u = match u {
                UtilityKind::Hamming => "hamming",
                UtilityKind::L1 => "l1",
                UtilityKind::Table => "table",
            };
            let _ = writeln!(s, "utility = {u}");
        }
        if let Some(k) = self.k {
            let _ = writeln!(s, "k = {k}");
        }
        if let Some(v) = &self.exp_k {
            let _ = writeln!(s, "exp_k = {v}");
        }
        if let Some(v) = self.scale {
            let _ = writeln!(s, "scale = {v}");
        }
        if let Some(v) = &self.p {
            let _ = writeln!(s, "p = {v}");
        }
        if let Some(v) = &self.matrix {
            let _ = writeln!(s, "matrix = {v}");
        }
        if let Some(v) = &self.table {
            let _ = writeln!(s, "table = {v}");
        }
        if self.fixed_normalization {
            let _ = writeln!(s, "fixed_normalization = true");
        }
        if let Some(v) = &self.categories {
            let _ = writeln!(s, "categories = {v}");
        }
        if let Some(m) = self.m {
            let _ = writeln!(s, "m = {m}");
        }
        let _ = writeln!(s, "n = {}", self.n);
        s
    }
}
