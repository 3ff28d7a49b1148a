//! Operator-spec and boundary-condition files.

use std::path::Path;

use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use singspec::extensions::{BoundaryConditionSet, CMatrix};
use singspec::frobenius::OperatorSpec;
use singspec::scalar::parse_ratio;
use singspec::{AnalyticSeries, Gq};

use crate::CliError;

pub const SPEC_SCHEMA: &str = include_str!("../schemas/spec-file.schema.json");
pub const BC_SCHEMA: &str = include_str!("../schemas/bc-file.schema.json");

/// A rational given as `"num/den"`, a decimal string, or a JSON number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rational {
    Text(String),
    Number(serde_json::Number),
}

impl Rational {
    fn parse(&self) -> Result<BigRational, CliError> {
        let text = match self {
            Rational::Text(s) => s.clone(),
            Rational::Number(n) => n.to_string(),
        };
        parse_ratio(&text).ok_or_else(|| CliError::Usage(format!("not a rational number: {text:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub m: usize,
    pub p: usize,
    pub q: usize,
    #[serde(default)]
    pub a: Option<Vec<Rational>>,
    #[serde(default)]
    pub b: Option<Vec<Rational>>,
    #[serde(default)]
    pub trunc: Option<usize>,
    #[serde(default)]
    pub lambda: Option<[Rational; 2]>,
}

fn series(list: &Option<Vec<Rational>>) -> Result<AnalyticSeries, CliError> {
    match list {
        None => Ok(AnalyticSeries::one()),
        Some(v) if v.is_empty() => Err(CliError::Usage("coefficient list must not be empty".into())),
        Some(v) => Ok(AnalyticSeries::polynomial(v.iter().map(Rational::parse).collect::<Result<_, _>>()?)),
    }
}

impl SpecFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Schema { what: "spec file", detail: e.to_string(), schema: SPEC_SCHEMA })
    }

    pub fn operator(&self) -> Result<OperatorSpec, CliError> {
        Ok(OperatorSpec::new(self.m, self.p, self.q, series(&self.a)?, series(&self.b)?)?)
    }

    pub fn lambda(&self) -> Result<Option<Gq>, CliError> {
        self.lambda.as_ref().map(|[re, im]| Ok(Gq::new(re.parse()?, im.parse()?))).transpose()
    }
}

/// Parse a comma-separated rational list from the command line.
pub fn parse_list(text: &str) -> Result<Vec<Rational>, CliError> {
    let out: Vec<Rational> = text.split(',').map(|s| Rational::Text(s.trim().to_string())).collect();
    for r in &out {
        r.parse()?;
    }
    Ok(out)
}

pub fn parse_series(text: &str) -> Result<AnalyticSeries, CliError> {
    series(&Some(parse_list(text)?))
}

pub fn parse_complex(text: &str) -> Result<Gq, CliError> {
    let parts = parse_list(text)?;
    match parts.as_slice() {
        [re] => Ok(Gq::real(re.parse()?)),
        [re, im] => Ok(Gq::new(re.parse()?, im.parse()?)),
        _ => Err(CliError::Usage(format!("expected RE or RE,IM, got {text:?}"))),
    }
}

type Matrix = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcFile {
    pub a1: Matrix,
    pub b1: Matrix,
    pub b2: Matrix,
    pub a2: Matrix,
}

fn to_matrix(name: &str, m: &Matrix) -> Result<CMatrix, CliError> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if m.iter().any(|r| r.len() != cols) {
        return Err(CliError::Usage(format!("{name}: rows have different lengths")));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| Complex64::new(m[i][j][0], m[i][j][1])))
}

impl BcFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Schema { what: "boundary-condition file", detail: e.to_string(), schema: BC_SCHEMA })
    }

    pub fn conditions(&self) -> Result<BoundaryConditionSet, CliError> {
        Ok(BoundaryConditionSet::new(
            to_matrix("a1", &self.a1)?,
            to_matrix("b1", &self.b1)?,
            to_matrix("b2", &self.b2)?,
            to_matrix("a2", &self.a2)?,
        )?)
    }
}
