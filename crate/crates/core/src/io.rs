//! File formats: numeric CSV matrices, DAG JSON, and JSON output with a
//! fixed float format so identical runs produce identical bytes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{DiagonalVariances, WeightedDag};
use crate::penalty::PenaltySpec;
use crate::permutation::Permutation;
use crate::search::{EstimatedPermutations, FitMode, FitResult};

/// Reads a comma-separated numeric matrix. A first row that does not parse
/// as numbers is taken as a header and skipped.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::Parse(format!("row {}: {e}", line + 1)));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse("no numeric rows".into()));
    }
    let cols = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::DimensionMismatch {
            expected: format!("{cols} columns"),
            found: format!("{} columns in data row {}", r.len(), i + 1),
        });
    }
    let n = rows.len();
    Matrix::from_row_major(n, cols, rows.into_iter().flatten().collect())
}

pub fn read_matrix_file(path: &std::path::Path) -> Result<Matrix> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_matrix_csv(f)
}

/// Writes a matrix as CSV with the shortest round-trip representation of
/// every entry.
pub fn write_matrix_csv<W: Write>(writer: W, m: &Matrix, header: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Prints every float with 17 significant digits.
#[derive(Debug, Default)]
pub struct FixedFloatFormatter<F> {
    inner: F,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
                self.inner.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for FixedFloatFormatter<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );
}

/// Serialises to pretty JSON with fixed 17-digit floats and a trailing
/// newline. Non-finite floats become `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = FixedFloatFormatter {
        inner: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

/// Single-line JSON with fixed 17-digit floats (for JSON lines output).
pub fn to_json_line<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = FixedFloatFormatter {
        inner: serde_json::ser::CompactFormatter,
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeJson {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagJson {
    pub p: usize,
    pub edges: Vec<EdgeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variances: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
}

impl DagJson {
    pub fn new(dag: &WeightedDag, variances: Option<&DiagonalVariances>, perm: Option<&Permutation>) -> Self {
        Self {
            p: dag.p(),
            edges: dag
                .edges()
                .into_iter()
                .map(|(from, to, weight)| EdgeJson { from, to, weight })
                .collect(),
            variances: variances.map(|v| v.values().to_vec()),
            permutation: perm.map(|p| p.as_slice().to_vec()),
        }
    }

    pub fn to_dag(&self) -> Result<(WeightedDag, Option<DiagonalVariances>, Option<Permutation>)> {
        let edges: Vec<(usize, usize, f64)> = self.edges.iter().map(|e| (e.from, e.to, e.weight)).collect();
        let dag = WeightedDag::from_edges(self.p, &edges)?;
        let variances = self.variances.clone().map(DiagonalVariances::new).transpose()?;
        if let Some(v) = &variances {
            if v.len() != self.p {
                return Err(Error::DimensionMismatch {
                    expected: format!("{} variances", self.p),
                    found: v.len().to_string(),
                });
            }
        }
        let perm = self.permutation.clone().map(Permutation::new).transpose()?;
        if let Some(pi) = &perm {
            if pi.len() != self.p {
                return Err(Error::DimensionMismatch {
                    expected: format!("permutation of length {}", self.p),
                    found: pi.len().to_string(),
                });
            }
        }
        Ok((dag, variances, perm))
    }
}

/// JSON view of a fit: the DAG fields plus objective and solver metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitJson {
    pub p: usize,
    pub edges: Vec<EdgeJson>,
    pub variances: Vec<f64>,
    pub permutation: Vec<usize>,
    pub objective: f64,
    pub column_objectives: Vec<f64>,
    pub penalty: PenaltySpec,
    pub mode: FitMode,
    pub estimated_permutations: EstimatedPermutationsJson,
    pub rank_deficient: bool,
    pub multiple_optima: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedPermutationsJson {
    pub canonical: Vec<usize>,
    /// Decimal string, since the count can exceed 2^53.
    pub count: Option<String>,
    pub capped: bool,
    pub listed: Vec<Vec<usize>>,
}

impl From<&EstimatedPermutations> for EstimatedPermutationsJson {
    fn from(e: &EstimatedPermutations) -> Self {
        Self {
            canonical: e.canonical.as_slice().to_vec(),
            count: e.count.map(|c| c.to_string()),
            capped: e.capped,
            listed: e.listed.iter().map(|p| p.as_slice().to_vec()).collect(),
        }
    }
}

impl From<&FitResult> for FitJson {
    fn from(fit: &FitResult) -> Self {
        let dag = DagJson::new(&fit.b_hat, None, None);
        Self {
            p: dag.p,
            edges: dag.edges,
            variances: fit.variances_hat.clone(),
            permutation: fit.est_permutations.canonical.as_slice().to_vec(),
            objective: fit.objective,
            column_objectives: fit.column_objectives.clone(),
            penalty: fit.penalty,
            mode: fit.mode.clone(),
            estimated_permutations: (&fit.est_permutations).into(),
            rank_deficient: fit.rank_deficient,
            multiple_optima: fit.multiple_optima,
            converged: fit.converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::*;

    #[test]
    fn csv_with_and_without_header() {
        let a = read_matrix_csv("x1,x2\n1,2\n3.5,-4e-2\n".as_bytes()).unwrap();
        assert_eq!(a, Matrix::from_rows(&[[1.0, 2.0], [3.5, -0.04]]));
        let b = read_matrix_csv(" 1 , 2\n3.5,-4e-2\n\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert!(read_matrix_csv("a,b\n1,x\n".as_bytes()).is_err());
        assert!(read_matrix_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(read_matrix_csv("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = Matrix::from_rows(&[[0.1, 1.0 / 3.0], [-2.5e-300, 12345.678901234567]]);
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m, Some(&["a".into(), "b".into()])).unwrap();
        assert_eq!(read_matrix_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn json_floats_have_seventeen_digits() {
        let s = to_json_line(&vec![0.1, 1.0, f64::NAN]).unwrap();
        assert_eq!(s, "[1.0000000000000001e-1,1.0000000000000000e0,null]");
        let back: Vec<Option<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back[0], Some(0.1));
        let pretty = to_json_string(&serde_json::json!({"a": [1.5, 2]})).unwrap();
        assert_eq!(pretty, "{\n  \"a\": [\n    1.5000000000000000e0,\n    2\n  ]\n}\n");
    }

    #[test]
    fn dag_json_round_trip() {
        let (b, w) = example_dag_pi1();
        let j = DagJson::new(&b, Some(&w), Some(&example_pi1()));
        let text = to_json_string(&j).unwrap();
        let back: DagJson = serde_json::from_str(&text).unwrap();
        let (b2, w2, p2) = back.to_dag().unwrap();
        assert_eq!(b2, b);
        assert_eq!(w2.unwrap(), w);
        assert_eq!(p2.unwrap(), example_pi1());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["edges"][0]["from"], 0);
        assert!(v["edges"][0].get("weight").is_some());
    }

    #[test]
    fn dag_json_rejects_cycles() {
        let text = r#"{"p":2,"edges":[{"from":0,"to":1,"weight":1},{"from":1,"to":0,"weight":1}]}"#;
        let j: DagJson = serde_json::from_str(text).unwrap();
        assert_eq!(j.to_dag().unwrap_err(), Error::Cyclic);
    }
}
