//! JSON documents for matrices, points and lifts, deterministic float
//! output, and orbit CSV.

use crate::config::Tolerances;
use crate::dynamics::OrbitTrace;
use crate::eins::EinsHatPoint;
use crate::lift::LiftedConformal;
use crate::linalg::{classify_matrix, BasisMode, GroupElement, JordanParts, MatrixClass, QuadraticSpace};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// `{"n", "basis", "matrix"}` with row-major entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub n: usize,
    #[serde(default = "diagonal")]
    pub basis: BasisMode,
    pub matrix: Vec<Vec<f64>>,
}

fn diagonal() -> BasisMode {
    BasisMode::Diagonal
}

impl MatrixDoc {
    pub fn from_element(a: &GroupElement) -> Self {
        let m = a.mat();
        MatrixDoc {
            n: a.space().n(),
            basis: a.space().mode(),
            matrix: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
        }
    }

    pub fn to_element(&self, tol: &Tolerances) -> Result<GroupElement> {
        if self.n == 0 {
            return Err(Error::Input("n must be at least 1".into()));
        }
        let d = self.n + 3;
        if self.matrix.len() != d || self.matrix.iter().any(|r| r.len() != d) {
            return Err(Error::Input(format!("matrix must be {d}x{d} for n = {}", self.n)));
        }
        let flat: Vec<f64> = self.matrix.iter().flatten().copied().collect();
        let m = DMatrix::from_row_slice(d, d, &flat);
        GroupElement::new(QuadraticSpace::new(self.n, self.basis), m, tol.group)
    }
}

/// `{"t", "z"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDoc {
    pub t: f64,
    pub z: Vec<f64>,
}

impl PointDoc {
    pub fn from_point(p: &EinsHatPoint) -> Self {
        PointDoc { t: p.t, z: p.z.iter().copied().collect() }
    }

    pub fn to_point(&self) -> Result<EinsHatPoint> {
        EinsHatPoint::new(self.t, DVector::from_vec(self.z.clone()))
    }
}

/// `{"base", "winding"}`; the winding refers to the default anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftDoc {
    pub base: MatrixDoc,
    pub winding: i64,
}

impl LiftDoc {
    /// The base is written in the diagonal basis the lift works in.
    pub fn from_lift(l: &LiftedConformal) -> Self {
        LiftDoc { base: MatrixDoc::from_element(l.base()), winding: l.winding() }
    }

    pub fn to_lift(&self, tol: &Tolerances) -> Result<LiftedConformal> {
        LiftedConformal::lift(&self.base.to_element(tol)?, self.winding)
    }
}

/// A labelled lift, as emitted for the worked examples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedLift {
    pub name: String,
    pub lift: LiftDoc,
}

/// Factors, residuals, classes and warnings of a Jordan decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct JordanDoc {
    pub class: MatrixClass,
    pub elliptic: FactorDoc,
    pub hyperbolic: FactorDoc,
    pub parabolic: FactorDoc,
    pub reconstruction_residual: f64,
    pub commutator_residual: f64,
    pub semisimple_defect: f64,
    pub cluster_tol: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorDoc {
    pub class: MatrixClass,
    pub matrix: MatrixDoc,
}

impl JordanDoc {
    pub fn new(a: &GroupElement, parts: &JordanParts, tol: &Tolerances) -> Result<Self> {
        let factor = |g: &GroupElement| -> Result<FactorDoc> {
            Ok(FactorDoc { class: classify_matrix(g, tol)?, matrix: MatrixDoc::from_element(g) })
        };
        Ok(JordanDoc {
            class: classify_matrix(a, tol)?,
            elliptic: factor(&parts.elliptic)?,
            hyperbolic: factor(&parts.hyperbolic)?,
            parabolic: factor(&parts.parabolic)?,
            reconstruction_residual: parts.reconstruction_residual,
            commutator_residual: parts.commutator_residual,
            semisimple_defect: parts.semisimple_defect,
            cluster_tol: parts.cluster_tol,
            warnings: parts.warnings.clone(),
        })
    }
}

/// Writes every float as `{:.16e}` (17 significant digits); key order is
/// declaration order, so output is byte-stable.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedFloat;

impl serde_json::ser::Formatter for FixedFloat {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }
}

/// Compact single-line JSON with fixed float formatting.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloat);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Input(format!("schema violation: {e}")))
}

/// Header `k,t,z0,..,zn` and one row per iterate.
pub fn orbit_csv(trace: &OrbitTrace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let dim = trace.points.first().map_or(0, |p| p.z.len());
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend((0..dim).map(|i| format!("z{i}")));
    w.write_record(&header).expect("writing to memory");
    for (k, p) in trace.points.iter().enumerate() {
        let mut row = vec![k.to_string(), format!("{:.16e}", p.t)];
        row.extend(p.z.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("CSV is UTF-8")
}
