//! JSON plant files: nested row-major arrays, absent matrices are zero.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::sof::Plant;

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    #[serde(default)]
    pub name: String,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B1", default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<Rows>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Rows>,
    #[serde(rename = "C1", default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<Rows>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Rows>,
    #[serde(rename = "D11", default, skip_serializing_if = "Option::is_none")]
    pub d11: Option<Rows>,
    #[serde(rename = "D12", default, skip_serializing_if = "Option::is_none")]
    pub d12: Option<Rows>,
    #[serde(rename = "D21", default, skip_serializing_if = "Option::is_none")]
    pub d21: Option<Rows>,
}

fn parse(label: &str, rows: &Option<Rows>) -> Result<Option<Mat>> {
    match rows {
        None => Ok(None),
        Some(r) if r.is_empty() || r.iter().all(Vec::is_empty) => Ok(None),
        Some(r) => Mat::from_rows(r)
            .map(Some)
            .map_err(|_| Error::PlantFormat(format!("{label} is not a rectangular array"))),
    }
}

/// The first dimension some present matrix pins down, else zero.
fn infer(candidates: &[Option<usize>]) -> usize {
    candidates.iter().flatten().copied().next().unwrap_or(0)
}

fn rows_of(m: &Mat) -> Rows {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    m.to_rows()
}

impl PlantFile {
    pub fn to_plant(&self) -> Result<Plant> {
        let a = parse("A", &Some(self.a.clone()))?
            .ok_or_else(|| Error::PlantFormat(format!("plant {:?} has an empty A", self.name)))?;
        let b1 = parse("B1", &self.b1)?;
        let b = parse("B", &self.b)?;
        let c1 = parse("C1", &self.c1)?;
        let c = parse("C", &self.c)?;
        let d11 = parse("D11", &self.d11)?;
        let d12 = parse("D12", &self.d12)?;
        let d21 = parse("D21", &self.d21)?;

        let n = a.rows();
        let nw = infer(&[b1.as_ref().map(Mat::cols), d11.as_ref().map(Mat::cols), d21.as_ref().map(Mat::cols)]);
        let nu = infer(&[b.as_ref().map(Mat::cols), d12.as_ref().map(Mat::cols)]);
        let nz = infer(&[c1.as_ref().map(Mat::rows), d11.as_ref().map(Mat::rows), d12.as_ref().map(Mat::rows)]);
        let ny = infer(&[c.as_ref().map(Mat::rows), d21.as_ref().map(Mat::rows)]);
        let or_zero = |m: Option<Mat>, r, c| m.unwrap_or_else(|| Mat::zeros(r, c));
        Plant::new(
            &self.name,
            a,
            or_zero(b1, n, nw),
            or_zero(b, n, nu),
            or_zero(c1, nz, n),
            or_zero(c, ny, n),
            or_zero(d11, nz, nw),
            or_zero(d12, nz, nu),
            or_zero(d21, ny, nw),
        )
    }

    /// Every matrix with a nonzero size is written, zero or not.
    pub fn from_plant(p: &Plant) -> Self {
        let opt = |m: &Mat| {
            let r = rows_of(m);
            (!r.is_empty()).then_some(r)
        };
        PlantFile {
            name: p.name.clone(),
            a: p.a.to_rows(),
            b1: opt(&p.b1),
            b: opt(&p.b),
            c1: opt(&p.c1),
            c: opt(&p.c),
            d11: opt(&p.d11),
            d12: opt(&p.d12),
            d21: opt(&p.d21),
        }
    }
}

/// Reads a plant; an empty `name` is replaced by the file stem.
pub fn load_plant(path: &Path) -> Result<Plant> {
    let text = fs::read_to_string(path).map_err(|e| Error::PlantFormat(format!("{}: {e}", path.display())))?;
    let mut file: PlantFile =
        serde_json::from_str(&text).map_err(|e| Error::PlantFormat(format!("{}: {e}", path.display())))?;
    if file.name.is_empty() {
        file.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    file.to_plant()
}

pub fn save_plant(p: &Plant, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&PlantFile::from_plant(p))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
