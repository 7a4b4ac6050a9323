//! Psd-convex overestimators of nonconvex matrix mappings.
//!
//! The main tool is the parametric quadratic form for the bilinear mapping
//! `𝓑_Q(X, Y) = XᵀQ⁻¹Y + YᵀQ⁻¹X`:
//!
//! ```text
//! 𝒬_Q(X, Y; X̄, Ȳ) = (X−X̄)ᵀQ₁⁻¹(X−X̄) + (Y−Ȳ)ᵀQ₂⁻¹(Y−Ȳ)
//!                  + X̄ᵀQ⁻¹Y + ȲᵀQ⁻¹X + XᵀQ⁻¹Ȳ + YᵀQ⁻¹X̄ − X̄ᵀQ⁻¹Ȳ − ȲᵀQ⁻¹X̄
//! ```
//!
//! with `Q₁ + Q₂ = Q`, `Q₁, Q₂ ≻ 0`. It touches `𝓑_Q` at `(X̄, Ȳ)` and
//! dominates it in the Loewner order everywhere. The quadratic terms are
//! turned into an LMI by [`qq_lift_into_block`].
//!
//! A second construction linearises the concave part of a difference of
//! psd-convex mappings ([`CcOverestimate`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Error, Result};
use crate::linalg::{inverse, min_eig, sqrt_and_inv_sqrt, Mat, SymMat};
use crate::lmi::{AffineMatExpr, AffineRect};

/// `M + Mᵀ`.
fn sym2(m: &Mat) -> SymMat {
    SymMat::symmetrize(m).expect("square").scale(2.0)
}

/// `XᵀQ⁻¹Y + YᵀQ⁻¹X` for a given `Q⁻¹`.
pub fn bilinear_value(q_inv: &Mat, x: &Mat, y: &Mat) -> SymMat {
    sym2(&x.transpose().matmul(q_inv).matmul(y))
}

/// The bilinear mapping `𝓑_Q(X(x), Y(x))` with affine operands.
#[derive(Clone, Debug)]
pub struct BilinearForm {
    pub x: AffineRect,
    pub y: AffineRect,
    pub kernel: SymMat,
}

impl BilinearForm {
    pub fn new(x: AffineRect, y: AffineRect, kernel: SymMat) -> Result<Self> {
        if x.shape() != y.shape() {
            return shape_err(format!("operands are {:?} and {:?}", x.shape(), y.shape()));
        }
        if kernel.dim() != x.rows() {
            return shape_err(format!("kernel is {0}x{0}, operands have {1} rows", kernel.dim(), x.rows()));
        }
        if min_eig(&kernel)? <= 0.0 {
            return Err(Error::Precondition("kernel Q must be positive definite".into()));
        }
        Ok(BilinearForm { x, y, kernel })
    }

    /// Identity kernel, as in `AᵀP + PA = 𝓑_I(A, P)`.
    pub fn identity_kernel(x: AffineRect, y: AffineRect) -> Result<Self> {
        let n = x.rows();
        BilinearForm::new(x, y, SymMat::identity(n))
    }

    /// Output dimension `p`.
    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn operands_at(&self, x: &[f64]) -> (Mat, Mat) {
        (self.x.evaluate(x), self.y.evaluate(x))
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<SymMat> {
        let (xv, yv) = self.operands_at(x);
        Ok(bilinear_value(&inverse(&self.kernel.to_mat())?, &xv, &yv))
    }
}

/// `𝒬_Q(·, ·; X̄, Ȳ)` for one anchor, with the kernel data cached.
#[derive(Clone, Debug)]
pub struct QqOverestimate {
    q: SymMat,
    q1: SymMat,
    q2: SymMat,
    q_inv: Mat,
    q1_inv: Mat,
    q2_inv: Mat,
    q1_inv_sqrt: Mat,
    q2_inv_sqrt: Mat,
    x_bar: Mat,
    y_bar: Mat,
}

impl QqOverestimate {
    /// Checks `Q₁, Q₂ ≻ 0` and `Q₁ + Q₂ = Q`.
    pub fn new(q: &SymMat, q1: &SymMat, q2: &SymMat, x_bar: Mat, y_bar: Mat) -> Result<Self> {
        let split = q1.add(q2).sub(q).max_abs();
        if split > 1e-12 * (1.0 + q.max_abs()) {
            return Err(Error::Precondition(format!("Q1 + Q2 differs from Q by {split:e}")));
        }
        QqOverestimate::with_split_unchecked(q, q1, q2, x_bar, y_bar)
    }

    /// Default split `Q₁ = Q₂ = Q/2`.
    pub fn half_split(q: &SymMat, x_bar: Mat, y_bar: Mat) -> Result<Self> {
        let h = q.scale(0.5);
        QqOverestimate::new(q, &h, &h, x_bar, y_bar)
    }

    /// Like [`QqOverestimate::new`] but skips the `Q₁ + Q₂ = Q` check, so
    /// that diagnostics can be exercised on a deliberately wrong split.
    pub fn with_split_unchecked(
        q: &SymMat,
        q1: &SymMat,
        q2: &SymMat,
        x_bar: Mat,
        y_bar: Mat,
    ) -> Result<Self> {
        let n = q.dim();
        if q1.dim() != n || q2.dim() != n {
            return shape_err("kernel split dimensions differ");
        }
        if x_bar.shape() != y_bar.shape() || x_bar.rows() != n {
            return shape_err(format!(
                "anchors {:?} and {:?} against a {n}x{n} kernel",
                x_bar.shape(),
                y_bar.shape()
            ));
        }
        let (_, q1_is) = sqrt_and_inv_sqrt(q1)?;
        let (_, q2_is) = sqrt_and_inv_sqrt(q2)?;
        let q1_is = q1_is.to_mat();
        let q2_is = q2_is.to_mat();
        Ok(QqOverestimate {
            q: q.clone(),
            q1: q1.clone(),
            q2: q2.clone(),
            q_inv: inverse(&q.to_mat())?,
            q1_inv: q1_is.matmul(&q1_is),
            q2_inv: q2_is.matmul(&q2_is),
            q1_inv_sqrt: q1_is,
            q2_inv_sqrt: q2_is,
            x_bar,
            y_bar,
        })
    }

    /// Anchors `(X̄, Ȳ) = (X(x̄), Y(x̄))` of a bilinear form with the default split.
    pub fn at(form: &BilinearForm, anchor: &[f64]) -> Result<Self> {
        let (xb, yb) = form.operands_at(anchor);
        QqOverestimate::half_split(&form.kernel, xb, yb)
    }

    pub fn kernel(&self) -> &SymMat {
        &self.q
    }

    pub fn split(&self) -> (&SymMat, &SymMat) {
        (&self.q1, &self.q2)
    }

    pub fn anchor(&self) -> (&Mat, &Mat) {
        (&self.x_bar, &self.y_bar)
    }

    /// The exact bilinear value `𝓑_Q(X, Y)`.
    pub fn exact(&self, x: &Mat, y: &Mat) -> SymMat {
        bilinear_value(&self.q_inv, x, y)
    }

    /// The linear (affine) part `X̄ᵀQ⁻¹Y + ȲᵀQ⁻¹X + (transposes) − 𝓑_Q(X̄, Ȳ)`.
    pub fn linear_part(&self, x: &Mat, y: &Mat) -> SymMat {
        let xb_t = self.x_bar.transpose();
        let yb_t = self.y_bar.transpose();
        let mut l = sym2(&xb_t.matmul(&self.q_inv).matmul(y));
        l.axpy(1.0, &sym2(&yb_t.matmul(&self.q_inv).matmul(x)));
        l.axpy(-1.0, &sym2(&xb_t.matmul(&self.q_inv).matmul(&self.y_bar)));
        l
    }

    fn check_shape(&self, x: &Mat, y: &Mat) -> Result<()> {
        if x.shape() != self.x_bar.shape() || y.shape() != self.y_bar.shape() {
            return shape_err(format!(
                "operands {:?}, {:?} against anchor {:?}",
                x.shape(),
                y.shape(),
                self.x_bar.shape()
            ));
        }
        Ok(())
    }
}

/// Value of `𝒬_Q(X, Y; X̄, Ȳ)`.
pub fn qq_evaluate(o: &QqOverestimate, x: &Mat, y: &Mat) -> Result<SymMat> {
    o.check_shape(x, y)?;
    let dx = x - &o.x_bar;
    let dy = y - &o.y_bar;
    let mut v = SymMat::symmetrize(&dx.transpose().matmul(&o.q1_inv).matmul(&dx))?;
    v.axpy(1.0, &SymMat::symmetrize(&dy.transpose().matmul(&o.q2_inv).matmul(&dy))?);
    v.axpy(1.0, &o.linear_part(x, y));
    Ok(v)
}

/// Enlarges `host ⪯ 0`, whose principal block at `corner` receives
/// `𝒬_Q(X(x), Y(x))`, into the LMI
///
/// ```text
/// [ host + L(x)   U₁ᵀ   U₂ᵀ ]
/// [ U₁            −I    0   ]  ⪯ 0,   U₁ = Q₁^{-1/2}(X(x) − X̄),  U₂ = Q₂^{-1/2}(Y(x) − Ȳ),
/// [ U₂            0     −I  ]
/// ```
///
/// where `L` is the affine part of `𝒬_Q`. The new rows are appended after
/// the host's rows: the result has size `host.dim() + 2n`.
pub fn qq_lift_into_block(
    o: &QqOverestimate,
    form: &BilinearForm,
    host: &AffineMatExpr,
    corner: usize,
) -> Result<AffineMatExpr> {
    let (n, p) = form.x.shape();
    if (n, p) != o.x_bar.shape() {
        return shape_err("form and overestimate anchors disagree");
    }
    if corner + p > host.dim() {
        return shape_err(format!("corner {corner}+{p} outside a block of size {}", host.dim()));
    }
    let ph = host.dim();
    let dim = ph + 2 * n;

    // affine part, placed in the corner
    let m = form
        .y
        .left_mul(&o.x_bar.transpose().matmul(&o.q_inv))?
        .add(&form.x.left_mul(&o.y_bar.transpose().matmul(&o.q_inv))?)
        .add_constant(&o.x_bar.transpose().matmul(&o.q_inv).matmul(&o.y_bar).scale(-1.0));
    let lin = AffineMatExpr::sym_of(&m.pad(dim, dim, corner, corner)?)?;

    // U₁ and U₂ in the off-diagonal positions; sym_of mirrors them
    let u1 = form.x.add_constant(&-&o.x_bar).left_mul(&o.q1_inv_sqrt)?;
    let u2 = form.y.add_constant(&-&o.y_bar).left_mul(&o.q2_inv_sqrt)?;
    let off = AffineMatExpr::sym_of(&u1.pad(dim, dim, ph, corner)?)?
        .add(&AffineMatExpr::sym_of(&u2.pad(dim, dim, ph + n, corner)?)?);

    let mut minus_i = SymMat::zeros(dim);
    for i in ph..dim {
        minus_i.set(i, i, -1.0);
    }
    Ok(host.embed(dim, 0)?.add(&lin).add(&off).add_constant(&minus_i))
}

type MapFn = dyn Fn(&[f64]) -> SymMat + Send + Sync;
type DerivFn = dyn Fn(&[f64]) -> Vec<SymMat> + Send + Sync;

/// Matrix-valued mapping with an optional derivative, given as partials
/// `∂G/∂xᵢ`.
pub struct MatrixMapping {
    dim_in: usize,
    dim_out: usize,
    value: Box<MapFn>,
    derivative: Option<Box<DerivFn>>,
}

impl MatrixMapping {
    pub fn new(
        dim_in: usize,
        dim_out: usize,
        value: impl Fn(&[f64]) -> SymMat + Send + Sync + 'static,
    ) -> Self {
        MatrixMapping { dim_in, dim_out, value: Box::new(value), derivative: None }
    }

    pub fn with_derivative(
        mut self,
        derivative: impl Fn(&[f64]) -> Vec<SymMat> + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Some(Box::new(derivative));
        self
    }

    /// The zero mapping.
    pub fn zero(dim_in: usize, dim_out: usize) -> Self {
        MatrixMapping::new(dim_in, dim_out, move |_| SymMat::zeros(dim_out))
            .with_derivative(move |_| vec![SymMat::zeros(dim_out); dim_in])
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn value(&self, x: &[f64]) -> SymMat {
        (self.value)(x)
    }

    pub fn derivative(&self, x: &[f64]) -> Result<Vec<SymMat>> {
        match &self.derivative {
            Some(d) => Ok(d(x)),
            None => Err(Error::Precondition("derivative unavailable".into())),
        }
    }
}

impl std::fmt::Debug for MatrixMapping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MatrixMapping({} -> {0}x{0})", self.dim_out)
    }
}

/// `𝓗(x; x̄) = G₁(x) − [G₂(x̄) + DG₂(x̄)(x − x̄)]` for `G = G₁ − G₂` with
/// both parts psd-convex.
#[derive(Debug)]
pub struct CcOverestimate<'a> {
    cvx1: &'a MatrixMapping,
    anchor: Vec<f64>,
    g2_anchor: SymMat,
    d2_anchor: Vec<SymMat>,
}

impl<'a> CcOverestimate<'a> {
    pub fn new(cvx1: &'a MatrixMapping, cvx2: &MatrixMapping, anchor: &[f64]) -> Result<Self> {
        if cvx1.dim_in != cvx2.dim_in || cvx1.dim_out != cvx2.dim_out || anchor.len() != cvx1.dim_in {
            return shape_err("mapping dimensions disagree");
        }
        let d2 = cvx2.derivative(anchor)?;
        if d2.len() != anchor.len() {
            return shape_err("derivative has the wrong number of partials");
        }
        Ok(CcOverestimate {
            cvx1,
            anchor: anchor.to_vec(),
            g2_anchor: cvx2.value(anchor),
            d2_anchor: d2,
        })
    }
}

/// Value of the convex-concave overestimate at `x`.
pub fn cc_evaluate(o: &CcOverestimate, x: &[f64]) -> Result<SymMat> {
    if x.len() != o.anchor.len() {
        return shape_err("point dimension mismatch");
    }
    let mut v = o.cvx1.value(x);
    v.axpy(-1.0, &o.g2_anchor);
    for (i, d) in o.d2_anchor.iter().enumerate() {
        v.axpy(-(x[i] - o.anchor[i]), d);
    }
    Ok(v)
}

/// A mapping `F` together with an overestimate family `G(·; y)`, over a
/// flat point space of dimension [`OverestimateFamily::dim`].
pub trait OverestimateFamily {
    fn dim(&self) -> usize;
    fn exact(&self, z: &[f64]) -> SymMat;
    /// `G(z; ψ(anchor))`.
    fn over(&self, z: &[f64], anchor: &[f64]) -> SymMat;
}

/// `𝒬_Q` over points `z = (vec X, vec Y)` (row-major).
#[derive(Clone, Debug)]
pub struct QqFamily {
    q: SymMat,
    q1: SymMat,
    q2: SymMat,
    rows: usize,
    cols: usize,
    q_inv: Mat,
}

impl QqFamily {
    /// The split is not checked; see [`QqOverestimate::with_split_unchecked`].
    pub fn new(q: SymMat, q1: SymMat, q2: SymMat, cols: usize) -> Result<Self> {
        let rows = q.dim();
        let q_inv = inverse(&q.to_mat())?;
        sqrt_and_inv_sqrt(&q1)?;
        sqrt_and_inv_sqrt(&q2)?;
        Ok(QqFamily { q, q1, q2, rows, cols, q_inv })
    }

    fn split_point(&self, z: &[f64]) -> (Mat, Mat) {
        let k = self.rows * self.cols;
        (
            Mat::from_row_slice(self.rows, self.cols, &z[..k]).expect("length"),
            Mat::from_row_slice(self.rows, self.cols, &z[k..]).expect("length"),
        )
    }
}

impl OverestimateFamily for QqFamily {
    fn dim(&self) -> usize {
        2 * self.rows * self.cols
    }

    fn exact(&self, z: &[f64]) -> SymMat {
        let (x, y) = self.split_point(z);
        bilinear_value(&self.q_inv, &x, &y)
    }

    fn over(&self, z: &[f64], anchor: &[f64]) -> SymMat {
        let (xb, yb) = self.split_point(anchor);
        let (x, y) = self.split_point(z);
        let o = QqOverestimate::with_split_unchecked(&self.q, &self.q1, &self.q2, xb, yb)
            .expect("validated on construction");
        qq_evaluate(&o, &x, &y).expect("shapes fixed by the family")
    }
}

/// `G = G₁ − G₂` with the convex-concave overestimate.
#[derive(Debug)]
pub struct CcFamily {
    pub cvx1: MatrixMapping,
    pub cvx2: MatrixMapping,
}

impl OverestimateFamily for CcFamily {
    fn dim(&self) -> usize {
        self.cvx1.dim_in()
    }

    fn exact(&self, z: &[f64]) -> SymMat {
        self.cvx1.value(z).sub(&self.cvx2.value(z))
    }

    fn over(&self, z: &[f64], anchor: &[f64]) -> SymMat {
        let o = CcOverestimate::new(&self.cvx1, &self.cvx2, anchor).expect("derivative required");
        cc_evaluate(&o, z).expect("dimension fixed by the family")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverestimateReport {
    /// `min λ_min(G(z; ψ(x)) − F(z))` over the samples.
    pub min_gap_eig: f64,
    /// The same gap divided by `1 + ‖F(z)‖_F`.
    pub min_scaled_gap: f64,
    /// `max ‖G(x; ψ(x)) − F(x)‖_F` over the sampled anchors.
    pub anchor_residual: f64,
}

/// Samples random points and anchors uniformly in `[-1, 1]ᵈ` and reports
/// the worst dominance gap and anchor mismatch.
pub fn verify_overestimate(
    family: &dyn OverestimateFamily,
    samples: usize,
    seed: u64,
) -> OverestimateReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = family.dim();
    let mut report = OverestimateReport {
        min_gap_eig: f64::INFINITY,
        min_scaled_gap: f64::INFINITY,
        anchor_residual: 0.0,
    };
    for _ in 0..samples {
        let anchor: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f_anchor = family.exact(&anchor);
        let res = family.over(&anchor, &anchor).sub(&f_anchor).frobenius_norm();
        report.anchor_residual = report.anchor_residual.max(res);
        let fz = family.exact(&z);
        let gap = min_eig(&family.over(&z, &anchor).sub(&fz)).unwrap_or(f64::NEG_INFINITY);
        report.min_gap_eig = report.min_gap_eig.min(gap);
        report.min_scaled_gap = report.min_scaled_gap.min(gap / (1.0 + fz.frobenius_norm()));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_example() {
        // Q = 2, Q1 = Q2 = 1, anchors 0, X = Y = 1
        let o = QqOverestimate::new(
            &SymMat::diag(&[2.0]),
            &SymMat::diag(&[1.0]),
            &SymMat::diag(&[1.0]),
            Mat::zeros(1, 1),
            Mat::zeros(1, 1),
        )
        .unwrap();
        let one = Mat::diag(&[1.0]);
        let v = qq_evaluate(&o, &one, &one).unwrap();
        assert!((v.get(0, 0) - 2.0).abs() < 1e-15);
        assert!((o.exact(&one, &one).get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn split_is_checked() {
        let q = SymMat::identity(2);
        let bad = QqOverestimate::new(&q, &q.scale(0.25), &q.scale(0.25), Mat::zeros(2, 1), Mat::zeros(2, 1));
        assert!(matches!(bad, Err(Error::Precondition(_))));
        let indefinite =
            QqOverestimate::new(&q, &q.scale(1.5), &q.scale(-0.5), Mat::zeros(2, 1), Mat::zeros(2, 1));
        assert!(indefinite.is_err());
    }

    #[test]
    fn shape_mismatch_reported() {
        let q = SymMat::identity(2);
        let o = QqOverestimate::half_split(&q, Mat::zeros(2, 1), Mat::zeros(2, 1)).unwrap();
        assert!(qq_evaluate(&o, &Mat::zeros(2, 2), &Mat::zeros(2, 1)).is_err());
    }

    #[test]
    fn cc_zero_concave_part_is_exact() {
        let cvx1 = MatrixMapping::new(1, 2, |x| SymMat::identity(2).scale(x[0] * x[0]));
        let cvx2 = MatrixMapping::zero(1, 2);
        let o = CcOverestimate::new(&cvx1, &cvx2, &[0.3]).unwrap();
        for x in [-2.0, 0.0, 1.7] {
            let h = cc_evaluate(&o, &[x]).unwrap();
            assert!((h.get(0, 0) - x * x).abs() < 1e-15);
        }
    }

    #[test]
    fn cc_missing_derivative() {
        let cvx1 = MatrixMapping::zero(1, 1);
        let cvx2 = MatrixMapping::new(1, 1, |x| SymMat::diag(&[x[0] * x[0]]));
        assert!(matches!(CcOverestimate::new(&cvx1, &cvx2, &[1.0]), Err(Error::Precondition(_))));
    }
}
