use crate::error::{shape_err, Result};
use crate::linalg::{inverse, Mat, SymMat};
use crate::lmi::AffineMatExpr;
use crate::overestimate::{qq_lift_into_block, BilinearForm, QqOverestimate};

/// A matrix inequality `F(x) ⪯ 0` of the nonconvex problem together with a
/// way to build a convex inner approximation of it around an anchor.
pub trait MatrixConstraint: Send + Sync {
    fn name(&self) -> &str;

    /// Size of `F(x)`.
    fn dim(&self) -> usize;

    /// The true value `F(x)`.
    fn value(&self, x: &[f64]) -> SymMat;

    /// `DF(x)*W`, a vector over the decision coordinates.
    fn derivative_adjoint(&self, x: &[f64], w: &SymMat) -> Vec<f64>;

    /// An LMI block `G(x; anchor) + margin·I ⪯ 0` whose feasible set lies
    /// inside `{x : F(x) ⪯ −margin·I}` and which is exact at the anchor.
    fn inner_approximation(&self, anchor: &[f64], margin: f64) -> Result<AffineMatExpr>;

    /// The multiplier of `F` recovered from the dual of the built block.
    fn multiplier(&self, block_dual: &SymMat) -> SymMat {
        block_dual.principal(0, self.dim())
    }
}

/// An LMI that needs no approximation.
#[derive(Clone, Debug)]
pub struct LinearConstraint {
    name: String,
    expr: AffineMatExpr,
    n: usize,
}

impl LinearConstraint {
    /// `n` is the length of the decision vector.
    pub fn new(name: &str, expr: AffineMatExpr, n: usize) -> Self {
        LinearConstraint { name: name.to_string(), expr, n }
    }

    pub fn expr(&self) -> &AffineMatExpr {
        &self.expr
    }
}

impl MatrixConstraint for LinearConstraint {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.expr.dim()
    }

    fn value(&self, x: &[f64]) -> SymMat {
        self.expr.evaluate(x)
    }

    fn derivative_adjoint(&self, _x: &[f64], w: &SymMat) -> Vec<f64> {
        self.expr.adjoint_apply(w, self.n)
    }

    fn inner_approximation(&self, _anchor: &[f64], margin: f64) -> Result<AffineMatExpr> {
        Ok(self.expr.add_identity(margin))
    }
}

/// One bilinear term `𝓑_Q(X(x), Y(x))` added to the principal block of the
/// host starting at `corner`.
#[derive(Clone, Debug)]
pub struct BilinearTerm {
    pub form: BilinearForm,
    pub corner: usize,
    q_inv: Mat,
}

impl BilinearTerm {
    pub fn new(form: BilinearForm, corner: usize) -> Result<Self> {
        let q_inv = inverse(&form.kernel.to_mat())?;
        Ok(BilinearTerm { form, corner, q_inv })
    }
}

/// `F(x) = H(x) + Σₜ Eₜ 𝓑_Q(Xₜ(x), Yₜ(x)) Eₜᵀ` with `H` affine, where `Eₜ`
/// places term `t` at its corner. Each term is replaced by `𝒬_Q` at the
/// anchor and Schur-lifted.
#[derive(Clone, Debug)]
pub struct BilinearConstraint {
    name: String,
    host: AffineMatExpr,
    terms: Vec<BilinearTerm>,
    n: usize,
}

impl BilinearConstraint {
    pub fn new(name: &str, host: AffineMatExpr, terms: Vec<BilinearTerm>, n: usize) -> Result<Self> {
        for t in &terms {
            if t.corner + t.form.dim() > host.dim() {
                return shape_err(format!("bilinear term at {} does not fit in {name}", t.corner));
            }
        }
        Ok(BilinearConstraint { name: name.to_string(), host, terms, n })
    }

    pub fn host(&self) -> &AffineMatExpr {
        &self.host
    }

    pub fn terms(&self) -> &[BilinearTerm] {
        &self.terms
    }
}

impl MatrixConstraint for BilinearConstraint {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.host.dim()
    }

    fn value(&self, x: &[f64]) -> SymMat {
        let mut v = self.host.evaluate(x);
        for t in &self.terms {
            let (xv, yv) = t.form.operands_at(x);
            let b = crate::overestimate::bilinear_value(&t.q_inv, &xv, &yv);
            for i in 0..b.dim() {
                for j in i..b.dim() {
                    v.add_at(t.corner + i, t.corner + j, b.get(i, j));
                }
            }
        }
        v
    }

    fn derivative_adjoint(&self, x: &[f64], w: &SymMat) -> Vec<f64> {
        let mut g = self.host.adjoint_apply(w, self.n);
        for t in &self.terms {
            let p = t.form.dim();
            let wc = w.principal(t.corner, p).to_mat();
            let (xv, yv) = t.form.operands_at(x);
            // ∂/∂xₖ ⟨XᵀQ⁻¹Y + YᵀQ⁻¹X, W⟩ = 2⟨Xₖ, Q⁻¹YW⟩ + 2⟨Yₖ, Q⁻¹XW⟩
            let gx = t.q_inv.matmul(&yv).matmul(&wc);
            let gy = t.q_inv.matmul(&xv).matmul(&wc);
            for (&k, m) in t.form.x.terms() {
                g[k] += 2.0 * m.inner(&gx);
            }
            for (&k, m) in t.form.y.terms() {
                g[k] += 2.0 * m.inner(&gy);
            }
        }
        g
    }

    fn inner_approximation(&self, anchor: &[f64], margin: f64) -> Result<AffineMatExpr> {
        let mut block = self.host.add_identity(margin);
        for t in &self.terms {
            let o = QqOverestimate::at(&t.form, anchor)?;
            block = qq_lift_into_block(&o, &t.form, &block, t.corner)?;
        }
        Ok(block)
    }
}
