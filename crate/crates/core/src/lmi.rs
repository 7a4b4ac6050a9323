//! Decision variables, affine matrix expressions and block LMI problems.
//!
//! Variables are declared on a [`VarSet`], which fixes their position in the
//! flat decision vector: scalars take one slot, rectangular matrices take
//! `rows·cols` slots in row-major order and symmetric matrices take
//! `n(n+1)/2` slots in [`svec`](crate::linalg::svec) order. Because symmetric
//! variables use the `√2`-scaled packing, the Euclidean norm of the decision
//! vector equals the Frobenius norm of the matrices it encodes.
//!
//! ```
//! use innerconvex::lmi::{AffineMatExpr, SdpProblem, VarSet};
//! use innerconvex::linalg::SymMat;
//!
//! let mut vars = VarSet::new();
//! let t = vars.scalar("t");
//! // [1 - t] ⪯ 0
//! let block = AffineMatExpr::from_sym_rect(&t.expr().scale(-1.0))
//!     .unwrap()
//!     .add_constant(&SymMat::identity(1));
//! let p = SdpProblem::assemble(vars.vars(), &t.expr(), vec![block]).unwrap();
//! assert_eq!(p.n_vars(), 1);
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{svec_index, Mat, SymMat};

static NEXT_VAR_ID: AtomicUsize = AtomicUsize::new(0);

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Scalar,
    Matrix { rows: usize, cols: usize },
    Symmetric { dim: usize },
}

impl VarKind {
    pub fn len(&self) -> usize {
        match *self {
            VarKind::Scalar => 1,
            VarKind::Matrix { rows, cols } => rows * cols,
            VarKind::Symmetric { dim } => dim * (dim + 1) / 2,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match *self {
            VarKind::Scalar => (1, 1),
            VarKind::Matrix { rows, cols } => (rows, cols),
            VarKind::Symmetric { dim } => (dim, dim),
        }
    }
}

/// Handle to a declared decision variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarRef {
    id: usize,
    name: String,
    kind: VarKind,
    offset: usize,
}

impl VarRef {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> VarKind {
        self.kind
    }

    /// First coordinate in the decision vector.
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.kind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    /// The variable itself as an affine expression.
    pub fn expr(&self) -> AffineRect {
        let (rows, cols) = self.kind.shape();
        let mut e = AffineRect::zeros(rows, cols);
        e.vars.insert(self.id);
        match self.kind {
            VarKind::Scalar => {
                e.terms.insert(self.offset, Mat::identity(1));
            }
            VarKind::Matrix { rows, cols } => {
                for i in 0..rows {
                    for j in 0..cols {
                        let mut m = Mat::zeros(rows, cols);
                        m[(i, j)] = 1.0;
                        e.terms.insert(self.offset + i * cols + j, m);
                    }
                }
            }
            VarKind::Symmetric { dim } => {
                for j in 0..dim {
                    for i in j..dim {
                        let mut m = Mat::zeros(dim, dim);
                        if i == j {
                            m[(i, i)] = 1.0;
                        } else {
                            m[(i, j)] = SQRT_HALF;
                            m[(j, i)] = SQRT_HALF;
                        }
                        e.terms.insert(self.offset + svec_index(dim, i, j), m);
                    }
                }
            }
        }
        e
    }

    /// Reads the variable's matrix value out of a decision vector.
    pub fn value(&self, x: &[f64]) -> Mat {
        let s = &x[self.range()];
        match self.kind {
            VarKind::Scalar => Mat::diag(&[s[0]]),
            VarKind::Matrix { rows, cols } => {
                Mat::from_row_slice(rows, cols, s).expect("variable length")
            }
            VarKind::Symmetric { dim } => {
                crate::linalg::smat(s).expect("triangular length").to_mat().block(0, 0, dim, dim)
            }
        }
    }

    pub fn scalar_value(&self, x: &[f64]) -> f64 {
        x[self.offset]
    }

    /// Writes a matrix value into a decision vector. Symmetric variables
    /// read the lower triangle of `value`.
    pub fn pack(&self, value: &Mat, x: &mut [f64]) -> Result<()> {
        if value.shape() != self.kind.shape() {
            return shape_err(format!(
                "value for {} is {}x{}, expected {:?}",
                self.name,
                value.rows(),
                value.cols(),
                self.kind.shape()
            ));
        }
        match self.kind {
            VarKind::Scalar | VarKind::Matrix { .. } => {
                x[self.range()].copy_from_slice(value.data());
            }
            VarKind::Symmetric { dim } => {
                for j in 0..dim {
                    for i in j..dim {
                        let v = if i == j {
                            value[(i, i)]
                        } else {
                            std::f64::consts::SQRT_2 * value[(i, j)]
                        };
                        x[self.offset + svec_index(dim, i, j)] = v;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Declares variables in order and assigns their decision-vector slots.
#[derive(Clone, Debug, Default)]
pub struct VarSet {
    vars: Vec<VarRef>,
    next: usize,
}

impl VarSet {
    pub fn new() -> Self {
        VarSet::default()
    }

    fn declare(&mut self, name: &str, kind: VarKind) -> VarRef {
        let v = VarRef {
            id: NEXT_VAR_ID.fetch_add(1, Ordering::Relaxed),
            name: name.to_string(),
            kind,
            offset: self.next,
        };
        self.next += kind.len();
        self.vars.push(v.clone());
        v
    }

    pub fn scalar(&mut self, name: &str) -> VarRef {
        self.declare(name, VarKind::Scalar)
    }

    pub fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<VarRef> {
        if rows == 0 || cols == 0 {
            return shape_err(format!("variable {name} has a zero dimension"));
        }
        Ok(self.declare(name, VarKind::Matrix { rows, cols }))
    }

    pub fn symmetric(&mut self, name: &str, dim: usize) -> Result<VarRef> {
        if dim == 0 {
            return shape_err(format!("variable {name} has a zero dimension"));
        }
        Ok(self.declare(name, VarKind::Symmetric { dim }))
    }

    /// Total length of the decision vector.
    pub fn dim(&self) -> usize {
        self.next
    }

    pub fn vars(&self) -> &[VarRef] {
        &self.vars
    }

    pub fn by_name(&self, name: &str) -> Option<&VarRef> {
        self.vars.iter().find(|v| v.name == name)
    }
}

/// Rectangular matrix that is affine in the decision vector:
/// `constant + Σₖ xₖ·Mₖ`.
#[derive(Clone, PartialEq)]
pub struct AffineRect {
    rows: usize,
    cols: usize,
    constant: Mat,
    terms: BTreeMap<usize, Mat>,
    vars: BTreeSet<usize>,
}

impl AffineRect {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        AffineRect::constant(Mat::zeros(rows, cols))
    }

    pub fn constant(m: Mat) -> Self {
        AffineRect {
            rows: m.rows(),
            cols: m.cols(),
            constant: m,
            terms: BTreeMap::new(),
            vars: BTreeSet::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn constant_part(&self) -> &Mat {
        &self.constant
    }

    pub fn terms(&self) -> &BTreeMap<usize, Mat> {
        &self.terms
    }

    pub fn var_ids(&self) -> &BTreeSet<usize> {
        &self.vars
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    fn map(&self, rows: usize, cols: usize, f: impl Fn(&Mat) -> Mat) -> AffineRect {
        AffineRect {
            rows,
            cols,
            constant: f(&self.constant),
            terms: self.terms.iter().map(|(&k, m)| (k, f(m))).collect(),
            vars: self.vars.clone(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Mat {
        let mut out = self.constant.clone();
        for (&k, m) in &self.terms {
            if x[k] != 0.0 {
                out.axpy(x[k], m);
            }
        }
        out
    }

    pub fn try_add(&self, other: &AffineRect) -> Result<AffineRect> {
        if self.shape() != other.shape() {
            return shape_err(format!(
                "cannot add {:?} and {:?} expressions",
                self.shape(),
                other.shape()
            ));
        }
        let mut out = self.clone();
        out.constant.axpy(1.0, &other.constant);
        for (&k, m) in &other.terms {
            out.terms
                .entry(k)
                .and_modify(|e| e.axpy(1.0, m))
                .or_insert_with(|| m.clone());
        }
        out.vars.extend(other.vars.iter().copied());
        Ok(out)
    }

    /// Panics on a shape mismatch; see [`AffineRect::try_add`].
    pub fn add(&self, other: &AffineRect) -> AffineRect {
        self.try_add(other).expect("affine add shape mismatch")
    }

    pub fn sub(&self, other: &AffineRect) -> AffineRect {
        self.add(&other.scale(-1.0))
    }

    pub fn add_constant(&self, m: &Mat) -> AffineRect {
        let mut out = self.clone();
        out.constant.axpy(1.0, m);
        out
    }

    pub fn scale(&self, alpha: f64) -> AffineRect {
        self.map(self.rows, self.cols, |m| m.scale(alpha))
    }

    /// `M · self`.
    pub fn left_mul(&self, m: &Mat) -> Result<AffineRect> {
        if m.cols() != self.rows {
            return shape_err(format!(
                "left factor {}x{} against {:?}",
                m.rows(),
                m.cols(),
                self.shape()
            ));
        }
        Ok(self.map(m.rows(), self.cols, |c| m.matmul(c)))
    }

    /// `self · M`.
    pub fn right_mul(&self, m: &Mat) -> Result<AffineRect> {
        if m.rows() != self.cols {
            return shape_err(format!(
                "right factor {}x{} against {:?}",
                m.rows(),
                m.cols(),
                self.shape()
            ));
        }
        Ok(self.map(self.rows, m.cols(), |c| c.matmul(m)))
    }

    pub fn transpose(&self) -> AffineRect {
        self.map(self.cols, self.rows, Mat::transpose)
    }

    /// For a 1×1 expression `s`, the expression `s·M`.
    pub fn times_matrix(&self, m: &Mat) -> Result<AffineRect> {
        if self.shape() != (1, 1) {
            return shape_err(format!("times_matrix needs a 1x1 expression, got {:?}", self.shape()));
        }
        Ok(self.map(m.rows(), m.cols(), |c| m.scale(c[(0, 0)])))
    }

    /// Trace of a square expression, as a 1×1 expression.
    pub fn trace(&self) -> Result<AffineRect> {
        if self.rows != self.cols {
            return shape_err("trace of a non-square expression");
        }
        Ok(self.map(1, 1, |c| Mat::diag(&[c.trace()])))
    }

    /// Zero-pads into a `rows × cols` expression with `self` at `(r0, c0)`.
    pub fn pad(&self, rows: usize, cols: usize, r0: usize, c0: usize) -> Result<AffineRect> {
        if r0 + self.rows > rows || c0 + self.cols > cols {
            return shape_err("padding does not fit");
        }
        Ok(self.map(rows, cols, |c| {
            let mut m = Mat::zeros(rows, cols);
            m.set_block(r0, c0, c);
            m
        }))
    }

    /// Coefficient vector `c` with `self = constant + cᵀx` for a 1×1 expression.
    pub fn linear_coefficients(&self, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; n];
        for (&k, m) in &self.terms {
            c[k] += m.data().iter().sum::<f64>();
        }
        c
    }
}

impl fmt::Debug for AffineRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineRect")
            .field("shape", &self.shape())
            .field("coords", &self.terms.keys().collect::<Vec<_>>())
            .finish()
    }
}

/// Upper-triangle sparse storage of a symmetric coefficient matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn from_sym(s: &SymMat) -> Self {
        let n = s.dim();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = s.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        SparseSym { dim: n, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored `(i, j, v)` with `i ≤ j`.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_sym(&self) -> SymMat {
        let mut s = SymMat::zeros(self.dim);
        self.add_into(&mut s, 1.0);
        s
    }

    pub fn add_into(&self, s: &mut SymMat, alpha: f64) {
        for &(i, j, v) in &self.entries {
            s.add_at(i, j, alpha * v);
        }
    }

    /// `self ∘ W`.
    pub fn inner(&self, w: &SymMat) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * w.get(i, i) } else { 2.0 * v * w.get(i, j) })
            .sum()
    }
}

/// Symmetric matrix affine in the decision vector:
/// `F(x) = F₀ + Σₖ xₖ·Aₖ` with every `Aₖ` symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMatExpr {
    dim: usize,
    constant: SymMat,
    terms: BTreeMap<usize, SparseSym>,
    vars: BTreeSet<usize>,
}

impl AffineMatExpr {
    pub fn constant(c: SymMat) -> Self {
        AffineMatExpr { dim: c.dim(), constant: c, terms: BTreeMap::new(), vars: BTreeSet::new() }
    }

    pub fn zeros(dim: usize) -> Self {
        AffineMatExpr::constant(SymMat::zeros(dim))
    }

    /// Builds from explicit coefficients; used mainly by tests.
    pub fn from_parts(constant: SymMat, terms: Vec<(usize, SymMat)>) -> Result<Self> {
        let mut e = AffineMatExpr::constant(constant);
        for (k, s) in terms {
            if s.dim() != e.dim {
                return shape_err("coefficient dimension mismatch");
            }
            e.add_term(k, &s, 1.0);
        }
        Ok(e)
    }

    /// `(R + Rᵀ)/2` for a square affine expression `R`.
    pub fn from_sym_rect(r: &AffineRect) -> Result<Self> {
        if r.rows != r.cols {
            return shape_err(format!("symmetric part of a {:?} expression", r.shape()));
        }
        let half = |m: &Mat| SymMat::symmetrize(m).expect("square");
        let mut e = AffineMatExpr::constant(half(&r.constant));
        for (&k, m) in &r.terms {
            e.add_term(k, &half(m), 1.0);
        }
        e.vars = r.vars.clone();
        Ok(e)
    }

    /// `R + Rᵀ` for a square affine expression `R`.
    pub fn sym_of(r: &AffineRect) -> Result<Self> {
        Ok(AffineMatExpr::from_sym_rect(r)?.scale(2.0))
    }

    fn add_term(&mut self, k: usize, s: &SymMat, alpha: f64) {
        let merged = match self.terms.get(&k) {
            Some(cur) => {
                let mut d = cur.to_sym();
                d.axpy(alpha, s);
                d
            }
            None => s.scale(alpha),
        };
        let sp = SparseSym::from_sym(&merged);
        if sp.nnz() == 0 {
            self.terms.remove(&k);
        } else {
            self.terms.insert(k, sp);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant_part(&self) -> &SymMat {
        &self.constant
    }

    pub fn terms(&self) -> &BTreeMap<usize, SparseSym> {
        &self.terms
    }

    pub fn var_ids(&self) -> &BTreeSet<usize> {
        &self.vars
    }

    /// `F₀ + Σ xₖAₖ`.
    pub fn evaluate(&self, x: &[f64]) -> SymMat {
        let mut out = self.constant.clone();
        for (&k, a) in &self.terms {
            if x[k] != 0.0 {
                a.add_into(&mut out, x[k]);
            }
        }
        out
    }

    /// Checked [`AffineMatExpr::evaluate`].
    pub fn try_evaluate(&self, x: &[f64]) -> Result<SymMat> {
        if let Some((&k, _)) = self.terms.iter().next_back() {
            if k >= x.len() {
                return shape_err(format!("coordinate {k} outside a vector of length {}", x.len()));
            }
        }
        Ok(self.evaluate(x))
    }

    /// `A*(W)`, scattered into a vector of length `n`.
    pub fn adjoint_apply(&self, w: &SymMat, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.adjoint_accumulate(w, &mut out);
        out
    }

    pub fn adjoint_accumulate(&self, w: &SymMat, out: &mut [f64]) {
        assert_eq!(w.dim(), self.dim, "adjoint dimension mismatch");
        for (&k, a) in &self.terms {
            out[k] += a.inner(w);
        }
    }

    /// `A(d) = Σ dₖAₖ` without the constant.
    pub fn linear_apply(&self, d: &[f64]) -> SymMat {
        let mut out = SymMat::zeros(self.dim);
        for (&k, a) in &self.terms {
            if d[k] != 0.0 {
                a.add_into(&mut out, d[k]);
            }
        }
        out
    }

    pub fn try_add(&self, other: &AffineMatExpr) -> Result<AffineMatExpr> {
        if self.dim != other.dim {
            return shape_err(format!("cannot add blocks of size {} and {}", self.dim, other.dim));
        }
        let mut out = self.clone();
        out.constant.axpy(1.0, &other.constant);
        for (&k, a) in &other.terms {
            out.add_term(k, &a.to_sym(), 1.0);
        }
        out.vars.extend(other.vars.iter().copied());
        Ok(out)
    }

    pub fn add(&self, other: &AffineMatExpr) -> AffineMatExpr {
        self.try_add(other).expect("block add dimension mismatch")
    }

    pub fn scale(&self, alpha: f64) -> AffineMatExpr {
        AffineMatExpr {
            dim: self.dim,
            constant: self.constant.scale(alpha),
            terms: self
                .terms
                .iter()
                .map(|(&k, a)| (k, SparseSym::from_sym(&a.to_sym().scale(alpha))))
                .collect(),
            vars: self.vars.clone(),
        }
    }

    pub fn neg(&self) -> AffineMatExpr {
        self.scale(-1.0)
    }

    pub fn add_constant(&self, c: &SymMat) -> AffineMatExpr {
        let mut out = self.clone();
        out.constant.axpy(1.0, c);
        out
    }

    /// `self + alpha·I`.
    pub fn add_identity(&self, alpha: f64) -> AffineMatExpr {
        let mut out = self.clone();
        out.constant.add_diag(alpha);
        out
    }

    /// Places `self` as the principal block at `offset` of a zero `dim × dim` block.
    pub fn embed(&self, dim: usize, offset: usize) -> Result<AffineMatExpr> {
        if offset + self.dim > dim {
            return shape_err("embedding does not fit");
        }
        let mut c = SymMat::zeros(dim);
        c.set_principal(offset, &self.constant);
        let terms = self
            .terms
            .iter()
            .map(|(&k, a)| {
                let entries = a.entries.iter().map(|&(i, j, v)| (i + offset, j + offset, v)).collect();
                (k, SparseSym { dim, entries })
            })
            .collect();
        Ok(AffineMatExpr { dim, constant: c, terms, vars: self.vars.clone() })
    }

    /// Principal sub-block `[start, start + len)`.
    pub fn principal(&self, start: usize, len: usize) -> AffineMatExpr {
        let mut out = AffineMatExpr::constant(self.constant.principal(start, len));
        for (&k, a) in &self.terms {
            out.add_term(k, &a.to_sym().principal(start, len), 1.0);
        }
        out.vars = self.vars.clone();
        out
    }
}

/// Assembles a symmetric block matrix from affine pieces. Only blocks on
/// or below the diagonal are given; the upper part is their transpose.
#[derive(Clone, Debug)]
pub struct BlockLmi {
    sizes: Vec<usize>,
    blocks: BTreeMap<(usize, usize), AffineRect>,
}

impl BlockLmi {
    pub fn new(sizes: &[usize]) -> Self {
        BlockLmi { sizes: sizes.to_vec(), blocks: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn start(&self, i: usize) -> usize {
        self.sizes[..i].iter().sum()
    }

    /// Sets block `(i, j)` with `i ≥ j`. Diagonal blocks are symmetrised.
    pub fn set(&mut self, i: usize, j: usize, e: AffineRect) -> Result<&mut Self> {
        if i < j || i >= self.sizes.len() {
            return shape_err(format!("block ({i}, {j}) is not in the lower triangle"));
        }
        if e.shape() != (self.sizes[i], self.sizes[j]) {
            return shape_err(format!(
                "block ({i}, {j}) is {:?}, expected {}x{}",
                e.shape(),
                self.sizes[i],
                self.sizes[j]
            ));
        }
        self.blocks.insert((i, j), e);
        Ok(self)
    }

    pub fn set_const(&mut self, i: usize, j: usize, m: Mat) -> Result<&mut Self> {
        self.set(i, j, AffineRect::constant(m))
    }

    pub fn build(&self) -> AffineMatExpr {
        let n = self.dim();
        let mut dense_const = SymMat::zeros(n);
        let mut coeffs: BTreeMap<usize, SymMat> = BTreeMap::new();
        let mut vars = BTreeSet::new();
        for (&(bi, bj), e) in &self.blocks {
            let (r0, c0) = (self.start(bi), self.start(bj));
            let diag = bi == bj;
            let place = |target: &mut SymMat, m: &Mat| {
                for i in 0..m.rows() {
                    for j in 0..m.cols() {
                        let (r, c) = (r0 + i, c0 + j);
                        if diag {
                            if i <= j {
                                target.set(r, c, 0.5 * (m[(i, j)] + m[(j, i)]));
                            }
                        } else {
                            target.set(r, c, m[(i, j)]);
                        }
                    }
                }
            };
            place(&mut dense_const, &e.constant);
            for (&k, m) in &e.terms {
                let t = coeffs.entry(k).or_insert_with(|| SymMat::zeros(n));
                place(t, m);
            }
            vars.extend(e.vars.iter().copied());
        }
        let mut out = AffineMatExpr::constant(dense_const);
        for (k, s) in coeffs {
            let sp = SparseSym::from_sym(&s);
            if sp.nnz() > 0 {
                out.terms.insert(k, sp);
            }
        }
        out.vars = vars;
        out
    }
}

/// `LᵀXR + RᵀXᵀL` for an affine `X`.
pub fn sym_congruence(x: &AffineRect, l: &Mat, r: &Mat) -> Result<AffineMatExpr> {
    let t = x.left_mul(&l.transpose())?.right_mul(r)?;
    AffineMatExpr::sym_of(&t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    MaxIterations,
}

/// A validated convex problem `min cᵀx + offset  s.t.  Fⱼ(x) ⪯ 0`.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    variables: Vec<VarRef>,
    n: usize,
    c: Vec<f64>,
    offset: f64,
    blocks: Vec<AffineMatExpr>,
}

impl SdpProblem {
    /// Validates and freezes a problem. `objective` is a 1×1 affine
    /// expression; `variables` must tile the decision vector in order.
    pub fn assemble(
        variables: &[VarRef],
        objective: &AffineRect,
        blocks: Vec<AffineMatExpr>,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::EmptyProblem);
        }
        if objective.shape() != (1, 1) {
            return shape_err(format!("objective must be 1x1, got {:?}", objective.shape()));
        }
        let mut ids = BTreeSet::new();
        let mut next = 0;
        for v in variables {
            if !ids.insert(v.id) {
                return Err(Error::DuplicateVariable(v.id));
            }
            if v.offset != next {
                return shape_err(format!(
                    "variable {} starts at {}, expected {next}",
                    v.name, v.offset
                ));
            }
            next += v.len();
        }
        let n = next;
        let check = |used: &BTreeSet<usize>, max_coord: Option<usize>| -> Result<()> {
            if let Some(id) = used.iter().find(|id| !ids.contains(id)) {
                return Err(Error::UnknownVariable(format!("variable id {id}")));
            }
            if let Some(k) = max_coord {
                if k >= n {
                    return Err(Error::UnknownVariable(format!("coordinate {k}")));
                }
            }
            Ok(())
        };
        check(&objective.vars, objective.terms.keys().next_back().copied())?;
        for b in &blocks {
            check(&b.vars, b.terms.keys().next_back().copied())?;
        }
        Ok(SdpProblem {
            variables: variables.to_vec(),
            n,
            c: objective.linear_coefficients(n),
            offset: objective.constant[(0, 0)],
            blocks,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn variables(&self) -> &[VarRef] {
        &self.variables
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn blocks(&self) -> &[AffineMatExpr] {
        &self.blocks
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.offset + self.c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `Σⱼ Aⱼ*(Wⱼ)`.
    pub fn adjoint(&self, duals: &[SymMat]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (b, w) in self.blocks.iter().zip(duals) {
            b.adjoint_accumulate(w, &mut out);
        }
        out
    }

    /// `maxⱼ max(0, λ_max(Fⱼ(x)))`.
    pub fn max_violation(&self, x: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            worst = worst.max(crate::linalg::max_eig(&b.evaluate(x))?);
        }
        Ok(worst)
    }
}

/// Solver output. `duals[j]` is the multiplier of block `j`.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub duals: Vec<SymMat>,
    pub status: SdpStatus,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub iterations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_variable_roundtrip() {
        let mut vs = VarSet::new();
        let p = vs.symmetric("P", 3).unwrap();
        let m = Mat::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 5.0],
            vec![3.0, 5.0, 6.0],
        ])
        .unwrap();
        let mut x = vec![0.0; vs.dim()];
        p.pack(&m, &mut x).unwrap();
        let back = p.expr().evaluate(&x);
        assert!((&back - &m).max_abs() < 1e-14);
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - m.frobenius_norm()).abs() < 1e-13);
    }

    #[test]
    fn assemble_rejects_duplicates_and_unknowns() {
        let mut vs = VarSet::new();
        let t = vs.scalar("t");
        let block = AffineMatExpr::from_sym_rect(&t.expr()).unwrap();
        let dup = SdpProblem::assemble(&[t.clone(), t.clone()], &t.expr(), vec![block.clone()]);
        assert!(matches!(dup, Err(Error::DuplicateVariable(_))));

        let mut other = VarSet::new();
        let s = other.scalar("s");
        let foreign = AffineMatExpr::from_sym_rect(&s.expr()).unwrap();
        let unk = SdpProblem::assemble(vs.vars(), &t.expr(), vec![foreign]);
        assert!(matches!(unk, Err(Error::UnknownVariable(_))));

        let empty = SdpProblem::assemble(vs.vars(), &t.expr(), vec![]);
        assert!(matches!(empty, Err(Error::EmptyProblem)));
    }

    #[test]
    fn block_lmi_mirrors_offdiagonal() {
        let mut vs = VarSet::new();
        let t = vs.scalar("t");
        let mut b = BlockLmi::new(&[1, 1]);
        b.set(1, 0, t.expr()).unwrap();
        b.set_const(1, 1, Mat::diag(&[-1.0])).unwrap();
        let e = b.build();
        let v = e.evaluate(&[3.0]);
        assert_eq!(v.get(0, 1), 3.0);
        assert_eq!(v.get(1, 0), 3.0);
        assert_eq!(v.get(1, 1), -1.0);
    }
}
