//! Operators, density matrices and superoperators on a finite system Hilbert space.
//!
//! Superoperators act on column-stacked operators: `vec(X)[i + d*j] = X[i, j]`,
//! so that `vec(A X B) = (B^T ⊗ A) vec(X)`. The commutator and anticommutator
//! superoperators carry a `1/√2` normalization,
//!
//! ```text
//! S^± ρ = (S ρ ± ρ S) / √2,
//! ```
//!
//! which makes `[S B, ρ] = Σ_σ S^σ B^{-σ} ρ` hold term by term for a product coupling.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;

pub(crate) const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub(crate) fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Largest entry of `|A - A†|`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A square complex matrix on the system (or bath, or full) Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(CMatrix);

impl Operator {
    pub fn new(m: CMatrix) -> Result<Self> {
        ensure_square(&m)?;
        Ok(Self(m))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = c(*v, 0.0);
            }
        }
        Ok(Self(m))
    }

    pub fn identity(d: usize) -> Self {
        Self(CMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(CMatrix::zeros(d, d))
    }

    /// `|i⟩⟨j|`
    pub fn matrix_unit(d: usize, i: usize, j: usize) -> Self {
        let mut m = CMatrix::zeros(d, d);
        m[(i, j)] = c(1.0, 0.0);
        Self(m)
    }

    pub fn pauli_x() -> Self {
        Self(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ))
    }

    pub fn pauli_y() -> Self {
        Self(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
        ))
    }

    pub fn pauli_z() -> Self {
        Self(CMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        ))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(c(s, 0.0))
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.0)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() < tol
    }

    pub fn ensure_hermitian(&self, what: &str) -> Result<()> {
        let deviation = self.hermiticity_deviation();
        if deviation < HERMITIAN_TOL {
            Ok(())
        } else {
            Err(Error::NotHermitian {
                what: what.to_string(),
                deviation,
            })
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Eigen-decomposition of a Hermitian operator. Returns real eigenvalues and
    /// the unitary whose columns are the eigenvectors.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        let eig = SymmetricEigen::new(self.0.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

/// Column-stacking vectorization.
pub fn vec(x: &Operator) -> DVector<C64> {
    DVector::from_column_slice(x.0.as_slice())
}

pub fn unvec(v: &DVector<C64>, d: usize) -> Result<Operator> {
    if v.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: v.len(),
        });
    }
    Ok(Operator(CMatrix::from_column_slice(d, d, v.as_slice())))
}

/// Row vector `vec(I)†`; its product with a superoperator computes `Tr(𝒜 X)` coefficients.
pub fn trace_row(d: usize) -> DVector<C64> {
    vec(&Operator::identity(d))
}

/// Index of the two superoperator kinds. `Minus` is the commutator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sigma {
    Plus,
    Minus,
}

impl Sigma {
    pub const BOTH: [Sigma; 2] = [Sigma::Plus, Sigma::Minus];

    pub fn bar(self) -> Sigma {
        match self {
            Sigma::Plus => Sigma::Minus,
            Sigma::Minus => Sigma::Plus,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Sigma::Plus => 1.0,
            Sigma::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sigma::Plus => '+',
            Sigma::Minus => '-',
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A linear map on operators of a `dim`-dimensional space, stored as a `dim² × dim²` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    mat: CMatrix,
}

impl SuperOperator {
    pub fn from_matrix(dim: usize, mat: CMatrix) -> Result<Self> {
        let n = ensure_square(&mat)?;
        if n != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: n,
            });
        }
        Ok(Self { dim, mat })
    }

    pub(crate) fn from_matrix_unchecked(dim: usize, mat: CMatrix) -> Self {
        debug_assert_eq!(mat.nrows(), dim * dim);
        Self { dim, mat }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            mat: CMatrix::identity(dim * dim, dim * dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            mat: CMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// `X ↦ A X`
    pub fn left(a: &Operator) -> Self {
        let d = a.dim();
        Self {
            dim: d,
            mat: CMatrix::identity(d, d).kronecker(a.matrix()),
        }
    }

    /// `X ↦ X B`
    pub fn right(b: &Operator) -> Self {
        let d = b.dim();
        Self {
            dim: d,
            mat: b.matrix().transpose().kronecker(&CMatrix::identity(d, d)),
        }
    }

    /// `X ↦ A X B`
    pub fn sandwich(a: &Operator, b: &Operator) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        Ok(Self {
            dim: a.dim(),
            mat: b.matrix().transpose().kronecker(a.matrix()),
        })
    }

    /// `X ↦ U X U†`
    pub fn unitary_conjugation(u: &Operator) -> Self {
        let d = u.dim();
        Self {
            dim: d,
            mat: u.matrix().conjugate().kronecker(u.matrix()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        let v = &self.mat * vec(x);
        unvec(&v, self.dim)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            mat: &self.mat * s,
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(c(s, 0.0))
    }

    /// `self += w * other`
    pub fn add_scaled(&mut self, w: C64, other: &SuperOperator) {
        self.mat.zip_apply(&other.mat, |a, b| *a += w * b);
    }

    /// Frobenius norm of the matrix representation.
    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// Largest entry of `vec(I)† · 𝒜`; zero for trace-annihilating maps.
    pub fn trace_annihilation_defect(&self) -> f64 {
        let row = trace_row(self.dim).adjoint() * &self.mat;
        row.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// Largest entry of `vec(I)† 𝒜 - vec(I)†`; zero for trace-preserving maps.
    pub fn trace_preservation_defect(&self) -> f64 {
        let tr = trace_row(self.dim);
        let row = tr.adjoint() * &self.mat - tr.adjoint();
        row.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// Largest anti-Hermitian part produced on the Hermitian basis
    /// `{|i⟩⟨i|, |i⟩⟨j| + |j⟩⟨i|, i|i⟩⟨j| - i|j⟩⟨i|}`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let mut basis = Vec::with_capacity(2);
                if i == j {
                    basis.push(Operator::matrix_unit(d, i, i));
                } else {
                    let e_ij = Operator::matrix_unit(d, i, j);
                    let e_ji = Operator::matrix_unit(d, j, i);
                    basis.push(&e_ij + &e_ji);
                    basis.push(&e_ij.scale(c(0.0, 1.0)) - &e_ji.scale(c(0.0, 1.0)));
                }
                for x in basis {
                    let y = self.apply(&x).expect("same dimension");
                    worst = worst.max(y.hermiticity_deviation());
                }
            }
        }
        worst
    }

    pub fn try_inverse(&self) -> Option<SuperOperator> {
        self.mat
            .clone()
            .try_inverse()
            .map(|mat| Self { dim: self.dim, mat })
    }
}

impl Add for &SuperOperator {
    type Output = SuperOperator;
    fn add(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &SuperOperator {
    type Output = SuperOperator;
    fn sub(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Mul for &SuperOperator {
    type Output = SuperOperator;
    fn mul(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            mat: &self.mat * &rhs.mat,
        }
    }
}

impl Neg for &SuperOperator {
    type Output = SuperOperator;
    fn neg(self) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            mat: -&self.mat,
        }
    }
}

impl AddAssign<&SuperOperator> for SuperOperator {
    fn add_assign(&mut self, rhs: &SuperOperator) {
        self.mat += &rhs.mat;
    }
}

impl SubAssign<&SuperOperator> for SuperOperator {
    fn sub_assign(&mut self, rhs: &SuperOperator) {
        self.mat -= &rhs.mat;
    }
}

/// Trace over the second factor of a matrix on `C^{d_a} ⊗ C^{d_b}` (first factor most significant).
pub fn partial_trace_second(m: &CMatrix, d_a: usize, d_b: usize) -> Result<CMatrix> {
    let n = ensure_square(m)?;
    if n != d_a * d_b {
        return Err(Error::DimensionMismatch {
            expected: d_a * d_b,
            got: n,
        });
    }
    Ok(CMatrix::from_fn(d_a, d_a, |a, c| {
        (0..d_b).map(|k| m[(a * d_b + k, c * d_b + k)]).sum()
    }))
}

/// `S^- ρ = (Sρ − ρS)/√2`
pub fn commutator_superop(s: &Operator) -> SuperOperator {
    sigma_superop(Sigma::Minus, s)
}

/// `S^+ ρ = (Sρ + ρS)/√2`
pub fn anticommutator_superop(s: &Operator) -> SuperOperator {
    sigma_superop(Sigma::Plus, s)
}

pub fn sigma_superop(sigma: Sigma, s: &Operator) -> SuperOperator {
    let d = s.dim();
    let id = CMatrix::identity(d, d);
    let left = id.kronecker(s.matrix());
    let right = s.matrix().transpose().kronecker(&id);
    let mat = match sigma {
        Sigma::Plus => left + right,
        Sigma::Minus => left - right,
    } * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    SuperOperator { dim: d, mat }
}

/// Matrix exponential of a square complex matrix (scaling and squaring with Padé approximants).
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    ensure_square(a)?;
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("expm of a non-finite matrix".into()));
    }
    Ok(a.exp())
}

/// Eigenbasis of a Hermitian Hamiltonian, reused for many interaction-picture rotations.
#[derive(Clone, Debug)]
pub struct InteractionFrame {
    energies: Vec<f64>,
    vectors: CMatrix,
}

impl InteractionFrame {
    pub fn new(h: &Operator) -> Result<Self> {
        h.ensure_hermitian("Hamiltonian")?;
        let (energies, vectors) = h.eigh();
        Ok(Self { energies, vectors })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `e^{-iHt}`
    pub fn propagator(&self, t: f64) -> Operator {
        let phases = CMatrix::from_diagonal(&DVector::from_iterator(
            self.energies.len(),
            self.energies.iter().map(|e| C64::from_polar(1.0, -e * t)),
        ));
        Operator(&self.vectors * phases * self.vectors.adjoint())
    }

    /// `e^{iHt} S e^{-iHt}`
    pub fn rotate(&self, s: &Operator, t: f64) -> Result<Operator> {
        if s.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: s.dim(),
            });
        }
        let in_basis = self.vectors.adjoint() * s.matrix() * &self.vectors;
        let n = self.dim();
        let rotated = CMatrix::from_fn(n, n, |i, j| {
            in_basis[(i, j)] * C64::from_polar(1.0, (self.energies[i] - self.energies[j]) * t)
        });
        Ok(Operator(&self.vectors * rotated * self.vectors.adjoint()))
    }
}

/// `S(t) = e^{iHt} S e^{-iHt}`
pub fn interaction_picture_op(s: &Operator, h: &Operator, t: f64) -> Result<Operator> {
    InteractionFrame::new(h)?.rotate(s, t)
}

/// System Hamiltonian and the system side `S` of the coupling `S ⊗ B`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    pub h_s: Operator,
    pub s: Operator,
}

impl SystemModel {
    pub fn new(h_s: Operator, s: Operator) -> Result<Self> {
        if h_s.dim() != s.dim() {
            return Err(Error::DimensionMismatch {
                expected: h_s.dim(),
                got: s.dim(),
            });
        }
        h_s.ensure_hermitian("system Hamiltonian")?;
        s.ensure_hermitian("coupling operator")?;
        Ok(Self { h_s, s })
    }

    pub fn dim(&self) -> usize {
        self.h_s.dim()
    }

    /// Same model with the coupling operator multiplied by `lambda`.
    pub fn with_coupling(&self, lambda: f64) -> Self {
        Self {
            h_s: self.h_s.clone(),
            s: self.s.scale_real(lambda),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Picture {
    Interaction,
    Schrodinger,
}

pub const TRACE_TOL: f64 = 1e-10;

/// A reduced density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub rho: Operator,
    pub picture: Picture,
}

impl SystemState {
    pub fn new(rho: Operator, picture: Picture) -> Result<Self> {
        let tr = rho.trace();
        if (tr - c(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let dev = rho.hermiticity_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {dev:.3e})"
            )));
        }
        let (eigs, _) = rho.eigh();
        if let Some(min) = eigs.iter().copied().reduce(f64::min) {
            if min < -TRACE_TOL {
                return Err(Error::InvalidState(format!(
                    "negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(Self { rho, picture })
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.rho.matrix() * self.rho.matrix()).trace().re
    }

    /// Converts between pictures at time `t` (measured from the reference time of the frame).
    pub fn to_picture(&self, frame: &InteractionFrame, t: f64, target: Picture) -> Self {
        if self.picture == target {
            return self.clone();
        }
        let u = frame.propagator(t);
        let rho = match target {
            Picture::Schrodinger => &(&u * &self.rho) * &u.dagger(),
            Picture::Interaction => &(&u.dagger() * &self.rho) * &u,
        };
        Self {
            rho,
            picture: target,
        }
    }
}
