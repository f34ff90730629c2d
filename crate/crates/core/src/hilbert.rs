//! Truncated Fock-space representation of a qubit coupled to a harmonic
//! oscillator.
//!
//! Joint vectors are stored qubit-major: entry `q * (cutoff + 1) + n` holds
//! qubit level `q` and Fock level `n`. The qubit convention is
//! `σ_z|0⟩ = +|0⟩`, `|±⟩ = (|0⟩ ± |1⟩)/√2` and `|±i⟩ = (|0⟩ ± i|1⟩)/√2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::EigenCache;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Number of top Fock levels watched for leakage.
pub const LEAK_WINDOW: usize = 5;

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockConfig {
    /// Highest retained Fock index.
    pub cutoff: usize,
    /// Maximum population tolerated in the top [`LEAK_WINDOW`] Fock levels.
    pub leak_tol: f64,
}

impl Default for FockConfig {
    fn default() -> Self {
        Self { cutoff: 120, leak_tol: 1e-7 }
    }
}

impl FockConfig {
    pub fn new(cutoff: usize, leak_tol: f64) -> Result<Self> {
        let cfg = Self { cutoff, leak_tol };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_cutoff(cutoff: usize) -> Result<Self> {
        Self::new(cutoff, Self::default().leak_tol)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoff < 8 {
            return Err(Error::Invalid(format!("cutoff {} < 8", self.cutoff)));
        }
        if !(self.leak_tol > 0.0 && self.leak_tol < 1.0) {
            return Err(Error::Invalid(format!("leak_tol {} outside (0, 1)", self.leak_tol)));
        }
        Ok(())
    }

    /// Oscillator dimension, `cutoff + 1`.
    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    /// Joint qubit-oscillator dimension.
    pub fn joint_dim(&self) -> usize {
        2 * self.dim()
    }

    /// Fails with [`Error::Leak`] when `populations` (indexed by Fock level)
    /// put more than `leak_tol` into the top Fock levels.
    pub(crate) fn check_leak(&self, populations: impl Fn(usize) -> f64) -> Result<()> {
        let lo = self.cutoff + 1 - LEAK_WINDOW;
        let leaked: f64 = (lo..=self.cutoff).map(populations).sum();
        if leaked > self.leak_tol {
            return Err(Error::Leak { cutoff: self.cutoff, leaked, tol: self.leak_tol });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    General,
    Hermitian,
    Unitary,
}

/// Dense complex matrix acting on the oscillator, the qubit or the joint space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    mat: DMatrix<C64>,
    kind: OpKind,
}

impl Operator {
    /// Wraps a matrix, checking the hermitian/unitary tag against the entries.
    pub fn new(mat: DMatrix<C64>, kind: OpKind) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), got: mat.ncols() });
        }
        let op = Self { mat, kind };
        match kind {
            OpKind::Hermitian => {
                let dev = op.hermitian_deviation();
                if dev >= HERMITIAN_TOL {
                    return Err(Error::NotHermitian(dev));
                }
            }
            OpKind::Unitary => {
                let dev = op.unitarity_deviation();
                if dev >= UNITARY_TOL {
                    return Err(Error::Invalid(format!("operator is not unitary ({dev:.3e})")));
                }
            }
            OpKind::General => {}
        }
        Ok(op)
    }

    pub(crate) fn from_parts(mat: DMatrix<C64>, kind: OpKind) -> Self {
        Self { mat, kind }
    }

    pub fn general(mat: DMatrix<C64>) -> Self {
        Self { mat, kind: OpKind::General }
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: DMatrix::identity(dim, dim), kind: OpKind::Unitary }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn kind(&self) -> OpKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn adjoint(&self) -> Operator {
        Self { mat: self.mat.adjoint(), kind: self.kind }
    }

    /// Operator product `self · rhs`.
    pub fn compose(&self, rhs: &Operator) -> Result<Operator> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rhs.dim() });
        }
        let kind = if self.kind == OpKind::Unitary && rhs.kind == OpKind::Unitary {
            OpKind::Unitary
        } else {
            OpKind::General
        };
        Ok(Self { mat: &self.mat * &rhs.mat, kind })
    }

    pub fn commutator(&self, rhs: &Operator) -> Result<Operator> {
        let ab = self.compose(rhs)?;
        let ba = rhs.compose(self)?;
        Ok(Self::general(ab.mat - ba.mat))
    }

    pub fn scale(&self, factor: C64) -> Operator {
        let kind = if factor.im == 0.0 && self.kind == OpKind::Hermitian {
            OpKind::Hermitian
        } else {
            OpKind::General
        };
        Self { mat: &self.mat * factor, kind }
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.mat * v
    }

    pub fn hermitian_deviation(&self) -> f64 {
        max_abs_diff(&self.mat, &self.mat.adjoint())
    }

    pub fn unitarity_deviation(&self) -> f64 {
        let n = self.dim();
        max_abs_diff(&(self.mat.adjoint() * &self.mat), &DMatrix::identity(n, n))
    }

    /// Largest elementwise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        max_abs_diff(&self.mat, &other.mat)
    }
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Bosonic annihilation operator, `a|n⟩ = √n |n−1⟩`.
pub fn annihilation(cfg: &FockConfig) -> Operator {
    let d = cfg.dim();
    let mut m = DMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator::general(m)
}

pub fn creation(cfg: &FockConfig) -> Operator {
    annihilation(cfg).adjoint()
}

pub fn number(cfg: &FockConfig) -> Operator {
    let d = cfg.dim();
    let m = DMatrix::from_diagonal(&DVector::from_fn(d, |n, _| C64::new(n as f64, 0.0)));
    Operator::from_parts(m, OpKind::Hermitian)
}

/// `X = (a + a†)/√2` and `P = (a − a†)/(i√2)`.
pub fn quadratures(cfg: &FockConfig) -> (Operator, Operator) {
    let a = annihilation(cfg).into_matrix();
    let ad = a.adjoint();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x = (&a + &ad) * C64::new(s, 0.0);
    let p = (&a - &ad) * C64::new(0.0, -s);
    (Operator::from_parts(x, OpKind::Hermitian), Operator::from_parts(p, OpKind::Hermitian))
}

pub fn pauli_x() -> Operator {
    Operator::from_parts(DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]), OpKind::Hermitian)
}

pub fn pauli_y() -> Operator {
    Operator::from_parts(DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]), OpKind::Hermitian)
}

pub fn pauli_z() -> Operator {
    Operator::from_parts(DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]), OpKind::Hermitian)
}

/// `(σ_x + iσ_y)/2 = |0⟩⟨1|` in the `σ_z|0⟩ = +|0⟩` convention.
pub fn qubit_lowering() -> Operator {
    Operator::general(DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]))
}

/// Kronecker product `q ⊗ b` in the qubit-major joint ordering.
pub fn tensor_qubit_osc(q: &Operator, b: &Operator) -> Result<Operator> {
    if q.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: q.dim() });
    }
    let kind = match (q.kind, b.kind) {
        (OpKind::Hermitian, OpKind::Hermitian) => OpKind::Hermitian,
        (OpKind::Unitary, OpKind::Unitary) => OpKind::Unitary,
        _ => OpKind::General,
    };
    Ok(Operator::from_parts(q.mat.kronecker(&b.mat), kind))
}

/// Reduced or standalone oscillator state.
#[derive(Debug, Clone, PartialEq)]
pub enum OscillatorState {
    Pure { cutoff: usize, amps: DVector<C64> },
    Mixed { cutoff: usize, rho: DMatrix<C64> },
}

impl OscillatorState {
    /// Pure state from amplitudes; the vector is renormalized.
    pub fn from_amplitudes(amps: DVector<C64>) -> Result<Self> {
        let norm = amps.norm();
        if amps.len() < 9 || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Invalid("amplitude vector must be nonzero with length ≥ 9".into()));
        }
        Ok(Self::Pure { cutoff: amps.len() - 1, amps: amps.unscale(norm) })
    }

    /// Mixed state from a density matrix, checked for trace and hermiticity.
    pub fn from_density(rho: DMatrix<C64>) -> Result<Self> {
        if !rho.is_square() || rho.nrows() < 9 {
            return Err(Error::Invalid("density matrix must be square with dimension ≥ 9".into()));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
            return Err(Error::Invalid(format!("density trace {tr} ≠ 1")));
        }
        let herm = max_abs_diff(&rho, &rho.adjoint());
        if herm > 1e-8 {
            return Err(Error::NotHermitian(herm));
        }
        Ok(Self::Mixed { cutoff: rho.nrows() - 1, rho })
    }

    pub fn fock(n: usize, cfg: &FockConfig) -> Result<Self> {
        if n > cfg.cutoff {
            return Err(Error::Invalid(format!("Fock level {n} above cutoff {}", cfg.cutoff)));
        }
        let mut amps = DVector::zeros(cfg.dim());
        amps[n] = ONE;
        Ok(Self::Pure { cutoff: cfg.cutoff, amps })
    }

    pub fn vacuum(cfg: &FockConfig) -> Self {
        Self::fock(0, cfg).expect("vacuum is always representable")
    }

    pub fn cutoff(&self) -> usize {
        match self {
            Self::Pure { cutoff, .. } | Self::Mixed { cutoff, .. } => *cutoff,
        }
    }

    pub fn dim(&self) -> usize {
        self.cutoff() + 1
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, Self::Pure { .. })
    }

    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match self {
            Self::Pure { amps, .. } => Some(amps),
            Self::Mixed { .. } => None,
        }
    }

    pub fn density(&self) -> DMatrix<C64> {
        match self {
            Self::Pure { amps, .. } => amps * amps.adjoint(),
            Self::Mixed { rho, .. } => rho.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Self::Pure { amps, .. } => amps.norm_squared(),
            Self::Mixed { rho, .. } => rho.trace().re,
        }
    }

    pub fn purity(&self) -> f64 {
        match self {
            Self::Pure { amps, .. } => amps.norm_squared().powi(2),
            Self::Mixed { rho, .. } => (rho * rho).trace().re,
        }
    }

    /// Population of Fock level `n`.
    pub fn population(&self, n: usize) -> f64 {
        match self {
            Self::Pure { amps, .. } => amps[n].norm_sqr(),
            Self::Mixed { rho, .. } => rho[(n, n)].re,
        }
    }

    /// `Tr(ρ O)`.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: op.dim() });
        }
        Ok(match self {
            Self::Pure { amps, .. } => amps.dotc(&op.apply(amps)),
            Self::Mixed { rho, .. } => (op.matrix() * rho).trace(),
        })
    }

    pub fn check_leak(&self, cfg: &FockConfig) -> Result<()> {
        cfg.check_leak(|n| self.population(n))
    }
}

/// Pure joint state `Σ amps[q(c+1)+n] |q⟩|n⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    cutoff: usize,
    amps: DVector<C64>,
}

impl JointState {
    pub fn new(cutoff: usize, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != 2 * (cutoff + 1) {
            return Err(Error::DimensionMismatch { expected: 2 * (cutoff + 1), got: amps.len() });
        }
        let norm = amps.norm();
        if (norm * norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Invalid(format!("joint state norm² {} ≠ 1", norm * norm)));
        }
        Ok(Self { cutoff, amps })
    }

    /// `|0⟩ ⊗ |vac⟩`.
    pub fn ground_vacuum(cfg: &FockConfig) -> Self {
        let mut amps = DVector::zeros(cfg.joint_dim());
        amps[0] = ONE;
        Self { cutoff: cfg.cutoff, amps }
    }

    /// `(q0|0⟩ + q1|1⟩) ⊗ |ψ⟩` for a pure oscillator state; the qubit part is
    /// normalized.
    pub fn product(qubit: [C64; 2], osc: &OscillatorState) -> Result<Self> {
        let psi = osc
            .amplitudes()
            .ok_or_else(|| Error::Invalid("product state needs a pure oscillator state".into()))?;
        let qn = (qubit[0].norm_sqr() + qubit[1].norm_sqr()).sqrt();
        if !(qn > 0.0) {
            return Err(Error::Invalid("qubit amplitudes vanish".into()));
        }
        let d = psi.len();
        let mut amps = DVector::zeros(2 * d);
        for n in 0..d {
            amps[n] = qubit[0] / qn * psi[n];
            amps[d + n] = qubit[1] / qn * psi[n];
        }
        Ok(Self { cutoff: d - 1, amps })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut DVector<C64> {
        &mut self.amps
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn apply(&self, op: &Operator) -> Result<Self> {
        if op.dim() != self.amps.len() {
            return Err(Error::DimensionMismatch { expected: self.amps.len(), got: op.dim() });
        }
        Ok(Self { cutoff: self.cutoff, amps: op.apply(&self.amps) })
    }

    /// Oscillator component conditioned on qubit level `q` (unnormalized).
    pub fn branch(&self, q: usize) -> DVector<C64> {
        let d = self.cutoff + 1;
        self.amps.rows(q * d, d).into_owned()
    }

    pub fn density(&self) -> JointDensity {
        JointDensity { cutoff: self.cutoff, rho: &self.amps * self.amps.adjoint() }
    }

    /// Oscillator state with the qubit traced out.
    pub fn reduced_oscillator(&self) -> OscillatorState {
        let b0 = self.branch(0);
        let b1 = self.branch(1);
        OscillatorState::Mixed { cutoff: self.cutoff, rho: &b0 * b0.adjoint() + &b1 * b1.adjoint() }
    }

    /// 2×2 qubit density with the oscillator traced out.
    pub fn reduced_qubit(&self) -> DMatrix<C64> {
        let b = [self.branch(0), self.branch(1)];
        DMatrix::from_fn(2, 2, |i, j| b[j].dotc(&b[i]))
    }

    /// Total population of the top Fock levels over both qubit branches.
    pub fn check_leak(&self, cfg: &FockConfig) -> Result<()> {
        let d = self.cutoff + 1;
        cfg.check_leak(|n| self.amps[n].norm_sqr() + self.amps[d + n].norm_sqr())
    }

    /// Conditional oscillator state after measuring the qubit in `outcome`.
    pub fn project_qubit(&self, outcome: usize) -> Result<(OscillatorState, f64)> {
        check_outcome(outcome)?;
        let branch = self.branch(outcome);
        let prob = branch.norm_squared();
        if prob < 1e-12 {
            return Err(Error::ZeroProbability(prob));
        }
        let amps = branch.unscale(prob.sqrt());
        Ok((OscillatorState::Pure { cutoff: self.cutoff, amps }, prob.min(1.0)))
    }
}

/// Joint density matrix on qubit ⊗ oscillator.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDensity {
    cutoff: usize,
    rho: DMatrix<C64>,
}

impl JointDensity {
    /// Wraps a matrix after checking trace, hermiticity and positivity.
    pub fn new(cutoff: usize, rho: DMatrix<C64>) -> Result<Self> {
        let out = Self { cutoff, rho };
        out.validate()?;
        Ok(out)
    }

    pub(crate) fn from_raw(cutoff: usize, rho: DMatrix<C64>) -> Self {
        Self { cutoff, rho }
    }

    pub fn ground_vacuum(cfg: &FockConfig) -> Self {
        JointState::ground_vacuum(cfg).density()
    }

    /// `ρ_q ⊗ ρ_b`.
    pub fn product(qubit: &DMatrix<C64>, osc: &OscillatorState) -> Result<Self> {
        if qubit.shape() != (2, 2) {
            return Err(Error::DimensionMismatch { expected: 2, got: qubit.nrows() });
        }
        Self::new(osc.cutoff(), qubit.kronecker(&osc.density()))
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn hermitian_deviation(&self) -> f64 {
        max_abs_diff(&self.rho, &self.rho.adjoint())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let d = 2 * (self.cutoff + 1);
        if self.rho.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, got: self.rho.nrows() });
        }
        let tr = self.trace();
        if (tr - 1.0).abs() >= 1e-6 {
            return Err(Error::Invalid(format!("joint density trace {tr} ≠ 1")));
        }
        let herm = self.hermitian_deviation();
        if herm >= 1e-8 {
            return Err(Error::NotHermitian(herm));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig <= -1e-7 {
            return Err(Error::Invalid(format!("joint density has negative eigenvalue {min_eig:.3e}")));
        }
        Ok(())
    }

    fn block(&self, qa: usize, qb: usize) -> DMatrix<C64> {
        let d = self.cutoff + 1;
        self.rho.view((qa * d, qb * d), (d, d)).into_owned()
    }

    pub fn reduced_qubit(&self) -> DMatrix<C64> {
        DMatrix::from_fn(2, 2, |i, j| self.block(i, j).trace())
    }

    pub fn check_leak(&self, cfg: &FockConfig) -> Result<()> {
        let d = self.cutoff + 1;
        cfg.check_leak(|n| self.rho[(n, n)].re + self.rho[(d + n, d + n)].re)
    }

    pub fn project_qubit(&self, outcome: usize) -> Result<(OscillatorState, f64)> {
        check_outcome(outcome)?;
        let block = self.block(outcome, outcome);
        let prob = block.trace().re;
        if prob < 1e-12 {
            return Err(Error::ZeroProbability(prob));
        }
        let rho = block.unscale(prob);
        Ok((OscillatorState::Mixed { cutoff: self.cutoff, rho }, prob.clamp(0.0, 1.0)))
    }
}

fn check_outcome(outcome: usize) -> Result<()> {
    if outcome > 1 {
        return Err(Error::Invalid(format!("qubit outcome must be 0 or 1, got {outcome}")));
    }
    Ok(())
}

/// Oscillator state with the qubit traced out.
pub fn partial_trace_qubit(rho: &JointDensity) -> OscillatorState {
    OscillatorState::Mixed { cutoff: rho.cutoff, rho: rho.block(0, 0) + rho.block(1, 1) }
}

/// Anything on the joint space that supports a projective qubit measurement.
pub trait QubitMeasurable {
    fn project_qubit(&self, outcome: usize) -> Result<(OscillatorState, f64)>;
}

impl QubitMeasurable for JointState {
    fn project_qubit(&self, outcome: usize) -> Result<(OscillatorState, f64)> {
        JointState::project_qubit(self, outcome)
    }
}

impl QubitMeasurable for JointDensity {
    fn project_qubit(&self, outcome: usize) -> Result<(OscillatorState, f64)> {
        JointDensity::project_qubit(self, outcome)
    }
}

/// Renormalized conditional oscillator state and Born probability.
pub fn project_qubit<S: QubitMeasurable>(state: &S, outcome: usize) -> Result<(OscillatorState, f64)> {
    state.project_qubit(outcome)
}

/// `ln n!` for every `n ≤ max`.
pub(crate) fn ln_factorials(max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for n in 1..=max {
        acc += (n as f64).ln();
        out.push(acc);
    }
    out
}

/// Fock amplitude `e^{−|α|²/2} αⁿ/√(n!)`, evaluated in log space so large
/// amplitudes do not underflow.
pub(crate) fn coherent_amplitude(alpha: C64, n: usize, ln_fact: &[f64]) -> C64 {
    let r = alpha.norm();
    if r == 0.0 {
        return if n == 0 { ONE } else { ZERO };
    }
    let log_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * ln_fact[n];
    C64::from_polar(log_mag.exp(), n as f64 * alpha.arg())
}

/// Coherent state `|α⟩ = e^{−|α|²/2} Σ αⁿ/√(n!) |n⟩`, renormalized on the
/// truncated space.
pub fn coherent(alpha: C64, cfg: &FockConfig) -> Result<OscillatorState> {
    cfg.validate()?;
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::Invalid("non-finite coherent amplitude".into()));
    }
    let ln_fact = ln_factorials(cfg.cutoff);
    let amps = DVector::from_fn(cfg.dim(), |n, _| coherent_amplitude(alpha, n, &ln_fact));
    let kept = amps.norm_squared();
    let deficit = 1.0 - kept;
    if deficit > cfg.leak_tol {
        return Err(Error::Leak { cutoff: cfg.cutoff, leaked: deficit, tol: cfg.leak_tol });
    }
    Ok(OscillatorState::Pure { cutoff: cfg.cutoff, amps: amps.unscale(kept.sqrt()) })
}

/// Squeezing parameter `r` for a squeezing level in dB: `Δ² = e^{−2r}`.
pub fn squeeze_parameter(delta_db: f64) -> f64 {
    delta_db * std::f64::consts::LN_10 / 20.0
}

/// Hermitian generator `H` on the even Fock sector `{|0⟩, |2⟩, …}` with
/// `exp(i r H) = exp((r/2)(a†² − a²))`, the P-squeezing operator.
pub(crate) fn even_squeeze_generator(cutoff: usize) -> Operator {
    let k = cutoff / 2 + 1;
    let mut m = DMatrix::zeros(k, k);
    for j in 0..k - 1 {
        let n = (2 * j) as f64;
        let c = 0.5 * ((n + 1.0) * (n + 2.0)).sqrt();
        // -i · (a†² − a²)/2 restricted to the even sector
        m[(j + 1, j)] = C64::new(0.0, -c);
        m[(j, j + 1)] = C64::new(0.0, c);
    }
    Operator::from_parts(m, OpKind::Hermitian)
}

/// Squeezed vacuum from an already diagonalized even-sector generator.
pub(crate) fn squeezed_from_cache(delta_db: f64, cache: &EigenCache, cfg: &FockConfig) -> Result<OscillatorState> {
    if !delta_db.is_finite() {
        return Err(Error::Invalid("non-finite squeezing level".into()));
    }
    let r = squeeze_parameter(delta_db);
    let mut seed = DVector::zeros(cache.dim());
    seed[0] = ONE;
    let even = cache.apply_exp_i(r, &seed);
    let mut amps = DVector::zeros(cfg.dim());
    for (j, a) in even.iter().enumerate() {
        amps[2 * j] = *a;
    }
    let state = OscillatorState::Pure { cutoff: cfg.cutoff, amps };
    state.check_leak(cfg)?;
    let norm = state.trace().sqrt();
    match state {
        OscillatorState::Pure { cutoff, amps } => Ok(OscillatorState::Pure { cutoff, amps: amps.unscale(norm) }),
        OscillatorState::Mixed { .. } => unreachable!(),
    }
}

/// P-squeezed vacuum with `⟨P²⟩ = Δ²/2`, `Δ² = 10^(−delta_db/10)`, built by
/// exponentiating the squeeze generator.
pub fn squeezed_vacuum(delta_db: f64, cfg: &FockConfig) -> Result<OscillatorState> {
    cfg.validate()?;
    let cache = EigenCache::new(&even_squeeze_generator(cfg.cutoff))?;
    squeezed_from_cache(delta_db, &cache, cfg)
}
