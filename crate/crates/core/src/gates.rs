//! Exact Rabi gates `exp(iu P⊗σ_x)` and `exp(iv X⊗σ_y)`.
//!
//! Both generators are diagonalized once per cutoff. The truncated position
//! operator `X` is real symmetric tridiagonal, so its eigenvectors `W` are
//! real, and `P = R X R†` with `R = diag(iⁿ)`. The joint generators split
//! over the qubit eigenbases of `σ_x` and `σ_y`, leaving each gate as a pair
//! of real `d×d` products in the oscillator eigenbasis.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{FockConfig, JointState, OpKind, Operator, C64, I, ONE};

const HERMITIAN_TOL: f64 = 1e-12;

/// Eigendecomposition `H = V diag(λ) V†` of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct EigenCache {
    basis: DMatrix<C64>,
    eigvals: DVector<f64>,
}

impl EigenCache {
    pub fn new(h: &Operator) -> Result<Self> {
        let scale = h.matrix().iter().map(|z| z.norm()).fold(1.0, f64::max);
        let dev = h.hermitian_deviation();
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(dev));
        }
        let sym = (h.matrix() + h.matrix().adjoint()) * C64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        Ok(Self { basis: eig.eigenvectors, eigvals: eig.eigenvalues })
    }

    pub(crate) fn from_parts(basis: DMatrix<C64>, eigvals: DVector<f64>) -> Self {
        Self { basis, eigvals }
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    pub fn basis(&self) -> &DMatrix<C64> {
        &self.basis
    }

    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    /// `max |V diag(λ) V† − H|`.
    pub fn reconstruction_error(&self, h: &Operator) -> f64 {
        let lam = DMatrix::from_diagonal(&self.eigvals.map(|l| C64::new(l, 0.0)));
        let rebuilt = &self.basis * lam * self.basis.adjoint();
        crate::hilbert::max_abs_diff(&rebuilt, h.matrix())
    }

    /// Dense `exp(iθH)`.
    pub fn exp_i(&self, theta: f64) -> Operator {
        let phases = self.eigvals.map(|l| C64::from_polar(1.0, theta * l));
        let mut scaled = self.basis.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        Operator::from_parts(scaled * self.basis.adjoint(), OpKind::Unitary)
    }

    /// `exp(iθH) v` without forming the dense exponential.
    pub fn apply_exp_i(&self, theta: f64, v: &DVector<C64>) -> DVector<C64> {
        let mut coeffs = self.basis.ad_mul(v);
        for (c, l) in coeffs.iter_mut().zip(self.eigvals.iter()) {
            *c *= C64::from_polar(1.0, theta * l);
        }
        &self.basis * coeffs
    }
}

/// Unitary `exp(iθH)` for Hermitian `H`; the identity for `θ = 0`.
pub fn expi_hermitian(h: &Operator, theta: f64) -> Result<Operator> {
    let cache = EigenCache::new(h)?;
    if theta == 0.0 {
        return Ok(Operator::identity(h.dim()));
    }
    Ok(cache.exp_i(theta))
}

/// Which Rabi interaction a gate or segment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Generator {
    /// `P ⊗ σ_x`, conditional displacement along X.
    PSigmaX,
    /// `X ⊗ σ_y`, conditional displacement along P.
    XSigmaY,
}

impl Generator {
    /// Dense joint-space generator.
    pub fn operator(self, cfg: &FockConfig) -> Operator {
        let (x, p) = crate::hilbert::quadratures(cfg);
        let out = match self {
            Generator::PSigmaX => crate::hilbert::tensor_qubit_osc(&crate::hilbert::pauli_x(), &p),
            Generator::XSigmaY => crate::hilbert::tensor_qubit_osc(&crate::hilbert::pauli_y(), &x),
        };
        out.expect("qubit factor is 2×2")
    }
}

/// Cached eigendecomposition of both Rabi generators at one cutoff.
#[derive(Debug, Clone)]
pub struct RabiGates {
    cfg: FockConfig,
    /// Real orthogonal eigenvectors of the truncated X, one per column.
    w: DMatrix<f64>,
    wt: DMatrix<f64>,
    /// Eigenvalues of the truncated X (and P).
    nodes: DVector<f64>,
}

impl RabiGates {
    pub fn new(cfg: &FockConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.dim();
        let mut x = DMatrix::<f64>::zeros(d, d);
        for n in 1..d {
            let v = (n as f64 / 2.0).sqrt();
            x[(n - 1, n)] = v;
            x[(n, n - 1)] = v;
        }
        let eig = x.symmetric_eigen();
        let w = eig.eigenvectors;
        let wt = w.transpose();
        Ok(Self { cfg: *cfg, w, wt, nodes: eig.eigenvalues })
    }

    pub fn config(&self) -> &FockConfig {
        &self.cfg
    }

    /// Applies `exp(iθ X)` (or `exp(−iθ X)` for the second column pair) to
    /// packed columns `[re₁, im₁, re₂, im₂]`, in place.
    fn exp_x_pair(&self, theta: f64, cols: &mut DMatrix<f64>) {
        let mut y = &self.wt * &*cols;
        for (j, l) in self.nodes.iter().enumerate() {
            let (s, c) = (theta * l).sin_cos();
            let (re, im) = (y[(j, 0)], y[(j, 1)]);
            y[(j, 0)] = c * re - s * im;
            y[(j, 1)] = s * re + c * im;
            let (re, im) = (y[(j, 2)], y[(j, 3)]);
            y[(j, 2)] = c * re + s * im;
            y[(j, 3)] = -s * re + c * im;
        }
        self.w.mul_to(&y, cols);
    }

    /// In-place `exp(iu P⊗σ_x)`.
    pub fn apply_u(&self, u: f64, psi: &mut JointState) {
        if u == 0.0 {
            return;
        }
        let d = self.cfg.dim();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = psi.amplitudes_mut();
        // σ_x eigenbasis, then R† = diag((−i)ⁿ) to move P onto X
        let mut cols = DMatrix::<f64>::zeros(d, 4);
        for n in 0..d {
            let rot = neg_i_pow(n);
            let plus = (amps[n] + amps[d + n]) * h * rot;
            let minus = (amps[n] - amps[d + n]) * h * rot;
            cols[(n, 0)] = plus.re;
            cols[(n, 1)] = plus.im;
            cols[(n, 2)] = minus.re;
            cols[(n, 3)] = minus.im;
        }
        self.exp_x_pair(u, &mut cols);
        for n in 0..d {
            let rot = neg_i_pow(n).conj();
            let plus = C64::new(cols[(n, 0)], cols[(n, 1)]) * rot;
            let minus = C64::new(cols[(n, 2)], cols[(n, 3)]) * rot;
            amps[n] = (plus + minus) * h;
            amps[d + n] = (plus - minus) * h;
        }
    }

    /// In-place `exp(iv X⊗σ_y)`.
    pub fn apply_v(&self, v: f64, psi: &mut JointState) {
        if v == 0.0 {
            return;
        }
        let d = self.cfg.dim();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = psi.amplitudes_mut();
        // components along |±i⟩ = (|0⟩ ± i|1⟩)/√2
        let mut cols = DMatrix::<f64>::zeros(d, 4);
        for n in 0..d {
            let plus = (amps[n] - I * amps[d + n]) * h;
            let minus = (amps[n] + I * amps[d + n]) * h;
            cols[(n, 0)] = plus.re;
            cols[(n, 1)] = plus.im;
            cols[(n, 2)] = minus.re;
            cols[(n, 3)] = minus.im;
        }
        self.exp_x_pair(v, &mut cols);
        for n in 0..d {
            let plus = C64::new(cols[(n, 0)], cols[(n, 1)]);
            let minus = C64::new(cols[(n, 2)], cols[(n, 3)]);
            amps[n] = (plus + minus) * h;
            amps[d + n] = I * (plus - minus) * h;
        }
    }

    pub fn apply(&self, generator: Generator, theta: f64, psi: &mut JointState) {
        match generator {
            Generator::PSigmaX => self.apply_u(theta, psi),
            Generator::XSigmaY => self.apply_v(theta, psi),
        }
    }

    /// Joint eigendecomposition of a Rabi generator, assembled from the
    /// oscillator eigenvectors and the qubit eigenbasis.
    pub fn eigencache(&self, generator: Generator) -> EigenCache {
        let d = self.cfg.dim();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (q_plus, q_minus) = match generator {
            Generator::PSigmaX => ([ONE * h, ONE * h], [ONE * h, -ONE * h]),
            Generator::XSigmaY => ([ONE * h, I * h], [ONE * h, -I * h]),
        };
        let mut basis = DMatrix::zeros(2 * d, 2 * d);
        let mut eigvals = DVector::zeros(2 * d);
        for j in 0..d {
            for n in 0..d {
                let osc = match generator {
                    Generator::PSigmaX => C64::new(self.w[(n, j)], 0.0) * neg_i_pow(n).conj(),
                    Generator::XSigmaY => C64::new(self.w[(n, j)], 0.0),
                };
                basis[(n, j)] = q_plus[0] * osc;
                basis[(d + n, j)] = q_plus[1] * osc;
                basis[(n, d + j)] = q_minus[0] * osc;
                basis[(d + n, d + j)] = q_minus[1] * osc;
            }
            eigvals[j] = self.nodes[j];
            eigvals[d + j] = -self.nodes[j];
        }
        EigenCache::from_parts(basis, eigvals)
    }

    /// Dense `exp(iθ G)` on the joint space.
    pub fn gate(&self, generator: Generator, theta: f64) -> Operator {
        if theta == 0.0 {
            return Operator::identity(self.cfg.joint_dim());
        }
        self.eigencache(generator).exp_i(theta)
    }
}

/// `(−i)ⁿ`.
fn neg_i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => ONE,
        1 => -I,
        2 => -ONE,
        _ => I,
    }
}

/// Dense `exp(iu P⊗σ_x)`.
pub fn rabi_u(u: f64, cfg: &FockConfig) -> Result<Operator> {
    Ok(RabiGates::new(cfg)?.gate(Generator::PSigmaX, u))
}

/// Dense `exp(iv X⊗σ_y)`.
pub fn rabi_v(v: f64, cfg: &FockConfig) -> Result<Operator> {
    Ok(RabiGates::new(cfg)?.gate(Generator::XSigmaY, v))
}
