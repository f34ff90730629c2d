//! Squeezed vacuum approximated by a Gaussian-weighted lattice of coherent
//! states on the real axis, `Σ_s e^{−α_s²/(Δ⁻²−1)} |α_s⟩` with
//! `α_s = dα (s + ½)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{coherent_amplitude, ln_factorials, FockConfig, OscillatorState, C64};
use crate::metrics::{fidelity_to_amplitudes, fmt_sig, squeezing_db, SqueezedTargets};

pub const DEFAULT_TRUNC_TOL: f64 = 1e-10;
/// Cutoff that holds lattice states and targets up to 20 dB.
pub const SCAN_CUTOFF: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d_alpha: f64,
    pub delta_db: f64,
    #[serde(default = "default_trunc_tol")]
    pub trunc_tol: f64,
}

fn default_trunc_tol() -> f64 {
    DEFAULT_TRUNC_TOL
}

impl LatticeSpec {
    pub fn new(d_alpha: f64, delta_db: f64) -> Result<Self> {
        let s = Self { d_alpha, delta_db, trunc_tol: DEFAULT_TRUNC_TOL };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_alpha > 0.0 && self.d_alpha.is_finite()) {
            return Err(Error::Invalid(format!("lattice spacing {} must be positive", self.d_alpha)));
        }
        if !(self.delta_db > 0.0 && self.delta_db.is_finite()) {
            return Err(Error::Invalid(format!("target squeezing {} dB must be positive", self.delta_db)));
        }
        if !(self.trunc_tol > 0.0 && self.trunc_tol < 1.0) {
            return Err(Error::Invalid(format!("truncation tolerance {} must lie in (0, 1)", self.trunc_tol)));
        }
        Ok(())
    }

    /// `Δ⁻² − 1` with `Δ² = 10^{−Δ_dB/10}`.
    fn envelope_scale(&self) -> f64 {
        10f64.powf(self.delta_db / 10.0) - 1.0
    }

    /// Lattice points and envelope weights; `s = −1, 0` are always kept.
    pub fn terms(&self) -> Vec<(f64, f64)> {
        let scale = self.envelope_scale();
        let weight = |a: f64| (-a * a / scale).exp();
        let mut out = Vec::new();
        for s in 0.. {
            let a = self.d_alpha * (s as f64 + 0.5);
            let w = weight(a);
            if s > 0 && w < self.trunc_tol {
                break;
            }
            out.push((a, w));
            out.push((-a, w));
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        out
    }
}

/// The normalized lattice state. Fails with a leak error when the Fock
/// truncation loses more than `leak_tol` of the exact norm.
pub fn lattice_superposition(spec: &LatticeSpec, cfg: &FockConfig) -> Result<OscillatorState> {
    spec.validate()?;
    cfg.validate()?;
    let terms = spec.terms();
    let d = cfg.dim();
    let lf = ln_factorials(d);
    let mut amps = DVector::<C64>::zeros(d);
    for &(a, w) in &terms {
        let alpha = C64::new(a, 0.0);
        for n in 0..d {
            amps[n] += coherent_amplitude(alpha, n, &lf) * w;
        }
    }
    // ⟨β|α⟩ = e^{−(α−β)²/2} for real amplitudes
    let exact: f64 = terms
        .iter()
        .flat_map(|&(a, wa)| terms.iter().map(move |&(b, wb)| wa * wb * (-(a - b) * (a - b) / 2.0).exp()))
        .sum();
    let kept = amps.norm_squared();
    let leaked = 1.0 - kept / exact;
    if leaked > cfg.leak_tol {
        return Err(Error::Leak { cutoff: cfg.cutoff, leaked, tol: cfg.leak_tol });
    }
    OscillatorState::from_amplitudes(amps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxRow {
    pub d_alpha: f64,
    pub delta_db_target: f64,
    pub squeeze_db: f64,
    pub antisqueeze_db: f64,
    pub fidelity: f64,
}

impl ApproxRow {
    pub const CSV_HEADER: &'static str = "d_alpha,delta_db_target,squeeze_db,antisqueeze_db,fidelity";

    pub fn csv_row(&self) -> String {
        [self.d_alpha, self.delta_db_target, self.squeeze_db, self.antisqueeze_db, self.fidelity]
            .map(fmt_sig)
            .join(",")
    }
}

/// Squeezing and fidelity to the target squeezed vacuum for every grid
/// point, target-major.
pub fn approx_scan(d_alpha_grid: &[f64], delta_db_grid: &[f64], cfg: &FockConfig) -> Result<Vec<ApproxRow>> {
    if d_alpha_grid.is_empty() || delta_db_grid.is_empty() {
        return Err(Error::Invalid("approximation scan needs non-empty grids".into()));
    }
    let mut targets = SqueezedTargets::new(cfg.cutoff);
    let mut rows = Vec::with_capacity(d_alpha_grid.len() * delta_db_grid.len());
    for &db in delta_db_grid {
        let target = targets.target(db)?;
        for &da in d_alpha_grid {
            rows.push(scan_point(&LatticeSpec::new(da, db)?, &target, cfg)?);
        }
    }
    Ok(rows)
}

fn scan_point(spec: &LatticeSpec, target: &DVector<C64>, cfg: &FockConfig) -> Result<ApproxRow> {
    let state = lattice_superposition(spec, cfg)?;
    let (sq, anti) = squeezing_db(&state);
    Ok(ApproxRow {
        d_alpha: spec.d_alpha,
        delta_db_target: spec.delta_db,
        squeeze_db: sq,
        antisqueeze_db: anti,
        fidelity: fidelity_to_amplitudes(&state, target)?,
    })
}
