//! Figures of merit for oscillator states: quadrature moments, squeezing in
//! dB, fidelity to squeezed vacuum, the momentum-quadrature density and the
//! classical (homodyne) Fisher information.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::EigenCache;
use crate::hilbert::{even_squeeze_generator, squeezed_from_cache, FockConfig, OscillatorState, C64};

/// Default momentum grid.
pub const DEFAULT_P_RANGE: (f64, f64) = (-8.0, 8.0);
pub const DEFAULT_P_POINTS: usize = 4001;

/// Relative floor below which density points are left out of the Fisher
/// integrand.
const FISHER_FLOOR: f64 = 1e-12;
/// Maximum relative change of the Fisher estimate when the spacing doubles.
const FISHER_STABILITY: f64 = 5e-3;

/// First and central second moments of the quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
}

/// Accumulates `⟨X⟩, ⟨P⟩, ⟨X²⟩, ⟨P²⟩` of an unnormalized pure component,
/// using the tridiagonal structure of `a`.
pub(crate) fn raw_moments_pure(psi: &[C64]) -> [f64; 4] {
    let d = psi.len();
    // ⟨a⟩, ⟨a²⟩, ⟨a†a⟩ and the top-level correction for the truncated a a†
    let mut a1 = C64::new(0.0, 0.0);
    let mut a2 = C64::new(0.0, 0.0);
    let mut num = 0.0;
    for n in 1..d {
        let sn = (n as f64).sqrt();
        a1 += psi[n - 1].conj() * psi[n] * sn;
        num += n as f64 * psi[n].norm_sqr();
        if n >= 2 {
            a2 += psi[n - 2].conj() * psi[n] * (sn * ((n - 1) as f64).sqrt());
        }
    }
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    // truncated a a† = a†a + 1 − (c+1)|c⟩⟨c|
    let top = d as f64 * psi[d - 1].norm_sqr();
    let aad = num + norm - top;
    let sym = num + aad;
    let s2 = std::f64::consts::SQRT_2;
    [s2 * a1.re, s2 * a1.im, 0.5 * (2.0 * a2.re + sym), 0.5 * (sym - 2.0 * a2.re)]
}

pub(crate) fn raw_moments_mixed(rho: &DMatrix<C64>) -> [f64; 4] {
    let d = rho.nrows();
    let mut a1 = C64::new(0.0, 0.0);
    let mut a2 = C64::new(0.0, 0.0);
    let mut num = 0.0;
    let mut norm = 0.0;
    for n in 0..d {
        norm += rho[(n, n)].re;
        if n >= 1 {
            let sn = (n as f64).sqrt();
            // Tr(a ρ) = Σ √n ρ[n, n−1]
            a1 += rho[(n, n - 1)] * sn;
            num += n as f64 * rho[(n, n)].re;
        }
        if n >= 2 {
            a2 += rho[(n, n - 2)] * ((n as f64) * (n - 1) as f64).sqrt();
        }
    }
    let top = d as f64 * rho[(d - 1, d - 1)].re;
    let sym = 2.0 * num + norm - top;
    let s2 = std::f64::consts::SQRT_2;
    [s2 * a1.re, s2 * a1.im, 0.5 * (2.0 * a2.re + sym), 0.5 * (sym - 2.0 * a2.re)]
}

pub(crate) fn finish_moments(raw: [f64; 4], norm: f64) -> Moments {
    let [x, p, x2, p2] = raw.map(|v| v / norm);
    Moments { mean_x: x, mean_p: p, var_x: x2 - x * x, var_p: p2 - p * p }
}

/// Means and central variances of X and P.
pub fn moments(s: &OscillatorState) -> Moments {
    match s {
        OscillatorState::Pure { amps, .. } => finish_moments(raw_moments_pure(amps.as_slice()), amps.norm_squared()),
        OscillatorState::Mixed { rho, .. } => finish_moments(raw_moments_mixed(rho), rho.trace().re),
    }
}

/// `−10 log₁₀(2 var)`: squeezing relative to vacuum in dB.
pub fn variance_to_db(var: f64) -> f64 {
    -10.0 * (2.0 * var).log10()
}

/// `(squeeze_db, antisqueeze_db)` for P and X respectively.
pub fn squeezing_db(s: &OscillatorState) -> (f64, f64) {
    let m = moments(s);
    (variance_to_db(m.var_p), variance_to_db(m.var_x))
}

/// `⟨ψ_t|ρ|ψ_t⟩` for a pure target.
pub fn fidelity(s: &OscillatorState, target: &OscillatorState) -> Result<f64> {
    let t = target
        .amplitudes()
        .ok_or_else(|| Error::Invalid("fidelity target must be a pure state".into()))?;
    fidelity_to_amplitudes(s, t)
}

pub(crate) fn fidelity_to_amplitudes(s: &OscillatorState, t: &DVector<C64>) -> Result<f64> {
    if t.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), got: t.len() });
    }
    let f = match s {
        OscillatorState::Pure { amps, .. } => t.dotc(amps).norm_sqr(),
        OscillatorState::Mixed { rho, .. } => t.dotc(&(rho * t)).re,
    };
    Ok(f.max(0.0))
}

/// Momentum-quadrature probability density sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub p_min: f64,
    pub p_max: f64,
    pub n_points: usize,
    pub values: Vec<f64>,
}

impl QuadratureGrid {
    pub fn spacing(&self) -> f64 {
        (self.p_max - self.p_min) / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.p_min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.point(i))
    }

    /// Trapezoidal integral of `f(p) q(p)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let h = self.spacing();
        let n = self.n_points;
        let inner: f64 = (1..n - 1).map(|i| f(self.point(i)) * self.values[i]).sum();
        h * (inner + 0.5 * (f(self.p_min) * self.values[0] + f(self.p_max) * self.values[n - 1]))
    }

    pub fn total(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// Every other point, doubling the spacing.
    pub fn coarsened(&self) -> QuadratureGrid {
        QuadratureGrid {
            p_min: self.p_min,
            p_max: self.p_max,
            n_points: self.n_points.div_ceil(2),
            values: self.values.iter().step_by(2).copied().collect(),
        }
    }
}

/// Real Hermite functions `ψ_n(p)`, n = 0..d, by the stable three-term recurrence.
pub(crate) fn hermite_functions(p: f64, d: usize, out: &mut [f64]) {
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * p * p).exp();
    if d > 1 {
        out[1] = std::f64::consts::SQRT_2 * p * out[0];
    }
    for n in 1..d - 1 {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * p * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// `q(p) = Σ ρ_mn φ_m(p) φ_n*(p)` with `φ_n(p) = (−i)ⁿ ψ_n(p)`.
pub fn p_density(s: &OscillatorState, p_min: f64, p_max: f64, n_points: usize) -> Result<QuadratureGrid> {
    quadrature_density(s, p_min, p_max, n_points, true)
}

/// Position density `Σ ρ_mn ψ_m(x) ψ_n(x)`, with the same grid checks as [`p_density`].
pub fn x_density(s: &OscillatorState, x_min: f64, x_max: f64, n_points: usize) -> Result<QuadratureGrid> {
    quadrature_density(s, x_min, x_max, n_points, false)
}

fn quadrature_density(s: &OscillatorState, p_min: f64, p_max: f64, n_points: usize, momentum: bool) -> Result<QuadratureGrid> {
    let phase = |n: usize| if momentum { neg_i_pow(n) } else { C64::new(1.0, 0.0) };
    if n_points < 5 || n_points.is_multiple_of(2) || !(p_max > p_min) {
        return Err(Error::Invalid(format!(
            "quadrature grid needs an odd point count ≥ 5 and p_max > p_min (got {n_points}, [{p_min}, {p_max}])"
        )));
    }
    let d = s.dim();
    let h = (p_max - p_min) / (n_points - 1) as f64;
    let mut basis = DMatrix::<f64>::zeros(n_points, d);
    let mut row = vec![0.0; d];
    for i in 0..n_points {
        hermite_functions(p_min + i as f64 * h, d, &mut row);
        for n in 0..d {
            basis[(i, n)] = row[n];
        }
    }
    let values: Vec<f64> = match s {
        OscillatorState::Pure { amps, .. } => {
            // ψ(p) = Σ c_n (−i)ⁿ ψ_n(p)
            let (re, im): (DVector<f64>, DVector<f64>) = {
                let rot: Vec<C64> = amps.iter().enumerate().map(|(n, c)| c * phase(n)).collect();
                (DVector::from_iterator(d, rot.iter().map(|z| z.re)), DVector::from_iterator(d, rot.iter().map(|z| z.im)))
            };
            let a = &basis * re;
            let b = &basis * im;
            a.iter().zip(b.iter()).map(|(x, y)| x * x + y * y).collect()
        }
        OscillatorState::Mixed { rho, .. } => {
            // Re(ρ_mn (−i)^m iⁿ) is the real symmetric kernel of the quadratic form
            let kernel = DMatrix::<f64>::from_fn(d, d, |m, n| (rho[(m, n)] * phase(m) * phase(n).conj()).re);
            let bk = &basis * kernel;
            (0..n_points).map(|i| bk.row(i).dot(&basis.row(i))).collect()
        }
    };
    let norm = s.trace();
    let values: Vec<f64> = values.into_iter().map(|v| v / norm).collect();
    let edge = values[0].max(values[n_points - 1]);
    if edge >= 1e-10 {
        return Err(Error::GridTooSmall(edge));
    }
    // integrated mixed states carry slightly negative eigenvalues at the level
    // of the integrator error; tolerate those and clip them
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if values.iter().any(|v| *v < -1e-5 * peak || !v.is_finite()) {
        return Err(Error::Invalid("quadrature density has negative or non-finite samples".into()));
    }
    let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
    let grid = QuadratureGrid { p_min, p_max, n_points, values };
    let total = grid.total();
    if (total - 1.0).abs() > 1e-4 {
        return Err(Error::Invalid(format!("quadrature density integrates to {total}")));
    }
    Ok(grid)
}

/// Density on the default grid `p ∈ [−8, 8]`, 4001 points.
pub fn p_density_default(s: &OscillatorState) -> Result<QuadratureGrid> {
    p_density(s, DEFAULT_P_RANGE.0, DEFAULT_P_RANGE.1, DEFAULT_P_POINTS)
}

/// Density on the default grid, widened at fixed spacing (×1.5 per try, up
/// to |p| ≤ 40) while the endpoint guard fails.
pub fn p_density_adaptive(s: &OscillatorState) -> Result<QuadratureGrid> {
    let spacing = (DEFAULT_P_RANGE.1 - DEFAULT_P_RANGE.0) / (DEFAULT_P_POINTS - 1) as f64;
    let mut half = DEFAULT_P_RANGE.1;
    loop {
        let n = 2 * (half / spacing).round() as usize + 1;
        match p_density(s, -half, half, n) {
            Err(Error::GridTooSmall(_)) if half * 1.5 <= 40.0 => half *= 1.5,
            other => return other,
        }
    }
}

/// Fisher information of `s` on the adaptive grid, halving the spacing (at
/// most three times) while the refinement check fails.
pub fn fisher_information_adaptive(s: &OscillatorState) -> Result<f64> {
    let mut grid = p_density_adaptive(s)?;
    for _ in 0..3 {
        match fisher_information(&grid) {
            Err(Error::UnstableEstimate { .. }) => {
                grid = p_density(s, grid.p_min, grid.p_max, 2 * grid.n_points - 1)?;
            }
            other => return other,
        }
    }
    fisher_information(&grid)
}

fn fisher_on_grid(grid: &QuadratureGrid) -> f64 {
    let h = grid.spacing();
    let q = &grid.values;
    let qmax = q.iter().cloned().fold(0.0, f64::max);
    let floor = FISHER_FLOOR * qmax;
    let mut acc = 0.0;
    for i in 1..q.len() - 1 {
        if q[i] < floor {
            continue;
        }
        let dq = (q[i + 1] - q[i - 1]) / (2.0 * h);
        acc += dq * dq / q[i];
    }
    2.0 * acc * h
}

/// `I_C = 2 ∫ (∂_p q)² / q dp`, with a spacing-doubling stability check.
pub fn fisher_information(grid: &QuadratureGrid) -> Result<f64> {
    if grid.n_points < 9 || grid.n_points.is_multiple_of(2) {
        return Err(Error::Invalid("Fisher information needs an odd grid of at least 9 points".into()));
    }
    let fine = fisher_on_grid(grid);
    let coarse = fisher_on_grid(&grid.coarsened());
    if !fine.is_finite() || (fine - coarse).abs() > FISHER_STABILITY * fine.abs() {
        return Err(Error::UnstableEstimate { fine, coarse });
    }
    Ok(fine)
}

/// Squeezing (dB) of the Gaussian state with the same Fisher information.
pub fn gaussian_equiv_db(fisher: f64) -> Result<f64> {
    if !(fisher > 0.0) {
        return Err(Error::NonPositive(fisher));
    }
    Ok(10.0 * (fisher / 4.0).log10())
}

/// Pure P-squeezed vacuum targets restricted to a fixed cutoff. Targets too
/// wide for that cutoff are built on a larger space and truncated without
/// renormalization, so fidelities stay exact.
pub(crate) struct SqueezedTargets {
    cutoff: usize,
    caches: Vec<(FockConfig, EigenCache)>,
}

impl SqueezedTargets {
    pub(crate) fn new(cutoff: usize) -> Self {
        Self { cutoff, caches: Vec::new() }
    }

    fn cache(&mut self, level: usize) -> Result<&(FockConfig, EigenCache)> {
        while self.caches.len() <= level {
            let c = (self.cutoff + 1) * (1 << self.caches.len()) - 1;
            let cfg = FockConfig::with_cutoff(c)?;
            let cache = EigenCache::new(&even_squeeze_generator(c))?;
            self.caches.push((cfg, cache));
        }
        Ok(&self.caches[level])
    }

    pub(crate) fn target(&mut self, delta_db: f64) -> Result<DVector<C64>> {
        for level in 0..6 {
            let (cfg, cache) = self.cache(level)?;
            let cfg = *cfg;
            match squeezed_from_cache(delta_db, cache, &cfg) {
                Ok(state) => {
                    let amps = state.amplitudes().expect("squeezed vacuum is pure");
                    return Ok(amps.rows(0, self.cutoff + 1).into_owned());
                }
                Err(Error::Leak { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Invalid(format!("squeezed vacuum at {delta_db} dB does not fit any cache level")))
    }
}

/// Maximizes the fidelity to a pure squeezed vacuum over `Δ_dB ∈ [0, 20]`
/// by golden-section search; returns `(fidelity, delta_db)`.
pub fn best_fit_squeezed_fidelity(s: &OscillatorState) -> Result<(f64, f64)> {
    let mut targets = SqueezedTargets::new(s.cutoff());
    let mut f = |db: f64| -> Result<f64> { fidelity_to_amplitudes(s, &targets.target(db)?) };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 20.0f64);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > 1e-4 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    let best = [(f(lo)?, lo), (f(mid)?, mid), (f(hi)?, hi), (f1, x1), (f2, x2)]
        .into_iter()
        .fold((f64::NEG_INFINITY, 0.0), |acc, c| if c.0 > acc.0 { c } else { acc });
    Ok(best)
}

fn neg_i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// One row of figures of merit for a prepared oscillator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    #[serde(rename = "N")]
    pub n_steps: usize,
    pub squeeze_db: f64,
    pub antisqueeze_db: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub fidelity: f64,
    pub fisher: f64,
    pub fisher_equiv_db: f64,
    pub postselect_prob: f64,
    pub noise_type: String,
    #[serde(rename = "gamma_T")]
    pub gamma_t: f64,
    pub postselected: bool,
}

impl MetricsRecord {
    pub const CSV_HEADER: &'static str =
        "N,squeeze_db,antisqueeze_db,fidelity,fisher,fisher_equiv_db,postselect_prob,noise_type,gamma_T,postselected";

    /// Evaluates every figure of merit on `state`.
    pub fn evaluate(
        state: &OscillatorState,
        n_steps: usize,
        noise_type: &str,
        gamma_t: f64,
        postselected: bool,
        postselect_prob: f64,
    ) -> Result<Self> {
        let m = moments(state);
        let (fid, _) = best_fit_squeezed_fidelity(state)?;
        let fisher = fisher_information_adaptive(state)?;
        Ok(Self {
            n_steps,
            squeeze_db: variance_to_db(m.var_p),
            antisqueeze_db: variance_to_db(m.var_x),
            mean_x: m.mean_x,
            mean_p: m.mean_p,
            fidelity: fid,
            fisher,
            fisher_equiv_db: gaussian_equiv_db(fisher)?,
            postselect_prob,
            noise_type: noise_type.to_string(),
            gamma_t,
            postselected,
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.n_steps,
            fmt_sig(self.squeeze_db),
            fmt_sig(self.antisqueeze_db),
            fmt_sig(self.fidelity),
            fmt_sig(self.fisher),
            fmt_sig(self.fisher_equiv_db),
            fmt_sig(self.postselect_prob),
            self.noise_type,
            fmt_sig(self.gamma_t),
            u8::from(self.postselected)
        )
    }
}

/// Formats a float with 9 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..9).contains(&mag) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}
