//! Interaction schedules and the N-step protocol `Π_k V_k U_k |vac⟩|0⟩`,
//! with the optional final qubit measurement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::RabiGates;
use crate::hilbert::{FockConfig, JointDensity, JointState, OscillatorState};
use crate::metrics::{finish_moments, raw_moments_pure, Moments};

/// The 2N interaction strengths `u_k` (for `P⊗σ_x`) and `v_k` (for `X⊗σ_y`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct InteractionSchedule {
    u: Vec<f64>,
    v: Vec<f64>,
    lattice_scale: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "L")]
    lattice_scale: Option<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl TryFrom<RawSchedule> for InteractionSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        if raw.u.len() != raw.n {
            return Err(Error::Invalid(format!("schedule declares N = {} but has {} u entries", raw.n, raw.u.len())));
        }
        Self::new(raw.u, raw.v, raw.lattice_scale)
    }
}

impl From<InteractionSchedule> for RawSchedule {
    fn from(s: InteractionSchedule) -> Self {
        RawSchedule { n: s.u.len(), lattice_scale: s.lattice_scale, u: s.u, v: s.v }
    }
}

impl InteractionSchedule {
    pub fn new(u: Vec<f64>, v: Vec<f64>, lattice_scale: Option<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::Invalid("schedule needs at least one step".into()));
        }
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Invalid("schedule entries must be finite".into()));
        }
        if let Some(l) = lattice_scale {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Invalid(format!("lattice scale {l} must be positive")));
            }
        }
        Ok(Self { u, v, lattice_scale })
    }

    /// Schedule with every interaction switched off.
    pub fn zero(n_steps: usize) -> Result<Self> {
        Self::new(vec![0.0; n_steps], vec![0.0; n_steps], None)
    }

    /// Builds a schedule from the flat parameter vector `(u₁..u_N, v₁..v_N)`.
    pub fn from_params(params: &[f64], lattice_scale: Option<f64>) -> Result<Self> {
        if !params.len().is_multiple_of(2) {
            return Err(Error::Invalid("parameter vector must have even length".into()));
        }
        let n = params.len() / 2;
        Self::new(params[..n].to_vec(), params[n..].to_vec(), lattice_scale)
    }

    pub fn params(&self) -> Vec<f64> {
        self.u.iter().chain(self.v.iter()).copied().collect()
    }

    pub fn n_steps(&self) -> usize {
        self.u.len()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn lattice_scale(&self) -> Option<f64> {
        self.lattice_scale
    }

    /// `Σ (|u_k| + |v_k|)` in units of the interaction time scale T.
    pub fn total_duration(&self) -> f64 {
        self.u.iter().chain(self.v.iter()).map(|x| x.abs()).sum()
    }
}

/// The analytic schedule: `u₁ = 2^{N−1}√2 L`, `u_k = −2^{N−k}√2 L` for k > 1,
/// `v_k = 2^{−(N−k)} π/(4√2 L)` for k < N and `v_N = −π/(4√2 L)`.
pub fn analytic_schedule(n_steps: usize, lattice_scale: f64) -> Result<InteractionSchedule> {
    if n_steps == 0 {
        return Err(Error::Invalid("N must be at least 1".into()));
    }
    if !(lattice_scale > 0.0 && lattice_scale.is_finite()) {
        return Err(Error::Invalid(format!("lattice scale {lattice_scale} must be positive")));
    }
    let n = n_steps as i32;
    let s2l = std::f64::consts::SQRT_2 * lattice_scale;
    let v_unit = std::f64::consts::PI / (4.0 * s2l);
    let u = (1..=n)
        .map(|k| if k == 1 { 2f64.powi(n - 1) * s2l } else { -(2f64.powi(n - k)) * s2l })
        .collect();
    let v = (1..=n).map(|k| if k < n { 2f64.powi(-(n - k)) * v_unit } else { -v_unit }).collect();
    InteractionSchedule::new(u, v, Some(lattice_scale))
}

/// Final joint state of a protocol run.
#[derive(Debug, Clone, PartialEq)]
pub enum JointOutput {
    Pure(JointState),
    Mixed(JointDensity),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub joint: JointOutput,
    /// Oscillator with the qubit traced out.
    pub deterministic: OscillatorState,
    /// Oscillator conditioned on measuring the qubit in |0⟩.
    pub postselected: OscillatorState,
    pub postselect_prob: f64,
}

impl ProtocolResult {
    pub(crate) fn from_pure(psi: JointState) -> Result<Self> {
        let deterministic = psi.reduced_oscillator();
        let (postselected, postselect_prob) = psi.project_qubit(0)?;
        Ok(Self { joint: JointOutput::Pure(psi), deterministic, postselected, postselect_prob })
    }

    pub(crate) fn from_density(rho: JointDensity) -> Result<Self> {
        let deterministic = crate::hilbert::partial_trace_qubit(&rho);
        let (postselected, postselect_prob) = rho.project_qubit(0)?;
        Ok(Self { joint: JointOutput::Mixed(rho), deterministic, postselected, postselect_prob })
    }

    /// The deterministic or postselected oscillator state.
    pub fn branch(&self, postselected: bool) -> &OscillatorState {
        if postselected {
            &self.postselected
        } else {
            &self.deterministic
        }
    }
}

/// Noiseless protocol simulator holding the cached gate eigenbases.
#[derive(Debug, Clone)]
pub struct Simulator {
    gates: RabiGates,
}

impl Simulator {
    pub fn new(cfg: &FockConfig) -> Result<Self> {
        Ok(Self { gates: RabiGates::new(cfg)? })
    }

    pub fn config(&self) -> &FockConfig {
        self.gates.config()
    }

    pub fn gates(&self) -> &RabiGates {
        &self.gates
    }

    /// `V_N U_N ⋯ V_1 U_1 |0⟩|vac⟩`, checking for leakage after every gate.
    pub fn evolve(&self, s: &InteractionSchedule) -> Result<JointState> {
        let cfg = self.gates.config();
        let mut psi = JointState::ground_vacuum(cfg);
        for (&u, &v) in s.u().iter().zip(s.v()) {
            self.gates.apply_u(u, &mut psi);
            psi.check_leak(cfg)?;
            self.gates.apply_v(v, &mut psi);
            psi.check_leak(cfg)?;
        }
        Ok(psi)
    }

    pub fn run(&self, s: &InteractionSchedule) -> Result<ProtocolResult> {
        ProtocolResult::from_pure(self.evolve(s)?)
    }

    /// Quadrature moments of the deterministic or postselected output, and
    /// the postselection probability, without forming density matrices.
    pub fn output_moments(&self, s: &InteractionSchedule, postselected: bool) -> Result<(Moments, f64)> {
        let psi = self.evolve(s)?;
        let d = self.config().dim();
        let amps = psi.amplitudes().as_slice();
        let ground = &amps[..d];
        let excited = &amps[d..];
        let raw0 = raw_moments_pure(ground);
        let p0: f64 = ground.iter().map(|z| z.norm_sqr()).sum();
        if postselected {
            if p0 < 1e-12 {
                return Err(Error::ZeroProbability(p0));
            }
            return Ok((finish_moments(raw0, p0), p0));
        }
        let raw1 = raw_moments_pure(excited);
        let total = [raw0[0] + raw1[0], raw0[1] + raw1[1], raw0[2] + raw1[2], raw0[3] + raw1[3]];
        Ok((finish_moments(total, psi.norm_squared()), p0))
    }
}

/// Runs the noiseless protocol.
pub fn run_unitary(s: &InteractionSchedule, cfg: &FockConfig) -> Result<ProtocolResult> {
    Simulator::new(cfg)?.run(s)
}

/// Counts the local maxima of the X-quadrature density of the deterministic
/// output on a 0.01-spaced grid. Requires the well-separated regime
/// `2^N L ≥ 6`.
pub fn peak_count_check(s: &InteractionSchedule, cfg: &FockConfig) -> Result<usize> {
    let l = s
        .lattice_scale()
        .ok_or_else(|| Error::Regime("peak counting needs a schedule with a lattice scale".into()))?;
    let spread = 2f64.powi(s.n_steps() as i32) * l;
    if spread < 6.0 {
        return Err(Error::Regime(format!("2^N·L = {spread} < 6")));
    }
    let out = run_unitary(s, cfg)?;
    let half = std::f64::consts::SQRT_2 * spread + 8.0;
    let n_points = (2.0 * half / 0.01).round() as usize + 1;
    let grid = crate::metrics::x_density(&out.deterministic, -half, half, n_points | 1)?;
    Ok(count_peaks(&grid.values))
}

/// Strict local maxima above 1e−6 of the global maximum; equal-valued
/// plateaus count once.
pub(crate) fn count_peaks(values: &[f64]) -> usize {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-6 * max;
    let mut peaks = 0;
    let mut i = 1;
    while i + 1 < values.len() {
        let mut j = i;
        while j + 1 < values.len() && values[j + 1] == values[i] {
            j += 1;
        }
        if j + 1 < values.len() && values[i] > values[i - 1] && values[i] > values[j + 1] && values[i] > floor {
            peaks += 1;
        }
        i = j + 1;
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent, C64};
    use crate::metrics::{fidelity, moments, squeezing_db};

    fn cfg(c: usize) -> FockConfig {
        FockConfig::with_cutoff(c).unwrap()
    }

    #[test]
    fn analytic_values() {
        // direct arithmetic: √2·0.45 = 0.636396, π/(4√2·0.45) = 1.234134
        let s = analytic_schedule(1, 0.45).unwrap();
        assert!((s.u()[0] - 0.6364).abs() < 1e-4 && (s.v()[0] + 1.2342).abs() < 1e-4);
        let s = analytic_schedule(2, 0.45).unwrap();
        let want_u = [1.2728, -0.6364];
        let want_v = [0.6171, -1.2342];
        for k in 0..2 {
            assert!((s.u()[k] - want_u[k]).abs() < 1e-4);
            assert!((s.v()[k] - want_v[k]).abs() < 1e-4);
        }
        assert!(analytic_schedule(0, 0.45).is_err());
        assert!(analytic_schedule(2, 0.0).is_err());
    }

    #[test]
    fn u_sums_telescope() {
        for n in 1..=6 {
            for l in [0.3, 0.45, 1.7] {
                let s = analytic_schedule(n, l).unwrap();
                let sum: f64 = s.u().iter().sum();
                assert!((sum - 2f64.sqrt() * l).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn schedule_json_shape() {
        let s = analytic_schedule(2, 0.45).unwrap();
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["N"], 2);
        assert_eq!(json["L"], 0.45);
        let back: InteractionSchedule = serde_json::from_value(json).unwrap();
        assert_eq!(back, s);
        let free = InteractionSchedule::new(vec![0.1], vec![0.2], None).unwrap();
        assert_eq!(serde_json::to_value(&free).unwrap()["L"], serde_json::Value::Null);
        assert!(serde_json::from_str::<InteractionSchedule>(r#"{"N":2,"L":null,"u":[1.0],"v":[1.0]}"#).is_err());
        assert!(serde_json::from_str::<InteractionSchedule>(r#"{"N":1,"L":null,"u":[1.0],"v":[1.0],"w":0}"#).is_err());
    }

    #[test]
    fn zero_schedule_gives_vacuum() {
        let c = cfg(30);
        let out = run_unitary(&InteractionSchedule::zero(3).unwrap(), &c).unwrap();
        assert_eq!(out.postselect_prob, 1.0);
        let (sq, anti) = squeezing_db(&out.deterministic);
        assert!(sq.abs() < 1e-12 && anti.abs() < 1e-12);
        assert!((fidelity(&out.postselected, &OscillatorState::vacuum(&c)).unwrap() - 1.0).abs() < 1e-12);
    }

    fn cat(l: f64, sign: f64, c: &FockConfig) -> OscillatorState {
        let plus = coherent(C64::new(l, 0.0), c).unwrap();
        let minus = coherent(C64::new(-l, 0.0), c).unwrap();
        let amps = plus.amplitudes().unwrap() + minus.amplitudes().unwrap() * C64::new(sign, 0.0);
        OscillatorState::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn single_step_schedule_ends_in_even_cat_with_qubit_ground() {
        // N = 1 has v₁ = v_N < 0: V₁U₁|vac⟩|0⟩ ≈ (|L⟩ + |−L⟩)|0⟩
        let c = cfg(100);
        let l = 3.0;
        let out = run_unitary(&analytic_schedule(1, l).unwrap(), &c).unwrap();
        let f = fidelity(&out.deterministic, &cat(l, 1.0, &c)).unwrap();
        assert!(f > 0.98, "{f}");
        let m = moments(&out.deterministic);
        assert!((m.var_x - (2.0 * l * l + 0.5)).abs() < 0.01 * (2.0 * l * l));
        let JointOutput::Pure(psi) = &out.joint else { panic!() };
        assert!(psi.reduced_qubit()[(0, 0)].re > 0.98);
    }

    /// V₁U₁|vac⟩|0⟩ from coherent states: U₁ gives (|−a⟩|+⟩ + |a⟩|−⟩)/√2 with
    /// a = u/√2, and on the σ_y = ±1 components exp(ivX) is the displacement
    /// D(±iv/√2), with D(β)|α⟩ = e^{i Im(βα*)}|α+β⟩.
    fn single_step_oracle(u: f64, v: f64, c: &FockConfig) -> JointState {
        let a = u / std::f64::consts::SQRT_2;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [C64::new(s, 0.0), C64::new(s, 0.0)];
        let minus = [C64::new(s, 0.0), C64::new(-s, 0.0)];
        let y_eig = [[C64::new(s, 0.0), C64::new(0.0, s)], [C64::new(s, 0.0), C64::new(0.0, -s)]];
        let d = c.dim();
        let mut amps = nalgebra::DVector::<C64>::zeros(2 * d);
        for (alpha, qubit) in [(-a, plus), (a, minus)] {
            for (sign, e) in [(1.0, y_eig[0]), (-1.0, y_eig[1])] {
                let overlap = e[0].conj() * qubit[0] + e[1].conj() * qubit[1];
                let beta = C64::new(0.0, sign * v * s);
                let phase = C64::from_polar(1.0, (beta * C64::new(alpha, 0.0)).im);
                let osc = coherent(C64::new(alpha, 0.0) + beta, c).unwrap();
                let osc = osc.amplitudes().unwrap();
                for q in 0..2 {
                    for n in 0..d {
                        amps[q * d + n] += overlap * phase * e[q] * osc[n] * s;
                    }
                }
            }
        }
        JointState::new(c.cutoff, amps).unwrap()
    }

    #[test]
    fn single_step_matches_coherent_state_oracle() {
        let c = cfg(100);
        for (l, purity_min) in [(3.0, 0.96), (6.0, 0.99)] {
            let s = analytic_schedule(1, l).unwrap();
            let psi = Simulator::new(&c).unwrap().evolve(&s).unwrap();
            let oracle = single_step_oracle(s.u()[0], s.v()[0], &c);
            let overlap = psi.amplitudes().dotc(oracle.amplitudes()).norm();
            assert!(overlap > 1.0 - 1e-8, "{overlap}");
            let q = psi.reduced_qubit();
            let purity = (&q * &q).trace().re;
            let qo = oracle.reduced_qubit();
            assert!((purity - (&qo * &qo).trace().re).abs() < 1e-8);
            assert!(purity > purity_min, "L = {l}: {purity}");
        }
    }

    #[test]
    fn first_of_several_steps_gives_odd_cat_with_qubit_excited() {
        // step 1 of N = 2 uses v₁ > 0: V₁U₁|vac⟩|0⟩ ≈ (|2L⟩ − |−2L⟩)|1⟩
        let c = cfg(100);
        let l = 1.5;
        let full = analytic_schedule(2, l).unwrap();
        let first = InteractionSchedule::new(vec![full.u()[0]], vec![full.v()[0]], None).unwrap();
        let out = run_unitary(&first, &c).unwrap();
        let f = fidelity(&out.deterministic, &cat(2.0 * l, -1.0, &c)).unwrap();
        assert!(f > 0.98, "{f}");
        let JointOutput::Pure(psi) = &out.joint else { panic!() };
        assert!(psi.reduced_qubit()[(1, 1)].re > 0.98);
    }

    #[test]
    fn norm_is_preserved() {
        let c = cfg(80);
        let psi = Simulator::new(&c).unwrap().evolve(&analytic_schedule(3, 0.45).unwrap()).unwrap();
        assert!((psi.norm_squared() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fast_moments_match_full_result() {
        let c = cfg(80);
        let sim = Simulator::new(&c).unwrap();
        let s = analytic_schedule(3, 0.45).unwrap();
        let out = sim.run(&s).unwrap();
        for post in [false, true] {
            let (m, p) = sim.output_moments(&s, post).unwrap();
            let full = moments(out.branch(post));
            assert!((m.var_p - full.var_p).abs() < 1e-12 && (m.var_x - full.var_x).abs() < 1e-12);
            assert!((p - out.postselect_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn qubit_purity_grows_with_lattice_scale() {
        let c = cfg(200);
        let purities: Vec<f64> = [1.5, 2.0, 3.0]
            .iter()
            .map(|&l| {
                let psi = Simulator::new(&c).unwrap().evolve(&analytic_schedule(2, l).unwrap()).unwrap();
                let q = psi.reduced_qubit();
                (&q * &q).trace().re
            })
            .collect();
        assert!(purities.windows(2).all(|w| w[1] > w[0]), "{purities:?}");
    }

    #[test]
    fn leak_is_reported() {
        let c = cfg(20);
        let err = run_unitary(&analytic_schedule(3, 2.0).unwrap(), &c).unwrap_err();
        assert!(matches!(err, Error::Leak { .. }));
    }

    #[test]
    fn peaks_double_per_step() {
        assert_eq!(peak_count_check(&analytic_schedule(1, 3.0).unwrap(), &cfg(80)).unwrap(), 2);
        assert_eq!(peak_count_check(&analytic_schedule(2, 2.0).unwrap(), &cfg(120)).unwrap(), 4);
        assert_eq!(peak_count_check(&analytic_schedule(3, 2.0).unwrap(), &cfg(330)).unwrap(), 8);
        assert!(matches!(peak_count_check(&analytic_schedule(2, 1.0).unwrap(), &cfg(60)), Err(Error::Regime(_))));
    }

    #[test]
    fn plateau_counts_once() {
        assert_eq!(count_peaks(&[0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.0]), 1);
        assert_eq!(count_peaks(&[0.0, 1.0, 0.0, 1.0, 0.0]), 2);
        assert_eq!(count_peaks(&[0.0, 1.0, 1.0, 2.0, 0.0]), 1);
    }
}
