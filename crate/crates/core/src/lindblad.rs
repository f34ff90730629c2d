//! Noise channels and fixed-step RK4 integration of the master equation
//! `dρ/dt = −i[H,ρ] + Σ_L (LρL† − ½{L†L, ρ})` over the protocol's
//! piecewise-constant Hamiltonian. Time is measured in units of T.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::Generator;
use crate::hilbert::{self, FockConfig, JointDensity, Operator, C64, ZERO};
use crate::protocol::{InteractionSchedule, ProtocolResult};

const TRACE_TOL: f64 = 1e-6;
const MAX_HALVINGS: u32 = 6;
/// RK4 stays stable for `dt·ρ(L) ≲ 2.7`; a margin below that.
const STABILITY: f64 = 2.5;
/// Largest step, in units of T; segments shorter than 50 steps refine it.
pub const DEFAULT_DT: f64 = 1e-2;
const MIN_STEPS_PER_SEGMENT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    BosonLoss,
    BosonDephasing,
    BosonHeating,
    QubitDecay,
    QubitDephasing,
    None,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 5] = [
        NoiseKind::BosonLoss,
        NoiseKind::BosonDephasing,
        NoiseKind::BosonHeating,
        NoiseKind::QubitDecay,
        NoiseKind::QubitDephasing,
    ];

    pub fn label(self) -> &'static str {
        match self {
            NoiseKind::BosonLoss => "boson_loss",
            NoiseKind::BosonDephasing => "boson_dephasing",
            NoiseKind::BosonHeating => "boson_heating",
            NoiseKind::QubitDecay => "qubit_decay",
            NoiseKind::QubitDephasing => "qubit_dephasing",
            NoiseKind::None => "none",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .chain([NoiseKind::None])
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown noise type {s:?}")))
    }
}

/// Which qubit level the decay channel empties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayConvention {
    /// `(σ_x + iσ_y)/2 = |0⟩⟨1|`: |1⟩ decays to |0⟩.
    #[default]
    Lowering,
    /// `(σ_x − iσ_y)/2 = |1⟩⟨0|`.
    Raising,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Dimensionless rate γT.
    #[serde(rename = "gamma_T")]
    pub gamma_t: f64,
    #[serde(default)]
    pub decay_convention: DecayConvention,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, gamma_t: f64) -> Result<Self> {
        let m = Self { kind, gamma_t, decay_convention: DecayConvention::Lowering };
        m.validate()?;
        Ok(m)
    }

    pub fn none() -> Self {
        Self { kind: NoiseKind::None, gamma_t: 0.0, decay_convention: DecayConvention::Lowering }
    }

    pub fn with_convention(mut self, c: DecayConvention) -> Self {
        self.decay_convention = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != NoiseKind::None && !(self.gamma_t >= 0.0 && self.gamma_t.is_finite()) {
            return Err(Error::Invalid(format!("γT = {} must be a finite non-negative number", self.gamma_t)));
        }
        Ok(())
    }
}

/// Jump operators on the joint space, each scaled by √γ.
pub fn lindblad_ops(m: &NoiseModel, cfg: &FockConfig) -> Result<Vec<Operator>> {
    m.validate()?;
    let eye_q = Operator::identity(2);
    let eye_b = Operator::identity(cfg.dim());
    let a = hilbert::annihilation(cfg);
    let ad = hilbert::creation(cfg);
    let ops = match m.kind {
        NoiseKind::None => return Ok(Vec::new()),
        NoiseKind::BosonLoss => vec![hilbert::tensor_qubit_osc(&eye_q, &a)?],
        NoiseKind::BosonDephasing => {
            let sym = Operator::general(a.matrix() * ad.matrix() + ad.matrix() * a.matrix());
            vec![hilbert::tensor_qubit_osc(&eye_q, &sym)?]
        }
        NoiseKind::BosonHeating => {
            vec![hilbert::tensor_qubit_osc(&eye_q, &a)?, hilbert::tensor_qubit_osc(&eye_q, &ad)?]
        }
        NoiseKind::QubitDecay => {
            let lower = hilbert::qubit_lowering();
            let q = match m.decay_convention {
                DecayConvention::Lowering => lower,
                DecayConvention::Raising => lower.adjoint(),
            };
            vec![hilbert::tensor_qubit_osc(&q, &eye_b)?]
        }
        NoiseKind::QubitDephasing => vec![hilbert::tensor_qubit_osc(&hilbert::pauli_z(), &eye_b)?],
    };
    let s = C64::new(m.gamma_t.sqrt(), 0.0);
    Ok(ops.into_iter().map(|op| Operator::general(op.into_matrix() * s)).collect())
}

/// One constant-Hamiltonian stretch of the protocol. `generator: None` is
/// free evolution under the noise alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub generator: Option<Generator>,
    pub sign: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub segments: Vec<Segment>,
}

impl SegmentPlan {
    pub fn idle(duration: f64) -> Self {
        Self { segments: vec![Segment { generator: None, sign: 1.0, duration }] }
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

}

/// Alternating `P⊗σ_x` / `X⊗σ_y` segments of length `|u_k|`, `|v_k|`.
pub fn schedule_to_segments(s: &InteractionSchedule) -> SegmentPlan {
    let segments = s
        .u()
        .iter()
        .zip(s.v())
        .flat_map(|(&u, &v)| [(Generator::PSigmaX, u), (Generator::XSigmaY, v)])
        .filter(|(_, x)| *x != 0.0)
        .map(|(g, x)| Segment { generator: Some(g), sign: x.signum(), duration: x.abs() })
        .collect();
    SegmentPlan { segments }
}

/// Sparse matrix stored by diagonals: `(o, v)` holds the entries
/// `(i, i + o)` as `v[i]`. Every operator here has a handful of diagonals, so
/// products reduce to contiguous slice arithmetic.
#[derive(Debug, Clone)]
struct Sparse {
    d: usize,
    diags: Vec<(isize, Vec<C64>)>,
}

/// Rows `i` with `i + o` inside `0..d`.
fn band(o: isize, d: usize) -> std::ops::Range<usize> {
    let a = o.unsigned_abs().min(d);
    if o >= 0 {
        0..d - a
    } else {
        a..d
    }
}

fn shift(r: &std::ops::Range<usize>, o: isize) -> std::ops::Range<usize> {
    r.start.wrapping_add_signed(o)..r.end.wrapping_add_signed(o)
}

impl Sparse {
    fn from_dense(m: &DMatrix<C64>) -> Self {
        let d = m.nrows();
        let mut map = std::collections::BTreeMap::<isize, Vec<C64>>::new();
        for j in 0..d {
            for i in 0..d {
                let v = m[(i, j)];
                if v != ZERO {
                    map.entry(j as isize - i as isize).or_insert_with(|| vec![ZERO; d])[i] = v;
                }
            }
        }
        Self { d, diags: map.into_iter().collect() }
    }

    /// Elementwise conjugate.
    fn conj(&self) -> Self {
        let diags = self.diags.iter().map(|(o, v)| (*o, v.iter().map(|z| z.conj()).collect())).collect();
        Self { d: self.d, diags }
    }

    fn row_sum_bound(&self) -> f64 {
        (0..self.d).map(|i| self.diags.iter().map(|(_, v)| v[i].norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    fn diagonal(&self) -> Option<Vec<C64>> {
        match self.diags.as_slice() {
            [] => Some(vec![ZERO; self.d]),
            [(0, v)] => Some(v.clone()),
            _ => None,
        }
    }
}

/// `m` restricted to rows in parity sector `s` and columns in sector `t`,
/// both ordered by Fock level. Basis state `|q⟩|n⟩` lies in sector
/// `(q + n) mod 2`.
fn sector_block(m: &DMatrix<C64>, dim: usize, s: usize, t: usize) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |i, j| m[(sector_joint(dim, s, i), sector_joint(dim, t, j))])
}

fn sector_joint(dim: usize, s: usize, n: usize) -> usize {
    ((s + n) % 2) * dim + n
}

/// Both generators and every jump operator conserve or flip the parity
/// sector, so a density matrix is stored as row-major sector blocks `ρ_st`.
/// A state without inter-sector coherence keeps only the diagonal blocks,
/// and the dynamics never creates any.
struct Layout {
    dim: usize,
    blocks: Vec<(usize, usize)>,
}

impl Layout {
    fn for_state(rho: &DMatrix<C64>, dim: usize) -> Self {
        let coherent = sector_block(rho, dim, 0, 1).iter().any(|z| *z != ZERO);
        let blocks = if coherent { vec![(0, 0), (0, 1), (1, 0), (1, 1)] } else { vec![(0, 0), (1, 1)] };
        Self { dim, blocks }
    }

    fn block_len(&self) -> usize {
        self.dim * self.dim
    }

    fn len(&self) -> usize {
        self.blocks.len() * self.block_len()
    }

    fn index(&self, s: usize, t: usize) -> usize {
        self.blocks.iter().position(|&b| b == (s, t)).expect("sector block is stored")
    }

    fn pack(&self, rho: &DMatrix<C64>) -> Vec<C64> {
        let mut x = Vec::with_capacity(self.len());
        for &(s, t) in &self.blocks {
            x.extend(sector_block(rho, self.dim, s, t).transpose().iter());
        }
        x
    }

    fn unpack(&self, x: &[C64]) -> DMatrix<C64> {
        let d = self.dim;
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        for (blk, &(s, t)) in x.chunks(self.block_len()).zip(&self.blocks) {
            for i in 0..d {
                for j in 0..d {
                    m[(sector_joint(d, s, i), sector_joint(d, t, j))] = blk[i * d + j];
                }
            }
        }
        m
    }

    fn population(&self, x: &[C64], n: usize) -> f64 {
        let (bl, d) = (self.block_len(), self.dim);
        (0..2).map(|s| x[self.index(s, s) * bl + n * d + n].re).sum()
    }

    /// `ρ ← (ρ + ρ†)/2`.
    fn symmetrize(&self, x: &mut [C64]) {
        let (bl, d) = (self.block_len(), self.dim);
        for (b, &(s, t)) in self.blocks.iter().enumerate() {
            if s == t {
                symmetrize_block(&mut x[b * bl..(b + 1) * bl], d);
            } else if s < t {
                let p = self.index(t, s);
                let (lo, hi) = x.split_at_mut(p * bl);
                let (upper, lower) = (&mut lo[b * bl..(b + 1) * bl], &mut hi[..bl]);
                for i in 0..d {
                    for j in 0..d {
                        let m = (upper[i * d + j] + lower[j * d + i].conj()) * 0.5;
                        upper[i * d + j] = m;
                        lower[j * d + i] = m.conj();
                    }
                }
            }
        }
    }

    fn healthy(&self, x: &[C64]) -> bool {
        let tr: f64 = (0..self.dim).map(|n| self.population(x, n)).sum();
        (tr - 1.0).abs() < TRACE_TOL && x.iter().all(|z| z.re.is_finite() && z.im.is_finite() && z.norm_sqr() <= 1.0 + 1e-6)
    }
}

/// Tiled so both triangles stay in cache.
fn symmetrize_block(x: &mut [C64], d: usize) {
    const TILE: usize = 32;
    for bi in (0..d).step_by(TILE) {
        for bj in (bi..d).step_by(TILE) {
            for i in bi..(bi + TILE).min(d) {
                let j0 = if bi == bj { i } else { bj };
                for j in j0..(bj + TILE).min(d) {
                    if i == j {
                        x[i * d + i].im = 0.0;
                    } else {
                        let m = (x[i * d + j] + x[j * d + i].conj()) * 0.5;
                        x[i * d + j] = m;
                        x[j * d + i] = m.conj();
                    }
                }
            }
        }
    }
}

/// An operator that maps sector `s ^ flip` into sector `s`; `blocks[s]` is
/// that map.
#[derive(Debug, Clone)]
struct SectorOp {
    flip: usize,
    blocks: [Sparse; 2],
}

impl SectorOp {
    fn new(m: &DMatrix<C64>, dim: usize) -> Result<Self> {
        for flip in [0, 1] {
            let stray = (0..2).any(|s| sector_block(m, dim, s, s ^ flip ^ 1).iter().any(|z| *z != ZERO));
            if !stray {
                let blocks = [0, 1].map(|s| Sparse::from_dense(&sector_block(m, dim, s, s ^ flip)));
                return Ok(Self { flip, blocks });
            }
        }
        Err(Error::Invalid("operator mixes parity sectors".into()))
    }

    fn conj(&self) -> Self {
        Self { flip: self.flip, blocks: [self.blocks[0].conj(), self.blocks[1].conj()] }
    }

    fn row_sum_bound(&self) -> f64 {
        self.blocks[0].row_sum_bound().max(self.blocks[1].row_sum_bound())
    }

    fn diagonal(&self) -> Option<[Vec<C64>; 2]> {
        if self.flip != 0 {
            return None;
        }
        Some([self.blocks[0].diagonal()?, self.blocks[1].diagonal()?])
    }
}

/// The non-diagonal part of the Liouvillian for one Hamiltonian,
/// `Gρ + ρG† + Σ LρL†` with `G = −iH − ½ Σ L†L`, applied block by block.
struct Liouvillian<'a> {
    g: [Sparse; 2],
    g_conj: [Sparse; 2],
    jumps: &'a [(SectorOp, SectorOp)],
}

impl Liouvillian<'_> {
    fn apply(&self, lay: &Layout, rho: &[C64], out: &mut [C64]) {
        let (d, bl) = (lay.dim, lay.block_len());
        out.par_chunks_mut(d).enumerate().for_each(|(c, dst)| {
            let (b, i) = (c / d, c % d);
            let (s, t) = lay.blocks[b];
            let blk = &rho[b * bl..(b + 1) * bl];
            let own = &blk[i * d..(i + 1) * d];
            dst.fill(ZERO);
            // (ρG†)_ij = Σ_o ρ_{i,j+o} conj(G_{j,j+o})
            for (o, gc) in &self.g_conj[t].diags {
                let r = band(*o, d);
                for ((x, v), g) in dst[r.clone()].iter_mut().zip(&own[shift(&r, *o)]).zip(&gc[r]) {
                    *x += v * g;
                }
            }
            for (o, g) in &self.g[s].diags {
                let a = g[i];
                if a != ZERO {
                    let k = i.wrapping_add_signed(*o);
                    for (x, v) in dst.iter_mut().zip(&blk[k * d..(k + 1) * d]) {
                        *x += a * v;
                    }
                }
            }
            for (l, l_conj) in self.jumps {
                let from = lay.index(s ^ l.flip, t ^ l.flip);
                let src_blk = &rho[from * bl..(from + 1) * bl];
                for (o1, v1) in &l.blocks[s].diags {
                    let a = v1[i];
                    if a == ZERO {
                        continue;
                    }
                    let k = i.wrapping_add_signed(*o1);
                    let src = &src_blk[k * d..(k + 1) * d];
                    for (o2, lc) in &l_conj.blocks[t].diags {
                        let r = band(*o2, d);
                        for ((x, v), b) in dst[r.clone()].iter_mut().zip(&src[shift(&r, *o2)]).zip(&lc[r]) {
                            *x += a * v * b;
                        }
                    }
                }
            }
        });
    }
}

struct MasterSystem {
    dim: usize,
    h: [DMatrix<C64>; 2],
    h_bound: [f64; 2],
    /// Jump operators integrated by RK4, with their elementwise conjugates.
    jumps: Vec<(SectorOp, SectorOp)>,
    k: DMatrix<C64>,
    dissipation_bound: f64,
    /// Per-sector diagonals of the jump operators that are diagonal in the
    /// Fock basis; their part of the dissipator acts elementwise and is
    /// integrated exactly.
    diagonal: Vec<[Vec<C64>; 2]>,
}

impl MasterSystem {
    fn new(m: &NoiseModel, cfg: &FockConfig, split_diagonal: bool) -> Result<Self> {
        let ops = lindblad_ops(m, cfg)?;
        let (d, dim) = (cfg.joint_dim(), cfg.dim());
        let mut k = DMatrix::<C64>::zeros(d, d);
        let mut dissipation_bound = 0.0;
        let mut jumps = Vec::new();
        let mut diagonal = Vec::new();
        for op in &ops {
            let sop = SectorOp::new(op.matrix(), dim)?;
            match sop.diagonal().filter(|_| split_diagonal) {
                Some(l) => diagonal.push(l),
                None => {
                    k += op.matrix().adjoint() * op.matrix();
                    dissipation_bound += 2.0 * sop.row_sum_bound().powi(2);
                    let conj = sop.conj();
                    jumps.push((sop, conj));
                }
            }
        }
        let h = [Generator::PSigmaX, Generator::XSigmaY].map(|g| g.operator(cfg).matrix().clone());
        let h_bound = [0, 1].map(|g| {
            h[g].row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
        });
        Ok(Self { dim, h, h_bound, jumps, k, dissipation_bound, diagonal })
    }

    fn liouvillian(&self, seg: &Segment) -> Result<Liouvillian<'_>> {
        // e^{−iH|x|} must equal e^{ixG}, so H = −sign(x)·G
        let mut g = self.k.map(|z| z * -0.5);
        if let Some(gen) = seg.generator {
            g += self.h[gen as usize].map(|z| z * C64::new(0.0, seg.sign));
        }
        let g = SectorOp::new(&g, self.dim)?;
        let g_conj = g.conj();
        Ok(Liouvillian { g: g.blocks, g_conj: g_conj.blocks, jumps: &self.jumps })
    }

    /// Largest step the RK4 stability bound allows on this plan; the exactly
    /// integrated diagonal part does not constrain it.
    fn max_stable_dt(&self, plan: &SegmentPlan) -> f64 {
        let h = plan
            .segments
            .iter()
            .filter_map(|s| s.generator.map(|g| self.h_bound[g as usize]))
            .fold(0.0, f64::max);
        let rate = 2.0 * h + self.dissipation_bound;
        if rate > 0.0 {
            STABILITY / rate
        } else {
            f64::INFINITY
        }
    }

    /// Elementwise rates `Σ (l_i l̄_j − ½|l_i|² − ½|l_j|²)` of the diagonal
    /// jump operators over `lay`.
    fn diagonal_rates(&self, lay: &Layout) -> Option<Vec<C64>> {
        if self.diagonal.is_empty() {
            return None;
        }
        let d = lay.dim;
        let mut rates = vec![ZERO; lay.len()];
        for (blk, &(s, t)) in rates.chunks_mut(lay.block_len()).zip(&lay.blocks) {
            for l in &self.diagonal {
                for i in 0..d {
                    for j in 0..d {
                        let (a, b) = (l[s][i], l[t][j]);
                        blk[i * d + j] += a * b.conj() - (a.norm_sqr() + b.norm_sqr()) * 0.5;
                    }
                }
            }
        }
        Some(rates)
    }
}

/// `(e^{Λh/2}, e^{Λh})` elementwise.
type Propagators = (Vec<C64>, Vec<C64>);

fn propagators(rates: &[C64], h: f64) -> Propagators {
    let half: Vec<C64> = rates.iter().map(|z| (z * (0.5 * h)).exp()).collect();
    let full = half.iter().map(|z| z * z).collect();
    (half, full)
}

struct Work {
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

/// Classical RK4, or its integrating-factor (Lawson) form when a diagonal
/// part `Λ∘ρ` is split off: with `E = e^{Λh}`, `E½ = e^{Λh/2}`,
/// `ρ' = E∘ρ + h/6 (E∘k₁ + 2E½∘(k₂+k₃) + k₄)`.
fn rk4_step(l: &Liouvillian, lay: &Layout, rho: &mut [C64], h: f64, prop: Option<&(Vec<C64>, Vec<C64>)>, w: &mut Work) {
    let Work { k, tmp } = w;
    l.apply(lay, rho, &mut k[0]);
    match prop {
        None => {
            for (t, (r, k1)) in tmp.iter_mut().zip(rho.iter().zip(&k[0])) {
                *t = r + k1 * (0.5 * h);
            }
            l.apply(lay, tmp, &mut k[1]);
            for (t, (r, k2)) in tmp.iter_mut().zip(rho.iter().zip(&k[1])) {
                *t = r + k2 * (0.5 * h);
            }
            l.apply(lay, tmp, &mut k[2]);
            for (t, (r, k3)) in tmp.iter_mut().zip(rho.iter().zip(&k[2])) {
                *t = r + k3 * h;
            }
            l.apply(lay, tmp, &mut k[3]);
            let w = h / 6.0;
            for (i, r) in rho.iter_mut().enumerate() {
                *r += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * w;
            }
        }
        Some((eh, e)) => {
            for i in 0..tmp.len() {
                tmp[i] = eh[i] * (rho[i] + k[0][i] * (0.5 * h));
            }
            l.apply(lay, tmp, &mut k[1]);
            for i in 0..tmp.len() {
                tmp[i] = eh[i] * rho[i] + k[1][i] * (0.5 * h);
            }
            l.apply(lay, tmp, &mut k[2]);
            for i in 0..tmp.len() {
                tmp[i] = e[i] * rho[i] + eh[i] * k[2][i] * h;
            }
            l.apply(lay, tmp, &mut k[3]);
            let w = h / 6.0;
            for (i, r) in rho.iter_mut().enumerate() {
                *r = e[i] * *r + (e[i] * k[0][i] + eh[i] * (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * w;
            }
        }
    }
}

/// Integrates `plan` from `rho0`. Each segment uses steps of
/// `min(dt, duration/50)`, further capped by the RK4 stability bound, with
/// the last step shortened to end on the segment boundary. On trace drift or
/// blow-up the whole run restarts with half the step, up to six times.
pub fn evolve_master(
    rho0: &JointDensity,
    plan: &SegmentPlan,
    m: &NoiseModel,
    cfg: &FockConfig,
    dt: f64,
) -> Result<JointDensity> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Invalid(format!("time step {dt} must be positive")));
    }
    if rho0.cutoff() != cfg.cutoff {
        return Err(Error::DimensionMismatch { expected: cfg.cutoff, got: rho0.cutoff() });
    }
    let sys = MasterSystem::new(m, cfg, true)?;
    evolve_system(&sys, rho0, plan, cfg, dt)
}

fn evolve_system(
    sys: &MasterSystem,
    rho0: &JointDensity,
    plan: &SegmentPlan,
    cfg: &FockConfig,
    dt: f64,
) -> Result<JointDensity> {
    let dt = dt.min(sys.max_stable_dt(plan));
    let lay = Layout::for_state(rho0.matrix(), sys.dim);
    let start = lay.pack(rho0.matrix());
    for halvings in 0..=MAX_HALVINGS {
        let step = dt / 2f64.powi(halvings as i32);
        match integrate(sys, &lay, &start, plan, step, cfg) {
            Ok(rho) => return Ok(JointDensity::from_raw(cfg.cutoff, lay.unpack(&rho))),
            Err(Error::IntegratorDiverged { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::IntegratorDiverged { halvings: MAX_HALVINGS as usize, dt: dt / 2f64.powi(MAX_HALVINGS as i32) })
}

fn integrate(
    sys: &MasterSystem,
    lay: &Layout,
    start: &[C64],
    plan: &SegmentPlan,
    dt: f64,
    cfg: &FockConfig,
) -> Result<Vec<C64>> {
    let n = lay.len();
    let mut rho = start.to_vec();
    let mut work = Work {
        k: [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]],
        tmp: vec![ZERO; n],
    };
    let rates = sys.diagonal_rates(lay);
    let mut cached: Option<(f64, Option<Propagators>)> = None;
    for seg in &plan.segments {
        let l = sys.liouvillian(seg)?;
        let h = dt.min(seg.duration / MIN_STEPS_PER_SEGMENT);
        let full = (seg.duration / h).floor() as usize;
        let rest = seg.duration - full as f64 * h;
        let steps = (0..full).map(|_| h).chain((rest > 1e-12 * seg.duration).then_some(rest));
        for h in steps {
            if cached.as_ref().map(|c| c.0) != Some(h) {
                cached = Some((h, rates.as_deref().map(|r| propagators(r, h))));
            }
            let prop = cached.as_ref().and_then(|c| c.1.as_ref());
            rk4_step(&l, lay, &mut rho, h, prop, &mut work);
            lay.symmetrize(&mut rho);
            if !lay.healthy(&rho) {
                return Err(Error::IntegratorDiverged { halvings: 0, dt });
            }
        }
        cfg.check_leak(|m| lay.population(&rho, m))?;
    }
    Ok(rho)
}

/// Protocol under noise from `|0⟩⟨0| ⊗ |vac⟩⟨vac|`; `dt = None` uses
/// [`DEFAULT_DT`].
pub fn run_noisy_protocol(
    s: &InteractionSchedule,
    m: &NoiseModel,
    cfg: &FockConfig,
    dt: Option<f64>,
) -> Result<ProtocolResult> {
    let plan = schedule_to_segments(s);
    let rho0 = JointDensity::ground_vacuum(cfg);
    if plan.is_empty() {
        return ProtocolResult::from_density(rho0);
    }
    let dt = dt.unwrap_or(DEFAULT_DT);
    ProtocolResult::from_density(evolve_master(&rho0, &plan, m, cfg, dt)?)
}
