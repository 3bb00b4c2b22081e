//! Constant coefficient tensors A^{μν}, B^{μν}: null-condition checks,
//! decomposition into the classical null-form basis, and evaluation of the
//! quadratic forms on gradients of spherically symmetric (one-mode) fields.
//!
//! Conventions: index 0 = t, signature (−,+,+,+). Q0 = diag(+1,−1,−1,−1),
//! acting on gradients as (∂_tφ)² − |∇φ|². A symmetric tensor is null iff
//! sym A^{0i} = 0, sym A^{ij} = c·δ_ij and A^{00} = −c; every antisymmetric
//! tensor is null.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::FoliationSlice;

pub const DEFAULT_NULL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CoeffError {
    #[error("tensor is not null (residual norm {0:.3e}); identity only holds for null forms")]
    NotNull(f64),
    #[error("bad tensor spec {0:?}: expected preset q0 | e00 | qab:<a><b> or 16 reals")]
    BadSpec(String),
}

/// Constant 4×4 coupling tensor, row-major, indices μν with 0 = t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffTensor {
    pub entries: [[f64; 4]; 4],
}

/// (∂_t, ∂_r, angular magnitude) of a one-mode field; ang = √(ℓ(ℓ+1))·f/r.
#[derive(Debug, Clone, Copy, Default)]
pub struct RadialGradient {
    pub dt: f64,
    pub dr: f64,
    pub ang: f64,
}

impl RadialGradient {
    pub fn new(dt: f64, dr: f64, ang: f64) -> Self {
        Self { dt, dr, ang }
    }

    pub fn norm(&self) -> f64 {
        (self.dt * self.dt + self.dr * self.dr + self.ang * self.ang).sqrt()
    }
}

impl CoeffTensor {
    pub fn zero() -> Self {
        Self { entries: [[0.0; 4]; 4] }
    }

    /// The basic null form: (∂_tφ)² − |∇φ|².
    pub fn q0() -> Self {
        let mut e = [[0.0; 4]; 4];
        e[0][0] = 1.0;
        e[1][1] = -1.0;
        e[2][2] = -1.0;
        e[3][3] = -1.0;
        Self { entries: e }
    }

    /// The non-null form (∂_tφ)²; the classical blowup example.
    pub fn e00() -> Self {
        let mut e = [[0.0; 4]; 4];
        e[0][0] = 1.0;
        Self { entries: e }
    }

    /// Antisymmetric basis element Q_{ab}: ∂_aφ∂_bφ' − ∂_bφ∂_aφ'.
    pub fn qab(a: usize, b: usize) -> Self {
        assert!(a < 4 && b < 4 && a != b);
        let mut e = [[0.0; 4]; 4];
        e[a][b] = 1.0;
        e[b][a] = -1.0;
        Self { entries: e }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut e = self.entries;
        for row in e.iter_mut() {
            for x in row.iter_mut() {
                *x *= c;
            }
        }
        Self { entries: e }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut e = self.entries;
        for i in 0..4 {
            for j in 0..4 {
                e[i][j] += other.entries[i][j];
            }
        }
        Self { entries: e }
    }

    pub fn sym_part(&self) -> [[f64; 4]; 4] {
        let mut s = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                s[i][j] = 0.5 * (self.entries[i][j] + self.entries[j][i]);
            }
        }
        s
    }

    pub fn antisym_part(&self) -> [[f64; 4]; 4] {
        let mut w = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                w[i][j] = 0.5 * (self.entries[i][j] - self.entries[j][i]);
            }
        }
        w
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().flatten().all(|x| x.is_finite())
    }

    /// Full contraction A^{μν}ξ_μη_ν for 4-vectors.
    pub fn contract(&self, xi: &[f64; 4], eta: &[f64; 4]) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += self.entries[i][j] * xi[i] * eta[j];
            }
        }
        s
    }

    /// Parse "q0" | "e00" | "qab:<a><b>" or 16 whitespace-separated reals.
    pub fn parse(spec: &str) -> Result<Self, CoeffError> {
        let s = spec.trim();
        match s {
            "q0" => return Ok(Self::q0()),
            "e00" => return Ok(Self::e00()),
            "zero" | "0" => return Ok(Self::zero()),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("qab:") {
            let digits: Vec<usize> = rest
                .chars()
                .filter_map(|c| c.to_digit(10).map(|d| d as usize))
                .collect();
            if digits.len() == 2 && digits[0] < 4 && digits[1] < 4 && digits[0] != digits[1] {
                return Ok(Self::qab(digits[0], digits[1]));
            }
            return Err(CoeffError::BadSpec(spec.to_string()));
        }
        let vals: Result<Vec<f64>, _> = s.split_whitespace().map(str::parse::<f64>).collect();
        match vals {
            Ok(v) if v.len() == 16 => {
                let mut e = [[0.0; 4]; 4];
                for i in 0..4 {
                    for j in 0..4 {
                        e[i][j] = v[4 * i + j];
                    }
                }
                Ok(Self { entries: e })
            }
            _ => Err(CoeffError::BadSpec(spec.to_string())),
        }
    }

    pub fn to_row_major_string(&self) -> String {
        self.entries
            .iter()
            .flatten()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone)]
pub struct NullDecomposition {
    pub q0_coefficient: f64,
    /// qab_coefficients[a][b] for a < b multiplies Q_{ab}; stored antisymmetric.
    pub qab_coefficients: [[f64; 4]; 4],
    pub residual: [[f64; 4]; 4],
    /// Max absolute entry of the residual.
    pub residual_norm: f64,
    pub is_null: bool,
}

/// Split a tensor into c₀Q₀ + Σ c_{ab}Q_{ab} + residual.
///
/// The antisymmetric part is absorbed exactly by the Q_{ab}; the symmetric
/// part's best Q₀ fit is q0 = (S^{00} − tr S^{ij}/3)/2, leaving the non-null
/// remainder in `residual`.
pub fn decompose_null(tensor: &CoeffTensor, tol: f64) -> NullDecomposition {
    let s = tensor.sym_part();
    let w = tensor.antisym_part();
    let tr_space = s[1][1] + s[2][2] + s[3][3];
    let q0 = 0.5 * (s[0][0] - tr_space / 3.0);

    let q0t = CoeffTensor::q0();
    let mut residual = [[0.0; 4]; 4];
    let mut norm = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            residual[i][j] = s[i][j] - q0 * q0t.entries[i][j];
            norm = norm.max(residual[i][j].abs());
        }
    }
    NullDecomposition {
        q0_coefficient: q0,
        qab_coefficients: w,
        residual,
        residual_norm: norm,
        is_null: norm <= tol,
    }
}

/// Reconstruct q0·Q₀ + Σ qab·Q_{ab} + residual; equals the input tensor.
pub fn reconstruct(d: &NullDecomposition) -> CoeffTensor {
    let mut t = CoeffTensor::q0().scale(d.q0_coefficient);
    for i in 0..4 {
        for j in 0..4 {
            t.entries[i][j] += d.qab_coefficients[i][j] + d.residual[i][j];
        }
    }
    t
}

/// 32 unit directions: icosahedron vertices (12) plus its face centers (20).
fn deterministic_directions() -> Vec<[f64; 3]> {
    let p = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut dirs: Vec<[f64; 3]> = Vec::with_capacity(32);
    // icosahedron vertices: cyclic (0, ±1, ±p)
    for &(a, b) in &[(1.0, p), (1.0, -p), (-1.0, p), (-1.0, -p)] {
        dirs.push([0.0, a, b]);
        dirs.push([a, b, 0.0]);
        dirs.push([b, 0.0, a]);
    }
    // face centers = dodecahedron vertices: (±1,±1,±1) and cyclic (0, ±1/p, ±p)
    for &sx in &[1.0f64, -1.0] {
        for &sy in &[1.0f64, -1.0] {
            for &sz in &[1.0f64, -1.0] {
                dirs.push([sx, sy, sz]);
            }
        }
    }
    let q = 1.0 / p;
    for &(a, b) in &[(q, p), (q, -p), (-q, p), (-q, -p)] {
        dirs.push([0.0, a, b]);
        dirs.push([a, b, 0.0]);
        dirs.push([b, 0.0, a]);
    }
    for d in dirs.iter_mut() {
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        d[0] /= n;
        d[1] /= n;
        d[2] /= n;
    }
    dirs
}

/// Max of |A^{μν}ξ_μξ_ν| over null covectors ξ = (±1, ω), |ω| = 1, sampled
/// on the deterministic 32-direction core plus `samples` seeded random
/// directions. Independent cross-check of `decompose_null`.
pub fn verify_null_on_cone(tensor: &CoeffTensor, samples: usize) -> f64 {
    let mut dirs = deterministic_directions();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e756c6c);
    for _ in 0..samples {
        // rejection-free: normalize a cube sample away from the origin
        loop {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let y: f64 = rng.gen_range(-1.0..1.0);
            let z: f64 = rng.gen_range(-1.0..1.0);
            let n2 = x * x + y * y + z * z;
            if n2 > 1e-3 {
                let n = n2.sqrt();
                dirs.push([x / n, y / n, z / n]);
                break;
            }
        }
    }
    let mut worst = 0.0f64;
    for d in &dirs {
        for &t in &[1.0f64, -1.0] {
            let xi = [t, d[0], d[1], d[2]];
            worst = worst.max(tensor.contract(&xi, &xi).abs());
        }
    }
    worst
}

/// B^{μν}∂_μφ₁∂_νφ₂ restricted to one-mode fields in spherical symmetry.
///
/// Null tensors evaluate through the decomposition: q0·(t₁t₂ − r₁r₂ − a₁a₂);
/// antisymmetric parts average to zero over the sphere. Non-null tensors
/// admit purely radial fields only (ang treated as 0) and use the
/// angular-averaged convention ∂_iφ = ω_i∂_rφ, ⟨ω_iω_j⟩ = δ_ij/3.
pub fn eval_quadratic_radial(
    tensor: &CoeffTensor,
    g1: &RadialGradient,
    g2: &RadialGradient,
) -> f64 {
    let d = decompose_null(tensor, DEFAULT_NULL_TOL);
    if d.is_null {
        d.q0_coefficient * (g1.dt * g2.dt - g1.dr * g2.dr - g1.ang * g2.ang)
    } else {
        let s = tensor.sym_part();
        let tr_space = s[1][1] + s[2][2] + s[3][3];
        s[0][0] * g1.dt * g2.dt + (tr_space / 3.0) * g1.dr * g2.dr
    }
}

/// Max mismatch of r²N(φ₁,φ₂) = φ₁φ₂ + r(φ₁φ₂)_r + N(ψ₁,ψ₂) over shared
/// slice samples. The r-derivative of the product is measured by centered
/// differences on the interior samples; ψ-gradients come from the slices'
/// lattice-measured ∂_uψ, ∂_vψ. Exterior samples use the measured ∂_rφ.
pub fn nullform_expansion_check(
    slice1: &FoliationSlice,
    slice2: &FoliationSlice,
    tensor: &CoeffTensor,
) -> Result<f64, CoeffError> {
    let d = decompose_null(tensor, DEFAULT_NULL_TOL);
    if !d.is_null {
        return Err(CoeffError::NotNull(d.residual_norm));
    }
    assert_eq!(slice1.interior.len(), slice2.interior.len());
    assert_eq!(slice1.exterior.len(), slice2.exterior.len());
    let ll = slice1.ell_factor();
    let mut worst = 0.0f64;

    // interior: centered FD in r of the product (skip endpoints and the axis)
    let n = slice1.interior.len();
    for k in 1..n.saturating_sub(1) {
        let p1 = &slice1.interior[k];
        let p2 = &slice2.interior[k];
        let r = p1.r;
        if r <= 0.0 {
            continue;
        }
        let dr = slice1.interior[k + 1].r - slice1.interior[k - 1].r;
        let prod_r = (slice1.interior[k + 1].phi * slice2.interior[k + 1].phi
            - slice1.interior[k - 1].phi * slice2.interior[k - 1].phi)
            / dr;
        let g1 = RadialGradient::new(p1.dphi_dt, p1.dphi_dr, ll.sqrt() * p1.phi);
        let g2 = RadialGradient::new(p2.dphi_dt, p2.dphi_dr, ll.sqrt() * p2.phi);
        let lhs = r * r * eval_quadratic_radial(tensor, &g1, &g2);
        // ψ-gradients from the same interior data: ψ_t = rφ_t, ψ_r = φ + rφ_r
        let h1 = RadialGradient::new(r * p1.dphi_dt, p1.phi + r * p1.dphi_dr, ll.sqrt() * p1.phi);
        let h2 = RadialGradient::new(r * p2.dphi_dt, p2.phi + r * p2.dphi_dr, ll.sqrt() * p2.phi);
        let rhs = p1.phi * p2.phi + r * prod_r + eval_quadratic_radial(tensor, &h1, &h2);
        worst = worst.max((lhs - rhs).abs());
    }

    // exterior: ψ-gradients measured on the lattice null line
    for (q1, q2) in slice1.exterior.iter().zip(slice2.exterior.iter()) {
        let r = q1.r;
        if r <= 0.0 {
            continue;
        }
        let (p1t, p1r) = (0.5 * (q1.dvpsi + q1.dupsi), 0.5 * (q1.dvpsi - q1.dupsi));
        let (p2t, p2r) = (0.5 * (q2.dvpsi + q2.dupsi), 0.5 * (q2.dvpsi - q2.dupsi));
        let f1 = RadialGradient::new(p1t / r, (p1r - q1.phi) / r, ll.sqrt() * q1.phi);
        let f2 = RadialGradient::new(p2t / r, (p2r - q2.phi) / r, ll.sqrt() * q2.phi);
        let lhs = r * r * eval_quadratic_radial(tensor, &f1, &f2);
        let prod_r = f1.dr * q2.phi + q1.phi * f2.dr;
        let h1 = RadialGradient::new(p1t, p1r, ll.sqrt() * q1.phi);
        let h2 = RadialGradient::new(p2t, p2r, ll.sqrt() * q2.phi);
        let rhs = q1.phi * q2.phi + r * prod_r + eval_quadratic_radial(tensor, &h1, &h2);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
