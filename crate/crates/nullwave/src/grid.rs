//! Characteristic lattice in double-null coordinates u = (t−r)/2, v = (t+r)/2
//! with spacing h: u_i = i·h, v_j = j·h, so t = (i+j)h and r = (j−i)h.
//!
//! Storage is ragged: row i holds j ∈ [|i|, iv_max], which is exactly the
//! physical wedge t ≥ 0, r ≥ 0. The matching radius R must satisfy
//! R = 2·nr·h so that the hybrid foliation Σ_τ = {t=τ, r≤R} ∪ {u=u_τ, v≥v_τ}
//! has its corner on a lattice node. Diagnostic times are τ = 2h·k2.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("lattice alignment: {0}")]
    Alignment(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("empty selection: {0}")]
    Empty(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharGrid {
    pub h: f64,
    pub ell: u32,
    /// matching radius R = 2·nr·h
    pub nr: i64,
    pub iu_min: i64,
    pub iu_max: i64,
    pub iv_max: i64,
    pub t_max: f64,
}

const ALIGN_TOL: f64 = 1e-9;

impl CharGrid {
    pub fn new(h: f64, r_match: f64, t_max: f64, ell: u32) -> Result<Self, GridError> {
        if !(h > 0.0) || !(r_match > 0.0) || !(t_max > 0.0) {
            return Err(GridError::Alignment(format!(
                "h, R, T must be positive (h={h}, R={r_match}, T={t_max})"
            )));
        }
        let nr_f = r_match / (2.0 * h);
        let nr = nr_f.round() as i64;
        if (nr_f - nr as f64).abs() > ALIGN_TOL * nr_f.max(1.0) {
            return Err(GridError::Alignment(format!(
                "R/(2h) = {nr_f} is not an integer; choose R a multiple of 2h"
            )));
        }
        if nr < 2 {
            return Err(GridError::Alignment(format!(
                "matching radius too small: R/(2h) = {nr} < 2"
            )));
        }
        let iu_max = (t_max / (2.0 * h) - ALIGN_TOL).ceil() as i64 + 2;
        let iu_min = -nr;
        let iv_max = iu_max + 2 * nr;
        Ok(Self { h, ell, nr, iu_min, iu_max, iv_max, t_max })
    }

    pub fn r_match(&self) -> f64 {
        2.0 * self.nr as f64 * self.h
    }

    pub fn ell_factor(&self) -> f64 {
        (self.ell * (self.ell + 1)) as f64
    }

    pub fn u_of(&self, i: i64) -> f64 {
        i as f64 * self.h
    }

    pub fn v_of(&self, j: i64) -> f64 {
        j as f64 * self.h
    }

    pub fn t_of(&self, i: i64, j: i64) -> f64 {
        (i + j) as f64 * self.h
    }

    pub fn r_of(&self, i: i64, j: i64) -> f64 {
        (j - i) as f64 * self.h
    }

    /// τ = 2h·k2 → k2, rejecting unaligned or out-of-window times.
    pub fn tau_index(&self, tau: f64) -> Result<i64, GridError> {
        let k2_f = tau / (2.0 * self.h);
        let k2 = k2_f.round() as i64;
        if (k2_f - k2 as f64).abs() > ALIGN_TOL * k2_f.abs().max(1.0) {
            return Err(GridError::Alignment(format!(
                "tau = {tau} is not a multiple of 2h = {}",
                2.0 * self.h
            )));
        }
        if k2 < 0 || k2 > self.iu_max - 2 {
            return Err(GridError::OutOfRange(format!(
                "tau = {tau} outside evolved window [0, {}]",
                self.t_max
            )));
        }
        Ok(k2)
    }

    /// u-index of the foliation corner of Σ_τ.
    pub fn iu_tau(&self, k2: i64) -> i64 {
        k2 - self.nr
    }

    pub fn in_domain(&self, i: i64, j: i64) -> bool {
        i >= self.iu_min && i <= self.iu_max && j >= i.abs() && j <= self.iv_max
    }

    fn row_len(&self, i: i64) -> usize {
        (self.iv_max - i.abs() + 1) as usize
    }

    pub fn node_count(&self) -> usize {
        (self.iu_min..=self.iu_max).map(|i| self.row_len(i)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldStatus {
    InProgress,
    Completed,
    BlownUp { u: f64, v: f64, max_abs: f64 },
    Aborted,
}

/// ψ = rφ sampled on the ragged lattice.
#[derive(Debug, Clone)]
pub struct CharField {
    pub grid: CharGrid,
    psi: Vec<f64>,
    row_offsets: Vec<usize>,
    pub status: FieldStatus,
    pub commuted_level: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SlicePoint {
    pub v: f64,
    pub r: f64,
    pub phi: f64,
    pub dphi_dt: f64,
    pub dphi_dr: f64,
    pub dvpsi: f64,
    pub dupsi: f64,
}

#[derive(Debug, Clone)]
pub struct FoliationSlice {
    pub tau: f64,
    pub h: f64,
    pub ell: u32,
    /// r = k·h for k = 0..=2nr on {t = τ}
    pub interior: Vec<SlicePoint>,
    /// lattice nodes on {u = u_τ}, v from v_τ to v_cut
    pub exterior: Vec<SlicePoint>,
}

impl FoliationSlice {
    pub fn ell_factor(&self) -> f64 {
        (self.ell * (self.ell + 1)) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,region,r,phi,dphi_dt,dphi_dr,dvpsi,dupsi\n");
        for (region, pts) in [("interior", &self.interior), ("exterior", &self.exterior)] {
            for p in pts.iter() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    self.tau, region, p.r, p.phi, p.dphi_dt, p.dphi_dr, p.dvpsi, p.dupsi
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRegion {
    Interior,
    Exterior,
}

/// Cell-centered sample for bulk quadrature. `area` is the du·dv measure of
/// the cell piece; (t, r) is the centroid of that piece. Cells cut by t = τ
/// or r = R contribute triangles of area h²/2 with shifted centroids.
#[derive(Debug, Clone, Copy)]
pub struct CellSample {
    pub t: f64,
    pub r: f64,
    pub area: f64,
    pub psi: f64,
    pub phi: f64,
    pub dupsi: f64,
    pub dvpsi: f64,
    pub duphi: f64,
    pub dvphi: f64,
    pub dudv_psi: f64,
    /// (−∂_u∂_vψ − ℓ(ℓ+1)ψ/r²)/r with □ = −∂_t² + Δ
    pub box_phi: f64,
    pub ang_phi: f64,
    pub region: CellRegion,
}

impl CellSample {
    pub fn dphi_dt(&self) -> f64 {
        0.5 * (self.duphi + self.dvphi)
    }

    pub fn dphi_dr(&self) -> f64 {
        0.5 * (self.dvphi - self.duphi)
    }
}

impl CharField {
    pub fn zeros(grid: CharGrid) -> Self {
        let mut row_offsets = Vec::with_capacity((grid.iu_max - grid.iu_min + 1) as usize);
        let mut total = 0usize;
        for i in grid.iu_min..=grid.iu_max {
            row_offsets.push(total);
            total += grid.row_len(i);
        }
        Self {
            grid,
            psi: vec![0.0; total],
            row_offsets,
            status: FieldStatus::InProgress,
            commuted_level: 0,
        }
    }

    pub fn from_fn(grid: CharGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(grid);
        for i in grid.iu_min..=grid.iu_max {
            for j in i.abs()..=grid.iv_max {
                field.set_psi(i, j, f(grid.u_of(i), grid.v_of(j)));
            }
        }
        field.status = FieldStatus::Completed;
        field
    }

    #[inline]
    fn idx(&self, i: i64, j: i64) -> usize {
        debug_assert!(self.grid.in_domain(i, j), "({i},{j}) outside lattice");
        self.row_offsets[(i - self.grid.iu_min) as usize] + (j - i.abs()) as usize
    }

    #[inline]
    pub fn psi(&self, i: i64, j: i64) -> f64 {
        self.psi[self.idx(i, j)]
    }

    #[inline]
    pub fn set_psi(&mut self, i: i64, j: i64, val: f64) {
        let k = self.idx(i, j);
        self.psi[k] = val;
    }

    /// ∂_vψ at a node: centered along the row, one-sided 3-point at the ends.
    pub fn dv_psi(&self, i: i64, j: i64) -> f64 {
        let g = &self.grid;
        let h2 = 2.0 * g.h;
        if g.in_domain(i, j - 1) && g.in_domain(i, j + 1) {
            (self.psi(i, j + 1) - self.psi(i, j - 1)) / h2
        } else if g.in_domain(i, j + 2) {
            (-3.0 * self.psi(i, j) + 4.0 * self.psi(i, j + 1) - self.psi(i, j + 2)) / h2
        } else {
            (3.0 * self.psi(i, j) - 4.0 * self.psi(i, j - 1) + self.psi(i, j - 2)) / h2
        }
    }

    /// ∂_uψ at a node: centered along the column, one-sided 3-point otherwise.
    pub fn du_psi(&self, i: i64, j: i64) -> f64 {
        let g = &self.grid;
        let h2 = 2.0 * g.h;
        if g.in_domain(i - 1, j) && g.in_domain(i + 1, j) {
            (self.psi(i + 1, j) - self.psi(i - 1, j)) / h2
        } else if g.in_domain(i + 2, j) {
            (-3.0 * self.psi(i, j) + 4.0 * self.psi(i + 1, j) - self.psi(i + 2, j)) / h2
        } else {
            (3.0 * self.psi(i, j) - 4.0 * self.psi(i - 1, j) + self.psi(i - 2, j)) / h2
        }
    }

    /// φ at a node; on the axis the one-sided limit along the t-diagonal
    /// (ψ(r) = φ(0)·r + O(r³), so φ(0) = (8ψ(2h) − ψ(4h))/(12h) to fourth
    /// order).
    pub fn phi_at(&self, i: i64, j: i64) -> f64 {
        if j == i {
            (8.0 * self.psi(i - 1, i + 1) - self.psi(i - 2, i + 2)) / (12.0 * self.grid.h)
        } else {
            self.psi(i, j) / self.grid.r_of(i, j)
        }
    }

    /// ∂_tφ by differencing φ along the r = const lattice diagonal (step 2h).
    /// Differencing φ directly instead of ψ/r keeps the error O(h²)
    /// uniformly down to the axis.
    pub(crate) fn diag_dt_phi(&self, i: i64, j: i64) -> f64 {
        let g = &self.grid;
        let h4 = 4.0 * g.h;
        let fwd = g.in_domain(i + 1, j + 1);
        let bwd = g.in_domain(i - 1, j - 1);
        if fwd && bwd {
            (self.phi_at(i + 1, j + 1) - self.phi_at(i - 1, j - 1)) / h4
        } else if fwd && g.in_domain(i + 2, j + 2) {
            (-3.0 * self.phi_at(i, j) + 4.0 * self.phi_at(i + 1, j + 1)
                - self.phi_at(i + 2, j + 2))
                / h4
        } else if bwd && g.in_domain(i - 2, j - 2) {
            (3.0 * self.phi_at(i, j) - 4.0 * self.phi_at(i - 1, j - 1)
                + self.phi_at(i - 2, j - 2))
                / h4
        } else {
            // dead corner of the lattice: fall back to the ψ stencils
            0.5 * (self.du_psi(i, j) + self.dv_psi(i, j)) / g.r_of(i, j).max(g.h)
        }
    }

    /// ∂_rφ by differencing φ along the t = const lattice diagonal (step 2h).
    pub(crate) fn diag_dr_phi(&self, i: i64, j: i64) -> f64 {
        let g = &self.grid;
        let h4 = 4.0 * g.h;
        let out = g.in_domain(i - 1, j + 1);
        let inw = j - 1 >= i + 1 && g.in_domain(i + 1, j - 1);
        if out && inw {
            (self.phi_at(i - 1, j + 1) - self.phi_at(i + 1, j - 1)) / h4
        } else if out && g.in_domain(i - 2, j + 2) {
            (-3.0 * self.phi_at(i, j) + 4.0 * self.phi_at(i - 1, j + 1)
                - self.phi_at(i - 2, j + 2))
                / h4
        } else if inw && j - 2 >= i + 2 && g.in_domain(i + 2, j - 2) {
            (3.0 * self.phi_at(i, j) - 4.0 * self.phi_at(i + 1, j - 1)
                + self.phi_at(i + 2, j - 2))
                / h4
        } else {
            // dead corner of the lattice (last rows at j = iv_max, outside
            // every diagnostic window): fall back to the ψ stencils
            let r = g.r_of(i, j);
            let psir = 0.5 * (self.dv_psi(i, j) - self.du_psi(i, j));
            (psir - self.phi_at(i, j)) / r
        }
    }

    /// Field sample at a lattice node; axis nodes (j = i) carry one-sided
    /// limits, with ∂_vψ = φ(0) = −∂_uψ and ∂_rφ = 0 by parity.
    pub fn point(&self, i: i64, j: i64) -> SlicePoint {
        let g = &self.grid;
        let v = g.v_of(j);
        if j == i {
            let phi0 = self.phi_at(i, i);
            // even-in-r Richardson from the two nearest diagonal nodes
            let dphi_dt =
                (4.0 * self.diag_dt_phi(i - 1, i + 1) - self.diag_dt_phi(i - 2, i + 2)) / 3.0;
            return SlicePoint {
                v,
                r: 0.0,
                phi: phi0,
                dphi_dt,
                dphi_dr: 0.0,
                dvpsi: phi0,
                dupsi: -phi0,
            };
        }
        let r = g.r_of(i, j);
        let psi = self.psi(i, j);
        SlicePoint {
            v,
            r,
            phi: psi / r,
            dphi_dt: self.diag_dt_phi(i, j),
            dphi_dr: self.diag_dr_phi(i, j),
            dvpsi: self.dv_psi(i, j),
            dupsi: self.du_psi(i, j),
        }
    }

    /// Extract the hybrid foliation slice Σ_τ, τ = 2h·k2. Interior samples
    /// sit at r = k·h: even k are lattice nodes on the t-diagonal, odd k are
    /// averages of the two even neighbours at r ± h on the same diagonal.
    pub fn slice(&self, k2: i64) -> Result<FoliationSlice, GridError> {
        let g = self.grid;
        if k2 < 0 || k2 > g.iu_max - 2 || g.iu_tau(k2) < g.iu_min {
            return Err(GridError::OutOfRange(format!("slice index k2 = {k2}")));
        }
        let even = |k: i64| self.point(k2 - k / 2, k2 + k / 2);
        let mut interior = Vec::with_capacity((2 * g.nr + 1) as usize);
        for k in 0..=2 * g.nr {
            if k % 2 == 0 {
                interior.push(even(k));
            } else {
                let a = even(k - 1);
                let b = even(k + 1);
                interior.push(SlicePoint {
                    v: 0.5 * (a.v + b.v),
                    r: 0.5 * (a.r + b.r),
                    phi: 0.5 * (a.phi + b.phi),
                    dphi_dt: 0.5 * (a.dphi_dt + b.dphi_dt),
                    dphi_dr: 0.5 * (a.dphi_dr + b.dphi_dr),
                    dvpsi: 0.5 * (a.dvpsi + b.dvpsi),
                    dupsi: 0.5 * (a.dupsi + b.dupsi),
                });
            }
        }
        let iu = g.iu_tau(k2);
        let exterior: Vec<SlicePoint> =
            (iu + 2 * g.nr..=g.iv_max).map(|j| self.point(iu, j)).collect();
        Ok(FoliationSlice { tau: 2.0 * g.h * k2 as f64, h: g.h, ell: g.ell, interior, exterior })
    }

    /// Samples on the full slice {t = 2h·k2, r ≥ 0} out to the lattice edge,
    /// axis first, spacing 2h.
    pub fn t_diagonal(&self, k2: i64) -> Result<Vec<SlicePoint>, GridError> {
        let g = self.grid;
        if k2 < 0 || k2 > g.iu_max - 2 {
            return Err(GridError::OutOfRange(format!("t-diagonal index k2 = {k2}")));
        }
        let i_lo = g.iu_min.max(2 * k2 - g.iv_max);
        Ok((i_lo..=k2).rev().map(|i| self.point(i, 2 * k2 - i)).collect())
    }

    /// Cell-centered stencil for the diamond with N-corner (i, j). When the
    /// S corner falls below t = 0 (only the τ = 0 boundary strip) the cross
    /// derivative is borrowed from the neighbouring cell and the S value is
    /// reconstructed from it.
    pub fn cell_center(&self, i: i64, j: i64) -> CellSample {
        let g = &self.grid;
        let h = g.h;
        let n = self.psi(i, j);
        let e = self.psi(i - 1, j);
        let w = self.psi(i, j - 1);
        let s = if g.in_domain(i - 1, j - 1) {
            self.psi(i - 1, j - 1)
        } else {
            let cross_nb = (self.psi(i, j + 1) - self.psi(i - 1, j + 1) - n + e) / (h * h);
            cross_nb * h * h - n + e + w
        };
        let psi = 0.25 * (n + e + w + s);
        let dupsi = ((w - s) + (n - e)) / (2.0 * h);
        let dvpsi = ((e - s) + (n - w)) / (2.0 * h);
        let cross = (n - e - w + s) / (h * h);
        let t = (i + j - 1) as f64 * h;
        let r = (j - i) as f64 * h;
        let ll = g.ell_factor();
        let phi = psi / r;
        CellSample {
            t,
            r,
            area: h * h,
            psi,
            phi,
            dupsi,
            dvpsi,
            duphi: (dupsi + phi) / r,
            dvphi: (dvpsi - phi) / r,
            dudv_psi: cross,
            box_phi: (-cross - ll * psi / (r * r)) / r,
            ang_phi: ll.sqrt() * phi,
            region: CellRegion::Interior,
        }
    }

    /// The half of the axis-straddling cell with N-corner (i, i) that lies in
    /// the physical region r ≥ 0. The axis passes through the S and N
    /// corners; the unphysical W corner is supplied by odd reflection
    /// ψ(−r) = −ψ(r), i.e. ψ_W = −ψ_E and ψ_S = ψ_N = 0. Centroid r = h/3,
    /// area h²/2. The cross derivative is odd in r and is taken as 0; the
    /// O(h) slack this leaves in box_phi is suppressed by the r² volume
    /// weight of every bulk integral.
    fn axis_cell(&self, i: i64) -> CellSample {
        let g = &self.grid;
        let h = g.h;
        let e = self.psi(i - 1, i);
        let dupsi = -e / h;
        let dvpsi = e / h;
        let r = h / 3.0;
        let psi = e / 3.0;
        let ll = g.ell_factor();
        let phi = psi / r;
        CellSample {
            t: (2 * i - 1) as f64 * h,
            r,
            area: 0.5 * h * h,
            psi,
            phi,
            dupsi,
            dvpsi,
            duphi: (dupsi + phi) / r,
            dvphi: (dvpsi - phi) / r,
            dudv_psi: 0.0,
            box_phi: -ll * psi / (r * r * r),
            ang_phi: ll.sqrt() * phi,
            region: CellRegion::Interior,
        }
    }

    /// Restrict a cell sample to a triangular piece: centroid shifted by
    /// (dt, dr), area halved, ψ moved linearly, derived fields recomputed.
    fn triangle(&self, base: &CellSample, dt: f64, dr: f64, region: CellRegion) -> CellSample {
        let g = &self.grid;
        let psit = 0.5 * (base.dupsi + base.dvpsi);
        let psir = 0.5 * (base.dvpsi - base.dupsi);
        let psi = base.psi + psit * dt + psir * dr;
        let r = base.r + dr;
        let ll = g.ell_factor();
        let phi = psi / r;
        CellSample {
            t: base.t + dt,
            r,
            area: 0.5 * g.h * g.h,
            psi,
            phi,
            dupsi: base.dupsi,
            dvpsi: base.dvpsi,
            duphi: (base.dupsi + phi) / r,
            dvphi: (base.dvpsi - phi) / r,
            dudv_psi: base.dudv_psi,
            box_phi: (-base.dudv_psi - ll * psi / (r * r)) / r,
            ang_phi: ll.sqrt() * phi,
            region,
        }
    }

    /// Visit every cell piece of the region between Σ_τ1 and Σ_τ2 truncated
    /// at v = v_cut (the lattice edge): {τ1 ≤ t ≤ τ2, r ≤ R} ∪
    /// {u_τ1 ≤ u ≤ u_τ2, r ≥ R, v ≤ v_cut}. The pieces tile the region
    /// exactly: cells cut by t = τ (through their E, W corners), by r = R or
    /// by the axis r = 0 (through N, S) contribute a half-diamond; the two
    /// kinds of cut never meet a single cell (opposite index parity).
    pub fn for_each_cell_hybrid(
        &self,
        k2_1: i64,
        k2_2: i64,
        mut f: impl FnMut(&CellSample),
    ) -> Result<(), GridError> {
        let g = self.grid;
        if k2_1 >= k2_2 {
            return Err(GridError::Empty(format!("need tau1 < tau2, got k2 {k2_1} >= {k2_2}")));
        }
        if k2_1 < 0 || k2_2 > g.iu_max - 2 {
            return Err(GridError::OutOfRange(format!("bulk window k2 = [{k2_1}, {k2_2}]")));
        }
        let third = g.h / 3.0;
        let iu1 = g.iu_tau(k2_1);
        for i in iu1 + 1..=k2_2 {
            if i > k2_1 {
                f(&self.axis_cell(i));
            }
            let j_lo = (i.abs() + 1).max(2 * k2_1 + 1 - i);
            let j_hi = (i + 2 * g.nr).min(2 * k2_2 + 1 - i);
            for j in j_lo..=j_hi {
                let base = self.cell_center(i, j);
                let d = i + j - 1;
                if d == 2 * k2_1 {
                    f(&self.triangle(&base, third, 0.0, CellRegion::Interior));
                } else if d == 2 * k2_2 {
                    f(&self.triangle(&base, -third, 0.0, CellRegion::Interior));
                } else if j - i == 2 * g.nr {
                    f(&self.triangle(&base, 0.0, -third, CellRegion::Interior));
                } else {
                    f(&base);
                }
            }
        }
        self.for_each_cell_exterior(k2_1, k2_2, f)
    }

    /// Visit the exterior part only: {u_τ1 ≤ u ≤ u_τ2, r ≥ R, v ≤ v_cut}.
    pub fn for_each_cell_exterior(
        &self,
        k2_1: i64,
        k2_2: i64,
        mut f: impl FnMut(&CellSample),
    ) -> Result<(), GridError> {
        let g = self.grid;
        if k2_1 >= k2_2 {
            return Err(GridError::Empty(format!("need tau1 < tau2, got k2 {k2_1} >= {k2_2}")));
        }
        if k2_1 < 0 || k2_2 > g.iu_max - 2 {
            return Err(GridError::OutOfRange(format!("bulk window k2 = [{k2_1}, {k2_2}]")));
        }
        let third = g.h / 3.0;
        for i in g.iu_tau(k2_1) + 1..=g.iu_tau(k2_2) {
            for j in i + 2 * g.nr..=g.iv_max {
                let base = self.cell_center(i, j);
                if j - i == 2 * g.nr {
                    f(&self.triangle(&base, 0.0, third, CellRegion::Exterior));
                } else {
                    let mut c = base;
                    c.region = CellRegion::Exterior;
                    f(&c);
                }
            }
        }
        Ok(())
    }

    pub fn max_abs_phi_on_row(&self, i: i64) -> f64 {
        let g = self.grid;
        let mut m = 0.0f64;
        for j in i.abs()..=g.iv_max {
            if j == i {
                continue;
            }
            m = m.max((self.psi(i, j) / g.r_of(i, j)).abs());
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(h: f64) -> CharGrid {
        CharGrid::new(h, 2.0, 4.0, 0).unwrap()
    }

    #[test]
    fn alignment_and_range_errors() {
        assert!(matches!(CharGrid::new(0.1, 2.05, 4.0, 0), Err(GridError::Alignment(_))));
        assert!(matches!(CharGrid::new(0.1, 0.2, 4.0, 0), Err(GridError::Alignment(_))));
        let g = grid(0.1);
        assert!(g.tau_index(0.35).is_err());
        assert!(g.tau_index(-0.2).is_err());
        assert!(g.tau_index(1000.0).is_err());
        assert_eq!(g.tau_index(1.2).unwrap(), 6);
        assert_eq!(g.nr, 10);
        assert_eq!(g.iu_min, -10);
        assert_eq!(g.iv_max, g.iu_max + 20);
    }

    #[test]
    fn slice_bounds() {
        let f = CharField::zeros(grid(0.1));
        assert!(f.slice(-1).is_err());
        assert!(f.slice(10_000).is_err());
        assert!(f.slice(5).is_ok());
    }

    #[test]
    fn stencils_exact_on_quadratics() {
        let g = grid(0.1);
        let f = CharField::from_fn(g, |u, v| u * u + 3.0 * v * v - 0.5 * u * v);
        for &(i, j) in &[(0i64, 5i64), (-5, 5), (-5, 6), (3, g.iv_max), (g.iu_max, g.iv_max)] {
            let u = g.u_of(i);
            let v = g.v_of(j);
            assert!((f.du_psi(i, j) - (2.0 * u - 0.5 * v)).abs() < 1e-11, "du at ({i},{j})");
            assert!((f.dv_psi(i, j) - (6.0 * v - 0.5 * u)).abs() < 1e-11, "dv at ({i},{j})");
        }
    }

    #[test]
    fn cross_derivative_exact_on_bilinear() {
        let g = grid(0.1);
        let f = CharField::from_fn(g, |u, v| 2.0 + u + v + 4.0 * u * v);
        // includes the t = 0 boundary strip cells, which reconstruct S
        for &(i, j) in &[(0i64, 1i64), (-3, 4), (2, 5), (-9, 10)] {
            let c = f.cell_center(i, j);
            assert!((c.dudv_psi - 4.0).abs() < 1e-10, "cross at ({i},{j}): {}", c.dudv_psi);
        }
    }

    fn manufactured(g: CharGrid) -> CharField {
        // ψ = sin(r)·cos(t) → φ = sin(r)cos(t)/r, smooth through the axis
        CharField::from_fn(g, |u, v| (v - u).sin() * (v + u).cos())
    }

    fn slice_err(h: f64) -> f64 {
        let g = CharGrid::new(h, 2.0, 4.0, 0).unwrap();
        let f = manufactured(g);
        let k2 = g.tau_index(2.0).unwrap();
        let s = f.slice(k2).unwrap();
        let tau = 2.0f64;
        let mut worst = 0.0f64;
        let phi_exact = |t: f64, r: f64| if r == 0.0 { t.cos() } else { r.sin() * t.cos() / r };
        let dphi_dr = |t: f64, r: f64| {
            if r == 0.0 { 0.0 } else { (r.cos() / r - r.sin() / (r * r)) * t.cos() }
        };
        let dphi_dt = |t: f64, r: f64| {
            if r == 0.0 { -t.sin() } else { -r.sin() * t.sin() / r }
        };
        for p in &s.interior {
            worst = worst.max((p.phi - phi_exact(tau, p.r)).abs());
            if p.r > 0.0 {
                // the axis time-derivative is deliberately cruder (its only
                // consumers carry an r² weight); keep it out of the order fit
                worst = worst.max((p.dphi_dt - dphi_dt(tau, p.r)).abs());
                worst = worst.max((p.dphi_dr - dphi_dr(tau, p.r)).abs());
            }
        }
        for p in &s.exterior {
            let u = 0.5 * (tau - 2.0); // u_tau = (tau − R)/2 with R = 2
            worst = worst.max((p.phi - phi_exact(u + p.v, p.r)).abs());
            // ∂_vψ = ∂_v(sin(v−u)cos(v+u)) = cos(v−u)cos(v+u) − sin(v−u)sin(v+u)
            let dv_exact = (p.v - u).cos() * (p.v + u).cos() - (p.v - u).sin() * (p.v + u).sin();
            worst = worst.max((p.dvpsi - dv_exact).abs());
        }
        worst
    }

    #[test]
    fn slice_extraction_second_order() {
        let e1 = slice_err(0.05);
        let e2 = slice_err(0.025);
        assert!(e1 < 0.01, "coarse error {e1}");
        let order = (e1 / e2).log2();
        assert!(order > 1.7, "observed order {order} (errors {e1}, {e2})");
    }

    #[test]
    fn axis_extrapolation() {
        let g = CharGrid::new(0.05, 2.0, 4.0, 0).unwrap();
        let f = manufactured(g);
        let k2 = g.tau_index(1.0).unwrap();
        let s = f.slice(k2).unwrap();
        // φ(t, 0) = cos t, φ_t(t, 0) = −sin t
        assert!((s.interior[0].phi - 1.0f64.cos()).abs() < 1e-4);
        assert!((s.interior[0].dphi_dt + 1.0f64.sin()).abs() < 2e-2);
        assert_eq!(s.interior[0].dphi_dr, 0.0);
    }

    #[test]
    fn t_diagonal_reaches_edge() {
        let g = grid(0.1);
        let f = manufactured(g);
        let d = f.t_diagonal(5).unwrap();
        assert_eq!(d[0].r, 0.0);
        let i_lo = g.iu_min.max(2 * 5 - g.iv_max);
        assert!((d.last().unwrap().r - g.r_of(i_lo, 2 * 5 - i_lo)).abs() < 1e-12);
        // spacing 2h, monotone in r
        for w in d.windows(2) {
            assert!((w[1].r - w[0].r - 2.0 * g.h).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_tiling_area_is_exact() {
        let g = grid(0.1);
        let f = CharField::from_fn(g, |u, v| (v - u) * 0.3);
        let (k2_1, k2_2) = (g.tau_index(1.0).unwrap(), g.tau_index(3.0).unwrap());
        let mut area_int = 0.0;
        let mut area_ext = 0.0;
        f.for_each_cell_hybrid(k2_1, k2_2, |c| match c.region {
            CellRegion::Interior => area_int += c.area,
            CellRegion::Exterior => area_ext += c.area,
        })
        .unwrap();
        let (tau1, tau2, r_match) = (1.0, 3.0, g.r_match());
        // interior {τ1≤t≤τ2, r≤R}: du dv = ½ dt dr
        let exact_int = 0.5 * (tau2 - tau1) * r_match;
        // exterior {u1≤u≤u2, u+R≤v≤v_cut}
        let (u1, u2) = (0.5 * (tau1 - r_match), 0.5 * (tau2 - r_match));
        let v_cut = g.v_of(g.iv_max);
        let exact_ext = (u2 - u1) * (v_cut - r_match) - 0.5 * (u2 * u2 - u1 * u1);
        assert!((area_int - exact_int).abs() < 1e-12, "{area_int} vs {exact_int}");
        assert!((area_ext - exact_ext).abs() < 1e-12, "{area_ext} vs {exact_ext}");
    }

    #[test]
    fn centroid_rule_exact_for_linear_integrands() {
        let g = grid(0.1);
        let f = CharField::zeros(g);
        let (k2_1, k2_2) = (0, g.tau_index(2.0).unwrap());
        let (a, b, c) = (0.7, -1.3, 0.25);
        let mut total = 0.0;
        f.for_each_cell_hybrid(k2_1, k2_2, |s| total += (a * s.t + b * s.r + c) * s.area).unwrap();
        let (tau1, tau2, r_match) = (0.0, 2.0, g.r_match());
        let exact_int = 0.5
            * (a * 0.5 * (tau2 * tau2 - tau1 * tau1) * r_match
                + b * 0.5 * r_match * r_match * (tau2 - tau1)
                + c * r_match * (tau2 - tau1));
        // exterior: ∫ du ∫_{u+R}^{vc} (a(u+v) + b(v−u) + c) dv, quadratic in
        // u → Simpson is exact
        let (u1, u2) = (0.5 * (tau1 - r_match), 0.5 * (tau2 - r_match));
        let v_cut = g.v_of(g.iv_max);
        let inner = |u: f64| {
            let lo = u + r_match;
            let q = |v: f64| a * (u * v + 0.5 * v * v) + b * (0.5 * v * v - u * v) + c * v;
            q(v_cut) - q(lo)
        };
        let exact_ext =
            (u2 - u1) / 6.0 * (inner(u1) + 4.0 * inner(0.5 * (u1 + u2)) + inner(u2));
        assert!(
            (total - (exact_int + exact_ext)).abs() < 1e-10,
            "{total} vs {}",
            exact_int + exact_ext
        );
    }

    #[test]
    fn empty_and_reversed_windows_error() {
        let f = CharField::zeros(grid(0.1));
        assert!(matches!(f.for_each_cell_hybrid(5, 5, |_| {}), Err(GridError::Empty(_))));
        assert!(matches!(f.for_each_cell_hybrid(7, 3, |_| {}), Err(GridError::Empty(_))));
        assert!(f.for_each_cell_hybrid(0, 100_000, |_| {}).is_err());
    }

    #[test]
    fn csv_has_both_regions() {
        let g = grid(0.1);
        let f = manufactured(g);
        let csv = f.slice(g.tau_index(1.0).unwrap()).unwrap().to_csv();
        assert!(csv.starts_with("tau,region,r,phi,dphi_dt,dphi_dr,dvpsi,dupsi\n"));
        assert!(csv.contains(",interior,"));
        assert!(csv.contains(",exterior,"));
    }
}
