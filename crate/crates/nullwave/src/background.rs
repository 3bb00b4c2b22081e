//! Parametric families for the background wave Φ(t,x) and the linear
//! coefficients L^μ, h^{μν}, plus numerical verification of the region-wise
//! decay bounds a "weak wave" background must satisfy:
//!
//!   (i)   |∂Φ| ≤ C0                                  for t ≤ t0
//!   (ii)  |∂Φ| ≤ C0(1+r)^{-1/2}(1+(t-r)_+)^{-1/2-4α} for t ≥ t0, r ≥ R1
//!   (iii) |∂_vΦ| ≤ C0(1+r)^{-1-3α}                   for t ≥ t0, r ≥ R1
//!   (iv)  |∂Φ| ≤ δα(1+r)^{-1-α}                      for t ≥ t0, r ≤ R1
//!
//! with α ≤ 1/4 and R1 ≤ t0. Commuted levels reduce to ∂_t^k in spherical
//! symmetry; the verifier checks k ≤ 2 with analytic time derivatives.

use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackgroundError {
    #[error("background evaluation outside domain: t={t}, r={r}")]
    Domain { t: f64, r: f64 },
    #[error("invalid weak-wave constants: {0}")]
    BadParams(String),
    #[error("custom table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakWaveParams {
    pub delta: f64,
    pub alpha: f64,
    pub t0: f64,
    pub r1: f64,
    pub c0: f64,
}

impl WeakWaveParams {
    pub fn validate(&self) -> Result<(), BackgroundError> {
        if !(self.alpha > 0.0 && self.alpha <= 0.25) {
            return Err(BackgroundError::BadParams(format!(
                "alpha must be in (0, 1/4], got {}",
                self.alpha
            )));
        }
        if !(self.r1 > 0.0 && self.r1 <= self.t0) {
            return Err(BackgroundError::BadParams(format!(
                "need 0 < R1 <= t0, got R1={}, t0={}",
                self.r1, self.t0
            )));
        }
        if self.delta <= 0.0 || self.c0 <= 0.0 {
            return Err(BackgroundError::BadParams(
                "delta and C0 must be positive".into(),
            ));
        }
        Ok(())
    }

    /// The constants relation (1+t0)^α·δ·α ≥ C0 tying the late-time
    /// smallness to the early-time bound.
    pub fn constants_valid(&self) -> bool {
        (1.0 + self.t0).powf(self.alpha) * self.delta * self.alpha >= self.c0
    }
}

/// Hybrid-foliation matching radius R = t0 + R0.
pub fn foliation_radius(params: &WeakWaveParams, r0: f64) -> f64 {
    params.t0 + r0
}

/// a(s) = amp·s·e^{-s²} with exact derivatives of any order via the
/// recursion p_{n+1} = p_n' − 2s·p_n on the polynomial factor.
#[derive(Debug, Clone, Copy)]
pub struct OddGaussian {
    pub amp: f64,
}

const MAX_DERIV: usize = 16;

fn gaussian_poly_table() -> &'static Vec<Vec<f64>> {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table: Vec<Vec<f64>> = Vec::with_capacity(MAX_DERIV + 1);
        table.push(vec![0.0, 1.0]); // p_0 = s
        for n in 0..MAX_DERIV {
            let p = &table[n];
            let mut q = vec![0.0; p.len() + 1];
            for (k, &c) in p.iter().enumerate() {
                if k >= 1 {
                    q[k - 1] += c * k as f64; // derivative
                }
                q[k + 1] -= 2.0 * c; // −2s·p
            }
            table.push(q);
        }
        table
    })
}

impl OddGaussian {
    /// n-th derivative of a at s, n ≤ 12.
    pub fn deriv(&self, n: usize, s: f64) -> f64 {
        let p = &gaussian_poly_table()[n];
        let mut val = 0.0;
        for &c in p.iter().rev() {
            val = val * s + c;
        }
        self.amp * val * (-s * s).exp()
    }

    pub fn value(&self, s: f64) -> f64 {
        self.deriv(0, s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundFamily {
    None,
    /// Φ(r) = amplitude·(1+r)^{−exponent}, static in t.
    StaticProfile { amplitude: f64, exponent: f64 },
    /// Φ = (a(u) − a(v))/r with a(s) = amp·s·e^{−s²}; exact radial solution
    /// of □Φ = 0, regular at the axis.
    FreeWave { amp: f64 },
    CustomTable(Table),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LCoeffFamily {
    None,
    /// L^0 = amplitude·(1+r)^{−exponent}, L^r = 0, static.
    Power { amplitude: f64, exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum HCoeffFamily {
    None,
    /// h^{00} = amplitude·(1+r)^{−exponent}, all other components 0, static.
    Power { amplitude: f64, exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LCondition {
    /// |L| ≤ δα(1+r)^{−1−3α} for t ≥ t0.
    Lcond1,
    /// |L| ≤ C0(1+r)^{−1−3α}(1+(t−r)_+)^{−α} for t ≥ t0.
    Lcond2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSpec {
    pub family: BackgroundFamily,
    pub weak_wave: WeakWaveParams,
    pub l_family: LCoeffFamily,
    pub l_condition: LCondition,
    pub h_family: HCoeffFamily,
}

impl BackgroundSpec {
    pub fn none() -> Self {
        Self {
            family: BackgroundFamily::None,
            weak_wave: WeakWaveParams {
                delta: 1.0,
                alpha: 0.25,
                t0: 10.0,
                r1: 2.0,
                c0: 1.0,
            },
            l_family: LCoeffFamily::None,
            l_condition: LCondition::Lcond1,
            h_family: HCoeffFamily::None,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.family == BackgroundFamily::None
            && self.l_family == LCoeffFamily::None
            && self.h_family == HCoeffFamily::None
    }
}

/// Φ and its ∂_t^k derivatives (k ≤ 3) with radial gradients, plus the
/// linear coefficient values at one spacetime point. Families are static in
/// t for L and h, so only the instantaneous values are carried.
#[derive(Debug, Clone, Copy, Default)]
pub struct BackgroundSample {
    /// phi_t[k] = ∂_t^k Φ, k = 0..=3
    pub phi_t: [f64; 4],
    /// phi_tr[k] = ∂_r ∂_t^k Φ, k = 0..=2
    pub phi_tr: [f64; 3],
    pub l0: f64,
    pub h00: f64,
}

impl BackgroundSample {
    /// Gradient (∂_t, ∂_r) of ∂_t^kΦ, k ≤ 2.
    pub fn grad(&self, k: usize) -> (f64, f64) {
        (self.phi_t[k + 1], self.phi_tr[k])
    }

    /// ∂_vΦ = ∂_tΦ + ∂_rΦ of the k-th time derivative.
    pub fn dv(&self, k: usize) -> f64 {
        self.phi_t[k + 1] + self.phi_tr[k]
    }
}

/// Series cutoff below which the free-wave family switches from the closed
/// form (a(u)−a(v))/r to its Taylor expansion about the axis.
const AXIS_SERIES_R: f64 = 0.125;

pub fn eval_background(spec: &BackgroundSpec, t: f64, r: f64) -> Result<BackgroundSample, BackgroundError> {
    if t < 0.0 || r < 0.0 || !t.is_finite() || !r.is_finite() {
        return Err(BackgroundError::Domain { t, r });
    }
    let mut s = BackgroundSample::default();
    match &spec.family {
        BackgroundFamily::None => {}
        BackgroundFamily::StaticProfile { amplitude, exponent } => {
            s.phi_t[0] = amplitude * (1.0 + r).powf(-exponent);
            s.phi_tr[0] = -amplitude * exponent * (1.0 + r).powf(-exponent - 1.0);
        }
        BackgroundFamily::FreeWave { amp } => {
            let a = OddGaussian { amp: *amp };
            let u = 0.5 * (t - r);
            let v = 0.5 * (t + r);
            if r >= AXIS_SERIES_R {
                for k in 0..4 {
                    let scale = 0.5f64.powi(k as i32);
                    let psi_k = scale * (a.deriv(k, u) - a.deriv(k, v));
                    s.phi_t[k] = psi_k / r;
                    if k < 3 {
                        let dpsi_k = scale * 0.5 * (-a.deriv(k + 1, u) - a.deriv(k + 1, v));
                        s.phi_tr[k] = (dpsi_k - s.phi_t[k]) / r;
                    }
                }
            } else {
                // Φ_k = −2^{−k} Σ_{m odd} a^{(k+m)}(t/2)·(r/2)^{m−1}/m!
                let half_t = 0.5 * t;
                let x = 0.5 * r;
                for k in 0..4 {
                    let scale = 0.5f64.powi(k as i32);
                    let mut val = 0.0;
                    let mut dval = 0.0;
                    let mut fact = 1.0f64; // m!
                    for m in (1..=11usize).step_by(2) {
                        fact *= if m == 1 { 1.0 } else { ((m - 1) * m) as f64 };
                        let am = a.deriv(k + m, half_t);
                        val += am * x.powi(m as i32 - 1) / fact;
                        if m >= 3 {
                            dval += am * (m as f64 - 1.0) * 0.5 * x.powi(m as i32 - 2) / fact;
                        }
                    }
                    s.phi_t[k] = -scale * val;
                    if k < 3 {
                        s.phi_tr[k] = -scale * dval;
                    }
                }
            }
        }
        BackgroundFamily::CustomTable(tbl) => {
            let (phi, dt, dr) = tbl.interpolate(t, r)?;
            s.phi_t[0] = phi;
            s.phi_t[1] = dt;
            s.phi_tr[0] = dr;
            // higher time derivatives unavailable from a table; left at 0
        }
    }
    match &spec.l_family {
        LCoeffFamily::None => {}
        LCoeffFamily::Power { amplitude, exponent } => {
            s.l0 = amplitude * (1.0 + r).powf(-exponent);
        }
    }
    match &spec.h_family {
        HCoeffFamily::None => {}
        HCoeffFamily::Power { amplitude, exponent } => {
            s.h00 = amplitude * (1.0 + r).powf(-exponent);
        }
    }
    Ok(s)
}

/// Bilinear-in-(t,r) lookup table, CSV columns `t,r,phi,dphi_dt,dphi_dr`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub ts: Vec<f64>,
    pub rs: Vec<f64>,
    /// row-major [it][ir], flattened
    pub phi: Vec<f64>,
    pub dphi_dt: Vec<f64>,
    pub dphi_dr: Vec<f64>,
}

impl Table {
    pub fn parse_csv(text: &str) -> Result<Self, BackgroundError> {
        let mut rows: Vec<(f64, f64, f64, f64, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("t,") {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(BackgroundError::Table(format!(
                    "line {}: expected 5 columns t,r,phi,dphi_dt,dphi_dr",
                    lineno + 1
                )));
            }
            let mut vals = [0.0f64; 5];
            for (k, c) in cols.iter().enumerate() {
                vals[k] = c.trim().parse().map_err(|_| {
                    BackgroundError::Table(format!("line {}: bad number {c:?}", lineno + 1))
                })?;
            }
            rows.push((vals[0], vals[1], vals[2], vals[3], vals[4]));
        }
        let mut ts: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut rs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        rs.sort_by(f64::total_cmp);
        rs.dedup();
        let (nt, nr) = (ts.len(), rs.len());
        if nt < 2 || nr < 2 || rows.len() != nt * nr {
            return Err(BackgroundError::Table(format!(
                "need a full rectilinear grid: {} t-values x {} r-values but {} rows",
                nt,
                nr,
                rows.len()
            )));
        }
        let mut phi = vec![f64::NAN; nt * nr];
        let mut dt = vec![f64::NAN; nt * nr];
        let mut dr = vec![f64::NAN; nt * nr];
        for row in &rows {
            let it = ts.partition_point(|&x| x < row.0).min(nt - 1);
            let ir = rs.partition_point(|&x| x < row.1).min(nr - 1);
            phi[it * nr + ir] = row.2;
            dt[it * nr + ir] = row.3;
            dr[it * nr + ir] = row.4;
        }
        if phi.iter().any(|x| x.is_nan()) {
            return Err(BackgroundError::Table("grid has holes".into()));
        }
        Ok(Self { ts, rs, phi, dphi_dt: dt, dphi_dr: dr })
    }

    fn interpolate(&self, t: f64, r: f64) -> Result<(f64, f64, f64), BackgroundError> {
        let clamp_idx = |xs: &[f64], x: f64| -> (usize, f64) {
            let n = xs.len();
            if x <= xs[0] {
                return (0, 0.0);
            }
            if x >= xs[n - 1] {
                return (n - 2, 1.0);
            }
            let i = xs.partition_point(|&y| y <= x) - 1;
            let i = i.min(n - 2);
            (i, (x - xs[i]) / (xs[i + 1] - xs[i]))
        };
        let (it, wt) = clamp_idx(&self.ts, t);
        let (ir, wr) = clamp_idx(&self.rs, r);
        let nr = self.rs.len();
        let lerp2 = |f: &[f64]| -> f64 {
            let f00 = f[it * nr + ir];
            let f01 = f[it * nr + ir + 1];
            let f10 = f[(it + 1) * nr + ir];
            let f11 = f[(it + 1) * nr + ir + 1];
            (1.0 - wt) * ((1.0 - wr) * f00 + wr * f01) + wt * ((1.0 - wr) * f10 + wr * f11)
        };
        Ok((lerp2(&self.phi), lerp2(&self.dphi_dt), lerp2(&self.dphi_dr)))
    }
}

/// Rectangular sample grid over [0, t_max] x [0, r_max].
#[derive(Debug, Clone, Copy)]
pub struct SampleGrid {
    pub t_max: f64,
    pub r_max: f64,
    pub nt: usize,
    pub nr: usize,
}

impl SampleGrid {
    pub fn ts(&self) -> Vec<f64> {
        (0..=self.nt).map(|i| self.t_max * i as f64 / self.nt as f64).collect()
    }
    pub fn rs(&self) -> Vec<f64> {
        (0..=self.nr).map(|i| self.r_max * i as f64 / self.nr as f64).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub name: String,
    pub worst_ratio: f64,
    pub at: (f64, f64),
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct WeakWaveReport {
    pub conditions: Vec<ConditionCheck>,
    /// samples on the region-matching boundaries t = t0 or r = R1, where the
    /// more permissive of the applicable bounds was used
    pub corner_points: Vec<(f64, f64)>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct CoeffConditionReport {
    pub conditions: Vec<ConditionCheck>,
    pub pass: bool,
}

pub const RATIO_TOL: f64 = 1e-9;

fn push_worst(c: &mut ConditionCheck, ratio: f64, at: (f64, f64)) {
    if ratio > c.worst_ratio {
        c.worst_ratio = ratio;
        c.at = at;
    }
}

/// Check the four weak-wave bounds on Φ and its time-commuted derivatives
/// (k ≤ 2) over the sample grid. On region-boundary samples the largest
/// applicable bound wins and the point is flagged.
pub fn verify_weak_wave(spec: &BackgroundSpec, grid: &SampleGrid) -> WeakWaveReport {
    let p = &spec.weak_wave;
    let mk = |name: &str| ConditionCheck {
        name: name.to_string(),
        worst_ratio: 0.0,
        at: (0.0, 0.0),
        pass: true,
    };
    let mut conds = vec![
        mk("(i) early-time gradient bound"),
        mk("(ii) exterior gradient decay"),
        mk("(iii) exterior outgoing-derivative decay"),
        mk("(iv) cylinder gradient smallness"),
    ];
    let mut corners = Vec::new();
    let eps = 1e-12 * (1.0 + p.t0.abs() + p.r1.abs());

    for &t in &grid.ts() {
        for &r in &grid.rs() {
            let s = match eval_background(spec, t, r) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let on_t0 = (t - p.t0).abs() <= eps;
            let on_r1 = (r - p.r1).abs() <= eps;
            for k in 0..=2usize {
                let (gt, gr) = s.grad(k);
                let grad = (gt * gt + gr * gr).sqrt();
                let dv = s.dv(k).abs();

                let early = t <= p.t0 + eps;
                let late = t >= p.t0 - eps;
                let outer = r >= p.r1 - eps;
                let inner = r <= p.r1 + eps;

                let b1 = if early { Some(p.c0) } else { None };
                let b2 = if late && outer {
                    Some(
                        p.c0 * (1.0 + r).powf(-0.5)
                            * (1.0 + (t - r).max(0.0)).powf(-0.5 - 4.0 * p.alpha),
                    )
                } else {
                    None
                };
                let b4 = if late && inner {
                    Some(p.delta * p.alpha * (1.0 + r).powf(-1.0 - p.alpha))
                } else {
                    None
                };

                // boundary samples: several bounds apply; take the largest
                let applicable: Vec<f64> = [b1, b2, b4].iter().flatten().copied().collect();
                let permitted = applicable.iter().cloned().fold(f64::NAN, f64::max);
                let idx = if b1.is_some() && applicable.len() == 1 {
                    0
                } else if b2.is_some() && applicable.len() == 1 {
                    1
                } else if b4.is_some() && applicable.len() == 1 {
                    3
                } else {
                    // ambiguous region boundary: attribute to the binding bound
                    if on_t0 || on_r1 {
                        corners.push((t, r));
                    }
                    if Some(permitted) == b1 {
                        0
                    } else if Some(permitted) == b2 {
                        1
                    } else {
                        3
                    }
                };
                push_worst(&mut conds[idx], grad / permitted, (t, r));

                if late && outer {
                    let b3 = p.c0 * (1.0 + r).powf(-1.0 - 3.0 * p.alpha);
                    push_worst(&mut conds[2], dv / b3, (t, r));
                }
            }
        }
    }
    corners.dedup();
    let mut pass = true;
    for c in conds.iter_mut() {
        c.pass = c.worst_ratio <= 1.0 + RATIO_TOL;
        pass &= c.pass;
    }
    WeakWaveReport { conditions: conds, corner_points: corners, pass }
}

/// Check the decay bounds on L^μ (against the claimed condition) and h^{μν}.
/// Early times (t ≤ t0) permit the flat bound C0.
pub fn verify_coefficient_conditions(spec: &BackgroundSpec, grid: &SampleGrid) -> CoeffConditionReport {
    let p = &spec.weak_wave;
    let mut cl = ConditionCheck {
        name: match spec.l_condition {
            LCondition::Lcond1 => "L-coefficient bound (static form)".into(),
            LCondition::Lcond2 => "L-coefficient bound (interior-decay form)".into(),
        },
        worst_ratio: 0.0,
        at: (0.0, 0.0),
        pass: true,
    };
    let mut ch = ConditionCheck {
        name: "h-coefficient bound".into(),
        worst_ratio: 0.0,
        at: (0.0, 0.0),
        pass: true,
    };
    for &t in &grid.ts() {
        for &r in &grid.rs() {
            let s = match eval_background(spec, t, r) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let early = t <= p.t0;
            let lbound = if early {
                p.c0
            } else {
                match spec.l_condition {
                    LCondition::Lcond1 => p.delta * p.alpha * (1.0 + r).powf(-1.0 - 3.0 * p.alpha),
                    LCondition::Lcond2 => {
                        p.c0 * (1.0 + r).powf(-1.0 - 3.0 * p.alpha)
                            * (1.0 + (t - r).max(0.0)).powf(-p.alpha)
                    }
                }
            };
            let hbound = if early {
                p.c0
            } else {
                p.c0 * (1.0 + r).powf(-1.5 * p.alpha)
            };
            push_worst(&mut cl, s.l0.abs() / lbound, (t, r));
            push_worst(&mut ch, s.h00.abs() / hbound, (t, r));
        }
    }
    cl.pass = cl.worst_ratio <= 1.0 + RATIO_TOL;
    ch.pass = ch.worst_ratio <= 1.0 + RATIO_TOL;
    let pass = cl.pass && ch.pass;
    CoeffConditionReport { conditions: vec![cl, ch], pass }
}
