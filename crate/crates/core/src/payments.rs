//! Myerson payments from piecewise-rational allocation curves.
//!
//! Fix every bid but advertiser `i`'s. Writing `u = (α_i v / s)^ℓ` for a scale `s`, the
//! j-unit allocation of `i` as a function of its bid `v` is, piece by piece, one of
//!
//! * IPA: `1 − y / (1 + x·u)` with `x` the unsaturated weight of the others and
//!   `y = n − j − c` (`c` others saturated),
//! * PA: `y·u / (u + x)` with `y = j − c`,
//!
//! or identically 0 or 1. Breakpoints come from the others' water-level segments.

use alloc::vec::Vec;

use crate::instance::{check_ell, AuctionInstance, Family, MechanismConfig};
use crate::kunit::{kunit, SaturationProfile};
use crate::quad;
use crate::Error;

/// Relative tolerance of the adaptive quadrature path.
pub const QUAD_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceForm {
    Zero,
    Full,
    /// `1 − y / (1 + x·u)`.
    Inverse { x: f64, y: f64 },
    /// `y·u / (u + x)`.
    Proportional { x: f64, y: f64 },
}

impl PieceForm {
    /// Value at `u = (α v / s)^ℓ`.
    pub fn eval_u(self, u: f64) -> f64 {
        match self {
            PieceForm::Zero => 0.0,
            PieceForm::Full => 1.0,
            PieceForm::Inverse { x, y } => {
                if u == f64::INFINITY {
                    1.0
                } else {
                    1.0 - y / (1.0 + x * u)
                }
            }
            PieceForm::Proportional { x, y } => {
                if u == f64::INFINITY {
                    y
                } else {
                    y * u / (u + x)
                }
            }
        }
    }

    /// `∫ a dv` over `[z_a, z_b]` in units of `z = α v / s`, valid for `ℓ = 1`.
    fn integral_z(self, za: f64, zb: f64) -> f64 {
        let dz = zb - za;
        match self {
            PieceForm::Zero => 0.0,
            PieceForm::Full => dz,
            PieceForm::Inverse { x, y } => {
                if x == 0.0 {
                    return dz * (1.0 - y);
                }
                dz - y / x * libm::log1p(x * dz / (1.0 + x * za))
            }
            PieceForm::Proportional { x, y } => {
                let q = dz / (za + x);
                if q < 1e-2 {
                    // dz − x·ln(1 + q) without cancellation
                    let mut series = 0.0;
                    let mut term = q;
                    for m in 2..=14 {
                        term *= -q;
                        series += term / m as f64;
                    }
                    y * (dz * za / (za + x) - x * series)
                } else {
                    y * (dz - x * libm::log1p(q))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub v_lo: f64,
    pub v_hi: f64,
    pub form: PieceForm,
}

/// `v ↦ a^{(j)}_i(v)` with everyone else's bid fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationCurve {
    pub advertiser: usize,
    pub slots: usize,
    pub family: Family,
    pub alpha: f64,
    pub ell: f64,
    /// Normalization `s` in `u = (α v / s)^ℓ`.
    pub scale: f64,
    /// Pieces partitioning `(0, ∞)` in increasing order.
    pub pieces: Vec<Piece>,
    /// Value at `v = 0`; differs from the first piece only when fewer than `j` others
    /// have positive value.
    pub at_zero: f64,
}

fn u_of(v: f64, alpha: f64, scale: f64, ell: f64) -> f64 {
    libm::pow(alpha * v / scale, ell)
}

fn find_piece(pieces: &[Piece], v: f64) -> usize {
    pieces.partition_point(|p| p.v_hi <= v).min(pieces.len() - 1)
}

impl AllocationCurve {
    pub fn eval(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return self.at_zero;
        }
        let p = self.pieces[find_piece(&self.pieces, v)];
        p.form.eval_u(u_of(v, self.alpha, self.scale, self.ell))
    }
}

fn v_of_u(u: f64, alpha: f64, scale: f64, ell: f64) -> f64 {
    if u == f64::INFINITY {
        return f64::INFINITY;
    }
    scale * libm::pow(u, 1.0 / ell) / alpha
}

/// Others' effective values, their count of positive entries and largest entry.
fn others(vhat: &[f64], i: usize) -> (Vec<f64>, usize, f64) {
    let o: Vec<f64> = vhat.iter().enumerate().filter(|&(t, _)| t != i).map(|(_, &v)| v).collect();
    let p = o.iter().filter(|&&v| v > 0.0).count();
    let m = o.iter().fold(0.0f64, |m, &v| m.max(v));
    (o, p, m)
}

/// Builds the j-unit allocation curve of advertiser `i`.
pub fn allocation_curve(
    inst: &AuctionInstance,
    i: usize,
    j: usize,
    ell: f64,
    family: Family,
) -> Result<AllocationCurve, Error> {
    check_ell(ell)?;
    let n = inst.n();
    if i >= n {
        return Err(Error::AdvertiserOutOfRange { advertiser: i, n });
    }
    if j == 0 || j > inst.k() {
        return Err(Error::SlotOutOfRange { slot: j, k: inst.k() });
    }
    let alpha = inst.alpha()[i];
    let mut vhat = inst.effective_values().0;
    vhat[i] = 0.0;
    let at_zero = kunit(family, &vhat, j, ell)?.a[i];
    let (o, p, s) = others(&vhat, i);
    let mut curve = AllocationCurve {
        advertiser: i,
        slots: j,
        family,
        alpha,
        ell,
        scale: if s > 0.0 { s } else { 1.0 },
        pieces: Vec::new(),
        at_zero,
    };
    if p < j {
        curve.pieces.push(Piece { v_lo: 0.0, v_hi: f64::INFINITY, form: PieceForm::Full });
        return Ok(curve);
    }
    match family {
        Family::Ipa => ipa_pieces(&mut curve, &o, n, j)?,
        Family::Pa => pa_pieces(&mut curve, &o, j)?,
    }
    Ok(curve)
}

fn ipa_pieces(curve: &mut AllocationCurve, o: &[f64], n: usize, j: usize) -> Result<(), Error> {
    let (alpha, s, ell) = (curve.alpha, curve.scale, curve.ell);
    let w: Vec<f64> = o.iter().map(|&v| if v > 0.0 { libm::pow(v / s, -ell) } else { f64::INFINITY }).collect();
    let profile = SaturationProfile::new(&w)?;
    // i's allocation is positive once its own weight drops below 1/t0, and tends to 1 as t → t_max
    let t0 = profile.solve((n - j - 1) as f64)?;
    let t_max = profile.solve((n - j) as f64)?;
    let mut v_lo = v_of_u(t0, alpha, s, ell);
    if v_lo > 0.0 {
        curve.pieces.push(Piece { v_lo: 0.0, v_hi: v_lo, form: PieceForm::Zero });
    }
    for seg in profile.segments() {
        let lo = seg.t_lo.max(t0);
        let hi = seg.t_hi.min(t_max);
        if lo >= hi {
            continue;
        }
        let (x, y) = (seg.slope, (n - j) as f64 - seg.saturated as f64);
        let v_hi = if hi >= t_max { f64::INFINITY } else { v_of_u(hi / (y - x * hi), alpha, s, ell) };
        if v_hi > v_lo {
            curve.pieces.push(Piece { v_lo, v_hi, form: PieceForm::Inverse { x, y } });
            v_lo = v_hi;
        }
    }
    close_pieces(curve);
    Ok(())
}

fn pa_pieces(curve: &mut AllocationCurve, o: &[f64], j: usize) -> Result<(), Error> {
    let (alpha, s, ell) = (curve.alpha, curve.scale, curve.ell);
    let w: Vec<f64> = o.iter().map(|&v| if v > 0.0 { libm::pow(v / s, ell) } else { 0.0 }).collect();
    let profile = SaturationProfile::new(&w)?;
    // level falls from t_max (own bid 0) to t_sat, where i saturates
    let t_max = profile.solve(j as f64)?;
    let t_sat = profile.solve((j - 1) as f64)?;
    let mut v_lo = 0.0;
    for seg in profile.segments().iter().rev() {
        let lo = seg.t_lo.max(t_sat);
        let hi = seg.t_hi.min(t_max);
        if lo >= hi {
            continue;
        }
        let (x, y) = (seg.slope, j as f64 - seg.saturated as f64);
        let v_hi = if lo <= t_sat { v_of_u(1.0 / t_sat, alpha, s, ell) } else { v_of_u(y / lo - x, alpha, s, ell) };
        if v_hi > v_lo {
            curve.pieces.push(Piece { v_lo, v_hi, form: PieceForm::Proportional { x, y } });
            v_lo = v_hi;
        }
    }
    if v_lo < f64::INFINITY {
        curve.pieces.push(Piece { v_lo, v_hi: f64::INFINITY, form: PieceForm::Full });
    }
    close_pieces(curve);
    Ok(())
}

/// Makes the pieces start at 0 and end at ∞.
fn close_pieces(curve: &mut AllocationCurve) {
    if curve.pieces.is_empty() {
        curve.pieces.push(Piece { v_lo: 0.0, v_hi: f64::INFINITY, form: PieceForm::Full });
    }
    curve.pieces[0].v_lo = 0.0;
    curve.pieces.last_mut().expect("non-empty").v_hi = f64::INFINITY;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClickPiece {
    pub v_lo: f64,
    pub v_hi: f64,
    /// `(α_i (β_j − β_{j+1}), form of a^{(j)}_i)` for every slot with a non-zero coefficient.
    pub terms: Vec<(f64, PieceForm)>,
}

impl ClickPiece {
    fn eval_u(&self, u: f64) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.eval_u(u)).sum()
    }
}

/// `x_i(v) = α_i Σ_j a^{(j)}_i(v)·(β_j − β_{j+1})`, `β_{k+1} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickAllocationCurve {
    pub advertiser: usize,
    pub family: Family,
    pub alpha: f64,
    pub ell: f64,
    pub scale: f64,
    pub pieces: Vec<ClickPiece>,
    pub at_zero: f64,
}

impl ClickAllocationCurve {
    pub fn eval(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return self.at_zero;
        }
        let idx = self.pieces.partition_point(|p| p.v_hi <= v).min(self.pieces.len() - 1);
        self.pieces[idx].eval_u(u_of(v, self.alpha, self.scale, self.ell))
    }

    /// `∫_0^v (x_i(v) − x_i(z)) dz` by quadrature; free of the cancellation in `v·x − ∫x`.
    pub fn deficit(&self, v: f64) -> Result<f64, Error> {
        if v < 0.0 || v.is_nan() {
            return Err(Error::NegativeValueQuery(v));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        let top = self.eval(v);
        let mut total = 0.0;
        for p in &self.pieces {
            if p.v_lo >= v {
                break;
            }
            let g = |t: f64| top - p.eval_u(u_of(t, self.alpha, self.scale, self.ell));
            total += dyadic_integral(g, p.v_lo, p.v_hi.min(v));
        }
        Ok(total)
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    /// `∫_0^v x_i(z) dz`.
    pub fn integral(&self, v: f64, method: PaymentMethod) -> Result<f64, Error> {
        if v < 0.0 || v.is_nan() {
            return Err(Error::NegativeValueQuery(v));
        }
        if method == PaymentMethod::ClosedForm && self.ell != 1.0 {
            return Err(Error::ClosedFormUnavailable { ell: self.ell });
        }
        let mut total = 0.0;
        for p in &self.pieces {
            if p.v_lo >= v {
                break;
            }
            let (a, b) = (p.v_lo, p.v_hi.min(v));
            total += match method {
                PaymentMethod::ClosedForm => {
                    let z = |t: f64| self.alpha * t / self.scale;
                    let s: f64 = p.terms.iter().map(|(c, f)| c * f.integral_z(z(a), z(b))).sum();
                    s * self.scale / self.alpha
                }
                PaymentMethod::Quadrature => dyadic_integral(|t| p.eval_u(u_of(t, self.alpha, self.scale, self.ell)), a, b),
            };
        }
        Ok(total)
    }
}

/// Combines the `k` allocation curves of advertiser `i` on a common refinement.
/// Adaptive quadrature over `[a, b]` cut at `b/2, b/4, …`, so that each sub-interval sees
/// at most a doubling of `v` and steep `v^ℓ` transitions cannot hide between nodes.
fn dyadic_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut total = 0.0;
    let mut hi = b;
    for _ in 0..64 {
        let lo = hi * 0.5;
        if lo <= a {
            break;
        }
        total += quad::integrate(&f, lo, hi, QUAD_REL_TOL, 1e-300).value;
        hi = lo;
    }
    total + quad::integrate(&f, a, hi, QUAD_REL_TOL, 1e-300).value
}

pub fn click_allocation_curve(
    inst: &AuctionInstance,
    i: usize,
    ell: f64,
    family: Family,
) -> Result<ClickAllocationCurve, Error> {
    check_ell(ell)?;
    if i >= inst.n() {
        return Err(Error::AdvertiserOutOfRange { advertiser: i, n: inst.n() });
    }
    let alpha = inst.alpha()[i];
    let mut curves = Vec::new();
    for j in 1..=inst.k() {
        let c = alpha * (inst.beta_or_zero(j - 1) - inst.beta_or_zero(j));
        curves.push((c, allocation_curve(inst, i, j, ell, family)?));
    }
    let scale = curves.first().map_or(1.0, |(_, c)| c.scale);
    let at_zero = curves.iter().map(|(c, cur)| c * cur.at_zero).sum();
    let mut cuts: Vec<f64> = curves
        .iter()
        .filter(|(c, _)| *c != 0.0)
        .flat_map(|(_, cur)| cur.pieces.iter().map(|p| p.v_lo))
        .collect();
    cuts.push(0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut pieces = Vec::with_capacity(cuts.len());
    for (idx, &lo) in cuts.iter().enumerate() {
        let hi = cuts.get(idx + 1).copied().unwrap_or(f64::INFINITY);
        let terms = curves
            .iter()
            .filter(|(c, _)| *c != 0.0)
            .map(|(c, cur)| (*c, cur.pieces[find_piece(&cur.pieces, lo)].form))
            .collect();
        pieces.push(ClickPiece { v_lo: lo, v_hi: hi, terms });
    }
    Ok(ClickAllocationCurve { advertiser: i, family, alpha, ell, scale, pieces, at_zero })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaymentMethod {
    /// Logarithmic antiderivatives; only for `ℓ = 1`.
    ClosedForm,
    /// Adaptive Gauss–Kronrod per piece.
    Quadrature,
}

impl PaymentMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PaymentMethod::ClosedForm => "closed_form",
            PaymentMethod::Quadrature => "quadrature",
        }
    }

    pub fn for_ell(ell: f64) -> Self {
        if ell == 1.0 {
            PaymentMethod::ClosedForm
        } else {
            PaymentMethod::Quadrature
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payment {
    /// Click allocation `x_i(v)`.
    pub allocation: f64,
    /// Per-impression payment `v·x_i(v) − ∫_0^v x_i`.
    pub payment: f64,
    pub method: PaymentMethod,
    pub pieces: usize,
}

impl Payment {
    /// Payment per click, when the allocation is not negligible.
    pub fn per_click_price(&self) -> Option<f64> {
        (self.allocation > 1e-12).then(|| self.payment / self.allocation)
    }
}

/// Myerson payment at bid `v`, closed form when `ℓ = 1` and quadrature otherwise.
pub fn myerson_payment(curve: &ClickAllocationCurve, v: f64) -> Result<Payment, Error> {
    myerson_payment_using(curve, v, PaymentMethod::for_ell(curve.ell))
}

pub fn myerson_payment_using(curve: &ClickAllocationCurve, v: f64, method: PaymentMethod) -> Result<Payment, Error> {
    let allocation = if v == 0.0 { 0.0 } else { curve.eval(v) };
    let gross = v * allocation;
    let mut payment = match method {
        PaymentMethod::ClosedForm => gross - curve.integral(v, method)?,
        PaymentMethod::Quadrature => curve.deficit(v)?,
    };
    // rounding can leave a negative residue of the size of the cancellation
    if payment < 0.0 && payment > -1e-12 * gross.max(f64::MIN_POSITIVE) {
        payment = 0.0;
    }
    Ok(Payment { allocation, payment, method, pieces: curve.piece_count() })
}

/// Payment of advertiser `i` at its own bid.
pub fn advertiser_payment(inst: &AuctionInstance, i: usize, config: &MechanismConfig) -> Result<Payment, Error> {
    let curve = click_allocation_curve(inst, i, config.ell, config.family)?;
    myerson_payment(&curve, inst.values()[i])
}

/// Payments of every advertiser at their own bids.
pub fn all_payments(inst: &AuctionInstance, config: &MechanismConfig) -> Result<Vec<Payment>, Error> {
    (0..inst.n()).map(|i| advertiser_payment(inst, i, config)).collect()
}
