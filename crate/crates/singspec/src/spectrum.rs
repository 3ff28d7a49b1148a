//! Series-seeded shooting, characteristic determinants, eigenvalue search and
//! the discreteness criterion.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extensions::{BoundaryConditionSet, CMatrix, ExtensionContext, NullSolution};
use crate::forms::form_value;
use crate::frobenius::{frobenius_basis, FrobeniusSolution, OperatorSpec, Side};
use crate::logseries::{AnalyticSeries, LogSeries, DEFAULT_TRUNC};
use crate::ode::{integrate_observed, OdeConfig, OdeStats};
use crate::par::{self, ExecMode};
use crate::scalar::{ratio_to_f64, Gq};

type C = Complex64;

fn cz() -> C {
    C::new(0.0, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShootConfig {
    /// Matching point distance from the singular point.
    pub delta: f64,
    /// Local integration tolerance; series tails must stay below `tol / 10`.
    pub tol: f64,
    pub trunc: usize,
    pub max_trunc: usize,
    /// Also accumulate `∫ y_s conj(y_t)` over the half interval.
    pub l2_gram: bool,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig { delta: 0.5, tol: 1e-11, trunc: DEFAULT_TRUNC, max_trunc: 160, l2_gram: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShotColumn {
    /// Position in the fundamental system.
    pub index: usize,
    pub in_l2: bool,
    /// Quasi-derivatives at `±delta` and at `±1`.
    pub at_delta: Vec<C>,
    pub at_end: Vec<C>,
    /// `[y, u_k](0±)` against the partner null solutions (square-integrable
    /// members only).
    pub interface: Option<Vec<C>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shot {
    pub side: Side,
    pub lambda: C,
    pub delta: f64,
    pub trunc: usize,
    pub tail_bound: f64,
    pub columns: Vec<ShotColumn>,
    /// `∫ y_s conj(y_t)` over the half interval, square-integrable columns in order.
    pub l2_gram: Option<CMatrix>,
    pub stats: OdeStats,
}

impl Shot {
    pub fn l2_columns(&self) -> impl Iterator<Item = &ShotColumn> {
        self.columns.iter().filter(|c| c.in_l2)
    }
}

fn signed(m: usize) -> f64 {
    if m.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Right-hand side of the quasi-derivative system for `ncols` columns of
/// length `2m`, followed by `gram.len()^2` accumulated products.
fn qd_system<'a>(
    m: usize,
    lambda: C,
    coeff: &'a AnalyticSeries,
    ncols: usize,
    gram: &'a [usize],
) -> impl Fn(f64, &[C], &mut [C]) + 'a {
    let n = 2 * m;
    let sign = signed(m);
    move |x, y, d| {
        let inv_c = sign / coeff.eval_f64(x);
        for k in 0..ncols {
            let col = &y[k * n..(k + 1) * n];
            let out = &mut d[k * n..(k + 1) * n];
            for l in 0..n - 1 {
                out[l] = if l == m - 1 { col[m] * inv_c } else { col[l + 1] };
            }
            out[n - 1] = col[0] * lambda;
        }
        let base = ncols * n;
        for (i, &s) in gram.iter().enumerate() {
            for (j, &t) in gram.iter().enumerate() {
                d[base + i * gram.len() + j] = y[s * n] * y[t * n].conj();
            }
        }
    }
}

fn float_ladder(s: &NullSolution) -> (LogSeries<C>, Vec<LogSeries<C>>) {
    (s.series.to_float(), s.qd.iter().map(|q| q.to_float()).collect())
}

fn evaluate_all(qd: &[LogSeries<C>], x: f64) -> Result<(Vec<C>, f64)> {
    let mut out = Vec::with_capacity(qd.len());
    let mut tail: f64 = 0.0;
    for s in qd {
        let e = s.evaluate(x)?;
        out.push(e.value);
        tail = tail.max(e.tail_bound);
    }
    Ok((out, tail))
}

/// Float fundamental system at `lambda`. If rounding trips the log-degree
/// check, the (dyadic) parameter is taken exactly and the result converted.
fn float_basis(spec: &OperatorSpec, side: Side, lambda: C, trunc: usize) -> Result<Vec<FrobeniusSolution<C>>> {
    use num_rational::BigRational;
    match frobenius_basis(spec, side, lambda, trunc) {
        Err(Error::ResonanceOverflow { .. }) => {
            let exact = |v: f64| BigRational::from_float(v).ok_or_else(|| Error::Domain(format!("non-finite parameter {v}")));
            let lam = Gq::new(exact(lambda.re)?, exact(lambda.im)?);
            Ok(frobenius_basis(spec, side, lam, trunc)?.iter().map(|s| s.to_float()).collect())
        }
        other => other,
    }
}

/// Shoot every fundamental-system member at `lambda` from `±delta` to the outer
/// endpoint of `side`, with interface pairings against `partners`.
pub fn shoot(spec: &OperatorSpec, side: Side, lambda: C, partners: &[NullSolution], cfg: &ShootConfig) -> Result<Shot> {
    if !(cfg.delta > 0.0 && cfg.delta <= 0.5) {
        return Err(Error::Domain(format!("matching point {} outside (0, 1/2]", cfg.delta)));
    }
    let m = spec.m;
    let n = 2 * m;
    let mut trunc = cfg.trunc.max(spec.min_trunc());
    let (basis, starts, tail) = loop {
        let basis = float_basis(spec, side, lambda, trunc)?;
        let mut starts = Vec::with_capacity(basis.len());
        let mut tail: f64 = 0.0;
        for y in &basis {
            let (v, t) = evaluate_all(&y.qd, cfg.delta)?;
            let scale = v.iter().map(|c| c.norm()).fold(1.0, f64::max);
            tail = tail.max(t / scale);
            starts.push(v);
        }
        if tail <= cfg.tol / 10.0 {
            break (basis, starts, tail);
        }
        if trunc >= cfg.max_trunc {
            return Err(Error::TailBoundUnavailable);
        }
        trunc = (trunc + 20).min(cfg.max_trunc);
    };
    let partners: Vec<(LogSeries<C>, Vec<LogSeries<C>>)> = partners.iter().map(float_ladder).collect();
    let partner_at: Vec<Vec<C>> =
        partners.iter().map(|(_, qd)| evaluate_all(qd, cfg.delta).map(|v| v.0)).collect::<Result<_>>()?;
    // transport [y,u](0±) = [y,u](±δ) ∓ (-1)^m λ ∫_0^δ y conj(u)
    let transport = match side {
        Side::Right => -signed(m),
        Side::Left => signed(m),
    };
    let mut interfaces = Vec::with_capacity(basis.len());
    for (y, start) in basis.iter().zip(&starts) {
        if !y.in_l2 {
            interfaces.push(None);
            continue;
        }
        let mut eta = Vec::with_capacity(partners.len());
        for ((u, _), u_at) in partners.iter().zip(&partner_at) {
            let integral = y.series.mul(&u.conj()).integrate().evaluate(cfg.delta)?.value;
            eta.push(form_value(start, u_at, m)? + lambda * integral * transport);
        }
        interfaces.push(Some(eta));
    }
    let l2_idx: Vec<usize> = basis.iter().enumerate().filter(|(_, y)| y.in_l2).map(|(i, _)| i).collect();
    let gram_idx: Vec<usize> = if cfg.l2_gram { l2_idx.clone() } else { Vec::new() };
    let coeff = spec.coefficient(side);
    let ncols = basis.len();
    let mut y0: Vec<C> = starts.iter().flatten().copied().collect();
    y0.extend(std::iter::repeat_n(cz(), gram_idx.len() * gram_idx.len()));
    let (x0, x1) = match side {
        Side::Right => (cfg.delta, 1.0),
        Side::Left => (-cfg.delta, -1.0),
    };
    let ode = OdeConfig::with_tol(cfg.tol);
    let (end, stats) = integrate_observed(qd_system(m, lambda, &coeff, ncols, &gram_idx), x0, x1, y0, &ode, |_, _| {})?;
    let l2_gram = if cfg.l2_gram {
        let g = gram_idx.len();
        let base = ncols * n;
        // the left integration runs against x
        let orient = if side == Side::Left { -1.0 } else { 1.0 };
        let mut mat = DMatrix::from_fn(g, g, |i, j| end[base + i * g + j] * orient);
        for (i, &s) in gram_idx.iter().enumerate() {
            for (j, &t) in gram_idx.iter().enumerate() {
                let near = basis[s].series.mul(&basis[t].series.conj()).integrate().evaluate(cfg.delta)?;
                mat[(i, j)] += near.value;
            }
        }
        Some(mat)
    } else {
        None
    };
    let columns = basis
        .iter()
        .enumerate()
        .zip(starts)
        .zip(interfaces)
        .map(|(((k, y), at_delta), interface)| ShotColumn {
            index: y.index,
            in_l2: y.in_l2,
            at_delta,
            at_end: end[k * n..(k + 1) * n].to_vec(),
            interface,
        })
        .collect();
    Ok(Shot { side, lambda, delta: cfg.delta, trunc, tail_bound: tail, columns, l2_gram, stats })
}

/// Quasi-derivatives of the fundamental-system members at an arbitrary point of
/// the half interval of `side` (series inside `delta`, integration beyond).
pub fn solution_jets(spec: &OperatorSpec, side: Side, lambda: C, x: f64, cfg: &ShootConfig) -> Result<Vec<Vec<C>>> {
    let t = x.abs();
    let trunc = cfg.trunc.max(spec.min_trunc());
    let basis = float_basis(spec, side, lambda, trunc)?;
    let mut starts = Vec::with_capacity(basis.len());
    for y in &basis {
        starts.push(evaluate_all(&y.qd, t.min(cfg.delta))?.0);
    }
    if t <= cfg.delta {
        return Ok(starts);
    }
    let n = 2 * spec.m;
    let coeff = spec.coefficient(side);
    let x0 = x.signum() * cfg.delta;
    let y0: Vec<C> = starts.into_iter().flatten().collect();
    let (end, _) =
        integrate_observed(qd_system(spec.m, lambda, &coeff, basis.len(), &[]), x0, x, y0, &OdeConfig::with_tol(cfg.tol), |_, _| {})?;
    Ok(end.chunks(n).map(|c| c.to_vec()).collect())
}

/// Which half intervals a row of the characteristic system touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Left,
    Right,
    Coupled,
}

/// Square characteristic system at one parameter value: rows are the interface
/// conditions followed by the boundary conditions, columns the
/// square-integrable solutions (left, then right).
#[derive(Clone, Debug)]
pub struct CharacteristicSystem {
    pub lambda: f64,
    pub matrix: CMatrix,
    pub column_sides: Vec<Side>,
}

fn solution_data(ctx: &ExtensionContext, lambda: C, cfg: &ShootConfig) -> Result<(CMatrix, Vec<Side>)> {
    let left = shoot(&ctx.spec, Side::Left, lambda, &ctx.null_basis_left, cfg)?;
    let right = shoot(&ctx.spec, Side::Right, lambda, &ctx.null_basis_right, cfg)?;
    let mut cols: Vec<Vec<C>> = Vec::new();
    let mut sides = Vec::new();
    for (shot, side) in [(&left, Side::Left), (&right, Side::Right)] {
        for c in shot.l2_columns() {
            cols.push(ctx.boundary_vector(side, &c.at_end, c.interface.as_deref().unwrap_or(&[])));
            sides.push(side);
        }
    }
    let big_n = ctx.boundary_dimension();
    Ok((DMatrix::from_fn(big_n, cols.len(), |i, j| cols[j][i]), sides))
}

fn stacked_rows(ctx: &ExtensionContext, bc: &BoundaryConditionSet) -> CMatrix {
    let r = ctx.interface_rows();
    let a = bc.full();
    let mut all = DMatrix::zeros(r.nrows() + a.nrows(), a.ncols());
    all.view_mut((0, 0), (r.nrows(), a.ncols())).copy_from(r);
    all.view_mut((r.nrows(), 0), (a.nrows(), a.ncols())).copy_from(&a);
    all
}

pub fn characteristic_system(bc: &BoundaryConditionSet, ctx: &ExtensionContext, lambda: f64, cfg: &ShootConfig) -> Result<CharacteristicSystem> {
    ctx.check_dimensions(bc)?;
    let (w, column_sides) = solution_data(ctx, C::new(lambda, 0.0), cfg)?;
    let matrix = stacked_rows(ctx, bc) * &w;
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::NonSquareSystem { rows: matrix.nrows(), cols: matrix.ncols() });
    }
    Ok(CharacteristicSystem { lambda, matrix, column_sides })
}

/// Determinant of the characteristic system; zero exactly at eigenvalues.
pub fn characteristic_determinant(bc: &BoundaryConditionSet, ctx: &ExtensionContext, lambda: f64, cfg: &ShootConfig) -> Result<C> {
    Ok(characteristic_system(bc, ctx, lambda, cfg)?.matrix.determinant())
}

/// Row and column sets of the independent factors of the characteristic
/// determinant. When the rows that only see one half interval are exactly as
/// many as its solutions, the system is block triangular and the determinant
/// splits into a left and a right factor.
pub fn factorization(bc: &BoundaryConditionSet, ctx: &ExtensionContext) -> Result<Vec<(Factor, Vec<usize>, Vec<Side>)>> {
    ctx.check_dimensions(bc)?;
    let rows = stacked_rows(ctx, bc);
    let (left_cols, right_cols) = ctx.side_columns();
    let kinds: Vec<(bool, bool)> = (0..rows.nrows())
        .map(|i| {
            let hit = |cols: &std::ops::Range<usize>| cols.clone().any(|c| rows[(i, c)].norm() > 0.0);
            (hit(&left_cols), hit(&right_cols))
        })
        .collect();
    let only = |want_left: bool| -> Vec<usize> {
        kinds.iter().enumerate().filter(|(_, &(l, rr))| if want_left { l && !rr } else { rr && !l }).map(|(i, _)| i).collect()
    };
    let all: Vec<usize> = (0..kinds.len()).collect();
    let rest = |taken: &[usize]| -> Vec<usize> { all.iter().copied().filter(|i| !taken.contains(i)).collect() };
    let right_only = only(false);
    if right_only.len() == ctx.d2 && !right_only.is_empty() {
        return Ok(vec![(Factor::Left, rest(&right_only), vec![Side::Left]), (Factor::Right, right_only, vec![Side::Right])]);
    }
    let left_only = only(true);
    if left_only.len() == ctx.d1 && !left_only.is_empty() {
        return Ok(vec![(Factor::Left, left_only.clone(), vec![Side::Left]), (Factor::Right, rest(&left_only), vec![Side::Right])]);
    }
    Ok(vec![(Factor::Coupled, all, vec![Side::Left, Side::Right])])
}

fn factor_det(sys: &CharacteristicSystem, rows: &[usize], sides: &[Side]) -> C {
    let cols: Vec<usize> = sys.column_sides.iter().enumerate().filter(|(_, s)| sides.contains(s)).map(|(i, _)| i).collect();
    if rows.len() != cols.len() {
        return C::new(f64::NAN, f64::NAN);
    }
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| sys.matrix[(rows[i], cols[j])]).determinant()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub lambda: f64,
    pub bracket: (f64, f64),
    /// `|D(λ)|` relative to the largest sampled value of the factor.
    pub det_residual: f64,
    pub factor: Factor,
    /// Found as a touching minimum of `|D|` rather than a sign change.
    pub even_order: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSample {
    pub lambda: f64,
    pub factor: Factor,
    pub re: f64,
    pub im: f64,
    /// Phase-normalized real signal used for bracketing.
    pub signal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Advisory {
    /// Adjacent brackets share an endpoint; a finer scan may separate more roots.
    ScanTooCoarse { factor: Factor, near: f64 },
    /// The phase-normalized determinant kept a sizeable imaginary part.
    PhaseDrift { factor: Factor, relative_imaginary: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenConfig {
    pub scan_points: usize,
    /// Bracket width at which bisection stops.
    pub tol: f64,
    pub shoot: ShootConfig,
    pub mode: ExecMode,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig { scan_points: 200, tol: 1e-10, shoot: ShootConfig::default(), mode: ExecMode::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<Eigenvalue>,
    pub scan: Vec<ScanSample>,
    pub advisories: Vec<Advisory>,
    pub config: EigenConfig,
}

impl SpectrumResult {
    pub fn of_factor(&self, factor: Factor) -> Vec<f64> {
        self.eigenvalues.iter().filter(|e| e.factor == factor).map(|e| e.lambda).collect()
    }
}

/// Eigenvalues in `range` from sign changes (and touching minima) of the
/// phase-normalized characteristic factors, refined by bisection.
pub fn eigenvalues(bc: &BoundaryConditionSet, ctx: &ExtensionContext, range: (f64, f64), cfg: &EigenConfig) -> Result<SpectrumResult> {
    let (lo, hi) = range;
    if !(hi > lo) || cfg.scan_points < 2 {
        return Err(Error::Domain("empty scan range".into()));
    }
    let factors = factorization(bc, ctx)?;
    let grid: Vec<f64> = (0..cfg.scan_points).map(|i| lo + (hi - lo) * i as f64 / (cfg.scan_points - 1) as f64).collect();
    let systems: Vec<CharacteristicSystem> =
        par::map(&grid, cfg.mode, |&l| characteristic_system(bc, ctx, l, &cfg.shoot)).into_iter().collect::<Result<_>>()?;
    let mut eigen = Vec::new();
    let mut scan = Vec::new();
    let mut advisories = Vec::new();
    for (factor, rows, sides) in &factors {
        let dets: Vec<C> = systems.iter().map(|s| factor_det(s, rows, sides)).collect();
        if dets.iter().any(|d| !d.re.is_finite() || !d.im.is_finite()) {
            return Err(Error::NonSquareSystem { rows: rows.len(), cols: 0 });
        }
        let peak = dets.iter().map(|d| d.norm()).fold(0.0, f64::max);
        let reference = dets.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(C::new(1.0, 0.0));
        let phase = if peak > 0.0 { reference.conj() / reference.norm() } else { C::new(1.0, 0.0) };
        let signal: Vec<f64> = dets.iter().map(|d| (d * phase).re).collect();
        let drift = dets.iter().map(|d| (d * phase).im.abs()).fold(0.0, f64::max) / peak.max(f64::MIN_POSITIVE);
        if drift > 1e-6 {
            advisories.push(Advisory::PhaseDrift { factor: *factor, relative_imaginary: drift });
        }
        for ((l, d), s) in grid.iter().zip(&dets).zip(&signal) {
            scan.push(ScanSample { lambda: *l, factor: *factor, re: d.re, im: d.im, signal: *s });
        }
        let eval = |l: f64| -> Result<f64> {
            let sys = characteristic_system(bc, ctx, l, &cfg.shoot)?;
            Ok((factor_det(&sys, rows, sides) * phase).re)
        };
        let mut last_bracket_end: Option<usize> = None;
        for i in 0..grid.len() - 1 {
            let (a, b) = (grid[i], grid[i + 1]);
            let (fa, fb) = (signal[i], signal[i + 1]);
            if fa == 0.0 {
                eigen.push(Eigenvalue { lambda: a, bracket: (a, a), det_residual: 0.0, factor: *factor, even_order: false });
                continue;
            }
            if fa * fb < 0.0 {
                if last_bracket_end == Some(i) {
                    advisories.push(Advisory::ScanTooCoarse { factor: *factor, near: a });
                }
                last_bracket_end = Some(i + 1);
                let (mut x0, mut x1, mut f0) = (a, b, fa);
                while x1 - x0 > cfg.tol {
                    let mid = 0.5 * (x0 + x1);
                    let fm = eval(mid)?;
                    if fm == 0.0 {
                        x0 = mid;
                        x1 = mid;
                        break;
                    }
                    if f0 * fm < 0.0 {
                        x1 = mid;
                    } else {
                        x0 = mid;
                        f0 = fm;
                    }
                }
                let root = 0.5 * (x0 + x1);
                let res = eval(root)?.abs() / peak.max(f64::MIN_POSITIVE);
                eigen.push(Eigenvalue { lambda: root, bracket: (x0, x1), det_residual: res, factor: *factor, even_order: false });
            } else if i > 0 && signal[i].abs() < signal[i - 1].abs() && signal[i].abs() < fb.abs() && signal[i - 1] * fa > 0.0 {
                // touching minimum: golden-section search on |signal|
                let (mut x0, mut x1) = (grid[i - 1], b);
                let g = 0.5 * (5f64.sqrt() - 1.0);
                let mut c = x1 - g * (x1 - x0);
                let mut d = x0 + g * (x1 - x0);
                let (mut fc, mut fd) = (eval(c)?.abs(), eval(d)?.abs());
                while x1 - x0 > cfg.tol.max(1e-9) {
                    if fc < fd {
                        x1 = d;
                        d = c;
                        fd = fc;
                        c = x1 - g * (x1 - x0);
                        fc = eval(c)?.abs();
                    } else {
                        x0 = c;
                        c = d;
                        fc = fd;
                        d = x0 + g * (x1 - x0);
                        fd = eval(d)?.abs();
                    }
                }
                let res = fc.min(fd) / peak.max(f64::MIN_POSITIVE);
                if res < 1e-8 {
                    let root = 0.5 * (x0 + x1);
                    eigen.push(Eigenvalue { lambda: root, bracket: (x0, x1), det_residual: res, factor: *factor, even_order: true });
                }
            }
        }
    }
    eigen.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(SpectrumResult { eigenvalues: eigen, scan, advisories, config: cfg.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionSample {
    pub x: f64,
    /// `x^{1-2m} ∫_0^x s^{4m-2} c(s)^{-1} ds` from the series.
    pub series: f64,
    /// The same quantity by Gauss-Legendre quadrature (integrable cases).
    pub quadrature: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionReport {
    pub m: usize,
    pub order: usize,
    /// Limit read off the leading series term; `None` when it diverges.
    pub limit_estimate: Option<f64>,
    pub closed_form_zero: bool,
    pub samples: Vec<CriterionSample>,
}

/// Evaluate `lim_{x→0+} x^{1-2m} ∫_0^x s^{4m-2} / (s^order a(s)) ds`.
pub fn discreteness_criterion(m: usize, order: usize, coeff: &AnalyticSeries) -> Result<CriterionReport> {
    if m == 0 || order == 0 {
        return Err(Error::Domain("m and order must be positive".into()));
    }
    if num_traits::Zero::is_zero(&coeff.leading()) {
        return Err(Error::Domain("leading coefficient must be nonzero".into()));
    }
    let trunc = 24;
    let shift = 4 * m as i64 - 2 - order as i64;
    let integrand: LogSeries<Gq> = coeff.reciprocal(trunc)?.to_logseries(shift, trunc);
    let g = integrand.integrate().shift(1 - 2 * m as i64);
    let limit_estimate = if g.is_zero() || g.rho() > 0 {
        Some(0.0)
    } else if g.rho() == 0 && g.max_log() == 0 {
        Some(ratio_to_f64(&g.coeff(0, 0).re))
    } else {
        None
    };
    let rule = GaussLegendre::new(NonZeroUsize::new(20).expect("nonzero"));
    let samples = (1..=7)
        .map(|k| {
            let x = 10f64.powi(-k);
            let series = g.evaluate(x)?.value.re;
            let quadrature = (shift >= 0).then(|| {
                let integral = rule.integrate(0.0, x, |s| s.powi(shift as i32) / coeff.eval_f64(s));
                integral * x.powi(1 - 2 * m as i32)
            });
            Ok(CriterionSample { x, series, quadrature })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CriterionReport { m, order, limit_estimate, closed_form_zero: order < 2 * m, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extensions::build_context;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    /// `Σ (-λx)^k / (k!)^2` and `-x d/dx` of it.
    fn bessel_pair(lambda: f64, x: f64) -> (f64, f64) {
        let (mut term, mut value, mut qd) = (1.0, 1.0, 0.0);
        for k in 1..80 {
            term *= -lambda * x / (k * k) as f64;
            value += term;
            qd -= k as f64 * term;
        }
        (value, qd)
    }

    /// Zeros of `Σ (-z^2/4)^k/(k!)^2` by scanning and bisection.
    fn j0_zeros(count: usize) -> Vec<f64> {
        let j0 = |z: f64| bessel_pair(z * z / 4.0, 1.0).0;
        let mut out = Vec::new();
        let mut a = 0.5;
        while out.len() < count {
            let b = a + 0.1;
            if j0(a) * j0(b) < 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if j0(lo) * j0(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
            a = b;
        }
        out
    }

    fn dirichlet(ctx: &ExtensionContext) -> BoundaryConditionSet {
        let c = |v: f64| C::new(v, 0.0);
        let mut bc = BoundaryConditionSet::zeros(ctx);
        bc.a1[(0, 0)] = c(1.0);
        bc.a2[(1, 0)] = c(1.0);
        bc.b2[(2, 0)] = c(1.0);
        bc
    }

    #[test]
    fn float_basis_matches_exact_conversion() {
        let spec = OperatorSpec::unit(2, 1, 3).unwrap();
        for side in [Side::Left, Side::Right] {
            let float = float_basis(&spec, side, C::new(0.75, 0.5), 30).unwrap();
            let lam = Gq::new(BigRational::new(BigInt::from(3), BigInt::from(4)), BigRational::new(BigInt::from(1), BigInt::from(2)));
            let exact = frobenius_basis(&spec, side, lam, 30).unwrap();
            for (f, e) in float.iter().zip(&exact) {
                for (a, b) in f.qd.iter().zip(&e.qd) {
                    let va = a.evaluate(0.3).unwrap().value;
                    let vb = b.to_float().evaluate(0.3).unwrap().value;
                    assert!((va - vb).norm() <= 1e-12 * vb.norm().max(1.0), "{side:?} {va} {vb}");
                }
            }
        }
    }

    #[test]
    fn regular_solution_follows_the_bessel_series() {
        let spec = OperatorSpec::unit(1, 1, 1).unwrap();
        for lambda in [0.5, 2.0, 9.0] {
            let shot = shoot(&spec, Side::Right, C::new(lambda, 0.0), &[], &ShootConfig::default()).unwrap();
            let (v1, q1) = bessel_pair(lambda, 1.0);
            let (vd, _) = bessel_pair(lambda, 0.5);
            let col = shot.columns.iter().find(|c| (c.at_delta[0] - C::new(vd, 0.0)).norm() < 1e-12).expect("regular member");
            assert!((col.at_end[0].re - v1).abs() < 1e-9, "{lambda}: {} vs {v1}", col.at_end[0]);
            assert!((col.at_end[1].re - q1).abs() < 1e-9, "{lambda}: {} vs {q1}", col.at_end[1]);
        }
    }

    #[test]
    fn boundary_form_is_constant_along_real_shots() {
        for (m, p, q) in [(1, 1, 1), (2, 1, 3), (2, 3, 2)] {
            let spec = OperatorSpec::unit(m, p, q).unwrap();
            for side in [Side::Left, Side::Right] {
                let shot = shoot(&spec, side, C::new(1.7, 0.0), &[], &ShootConfig::default()).unwrap();
                for a in &shot.columns {
                    for b in &shot.columns {
                        let near = form_value(&a.at_delta, &b.at_delta, m).unwrap();
                        let far = form_value(&a.at_end, &b.at_end, m).unwrap();
                        let scale = near.norm().max(far.norm()).max(1.0);
                        assert!((near - far).norm() <= 1e-8 * scale, "m={m} {side:?}: {near} {far}");
                    }
                }
            }
        }
    }

    #[test]
    fn nonreal_gram_is_hermitian_positive() {
        let spec = OperatorSpec::unit(2, 1, 3).unwrap();
        let cfg = ShootConfig { l2_gram: true, ..ShootConfig::default() };
        for side in [Side::Left, Side::Right] {
            let g = shoot(&spec, side, C::new(0.0, 1.0), &[], &cfg).unwrap().l2_gram.unwrap();
            assert!((g.adjoint() - &g).norm() < 1e-9 * g.norm());
            assert!(g.clone().cholesky().is_some());
        }
    }

    #[test]
    fn dirichlet_splits_and_finds_bessel_eigenvalues() {
        let ctx = build_context(&OperatorSpec::unit(1, 1, 1).unwrap()).unwrap();
        let bc = dirichlet(&ctx);
        let f = factorization(&bc, &ctx).unwrap();
        assert_eq!(f.iter().map(|x| x.0).collect::<Vec<_>>(), vec![Factor::Left, Factor::Right]);
        let want: Vec<f64> = j0_zeros(2).iter().map(|z| z * z / 4.0).collect();
        assert!((want[0] - 1.445796).abs() < 1e-6 && (want[1] - 7.617816).abs() < 1e-6);
        let res = eigenvalues(&bc, &ctx, (0.5, 10.0), &EigenConfig::default()).unwrap();
        let right = res.of_factor(Factor::Right);
        assert_eq!(right.len(), 2, "{right:?}");
        for (g, w) in right.iter().zip(&want) {
            assert!((g - w).abs() < 1e-6, "{g} vs {w}");
        }
        assert!(res.eigenvalues.iter().all(|e| !e.even_order && e.det_residual < 1e-6));
    }

    #[test]
    fn eigenvalues_are_stable_in_matching_point_and_truncation() {
        let ctx = build_context(&OperatorSpec::unit(1, 1, 1).unwrap()).unwrap();
        let bc = dirichlet(&ctx);
        let mut seen = Vec::new();
        for delta in [0.25, 0.5] {
            for trunc in [40, 60] {
                let cfg = EigenConfig { scan_points: 60, shoot: ShootConfig { delta, trunc, ..ShootConfig::default() }, ..EigenConfig::default() };
                seen.push(eigenvalues(&bc, &ctx, (1.0, 8.0), &cfg).unwrap().of_factor(Factor::Right));
            }
        }
        for s in &seen[1..] {
            assert_eq!(s.len(), seen[0].len());
            for (a, b) in s.iter().zip(&seen[0]) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn execution_modes_agree() {
        let ctx = build_context(&OperatorSpec::unit(1, 1, 1).unwrap()).unwrap();
        let bc = dirichlet(&ctx);
        let run = |mode| eigenvalues(&bc, &ctx, (1.0, 2.0), &EigenConfig { scan_points: 20, mode, ..EigenConfig::default() }).unwrap();
        let a = run(ExecMode::Parallel);
        let b = run(ExecMode::Sequential);
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.scan, b.scan);
    }

    #[test]
    fn empty_range_is_rejected() {
        let ctx = build_context(&OperatorSpec::unit(1, 1, 1).unwrap()).unwrap();
        let bc = dirichlet(&ctx);
        assert!(eigenvalues(&bc, &ctx, (2.0, 2.0), &EigenConfig::default()).is_err());
        assert!(matches!(shoot(&ctx.spec, Side::Right, C::new(1.0, 0.0), &[], &ShootConfig { delta: 0.7, ..ShootConfig::default() }), Err(Error::Domain(_))));
    }

    #[test]
    fn discreteness_limits() {
        let unit = AnalyticSeries::one();
        let two = AnalyticSeries::polynomial(vec![BigRational::from_integer(BigInt::from(2)), BigRational::from_integer(BigInt::from(1))]);
        for m in 1..=3usize {
            for order in 1..=2 * m + 1 {
                for (coeff, a0) in [(&unit, 1.0), (&two, 2.0)] {
                    let rep = discreteness_criterion(m, order, coeff).unwrap();
                    assert_eq!(rep.closed_form_zero, order < 2 * m);
                    let expect = match order.cmp(&(2 * m)) {
                        std::cmp::Ordering::Less => Some(0.0),
                        std::cmp::Ordering::Equal => Some(1.0 / ((2 * m - 1) as f64 * a0)),
                        std::cmp::Ordering::Greater => None,
                    };
                    assert_eq!(rep.limit_estimate, expect, "m={m} order={order}");
                    for s in &rep.samples {
                        if let Some(qv) = s.quadrature {
                            assert!((qv - s.series).abs() <= 1e-10 * s.series.abs().max(1e-30), "m={m} order={order} x={}", s.x);
                        }
                    }
                    if let Some(l) = expect {
                        let last = rep.samples.last().unwrap().series;
                        assert!((last - l).abs() < 1e-5 * l.max(1.0));
                    }
                }
            }
        }
        assert!(discreteness_criterion(0, 1, &unit).is_err());
    }
}
