//! Lagrange forms `[f,g] = (-1)^m G^* E F`, jets of minimal-domain functions at
//! the singular point, form limits there, and the adapted solution bases.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frobenius::{frobenius_basis, local_ladder, orient_ladder, FrobeniusSolution, OperatorSpec, Side};
use crate::linalg;
use crate::logseries::LogSeries;
use crate::scalar::{Coeff, Gq};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    /// `(-1)^{r-1} δ_{r, k+1-s}`, the matrix inside the Lagrange form.
    Biform,
    /// `(-1)^r δ_{r, k+1-s}`, the normalization target `E_k`.
    Symplectic,
}

/// Antidiagonal `±1` matrix of even size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FormMatrix {
    pub size: usize,
    pub kind: FormKind,
    pub entries: Vec<Vec<i8>>,
}

impl FormMatrix {
    pub fn new(size: usize, kind: FormKind) -> Self {
        let entries = (1..=size)
            .map(|r| {
                (1..=size)
                    .map(|s| {
                        if r + s != size + 1 {
                            0
                        } else {
                            let odd = match kind {
                                FormKind::Biform => (r - 1) % 2 == 1,
                                FormKind::Symplectic => r % 2 == 1,
                            };
                            if odd { -1 } else { 1 }
                        }
                    })
                    .collect()
            })
            .collect();
        FormMatrix { size, kind, entries }
    }

    pub fn biform(size: usize) -> Self {
        Self::new(size, FormKind::Biform)
    }

    /// `E_k`.
    pub fn symplectic(size: usize) -> Self {
        Self::new(size, FormKind::Symplectic)
    }

    pub fn scaled<S: Coeff>(&self, c: i64) -> linalg::Rows<S> {
        self.entries.iter().map(|r| r.iter().map(|&v| S::from_i64(v as i64 * c)).collect()).collect()
    }
}

/// `(-1)^m Σ_r (-1)^{r-1} conj(g_{r-1}) f_{2m-r}`.
pub fn form_value<S: Coeff>(f: &[S], g: &[S], m: usize) -> Result<S> {
    let n = 2 * m;
    if f.len() != n || g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("jets of length {n}"),
            got: format!("{} and {}", f.len(), g.len()),
        });
    }
    let mut acc = S::zero();
    for r in 1..=n {
        let term = g[r - 1].conj() * f[n - r].clone();
        acc = if (r - 1) % 2 == 0 { acc + term } else { acc - term };
    }
    Ok(if m.is_multiple_of(2) { acc } else { -acc })
}

/// The form `[f,g](x)` as a series, from the two quasi-derivative ladders.
pub fn form_series<S: Coeff>(f: &[LogSeries<S>], g: &[LogSeries<S>], m: usize) -> LogSeries<S> {
    let n = 2 * m;
    let mut acc: Option<LogSeries<S>> = None;
    for r in 1..=n {
        let term = g[r - 1].conj().mul(&f[n - r]);
        let term = if (r - 1) % 2 == 0 { term } else { term.neg() };
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term),
        });
    }
    let acc = acc.expect("m >= 1");
    if m.is_multiple_of(2) { acc } else { acc.neg() }
}

/// Limit as the local variable tends to `0+`: the `x^0 ln^0` coefficient, after
/// checking that no term of nonpositive exponent survives.
pub fn series_limit_at_zero<S: Coeff>(s: &LogSeries<S>) -> Result<S> {
    if s.is_zero() {
        if s.valid_through() < 0 {
            return Err(Error::TruncationTooSmall { need: (-s.valid_through()) as usize, got: 0 });
        }
        return Ok(S::zero());
    }
    if s.valid_through() < 0 {
        return Err(Error::TruncationTooSmall { need: (s.trunc() as i64 - s.valid_through()) as usize, got: s.trunc() });
    }
    for e in s.rho()..=0 {
        for j in 0..=s.max_log() {
            if (e < 0 || j > 0) && !s.coeff(j, e).is_zero() {
                return Err(Error::DivergentLimit);
            }
        }
    }
    Ok(s.coeff(0, 0))
}

/// Positions `l` of the quasi-derivatives `f^{[l]}(0)` that a minimal-domain
/// function may prescribe at the singular point, for zero order `order`.
pub fn free_mask(m: usize, order: usize) -> Vec<bool> {
    (0..2 * m).map(|l| l < m || (order <= m && l >= m + order)).collect()
}

/// Prescribed quasi-derivatives at the singular point, from one side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Jet<S> {
    pub values: Vec<S>,
    pub free_mask: Vec<bool>,
}

impl<S: Coeff> Jet<S> {
    pub fn new(values: Vec<S>, m: usize, order: usize) -> Result<Self> {
        if values.len() != 2 * m {
            return Err(Error::DimensionMismatch { expected: format!("{}", 2 * m), got: format!("{}", values.len()) });
        }
        let mask = free_mask(m, order);
        if let Some(l) = (0..2 * m).find(|&l| !mask[l] && !values[l].is_zero()) {
            return Err(Error::Domain(format!("jet position {l} must vanish for zero order {order}")));
        }
        Ok(Jet { values, free_mask: mask })
    }

    /// Unit jet at `pos` (must be a free position).
    pub fn unit(pos: usize, m: usize, order: usize) -> Result<Self> {
        let mut v = vec![S::zero(); 2 * m];
        if pos >= 2 * m {
            return Err(Error::IndexOutOfRange { index: pos, max: 2 * m - 1 });
        }
        v[pos] = S::one();
        Self::new(v, m, order)
    }
}

/// Series model of a minimal-domain function near the singular point whose
/// quasi-derivatives at `0` are the given jet, returned as its quasi-derivative
/// ladder in the original variable (series in the local variable of `side`).
pub fn jet_ladder<S: Coeff>(spec: &OperatorSpec, side: Side, jet: &Jet<S>, trunc: usize) -> Result<Vec<LogSeries<S>>> {
    let m = spec.m;
    let order = spec.order(side);
    let coeff = spec.local_coefficient(side);
    // local jet: Y^{[l]}(0) = (-1)^l y^{[l]}(0) on the left
    let local: Vec<S> = jet
        .values
        .iter()
        .enumerate()
        .map(|(l, v)| if side == Side::Left && l % 2 == 1 { -v.clone() } else { v.clone() })
        .collect();
    let mut fact = S::one();
    let mut low = Vec::with_capacity(m);
    for (l, v) in local.iter().take(m).enumerate() {
        if l > 0 {
            fact = fact * S::from_i64(l as i64);
        }
        low.push(v.clone() / fact.clone());
    }
    let mut y = LogSeries::power(0, low, trunc);
    if order <= m && local[m + order..].iter().any(|v| !v.is_zero()) {
        // y^{[m]} = Σ_{j>=order} b_{m+j} t^j / j!  =>  y^{(m)} = (-1)^m y^{[m]} / (t^order a)
        let mut upper = vec![S::zero(); m];
        let mut fact = S::one();
        for j in 1..m {
            fact = fact * S::from_i64(j as i64);
            if j >= order {
                upper[j - order] = local[m + j].clone() / fact.clone();
            }
        }
        let recip = coeff.reciprocal(trunc)?.to_logseries::<S>(0, trunc);
        let sign = if m.is_multiple_of(2) { S::one() } else { -S::one() };
        let mut dm = LogSeries::power(0, upper, trunc).mul(&recip).scale(&sign);
        for _ in 0..m {
            dm = dm.integrate();
        }
        y = y.add(&dm);
    }
    Ok(orient_ladder(side, local_ladder(m, order, &coeff, &y)))
}

/// `lim [f, y](0±)` where `f` is modelled by its jet and `y` is a solution.
pub fn jet_form_limit<S: Coeff>(spec: &OperatorSpec, jet: &Jet<S>, y: &FrobeniusSolution<S>) -> Result<S> {
    let trunc = y.series.trunc();
    let f = jet_ladder(spec, y.side, jet, trunc)?;
    series_limit_at_zero(&form_series(&f, &y.qd, spec.m))
}

/// Limit of `[f, y_s](0±)` for every fundamental-system member `s` and every
/// free jet position `l` (`None` where the limit does not exist).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitTable<S> {
    pub side: Side,
    pub positions: Vec<usize>,
    pub rows: Vec<Option<Vec<S>>>,
}

pub fn limit_table<S: Coeff>(spec: &OperatorSpec, sols: &[FrobeniusSolution<S>]) -> Result<LimitTable<S>> {
    let side = sols.first().map_or(Side::Right, |s| s.side);
    let order = spec.order(side);
    let positions: Vec<usize> = (0..2 * spec.m).filter(|&l| free_mask(spec.m, order)[l]).collect();
    let mut rows = Vec::with_capacity(sols.len());
    for y in sols {
        let mut row = Vec::with_capacity(positions.len());
        let mut ok = true;
        for &l in &positions {
            match jet_form_limit(spec, &Jet::unit(l, spec.m, order)?, y) {
                Ok(v) => row.push(v),
                Err(Error::DivergentLimit) => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        rows.push(ok.then_some(row));
    }
    Ok(LimitTable { side, positions, rows })
}

/// Indices `k` (1-based) whose form limit is a nonzero multiple of
/// `f^{[2m-k]}(0)`; every other square-integrable member has limit zero.
pub fn nonzero_limit_indices(m: usize, order: usize) -> Vec<usize> {
    if order <= m {
        (1..=m - order).chain(m + 1..=2 * m).collect()
    } else {
        (order + 1..=2 * m).collect()
    }
}

/// Indices `k` of the square-integrable members.
pub fn l2_indices(m: usize, order: usize) -> Vec<usize> {
    if order <= m {
        (1..=2 * m).collect()
    } else {
        (1..=m).chain(order + 1..=2 * m).collect()
    }
}

/// One member of the adapted basis.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedSolution<S> {
    pub k: usize,
    /// Coefficients on the leading-normalized fundamental system.
    pub combination: Vec<S>,
    pub solution: FrobeniusSolution<S>,
    /// `α_k` (right) or `β_k` (left) when the limit is nonzero.
    pub constant: Option<S>,
}

/// Fundamental system re-indexed so that `[f, y_k](0±) = c_k f^{[2m-k]}(0)` or `0`
/// on the square-integrable members.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedSystem<S> {
    pub side: Side,
    pub members: Vec<AdaptedSolution<S>>,
}

impl<S: Coeff> AdaptedSystem<S> {
    pub fn get(&self, k: usize) -> Option<&AdaptedSolution<S>> {
        self.members.iter().find(|a| a.k == k)
    }

    pub fn l2(&self) -> impl Iterator<Item = &AdaptedSolution<S>> {
        self.members.iter().filter(|a| a.solution.in_l2)
    }
}

pub fn combine<S: Coeff>(sols: &[FrobeniusSolution<S>], coeffs: &[S]) -> (LogSeries<S>, Vec<LogSeries<S>>) {
    let mut series: Option<LogSeries<S>> = None;
    let mut qd: Vec<Option<LogSeries<S>>> = vec![None; sols[0].qd.len()];
    for (y, c) in sols.iter().zip(coeffs) {
        if c.is_zero() {
            continue;
        }
        let add = |acc: Option<LogSeries<S>>, t: &LogSeries<S>| match acc {
            None => Some(t.scale(c)),
            Some(a) => Some(a.add(&t.scale(c))),
        };
        series = add(series, &y.series);
        for (slot, t) in qd.iter_mut().zip(&y.qd) {
            *slot = add(slot.take(), t);
        }
    }
    let zero = || LogSeries::zero(sols[0].series.valid_through());
    (series.unwrap_or_else(zero), qd.into_iter().map(|s| s.unwrap_or_else(zero)).collect())
}

/// Elimination on the exact `λ = 0` limit table: members are taken in template
/// order, earlier owners are subtracted, and the remaining single nonzero entry
/// (if any) makes the member the owner of that jet position.
fn adapted_coefficients(spec: &OperatorSpec, side: Side, trunc: usize) -> Result<Vec<(usize, Vec<Gq>, Option<Gq>)>> {
    let m = spec.m;
    let order = spec.order(side);
    let sols = frobenius_basis(spec, side, Gq::int(0), trunc)?;
    let table = limit_table(spec, &sols)?;
    let n = sols.len();
    let npos = table.positions.len();
    // (column, combination, reduced row)
    let mut owners: Vec<(usize, Vec<Gq>, Gq)> = Vec::new();
    let mut zero_l2 = Vec::new();
    let mut outside = Vec::new();
    for (s, y) in sols.iter().enumerate() {
        let mut comb = vec![Gq::int(0); n];
        comb[s] = Gq::int(1);
        if !y.in_l2 {
            outside.push(comb);
            continue;
        }
        let mut row = table.rows[s].clone().ok_or(Error::DivergentLimit)?;
        for (col, ocomb, oval) in &owners {
            if row[*col].is_zero() {
                continue;
            }
            let f = row[*col].clone() / oval.clone();
            row[*col] = Gq::int(0);
            for (c, oc) in comb.iter_mut().zip(ocomb) {
                *c = c.clone() - f.clone() * oc.clone();
            }
        }
        let nz: Vec<usize> = (0..npos).filter(|&c| !row[c].is_zero()).collect();
        match nz.as_slice() {
            [] => zero_l2.push(comb),
            [c] => owners.push((*c, comb, row[*c].clone())),
            _ => return Err(Error::Domain(format!("limit table of member {} is not triangular", s + 1))),
        }
    }
    let zero_ks: Vec<usize> = l2_indices(m, order).into_iter().filter(|k| !nonzero_limit_indices(m, order).contains(k)).collect();
    if zero_ks.len() != zero_l2.len() {
        return Err(Error::RankDeficient { rank: owners.len(), need: nonzero_limit_indices(m, order).len() });
    }
    let mut out = Vec::with_capacity(n);
    for (col, comb, val) in owners {
        out.push((2 * m - table.positions[col], comb, Some(val)));
    }
    for (k, comb) in zero_ks.into_iter().zip(zero_l2) {
        out.push((k, comb, None));
    }
    for (k, comb) in (m + 1..=order).zip(outside) {
        out.push((k, comb, None));
    }
    out.sort_by_key(|e| e.0);
    Ok(out)
}

/// Adapted basis at spectral parameter `lambda`. The recombination is computed
/// once at `λ = 0`; the leading terms that determine the limits do not depend
/// on `λ`.
pub fn adapted_basis<S: Coeff>(spec: &OperatorSpec, side: Side, lambda: S, trunc: usize) -> Result<AdaptedSystem<S>> {
    let coeffs = adapted_coefficients(spec, side, trunc)?;
    let sols = frobenius_basis(spec, side, lambda, trunc)?;
    let members = coeffs
        .into_iter()
        .map(|(k, comb, constant)| {
            let comb: Vec<S> = comb.iter().map(|c| S::from_ratio(&c.re)).collect();
            let lead = comb.iter().position(|c| !c.is_zero()).expect("nonzero combination");
            let (series, qd) = combine(&sols, &comb);
            let base = &sols[lead];
            let solution = FrobeniusSolution {
                index: k,
                side,
                exponent: base.exponent,
                lead_log: base.lead_log,
                series,
                qd,
                lambda: base.lambda.clone(),
                in_l2: base.in_l2,
            };
            AdaptedSolution { k, combination: comb, solution, constant: constant.map(|c| S::from_ratio(&c.re)) }
        })
        .collect();
    Ok(AdaptedSystem { side, members })
}

/// `lim [f, y_k](0±)` for the adapted member `k` at `λ = 0`.
pub fn form_limit_at_zero(k: usize, side: Side, spec: &OperatorSpec, jet: &Jet<Gq>) -> Result<Gq> {
    if k == 0 || k > 2 * spec.m {
        return Err(Error::IndexOutOfRange { index: k, max: 2 * spec.m });
    }
    let sys = adapted_basis(spec, side, Gq::int(0), spec.min_trunc())?;
    let y = sys.get(k).expect("every k is assigned");
    jet_form_limit(spec, jet, &y.solution)
}

/// The constants `c_k` of the nonzero limits, indexed by `k - 1`.
pub fn form_constants(spec: &OperatorSpec, side: Side) -> Result<Vec<Option<Gq>>> {
    let coeffs = adapted_coefficients(spec, side, spec.min_trunc())?;
    Ok(coeffs.into_iter().map(|(_, _, c)| c).collect())
}

/// Largest deviation from Green's identity
/// `[u,v](x) - [u,v](α) = (-1)^m (λ - conj(μ)) ∫_α^x u conj(v)`
/// over the nodes of `grid` equal cells of `interval`. `u(x)` and `v(x)` return
/// quasi-derivative jets of solutions at `λ` and `μ`.
pub fn greens_residual<U, V>(
    mut u: U,
    mut v: V,
    m: usize,
    lambda: Complex64,
    mu: Complex64,
    interval: (f64, f64),
    grid: usize,
) -> Result<f64>
where
    U: FnMut(f64) -> Result<Vec<Complex64>>,
    V: FnMut(f64) -> Result<Vec<Complex64>>,
{
    let rule = GaussLegendre::new(NonZeroUsize::new(10).expect("nonzero"));
    let mut nodes: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (alpha, beta) = interval;
    let cells = grid.max(1);
    let hcell = (beta - alpha) / cells as f64;
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let factor = (lambda - mu.conj()) * sign;
    let start = form_value(&u(alpha)?, &v(alpha)?, m)?;
    let mut integral = Complex64::new(0.0, 0.0);
    let mut worst: f64 = 0.0;
    for c in 0..cells {
        let a = alpha + c as f64 * hcell;
        let b = a + hcell;
        for &(t, w) in &nodes {
            let x = 0.5 * (a + b) + 0.5 * (b - a) * t;
            integral += u(x)?[0] * v(x)?[0].conj() * (0.5 * (b - a) * w);
        }
        let now = form_value(&u(b)?, &v(b)?, m)?;
        worst = worst.max((now - start - factor * integral).norm());
    }
    Ok(worst)
}

/// Smooth step: `0` for `s <= 0`, `1` for `s >= 1`, flat at both ends.
fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let f = |t: f64| (-1.0 / t).exp();
    f(s) / (f(s) + f(1.0 - s))
}

/// A maximal-domain function with a prescribed quasi-derivative jet at the
/// outer endpoint of `side`, vanishing identically between the cut and `0`.
///
/// Realized as the Taylor polynomial of the jet times a cutoff whose
/// derivatives all vanish at the endpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatchFunction {
    pub side: Side,
    pub endpoint: f64,
    pub jet: Vec<Gq>,
    pub cut: f64,
    /// Ordinary derivatives `g^{(j)}(endpoint)`, `j < 2m`.
    pub derivatives: Vec<f64>,
}

/// Ordinary derivatives at `x0` from quasi-derivatives, given `c^{(i)}(x0)`.
fn ordinary_from_quasi(m: usize, jet: &[f64], c: &[f64]) -> Result<Vec<f64>> {
    if c[0] == 0.0 {
        return Err(Error::Domain("coefficient vanishes at the endpoint".into()));
    }
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut d = jet[..m].to_vec();
    for k in 0..m {
        let mut acc = sign * jet[m + k];
        for i in 0..k {
            acc -= binom(k, i) * c[k - i] * d[m + i];
        }
        d.push(acc / c[0]);
    }
    Ok(d)
}

fn quasi_from_ordinary(m: usize, d: &[f64], c: &[f64]) -> Vec<f64> {
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut jet = d[..m].to_vec();
    for k in 0..m {
        let acc: f64 = (0..=k).map(|i| binom(k, i) * c[k - i] * d[m + i]).sum();
        jet.push(sign * acc);
    }
    jet
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn patch(spec: &OperatorSpec, side: Side, jet: Vec<Gq>, cut: f64) -> Result<PatchFunction> {
    let m = spec.m;
    if jet.len() != 2 * m {
        return Err(Error::DimensionMismatch { expected: format!("jet of length {}", 2 * m), got: jet.len().to_string() });
    }
    let endpoint = match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    let inside = cut * endpoint;
    if !(inside > 0.0 && inside < 1.0) {
        return Err(Error::DegenerateCut);
    }
    let c = spec.coefficient(side).eval_derivs_f64(endpoint, m);
    let values: Vec<f64> = jet.iter().map(|v| v.to_c64().re).collect();
    let derivatives = ordinary_from_quasi(m, &values, &c)?;
    Ok(PatchFunction { side, endpoint, jet, cut, derivatives })
}

impl PatchFunction {
    pub fn value(&self, x: f64) -> f64 {
        let r = x * self.endpoint;
        let inside = self.cut * self.endpoint;
        if r <= inside {
            return 0.0;
        }
        let h = x - self.endpoint;
        let mut fact = 1.0;
        let mut poly = 0.0;
        for (j, d) in self.derivatives.iter().enumerate() {
            if j > 0 {
                fact *= j as f64;
            }
            poly += d * h.powi(j as i32) / fact;
        }
        smooth_step((r - inside) / (1.0 - inside)) * poly
    }

    /// Quasi-derivatives at the endpoint recomputed from the stored
    /// ordinary derivatives.
    pub fn endpoint_jet(&self, spec: &OperatorSpec) -> Vec<f64> {
        let c = spec.coefficient(self.side).eval_derivs_f64(self.endpoint, spec.m);
        quasi_from_ordinary(spec.m, &self.derivatives, &c)
    }
}

/// Result of [`gram_normalize`]: `columns[r]` holds the coefficients of the
/// `r`-th normalized vector in the input basis.
#[derive(Clone, Debug, PartialEq)]
pub struct GramNormalization<S> {
    pub columns: Vec<Vec<S>>,
    /// Input combinations that pair to zero with everything (the radical).
    pub radical: Vec<Vec<S>>,
}

impl<S: Coeff> GramNormalization<S> {
    pub fn rank(&self) -> usize {
        self.columns.len()
    }
}

fn pair_form<S: Coeff>(gram: &linalg::Rows<S>, a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (s, av) in a.iter().enumerate() {
        if av.is_zero() {
            continue;
        }
        for (t, bv) in b.iter().enumerate() {
            if !bv.is_zero() && !gram[s][t].is_zero() {
                acc = acc + av.clone() * bv.conj() * gram[s][t].clone();
            }
        }
    }
    acc
}

/// Symplectic Gram-Schmidt: given `gram[s][t] = ω(v_s, v_t)` of a skew-Hermitian
/// form with isotropic input vectors, find combinations whose Gram matrix is
/// `scale · E_n`, `n` the rank. Already normalized input is returned unchanged.
pub fn gram_normalize<S: Coeff>(gram: &linalg::Rows<S>, scale: i64, tol: f64) -> Result<GramNormalization<S>> {
    let d = gram.len();
    if gram.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: format!("{d}x{d} Gram matrix"), got: "ragged rows".into() });
    }
    let unit = |s: usize| -> Vec<S> { (0..d).map(|t| if t == s { S::one() } else { S::zero() }).collect() };
    let target: linalg::Rows<S> = FormMatrix::symplectic(d).scaled(scale);
    if d.is_multiple_of(2) && *gram == target {
        return Ok(GramNormalization { columns: (0..d).map(unit).collect(), radical: Vec::new() });
    }
    let scale_mag = gram.iter().flatten().map(|v| v.magnitude()).fold(0.0, f64::max);
    let negligible = |v: &S| if S::is_exact() { v.is_zero() } else { v.magnitude() <= tol * scale_mag.max(f64::MIN_POSITIVE) };
    let mut pool: Vec<Vec<S>> = (0..d).map(unit).collect();
    let mut pairs: Vec<(Vec<S>, Vec<S>)> = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        'search: for i in 0..pool.len() {
            for j in i + 1..pool.len() {
                let w = pair_form(gram, &pool[i], &pool[j]);
                if negligible(&w) {
                    continue;
                }
                let mag = w.magnitude();
                if best.is_none_or(|b| mag > b.2) {
                    best = Some((i, j, mag));
                }
                if S::is_exact() {
                    break 'search;
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        let r = pairs.len() + 1;
        let t = S::from_i64(if r % 2 == 1 { -scale } else { scale });
        let v = pool[i].clone();
        let w0 = pool[j].clone();
        let alpha = (t / pair_form(gram, &v, &w0)).conj();
        let w: Vec<S> = w0.iter().map(|c| c.clone() * alpha.clone()).collect();
        pool = pool
            .into_iter()
            .enumerate()
            .filter(|(k, _)| *k != i && *k != j)
            .map(|(_, z)| {
                let a = pair_form(gram, &z, &w) / pair_form(gram, &v, &w);
                let b = pair_form(gram, &z, &v) / pair_form(gram, &w, &v);
                z.iter().zip(&v).zip(&w).map(|((zc, vc), wc)| zc.clone() - a.clone() * vc.clone() - b.clone() * wc.clone()).collect()
            })
            .collect();
        pairs.push((v, w));
    }
    let n = 2 * pairs.len();
    let mut columns = vec![Vec::new(); n];
    for (r, (v, w)) in pairs.into_iter().enumerate() {
        columns[r] = v;
        columns[n - 1 - r] = w;
    }
    let out = GramNormalization { columns, radical: pool };
    let target = FormMatrix::symplectic(n).scaled::<S>(scale);
    for r in 0..n {
        for s in 0..n {
            let g = pair_form(gram, &out.columns[r], &out.columns[s]);
            if !negligible(&(g - target[r][s].clone())) {
                return Err(Error::RankDeficient { rank: n, need: n });
            }
        }
    }
    Ok(out)
}
