//! Fundamental systems of `(-1)^m (x^p a(x) y^{(m)})^{(m)} = λ y` near `x = 0`.
//!
//! Writing the operator as `Σ_k L_k` with `L_k x^e = F_k(e) x^{e+k+p-2m}` and
//! `F_k(e) = (-1)^m a_k [e]_m [e+p+k-m]_m` (falling factorials), one gets
//!
//! ```text
//! L_k[x^e ln^j x] = Σ_i C(j,i) F_k^{(i)}(e) x^{e+k+p-2m} ln^{j-i} x .
//! ```
//!
//! Coefficients are fixed exponent by exponent. At an exponent that is a root of
//! multiplicity `μ` of the indicial polynomial `F_0` the triangular system in the
//! log index is solved for the log powers `μ, μ+1, ...`, so each resonance raises
//! the log degree by at most `μ`. Solutions are normalized by a unit coefficient
//! on their leading term `x^ρ ln^{j0} x`; the free slots of later roots are zero.
//!
//! The left equation is handled on `t = -x` with coefficient `b(-t)`; the stored
//! quasi-derivatives of a left solution are the `x`-quasi-derivatives expressed
//! as series in `t`, i.e. `y^{[l]}(x) = (-1)^l Y^{[l]}(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logseries::{AnalyticSeries, LogSeries};
use crate::scalar::Coeff;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// `d/dt` of a stored left quasi-derivative is `-` the next one.
    pub fn ladder_sign(self) -> i64 {
        match self {
            Side::Left => -1,
            Side::Right => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub a: AnalyticSeries,
    pub b: AnalyticSeries,
}

impl OperatorSpec {
    pub fn new(m: usize, p: usize, q: usize, a: AnalyticSeries, b: AnalyticSeries) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain("m must be positive".into()));
        }
        for (name, v) in [("p", p), ("q", q)] {
            if v < 1 || v > 2 * m - 1 {
                return Err(Error::Domain(format!("{name} = {v} outside [1, {}]", 2 * m - 1)));
            }
        }
        if num_traits::Zero::is_zero(&a.leading()) || num_traits::Zero::is_zero(&b.leading()) {
            return Err(Error::Domain("a_0 and b_0 must be nonzero".into()));
        }
        Ok(OperatorSpec { m, p, q, a, b })
    }

    /// Unit coefficients `a = b = 1`.
    pub fn unit(m: usize, p: usize, q: usize) -> Result<Self> {
        Self::new(m, p, q, AnalyticSeries::one(), AnalyticSeries::one())
    }

    pub fn order(&self, side: Side) -> usize {
        match side {
            Side::Left => self.q,
            Side::Right => self.p,
        }
    }

    /// Analytic factor of the coefficient in the local variable of `side`
    /// (`a(x)` on the right, `b(-t)` on the left).
    pub fn local_coefficient(&self, side: Side) -> AnalyticSeries {
        match side {
            Side::Left => self.b.reflect(),
            Side::Right => self.a.clone(),
        }
    }

    /// The coefficient `c(x)` on `side` as a series in `x`: `x^p a(x)` or
    /// `(-x)^q b(x)`.
    pub fn coefficient(&self, side: Side) -> AnalyticSeries {
        let (order, base) = match side {
            Side::Left => (self.q, &self.b),
            Side::Right => (self.p, &self.a),
        };
        let flip = side == Side::Left && order % 2 == 1;
        let mut coeffs = vec![num_rational::BigRational::from_integer(0.into()); order];
        coeffs.extend(base.coeffs.iter().map(|c| if flip { -c.clone() } else { c.clone() }));
        AnalyticSeries { coeffs, trunc: base.trunc.map(|t| t + order) }
    }

    pub fn min_trunc(&self) -> usize {
        2 * self.m + self.p.max(self.q) + 4
    }
}

/// Predicted leading data of one fundamental-system member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub exponent: i64,
    /// Log power of the leading term.
    pub lead_log: usize,
    /// Upper bound on the log powers occurring anywhere in the solution.
    pub max_log: usize,
}

/// Leading exponents and log-degree bounds of the 2m solutions.
///
/// For `p <= m` the four families are `x^{2m-p-i-1}`, `x^{m-i}`, `x^{m-i} ln x`
/// and `x^{m-p-i-1}` (log degree at most one). For `p > m` the families are
/// `x^{m-1-i}`, `x^i`, `x^i ln x` and the `p-m` members at the negative roots
/// `m-p..-1`; their log degree is capped by the leading log power plus the total
/// multiplicity of the indicial roots above the leading exponent (at `λ ≠ 0` the
/// forcing term reaches simple roots, e.g. `y = 1 + (λ/2) x ln x + ...` for
/// `m = 2, p = 3`).
pub fn exponent_template(m: usize, p: usize) -> Result<Vec<TemplateEntry>> {
    if m == 0 || p < 1 || p > 2 * m - 1 {
        return Err(Error::Domain(format!("p = {p} outside [1, {}]", 2 * m - 1)));
    }
    let (m, p) = (m as i64, p as i64);
    let mut out = Vec::with_capacity(2 * m as usize);
    let entry = |exponent: i64, lead_log: usize, max_log: usize| TemplateEntry { exponent, lead_log, max_log };
    if p <= m {
        for i in 0..m - p {
            out.push(entry(2 * m - p - i - 1, 0, 0));
        }
        for i in 1..=p {
            out.push(entry(m - i, 0, 0));
            out.push(entry(m - i, 1, 1));
        }
        for i in 0..m - p {
            out.push(entry(m - p - i - 1, 0, 1));
        }
    } else {
        let roots = indicial_roots(m as usize, p as usize);
        let cap = |e: i64, j0: usize| j0 + roots.iter().filter(|r| r.0 > e).map(|r| r.1).sum::<usize>();
        for i in 0..p - m {
            let e = m - 1 - i;
            out.push(entry(e, 0, cap(e, 0)));
        }
        for i in 0..2 * m - p {
            out.push(entry(i, 0, cap(i, 0)));
            out.push(entry(i, 1, cap(i, 1)));
        }
        for e in m - p..0 {
            out.push(entry(e, 0, cap(e, 0)));
        }
    }
    out.sort_by(|a, b| b.exponent.cmp(&a.exponent).then(a.lead_log.cmp(&b.lead_log)));
    Ok(out)
}

/// One member of a fundamental system.
#[derive(Clone, Debug, PartialEq)]
pub struct FrobeniusSolution<S> {
    /// Position `k` in the fundamental system (1-based).
    pub index: usize,
    pub side: Side,
    /// Leading exponent and log power (the normalized unit term).
    pub exponent: i64,
    pub lead_log: usize,
    /// The solution as a series in the local variable (`x` right, `t = -x` left).
    pub series: LogSeries<S>,
    /// Quasi-derivatives `y^{[0..2m-1]}` in the original variable, as series in
    /// the local variable.
    pub qd: Vec<LogSeries<S>>,
    pub lambda: S,
    pub in_l2: bool,
}

impl<S: Coeff> FrobeniusSolution<S> {
    /// Realized highest log power.
    pub fn max_log(&self) -> usize {
        self.series.max_log()
    }

    pub fn to_float(&self) -> FrobeniusSolution<num_complex::Complex64> {
        FrobeniusSolution {
            index: self.index,
            side: self.side,
            exponent: self.exponent,
            lead_log: self.lead_log,
            series: self.series.to_float(),
            qd: self.qd.iter().map(|s| s.to_float()).collect(),
            lambda: self.lambda.to_c64(),
            in_l2: self.in_l2,
        }
    }
}

/// Indicial roots `{0..m-1} ∪ {m-p..2m-p-1}` with multiplicities, descending.
pub fn indicial_roots(m: usize, p: usize) -> Vec<(i64, usize)> {
    let (m, p) = (m as i64, p as i64);
    let mut roots: Vec<(i64, usize)> = Vec::new();
    for e in (0..m).chain(m - p..2 * m - p) {
        match roots.iter_mut().find(|(r, _)| *r == e) {
            Some(slot) => slot.1 += 1,
            None => roots.push((e, 1)),
        }
    }
    roots.sort_by(|a, b| b.0.cmp(&a.0));
    roots
}

/// Derivatives `P^{(i)}(e)`, `i = 0..=2m`, of `P(x) = [x]_m [x+s]_m`.
fn indicial_derivs(m: usize, shift: i64, e: i64) -> Vec<i128> {
    // expand Π (e + h - i)(e + s + h - i) in h
    let mut poly: Vec<i128> = vec![1];
    for i in 0..m as i64 {
        for root in [e - i, e + shift - i] {
            let mut next = vec![0i128; poly.len() + 1];
            for (d, c) in poly.iter().enumerate() {
                next[d] += c * root as i128;
                next[d + 1] += c;
            }
            poly = next;
        }
    }
    let mut fact: i128 = 1;
    poly.iter()
        .enumerate()
        .map(|(i, c)| {
            if i > 0 {
                fact *= i as i128;
            }
            c * fact
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> i64 {
    if k > n {
        return 0;
    }
    let mut r: i64 = 1;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

fn from_i128<S: Coeff>(v: i128) -> S {
    match i64::try_from(v) {
        Ok(x) => S::from_i64(x),
        Err(_) => {
            let hi = (v >> 32) as i64;
            let lo = (v & 0xffff_ffff) as i64;
            S::from_i64(hi) * S::from_i64(1 << 32) + S::from_i64(lo)
        }
    }
}

fn add_assign<S: Coeff>(slot: &mut S, v: S) {
    let cur = std::mem::replace(slot, S::zero());
    *slot = cur + v;
}

/// Build the solution normalized at `x^rho ln^{j0} x` for the local equation
/// `(-1)^m (x^p a(x) y^{(m)})^{(m)} = λ y`.
pub(crate) fn build_solution<S: Coeff>(
    m: usize,
    p: usize,
    coeff: &AnalyticSeries,
    lambda: &S,
    rho: i64,
    j0: usize,
    trunc: usize,
) -> LogSeries<S> {
    let sign = if m.is_multiple_of(2) { S::one() } else { -S::one() };
    let a: Vec<S> = (0..=trunc)
        .map(|k| if k <= coeff.known_through() { S::from_ratio(&coeff.coeff(k)) } else { S::zero() })
        .map(|c| c * sign.clone())
        .collect();
    let lag = 2 * m as i64 - p as i64;
    // rows[offset][j]
    let mut rows: Vec<Vec<S>> = Vec::with_capacity(trunc + 1);
    for off in 0..=trunc {
        let e0 = rho + off as i64;
        let mut r: Vec<S> = Vec::new();
        for k in 1..=off {
            if a[k].is_zero() {
                continue;
            }
            let prev = &rows[off - k];
            if prev.iter().all(|c| c.is_zero()) {
                continue;
            }
            let e = e0 - k as i64;
            let d = indicial_derivs(m, p as i64 + k as i64 - m as i64, e);
            if r.len() < prev.len() {
                r.resize(prev.len(), S::zero());
            }
            for (j, c) in prev.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let ac = a[k].clone() * c.clone();
                for l in 0..=j {
                    let dv = d.get(j - l).copied().unwrap_or(0);
                    if dv == 0 {
                        continue;
                    }
                    let w = from_i128::<S>(dv * binomial(j, l) as i128);
                    add_assign(&mut r[l], -(ac.clone() * w));
                }
            }
        }
        let t = e0 - lag;
        if t >= rho && !lambda.is_zero() {
            let src = &rows[(t - rho) as usize];
            if r.len() < src.len() {
                r.resize(src.len(), S::zero());
            }
            for (l, c) in src.iter().enumerate() {
                if !c.is_zero() {
                    add_assign(&mut r[l], lambda.clone() * c.clone());
                }
            }
        }
        while r.last().is_some_and(|c| c.is_zero()) {
            r.pop();
        }
        let d0 = indicial_derivs(m, p as i64 - m as i64, e0);
        let mu = d0.iter().position(|&v| v != 0).expect("indicial polynomial is nonzero");
        let f0 = |i: usize| -> S {
            match d0.get(i) {
                Some(&v) if v != 0 => a[0].clone() * from_i128::<S>(v),
                _ => S::zero(),
            }
        };
        let mut c: Vec<S> = if r.is_empty() { Vec::new() } else { vec![S::zero(); r.len() + mu] };
        for l in (0..r.len()).rev() {
            let mut acc = r[l].clone();
            for j in (l + mu + 1)..c.len() {
                if c[j].is_zero() {
                    continue;
                }
                let w = from_i128::<S>(binomial(j, l) as i128) * f0(j - l);
                acc = acc - w * c[j].clone();
            }
            let piv = from_i128::<S>(binomial(l + mu, l) as i128) * f0(mu);
            c[l + mu] = acc / piv;
        }
        if off == 0 {
            if c.len() <= j0 {
                c.resize(j0 + 1, S::zero());
            }
            c[j0] = S::one();
        }
        rows.push(c);
    }
    let jmax = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut by_log = vec![vec![S::zero(); trunc + 1]; jmax];
    for (off, row) in rows.into_iter().enumerate() {
        for (j, c) in row.into_iter().enumerate() {
            by_log[j][off] = c;
        }
    }
    LogSeries::from_rows(rho, trunc, by_log)
}

/// Quasi-derivative ladder in the local variable for the local equation.
pub fn local_ladder<S: Coeff>(m: usize, p: usize, coeff: &AnalyticSeries, y: &LogSeries<S>) -> Vec<LogSeries<S>> {
    let mut qd = Vec::with_capacity(2 * m);
    let mut cur = y.clone();
    for _ in 0..m {
        qd.push(cur.clone());
        cur = cur.differentiate();
    }
    let c: LogSeries<S> = coeff.to_logseries(p as i64, y.trunc());
    let sign = if m.is_multiple_of(2) { S::one() } else { -S::one() };
    let mut cur = c.mul(&cur).scale(&sign);
    for _ in m..2 * m {
        qd.push(cur.clone());
        cur = cur.differentiate();
    }
    qd
}

/// Map local quasi-derivatives to the original variable.
pub fn orient_ladder<S: Coeff>(side: Side, qd: Vec<LogSeries<S>>) -> Vec<LogSeries<S>> {
    match side {
        Side::Right => qd,
        Side::Left => qd.into_iter().enumerate().map(|(l, s)| if l % 2 == 1 { s.neg() } else { s }).collect(),
    }
}

/// Leading-normalized fundamental system in template order (descending exponent,
/// ascending leading log power). Indices are positions in this order.
pub fn frobenius_basis<S: Coeff>(spec: &OperatorSpec, side: Side, lambda: S, trunc: usize) -> Result<Vec<FrobeniusSolution<S>>> {
    let need = spec.min_trunc();
    if trunc < need {
        return Err(Error::TruncationTooSmall { need, got: trunc });
    }
    let order = spec.order(side);
    let coeff = spec.local_coefficient(side);
    let template = exponent_template(spec.m, order)?;
    let mut out = Vec::with_capacity(2 * spec.m);
    for (pos, entry) in template.iter().enumerate() {
        let series = build_solution(spec.m, order, &coeff, &lambda, entry.exponent, entry.lead_log, trunc);
        if series.max_log() > entry.max_log {
            return Err(Error::ResonanceOverflow {
                exponent: entry.exponent,
                found: series.max_log(),
                bound: entry.max_log,
            });
        }
        let qd = orient_ladder(side, local_ladder(spec.m, order, &coeff, &series));
        out.push(FrobeniusSolution {
            index: pos + 1,
            side,
            exponent: entry.exponent,
            lead_log: entry.lead_log,
            in_l2: series.rho() >= 0,
            series,
            qd,
            lambda: lambda.clone(),
        });
    }
    Ok(out)
}

/// `l[y] - λ y` recomputed from the series (in the local variable).
pub fn residual<S: Coeff>(sol: &FrobeniusSolution<S>, spec: &OperatorSpec) -> LogSeries<S> {
    let order = spec.order(sol.side);
    let coeff = spec.local_coefficient(sol.side);
    let ladder = local_ladder(spec.m, order, &coeff, &sol.series);
    ladder[2 * spec.m - 1].differentiate().sub(&sol.series.scale(&sol.lambda))
}

/// Number of square-integrable solutions near the singular point on `side`.
pub fn l2_count(spec: &OperatorSpec, side: Side) -> usize {
    l2_count_for(spec.m, spec.order(side))
}

pub fn l2_count_for(m: usize, order: usize) -> usize {
    if order <= m {
        2 * m
    } else {
        3 * m - order
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Gq;

    #[test]
    fn indicial_roots_cover_2m() {
        for m in 1..=3 {
            for p in 1..2 * m {
                let total: usize = indicial_roots(m, p).iter().map(|r| r.1).sum();
                assert_eq!(total, 2 * m);
            }
        }
        assert_eq!(indicial_roots(1, 1), vec![(0, 2)]);
        assert_eq!(indicial_roots(2, 1), vec![(2, 1), (1, 2), (0, 1)]);
    }

    #[test]
    fn indicial_derivative_values() {
        // m = 1, shift 0: P(x) = x^2 -> P(3) = 9, P'(3) = 6, P'' = 2
        assert_eq!(indicial_derivs(1, 0, 3), vec![9, 6, 2]);
    }

    #[test]
    fn template_small_cases() {
        let t = exponent_template(1, 1).unwrap();
        assert_eq!(
            t,
            vec![
                TemplateEntry { exponent: 0, lead_log: 0, max_log: 0 },
                TemplateEntry { exponent: 0, lead_log: 1, max_log: 1 }
            ]
        );
        let t = exponent_template(2, 1).unwrap();
        let ex: Vec<(i64, usize)> = t.iter().map(|e| (e.exponent, e.lead_log)).collect();
        assert_eq!(ex, vec![(2, 0), (1, 0), (1, 1), (0, 0)]);
        let t = exponent_template(2, 3).unwrap();
        let ex: Vec<(i64, usize)> = t.iter().map(|e| (e.exponent, e.lead_log)).collect();
        assert_eq!(ex, vec![(1, 0), (0, 0), (0, 1), (-1, 0)]);
        assert!(exponent_template(2, 4).is_err());
        assert!(exponent_template(2, 0).is_err());
    }

    #[test]
    fn null_solutions_of_first_order_case() {
        let spec = OperatorSpec::unit(1, 1, 1).unwrap();
        let sys = frobenius_basis(&spec, Side::Right, Gq::int(0), 40).unwrap();
        assert_eq!(sys[0].series, LogSeries::power(0, vec![Gq::int(1)], 40));
        assert_eq!(sys[1].series, LogSeries::from_rows(0, 40, vec![vec![], vec![Gq::int(1)]]));
    }

    #[test]
    fn bessel_series_for_positive_lambda() {
        let spec = OperatorSpec::unit(1, 1, 1).unwrap();
        let lam = Gq::frac(3, 2);
        let sys = frobenius_basis(&spec, Side::Right, lam.clone(), 30).unwrap();
        let y = &sys[0].series;
        // oracle: Σ (-λ)^ν x^ν / (ν!)^2
        let mut expect = Gq::int(1);
        for nu in 0..=30i64 {
            assert_eq!(y.coeff(0, nu), expect, "offset {nu}");
            expect = expect * (-lam.clone()) / Gq::int((nu + 1) * (nu + 1));
        }
    }

    #[test]
    fn residual_examples() {
        let spec = OperatorSpec::unit(1, 1, 1).unwrap();
        let sys = frobenius_basis(&spec, Side::Right, Gq::int(0), 40).unwrap();
        assert!(residual(&sys[0], &spec).is_zero());
        assert!(residual(&sys[1], &spec).is_zero());
        let mut fake = sys[0].clone();
        fake.series = LogSeries::monomial(1, 0);
        assert!(!residual(&fake, &spec).is_zero());
    }

    #[test]
    fn truncation_guard() {
        let spec = OperatorSpec::unit(2, 3, 1).unwrap();
        assert!(matches!(
            frobenius_basis(&spec, Side::Right, Gq::int(0), 5),
            Err(Error::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn l2_counts() {
        assert_eq!(l2_count_for(2, 1), 4);
        assert_eq!(l2_count_for(2, 3), 3);
        assert_eq!(l2_count(&OperatorSpec::unit(3, 1, 5).unwrap(), Side::Left), 4);
    }

    fn wobbly() -> AnalyticSeries {
        use num_bigint::BigInt;
        use num_rational::BigRational;
        AnalyticSeries::polynomial(vec![
            BigRational::from_integer(BigInt::from(2)),
            BigRational::new(1.into(), 3.into()),
            BigRational::new((-2).into(), 7.into()),
            BigRational::new(5.into(), 11.into()),
        ])
    }

    #[test]
    fn every_basis_member_solves_and_fits_template() {
        for m in 1..=3usize {
            for p in 1..2 * m {
                let spec = OperatorSpec::new(m, p, 1, wobbly(), AnalyticSeries::one()).unwrap();
                let tmpl = exponent_template(m, p).unwrap();
                for lam in [Gq::int(0), Gq::i(), Gq::frac(-5, 3)] {
                    let sys = frobenius_basis(&spec, Side::Right, lam.clone(), spec.min_trunc() + 4).unwrap();
                    assert_eq!(sys.len(), 2 * m);
                    for (sol, t) in sys.iter().zip(&tmpl) {
                        assert!(residual(sol, &spec).is_zero(), "m={m} p={p} λ={lam} idx={}", sol.index);
                        assert_eq!(sol.exponent, t.exponent);
                        assert!(sol.series.max_log() <= t.max_log);
                        assert_eq!(sol.series.log_degree_at(t.exponent), Some(t.lead_log));
                    }
                }
            }
        }
    }

    #[test]
    fn forced_log_at_simple_root() {
        // (x^3 y'')'' = λ y  ->  y = 1 + (λ/2) x ln x + ...
        let spec = OperatorSpec::unit(2, 3, 1).unwrap();
        let lam = Gq::frac(4, 3);
        let sys = frobenius_basis(&spec, Side::Right, lam.clone(), 20).unwrap();
        let y = sys.iter().find(|s| s.exponent == 0 && s.lead_log == 0).unwrap();
        assert_eq!(y.series.coeff(1, 1), lam / Gq::int(2));
    }
}
