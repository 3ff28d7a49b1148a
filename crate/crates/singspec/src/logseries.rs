//! Truncated generalized power series with logarithmic factors.
//!
//! A [`LogSeries`] represents
//!
//! ```text
//! x^rho · Σ_{j=0}^{J} ln^j(x) · Σ_{ν=0}^{N} c[j][ν] x^ν
//! ```
//!
//! and is known exactly through the absolute exponent `rho + N`
//! ([`LogSeries::valid_through`]). Every operation propagates that bound and
//! never reports coefficients beyond it.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{ratio_to_f64, Coeff, Gq};

/// Default number of retained offsets.
pub const DEFAULT_TRUNC: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct LogSeries<S> {
    rho: i64,
    trunc: usize,
    /// `coeffs[j][ν]`; empty for the zero series. Each row has `trunc + 1` entries
    /// and the last row is not identically zero.
    coeffs: Vec<Vec<S>>,
}

/// Result of a float evaluation: partial sum plus an estimate of the discarded tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    pub tail_bound: f64,
}

impl<S: Coeff> LogSeries<S> {
    /// The zero series, known to vanish through exponent `valid_through`.
    pub fn zero(valid_through: i64) -> Self {
        LogSeries { rho: valid_through, trunc: 0, coeffs: Vec::new() }
    }

    /// Build from raw rows `coeffs[j][ν]` (rows may have different lengths; missing
    /// entries are zero). The result is re-tightened.
    pub fn from_rows(rho: i64, trunc: usize, coeffs: Vec<Vec<S>>) -> Self {
        let mut rows = coeffs;
        for row in rows.iter_mut() {
            row.resize(trunc + 1, S::zero());
        }
        let mut s = LogSeries { rho, trunc, coeffs: rows };
        s.tighten();
        s
    }

    /// `x^rho · Σ coeffs[ν] x^ν` with `trunc` retained offsets; missing coefficients are zero.
    pub fn power(rho: i64, coeffs: Vec<S>, trunc: usize) -> Self {
        Self::from_rows(rho, trunc, vec![coeffs])
    }

    /// The single term `x^e ln^j x` (with the default truncation).
    pub fn monomial(e: i64, j: usize) -> Self {
        let mut rows = vec![Vec::new(); j + 1];
        rows[j] = vec![S::one()];
        Self::from_rows(e, DEFAULT_TRUNC, rows)
    }

    /// `ln x`.
    pub fn ln() -> Self {
        Self::monomial(0, 1)
    }

    pub fn constant(c: S) -> Self {
        Self::power(0, vec![c], DEFAULT_TRUNC)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Leading exponent (for the zero series: the validity bound).
    pub fn rho(&self) -> i64 {
        self.rho
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    /// Highest log power present (0 for the zero series).
    pub fn max_log(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Largest absolute exponent through which the series is exact.
    pub fn valid_through(&self) -> i64 {
        self.rho + self.trunc as i64
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.coeffs
    }

    /// Coefficient of `x^exponent ln^j x` (zero outside the stored range).
    pub fn coeff(&self, j: usize, exponent: i64) -> S {
        let off = exponent - self.rho;
        if off < 0 || off > self.trunc as i64 || j >= self.coeffs.len() {
            return S::zero();
        }
        self.coeffs[j][off as usize].clone()
    }

    /// Highest log power carried by the terms at `exponent`.
    pub fn log_degree_at(&self, exponent: i64) -> Option<usize> {
        (0..self.coeffs.len()).rev().find(|&j| !self.coeff(j, exponent).is_zero())
    }

    /// Restrict to exponents `<= valid`.
    pub fn truncate_to(&self, valid: i64) -> Self {
        if valid >= self.valid_through() {
            return self.clone();
        }
        if self.is_zero() || valid < self.rho {
            return Self::zero(valid);
        }
        let n = (valid - self.rho) as usize;
        let rows = self.coeffs.iter().map(|r| r[..=n].to_vec()).collect();
        Self::from_rows(self.rho, n, rows)
    }

    fn tighten(&mut self) {
        while let Some(last) = self.coeffs.last() {
            if last.iter().all(|c| c.is_zero()) {
                self.coeffs.pop();
            } else {
                break;
            }
        }
        if self.coeffs.is_empty() {
            self.rho += self.trunc as i64;
            self.trunc = 0;
            return;
        }
        let lead = (0..=self.trunc)
            .find(|&nu| self.coeffs.iter().any(|r| !r[nu].is_zero()))
            .expect("nonzero series has a leading offset");
        if lead > 0 {
            for row in self.coeffs.iter_mut() {
                row.drain(..lead);
            }
            self.rho += lead as i64;
            self.trunc -= lead;
        }
    }

    /// Apply `f` to every coefficient.
    pub fn map<T: Coeff>(&self, f: impl Fn(&S) -> T) -> LogSeries<T> {
        if self.is_zero() {
            return LogSeries::zero(self.rho);
        }
        let rows = self.coeffs.iter().map(|r| r.iter().map(&f).collect()).collect();
        LogSeries::from_rows(self.rho, self.trunc, rows)
    }

    pub fn to_float(&self) -> LogSeries<Complex64> {
        self.map(|c| c.to_c64())
    }

    pub fn conj(&self) -> Self {
        self.map(|c| c.conj())
    }

    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            return Self::zero(self.valid_through());
        }
        self.map(|v| v.clone() * c.clone())
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v.clone())
    }

    /// Multiply by `x^k`.
    pub fn shift(&self, k: i64) -> Self {
        let mut s = self.clone();
        s.rho += k;
        s
    }

    pub fn add(&self, t: &Self) -> Self {
        let valid = self.valid_through().min(t.valid_through());
        let lo = match (self.is_zero(), t.is_zero()) {
            (true, true) => return Self::zero(valid),
            (true, false) => t.rho,
            (false, true) => self.rho,
            (false, false) => self.rho.min(t.rho),
        };
        if lo > valid {
            return Self::zero(valid);
        }
        let n = (valid - lo) as usize;
        let jmax = self.coeffs.len().max(t.coeffs.len());
        let mut rows = vec![vec![S::zero(); n + 1]; jmax];
        for (j, row) in rows.iter_mut().enumerate() {
            for (nu, slot) in row.iter_mut().enumerate() {
                let e = lo + nu as i64;
                let a = self.coeff(j, e);
                let b = t.coeff(j, e);
                *slot = a + b;
            }
        }
        Self::from_rows(lo, n, rows)
    }

    pub fn sub(&self, t: &Self) -> Self {
        self.add(&t.neg())
    }

    /// Cauchy product. The result is exact through `rho_s + rho_t + min(N_s, N_t)`.
    pub fn mul(&self, t: &Self) -> Self {
        match (self.is_zero(), t.is_zero()) {
            (true, true) => return Self::zero(self.rho + t.rho + 1),
            (true, false) => return Self::zero(self.rho + t.rho),
            (false, true) => return Self::zero(self.rho + t.rho),
            _ => {}
        }
        let n = self.trunc.min(t.trunc);
        let jmax = self.coeffs.len() + t.coeffs.len() - 1;
        let mut rows = vec![vec![S::zero(); n + 1]; jmax];
        for (ja, ra) in self.coeffs.iter().enumerate() {
            for (jb, rb) in t.coeffs.iter().enumerate() {
                let out = &mut rows[ja + jb];
                for (i, ca) in ra.iter().take(n + 1).enumerate() {
                    if ca.is_zero() {
                        continue;
                    }
                    for (k, cb) in rb.iter().take(n + 1 - i).enumerate() {
                        if cb.is_zero() {
                            continue;
                        }
                        let prod = ca.clone() * cb.clone();
                        let cur = std::mem::replace(&mut out[i + k], S::zero());
                        out[i + k] = cur + prod;
                    }
                }
            }
        }
        Self::from_rows(self.rho + t.rho, n, rows)
    }

    /// Termwise `d/dx`: `x^ν ln^j x ↦ ν x^{ν-1} ln^j x + j x^{ν-1} ln^{j-1} x`.
    pub fn differentiate(&self) -> Self {
        if self.is_zero() {
            return Self::zero(self.rho - 1);
        }
        let jmax = self.coeffs.len();
        let mut rows = vec![vec![S::zero(); self.trunc + 1]; jmax];
        for j in 0..jmax {
            for nu in 0..=self.trunc {
                let c = &self.coeffs[j][nu];
                if c.is_zero() {
                    continue;
                }
                let e = self.rho + nu as i64;
                if e != 0 {
                    let v = c.clone() * S::from_i64(e);
                    let cur = std::mem::replace(&mut rows[j][nu], S::zero());
                    rows[j][nu] = cur + v;
                }
                if j > 0 {
                    let v = c.clone() * S::from_i64(j as i64);
                    let cur = std::mem::replace(&mut rows[j - 1][nu], S::zero());
                    rows[j - 1][nu] = cur + v;
                }
            }
        }
        Self::from_rows(self.rho - 1, self.trunc, rows)
    }

    /// `n`-fold derivative.
    pub fn differentiate_n(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |s, _| s.differentiate())
    }

    /// Termwise antiderivative with zero constant of integration.
    ///
    /// `x^{-1} ln^j x ↦ ln^{j+1} x/(j+1)`; otherwise
    /// `∫ x^e ln^j x = x^{e+1} Σ_i (-1)^i j!/(j-i)! ln^{j-i} x / (e+1)^{i+1}`.
    pub fn integrate(&self) -> Self {
        if self.is_zero() {
            return Self::zero(self.rho + 1);
        }
        let jmax = self.coeffs.len() + 1;
        let mut rows = vec![vec![S::zero(); self.trunc + 1]; jmax];
        for j in 0..self.coeffs.len() {
            for nu in 0..=self.trunc {
                let c = &self.coeffs[j][nu];
                if c.is_zero() {
                    continue;
                }
                let e = self.rho + nu as i64;
                if e == -1 {
                    let v = c.clone() / S::from_i64(j as i64 + 1);
                    let cur = std::mem::replace(&mut rows[j + 1][nu], S::zero());
                    rows[j + 1][nu] = cur + v;
                    continue;
                }
                let ep1 = S::from_i64(e + 1);
                // running factor (-1)^i j!/(j-i)! / (e+1)^{i+1}
                let mut factor = S::one() / ep1.clone();
                for i in 0..=j {
                    let v = c.clone() * factor.clone();
                    let cur = std::mem::replace(&mut rows[j - i][nu], S::zero());
                    rows[j - i][nu] = cur + v;
                    factor = -(factor * S::from_i64((j - i) as i64)) / ep1.clone();
                }
            }
        }
        Self::from_rows(self.rho + 1, self.trunc, rows)
    }

    /// Float evaluation at `0 < x < 1` with a geometric-majorant tail estimate.
    ///
    /// The tail is bounded by `M_N x^{N+1} Σ_k (r x)^k` scaled by `x^rho`, where
    /// `M_ν = Σ_j |c_{j,ν}| |ln x|^j` and `r` is the largest ratio `M_{ν+1}/M_ν`
    /// over the trailing window (root test when the window has gaps). A window of
    /// exact zeros means the series has terminated and the tail is zero.
    pub fn evaluate(&self, x: f64) -> Result<Evaluation> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::Domain(format!("evaluation point {x} outside (0, 1)")));
        }
        if self.is_zero() {
            return Ok(Evaluation { value: Complex64::new(0.0, 0.0), tail_bound: 0.0 });
        }
        let lnx = x.ln();
        let mut value = Complex64::new(0.0, 0.0);
        let mut mags = Vec::with_capacity(self.trunc + 1);
        for nu in 0..=self.trunc {
            let mut row_val = Complex64::new(0.0, 0.0);
            let mut mag = 0.0;
            let mut lp = 1.0;
            for j in 0..self.coeffs.len() {
                let c = self.coeffs[j][nu].to_c64();
                row_val += c * lp;
                mag += c.norm() * lp.abs();
                lp *= lnx;
            }
            value += row_val * x.powi(nu as i32);
            mags.push(mag);
        }
        let scale = x.powf(self.rho as f64);
        value *= scale;
        let tail = tail_estimate(&mags, x).ok_or(Error::TailBoundUnavailable)?;
        Ok(Evaluation { value, tail_bound: tail * scale })
    }
}

fn tail_estimate(mags: &[f64], x: f64) -> Option<f64> {
    let n = mags.len() - 1;
    let w = n.min(8);
    let window = &mags[n - w..=n];
    if window.iter().all(|&m| m == 0.0) {
        return Some(0.0);
    }
    if n < 4 {
        return None;
    }
    if window.iter().all(|&m| m > 0.0) {
        // ratio majorant M_{N+k} <= M_N r^k
        let r = window.windows(2).map(|p| p[1] / p[0]).fold(0.0, f64::max);
        if r.is_finite() && r * x < 1.0 {
            return Some(mags[n] * x.powi(n as i32) * (r * x) / (1.0 - r * x));
        }
    }
    // root majorant M_ν <= r^ν; also used when rounding noise spoils the ratios
    let r = (n - w..=n)
        .filter(|&nu| nu > 0 && mags[nu] > 0.0)
        .map(|nu| mags[nu].powf(1.0 / nu as f64))
        .fold(0.0, f64::max);
    if !r.is_finite() || r * x >= 1.0 {
        return None;
    }
    Some((r * x).powi(n as i32 + 1) / (1.0 - r * x))
}

impl LogSeries<Gq> {
    /// Exact evaluation at a rational point; only defined for log-free series.
    pub fn evaluate_exact(&self, x: &BigRational) -> Result<Gq> {
        if self.max_log() > 0 {
            return Err(Error::Domain("exact evaluation of a series with logarithmic terms".into()));
        }
        if x.is_zero() && self.rho < 0 {
            return Err(Error::Domain("negative power at x = 0".into()));
        }
        if self.is_zero() {
            return Ok(Gq::zero());
        }
        let mut acc = Gq::zero();
        let mut pow = Gq::one();
        for c in &self.coeffs[0] {
            acc = acc + c.clone() * pow.clone();
            pow = pow * Gq::real(x.clone());
        }
        let lead = if self.rho >= 0 {
            num_traits::pow(x.clone(), self.rho as usize)
        } else {
            BigRational::one() / num_traits::pow(x.clone(), (-self.rho) as usize)
        };
        Ok(acc * Gq::real(lead))
    }
}

/// Analytic coefficient `a(x) = Σ a_k x^k`, with exact rational coefficients.
///
/// `trunc = None` means the listed coefficients form the complete polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticSeries {
    pub coeffs: Vec<BigRational>,
    pub trunc: Option<usize>,
}

impl AnalyticSeries {
    pub fn polynomial(coeffs: Vec<BigRational>) -> Self {
        AnalyticSeries { coeffs, trunc: None }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::polynomial(coeffs.iter().map(|&c| BigRational::from_integer(BigInt::from(c))).collect())
    }

    pub fn one() -> Self {
        Self::from_ints(&[1])
    }

    pub fn leading(&self) -> BigRational {
        self.coeffs.first().cloned().unwrap_or_else(BigRational::zero)
    }

    /// `k`-th coefficient (zero beyond the polynomial's length).
    pub fn coeff(&self, k: usize) -> BigRational {
        self.coeffs.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Offsets through which the coefficients are known.
    pub fn known_through(&self) -> usize {
        self.trunc.unwrap_or(usize::MAX)
    }

    /// `a(-x)`.
    pub fn reflect(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| if k % 2 == 1 { -c.clone() } else { c.clone() })
            .collect();
        AnalyticSeries { coeffs, trunc: self.trunc }
    }

    /// `x^shift · a(x)` as a log-series with `trunc` offsets (capped by the known range).
    pub fn to_logseries<S: Coeff>(&self, shift: i64, trunc: usize) -> LogSeries<S> {
        let n = trunc.min(self.known_through());
        let coeffs = (0..=n).map(|k| S::from_ratio(&self.coeff(k))).collect();
        LogSeries::power(shift, coeffs, n)
    }

    /// Reciprocal series `1/a(x)` through `trunc` offsets (requires `a_0 ≠ 0`).
    pub fn reciprocal(&self, trunc: usize) -> Result<AnalyticSeries> {
        let a0 = self.leading();
        if a0.is_zero() {
            return Err(Error::Domain("leading coefficient is zero".into()));
        }
        let n = trunc.min(self.known_through());
        let mut out: Vec<BigRational> = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut acc = if k == 0 { BigRational::one() } else { BigRational::zero() };
            for i in 1..=k {
                let ai = self.coeff(i);
                if !ai.is_zero() {
                    acc -= ai * &out[k - i];
                }
            }
            out.push(acc / &a0);
        }
        Ok(AnalyticSeries { coeffs: out, trunc: Some(n) })
    }

    /// Float value of the stored coefficients as a finite sum.
    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + ratio_to_f64(c))
    }

    /// Values of the first `n` derivatives of the finite sum at `x`.
    pub fn eval_derivs_f64(&self, x: f64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        let cs: Vec<f64> = self.coeffs.iter().map(ratio_to_f64).collect();
        for (k, &c) in cs.iter().enumerate() {
            let mut fall = 1.0;
            for (d, slot) in out.iter_mut().enumerate() {
                if d > k {
                    break;
                }
                *slot += c * fall * x.powi((k - d) as i32);
                fall *= (k - d) as f64;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Q = LogSeries<Gq>;

    fn q(n: i64) -> Gq {
        Gq::int(n)
    }

    #[test]
    fn additive_inverse_is_canonical_zero() {
        let s = Q::power(0, vec![q(1)], 3);
        let t = Q::power(0, vec![q(-1)], 3);
        let z = s.add(&t);
        assert!(z.is_zero());
        assert_eq!(z, Q::zero(3));
    }

    #[test]
    fn add_aligns_exponents() {
        let s = Q::power(1, vec![q(1)], DEFAULT_TRUNC);
        let t = Q::power(0, vec![q(1)], DEFAULT_TRUNC);
        let u = s.add(&t);
        assert_eq!(u.rho(), 0);
        assert_eq!(u.coeff(0, 0), q(1));
        assert_eq!(u.coeff(0, 1), q(1));
        assert_eq!(u.coeff(0, 2), q(0));
        assert_eq!(u.valid_through(), 40);
    }

    #[test]
    fn add_unions_log_powers() {
        let u = Q::ln().add(&Q::constant(q(1)));
        assert_eq!(u.max_log(), 1);
        assert_eq!(u.coeff(0, 0), q(1));
        assert_eq!(u.coeff(1, 0), q(1));
    }

    #[test]
    fn products() {
        let x = Q::monomial(1, 0);
        assert_eq!(x.mul(&x), Q::monomial(2, 0));
        assert_eq!(Q::ln().mul(&Q::ln()), Q::monomial(0, 2));
        let a = Q::power(0, vec![q(1), q(1)], DEFAULT_TRUNC);
        let b = Q::power(0, vec![q(1), q(-1)], DEFAULT_TRUNC);
        assert_eq!(a.mul(&b), Q::power(0, vec![q(1), q(0), q(-1)], DEFAULT_TRUNC));
    }

    #[test]
    fn derivatives() {
        assert_eq!(Q::monomial(2, 0).differentiate(), Q::power(1, vec![q(2)], DEFAULT_TRUNC));
        let d = Q::ln().differentiate();
        assert_eq!(d.rho(), -1);
        assert_eq!(d.max_log(), 0);
        assert_eq!(d.coeff(0, -1), q(1));
        // x ln x -> ln x + 1
        let d = Q::monomial(1, 1).differentiate();
        assert_eq!(d.coeff(1, 0), q(1));
        assert_eq!(d.coeff(0, 0), q(1));
        assert_eq!(d.max_log(), 1);
    }

    #[test]
    fn antiderivatives() {
        let i = Q::constant(q(1)).integrate();
        assert_eq!(i.rho(), 1);
        assert_eq!(i.coeff(0, 1), q(1));
        let i = Q::monomial(-1, 0).integrate();
        assert_eq!(i.coeff(1, 0), q(1));
        assert_eq!(i.max_log(), 1);
        // x ln x -> x^2 ln x / 2 - x^2 / 4
        let i = Q::monomial(1, 1).integrate();
        assert_eq!(i.coeff(1, 2), Gq::frac(1, 2));
        assert_eq!(i.coeff(0, 2), Gq::frac(-1, 4));
    }

    #[test]
    fn truncation_is_tracked() {
        let s = Q::power(0, vec![q(1), q(2), q(3)], 2);
        let t = Q::power(1, vec![q(1)], 10);
        let p = s.mul(&t);
        assert_eq!(p.valid_through(), 3);
        assert_eq!(s.add(&t).valid_through(), 2);
        assert_eq!(s.differentiate().valid_through(), 1);
        assert_eq!(s.integrate().valid_through(), 3);
    }

    #[test]
    fn evaluate_polynomial_has_zero_tail() {
        let s = Q::power(0, vec![q(1), q(1)], DEFAULT_TRUNC);
        let e = s.evaluate(0.5).unwrap();
        assert!((e.value.re - 1.5).abs() < 1e-15);
        assert_eq!(e.tail_bound, 0.0);
    }

    #[test]
    fn evaluate_geometric_series() {
        let s = Q::power(0, vec![q(1); 41], 40);
        let e = s.evaluate(0.5).unwrap();
        assert!((e.value.re - 2.0).abs() <= 2f64.powi(-39));
        assert!(e.tail_bound <= 2f64.powi(-39));
        assert!((e.value.re + e.tail_bound - 2.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_logarithm() {
        let e = Q::ln().evaluate(0.5).unwrap();
        assert!((e.value.re - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn divergent_coefficients_have_no_tail_bound() {
        let coeffs = (0..=40).map(|k| Gq::int(1i64 << (k / 2).min(40))).collect();
        let s = Q::power(0, coeffs, 40);
        assert!(matches!(s.evaluate(0.9), Err(Error::TailBoundUnavailable)));
    }

    #[test]
    fn exact_evaluation_matches_finite_sum() {
        let s = Q::power(-1, vec![q(2), q(3), Gq::frac(1, 2)], 2);
        let x = BigRational::new(1.into(), 3.into());
        // 2/x + 3 + x/2 at x = 1/3
        assert_eq!(s.evaluate_exact(&x).unwrap(), Gq::frac(6 * 6 + 18 + 1, 6));
        assert!(Q::ln().evaluate_exact(&x).is_err());
    }

    #[test]
    fn reciprocal_series() {
        let a = AnalyticSeries::from_ints(&[1, -1]);
        let r = a.reciprocal(5).unwrap();
        assert!(r.coeffs.iter().all(|c| c == &BigRational::one()));
    }
}
