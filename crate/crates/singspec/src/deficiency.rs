//! Deficiency numbers: the closed formula and an exact constructive count.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{adapted_basis, free_mask, jet_form_limit, AdaptedSystem, Jet};
use crate::frobenius::{OperatorSpec, Side};
use crate::linalg;
use crate::par::{self, ExecMode};
use crate::scalar::{Coeff, Gq};

fn check_orders(m: usize, p: usize, q: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Domain("m must be positive".into()));
    }
    for (name, v) in [("p", p), ("q", q)] {
        if v < 1 || v > 2 * m - 1 {
            return Err(Error::Domain(format!("{name} = {v} outside [1, {}]", 2 * m - 1)));
        }
    }
    Ok(())
}

pub fn deficiency_closed_form(m: usize, p: usize, q: usize) -> Result<usize> {
    check_orders(m, p, q)?;
    Ok(match (p <= m, q <= m) {
        (false, false) => 4 * m - p.max(q),
        (true, true) => 2 * m + p.min(q),
        (true, false) => 3 * m + p - q,
        (false, true) => 3 * m + q - p,
    })
}

/// Deficiency number of the single-order problem (`p = q`); panics if the
/// closed formula disagrees.
pub fn legacy_consistency(m: usize, p: usize) -> Result<usize> {
    check_orders(m, p, p)?;
    let legacy = if p <= m { 2 * m + p } else { 4 * m - p };
    let closed = deficiency_closed_form(m, p, p)?;
    assert_eq!(legacy, closed, "single-order value differs from the closed formula");
    Ok(legacy)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    /// `α_k c_k = β_k d_k`
    Coupling,
    /// `α_k c_k = 0` or `β_k d_k = 0`
    Annihilation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintTerm {
    pub label: String,
    pub coefficient: Gq,
}

/// One interface relation, coming from the jet position `position`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constraint {
    pub position: usize,
    pub k: usize,
    pub kind: ConstraintKind,
    /// `Σ coefficient · conj(label) = 0`
    pub terms: Vec<ConstraintTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeficiencyCertificate {
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub lambda: Gq,
    pub n_formula: usize,
    pub n_counted: usize,
    /// Square-integrable solutions on the left.
    pub d1: usize,
    /// Square-integrable solutions on the right.
    pub d2: usize,
    pub rank: usize,
    pub constraints: Vec<Constraint>,
    pub free_coefficients: Vec<String>,
}

impl DeficiencyCertificate {
    pub fn consistent(&self) -> bool {
        self.n_formula == self.n_counted && self.d1 + self.d2 - self.rank == self.n_counted
    }
}

/// Labels and adapted members of the square-integrable part: `c_k` on the
/// right, `d_k` on the left.
pub(crate) fn l2_members(sys: &AdaptedSystem<Gq>, prefix: &str) -> Vec<(String, usize)> {
    sys.l2().map(|a| (format!("{prefix}{}", a.k), a.k)).collect()
}

/// Count the solutions of `l[y] = λ y` on both halves that satisfy the interface
/// condition `[f,y](-0) = [f,y](+0)` for every minimal-domain jet.
pub fn deficiency_constructive(spec: &OperatorSpec, lambda: Gq, trunc: usize) -> Result<DeficiencyCertificate> {
    if lambda.is_real() {
        return Err(Error::Domain("the spectral parameter must be nonreal".into()));
    }
    let (m, p, q) = (spec.m, spec.p, spec.q);
    let right = adapted_basis(spec, Side::Right, lambda.clone(), trunc)?;
    let left = adapted_basis(spec, Side::Left, lambda.clone(), trunc)?;
    let cols: Vec<(String, Side, usize)> = l2_members(&right, "c")
        .into_iter()
        .map(|(l, k)| (l, Side::Right, k))
        .chain(l2_members(&left, "d").into_iter().map(|(l, k)| (l, Side::Left, k)))
        .collect();
    let mask_r = free_mask(m, p);
    let mask_l = free_mask(m, q);
    let mut rows: linalg::Rows<Gq> = Vec::new();
    let mut constraints = Vec::new();
    for pos in (0..2 * m).filter(|&l| mask_r[l] || mask_l[l]) {
        let mut row = Vec::with_capacity(cols.len());
        for (_, side, k) in &cols {
            let (sys, mask, order, sign) = match side {
                Side::Right => (&right, &mask_r, p, Gq::int(1)),
                Side::Left => (&left, &mask_l, q, Gq::int(-1)),
            };
            if !mask[pos] {
                row.push(Gq::int(0));
                continue;
            }
            let y = &sys.get(*k).expect("assigned index").solution;
            let v = jet_form_limit(spec, &Jet::unit(pos, m, order)?, y)?;
            row.push(sign * v);
        }
        let terms: Vec<ConstraintTerm> = cols
            .iter()
            .zip(&row)
            .filter(|(_, v)| !v.is_zero())
            .map(|((label, _, _), v)| ConstraintTerm { label: label.clone(), coefficient: v.clone() })
            .collect();
        if !terms.is_empty() {
            let both = terms.iter().any(|t| t.label.starts_with('c')) && terms.iter().any(|t| t.label.starts_with('d'));
            constraints.push(Constraint {
                position: pos,
                k: 2 * m - pos,
                kind: if both { ConstraintKind::Coupling } else { ConstraintKind::Annihilation },
                terms,
            });
        }
        rows.push(row);
    }
    let mut work = rows.clone();
    let pivots = linalg::rref(&mut work, 0.0);
    let rank = pivots.len();
    let free_coefficients = cols
        .iter()
        .enumerate()
        .filter(|(i, _)| !pivots.contains(i))
        .map(|(_, (label, _, _))| label.clone())
        .collect();
    let d2 = right.l2().count();
    let d1 = left.l2().count();
    Ok(DeficiencyCertificate {
        m,
        p,
        q,
        lambda,
        n_formula: deficiency_closed_form(m, p, q)?,
        n_counted: d1 + d2 - rank,
        d1,
        d2,
        rank,
        constraints,
        free_coefficients,
    })
}

/// One grid point of [`sweep`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub n_formula: usize,
    pub n_counted: usize,
    pub d1: usize,
    pub d2: usize,
    pub matches: bool,
}

/// Formula against constructive count over every `(p, q)` for each `m` in `ms`
/// (unit coefficients, `λ = i`).
pub fn sweep(ms: &[usize], mode: ExecMode) -> Result<Vec<SweepRow>> {
    let grid: Vec<(usize, usize, usize)> =
        ms.iter().flat_map(|&m| (1..2 * m).flat_map(move |p| (1..2 * m).map(move |q| (m, p, q)))).collect();
    par::map(&grid, mode, |&(m, p, q)| {
        let spec = OperatorSpec::unit(m, p, q)?;
        let cert = deficiency_constructive(&spec, Gq::i(), spec.min_trunc())?;
        Ok(SweepRow {
            m,
            p,
            q,
            n_formula: cert.n_formula,
            n_counted: cert.n_counted,
            d1: cert.d1,
            d2: cert.d2,
            matches: cert.consistent(),
        })
    })
    .into_iter()
    .collect()
}
