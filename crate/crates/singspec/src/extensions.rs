//! Self-adjoint extensions: normalized null-solution and patch bases, the
//! boundary-data coordinates `W(y) = (Y(-1), η₋, η₊, Y(1))`, validation of
//! boundary-condition quadruples, the unitary parameterization and the
//! decomposition of maximal-domain functions.
//!
//! In these coordinates the total boundary form
//! `[y,z](1) - [y,z](+0) + [y,z](-0) - [y,z](-1)` is `W(z)^* Q W(y)` with
//! `Q = (-1)^{m+1} diag(-E_{2m}, -E_{n1}, E_{n2}, E_{2m})`.

use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::deficiency::{deficiency_constructive, DeficiencyCertificate};
use crate::error::{Error, Result};
use crate::forms::{
    combine, form_series, form_value, free_mask, gram_normalize, jet_form_limit, patch, series_limit_at_zero, FormMatrix,
    Jet, PatchFunction,
};
use crate::frobenius::{frobenius_basis, FrobeniusSolution, OperatorSpec, Side};
use crate::linalg::{self, svd_kernel, svd_rank, Rows};
use crate::logseries::{LogSeries, DEFAULT_TRUNC};
use crate::scalar::{Coeff, Gq};
use crate::spectrum::{shoot, ShootConfig};

pub type CMatrix = DMatrix<Complex64>;

type C = Complex64;

/// Default tolerance for float checks.
pub const DEFAULT_TOL: f64 = 1e-10;

fn max_abs<'a>(it: impl Iterator<Item = &'a C>) -> f64 {
    it.map(|c| c.norm()).fold(0.0, f64::max)
}

fn sigma(m: usize) -> f64 {
    if m % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

fn e_matrix(n: usize, scale: f64) -> CMatrix {
    let e = FormMatrix::symplectic(n);
    DMatrix::from_fn(n, n, |i, j| C::new(e.entries[i][j] as f64 * scale, 0.0))
}

/// Square-integrable solution of the null equation on one half interval,
/// normalized against its siblings.
#[derive(Clone, Debug, PartialEq)]
pub struct NullSolution {
    pub side: Side,
    /// Coefficients over the `λ = 0` fundamental system (template order).
    pub combination: Vec<Gq>,
    pub series: LogSeries<Gq>,
    pub qd: Vec<LogSeries<Gq>>,
    /// Quasi-derivatives at the outer endpoint.
    pub endpoint: Vec<C>,
}

impl NullSolution {
    fn as_solution(&self) -> FrobeniusSolution<Gq> {
        FrobeniusSolution {
            index: 0,
            side: self.side,
            exponent: self.series.rho(),
            lead_log: 0,
            series: self.series.clone(),
            qd: self.qd.clone(),
            lambda: Gq::int(0),
            in_l2: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExtensionContext {
    pub spec: OperatorSpec,
    pub trunc: usize,
    pub null_basis_left: Vec<NullSolution>,
    pub null_basis_right: Vec<NullSolution>,
    pub patch_left: Vec<PatchFunction>,
    pub patch_right: Vec<PatchFunction>,
    pub deficiency: DeficiencyCertificate,
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
    /// Interface data `(η₋(f), η₊(f))` of a basis of minimal-domain jets, exact.
    pub interface_span: Rows<Gq>,
    pub shoot: ShootConfig,
    interface_rows: CMatrix,
}

fn null_basis(spec: &OperatorSpec, side: Side, trunc: usize, cfg: &ShootConfig) -> Result<Vec<NullSolution>> {
    let m = spec.m;
    let sols = frobenius_basis(spec, side, Gq::int(0), trunc)?;
    let l2: Vec<usize> = (0..sols.len()).filter(|&i| sols[i].in_l2).collect();
    let mut gram: Rows<Gq> = Vec::with_capacity(l2.len());
    for &i in &l2 {
        let mut row = Vec::with_capacity(l2.len());
        for &j in &l2 {
            row.push(series_limit_at_zero(&form_series(&sols[i].qd, &sols[j].qd, m))?);
        }
        gram.push(row);
    }
    let norm = gram_normalize(&gram, sigma(m) as i64, 0.0)?;
    let need = 2 * l2.len() - 2 * m;
    if norm.rank() != need {
        return Err(Error::RankDeficient { rank: norm.rank(), need });
    }
    let shot = shoot(spec, side, C::new(0.0, 0.0), &[], cfg)?;
    norm.columns
        .iter()
        .map(|col| {
            let mut combination = vec![Gq::int(0); sols.len()];
            for (c, &i) in col.iter().zip(&l2) {
                combination[i] = c.clone();
            }
            let (series, qd) = combine(&sols, &combination);
            let mut endpoint = vec![C::new(0.0, 0.0); 2 * m];
            for (c, column) in combination.iter().zip(&shot.columns) {
                for (e, v) in endpoint.iter_mut().zip(&column.at_end) {
                    *e += c.to_c64() * v;
                }
            }
            Ok(NullSolution { side, combination, series, qd, endpoint })
        })
        .collect()
}

fn patches(spec: &OperatorSpec, side: Side) -> Result<Vec<PatchFunction>> {
    let n = 2 * spec.m;
    let units: Vec<Vec<Gq>> = (0..n).map(|i| (0..n).map(|j| Gq::int((i == j) as i64)).collect()).collect();
    let gram: Rows<Gq> = units.iter().map(|a| units.iter().map(|b| form_value(a, b, spec.m)).collect::<Result<_>>()).collect::<Result<_>>()?;
    let norm = gram_normalize(&gram, 1, 0.0)?;
    let cut = match side {
        Side::Left => -0.5,
        Side::Right => 0.5,
    };
    norm.columns.into_iter().map(|jet| patch(spec, side, jet, cut)).collect()
}

/// Build the normalized bases at `λ = 0`, the patch functions, the deficiency
/// certificate and the interface span of the minimal domain.
pub fn build_context(spec: &OperatorSpec) -> Result<ExtensionContext> {
    build_context_with(spec, &ShootConfig::default())
}

pub fn build_context_with(spec: &OperatorSpec, cfg: &ShootConfig) -> Result<ExtensionContext> {
    let m = spec.m;
    let trunc = spec.min_trunc().max(DEFAULT_TRUNC.min(2 * spec.min_trunc()));
    let deficiency = deficiency_constructive(spec, Gq::i(), spec.min_trunc())?;
    let null_basis_left = null_basis(spec, Side::Left, trunc, cfg)?;
    let null_basis_right = null_basis(spec, Side::Right, trunc, cfg)?;
    let (n1, n2) = (null_basis_left.len(), null_basis_right.len());
    let (d1, d2, n) = (deficiency.d1, deficiency.d2, deficiency.n_counted);
    let d3 = d1 + d2 - n;
    let mask_l = free_mask(m, spec.q);
    let mask_r = free_mask(m, spec.p);
    let mut span: Rows<Gq> = Vec::new();
    for pos in (0..2 * m).filter(|&l| mask_l[l] || mask_r[l]) {
        let mut row = Vec::with_capacity(n1 + n2);
        for (basis, mask, order) in [(&null_basis_left, &mask_l, spec.q), (&null_basis_right, &mask_r, spec.p)] {
            for u in basis {
                row.push(if mask[pos] { jet_form_limit(spec, &Jet::unit(pos, m, order)?, &u.as_solution())? } else { Gq::int(0) });
            }
        }
        span.push(row);
    }
    let mut reduced = span.clone();
    let rank = linalg::rref(&mut reduced, 0.0).len();
    reduced.truncate(rank);
    if rank != d3 {
        return Err(Error::Domain(format!("minimal-domain interface span has rank {rank}, expected d1 + d2 - n = {d3}")));
    }
    let mut ctx = ExtensionContext {
        spec: spec.clone(),
        trunc,
        null_basis_left,
        null_basis_right,
        patch_left: patches(spec, Side::Left)?,
        patch_right: patches(spec, Side::Right)?,
        deficiency,
        n,
        n1,
        n2,
        d1,
        d2,
        d3,
        interface_span: reduced,
        shoot: *cfg,
        interface_rows: DMatrix::zeros(0, 0),
    };
    let v0 = ctx.interface_vectors();
    ctx.interface_rows = v0.adjoint() * ctx.form_matrix();
    Ok(ctx)
}

impl ExtensionContext {
    pub fn boundary_dimension(&self) -> usize {
        4 * self.spec.m + self.n1 + self.n2
    }

    /// Column ranges of `W` that belong to the left and right half intervals.
    pub fn side_columns(&self) -> (Range<usize>, Range<usize>) {
        let split = 2 * self.spec.m + self.n1;
        (0..split, split..self.boundary_dimension())
    }

    /// `Q`, the matrix of the total boundary form in `W` coordinates.
    pub fn form_matrix(&self) -> CMatrix {
        let m = self.spec.m;
        let s = -sigma(m);
        let blocks = [(2 * m, -s), (self.n1, -s), (self.n2, s), (2 * m, s)];
        let big = self.boundary_dimension();
        let mut q = DMatrix::zeros(big, big);
        let mut at = 0;
        for (size, scale) in blocks {
            q.view_mut((at, at), (size, size)).copy_from(&e_matrix(size, scale));
            at += size;
        }
        q
    }

    /// `W(f)` of the minimal-domain basis functions, one per column.
    pub fn interface_vectors(&self) -> CMatrix {
        let off = 2 * self.spec.m;
        let mut v = DMatrix::zeros(self.boundary_dimension(), self.interface_span.len());
        for (j, row) in self.interface_span.iter().enumerate() {
            for (i, val) in row.iter().enumerate() {
                v[(off + i, j)] = val.to_c64();
            }
        }
        v
    }

    /// `max |W(f)^* Q W(g)|` over the minimal-domain basis. Nonzero when the
    /// orders differ and one of them is below `m`.
    pub fn interface_isotropy(&self) -> f64 {
        let v = self.interface_vectors();
        max_abs((v.adjoint() * self.form_matrix() * &v).iter())
    }

    /// Rows `W(f)^* Q` expressing the interface conditions `[f,y](-0) = [f,y](+0)`.
    pub fn interface_rows(&self) -> &CMatrix {
        &self.interface_rows
    }

    /// `W` of a function living on one half interval.
    pub fn boundary_vector(&self, side: Side, endpoint: &[C], interface: &[C]) -> Vec<C> {
        let m = self.spec.m;
        let mut w = vec![C::new(0.0, 0.0); self.boundary_dimension()];
        let (end_at, eta_at) = match side {
            Side::Left => (0, 2 * m),
            Side::Right => (2 * m + self.n1 + self.n2, 2 * m + self.n1),
        };
        w[end_at..end_at + 2 * m].copy_from_slice(endpoint);
        w[eta_at..eta_at + interface.len()].copy_from_slice(interface);
        w
    }

    pub fn check_dimensions(&self, bc: &BoundaryConditionSet) -> Result<()> {
        let m = self.spec.m;
        let expect = [(2 * m, &bc.a1, "A1"), (self.n1, &bc.b1, "B1"), (self.n2, &bc.b2, "B2"), (2 * m, &bc.a2, "A2")];
        for (cols, mat, name) in expect {
            if mat.nrows() != self.n || mat.ncols() != cols {
                return Err(Error::DimensionMismatch {
                    expected: format!("{name}: {} x {cols}", self.n),
                    got: format!("{} x {}", mat.nrows(), mat.ncols()),
                });
            }
        }
        Ok(())
    }

    /// Minimal-domain basis kernel: orthonormal basis of `{W : W(f)^* Q W = 0}`.
    fn domain_space(&self) -> CMatrix {
        svd_kernel(&self.interface_rows, 1e-12)
    }
}

/// Boundary-condition quadruple `A1 Y(-1) + B1 η₋ + B2 η₊ + A2 Y(1) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryConditionSet {
    pub a1: CMatrix,
    pub b1: CMatrix,
    pub b2: CMatrix,
    pub a2: CMatrix,
}

impl BoundaryConditionSet {
    pub fn new(a1: CMatrix, b1: CMatrix, b2: CMatrix, a2: CMatrix) -> Result<Self> {
        let n = a1.nrows();
        if [b1.nrows(), b2.nrows(), a2.nrows()].iter().any(|&r| r != n) {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} rows in every block"),
                got: format!("{}, {}, {}, {}", n, b1.nrows(), b2.nrows(), a2.nrows()),
            });
        }
        Ok(BoundaryConditionSet { a1, b1, b2, a2 })
    }

    /// All-zero set of the right shape for `ctx`.
    pub fn zeros(ctx: &ExtensionContext) -> Self {
        let m = ctx.spec.m;
        BoundaryConditionSet {
            a1: DMatrix::zeros(ctx.n, 2 * m),
            b1: DMatrix::zeros(ctx.n, ctx.n1),
            b2: DMatrix::zeros(ctx.n, ctx.n2),
            a2: DMatrix::zeros(ctx.n, 2 * m),
        }
    }

    pub fn n(&self) -> usize {
        self.a1.nrows()
    }

    /// `(A1 | B1 | B2 | A2)`.
    pub fn full(&self) -> CMatrix {
        let n = self.n();
        let widths = [self.a1.ncols(), self.b1.ncols(), self.b2.ncols(), self.a2.ncols()];
        let mut out = DMatrix::zeros(n, widths.iter().sum());
        let mut at = 0;
        for (block, w) in [&self.a1, &self.b1, &self.b2, &self.a2].into_iter().zip(widths) {
            out.view_mut((0, at), (n, w)).copy_from(block);
            at += w;
        }
        out
    }

    /// Split `(A1 | B1 | B2 | A2)` back into blocks.
    pub fn from_full(full: &CMatrix, ctx: &ExtensionContext) -> Result<Self> {
        let m = ctx.spec.m;
        if full.ncols() != ctx.boundary_dimension() {
            return Err(Error::DimensionMismatch { expected: ctx.boundary_dimension().to_string(), got: full.ncols().to_string() });
        }
        let n = full.nrows();
        let take = |at: usize, w: usize| full.view((0, at), (n, w)).into_owned();
        Ok(BoundaryConditionSet {
            a1: take(0, 2 * m),
            b1: take(2 * m, ctx.n1),
            b2: take(2 * m + ctx.n1, ctx.n2),
            a2: take(2 * m + ctx.n1 + ctx.n2, 2 * m),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub rank_ok: bool,
    pub rank: usize,
    /// Rank of the conditions on functions that satisfy the interface conditions.
    pub rank_on_domain: usize,
    pub symplectic_ok: bool,
    pub symplectic_residual: f64,
    pub kernel_ok: bool,
    pub kernel_residual: f64,
    /// Largest total boundary form between members of the described domain.
    /// Only meaningful when `interface_isotropic` holds.
    pub boundary_form_residual: f64,
    /// Whether the minimal-domain interface data pair to zero among themselves.
    pub interface_isotropic: bool,
    pub domain_dimension: usize,
    pub details: Vec<String>,
}

impl ValidationReport {
    pub fn valid(&self) -> bool {
        self.rank_ok && self.symplectic_ok && self.kernel_ok
    }
}

/// Check the rank, symplectic balance and minimal-domain kernel conditions.
pub fn validate(bc: &BoundaryConditionSet, ctx: &ExtensionContext, tol: f64) -> Result<ValidationReport> {
    ctx.check_dimensions(bc)?;
    let m = ctx.spec.m;
    let a = bc.full();
    let scale = if a.norm() > 0.0 { a.norm() } else { 1.0 };
    let mut details = Vec::new();
    let rank = svd_rank(&a, tol);
    let dom = ctx.domain_space();
    let rank_on_domain = svd_rank(&(&a * &dom), tol);
    let rank_ok = rank == ctx.n && rank_on_domain == ctx.n;
    details.push(format!("rank {rank} (on interface-compatible data {rank_on_domain}), need {}", ctx.n));
    let e = |k: usize| e_matrix(k, 1.0);
    let balance = &bc.a1 * e(2 * m) * bc.a1.adjoint() + &bc.b1 * e(ctx.n1) * bc.b1.adjoint()
        - &bc.b2 * e(ctx.n2) * bc.b2.adjoint()
        - &bc.a2 * e(2 * m) * bc.a2.adjoint();
    let symplectic_residual = balance.norm() / (scale * scale);
    let symplectic_ok = symplectic_residual <= tol;
    details.push(format!("symplectic balance residual {symplectic_residual:.3e}"));
    let v0 = ctx.interface_vectors();
    let kernel_residual = if v0.ncols() == 0 { 0.0 } else { (&a * &v0).norm() / (scale * v0.norm()) };
    let kernel_ok = kernel_residual <= tol;
    details.push(format!("minimal-domain annihilation residual {kernel_residual:.3e} over {} interface vectors", v0.ncols()));
    // oracle: the total boundary form on the described domain
    let mut stacked = DMatrix::zeros(ctx.d3 + a.nrows(), a.ncols());
    stacked.view_mut((0, 0), (ctx.d3, a.ncols())).copy_from(ctx.interface_rows());
    stacked.view_mut((ctx.d3, 0), (a.nrows(), a.ncols())).copy_from(&a.unscale(scale));
    let domain = svd_kernel(&stacked, tol.max(1e-12));
    let boundary_form_residual = if domain.ncols() == 0 { 0.0 } else { max_abs((domain.adjoint() * ctx.form_matrix() * &domain).iter()) };
    details.push(format!(
        "domain dimension {} (self-adjoint: {}), boundary form residual {boundary_form_residual:.3e}",
        domain.ncols(),
        ctx.n + ctx.d3
    ));
    Ok(ValidationReport {
        rank_ok,
        rank,
        rank_on_domain,
        symplectic_ok,
        symplectic_residual,
        kernel_ok,
        kernel_residual,
        boundary_form_residual,
        interface_isotropic: ctx.interface_isotropy() <= tol,
        domain_dimension: domain.ncols(),
        details,
    })
}

/// Domain of the extension attached to a unitary matrix: boundary data of
/// `φ_μ` (orthonormal deficiency basis at `λ = i`) and of
/// `ψ_μ = φ_μ - Σ_ν u_{νμ} conj(φ_ν)`, plus the equivalent boundary conditions.
#[derive(Clone, Debug)]
pub struct UnitaryExtension {
    pub phi: CMatrix,
    pub psi: CMatrix,
    pub bc: BoundaryConditionSet,
    /// `max |<φ_μ, φ_ν> - δ_{μν}|` after orthonormalization.
    pub orthonormality_residual: f64,
}

/// Orthonormal basis of the deficiency space at `λ = i`, as boundary data
/// (columns of `W`).
pub fn deficiency_basis(ctx: &ExtensionContext) -> Result<(CMatrix, f64)> {
    let cfg = ShootConfig { l2_gram: true, ..ctx.shoot };
    let lambda = C::new(0.0, 1.0);
    let left = shoot(&ctx.spec, Side::Left, lambda, &ctx.null_basis_left, &cfg)?;
    let right = shoot(&ctx.spec, Side::Right, lambda, &ctx.null_basis_right, &cfg)?;
    let mut cols: Vec<Vec<C>> = Vec::new();
    for (shot, side) in [(&left, Side::Left), (&right, Side::Right)] {
        for c in shot.l2_columns() {
            cols.push(ctx.boundary_vector(side, &c.at_end, c.interface.as_deref().unwrap_or(&[])));
        }
    }
    let w = DMatrix::from_fn(ctx.boundary_dimension(), cols.len(), |i, j| cols[j][i]);
    let gl = left.l2_gram.expect("requested");
    let gr = right.l2_gram.expect("requested");
    let mut gram = DMatrix::zeros(cols.len(), cols.len());
    gram.view_mut((0, 0), (gl.nrows(), gl.ncols())).copy_from(&gl);
    gram.view_mut((gl.nrows(), gl.ncols()), (gr.nrows(), gr.ncols())).copy_from(&gr);
    let conditions = ctx.interface_rows() * &w;
    let kernel = svd_kernel(&conditions, 1e-9);
    if kernel.ncols() != ctx.n {
        return Err(Error::RankDeficient { rank: kernel.ncols(), need: ctx.n });
    }
    // <Σ a_i y_i, Σ b_j y_j> = b^* G^T a
    let gram = gram.transpose();
    let h = kernel.adjoint() * &gram * &kernel;
    let chol = h.clone().cholesky().ok_or(Error::RankDeficient { rank: 0, need: ctx.n })?;
    let linv = chol.l().try_inverse().ok_or(Error::RankDeficient { rank: 0, need: ctx.n })?;
    let coeffs = &kernel * linv.adjoint();
    let check = coeffs.adjoint() * &gram * &coeffs - CMatrix::identity(ctx.n, ctx.n);
    Ok((&w * coeffs, max_abs(check.iter())))
}

pub fn extension_from_unitary(u: &CMatrix, ctx: &ExtensionContext) -> Result<UnitaryExtension> {
    if u.nrows() != ctx.n || u.ncols() != ctx.n {
        return Err(Error::DimensionMismatch { expected: format!("{0} x {0}", ctx.n), got: format!("{} x {}", u.nrows(), u.ncols()) });
    }
    let defect = max_abs((u.adjoint() * u - CMatrix::identity(ctx.n, ctx.n)).iter());
    if defect > 1e-10 {
        return Err(Error::NotUnitary(defect));
    }
    let (phi, orthonormality_residual) = deficiency_basis(ctx)?;
    let psi = &phi - phi.map(|c| c.conj()) * u;
    let full = psi.adjoint() * ctx.form_matrix();
    let bc = BoundaryConditionSet::from_full(&full, ctx)?;
    Ok(UnitaryExtension { phi, psi, bc, orthonormality_residual })
}

/// A maximal-domain function given by its endpoint quasi-derivatives and, on
/// each side, its quasi-derivative ladder near `0` (`None`: vanishes there).
#[derive(Clone, Debug, Default)]
pub struct FunctionData {
    pub left_end: Vec<C>,
    pub right_end: Vec<C>,
    pub near_left: Option<Vec<LogSeries<Gq>>>,
    pub near_right: Option<Vec<LogSeries<Gq>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    /// Patch coefficients `d_{j,-}`, `d_{j,+}`.
    pub d_left: Vec<C>,
    pub d_right: Vec<C>,
    /// Null-solution coefficients `h_{k,-}`, `h_{k,+}`.
    pub h_left: Vec<Gq>,
    pub h_right: Vec<Gq>,
    /// Largest endpoint quasi-derivative of the remainder.
    pub remainder_endpoint: f64,
    /// Whether all interface form limits of the remainder vanish exactly.
    pub remainder_interface_zero: bool,
}

fn interface_of(ctx: &ExtensionContext, basis: &[NullSolution], ladder: &Option<Vec<LogSeries<Gq>>>) -> Result<Vec<Gq>> {
    let Some(qd) = ladder else {
        return Ok(vec![Gq::int(0); basis.len()]);
    };
    basis
        .iter()
        .map(|u| {
            series_limit_at_zero(&form_series(qd, &u.qd, ctx.spec.m))
                .map_err(|e| Error::NotInMaximalDomain(format!("interface form limit: {e}")))
        })
        .collect()
}

/// Solve `η_k = Σ_j h_j [u_j, u_k]` with `[u_j, u_k] = (-1)^{m+1} E_{jk}`;
/// the transposed matrix is `-(-1)^{m+1} E`.
fn null_coefficients(m: usize, eta: &[Gq]) -> Result<Vec<Gq>> {
    let a = FormMatrix::symplectic(eta.len()).scaled::<Gq>(-(sigma(m) as i64));
    linalg::solve(&a, eta, 0.0)
}

pub fn decompose_maximal(y: &FunctionData, ctx: &ExtensionContext) -> Result<Decomposition> {
    let m = ctx.spec.m;
    if y.left_end.len() != 2 * m || y.right_end.len() != 2 * m {
        return Err(Error::DimensionMismatch { expected: format!("endpoint jets of length {}", 2 * m), got: "other".into() });
    }
    let mut out = Vec::new();
    for (basis, patches, end, near) in [
        (&ctx.null_basis_left, &ctx.patch_left, &y.left_end, &y.near_left),
        (&ctx.null_basis_right, &ctx.patch_right, &y.right_end, &y.near_right),
    ] {
        let eta = interface_of(ctx, basis, near)?;
        let h = if basis.is_empty() { Vec::new() } else { null_coefficients(m, &eta)? };
        // endpoint jet left over after the null solutions
        let mut rest: Vec<C> = end.clone();
        for (hk, u) in h.iter().zip(basis) {
            for (r, v) in rest.iter_mut().zip(&u.endpoint) {
                *r -= hk.to_c64() * v;
            }
        }
        let g = DMatrix::from_fn(2 * m, 2 * m, |i, j| patches[j].jet[i].to_c64());
        let rhs = nalgebra::DVector::from_vec(rest.clone());
        let d = g.clone().lu().solve(&rhs).ok_or(Error::RankDeficient { rank: 0, need: 2 * m })?;
        let remainder_end = max_abs((&rhs - &g * &d).iter());
        let remainder_zero = match near {
            None => true,
            Some(qd) => {
                let (_, uq) = combine_null(basis, &h);
                let diff: Vec<LogSeries<Gq>> = qd.iter().zip(&uq).map(|(a, b)| a.sub(b)).collect();
                interface_of(ctx, basis, &Some(diff))?.iter().all(|v| v.is_zero())
            }
        };
        out.push((d.iter().copied().collect::<Vec<C>>(), h, remainder_end, remainder_zero));
    }
    let (dr, hr, er, zr) = out.pop().expect("two sides");
    let (dl, hl, el, zl) = out.pop().expect("two sides");
    Ok(Decomposition {
        d_left: dl,
        d_right: dr,
        h_left: hl,
        h_right: hr,
        remainder_endpoint: el.max(er),
        remainder_interface_zero: zl && zr,
    })
}

fn combine_null(basis: &[NullSolution], h: &[Gq]) -> (LogSeries<Gq>, Vec<LogSeries<Gq>>) {
    let sols: Vec<FrobeniusSolution<Gq>> = basis.iter().map(|u| u.as_solution()).collect();
    combine(&sols, h)
}
