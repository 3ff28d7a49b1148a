use serde::Serialize;
use serde_json::json;
use singspec::deficiency::{deficiency_constructive, sweep};
use singspec::extensions::{build_context_with, validate, ExtensionContext, DEFAULT_TOL};
use singspec::forms::{form_constants, l2_indices, nonzero_limit_indices};
use singspec::frobenius::{exponent_template, frobenius_basis, OperatorSpec, Side};
use singspec::logseries::DEFAULT_TRUNC;
use singspec::par::ExecMode;
use singspec::spectrum::{discreteness_criterion, eigenvalues, EigenConfig, ShootConfig};
use singspec::{AnalyticSeries, Coeff, Gq, LogSeries};

use crate::input::{parse_complex, parse_list, parse_series, BcFile, SpecFile};
use crate::output::{cell, json, num, opt_cell, Report, Table};
use crate::{
    CliError, DeficiencyArgs, DiscretenessArgs, FormsArgs, FundamentalArgs, SideArg, SpecArgs, SpectrumArgs, SpectrumTable,
    SweepArgs, ValidateArgs,
};

const TRUNC_ENV: &str = "SINGSPEC_TRUNC";

fn env_trunc() -> Result<Option<usize>, CliError> {
    match std::env::var(TRUNC_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::Usage(format!("{TRUNC_ENV}={v:?} is not a nonnegative integer"))),
        Err(_) => Ok(None),
    }
}

/// Resolved operator plus the truncation chosen by flag, file or environment.
struct Resolved {
    file: SpecFile,
    spec: OperatorSpec,
    trunc: Option<usize>,
}

fn resolve(args: &SpecArgs) -> Result<Resolved, CliError> {
    let file = match (&args.spec, args.m, args.p) {
        (Some(path), None, None) => SpecFile::read(path)?,
        (None, Some(m), Some(p)) => SpecFile {
            m,
            p,
            q: args.q.unwrap_or(p),
            a: args.a.as_deref().map(parse_list).transpose()?,
            b: args.b.as_deref().map(parse_list).transpose()?,
            trunc: None,
            lambda: None,
        },
        (Some(_), _, _) => return Err(CliError::Usage("--spec cannot be combined with --m/--p".into())),
        _ => return Err(CliError::Usage("give either --spec FILE or --m and --p".into())),
    };
    let spec = file.operator()?;
    let trunc = args.trunc.or(file.trunc).or(env_trunc()?);
    Ok(Resolved { file, spec, trunc })
}

fn sides(arg: SideArg) -> Vec<Side> {
    match arg {
        SideArg::Left => vec![Side::Left],
        SideArg::Right => vec![Side::Right],
        SideArg::Both => vec![Side::Left, Side::Right],
    }
}

fn mode(sequential: bool) -> ExecMode {
    if sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    }
}

pub fn deficiency(args: &DeficiencyArgs) -> Result<Report, CliError> {
    let r = resolve(&args.spec)?;
    let lambda = match &args.lambda {
        Some(text) => parse_complex(text)?,
        None => r.file.lambda()?.unwrap_or_else(Gq::i),
    };
    let trunc = r.trunc.unwrap_or_else(|| r.spec.min_trunc());
    let cert = deficiency_constructive(&r.spec, lambda.clone(), trunc)?;
    let mut table = Table::new(&["m", "p", "q", "n_formula", "n_counted", "d1", "d2", "rank", "consistent"]);
    table.push(vec![
        cell(cert.m),
        cell(cert.p),
        cell(cert.q),
        cell(cert.n_formula),
        cell(cert.n_counted),
        cell(cert.d1),
        cell(cert.d2),
        cell(cert.rank),
        cell(cert.consistent()),
    ]);
    let mut outputs = json(&cert);
    outputs["consistent"] = json!(cert.consistent());
    let mut diagnostics = Vec::new();
    if !cert.consistent() {
        diagnostics.push(format!("constructive count {} differs from the formula {}", cert.n_counted, cert.n_formula));
    }
    Ok(Report { inputs: json!({"spec": r.file, "lambda": lambda, "trunc": trunc}), outputs, diagnostics, table })
}

#[derive(Serialize)]
struct Term {
    power: i64,
    log: usize,
    coefficient: Gq,
}

fn terms(s: &LogSeries<Gq>, limit: usize) -> Vec<Term> {
    let mut out = Vec::new();
    for (j, row) in s.rows().iter().enumerate() {
        for (nu, c) in row.iter().enumerate().take(limit) {
            if !c.is_zero() {
                out.push(Term { power: s.rho() + nu as i64, log: j, coefficient: c.clone() });
            }
        }
    }
    out.sort_by_key(|t| (t.power, t.log));
    out
}

pub fn fundamental_system(args: &FundamentalArgs) -> Result<Report, CliError> {
    let r = resolve(&args.spec)?;
    let lambda = match &args.lambda {
        Some(text) => parse_complex(text)?,
        None => r.file.lambda()?.unwrap_or_else(|| Gq::int(0)),
    };
    let trunc = r.trunc.unwrap_or_else(|| r.spec.min_trunc());
    let mut members = Vec::new();
    let mut table = Table::new(&["side", "index", "exponent", "lead_log", "max_log", "log_bound", "in_l2", "valid_through"]);
    let mut diagnostics = Vec::new();
    for side in sides(args.side) {
        let template = exponent_template(r.spec.m, r.spec.order(side))?;
        let sols = frobenius_basis(&r.spec, side, lambda.clone(), trunc)?;
        for (y, t) in sols.iter().zip(&template) {
            if y.max_log() > t.max_log {
                diagnostics.push(format!("{side:?} member {} has log degree {} above the bound {}", y.index, y.max_log(), t.max_log));
            }
            table.push(vec![
                cell(json(&side).as_str().unwrap_or_default()),
                cell(y.index),
                cell(y.exponent),
                cell(y.lead_log),
                cell(y.max_log()),
                cell(t.max_log),
                cell(y.in_l2),
                cell(y.series.valid_through()),
            ]);
            members.push(json!({
                "side": side,
                "index": y.index,
                "exponent": y.exponent,
                "lead_log": y.lead_log,
                "max_log": y.max_log(),
                "log_bound": t.max_log,
                "in_l2": y.in_l2,
                "valid_through": y.series.valid_through(),
                "terms": terms(&y.series, args.terms),
            }));
        }
    }
    Ok(Report {
        inputs: json!({"spec": r.file, "lambda": lambda, "trunc": trunc, "side": args.side, "terms": args.terms}),
        outputs: json!({"members": members}),
        diagnostics,
        table,
    })
}

pub fn forms(args: &FormsArgs) -> Result<Report, CliError> {
    let r = resolve(&args.spec)?;
    let m = r.spec.m;
    let mut rows = Vec::new();
    let mut table = Table::new(&["side", "k", "in_l2", "predicted_nonzero", "constant", "agrees"]);
    let mut diagnostics = Vec::new();
    for side in sides(args.side) {
        let order = r.spec.order(side);
        let constants = form_constants(&r.spec, side)?;
        let l2 = l2_indices(m, order);
        let predicted = nonzero_limit_indices(m, order);
        for (i, c) in constants.iter().enumerate() {
            let k = i + 1;
            let in_l2 = l2.contains(&k);
            let nonzero = predicted.contains(&k);
            // members outside L^2 carry no prediction
            let agrees = !in_l2 || c.is_some() == nonzero;
            if !agrees {
                diagnostics.push(format!("{side:?} k={k}: limit pattern differs from the prediction"));
            }
            table.push(vec![
                cell(json(&side).as_str().unwrap_or_default()),
                cell(k),
                cell(in_l2),
                cell(nonzero),
                opt_cell(c.as_ref()),
                cell(agrees),
            ]);
            rows.push(json!({"side": side, "k": k, "in_l2": in_l2, "predicted_nonzero": nonzero, "constant": c, "agrees": agrees}));
        }
    }
    Ok(Report { inputs: json!({"spec": r.file, "side": args.side}), outputs: json!({"table": rows}), diagnostics, table })
}

fn shoot_config(r: &Resolved, delta: Option<f64>) -> ShootConfig {
    let base = ShootConfig::default();
    ShootConfig { trunc: r.trunc.unwrap_or(DEFAULT_TRUNC), delta: delta.unwrap_or(base.delta), ..base }
}

fn context(r: &Resolved, cfg: &ShootConfig) -> Result<ExtensionContext, CliError> {
    Ok(build_context_with(&r.spec, cfg)?)
}

fn dimensions(ctx: &ExtensionContext) -> serde_json::Value {
    json!({"n": ctx.n, "n1": ctx.n1, "n2": ctx.n2, "d1": ctx.d1, "d2": ctx.d2, "d3": ctx.d3, "boundary_dimension": ctx.boundary_dimension()})
}

pub fn validate_bc(args: &ValidateArgs) -> Result<Report, CliError> {
    let r = resolve(&args.spec)?;
    let bc_file = BcFile::read(&args.bc)?;
    let bc = bc_file.conditions()?;
    let cfg = shoot_config(&r, None);
    let ctx = context(&r, &cfg)?;
    let tol = args.tol.unwrap_or(DEFAULT_TOL);
    let rep = validate(&bc, &ctx, tol)?;
    let mut table =
        Table::new(&["valid", "rank_ok", "rank", "symplectic_ok", "symplectic_residual", "kernel_ok", "kernel_residual", "boundary_form_residual"]);
    table.push(vec![
        cell(rep.valid()),
        cell(rep.rank_ok),
        cell(rep.rank),
        cell(rep.symplectic_ok),
        num(rep.symplectic_residual),
        cell(rep.kernel_ok),
        num(rep.kernel_residual),
        num(rep.boundary_form_residual),
    ]);
    let mut outputs = json(&rep);
    outputs["valid"] = json!(rep.valid());
    outputs["context"] = dimensions(&ctx);
    let mut diagnostics = rep.details.clone();
    if !rep.interface_isotropic {
        diagnostics.push("minimal-domain interface data are not isotropic; boundary_form_residual is informational".into());
    }
    Ok(Report { inputs: json!({"spec": r.file, "bc": bc_file, "tol": tol}), outputs, diagnostics, table })
}

pub fn spectrum(args: &SpectrumArgs) -> Result<Report, CliError> {
    let r = resolve(&args.spec)?;
    let bc_file = BcFile::read(&args.bc)?;
    let bc = bc_file.conditions()?;
    let shoot = shoot_config(&r, args.delta);
    let ctx = context(&r, &shoot)?;
    let [lo, hi] = [args.range[0], args.range[1]];
    let cfg = EigenConfig { scan_points: args.points, tol: args.tol, shoot, mode: mode(args.sequential) };
    let res = eigenvalues(&bc, &ctx, (lo, hi), &cfg)?;
    let table = match args.table {
        SpectrumTable::Eigenvalues => {
            let mut t = Table::new(&["lambda", "factor", "bracket_lo", "bracket_hi", "det_residual", "even_order"]);
            for e in &res.eigenvalues {
                t.push(vec![
                    num(e.lambda),
                    cell(json(&e.factor).as_str().unwrap_or_default()),
                    num(e.bracket.0),
                    num(e.bracket.1),
                    num(e.det_residual),
                    cell(e.even_order),
                ]);
            }
            t
        }
        SpectrumTable::Scan => {
            let mut t = Table::new(&["lambda", "factor", "re", "im", "signal"]);
            for s in &res.scan {
                t.push(vec![num(s.lambda), cell(json(&s.factor).as_str().unwrap_or_default()), num(s.re), num(s.im), num(s.signal)]);
            }
            t
        }
    };
    let diagnostics = res.advisories.iter().map(|a| json(a).to_string()).collect();
    let mut outputs = json(&res);
    outputs["context"] = dimensions(&ctx);
    Ok(Report {
        inputs: json!({"spec": r.file, "bc": bc_file, "range": [lo, hi], "points": args.points, "tol": args.tol}),
        outputs,
        diagnostics,
        table,
    })
}

pub fn discreteness(args: &DiscretenessArgs) -> Result<Report, CliError> {
    let coeff = match &args.a {
        Some(text) => parse_series(text)?,
        None => AnalyticSeries::one(),
    };
    let rep = discreteness_criterion(args.m, args.p, &coeff)?;
    let mut table = Table::new(&["x", "series", "quadrature"]);
    for s in &rep.samples {
        table.push(vec![num(s.x), num(s.series), s.quadrature.map(num).unwrap_or_default()]);
    }
    let mut outputs = json(&rep);
    outputs["criterion_zero"] = json!(rep.closed_form_zero);
    let mut diagnostics = Vec::new();
    if rep.limit_estimate.is_none() {
        diagnostics.push("the criterion integral diverges at 0".into());
    }
    Ok(Report { inputs: json!({"m": args.m, "order": args.p, "a": args.a}), outputs, diagnostics, table })
}

pub fn sweep_grid(args: &SweepArgs) -> Result<Report, CliError> {
    let ms: Vec<usize> = (1..=args.m_max).collect();
    let rows = sweep(&ms, mode(args.sequential))?;
    let mismatches = rows.iter().filter(|r| !r.matches).count();
    let mut table = Table::new(&["m", "p", "q", "n_formula", "n_counted", "d1", "d2", "matches"]);
    for r in &rows {
        table.push(vec![cell(r.m), cell(r.p), cell(r.q), cell(r.n_formula), cell(r.n_counted), cell(r.d1), cell(r.d2), cell(r.matches)]);
    }
    let diagnostics = rows
        .iter()
        .filter(|r| !r.matches)
        .map(|r| format!("m={} p={} q={}: formula {} counted {}", r.m, r.p, r.q, r.n_formula, r.n_counted))
        .collect();
    Ok(Report {
        inputs: json!({"m_max": args.m_max, "sequential": args.sequential}),
        outputs: json!({"rows": rows, "cases": rows.len(), "mismatches": mismatches}),
        diagnostics,
        table,
    })
}
