//! Subcommand bodies. Each fills a report in place; a failure that aborts the
//! command comes back as [`Error`] and is mapped to an exit status by the
//! caller, which still prints whatever the report holds.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;

use smp_perturb::expansions::{hitting_expansion, inverse_identity_residuals, order_residuals};
use smp_perturb::generate::random_models;
use smp_perturb::hitting::{finiteness_check, solve_hitting};
use smp_perturb::model::{load_model_with_grid, validate_conditions, validation_grid, DEFAULT_GRID_POINTS};
use smp_perturb::moments::{moment_p, sojourn_moments};
use smp_perturb::root::characteristic_root;
use smp_perturb::verify::{verify_model, EXPANSION_RESIDUAL_TOL, INVERSE_IDENTITY_TOL, ROOT_RESIDUAL_TOL, SOLIDARITY_TOL};
use smp_perturb::{load_model, Error, Result, SemiMarkovModel};

use crate::report::{CheckRow, Record, RunReport};

pub fn validate(report: &mut RunReport, path: &Path, grid_points: usize) -> Result<()> {
    report.input("model", path.display().to_string().as_str());
    report.input("eps_grid", grid_points);
    let model = load_model_with_grid(path, grid_points)?;
    let n = model.n_states();
    for eps in validation_grid(model.eps_max(), grid_points) {
        let kernel = model.eval_kernel(eps)?;
        for i in 1..=n {
            report.outputs.push(Record::new("row_sum", kernel.row_sum(i)).eps(eps).i(i));
        }
    }
    let conditions = validate_conditions(&model);
    for i in 1..=n {
        for j in 0..=n {
            let p = conditions.limiting_jump_probs[i - 1][j];
            report.outputs.push(Record::new("limiting_jump_prob", p).eps(0.0).i(i).j(j));
        }
    }
    for i in 1..=n {
        for j in 1..=n {
            let reach = if conditions.reachable[i - 1][j - 1] { 1.0 } else { 0.0 };
            report.outputs.push(Record::new("reachable", reach).eps(0.0).i(i).j(j));
        }
    }
    if let Some(w) = &conditions.growth_witness {
        report.outputs.push(Record::new("growth_witness", w.phi).eps(0.0).rho(w.beta).i(w.state).j(w.state));
    }
    for (name, holds) in [
        ("condition_a", conditions.a_holds),
        ("condition_b", conditions.b_holds),
        ("condition_c", conditions.c_holds),
    ] {
        report.checks.push(CheckRow::new(name, if holds { 0.0 } else { 1.0 }, 0.0));
    }
    Ok(())
}

pub struct MomentsArgs<'a> {
    pub path: &'a Path,
    pub eps: f64,
    pub rho: f64,
    pub r: usize,
    pub j: usize,
    pub s: Option<usize>,
}

pub fn moments(report: &mut RunReport, args: &MomentsArgs) -> Result<()> {
    report.input("model", args.path.display().to_string().as_str());
    report.input("eps", args.eps);
    report.input("rho", args.rho);
    report.input("r", args.r);
    report.input("j", args.j);
    if let Some(s) = args.s {
        report.input("s", s);
    }
    let model = load_model(args.path)?;
    let n = model.n_states();
    let (eps, rho) = (args.eps, args.rho);

    for r in 0..=args.r {
        let p = moment_p(&model, eps, rho, r as u32, &BTreeSet::new())?;
        for i in 1..=n {
            for j in 0..=n {
                report.outputs.push(Record::new("p", p.get(i, j)).eps(eps).rho(rho).r(r).i(i).j(j));
            }
        }
    }
    let sojourn = sojourn_moments(&model, eps, rho, args.r)?;
    for r in 0..=args.r {
        for i in 1..=n {
            report.outputs.push(Record::new("psi", sojourn.psi[i - 1][r]).eps(eps).rho(rho).r(r).i(i));
            report.outputs.push(Record::new("varphi", sojourn.varphi[i - 1][r]).eps(eps).rho(rho).r(r).i(i));
        }
    }

    let finite = finiteness_check(&model, eps, rho, args.j)?;
    report.outputs.push(Record::new("spectral_radius_proxy", finite.spectral_radius_proxy).eps(eps).rho(rho).j(args.j));
    let occupied: Vec<usize> = args.s.into_iter().collect();
    let solved = solve_hitting(&model, eps, rho, args.j, &occupied, args.r, true)?;
    for r in 0..=args.r {
        for i in 1..=n {
            report.outputs.push(Record::new("phi", solved.phi[r][i - 1]).eps(eps).rho(rho).r(r).i(i).j(args.j));
        }
    }
    for (&s, series) in &solved.omega {
        for (r, v) in series.iter().enumerate() {
            for i in 1..=n {
                report.outputs.push(Record::new("omega", v[i - 1]).eps(eps).rho(rho).r(r).i(i).j(args.j).s(s));
            }
        }
    }
    Ok(())
}

/// Roots at every `eps`. Points that fail are reported and the first failure
/// is returned once the report is complete.
pub fn root(report: &mut RunReport, path: &Path, eps_values: &[f64], reference: usize) -> Result<()> {
    report.input("model", path.display().to_string().as_str());
    report.input("eps", eps_values);
    report.input("reference_state", reference);
    let model = load_model(path)?;
    let results: Vec<_> = eps_values
        .par_iter()
        .map(|&eps| characteristic_root(&model, eps, reference))
        .collect();
    let mut first_err = None;
    for (&eps, res) in eps_values.iter().zip(results) {
        match res {
            Ok(root) => {
                report.outputs.push(Record::new("rho_root", root.rho_root).eps(eps).i(reference));
                for (idx, &r) in root.per_state_roots.iter().enumerate() {
                    report.outputs.push(Record::new("per_state_root", r).eps(eps).i(idx + 1));
                }
                report.outputs.push(Record::new("delta_proxy", root.delta_proxy).eps(eps).i(reference));
                report.checks.push(CheckRow::new(
                    format!("root_residual@eps={eps}"),
                    root.residual.abs(),
                    ROOT_RESIDUAL_TOL,
                ));
                report.checks.push(CheckRow::new(
                    format!("root_solidarity@eps={eps}"),
                    root.solidarity_spread(),
                    SOLIDARITY_TOL,
                ));
            }
            Err(e) => {
                if let Error::NoRoot { delta_proxy, .. } = &e {
                    report.outputs.push(Record::new("delta_proxy", *delta_proxy).eps(eps).i(reference));
                }
                let mut row = CheckRow::new(format!("root_residual@eps={eps}"), f64::INFINITY, ROOT_RESIDUAL_TOL);
                row.detail = Some(e.to_string());
                report.checks.push(row);
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

pub struct ExpandArgs<'a> {
    pub path: &'a Path,
    pub rho: f64,
    pub j: usize,
    pub s: Option<usize>,
    pub k: usize,
}

pub fn expand(report: &mut RunReport, args: &ExpandArgs) -> Result<()> {
    report.input("model", args.path.display().to_string().as_str());
    report.input("rho", args.rho);
    report.input("j", args.j);
    report.input("k", args.k);
    if let Some(s) = args.s {
        report.input("s", s);
    }
    let model = load_model(args.path)?;
    let occupied: Vec<usize> = args.s.into_iter().collect();
    let table = hitting_expansion(&model, args.rho, args.j, &occupied, args.k, true)?;
    let n = model.n_states();
    let rho = args.rho;
    let families = table
        .phi
        .iter()
        .map(|solved| ("phi", None, solved))
        .chain(table.omega.iter().map(|(&s, solved)| ("omega", Some(s), solved)));
    for (quantity, s, solved) in families {
        for (r, series) in solved.solution.iter().enumerate() {
            for (m, coeff) in series.coeffs().iter().enumerate() {
                for i in 1..=n {
                    let mut rec = Record::new(quantity, coeff[i - 1]).rho(rho).r(r).n(m).i(i).j(args.j);
                    if let Some(s) = s {
                        rec = rec.s(s);
                    }
                    report.outputs.push(rec);
                }
            }
        }
        let label = match s {
            Some(s) => format!("{quantity}_{s}"),
            None => quantity.to_owned(),
        };
        for (r, row) in order_residuals(&table, solved).into_iter().enumerate() {
            let worst = row.into_iter().fold(0.0, f64::max);
            report.checks.push(CheckRow::new(format!("{label}_residual_r{r}"), worst, EXPANSION_RESIDUAL_TOL));
        }
    }
    let identity = inverse_identity_residuals(&table.taboo_p[0], &table.u)
        .into_iter()
        .fold(0.0, f64::max);
    report.checks.push(CheckRow::new("inverse_identity", identity, INVERSE_IDENTITY_TOL));
    Ok(())
}

pub enum VerifySource<'a> {
    File(&'a Path),
    Random { seed: u64, count: usize },
}

pub fn verify(report: &mut RunReport, source: VerifySource, k: usize) -> Result<()> {
    let models: Vec<SemiMarkovModel> = match source {
        VerifySource::File(path) => {
            report.input("model", path.display().to_string().as_str());
            vec![load_model(path)?]
        }
        VerifySource::Random { seed, count } => {
            report.input("seed", seed);
            report.input("count", count);
            random_models(seed, count)
        }
    };
    report.input("k", k);
    let per_model: Vec<_> = models.par_iter().map(|m| verify_model(m, k)).collect();
    for (model, checks) in models.iter().zip(per_model) {
        let passed = checks.iter().filter(|c| c.pass).count();
        report.outputs.push(Record::new("checks_passed", passed as f64).model(model.label()));
        report.outputs.push(Record::new("checks_run", checks.len() as f64).model(model.label()));
        report
            .checks
            .extend(checks.into_iter().map(|c| CheckRow::from_check(Some(model.label()), c)));
    }
    Ok(())
}

/// Smallest grid accepted by the model loader.
pub const MIN_GRID_POINTS: usize = DEFAULT_GRID_POINTS;
