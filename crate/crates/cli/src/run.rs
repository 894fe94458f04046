//! One function per subcommand: config in, artifacts out.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use schottkydim::degeneration::{align, build_lift, default_eps_schedule, ell_schedule, headline_experiment, kernel_gap};
use schottkydim::dimension::{boxcount_scales, bowen_continuity_probe, hdim_boxcount, hdim_pressure, Perturbation, PressureResult};
use schottkydim::isometry::LorentzIsometry;
use schottkydim::kernels::{gram_realize, kernel_power, kernel_tree, KernelMatrix, KernelSource};
use schottkydim::mcmullen::mcmullen_family;
use schottkydim::schottky::{Diagnostics, SchottkyRep};
use schottkydim::geometry::WordGeometry;
use schottkydim::tree::{hdim_tree_boundary, tree_stability_constant};

use crate::config::*;
use crate::error::CliError;
use crate::output::{csv_artifact, json_artifact, num, Artifact, Csv};

fn depth_csv(res: &PressureResult) -> Csv {
    let mut c = Csv::new(&["n", "delta_n", "gap"]);
    for r in &res.table {
        c.row(vec![r.n.to_string(), num(r.delta_n), num(r.gap)]);
    }
    c
}

fn diagnostics(rep: &SchottkyRep) -> Result<Diagnostics, CliError> {
    rep.diagnostics().copied().ok_or_else(|| CliError::Numeric { module: "freegroup_schottky", msg: "missing diagnostics".into() })
}

#[derive(Serialize)]
struct DimResult<'a> {
    family: Family,
    theta: Option<f64>,
    diagnostics: Diagnostics,
    bracket_width: f64,
    pressure: &'a PressureResult,
}

pub fn dim(cfg: &DimConfig) -> Result<Vec<Artifact>, CliError> {
    cfg.validate()?;
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let rep = cfg.group().build(tol)?;
    let diag = diagnostics(&rep)?;
    match cfg.method {
        DimMethod::Pressure => {
            let res = hdim_pressure(&rep, cfg.depth.unwrap_or(DEFAULT_DEPTH), tol)?;
            let out = DimResult { family: cfg.family, theta: cfg.theta, diagnostics: diag, bracket_width: res.bracket_width(), pressure: &res };
            Ok(vec![json_artifact(".json", &out), csv_artifact("_depth.csv", depth_csv(&res))])
        }
        DimMethod::Boxcount => {
            let scales = boxcount_scales(&rep, cfg.sample_depth, cfg.scales);
            let bc = hdim_boxcount(&rep, cfg.sample_depth, &scales)?;
            let mut c = Csv::new(&["scale", "count"]);
            for &(e, n) in &bc.counts {
                c.row(vec![num(e), n.to_string()]);
            }
            let out = json!({ "family": cfg.family, "theta": cfg.theta, "diagnostics": diag, "sample_depth": cfg.sample_depth, "boxcount": bc });
            Ok(vec![json_artifact(".json", &out), csv_artifact("_counts.csv", c)])
        }
    }
}

pub fn tree_dim(cfg: &TreeDimConfig) -> Result<Vec<Artifact>, CliError> {
    let tree = cfg.tree().build()?;
    let res = hdim_tree_boundary(&tree, cfg.depth.unwrap_or(DEFAULT_DEPTH), cfg.tol.unwrap_or(DEFAULT_TOL))?;
    let out = json!({
        "rank": tree.rank(),
        "stability_constant": tree_stability_constant(&tree, 8),
        "bracket_width": res.bracket_width(),
        "pressure": res,
    });
    Ok(vec![json_artifact(".json", &out), csv_artifact("_depth.csv", depth_csv(&res))])
}

pub fn sweep(cfg: &SweepConfig) -> Result<Vec<Artifact>, CliError> {
    cfg.validate()?;
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let depth = cfg.depth.unwrap_or(DEFAULT_DEPTH);
    let tree = cfg.tree.build()?;
    let headline = headline_experiment(&cfg.theta_list, depth, tol)?;
    let eps = default_eps_schedule(cfg.eps0, cfg.l_max);
    let family = |theta: f64| mcmullen_family(theta).map(|m| m.rep);
    let ells = ell_schedule(family, &tree, &cfg.theta_list, &eps, cfg.l_max, cfg.s, cfg.subdivision)?;
    let gaps: Vec<f64> = {
        use rayon::prelude::*;
        cfg.theta_list
            .par_iter()
            .map(|&theta| {
                let rep = mcmullen_family(theta).map_err(CliError::schottky)?.rep;
                let plan = build_lift(&tree, &rep, cfg.gap_l, cfg.subdivision)?.with_theta(theta);
                Ok(kernel_gap(&plan, cfg.s)?)
            })
            .collect::<Result<_, CliError>>()?
    };

    let mut hc = Csv::new(&["theta", "r_theta", "delta", "r_delta", "deviation", "delta_two_log"]);
    for r in &headline.rows {
        hc.row(vec![num(r.theta), num(r.r_theta), num(r.delta), num(r.r_delta), num(r.deviation), num(r.delta_two_log)]);
    }
    hc.note("fit_intercept", num(headline.intercept));
    hc.note("fit_slope", num(headline.slope));
    hc.note("fit_r2", num(headline.fit_r2));

    let mut pc = Csv::new(&["x", "y"]);
    for (x, y) in headline.plot_data() {
        pc.row(vec![num(x), num(y)]);
    }
    pc.note("x", "1/|log theta|");
    pc.note("y", "delta_theta |log theta|");

    let mut cols: Vec<String> = ["theta", "r_theta", "ell"].iter().map(|s| s.to_string()).collect();
    cols.extend((0..=cfg.l_max).map(|l| format!("alignment_error_l{l}")));
    let mut ec = Csv::with_columns(cols);
    for (l, e) in eps.iter().enumerate() {
        ec.note(&format!("eps_l{l}"), num(*e));
    }
    for row in &ells {
        let mut cells = vec![num(row.theta), num(row.r_theta), row.ell.to_string()];
        cells.extend(row.reports.iter().map(|r| num(r.alignment_error)));
        ec.row(cells);
    }

    let mut gc = Csv::new(&["theta", "l", "s", "kernel_gap"]);
    for (&theta, &g) in cfg.theta_list.iter().zip(&gaps) {
        gc.row(vec![num(theta), cfg.gap_l.to_string(), num(cfg.s), num(g)]);
    }

    let gap_rows: Vec<_> = cfg.theta_list.iter().zip(&gaps).map(|(t, g)| json!({ "theta": t, "l": cfg.gap_l, "s": cfg.s, "kernel_gap": g })).collect();
    let summary = json!({ "headline": headline, "ell": ells, "kernel_gaps": gap_rows, "eps": eps });
    Ok(vec![
        json_artifact(".json", &summary),
        csv_artifact("_headline.csv", hc),
        csv_artifact("_plot.csv", pc),
        csv_artifact("_ell.csv", ec),
        csv_artifact("_gap.csv", gc),
    ])
}

pub fn embed(cfg: &EmbedConfig) -> Result<Vec<Artifact>, CliError> {
    let m = cfg.validate()?;
    let k = match cfg.kernel {
        KernelKind::Tree => kernel_tree(&m, cfg.s.unwrap_or_default())?,
        KernelKind::Power => kernel_power(&m, cfg.t.unwrap_or_default())?,
        KernelKind::Raw => KernelMatrix::new(m, KernelSource::Raw)?,
    };
    let real = gram_realize(&k)?;
    let n = real.points.first().map_or(0, |p| p.dim());
    let mut cols = vec!["index".to_string()];
    cols.extend((0..=n).map(|i| format!("x{i}")));
    let mut c = Csv::with_columns(cols);
    c.note("rank", real.rank);
    c.note("residual", num(real.residual));
    for (i, p) in real.points.iter().enumerate() {
        let mut cells = vec![i.to_string()];
        cells.extend(p.coords().iter().map(|&x| num(x)));
        c.row(cells);
    }
    Ok(vec![csv_artifact(".csv", c)])
}

pub fn align_cmd(cfg: &AlignConfig) -> Result<Vec<Artifact>, CliError> {
    cfg.validate()?;
    let tree = cfg.tree.build()?;
    let rep = cfg.group().build(cfg.tol.unwrap_or(DEFAULT_TOL))?;
    let mut plan = build_lift(&tree, &rep, cfg.l, cfg.subdivision)?;
    if let Some(t) = cfg.theta {
        plan = plan.with_theta(t);
    }
    let report = align(&plan, cfg.s)?;
    Ok(vec![json_artifact(".json", &report)])
}

/// Random generator directions: boosts and rotations with entries uniform in
/// `[−scale, scale]`.
fn random_directions(rep: &SchottkyRep, scale: f64, seed: u64) -> Vec<nalgebra::DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rep.dim();
    (0..rep.rank())
        .map(|_| {
            let boosts: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..=scale)).collect();
            let mut rot = Vec::new();
            for i in 1..=n {
                for j in i + 1..=n {
                    rot.push(((i, j), rng.random_range(-scale..=scale)));
                }
            }
            LorentzIsometry::algebra_element(n, &boosts, &rot)
        })
        .collect()
}

pub fn probe(cfg: &ProbeConfig, seed: u64) -> Result<Vec<Artifact>, CliError> {
    cfg.validate()?;
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let rep = cfg.group().build(tol)?;
    let dir = match &cfg.perturbation {
        PerturbationSpec::Generators { matrices } => Perturbation::Generators(matrices.iter().map(algebra_matrix).collect::<Result<_, _>>()?),
        PerturbationSpec::Conjugation { matrix } => Perturbation::Conjugation(algebra_matrix(matrix)?),
        PerturbationSpec::Random { scale } => Perturbation::Generators(random_directions(&rep, *scale, seed)),
    };
    let mut eps = vec![0.0];
    eps.extend(cfg.eps.iter().copied().filter(|&e| e != 0.0));
    let rows = bowen_continuity_probe(&rep, &dir, &eps, cfg.depth.unwrap_or(DEFAULT_DEPTH), tol)?;
    let d0 = rows[0].delta;
    let mut c = Csv::new(&["eps", "delta", "bracket_width", "deviation"]);
    for r in &rows {
        c.row(vec![num(r.eps), num(r.delta), num(r.bracket_width), num((r.delta - d0).abs())]);
    }
    Ok(vec![csv_artifact(".csv", c)])
}
