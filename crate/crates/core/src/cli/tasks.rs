use std::f64::consts::PI;

use serde::Serialize;
use serde_json::json;

use super::config::*;
use super::output::{radius_tag, Cell, OutputDir, Table};
use super::svg::{export_svg, Dataset, Layer, Style};
use crate::convdiff::{cd_analytic_spectrum, cd_assemble, cd_eigs, cd_fredholm_boundary, cd_sigma_min, ConvDiffProblem};
use crate::discretize::{assemble_system_operator, PolarGrid, Robin, SparseOperator};
use crate::kinetics::ReactionModel;
use crate::linalg::{eigs_shift_invert_with, EigsOptions};
use crate::spatial::{
    absolute_spectrum, fredholm_curves, select_weight, spatial_spectrum, spectral_gap, AwtContext, SpectralCurve,
    TraceOptions, WeightPlan,
};
use crate::spiral::{
    bootstrap_grid, bootstrap_time_evolution, condition_table, linearization, pseudospectrum_field, spiral_spectrum,
    solve_spiral_with, transfer_field, PseudoOptions, SpiralGuess, SpiralSolution, Window,
};
use crate::wavetrain::{
    check_admissibility, dispersion_curve, group_velocity, ring_guess, solve_wavetrain, solve_wavetrain_at_frequency,
    RingSimulation, WaveTrain,
};
use crate::{Error, Result, C64};

/// Curves traced from the far-field wave train, and the selected weight.
pub struct CurveSet {
    pub abs: Option<SpectralCurve>,
    pub fb: Vec<(f64, SpectralCurve)>,
    pub weight: Option<WeightPlan>,
}

impl CurveSet {
    fn fb_at(&self, eta: f64) -> Option<&SpectralCurve> {
        self.fb.iter().find(|(e, _)| (e - eta).abs() <= 1e-12 * (1.0 + eta.abs())).map(|(_, c)| c)
    }
}

/// State shared between tasks of one run.
pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub model: ReactionModel,
    pub wavetrain: Option<WaveTrain>,
    pub spirals: Vec<SpiralSolution>,
    pub curves: Option<CurveSet>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self> {
        Ok(Self { cfg, model: cfg.model.build()?, wavetrain: None, spirals: Vec::new(), curves: None })
    }

    fn selected_eta(&self) -> Option<f64> {
        self.curves.as_ref().and_then(|c| c.weight.as_ref()).and_then(|w| w.eta)
    }

    fn spiral(&self, r: f64) -> Result<&SpiralSolution> {
        self.spirals
            .iter()
            .find(|s| (s.grid.radius() - r).abs() <= 1e-9 * r)
            .ok_or_else(|| Error::Config(format!("no spiral was solved at R = {r}")))
    }

    fn largest(&self) -> Result<&SpiralSolution> {
        self.spirals.last().ok_or_else(|| Error::Config("no spiral solved".into()))
    }
}

pub fn execute(task: &Task, ctx: &mut Context, out: &mut OutputDir) -> Result<()> {
    match task {
        Task::ConvDiff(t) => convdiff(t, out),
        Task::WaveTrain(t) => wavetrain(t, ctx, out),
        Task::SpiralSolve(t) => spiral_solve(t, ctx, out),
        Task::Curves(t) => curves(t, ctx, out),
        Task::SpiralEigs(t) => spiral_eigs(t, ctx, out),
        Task::SpiralCond(t) => spiral_cond(t, ctx, out),
        Task::SpiralPseudo(t) => spiral_pseudo(t, ctx, out),
    }
}

fn log(task: &str, msg: impl AsRef<str>) {
    eprintln!("[{task}] {}", msg.as_ref());
}

fn write_svg(out: &mut OutputDir, task: &str, name: &str, data: &Dataset) -> Result<()> {
    out.write_bytes(task, name, export_svg(data, &Style::default()).as_bytes())
}

fn xy(z: &[C64]) -> Vec<(f64, f64)> {
    z.iter().map(|z| (z.re, z.im)).collect()
}

fn curve_layer(label: &str, curve: &SpectralCurve) -> Layer {
    Layer::Lines { label: label.into(), lines: curve.branches.iter().map(|b| xy(&b.points)).collect() }
}

/// Greedy nearest pairing of `a` against `b`; each `b` is used once.
fn pair_nearest(a: &[C64], b: &[C64]) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> =
        a.iter().enumerate().flat_map(|(i, x)| b.iter().enumerate().map(move |(j, y)| ((x - y).norm(), i, j))).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut out = vec![None; a.len()];
    let mut used = vec![false; b.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used[j] {
            out[i] = Some(j);
            used[j] = true;
        }
    }
    out
}

/// `S A S^{-1}` for the diagonal `S = diag(exp(eta x_i))` on a uniform grid.
fn conjugate_uniform(a: &SparseOperator, eta: f64, h: f64) -> SparseOperator {
    a.map_entries(|i, j, v| v * (eta * h * (i as f64 - j as f64)).exp())
}

fn convdiff(t: &ConvDiffTask, out: &mut OutputDir) -> Result<()> {
    const NAME: &str = "convdiff";
    if !t.spectra.is_empty() {
        let mut table = Table::new(&["R", "eta", "re_lambda", "im_lambda", "residual"]);
        let mut layers = Vec::new();
        let mut etas: Vec<f64> = Vec::new();
        for s in &t.spectra {
            let p = ConvDiffProblem::new(t.c, s.radius, t.h, s.eta)?;
            let r = cd_eigs(&p, s.k, s.shift, s.tol)?;
            log(NAME, format!("R = {} eta = {}: {} eigenvalues", s.radius, s.eta, r.eigenvalues.len()));
            for (z, res) in r.eigenvalues.iter().zip(&r.residuals) {
                table.row(&[s.radius.into(), s.eta.into(), z.re.into(), z.im.into(), (*res).into()]);
            }
            layers.push(Layer::Points { label: format!("R = {}, eta = {}", s.radius, s.eta), points: xy(&r.eigenvalues) });
            if !etas.contains(&s.eta) {
                etas.push(s.eta);
            }
        }
        let ells: Vec<f64> = (0..=120).map(|i| -1.2 + 0.02 * i as f64).collect();
        for &eta in &etas {
            let fb = cd_fredholm_boundary(t.c, eta, &ells);
            layers.push(Layer::Lines { label: format!("Fredholm boundary, eta = {eta}"), lines: vec![xy(&fb)] });
        }
        let end = -0.25 * t.c * t.c;
        layers.push(Layer::Lines { label: "absolute spectrum".into(), lines: vec![vec![(end - 1.5, 0.0), (end, 0.0)]] });
        out.write_csv(NAME, "convdiff_spectra.csv", table)?;
        let data = Dataset { title: format!("convection-diffusion, c = {}", t.c), x_label: "Re lambda".into(), y_label: "Im lambda".into(), layers };
        write_svg(out, NAME, "convdiff_spectra.svg", &data)?;
    }
    if let Some(rs) = &t.resolvent {
        let mut table = Table::new(&["R", "eta", "re_lambda", "im_lambda", "sigma_min"]);
        for &eta in &rs.etas {
            for &r in &rs.radii {
                let p = ConvDiffProblem::new(t.c, r, t.h, eta)?;
                let s = cd_sigma_min(&p, rs.lambda)?;
                table.row(&[r.into(), eta.into(), rs.lambda.re.into(), rs.lambda.im.into(), s.into()]);
            }
        }
        out.write_csv(NAME, "convdiff_sigma.csv", table)?;
    }
    if let Some(sim) = &t.similarity {
        let mut table = Table::new(&["R", "eta", "index", "re_weighted", "im_weighted", "re_unweighted", "im_unweighted", "analytic"]);
        let base = cd_assemble(&ConvDiffProblem::new(t.c, sim.radius, t.h, 0.0)?)?;
        let opts = EigsOptions { k: sim.k, tol: 1e-12, ..Default::default() };
        let reference = eigs_shift_invert_with(&base, &opts)?;
        let exact = cd_analytic_spectrum(t.c, sim.radius, sim.k);
        for &eta in &sim.etas {
            let weighted = eigs_shift_invert_with(&conjugate_uniform(&base, eta, t.h), &opts)?;
            let pairs = pair_nearest(&weighted.eigenvalues, &reference.eigenvalues);
            for (i, (z, j)) in weighted.eigenvalues.iter().zip(pairs).enumerate() {
                let u = j.map(|j| reference.eigenvalues[j]);
                table.row(&[
                    sim.radius.into(),
                    eta.into(),
                    i.into(),
                    z.re.into(),
                    z.im.into(),
                    u.map(|u| u.re).into(),
                    u.map(|u| u.im).into(),
                    exact.get(i).copied().into(),
                ]);
            }
        }
        out.write_csv(NAME, "convdiff_similarity.csv", table)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GroupVelocity {
    fine: f64,
    coarse: f64,
    error: f64,
}

fn wavetrain(t: &WaveTrainTask, ctx: &mut Context, out: &mut OutputDir) -> Result<()> {
    const NAME: &str = "wavetrain";
    let guess = ring_guess(&ctx.model, t.k, &t.ring)?;
    let wt = solve_wavetrain(&ctx.model, t.k, &guess)?;
    log(NAME, format!("k = {} omega = {} residual = {:e}", wt.k, wt.omega, wt.residual));
    let adm = check_admissibility(&wt, &t.probes)?;
    let (fine, coarse, error) = group_velocity(&wt, t.dk)?;
    let summary = json!({
        "k": wt.k,
        "omega": wt.omega,
        "m": wt.m,
        "residual": wt.residual,
        "refined_residual": wt.refined_residual(2 * wt.m)?,
        "newton_iterations": wt.newton_iterations,
        "admissibility": adm,
        "admissible": adm.admissible(),
        "group_velocity": GroupVelocity { fine, coarse, error },
    });
    out.write_json(NAME, "wavetrain.json", &summary)?;
    let nc = wt.n_components();
    let header: Vec<String> = std::iter::once("phi".to_string()).chain((0..nc).map(|c| format!("u{c}"))).collect();
    let mut table = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for j in 0..wt.m {
        let mut row = vec![Cell::F(2.0 * PI * j as f64 / wt.m as f64)];
        row.extend(wt.state(j).into_iter().map(Cell::F));
        table.row(&row);
    }
    out.write_csv(NAME, "wavetrain_profile.csv", table)?;
    if let Some(d) = &t.dispersion {
        let curve = dispersion_curve(&wt, (d.k_min, d.k_max), d.ds)?;
        let mut table = Table::new(&["k", "omega"]);
        for &(k, w) in &curve.samples {
            table.row(&[k.into(), w.into()]);
        }
        out.write_csv(NAME, "dispersion.csv", table)?;
        let data = Dataset {
            title: "nonlinear dispersion relation".into(),
            x_label: "k".into(),
            y_label: "omega".into(),
            layers: vec![
                Layer::Lines { label: "omega_nl(k)".into(), lines: vec![curve.samples.clone()] },
                Layer::Points { label: "wave train".into(), points: vec![(wt.k, wt.omega)] },
            ],
        };
        write_svg(out, NAME, "dispersion.svg", &data)?;
    }
    ctx.wavetrain = Some(wt);
    Ok(())
}

fn spiral_solve(t: &SpiralSolveTask, ctx: &mut Context, out: &mut OutputDir) -> Result<()> {
    const NAME: &str = "spiral.solve";
    let first = PolarGrid::new(t.radii[0], t.h_r, t.n_theta)?;
    let coarse = bootstrap_grid(&first, t.bootstrap.h_r)?;
    let boot = bootstrap_time_evolution(&ctx.model, &coarse, t.bootstrap.steps, t.bootstrap.dt)?;
    log(NAME, format!("bootstrap omega = {} r2 = {}", boot.omega, boot.phase_fit_r2));
    out.write_json(
        NAME,
        "bootstrap.json",
        &json!({
            "R": coarse.radius(),
            "h_r": coarse.h_r(),
            "n_theta": coarse.n_theta(),
            "steps": t.bootstrap.steps,
            "dt": t.bootstrap.dt,
            "omega": boot.omega,
            "phase_fit_r2": boot.phase_fit_r2,
            "reflected": boot.reflected,
        }),
    )?;
    let mut guess: SpiralGuess = boot.into();
    let mut summary = Table::new(&["R", "omega", "k_far", "residual", "newton_iterations"]);
    ctx.spirals.clear();
    for &r in &t.radii {
        if let Some(prev) = ctx.spirals.last() {
            guess = prev.extended(r)?;
        }
        let grid = PolarGrid::new(r, t.h_r, t.n_theta)?;
        let s = solve_spiral_with(&ctx.model, &grid, &guess, Robin::NEUMANN, &t.newton)?;
        log(NAME, format!("R = {r}: omega = {} k_far = {} residual = {:e} after {} steps", s.omega, s.k_far, s.residual, s.newton_iterations));
        summary.row(&[r.into(), s.omega.into(), s.k_far.into(), s.residual.into(), s.newton_iterations.into()]);
        let tag = radius_tag(r);
        let field_file = t.fields.then(|| format!("spiral_R{tag}.csv"));
        out.write_json(
            NAME,
            &format!("spiral_R{tag}.json"),
            &json!({
                "R": r,
                "h_r": t.h_r,
                "n_theta": t.n_theta,
                "omega": s.omega,
                "k_far": s.k_far,
                "residual": s.residual,
                "newton_iterations": s.newton_iterations,
                "n_components": s.profile.n_components(),
                "field": field_file,
            }),
        )?;
        if let Some(file) = field_file {
            let nc = s.profile.n_components();
            let header: Vec<String> = ["r", "phi"].iter().map(|s| s.to_string()).chain((0..nc).map(|c| format!("u{c}"))).collect();
            let mut table = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
            for p in 0..s.grid.n_nodes() {
                let mut row = vec![Cell::F(s.grid.node_r(p)), Cell::F(s.grid.node_phi(p))];
                row.extend(s.profile.node(p).iter().map(|v| Cell::F(*v)));
                table.row(&row);
            }
            out.write_csv(NAME, &file, table)?;
        }
        ctx.spirals.push(s);
    }
    out.write_csv(NAME, "spiral_solve.csv", summary)?;
    Ok(())
}

fn curves(t: &CurvesTask, ctx: &mut Context, out: &mut OutputDir) -> Result<()> {
    const NAME: &str = "curves";
    let wt = match t.source {
        CurveSource::WaveTrain => ctx.wavetrain.clone().ok_or_else(|| Error::Config("no wave train".into()))?,
        CurveSource::Spiral => {
            let s = ctx.largest()?;
            let guess = ring_guess(&ctx.model, s.k_far, &RingSimulation::default())?;
            solve_wavetrain_at_frequency(&ctx.model, s.omega, &guess)?
        }
    };
    log(NAME, format!("far-field train k = {} omega = {}", wt.k, wt.omega));
    out.write_json(
        NAME,
        "curves_wavetrain.json",
        &json!({ "source": t.source, "k": wt.k, "omega": wt.omega, "residual": wt.residual }),
    )?;
    let fine = AwtContext::new(&wt)?;
    let coarse = AwtContext::with_resolution(&wt, t.m_coarse)?;

    let wcfg = &ctx.cfg.weight;
    let weight = spatial_spectrum(&wt, wcfg.lambda).and_then(|s| select_weight(&spectral_gap(&s), wcfg.policy));
    let needs_weight = ctx.cfg.tasks.iter().any(uses_selected);
    let weight = match weight {
        Ok(w) => Some(w),
        Err(e) if needs_weight => return Err(e),
        Err(e) => {
            log(NAME, format!("no weight selected: {e}"));
            None
        }
    };
    let selected = weight.as_ref().and_then(|w| w.eta);

    let abs = match &t.abs {
        Some(a) => {
            let w = wt.omega;
            let opts = TraceOptions {
                steps: a.steps,
                max_step: a.max_step,
                re_min: a.re_window[0],
                re_max: a.re_window[1],
                im_min: (a.im_periods[0] - a.margin) * w,
                im_max: (a.im_periods[1] + a.margin) * w,
                ..Default::default()
            };
            let range = (a.im_periods[0] * w, a.im_periods[1] * w);
            let curve = absolute_spectrum(&coarse, &fine, &a.re_lines, range, a.im_step, &opts)?;
            log(NAME, format!("absolute spectrum: {} branches, {} points", curve.branches.len(), curve.n_points()));
            let mut table = Table::new(&["branch", "param", "re_lambda", "im_lambda"]);
            for (b, br) in curve.branches.iter().enumerate() {
                for (z, g) in br.points.iter().zip(&br.params) {
                    table.row(&[b.into(), (*g).into(), z.re.into(), z.im.into()]);
                }
            }
            out.write_csv(NAME, "abs.csv", table)?;
            Some(curve)
        }
        None => None,
    };

    let mut fb = Vec::new();
    if let Some(f) = &t.fredholm {
        let half = 0.5 * f.periods * wt.k;
        let gammas: Vec<f64> = (0..f.samples).map(|i| -half + 2.0 * half * i as f64 / (f.samples - 1) as f64).collect();
        let mut table = Table::new(&["eta", "branch", "gamma", "re_lambda", "im_lambda"]);
        for choice in &f.etas {
            let eta = choice.resolve(selected)?;
            let curve = fredholm_curves(&fine, eta, &gammas, f.branches)?;
            for (b, br) in curve.branches.iter().enumerate() {
                for (z, g) in br.points.iter().zip(&br.params) {
                    table.row(&[eta.into(), b.into(), (*g).into(), z.re.into(), z.im.into()]);
                }
            }
            fb.push((eta, curve));
        }
        out.write_csv(NAME, "fb.csv", table)?;
    }

    if let Some(w) = &weight {
        let dist = abs.as_ref().map(|c| c.distance(w.lambda));
        out.write_json(
            NAME,
            "weight.json",
            &json!({ "lambda": w.lambda, "policy": wcfg.policy, "j0": w.j0, "eta": w.eta, "warning": w.warning, "dist_abs": dist }),
        )?;
    }

    let mut layers = Vec::new();
    if let Some(c) = &abs {
        layers.push(curve_layer("absolute spectrum", c));
    }
    for (eta, c) in &fb {
        layers.push(curve_layer(&format!("Fredholm boundary, eta = {eta:.4}"), c));
    }
    if let Some(w) = &weight {
        layers.push(Layer::Points { label: "weight selection lambda".into(), points: vec![(w.lambda.re, w.lambda.im)] });
    }
    let data = Dataset {
        title: format!("spectral curves of the wave train, k = {:.4}", wt.k),
        x_label: "Re lambda".into(),
        y_label: "Im lambda".into(),
        layers,
    };
    write_svg(out, NAME, "curves.svg", &data)?;
    ctx.curves = Some(CurveSet { abs, fb, weight });
    Ok(())
}

fn uses_selected(task: &Task) -> bool {
    let sel = |w: &WeightChoice| matches!(w, WeightChoice::Selected { .. });
    match task {
        Task::SpiralEigs(e) => e.runs.iter().any(|r| sel(&r.eta)),
        Task::SpiralCond(c) => c.etas.iter().any(sel),
        Task::SpiralPseudo(p) => sel(&p.eta),
        Task::Curves(c) => c.fredholm.as_ref().is_some_and(|f| f.etas.iter().any(sel)),
        _ => false,
    }
}

fn spiral_eigs(t: &SpiralEigsTask, ctx: &mut Context, out: &mut OutputDir) -> Result<()> {
    const NAME: &str = "spiral.eigs";
    let mut summary = Table::new(&[
        "run",
        "R",
        "eta",
        "re_shift",
        "im_shift",
        "k",
        "found",
        "converged",
        "median_dist_abs",
        "median_dist_fb",
        "re_rotation",
        "im_rotation",
        "rotation_correlation",
    ]);
    let abs = ctx.curves.as_ref().and_then(|c| c.abs.as_ref());
    for (i, run) in t.runs.iter().enumerate() {
        let eta = run.eta.resolve(ctx.selected_eta())?;
        let shift = run.shift.unwrap_or(ctx.cfg.weight.lambda);
        let radii: Vec<f64> = match &run.radii {
            Some(r) => r.clone(),
            None => ctx.spirals.iter().map(|s| s.grid.radius()).collect(),
        };
        let fb = ctx.curves.as_ref().and_then(|c| c.fb_at(eta));
        let mut layers = Vec::new();
        for &r in &radii {
            let s = ctx.spiral(r)?;
            let opts = EigsOptions { k: run.k, shift, tol: run.tol, seed: ctx.cfg.seed, vectors: run.vectors, ..Default::default() };
            let rep = spiral_spectrum(s, eta, &opts, abs, fb)?;
            log(
                NAME,
                format!(
                    "run {i} R = {r} eta = {eta}: {} eigenvalues, median distance to the absolute spectrum {:?}",
                    rep.eigen.eigenvalues.len(),
                    rep.median_dist_abs()
                ),
            );
            let mut table = Table::new(&["re_lambda", "im_lambda", "residual", "dist_abs", "dist_fb"]);
            for (j, z) in rep.eigen.eigenvalues.iter().enumerate() {
                let pick = |d: &Option<Vec<f64>>| d.as_ref().map(|d| d[j]);
                table.row(&[z.re.into(), z.im.into(), rep.eigen.residuals[j].into(), pick(&rep.dist_abs).into(), pick(&rep.dist_fb).into()]);
            }
            out.write_csv(NAME, &format!("spectrum_run{i}_R{}.csv", radius_tag(r)), table)?;
            let rot = rep.rotation_mode;
            summary.row(&[
                i.into(),
                r.into(),
                eta.into(),
                shift.re.into(),
                shift.im.into(),
                run.k.into(),
                rep.eigen.eigenvalues.len().into(),
                (rep.eigen.converged as usize).into(),
                rep.median_dist_abs().into(),
                rep.median_dist_fb().into(),
                rot.map(|m| m.lambda.re).into(),
                rot.map(|m| m.lambda.im).into(),
                rot.map(|m| m.correlation).into(),
            ]);
            layers.push(Layer::Points { label: format!("R = {r}"), points: xy(&rep.eigen.eigenvalues) });
        }
        if let Some(c) = abs {
            layers.push(curve_layer("absolute spectrum", c));
        }
        if let Some(c) = fb {
            layers.push(curve_layer("Fredholm boundary", c));
        }
        let data = Dataset {
            title: format!("spiral spectra, eta = {eta:.4}"),
            x_label: "Re lambda".into(),
            y_label: "Im lambda".into(),
            layers,
        };
        write_svg(out, NAME, &format!("eigs_run{i}.svg"), &data)?;
    }
    out.write_csv(NAME, "eigs_summary.csv", summary)?;

    if let Some(sim) = &t.similarity {
        let base = ctx.spirals.first().ok_or_else(|| Error::Config("no spiral solved".into()))?;
        let grid = PolarGrid::new(sim.radius, base.grid.h_r(), base.grid.n_theta())?;
        let field = transfer_field(&base.profile, &base.grid, &grid, None)?;
        let spectrum = |eta: f64| -> Result<Vec<C64>> {
            let op = assemble_system_operator(&ctx.model, &grid, &field, base.omega, eta, Robin::NEUMANN)?;
            let opts = EigsOptions { k: sim.k, shift: sim.shift, tol: sim.tol, seed: ctx.cfg.seed, ..Default::default() };
            let mut z = eigs_shift_invert_with(&op, &opts)?.eigenvalues;
            z.truncate(sim.compare);
            Ok(z)
        };
        let reference = spectrum(0.0)?;
        let mut table = Table::new(&["R", "eta", "index", "re_weighted", "im_weighted", "re_unweighted", "im_unweighted"]);
        for &eta in &sim.etas {
            let z = spectrum(eta)?;
            let pairs = pair_nearest(&z, &reference);
            for (i, (w, j)) in z.iter().zip(pairs).enumerate() {
                let u = j.map(|j| reference[j]);
                table.row(&[sim.radius.into(), eta.into(), i.into(), w.re.into(), w.im.into(), u.map(|u| u.re).into(), u.map(|u| u.im).into()]);
            }
        }
        out.write_csv(NAME, "similarity_2d.csv", table)?;
    }
    Ok(())
}

fn spiral_cond(t: &SpiralCondTask, ctx: &mut Context, out: &mut OutputDir) -> Result<()> {
    const NAME: &str = "spiral.cond";
    let radii = match &t.radii {
        Some(r) => r.clone(),
        None => vec![ctx.largest()?.grid.radius()],
    };
    let abs = ctx.curves.as_ref().and_then(|c| c.abs.as_ref());
    let mut table = Table::new(&["R", "eta", "re_lambda", "im_lambda", "log10_kappa", "sigma_min", "dist_abs"]);
    for &r in &radii {
        let s = ctx.spiral(r)?;
        for choice in &t.etas {
            let eta = choice.resolve(ctx.selected_eta())?;
            let op = linearization(s, eta)?;
            for e in condition_table(&op, eta, &t.lambdas, ctx.cfg.workers)? {
                log(NAME, format!("R = {r} eta = {eta} lambda = {}: log10 kappa = {}", e.lambda, e.log10_kappa));
                table.row(&[
                    r.into(),
                    eta.into(),
                    e.lambda.re.into(),
                    e.lambda.im.into(),
                    e.log10_kappa.into(),
                    e.sigma_min.into(),
                    abs.map(|c| c.distance(e.lambda)).into(),
                ]);
            }
        }
    }
    out.write_csv(NAME, "cond.csv", table)
}

fn spiral_pseudo(t: &SpiralPseudoTask, ctx: &mut Context, out: &mut OutputDir) -> Result<()> {
    const NAME: &str = "spiral.pseudo";
    let s = match t.radius {
        Some(r) => ctx.spiral(r)?,
        None => ctx.largest()?,
    };
    let eta = t.eta.resolve(ctx.selected_eta())?;
    let window = t.window.unwrap_or_else(|| Window::around_period(s.omega));
    let opts = PseudoOptions { condition: t.condition, levels: t.levels.clone(), workers: ctx.cfg.workers, tol: 1e-8 };
    let field = pseudospectrum_field(s, eta, &window, &opts)?;
    let missing = field.sigma_min.iter().filter(|v| v.is_none()).count();
    log(NAME, format!("R = {} eta = {eta}: {} points, {missing} failed", s.grid.radius(), field.sigma_min.len()));
    let mut table = Table::new(&["re_lambda", "im_lambda", "sigma_min", "log10_kappa"]);
    for (i, z) in window.points().iter().enumerate() {
        let kappa = field.log10_kappa.as_ref().and_then(|k| k[i]);
        table.row(&[z.re.into(), z.im.into(), field.sigma_min[i].into(), kappa.into()]);
    }
    out.write_csv(NAME, "pseudo.csv", table)?;
    let mut contours = Table::new(&["level", "segment", "re0", "im0", "re1", "im1"]);
    let mut layers = vec![Layer::Heatmap {
        label: "sigma_min".into(),
        xs: window.re_values(),
        ys: window.im_values(),
        values: field.sigma_min.clone(),
    }];
    for c in &field.contours {
        for (j, seg) in c.segments.iter().enumerate() {
            contours.row(&[c.level.into(), j.into(), seg[0].re.into(), seg[0].im.into(), seg[1].re.into(), seg[1].im.into()]);
        }
        layers.push(Layer::Lines {
            label: format!("log10 eps = {}", c.level),
            lines: c.segments.iter().map(|s| xy(s)).collect(),
        });
    }
    out.write_csv(NAME, "pseudo_contours.csv", contours)?;
    if let Some(c) = ctx.curves.as_ref().and_then(|c| c.abs.as_ref()) {
        layers.push(curve_layer("absolute spectrum", c));
    }
    let data = Dataset {
        title: format!("pseudospectrum, R = {}, eta = {eta:.4}", s.grid.radius()),
        x_label: "Re lambda".into(),
        y_label: "Im lambda".into(),
        layers,
    };
    write_svg(out, NAME, "pseudo.svg", &data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_pairing_is_one_to_one() {
        let a = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.1, 0.0)];
        let b = [C64::new(1.05, 0.0), C64::new(0.1, 0.0)];
        assert_eq!(pair_nearest(&a, &b), vec![Some(1), Some(0), None]);
    }

    #[test]
    fn uniform_conjugation_scales_off_diagonals() {
        let a = SparseOperator::from_real_triplets(3, [(0, 1, 1.0), (1, 0, 1.0), (1, 1, -2.0), (2, 1, 1.0)]);
        let c = conjugate_uniform(&a, 0.5, 0.1);
        assert_eq!(c.get(1, 1), C64::new(-2.0, 0.0));
        assert!((c.get(0, 1).re - (-0.05f64).exp()).abs() < 1e-15);
        assert!((c.get(2, 1).re - 0.05f64.exp()).abs() < 1e-15);
    }
}
