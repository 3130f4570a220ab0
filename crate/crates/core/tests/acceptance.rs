//! Acceptance run: executes the `repro` preset twice and checks every
//! criterion against the files of the first run, using oracles computed
//! here rather than the library's own distance and fitting routines.
//!
//! Prints one `PASS`/`FAIL` line per criterion and exits nonzero on any
//! failure. Setting `SPIRALSPEC_ACCEPTANCE_DIR` to the output of an earlier
//! `--preset repro` run evaluates that directory instead; the determinism
//! check is then reported as `SKIP`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde_json::Value;
use spiralspec::cli::{self, list_files, preset, EXIT_OK};

// tolerances as stated by the acceptance criteria
const C1_MAX_DEV: f64 = 5e-3;
const C2_FB_MEDIAN: f64 = 0.05;
const C2_ABS_MEDIAN: f64 = 0.1;
const C3_REL: f64 = 0.25;
const C4_RATIO: f64 = 2.0;
const C5_DEV: f64 = 1e-6;
const C6_RESIDUAL: f64 = 1e-10;
const C6_EIGENFUNCTION: f64 = 1e-6;
const C6_REL: f64 = 1e-3;
const C7_LAMBDA: f64 = 1e-3;
const C7_CORRELATION: f64 = 0.99;
const C8_DROP: f64 = 5.0;
/// Parameters counted as "near" the traced absolute spectrum in C8.
const C8_NEAR: f64 = 0.3;
const C10_HAUSDORFF: f64 = 1e-2;

type Row = BTreeMap<String, String>;

fn read_csv(dir: &Path, name: &str) -> Vec<Row> {
    let mut rd = csv::Reader::from_path(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    rd.records()
        .map(|r| header.iter().cloned().zip(r.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn f(row: &Row, key: &str) -> f64 {
    row.get(key).unwrap_or_else(|| panic!("no column {key}")).parse().unwrap_or(f64::NAN)
}

fn read_json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn segment_distance(z: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    let t = if len2 == 0.0 { 0.0 } else { ((z - a).re * d.re + (z - a).im * d.im) / len2 };
    (z - (a + d * t.clamp(0.0, 1.0))).norm()
}

/// Traced curve as polylines, one per branch.
struct Polylines(Vec<Vec<C64>>);

impl Polylines {
    fn from_rows(rows: &[Row]) -> Self {
        let mut lines: BTreeMap<i64, Vec<C64>> = BTreeMap::new();
        for r in rows {
            lines.entry(f(r, "branch") as i64).or_default().push(C64::new(f(r, "re_lambda"), f(r, "im_lambda")));
        }
        Self(lines.into_values().collect())
    }

    fn distance(&self, z: C64) -> f64 {
        self.0
            .iter()
            .flat_map(|l| l.windows(2).map(move |w| segment_distance(z, w[0], w[1])))
            .fold(f64::INFINITY, f64::min)
    }

    fn points(&self) -> impl Iterator<Item = C64> + '_ {
        self.0.iter().flatten().copied()
    }
}

/// Distance from `z` to the parabola `-l^2 + i l`: dense scan, then golden
/// section on the best bracket.
fn parabola_distance(z: C64) -> f64 {
    let d = |l: f64| (z - C64::new(-l * l, l)).norm();
    let (lo, hi, n) = (-10.0, 10.0, 20_000);
    let step = (hi - lo) / n as f64;
    let best = (0..=n).map(|i| lo + step * i as f64).min_by(|a, b| d(*a).total_cmp(&d(*b))).unwrap();
    let (mut a, mut b) = (best - step, best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if d(x1) < d(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    d(0.5 * (a + b))
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!("{id:<4} {} {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn run_repro(out: &Path) -> f64 {
    let mut cfg = preset("repro").unwrap();
    cfg.output = out.to_path_buf();
    let t = Instant::now();
    let outcome = cli::run(&cfg).unwrap();
    for rec in &outcome.manifest.tasks {
        eprintln!("  {} {:?} {}", rec.task, rec.status, rec.message.as_deref().unwrap_or(""));
    }
    assert_eq!(outcome.exit_code, EXIT_OK, "repro run had failing tasks");
    t.elapsed().as_secs_f64()
}

fn c1(dir: &Path, rep: &mut Report) {
    let mut got: Vec<f64> = read_csv(dir, "convdiff_spectra.csv")
        .iter()
        .filter(|r| f(r, "R") == 800.0 && f(r, "eta") == 0.5)
        .map(|r| f(r, "re_lambda"))
        .collect();
    got.sort_by(|a, b| b.total_cmp(a));
    let dev = got
        .iter()
        .enumerate()
        .map(|(j, z)| (z - (-0.25 - ((j + 1) as f64 * PI / 800.0).powi(2))).abs())
        .fold(0.0, f64::max);
    rep.line("C1", got.len() == 20 && dev <= C1_MAX_DEV, format!("{} eigenvalues, max deviation {dev:.2e} (<= {C1_MAX_DEV:e})", got.len()));
}

fn c2(dir: &Path, rep: &mut Report) {
    let rows = read_csv(dir, "convdiff_spectra.csv");
    let mut ok = false;
    let mut detail = Vec::new();
    for r in [100.0, 200.0, 800.0] {
        let zs: Vec<C64> = rows
            .iter()
            .filter(|x| f(x, "R") == r && f(x, "eta") == 0.0)
            .map(|x| C64::new(f(x, "re_lambda"), f(x, "im_lambda")))
            .collect();
        let fb = median(zs.iter().map(|&z| parabola_distance(z)).collect());
        // the absolute spectrum is the half-line (-inf, -1/4]
        let abs = median(zs.iter().map(|z| if z.re <= -0.25 { z.im.abs() } else { (z - C64::new(-0.25, 0.0)).norm() }).collect());
        detail.push(format!("R={r}: fb {fb:.3} abs {abs:.3}"));
        if r == 800.0 {
            ok = !zs.is_empty() && fb < C2_FB_MEDIAN && abs > C2_ABS_MEDIAN;
        }
    }
    rep.line("C2", ok, format!("median distances {} (R=800: fb < {C2_FB_MEDIAN}, abs > {C2_ABS_MEDIAN})", detail.join(", ")));
}

fn sigma_series(dir: &Path, eta: f64) -> (Vec<f64>, Vec<f64>) {
    read_csv(dir, "convdiff_sigma.csv")
        .iter()
        .filter(|r| f(r, "eta") == eta)
        .map(|r| (f(r, "R"), f(r, "sigma_min")))
        .unzip()
}

fn c3(dir: &Path, rep: &mut Report) {
    let (rs, sig) = sigma_series(dir, 0.0);
    let ys: Vec<f64> = sig.iter().map(|s| s.ln()).collect();
    let n = rs.len() as f64;
    let (mx, my) = (rs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = rs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / rs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    // nu^2 + nu = lambda at lambda = -0.15; nu_0 is the root nearer zero
    let nu0 = (-1.0 + (1.0f64 - 4.0 * 0.15).sqrt()) / 2.0;
    let rel = (slope + nu0.abs()).abs() / nu0.abs();
    rep.line("C3", rs.len() >= 4 && rel <= C3_REL, format!("slope {slope:.4} vs -|Re nu0| = {:.4}, relative error {rel:.3} (<= {C3_REL})", -nu0.abs()));
}

fn c4(dir: &Path, rep: &mut Report) {
    let (rs, sig) = sigma_series(dir, 0.5);
    let hi = sig.iter().cloned().fold(f64::MIN, f64::max);
    let lo = sig.iter().cloned().fold(f64::MAX, f64::min);
    rep.line("C4", rs.len() >= 4 && hi / lo < C4_RATIO, format!("sigma_min in [{lo:.4e}, {hi:.4e}], ratio {:.4} (< {C4_RATIO})", hi / lo));
}

fn max_pair_deviation(rows: &[Row]) -> f64 {
    rows.iter()
        .map(|r| {
            (C64::new(f(r, "re_weighted"), f(r, "im_weighted")) - C64::new(f(r, "re_unweighted"), f(r, "im_unweighted"))).norm()
        })
        .fold(0.0, f64::max)
}

fn c5(dir: &Path, rep: &mut Report) {
    let one = read_csv(dir, "convdiff_similarity.csv");
    let two = read_csv(dir, "similarity_2d.csv");
    let (d1, d2) = (max_pair_deviation(&one), max_pair_deviation(&two));
    let etas = |rows: &[Row]| {
        let mut e: Vec<f64> = rows.iter().map(|r| f(r, "eta")).collect();
        e.dedup();
        e
    };
    rep.line(
        "C5",
        !one.is_empty() && !two.is_empty() && d1 <= C5_DEV && d2 <= C5_DEV,
        format!("1D R=10 etas {:?}: {d1:.2e}; 2D R=5 etas {:?}: {d2:.2e} (<= {C5_DEV:e})", etas(&one), etas(&two)),
    );
}

fn c6(dir: &Path, rep: &mut Report) {
    let wt = read_json(dir, "wavetrain.json");
    let residual = wt["residual"].as_f64().unwrap();
    let alignment = wt["admissibility"]["alignment"].as_f64().unwrap();
    let nu = wt["admissibility"]["nu_star"][0].as_f64().unwrap();
    let dnu = wt["admissibility"]["dnu_dlambda"][0].as_f64().unwrap();
    let cg = wt["group_velocity"]["fine"].as_f64().unwrap();
    let rel = (dnu * cg + 1.0).abs();
    let ok = residual <= C6_RESIDUAL && 1.0 - alignment <= C6_EIGENFUNCTION && nu.abs() <= C6_EIGENFUNCTION && rel <= C6_REL;
    rep.line(
        "C6",
        ok,
        format!("residual {residual:.2e}, nu {nu:.1e}, 1 - alignment {:.1e}, dnu/dlambda {dnu:.6} vs -1/c_g {:.6} (rel {rel:.1e})", 1.0 - alignment, -1.0 / cg),
    );
}

fn c7(dir: &Path, rep: &mut Report) {
    let row = read_csv(dir, "eigs_summary.csv").into_iter().find(|r| !r["rotation_correlation"].is_empty());
    let Some(r) = row else {
        rep.line("C7", false, "no rotation mode reported".into());
        return;
    };
    let lambda = C64::new(f(&r, "re_rotation"), f(&r, "im_rotation"));
    let corr = f(&r, "rotation_correlation");
    let spiral = read_json(dir, &format!("spiral_R{}.json", r["R"].replace('.', "p")));
    let grid_ok = spiral["h_r"].as_f64() == Some(0.05) && spiral["n_theta"].as_u64() == Some(64) && f(&r, "R") == 25.0;
    let ok = grid_ok && f(&r, "eta") < 0.0 && lambda.norm() <= C7_LAMBDA && corr >= C7_CORRELATION;
    rep.line("C7", ok, format!("R={} eta={}: |lambda| = {:.2e}, correlation {corr:.5}", f(&r, "R"), f(&r, "eta"), lambda.norm()));
}

fn c8_c9(dir: &Path, abs: &Polylines, rep: &mut Report) {
    let eta_sel = read_json(dir, "weight.json")["eta"].as_f64().expect("selected weight");
    let cond = read_csv(dir, "cond.csv");
    let kappa = |r: f64, eta: f64, l: C64| {
        cond.iter()
            .find(|x| f(x, "R") == r && (f(x, "eta") - eta).abs() <= 1e-12 && f(x, "re_lambda") == l.re && f(x, "im_lambda") == l.im)
            .map(|x| f(x, "log10_kappa"))
    };
    let mut lambdas: Vec<C64> = cond.iter().map(|x| C64::new(f(x, "re_lambda"), f(x, "im_lambda"))).collect();
    lambdas.dedup();
    lambdas.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    lambdas.dedup();
    let near: Vec<(C64, f64)> = lambdas.iter().map(|&l| (l, abs.distance(l))).filter(|(_, d)| *d <= C8_NEAR).collect();
    let drops: Vec<(C64, f64)> = near
        .iter()
        .map(|&(l, _)| (l, kappa(75.0, 0.0, l).unwrap_or(f64::NAN) - kappa(75.0, eta_sel, l).unwrap_or(f64::NAN)))
        .collect();
    let cond_ok = !drops.is_empty() && drops.iter().all(|(_, d)| *d >= C8_DROP);

    // median eigenvalue distance to the traced curve, recomputed per run
    let summary = read_csv(dir, "eigs_summary.csv");
    let series = |eta: f64| -> Vec<(f64, f64)> {
        summary
            .iter()
            .filter(|r| (f(r, "eta") - eta).abs() <= 1e-12 && f(r, "k") >= 20.0)
            .map(|r| {
                let name = format!("spectrum_run{}_R{}.csv", r["run"], r["R"].replace('.', "p"));
                let d = read_csv(dir, &name).iter().map(|x| abs.distance(C64::new(f(x, "re_lambda"), f(x, "im_lambda")))).collect();
                (f(r, "R"), median(d))
            })
            .collect()
    };
    let (sel, zero) = (series(eta_sel), series(0.0));
    let decreasing = |s: &[(f64, f64)]| s.len() == 3 && s.windows(2).all(|w| w[1].1 < w[0].1);
    let fmt = |s: &[(f64, f64)]| s.iter().map(|(r, d)| format!("{r}:{d:.3}")).collect::<Vec<_>>().join(" ");
    let ok = cond_ok && decreasing(&sel) && !decreasing(&zero) && zero.len() == 3;
    rep.line(
        "C8",
        ok,
        format!(
            "eta_sel {eta_sel:.4}; R=75 log10 kappa drop near the curve {}; median dist_abs eta_sel [{}] eta=0 [{}]",
            drops.iter().map(|(l, d)| format!("{l}: {d:.1}")).collect::<Vec<_>>().join(", "),
            fmt(&sel),
            fmt(&zero)
        ),
    );

    let over: Vec<(f64, C64, f64)> = cond
        .iter()
        .filter(|x| (f(x, "eta") - eta_sel).abs() <= 1e-12)
        .filter_map(|x| {
            let l = C64::new(f(x, "re_lambda"), f(x, "im_lambda"));
            let r = f(x, "R");
            Some((r, l, kappa(r, 2.0 * eta_sel, l)? - f(x, "log10_kappa")))
        })
        .collect();
    let best = over.iter().cloned().fold(None, |acc: Option<(f64, C64, f64)>, x| match acc {
        Some(a) if a.2 >= x.2 => Some(a),
        _ => Some(x),
    });
    match best {
        Some((r, l, d)) => rep.line("C9", d > 0.0, format!("largest log10 kappa(2 eta_sel) - log10 kappa(eta_sel) = {d:.2} at R={r}, lambda={l}")),
        None => rep.line("C9", false, "no doubled-weight entries".into()),
    }
}

fn c10(dir: &Path, abs: &Polylines, rep: &mut Report) {
    let omega = read_json(dir, "curves_wavetrain.json")["omega"].as_f64().unwrap();
    let shift = C64::new(0.0, omega);
    // curve points in one period window, moved up or down by one period
    let up = abs.points().filter(|z| (0.0..=omega).contains(&z.im)).map(|z| abs.distance(z + shift));
    let down = abs.points().filter(|z| (omega..=2.0 * omega).contains(&z.im)).map(|z| abs.distance(z - shift));
    let counted: Vec<f64> = up.chain(down).collect();
    let h = counted.iter().cloned().fold(0.0, f64::max);
    rep.line("C10", counted.len() > 10 && h <= C10_HAUSDORFF, format!("omega {omega:.6}, Hausdorff distance {h:.2e} over {} points (<= {C10_HAUSDORFF:e})", counted.len()));
}

fn c11(first: &Path, second: Option<&Path>, rep: &mut Report) {
    let Some(second) = second else {
        println!("C11  SKIP evaluating an existing directory; determinism needs two fresh runs");
        return;
    };
    let csvs = |d: &Path| list_files(d).unwrap().into_iter().filter(|p| p.ends_with(".csv")).collect::<Vec<_>>();
    let (a, b) = (csvs(first), csvs(second));
    let differing: Vec<&String> =
        a.iter().filter(|p| std::fs::read(first.join(p)).ok() != std::fs::read(second.join(p)).ok()).collect();
    rep.line("C11", a == b && differing.is_empty() && !a.is_empty(), format!("{} CSV files, {} differ {:?}", a.len(), differing.len(), differing));
}

fn main() {
    // `cargo test -- <filter>` passes arguments; run only when unfiltered
    // or when asked for by name
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let (first, second): (PathBuf, Option<PathBuf>) = match std::env::var_os("SPIRALSPEC_ACCEPTANCE_DIR") {
        Some(dir) => (PathBuf::from(dir), None),
        None => {
            let (a, b) = (tmp.path().join("run1"), tmp.path().join("run2"));
            let t1 = run_repro(&a);
            println!("repro run 1: {t1:.0} s");
            let t2 = run_repro(&b);
            println!("repro run 2: {t2:.0} s");
            (a, Some(b))
        }
    };
    let abs = Polylines::from_rows(&read_csv(&first, "abs.csv"));
    let mut rep = Report { failures: 0 };
    c1(&first, &mut rep);
    c2(&first, &mut rep);
    c3(&first, &mut rep);
    c4(&first, &mut rep);
    c5(&first, &mut rep);
    c6(&first, &mut rep);
    c7(&first, &mut rep);
    c8_c9(&first, &abs, &mut rep);
    c10(&first, &abs, &mut rep);
    c11(&first, second.as_deref(), &mut rep);
    if rep.failures > 0 {
        println!("{} criteria failed", rep.failures);
        std::process::exit(1);
    }
}
