//! One function per subcommand. Each writes its files into the output dir
//! and says whether the invariants it checks held.

use crate::config::RunConfig;
use crate::output::{fmt17, write_json, OutDir, Table};
use crate::CliError;
use dnls_core::acceptance::{self, Outcome};
use dnls_core::backlund::{self, arg_lambda, default_probes, BacklundReport, EigenConfig};
use dnls_core::evolve::{self, EvolveConfig};
use dnls_core::fredholm::{expansion_coeffs, ray_scan, Backend, ExpansionFit};
use dnls_core::jost::{a_ode, scan, SpectralPoint};
use dnls_core::spectrum::{angle_bound_check, default_box, locate, ray_count, zero_location_bound, EigenvalueSet, Rect, ZeroLocationReport};
use dnls_core::{ConservedSet, Field, JostConfig};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug)]
pub struct Report {
    pub files: Vec<PathBuf>,
    /// False when a checked invariant failed.
    pub ok: bool,
    pub summary: String,
}

fn cplx(v: C64) -> [String; 2] {
    [fmt17(v.re), fmt17(v.im)]
}

pub fn cmd_scatter(cfg: &RunConfig, out: &OutDir) -> Result<Report, CliError> {
    let f = cfg.field()?;
    let s = &cfg.scatter;
    let lambdas: Vec<[f64; 2]> = if s.lambdas.is_empty() {
        if s.real_count == 0 {
            return Err(CliError::Config("scatter.real_count must be positive".into()));
        }
        let step = if s.real_count > 1 { (s.real_max - s.real_min) / (s.real_count - 1) as f64 } else { 0.0 };
        (0..s.real_count).map(|k| [s.real_min + step * k as f64, 0.0]).collect()
    } else {
        s.lambdas.clone()
    };
    let points = lambdas.iter().map(|l| SpectralPoint::from_lambda(C64::new(l[0], l[1]))).collect::<Result<Vec<_>, _>>()?;
    let samples = scan(&f, &points, &s.jost, cfg.exec())?;
    let mut t = Table::new(["lambda_re", "lambda_im", "a_re", "a_im", "b_re", "b_im", "method", "residual"]);
    for p in &samples {
        let mut row: Vec<String> = cplx(p.lambda.lambda).into();
        row.extend(cplx(p.a));
        match p.b {
            Some(b) => row.extend(cplx(b)),
            None => row.extend([String::new(), String::new()]),
        }
        row.push(p.method.as_str().into());
        row.push(fmt17(p.residual));
        t.push(row);
    }
    let path = out.file("scatter.csv");
    t.write(&path)?;
    Ok(Report { files: vec![path], ok: true, summary: format!("{} scattering samples", samples.len()) })
}

#[derive(Serialize)]
struct FitReport<'a> {
    momentum: f64,
    energy: f64,
    /// iP/4 and -iE/8, the values E1 and E2 should take.
    e1_expected: C64,
    e2_expected: C64,
    e1_relative_error: f64,
    e2_relative_error: f64,
    fit: &'a ExpansionFit,
}

fn rel(a: C64, b: C64) -> f64 {
    if b.norm() == 0.0 {
        a.norm()
    } else {
        (a - b).norm() / b.norm()
    }
}

pub fn cmd_detscan(cfg: &RunConfig, out: &OutDir) -> Result<Report, CliError> {
    let f = cfg.field()?;
    let d = &cfg.detscan;
    if d.nodes < 1 || !(d.rho_min > 0.0 && d.rho_max >= d.rho_min) {
        return Err(CliError::Config("detscan needs nodes >= 1 and 0 < rho_min <= rho_max".into()));
    }
    let rhos: Vec<f64> =
        (0..d.nodes).map(|k| if d.nodes == 1 { d.rho_min } else { d.rho_min * (d.rho_max / d.rho_min).powf(k as f64 / (d.nodes - 1) as f64) }).collect();
    let rows = if f.is_zero() { vec![] } else { ray_scan(&f, d.theta, &rhos, d.n_modes, cfg.exec())? };
    let mut t = Table::new(["rho", "log_a_re", "log_a_im", "det2_abs", "link_residual"]);
    for r in &rows {
        let mut row = vec![fmt17(r.rho)];
        row.extend(cplx(r.log_a));
        row.push(fmt17(r.det2_abs));
        row.push(fmt17(r.link_residual));
        t.push(row);
    }
    let csv = out.file("detscan.csv");
    t.write(&csv)?;
    let c = f.conserved();
    let fit = expansion_coeffs(&f, &d.fit, &Backend::default(), cfg.exec())?;
    let e1 = C64::new(0.0, c.momentum / 4.0);
    let e2 = C64::new(0.0, -c.energy / 8.0);
    let rep = FitReport {
        momentum: c.momentum,
        energy: c.energy,
        e1_expected: e1,
        e2_expected: e2,
        e1_relative_error: rel(fit.e1, e1),
        e2_relative_error: rel(fit.e2, e2),
        fit: &fit,
    };
    let json = out.file("fit.json");
    write_json(&json, &rep)?;
    let link = rows.iter().map(|r| r.link_residual).fold(0.0, f64::max);
    Ok(Report {
        files: vec![csv, json],
        ok: true,
        summary: format!(
            "{} ray nodes, max link residual {link:.3e}; E1 {:.6e}{:+.6e}i, E2 {:.6e}{:+.6e}i",
            rows.len(),
            fit.e1.re,
            fit.e1.im,
            fit.e2.re,
            fit.e2.im
        ),
    })
}

#[derive(Serialize)]
struct RayEntry {
    theta: f64,
    count: Option<i64>,
    raw: Option<C64>,
    located_above: usize,
    angle_bound: Option<bool>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SpectrumReport {
    rect: Rect,
    eigenvalues: EigenvalueSet,
    rays: Vec<RayEntry>,
    location: ZeroLocationReport,
}

fn search_box(cfg: &RunConfig, f: &Field) -> Result<Rect, CliError> {
    Ok(match cfg.spectrum.rect {
        Some([a, b, c, d]) => Rect::new(a, b, c, d)?,
        None => default_box(f),
    })
}

pub fn cmd_spectrum(cfg: &RunConfig, out: &OutDir) -> Result<Report, CliError> {
    let f = cfg.field()?;
    let s = &cfg.spectrum;
    let b = Backend::default();
    let rect = search_box(cfg, &f)?;
    let set = locate(&f, rect, &s.locate, &b, cfg.exec())?;
    let mut ok = set.clusters.is_empty();
    let mut rays = vec![];
    for &theta in &s.rays {
        let above = set.count_above(theta);
        let entry = match ray_count(&f, theta, &s.ray, &b, cfg.exec()) {
            Ok(rc) => {
                let bound = angle_bound_check(&f, theta, &s.ray, &b, cfg.exec())?;
                // zeros outside the box are invisible to locate, so only a count below it is a contradiction
                ok &= bound && rc.count as usize >= above;
                RayEntry { theta, count: Some(rc.count), raw: Some(rc.raw), located_above: above, angle_bound: Some(bound), error: None }
            }
            Err(e) if e.is_numerical() => RayEntry { theta, count: None, raw: None, located_above: above, angle_bound: None, error: Some(e.to_string()) },
            Err(e) => return Err(e.into()),
        };
        rays.push(entry);
    }
    let location = zero_location_bound(&f, &set.zetas());
    let n = set.zeros.len();
    let rep = SpectrumReport { rect, eigenvalues: set, rays, location };
    let path = out.file("spectrum.json");
    write_json(&path, &rep)?;
    let zs: Vec<String> = rep.eigenvalues.zeros.iter().map(|z| format!("{:.8}{:+.8}i", z.zeta.re, z.zeta.im)).collect();
    Ok(Report { files: vec![path], ok, summary: format!("{n} zero(s) [{}], {} cluster(s)", zs.join(", "), rep.eigenvalues.clusters.len()) })
}

pub const MASS_TOL: f64 = 1e-6;
pub const POINTWISE_TOL: f64 = 1e-10;
pub const UPDATE_TOL: f64 = 1e-4;

pub fn cmd_backlund(cfg: &RunConfig, out: &OutDir) -> Result<Report, CliError> {
    let f = cfg.field()?;
    let b = Backend::default();
    let rect = search_box(cfg, &f)?;
    let before = locate(&f, rect, &cfg.spectrum.locate, &b, cfg.exec())?;
    let zeta1 = match cfg.backlund.zeta1 {
        Some([re, im]) => C64::new(re, im),
        None => before
            .zeros
            .iter()
            .map(|z| z.zeta)
            .max_by(|a, b| a.im.total_cmp(&b.im).then(b.re.total_cmp(&a.re)))
            .ok_or_else(|| dnls_core::Error::NotEigenvalue("no zero of ã found in the search box".into()))?,
    };
    let jc = JostConfig::default();
    let bd = backlund::eigenfunction(&f, zeta1, &EigenConfig::default())?;
    let g = backlund::remove(&f, &bd)?;
    let after = locate(&g, rect, &cfg.spectrum.locate, &b, cfg.exec())?;
    let (g_defect, s_excess) = bd.invariant_defects()?;
    let probes = cfg.backlund.b_probes.clone().unwrap_or_else(|| vec![0.5, 0.8, 1.2, 1.6]);
    let rep = BacklundReport {
        zeta1: bd.lambda1.zeta(),
        mass_before: f.mass(),
        mass_after: g.mass(),
        expected_drop: 8.0 * arg_lambda(bd.lambda1.zeta()),
        zeros_before: before.zetas(),
        zeros_after: after.zetas(),
        a_update_deviation: backlund::verify_a_update(&f, &g, bd.lambda1.zeta(), &default_probes(bd.lambda1.zeta()), &jc)?,
        b_invariance_deviation: backlund::b_invariance(&f, &g, &probes, &jc)?,
        g_defect,
        s_excess,
        derivative: backlund::derivative_identity_check(&bd, &f)?,
    };
    let gone = rep.zeros_after.iter().all(|z| (z - rep.zeta1).norm() > 1e-3);
    let ok = rep.mass_defect() < MASS_TOL
        && g_defect < POINTWISE_TOL
        && s_excess < POINTWISE_TOL
        && rep.a_update_deviation < UPDATE_TOL
        && rep.b_invariance_deviation < UPDATE_TOL
        && gone;
    let json = out.file("backlund.json");
    write_json(&json, &rep)?;
    let snap = out.file("backlund_after.json");
    g.snapshot(0.0).save(&snap)?;
    Ok(Report {
        files: vec![json, snap],
        ok,
        summary: format!(
            "removed zeta1 = {:.8}{:+.8}i: mass {:.10} -> {:.10} (defect {:.2e}), a-update {:.2e}, b-invariance {:.2e}",
            rep.zeta1.re,
            rep.zeta1.im,
            rep.mass_before,
            rep.mass_after,
            rep.mass_defect(),
            rep.a_update_deviation,
            rep.b_invariance_deviation
        ),
    })
}

pub fn cmd_evolve(cfg: &RunConfig, out: &OutDir) -> Result<Report, CliError> {
    let f = cfg.field()?;
    let e = &cfg.evolve;
    let ec = EvolveConfig { dt: e.dt, t_end: e.t_end, dealias: e.dealias, ..Default::default() };
    ec.validate()?;
    let probes = e.probes.iter().map(|l| SpectralPoint::from_lambda(C64::new(l[0], l[1]))).collect::<Result<Vec<_>, _>>()?;
    let jc = JostConfig::default();
    let every = e.every.max(1);
    let (steps, _) = ec.steps();
    let total_rows = steps.div_ceil(every) + 1;
    let snap_rows: Vec<usize> = match e.snapshots {
        0 => vec![],
        1 => vec![total_rows - 1],
        s => (0..s).map(|i| ((i * (total_rows - 1)) as f64 / (s - 1) as f64).round() as usize).collect(),
    };
    let mut t = Table::new(["t", "M", "P", "E"]);
    for k in 0..probes.len() {
        t.header_push(format!("a{k}_re"));
        t.header_push(format!("a{k}_im"));
    }
    let mut files = vec![];
    let mut row_index = 0;
    let mut first: Option<ConservedSet> = None;
    let mut last = ConservedSet::default();
    evolve::evolve(&f, &ec, every, &mut |time, u| {
        let c = u.conserved();
        first.get_or_insert(c);
        last = c;
        let mut row = vec![fmt17(time), fmt17(c.mass), fmt17(c.momentum), fmt17(c.energy)];
        for p in &probes {
            row.extend(cplx(a_ode(u, *p, &jc)?));
        }
        t.push(row);
        if snap_rows.contains(&row_index) {
            let path = out.file(&format!("snapshot_{row_index:05}.json"));
            u.snapshot(time).save(&path)?;
            files.push(path);
        }
        row_index += 1;
        Ok(())
    })?;
    let csv = out.file("series.csv");
    t.write(&csv)?;
    files.insert(0, csv);
    let c0 = first.unwrap_or_default();
    Ok(Report {
        files,
        ok: true,
        summary: format!(
            "{steps} steps to t = {}: mass drift {:.3e}, energy drift {:.3e}",
            e.t_end,
            (last.mass - c0.mass).abs(),
            (last.energy - c0.energy).abs()
        ),
    })
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    passed: usize,
    failed: usize,
    criteria: &'a [Outcome],
}

pub fn cmd_verify(cfg: &RunConfig, out: &OutDir) -> Result<Report, CliError> {
    let known: Vec<&str> = acceptance::criteria().iter().map(|c| c.id).collect();
    if let Some(bad) = cfg.verify.only.iter().find(|o| !known.iter().any(|k| k.eq_ignore_ascii_case(o))) {
        return Err(CliError::Config(format!("unknown criterion {bad:?}; known: {}", known.join(", "))));
    }
    let mut outcomes = vec![];
    for c in acceptance::criteria() {
        if !cfg.verify.only.is_empty() && !cfg.verify.only.iter().any(|o| o.eq_ignore_ascii_case(c.id)) {
            continue;
        }
        let o = c.run(cfg.exec());
        println!("{}", o.line());
        outcomes.push(o);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    let summary = VerifySummary { passed: outcomes.len() - failed, failed, criteria: &outcomes };
    let path = out.file("verify.json");
    write_json(&path, &summary)?;
    Ok(Report { files: vec![path], ok: failed == 0, summary: format!("{} passed, {failed} failed", outcomes.len() - failed) })
}
