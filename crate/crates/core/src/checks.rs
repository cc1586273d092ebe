//! The eight acceptance criteria as report sections.
//!
//! [`Effort::Full`] runs every criterion at its stated size; [`Effort::Quick`]
//! shrinks the two gluing criteria (fewer mesh levels, fewer stages) and the
//! critical cell grid, keeping the same assertions.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use crate::connection::{solve_connection, ConnectionConfig, ConnectionMethod};
use crate::critical::{
    fixed_point_solve, g_operator, t2_bound, CriticalConfig, CylinderGrid, ScalarTrack,
};
use crate::error::Result;
use crate::fit::observed_order;
use crate::glue::{
    build_cell, multi_stage, nontangential_probe, test_suite, verify_very_weak, weighted_inverse_study, Domain,
    GlueConfig, GlueProblem,
};
use crate::halfspace::{barrier_identity_residual, manufactured_error};
use crate::report::{timed, Check, ContractionLog, Effort, Exponent, Section, Table, Timing};
use crate::separable::{solve_phip, verify_bifurcation};
use crate::sphere::{laplace_beltrami_axisym, AxisymGrid};
use crate::ExponentParams;

pub const TITLES: [&str; 8] = [
    "eigenpair of the half-sphere Laplacian",
    "separable cell and bifurcation ratio",
    "T2 right inverse",
    "critical cell fixed point",
    "connection cell",
    "weighted inverses and barrier identity",
    "glued solution on the disk",
    "finite-stage construction",
];

pub const TIME_LIMITS: [f64; 8] = [1.0, 10.0, 1.0, 120.0, 120.0, 60.0, 300.0, 900.0];

/// Runs criterion `id` (1 to 8).
pub fn criterion(id: u8, effort: Effort) -> (Section, Timing) {
    let k = (id - 1) as usize;
    let name = format!("criterion-{id}");
    timed(&name, TITLES[k], Some(TIME_LIMITS[k]), || {
        let mut s = Section::new(&name, TITLES[k], Some(TIME_LIMITS[k]));
        match id {
            1 => eigenpair(&mut s),
            2 => separable(&mut s),
            3 => t2(&mut s),
            4 => critical(&mut s, effort),
            5 => connection(&mut s),
            6 => inverses(&mut s),
            7 => glued(&mut s, effort),
            8 => stages(&mut s, effort),
            _ => unreachable!("criteria are numbered 1 to 8"),
        }?;
        Ok(s)
    })
}

fn cos_defect(dim: usize, n: usize) -> Result<(f64, f64)> {
    let g = Arc::new(AxisymGrid::new(dim, n)?);
    let lc = laplace_beltrami_axisym(&g.sample(f64::cos))?;
    let k = dim as f64 - 1.0;
    let err = lc
        .values
        .iter()
        .zip(g.nodes())
        .fold(0.0f64, |m, (v, a)| m.max((v + k * a.cos()).abs()));
    Ok((g.step(), err))
}

fn eigenpair(s: &mut Section) -> Result<()> {
    let mut t = Table::new("eigenpair", &["h", "defect_n2", "defect_n3"]).log_scales(true, true);
    let sizes = [100, 200, 400, 800];
    let mut rows = vec![Vec::new(); sizes.len()];
    for dim in [2, 3] {
        let hs: Vec<(f64, f64)> = sizes.iter().map(|&n| cos_defect(dim, n)).collect::<Result<_>>()?;
        for (row, (h, e)) in rows.iter_mut().zip(&hs) {
            if row.is_empty() {
                row.push(*h);
            }
            row.push(*e);
        }
        let (h800, e800) = hs[3];
        s.check(Check::le(&format!("N={dim}: sup defect on 800 nodes"), e800, 1e-6));
        let (h400, e400) = hs[2];
        s.exponent(Exponent::window(
            &format!("N={dim}: convergence order 400 -> 800 nodes"),
            observed_order(h400, e400, h800, e800),
            2.0,
            1.8,
            2.2,
        ));
    }
    for r in rows {
        t.push(r);
    }
    s.table(t);
    Ok(())
}

fn separable(s: &mut Section) -> Result<()> {
    let params = ExponentParams::new(2, 3.2)?;
    let res = solve_phip(&params, 1e-8)?;
    s.check(Check::le("shooting residual |φ(π/2)|", res.residual, 1e-8));
    s.check(Check::holds(
        "φ > 0 on [0, π/2)",
        res.profile.values[..res.profile.values.len() - 1].iter().all(|&v| v > 0.0),
    ));
    s.scalar("s_star", res.s_star);
    s.scalar("fd_defect", res.fd_defect);
    let mut t = Table::new("separable_profile", &["alpha", "phi", "dphi"]);
    for ((a, v), d) in res.profile.grid.nodes().iter().zip(&res.profile.values).zip(&res.derivative) {
        t.push(vec![*a, *v, *d]);
    }
    s.table(t);
    let rec = verify_bifurcation(2, &[3.2, 3.1, 3.05], 1e-8)?;
    let mut t = Table::new("bifurcation", &["p", "max_phi", "gap", "ratio"]);
    for e in &rec.entries {
        t.push(vec![e.p, e.max_phi, e.gap, e.ratio]);
        s.check(Check::le(&format!("p={}: shooting residual", e.p), e.residual, 1e-8));
    }
    s.table(t);
    s.check(Check::lt(
        "relative change of r(p) between p=3.1 and p=3.05",
        rec.last_variation.unwrap_or(f64::NAN),
        0.05,
    ));
    s.check(Check::holds("max φ_p decreases towards the critical exponent", rec.monotone_vanishing));
    Ok(())
}

fn t2(s: &mut Section) -> Result<()> {
    let n = 2.0;
    let ang = Arc::new(AxisymGrid::new(2, 9)?);
    let g = Arc::new(CylinderGrid::with_step(1.0, 20.0, 1e-3, Arc::clone(&ang))?);
    let src = ScalarTrack::from_fn(&g, 0.75, |t| (-n * t).exp());
    let out = g_operator(&src, 1.75);
    let err = out.values.iter().zip(&g.t_nodes).fold(0.0f64, |m, (v, t)| {
        m.max((v + (-n * t).exp() * ((t - 1.0) / n + 1.0 / (n * n))).abs())
    });
    s.check(Check::le("g = e^{-Nt}: max error against closed form", err, 1e-8));
    let mut t = Table::new("t2_bound", &["sigma", "t_star", "measured", "bound"]);
    for sigma in [0.6, 0.75, 1.0, 1.25] {
        for t_star in [4.0, 8.0] {
            let g = Arc::new(CylinderGrid::with_step(t_star, 100.0 * t_star, 0.05, Arc::clone(&ang))?);
            let src = ScalarTrack::from_fn(&g, sigma, |t| t.powf(-1.0 - sigma));
            let out = g_operator(&src, 1.0 + sigma);
            let c = ScalarTrack { sigma, ..out }.weighted_sup(0.0) / src.weighted_sup(1.0);
            let bound = t2_bound(2, sigma, t_star);
            s.check(Check::le(&format!("σ={sigma}, t*={t_star}: bound constant"), c, bound));
            t.push(vec![sigma, t_star, c, bound]);
        }
    }
    s.table(t);
    Ok(())
}

fn critical(s: &mut Section, effort: Effort) -> Result<()> {
    let mut cfg = CriticalConfig::new(2, 0.75);
    if effort == Effort::Quick {
        cfg.dt = 0.1;
        cfg.n_alpha = 33;
    }
    critical_cell(s, &cfg)
}

/// Builds the critical cell and records its checks; the slope window is
/// `-(N-1)/2 ± 0.05`.
pub fn critical_cell(s: &mut Section, cfg: &CriticalConfig) -> Result<()> {
    let cell = fixed_point_solve(cfg)?;
    s.scalar("t_star", cell.t_star());
    s.scalar("t_end", cell.t_end());
    s.check(Check::lt("contraction ratio at the selected t*", cell.lipschitz, 1.0));
    s.check(Check::le("fixed-point residual (weighted norm)", cell.fixed_point_residual, 1e-6));
    s.check(Check::le("max_t |quad(ψ₁(t,·) φ₁)|", cell.orthogonality, 1e-8));
    let fit = cell.slope_fit()?;
    s.exponent(Exponent::abs("slope of log sup φ(t,·) against log t", fit.fit.slope, -0.5 * (cfg.dim as f64 - 1.0), 0.05));
    s.contraction.push(ContractionLog {
        name: "critical cell".into(),
        distances: cell.contraction_log.iter().map(|r| r.distance).collect(),
        ratios: cell.contraction_log.iter().map(|r| r.ratio).collect(),
        lipschitz: cell.lipschitz,
    });
    let mut t = Table::new("critical_sup", &["t", "sup_phi"]).log_scales(true, true);
    for (tt, v) in cell.grid.t_nodes.iter().zip(cell.sup_profile()) {
        t.push(vec![*tt, v]);
    }
    s.table(t);
    Ok(())
}

fn connection(s: &mut Section) -> Result<()> {
    connection_cell(s, &ConnectionConfig::new(2, 3.05))
}

/// Builds the connection cell; slope windows are 2% of `-2/(p-1)` and `-(N-1)`.
pub fn connection_cell(s: &mut Section, cfg: &ConnectionConfig) -> Result<()> {
    let cell = solve_connection(cfg)?;
    s.check(Check::gt("a_p", cell.a_p, 0.0));
    s.check(Check::lt("relative gap between flux and far-field a", cell.flux_agreement(), 0.02));
    s.scalar("a_p", cell.a_p);
    s.scalar("a_fit", cell.a_fit);
    s.scalar("min_u", cell.min_u);
    let m = cell.params.m;
    s.exponent(Exponent::rel("inner log-log slope", cell.inner_fit.slope, -m, 0.02));
    s.exponent(Exponent::rel("outer log-log slope", cell.outer_fit.slope, 1.0 - cfg.dim as f64, 0.02));
    if let Some(f) = &cell.picard_failure {
        s.note(format!("Picard abandoned: {f}"));
    }
    if let Some(p) = &cell.picard {
        s.contraction.push(ContractionLog {
            name: "connection Picard".into(),
            distances: p.log.iter().map(|r| r.step_norm).collect(),
            ratios: p.log.iter().map(|r| r.ratio).collect(),
            lipschitz: p.lipschitz,
        });
    }
    if cell.method == ConnectionMethod::Heteroclinic {
        if let Some(nd) = &cell.newton {
            s.scalar("newton_residual", nd.residual);
            s.scalar("newton_steps", nd.steps as f64);
        }
    }
    let mut t = Table::new("connection_axis", &["r", "u", "u_bar"]).log_scales(true, true);
    let phi0 = cell.profile.eval(0.0);
    for k in 0..=80 {
        let r = 10f64.powf(-4.0 + 0.1 * k as f64);
        t.push(vec![r, cell.u_polar(r, 0.0), phi0 * r.powf(-m)]);
    }
    s.table(t);
    Ok(())
}

fn inverses(s: &mut Section) -> Result<()> {
    let mut t = Table::new("halfspace_manufactured", &["N", "delta", "ds", "error"]);
    for (dim, delta) in [(2, -0.5), (3, 0.0)] {
        let e1 = manufactured_error(dim, delta, 0.04, 41)?;
        let e2 = manufactured_error(dim, delta, 0.02, 81)?;
        t.push(vec![dim as f64, delta, 0.04, e1]);
        t.push(vec![dim as f64, delta, 0.02, e2]);
        s.exponent(Exponent::window(
            &format!("half-space inverse, N={dim}, δ={delta}: order"),
            (e1 / e2).log2(),
            2.0,
            1.8,
            2.3,
        ));
    }
    s.table(t);
    let study = weighted_inverse_study(-0.5, 3)?;
    let mut t = Table::new("domain_manufactured", &["level", "cells", "error", "constant"]);
    for l in &study {
        t.push(vec![l.level as f64, l.cells as f64, l.error, l.constant]);
    }
    s.table(t);
    for w in study.windows(2) {
        s.exponent(Exponent::window(
            &format!("disk inverse, δ=-0.5: order level {} -> {}", w[0].level, w[1].level),
            (w[0].error / w[1].error).log2(),
            2.0,
            1.8,
            2.3,
        ));
    }
    let (lo, hi) = study
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), l| (a.min(l.constant), b.max(l.constant)));
    s.check(Check::lt("spread of the disk inverse constant", hi / lo - 1.0, 0.1));
    let mut t = Table::new("barrier_identity", &["N", "h", "residual"]).log_scales(true, true);
    for dim in [2, 3] {
        let e1 = barrier_identity_residual(dim, -0.5, 0.02)?;
        let e2 = barrier_identity_residual(dim, -0.5, 0.01)?;
        t.push(vec![dim as f64, 0.02, e1]);
        t.push(vec![dim as f64, 0.01, e2]);
        s.exponent(Exponent::window(
            &format!("barrier identity, N={dim}: order"),
            (e1 / e2).log2(),
            2.0,
            1.8,
            2.3,
        ));
    }
    s.table(t);
    Ok(())
}

/// Distances of the nontangential probes: four decades down to `1e-5`.
pub const PROBE_DISTANCES: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

fn glued(s: &mut Section, effort: Effort) -> Result<()> {
    let levels = if effort == Effort::Quick { 2 } else { 3 };
    glue_refinement(s, &GlueConfig::new(Domain::Disk, 3.0, vec![0.5], 1e-3), levels)
}

/// A boundary angle far from every singular point.
pub fn regular_angle(domain: Domain, points: &[f64]) -> f64 {
    match domain {
        Domain::Ball => FRAC_PI_2,
        Domain::Disk => (0..720)
            .map(|k| k as f64 * PI / 360.0)
            .map(|a| {
                let gap = points
                    .iter()
                    .map(|p| {
                        let d = (a - p).rem_euclid(2.0 * PI);
                        d.min(2.0 * PI - d)
                    })
                    .fold(f64::INFINITY, f64::min);
                (a, gap)
            })
            .fold((0.0, -1.0), |best, c| if c.1 > best.1 { c } else { best })
            .0,
    }
}

/// Glues at every configured point on mesh levels `0..levels` and checks the
/// very-weak defects, positivity and boundary probes at the first point.
pub fn glue_refinement(s: &mut Section, cfg: &GlueConfig, levels: u32) -> Result<()> {
    let cell = build_cell(cfg.domain, cfg.p)?;
    let mut sols = Vec::new();
    for level in 0..levels {
        let sol = GlueProblem::new(cfg.clone(), Arc::clone(&cell), level)?.solve()?;
        s.check(Check::lt(&format!("level {level}: Picard Lipschitz ratio"), sol.picard.lipschitz, 1.0));
        s.contraction.push(ContractionLog {
            name: format!("glue level {level}"),
            distances: sol.picard.distances.clone(),
            ratios: sol.picard.ratios.clone(),
            lipschitz: sol.picard.lipschitz,
        });
        sols.push(sol);
    }
    let suite = test_suite(cfg.domain);
    let rep = verify_very_weak(&sols, &suite);
    let mut cols = vec!["level".to_string()];
    cols.extend(rep.names.iter().cloned());
    let mut t = Table {
        name: "very_weak_defects".into(),
        columns: cols,
        rows: Vec::new(),
        log_x: false,
        log_y: true,
    };
    for (k, lvl) in rep.levels.iter().enumerate() {
        let mut row = vec![*lvl as f64];
        row.extend(rep.defects.iter().map(|d| d[k]));
        t.push(row);
    }
    s.table(t);
    for (name, (d, o)) in rep.names.iter().zip(rep.defects.iter().zip(&rep.orders)) {
        s.check(Check::holds(
            &format!("w = {name}: |defect| decreases under each refinement"),
            d.windows(2).all(|w| w[1].abs() < w[0].abs()),
        ));
        let min = o.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        s.check(Check::gt(&format!("w = {name}: smallest observed order"), min, 0.9));
    }
    s.scalar("min_order", rep.min_order());
    for (k, v) in rep.l1.values.iter().enumerate() {
        s.scalar(&format!("l1_level{k}"), *v);
    }
    for (k, v) in rep.weighted_power.values.iter().enumerate() {
        s.scalar(&format!("int_u_q_dist_level{k}"), *v);
    }
    let fine = sols.last().expect("at least one level");
    s.check(Check::gt("min u over all levels", rep.min_u.iter().fold(f64::INFINITY, |m, v| m.min(*v)), 0.0));
    let mut t = Table::new("probes", &["distance", "normal", "cone_pi_4", "regular"]).log_scales(true, true);
    let xi = cfg.points[0];
    let normal = nontangential_probe(fine, xi, 0.0, &PROBE_DISTANCES);
    let cone = nontangential_probe(fine, xi, FRAC_PI_4, &PROBE_DISTANCES);
    let reg = regular_angle(cfg.domain, &cfg.points);
    s.scalar("regular_angle", reg);
    let regular = nontangential_probe(fine, reg, FRAC_PI_4, &PROBE_DISTANCES);
    for (k, d) in PROBE_DISTANCES.iter().enumerate() {
        t.push(vec![*d, normal.values[k], cone.values[k], regular.values[k]]);
    }
    s.table(t);
    s.check(Check::holds("normal probe increases towards ξ", normal.increasing));
    s.check(Check::gt("normal probe growth over 4 decades", normal.ratio, 1e2));
    s.check(Check::gt("π/4 cone probe growth over 4 decades", cone.ratio, 1e2));
    s.check(Check::lt(
        "u at distance 1e-5 from a regular boundary point",
        *regular.values.last().expect("probe values"),
        1e-3,
    ));
    Ok(())
}

fn stages(s: &mut Section, effort: Effort) -> Result<()> {
    let k = if effort == Effort::Quick { 2 } else { 3 };
    let points = vec![0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];
    glue_stages(s, &GlueConfig::new(Domain::Disk, 3.0, points, 1e-3), k)
}

/// The `k`-stage construction over the first `k` configured points, with the
/// `2^{-i}` stage bounds and summability of the `L¹` increments.
pub fn glue_stages(s: &mut Section, cfg: &GlueConfig, k: usize) -> Result<()> {
    let cell = build_cell(cfg.domain, cfg.p)?;
    let problem = GlueProblem::new(cfg.clone(), cell, 0)?;
    let rep = multi_stage(&problem, k)?;
    let mut t = Table::new(
        "stages",
        &["stage", "point", "radius", "log_inv_eps", "halvings", "aa", "bb", "bb_inner", "cc", "threshold"],
    );
    for st in &rep.stages {
        let i = st.index;
        s.check(Check::le(&format!("stage {i}: L¹ increment (AA)"), st.aa, st.threshold));
        s.check(Check::le(&format!("stage {i}: weighted power increment (BB)"), st.bb, st.threshold));
        s.check(Check::le(&format!("stage {i}: weighted corrector sup (CC)"), st.cc, st.threshold));
        s.check(Check::gt(&format!("stage {i}: min u"), st.min_u, 0.0));
        s.contraction.push(ContractionLog {
            name: format!("stage {i}"),
            distances: Vec::new(),
            ratios: Vec::new(),
            lipschitz: st.lipschitz,
        });
        t.push(vec![
            i as f64,
            st.point,
            st.radius,
            st.log_inv_eps,
            st.halvings as f64,
            st.aa,
            st.bb,
            st.bb_inner,
            st.cc,
            st.threshold,
        ]);
    }
    s.table(t);
    let sums = rep.l1_partial_sums();
    s.check(Check::holds(
        "L¹ increments are dominated by 2^{-i}",
        rep.stages.iter().all(|st| st.aa < 0.5f64.powi(st.index as i32)),
    ));
    s.check(Check::lt("sum of L¹ increments (bound Σ2^{-i} < 1)", *sums.last().unwrap_or(&f64::NAN), 1.0));
    for (i, v) in sums.iter().enumerate() {
        s.scalar(&format!("l1_partial_sum_{}", i + 1), *v);
    }
    Ok(())
}
