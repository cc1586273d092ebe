//! Dispatch from a [`RunConfig`] to the module operations.

use crate::checks::{self, connection_cell, critical_cell, glue_refinement, glue_stages};
use crate::connection::ConnectionConfig;
use crate::critical::{CellSystem, CriticalConfig};
use crate::error::Result;
use crate::report::{timed, Check, RunConfig, RunReport, Section, Table, Task};
use crate::separable::{extend_cell_k, solve_phip};
use crate::ExponentParams;

fn separable_cell(s: &mut Section, dim: usize, p: f64, tol: f64, ext: Option<(usize, usize)>, seed: u64) -> Result<()> {
    let params = ExponentParams::new(dim, p)?;
    let res = solve_phip(&params, tol)?;
    s.check(Check::le("shooting residual |φ(π/2)|", res.residual, tol));
    s.check(Check::holds(
        "φ > 0 on [0, π/2)",
        res.profile.values[..res.profile.values.len() - 1].iter().all(|&v| v > 0.0),
    ));
    s.scalar("s_star", res.s_star);
    s.scalar("residual", res.residual);
    s.scalar("max_phi", res.max_value());
    s.scalar("fd_defect", res.fd_defect);
    s.scalar("lambda_p", params.lambda_p);
    let mut t = Table::new("phi", &["alpha", "phi", "dphi"]);
    for ((a, v), d) in res.profile.grid.nodes().iter().zip(&res.profile.values).zip(&res.derivative) {
        t.push(vec![*a, *v, *d]);
    }
    s.table(t);
    if let Some((k, n)) = ext {
        let r = extend_cell_k(&res, k, 0.01, n, seed)?;
        s.scalar("extension_max_residual", r.max_residual);
        s.scalar("extension_base_max_residual", r.base_max_residual);
        s.check(Check::le(
            &format!("extension to N+{k}: residual difference"),
            r.max_difference,
            1e-12 * (1.0 + r.base_max_residual),
        ));
    }
    Ok(())
}

/// Runs `config`, returning the report; nothing is written.
pub fn execute(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let parts = match &config.task {
        Task::CellSeparable {
            dim,
            p,
            tol,
            extension_k,
            extension_samples,
        } => {
            let ext = extension_k.map(|k| (k, *extension_samples));
            vec![timed("cell-separable", "separable cell", None, || {
                let mut s = Section::new("cell-separable", "separable cell", None);
                separable_cell(&mut s, *dim, *p, *tol, ext, config.seed)?;
                Ok(s)
            })]
        }
        Task::CellCritical {
            dim,
            sigma,
            mu,
            t_star,
            dt,
            n_alpha,
            tol,
            consistent,
        } => {
            let mut cfg = CriticalConfig::new(*dim, *sigma);
            cfg.mu = *mu;
            cfg.t_star = *t_star;
            cfg.dt = *dt;
            cfg.n_alpha = *n_alpha;
            cfg.tol = *tol;
            if *consistent {
                cfg.system = CellSystem::Consistent;
            }
            vec![timed("cell-critical", "critical cell", None, || {
                let mut s = Section::new("cell-critical", "critical cell", None);
                critical_cell(&mut s, &cfg)?;
                Ok(s)
            })]
        }
        Task::CellConnection {
            dim,
            p,
            delta,
            delta_prime,
            ds,
            n_alpha,
            tol,
        } => {
            let mut cfg = ConnectionConfig::new(*dim, *p);
            if let Some(d) = delta {
                cfg.delta = *d;
            }
            if let Some(d) = delta_prime {
                cfg.delta_prime = *d;
            }
            cfg.ds = *ds;
            cfg.n_alpha = *n_alpha;
            cfg.tol = *tol;
            vec![timed("cell-connection", "connection cell", None, || {
                let mut s = Section::new("cell-connection", "connection cell", None);
                connection_cell(&mut s, &cfg)?;
                Ok(s)
            })]
        }
        Task::Glue { levels, stages, .. } => {
            let cfg = config.glue_config().expect("glue task");
            match stages {
                Some(k) => vec![timed("glue-stages", "finite-stage construction", None, || {
                    let mut s = Section::new("glue-stages", "finite-stage construction", None);
                    glue_stages(&mut s, &cfg, *k)?;
                    Ok(s)
                })],
                None => vec![timed("glue", "glued solution", None, || {
                    let mut s = Section::new("glue", "glued solution", None);
                    glue_refinement(&mut s, &cfg, *levels)?;
                    Ok(s)
                })],
            }
        }
        Task::Verify { criteria, effort } => {
            let ids: Vec<u8> = if criteria.is_empty() { (1..=8).collect() } else { criteria.clone() };
            ids.into_iter().map(|id| checks::criterion(id, *effort)).collect()
        }
    };
    Ok(RunReport::new(config.clone(), parts))
}

/// Runs `config` and writes its artifacts into `config.out_dir`.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let report = execute(config)?;
    report.write(&config.out_dir)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Effort;

    fn separable_config(dir: &std::path::Path) -> RunConfig {
        let mut c = RunConfig::new(
            Task::CellSeparable {
                dim: 2,
                p: 3.2,
                tol: 1e-8,
                extension_k: Some(1),
                extension_samples: 10,
            },
            dir,
        );
        c.seed = 42;
        c
    }

    #[test]
    fn cell_separable_writes_csv_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = separable_config(dir.path());
        let rep = run(&cfg).unwrap();
        assert!(rep.passed, "{}", rep.summary());
        let s = &rep.sections[0];
        assert!(s.scalars["s_star"] > 0.0);
        assert!(s.scalars["residual"] <= 1e-8);
        let csv = std::fs::read_to_string(dir.path().join("phi.csv")).unwrap();
        assert!(csv.starts_with("alpha,phi,dphi\n"));
        assert!(dir.path().join("plot_phi.py").exists());
        let back = RunReport::read(dir.path()).unwrap();
        assert_eq!(back.deterministic_json().unwrap(), rep.deterministic_json().unwrap());
        let cfg_back =
            RunConfig::from_json(&std::fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
        assert_eq!(cfg_back, cfg);
    }

    #[test]
    fn identical_config_gives_identical_json() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ca = separable_config(a.path());
        let ra = execute(&ca).unwrap();
        let rb = execute(&ca).unwrap();
        assert_eq!(ra.deterministic_json().unwrap(), rb.deterministic_json().unwrap());
        // the output directory is part of the echoed config, nothing else differs
        let mut cb = ca.clone();
        cb.out_dir = b.path().into();
        let mut rc = execute(&cb).unwrap();
        rc.config.out_dir = ca.out_dir.clone();
        assert_eq!(ra.deterministic_json().unwrap(), rc.deterministic_json().unwrap());
    }

    #[test]
    fn invalid_windows_are_rejected_before_work() {
        let cfg = RunConfig::new(
            Task::CellConnection {
                dim: 2,
                p: 2.5,
                delta: None,
                delta_prime: None,
                ds: 0.05,
                n_alpha: 33,
                tol: 1e-10,
            },
            "unused",
        );
        let msg = execute(&cfg).unwrap_err().to_string();
        assert!(msg.contains("(N+1)/(N-1)"), "{msg}");
        let cfg = RunConfig::new(
            Task::Verify {
                criteria: vec![9],
                effort: Effort::Quick,
            },
            "unused",
        );
        assert!(execute(&cfg).is_err());
    }

    #[test]
    fn quick_verify_reports_every_requested_criterion() {
        let cfg = RunConfig::new(
            Task::Verify {
                criteria: vec![1, 3],
                effort: Effort::Quick,
            },
            "unused",
        );
        let rep = execute(&cfg).unwrap();
        let ids: Vec<&str> = rep.sections.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["criterion-1", "criterion-3"]);
        assert!(rep.passed, "{}", rep.summary());
        assert_eq!(rep.timings.len(), 2);
    }
}
