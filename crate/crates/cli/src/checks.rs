//! One runner per check name. Each returns its report entry and the CSV
//! files it wants written.

use lidskii_core::abel::default_t_sequence;
use lidskii_core::contour::{group_sum, ring_clusters, small_circle_integral, residue_at_pole};
use lidskii_core::csv;
use lidskii_core::evolution::{
    accretivity_check, contraction_check, evolution_csv, evolution_table, initial_condition_trace, Oracle,
};
use lidskii_core::matrixcore::{seeded_rng, unit_vector};
use lidskii_core::spectralstats::{convergence_exponent_estimate, lemma2_diagnostics, lidskii_ordering_check};
use lidskii_core::{
    ContourIntegrator, ContourSpec, CVector, DenseOperator, Error, EvolutionSolution, JordanSystem, LaurentFunction,
    SingularProfile,
};
use rayon::prelude::*;

use crate::report::CheckReport;
use crate::scenario::Check;

pub const RESIDUE_TOL: f64 = 1e-8;
pub const GROUPING_TOL: f64 = 1e-7;
pub const ODE_TOL: f64 = 1e-6;
pub const ORACLE_TOL: f64 = 1e-6;
pub const TAIL_THRESHOLD: f64 = 1e-10;
pub const CONTRACTION_VECTORS: usize = 50;

/// Everything the checks share, built once per scenario.
pub struct Context {
    pub b: DenseOperator,
    pub sys: JordanSystem,
    pub phi: LaurentFunction,
    pub spec: ContourSpec,
    pub solution: EvolutionSolution,
    pub h: CVector,
    pub t_grid: Vec<f64>,
    pub parallel: bool,
}

pub struct CheckOutput {
    pub report: CheckReport,
    pub files: Vec<(String, String)>,
}

impl Context {
    fn map_t<T: Send>(&self, ts: &[f64], f: impl Fn(f64) -> T + Sync + Send) -> Vec<T> {
        if self.parallel {
            ts.par_iter().map(|&t| f(t)).collect()
        } else {
            ts.iter().map(|&t| f(t)).collect()
        }
    }

    fn h_norm(&self) -> f64 {
        self.h.norm()
    }

    pub fn run(&self, check: Check) -> CheckOutput {
        let mut report = CheckReport::new(check.name());
        let result = match check {
            Check::Residue => self.residue(&mut report),
            Check::Grouping => self.grouping(&mut report),
            Check::Ode => self.ode(&mut report),
            Check::Contraction => self.contraction(&mut report),
            Check::Initial => self.initial(&mut report),
            Check::Tails => self.tails(&mut report),
            Check::Stats => self.stats(&mut report),
        };
        let files = match result {
            Ok(files) => files,
            Err(e) => {
                report.fail_with(&e);
                Vec::new()
            }
        };
        report.files = files.iter().map(|f| f.0.clone()).collect();
        CheckOutput { report, files }
    }

    /// Closed-form pole contributions against small-circle quadrature at
    /// `t = 0` and every grid point.
    fn residue(&self, r: &mut CheckReport) -> Result<Vec<(String, String)>, Error> {
        let tol = RESIDUE_TOL * self.h_norm();
        let mut ts = vec![0.0];
        ts.extend(&self.t_grid);
        let base = self.solution.base();
        let lams = self.sys.characteristic_numbers();
        let rows = self.map_t(&ts, |t| {
            (0..self.sys.cluster_count())
                .map(|q| {
                    let closed = residue_at_pole(&self.sys, &self.phi, base, q, t)?;
                    let quad = small_circle_integral(&self.b, &self.phi, &self.sys, q, &self.h, t, &self.spec, 1e-3 * tol)?;
                    Ok((t, q, (closed - quad.value).norm()))
                })
                .collect::<Result<Vec<_>, Error>>()
        });
        let rows: Vec<(f64, usize, f64)> = rows.into_iter().collect::<Result<Vec<_>, _>>()?.concat();
        let max = rows.iter().map(|x| x.2).fold(0.0, f64::max);
        r.num("max_diff", max).num("tolerance", tol).metric("poles", self.sys.cluster_count());
        r.pass = max <= tol;
        let body = csv::table(
            &["t", "cluster", "lambda_re", "lambda_im", "diff"],
            rows.iter().map(|(t, q, d)| {
                vec![csv::num(*t), q.to_string(), csv::num(lams[*q].re), csv::num(lams[*q].im), csv::num(*d)]
            }),
        );
        Ok(vec![("residue.csv".into(), body)])
    }

    /// Per-ring closed form against ring quadrature, and the telescoped sum
    /// against the full contour integral.
    fn grouping(&self, r: &mut CheckReport) -> Result<Vec<(String, String)>, Error> {
        let tol = GROUPING_TOL * self.h_norm();
        let integrator = ContourIntegrator::new(&self.b, &self.phi, &self.spec);
        let rings = ring_clusters(&self.spec, &self.sys).len();
        let base = self.solution.base();
        let per_t = self.map_t(&self.t_grid, |t| -> Result<_, Error> {
            let mut total = CVector::zeros(self.b.dim());
            let mut rows = Vec::new();
            for nu in 0..rings {
                let closed = group_sum(&self.sys, &self.phi, &self.spec, nu, base, t)?;
                let quad = integrator.ring_integral(nu, &self.h, t, 1e-3 * tol)?;
                rows.push((t, nu, closed.norm(), (&closed - &quad.value).norm()));
                total += closed;
            }
            let full = integrator.evolution_integral(&self.h, t, 1e-3 * tol)?;
            Ok((rows, (total - full.value).norm()))
        });
        let per_t = per_t.into_iter().collect::<Result<Vec<_>, _>>()?;
        let ring_max = per_t.iter().flat_map(|p| p.0.iter().map(|x| x.3)).fold(0.0, f64::max);
        let tele_max = per_t.iter().map(|p| p.1).fold(0.0, f64::max);
        r.num("max_ring_diff", ring_max)
            .num("max_telescope_diff", tele_max)
            .num("tolerance", tol)
            .metric("rings", rings)
            .metric("groups", self.solution.grouping().len());
        r.pass = ring_max <= tol && tele_max <= tol;
        let body = csv::table(
            &["t", "nu", "group_norm", "ring_diff"],
            per_t
                .iter()
                .flat_map(|p| p.0.iter())
                .map(|(t, nu, n, d)| vec![csv::num(*t), nu.to_string(), csv::num(*n), csv::num(*d)]),
        );
        Ok(vec![("grouping.csv".into(), body)])
    }

    /// ODE residual of the series solution and its distance to the
    /// matrix-exponential oracle.
    fn ode(&self, r: &mut CheckReport) -> Result<Vec<(String, String)>, Error> {
        let oracle = Oracle::new(&self.b, &self.phi)?;
        let rows = self.map_t(&self.t_grid, |t| evolution_table(&self.solution, &oracle, &[t]));
        let rows: Vec<_> = rows.into_iter().collect::<Result<Vec<_>, _>>()?.concat();
        let res = rows.iter().map(|x| x.ode_residual).fold(0.0, f64::max);
        let diff = rows.iter().map(|x| x.oracle_diff).fold(0.0, f64::max);
        let scale = self.h_norm();
        r.num("max_ode_residual", res)
            .num("max_oracle_diff", diff)
            .num("ode_tolerance", ODE_TOL * scale)
            .num("oracle_tolerance", ORACLE_TOL * scale);
        r.pass = res <= ODE_TOL * scale && diff <= ORACLE_TOL * scale;
        Ok(vec![("evolution.csv".into(), evolution_csv(&rows))])
    }

    /// Gated on exact accretivity of `φ(W)`.
    fn contraction(&self, r: &mut CheckReport) -> Result<Vec<(String, String)>, Error> {
        let acc = accretivity_check(&self.b, &self.phi, 2000, 0)?;
        r.num("accretivity_exact_min", acc.exact_min)
            .num("accretivity_sampled_min", acc.sampled_min);
        let mut rng = seeded_rng(0x5eed);
        let hs: Vec<CVector> = (0..CONTRACTION_VECTORS).map(|_| unit_vector(&mut rng, self.b.dim())).collect();
        let mut grid = vec![0.0];
        grid.extend(&self.t_grid);
        let c = contraction_check(&self.solution, &acc, &hs, &grid)?;
        r.num("max_growth", c.max_growth)
            .num("max_step_ratio", c.max_step_ratio)
            .metric("vectors", c.h_count);
        Ok(Vec::new())
    }

    fn initial(&self, r: &mut CheckReport) -> Result<Vec<(String, String)>, Error> {
        let rep = initial_condition_trace(&self.solution, &default_t_sequence())?;
        r.num("final_error", rep.final_error)
            .num("threshold", rep.threshold)
            .metric("monotone", rep.monotone);
        r.pass = rep.passed();
        Ok(vec![("initial.csv".into(), rep.to_csv())])
    }

    /// Tail norms at the smallest grid time.
    fn tails(&self, r: &mut CheckReport) -> Result<Vec<(String, String)>, Error> {
        let t = self.t_grid[0];
        let trace = ContourIntegrator::new(&self.b, &self.phi, &self.spec).tail_norms(&self.h, t)?;
        let threshold = TAIL_THRESHOLD * self.h_norm();
        let settle = trace.settles_below(threshold);
        let last = trace.last_pole_ring;
        let after = trace
            .rows
            .iter()
            .filter(|row| last.is_none_or(|l| row.nu > l))
            .map(|row| row.max())
            .fold(0.0, f64::max);
        r.num("t", t)
            .num("threshold", threshold)
            .metric("last_pole_ring", last)
            .metric("settles_at", settle)
            .metric("circles", trace.rows.len())
            .num("final_norm", trace.rows.last().map_or(0.0, |row| row.max()))
            .num("max_after_last_pole", after);
        r.pass = settle.is_some();
        Ok(vec![("tails.csv".into(), trace.to_csv())])
    }

    /// Singular-value diagnostics of `B`. Only the Lidskii ordering decides
    /// pass/fail; a finite profile may be too short for an exponent fit.
    fn stats(&self, r: &mut CheckReport) -> Result<Vec<(String, String)>, Error> {
        let ordering = lidskii_ordering_check(&self.b, 1, 1.0, 1e-10)?;
        r.num("ordering_lhs_eigen", ordering.lhs_eigen)
            .num("ordering_lhs_singular", ordering.lhs_singular)
            .num("ordering_rhs", ordering.rhs)
            .metric("ordering_holds", ordering.holds);
        let profile = SingularProfile::from_operator(&self.b)?;
        match convergence_exponent_estimate(&profile) {
            Ok(e) => r.num("exponent", e.value),
            Err(e) => r.metric("exponent", serde_json::Value::Null).metric("exponent_note", e.kind()),
        };
        let power = SingularProfile::from_power(&self.b, 2)?;
        let sat = power.saturation_radius().sqrt();
        let grid: Vec<f64> = (0..24).map(|k| 0.1 * (100.0 * sat).powf(k as f64 / 23.0)).collect();
        let table = lemma2_diagnostics(&power, 1.0, 1.0, &grid)?;
        r.num("beta_max", table.rows.iter().map(|x| x.beta).fold(0.0, f64::max));
        r.pass = ordering.holds;
        Ok(vec![("stats.csv".into(), table.to_csv())])
    }
}
