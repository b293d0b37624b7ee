//! Verification batteries behind `sim verify <suite>`.
//!
//! Each suite runs a list of named checks and renders a JUnit-style report.
//! `quick` shrinks the expensive benchmarks for smoke testing; the full sizes
//! are the acceptance sizes.

use crate::bem::NystromSystem;
use crate::boundary::BoundaryDensity;
use crate::charges::{ChargeModel, ChargeState};
use crate::config::{ChargeSpec, DensitySpec, DiagnosticsToggles, RunConfig};
use crate::desingularization::{sweep, SweepRow, SweepSpec};
use crate::geometry::{reflect_across, ConvexDomain, Shape};
use crate::greens::{disk_green, disk_green_grad, disk_robin, halfspace_robin, Flavor, GreenEvaluator};
use crate::plasma::{BoundaryRule, PhaseBox};
use crate::run::{run, Summary};
use crate::{pt, Error, Point, Result};
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Greens,
    Bem,
    Conserve,
    Desing,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greens" => Ok(Suite::Greens),
            "bem" => Ok(Suite::Bem),
            "conserve" => Ok(Suite::Conserve),
            "desing" => Ok(Suite::Desing),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite {other:?} (expected greens, bem, conserve or desing)"
            ))),
        }
    }
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Greens => "greens",
            Suite::Bem => "bem",
            Suite::Conserve => "conserve",
            Suite::Desing => "desing",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn to_junit(&self) -> String {
        let total: f64 = self.checks.iter().map(|c| c.seconds).sum();
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<testsuite name="{}" tests="{}" failures="{}" time="{:.3}">"#,
            self.suite,
            self.checks.len(),
            self.failures(),
            total
        );
        for c in &self.checks {
            let _ = write!(
                s,
                r#"  <testcase classname="{}" name="{}" time="{:.3}">"#,
                self.suite,
                xml_escape(&c.name),
                c.seconds
            );
            if c.passed {
                let _ = writeln!(s, "<system-out>{}</system-out></testcase>", xml_escape(&c.detail));
            } else {
                let _ = writeln!(
                    s,
                    r#"<failure message="{}"/></testcase>"#,
                    xml_escape(&c.detail)
                );
            }
        }
        let _ = writeln!(s, "</testsuite>");
        s
    }

    fn push(&mut self, name: &str, start: Instant, result: Result<(bool, String)>) {
        let (passed, detail) = match result {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    pub quick: bool,
}

/// Run one suite; scratch output (benchmark runs) goes under `work`.
pub fn run_suite(suite: Suite, opts: VerifyOptions, work: &Path) -> Result<SuiteReport> {
    let mut r = SuiteReport {
        suite: suite.name().into(),
        checks: Vec::new(),
    };
    match suite {
        Suite::Greens => greens_suite(&mut r),
        Suite::Bem => bem_suite(&mut r),
        Suite::Conserve => conserve_suite(&mut r, opts, work)?,
        Suite::Desing => desing_suite(&mut r, opts),
    }
    Ok(r)
}

fn disk_probes(n: usize, rmax: f64) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let u = crate::plasma::halton4(k as u64 + 1);
            let r = rmax * u[0].sqrt();
            pt(r * (TAU * u[1]).cos(), r * (TAU * u[1]).sin())
        })
        .collect()
}

fn greens_suite(r: &mut SuiteReport) {
    let t = Instant::now();
    let ys = disk_probes(20, 0.95);
    let res = (|| {
        let mut worst: f64 = 0.0;
        for k in 0..256 {
            let th = TAU * k as f64 / 256.0;
            let x = pt(th.cos(), th.sin());
            for y in &ys {
                worst = worst.max(disk_green(Flavor::Dirichlet, &x, y)?.abs());
            }
        }
        Ok((worst <= 1e-12, format!("max |G_D| on the circle = {worst:.3e}")))
    })();
    r.push("disk_dirichlet_boundary_trace", t, res);

    let t = Instant::now();
    let res = (|| {
        let mut worst: f64 = 0.0;
        for flavor in [Flavor::Dirichlet, Flavor::Neumann] {
            for (i, x) in ys.iter().enumerate() {
                for y in &ys[i + 1..] {
                    let d = disk_green(flavor, x, y)? - disk_green(flavor, y, x)?;
                    worst = worst.max(d.abs());
                }
            }
        }
        Ok((worst <= 1e-13, format!("max |G(x,y) - G(y,x)| = {worst:.3e}")))
    })();
    r.push("green_symmetry", t, res);

    let t = Instant::now();
    let res = (|| {
        let mut worst: f64 = 0.0;
        for k in 0..64 {
            let th = TAU * k as f64 / 64.0;
            let n = pt(th.cos(), th.sin());
            let x = n * (1.0 - 1e-13);
            for y in &ys {
                worst = worst.max(disk_green_grad(Flavor::Neumann, &x, y)?.dot(&n).abs());
            }
        }
        Ok((worst <= 1e-9, format!("max |dn G_N| on the circle = {worst:.3e}")))
    })();
    r.push("disk_neumann_normal_derivative", t, res);

    let t = Instant::now();
    let res = (|| {
        let a = halfspace_robin(Flavor::Dirichlet, &[0.5, 0.3])?;
        let b = halfspace_robin(Flavor::Dirichlet, &[0.25, 0.1, -0.2])?;
        let c = halfspace_robin(Flavor::Neumann, &[0.25, 0.0, 0.0])?;
        let ok = a.abs() <= 1e-12
            && (b - 1.0 / TAU).abs() <= 1e-12
            && (c + 1.0 / TAU).abs() <= 1e-12;
        Ok((ok, format!("R_D(2d, 0.5) = {a:e}, R_D(3d, 0.25) = {b}, R_N(3d, 0.25) = {c}")))
    })();
    r.push("halfspace_robin_closed_forms", t, res);

    let t = Instant::now();
    let res = (|| {
        let rs = [0.5, 0.9, 0.99, 0.999];
        let mut rd = Vec::new();
        let mut rn = Vec::new();
        let mut comp: f64 = 0.0;
        for &s in &rs {
            let x = pt(s, 0.0);
            let d = 1.0 - s;
            let a = disk_robin(Flavor::Dirichlet, &x)?;
            let b = disk_robin(Flavor::Neumann, &x)?;
            comp = comp.max((a + d.ln() / TAU).abs()).max((b - d.ln() / TAU).abs());
            rd.push(a);
            rn.push(b);
        }
        let inc = rd.windows(2).all(|w| w[1] > w[0]);
        let dec = rn.windows(2).all(|w| w[1] < w[0]);
        Ok((
            inc && dec && comp <= 1.0,
            format!("R_D {rd:?}, R_N {rn:?}, max compensated {comp:.4}"),
        ))
    })();
    r.push("disk_robin_monotone", t, res);
}

/// Max error of the Nyström Dirichlet Robin function against the disk formula.
pub fn bem_robin_error(n_b: usize, probes: &[Point]) -> Result<f64> {
    let sys = NystromSystem::assemble(Arc::new(ConvexDomain::unit_disk()), Flavor::Dirichlet, n_b)?;
    let mut worst: f64 = 0.0;
    for x in probes {
        worst = worst.max((sys.robin(x)? - disk_robin(Flavor::Dirichlet, x)?).abs());
    }
    Ok(worst)
}

/// Robin values along the inward normal at the given depths.
pub fn robin_profile(
    domain: Arc<ConvexDomain>,
    flavor: Flavor,
    n_b: usize,
    mu: f64,
    depths: &[f64],
) -> Result<Vec<f64>> {
    let ev = GreenEvaluator::for_domain(domain.clone(), flavor, n_b)?;
    let xb = domain.boundary_point(mu);
    let n = domain.normal(mu);
    depths.iter().map(|d| ev.robin(&(xb - n * *d))).collect()
}

fn bem_suite(r: &mut SuiteReport) {
    let t = Instant::now();
    let probes = disk_probes(50, 0.9);
    let res = (|| {
        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&n| bem_robin_error(n, &probes))
            .collect::<Result<_>>()?;
        let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
        let ok = errs[2] <= 1e-5 && order >= 2.0;
        Ok((ok, format!("errors {errs:?} at n_b 64/128/256, observed order {order:.2}")))
    })();
    r.push("bem_disk_robin", t, res);

    let t = Instant::now();
    let res = (|| {
        let depths = [0.4, 0.2, 0.1, 0.05];
        let mut ok = true;
        let mut detail = String::new();
        let ellipse = Arc::new(ConvexDomain::new(Shape::Ellipse { a: 1.5, b: 1.0 })?);
        for mu in [0.0, PI / 2.0] {
            let rd = robin_profile(ellipse.clone(), Flavor::Dirichlet, 512, mu, &depths)?;
            let rn = robin_profile(ellipse.clone(), Flavor::Neumann, 512, mu, &depths)?;
            ok &= rd.windows(2).all(|w| w[1] > w[0]) && rn.windows(2).all(|w| w[1] < w[0]);
            for (k, d) in depths.iter().enumerate() {
                ok &= (rd[k] + d.ln() / TAU).abs() <= 1.0 && (rn[k] - d.ln() / TAU).abs() <= 1.0;
            }
            let _ = write!(detail, "mu={mu:.3}: R_D {rd:.4?} R_N {rn:.4?}; ");
        }
        Ok((ok, detail))
    })();
    r.push("ellipse_robin_monotone", t, res);

    let t = Instant::now();
    let res = (|| {
        let sys = NystromSystem::assemble(Arc::new(ConvexDomain::ellipse(1.5, 1.0)?), Flavor::Neumann, 256)?;
        let c = sys.condition_estimate();
        Ok((!sys.is_ill_conditioned(), format!("condition estimate {c:.3e}")))
    })();
    r.push("bem_condition", t, res);
}

/// Energy is sampled at this fixed physical interval, whatever `dt` is.
pub const BENCHMARK_OUTPUT_INTERVAL: f64 = 5e-3;

/// The Neumann disk conservation benchmark.
pub fn benchmark_config(rule: BoundaryRule, count: usize, t_end: f64, dt: f64) -> RunConfig {
    RunConfig {
        flavor: Flavor::Neumann,
        boundary_rule: rule,
        dt,
        t_end,
        output_stride: ((BENCHMARK_OUTPUT_INTERVAL / dt).round() as usize).max(1),
        seed: 1,
        k1: 1.0,
        delta1: 0.05,
        bem_nodes: 128,
        snapshot_every: 0,
        softening: 0.01,
        h_n: DensitySpec::Preset("uniform".into()),
        h_cha: DensitySpec::Preset("uniform".into()),
        domain: Shape::Disk,
        charges: vec![ChargeSpec {
            xi: pt(0.5, 0.0),
            eta: Point::zeros(),
        }],
        plasma: vec![PhaseBox {
            x: [-0.7, -0.1],
            y: [-0.3, 0.3],
            vx: [-1.0, 1.0],
            vy: [-1.0, 1.0],
            weight: 1.0,
            count,
        }],
        diagnostics: DiagnosticsToggles::default(),
    }
}

/// Minimum wall distance of a lone charge released at rest at `(x0, 0)` on the disk.
pub fn lone_charge_min_distance(flavor: Flavor, x0: f64, t_end: f64, dt: f64) -> Result<(f64, bool)> {
    let ev = Arc::new(GreenEvaluator::exact_disk(flavor));
    let model = ChargeModel::new(ev, &BoundaryDensity::Uniform { total: 1.0 }, 1)?;
    let mut s = ChargeState::at_rest(vec![pt(x0, 0.0)]);
    let mut f = model.forces(&s)?;
    let mut dmin: f64 = 1.0 - x0;
    let steps = (t_end / dt).round() as usize;
    for _ in 0..steps {
        match model.step(&s, &f, dt) {
            Ok((n, g)) => {
                s = n;
                f = g;
            }
            Err(_) => return Ok((0.0, true)),
        }
        let d = 1.0 - s.xi[0].norm();
        dmin = dmin.min(d);
        if flavor == Flavor::Dirichlet && d < 0.01 {
            return Ok((d, true));
        }
    }
    Ok((dmin, false))
}

fn summary_line(s: &Summary) -> String {
    format!(
        "status {}, drift {:.3e}, l1 {} -> {}, absorbed {}, beta [{:.3}, {:.3}] over {} episodes, flagged {}",
        s.status,
        s.energy_drift_rel,
        s.l1_initial,
        s.l1_final,
        s.absorbed_weight,
        s.beta_min_ratio,
        s.beta_max_ratio,
        s.beta_episodes,
        s.beta_flagged
    )
}

fn conserve_suite(r: &mut SuiteReport, opts: VerifyOptions, work: &Path) -> Result<()> {
    let (n, t_end) = if opts.quick { (400, 0.2) } else { (2000, 1.0) };

    let t = Instant::now();
    let base = run(&benchmark_config(BoundaryRule::Reflection, n, t_end, 5e-4), &work.join("reflect_dt1"));
    let res = (|| {
        let s1 = base.as_ref().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let s2 = run(&benchmark_config(BoundaryRule::Reflection, n, t_end, 2.5e-4), &work.join("reflect_dt2"))?;
        let ratio = s1.energy_drift_rel / s2.energy_drift_rel;
        let ok = s1.ok()
            && s2.ok()
            && s1.energy_drift_rel <= 1e-3
            && s1.l1_final == s1.l1_initial
            && ratio >= 3.5;
        Ok((ok, format!("{}; halving ratio {ratio:.2}", summary_line(s1))))
    })();
    r.push("reflection_energy", t, res);

    let t = Instant::now();
    let res = (|| {
        let s = base.as_ref().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let grazing = s.events.iter().filter(|e| e.kind.contains("grazing")).count();
        let ok = s.ok()
            && grazing == 0
            && s.beta_flagged == 0
            && s.beta_max_ratio <= 50.0
            && s.beta_min_ratio >= 1.0 / 50.0;
        Ok((ok, format!("{}; grazing events {grazing}", summary_line(s))))
    })();
    r.push("velocity_lemma_monitor", t, res);

    let t = Instant::now();
    let res = (|| {
        let s = run(&benchmark_config(BoundaryRule::Absorption, n, t_end, 5e-4), &work.join("absorb"))?;
        let ok = s.ok() && (s.l1_final + s.absorbed_weight - s.l1_initial).abs() <= 1e-12 && s.energy_drift_rel <= 1e-3;
        Ok((ok, summary_line(&s)))
    })();
    r.push("absorption_bookkeeping", t, res);

    let t = Instant::now();
    let res = (|| {
        let (dd, hit) = lone_charge_min_distance(Flavor::Dirichlet, 0.5, 10.0, 1e-3)?;
        let (dn, nhit) = lone_charge_min_distance(Flavor::Neumann, 0.5, 10.0, 1e-3)?;
        let ok = hit && !nhit && dn > 0.0;
        Ok((ok, format!("Dirichlet reached {dd:.3e} of the wall; Neumann min wall distance {dn:.4}")))
    })();
    r.push("charge_wall_force_signs", t, res);

    let t = Instant::now();
    let res = (|| {
        let mut worst: f64 = 0.0;
        let mut involution = true;
        for k in 0..64 {
            let th = TAU * k as f64 / 64.0;
            let nrm = pt(th.cos(), th.sin());
            let v = pt(0.3 + k as f64 * 0.1, -1.7 + 0.05 * k as f64);
            let w = reflect_across(&nrm, &v);
            worst = worst.max((w.norm() - v.norm()).abs() / v.norm());
            involution &= (reflect_across(&nrm, &w) - v).norm() <= 1e-15 * v.norm();
        }
        let ev = Arc::new(GreenEvaluator::exact_disk(Flavor::Neumann));
        let model = ChargeModel::new(ev, &BoundaryDensity::Uniform { total: 2.0 }, 2)?;
        let s0 = ChargeState::new(vec![pt(0.4, 0.1), pt(-0.3, -0.2)], vec![pt(0.1, 0.2), pt(-0.2, 0.05)])?;
        let mut s = s0.clone();
        let mut f = model.forces(&s)?;
        for _ in 0..1000 {
            (s, f) = model.step(&s, &f, 1e-3)?;
        }
        for e in s.eta.iter_mut() {
            *e = -*e;
        }
        for _ in 0..1000 {
            (s, f) = model.step(&s, &f, 1e-3)?;
        }
        let back = (0..2)
            .map(|a| (s.xi[a] - s0.xi[a]).norm().max((s.eta[a] + s0.eta[a]).norm()))
            .fold(0.0, f64::max);
        let ok = worst <= 1e-13 && involution && back <= 1e-10;
        Ok((ok, format!("speed error {worst:.2e}, involution {involution}, reversal error {back:.2e}")))
    })();
    r.push("specular_and_reversal", t, res);
    Ok(())
}

/// Default desingularization sweep: one resting charge on the Neumann disk.
pub fn desing_spec(particles_per_blob: usize) -> SweepSpec {
    SweepSpec {
        centers: vec![(pt(0.5, 0.0), Point::zeros())],
        particles_per_blob,
        c_cut: 1.0,
        t_end: 0.5,
        dt: 1e-3,
    }
}

pub const DESING_EPS: [f64; 3] = [0.1, 0.05, 0.025];

/// Strictly decreasing `sup p` and last at most `0.2` of the first.
pub fn sweep_verdict(rows: &[SweepRow]) -> bool {
    rows.windows(2).all(|w| w[1].sup_p < w[0].sup_p)
        && match (rows.first(), rows.last()) {
            (Some(a), Some(b)) => b.sup_p <= 0.2 * a.sup_p,
            _ => false,
        }
}

fn desing_suite(r: &mut SuiteReport, opts: VerifyOptions) {
    let t = Instant::now();
    let nb = if opts.quick { 248 } else { 1000 };
    let res = (|| {
        let ev = Arc::new(GreenEvaluator::exact_disk(Flavor::Neumann));
        let rows = sweep(&desing_spec(nb), ev, &BoundaryDensity::Uniform { total: 1.0 }, &DESING_EPS)?;
        let ok = sweep_verdict(&rows);
        let detail = rows
            .iter()
            .map(|r| format!("eps {} sigma {:.4} sup_p {:.3e}", r.epsilon, r.sigma, r.sup_p))
            .collect::<Vec<_>>()
            .join("; ");
        Ok((ok, format!("monotone {ok}: {detail}")))
    })();
    r.push("desing_sweep", t, res);
}
