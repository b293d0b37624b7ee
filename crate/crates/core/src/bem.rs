//! Nyström boundary-element solver for the harmonic parts of Green functions.
//!
//! Dirichlet: `g_D(., y)` is a double layer `sum_j w_j dn_w G(x, w_j) k_j` with
//! `(I/2 + K_D) k = -G(., y)` on the boundary.
//!
//! Neumann: `g'(., y)` is a single layer `-sum_j w_j G(x, w_j) k_j` with
//! `(I/2 + K_N) k = -dn_x [G + gtilde](., y)`, `gtilde = -|x - y|^2 / (4 |Omega|)`.
//! `I/2 + K_N` annihilates nothing but has a range of mean zero, so the
//! system is solved as `(A + 1 w^T) k = h`. The additive constant is pinned
//! by `int_Omega G_N(x, y) dx = 0`, evaluated by Green's identity against
//! `q = |x|^2 / 4`; boundary values of the single layer use Kress' product
//! quadrature for the logarithmic singularity.

use crate::geometry::{BoundaryQuadrature, ConvexDomain};
use crate::greens::{grad_log_kernel, log_kernel, Flavor};
use crate::{Error, Point, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

const INV_2PI: f64 = 0.5 / PI;

/// Condition numbers above this are reported as ill-conditioned.
pub const CONDITION_WARN: f64 = 1e6;

#[derive(Clone, Debug)]
struct NeumannGauge {
    /// `p_i = w_i (x_i . n_i) / 2`
    p: Vec<f64>,
    /// `V^T p` with `V` the boundary single-layer matrix.
    r: DVector<f64>,
    /// `(1/|Omega|) int_Omega |x|^2 / 4`
    qbar: f64,
}

#[derive(Clone, Debug)]
pub struct NystromSystem {
    flavor: Flavor,
    domain: Arc<ConvexDomain>,
    quad: BoundaryQuadrature,
    kernel: DMatrix<f64>,
    system: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
    gauge: Option<NeumannGauge>,
}

/// Double-layer kernel `dn_w G(x, w)`.
#[inline]
fn double_layer(x: &Point, w: &Point, nw: &Point) -> f64 {
    let d = w - x;
    d.dot(nw) * INV_2PI / d.norm_squared()
}

/// `grad_x` of [`double_layer`].
#[inline]
fn double_layer_grad(x: &Point, w: &Point, nw: &Point) -> Point {
    let d = w - x;
    let r2 = d.norm_squared();
    (-nw + d * (2.0 * d.dot(nw) / r2)) * (INV_2PI / r2)
}

/// Kress weights `R_j(t_i)` for `int ln(4 sin^2((t - s)/2)) f(s) ds`, indexed by `|i - j|`.
fn kress_weights(nb: usize) -> Vec<f64> {
    let n = nb / 2;
    let nf = n as f64;
    (0..nb)
        .map(|k| {
            let t = PI * k as f64 / nf;
            let mut s = 0.0;
            for m in 1..n {
                s += (m as f64 * t).cos() / m as f64;
            }
            -2.0 * PI / nf * s - PI / (nf * nf) * (nf * t).cos()
        })
        .collect()
}

/// 1-norm of a matrix.
fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager's estimate of `||A^-1||_1`.
fn inverse_norm1_estimate(
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lut: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
) -> f64 {
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let Some(y) = lu.solve(&x) else {
            return f64::INFINITY;
        };
        est = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let Some(z) = lut.solve(&xi) else {
            return f64::INFINITY;
        };
        let (j, zmax) = z
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    est
}

impl NystromSystem {
    pub fn assemble(domain: Arc<ConvexDomain>, flavor: Flavor, n_b: usize) -> Result<Self> {
        if n_b < 32 || n_b % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "n_b must be even and at least 32, got {n_b}"
            )));
        }
        let quad = domain.quadrature(n_b);
        let n = n_b;
        let mut kernel = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let xi = quad.points[i];
            for j in 0..n {
                let k = if i == j {
                    quad.curvature[i] / (4.0 * PI)
                } else {
                    match flavor {
                        Flavor::Dirichlet => double_layer(&xi, &quad.points[j], &quad.normals[j]),
                        // -dn_x G(x, w) = (w - x) . n_x / (2 pi |w - x|^2)
                        Flavor::Neumann => double_layer(&xi, &quad.points[j], &quad.normals[i]),
                    }
                };
                let k = match (flavor, i == j) {
                    (Flavor::Neumann, true) => -k,
                    _ => k,
                };
                if flavor == Flavor::Dirichlet && k < -1e-12 {
                    return Err(Error::InvalidDomain(format!(
                        "double-layer kernel negative ({k:e}) at nodes {i},{j}; boundary not convex"
                    )));
                }
                kernel[(i, j)] = k;
            }
        }
        let mut system = kernel.clone();
        for i in 0..n {
            for j in 0..n {
                system[(i, j)] *= quad.weights[j];
            }
            system[(i, i)] += 0.5;
        }
        if flavor == Flavor::Neumann {
            for i in 0..n {
                for j in 0..n {
                    system[(i, j)] += quad.weights[j];
                }
            }
        }
        let lu = system.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem);
        }
        let lut = system.transpose().lu();
        let condition = norm1(&system) * inverse_norm1_estimate(&lu, &lut, n);
        if !condition.is_finite() {
            return Err(Error::SingularSystem);
        }

        let gauge = match flavor {
            Flavor::Dirichlet => None,
            Flavor::Neumann => Some(Self::neumann_gauge(&domain, &quad)),
        };
        Ok(Self {
            flavor,
            domain,
            quad,
            kernel,
            system,
            lu,
            condition,
            gauge,
        })
    }

    fn neumann_gauge(domain: &ConvexDomain, quad: &BoundaryQuadrature) -> NeumannGauge {
        let n = quad.len();
        let rk = kress_weights(n);
        let h = PI / (n / 2) as f64;
        // Boundary values of the single layer: (S k)(x_i) = sum_j V_ij k_j.
        let mut v = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let smooth = if i == j {
                    quad.speed[i].ln()
                } else {
                    let t = quad.mu[i] - quad.mu[j];
                    let s2 = 4.0 * (0.5 * t).sin().powi(2);
                    0.5 * ((quad.points[i] - quad.points[j]).norm_squared() / s2).ln()
                };
                let log_int = 0.5 * rk[i.abs_diff(j)] + h * smooth;
                v[(i, j)] = -INV_2PI * quad.speed[j] * log_int;
            }
        }
        let p: Vec<f64> = (0..n)
            .map(|i| 0.5 * quad.weights[i] * quad.points[i].dot(&quad.normals[i]))
            .collect();
        let pv = DVector::from_column_slice(&p);
        let r = v.transpose() * pv;
        let int_q: f64 = (0..n)
            .map(|i| {
                quad.weights[i] * quad.points[i].dot(&quad.normals[i]) * quad.points[i].norm_squared()
                    / 16.0
            })
            .sum();
        NeumannGauge {
            p,
            r,
            qbar: int_q / domain.area(),
        }
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn domain(&self) -> &Arc<ConvexDomain> {
        &self.domain
    }

    pub fn nodes(&self) -> &BoundaryQuadrature {
        &self.quad
    }

    pub fn n_b(&self) -> usize {
        self.quad.len()
    }

    /// Raw kernel values `K_#(x_i, x_j)` (without weights or the identity part).
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// The factorised matrix (regularised for Neumann).
    pub fn system_matrix(&self) -> &DMatrix<f64> {
        &self.system
    }

    /// Estimated 1-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition > CONDITION_WARN
    }

    /// Minimum distance to the wall for layer evaluations.
    pub fn min_eval_distance(&self) -> f64 {
        self.domain.perimeter() / self.n_b() as f64
    }

    fn check_interior(&self, x: &Point) -> Result<()> {
        let sd = self.domain.signed_distance(x);
        if sd > 1e-12 {
            return Err(Error::OutsideDomain);
        }
        if -sd < self.min_eval_distance() {
            return Err(Error::NearBoundary);
        }
        Ok(())
    }

    pub fn solve_density(&self, data: &[f64]) -> Result<Vec<f64>> {
        if data.len() != self.n_b() {
            return Err(Error::InvalidArgument("boundary data length mismatch".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite boundary data".into()));
        }
        let rhs = DVector::from_column_slice(data);
        let k = self.lu.solve(&rhs).ok_or(Error::SingularSystem)?;
        Ok(k.iter().copied().collect())
    }

    /// `||M k - data||_inf` for the factorised matrix `M`.
    pub fn residual(&self, density: &[f64], data: &[f64]) -> f64 {
        let k = DVector::from_column_slice(density);
        let h = DVector::from_column_slice(data);
        (&self.system * k - h).amax()
    }

    /// Layer potential of `density` at an interior point.
    pub fn evaluate_harmonic(&self, density: &[f64], x: &Point) -> Result<f64> {
        self.check_interior(x)?;
        Ok(self.layer(density, x))
    }

    pub fn evaluate_harmonic_grad(&self, density: &[f64], x: &Point) -> Result<Point> {
        self.check_interior(x)?;
        Ok(self.layer_grad(density, x))
    }

    fn layer(&self, k: &[f64], x: &Point) -> f64 {
        let q = &self.quad;
        let mut s = 0.0;
        match self.flavor {
            Flavor::Dirichlet => {
                for j in 0..q.len() {
                    s += q.weights[j] * double_layer(x, &q.points[j], &q.normals[j]) * k[j];
                }
            }
            Flavor::Neumann => {
                for j in 0..q.len() {
                    s -= q.weights[j] * log_kernel(x, &q.points[j]) * k[j];
                }
            }
        }
        s
    }

    fn layer_grad(&self, k: &[f64], x: &Point) -> Point {
        let q = &self.quad;
        let mut s = Point::zeros();
        match self.flavor {
            Flavor::Dirichlet => {
                for j in 0..q.len() {
                    s += double_layer_grad(x, &q.points[j], &q.normals[j]) * (q.weights[j] * k[j]);
                }
            }
            Flavor::Neumann => {
                for j in 0..q.len() {
                    s -= grad_log_kernel(x, &q.points[j]) * (q.weights[j] * k[j]);
                }
            }
        }
        s
    }

    /// Boundary data `hbar_#(., y)` at the nodes.
    pub fn source_data(&self, y: &Point) -> Vec<f64> {
        let q = &self.quad;
        let area = self.domain.area();
        (0..q.len())
            .map(|i| {
                let w = q.points[i];
                match self.flavor {
                    Flavor::Dirichlet => -log_kernel(&w, y),
                    Flavor::Neumann => {
                        let d = w - y;
                        let dn = d.dot(&q.normals[i]);
                        -(dn * INV_2PI / d.norm_squared() - dn / (2.0 * area))
                    }
                }
            })
            .collect()
    }

    fn gtilde(&self, x: &Point, y: &Point) -> f64 {
        -(x - y).norm_squared() / (4.0 * self.domain.area())
    }

    /// `(1/|Omega|) int_Omega (G + gtilde + S k)(x, y) dx`.
    fn gauge_shift(&self, y: &Point, k: &[f64]) -> f64 {
        let g = self.gauge.as_ref().expect("neumann gauge");
        let q = &self.quad;
        let mut s = 0.25 * y.norm_squared() - g.qbar;
        for i in 0..q.len() {
            s += g.p[i] * (log_kernel(&q.points[i], y) + self.gtilde(&q.points[i], y));
        }
        s += g.r.iter().zip(k).map(|(a, b)| a * b).sum::<f64>();
        s / self.domain.area()
    }

    /// Solved density for the source `y`.
    pub fn source_density(&self, y: &Point) -> Result<Vec<f64>> {
        self.check_interior(y)?;
        self.solve_density(&self.source_data(y))
    }

    /// Harmonic part `gbar_#(x, y)`.
    pub fn harmonic(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_interior(x)?;
        let k = self.source_density(y)?;
        Ok(self.harmonic_with_density(&k, x, y))
    }

    /// `gbar_#(x, y)` given the density already solved for `y`.
    pub fn harmonic_with_density(&self, k: &[f64], x: &Point, y: &Point) -> f64 {
        match self.flavor {
            Flavor::Dirichlet => self.layer(k, x),
            Flavor::Neumann => self.gtilde(x, y) + self.layer(k, x) - self.gauge_shift(y, k),
        }
    }

    pub fn grad_harmonic(&self, x: &Point, y: &Point) -> Result<Point> {
        self.check_interior(x)?;
        let k = self.source_density(y)?;
        Ok(self.grad_harmonic_with_density(&k, x, y))
    }

    pub fn grad_harmonic_with_density(&self, k: &[f64], x: &Point, y: &Point) -> Point {
        match self.flavor {
            Flavor::Dirichlet => self.layer_grad(k, x),
            Flavor::Neumann => {
                -(x - y) / (2.0 * self.domain.area()) + self.layer_grad(k, x)
            }
        }
    }

    /// Robin function by solving with data `hbar_#(., x)` and evaluating at `x`.
    pub fn robin(&self, x: &Point) -> Result<f64> {
        self.harmonic(x, x)
    }

    /// Boundary-to-interior potential `int G_N(x, y) h(y) dS_y` for Neumann data `h`
    /// at the nodes, in the zero-mean gauge. Returns `(value, gradient)` closures'
    /// ingredients: the harmonic density, the source strength `c = int h / |Omega|`
    /// and the mean `ubar`.
    pub fn neumann_boundary_solve(&self, h: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
        if self.flavor != Flavor::Neumann {
            return Err(Error::InvalidArgument("Neumann system required".into()));
        }
        let g = self.gauge.as_ref().expect("neumann gauge");
        let q = &self.quad;
        let total: f64 = (0..q.len()).map(|i| q.weights[i] * h[i]).sum();
        let c = total / self.domain.area();
        let data: Vec<f64> = (0..q.len())
            .map(|i| h[i] - 0.5 * c * q.points[i].dot(&q.normals[i]))
            .collect();
        let k = self.solve_density(&data)?;
        // int_Omega v = sum_i p_i v_i - sum_i w_i q_i dn v_i
        let mut int_v: f64 = g.r.iter().zip(&k).map(|(a, b)| a * b).sum();
        for i in 0..q.len() {
            int_v -= q.weights[i] * 0.25 * q.points[i].norm_squared() * data[i];
        }
        let ubar = c * g.qbar + int_v / self.domain.area();
        Ok((k, c, ubar))
    }

    /// Single-layer value of a density (Neumann flavor), no distance check.
    pub fn layer_value(&self, k: &[f64], x: &Point) -> f64 {
        self.layer(k, x)
    }

    pub fn layer_gradient(&self, k: &[f64], x: &Point) -> Point {
        self.layer_grad(k, x)
    }

    pub fn check_eval_point(&self, x: &Point) -> Result<()> {
        self.check_interior(x)
    }

    /// Dump the kernel matrix (and optionally a density) as CSV.
    pub fn write_csv(&self, path: &Path, density: Option<&[f64]>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            f,
            "# nystrom flavor={:?} n_b={} layout=row-major kernel K(x_i,x_j) then optional density row",
            self.flavor,
            self.n_b()
        )?;
        for i in 0..self.n_b() {
            let row: Vec<String> = (0..self.n_b()).map(|j| self.kernel[(i, j)].to_string()).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        if let Some(k) = density {
            let row: Vec<String> = k.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}
