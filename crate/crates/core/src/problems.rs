//! Test operators: two convection-diffusion discretizations on the unit
//! square and a synthetic sequence of slowly varying systems.
//!
//! Grids count nodes per side including the boundary, so `nodes` lines give
//! `(nodes − 2)²` interior unknowns with spacing `h = 1/(nodes − 1)`.
//! Unknowns are ordered west to east, then south to north.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::precond::{ilutp_factor, FactorError, IlutpFactors};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("invalid problem size: {0}")]
    InvalidSize(String),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvectionScheme {
    /// Second-order central differences.
    #[default]
    Central,
    /// First-order upwinding.
    Upwind,
}

/// Dirichlet values on the four sides of the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

/// Uniform grid on the unit square, `nodes` lines per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn square(nodes: usize) -> Self {
        Self {
            nx: nodes,
            ny: nodes,
        }
    }

    pub fn unknowns(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }

    fn hx(&self) -> f64 {
        1.0 / (self.nx - 1) as f64
    }

    fn hy(&self) -> f64 {
        1.0 / (self.ny - 1) as f64
    }
}

/// `−∇·(a ∇u) + bx u_x + by u_y = f` with Dirichlet data.
struct Pde<'a> {
    diffusion: &'a dyn Fn(f64, f64) -> f64,
    convection: &'a dyn Fn(f64, f64) -> (f64, f64),
    source: &'a dyn Fn(f64, f64) -> f64,
    boundary: Boundary,
    scheme: ConvectionScheme,
}

/// Five-point finite-difference/finite-volume assembly; every row is scaled
/// by `hx·hy`. Diffusion coefficients are sampled at cell-face midpoints.
fn assemble(grid: Grid2D, pde: &Pde) -> (SparseMatrix<f64>, Vec<f64>) {
    let (mx, my) = (grid.nx - 2, grid.ny - 2);
    let (hx, hy) = (grid.hx(), grid.hy());
    let n = mx * my;
    let mut trip = Vec::with_capacity(5 * n);
    let mut rhs = vec![0.0; n];
    let idx = |i: usize, j: usize| (j - 1) * mx + (i - 1);
    for j in 1..=my {
        for i in 1..=mx {
            let (x, y) = (i as f64 * hx, j as f64 * hy);
            let row = idx(i, j);
            let ry = hy / hx;
            let rx = hx / hy;
            let ae = (pde.diffusion)(x + 0.5 * hx, y) * ry;
            let aw = (pde.diffusion)(x - 0.5 * hx, y) * ry;
            let an = (pde.diffusion)(x, y + 0.5 * hy) * rx;
            let as_ = (pde.diffusion)(x, y - 0.5 * hy) * rx;
            let (bx, by) = (pde.convection)(x, y);
            // Neighbour weights [E, W, N, S] and the diagonal.
            let mut w = [-ae, -aw, -an, -as_];
            let mut diag = ae + aw + an + as_;
            match pde.scheme {
                ConvectionScheme::Central => {
                    w[0] += 0.5 * bx * hy;
                    w[1] -= 0.5 * bx * hy;
                    w[2] += 0.5 * by * hx;
                    w[3] -= 0.5 * by * hx;
                }
                ConvectionScheme::Upwind => {
                    if bx >= 0.0 {
                        diag += bx * hy;
                        w[1] -= bx * hy;
                    } else {
                        diag -= bx * hy;
                        w[0] += bx * hy;
                    }
                    if by >= 0.0 {
                        diag += by * hx;
                        w[3] -= by * hx;
                    } else {
                        diag -= by * hx;
                        w[2] += by * hx;
                    }
                }
            }
            trip.push((row, row, diag));
            rhs[row] = hx * hy * (pde.source)(x, y);
            let neighbours = [
                (i + 1 <= mx, (i + 1, j), pde.boundary.east),
                (i > 1, (i.wrapping_sub(1), j), pde.boundary.west),
                (j + 1 <= my, (i, j + 1), pde.boundary.north),
                (j > 1, (i, j.wrapping_sub(1)), pde.boundary.south),
            ];
            for (k, &(inside, (ni, nj), bval)) in neighbours.iter().enumerate() {
                if w[k] == 0.0 {
                    continue;
                }
                if inside {
                    trip.push((row, idx(ni, nj), w[k]));
                } else {
                    rhs[row] -= w[k] * bval;
                }
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &trip).expect("indices are in range");
    (a, rhs)
}

/// Settings for the first model problem,
/// `−Δu + cx u_x + cy u_y = 0` with `(cx, cy) = (10, −10)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example1Config {
    pub nodes: usize,
    pub convection: (f64, f64),
    pub scheme: ConvectionScheme,
    pub boundary: Boundary,
}

impl Default for Example1Config {
    fn default() -> Self {
        Self {
            nodes: 42,
            convection: (10.0, -10.0),
            scheme: ConvectionScheme::Central,
            boundary: Boundary {
                south: 1.0,
                west: 1.0,
                north: 0.0,
                east: 0.0,
            },
        }
    }
}

/// First model problem on a `cells × cells` node grid (`n = (cells − 2)²`).
pub fn example1_operator(cells: usize) -> Result<(SparseMatrix<f64>, Vec<f64>), ProblemError> {
    example1_with(&Example1Config {
        nodes: cells,
        ..Default::default()
    })
}

pub fn example1_with(cfg: &Example1Config) -> Result<(SparseMatrix<f64>, Vec<f64>), ProblemError> {
    if cfg.nodes < 3 {
        return Err(ProblemError::InvalidSize(format!(
            "need at least 3 grid lines, got {}",
            cfg.nodes
        )));
    }
    let (cx, cy) = cfg.convection;
    let pde = Pde {
        diffusion: &|_, _| 1.0,
        convection: &move |_, _| (cx, cy),
        source: &|_, _| 0.0,
        boundary: cfg.boundary,
        scheme: cfg.scheme,
    };
    Ok(assemble(Grid2D::square(cfg.nodes), &pde))
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn centered(half_width: f64) -> Self {
        Self {
            x0: 0.5 - half_width,
            x1: 0.5 + half_width,
            y0: 0.5 - half_width,
            y1: 0.5 + half_width,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

/// Settings for the second model problem,
/// `−(a v_x)_x − (a v_y)_y + b(x, y) v_x = f` with `b = 2 exp(2(x² + y²))`.
///
/// The diffusion coefficient is `background` outside `inner_region` and
/// `inner` inside it. The source is `source` on `source_region`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example2Config {
    pub gridlines: usize,
    pub drop_tol: f64,
    pub pivot_tol: f64,
    pub background: f64,
    pub inner: f64,
    pub inner_region: Rect,
    pub source: f64,
    pub source_region: Rect,
    /// Multiplies `b`; zero removes convection.
    pub convection_scale: f64,
    pub boundary: Boundary,
    pub scheme: ConvectionScheme,
}

impl Default for Example2Config {
    fn default() -> Self {
        Self {
            gridlines: 129,
            drop_tol: 0.1,
            pivot_tol: 0.1,
            background: 1.0,
            inner: 1000.0,
            inner_region: Rect::centered(0.25),
            source: 100.0,
            source_region: Rect::centered(0.05),
            convection_scale: 1.0,
            boundary: Boundary {
                south: 1.0,
                west: 1.0,
                north: 0.0,
                east: 1.0,
            },
            scheme: ConvectionScheme::Central,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Example2 {
    pub matrix: SparseMatrix<f64>,
    pub rhs: Vec<f64>,
    pub factors: IlutpFactors<f64>,
}

/// Second model problem on `gridlines × gridlines` nodes with ILUTP factors
/// at `drop_tol`, using the default coefficient field.
pub fn example2_operator(gridlines: usize, drop_tol: f64) -> Result<Example2, ProblemError> {
    example2_with(&Example2Config {
        gridlines,
        drop_tol,
        ..Default::default()
    })
}

pub fn example2_with(cfg: &Example2Config) -> Result<Example2, ProblemError> {
    if cfg.gridlines < 5 {
        return Err(ProblemError::InvalidSize(format!(
            "need at least 5 grid lines, got {}",
            cfg.gridlines
        )));
    }
    let c = *cfg;
    let pde = Pde {
        diffusion: &move |x, y| {
            if c.inner_region.contains(x, y) {
                c.inner
            } else {
                c.background
            }
        },
        convection: &move |x, y| {
            (
                c.convection_scale * 2.0 * (2.0 * (x * x + y * y)).exp(),
                0.0,
            )
        },
        source: &move |x, y| {
            if c.source_region.contains(x, y) {
                c.source
            } else {
                0.0
            }
        },
        boundary: cfg.boundary,
        scheme: cfg.scheme,
    };
    let (matrix, rhs) = assemble(Grid2D::square(cfg.gridlines), &pde);
    let factors = ilutp_factor(&matrix, cfg.drop_tol, cfg.pivot_tol)?;
    Ok(Example2 {
        matrix,
        rhs,
        factors,
    })
}

/// Systems `A_i x = b_(i,κ)` with `A_i = A₀ + σ_i A₁ + δ_i A₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricSequence {
    pub a0: SparseMatrix<f64>,
    pub a1: SparseMatrix<f64>,
    pub a2: SparseMatrix<f64>,
    pub sigma: Vec<f64>,
    pub delta: Vec<f64>,
    /// `rhs[i][κ]` is the κ-th right-hand side for matrix `i`.
    pub rhs: Vec<Vec<Vec<f64>>>,
}

impl ParametricSequence {
    pub fn num_matrices(&self) -> usize {
        self.sigma.len()
    }

    pub fn total_systems(&self) -> usize {
        self.rhs.iter().map(Vec::len).sum()
    }

    pub fn matrix(&self, i: usize) -> SparseMatrix<f64> {
        SparseMatrix::linear_combination(&[
            (1.0, &self.a0),
            (self.sigma[i], &self.a1),
            (self.delta[i], &self.a2),
        ])
        .expect("same shape")
    }

    /// `(matrix index, rhs index)` of every system, in solve order.
    pub fn systems(&self) -> Vec<(usize, usize)> {
        self.rhs
            .iter()
            .enumerate()
            .flat_map(|(i, r)| (0..r.len()).map(move |kappa| (i, kappa)))
            .collect()
    }

    /// 1-based positions in the solve order where a new matrix starts.
    pub fn change_points(&self) -> Vec<usize> {
        let mut at = 1;
        let mut out = Vec::new();
        for r in &self.rhs {
            out.push(at);
            at += r.len();
        }
        out
    }
}

/// The most nearly square `nx × ny = n` split, as interior sizes.
fn interior_shape(n: usize) -> (usize, usize) {
    let mut a = (n as f64).sqrt() as usize;
    while a > 1 && n % a != 0 {
        a -= 1;
    }
    (a.max(1), n / a.max(1))
}

/// A deterministic synthetic sequence of `num_matrices × rhs_per_matrix` systems.
///
/// `A₀` is the first model problem's operator on an interior grid of `n`
/// nodes (as square as `n` allows). `A₁`, `A₂` carry uniform random values
/// on `A₀`'s pattern scaled to `‖A₀‖_F`, and `σ_i`, `δ_i` are
/// `perturbation_scale` times a uniform draw from `[0.5, 1.5]`. The κ-th
/// right-hand side rotates smoothly between two fixed random vectors.
pub fn synthetic_sequence(
    n: usize,
    num_matrices: usize,
    rhs_per_matrix: usize,
    perturbation_scale: f64,
    seed: u64,
) -> Result<ParametricSequence, ProblemError> {
    if n < 10 {
        return Err(ProblemError::InvalidSize(format!("need n >= 10, got {n}")));
    }
    if num_matrices == 0 || rhs_per_matrix == 0 {
        return Err(ProblemError::InvalidSize(
            "need at least one matrix and one right-hand side".into(),
        ));
    }
    let (mx, my) = interior_shape(n);
    let grid = Grid2D {
        nx: mx + 2,
        ny: my + 2,
    };
    let base = Example1Config::default();
    let (cx, cy) = base.convection;
    let pde = Pde {
        diffusion: &|_, _| 1.0,
        convection: &move |_, _| (cx, cy),
        source: &|_, _| 0.0,
        boundary: base.boundary,
        scheme: base.scheme,
    };
    let (a0, _) = assemble(grid, &pde);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm0 = a0.frobenius_norm();
    let perturbation = |rng: &mut ChaCha8Rng| {
        let trip: Vec<_> = a0
            .to_triplets()
            .into_iter()
            .map(|(i, j, _)| (i, j, rng.random_range(-1.0..1.0)))
            .collect();
        let m = SparseMatrix::from_triplets(n, n, &trip).expect("pattern of A0");
        let s = norm0 / m.frobenius_norm();
        m.scaled(s)
    };
    let a1 = perturbation(&mut rng);
    let a2 = perturbation(&mut rng);
    let draw = |rng: &mut ChaCha8Rng| perturbation_scale * rng.random_range(0.5..1.5);
    let sigma: Vec<f64> = (0..num_matrices).map(|_| draw(&mut rng)).collect();
    let delta: Vec<f64> = (0..num_matrices).map(|_| draw(&mut rng)).collect();
    let g0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rhs = (0..num_matrices)
        .map(|_| {
            (0..rhs_per_matrix)
                .map(|kappa| {
                    let t = std::f64::consts::FRAC_PI_2 * kappa as f64 / rhs_per_matrix as f64;
                    let (s, c) = t.sin_cos();
                    g0.iter().zip(&g1).map(|(a, b)| c * a + s * b).collect()
                })
                .collect()
        })
        .collect();
    Ok(ParametricSequence {
        a0,
        a1,
        a2,
        sigma,
        delta,
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{bicgstab_solve, SolverConfig};
    use crate::vector::relative_difference;
    use nalgebra::DVector;

    fn max_row_nnz(a: &SparseMatrix<f64>) -> usize {
        (0..a.nrows()).map(|i| a.row(i).0.len()).max().unwrap_or(0)
    }

    #[test]
    fn example1_default_size() {
        let (a, b) = example1_operator(42).unwrap();
        assert_eq!(a.nrows(), 1600);
        assert_eq!(b.len(), 1600);
        assert!(max_row_nnz(&a) <= 5);
        assert!((0..1600).all(|i| a.get(i, i) > 0.0));
    }

    #[test]
    fn example1_stencil_against_hand_values() {
        let (a, b) = example1_operator(42).unwrap();
        let h = 1.0 / 41.0;
        // Node (2, 2) has every neighbour inside.
        let row = 40 + 1;
        assert!((a.get(row, row) - 4.0).abs() < 1e-15);
        assert!((a.get(row, row + 1) - (-1.0 + 5.0 * h)).abs() < 1e-15);
        assert!((a.get(row, row - 1) - (-1.0 - 5.0 * h)).abs() < 1e-15);
        assert!((a.get(row, row + 40) - (-1.0 - 5.0 * h)).abs() < 1e-15);
        assert!((a.get(row, row - 40) - (-1.0 + 5.0 * h)).abs() < 1e-15);
        // South-west corner sees u = 1 on two sides, north-east corner sees 0.
        assert!((b[0] - ((1.0 + 5.0 * h) + (1.0 - 5.0 * h))).abs() < 1e-15);
        assert_eq!(b[1599], 0.0);
    }

    #[test]
    fn pure_diffusion_is_symmetric() {
        let cfg = Example1Config {
            nodes: 12,
            convection: (0.0, 0.0),
            ..Default::default()
        };
        let (a, _) = example1_with(&cfg).unwrap();
        let d = a.to_dense();
        assert_eq!((&d - d.transpose()).norm(), 0.0);
        let rowsum: Vec<f64> = (0..a.nrows()).map(|i| a.row(i).1.iter().sum()).collect();
        assert!(rowsum.iter().all(|&s| s >= -1e-15));
    }

    #[test]
    fn constant_solution_is_reproduced() {
        for scheme in [ConvectionScheme::Central, ConvectionScheme::Upwind] {
            let cfg = Example1Config {
                nodes: 5,
                scheme,
                boundary: Boundary {
                    south: 1.0,
                    west: 1.0,
                    north: 1.0,
                    east: 1.0,
                },
                ..Default::default()
            };
            let (a, b) = example1_with(&cfg).unwrap();
            let ones = a.matvec(&[1.0; 9]).unwrap();
            assert!(relative_difference(&ones, &b) <= 1e-14);
        }
    }

    #[test]
    fn upwind_rows_are_diagonally_dominant() {
        let cfg = Example1Config {
            nodes: 10,
            convection: (200.0, -200.0),
            scheme: ConvectionScheme::Upwind,
            ..Default::default()
        };
        let (a, _) = example1_with(&cfg).unwrap();
        for i in 0..a.nrows() {
            let (cols, vals) = a.row(i);
            let off: f64 = cols
                .iter()
                .zip(vals)
                .filter(|(&j, _)| j != i)
                .map(|(_, v)| v.abs())
                .sum();
            assert!(a.get(i, i) >= off - 1e-12);
            assert!(cols.iter().zip(vals).all(|(&j, &v)| j == i || v <= 0.0));
        }
    }

    #[test]
    fn tiny_grids_are_rejected() {
        assert!(example1_operator(2).is_err());
        assert!(example2_operator(4, 0.1).is_err());
        assert!(synthetic_sequence(9, 1, 1, 0.0, 0).is_err());
    }

    #[test]
    fn example2_constant_problem_has_constant_solution() {
        let cfg = Example2Config {
            gridlines: 12,
            inner: 1.0,
            source: 0.0,
            convection_scale: 0.0,
            boundary: Boundary {
                south: 1.0,
                west: 1.0,
                north: 1.0,
                east: 1.0,
            },
            ..Default::default()
        };
        let p = example2_with(&cfg).unwrap();
        let n = p.matrix.nrows();
        assert_eq!(n, 100);
        let cfg = SolverConfig {
            tol: 1e-10,
            max_itn: n,
            ..Default::default()
        };
        let sol = bicgstab_solve(&p.matrix, &p.rhs, &vec![0.0; n], None, &cfg).unwrap();
        assert!(sol.history.converged());
        assert!(relative_difference(&sol.x, &vec![1.0; n]) <= 1e-8);
    }

    #[test]
    fn example2_size_and_preconditioned_solve() {
        let p = example2_operator(33, 0.1).unwrap();
        assert_eq!(p.matrix.nrows(), 31 * 31);
        assert!(max_row_nnz(&p.matrix) <= 5);
        let n = p.matrix.nrows();
        let cfg = SolverConfig {
            tol: 1e-8,
            ..Default::default()
        };
        let sol = bicgstab_solve(&p.matrix, &p.rhs, &vec![0.5; n], Some(&p.factors), &cfg).unwrap();
        assert!(sol.history.converged(), "{}", sol.history.status);
        let oracle = p
            .matrix
            .to_dense()
            .lu()
            .solve(&DVector::from_column_slice(&p.rhs))
            .unwrap();
        assert!(relative_difference(&sol.x, oracle.as_slice()) <= 1e-5);
    }

    #[test]
    fn full_size_dimensions() {
        assert_eq!(Grid2D::square(129).unknowns(), 16129);
        assert_eq!(Grid2D::square(42).unknowns(), 1600);
    }

    #[test]
    fn sequence_shape_and_change_points() {
        let seq = synthetic_sequence(60, 3, 21, 1e-3, 7).unwrap();
        assert_eq!(seq.total_systems(), 63);
        assert_eq!(seq.change_points(), vec![1, 22, 43]);
        assert_eq!(seq.a0.nrows(), 60);
        for i in 0..3 {
            let rel = seq.sigma[i] * seq.a1.frobenius_norm() / seq.a0.frobenius_norm();
            assert!((0.5e-3..=1.5e-3).contains(&rel));
        }
    }

    #[test]
    fn zero_perturbation_gives_a0() {
        let seq = synthetic_sequence(30, 3, 2, 0.0, 1).unwrap();
        for i in 0..3 {
            assert_eq!(seq.matrix(i).to_dense(), seq.a0.to_dense());
        }
    }

    #[test]
    fn sequence_is_deterministic() {
        assert_eq!(
            synthetic_sequence(40, 2, 3, 1e-2, 9).unwrap(),
            synthetic_sequence(40, 2, 3, 1e-2, 9).unwrap()
        );
        assert_ne!(
            synthetic_sequence(40, 2, 3, 1e-2, 9).unwrap(),
            synthetic_sequence(40, 2, 3, 1e-2, 10).unwrap()
        );
    }

    #[test]
    fn sequence_systems_match_dense_lu() {
        let seq = synthetic_sequence(50, 2, 2, 1e-3, 3).unwrap();
        let cfg = SolverConfig {
            tol: 1e-12,
            ..Default::default()
        };
        for (i, kappa) in seq.systems() {
            let a = seq.matrix(i);
            let b = &seq.rhs[i][kappa];
            let sol = bicgstab_solve(&a, b, &vec![0.0; 50], None, &cfg).unwrap();
            let oracle = a
                .to_dense()
                .lu()
                .solve(&DVector::from_column_slice(b))
                .unwrap();
            assert!(relative_difference(&sol.x, oracle.as_slice()) <= 1e-6);
        }
    }
}
