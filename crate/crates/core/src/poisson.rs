//! Screened Poisson solver on a cell-centred rectangular grid.
//!
//! Discretizes `(beta - alpha * Laplacian) u = f` with the five-point stencil
//! and zero normal flux on the rectangle boundary (ghost cells mirror their
//! interior neighbour, so boundary rows simply drop the missing coupling).
//! The system is symmetric positive definite and solved by conjugate
//! gradients preconditioned with an aggregation multigrid V-cycle.

use crate::error::{Error, Result};

/// Five-point symmetric operator stored as diagonal plus east/north couplings.
#[derive(Debug, Clone)]
pub struct StencilOperator {
    pub nx: usize,
    pub ny: usize,
    pub diag: Vec<f64>,
    /// Coupling between `(i, j)` and `(i + 1, j)`, stored at `(i, j)`.
    pub east: Vec<f64>,
    /// Coupling between `(i, j)` and `(i, j + 1)`, stored at `(i, j)`.
    pub north: Vec<f64>,
}

impl StencilOperator {
    /// `beta * I - alpha * L_h` with Neumann boundary on an `nx` by `ny` grid of spacing `h`.
    pub fn screened_poisson(nx: usize, ny: usize, h: f64, alpha: f64, beta: f64) -> Self {
        let n = nx * ny;
        let k = alpha / (h * h);
        let mut diag = vec![beta; n];
        let mut east = vec![0.0; n];
        let mut north = vec![0.0; n];
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                if i + 1 < nx {
                    east[idx] = -k;
                    diag[idx] += k;
                    diag[idx + 1] += k;
                }
                if j + 1 < ny {
                    north[idx] = -k;
                    diag[idx] += k;
                    diag[idx + nx] += k;
                }
            }
        }
        Self { nx, ny, diag, east, north }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        let nx = self.nx;
        for ((yk, d), xk) in y.iter_mut().zip(&self.diag).zip(x) {
            *yk = d * xk;
        }
        // Couplings leaving the grid are stored as zero, so whole-array
        // shifts are exact.
        shifted_couple(&mut y[..n - 1], &self.east[..n - 1], &x[1..]);
        shifted_couple(&mut y[1..], &self.east[..n - 1], &x[..n - 1]);
        shifted_couple(&mut y[..n - nx], &self.north[..n - nx], &x[nx..]);
        shifted_couple(&mut y[nx..], &self.north[..n - nx], &x[..n - nx]);
    }

    /// Red-black Gauss-Seidel sweep. Colours are visited red then black, or
    /// black then red when `reverse` is set, so a forward pre-smoothing and a
    /// reversed post-smoothing keep the V-cycle symmetric.
    fn red_black(&self, inv_diag: &[f64], b: &[f64], x: &mut [f64], reverse: bool) {
        let colours = if reverse { [1, 0] } else { [0, 1] };
        for colour in colours {
            self.colour_sweep(inv_diag, b, x, colour);
        }
    }

    fn colour_sweep(&self, inv_diag: &[f64], b: &[f64], x: &mut [f64], colour: usize) {
        let nx = self.nx;
        let ny = self.ny;
        for j in 0..ny {
            let row = j * nx;
            let first = (colour + j) % 2;
            let interior_row = j > 0 && j + 1 < ny;
            for i in (first..nx).step_by(2) {
                let idx = row + i;
                let acc = if interior_row && i > 0 && i + 1 < nx {
                    self.east[idx] * x[idx + 1]
                        + self.east[idx - 1] * x[idx - 1]
                        + self.north[idx] * x[idx + nx]
                        + self.north[idx - nx] * x[idx - nx]
                } else {
                    self.boundary_coupling(x, i, j)
                };
                x[idx] = (b[idx] - acc) * inv_diag[idx];
            }
        }
    }

    fn boundary_coupling(&self, x: &[f64], i: usize, j: usize) -> f64 {
        let nx = self.nx;
        let idx = j * nx + i;
        let mut acc = 0.0;
        if i + 1 < nx {
            acc += self.east[idx] * x[idx + 1];
        }
        if i > 0 {
            acc += self.east[idx - 1] * x[idx - 1];
        }
        if j + 1 < self.ny {
            acc += self.north[idx] * x[idx + nx];
        }
        if j > 0 {
            acc += self.north[idx - nx] * x[idx - nx];
        }
        acc
    }

    /// Coarse operator over 2x2 aggregates. Couplings are the Galerkin
    /// sums scaled by `DIFFUSION_SCALE`, and the diagonal is set so each
    /// coarse row sum equals the summed fine row sums.
    fn coarsen(&self) -> StencilOperator {
        let cx = self.nx.div_ceil(2);
        let cy = self.ny.div_ceil(2);
        let mut diag = vec![0.0; cx * cy];
        let mut east = vec![0.0; cx * cy];
        let mut north = vec![0.0; cx * cy];
        let ones = vec![1.0; self.len()];
        let mut row_sums = vec![0.0; self.len()];
        self.apply(&ones, &mut row_sums);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let idx = j * self.nx + i;
                let c = (j / 2) * cx + i / 2;
                diag[c] += row_sums[idx];
                if i + 1 < self.nx && (i + 1) / 2 != i / 2 {
                    east[c] += DIFFUSION_SCALE * self.east[idx];
                }
                if j + 1 < self.ny && (j + 1) / 2 != j / 2 {
                    north[c] += DIFFUSION_SCALE * self.north[idx];
                }
            }
        }
        for j in 0..cy {
            for i in 0..cx {
                let c = j * cx + i;
                let e = east[c];
                let nv = north[c];
                diag[c] -= e + nv;
                if i + 1 < cx {
                    diag[c + 1] -= e;
                }
                if j + 1 < cy {
                    diag[c + cx] -= nv;
                }
            }
        }
        StencilOperator {
            nx: cx,
            ny: cy,
            diag,
            east,
            north,
        }
    }

    fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut a = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for k in 0..n {
            e[k] = 1.0;
            self.apply(&e, &mut col);
            for r in 0..n {
                a[r * n + k] = col[r];
            }
            e[k] = 0.0;
        }
        a
    }
}

fn shifted_couple(y: &mut [f64], coupling: &[f64], x: &[f64]) {
    for ((yk, c), xk) in y.iter_mut().zip(coupling).zip(x) {
        *yk += c * xk;
    }
}

/// Cholesky factor of a small dense SPD matrix (row-major, lower triangle used).
#[derive(Debug, Clone)]
struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    fn new(a: &[f64], n: usize) -> Option<Self> {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Self { n, l })
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
    }
}

const COARSEST_CELLS: usize = 64;

// Galerkin aggregation of the five-point stencil doubles the diffusion seen on
// the coarse grid; halving the couplings recovers the rediscretized operator.
const DIFFUSION_SCALE: f64 = 0.5;


/// Multigrid hierarchy used as a symmetric preconditioner.
#[derive(Debug, Clone)]
pub struct Multigrid {
    levels: Vec<StencilOperator>,
    inv_diag: Vec<Vec<f64>>,
    coarse: DenseCholesky,
    // Per-level scratch: rhs, solution, residual.
    scratch: Vec<[Vec<f64>; 3]>,
}

impl Multigrid {
    pub fn new(op: StencilOperator) -> Result<Self> {
        let mut levels = vec![op];
        while levels.last().is_some_and(|l| l.len() > COARSEST_CELLS) {
            let next = levels.last().expect("non-empty").coarsen();
            levels.push(next);
        }
        let last = levels.last().expect("non-empty");
        let coarse = DenseCholesky::new(&last.to_dense(), last.len())
            .ok_or_else(|| Error::invalid("operator is not positive definite"))?;
        let scratch = levels
            .iter()
            .map(|l| [vec![0.0; l.len()], vec![0.0; l.len()], vec![0.0; l.len()]])
            .collect();
        let inv_diag = levels.iter().map(|l| l.diag.iter().map(|d| 1.0 / d).collect()).collect();
        Ok(Self {
            levels,
            inv_diag,
            coarse,
            scratch,
        })
    }

    pub fn operator(&self) -> &StencilOperator {
        &self.levels[0]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// One V-cycle from a zero initial guess: `z ~= A^-1 r`.
    pub fn precondition(&mut self, r: &[f64], z: &mut [f64]) {
        self.scratch[0][0].copy_from_slice(r);
        self.vcycle(0);
        z.copy_from_slice(&self.scratch[0][1]);
    }

    fn vcycle(&mut self, level: usize) {
        let last = self.levels.len() - 1;
        let (head, tail) = self.scratch.split_at_mut(level + 1);
        let [b, x, res] = &mut head[level];
        if level == last {
            self.coarse.solve(b, x);
            return;
        }
        let op = &self.levels[level];
        x.iter_mut().for_each(|v| *v = 0.0);
        op.red_black(&self.inv_diag[level], b, x, false);
        op.apply(x, res);
        for (ri, bi) in res.iter_mut().zip(b.iter()) {
            *ri = bi - *ri;
        }
        // Restrict: sum the residual over each 2x2 aggregate.
        let coarse_nx = self.levels[level + 1].nx;
        let cb = &mut tail[0][0];
        cb.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..op.ny {
            for i in 0..op.nx {
                cb[(j / 2) * coarse_nx + i / 2] += res[j * op.nx + i];
            }
        }
        self.vcycle(level + 1);
        let (head, tail) = self.scratch.split_at_mut(level + 1);
        let [b, x, _] = &mut head[level];
        let cx = &tail[0][1];
        let op = &self.levels[level];
        for j in 0..op.ny {
            for i in 0..op.nx {
                x[j * op.nx + i] += cx[(j / 2) * coarse_nx + i / 2];
            }
        }
        op.red_black(&self.inv_diag[level], b, x, true);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    /// Relative residual after each iteration, starting with the initial guess.
    pub history: Vec<f64>,
}

/// Preconditioned conjugate gradients, warm-started from `x`.
///
/// The returned iterate is the minimal-residual smoothing of the CG
/// sequence, so `history` never increases.
pub fn pcg(mg: &mut Multigrid, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
            history: vec![0.0],
        });
    }
    let mut r = vec![0.0; n];
    mg.operator().apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    let mut history = vec![rel];
    if rel <= tol {
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: rel,
            history,
        });
    }
    // CG iterate and residual; `x`/`s` hold the smoothed pair.
    let mut xc = x.to_vec();
    let mut s = r.clone();
    let mut z = vec![0.0; n];
    mg.precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        mg.operator().apply(&p, &mut ap);
        let step = rz / dot(&p, &ap);
        for k in 0..n {
            xc[k] += step * p[k];
            r[k] -= step * ap[k];
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..n {
            let d = r[k] - s[k];
            num -= s[k] * d;
            den += d * d;
        }
        let eta = if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.0 };
        for k in 0..n {
            s[k] += eta * (r[k] - s[k]);
            x[k] += eta * (xc[k] - x[k]);
        }
        rel = dot(&s, &s).sqrt() / b_norm;
        history.push(rel);
        if rel <= tol {
            return Ok(SolveStats {
                iterations: it,
                relative_residual: rel,
                history,
            });
        }
        mg.precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NotConverged {
        residual: rel,
        iterations: max_iter,
    })
}
