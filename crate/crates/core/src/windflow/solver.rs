//! Cell-centred potential-flow solve on a masked grid.
//!
//! The outer ring of open cells carries Dirichlet data. Obstacle cells act
//! as reflected nodes (`φ_n = φ_P`), so their terms drop out of the stencil
//! and the normal gradient vanishes there. Open cells that cannot reach the
//! ring are enclosed: their potential is constant and their velocity zero.

use crate::geometry::ObstacleMask;

use super::WindError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Obstacle,
    Dirichlet,
    Unknown,
    Enclosed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    /// Red-black successive over-relaxation.
    Sor { omega: f64 },
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveControl {
    pub kind: SolverKind,
    /// Stop when the largest cell residual, in velocity units, falls to
    /// `tolerance · u_ref`.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for SolveControl {
    fn default() -> Self {
        SolveControl {
            kind: SolverKind::Sor { omega: 1.8 },
            tolerance: 1e-6,
            max_iters: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSolution {
    pub nx: usize,
    pub ny: usize,
    pub cell_size: f64,
    pub phi: Vec<f64>,
    pub state: Vec<CellState>,
    pub iterations: usize,
    /// Final largest residual divided by `u_ref`.
    pub residual: f64,
}

pub(crate) fn classify(mask: &ObstacleMask) -> Result<Vec<CellState>, WindError> {
    let (nx, ny) = (mask.nx, mask.ny);
    if nx < 3 || ny < 3 {
        return Err(WindError::Degenerate(format!("grid {nx}x{ny} is smaller than 3x3")));
    }
    if mask.count() == nx * ny {
        return Err(WindError::FullyMasked);
    }
    let mut state: Vec<CellState> = (0..nx * ny)
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            if mask.cells[k] {
                CellState::Obstacle
            } else if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                CellState::Dirichlet
            } else {
                CellState::Enclosed
            }
        })
        .collect();
    // Flood fill from the ring marks reachable interior cells as unknowns.
    let mut stack: Vec<usize> = (0..nx * ny).filter(|&k| state[k] == CellState::Dirichlet).collect();
    while let Some(k) = stack.pop() {
        let (i, j) = (k % nx, k / nx);
        let mut visit = |n: usize| {
            if state[n] == CellState::Enclosed {
                state[n] = CellState::Unknown;
                stack.push(n);
            }
        };
        if i > 0 {
            visit(k - 1);
        }
        if i + 1 < nx {
            visit(k + 1);
        }
        if j > 0 {
            visit(k - nx);
        }
        if j + 1 < ny {
            visit(k + nx);
        }
    }
    Ok(state)
}

/// Open-neighbour indices of an interior cell.
#[inline]
fn neighbours(k: usize, nx: usize) -> [usize; 4] {
    [k - 1, k + 1, k - nx, k + nx]
}

/// Net face flux out of cell `k` in velocity units: Σ(φ_n − φ_P)/h over open
/// neighbours.
pub(crate) fn cell_residual(phi: &[f64], state: &[CellState], k: usize, nx: usize, h: f64) -> f64 {
    let p = phi[k];
    let mut s = 0.0;
    for n in neighbours(k, nx) {
        if state[n] != CellState::Obstacle {
            s += phi[n] - p;
        }
    }
    s / h
}

fn max_residual(phi: &[f64], state: &[CellState], unknowns: &[usize], nx: usize, h: f64) -> f64 {
    unknowns
        .iter()
        .map(|&k| cell_residual(phi, state, k, nx, h).abs())
        .fold(0.0, f64::max)
}

/// Solves for the potential with `boundary(x, y)` on the ring (cell-centre
/// coordinates relative to the grid origin). `u_ref` scales the tolerance.
pub fn solve_potential(
    mask: &ObstacleMask,
    boundary: impl Fn(f64, f64) -> f64,
    u_ref: f64,
    control: &SolveControl,
) -> Result<PotentialSolution, WindError> {
    let state = classify(mask)?;
    let (nx, ny, h) = (mask.nx, mask.ny, mask.cell_size);
    // Warm start: the boundary function everywhere open.
    let mut phi: Vec<f64> = (0..nx * ny)
        .map(|k| match state[k] {
            CellState::Dirichlet | CellState::Unknown => {
                boundary((k % nx) as f64 * h + 0.5 * h, (k / nx) as f64 * h + 0.5 * h)
            }
            _ => 0.0,
        })
        .collect();
    let unknowns: Vec<usize> = (0..nx * ny).filter(|&k| state[k] == CellState::Unknown).collect();
    let target = control.tolerance * u_ref.abs().max(f64::MIN_POSITIVE);
    let (iterations, residual) = match control.kind {
        SolverKind::Sor { omega } => sor(&mut phi, &state, &unknowns, nx, h, omega, target, control.max_iters),
        SolverKind::Cg => cg(&mut phi, &state, &unknowns, nx, h, target, control.max_iters),
    };
    if residual > target {
        return Err(WindError::NotConverged {
            iterations,
            residual: residual / u_ref.abs().max(f64::MIN_POSITIVE),
        });
    }
    Ok(PotentialSolution {
        nx,
        ny,
        cell_size: h,
        phi,
        state,
        iterations,
        residual: residual / u_ref.abs().max(f64::MIN_POSITIVE),
    })
}

#[allow(clippy::too_many_arguments)]
fn sor(
    phi: &mut [f64],
    state: &[CellState],
    unknowns: &[usize],
    nx: usize,
    h: f64,
    omega: f64,
    target: f64,
    max_iters: usize,
) -> (usize, f64) {
    // Per-unknown open-neighbour lists; split by colour for red-black order.
    let mut colours: [Vec<(usize, [usize; 4], u8)>; 2] = [Vec::new(), Vec::new()];
    for &k in unknowns {
        let mut nb = [0usize; 4];
        let mut m = 0u8;
        for n in neighbours(k, nx) {
            if state[n] != CellState::Obstacle {
                nb[m as usize] = n;
                m += 1;
            }
        }
        let (i, j) = (k % nx, k / nx);
        colours[(i + j) % 2].push((k, nb, m));
    }
    let mut residual = max_residual(phi, state, unknowns, nx, h);
    if residual <= target {
        return (0, residual);
    }
    for it in 1..=max_iters {
        for colour in &colours {
            for &(k, nb, m) in colour {
                let s: f64 = nb[..m as usize].iter().map(|&n| phi[n]).sum();
                phi[k] += omega * (s / m as f64 - phi[k]);
            }
        }
        if it % 10 == 0 || it == max_iters {
            residual = max_residual(phi, state, unknowns, nx, h);
            if residual <= target {
                return (it, residual);
            }
        }
    }
    (max_iters, residual)
}

fn cg(
    phi: &mut [f64],
    state: &[CellState],
    unknowns: &[usize],
    nx: usize,
    h: f64,
    target: f64,
    max_iters: usize,
) -> (usize, f64) {
    let m = unknowns.len();
    if m == 0 {
        return (0, 0.0);
    }
    let mut slot = vec![usize::MAX; phi.len()];
    for (p, &k) in unknowns.iter().enumerate() {
        slot[k] = p;
    }
    let mut diag = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut links: Vec<[usize; 4]> = vec![[usize::MAX; 4]; m];
    for (p, &k) in unknowns.iter().enumerate() {
        for (e, n) in neighbours(k, nx).into_iter().enumerate() {
            match state[n] {
                CellState::Obstacle => {}
                CellState::Dirichlet => {
                    diag[p] += 1.0;
                    rhs[p] += phi[n];
                }
                _ => {
                    diag[p] += 1.0;
                    links[p][e] = slot[n];
                }
            }
        }
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        for p in 0..m {
            let mut s = diag[p] * x[p];
            for &q in &links[p] {
                if q != usize::MAX {
                    s -= x[q];
                }
            }
            out[p] = s;
        }
    };
    let mut x: Vec<f64> = unknowns.iter().map(|&k| phi[k]).collect();
    let mut ax = vec![0.0; m];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = (0..m).map(|p| rhs[p] - ax[p]).collect();
    let norm_inf = |r: &[f64]| r.iter().fold(0.0f64, |a, v| a.max(v.abs())) / h;
    let mut residual = norm_inf(&r);
    let mut iterations = 0;
    if residual > target {
        let mut z: Vec<f64> = (0..m).map(|p| r[p] / diag[p]).collect();
        let mut d = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ad = vec![0.0; m];
        while iterations < max_iters {
            iterations += 1;
            apply(&d, &mut ad);
            let dad: f64 = d.iter().zip(&ad).map(|(a, b)| a * b).sum();
            if dad <= 0.0 {
                break;
            }
            let alpha = rz / dad;
            for p in 0..m {
                x[p] += alpha * d[p];
                r[p] -= alpha * ad[p];
            }
            if iterations % 50 == 0 {
                // Refresh the recursive residual to stop drift.
                apply(&x, &mut ax);
                for p in 0..m {
                    r[p] = rhs[p] - ax[p];
                }
            }
            residual = norm_inf(&r);
            if residual <= target {
                break;
            }
            for p in 0..m {
                z[p] = r[p] / diag[p];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for p in 0..m {
                d[p] = z[p] + beta * d[p];
            }
        }
    }
    for (p, &k) in unknowns.iter().enumerate() {
        phi[k] = x[p];
    }
    (iterations, max_residual(phi, state, unknowns, nx, h))
}

/// Cell-centred velocity from the potential. Obstacle neighbours reflect
/// (`φ_n = φ_P`); at the domain edge a one-sided difference is used.
pub fn velocity(sol: &PotentialSolution) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny, h) = (sol.nx, sol.ny, sol.cell_size);
    let mut u = vec![0.0; nx * ny];
    let mut v = vec![0.0; nx * ny];
    let open = |k: usize| matches!(sol.state[k], CellState::Dirichlet | CellState::Unknown);
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if !open(k) {
                continue;
            }
            let p = sol.phi[k];
            let side = |n: usize| {
                if sol.state[n] == CellState::Obstacle {
                    p
                } else {
                    sol.phi[n]
                }
            };
            let grad = |lo: Option<usize>, hi: Option<usize>| match (lo, hi) {
                (Some(a), Some(b)) => (side(b) - side(a)) / (2.0 * h),
                (None, Some(b)) => (side(b) - p) / h,
                (Some(a), None) => (p - side(a)) / h,
                (None, None) => 0.0,
            };
            u[k] = grad((i > 0).then(|| k - 1), (i + 1 < nx).then(|| k + 1));
            v[k] = grad((j > 0).then(|| k - nx), (j + 1 < ny).then(|| k + nx));
        }
    }
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid2;

    fn mask(n: usize, block: Option<(usize, usize, usize, usize)>) -> ObstacleMask {
        let mut m = ObstacleMask::empty(Grid2 {
            origin: [0.0, 0.0],
            cell_size: 1.0,
            nx: n,
            ny: n,
        });
        if let Some((i0, i1, j0, j1)) = block {
            for j in j0..j1 {
                for i in i0..i1 {
                    m.cells[j * n + i] = true;
                }
            }
        }
        m
    }

    #[test]
    fn uniform_flow_is_exact() {
        let m = mask(20, None);
        for kind in [SolverKind::Sor { omega: 1.8 }, SolverKind::Cg] {
            let c = SolveControl {
                kind,
                ..Default::default()
            };
            let s = solve_potential(&m, |x, _| 3.0 * x, 3.0, &c).unwrap();
            let (u, v) = velocity(&s);
            assert!(u.iter().all(|x| (x - 3.0).abs() < 1e-12));
            assert!(v.iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn sor_and_cg_agree() {
        let m = mask(40, Some((15, 22, 17, 24)));
        let a = solve_potential(
            &m,
            |x, _| x,
            1.0,
            &SolveControl {
                kind: SolverKind::Sor { omega: 1.8 },
                tolerance: 1e-10,
                max_iters: 100_000,
            },
        )
        .unwrap();
        let b = solve_potential(
            &m,
            |x, _| x,
            1.0,
            &SolveControl {
                kind: SolverKind::Cg,
                tolerance: 1e-10,
                max_iters: 100_000,
            },
        )
        .unwrap();
        let d = a.phi.iter().zip(&b.phi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn enclosed_pocket_is_still() {
        let mut m = mask(12, Some((3, 9, 3, 9)));
        // Hollow out a courtyard.
        for j in 5..7 {
            for i in 5..7 {
                m.cells[j * 12 + i] = false;
            }
        }
        let s = solve_potential(&m, |x, _| x, 1.0, &SolveControl::default()).unwrap();
        assert_eq!(s.state[5 * 12 + 5], CellState::Enclosed);
        let (u, _) = velocity(&s);
        assert_eq!(u[5 * 12 + 5], 0.0);
    }

    #[test]
    fn errors() {
        let full = {
            let mut m = mask(5, None);
            m.cells.iter_mut().for_each(|c| *c = true);
            m
        };
        assert!(matches!(
            solve_potential(&full, |x, _| x, 1.0, &SolveControl::default()),
            Err(WindError::FullyMasked)
        ));
        assert!(solve_potential(&mask(2, None), |x, _| x, 1.0, &SolveControl::default()).is_err());
        let m = mask(60, Some((20, 40, 20, 40)));
        let c = SolveControl {
            max_iters: 3,
            ..Default::default()
        };
        assert!(matches!(
            solve_potential(&m, |x, _| x, 1.0, &c),
            Err(WindError::NotConverged { .. })
        ));
    }
}
