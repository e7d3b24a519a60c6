use std::time::Instant;

use microclimate::geometry::{Grid2, ObstacleMask};
use microclimate::windflow::{
    adjust_air_state, assemble_pseudo3d, log_profile, saturation_vapour_pressure, solve_potential, CellState,
    SolveControl, SolverKind,
};
use proptest::prelude::*;

fn mask(nx: usize, ny: usize, h: f64, blocks: &[(usize, usize, usize, usize)]) -> ObstacleMask {
    let mut m = ObstacleMask::empty(Grid2 {
        origin: [0.0, 0.0],
        cell_size: h,
        nx,
        ny,
    });
    for &(i0, i1, j0, j1) in blocks {
        for j in j0..j1.min(ny) {
            for i in i0..i1.min(nx) {
                m.cells[j * nx + i] = true;
            }
        }
    }
    m
}

/// Dense Gaussian elimination of the cell-centred system: Dirichlet on the
/// open ring, reflected (dropped) terms at obstacles.
fn dense_oracle(m: &ObstacleMask, bc: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let (nx, ny, h) = (m.nx, m.ny, m.cell_size);
    let ring = |i: usize, j: usize| i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
    let mut phi = vec![0.0; nx * ny];
    let mut slot = vec![usize::MAX; nx * ny];
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if m.cells[k] {
                continue;
            }
            if ring(i, j) {
                phi[k] = bc((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            } else {
                slot[k] = cells.len();
                cells.push(k);
            }
        }
    }
    let n = cells.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for (r, &k) in cells.iter().enumerate() {
        for nb in [k - 1, k + 1, k - nx, k + nx] {
            if m.cells[nb] {
                continue;
            }
            a[r][r] += 1.0;
            if slot[nb] != usize::MAX {
                a[r][slot[nb]] -= 1.0;
            } else {
                a[r][n] += phi[nb];
            }
        }
    }
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        let piv = a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / piv;
            if f != 0.0 {
                for q in c..=n {
                    a[r][q] -= f * a[c][q];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|q| a[c][q] * x[q]).sum();
        x[c] = (a[c][n] - s) / a[c][c];
    }
    for (r, &k) in cells.iter().enumerate() {
        phi[k] = x[r];
    }
    phi
}

#[test]
fn square_obstacle_matches_dense_solve() {
    let (n, h) = (24, 1.0);
    let m = mask(n, n, h, &[(9, 15, 9, 15)]);
    let oracle = dense_oracle(&m, |x, _| x);
    for kind in [SolverKind::Sor { omega: 1.8 }, SolverKind::Cg] {
        let ctl = SolveControl {
            kind,
            tolerance: 1e-12,
            max_iters: 200_000,
        };
        let s = solve_potential(&m, |x, _| x, 1.0, &ctl).unwrap();
        for k in 0..n * n {
            if !m.cells[k] {
                assert!(
                    (s.phi[k] - oracle[k]).abs() < 1e-9,
                    "{kind:?} cell {k}: {} vs {}",
                    s.phi[k],
                    oracle[k]
                );
            }
        }
    }
}

#[test]
fn square_obstacle_flow_features() {
    let (n, h) = (60, 2.0);
    let m = mask(n, n, h, &[(25, 35, 25, 35)]);
    let vol = assemble_pseudo3d(vec![(10.0, m)], 3.0, 270.0, 0.5, &SolveControl::default()).unwrap();
    let s = &vol.slices[0];
    let speed = s.speed();
    let at = |i: usize, j: usize| speed[j * n + i];
    // Flank cells beside the obstacle, mid-height of the block.
    assert!(at(30, 35) > 3.0 && at(30, 24) > 3.0, "{} {}", at(30, 35), at(30, 24));
    // Directly upwind of the windward face centre.
    assert!(at(24, 30) < 0.2 * 3.0, "{}", at(24, 30));
    assert!(at(35, 30) < 0.2 * 3.0);
}

#[test]
fn solver_benchmark_on_200_cells() {
    let m = mask(200, 200, 1.0, &[(90, 110, 90, 110)]);
    for kind in [SolverKind::Sor { omega: 1.8 }, SolverKind::Cg] {
        let t = Instant::now();
        let s = solve_potential(
            &m,
            |x, _| x,
            1.0,
            &SolveControl {
                kind,
                ..Default::default()
            },
        )
        .unwrap();
        println!(
            "{kind:?}: {} iterations, {:.3} s",
            s.iterations,
            t.elapsed().as_secs_f64()
        );
    }
}

fn rot90(m: &ObstacleMask) -> ObstacleMask {
    // (i, j) -> (n-1-j, i): a quarter turn counter-clockwise on a square grid.
    let n = m.nx;
    let mut r = m.clone();
    for j in 0..n {
        for i in 0..n {
            r.cells[i * n + (n - 1 - j)] = m.cells[j * n + i];
        }
    }
    r
}

fn block_strategy() -> impl Strategy<Value = Vec<(usize, usize, usize, usize)>> {
    prop::collection::vec((3usize..14, 1usize..5, 3usize..14, 1usize..5), 0..4)
        .prop_map(|v| v.into_iter().map(|(i, w, j, d)| (i, i + w, j, j + d)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rotating_mask_and_inflow_rotates_field(blocks in block_strategy(), dir in 0.0..360.0f64) {
        let n = 20;
        let m = mask(n, n, 1.0, &blocks);
        prop_assume!(m.count() < n * n);
        let ctl = SolveControl { tolerance: 1e-10, ..Default::default() };
        let a = assemble_pseudo3d(vec![(10.0, m.clone())], 2.0, dir, 0.5, &ctl).unwrap();
        // Rotating the flow vector counter-clockwise by 90° lowers the
        // meteorological direction by 90°.
        let b = assemble_pseudo3d(vec![(10.0, rot90(&m))], 2.0, (dir + 270.0) % 360.0, 0.5, &ctl).unwrap();
        let (sa, sb) = (&a.slices[0], &b.slices[0]);
        for j in 0..n {
            for i in 0..n {
                let ka = j * n + i;
                let kb = i * n + (n - 1 - j);
                // (u, v) rotated by +90° is (−v, u).
                prop_assert!((sb.u[kb] + sa.v[ka]).abs() < 1e-7, "u at {},{}", i, j);
                prop_assert!((sb.v[kb] - sa.u[ka]).abs() < 1e-7, "v at {},{}", i, j);
            }
        }
    }

    #[test]
    fn rectangle_flux_balances(blocks in block_strategy(), dir in 0.0..360.0f64, i0 in 1usize..8, j0 in 1usize..8, w in 2usize..10, d in 2usize..10) {
        let n = 20;
        let m = mask(n, n, 1.0, &blocks);
        prop_assume!(m.count() < n * n);
        let vol = assemble_pseudo3d(vec![(10.0, m)], 2.0, dir, 0.5, &SolveControl::default()).unwrap();
        let s = &vol.slices[0];
        let (i1, j1) = ((i0 + w).min(n - 2), (j0 + d).min(n - 2));
        // Net face flux out of the rectangle equals the sum of cell divergences.
        let div = s.divergence();
        let mut net = 0.0;
        for j in j0..=j1 {
            for i in i0..=i1 {
                let k = j * n + i;
                if s.state[k] == CellState::Unknown {
                    net += div[k];
                }
            }
        }
        let perimeter = 2 * (i1 - i0 + 1 + j1 - j0 + 1);
        prop_assert!(net.abs() <= 1e-6 * 2.0 * perimeter as f64 * std::f64::consts::SQRT_2, "{}", net);
    }

    #[test]
    fn face_circulation_vanishes(blocks in block_strategy(), dir in 0.0..360.0f64) {
        let n = 16;
        let m = mask(n, n, 1.0, &blocks);
        prop_assume!(m.count() < n * n);
        let vol = assemble_pseudo3d(vec![(10.0, m.clone())], 2.0, dir, 0.5, &SolveControl::default()).unwrap();
        let s = &vol.slices[0];
        let h = 1.0;
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let ks = [j * n + i, j * n + i + 1, (j + 1) * n + i + 1, (j + 1) * n + i];
                if ks.iter().any(|&k| m.cells[k]) {
                    continue;
                }
                // Face velocities around the loop of four open cell centres.
                let f = |a: usize, b: usize| (s.phi[b] - s.phi[a]) / h;
                let circ = f(ks[0], ks[1]) + f(ks[1], ks[2]) + f(ks[2], ks[3]) + f(ks[3], ks[0]);
                prop_assert!(circ.abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn log_profile_monotone_and_linear(u10 in 0.1..30.0f64, z0 in 0.01..5.0f64, z1 in 0.0..200.0f64, dz in 0.01..50.0f64, k in 0.0..5.0f64) {
        let za = z0 + z1 + 1e-6;
        let a = log_profile(u10, za, z0).unwrap();
        let b = log_profile(u10, za + dz, z0).unwrap();
        prop_assert!(b > a);
        let scaled = log_profile(k * u10, za, z0).unwrap();
        prop_assert!((scaled - k * a).abs() <= 1e-12 * (1.0 + scaled.abs()));
    }

    #[test]
    fn vapour_pressure_preserved(t in 15.0..40.0f64, rh in 5.0..95.0f64, local in 0.0..10.0f64, reference in 0.0..10.0f64) {
        let s = adjust_air_state(t, rh, local, reference, 0.3, 2.0);
        let e0 = rh / 100.0 * saturation_vapour_pressure(t);
        let e1 = s.rh_adj / 100.0 * saturation_vapour_pressure(s.t_adj);
        if s.rh_adj > 0.0 && s.rh_adj < 100.0 {
            prop_assert!((e0 - e1).abs() <= 1e-9, "{} vs {}", e0, e1);
        }
        prop_assert!((0.0..=100.0).contains(&s.rh_adj));
        prop_assert!(s.delta_t.abs() <= 2.0);
    }
}
