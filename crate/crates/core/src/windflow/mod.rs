//! Pseudo-3D wind: 2D potential flow around building footprints at a stack
//! of heights, scaled by a logarithmic profile, plus the local air-state
//! surrogate.

mod solver;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use solver::{solve_potential, velocity, CellState, PotentialSolution, SolveControl, SolverKind};

use crate::geometry::{Grid2, HeightRaster, ObstacleMask};
use crate::outputs::{write_vtk_structured, FieldGrid, OutputError};
use crate::params::ResolvedParams;

#[derive(Debug, thiserror::Error)]
pub enum WindError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate mask: {0}")]
    Degenerate(String),
    #[error("every cell is an obstacle")]
    FullyMasked,
    #[error("flow solve did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("slice at {height} m: {source}")]
    Slice {
        height: f64,
        #[source]
        source: Box<WindError>,
    },
    #[error("point ({x}, {y}) is outside the wind domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error(transparent)]
    Output(#[from] OutputError),
}

/// Speed at height `z` from the 10 m value. Zero at and below `z0`.
pub fn log_profile(u10: f64, z: f64, z0: f64) -> Result<f64, WindError> {
    if !(z0 > 0.0 && z0 < 10.0) {
        return Err(WindError::Config(format!("z0 = {z0} m must lie in (0, 10)")));
    }
    if !(u10 >= 0.0 && u10.is_finite()) {
        return Err(WindError::Config(format!("u10 = {u10} must be a non-negative number")));
    }
    if z <= z0 {
        return Ok(0.0);
    }
    Ok(u10 * (z / z0).ln() / (10.0 / z0).ln())
}

/// Flow vector for a meteorological direction (degrees the wind blows from,
/// clockwise from north).
pub fn flow_vector(speed: f64, direction_deg: f64) -> [f64; 2] {
    let t = direction_deg.to_radians();
    [-speed * t.sin(), -speed * t.cos()]
}

/// One solved height.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2D {
    pub height: f64,
    pub grid: Grid2,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub phi: Vec<f64>,
    pub state: Vec<CellState>,
    pub mask: ObstacleMask,
    pub free_stream: f64,
    pub direction: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl Slice2D {
    pub fn speed(&self) -> Vec<f64> {
        self.u.iter().zip(&self.v).map(|(a, b)| a.hypot(*b)).collect()
    }

    /// Net face outflow per interior open cell, Σ(φ_n − φ_P)/h, in m/s.
    /// Zero elsewhere.
    pub fn divergence(&self) -> Vec<f64> {
        let nx = self.grid.nx;
        (0..self.phi.len())
            .map(|k| {
                if self.state[k] == CellState::Unknown {
                    solver::cell_residual(&self.phi, &self.state, k, nx, self.grid.cell_size)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Bilinear sample between cell centres, clamped to the outermost centres.
    pub fn sample(&self, x: f64, y: f64) -> Result<[f64; 2], WindError> {
        let g = &self.grid;
        let [x0, y0, x1, y1] = g.extent();
        if !(x >= x0 && x <= x1 && y >= y0 && y <= y1) {
            return Err(WindError::OutsideDomain { x, y });
        }
        let fx = ((x - g.origin[0]) / g.cell_size - 0.5).clamp(0.0, (g.nx - 1) as f64);
        let fy = ((y - g.origin[1]) / g.cell_size - 0.5).clamp(0.0, (g.ny - 1) as f64);
        let (i0, j0) = (fx.floor() as usize, fy.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(g.nx - 1), (j0 + 1).min(g.ny - 1));
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let lerp = |f: &[f64]| {
            let a = f[g.idx(i0, j0)] * (1.0 - tx) + f[g.idx(i1, j0)] * tx;
            let b = f[g.idx(i0, j1)] * (1.0 - tx) + f[g.idx(i1, j1)] * tx;
            a * (1.0 - ty) + b * ty
        };
        Ok([lerp(&self.u), lerp(&self.v)])
    }

    pub fn field_grid(&self) -> FieldGrid {
        let g = &self.grid;
        FieldGrid::new(
            [
                g.origin[0] + 0.5 * g.cell_size,
                g.origin[1] + 0.5 * g.cell_size,
                self.height,
            ],
            [g.cell_size, g.cell_size],
            g.nx,
            g.ny,
        )
        .with_scalar("speed", self.speed())
        .with_scalar("u", self.u.clone())
        .with_scalar("v", self.v.clone())
        .with_scalar(
            "obstacle",
            self.mask.cells.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .with_vector(
            "velocity",
            self.u.iter().zip(&self.v).map(|(a, b)| [*a, *b, 0.0]).collect(),
        )
    }

    pub fn file_name(&self) -> String {
        format!("wind_z{}.vtk", self.height)
    }
}

/// Unit-flow solutions along +x and +y for one mask. Any inflow is a linear
/// combination of the two.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSlice {
    pub height: f64,
    pub mask: ObstacleMask,
    pub ex: PotentialSolution,
    pub ey: PotentialSolution,
    ux: Vec<f64>,
    vx: Vec<f64>,
    uy: Vec<f64>,
    vy: Vec<f64>,
}

impl BasisSlice {
    pub fn solve(height: f64, mask: ObstacleMask, control: &SolveControl) -> Result<Self, WindError> {
        let g = mask.grid();
        let (cx, cy) = (0.5 * g.nx as f64 * g.cell_size, 0.5 * g.ny as f64 * g.cell_size);
        let wrap = |e: WindError| WindError::Slice {
            height,
            source: Box::new(e),
        };
        // |a| + |b| <= sqrt(2)·U for any direction, so each basis is solved
        // tighter to keep the combined residual within tolerance.
        let tight = SolveControl {
            tolerance: control.tolerance / std::f64::consts::SQRT_2,
            ..*control
        };
        let (ex, ey) = rayon::join(
            || solve_potential(&mask, |x, _| x - cx, 1.0, &tight),
            || solve_potential(&mask, |_, y| y - cy, 1.0, &tight),
        );
        let (ex, ey) = (ex.map_err(wrap)?, ey.map_err(wrap)?);
        let (ux, vx) = velocity(&ex);
        let (uy, vy) = velocity(&ey);
        Ok(BasisSlice {
            height,
            mask,
            ex,
            ey,
            ux,
            vx,
            uy,
            vy,
        })
    }

    pub fn combine(&self, speed: f64, direction: f64) -> Slice2D {
        let [a, b] = flow_vector(speed, direction);
        let mix = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| a * x + b * y).collect::<Vec<f64>>();
        let grid = self.mask.grid();
        Slice2D {
            height: self.height,
            grid,
            u: mix(&self.ux, &self.uy),
            v: mix(&self.vx, &self.vy),
            phi: mix(&self.ex.phi, &self.ey.phi),
            state: self.ex.state.clone(),
            mask: self.mask.clone(),
            free_stream: speed,
            direction,
            iterations: self.ex.iterations.max(self.ey.iterations),
            residual: if speed > 0.0 {
                (a.abs() * self.ex.residual + b.abs() * self.ey.residual) / speed
            } else {
                0.0
            },
        }
    }
}

/// Solved bases for every configured height.
#[derive(Debug, Clone, PartialEq)]
pub struct WindBasis {
    pub slices: Vec<BasisSlice>,
    pub z0: f64,
}

impl WindBasis {
    /// Solves all heights in parallel. Heights must be strictly increasing.
    pub fn solve(masks: Vec<(f64, ObstacleMask)>, z0: f64, control: &SolveControl) -> Result<Self, WindError> {
        if masks.is_empty() {
            return Err(WindError::Config("no slice heights".into()));
        }
        if masks.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(WindError::Config("slice heights must be strictly increasing".into()));
        }
        log_profile(0.0, 10.0, z0)?;
        let slices = masks
            .into_par_iter()
            .map(|(h, m)| BasisSlice::solve(h, m, control))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(WindBasis { slices, z0 })
    }

    /// Masks from a height raster at each slice height.
    pub fn from_raster(
        raster: &HeightRaster,
        heights: &[f64],
        z0: f64,
        control: &SolveControl,
    ) -> Result<Self, WindError> {
        Self::solve(heights.iter().map(|&h| (h, raster.mask_at(h))).collect(), z0, control)
    }

    pub fn volume(&self, u10: f64, dir10: f64) -> Result<WindVolume, WindError> {
        let slices = self
            .slices
            .iter()
            .map(|b| Ok(b.combine(log_profile(u10, b.height, self.z0)?, dir10)))
            .collect::<Result<Vec<_>, WindError>>()?;
        Ok(WindVolume {
            slices,
            z0: self.z0,
            u10,
            dir10,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindVolume {
    pub slices: Vec<Slice2D>,
    pub z0: f64,
    pub u10: f64,
    pub dir10: f64,
}

/// Solves one slice per mask height for a given 10 m wind.
pub fn assemble_pseudo3d(
    masks: Vec<(f64, ObstacleMask)>,
    u10: f64,
    dir10: f64,
    z0: f64,
    control: &SolveControl,
) -> Result<WindVolume, WindError> {
    WindBasis::solve(masks, z0, control)?.volume(u10, dir10)
}

/// Solver settings from resolved parameters.
pub fn solve_control(params: &ResolvedParams) -> SolveControl {
    SolveControl {
        kind: match params.text("wind_solver") {
            "cg" => SolverKind::Cg,
            _ => SolverKind::Sor {
                omega: params.num("sor_omega"),
            },
        },
        tolerance: params.num("solver_tolerance"),
        max_iters: params.int("solver_max_iters") as usize,
    }
}

impl WindVolume {
    /// Velocity at a 3D point; bilinear per slice, linear in z, clamped
    /// below the lowest and above the highest slice. `w` is always 0.
    pub fn sample(&self, p: [f64; 3]) -> Result<[f64; 3], WindError> {
        let [x, y, z] = p;
        let s = &self.slices;
        let first = &s[0];
        if z <= first.height || s.len() == 1 {
            let [u, v] = first.sample(x, y)?;
            return Ok([u, v, 0.0]);
        }
        let last = &s[s.len() - 1];
        if z >= last.height {
            let [u, v] = last.sample(x, y)?;
            return Ok([u, v, 0.0]);
        }
        let k = s.partition_point(|sl| sl.height <= z) - 1;
        let (a, b) = (&s[k], &s[k + 1]);
        let t = (z - a.height) / (b.height - a.height);
        let [ua, va] = a.sample(x, y)?;
        let [ub, vb] = b.sample(x, y)?;
        Ok([ua + t * (ub - ua), va + t * (vb - va), 0.0])
    }

    pub fn speed_at(&self, p: [f64; 3]) -> Result<f64, WindError> {
        let [u, v, _] = self.sample(p)?;
        Ok(u.hypot(v))
    }

    /// Free-stream speed at height `z` (the air-state reference).
    pub fn reference_speed(&self, z: f64) -> f64 {
        log_profile(self.u10, z, self.z0).unwrap_or(0.0)
    }

    /// Writes `wind_z<height>.vtk` per slice and returns the paths.
    pub fn write_vtk(&self, dir: &Path) -> Result<Vec<PathBuf>, WindError> {
        let mut out = Vec::with_capacity(self.slices.len());
        for s in &self.slices {
            let path = dir.join(s.file_name());
            let title = format!(
                "wind slice z={} m u10={} dir={} z0={}",
                s.height, self.u10, self.dir10, self.z0
            );
            write_vtk_structured(&s.field_grid(), &title, &path)?;
            out.push(path);
        }
        Ok(out)
    }
}

/// Saturation vapour pressure over water, hPa (Magnus-Tetens).
pub fn saturation_vapour_pressure(t_c: f64) -> f64 {
    6.1078 * (17.27 * t_c / (t_c + 237.3)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalAirState {
    pub t_adj: f64,
    pub rh_adj: f64,
    pub wind_speed_local: f64,
    pub delta_t: f64,
}

/// Surrogate local air state: `ΔT = k_mix·(wind_ref − wind_local)` clamped to
/// `±dt_max`, humidity at constant vapour pressure.
pub fn adjust_air_state(t2m: f64, rh2m: f64, wind_local: f64, wind_ref: f64, k_mix: f64, dt_max: f64) -> LocalAirState {
    let delta_t = (k_mix * (wind_ref - wind_local)).clamp(-dt_max, dt_max);
    let t_adj = t2m + delta_t;
    let rh_adj = if delta_t == 0.0 {
        rh2m.clamp(0.0, 100.0)
    } else {
        let e = rh2m / 100.0 * saturation_vapour_pressure(t2m);
        (100.0 * e / saturation_vapour_pressure(t_adj)).clamp(0.0, 100.0)
    };
    LocalAirState {
        t_adj,
        rh_adj,
        wind_speed_local: wind_local,
        delta_t,
    }
}
