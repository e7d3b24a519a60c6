//! Surface radiation and heat balance: ray-cast sky view and shadowing,
//! shortwave/longwave fluxes, a semi-implicit surface temperature integrator
//! and pedestrian mean radiant temperature.

mod bvh;
mod scene;
mod simulate;

use thiserror::Error;

use crate::geometry::Vec3;
use crate::outputs::OutputError;
use crate::params::ResolvedParams;
use crate::windflow::WindError;

pub use bvh::{intersect, Bvh};
pub use scene::{
    compute_svf, Material, MaterialSet, PedestrianGrid, Scene, SurfaceClass, SurfaceFace, View, FAR_GROUND,
};
pub use simulate::{
    simulate_day, write_pedestrian_vtk, write_surface_vtk, write_svf_vtk, DiurnalResult, HourForcing, PedestrianHour,
    RadiationConfig, SurfaceState,
};

pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;
pub const KELVIN: f64 = 273.15;
/// Sanity bounds on surface temperature, K.
pub const T_SURF_BOUNDS: (f64, f64) = (200.0, 400.0);

#[derive(Debug, Error)]
pub enum RadiationError {
    #[error("invalid radiation configuration: {0}")]
    Config(String),
    #[error("surface temperature diverged: face {face} ({class}) reached {t_surf:.2} K at hour {hour} (q_sw_abs {q_sw_abs:.1} W/m², H {h:.2} W/m²K, T_air {t_air:.2} K)")]
    Diverged {
        face: usize,
        class: &'static str,
        hour: u32,
        t_surf: f64,
        q_sw_abs: f64,
        h: f64,
        t_air: f64,
    },
    #[error("forcing must cover 24 hours, got {0}")]
    Forcing(usize),
    #[error(transparent)]
    Wind(#[from] WindError),
    #[error(transparent)]
    Output(#[from] OutputError),
}

/// Sun and sky irradiance for one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkyState {
    /// Unit vector towards the sun, or `None` when it is below the horizon.
    pub sun: Option<Vec3>,
    pub dni: f64,
    pub dhi: f64,
}

impl SkyState {
    pub fn night() -> SkyState {
        SkyState {
            sun: None,
            dni: 0.0,
            dhi: 0.0,
        }
    }

    /// Global horizontal irradiance implied by the beam and diffuse parts.
    pub fn ghi(&self) -> f64 {
        let cz = self.sun.map_or(0.0, |s| s.z.max(0.0));
        self.dni * cz + self.dhi
    }

    pub fn cos_incidence(&self, normal: Vec3) -> f64 {
        self.sun.map_or(0.0, |s| s.dot(normal).max(0.0))
    }
}

/// Incident shortwave on a surface, W/m²: direct beam when lit, isotropic
/// sky diffuse through `svf` and one bounce off surroundings of mean albedo
/// `rho_context` filling the rest of the view.
pub fn shortwave_in(normal: Vec3, lit: bool, sky: &SkyState, svf: f64, rho_context: f64) -> f64 {
    let direct = if lit { sky.dni * sky.cos_incidence(normal) } else { 0.0 };
    direct + sky.dhi * svf + rho_context * sky.ghi() * (1.0 - svf)
}

/// Returns `(q_lw_in, q_lw_out)` in W/m². Temperatures in K.
pub fn longwave_exchange(
    t_surf: f64,
    emissivity: f64,
    t_surround: f64,
    t_air: f64,
    svf: f64,
    sky_emissivity: f64,
) -> (f64, f64) {
    let q_in =
        svf * sky_emissivity * STEFAN_BOLTZMANN * t_air.powi(4) + (1.0 - svf) * STEFAN_BOLTZMANN * t_surround.powi(4);
    (q_in, emissivity * STEFAN_BOLTZMANN * t_surf.powi(4))
}

/// Linear wind correlation `H = a + b·U`, W/m²K.
pub fn convective_coefficient(wind_speed: f64, a: f64, b: f64) -> f64 {
    a + b * wind_speed.max(0.0)
}

/// Heat-balance inputs of one face, held fixed over a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceBalance {
    /// Absorbed shortwave, `(1 − albedo)·q_sw_in`.
    pub q_sw_abs: f64,
    /// Incident longwave; the face absorbs `emissivity·q_lw_in`.
    pub q_lw_in: f64,
    pub h: f64,
    /// Local air temperature, K.
    pub t_air: f64,
    pub emissivity: f64,
    /// Areal heat capacity, J/m²K.
    pub heat_capacity: f64,
}

impl FaceBalance {
    /// Net heat gain at temperature `t`, W/m².
    pub fn net(&self, t: f64) -> f64 {
        self.q_sw_abs + self.emissivity * self.q_lw_in
            - self.emissivity * STEFAN_BOLTZMANN * t.powi(4)
            - self.h * (t - self.t_air)
    }
}

/// One semi-implicit step: emission linearised about `t` and convection
/// taken implicitly, sources explicit.
pub fn step_surface_temperature(t: f64, b: &FaceBalance, dt: f64) -> f64 {
    let slope = 4.0 * b.emissivity * STEFAN_BOLTZMANN * t.powi(3) + b.h;
    t + dt * b.net(t) / (b.heat_capacity + dt * slope)
}

/// Radiative absorption properties of the standard pedestrian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonRadiation {
    pub alpha_sw: f64,
    pub alpha_lw: f64,
    pub f_p: f64,
}

impl PersonRadiation {
    pub fn from_params(p: &ResolvedParams) -> Self {
        PersonRadiation {
            alpha_sw: p.num("alpha_sw"),
            alpha_lw: p.num("alpha_lw"),
            f_p: p.num("f_p"),
        }
    }
}

impl Default for PersonRadiation {
    fn default() -> Self {
        PersonRadiation {
            alpha_sw: 0.7,
            alpha_lw: 0.97,
            f_p: 0.7,
        }
    }
}

/// Radiant environment at a pedestrian point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRadiation {
    pub lit: bool,
    pub svf: f64,
    pub rho_context: f64,
    /// K.
    pub t_air: f64,
    /// K.
    pub t_surround: f64,
    pub sky_emissivity: f64,
}

impl PointRadiation {
    pub fn reflected_sw(&self, sky: &SkyState) -> f64 {
        self.rho_context * sky.ghi() * (1.0 - self.svf)
    }

    /// Absorbed radiant flux density on the body, W/m².
    pub fn absorbed(&self, sky: &SkyState, person: &PersonRadiation) -> f64 {
        let direct = if self.lit && sky.sun.is_some() {
            person.f_p * sky.dni
        } else {
            0.0
        };
        let sw = direct + sky.dhi * self.svf + self.reflected_sw(sky);
        let lw = self.svf * self.sky_emissivity * STEFAN_BOLTZMANN * self.t_air.powi(4)
            + (1.0 - self.svf) * STEFAN_BOLTZMANN * self.t_surround.powi(4);
        person.alpha_sw * sw + person.alpha_lw * lw
    }

    /// Mean radiant temperature, °C.
    pub fn mrt(&self, sky: &SkyState, person: &PersonRadiation) -> f64 {
        (self.absorbed(sky, person) / (person.alpha_lw * STEFAN_BOLTZMANN)).powf(0.25) - KELVIN
    }
}
