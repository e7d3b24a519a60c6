//! Physiological Equivalent Temperature from a three-node (core, skin,
//! clothing) MEMI steady-state balance.

use serde::{Deserialize, Serialize};

use super::ComfortError;
use crate::params::ResolvedParams;

const SIGMA: f64 = 5.67e-8;
const LATENT_HEAT: f64 = 2.42e6;
const BLOOD_HEAT: f64 = 3640.0;
const SKIN_EMISSIVITY: f64 = 0.99;
const CLOTH_EMISSIVITY: f64 = 0.95;
const CORE_SET: f64 = 36.6;
const SKIN_SET: f64 = 34.0;
/// Standing posture.
const RADIATIVE_FRACTION: f64 = 0.696;
const LEWIS: f64 = 1.67;
const WOODCOCK: f64 = 0.38;
const P_ATM: f64 = 1013.25;
/// Reference environment: still air and a fixed vapour pressure.
const REF_WIND: f64 = 0.1;
const REF_VAPOUR_HPA: f64 = 12.0;
const REF_WORK: f64 = 80.0;
const REF_CLO: f64 = 0.9;
pub const MIN_WIND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonParams {
    pub age: f64,
    /// m.
    pub height: f64,
    /// kg.
    pub weight: f64,
    pub sex: Sex,
    /// Metabolic work, W.
    pub work: f64,
    pub clo: f64,
}

impl Default for PersonParams {
    fn default() -> Self {
        PersonParams {
            age: 35.0,
            height: 1.75,
            weight: 75.0,
            sex: Sex::Male,
            work: 80.0,
            clo: 0.9,
        }
    }
}

impl PersonParams {
    pub fn from_params(p: &ResolvedParams) -> Self {
        PersonParams {
            age: p.num("person_age"),
            height: p.num("person_height"),
            weight: p.num("person_weight"),
            sex: if p.text("person_sex") == "female" {
                Sex::Female
            } else {
                Sex::Male
            },
            work: p.num("person_work"),
            clo: p.num("person_clo"),
        }
    }

    fn dubois_area(&self) -> f64 {
        0.202 * self.weight.powf(0.425) * self.height.powf(0.725)
    }

    /// Basal metabolism, W.
    fn basal(&self) -> f64 {
        let ponderal = self.height * 100.0 / self.weight.cbrt();
        let w = self.weight.powf(0.75);
        match self.sex {
            Sex::Male => 3.45 * w * (1.0 + 0.004 * (30.0 - self.age) + 0.01 * (ponderal - 43.4)),
            Sex::Female => 3.19 * w * (1.0 + 0.004 * (30.0 - self.age) + 0.018 * (ponderal - 42.1)),
        }
    }

    fn validate(&self) -> Result<(), ComfortError> {
        let ok = [self.age, self.height, self.weight, self.clo]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if ok && self.work.is_finite() && self.work >= 0.0 {
            Ok(())
        } else {
            Err(ComfortError::Input(format!(
                "person parameters must be positive: {self:?}"
            )))
        }
    }
}

/// Saturation vapour pressure over water, hPa (Hyland–Wexler form).
fn p_sat_hpa(t: f64) -> f64 {
    let tk = t + 273.15;
    let ln = if tk >= 273.15 {
        -5800.2206 / tk + 1.3914993 - 0.048640239 * tk + 0.41764768e-4 * tk * tk - 0.14452093e-7 * tk.powi(3)
            + 6.5459673 * tk.ln()
    } else {
        -5674.5359 / tk + 6.3925247 - 0.9677843e-2 * tk + 0.62215701e-6 * tk * tk + 0.20747825e-8 * tk.powi(3)
            - 0.9484024e-12 * tk.powi(4)
            + 4.1635019 * tk.ln()
    };
    ln.exp() / 100.0
}

/// Surrounding conditions seen by the body.
#[derive(Debug, Clone, Copy)]
struct Environment {
    t_air: f64,
    t_mrt: f64,
    wind: f64,
    vapour_hpa: f64,
    work: f64,
    clo: f64,
}

/// Body geometry and clothing constants for one person and clothing level.
struct Body {
    area: f64,
    /// Metabolic heat per body area, W/m².
    heat: f64,
    clothed_fraction: f64,
    clothed_area: f64,
    burton: f64,
    cloth_resistance: f64,
    cloth_conductance: f64,
}

impl Body {
    fn new(person: &PersonParams, work: f64, clo: f64) -> Body {
        let area = person.dubois_area();
        let burton = 1.0 + 0.31 * clo;
        let raw_fraction = (173.51 * clo - 2.36 - 100.76 * clo * clo + 19.28 * clo.powi(3)) / 100.0;
        let clothed_area = area * raw_fraction + area * (burton - 1.0);
        let clothed_fraction = raw_fraction.min(1.0);
        let cloth_resistance = clo / 6.45;
        // Clothing as a cylinder shell over the clothed height.
        let cover = if clo >= 2.0 {
            1.0
        } else if clo > 0.6 {
            (person.height - 0.2) / person.height
        } else if clo > 0.3 {
            0.5
        } else {
            0.1
        };
        let perimeter = std::f64::consts::TAU * person.height * cover;
        let r_out = area * (burton - 1.0 + clothed_fraction) / perimeter;
        let r_in = clothed_fraction * area / perimeter;
        let cloth_conductance = perimeter * (r_out - r_in) / (cloth_resistance * (r_out / r_in).ln() * clothed_area);
        Body {
            area,
            heat: (work + person.basal()) / area,
            clothed_fraction,
            clothed_area,
            burton,
            cloth_resistance,
            cloth_conductance,
        }
    }
}

/// Skin blood flow (L/m²h) and the skin share of body mass.
fn vasomotion(t_core: f64, t_skin: f64) -> (f64, f64) {
    let cold = (SKIN_SET - t_skin).max(0.0);
    let warm = (t_core - CORE_SET).max(0.0);
    let flow = ((6.3 + 75.0 * warm) / (1.0 + 0.5 * cold)).min(90.0);
    (flow, 0.0417737 + 0.7451833 / (flow + 0.585417))
}

/// Regulatory sweat rate, g/m²h.
fn sweat(t_body: f64) -> f64 {
    let set = 0.1 * SKIN_SET + 0.9 * CORE_SET;
    (304.94 * (t_body - set).max(0.0)).min(500.0)
}

/// Node balances (core, skin, clothing) and the whole-body balance, W/m².
fn balances(body: &Body, env: &Environment, t: [f64; 3]) -> ([f64; 3], f64) {
    let [t_core, t_skin, t_clo] = t;
    let hc = (2.26 + 7.42 * env.wind.powf(0.67)).max(3.0);

    // Respiration.
    let t_exhaled = 0.47 * env.t_air + 21.0;
    let ventilation = body.heat * 1.44e-6;
    let resp_sensible = 1010.0 * (env.t_air - t_exhaled) * ventilation;
    let resp_latent = 0.623 * LATENT_HEAT / P_ATM * (env.vapour_hpa - p_sat_hpa(t_exhaled)) * ventilation;
    let respiration = resp_sensible + resp_latent;

    // Evaporation from skin.
    let (flow, skin_share) = vasomotion(t_core, t_skin);
    let t_body = skin_share * t_skin + (1.0 - skin_share) * t_core;
    let mut e_sweat = LATENT_HEAT / 1000.0 * sweat(t_body) / 3600.0;
    let p_skin = p_sat_hpa(t_skin);
    let burton_eff = 1.0 / (1.0 + 0.92 * hc * body.cloth_resistance);
    let mut e_max = hc * LEWIS * burton_eff * (p_skin - env.vapour_hpa);
    if e_max == 0.0 {
        e_max = 0.001;
    }
    let wet = (e_sweat / e_max).min(1.0);
    e_sweat = e_sweat.max(0.0);
    let vapour_resistance = (1.0 / (body.burton * hc) + body.cloth_resistance) / (LEWIS * WOODCOCK);
    let e_diffusion = (1.0 - wet) * (p_skin - env.vapour_hpa) / vapour_resistance;
    let evaporation = -(e_diffusion + e_sweat);

    // Radiation and convection on bare and clothed parts.
    let mrt4 = (env.t_mrt + 273.15).powi(4);
    let bare = 1.0 - body.clothed_fraction;
    let rad_bare = RADIATIVE_FRACTION * bare * SKIN_EMISSIVITY * SIGMA * (mrt4 - (t_skin + 273.15).powi(4));
    let rad_clo = RADIATIVE_FRACTION * body.clothed_area * CLOTH_EMISSIVITY * SIGMA * (mrt4 - (t_clo + 273.15).powi(4))
        / body.area;
    let conv_bare = hc * (env.t_air - t_skin) * bare;
    let conv_clo = hc * (env.t_air - t_clo) * body.clothed_area / body.area;

    let core_to_skin = (flow / 3600.0 * BLOOD_HEAT + 5.28) * (t_core - t_skin);
    let through_cloth = body.cloth_conductance * (t_skin - t_clo);
    let nodes = [
        body.heat + respiration - core_to_skin,
        rad_bare + conv_bare + evaporation + core_to_skin - through_cloth,
        conv_clo + rad_clo + through_cloth,
    ];
    let total = body.heat + respiration + rad_bare + rad_clo + conv_bare + conv_clo + evaporation;
    (nodes, total)
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-14 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *xc = det(m) / d;
    }
    Some(x)
}

/// Skin vapour pressure within this of ambient counts as the wettedness
/// discontinuity, hPa.
const KINK_BAND_HPA: f64 = 1.0;

/// Increasing-function root by bisection on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo <= 0.0 && fhi >= 0.0) {
        return None;
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// State with the skin held where its vapour pressure equals ambient.
///
/// The core and clothing balances each depend on one free temperature once
/// the skin is fixed, so both reduce to bracketed 1-D roots.
fn dew_point_state(body: &Body, env: &Environment) -> Option<[f64; 3]> {
    let t_skin = bisect(-40.0, 80.0, |t| p_sat_hpa(t) - env.vapour_hpa)?;
    let t_core = bisect(t_skin - 20.0, t_skin + 20.0, |tc| {
        -balances(body, env, [tc, t_skin, t_skin]).0[0]
    })?;
    let t_clo = bisect(-60.0, 120.0, |tl| -balances(body, env, [t_core, t_skin, tl]).0[2])?;
    Some([t_core, t_skin, t_clo])
}

/// Damped Newton on the three node balances with a finite-difference Jacobian.
///
/// When skin and ambient vapour pressures meet, skin wettedness jumps and the
/// balance has no exact root. A stall inside that band falls back to the
/// dew-point state.
fn body_temperatures(body: &Body, env: &Environment) -> Option<[f64; 3]> {
    let f = |t: [f64; 3]| balances(body, env, t).0;
    let starts = [
        [36.7, 34.0, 0.5 * (env.t_air + env.t_mrt)],
        [37.0, 35.0, env.t_air],
        [36.5, 33.0, 0.25 * env.t_air + 0.75 * env.t_mrt],
    ];
    let mut at_kink = false;
    for start in starts {
        let mut t = start;
        let mut r = f(t);
        for _ in 0..200 {
            if norm(r) < 1e-9 {
                return Some(t);
            }
            let mut jac = [[0.0; 3]; 3];
            for c in 0..3 {
                let h = 1e-6 * (1.0 + t[c].abs());
                let mut tp = t;
                tp[c] += h;
                let rp = f(tp);
                for row in 0..3 {
                    jac[row][c] = (rp[row] - r[row]) / h;
                }
            }
            let Some(step) = solve3(jac, [-r[0], -r[1], -r[2]]) else {
                break;
            };
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let cand = [
                    t[0] + lambda * step[0],
                    t[1] + lambda * step[1],
                    t[2] + lambda * step[2],
                ];
                let rc = f(cand);
                if cand.iter().all(|v| v.is_finite()) && norm(rc) < norm(r) {
                    t = cand;
                    r = rc;
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if norm(r) < 1e-6 {
            return Some(t);
        }
        at_kink |= (p_sat_hpa(t[1]) - env.vapour_hpa).abs() < KINK_BAND_HPA;
    }
    if at_kink {
        dew_point_state(body, env)
    } else {
        None
    }
}

/// PET in °C. Wind below 0.1 m/s is raised to 0.1 m/s.
pub fn pet(t_air: f64, mrt: f64, wind: f64, rh: f64, person: &PersonParams) -> Result<f64, ComfortError> {
    person.validate()?;
    if ![t_air, mrt, wind, rh].iter().all(|v| v.is_finite()) || !(0.0..=100.0).contains(&rh) {
        return Err(ComfortError::Input(format!(
            "t_air {t_air}, mrt {mrt}, wind {wind}, rh {rh}"
        )));
    }
    let actual = Environment {
        t_air,
        t_mrt: mrt,
        wind: wind.max(MIN_WIND),
        vapour_hpa: rh / 100.0 * p_sat_hpa(t_air),
        work: person.work,
        clo: person.clo,
    };
    let body = Body::new(person, actual.work, actual.clo);
    let state = body_temperatures(&body, &actual).ok_or(ComfortError::NotConverged {
        stage: "body balance",
        inputs: [t_air, mrt, wind, rh],
    })?;

    // Reference environment: find the air (= radiant) temperature at which
    // the same body state is in balance.
    let ref_body = Body::new(person, REF_WORK, REF_CLO);
    let g = |tx: f64| {
        let env = Environment {
            t_air: tx,
            t_mrt: tx,
            wind: REF_WIND,
            vapour_hpa: REF_VAPOUR_HPA,
            work: REF_WORK,
            clo: REF_CLO,
        };
        balances(&ref_body, &env, state).1
    };
    let (mut lo, mut hi) = (-60.0, 100.0);
    let (glo, ghi) = (g(lo), g(hi));
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(ComfortError::NotConverged {
            stage: "reference environment",
            inputs: [t_air, mrt, wind, rh],
        });
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_skin_regime_still_returns_a_value() {
        // Skin vapour pressure meets ambient here; the reference model also
        // stalls and reports about 41.8.
        let v = pet(38.7, 20.0, 1.82, 83.85, &PersonParams::default()).unwrap();
        assert!((v - 41.78).abs() < 1.0, "{v}");
    }

    #[test]
    fn reference_environment_fixed_point() {
        // Vapour pressure of 12 hPa at 20 °C is about 51.3 % humidity.
        let rh = 100.0 * 12.0 / p_sat_hpa(20.0);
        let v = pet(20.0, 20.0, 0.1, rh, &PersonParams::default()).unwrap();
        assert!((v - 20.0).abs() < 0.1, "{v}");
    }

    #[test]
    fn mrt_raises_pet() {
        let p = PersonParams::default();
        let a = pet(30.0, 30.0, 1.0, 60.0, &p).unwrap();
        let b = pet(30.0, 60.0, 1.0, 60.0, &p).unwrap();
        assert!(b > a);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = PersonParams::default();
        assert!(pet(30.0, 30.0, 1.0, 120.0, &p).is_err());
        assert!(pet(f64::NAN, 30.0, 1.0, 50.0, &p).is_err());
        let bad = PersonParams { weight: 0.0, ..p };
        assert!(pet(30.0, 30.0, 1.0, 50.0, &bad).is_err());
        // Calm air is floored rather than rejected.
        assert_eq!(
            pet(30.0, 40.0, 0.0, 50.0, &p).unwrap(),
            pet(30.0, 40.0, 0.1, 50.0, &p).unwrap()
        );
    }
}
