use std::time::Instant;

use microclimate::fixtures::{canyon_building_set, synthetic_tropical_epw, CANYON_CENTRE, CANYON_DOMAIN};
use microclimate::geometry::{Grid2, HeightRaster, Vec3};
use microclimate::radiation::{
    compute_svf, simulate_day, step_surface_temperature, FaceBalance, HourForcing, Material, MaterialSet,
    PedestrianGrid, PersonRadiation, PointRadiation, RadiationConfig, Scene, SkyState, SurfaceClass, STEFAN_BOLTZMANN,
};
use microclimate::weather::{parse_epw_str, select_day, solar_position, SiteLocation, WeatherField};
use microclimate::windflow::{SolveControl, SolverKind, WindBasis};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Tri = ([Vec3; 3], SurfaceClass, Option<u32>);

fn materials(ground_albedo: f64) -> MaterialSet {
    let m = |albedo| Material {
        albedo,
        emissivity: 0.9,
        heat_capacity: 5e5,
    };
    MaterialSet {
        roof: m(0.2),
        wall: m(0.3),
        ground: m(ground_albedo),
        thermal_thickness: 0.1,
    }
}

fn quad(a: Vec3, b: Vec3, c: Vec3, d: Vec3, class: SurfaceClass) -> Vec<Tri> {
    vec![([a, b, c], class, None), ([a, c, d], class, None)]
}

/// Two parallel walls along x at y = ±w/2, height h, length l.
fn canyon_walls(h: f64, w: f64, l: f64) -> Vec<Tri> {
    let v = Vec3::new;
    let (y, x) = (w / 2.0, l / 2.0);
    let mut t = quad(
        v(-x, -y, 0.0),
        v(x, -y, 0.0),
        v(x, -y, h),
        v(-x, -y, h),
        SurfaceClass::Wall,
    );
    t.extend(quad(
        v(x, y, 0.0),
        v(-x, y, 0.0),
        v(-x, y, h),
        v(x, y, h),
        SurfaceClass::Wall,
    ));
    t
}

/// Floor-centre sky view factor of an infinitely long canyon.
fn canyon_svf_oracle(h: f64, w: f64) -> f64 {
    1.0 / (1.0 + (2.0 * h / w).powi(2)).sqrt()
}

#[test]
fn canyon_floor_svf_matches_analytic() {
    for (h, w) in [(10.0, 10.0), (30.0, 20.0), (60.0, 20.0)] {
        let scene = Scene::from_triangles(canyon_walls(h, w, 4000.0), Vec::new(), &materials(0.15));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 8192;
        let v = compute_svf(&scene, Vec3::new(0.0, 0.0, 1e-4), Vec3::UP, n, &mut rng, None);
        let p = canyon_svf_oracle(h, w);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((v.svf - p).abs() < 4.0 * sigma + 2e-3, "H={h} W={w}: {} vs {p}", v.svf);
    }
    // Deep canyon: H/W = 3.
    let p = canyon_svf_oracle(60.0, 20.0);
    assert!(p < 0.2);
}

#[test]
fn svf_error_shrinks_with_samples() {
    let scene = Scene::from_triangles(canyon_walls(10.0, 20.0, 400.0), Vec::new(), &materials(0.15));
    let reps = 1500;
    let std = |n: usize| {
        let xs: Vec<f64> = (0..reps)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + r as u64 * 7919 + n as u64);
                compute_svf(&scene, Vec3::new(0.0, 0.0, 1e-4), Vec3::UP, n, &mut rng, None).svf
            })
            .collect();
        let m = xs.iter().sum::<f64>() / reps as f64;
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt()
    };
    let (a, b) = (std(64), std(128));
    let ratio = b / a;
    assert!(
        (ratio - 1.0 / 2f64.sqrt()).abs() <= 0.2 / 2f64.sqrt(),
        "std {a} -> {b}, ratio {ratio}"
    );
}

/// Root of `q = εσT⁴ + H(T − T_air)` by bisection.
fn steady_root(q: f64, h: f64, t_air: f64, eps: f64) -> f64 {
    let f = |t: f64| q - eps * STEFAN_BOLTZMANN * t.powi(4) - h * (t - t_air);
    let (mut lo, mut hi) = (150.0, 500.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn integrate_to_steady(b: &FaceBalance, t0: f64) -> f64 {
    let mut t = t0;
    for _ in 0..5000 {
        t = step_surface_temperature(t, b, 600.0);
    }
    t
}

#[test]
fn steady_state_matches_bisection_grid() {
    for q in [300.0, 600.0, 900.0] {
        for h in [5.7, 13.3, 25.0] {
            for t_air in [293.15, 303.15, 313.15] {
                let b = FaceBalance {
                    q_sw_abs: q,
                    q_lw_in: 0.0,
                    h,
                    t_air,
                    emissivity: 0.9,
                    heat_capacity: 5e4,
                };
                let t = integrate_to_steady(&b, t_air);
                let root = steady_root(q, h, t_air, 0.9);
                assert!((t - root).abs() < 0.05, "q={q} h={h} Ta={t_air}: {t} vs {root}");
                // Energy closure at the converged state.
                assert!(b.net(t).abs() <= 0.5);
            }
        }
    }
}

#[test]
fn shadow_length_matches_geometry() {
    let v = Vec3::new;
    let wall = quad(
        v(-500.0, 0.0, 0.0),
        v(500.0, 0.0, 0.0),
        v(500.0, 0.0, 12.0),
        v(-500.0, 0.0, 12.0),
        SurfaceClass::Wall,
    );
    let scene = Scene::from_triangles(wall, Vec::new(), &materials(0.15));
    for el in [20.0f64, 45.0, 70.0] {
        let sun = v(0.0, -el.to_radians().cos(), el.to_radians().sin());
        let reach = 12.0 / el.to_radians().tan();
        for d in [0.5 * reach, 0.95 * reach, 1.05 * reach, 2.0 * reach] {
            let lit = scene.shadow_test(v(0.0, d, 0.0), sun, None);
            assert_eq!(lit, d > reach, "elevation {el} distance {d} reach {reach}");
        }
    }
}

fn small_scene(ground_albedo: f64) -> Scene {
    let v = Vec3::new;
    let mut tris = canyon_walls(10.0, 10.0, 60.0);
    for j in 0..6 {
        for i in 0..12 {
            let (x0, y0) = (-30.0 + 5.0 * i as f64, -15.0 + 5.0 * j as f64);
            if (y0 + 2.5).abs() < 5.0 {
                tris.extend(quad(
                    v(x0, y0, 0.0),
                    v(x0 + 5.0, y0, 0.0),
                    v(x0 + 5.0, y0 + 5.0, 0.0),
                    v(x0, y0 + 5.0, 0.0),
                    SurfaceClass::Ground,
                ));
            }
        }
    }
    Scene::from_triangles(tris, Vec::new(), &materials(ground_albedo))
}

fn constant_forcing(sun: Option<Vec3>, dni: f64, dhi: f64) -> Vec<HourForcing> {
    (1..=24)
        .map(|hour| HourForcing {
            hour,
            t_air: 30.0,
            rh: 60.0,
            wind_speed: 2.0,
            wind_direction: 180.0,
            dni,
            dhi,
            sun,
        })
        .collect()
}

#[test]
fn night_has_no_shortwave_and_cools_toward_air() {
    let scene = small_scene(0.15);
    let views = scene.face_views(64, 3);
    let mut forcing = constant_forcing(None, 0.0, 0.0);
    for f in &mut forcing[8..16] {
        f.sun = Some(Vec3::new(0.0, 0.3, 0.95).normalized().unwrap());
        f.dni = 300.0;
        f.dhi = 200.0;
    }
    let r = simulate_day(&scene, &views, None, &forcing, None, &RadiationConfig::default()).unwrap();
    for (f, s) in forcing.iter().zip(&r.surfaces) {
        if f.sun.is_none() {
            assert!(s.q_sw_in.iter().all(|&q| q == 0.0));
        }
        for (k, face) in scene.faces.iter().enumerate() {
            let out = face.emissivity * STEFAN_BOLTZMANN * s.t_surf[k].powi(4);
            assert!((s.q_lw_out[k] - out).abs() < 1e-9);
            assert!((200.0..=400.0).contains(&s.t_surf[k]));
        }
    }
}

#[test]
fn constant_forcing_closes_energy_balance() {
    let scene = small_scene(0.15);
    let views = scene.face_views(64, 3);
    let sun = Vec3::new(0.2, 0.3, 0.9).normalized().unwrap();
    let forcing = constant_forcing(Some(sun), 400.0, 150.0);
    let cfg = RadiationConfig {
        spinup_days: 3,
        ..Default::default()
    };
    let r = simulate_day(&scene, &views, None, &forcing, None, &cfg).unwrap();
    let s = r.surfaces.last().unwrap();
    for k in 0..scene.faces.len() {
        let e = scene.faces[k].emissivity;
        let residual = s.q_sw_abs[k] + e * s.q_lw_in[k] - s.q_lw_out[k] - s.q_conv[k];
        assert!(residual.abs() <= 0.5, "face {k}: {residual}");
    }
}

fn equilibrium(q_sw_in: f64, albedo: f64) -> f64 {
    let b = FaceBalance {
        q_sw_abs: (1.0 - albedo) * q_sw_in,
        q_lw_in: 400.0,
        h: 10.0,
        t_air: 303.15,
        emissivity: 0.9,
        heat_capacity: 5e4,
    };
    integrate_to_steady(&b, 303.15)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn higher_albedo_never_warms_a_face(q in 0.0..1000.0f64, a in 0.0..1.0f64, da in 0.0..1.0f64) {
        let b = (a + da).min(1.0);
        prop_assert!((1.0 - b) * q <= (1.0 - a) * q);
        prop_assert!(equilibrium(q, b) <= equilibrium(q, a) + 1e-9);
    }

    #[test]
    fn brighter_ground_never_lowers_pedestrian_load(g in 0.0..0.9f64, dg in 0.0..0.5f64, x in -20.0..20.0f64, el in 20.0..90.0f64) {
        let (lo, hi) = (small_scene(g), small_scene((g + dg).min(1.0)));
        let p = Vec3::new(x, 0.0, 2.0);
        let sun = Vec3::new(0.0, el.to_radians().cos(), el.to_radians().sin());
        let sky = SkyState { sun: Some(sun), dni: 500.0, dhi: 200.0 };
        let load = |s: &Scene| {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let up = compute_svf(s, p, Vec3::UP, 128, &mut rng, None);
            let down = compute_svf(s, p, -Vec3::UP, 128, &mut rng, None);
            let (mut n, mut acc) = (0u32, 0.0);
            for &(id, c) in up.hits.iter().chain(&down.hits) {
                n += c;
                acc += c as f64 * s.albedo_of(id);
            }
            let pr = PointRadiation {
                lit: s.shadow_test(p, sun, None),
                svf: up.svf / 2.0,
                rho_context: if n > 0 { acc / n as f64 } else { 0.0 },
                t_air: 303.15,
                t_surround: 310.0,
                sky_emissivity: 0.85,
            };
            (pr.reflected_sw(&sky), pr.mrt(&sky, &PersonRadiation::default()))
        };
        let (r0, m0) = load(&lo);
        let (r1, m1) = load(&hi);
        prop_assert!(r1 >= r0 - 1e-9);
        prop_assert!(m1 >= m0 - 1e-9);
    }

    #[test]
    fn shadow_threshold(h in 1.0..40.0f64, d in 0.5..80.0f64, el in 5.0..85.0f64) {
        let reach = h / el.to_radians().tan();
        prop_assume!((d - reach).abs() > 1e-3 * reach.max(1.0));
        let v = Vec3::new;
        let wall = quad(v(-2000.0, 0.0, 0.0), v(2000.0, 0.0, 0.0), v(2000.0, 0.0, h), v(-2000.0, 0.0, h), SurfaceClass::Wall);
        let scene = Scene::from_triangles(wall, Vec::new(), &materials(0.15));
        let sun = v(0.0, -el.to_radians().cos(), el.to_radians().sin());
        prop_assert_eq!(scene.shadow_test(v(0.0, d, 0.0), sun, None), d > reach);
    }
}

#[test]
fn canyon_day_is_plausible() {
    let t0 = Instant::now();
    let site = SiteLocation::changi();
    let set = canyon_building_set(2.0).unwrap();
    let scene = Scene::build(&set, CANYON_DOMAIN, &materials(0.15), 5.0).unwrap();
    let views = scene.face_views(256, 42);
    let ped = PedestrianGrid::build(&scene, &set, Grid2::covering(CANYON_DOMAIN, 2.0), 2.0, 256, 42);
    let t_views = t0.elapsed().as_secs_f64();
    let raster = HeightRaster::from_buildings(Grid2::covering(CANYON_DOMAIN, 2.0), &set.buildings);
    let ctl = SolveControl {
        kind: SolverKind::Cg,
        ..Default::default()
    };
    let basis = WindBasis::from_raster(&raster, &[2.0, 10.0, 20.0, 30.0, 40.0], 0.5, &ctl).unwrap();
    let t_wind = t0.elapsed().as_secs_f64() - t_views;
    let epw = parse_epw_str(&synthetic_tropical_epw(&site)).unwrap();
    let day = select_day(&epw.records, 4, 20).unwrap();
    let forcing: Vec<HourForcing> = day
        .iter()
        .map(|r| {
            let pos = solar_position(&site, r.year, r.timestamp);
            let sun = pos.is_up().then(|| {
                let [x, y, z] = pos.direction();
                Vec3::new(x, y, z)
            });
            let up = if sun.is_some() { 1.0 } else { 0.0 };
            HourForcing {
                hour: r.timestamp.hour,
                t_air: r.get(WeatherField::AirTemperature).unwrap(),
                rh: r.get(WeatherField::RelativeHumidity).unwrap(),
                wind_speed: r.get(WeatherField::WindSpeed).unwrap(),
                wind_direction: r.get(WeatherField::WindDirection).unwrap(),
                dni: up * r.get(WeatherField::Dni).unwrap(),
                dhi: up * r.get(WeatherField::Dhi).unwrap(),
                sun,
            }
        })
        .collect();
    let r = simulate_day(
        &scene,
        &views,
        Some(&ped),
        &forcing,
        Some(&basis),
        &RadiationConfig::default(),
    )
    .unwrap();
    let total = t0.elapsed().as_secs_f64();
    println!(
        "canyon: {} faces, views {t_views:.2} s, wind {t_wind:.2} s, total {total:.2} s",
        scene.faces.len()
    );
    let noon = &r.pedestrian[12];
    let k = ped.locate(CANYON_CENTRE[0], CANYON_CENTRE[1]).unwrap();
    println!(
        "mid-canyon noon: lit {} mrt {:.2} t_air {:.2} wind {:.2} svf {:.3}",
        noon.lit[k], noon.mrt[k], noon.t_air[k], noon.wind[k], ped.svf[k]
    );
    assert!(noon.lit[k]);
    assert!((40.0..85.0).contains(&noon.mrt[k]), "{}", noon.mrt[k]);
    let s = &r.surfaces[12];
    for class in [SurfaceClass::Roof, SurfaceClass::Wall, SurfaceClass::Ground] {
        let (mut a, mut tt) = (0.0, 0.0);
        for (f, t) in scene.faces.iter().zip(&s.t_mean) {
            if f.class == class {
                a += f.area;
                tt += f.area * t;
            }
        }
        println!("noon mean {class:?} T = {:.2} °C", tt / a - 273.15);
    }
    let night = &r.pedestrian[2];
    assert!(night.mrt[k] < noon.mrt[k]);
    assert!(total < 120.0);
}
