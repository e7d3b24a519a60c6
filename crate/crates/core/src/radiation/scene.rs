use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bvh::Bvh;
use super::RadiationError;
use crate::geometry::{classify_face, subdivide_mesh, BuildingSet, FaceKind, Grid2, HeightRaster, TriangleMesh, Vec3};
use crate::params::ResolvedParams;

/// Hit target standing for the ground plane beyond the modelled domain.
pub const FAR_GROUND: u32 = u32::MAX;
/// Ray origins are lifted this far off their surface, metres.
const RAY_OFFSET: f64 = 1e-4;
/// RNG stream offset separating pedestrian points from faces.
const POINT_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceClass {
    Roof,
    Wall,
    Ground,
}

impl SurfaceClass {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceClass::Roof => "roof",
            SurfaceClass::Wall => "wall",
            SurfaceClass::Ground => "ground",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFace {
    pub centroid: Vec3,
    pub normal: Vec3,
    pub area: f64,
    pub class: SurfaceClass,
    pub albedo: f64,
    pub emissivity: f64,
    /// Areal heat capacity, J/m²K.
    pub heat_capacity: f64,
    /// Index into the scene's building list; `None` for ground.
    pub building: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub albedo: f64,
    pub emissivity: f64,
    /// Volumetric heat capacity, J/m³K.
    pub heat_capacity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSet {
    pub roof: Material,
    pub wall: Material,
    pub ground: Material,
    /// Effective thermal thickness converting volumetric to areal capacity, m.
    pub thermal_thickness: f64,
}

impl MaterialSet {
    pub fn from_params(p: &ResolvedParams) -> Self {
        let m = |c: &str| Material {
            albedo: p.num(&format!("{c}_albedo")),
            emissivity: p.num(&format!("{c}_emissivity")),
            heat_capacity: p.num(&format!("{c}_heat_capacity")),
        };
        MaterialSet {
            roof: m("roof"),
            wall: m("wall"),
            ground: m("ground"),
            thermal_thickness: p.num("thermal_thickness"),
        }
    }

    pub fn get(&self, class: SurfaceClass) -> &Material {
        match class {
            SurfaceClass::Roof => &self.roof,
            SurfaceClass::Wall => &self.wall,
            SurfaceClass::Ground => &self.ground,
        }
    }
}

/// What one sample point sees: the escaping fraction and a histogram of
/// first hits (face index or [`FAR_GROUND`]).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct View {
    pub svf: f64,
    pub hits: Vec<(u32, u32)>,
}

impl View {
    fn from_samples(n: usize, escaped: usize, mut targets: Vec<u32>) -> View {
        targets.sort_unstable();
        let mut hits: Vec<(u32, u32)> = Vec::new();
        for t in targets {
            match hits.last_mut() {
                Some((id, c)) if *id == t => *c += 1,
                _ => hits.push((t, 1)),
            }
        }
        View {
            svf: escaped as f64 / n as f64,
            hits,
        }
    }

    fn merge(a: View, b: View) -> View {
        let n = 2.0;
        let mut targets: Vec<u32> = Vec::new();
        for (id, c) in a.hits.iter().chain(&b.hits) {
            targets.extend(std::iter::repeat_n(*id, *c as usize));
        }
        let mut v = View::from_samples(1, 0, targets);
        v.svf = (a.svf + b.svf) / n;
        v
    }

    /// Hit-weighted mean of `f` over the surroundings; `None` with no hits.
    pub fn mean_over_hits(&self, f: impl Fn(u32) -> f64) -> Option<f64> {
        let (mut s, mut n) = (0.0, 0u64);
        for &(id, c) in &self.hits {
            s += c as f64 * f(id);
            n += c as u64;
        }
        (n > 0).then(|| s / n as f64)
    }
}

/// Triangulated outdoor surfaces (roofs, walls, ground) with a ray-cast index.
/// Face `i` is triangle `i` of `mesh`.
#[derive(Debug, Clone)]
pub struct Scene {
    pub faces: Vec<SurfaceFace>,
    pub mesh: TriangleMesh,
    pub building_ids: Vec<String>,
    /// Material of the ground outside the modelled domain.
    pub far_ground: Material,
    bvh: Bvh,
}

impl Scene {
    /// Buildings subdivided to `max_edge`, plus a ground grid of the same
    /// spacing over `domain` with cells under footprints removed.
    pub fn build(
        set: &BuildingSet,
        domain: [f64; 4],
        materials: &MaterialSet,
        max_edge: f64,
    ) -> Result<Scene, RadiationError> {
        if !(max_edge > 0.0) || !(domain[2] > domain[0] && domain[3] > domain[1]) {
            return Err(RadiationError::Config(format!(
                "bad domain {domain:?} or face size {max_edge}"
            )));
        }
        let mut tris: Vec<([Vec3; 3], SurfaceClass, Option<u32>)> = Vec::new();
        for (b, building) in set.buildings.iter().enumerate() {
            let (fine, _) = subdivide_mesh(&building.mesh, max_edge);
            for t in 0..fine.triangles.len() {
                let Some(n) = fine.triangle_normal(t) else { continue };
                let class = match classify_face(n, fine.centroid(t).z) {
                    FaceKind::Roof => SurfaceClass::Roof,
                    FaceKind::Wall => SurfaceClass::Wall,
                    FaceKind::Floor => continue,
                };
                tris.push((fine.corners(t), class, Some(b as u32)));
            }
        }
        let grid = Grid2::covering(domain, max_edge);
        let cover = HeightRaster::from_buildings(grid, &set.buildings);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if cover.owner[grid.idx(i, j)].is_some() {
                    continue;
                }
                let x0 = grid.origin[0] + i as f64 * grid.cell_size;
                let y0 = grid.origin[1] + j as f64 * grid.cell_size;
                let x1 = (x0 + grid.cell_size).min(domain[2]);
                let y1 = (y0 + grid.cell_size).min(domain[3]);
                let p = |x, y| Vec3::new(x, y, 0.0);
                tris.push(([p(x0, y0), p(x1, y0), p(x1, y1)], SurfaceClass::Ground, None));
                tris.push(([p(x0, y0), p(x1, y1), p(x0, y1)], SurfaceClass::Ground, None));
            }
        }
        let ids = set.buildings.iter().map(|b| b.id.clone()).collect();
        Ok(Scene::from_triangles(tris, ids, materials))
    }

    /// Scene from explicit triangles; normals follow the winding.
    pub fn from_triangles(
        tris: Vec<([Vec3; 3], SurfaceClass, Option<u32>)>,
        building_ids: Vec<String>,
        materials: &MaterialSet,
    ) -> Scene {
        let corners: Vec<[Vec3; 3]> = tris.iter().map(|t| t.0).collect();
        let mesh = TriangleMesh::from_triangles(&corners);
        let faces = tris
            .iter()
            .enumerate()
            .map(|(k, &(_, class, building))| {
                let m = materials.get(class);
                SurfaceFace {
                    centroid: mesh.centroid(k),
                    normal: mesh.triangle_normal(k).unwrap_or(Vec3::UP),
                    area: mesh.triangle_area(k),
                    class,
                    albedo: m.albedo,
                    emissivity: m.emissivity,
                    heat_capacity: m.heat_capacity * materials.thermal_thickness,
                    building,
                }
            })
            .collect();
        Scene {
            faces,
            mesh,
            building_ids,
            far_ground: materials.ground,
            bvh: Bvh::build(corners),
        }
    }

    /// Resets every face to its class material.
    pub fn apply_materials(&mut self, materials: &MaterialSet) {
        for f in &mut self.faces {
            let m = materials.get(f.class);
            f.albedo = m.albedo;
            f.emissivity = m.emissivity;
            f.heat_capacity = m.heat_capacity * materials.thermal_thickness;
        }
        self.far_ground = materials.ground;
    }

    /// Sets the albedo of every face matching `pred`; returns how many changed.
    pub fn set_albedo(&mut self, pred: impl Fn(&SurfaceFace) -> bool, albedo: f64) -> usize {
        let mut n = 0;
        for f in self.faces.iter_mut().filter(|f| pred(f)) {
            f.albedo = albedo;
            n += 1;
        }
        n
    }

    pub fn albedo_of(&self, target: u32) -> f64 {
        if target == FAR_GROUND {
            self.far_ground.albedo
        } else {
            self.faces[target as usize].albedo
        }
    }

    /// True when nothing blocks the ray from `point` towards `sun`.
    pub fn shadow_test(&self, point: Vec3, sun: Vec3, skip: Option<u32>) -> bool {
        sun.z > 0.0 && !self.bvh.occluded(point, sun, f64::INFINITY, skip)
    }

    /// Lit flag of a face: facing the sun and unobstructed from its centroid.
    pub fn face_lit(&self, face: usize, sun: Vec3) -> bool {
        let f = &self.faces[face];
        f.normal.dot(sun) > 0.0 && self.shadow_test(f.centroid + f.normal * RAY_OFFSET, sun, Some(face as u32))
    }

    /// Views of every face, sampled about its normal. Deterministic in `seed`.
    pub fn face_views(&self, n_samples: usize, seed: u64) -> Vec<View> {
        (0..self.faces.len())
            .into_par_iter()
            .map(|k| {
                let f = &self.faces[k];
                let mut rng = stream_rng(seed, k as u64);
                compute_svf(
                    self,
                    f.centroid + f.normal * RAY_OFFSET,
                    f.normal,
                    n_samples,
                    &mut rng,
                    Some(k as u32),
                )
            })
            .collect()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Cosine-weighted hemisphere sampling about `normal`. Rays that escape upward
/// count as sky; rays that escape downward land on the far ground.
pub fn compute_svf(
    scene: &Scene,
    origin: Vec3,
    normal: Vec3,
    n_samples: usize,
    rng: &mut impl Rng,
    skip: Option<u32>,
) -> View {
    let (t, b) = normal.orthonormal_basis();
    let mut escaped = 0;
    let mut targets = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let r = u1.sqrt();
        let phi = std::f64::consts::TAU * u2;
        let d = t * (r * phi.cos()) + b * (r * phi.sin()) + normal * (1.0 - u1).max(0.0).sqrt();
        match scene.bvh.closest_hit(origin, d, f64::INFINITY, skip) {
            Some((id, _)) => targets.push(id),
            None if d.z < 0.0 => targets.push(FAR_GROUND),
            None => escaped += 1,
        }
    }
    View::from_samples(n_samples.max(1), escaped, targets)
}

/// Pedestrian sample points on a plan grid at a fixed height.
#[derive(Debug, Clone)]
pub struct PedestrianGrid {
    pub grid: Grid2,
    pub height: f64,
    /// False inside building footprints.
    pub valid: Vec<bool>,
    /// Upper-hemisphere sky view factor about the zenith; NaN where invalid.
    pub svf: Vec<f64>,
    /// Full-sphere view (both hemispheres) used for the body's radiant load.
    pub views: Vec<View>,
}

impl PedestrianGrid {
    pub fn build(
        scene: &Scene,
        buildings: &BuildingSet,
        grid: Grid2,
        height: f64,
        n_samples: usize,
        seed: u64,
    ) -> PedestrianGrid {
        let cover = HeightRaster::from_buildings(grid, &buildings.buildings);
        let valid: Vec<bool> = cover.owner.iter().map(|o| o.is_none()).collect();
        let views: Vec<(f64, View)> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                if !valid[k] {
                    return (f64::NAN, View::default());
                }
                let [x, y] = grid.centre(k % grid.nx, k / grid.nx);
                let p = Vec3::new(x, y, height);
                let mut up = stream_rng(seed, POINT_STREAM + 2 * k as u64);
                let mut down = stream_rng(seed, POINT_STREAM + 2 * k as u64 + 1);
                let a = compute_svf(scene, p, Vec3::UP, n_samples, &mut up, None);
                let b = compute_svf(scene, p, -Vec3::UP, n_samples, &mut down, None);
                (a.svf, View::merge(a, b))
            })
            .collect();
        let (svf, views) = views.into_iter().unzip();
        PedestrianGrid {
            grid,
            height,
            valid,
            svf,
            views,
        }
    }

    pub fn point(&self, k: usize) -> Vec3 {
        let [x, y] = self.grid.centre(k % self.grid.nx, k / self.grid.nx);
        Vec3::new(x, y, self.height)
    }

    /// Index of the valid cell containing `(x, y)`.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        let (i, j) = self.grid.locate(x, y)?;
        let k = self.grid.idx(i, j);
        self.valid[k].then_some(k)
    }

    pub fn lit(&self, scene: &Scene, k: usize, sun: Vec3) -> bool {
        self.valid[k] && scene.shadow_test(self.point(k), sun, None)
    }
}
