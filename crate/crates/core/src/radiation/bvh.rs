//! Bounding-volume hierarchy over triangles with Möller–Trumbore ray tests.

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 4;
const EPS_DET: f64 = 1e-12;
/// Hits closer than this are ignored to avoid re-hitting the ray's own surface.
pub const T_MIN: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: first index into `order`. Inner: index of the left child.
    start: u32,
    /// Leaf: triangle count. Inner: 0.
    count: u32,
}

/// Immutable acceleration structure. Triangle ids are positions in the input list.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    tris: Vec<[Vec3; 3]>,
}

fn tri_bounds(t: &[Vec3; 3]) -> (Vec3, Vec3) {
    (t[0].min(t[1]).min(t[2]), t[0].max(t[1]).max(t[2]))
}

impl Bvh {
    pub fn build(tris: Vec<[Vec3; 3]>) -> Bvh {
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        if !tris.is_empty() {
            nodes.push(Node {
                lo: Vec3::default(),
                hi: Vec3::default(),
                start: 0,
                count: 0,
            });
            build_node(&tris, &centroids, &mut order, &mut nodes, 0, 0, tris.len());
        }
        Bvh { nodes, order, tris }
    }

    pub fn len(&self) -> usize {
        self.tris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn triangle(&self, id: usize) -> &[Vec3; 3] {
        &self.tris[id]
    }

    /// Nearest hit along `dir` within `(T_MIN, t_max)`, skipping triangle `skip`.
    pub fn closest_hit(&self, origin: Vec3, dir: Vec3, t_max: f64, skip: Option<u32>) -> Option<(u32, f64)> {
        let mut best: Option<(u32, f64)> = None;
        let mut limit = t_max;
        self.traverse(
            origin,
            dir,
            |id, t| {
                if Some(id) != skip && t < limit {
                    limit = t;
                    best = Some((id, t));
                }
                (false, limit)
            },
            t_max,
        );
        best
    }

    /// True if anything other than `skip` lies along the ray within `t_max`.
    pub fn occluded(&self, origin: Vec3, dir: Vec3, t_max: f64, skip: Option<u32>) -> bool {
        let mut hit = false;
        self.traverse(
            origin,
            dir,
            |id, _| {
                if Some(id) != skip {
                    hit = true;
                }
                (hit, t_max)
            },
            t_max,
        );
        hit
    }

    /// Visits candidate triangles; `visit(id, t)` returns (stop, current limit).
    fn traverse(&self, origin: Vec3, dir: Vec3, mut visit: impl FnMut(u32, f64) -> (bool, f64), t_max: f64) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut limit = t_max;
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if !slab_hit(node, origin, inv, limit) {
                continue;
            }
            if node.count > 0 {
                for &id in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    if let Some(t) = intersect(&self.tris[id as usize], origin, dir) {
                        if t < limit {
                            let (stop, lim) = visit(id, t);
                            if stop {
                                return;
                            }
                            limit = lim;
                        }
                    }
                }
            } else {
                let (l, r) = (node.start, node.start + 1);
                // Visit the child nearer along the ray first.
                let axis = longest_axis(node.hi - node.lo);
                let (first, second) = if dir.axis(axis) >= 0.0 { (l, r) } else { (r, l) };
                stack[sp] = second;
                stack[sp + 1] = first;
                sp += 2;
            }
        }
    }
}

fn longest_axis(d: Vec3) -> usize {
    if d.x >= d.y && d.x >= d.z {
        0
    } else if d.y >= d.z {
        1
    } else {
        2
    }
}

fn build_node(
    tris: &[[Vec3; 3]],
    centroids: &[Vec3],
    order: &mut [u32],
    nodes: &mut Vec<Node>,
    at: usize,
    start: usize,
    end: usize,
) {
    let (mut lo, mut hi) = tri_bounds(&tris[order[start] as usize]);
    let (mut clo, mut chi) = (centroids[order[start] as usize], centroids[order[start] as usize]);
    for &id in &order[start..end] {
        let (a, b) = tri_bounds(&tris[id as usize]);
        lo = lo.min(a);
        hi = hi.max(b);
        clo = clo.min(centroids[id as usize]);
        chi = chi.max(centroids[id as usize]);
    }
    // Pad so hits on box faces and edges survive rounding in the slab test.
    let pad = |v: Vec3| {
        Vec3::new(
            1e-9 * (1.0 + v.x.abs()),
            1e-9 * (1.0 + v.y.abs()),
            1e-9 * (1.0 + v.z.abs()),
        )
    };
    nodes[at].lo = lo - pad(lo);
    nodes[at].hi = hi + pad(hi);
    let n = end - start;
    let axis = longest_axis(chi - clo);
    if n <= LEAF_SIZE || chi.axis(axis) - clo.axis(axis) <= 0.0 {
        nodes[at].start = start as u32;
        nodes[at].count = n as u32;
        return;
    }
    let mid = n / 2;
    order[start..end].select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize]
            .axis(axis)
            .total_cmp(&centroids[b as usize].axis(axis))
    });
    let left = nodes.len();
    let blank = Node {
        lo,
        hi,
        start: 0,
        count: 0,
    };
    nodes.push(blank);
    nodes.push(blank);
    nodes[at].start = left as u32;
    nodes[at].count = 0;
    build_node(tris, centroids, order, nodes, left, start, start + mid);
    build_node(tris, centroids, order, nodes, left + 1, start + mid, end);
}

fn slab_hit(node: &Node, o: Vec3, inv: Vec3, limit: f64) -> bool {
    let mut t0: f64 = 0.0;
    let mut t1 = limit;
    for a in 0..3 {
        let (lo, hi, oa, ia) = (node.lo.axis(a), node.hi.axis(a), o.axis(a), inv.axis(a));
        let mut ta = (lo - oa) * ia;
        let mut tb = (hi - oa) * ia;
        if ta.is_nan() || tb.is_nan() {
            // Ray parallel to and on the slab plane: treat as inside.
            if oa < lo || oa > hi {
                return false;
            }
            continue;
        }
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Möller–Trumbore, two-sided. Returns the ray parameter of the hit.
pub fn intersect(t: &[Vec3; 3], origin: Vec3, dir: Vec3) -> Option<f64> {
    let e1 = t[1] - t[0];
    let e2 = t[2] - t[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < EPS_DET {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - t[0];
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let tt = e2.dot(q) * inv;
    (tt > T_MIN).then_some(tt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::box_mesh;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn triangle_hit_and_miss() {
        let t = [v(0.0, 0.0, 1.0), v(1.0, 0.0, 1.0), v(0.0, 1.0, 1.0)];
        assert!((intersect(&t, v(0.2, 0.2, 0.0), v(0.0, 0.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((intersect(&t, v(0.2, 0.2, 2.0), v(0.0, 0.0, -1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!(intersect(&t, v(0.8, 0.8, 0.0), v(0.0, 0.0, 1.0)).is_none());
        assert!(intersect(&t, v(0.2, 0.2, 0.0), v(1.0, 0.0, 0.0)).is_none());
        assert!(intersect(&t, v(0.2, 0.2, 2.0), v(0.0, 0.0, 1.0)).is_none());
    }

    #[test]
    fn bvh_agrees_with_brute_force() {
        let mut mesh = box_mesh(v(0.0, 0.0, 0.0), v(2.0, 2.0, 2.0));
        let mut other = box_mesh(v(5.0, 0.0, 0.0), v(6.0, 3.0, 4.0));
        other.translate(v(0.0, 1.0, 0.0));
        mesh.append(&other);
        let tris: Vec<_> = (0..mesh.triangles.len()).map(|t| mesh.corners(t)).collect();
        let bvh = Bvh::build(tris.clone());
        let mut k = 0u64;
        for i in 0..40 {
            for j in 0..40 {
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let o = v(
                    -3.0 + 0.3 * i as f64,
                    -2.0 + 0.2 * j as f64,
                    1.0 + (k >> 60) as f64 * 0.1,
                );
                let d = v(
                    1.0,
                    0.1 * ((k >> 40) % 7) as f64 - 0.3,
                    0.05 * ((k >> 20) % 5) as f64 - 0.1,
                )
                .normalized()
                .unwrap();
                let brute = tris
                    .iter()
                    .enumerate()
                    .filter_map(|(id, t)| intersect(t, o, d).map(|t| (id as u32, t)))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                let got = bvh.closest_hit(o, d, f64::INFINITY, None);
                match (brute, got) {
                    (None, None) => {}
                    (Some(a), Some(b)) => assert!((a.1 - b.1).abs() < 1e-12),
                    other => panic!("mismatch {other:?}"),
                }
                assert_eq!(brute.is_some(), bvh.occluded(o, d, f64::INFINITY, None));
            }
        }
    }

    #[test]
    fn skip_and_limit() {
        let t = vec![[v(0.0, 0.0, 1.0), v(1.0, 0.0, 1.0), v(0.0, 1.0, 1.0)]];
        let bvh = Bvh::build(t);
        let (o, d) = (v(0.2, 0.2, 0.0), v(0.0, 0.0, 1.0));
        assert!(bvh.occluded(o, d, 2.0, None));
        assert!(!bvh.occluded(o, d, 0.5, None));
        assert!(!bvh.occluded(o, d, 2.0, Some(0)));
        assert!(Bvh::build(Vec::new()).closest_hit(o, d, 1.0, None).is_none());
    }
}
