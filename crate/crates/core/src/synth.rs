//! Procedural test models and curve tracing over mesh vertices.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::differential::Curve;
use crate::geometry::{Point3, Vec3};
use crate::io::Mesh;
use crate::random::random_unit;
use crate::spatial::KdTree;

/// Geodesic sphere of the given frequency: `10 f² + 2` vertices, `20 f²` faces.
pub fn icosphere(freq: usize) -> Mesh {
    assert!(freq >= 1);
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let base = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .map(|v| Vec3::new(v[0], v[1], v[2]).normalize());
    let faces = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let mut points: Vec<Point3> = Vec::new();
    let mut ids: HashMap<(i64, i64, i64), u32> = HashMap::new();
    let mut out_faces = Vec::new();
    let n = freq;
    for f in faces {
        let (a, b, c) = (base[f[0]], base[f[1]], base[f[2]]);
        let mut local = vec![0u32; (n + 1) * (n + 1)];
        for i in 0..=n {
            for j in 0..=n - i {
                let v = (a + (b - a) * (i as f64 / n as f64) + (c - a) * (j as f64 / n as f64)).normalize();
                let key = ((v.x * 1e9).round() as i64, (v.y * 1e9).round() as i64, (v.z * 1e9).round() as i64);
                let id = *ids.entry(key).or_insert_with(|| {
                    points.push(Point3::from(v));
                    (points.len() - 1) as u32
                });
                local[i * (n + 1) + j] = id;
            }
        }
        let at = |i: usize, j: usize| local[i * (n + 1) + j];
        for i in 0..n {
            for j in 0..n - i {
                out_faces.push([at(i, j), at(i + 1, j), at(i, j + 1)]);
                if i + j + 1 < n {
                    out_faces.push([at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
                }
            }
        }
    }
    Mesh {
        points,
        normals: None,
        faces: out_faces,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlobKind {
    /// Many small bumps on a stretched ellipsoid.
    Bumpy,
    /// Raised knobs on a mildly stretched sphere.
    Knobby,
}

impl BlobKind {
    pub fn name(&self) -> &'static str {
        match self {
            BlobKind::Bumpy => "bumpy",
            BlobKind::Knobby => "knobby",
        }
    }
}

/// Asymmetric star-shaped mesh: an icosphere displaced radially by Gaussian
/// bumps and stretched along the axes. Deterministic in `seed`.
pub fn blob_mesh<R: Rng + ?Sized>(kind: BlobKind, freq: usize, rng: &mut R) -> Mesh {
    let (count, amp, width, stretch) = match kind {
        BlobKind::Bumpy => (24, (-0.15, 0.3), (0.2, 0.35), Vec3::new(1.3, 1.0, 0.75)),
        BlobKind::Knobby => (24, (0.1, 0.35), (0.2, 0.35), Vec3::new(0.9, 1.15, 1.0)),
    };
    let bumps: Vec<(Vec3, f64, f64)> = (0..count)
        .map(|_| {
            (
                random_unit(rng).into_inner(),
                rng.gen_range(amp.0..amp.1),
                rng.gen_range(width.0..width.1),
            )
        })
        .collect();
    let mut mesh = icosphere(freq);
    for p in &mut mesh.points {
        let u = p.coords;
        let r = 1.0
            + bumps
                .iter()
                .map(|(c, a, w)| a * (-(1.0 - u.dot(c)) / (w * w)).exp())
                .sum::<f64>();
        *p = Point3::from((u * r).component_mul(&stretch));
    }
    mesh
}

/// Vertex neighbours from mesh edges, or from the 8 nearest points when the
/// model has no faces.
pub fn vertex_adjacency(mesh: &Mesh) -> Vec<Vec<u32>> {
    let n = mesh.points.len();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    if mesh.faces.is_empty() {
        let tree = KdTree::new(&mesh.points);
        for (i, p) in mesh.points.iter().enumerate() {
            adj[i] = tree
                .knn(p, 9)
                .into_iter()
                .map(|nb| nb.index as u32)
                .filter(|&j| j as usize != i)
                .collect();
        }
        return adj;
    }
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Geodesic-like walk: each step moves to the unvisited neighbour best aligned
/// with a slowly turning heading.
fn walk<R: Rng + ?Sized>(
    points: &[Point3],
    adj: &[Vec<u32>],
    start: usize,
    length: f64,
    blocked: &[bool],
    rng: &mut R,
) -> Vec<usize> {
    let mut path = vec![start];
    let mut heading = random_unit(rng).into_inner();
    let mut arc = 0.0;
    let mut seen = std::collections::HashSet::from([start]);
    while arc < length {
        let cur = *path.last().unwrap();
        let next = adj[cur]
            .iter()
            .map(|&j| j as usize)
            .filter(|j| !seen.contains(j) && !blocked[*j])
            .map(|j| {
                let step = points[j] - points[cur];
                (j, step.normalize().dot(&heading))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((j, align)) = next else { break };
        if align < 0.2 {
            break;
        }
        let step = points[j] - points[cur];
        arc += step.norm();
        let turn = random_unit(rng).into_inner() * 0.12;
        heading = (heading * 0.75 + step.normalize() * 0.25 + turn).normalize();
        seen.insert(j);
        path.push(j);
    }
    path
}

/// Traces `segments` disjoint walks of about `length` units each. Segments
/// that end early are retried; vertices of earlier segments and their
/// neighbours are avoided.
pub fn trace_curves<R: Rng + ?Sized>(mesh: &Mesh, segments: usize, length: f64, rng: &mut R) -> Curve {
    let adj = vertex_adjacency(mesh);
    let n = mesh.points.len();
    let mut blocked = vec![false; n];
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < segments && attempts < 200 * segments.max(1) {
        attempts += 1;
        let start = rng.gen_range(0..n);
        if blocked[start] {
            continue;
        }
        let path = walk(&mesh.points, &adj, start, length, &blocked, rng);
        let arc: f64 = path.windows(2).map(|w| (mesh.points[w[1]] - mesh.points[w[0]]).norm()).sum();
        if arc < 0.9 * length {
            continue;
        }
        for &v in &path {
            blocked[v] = true;
            for &nb in &adj[v] {
                blocked[nb as usize] = true;
            }
        }
        out.push(path.iter().map(|&v| mesh.points[v]).collect());
    }
    Curve::new(out)
}

/// Mesh vertices plus a barycentric lattice of `per_edge` subdivisions on
/// every face, approximating the surface for point-to-point scoring.
pub fn densify_surface(mesh: &Mesh, per_edge: usize) -> Vec<Point3> {
    let mut out = mesh.points.clone();
    if per_edge < 2 {
        return out;
    }
    let n = per_edge as f64;
    let mut claimed = std::collections::HashSet::new();
    for f in &mesh.faces {
        let [a, b, c] = f.map(|i| mesh.points[i as usize]);
        let key = |u: u32, v: u32| (u.min(v), u.max(v));
        // Edge points are emitted by the first face that reaches the edge.
        let own = [(f[0], f[2]), (f[0], f[1]), (f[1], f[2])].map(|(u, v)| claimed.insert(key(u, v)));
        for i in 0..=per_edge {
            for j in 0..=per_edge - i {
                let k = per_edge - i - j;
                if i == per_edge || j == per_edge || k == per_edge {
                    continue;
                }
                if (i == 0 && !own[0]) || (j == 0 && !own[1]) || (k == 0 && !own[2]) {
                    continue;
                }
                let p = a.coords * (k as f64 / n) + b.coords * (i as f64 / n) + c.coords * (j as f64 / n);
                out.push(Point3::from(p));
            }
        }
    }
    out
}
