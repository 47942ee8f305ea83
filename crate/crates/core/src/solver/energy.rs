use crate::error::{Error, Result};
use crate::mesh::{signed_area, Point, TriMesh, TriangleClasses};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Energies {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub total: f64,
}

/// Orthogonal projection of a triangle's opposite vertex onto one of its edges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerpFoot {
    pub foot: Point,
    pub length: f64,
}

/// Foot of the perpendicular from `z` onto the line through `a` and `b`.
pub fn perp_foot(a: Point, b: Point, z: Point) -> PerpFoot {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        ((z[0] - a[0]) * dx + (z[1] - a[1]) * dy) / len2
    } else {
        0.0
    };
    let foot = [a[0] + t * dx, a[1] + t * dy];
    let length = ((z[0] - foot[0]).powi(2) + (z[1] - foot[1]).powi(2)).sqrt();
    PerpFoot { foot, length }
}

#[inline]
fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

/// Directed edges `(i, j)` of a triangle with the opposite vertex `z`.
#[inline]
fn tri_edges(tri: [usize; 3]) -> [(usize, usize, usize); 3] {
    [(tri[0], tri[1], tri[2]), (tri[1], tri[2], tri[0]), (tri[2], tri[0], tri[1])]
}

/// Least-squares uniform scale mapping each triangle's original edges onto
/// its deformed edges.
pub fn optimal_scale_factors(mesh: &TriMesh, c_prime: &[Point]) -> Vec<f64> {
    mesh.triangles
        .iter()
        .map(|&tri| {
            let (mut num, mut den) = (0.0, 0.0);
            for (i, j, _) in tri_edges(tri) {
                let d = sub(mesh.vertices[i], mesh.vertices[j]);
                let dp = sub(c_prime[i], c_prime[j]);
                num += d[0] * dp[0] + d[1] * dp[1];
                den += d[0] * d[0] + d[1] * d[1];
            }
            num / den
        })
        .collect()
}

/// Jacobi sweeps on the feature-restricted smoothing objective, starting
/// from all ones. Returns the smoothed factors and the number of sweeps.
pub fn smooth_scale_factors(
    theta: &[f64],
    classes: &TriangleClasses,
    neighbors: &[Vec<usize>],
    factor_tol: f64,
    max_smooth: usize,
) -> (Vec<f64>, usize) {
    let n = theta.len();
    // For every triangle: fidelity multiplicity and (neighbour, coupling)
    // pairs, one per region that holds both triangles in its feature set.
    let mut fidelity = vec![0.0; n];
    let mut couplings: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for q in 0..n {
        for &r in &classes.feature_regions[q] {
            for &qn in &neighbors[q] {
                if classes.feature_regions[qn].contains(&r) {
                    fidelity[q] += 1.0;
                    let c = 0.5 * (classes.tri_weight[q] + classes.tri_weight[qn]);
                    couplings[q].push((qn, c));
                }
            }
        }
    }

    let mut u = vec![1.0; n];
    let mut next = vec![0.0; n];
    let mut sweeps = 0;
    while sweeps < max_smooth {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for q in 0..n {
            next[q] = if fidelity[q] == 0.0 {
                theta[q]
            } else {
                let (mut num, mut den) = (fidelity[q] * theta[q], fidelity[q]);
                for &(qn, c) in &couplings[q] {
                    num += 2.0 * c * u[qn];
                    den += 2.0 * c;
                }
                num / den
            };
            change = change.max((next[q] - u[q]).abs());
        }
        std::mem::swap(&mut u, &mut next);
        if change < factor_tol {
            break;
        }
    }
    (u, sweeps)
}

/// Energy terms `weight * |(c'_i - c'_j) - target|^2` grouped by energy.
#[derive(Clone, Debug)]
pub struct FrozenEnergy {
    pub(crate) terms: [Vec<EdgeTerm>; 3],
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct EdgeTerm {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub target: Point,
}

impl EdgeTerm {
    #[inline]
    fn residual(&self, c: &[Point]) -> Point {
        let d = sub(c[self.i], c[self.j]);
        [d[0] - self.target[0], d[1] - self.target[1]]
    }
}

impl FrozenEnergy {
    /// Freezes the edge-length and perpendicular ratios at `c_ref`.
    pub fn new(
        mesh: &TriMesh,
        c_ref: &[Point],
        theta_u: &[f64],
        classes: &TriangleClasses,
        tau: f64,
    ) -> Self {
        let c = &mesh.vertices;
        let mut e1 = Vec::with_capacity(3 * mesh.triangle_count());
        let mut e3 = Vec::with_capacity(6 * mesh.triangle_count());
        for (q, &tri) in mesh.triangles.iter().enumerate() {
            let wq = classes.tri_weight[q];
            let wr = classes.region_weight[classes.region_of[q] as usize];
            for (i, j, z) in tri_edges(tri) {
                let d = sub(c[i], c[j]);
                e1.push(EdgeTerm { i, j, weight: wq, target: [theta_u[q] * d[0], theta_u[q] * d[1]] });
                let p = perp_foot(c[i], c[j], c[z]).length;
                let pp = perp_foot(c_ref[i], c_ref[j], c_ref[z]).length;
                let ratio = pp / p;
                e3.push(EdgeTerm { i, j, weight: wr, target: [ratio * d[0], ratio * d[1]] });
                e3.push(EdgeTerm { i, j, weight: wr * tau, target: d });
            }
        }
        let e2 = mesh
            .edges
            .iter()
            .map(|&[i, j]| {
                let d = sub(c[i], c[j]);
                let ratio = norm(sub(c_ref[i], c_ref[j])) / norm(d);
                EdgeTerm { i, j, weight: 1.0, target: [ratio * d[0], ratio * d[1]] }
            })
            .collect();
        Self { terms: [e1, e2, e3] }
    }

    pub fn value(&self, c: &[Point]) -> Energies {
        let sum = |terms: &[EdgeTerm]| {
            terms
                .iter()
                .map(|t| {
                    let r = t.residual(c);
                    t.weight * (r[0] * r[0] + r[1] * r[1])
                })
                .sum::<f64>()
        };
        let (e1, e2, e3) = (sum(&self.terms[0]), sum(&self.terms[1]), sum(&self.terms[2]));
        Energies { e1, e2, e3, total: e1 + e2 + e3 }
    }

    /// Gradient of the total with respect to every vertex coordinate.
    pub fn gradient(&self, c: &[Point]) -> Vec<Point> {
        let mut g = vec![[0.0; 2]; c.len()];
        for t in self.terms.iter().flatten() {
            let r = t.residual(c);
            for k in 0..2 {
                g[t.i][k] += 2.0 * t.weight * r[k];
                g[t.j][k] -= 2.0 * t.weight * r[k];
            }
        }
        g
    }
}

/// E1, E2, E3 and their sum at `c_prime`, with all ratios taken at `c_prime`.
pub fn evaluate_energy(
    mesh: &TriMesh,
    c_prime: &[Point],
    theta_u: &[f64],
    classes: &TriangleClasses,
    tau: f64,
) -> Result<Energies> {
    for &[i, j] in &mesh.edges {
        if norm(sub(c_prime[i], c_prime[j])) == 0.0 {
            return Err(Error::DegenerateEdge(i, j));
        }
    }
    Ok(FrozenEnergy::new(mesh, c_prime, theta_u, classes, tau).value(c_prime))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coord {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Violation {
    /// Edge difference product below `eps_t`.
    Edge { i: usize, j: usize, coord: Coord, product: f64 },
    /// Opposite-vertex offset product below `eps_p`; `edge` indexes the
    /// triangle's directed edges starting at its first vertex.
    Foot { triangle: usize, edge: usize, coord: Coord, product: f64 },
}

/// Orientation constraints. An axis whose original difference is zero, or
/// below `exempt` in magnitude, carries no constraint on that axis.
pub fn constraint_check(
    mesh: &TriMesh,
    c_prime: &[Point],
    eps_t: f64,
    eps_p: f64,
    exempt: f64,
) -> Vec<Violation> {
    let c = &mesh.vertices;
    let mut out = Vec::new();
    let coords = [(Coord::X, 0), (Coord::Y, 1)];
    for &[i, j] in &mesh.edges {
        let d = sub(c[i], c[j]);
        let dp = sub(c_prime[i], c_prime[j]);
        for (coord, k) in coords {
            if d[k] == 0.0 || d[k].abs() < exempt {
                continue;
            }
            let product = dp[k] * d[k];
            if !(product >= eps_t) {
                out.push(Violation::Edge { i, j, coord, product });
            }
        }
    }
    for (t, &tri) in mesh.triangles.iter().enumerate() {
        for (edge, (i, j, z)) in tri_edges(tri).into_iter().enumerate() {
            let o = sub(c[z], perp_foot(c[i], c[j], c[z]).foot);
            let op = sub(c_prime[z], perp_foot(c_prime[i], c_prime[j], c_prime[z]).foot);
            for (coord, k) in coords {
                if o[k] == 0.0 || o[k].abs() < exempt {
                    continue;
                }
                let product = op[k] * o[k];
                if !(product >= eps_p) {
                    out.push(Violation::Foot { triangle: t, edge, coord, product });
                }
            }
        }
    }
    out
}

/// Triangles whose deformed signed area is not positive.
pub fn flipped_triangles(mesh: &TriMesh, c_prime: &[Point]) -> Vec<usize> {
    mesh.triangles
        .iter()
        .enumerate()
        .filter(|(_, tri)| !(signed_area(c_prime[tri[0]], c_prime[tri[1]], c_prime[tri[2]]) > 0.0))
        .map(|(t, _)| t)
        .collect()
}
