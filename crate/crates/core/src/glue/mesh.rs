//! Polar tensor meshes of the unit disk and (axisymmetric) unit ball, graded
//! geometrically toward the boundary and toward each singular point, and the
//! cell-centred finite-volume Laplacian on them.

use std::f64::consts::PI;

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Side};

use super::fermi::Domain;
use crate::error::{Error, Result};

/// Grading parameters. The first cell at a graded end has size `d_min`,
/// sizes then grow by `1 + eta` up to `h_max`; `level` bisects every cell
/// that many times.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeshSpec {
    pub d_min: f64,
    pub eta: f64,
    pub h_max: f64,
    pub level: u32,
}

/// Faces of `[0, d_end]` graded from 0.
pub(crate) fn graded_faces(d_end: f64, d_min: f64, eta: f64, h_max: f64) -> Vec<f64> {
    let mut f = vec![0.0];
    let mut h = d_min.min(d_end);
    loop {
        let last = *f.last().unwrap();
        if last + h >= d_end {
            if d_end - last < 0.5 * h && f.len() > 1 {
                f.pop();
            }
            break;
        }
        f.push(last + h);
        h = (h * (1.0 + eta)).min(h_max);
    }
    f.push(d_end);
    f
}

fn bisect(faces: &[f64], levels: u32) -> Vec<f64> {
    let mut f = faces.to_vec();
    for _ in 0..levels {
        let mut g = Vec::with_capacity(2 * f.len());
        for w in f.windows(2) {
            g.push(w[0]);
            g.push(0.5 * (w[0] + w[1]));
        }
        g.push(*f.last().unwrap());
        f = g;
    }
    f
}

fn centers(faces: &[f64]) -> Vec<f64> {
    faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Sorted singular angles reduced to `[0, 2π)` (disk) or checked to be poles (ball).
pub(crate) fn normalise_points(domain: Domain, points: &[f64]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::Config("at least one singular point is required".into()));
    }
    let mut out: Vec<f64> = match domain {
        Domain::Disk => points.iter().map(|a| a.rem_euclid(2.0 * PI)).collect(),
        Domain::Ball => points
            .iter()
            .map(|&a| {
                if a.abs() < 1e-9 {
                    Ok(0.0)
                } else if (a - PI).abs() < 1e-9 {
                    Ok(PI)
                } else {
                    Err(Error::Config(format!(
                        "ball gluing is axisymmetric: singular points must be the poles ϑ = 0 or π, got {a}"
                    )))
                }
            })
            .collect::<Result<_>>()?,
    };
    out.sort_by(|a, b| a.total_cmp(b));
    for w in out.windows(2) {
        if w[1] - w[0] < 1e-9 {
            return Err(Error::Config("singular points must be distinct".into()));
        }
    }
    Ok(out)
}

/// Cell-centred polar mesh. Cell `c = j * n_a + k`, ring `j`, angular index `k`.
#[derive(Debug, Clone)]
pub struct PolarMesh {
    pub domain: Domain,
    pub spec: MeshSpec,
    pub r_faces: Vec<f64>,
    pub r_centers: Vec<f64>,
    /// Angle faces: `θ` from the first singular point around the circle
    /// (disk) or the polar angle `ϑ ∈ [0, π]` (ball).
    pub a_faces: Vec<f64>,
    pub a_centers: Vec<f64>,
    pub volume: Vec<f64>,
    /// `(c, c', T)` couplings, `c < c'`.
    pub links: Vec<(usize, usize, f64)>,
    /// Transmissibility to the Dirichlet boundary `r = 1`.
    pub boundary: Vec<f64>,
}

impl PolarMesh {
    pub fn new(domain: Domain, points: &[f64], spec: MeshSpec) -> Result<Self> {
        if !(spec.d_min > 0.0 && spec.eta > 0.0 && spec.h_max > spec.d_min) {
            return Err(Error::Config(format!(
                "mesh needs 0 < d_min < h_max and eta > 0, got {spec:?}"
            )));
        }
        let pts = normalise_points(domain, points)?;
        let g = |d: f64| graded_faces(d, spec.d_min, spec.eta, spec.h_max);

        let d = g(1.0);
        let r_faces = bisect(&d.iter().rev().map(|v| 1.0 - v).collect::<Vec<_>>(), spec.level);

        let mut a = Vec::new();
        match domain {
            Domain::Disk => {
                for (i, &p) in pts.iter().enumerate() {
                    let next = if i + 1 < pts.len() { pts[i + 1] } else { pts[0] + 2.0 * PI };
                    let half = g(0.5 * (next - p));
                    a.extend(half.iter().map(|h| p + h));
                    a.extend(half.iter().rev().skip(1).take(half.len() - 2).map(|h| next - h));
                }
                a.push(pts[0] + 2.0 * PI);
            }
            Domain::Ball => {
                let (north, south) = (pts.contains(&0.0), pts.contains(&PI));
                match (north, south) {
                    (true, true) => {
                        let half = g(0.5 * PI);
                        a.extend(half.iter().copied());
                        a.extend(half.iter().rev().skip(1).map(|h| PI - h));
                    }
                    (true, false) => a = g(PI),
                    _ => a = g(PI).iter().rev().map(|h| PI - h).collect(),
                }
            }
        }
        let a_faces = bisect(&a, spec.level);
        let r_centers = centers(&r_faces);
        let a_centers = centers(&a_faces);
        let (nr, na) = (r_centers.len(), a_centers.len());
        let idx = |j: usize, k: usize| j * na + k;

        let mut volume = vec![0.0; nr * na];
        let mut links = Vec::with_capacity(2 * nr * na);
        let mut boundary = vec![0.0; nr * na];
        for j in 0..nr {
            let (r0, r1, rc) = (r_faces[j], r_faces[j + 1], r_centers[j]);
            for k in 0..na {
                let (a0, a1) = (a_faces[k], a_faces[k + 1]);
                let c = idx(j, k);
                // measure of the angular extent: dθ, or the sin ϑ dϑ integral
                let w = match domain {
                    Domain::Disk => a1 - a0,
                    Domain::Ball => a0.cos() - a1.cos(),
                };
                let area_r = |r: f64| match domain {
                    Domain::Disk => r * w,
                    Domain::Ball => r * r * w,
                };
                volume[c] = match domain {
                    Domain::Disk => rc * (r1 - r0) * w,
                    Domain::Ball => (r1.powi(3) - r0.powi(3)) / 3.0 * w,
                };
                if j + 1 < nr {
                    links.push((c, idx(j + 1, k), area_r(r1) / (r_centers[j + 1] - rc)));
                } else {
                    boundary[c] = area_r(1.0) / (1.0 - rc);
                }
                let (nb, gap) = if k + 1 < na {
                    (Some(k + 1), a_centers[k + 1] - a_centers[k])
                } else if domain == Domain::Disk {
                    (Some(0), a_centers[0] + 2.0 * PI - a_centers[k])
                } else {
                    (None, 0.0)
                };
                if let Some(k2) = nb {
                    let t = match domain {
                        Domain::Disk => (r1 - r0) / (rc * gap),
                        Domain::Ball => a1.sin() * 0.5 * (r1 * r1 - r0 * r0) / (rc * gap),
                    };
                    let c2 = idx(j, k2);
                    links.push((c.min(c2), c.max(c2), t));
                }
            }
        }
        Ok(Self {
            domain,
            spec,
            r_faces,
            r_centers,
            a_faces,
            a_centers,
            volume,
            links,
            boundary,
        })
    }

    pub fn n_r(&self) -> usize {
        self.r_centers.len()
    }

    pub fn n_a(&self) -> usize {
        self.a_centers.len()
    }

    pub fn len(&self) -> usize {
        self.volume.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume.is_empty()
    }

    /// `(r, angle)` of cell `c`.
    pub fn polar(&self, c: usize) -> (f64, f64) {
        let na = self.n_a();
        (self.r_centers[c / na], self.a_centers[c % na])
    }

    /// Cartesian centre; the ball uses the meridian plane `(r sin ϑ, 0, r cos ϑ)`.
    pub fn cartesian(&self, c: usize) -> Vec<f64> {
        let (r, a) = self.polar(c);
        polar_to_cartesian(self.domain, r, a)
    }

    /// Integration weight of cell `c` (the full `2π` azimuth on the ball).
    pub fn weight(&self, c: usize) -> f64 {
        match self.domain {
            Domain::Disk => self.volume[c],
            Domain::Ball => 2.0 * PI * self.volume[c],
        }
    }

    /// Cells sharing a corner with the boundary point at `angle`.
    pub fn corner_cells(&self, angle: f64) -> Vec<usize> {
        let j = self.n_r() - 1;
        let na = self.n_a();
        let wrap = |d: f64| match self.domain {
            Domain::Disk => (d + PI).rem_euclid(2.0 * PI) - PI,
            Domain::Ball => d,
        };
        (0..na)
            .filter(|&k| {
                let tol = 1e-9 * (self.a_faces[k + 1] - self.a_faces[k]);
                (wrap(self.a_faces[k] - angle)).abs() < tol || (wrap(self.a_faces[k + 1] - angle)).abs() < tol
            })
            .map(|k| j * na + k)
            .collect()
    }

    /// `(A u)_c ≈ -Δu · vol_c` with `u = 0` on `r = 1`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = u.iter().zip(&self.boundary).map(|(a, b)| a * b).collect();
        for &(a, b, t) in &self.links {
            let f = t * (u[a] - u[b]);
            out[a] += f;
            out[b] -= f;
        }
        out
    }

    /// Bilinear interpolation of cell values, `u = 0` on `r = 1`.
    pub fn interpolate(&self, values: &[f64], r: f64, angle: f64) -> f64 {
        let na = self.n_a();
        let rc = &self.r_centers;
        let nr = rc.len();
        let (j0, j1, wr) = if r >= rc[nr - 1] {
            (nr - 1, usize::MAX, ((r - rc[nr - 1]) / (1.0 - rc[nr - 1])).min(1.0))
        } else if r <= rc[0] {
            (0, 0, 0.0)
        } else {
            let j = rc.partition_point(|v| *v <= r) - 1;
            (j, j + 1, (r - rc[j]) / (rc[j + 1] - rc[j]))
        };
        let ac = &self.a_centers;
        let (k0, k1, wa) = match self.domain {
            Domain::Disk => {
                let a = self.a_faces[0] + (angle - self.a_faces[0]).rem_euclid(2.0 * PI);
                if a < ac[0] || a >= ac[na - 1] {
                    let lo = ac[na - 1];
                    let span = ac[0] + 2.0 * PI - lo;
                    let x = if a >= lo { a - lo } else { a + 2.0 * PI - lo };
                    (na - 1, 0, x / span)
                } else {
                    let k = ac.partition_point(|v| *v <= a) - 1;
                    (k, k + 1, (a - ac[k]) / (ac[k + 1] - ac[k]))
                }
            }
            Domain::Ball => {
                if angle <= ac[0] {
                    (0, 0, 0.0)
                } else if angle >= ac[na - 1] {
                    (na - 1, na - 1, 0.0)
                } else {
                    let k = ac.partition_point(|v| *v <= angle) - 1;
                    (k, k + 1, (angle - ac[k]) / (ac[k + 1] - ac[k]))
                }
            }
        };
        let at = |j: usize, k: usize| if j == usize::MAX { 0.0 } else { values[j * na + k] };
        let row = |j: usize| (1.0 - wa) * at(j, k0) + wa * at(j, k1);
        (1.0 - wr) * row(j0) + wr * row(j1)
    }
}

pub fn polar_to_cartesian(domain: Domain, r: f64, a: f64) -> Vec<f64> {
    match domain {
        Domain::Disk => vec![r * a.cos(), r * a.sin()],
        Domain::Ball => vec![r * a.sin(), 0.0, r * a.cos()],
    }
}

/// Factored operator on the free cells with the remaining cells held fixed.
pub struct FvSolver {
    free: Vec<usize>,
    slot: Vec<usize>,
    /// `(free slot, fixed cell, T)` couplings moved to the right-hand side.
    fixed_links: Vec<(usize, usize, f64)>,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl FvSolver {
    pub fn new(mesh: &PolarMesh, fixed: &[bool]) -> Result<Self> {
        let n = mesh.len();
        let mut slot = vec![usize::MAX; n];
        let mut free = Vec::with_capacity(n);
        for c in 0..n {
            if !fixed[c] {
                slot[c] = free.len();
                free.push(c);
            }
        }
        let mut diag = vec![0.0; free.len()];
        for (s, &c) in free.iter().enumerate() {
            diag[s] = mesh.boundary[c];
        }
        let mut trip = Vec::with_capacity(2 * mesh.links.len() + free.len());
        let mut fixed_links = Vec::new();
        for &(a, b, t) in &mesh.links {
            let (sa, sb) = (slot[a], slot[b]);
            if sa != usize::MAX {
                diag[sa] += t;
            }
            if sb != usize::MAX {
                diag[sb] += t;
            }
            match (sa != usize::MAX, sb != usize::MAX) {
                (true, true) => {
                    trip.push(Triplet::new(sa.max(sb), sa.min(sb), -t));
                }
                (true, false) => fixed_links.push((sa, b, t)),
                (false, true) => fixed_links.push((sb, a, t)),
                _ => {}
            }
        }
        for (s, d) in diag.iter().enumerate() {
            trip.push(Triplet::new(s, s, *d));
        }
        let m = free.len();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &trip)
            .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        let llt = mat
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("Cholesky factorisation failed: {e:?}")))?;
        Ok(Self {
            free,
            slot,
            fixed_links,
            llt,
        })
    }

    pub fn is_free(&self, c: usize) -> bool {
        self.slot[c] != usize::MAX
    }

    /// Solves `A u = b` on the free cells, `u` keeping its values on the fixed cells.
    pub fn solve(&self, b: &[f64], u: &mut [f64]) {
        let mut rhs = Mat::from_fn(self.free.len(), 1, |s, _| b[self.free[s]]);
        for &(s, c, t) in &self.fixed_links {
            rhs[(s, 0)] += t * u[c];
        }
        self.llt.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        for (s, &c) in self.free.iter().enumerate() {
            u[c] = rhs[(s, 0)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(level: u32) -> MeshSpec {
        MeshSpec {
            d_min: 1e-7,
            eta: 0.3,
            h_max: 0.05,
            level,
        }
    }

    #[test]
    fn graded_faces_shape() {
        let f = graded_faces(1.0, 1e-6, 0.3, 0.05);
        assert_eq!(f[0], 0.0);
        assert!((f[1] - 1e-6).abs() < 1e-18);
        assert_eq!(*f.last().unwrap(), 1.0);
        for w in f.windows(3) {
            let (h0, h1) = (w[1] - w[0], w[2] - w[1]);
            assert!(h1 > 0.0 && h1 / h0 < 1.31 + 1e-9 || h1 <= 0.075, "{h0} {h1}");
        }
        assert!(f.len() < 120);
    }

    #[test]
    fn volumes_sum_to_the_measure() {
        for (dom, pts, total) in [(Domain::Disk, vec![0.5, 2.0], PI), (Domain::Ball, vec![0.0], 4.0 * PI / 3.0)] {
            let m = PolarMesh::new(dom, &pts, spec(0)).unwrap();
            let s: f64 = (0..m.len()).map(|c| m.weight(c)).sum();
            assert!((s - total).abs() < 1e-12, "{dom:?}: {s}");
            for p in &pts {
                let cc = m.corner_cells(*p);
                assert_eq!(cc.len(), if dom == Domain::Disk { 2 } else { 1 });
            }
        }
    }

    #[test]
    fn points_on_faces_and_decades() {
        let m = PolarMesh::new(Domain::Disk, &[1.0, 4.0], spec(1)).unwrap();
        for p in [1.0, 4.0] {
            assert!(m.a_faces.iter().any(|a| (a - p).abs() < 1e-12));
        }
        let finest = m.a_faces.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        assert!(finest < 1e-7 && finest > 1e-8);
    }

    #[test]
    fn quadratic_is_reproduced() {
        // -Δ(1 - r²) = 2N; the FV operator with u = 0 on r = 1 recovers it
        for dom in [Domain::Disk, Domain::Ball] {
            let m = PolarMesh::new(dom, &[0.0], spec(0)).unwrap();
            let n = dom.dim() as f64;
            let u: Vec<f64> = (0..m.len()).map(|c| 1.0 - m.polar(c).0.powi(2)).collect();
            let b: Vec<f64> = (0..m.len()).map(|c| 2.0 * n * m.volume[c]).collect();
            let solver = FvSolver::new(&m, &vec![false; m.len()]).unwrap();
            let mut x = vec![0.0; m.len()];
            solver.solve(&b, &mut x);
            let err = x.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 5e-3, "{dom:?}: {err}");
        }
    }
}
