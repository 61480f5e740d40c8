use crate::lie::So3;
use crate::scalar::Real;
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use thiserror::Error;

/// Relative eigenvalue gap below which covariance axes are ambiguous.
const EIGEN_TIE: f64 = 1e-6;
/// Points used to propose frames inside a degenerate eigenspace.
const FRAME_PROPOSALS: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObbError {
    #[error("cannot fit a box to {distinct} distinct point(s)")]
    DegenerateCloud { distinct: usize, fallback: Obb<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obb<T: Real> {
    pub center: Vector3<T>,
    /// Columns are the box axes, right-handed.
    pub axes: So3<T>,
    pub half_extents: Vector3<T>,
}

impl<T: Real> Obb<T> {
    /// Whether `p` lies inside the box scaled by `alpha`, with slack `tol`.
    pub fn contains(&self, p: &Vector3<T>, alpha: T, tol: T) -> bool {
        let local = self.axes.matrix().transpose() * (p - self.center);
        (0..3).all(|i| local[i].abs() <= alpha * self.half_extents[i] + tol)
    }

    pub fn volume(&self) -> T {
        T::lit(8.0) * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }
}

fn extents_in<T: Real>(points: &[Vector3<T>], c: &Vector3<T>, axes: &Matrix3<T>) -> Vector3<T> {
    let mut e = Vector3::<T>::zeros();
    for p in points {
        let local = axes.transpose() * (p - c);
        for i in 0..3 {
            e[i] = e[i].max(local[i].abs());
        }
    }
    e
}

fn right_handed<T: Real>(mut m: Matrix3<T>) -> Matrix3<T> {
    if m.determinant() < T::zero() {
        let c = -m.column(2);
        m.set_column(2, &c);
    }
    m
}

/// Orthonormal frame whose first axis is `a` and whose second lies in the
/// span of `a` and `b`; `None` when they are (nearly) parallel.
fn frame_from<T: Real>(a: &Vector3<T>, b: &Vector3<T>) -> Option<Matrix3<T>> {
    let x = a.try_normalize(T::lit(1e-12))?;
    let y = (b - x * x.dot(b)).try_normalize(T::lit(1e-9))?;
    Some(Matrix3::from_columns(&[x, y, x.cross(&y)]))
}

/// Covariance-aligned box: axes are the covariance eigenvectors in
/// descending eigenvalue order, the center is the centroid, and each half
/// extent is the largest absolute coordinate along its axis. When
/// eigenvalues tie, the axes inside the tied eigenspace are chosen among
/// frames spanned by point differences to minimize volume.
pub fn fit_obb<T: Real>(points: &[Vector3<T>]) -> Result<Obb<T>, ObbError> {
    let n = points.len();
    let first = points.first().copied().unwrap_or_else(Vector3::zeros);
    let distinct = if n == 0 {
        0
    } else if points.iter().all(|p| *p == first) {
        1
    } else {
        2
    };
    if distinct < 2 {
        let eps = 1e-9;
        return Err(ObbError::DegenerateCloud {
            distinct,
            fallback: Obb {
                center: first.map(|x| x.as_f64()),
                axes: So3::identity(),
                half_extents: Vector3::repeat(eps),
            },
        });
    }
    let nf = T::from_usize(n).expect("point count fits the scalar");
    let c = points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / nf;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= nf;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite covariance"));
    let vals: Vec<T> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut axes = right_handed(Matrix3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ]));

    let scale = vals[0];
    let tied_01 = (vals[0] - vals[1]) <= T::lit(EIGEN_TIE) * scale;
    let tied_12 = (vals[1] - vals[2]) <= T::lit(EIGEN_TIE) * scale;
    if tied_01 || tied_12 {
        axes = refine_tied_axes(points, &c, axes, tied_01, tied_12);
    }
    Ok(Obb {
        center: c,
        axes: So3::from_matrix_unchecked(axes),
        half_extents: extents_in(points, &c, &axes),
    })
}

fn refine_tied_axes<T: Real>(
    points: &[Vector3<T>],
    c: &Vector3<T>,
    axes: Matrix3<T>,
    tied_01: bool,
    tied_12: bool,
) -> Matrix3<T> {
    let stride = points.len().div_ceil(FRAME_PROPOSALS).max(1);
    let sample: Vec<Vector3<T>> = points.iter().step_by(stride).map(|p| p - c).collect();
    let mut diffs = Vec::new();
    for i in 0..sample.len() {
        for j in i + 1..sample.len() {
            diffs.push(sample[j] - sample[i]);
        }
    }
    // projector onto the ambiguous eigenspace and the axis it must keep
    let (fixed, span): (Option<usize>, Matrix3<T>) = match (tied_01, tied_12) {
        (true, true) => (None, Matrix3::identity()),
        (true, false) => (Some(2), Matrix3::identity() - axes.column(2) * axes.column(2).transpose()),
        _ => (Some(0), Matrix3::identity() - axes.column(0) * axes.column(0).transpose()),
    };
    let centered: Vec<Vector3<T>> = points.iter().map(|p| p - c).collect();
    // padded so that flat clouds still rank frames by their in-plane area
    let pad = extents_in(&centered, &Vector3::zeros(), &axes).max() * T::lit(1e-6);
    let vol = |m: &Matrix3<T>| {
        let e = extents_in(&centered, &Vector3::zeros(), m).add_scalar(pad);
        e.x * e.y * e.z
    };
    let mut best = axes;
    let mut best_vol = vol(&axes);
    let tol = T::lit(1e-9);
    let mut consider = |m: Matrix3<T>| {
        let m = right_handed(m);
        let v = vol(&m);
        if v < best_vol * (T::one() - tol) {
            best_vol = v;
            best = m;
        }
    };
    match fixed {
        None => {
            for a in &diffs {
                for b in &diffs {
                    if let Some(m) = frame_from(a, b) {
                        consider(m);
                    }
                }
            }
        }
        Some(keep) => {
            let k = axes.column(keep).into_owned();
            for d in &diffs {
                let Some(u) = (span * d).try_normalize(T::lit(1e-12)) else {
                    continue;
                };
                let w = k.cross(&u);
                let m = if keep == 2 {
                    Matrix3::from_columns(&[u, w, k])
                } else {
                    Matrix3::from_columns(&[k, u, -w])
                };
                consider(m);
            }
        }
    }
    best
}

/// Separating-axis test between the two boxes with half extents scaled by
/// `alpha`. Evaluated in world coordinates over the 15 candidate axes, so the
/// result is exactly symmetric in its arguments.
pub fn in_contact<T: Real>(a: &Obb<T>, b: &Obb<T>, alpha: T) -> bool {
    let am = a.axes.matrix();
    let bm = b.axes.matrix();
    let d = b.center - a.center;
    let ra = a.half_extents * alpha;
    let rb = b.half_extents * alpha;
    let radius = |m: &Matrix3<T>, r: &Vector3<T>, l: &Vector3<T>| {
        r[0] * m.column(0).dot(l).abs() + r[1] * m.column(1).dot(l).abs() + r[2] * m.column(2).dot(l).abs()
    };
    let separated = |l: &Vector3<T>| d.dot(l).abs() > radius(am, &ra, l) + radius(bm, &rb, l);
    let parallel = T::lit(1e-10);
    for i in 0..3 {
        if separated(&am.column(i).into_owned()) || separated(&bm.column(i).into_owned()) {
            return false;
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let ai = am.column(i).into_owned();
            let bj = bm.column(j).into_owned();
            // b × a is exactly −(a × b), so swapping the boxes flips signs only
            let l = ai.cross(&bj);
            if l.norm_squared() < parallel {
                continue;
            }
            if separated(&l) {
                return false;
            }
        }
    }
    true
}
