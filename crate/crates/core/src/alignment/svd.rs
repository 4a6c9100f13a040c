//! Singular value decomposition of 3x3 matrices by cyclic one-sided Jacobi
//! rotations.

use nalgebra::{Matrix3, Vector3};

const TOLERANCE: f64 = 1e-14;
const MAX_SWEEPS: usize = 60;

/// `m = u * diag(s) * v^T` with `s` sorted descending and `u`, `v` orthogonal.
///
/// Rank-deficient input is handled: missing left singular vectors are
/// completed to an orthonormal basis. `u` may have determinant -1.
pub fn svd_3x3(m: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>, Matrix3<f64>) {
    let mut a = *m;
    let mut v = Matrix3::<f64>::identity();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let alpha = a.column(p).norm_squared();
            let beta = a.column(q).norm_squared();
            let gamma = a.column(p).dot(&a.column(q));
            if gamma == 0.0 || gamma.abs() <= TOLERANCE * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
            let c = 1.0 / t.hypot(1.0);
            let s = c * t;
            rotate_columns(&mut a, p, q, c, s);
            rotate_columns(&mut v, p, q, c, s);
        }
        if !rotated {
            break;
        }
    }

    let mut order = [0usize, 1, 2];
    let norms = [a.column(0).norm(), a.column(1).norm(), a.column(2).norm()];
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let s = Vector3::new(norms[order[0]], norms[order[1]], norms[order[2]]);
    let v_sorted = Matrix3::from_columns(&[v.column(order[0]), v.column(order[1]), v.column(order[2])]);
    let cols = [
        a.column(order[0]).into_owned(),
        a.column(order[1]).into_owned(),
        a.column(order[2]).into_owned(),
    ];
    let u = left_basis(&cols, &s);
    (u, s, v_sorted)
}

fn rotate_columns(m: &mut Matrix3<f64>, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..3 {
        let mp = m[(r, p)];
        let mq = m[(r, q)];
        m[(r, p)] = c * mp - s * mq;
        m[(r, q)] = s * mp + c * mq;
    }
}

/// Orthonormalizes the rotated columns, filling in directions for zero
/// singular values.
fn left_basis(cols: &[Vector3<f64>; 3], s: &Vector3<f64>) -> Matrix3<f64> {
    if s[0] == 0.0 {
        return Matrix3::identity();
    }
    let u0 = cols[0] / s[0];
    let mut u1 = cols[1] - u0 * u0.dot(&cols[1]);
    let n1 = u1.norm();
    if s[1] > 0.0 && n1 > 0.0 {
        u1 /= n1;
    } else {
        u1 = any_orthogonal(&u0);
    }
    let mut u2 = u0.cross(&u1);
    if u2.dot(&cols[2]) < 0.0 {
        u2 = -u2;
    }
    Matrix3::from_columns(&[u0, u1, u2])
}

fn any_orthogonal(u: &Vector3<f64>) -> Vector3<f64> {
    let axis = if u.x.abs() <= u.y.abs() && u.x.abs() <= u.z.abs() {
        Vector3::x()
    } else if u.y.abs() <= u.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    u.cross(&axis).normalize()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn check(m: &Matrix3<f64>) {
        let (u, s, v) = svd_3x3(m);
        let scale = m.norm().max(1e-300);
        let recon = u * Matrix3::from_diagonal(&s) * v.transpose();
        assert!((recon - m).norm() <= 1e-9 * scale, "reconstruction {}", (recon - m).norm());
        assert!((u.transpose() * u - Matrix3::identity()).norm() < 1e-10);
        assert!((v.transpose() * v - Matrix3::identity()).norm() < 1e-10);
        assert!(s[0] >= s[1] && s[1] >= s[2] && s[2] >= 0.0);
    }

    #[test]
    fn identity() {
        let (u, s, v) = svd_3x3(&Matrix3::identity());
        assert_eq!(s, Vector3::new(1.0, 1.0, 1.0));
        assert_eq!(u * v.transpose(), Matrix3::identity());
    }

    #[test]
    fn diagonal_up_to_signs() {
        let (u, s, v) = svd_3x3(&Matrix3::from_diagonal(&Vector3::new(1.0, 3.0, 2.0)));
        assert_eq!(s, Vector3::new(3.0, 2.0, 1.0));
        for i in 0..3 {
            assert_eq!(u.column(i).abs(), v.column(i).abs());
        }
        let (u, s, v) = svd_3x3(&Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, 1.0)));
        assert_eq!(s, Vector3::new(3.0, 2.0, 1.0));
        assert_eq!(u.abs(), Matrix3::identity());
        assert_eq!(v.abs(), Matrix3::identity());
    }

    #[test]
    fn rank_deficient() {
        check(&Matrix3::zeros());
        check(&Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 3.0, 6.0, 9.0));
        check(&Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0));
        check(&Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0));
        let (_, s, _) = svd_3x3(&Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 3.0, 6.0, 9.0));
        assert!((s[0] - 14.0).abs() < 1e-12);
        assert!(s[1] < 1e-12 && s[2] < 1e-12);
    }

    // nalgebra's bidiagonal SVD serves as an independent reference for the
    // singular values.
    #[test]
    fn agrees_with_nalgebra() {
        let m = Matrix3::new(0.3, -1.2, 4.0, 2.2, 0.1, -0.7, -3.3, 1.9, 0.05);
        let (_, s, _) = svd_3x3(&m);
        let mut reference: Vec<f64> = m.singular_values().iter().copied().collect();
        reference.sort_by(|a, b| b.total_cmp(a));
        for i in 0..3 {
            assert!((s[i] - reference[i]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn fuzzed_reconstruction(e in prop::array::uniform9(-1e3..1e3f64)) {
            check(&Matrix3::from_row_slice(&e));
        }

        #[test]
        fn fuzzed_rank_two(a in prop::array::uniform3(-10.0..10.0f64), b in prop::array::uniform3(-10.0..10.0f64), c in -2.0..2.0f64, d in -2.0..2.0f64) {
            let r0 = Vector3::from(a);
            let r1 = Vector3::from(b);
            let r2 = r0 * c + r1 * d;
            check(&Matrix3::from_rows(&[r0.transpose(), r1.transpose(), r2.transpose()]));
        }
    }
}
