//! Splitting cuboids into six path tetrahedra.
//!
//! Corners are numbered by bits (bit 0 = x, bit 1 = y, bit 2 = z). Each tet
//! walks from corner 0 to corner 7 along one axis at a time, so all six share
//! the main diagonal and every face is cut along its min-to-max diagonal.

use crate::Real;

/// Axis order of each path, indexed like [`PATH_TETS`].
pub const PATH_AXES: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Corner indices of the six tets, positively oriented (odd paths have their
/// middle vertices swapped).
pub const PATH_TETS: [[usize; 4]; 6] = [[0, 1, 3, 7], [0, 5, 1, 7], [0, 3, 2, 7], [0, 2, 6, 7], [0, 4, 5, 7], [0, 6, 4, 7]];

pub fn corner<T: Real>(lo: &[T; 3], hi: &[T; 3], k: usize) -> [T; 3] {
    std::array::from_fn(|a| if k >> a & 1 == 1 { hi[a] } else { lo[a] })
}

/// The six tets of `[lo, hi]` as vertex coordinates.
pub fn tetrahedralize<T: Real>(lo: &[T; 3], hi: &[T; 3]) -> [[[T; 3]; 4]; 6] {
    std::array::from_fn(|t| std::array::from_fn(|v| corner(lo, hi, PATH_TETS[t][v])))
}

pub fn signed_volume<T: Real>(p: &[[T; 3]; 4]) -> T {
    let e: [[T; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|a| p[i + 1][a] - p[0][a]));
    let det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1]) - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
        + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
    det / T::c(6.0)
}

/// Index into [`PATH_TETS`] of the tet containing local point `u` in `[0,1]^3`,
/// and the piecewise-linear weights of the four corners of that tet.
pub fn locate_in_cube<T: Real>(u: &[T; 3]) -> (usize, [(usize, T); 4]) {
    let mut order = [0usize, 1, 2];
    // descending, ties broken by axis index
    order.sort_by(|&i, &j| u[j].partial_cmp(&u[i]).unwrap_or(std::cmp::Ordering::Equal));
    let [a, b, c] = order;
    let t = PATH_AXES.iter().position(|p| *p == order).unwrap();
    let ea = 1 << a;
    let eab = ea | 1 << b;
    let w = [
        (0, T::one() - u[a]),
        (ea, u[a] - u[b]),
        (eab, u[b] - u[c]),
        (7, u[c]),
    ];
    (t, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_cube_tets_have_equal_volume() {
        for t in tetrahedralize::<f64>(&[0.0; 3], &[1.0; 3]) {
            assert!((signed_volume(&t) - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn tets_follow_their_paths() {
        for (t, axes) in PATH_TETS.iter().zip(PATH_AXES) {
            let path = [0, 1 << axes[0], (1 << axes[0]) | (1 << axes[1]), 7];
            let mut a = *t;
            let mut b = path;
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn each_face_split_by_one_diagonal() {
        // a face is {corners with bit a == s}; its triangles are the tet faces
        // lying in it, and together they must use exactly one diagonal
        for a in 0..3 {
            for s in 0..2 {
                let on_face = |k: usize| (k >> a & 1) == s;
                let mut tris = Vec::new();
                for t in PATH_TETS {
                    let f: Vec<usize> = t.iter().copied().filter(|&k| on_face(k)).collect();
                    if f.len() == 3 {
                        tris.push(f);
                    }
                }
                assert_eq!(tris.len(), 2, "axis {a} side {s}");
                let diag: Vec<usize> = tris[0].iter().copied().filter(|k| tris[1].contains(k)).collect();
                assert_eq!(diag.len(), 2);
                let (lo, hi) = (diag[0].min(diag[1]), diag[0].max(diag[1]));
                // min-to-max corner of the face
                let face: Vec<usize> = (0..8).filter(|&k| on_face(k)).collect();
                assert_eq!((lo, hi), (face[0], face[3]));
            }
        }
    }

    proptest! {
        #[test]
        fn volumes_partition_random_cuboid(
            lo in prop::array::uniform3(-10.0f64..10.0),
            ext in prop::array::uniform3(0.01f64..5.0),
        ) {
            let hi = [lo[0] + ext[0], lo[1] + ext[1], lo[2] + ext[2]];
            let vols: Vec<f64> = tetrahedralize(&lo, &hi).iter().map(signed_volume).collect();
            let total: f64 = vols.iter().sum();
            let cube = ext[0] * ext[1] * ext[2];
            prop_assert!(vols.iter().all(|v| *v > 0.0));
            prop_assert!((total - cube).abs() <= 1e-12 * cube.max(1.0));
        }

        #[test]
        fn cube_weights_reproduce_point(u in prop::array::uniform3(0.0f64..=1.0)) {
            let (t, w) = locate_in_cube(&u);
            let sum: f64 = w.iter().map(|p| p.1).sum();
            prop_assert!((sum - 1.0).abs() < 1e-14);
            prop_assert!(w.iter().all(|p| p.1 >= 0.0));
            for (k, _) in w {
                prop_assert!(PATH_TETS[t].contains(&k));
            }
            for a in 0..3 {
                let x: f64 = w.iter().map(|&(k, wk)| wk * ((k >> a) & 1) as f64).sum();
                prop_assert!((x - u[a]).abs() < 1e-14);
            }
        }
    }
}
