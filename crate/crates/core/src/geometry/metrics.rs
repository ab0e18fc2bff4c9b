use rayon::prelude::*;

use super::kdtree::{dist2, KdTree};
use super::PointCloud;
use crate::error::{invalid, Result};

/// Clouds larger than this use the kd-tree; smaller ones are scanned.
pub const KD_TREE_THRESHOLD: usize = 1000;

/// Neighbor rank used for the Gaussian widths of the sampling distribution.
pub const DEFAULT_K: usize = 50;

/// Symmetric and one-sided Chamfer/Hausdorff distances between two sets.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MetricReport {
    pub chamfer: f64,
    pub hausdorff: f64,
    pub chamfer_one_sided_ab: f64,
    pub chamfer_one_sided_ba: f64,
    pub hausdorff_one_sided_ab: f64,
    pub hausdorff_one_sided_ba: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Auto,
    Exhaustive,
    KdTree,
}

impl Backend {
    fn use_tree(self, n: usize) -> bool {
        match self {
            Backend::Auto => n > KD_TREE_THRESHOLD,
            Backend::Exhaustive => false,
            Backend::KdTree => true,
        }
    }
}

/// Distance from every point to its `k`-th closest *other* point.
pub fn kth_nn_distance(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    kth_nn_distance_with(cloud, k, Backend::Auto)
}

/// Exhaustive O(n²) version of [`kth_nn_distance`].
pub fn kth_nn_distance_brute(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    kth_nn_distance_with(cloud, k, Backend::Exhaustive)
}

pub fn kth_nn_distance_with(cloud: &PointCloud, k: usize, backend: Backend) -> Result<Vec<f64>> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return invalid(format!("k must be in 1..{n} for a cloud of {n} points, got {k}"));
    }
    let dim = cloud.dim();
    let pts = cloud.points();
    if backend.use_tree(n) {
        let tree = KdTree::new(dim, pts);
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let nn = tree.nearest(cloud.point(i), k, Some(i));
                nn[k - 1].1.sqrt()
            })
            .collect())
    } else {
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let q = cloud.point(i);
                let mut d: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| dist2(q, &pts[j * dim..(j + 1) * dim]))
                    .collect();
                let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
                kth.sqrt()
            })
            .collect())
    }
}

/// For each point of `queries`, the distance to the closest point of
/// `reference`.
pub fn nearest_distances(queries: &PointCloud, reference: &PointCloud) -> Result<Vec<f64>> {
    nearest_distances_with(queries, reference, Backend::Auto)
}

pub fn nearest_distances_with(queries: &PointCloud, reference: &PointCloud, backend: Backend) -> Result<Vec<f64>> {
    if queries.dim() != reference.dim() {
        return invalid("point sets must share a dimension");
    }
    let dim = reference.dim();
    let pts = reference.points();
    if backend.use_tree(reference.len()) {
        let tree = KdTree::new(dim, pts);
        Ok(queries
            .iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|q| tree.nearest(q, 1, None)[0].1.sqrt())
            .collect())
    } else {
        Ok(queries
            .iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|q| {
                pts.chunks_exact(dim)
                    .map(|p| dist2(q, p))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Chamfer (mean of the one-sided means) and Hausdorff (max of the one-sided
/// maxima) distances, in unsquared Euclidean distance.
pub fn set_distances(a: &PointCloud, b: &PointCloud) -> Result<MetricReport> {
    let ab = nearest_distances(a, b)?;
    let ba = nearest_distances(b, a)?;
    let (c_ab, c_ba) = (mean(&ab), mean(&ba));
    let (h_ab, h_ba) = (max(&ab), max(&ba));
    Ok(MetricReport {
        chamfer: 0.5 * (c_ab + c_ba),
        hausdorff: h_ab.max(h_ba),
        chamfer_one_sided_ab: c_ab,
        chamfer_one_sided_ba: c_ba,
        hausdorff_one_sided_ab: h_ab,
        hausdorff_one_sided_ba: h_ba,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> PointCloud {
        let pts = xs.iter().flat_map(|&x| [x, 0.0]).collect();
        PointCloud::new(2, pts, None).unwrap()
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(3, (0..3 * n).map(|_| rng.random()).collect(), None).unwrap()
    }

    #[test]
    fn kth_on_a_line() {
        let c = line(&[0.0, 1.0, 3.0]);
        assert_eq!(kth_nn_distance(&c, 1).unwrap(), vec![1.0, 1.0, 2.0]);
        assert_eq!(kth_nn_distance(&c, 2).unwrap(), vec![3.0, 2.0, 3.0]);
        assert!(kth_nn_distance(&c, 3).is_err());
        assert!(kth_nn_distance(&c, 0).is_err());
    }

    #[test]
    fn kth_matches_all_pairs_sort() {
        let c = random_cloud(100, 11);
        let got = kth_nn_distance(&c, 50).unwrap();
        for i in 0..100 {
            let mut d: Vec<f64> = (0..100)
                .filter(|&j| j != i)
                .map(|j| {
                    let (p, q) = (c.point(i), c.point(j));
                    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
                })
                .collect();
            d.sort_by(f64::total_cmp);
            assert_eq!(got[i], d[49]);
        }
    }

    #[test]
    fn backends_agree_exactly() {
        let c = random_cloud(1500, 5);
        for k in [1, 8, 50] {
            let tree = kth_nn_distance_with(&c, k, Backend::KdTree).unwrap();
            let brute = kth_nn_distance_with(&c, k, Backend::Exhaustive).unwrap();
            assert_eq!(tree, brute);
        }
        let q = random_cloud(300, 6);
        assert_eq!(
            nearest_distances_with(&q, &c, Backend::KdTree).unwrap(),
            nearest_distances_with(&q, &c, Backend::Exhaustive).unwrap()
        );
    }

    #[test]
    fn set_distance_identity_and_single_pair() {
        let a = random_cloud(20, 1);
        let r = set_distances(&a, &a).unwrap();
        assert_eq!(
            [
                r.chamfer,
                r.hausdorff,
                r.chamfer_one_sided_ab,
                r.chamfer_one_sided_ba,
                r.hausdorff_one_sided_ab,
                r.hausdorff_one_sided_ba
            ],
            [0.0; 6]
        );
        let a = PointCloud::new(3, vec![0., 0., 0.], None).unwrap();
        let b = PointCloud::new(3, vec![1., 0., 0.], None).unwrap();
        let r = set_distances(&a, &b).unwrap();
        for v in [
            r.chamfer,
            r.hausdorff,
            r.chamfer_one_sided_ab,
            r.chamfer_one_sided_ba,
            r.hausdorff_one_sided_ab,
            r.hausdorff_one_sided_ba,
        ] {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn set_distances_match_double_loop() {
        let a = random_cloud(3, 21);
        let b = random_cloud(4, 22);
        let d = |p: &[f64], q: &[f64]| -> f64 { p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() };
        let one_sided = |x: &PointCloud, y: &PointCloud| {
            let mins: Vec<f64> = x
                .iter()
                .map(|p| y.iter().map(|q| d(p, q)).fold(f64::INFINITY, f64::min))
                .collect();
            (
                mins.iter().sum::<f64>() / mins.len() as f64,
                mins.iter().cloned().fold(0.0, f64::max),
            )
        };
        let (cab, hab) = one_sided(&a, &b);
        let (cba, hba) = one_sided(&b, &a);
        let r = set_distances(&a, &b).unwrap();
        assert!((r.chamfer_one_sided_ab - cab).abs() < 1e-15);
        assert!((r.chamfer_one_sided_ba - cba).abs() < 1e-15);
        assert_eq!(r.hausdorff_one_sided_ab, hab);
        assert_eq!(r.hausdorff_one_sided_ba, hba);
        assert!((r.chamfer - 0.5 * (cab + cba)).abs() < 1e-15);
        assert_eq!(r.hausdorff, hab.max(hba));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = random_cloud(3, 1);
        let b = line(&[0.0, 1.0]);
        assert!(set_distances(&a, &b).is_err());
    }

    fn cloud_strategy() -> impl Strategy<Value = PointCloud> {
        proptest::collection::vec(-5.0f64..5.0, 3..45)
            .prop_map(|v| PointCloud::new(3, v[..v.len() / 3 * 3].to_vec(), None).unwrap())
    }

    proptest! {
        #[test]
        fn hausdorff_bounds_chamfer(a in cloud_strategy(), b in cloud_strategy()) {
            let r = set_distances(&a, &b).unwrap();
            prop_assert!(r.hausdorff_one_sided_ab >= r.chamfer_one_sided_ab);
            prop_assert!(r.hausdorff_one_sided_ba >= r.chamfer_one_sided_ba);
        }

        #[test]
        fn rigid_motion_invariance(
            a in cloud_strategy(),
            b in cloud_strategy(),
            angle in 0.0f64..std::f64::consts::TAU,
            shift in proptest::array::uniform3(-3.0f64..3.0),
        ) {
            let (s, c) = angle.sin_cos();
            let mv = |x: &PointCloud| {
                let pts = x
                    .iter()
                    .flat_map(|p| [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1], p[2] + shift[2]])
                    .collect();
                PointCloud::new(3, pts, None).unwrap()
            };
            let r0 = set_distances(&a, &b).unwrap();
            let r1 = set_distances(&mv(&a), &mv(&b)).unwrap();
            prop_assert!((r0.chamfer - r1.chamfer).abs() < 1e-9);
            prop_assert!((r0.hausdorff - r1.hausdorff).abs() < 1e-9);
        }

        #[test]
        fn kth_monotone_in_k(a in cloud_strategy()) {
            let n = a.len();
            prop_assume!(n >= 3);
            let mut prev = kth_nn_distance(&a, 1).unwrap();
            for k in 2..n {
                let cur = kth_nn_distance(&a, k).unwrap();
                for (p, c) in prev.iter().zip(&cur) {
                    prop_assert!(c >= p);
                }
                prev = cur;
            }
        }
    }
}
