//! Deterministic inputs shared by the kernel benchmarks.

use sdfit_core::geometry::PointCloud;
use sdfit_core::network::{Network, NetworkSpec};

/// `n` points on the unit sphere with outward normals, on a Fibonacci lattice.
pub fn sphere_cloud(n: usize) -> PointCloud {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut pts = Vec::with_capacity(3 * n);
    for i in 0..n {
        let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - y * y).sqrt();
        let t = golden * i as f64;
        pts.extend([r * t.cos(), y, r * t.sin()]);
    }
    PointCloud::new(3, pts.clone(), Some(pts)).expect("finite lattice")
}

/// Reduced-profile 3D network after geometric initialization.
pub fn reduced_network(latent_dim: usize) -> Network {
    Network::geometric_init(NetworkSpec::reduced(3, latent_dim), 1.0, 0).expect("valid spec")
}
