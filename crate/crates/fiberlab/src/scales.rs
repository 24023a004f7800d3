//! Scale geometry, annular momentum grids, and the coupling function.
//!
//! Photon momenta below the UV radius kappa are split into dyadic annuli:
//! scale j has inner radius rho(j+1) = kappa 2^{-j-1} and outer radius
//! rho(j). A ModeGrid carries finitely many (k, polarization) samples per
//! annulus with positive quadrature weights; every L^2 pairing downstream
//! becomes a weighted sum over these samples. That replacement is the one
//! global discretization contract: amplitudes are sampled as sqrt(w) f(k)
//! exactly once, at field-operator assembly.

use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dyadic scale ladder below the UV cutoff.
#[derive(Clone, Debug)]
pub struct ScaleGeometry {
    pub kappa: f64,
    /// Contraction ratio per scale; fixed at 1/2.
    pub base: f64,
    pub j_max: u32,
}

impl ScaleGeometry {
    pub fn new(kappa: f64, j_max: u32) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Config(format!("kappa must be positive, got {kappa}")));
        }
        Ok(ScaleGeometry {
            kappa,
            base: 0.5,
            j_max,
        })
    }

    /// rho(j) = kappa 2^{-j}. Scaling by a power of two is exact in binary
    /// floating point, so rho(j) * 2^j recovers kappa bit for bit.
    pub fn rho(&self, j: u32) -> f64 {
        rho(self.kappa, j)
    }
}

pub fn rho(kappa: f64, j: u32) -> f64 {
    kappa * (2.0f64).powi(-(j as i32))
}

/// One sampled photon mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub k: [f64; 3],
    /// Polarization index, 0 or 1.
    pub lambda: usize,
    /// Quadrature weight (volume units).
    pub w: f64,
    /// Annulus index: rho(annulus+1) <= |k| < rho(annulus).
    pub annulus: u32,
}

impl Mode {
    pub fn k_norm(&self) -> f64 {
        norm3(&self.k)
    }
}

/// Finite sampling of the momentum shells, ordered by annulus and then by
/// construction order within the annulus. The order is part of the contract:
/// Fock bases enumerate occupations against it, and tensor factorizations
/// split it by annulus.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeGrid {
    pub kappa: f64,
    pub modes: Vec<Mode>,
}

impl ModeGrid {
    pub fn empty(kappa: f64) -> Self {
        ModeGrid {
            kappa,
            modes: Vec::new(),
        }
    }

    /// Wrap externally constructed modes, checking shell membership.
    pub fn from_modes(kappa: f64, modes: Vec<Mode>) -> Result<Self> {
        for (i, m) in modes.iter().enumerate() {
            let r = m.k_norm();
            let lo = rho(kappa, m.annulus + 1);
            let hi = rho(kappa, m.annulus);
            if !(r >= lo && r < hi) {
                return Err(Error::Config(format!(
                    "mode {i}: |k| = {r} outside annulus {} = [{lo}, {hi})",
                    m.annulus
                )));
            }
            if !(m.w > 0.0) {
                return Err(Error::Config(format!("mode {i}: weight must be positive")));
            }
            if m.lambda > 1 {
                return Err(Error::Config(format!("mode {i}: lambda must be 0 or 1")));
            }
        }
        Ok(ModeGrid { kappa, modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Indices of the modes in annulus j.
    pub fn annulus_mode_indices(&self, j: u32) -> Vec<usize> {
        self.modes
            .iter()
            .enumerate()
            .filter(|(_, m)| m.annulus == j)
            .map(|(i, _)| i)
            .collect()
    }

    /// Concatenate with a deeper annulus grid (modes must stay
    /// annulus-ordered and disjoint).
    pub fn join(&self, deeper: &ModeGrid) -> Result<ModeGrid> {
        if (self.kappa - deeper.kappa).abs() > 0.0 {
            return Err(Error::Config("grid union across different kappa".into()));
        }
        if let (Some(last), Some(first)) = (self.modes.last(), deeper.modes.first()) {
            if last.annulus >= first.annulus {
                return Err(Error::Config(
                    "grid union must append strictly deeper annuli".into(),
                ));
            }
        }
        let mut modes = self.modes.clone();
        modes.extend(deeper.modes.iter().cloned());
        Ok(ModeGrid {
            kappa: self.kappa,
            modes,
        })
    }

    /// CSV lines (annulus_j, kx, ky, kz, lambda, weight), full precision.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("annulus_j,kx,ky,kz,lambda,weight\n");
        for m in &self.modes {
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{},{:.17e}\n",
                m.annulus, m.k[0], m.k[1], m.k[2], m.lambda, m.w
            ));
        }
        s
    }

    pub fn from_csv(kappa: f64, text: &str) -> Result<ModeGrid> {
        let mut modes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Config(format!("grid csv line {}: bad field count", i + 1)));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("grid csv line {}: bad number", i + 1)))
            };
            modes.push(Mode {
                annulus: fields[0]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("grid csv line {}: bad annulus", i + 1)))?,
                k: [parse(fields[1])?, parse(fields[2])?, parse(fields[3])?],
                lambda: fields[4]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("grid csv line {}: bad lambda", i + 1)))?,
                w: parse(fields[5])?,
            });
        }
        ModeGrid::from_modes(kappa, modes)
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// The zonal axis all angular node sets are built around. A diagonal axis
/// keeps every coordinate direction exactly equivalent under coordinate
/// permutations (the isotropy checks lean on this) and keeps generic nodes
/// away from the z-axis edge case of the polarization gauge.
const ZONAL_AXIS: [f64; 3] = [
    0.577_350_269_189_625_8,
    0.577_350_269_189_625_8,
    0.577_350_269_189_625_8,
];

/// Angular node set with n points (n even), equal weights 4 pi / n, closed
/// under k -> -k exactly. n = 2 is the axis pair, n = 6 the octahedron
/// vertex set; other even n use equal-area zonal bands on the upper
/// hemisphere (relative to the zonal axis) reflected through the origin.
fn angular_nodes(n: usize) -> Result<Vec<[f64; 3]>> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::Config(format!(
            "n_angular must be positive and even, got {n}"
        )));
    }
    if n == 2 {
        let u = ZONAL_AXIS;
        return Ok(vec![u, [-u[0], -u[1], -u[2]]]);
    }
    if n == 6 {
        return Ok(vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ]);
    }
    // Frame orthogonal to the zonal axis.
    let u = ZONAL_AXIS;
    let mut e1 = [1.0 - u[0] * u[0], -u[0] * u[1], -u[0] * u[2]];
    let n1 = norm3(&e1);
    for x in &mut e1 {
        *x /= n1;
    }
    let e2 = cross3(&u, &e1);

    let half = n / 2;
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut nodes = Vec::with_capacity(n);
    for i in 0..half {
        // Upper-hemisphere bands of equal area: z in [i, i+1] * (1/half).
        let z = (i as f64 + 0.5) / half as f64;
        let s = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * i as f64;
        let (cp, sp) = (phi.cos(), phi.sin());
        let p = [
            z * u[0] + s * (cp * e1[0] + sp * e2[0]),
            z * u[1] + s * (cp * e1[1] + sp * e2[1]),
            z * u[2] + s * (cp * e1[2] + sp * e2[2]),
        ];
        nodes.push(p);
        nodes.push([-p[0], -p[1], -p[2]]);
    }
    Ok(nodes)
}

/// Deterministic product grid over annulus j: midpoint radial cells times an
/// equal-area angular node set, times both polarizations. Weights are exact
/// cell volumes, so the weight sum reproduces the shell volume identically.
pub fn build_annulus_grid(
    geom: &ScaleGeometry,
    j: u32,
    n_radial: usize,
    n_angular: usize,
) -> Result<ModeGrid> {
    if n_radial == 0 {
        return Err(Error::Config("n_radial must be at least 1".into()));
    }
    let dirs = angular_nodes(n_angular)?;
    let lo = geom.rho(j + 1);
    let hi = geom.rho(j);
    let dr = (hi - lo) / n_radial as f64;
    let wa = 4.0 * std::f64::consts::PI / n_angular as f64;

    let mut modes = Vec::with_capacity(n_radial * n_angular * 2);
    for ir in 0..n_radial {
        let r_lo = lo + ir as f64 * dr;
        let r_hi = lo + (ir + 1) as f64 * dr;
        let r_mid = 0.5 * (r_lo + r_hi);
        let w_cell = wa * (r_hi.powi(3) - r_lo.powi(3)) / 3.0;
        for d in &dirs {
            for lambda in 0..2usize {
                modes.push(Mode {
                    k: [r_mid * d[0], r_mid * d[1], r_mid * d[2]],
                    lambda,
                    w: w_cell,
                    annulus: j,
                });
            }
        }
    }
    ModeGrid::from_modes(geom.kappa, modes)
}

/// Seeded Monte Carlo sampling of annulus j with n_radial * n_angular
/// uniform points (volume-uniform radius, uniform direction), equal weights.
/// Exists for convergence studies; everything reproducible hangs off the
/// deterministic grid.
pub fn build_annulus_grid_mc(
    geom: &ScaleGeometry,
    j: u32,
    n_radial: usize,
    n_angular: usize,
    seed: u64,
) -> Result<ModeGrid> {
    let n_pts = n_radial
        .checked_mul(n_angular)
        .ok_or_else(|| Error::Config("grid size overflow".into()))?;
    if n_pts == 0 {
        return Err(Error::Config("grid must have at least one point".into()));
    }
    let lo = geom.rho(j + 1);
    let hi = geom.rho(j);
    let vol = 4.0 * std::f64::consts::PI / 3.0 * (hi.powi(3) - lo.powi(3));
    let w = vol / n_pts as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((j as u64) << 40));
    let mut modes = Vec::with_capacity(n_pts * 2);
    for _ in 0..n_pts {
        let u: f64 = rng.gen();
        let r = (lo.powi(3) + u * (hi.powi(3) - lo.powi(3))).cbrt();
        // Uniform direction via z and phi; r < hi strictly, and r >= lo.
        let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
        let phi: f64 = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
        let s = (1.0 - z * z).max(0.0).sqrt();
        let r = r.min(hi * (1.0 - 1e-15)).max(lo);
        let k = [r * s * phi.cos(), r * s * phi.sin(), r * z];
        for lambda in 0..2usize {
            modes.push(Mode {
                k,
                lambda,
                w,
                annulus: j,
            });
        }
    }
    ModeGrid::from_modes(geom.kappa, modes)
}

/// Grid carrying annuli 0 .. j-1, the mode content of the scale-j state
/// space. j = 0 gives the empty grid (vacuum-only Fock space).
pub fn grid_up_to_scale(
    geom: &ScaleGeometry,
    j: u32,
    n_radial: usize,
    n_angular: usize,
) -> Result<ModeGrid> {
    let mut grid = ModeGrid::empty(geom.kappa);
    for i in 0..j {
        grid = grid.join(&build_annulus_grid(geom, i, n_radial, n_angular)?)?;
    }
    Ok(grid)
}

/// Coupling value and polarization frame at one mode.
#[derive(Clone, Debug)]
pub struct CouplingSample {
    /// Complex 3-vector value of the coupling; real for this model.
    pub g: [f64; 3],
    pub eps0: [f64; 3],
    pub eps1: [f64; 3],
}

/// Orthonormal polarization pair completing k/|k| to a right-handed triple.
/// Gauge: eps0 = z x khat normalized; for k parallel to the z-axis, eps0 is
/// x and eps1 = +/- y, sign chosen so eps0 x eps1 = khat.
pub fn polarization_pair(k: &[f64; 3]) -> Result<([f64; 3], [f64; 3])> {
    let kn = norm3(k);
    if kn == 0.0 {
        return Err(Error::Config("polarization undefined at k = 0".into()));
    }
    let khat = [k[0] / kn, k[1] / kn, k[2] / kn];
    let zxk = [-khat[1], khat[0], 0.0];
    let s = norm3(&zxk);
    if s < 1e-12 {
        let eps0 = [1.0, 0.0, 0.0];
        let eps1 = if khat[2] > 0.0 {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, -1.0, 0.0]
        };
        return Ok((eps0, eps1));
    }
    let eps0 = [zxk[0] / s, zxk[1] / s, zxk[2] / s];
    let eps1 = cross3(&khat, &eps0);
    Ok((eps0, eps1))
}

/// G(k, lambda) = (2 pi)^{-3/2} 1_{|k| < kappa} |k|^{-1/2} eps_lambda(k),
/// with the polarization frame above.
pub fn coupling(k: &[f64; 3], lambda: usize, kappa: f64) -> Result<CouplingSample> {
    let kn = norm3(k);
    if kn == 0.0 {
        return Err(Error::Config("coupling undefined at k = 0".into()));
    }
    if lambda > 1 {
        return Err(Error::Config(format!("lambda must be 0 or 1, got {lambda}")));
    }
    let (eps0, eps1) = polarization_pair(k)?;
    let eps = if lambda == 0 { eps0 } else { eps1 };
    let amp = if kn < kappa {
        (2.0 * std::f64::consts::PI).powf(-1.5) / kn.sqrt()
    } else {
        0.0
    };
    Ok(CouplingSample {
        g: [amp * eps[0], amp * eps[1], amp * eps[2]],
        eps0,
        eps1,
    })
}

/// Shell volume of annulus j: (4 pi / 3)(rho_j^3 - rho_{j+1}^3).
pub fn annulus_volume(geom: &ScaleGeometry, j: u32) -> f64 {
    let hi = geom.rho(j);
    let lo = geom.rho(j + 1);
    4.0 * std::f64::consts::PI / 3.0 * (hi.powi(3) - lo.powi(3))
}
