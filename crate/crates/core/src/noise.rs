//! Truncated Karhunen-Loeve noise increments and the exact stochastic
//! rotation stage.
//!
//! One scalar increment lattice per time step:
//!
//! ```text
//! dW[i,j,k] = 2 sqrt(2 tau) * sum_{m,l,q=1..M} xi_{m,l,q}
//!             * sin(m pi x_i) sin(l pi y_j) sin(q pi z_k)
//!             / sqrt(m^3 + l^3 + q^3)
//! ```
//!
//! with `xi` iid standard normal, drawn in fixed lexicographic `(m, l, q)`
//! order from a stream keyed by `(seed, path_id, step)`. Keying by step
//! makes increments random-access and bitwise reproducible regardless of
//! thread count or evaluation order, which the coarse/fine path coupling
//! of the convergence experiment depends on.
//!
//! The assembly contracts one mode index at a time, so the cost is
//! `O(M I J K + M^2 J K + M^3 K)` instead of the naive `O(M^3 I J K)`.

use std::borrow::Cow;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::{Axis, FieldState, Grid, Medium, ScalarField};

/// Identifies one Monte Carlo noise path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseSpec {
    /// Truncation level M: modes per axis.
    pub modes: usize,
    pub seed: u64,
    pub path_id: u64,
}

impl NoiseSpec {
    pub fn new(modes: usize, seed: u64, path_id: u64) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidModeCount);
        }
        Ok(NoiseSpec {
            modes,
            seed,
            path_id,
        })
    }
}

/// One scalar Brownian-increment lattice `(dW)^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseIncrement {
    values: ScalarField,
}

impl NoiseIncrement {
    /// Wraps an explicit increment lattice (replay, tests).
    pub fn from_field(values: ScalarField) -> Self {
        NoiseIncrement { values }
    }

    pub fn values(&self) -> &ScalarField {
        &self.values
    }

    pub fn counts(&self) -> [usize; 3] {
        self.values.counts()
    }
}

/// Precomputed sine tables and mode coefficients for one grid.
#[derive(Clone, Debug)]
pub struct BasisTables {
    modes: usize,
    counts: [usize; 3],
    /// `sin((m+1) pi x_i)`, layout `[m][i]`, one table per axis.
    sin_x: Vec<f64>,
    sin_y: Vec<f64>,
    sin_z: Vec<f64>,
    /// `1 / sqrt(m^3 + l^3 + q^3)` over 1-based `(m, l, q)`, lexicographic.
    eta: Vec<f64>,
}

impl BasisTables {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    /// `sin(m pi x_i)` for 1-based mode `m` on the given axis.
    pub fn sine(&self, axis: Axis, mode: usize, index: usize) -> f64 {
        let table = match axis {
            Axis::X => &self.sin_x,
            Axis::Y => &self.sin_y,
            Axis::Z => &self.sin_z,
        };
        table[(mode - 1) * self.counts[axis.index()] + index]
    }

    /// `eta` coefficient for 1-based `(m, l, q)`.
    pub fn eta(&self, m: usize, l: usize, q: usize) -> f64 {
        self.eta[((m - 1) * self.modes + (l - 1)) * self.modes + (q - 1)]
    }
}

/// Tabulates the sine basis at the grid nodes and the mode coefficients.
/// The `2 sqrt(2)` basis prefactor is applied at assembly time, not stored.
pub fn precompute_basis(grid: &Grid, modes: usize) -> Result<BasisTables> {
    if modes == 0 {
        return Err(Error::InvalidModeCount);
    }
    let counts = grid.counts();
    let table = |axis: Axis| -> Vec<f64> {
        let count = grid.count(axis);
        let mut t = Vec::with_capacity(modes * count);
        for m in 1..=modes {
            for i in 0..count {
                t.push((m as f64 * std::f64::consts::PI * grid.coord(axis, i)).sin());
            }
        }
        t
    };
    let mut eta = Vec::with_capacity(modes * modes * modes);
    for m in 1..=modes {
        for l in 1..=modes {
            for q in 1..=modes {
                let cubes = (m * m * m + l * l * l + q * q * q) as f64;
                eta.push(1.0 / cubes.sqrt());
            }
        }
    }
    Ok(BasisTables {
        modes,
        counts,
        sin_x: table(Axis::X),
        sin_y: table(Axis::Y),
        sin_z: table(Axis::Z),
        eta,
    })
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic stream key for `(seed, path_id, step)`.
fn stream_key(seed: u64, path_id: u64, step: u64) -> [u8; 32] {
    let mut state = mix64(mix64(mix64(seed ^ 0x706a_74b1_5c6a_8d21) ^ path_id) ^ step);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    key
}

/// Draws the `M^3` standard normals of step `step` in lexicographic
/// `(m, l, q)` order. The stream depends only on `(seed, path_id, step)`.
pub fn gaussian_block(spec: &NoiseSpec, step: usize) -> Vec<f64> {
    let mut rng = ChaCha12Rng::from_seed(stream_key(spec.seed, spec.path_id, step as u64));
    (0..spec.modes * spec.modes * spec.modes)
        .map(|_| rng.sample(StandardNormal))
        .collect()
}

/// Assembles an increment from an explicit Gaussian block (the test hook:
/// forcing `xi` reproduces closed-form values).
pub fn increment_from_gaussians(
    tables: &BasisTables,
    tau: f64,
    xi: &[f64],
) -> Result<NoiseIncrement> {
    let m_count = tables.modes;
    let expected = m_count * m_count * m_count;
    if xi.len() != expected {
        return Err(Error::GaussianBlockSize {
            expected,
            actual: xi.len(),
        });
    }
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::InvalidTimeStep { tau });
    }
    let [ci, cj, ck] = tables.counts;

    // Contract q, then l, then m.
    let mut g1 = vec![0.0; m_count * m_count * ck];
    for m in 0..m_count {
        for l in 0..m_count {
            let base = (m * m_count + l) * m_count;
            let out = (m * m_count + l) * ck;
            for q in 0..m_count {
                let coeff = tables.eta[base + q] * xi[base + q];
                if coeff == 0.0 {
                    continue;
                }
                let sz = &tables.sin_z[q * ck..(q + 1) * ck];
                for k in 0..ck {
                    g1[out + k] += coeff * sz[k];
                }
            }
        }
    }

    let mut g2 = vec![0.0; m_count * cj * ck];
    for m in 0..m_count {
        for l in 0..m_count {
            let src = (m * m_count + l) * ck;
            let sy = &tables.sin_y[l * cj..(l + 1) * cj];
            for (j, &w) in sy.iter().enumerate() {
                let out = (m * cj + j) * ck;
                for k in 0..ck {
                    g2[out + k] += w * g1[src + k];
                }
            }
        }
    }

    let scale = 2.0 * (2.0 * tau).sqrt();
    let mut values = ScalarField::zeros(tables.counts);
    {
        let data = values.as_mut_slice();
        for m in 0..m_count {
            let sx = &tables.sin_x[m * ci..(m + 1) * ci];
            for j in 0..cj {
                for k in 0..ck {
                    let w = scale * g2[(m * cj + j) * ck + k];
                    if w == 0.0 {
                        continue;
                    }
                    let row = ci * (j + cj * k);
                    for i in 0..ci {
                        data[row + i] += w * sx[i];
                    }
                }
            }
        }
    }
    Ok(NoiseIncrement { values })
}

/// Samples the increment of time step `step` for the path identified by
/// `spec`.
pub fn sample_increment(
    spec: &NoiseSpec,
    step: usize,
    tables: &BasisTables,
    tau: f64,
) -> Result<NoiseIncrement> {
    increment_from_gaussians(tables, tau, &gaussian_block(spec, step))
}

/// Sums consecutive groups of `ratio` fine increments into coarse ones;
/// Brownian increments over adjacent intervals add, so the coarse path is
/// the same realization observed at the coarser step.
pub fn coarsen_path(fine: &[NoiseIncrement], ratio: usize) -> Result<Vec<NoiseIncrement>> {
    if ratio == 0 || !fine.len().is_multiple_of(ratio) {
        return Err(Error::IndivisibleCoarsening {
            len: fine.len(),
            ratio,
        });
    }
    let mut coarse = Vec::with_capacity(fine.len() / ratio);
    for chunk in fine.chunks_exact(ratio) {
        let mut acc = chunk[0].clone();
        for inc in &chunk[1..] {
            if inc.counts() != acc.counts() {
                return Err(Error::ShapeMismatch {
                    expected: acc.counts(),
                    actual: inc.counts(),
                });
            }
            for (a, b) in acc
                .values
                .as_mut_slice()
                .iter_mut()
                .zip(inc.values.as_slice())
            {
                *a += b;
            }
        }
        coarse.push(acc);
    }
    Ok(coarse)
}

/// Applies the exact stochastic stage: at every node, with
/// `phi = lambda * dW / sqrt(eps * mu)`,
///
/// ```text
/// E' = cos(phi) E - sqrt(mu/eps) sin(phi) H
/// H' = sqrt(eps/mu) sin(phi) E + cos(phi) H
/// ```
///
/// componentwise over the three (E_a, H_a) pairs. The map is a rotation in
/// the weighted norm, so `eps |E|^2 + mu |H|^2` is preserved pointwise.
pub fn apply_rotation(
    state: &mut FieldState,
    increment: &NoiseIncrement,
    medium: &Medium,
) -> Result<()> {
    if state.counts() != increment.counts() {
        return Err(Error::ShapeMismatch {
            expected: state.counts(),
            actual: increment.counts(),
        });
    }
    let rate = medium.lambda / (medium.eps * medium.mu).sqrt();
    let e_weight = (medium.mu / medium.eps).sqrt();
    let h_weight = (medium.eps / medium.mu).sqrt();
    // The angle is shared by all three component pairs at a node.
    let trig: Vec<(f64, f64)> = increment
        .values
        .as_slice()
        .iter()
        .map(|&w| (rate * w).sin_cos())
        .collect();
    for a in 0..3 {
        let (e, h) = state.component_pair_mut(
            crate::field::Component::ALL[a],
            crate::field::Component::ALL[a + 3],
        );
        let e = e.as_mut_slice();
        let h = h.as_mut_slice();
        for (idx, &(sin, cos)) in trig.iter().enumerate() {
            let ev = e[idx];
            let hv = h[idx];
            e[idx] = cos * ev - e_weight * sin * hv;
            h[idx] = h_weight * sin * ev + cos * hv;
        }
    }
    Ok(())
}

/// Supplies the increment sequence for one evolution.
pub enum NoisePath<'a> {
    /// Precomputed increments (e.g. a coarsened path).
    Stored(&'a [NoiseIncrement]),
    /// Increments sampled on demand from the keyed stream.
    Sampled {
        spec: NoiseSpec,
        tables: &'a BasisTables,
        tau: f64,
    },
}

impl NoisePath<'_> {
    pub fn increment(&self, step: usize) -> Result<Cow<'_, NoiseIncrement>> {
        match self {
            NoisePath::Stored(list) => {
                list.get(step)
                    .map(Cow::Borrowed)
                    .ok_or(Error::NoisePathExhausted {
                        requested: step,
                        available: list.len(),
                    })
            }
            NoisePath::Sampled { spec, tables, tau } => {
                Ok(Cow::Owned(sample_increment(spec, step, tables, *tau)?))
            }
        }
    }
}

const DUMP_MAGIC: &[u8; 8] = b"MXWNOIS1";

/// A replayable increment sequence read back from disk.
pub struct IncrementDump {
    pub seed: u64,
    pub path_id: u64,
    pub modes: usize,
    pub tau: f64,
    pub counts: [usize; 3],
    pub increments: Vec<NoiseIncrement>,
}

/// Writes an increment sequence with a versioned header
/// (seed, path_id, M, tau, counts) for replay.
pub fn write_increment_dump(
    path: &Path,
    spec: &NoiseSpec,
    tau: f64,
    increments: &[NoiseIncrement],
) -> Result<()> {
    let wrap = |e| Error::io(path, e);
    let counts = increments
        .first()
        .map(NoiseIncrement::counts)
        .unwrap_or([0; 3]);
    for inc in increments {
        if inc.counts() != counts {
            return Err(Error::ShapeMismatch {
                expected: counts,
                actual: inc.counts(),
            });
        }
    }
    let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
    w.write_all(DUMP_MAGIC).map_err(wrap)?;
    w.write_all(&spec.seed.to_le_bytes()).map_err(wrap)?;
    w.write_all(&spec.path_id.to_le_bytes()).map_err(wrap)?;
    w.write_all(&(spec.modes as u64).to_le_bytes())
        .map_err(wrap)?;
    w.write_all(&tau.to_le_bytes()).map_err(wrap)?;
    for c in counts {
        w.write_all(&(c as u64).to_le_bytes()).map_err(wrap)?;
    }
    w.write_all(&(increments.len() as u64).to_le_bytes())
        .map_err(wrap)?;
    for inc in increments {
        for v in inc.values.as_slice() {
            w.write_all(&v.to_le_bytes()).map_err(wrap)?;
        }
    }
    w.flush().map_err(wrap)
}

/// Reads a dump written by [`write_increment_dump`].
pub fn read_increment_dump(path: &Path) -> Result<IncrementDump> {
    let wrap = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(wrap)?);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(wrap)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::BadDump {
            reason: "unrecognized magic bytes".into(),
        });
    }
    let mut u64_buf = [0u8; 8];
    let mut read_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut u64_buf).map_err(|e| Error::io(path, e))?;
        Ok(u64::from_le_bytes(u64_buf))
    };
    let seed = read_u64(&mut r)?;
    let path_id = read_u64(&mut r)?;
    let modes = read_u64(&mut r)? as usize;
    let tau = f64::from_le_bytes(read_u64(&mut r)?.to_le_bytes());
    let counts = [
        read_u64(&mut r)? as usize,
        read_u64(&mut r)? as usize,
        read_u64(&mut r)? as usize,
    ];
    let n_increments = read_u64(&mut r)? as usize;

    let lattice = counts[0]
        .checked_mul(counts[1])
        .and_then(|v| v.checked_mul(counts[2]))
        .ok_or_else(|| Error::BadDump {
            reason: "lattice shape overflows".into(),
        })?;
    // Reject headers whose payload could not fit in any plausible file
    // before trusting the declared counts.
    let payload = lattice
        .checked_mul(n_increments)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| Error::BadDump {
            reason: "declared payload size overflows".into(),
        })?;
    let actual = std::fs::metadata(path).map_err(wrap)?.len();
    if (payload as u64) > actual {
        return Err(Error::BadDump {
            reason: format!("header declares {payload} payload bytes, file has {actual}"),
        });
    }
    let mut increments = Vec::with_capacity(n_increments);
    for _ in 0..n_increments {
        let mut field = ScalarField::zeros(counts);
        for v in field.as_mut_slice() {
            r.read_exact(&mut u64_buf).map_err(wrap)?;
            *v = f64::from_le_bytes(u64_buf);
        }
        increments.push(NoiseIncrement { values: field });
    }
    Ok(IncrementDump {
        seed,
        path_id,
        modes,
        tau,
        counts,
        increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{init_fields, Component, InitialCondition};
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;

    fn quarter_grid() -> Grid {
        // Node (0, 0, 0) sits at (1/4, 1/4, 1/4).
        Grid::cube(0.25, 1.25, 3, 0.5, 1).unwrap()
    }

    #[test]
    fn eta_coefficients() {
        let grid = quarter_grid();
        let tables = precompute_basis(&grid, 2).unwrap();
        assert_abs_diff_eq!(tables.eta(1, 1, 1), 1.0 / 3.0_f64.sqrt(), epsilon = 1e-16);
        assert_abs_diff_eq!(tables.eta(2, 1, 1), 1.0 / 10.0_f64.sqrt(), epsilon = 1e-16);
    }

    #[test]
    fn sine_table_hits_unit_peak() {
        // x = 1/2 with m = 1: sin(pi / 2) = 1.
        let grid = Grid::cube(0.5, 1.5, 3, 0.5, 1).unwrap();
        let tables = precompute_basis(&grid, 1).unwrap();
        assert_abs_diff_eq!(
            tables.sine(Axis::X, 1, 0),
            1.0,
            epsilon = 2.0 * f64::EPSILON
        );
    }

    #[test]
    fn forced_zero_gaussians_give_zero_increment() {
        let grid = quarter_grid();
        let tables = precompute_basis(&grid, 3).unwrap();
        let inc = increment_from_gaussians(&tables, 0.25, &vec![0.0; 27]).unwrap();
        assert!(inc.values().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_mode_increment_matches_closed_form() {
        let grid = quarter_grid();
        let tables = precompute_basis(&grid, 1).unwrap();
        let inc = increment_from_gaussians(&tables, 0.5, &[1.0]).unwrap();
        // 2 sqrt(2 * 1/2) * (1/sqrt(3)) * sin(pi/4)^3
        assert_abs_diff_eq!(
            inc.values()[(0, 0, 0)],
            0.408_248_290_463_863,
            epsilon = 1e-14
        );
    }

    #[test]
    fn contraction_matches_naive_triple_sum() {
        use rand::Rng;
        use rand::SeedableRng;
        let grid = Grid::cube(0.0, 0.5, 5, 0.125, 1).unwrap();
        let modes = 3;
        let tables = precompute_basis(&grid, modes).unwrap();
        let mut rng = StdRng::seed_from_u64(41);
        let xi: Vec<f64> = (0..modes * modes * modes)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let tau = 0.125;
        let fast = increment_from_gaussians(&tables, tau, &xi).unwrap();

        let scale = 2.0 * (2.0 * tau).sqrt();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    let (x, y, z) = grid.node(i, j, k);
                    let mut acc = 0.0;
                    for m in 1..=modes {
                        for l in 1..=modes {
                            for q in 1..=modes {
                                let eta =
                                    1.0 / (((m * m * m + l * l * l + q * q * q) as f64).sqrt());
                                let idx = ((m - 1) * modes + (l - 1)) * modes + (q - 1);
                                acc += eta
                                    * xi[idx]
                                    * (m as f64 * std::f64::consts::PI * x).sin()
                                    * (l as f64 * std::f64::consts::PI * y).sin()
                                    * (q as f64 * std::f64::consts::PI * z).sin();
                            }
                        }
                    }
                    assert_abs_diff_eq!(fast.values()[(i, j, k)], scale * acc, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn sampling_is_reproducible_and_paths_are_distinct() {
        let grid = quarter_grid();
        let tables = precompute_basis(&grid, 4).unwrap();
        let spec = NoiseSpec::new(4, 7, 3).unwrap();
        let a = sample_increment(&spec, 5, &tables, 0.1).unwrap();
        let b = sample_increment(&spec, 5, &tables, 0.1).unwrap();
        assert_eq!(a, b);

        let other_path = NoiseSpec::new(4, 7, 4).unwrap();
        let c = sample_increment(&other_path, 5, &tables, 0.1).unwrap();
        assert_ne!(a, c);

        let other_step = sample_increment(&spec, 6, &tables, 0.1).unwrap();
        assert_ne!(a, other_step);
    }

    #[test]
    fn coarsening_sums_adjacent_increments() {
        let grid = quarter_grid();
        let tables = precompute_basis(&grid, 2).unwrap();
        let spec = NoiseSpec::new(2, 11, 0).unwrap();
        let fine: Vec<NoiseIncrement> = (0..4)
            .map(|n| sample_increment(&spec, n, &tables, 0.25).unwrap())
            .collect();

        let identity = coarsen_path(&fine, 1).unwrap();
        assert_eq!(identity.len(), 4);
        assert_eq!(identity[0], fine[0]);

        let coarse = coarsen_path(&fine, 2).unwrap();
        assert_eq!(coarse.len(), 2);
        for idx in 0..fine[0].values().len() {
            let i = (idx % 3, (idx / 3) % 3, idx / 9);
            assert_eq!(
                coarse[0].values()[i],
                fine[0].values()[i] + fine[1].values()[i]
            );
            assert_eq!(
                coarse[1].values()[i],
                fine[2].values()[i] + fine[3].values()[i]
            );
        }

        assert!(coarsen_path(&fine, 3).is_err());
    }

    #[test]
    fn single_mode_node_variance_matches_closed_form() {
        // At (1/4, 1/4, 1/4) with M = 1 and tau = 1 the node variance is
        // 8 * (1/3) * (1/2)^3 = 1/3.
        let grid = quarter_grid();
        let tables = precompute_basis(&grid, 1).unwrap();
        let n_samples = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for s in 0..n_samples {
            let spec = NoiseSpec::new(1, 2718, s as u64).unwrap();
            let v = sample_increment(&spec, 0, &tables, 1.0).unwrap().values()[(0, 0, 0)];
            sum += v;
            sum_sq += v * v;
        }
        let n = n_samples as f64;
        let mean = sum / n;
        let var = sum_sq / n - mean * mean;
        let expected = 1.0 / 3.0;
        let se = expected * (2.0 / (n - 1.0)).sqrt();
        assert!(mean.abs() <= 3.0 * (expected / n).sqrt());
        assert!(
            (var - expected).abs() <= 3.0 * se,
            "var {var:.5} vs 1/3 (3 se = {:.5})",
            3.0 * se
        );
    }

    #[test]
    fn coarsened_variance_scales_with_ratio() {
        // Brownian scaling: summing r fine increments multiplies the
        // node variance by r.
        let grid = quarter_grid();
        let tables = precompute_basis(&grid, 1).unwrap();
        let tau = 0.5;
        let n_samples = 4000;
        let ratio = 2;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for s in 0..n_samples {
            let spec = NoiseSpec::new(1, 1234, s as u64).unwrap();
            let fine: Vec<NoiseIncrement> = (0..ratio)
                .map(|n| sample_increment(&spec, n, &tables, tau).unwrap())
                .collect();
            let coarse = coarsen_path(&fine, ratio).unwrap();
            let v = coarse[0].values()[(0, 0, 0)];
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n_samples as f64;
        let var = sum_sq / n_samples as f64 - mean * mean;
        // Analytic node variance of one fine increment: 8 tau eta^2 sin^6.
        let fine_var = 8.0 * tau * (1.0 / 3.0) * 0.5_f64.powi(3);
        let expected = ratio as f64 * fine_var;
        let se = expected * (2.0 / (n_samples as f64 - 1.0)).sqrt();
        assert!(
            (var - expected).abs() <= 3.0 * se,
            "var {var:.4} expected {expected:.4} (3se = {:.4})",
            3.0 * se
        );
    }

    #[test]
    fn rotation_with_zero_intensity_is_identity() {
        let grid = quarter_grid();
        let tables = precompute_basis(&grid, 2).unwrap();
        let spec = NoiseSpec::new(2, 3, 0).unwrap();
        let dw = sample_increment(&spec, 0, &tables, 0.5).unwrap();
        let medium = Medium::vacuum(0.0);
        let mut state = init_fields(&grid, &InitialCondition::PlaneWave);
        let before = state.clone();
        apply_rotation(&mut state, &dw, &medium).unwrap();
        assert_eq!(state, before);
    }

    #[test]
    fn quarter_turn_swaps_the_pair_with_sign() {
        let grid = quarter_grid();
        let medium = Medium::vacuum(1.0);
        let mut state = init_fields(&grid, &InitialCondition::Zero);
        state.component_mut(Component::E1).as_mut_slice().fill(1.0);
        state.component_mut(Component::H1).as_mut_slice().fill(1.0);

        let mut dw_field = ScalarField::zeros(grid.counts());
        dw_field.as_mut_slice().fill(std::f64::consts::FRAC_PI_2);
        let dw = NoiseIncrement { values: dw_field };

        apply_rotation(&mut state, &dw, &medium).unwrap();
        // E'_a = cos E_a - sin H_a ; H'_a = sin E_a + cos H_a.
        for idx in [(0, 0, 0), (1, 2, 0), (2, 2, 2)] {
            assert_abs_diff_eq!(state.component(Component::E1)[idx], -1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(state.component(Component::H1)[idx], 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(state.component(Component::E2)[idx], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rotation_preserves_pointwise_weighted_energy() {
        use rand::Rng;
        let grid = Grid::cube(0.0, 1.0, 7, 0.1, 1).unwrap();
        let medium = Medium::new(2.5, 0.4, 1.7).unwrap();
        let mut rng = StdRng::seed_from_u64(19);
        let mut state = init_fields(&grid, &InitialCondition::Zero);
        for c in Component::ALL {
            for v in state.component_mut(c).as_mut_slice() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let mut dw_field = ScalarField::zeros(grid.counts());
        for v in dw_field.as_mut_slice() {
            *v = rng.random_range(-2.0..2.0);
        }
        let dw = NoiseIncrement { values: dw_field };

        let energy_at = |s: &FieldState, i: usize, j: usize, k: usize| -> f64 {
            let mut acc = 0.0;
            for a in 0..3 {
                let e = s.component(Component::ALL[a])[(i, j, k)];
                let h = s.component(Component::ALL[a + 3])[(i, j, k)];
                acc += medium.eps * e * e + medium.mu * h * h;
            }
            acc
        };

        let before = state.clone();
        apply_rotation(&mut state, &dw, &medium).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                for k in 0..7 {
                    let b = energy_at(&before, i, j, k);
                    let a = energy_at(&state, i, j, k);
                    assert!((a - b).abs() <= 1e-13 * b.max(1e-300), "node ({i},{j},{k})");
                }
            }
        }
    }

    #[test]
    fn successive_rotations_compose_additively() {
        use rand::Rng;
        let grid = Grid::cube(0.0, 1.0, 5, 0.1, 1).unwrap();
        let medium = Medium::new(1.3, 0.8, 0.9).unwrap();
        let mut rng = StdRng::seed_from_u64(29);
        let mut state = init_fields(&grid, &InitialCondition::Zero);
        for c in Component::ALL {
            for v in state.component_mut(c).as_mut_slice() {
                *v = rng.random_range(-1.0..1.0);
            }
        }

        let mut phi1 = ScalarField::zeros(grid.counts());
        let mut phi2 = ScalarField::zeros(grid.counts());
        let mut phi_sum = ScalarField::zeros(grid.counts());
        for idx in 0..phi1.len() {
            let a = rng.random_range(-1.0..1.0);
            let b = rng.random_range(-1.0..1.0);
            phi1.as_mut_slice()[idx] = a;
            phi2.as_mut_slice()[idx] = b;
            phi_sum.as_mut_slice()[idx] = a + b;
        }

        let mut sequential = state.clone();
        apply_rotation(&mut sequential, &NoiseIncrement { values: phi1 }, &medium).unwrap();
        apply_rotation(&mut sequential, &NoiseIncrement { values: phi2 }, &medium).unwrap();

        let mut combined = state;
        apply_rotation(&mut combined, &NoiseIncrement { values: phi_sum }, &medium).unwrap();

        for c in Component::ALL {
            for (a, b) in sequential
                .component(c)
                .as_slice()
                .iter()
                .zip(combined.component(c).as_slice())
            {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let grid = quarter_grid();
        let other = Grid::cube(0.0, 1.0, 5, 0.1, 1).unwrap();
        let tables = precompute_basis(&grid, 1).unwrap();
        let spec = NoiseSpec::new(1, 0, 0).unwrap();
        let dw = sample_increment(&spec, 0, &tables, 0.1).unwrap();
        let mut state = init_fields(&other, &InitialCondition::Zero);
        assert!(apply_rotation(&mut state, &dw, &Medium::vacuum(1.0)).is_err());
    }

    #[test]
    fn dump_round_trips_bitwise() {
        let grid = quarter_grid();
        let tables = precompute_basis(&grid, 2).unwrap();
        let spec = NoiseSpec::new(2, 99, 5).unwrap();
        let increments: Vec<NoiseIncrement> = (0..3)
            .map(|n| sample_increment(&spec, n, &tables, 0.25).unwrap())
            .collect();

        let dir = std::env::temp_dir().join(format!("maxsplit-dump-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("increments.bin");
        write_increment_dump(&path, &spec, 0.25, &increments).unwrap();
        let dump = read_increment_dump(&path).unwrap();
        std::fs::remove_dir_all(&dir).ok();

        assert_eq!(dump.seed, 99);
        assert_eq!(dump.path_id, 5);
        assert_eq!(dump.modes, 2);
        assert_eq!(dump.tau, 0.25);
        assert_eq!(dump.counts, [3, 3, 3]);
        assert_eq!(dump.increments, increments);
    }

    #[test]
    fn corrupt_dumps_are_rejected() {
        let grid = quarter_grid();
        let tables = precompute_basis(&grid, 1).unwrap();
        let spec = NoiseSpec::new(1, 1, 0).unwrap();
        let increments = vec![sample_increment(&spec, 0, &tables, 0.5).unwrap()];

        let dir = std::env::temp_dir().join(format!("maxsplit-baddump-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("increments.bin");
        write_increment_dump(&path, &spec, 0.5, &increments).unwrap();

        // Wrong magic.
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_increment_dump(&path).is_err());

        // Truncated payload: header promises more data than the file holds.
        bytes[0] ^= 0xff;
        bytes.truncate(bytes.len() - 16);
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_increment_dump(&path).is_err());

        std::fs::remove_dir_all(&dir).ok();
    }
}
