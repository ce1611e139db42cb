//! Sub-connected hybrid precoding.
//!
//! Each RF chain drives a disjoint subarray of `N_T / N_R` antennas through
//! `Q`-bit phase shifters whose phases follow the cluster head's channel. The
//! digital stage zero-forces the low-dimensional equivalent channel seen through
//! the analog network, and each column is scaled so the radiated beam `A d_n`
//! has unit norm. Users are then ordered for SIC by their effective gain.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterAssignment;
use crate::CVector;

pub type CMatrix = DMatrix<Complex64>;

/// Smallest accepted reciprocal condition number of the equivalent channel.
pub const MIN_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrecodingError {
    #[error("{n_t} antennas cannot be split evenly over {n_r} RF chains")]
    IndivisibleArray { n_t: usize, n_r: usize },
    #[error("expected {expected} cluster heads, got {got}")]
    HeadCount { expected: usize, got: usize },
    #[error("head length {got} does not match {expected} antennas")]
    HeadLength { expected: usize, got: usize },
    #[error("equivalent channel is ill-conditioned (rcond {rcond:e}); clustering is degenerate")]
    IllConditioned { rcond: f64 },
    #[error("precoder column {column} radiates no power")]
    ZeroColumn { column: usize },
    #[error("phase quantization needs at least one bit")]
    NoPhaseBits,
}

/// Analog front-end architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    SubConnected,
    FullDigital,
}

/// Wrap-around distance between two angles.
fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Index of the `Q`-bit phase grid point closest to `target` on the circle;
/// ties resolve to the smallest index.
pub fn quantize_phase(target: f64, q_bits: u32) -> u32 {
    assert!(q_bits >= 1, "phase quantization needs at least one bit");
    let levels = 1u64 << q_bits;
    let step = 2.0 * PI / levels as f64;
    let pos = target.rem_euclid(2.0 * PI) / step;
    let lower = pos.floor() as u64 % levels;
    let upper = (lower + 1) % levels;
    let d_lower = circular_distance(lower as f64 * step, target);
    let d_upper = circular_distance(upper as f64 * step, target);
    let pick = if d_upper < d_lower - 1e-12 {
        upper
    } else if (d_upper - d_lower).abs() <= 1e-12 {
        lower.min(upper)
    } else {
        lower
    };
    pick as u32
}

/// The analog precoding matrix `A` (`N_T x N_R`).
#[derive(Debug, Clone, PartialEq)]
pub enum AnalogPrecoder {
    /// Block-diagonal: block `n` holds `N_T / N_R` unit-modulus entries scaled by
    /// `1/sqrt(N_T / N_R)`, with phases `2 pi w / 2^Q`.
    SubConnected {
        n_t: usize,
        n_r: usize,
        q_bits: u32,
        /// `phase_index[block][element]`.
        phase_index: Vec<Vec<u32>>,
    },
    /// `A = I_{N_T}`: every antenna has its own RF chain.
    Identity { n_t: usize },
}

impl AnalogPrecoder {
    pub fn n_t(&self) -> usize {
        match self {
            Self::SubConnected { n_t, .. } | Self::Identity { n_t } => *n_t,
        }
    }

    pub fn n_rf(&self) -> usize {
        match self {
            Self::SubConnected { n_r, .. } => *n_r,
            Self::Identity { n_t } => *n_t,
        }
    }

    pub fn matrix(&self) -> CMatrix {
        match self {
            Self::Identity { n_t } => CMatrix::identity(*n_t, *n_t),
            Self::SubConnected {
                n_t,
                n_r,
                q_bits,
                phase_index,
            } => {
                let sub = n_t / n_r;
                let amp = 1.0 / (sub as f64).sqrt();
                let step = 2.0 * PI / (1u64 << q_bits) as f64;
                let mut a = CMatrix::zeros(*n_t, *n_r);
                for (block, indices) in phase_index.iter().enumerate() {
                    for (s, &w) in indices.iter().enumerate() {
                        a[(block * sub + s, block)] = Complex64::from_polar(amp, step * w as f64);
                    }
                }
                a
            }
        }
    }
}

/// Builds the sub-connected analog precoder; block `n` follows the phases of
/// head `n` on that block's subarray.
pub fn build_analog(heads: &[CVector], n_t: usize, n_r: usize, q_bits: u32) -> Result<AnalogPrecoder, PrecodingError> {
    if n_r == 0 || !n_t.is_multiple_of(n_r) {
        return Err(PrecodingError::IndivisibleArray { n_t, n_r });
    }
    if heads.len() != n_r {
        return Err(PrecodingError::HeadCount {
            expected: n_r,
            got: heads.len(),
        });
    }
    if q_bits == 0 {
        return Err(PrecodingError::NoPhaseBits);
    }
    let sub = n_t / n_r;
    let phase_index = heads
        .iter()
        .enumerate()
        .map(|(block, head)| {
            if head.len() != n_t {
                return Err(PrecodingError::HeadLength {
                    expected: n_t,
                    got: head.len(),
                });
            }
            Ok((0..sub)
                .map(|s| quantize_phase(head[block * sub + s].arg(), q_bits))
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AnalogPrecoder::SubConnected {
        n_t,
        n_r,
        q_bits,
        phase_index,
    })
}

/// Stacks the head channels seen through the analog network: row `n` is `h_n^H A`.
///
/// Channels act on the transmit signal through their conjugate transpose, so
/// analog phases equal to the channel phases combine coherently.
pub fn equivalent_channel(heads: &[CVector], analog: &AnalogPrecoder) -> CMatrix {
    let a = analog.matrix();
    let mut eq = CMatrix::zeros(heads.len(), a.ncols());
    for (n, head) in heads.iter().enumerate() {
        let row = head.adjoint() * &a;
        eq.set_row(n, &row);
    }
    eq
}

/// Digital precoder `D` (`N_RF x N`), with the zero-forcing matrix it was scaled from.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalPrecoder {
    pub matrix: CMatrix,
    pub unnormalized: CMatrix,
}

/// Zero-forcing `H^H (H H^H)^-1` of the equivalent channel.
pub fn zf_digital(eq_channel: &CMatrix) -> Result<DigitalPrecoder, PrecodingError> {
    let sv = eq_channel.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    let rcond = if max > 0.0 { min / max } else { 0.0 };
    if !(rcond >= MIN_RCOND) || eq_channel.nrows() > eq_channel.ncols() {
        return Err(PrecodingError::IllConditioned { rcond });
    }
    let hh = eq_channel.adjoint();
    let gram = eq_channel * &hh;
    let inv = gram.try_inverse().ok_or(PrecodingError::IllConditioned { rcond })?;
    let d = hh * inv;
    Ok(DigitalPrecoder {
        matrix: d.clone(),
        unnormalized: d,
    })
}

/// Scales every column `d_n` by `1 / |A d_n|`.
pub fn normalize_columns(
    analog: &AnalogPrecoder,
    digital: &DigitalPrecoder,
) -> Result<DigitalPrecoder, PrecodingError> {
    let a = analog.matrix();
    let mut d = digital.matrix.clone();
    for n in 0..d.ncols() {
        let norm = (&a * d.column(n)).norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(PrecodingError::ZeroColumn { column: n });
        }
        d.column_mut(n).unscale_mut(norm);
    }
    Ok(DigitalPrecoder {
        matrix: d,
        unnormalized: digital.unnormalized.clone(),
    })
}

/// Analog plus normalized digital stage of one base station.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridPrecoder {
    pub architecture: Architecture,
    pub analog: AnalogPrecoder,
    pub digital: DigitalPrecoder,
}

impl HybridPrecoder {
    /// Designs the precoder from the cluster heads.
    pub fn design(
        heads: &[CVector],
        architecture: Architecture,
        n_r: usize,
        q_bits: u32,
    ) -> Result<Self, PrecodingError> {
        let n_t = heads.first().map_or(0, |h| h.len());
        let analog = match architecture {
            Architecture::SubConnected => build_analog(heads, n_t, n_r, q_bits)?,
            Architecture::FullDigital => AnalogPrecoder::Identity { n_t },
        };
        let eq = equivalent_channel(heads, &analog);
        let digital = normalize_columns(&analog, &zf_digital(&eq)?)?;
        Ok(Self {
            architecture,
            analog,
            digital,
        })
    }

    /// Radiated beam `A d_n` of every cluster, as columns.
    pub fn beams(&self) -> CMatrix {
        self.analog.matrix() * &self.digital.matrix
    }
}

/// Per-user gains through every beam, and the SIC order of every cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains {
    /// `through_beam[u][m] = |h_u^H A d_m|^2`.
    pub through_beam: Vec<Vec<f64>>,
    /// Cluster of every user.
    pub membership: Vec<usize>,
    /// Members of every cluster, strongest own-beam gain first.
    pub order: Vec<Vec<usize>>,
}

impl EffectiveGains {
    /// Gain of user `u` through its own cluster's beam.
    pub fn own(&self, u: usize) -> f64 {
        self.through_beam[u][self.membership[u]]
    }
}

pub fn effective_gains_and_order(
    channels: &[CVector],
    assignment: &ClusterAssignment,
    precoder: &HybridPrecoder,
) -> EffectiveGains {
    let beams = precoder.beams();
    let through_beam: Vec<Vec<f64>> = channels
        .iter()
        .map(|h| {
            let row = h.adjoint() * &beams;
            row.iter().map(|c| c.norm_sqr()).collect()
        })
        .collect();
    let order = (0..assignment.num_clusters())
        .map(|n| {
            let mut members = assignment.members(n);
            members.sort_by(|&a, &b| through_beam[b][n].total_cmp(&through_beam[a][n]).then(a.cmp(&b)));
            members
        })
        .collect();
    EffectiveGains {
        through_beam,
        membership: assignment.membership.clone(),
        order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cvec(rng: &mut impl Rng, n: usize) -> CVector {
        CVector::from_iterator(
            n,
            (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
        )
    }

    #[test]
    fn quantization_reference_points() {
        assert_eq!(quantize_phase(0.0, 4), 0);
        assert_eq!(quantize_phase(PI, 1), 1);
        assert_eq!(quantize_phase(3.0 * PI / 4.0, 2), 1);
        // Wrap-around: just below 2 pi is closest to index 0.
        assert_eq!(quantize_phase(2.0 * PI - 0.01, 3), 0);
        assert_eq!(quantize_phase(-PI / 2.0, 2), 3);
    }

    #[test]
    fn quantization_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let target = rng.gen_range(-10.0..10.0);
            let q = rng.gen_range(1..7);
            let levels = 1u32 << q;
            let step = 2.0 * PI / levels as f64;
            let brute = (0..levels)
                .min_by(|&a, &b| {
                    circular_distance(a as f64 * step, target).total_cmp(&circular_distance(b as f64 * step, target))
                })
                .unwrap();
            assert_eq!(quantize_phase(target, q), brute, "target {target} q {q}");
        }
    }

    #[test]
    fn analog_structure() {
        let n_t = 8;
        let heads = vec![CVector::from_element(n_t, Complex64::new(2.0, 0.0)); 2];
        let analog = build_analog(&heads, n_t, 2, 3).unwrap();
        let a = analog.matrix();
        let amp = 1.0 / 2.0;
        for r in 0..n_t {
            for c in 0..2 {
                let on_block = r / 4 == c;
                if on_block {
                    assert!((a[(r, c)] - Complex64::new(amp, 0.0)).norm() < 1e-15);
                } else {
                    assert_eq!(a[(r, c)], Complex64::new(0.0, 0.0));
                }
            }
        }
        assert!(matches!(
            build_analog(&heads, 63, 4, 2),
            Err(PrecodingError::IndivisibleArray { .. })
        ));
    }

    #[test]
    fn fine_quantization_tracks_head_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let heads: Vec<CVector> = (0..4).map(|_| random_cvec(&mut rng, 16)).collect();
        let a = build_analog(&heads, 16, 4, 16).unwrap().matrix();
        for (n, head) in heads.iter().enumerate() {
            for s in 0..4 {
                let entry = a[(n * 4 + s, n)];
                let err = circular_distance(entry.arg(), head[n * 4 + s].arg());
                assert!(err <= 2.0 * PI / 65536.0);
            }
        }
    }

    #[test]
    fn equivalent_channel_shape_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut heads: Vec<CVector> = (0..3).map(|_| random_cvec(&mut rng, 12)).collect();
        let analog = build_analog(&heads, 12, 3, 4).unwrap();
        heads[1] = CVector::zeros(12);
        let eq = equivalent_channel(&heads, &analog);
        assert_eq!(eq.shape(), (3, 3));
        assert!(eq.row(1).iter().all(|c| c.norm() == 0.0));
        let identity = AnalogPrecoder::Identity { n_t: 12 };
        let eq = equivalent_channel(&heads, &identity);
        assert_eq!(eq.row(0).adjoint(), heads[0]);
    }

    #[test]
    fn zf_of_scaled_identity() {
        let d = zf_digital(&CMatrix::identity(3, 3)).unwrap();
        assert!((d.matrix - CMatrix::identity(3, 3)).norm() < 1e-14);
        let d = zf_digital(&(CMatrix::identity(3, 3) * Complex64::new(2.0, 0.0))).unwrap();
        assert!((d.matrix - CMatrix::identity(3, 3) * Complex64::new(0.5, 0.0)).norm() < 1e-14);
        let singular = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(
            zf_digital(&singular),
            Err(PrecodingError::IllConditioned { .. })
        ));
    }

    #[test]
    fn normalization_is_idempotent_and_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let heads: Vec<CVector> = (0..2).map(|_| random_cvec(&mut rng, 8)).collect();
        let analog = build_analog(&heads, 8, 2, 4).unwrap();
        let zf = zf_digital(&equivalent_channel(&heads, &analog)).unwrap();
        let once = normalize_columns(&analog, &zf).unwrap();
        let twice = normalize_columns(&analog, &once).unwrap();
        assert!((&once.matrix - &twice.matrix).norm() < 1e-12);
        let mut scaled = zf.clone();
        scaled.matrix.column_mut(0).scale_mut(5.0);
        let from_scaled = normalize_columns(&analog, &scaled).unwrap();
        assert!((&once.matrix - &from_scaled.matrix).norm() < 1e-12);
        let mut zero = zf;
        zero.matrix.column_mut(1).fill(Complex64::new(0.0, 0.0));
        assert!(matches!(
            normalize_columns(&analog, &zero),
            Err(PrecodingError::ZeroColumn { column: 1 })
        ));
    }

    fn toy_assignment(membership: Vec<usize>, heads: Vec<CVector>) -> ClusterAssignment {
        let n = heads.len();
        let mut sizes = vec![0; n];
        for &m in &membership {
            sizes[m] += 1;
        }
        ClusterAssignment {
            membership,
            heads,
            cluster_sizes: sizes,
            iterations_used: 1,
            mse_trace: vec![],
        }
    }

    #[test]
    fn users_are_ordered_by_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let heads: Vec<CVector> = (0..2).map(|_| random_cvec(&mut rng, 8)).collect();
        let hp = HybridPrecoder::design(&heads, Architecture::SubConnected, 2, 4).unwrap();
        let users: Vec<CVector> = (0..6).map(|_| random_cvec(&mut rng, 8)).collect();
        let assignment = toy_assignment(vec![0, 1, 0, 0, 1, 1], heads);
        let gains = effective_gains_and_order(&users, &assignment, &hp);
        for (n, order) in gains.order.iter().enumerate() {
            let mut sorted = order.clone();
            sorted.sort();
            assert_eq!(sorted, assignment.members(n));
            for w in order.windows(2) {
                assert!(gains.through_beam[w[0]][n] >= gains.through_beam[w[1]][n]);
            }
        }
        let rotated: Vec<CVector> = users.iter().map(|h| h * Complex64::from_polar(1.0, 1.234)).collect();
        let g2 = effective_gains_and_order(&rotated, &assignment, &hp);
        for u in 0..6 {
            assert!((gains.own(u) - g2.own(u)).abs() <= 1e-12 * gains.own(u).max(1e-300));
        }
    }

    #[test]
    fn order_for_explicit_gains() {
        // One cluster, full-digital single antenna.
        let heads = vec![CVector::from_element(1, Complex64::new(1.0, 0.0))];
        let hp = HybridPrecoder::design(&heads, Architecture::FullDigital, 1, 1).unwrap();
        let users = vec![
            CVector::from_element(1, Complex64::new(2.0, 0.0)),
            CVector::from_element(1, Complex64::new(0.0, 3.0)),
        ];
        let assignment = toy_assignment(vec![0, 0], heads);
        let g = effective_gains_and_order(&users, &assignment, &hp);
        assert!((g.own(0) - 4.0).abs() < 1e-12 && (g.own(1) - 9.0).abs() < 1e-12);
        assert_eq!(g.order, vec![vec![1, 0]]);
        let single = toy_assignment(vec![0], vec![CVector::from_element(1, Complex64::new(1.0, 0.0))]);
        let g = effective_gains_and_order(&users[..1], &single, &hp);
        assert_eq!(g.order, vec![vec![0]]);
    }

    proptest! {
        #[test]
        fn finer_quantization_never_hurts(target in -7.0f64..7.0, q in 1u32..10) {
            let err = |bits: u32| {
                let step = 2.0 * PI / (1u64 << bits) as f64;
                circular_distance(quantize_phase(target, bits) as f64 * step, target)
            };
            prop_assert!(err(q + 1) <= err(q) + 1e-12);
        }

        #[test]
        fn analog_entries_have_fixed_modulus(seed in 0u64..500, q in 1u32..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let heads: Vec<CVector> = (0..4).map(|_| random_cvec(&mut rng, 16)).collect();
            let a = build_analog(&heads, 16, 4, q).unwrap().matrix();
            for r in 0..16 {
                for c in 0..4 {
                    let m = a[(r, c)].norm();
                    if r / 4 == c {
                        prop_assert!((m - 0.5).abs() < 1e-15);
                    } else {
                        prop_assert_eq!(m, 0.0);
                    }
                }
            }
        }
    }
}
