use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::DiscreteMeasure;
use crate::error::{Error, Result};

/// Seed of a deterministic sample stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed for stream `(a, b)`, e.g. run index and sample size.
    pub fn derive(self, a: u64, b: u64) -> Seed {
        Seed(derive_seed(self.0, a, b))
    }
}

/// splitmix64 mixing of `(seed ^ a, b)`.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(seed ^ a) ^ b)
}

/// Sampling families used by the experiments.
#[derive(Clone, Debug, PartialEq)]
pub enum NamedDistribution {
    /// `N(0, σ²)` on the line.
    Normal { sigma2: f64 },
    /// Uniform law on the box `Π_k [lo_k, hi_k]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// `exp(√h·G − h·diag(Σ)/2)` with `G ~ N(0, Σ)`; the mean is `(1, 1)` for every horizon `h`.
    BivariateLognormal { cov: [[f64; 2]; 2], horizon: f64 },
}

impl NamedDistribution {
    /// Covariance of the two-asset example.
    pub const ASSET_COV: [[f64; 2]; 2] = [[0.5, 0.1], [0.1, 0.1]];

    pub fn cube(lo: f64, hi: f64, dim: usize) -> Self {
        Self::UniformBox {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Normal { .. } => 1,
            Self::UniformBox { lo, .. } => lo.len(),
            Self::BivariateLognormal { .. } => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Self::Normal { sigma2 } if !(*sigma2 > 0.0 && sigma2.is_finite()) => {
                bad(format!("variance must be positive, got {sigma2}"))
            }
            Self::UniformBox { lo, hi } if lo.is_empty() || lo.len() != hi.len() => {
                bad("box bounds must be non-empty and of equal length".into())
            }
            Self::UniformBox { lo, hi } if lo.iter().zip(hi).any(|(a, b)| !(a < b)) => {
                bad("box needs lo < hi in every coordinate".into())
            }
            Self::BivariateLognormal { cov, horizon } => {
                let [[a, b], [c, d]] = *cov;
                if b != c || !(a > 0.0) || !(a * d - b * b > 0.0) {
                    bad("covariance must be symmetric positive definite".into())
                } else if !(*horizon > 0.0) {
                    bad("horizon must be positive".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// One draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Self::Normal { sigma2 } => {
                let g: f64 = rng.sample(StandardNormal);
                vec![sigma2.sqrt() * g]
            }
            Self::UniformBox { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                .collect(),
            Self::BivariateLognormal { cov, horizon } => {
                let g = correlated_pair(cov, rng);
                let h = *horizon;
                vec![
                    (h.sqrt() * g[0] - 0.5 * h * cov[0][0]).exp(),
                    (h.sqrt() * g[1] - 0.5 * h * cov[1][1]).exp(),
                ]
            }
        }
    }
}

/// `G ~ N(0, Σ)` through the Cholesky factor of `Σ`.
pub(crate) fn correlated_pair<R: Rng + ?Sized>(cov: &[[f64; 2]; 2], rng: &mut R) -> [f64; 2] {
    let l11 = cov[0][0].sqrt();
    let l21 = cov[0][1] / l11;
    let l22 = (cov[1][1] - l21 * l21).sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    [l11 * z1, l21 * z1 + l22 * z2]
}

impl fmt::Display for NamedDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Normal { sigma2 } => write!(f, "normal:{sigma2}"),
            Self::UniformBox { lo, hi } => {
                let parts: Vec<String> =
                    lo.iter().zip(hi).map(|(a, b)| format!("{a},{b}")).collect();
                write!(f, "uniform:{}", parts.join(","))
            }
            Self::BivariateLognormal { horizon, .. } => write!(f, "lognormal:{horizon}"),
        }
    }
}

/// Parses `normal[:σ²]`, `uniform:lo,hi[,dim]` and `lognormal[:h]`.
impl FromStr for NamedDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let args: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad distribution parameter `{a}`")))
                })
                .collect::<Result<_>>()?
        };
        let dist = match (name.trim(), args.as_slice()) {
            ("normal", []) => Self::Normal { sigma2: 1.0 },
            ("normal", [s2]) => Self::Normal { sigma2: *s2 },
            ("uniform", [lo, hi]) => Self::cube(*lo, *hi, 1),
            ("uniform", [lo, hi, d]) if d.fract() == 0.0 && *d >= 1.0 => {
                Self::cube(*lo, *hi, *d as usize)
            }
            ("lognormal", []) => Self::BivariateLognormal {
                cov: Self::ASSET_COV,
                horizon: 1.0,
            },
            ("lognormal", [h]) => Self::BivariateLognormal {
                cov: Self::ASSET_COV,
                horizon: *h,
            },
            ("normal" | "uniform" | "lognormal", _) => {
                return Err(Error::Parse(format!(
                    "wrong parameters for distribution `{s}`"
                )))
            }
            (other, _) => {
                return Err(Error::UnknownName {
                    kind: "distribution",
                    name: other.to_string(),
                })
            }
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// Empirical measure of `n` independent draws, weights `1/n`.
pub fn sample(dist: &NamedDistribution, n: usize, seed: Seed) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample size must be positive".into(),
        ));
    }
    dist.validate()?;
    let mut rng = seed.rng();
    let points = (0..n).map(|_| dist.draw(&mut rng)).collect();
    DiscreteMeasure::uniform(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_square_support() {
        let m = sample(&NamedDistribution::cube(-1.0, 1.0, 2), 4, Seed(7)).unwrap();
        assert_eq!(m.len(), 4);
        assert!(m.coords().iter().all(|x| (-1.0..=1.0).contains(x)));
        assert!(m.weights().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn deterministic_per_seed() {
        let d = NamedDistribution::Normal { sigma2: 1.1 };
        assert_eq!(
            sample(&d, 50, Seed(3)).unwrap(),
            sample(&d, 50, Seed(3)).unwrap()
        );
        assert_ne!(
            sample(&d, 50, Seed(3)).unwrap(),
            sample(&d, 50, Seed(4)).unwrap()
        );
    }

    #[test]
    fn normal_sample_mean() {
        let m = sample(&NamedDistribution::Normal { sigma2: 1.0 }, 100_000, Seed(1)).unwrap();
        assert!(m.mean()[0].abs() < 0.02);
    }

    #[test]
    fn lognormal_has_unit_mean() {
        for h in [1.0, 2.0] {
            let d = NamedDistribution::BivariateLognormal {
                cov: NamedDistribution::ASSET_COV,
                horizon: h,
            };
            let m = sample(&d, 200_000, Seed(11)).unwrap();
            let mean = m.mean();
            assert!((mean[0] - 1.0).abs() < 0.02, "{mean:?}");
            assert!((mean[1] - 1.0).abs() < 0.02, "{mean:?}");
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!(
            "normal:1.1".parse::<NamedDistribution>().unwrap(),
            NamedDistribution::Normal { sigma2: 1.1 }
        );
        assert_eq!(
            "uniform:-2,2,2".parse::<NamedDistribution>().unwrap(),
            NamedDistribution::cube(-2.0, 2.0, 2)
        );
        assert!(matches!(
            "cauchy".parse::<NamedDistribution>(),
            Err(Error::UnknownName { .. })
        ));
        assert!("normal:-1".parse::<NamedDistribution>().is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let s = Seed(5);
        assert_ne!(s.derive(0, 10), s.derive(1, 10));
        assert_ne!(s.derive(0, 10), s.derive(0, 11));
        assert_eq!(s.derive(2, 3), s.derive(2, 3));
    }
}
