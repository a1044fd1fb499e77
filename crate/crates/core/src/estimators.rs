//! Point estimators of the mean vector from per-group sample means.
//!
//! Shrinkage factors are used as-is: no positive-part truncation, so a
//! factor below zero flips the estimate through the origin (or through the
//! grand mean for HB).

use std::fmt;

use crate::domain::{ModelConfig, Regime};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorTag {
    Mle,
    Phb,
    Hb,
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorTag::Mle => "MLE",
            EstimatorTag::Phb => "PHB",
            EstimatorTag::Hb => "HB",
        })
    }
}

/// Sample means `Ȳ_j`, the sufficient statistics of the normal-means model.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMeans {
    ybar: Vec<f64>,
    config: ModelConfig,
}

impl GroupMeans {
    pub fn new(ybar: Vec<f64>, n: usize) -> Result<Self> {
        let config = ModelConfig::new(ybar.len(), n)?;
        Ok(Self { ybar, config })
    }

    pub fn values(&self) -> &[f64] {
        &self.ybar
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn grand_mean(&self) -> f64 {
        self.ybar.iter().sum::<f64>() / self.ybar.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateVector {
    pub values: Vec<f64>,
    pub tag: EstimatorTag,
}

pub fn estimate_mle(gm: &GroupMeans) -> EstimateVector {
    EstimateVector {
        values: gm.ybar.clone(),
        tag: EstimatorTag::Mle,
    }
}

/// `1 − (d−2)/(n ΣȲ_j²)`.
pub fn phb_factor(ybar: &[f64], n: usize) -> Result<f64> {
    let ss: f64 = ybar.iter().map(|y| y * y).sum();
    if ss == 0.0 {
        return Err(Error::DegenerateInput(
            "all group means are zero; PHB shrink factor undefined".into(),
        ));
    }
    Ok(1.0 - (ybar.len() as f64 - 2.0) / (n as f64 * ss))
}

/// Grand mean and `1 − (d−3)/(n Σ(Ȳ_j − Ȳ)²)`.
pub fn hb_factor(ybar: &[f64], n: usize) -> Result<(f64, f64)> {
    let d = ybar.len() as f64;
    let mean = ybar.iter().sum::<f64>() / d;
    let ss: f64 = ybar.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss == 0.0 {
        return Err(Error::DegenerateInput(
            "all group means are equal; HB shrink factor undefined".into(),
        ));
    }
    Ok((mean, 1.0 - (d - 3.0) / (n as f64 * ss)))
}

pub fn estimate_phb(gm: &GroupMeans) -> Result<EstimateVector> {
    gm.config.require(Regime::Phb)?;
    let factor = phb_factor(&gm.ybar, gm.config.n())?;
    Ok(EstimateVector {
        values: gm.ybar.iter().map(|y| factor * y).collect(),
        tag: EstimatorTag::Phb,
    })
}

pub fn estimate_hb(gm: &GroupMeans) -> Result<EstimateVector> {
    gm.config.require(Regime::Hb)?;
    let (mean, factor) = hb_factor(&gm.ybar, gm.config.n())?;
    Ok(EstimateVector {
        values: gm.ybar.iter().map(|y| mean + factor * (y - mean)).collect(),
        tag: EstimatorTag::Hb,
    })
}

/// `Σ_j (μ̂_j − μ_j)²`.
pub fn squared_loss(est: &EstimateVector, mu: &[f64]) -> Result<f64> {
    sq_dist(&est.values, mu)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn gm(v: &[f64], n: usize) -> GroupMeans {
        GroupMeans::new(v.to_vec(), n).unwrap()
    }

    #[test]
    fn mle_is_identity() {
        for v in [vec![0.0; 3], vec![1.0, -2.0, 3.0], vec![0.5; 10]] {
            let e = estimate_mle(&gm(&v, 1));
            assert_eq!(e.values, v);
            assert_eq!(e.tag, EstimatorTag::Mle);
        }
    }

    #[test]
    fn phb_examples() {
        let e = estimate_phb(&gm(&[1.0, 1.0, 1.0], 1)).unwrap();
        for v in e.values {
            assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-15);
        }
        let e = estimate_phb(&gm(&[1.0, 0.0, 0.0, 0.0], 2)).unwrap();
        assert_eq!(e.values, vec![0.0; 4]);
        let e = estimate_phb(&gm(&[2.0, 0.0, 0.0, 0.0, 0.0], 1)).unwrap();
        assert_abs_diff_eq!(e.values[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn phb_errors() {
        assert!(matches!(
            estimate_phb(&gm(&[0.0; 4], 1)),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            estimate_phb(&gm(&[1.0, 2.0], 1)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn phb_factor_can_be_negative() {
        // n ΣȲ² = 0.01 < d − 2: factor is far below zero and kept literally.
        let e = estimate_phb(&gm(&[0.1, 0.0, 0.0, 0.0], 1)).unwrap();
        assert_abs_diff_eq!(e.values[0], 0.1 * (1.0 - 2.0 / 0.01), epsilon = 1e-12);
    }

    #[test]
    fn hb_examples() {
        let e = estimate_hb(&gm(&[0.0, 0.0, 0.0, 2.0], 1)).unwrap();
        let want = [1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.5];
        for (a, b) in e.values.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let e = estimate_hb(&gm(&[1.0, 1.0, 1.0, 3.0], 3)).unwrap();
        let want = [
            1.5 - 4.0 / 9.0,
            1.5 - 4.0 / 9.0,
            1.5 - 4.0 / 9.0,
            1.5 + 4.0 / 3.0,
        ];
        for (a, b) in e.values.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn hb_errors() {
        for c in [-3.0, 0.0, 2.5] {
            assert!(matches!(
                estimate_hb(&gm(&[c; 5], 1)),
                Err(Error::DegenerateInput(_))
            ));
        }
        assert!(matches!(
            estimate_hb(&gm(&[1.0, 2.0, 3.0], 1)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn loss_examples() {
        let e = |v: &[f64]| EstimateVector {
            values: v.to_vec(),
            tag: EstimatorTag::Mle,
        };
        assert_eq!(squared_loss(&e(&[1.0, 2.0]), &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(squared_loss(&e(&[1.0, 0.0]), &[0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(
            squared_loss(&e(&[0.5, 0.0, 0.0]), &[2.0, 0.0, 0.0]).unwrap(),
            2.25
        );
        assert!(matches!(
            squared_loss(&e(&[1.0]), &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    fn spread_vec() -> impl Strategy<Value = Vec<f64>> {
        (4usize..12).prop_flat_map(|d| prop::collection::vec(-5.0f64..5.0, d))
    }

    proptest! {
        #[test]
        fn hb_translation_equivariant(v in spread_vec(), c in -10.0f64..10.0, n in 1usize..6) {
            let base = estimate_hb(&gm(&v, n));
            prop_assume!(base.is_ok());
            let shifted: Vec<f64> = v.iter().map(|y| y + c).collect();
            let a = base.unwrap();
            let b = estimate_hb(&gm(&shifted, n)).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                let tol = 1e-9 * (1.0 + x.abs() + c.abs());
                prop_assert!((x + c - y).abs() <= tol, "{} + {} vs {}", x, c, y);
            }
        }

        #[test]
        fn permutation_equivariant(v in spread_vec(), seed in 0usize..1000) {
            let d = v.len();
            let perm: Vec<usize> = (0..d).map(|i| (i * 7 + seed) % d).collect();
            prop_assume!({
                let mut p = perm.clone(); p.sort(); p.dedup(); p.len() == d
            });
            let pv: Vec<f64> = perm.iter().map(|&i| v[i]).collect();
            for f in [estimate_phb as fn(&GroupMeans) -> Result<EstimateVector>, estimate_hb] {
                let a = f(&gm(&v, 2));
                let b = f(&gm(&pv, 2));
                prop_assume!(a.is_ok());
                let (a, b) = (a.unwrap(), b.unwrap());
                for (k, &i) in perm.iter().enumerate() {
                    prop_assert!((b.values[k] - a.values[i]).abs() <= 1e-12 * (1.0 + a.values[i].abs()));
                }
            }
        }

        #[test]
        fn phb_sign_pattern(v in spread_vec(), n in 1usize..5) {
            let g = gm(&v, n);
            let factor = phb_factor(&v, n).unwrap();
            let e = estimate_phb(&g).unwrap();
            for (est, y) in e.values.iter().zip(&v) {
                if *y != 0.0 && factor != 0.0 {
                    prop_assert_eq!(est.signum(), factor.signum() * y.signum());
                }
            }
        }

        #[test]
        fn hb_on_centred_data_is_phb_with_d_minus_3(v in spread_vec(), n in 1usize..5) {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let centred: Vec<f64> = v.iter().map(|y| y - mean).collect();
            let ss: f64 = centred.iter().map(|y| y * y).sum();
            prop_assume!(ss > 1e-9);
            let hb = estimate_hb(&gm(&centred, n)).unwrap();
            let factor = 1.0 - (v.len() as f64 - 3.0) / (n as f64 * ss);
            for (a, y) in hb.values.iter().zip(&centred) {
                prop_assert!((a - factor * y).abs() <= 1e-10 * (1.0 + y.abs()));
            }
        }
    }
}
