//! The weighted similarity space used to cluster regions.
//!
//! Each region maps to five raw-unit features plus its center. The pairwise
//! distance is the squared Euclidean distance between weighted feature
//! vectors, plus the squared Euclidean distance between centers. Because the
//! spatial term is a squared Euclidean norm, rigid rotations of the scene
//! leave every pairwise distance unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageproc::Region;

pub const SIMILARITY_DIMS: usize = 5;

pub const SIMILARITY_NAMES: [&str; SIMILARITY_DIMS] = [
    "intensity_mean",
    "boundary_intensity_mean",
    "border_gradient_mean",
    "major_axis",
    "stroke_width_mean",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityVector {
    pub f: [f64; SIMILARITY_DIMS],
    pub center: (f64, f64),
}

impl SimilarityVector {
    pub fn new(f: [f64; SIMILARITY_DIMS], center: (f64, f64)) -> Self {
        SimilarityVector { f, center }
    }
}

impl From<&Region> for SimilarityVector {
    fn from(r: &Region) -> Self {
        SimilarityVector {
            f: [
                r.intensity_mean,
                r.boundary_intensity_mean,
                r.border_gradient_mean,
                r.major_axis,
                r.stroke_width_mean,
            ],
            center: r.centroid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub label: String,
    pub w: [f64; SIMILARITY_DIMS],
}

impl WeightConfig {
    pub fn new(label: impl Into<String>, w: [f64; SIMILARITY_DIMS]) -> Result<Self> {
        let cfg = WeightConfig {
            label: label.into(),
            w,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "weights of '{}' must be finite and non-negative: {:?}",
                self.label, self.w
            )))
        }
    }

    /// All weights set to one.
    pub fn uniform() -> Self {
        WeightConfig {
            label: "w_I".into(),
            w: [1.0; SIMILARITY_DIMS],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: WeightConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weight config serializes")
    }
}

/// Weights learned by grid search for maximum text-group recall: intensity
/// mean, outer boundary intensity mean, border gradient mean, diameter and
/// stroke width mean.
pub fn default_optimal_weights() -> WeightConfig {
    WeightConfig {
        label: "w_opt".into(),
        w: [0.65, 0.65, 0.49, 0.67, 0.91],
    }
}

#[inline]
pub fn distance(a: &SimilarityVector, b: &SimilarityVector, w: &WeightConfig) -> f64 {
    let mut acc = 0.0;
    for i in 0..SIMILARITY_DIMS {
        let d = w.w[i] * (a.f[i] - b.f[i]);
        acc += d * d;
    }
    let dx = a.center.0 - b.center.0;
    let dy = a.center.1 - b.center.1;
    acc + (dx * dx + dy * dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(f: [f64; 5], c: (f64, f64)) -> SimilarityVector {
        SimilarityVector::new(f, c)
    }

    #[test]
    fn hand_computed_distances() {
        let w = WeightConfig::uniform();
        let a = sv([100.0, 50.0, 10.0, 20.0, 3.0], (0.0, 0.0));
        let b = sv([110.0, 60.0, 12.0, 24.0, 4.0], (0.0, 0.0));
        assert_eq!(distance(&a, &a, &w), 0.0);
        assert_eq!(distance(&a, &b, &w), 221.0);
        let b2 = sv(b.f, (3.0, 4.0));
        assert_eq!(distance(&a, &b2, &w), 246.0);
    }

    #[test]
    fn shipped_weights() {
        assert_eq!(default_optimal_weights().w, [0.65, 0.65, 0.49, 0.67, 0.91]);
        assert_eq!(WeightConfig::uniform().w, [1.0; 5]);
        assert!(default_optimal_weights().validate().is_ok());
    }

    #[test]
    fn json_shape() {
        let cfg = default_optimal_weights();
        let v: serde_json::Value = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(v["label"], "w_opt");
        assert_eq!(v["w"].as_array().unwrap().len(), 5);
        assert_eq!(WeightConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert!(WeightConfig::from_json(r#"{"label":"x","w":[1,1,-1,1,1]}"#).is_err());
    }

    fn arb_sv() -> impl Strategy<Value = SimilarityVector> {
        (
            prop::array::uniform5(0.0..255.0f64),
            (-500.0..500.0f64, -500.0..500.0f64),
        )
            .prop_map(|(f, c)| sv(f, c))
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative(a in arb_sv(), b in arb_sv(), w in prop::array::uniform5(0.0..1.5f64)) {
            let w = WeightConfig::new("t", w).unwrap();
            let d1 = distance(&a, &b, &w);
            prop_assert!(d1 >= 0.0);
            prop_assert_eq!(d1, distance(&b, &a, &w));
        }

        #[test]
        fn rotation_leaves_distance(a in arb_sv(), b in arb_sv(), theta in 0.0..std::f64::consts::TAU) {
            let w = default_optimal_weights();
            let (s, c) = theta.sin_cos();
            let rot = |v: &SimilarityVector| sv(v.f, (c * v.center.0 - s * v.center.1, s * v.center.0 + c * v.center.1));
            let d0 = distance(&a, &b, &w);
            let d1 = distance(&rot(&a), &rot(&b), &w);
            prop_assert!((d0 - d1).abs() <= 1e-9 * d0.max(1.0));
        }

        #[test]
        fn zero_weight_ignores_feature(a in arb_sv(), b in arb_sv(), i in 0usize..5, bump in -100.0..100.0f64) {
            let mut w = WeightConfig::uniform();
            w.w[i] = 0.0;
            let mut b2 = b;
            b2.f[i] += bump;
            prop_assert_eq!(distance(&a, &b, &w), distance(&a, &b2, &w));
        }
    }
}
