use std::fmt;

use serde::{Deserialize, Serialize};

use crate::complex::SpaceTag;
use crate::error::{Error, Result};

/// Time instant of a discrete field, stored in half steps: `k` is `2k`, `k + 1/2` is `2k + 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeLabel {
    half_steps: i64,
}

impl TimeLabel {
    pub fn integer(k: i64) -> Self {
        Self { half_steps: 2 * k }
    }

    /// The instant `k + 1/2`.
    pub fn half(k: i64) -> Self {
        Self { half_steps: 2 * k + 1 }
    }

    pub fn half_steps(self) -> i64 {
        self.half_steps
    }

    pub fn is_half(self) -> bool {
        self.half_steps.rem_euclid(2) == 1
    }

    /// The step index as a real number.
    pub fn value(self) -> f64 {
        self.half_steps as f64 / 2.0
    }

    /// Physical time for step size `dt`.
    pub fn time(self, dt: f64) -> f64 {
        self.value() * dt
    }
}

impl fmt::Display for TimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_half() {
            write!(f, "{}+1/2", self.half_steps.div_euclid(2))
        } else {
            write!(f, "{}", self.half_steps / 2)
        }
    }
}

/// Coefficient vector tagged with its space and time instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteField<T> {
    pub space: SpaceTag,
    pub coeffs: Vec<T>,
    pub time: TimeLabel,
}

impl<T: num_traits::Zero + Clone> DiscreteField<T> {
    pub fn new(space: SpaceTag, coeffs: Vec<T>, time: TimeLabel) -> Self {
        Self { space, coeffs, time }
    }

    pub fn zeros(space: SpaceTag, dim: usize, time: TimeLabel) -> Self {
        Self { space, coeffs: vec![T::zero(); dim], time }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn expect_space(&self, expected: SpaceTag) -> Result<()> {
        if self.space == expected {
            Ok(())
        } else {
            Err(Error::SpaceMismatch { expected, found: self.space })
        }
    }

    pub fn with_time(mut self, time: TimeLabel) -> Self {
        self.time = time;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(TimeLabel::integer(3).to_string(), "3");
        assert_eq!(TimeLabel::half(0).to_string(), "0+1/2");
        assert_eq!(TimeLabel::half(2).value(), 2.5);
        assert!(TimeLabel::half(-1).is_half());
        assert!(TimeLabel::integer(1) < TimeLabel::half(1));
    }

    #[test]
    fn space_check() {
        let f = DiscreteField::<f64>::zeros(SpaceTag::D, 4, TimeLabel::integer(0));
        assert!(f.expect_space(SpaceTag::D).is_ok());
        assert!(matches!(
            f.expect_space(SpaceTag::C),
            Err(Error::SpaceMismatch { expected: SpaceTag::C, found: SpaceTag::D })
        ));
    }
}
