use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest class count any table in this crate will materialize.
pub const MAX_CLASSES: usize = 1 << 20;

/// Attribute levels `(d_1, ..., d_K)`.
///
/// Classes (attribute profiles) are enumerated mixed-radix ascending with the
/// last attribute varying fastest, so for three binary attributes class 0 is
/// `(0,0,0)`, class 1 is `(0,0,1)` and class 4 is `(1,0,0)`. Attribute values
/// run over `0..d_k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct AttributeSpace {
    levels: Vec<usize>,
    n_classes: usize,
}

impl AttributeSpace {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Domain(
                "attribute space needs at least one attribute".into(),
            ));
        }
        let mut n_classes: usize = 1;
        for (k, &d) in levels.iter().enumerate() {
            if d < 2 {
                return Err(Error::Domain(format!(
                    "attribute {} has {d} levels; need at least 2",
                    k + 1
                )));
            }
            n_classes = n_classes
                .checked_mul(d)
                .filter(|&m| m <= MAX_CLASSES)
                .ok_or_else(|| Error::Size {
                    what: "class count M".into(),
                    size: levels.iter().map(|&d| d as u128).product(),
                    cap: MAX_CLASSES as u128,
                })?;
        }
        Ok(Self { levels, n_classes })
    }

    pub fn binary(n_attributes: usize) -> Result<Self> {
        Self::new(vec![2; n_attributes])
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn n_attributes(&self) -> usize {
        self.levels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn is_binary(&self) -> bool {
        self.levels.iter().all(|&d| d == 2)
    }

    pub fn profile(&self, class: usize) -> Vec<usize> {
        debug_assert!(class < self.n_classes);
        let mut out = vec![0; self.levels.len()];
        let mut rest = class;
        for (slot, &d) in out.iter_mut().zip(&self.levels).rev() {
            *slot = rest % d;
            rest /= d;
        }
        out
    }

    pub fn index(&self, profile: &[usize]) -> Result<usize> {
        if profile.len() != self.levels.len() {
            return Err(Error::Domain(format!(
                "profile has {} coordinates, space has {}",
                profile.len(),
                self.levels.len()
            )));
        }
        let mut idx = 0;
        for (k, (&a, &d)) in profile.iter().zip(&self.levels).enumerate() {
            if a >= d {
                return Err(Error::Domain(format!(
                    "attribute {} value {a} out of range 0..{d}",
                    k + 1
                )));
            }
            idx = idx * d + a;
        }
        Ok(idx)
    }

    pub fn profiles(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.n_classes).map(|c| self.profile(c))
    }
}

impl TryFrom<Vec<usize>> for AttributeSpace {
    type Error = Error;

    fn try_from(levels: Vec<usize>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<AttributeSpace> for Vec<usize> {
    fn from(s: AttributeSpace) -> Self {
        s.levels
    }
}

/// Per-item category counts `k_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ResponseSpec {
    categories: Vec<usize>,
}

impl ResponseSpec {
    pub fn new(categories: Vec<usize>) -> Result<Self> {
        if let Some((j, &k)) = categories.iter().enumerate().find(|(_, &k)| k < 2) {
            return Err(Error::Domain(format!(
                "item {} has {k} categories; need at least 2",
                j + 1
            )));
        }
        Ok(Self { categories })
    }

    pub fn binary(n_items: usize) -> Self {
        Self {
            categories: vec![2; n_items],
        }
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    pub fn n_items(&self) -> usize {
        self.categories.len()
    }

    pub fn is_binary(&self) -> bool {
        self.categories.iter().all(|&k| k == 2)
    }

    /// Pattern count over `items`, or `None` when it overflows `u128`.
    pub fn pattern_count(&self, items: &[usize]) -> Option<u128> {
        items
            .iter()
            .try_fold(1u128, |acc, &j| acc.checked_mul(self.categories[j] as u128))
    }
}

impl TryFrom<Vec<usize>> for ResponseSpec {
    type Error = Error;

    fn try_from(categories: Vec<usize>) -> Result<Self> {
        Self::new(categories)
    }
}

impl From<ResponseSpec> for Vec<usize> {
    fn from(s: ResponseSpec) -> Self {
        s.categories
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_attribute_fastest() {
        let s = AttributeSpace::binary(3).unwrap();
        assert_eq!(s.profile(0), vec![0, 0, 0]);
        assert_eq!(s.profile(1), vec![0, 0, 1]);
        assert_eq!(s.profile(4), vec![1, 0, 0]);
        assert_eq!(s.profile(7), vec![1, 1, 1]);
    }

    #[test]
    fn index_inverts_profile_mixed_radix() {
        let s = AttributeSpace::new(vec![3, 2, 4]).unwrap();
        assert_eq!(s.n_classes(), 24);
        for c in 0..24 {
            assert_eq!(s.index(&s.profile(c)).unwrap(), c);
        }
        assert!(s.index(&[3, 0, 0]).is_err());
    }

    #[test]
    fn rejects_degenerate_levels_and_overflow() {
        assert!(AttributeSpace::new(vec![2, 1]).is_err());
        assert!(matches!(
            AttributeSpace::binary(21),
            Err(Error::Size { .. })
        ));
        assert!(AttributeSpace::binary(20).is_ok());
        assert!(ResponseSpec::new(vec![2, 1]).is_err());
    }

    #[test]
    fn pattern_count_is_lazy_product() {
        let r = ResponseSpec::new(vec![2, 3, 4]).unwrap();
        assert_eq!(r.pattern_count(&[0, 1, 2]), Some(24));
        assert_eq!(r.pattern_count(&[]), Some(1));
        let huge = ResponseSpec::binary(200);
        let all: Vec<usize> = (0..200).collect();
        assert_eq!(huge.pattern_count(&all), None);
    }
}
