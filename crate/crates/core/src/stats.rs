//! Goodness of fit between sampled windows and an exact table.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::lang::WindowStructure;
use crate::measure::Row;

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub samples: usize,
    /// A sample outside the support of the exact table, if any.
    pub impossible: Option<WindowStructure>,
}

impl ChiSquareReport {
    pub fn passes(&self, alpha: f64) -> bool {
        self.impossible.is_none() && self.p_value >= alpha
    }
}

pub fn chi_square<'a>(samples: impl IntoIterator<Item = &'a WindowStructure>, exact: &Row) -> ChiSquareReport {
    let mut counts: BTreeMap<&WindowStructure, u64> = BTreeMap::new();
    let mut n = 0usize;
    let mut impossible = None;
    for s in samples {
        n += 1;
        if exact.contains_key(s) {
            *counts.entry(s).or_default() += 1;
        } else if impossible.is_none() {
            impossible = Some(s.clone());
        }
    }
    let mut statistic = 0.0;
    for (d, p) in exact {
        let expected = p.to_f64().unwrap_or(0.0) * n as f64;
        let observed = counts.get(d).copied().unwrap_or(0) as f64;
        statistic += (observed - expected).powi(2) / expected;
    }
    let dof = exact.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("positive degrees of freedom").cdf(statistic)
    };
    ChiSquareReport { statistic, dof, p_value, samples: n, impossible }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::Language;
    use crate::rational::rat;
    use std::sync::Arc;

    #[test]
    fn exact_counts_fit() {
        let l = Arc::new(Language::from_pairs([("R", 1)]).unwrap());
        let a = WindowStructure::empty(l.clone(), 1);
        let b = WindowStructure::general(l, 1, [crate::lang::Fact::new(0, &[0])]).unwrap();
        let row: Row = [(a.clone(), rat(1, 2)), (b.clone(), rat(1, 2))].into_iter().collect();
        let samples: Vec<_> = (0..100).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect();
        let r = chi_square(&samples, &row);
        assert_eq!(r.statistic, 0.0);
        assert!(r.passes(1e-3));
        let skewed: Vec<_> = (0..100).map(|i| if i < 90 { a.clone() } else { b.clone() }).collect();
        assert!(!chi_square(&skewed, &row).passes(1e-3));
    }
}
