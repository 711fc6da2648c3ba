use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Counts `(a right & b wrong, a wrong & b right)`.
pub fn discordant_counts(a: &[bool], b: &[bool]) -> Result<(u64, u64)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).fold((0, 0), |(ab, ba), (&x, &y)| {
        (ab + u64::from(x && !y), ba + u64::from(!x && y))
    }))
}

/// Exact two-sided binomial p-value for discordant counts `b` and `c`, as a
/// rational number.
pub fn mcnemar_p_exact(b: u64, c: u64) -> BigRational {
    let n = b + c;
    if n == 0 {
        return BigRational::one();
    }
    let mut term = BigUint::one();
    let mut tail = BigUint::zero();
    for i in 0..=b.min(c) {
        if i > 0 {
            term = term * BigUint::from(n - i + 1) / BigUint::from(i);
        }
        tail += &term;
    }
    let p = BigRational::new((tail * 2u32).into(), (BigUint::one() << n).into());
    p.min(BigRational::one())
}

pub fn mcnemar_p(b: u64, c: u64) -> f64 {
    mcnemar_p_exact(b, c).to_f64().expect("p-value in [0, 1]")
}

/// Exact McNemar p-value for paired per-video outcomes.
pub fn mcnemar_exact(outcomes_a: &[bool], outcomes_b: &[bool]) -> Result<f64> {
    let (b, c) = discordant_counts(outcomes_a, outcomes_b)?;
    Ok(mcnemar_p(b, c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    pub method_a: String,
    pub method_b: String,
    pub n_discordant_ab: u64,
    pub n_discordant_ba: u64,
    pub p_value: f64,
    pub alpha_adjusted: f64,
    pub significant: bool,
}

/// All pairwise tests among a set of methods.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceMatrix {
    methods: Vec<String>,
    results: Vec<McNemarResult>,
}

impl SignificanceMatrix {
    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn results(&self) -> &[McNemarResult] {
        &self.results
    }

    pub fn into_results(self) -> Vec<McNemarResult> {
        self.results
    }

    /// Test between `a` and `b` in either order; `None` for unknown or equal names.
    pub fn get(&self, a: &str, b: &str) -> Option<&McNemarResult> {
        self.results
            .iter()
            .find(|r| (r.method_a == a && r.method_b == b) || (r.method_a == b && r.method_b == a))
    }

    /// Square p-value matrix in `methods()` order, 1 on the diagonal.
    pub fn p_matrix(&self) -> Vec<Vec<f64>> {
        self.methods
            .iter()
            .map(|a| {
                self.methods
                    .iter()
                    .map(|b| {
                        if a == b {
                            1.0
                        } else {
                            self.get(a, b).map_or(f64::NAN, |r| r.p_value)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Tests every unordered pair of methods with a Bonferroni-adjusted alpha.
/// Each method maps video ids to whether its decision was correct.
pub fn pairwise_significance(
    outcomes: &[(String, BTreeMap<String, bool>)],
    alpha: f64,
) -> Result<SignificanceMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    if let Some((first, reference)) = outcomes.first() {
        for (name, o) in &outcomes[1..] {
            if !o.keys().eq(reference.keys()) {
                return Err(Error::VideoSetMismatch(first.clone(), name.clone()));
            }
        }
    }
    let m = outcomes.len();
    let pairs = m * m.saturating_sub(1) / 2;
    let alpha_adjusted = alpha / pairs.max(1) as f64;
    let mut results = Vec::with_capacity(pairs);
    for i in 0..m {
        for j in (i + 1)..m {
            let a: Vec<bool> = outcomes[i].1.values().copied().collect();
            let b: Vec<bool> = outcomes[j].1.values().copied().collect();
            let (ab, ba) = discordant_counts(&a, &b)?;
            let p_value = mcnemar_p(ab, ba);
            results.push(McNemarResult {
                method_a: outcomes[i].0.clone(),
                method_b: outcomes[j].0.clone(),
                n_discordant_ab: ab,
                n_discordant_ba: ba,
                p_value,
                alpha_adjusted,
                significant: p_value < alpha_adjusted,
            });
        }
    }
    Ok(SignificanceMatrix {
        methods: outcomes.iter().map(|(n, _)| n.clone()).collect(),
        results,
    })
}
