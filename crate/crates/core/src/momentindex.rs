//! Multi-indices of fixed total degree.
//!
//! All degree-`k` monomials in `d` variables are listed in **graded reverse
//! lexicographic** order: `α` precedes `β` when the rightmost nonzero entry of
//! `α − β` is negative. For `d = 3, k = 2` this gives
//!
//! ```text
//! x1², x1·x2, x2², x1·x3, x2·x3, x3²
//! ```
//!
//! Moment vectors and design-matrix columns use this order everywhere.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Exponent vector `(α_1, …, α_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<u32>,
}

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().sum()
    }

    /// `x^α = ∏ x_i^{α_i}`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.entries.iter().zip(x).map(|(&a, &xi)| xi.powi(a as i32)).product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Graded reverse lexicographic comparison; `Less` means "comes first".
pub fn grevlex_cmp(a: &MultiIndex, b: &MultiIndex) -> Ordering {
    match b.degree().cmp(&a.degree()) {
        Ordering::Equal => {}
        other => return other,
    }
    for (x, y) in a.entries.iter().zip(&b.entries).rev() {
        if x != y {
            // smaller trailing exponent ranks higher
            return x.cmp(y);
        }
    }
    Ordering::Equal
}

/// All multi-indices of degree `k` in `d` variables, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    d: usize,
    k: u32,
    indices: Vec<MultiIndex>,
}

impl MonomialBasis {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|a| a == alpha)
    }
}

impl<'a> IntoIterator for &'a MonomialBasis {
    type Item = &'a MultiIndex;
    type IntoIter = std::slice::Iter<'a, MultiIndex>;

    fn into_iter(self) -> Self::IntoIter {
        self.indices.iter()
    }
}

pub fn enumerate_multi_indices(d: usize, k: u32) -> Result<MonomialBasis> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    let count = monomial_count(d, k)?;
    let mut indices = Vec::with_capacity(count as usize);
    let mut current = vec![0u32; d];
    compositions(&mut current, 0, k, &mut indices);
    indices.sort_by(grevlex_cmp);
    debug_assert_eq!(indices.len() as u64, count);
    Ok(MonomialBasis { d, k, indices })
}

fn compositions(current: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex {
            entries: current.clone(),
        });
        return;
    }
    for a in (0..=remaining).rev() {
        current[pos] = a;
        compositions(current, pos + 1, remaining - a, out);
    }
}

/// Binomial coefficient with exact incremental products.
pub fn binomial(n: u64, r: u64) -> Result<u64> {
    if r > n {
        return Ok(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc * (n - i) is divisible by (i + 1) after the multiplication
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(Error::Overflow { what: "binomial" })?
            / (i + 1) as u128;
    }
    u64::try_from(acc).map_err(|_| Error::Overflow { what: "binomial" })
}

/// `k! / (α_1! ⋯ α_d!)`, built as a product of binomials so intermediate
/// values never exceed the result by more than a factor of `k`.
pub fn multinomial_coefficient(k: u32, alpha: &MultiIndex) -> Result<u64> {
    let actual = alpha.degree();
    if actual != k {
        return Err(Error::DegreeMismatch { expected: k, actual });
    }
    let mut acc: u64 = 1;
    let mut running: u64 = 0;
    for &a in &alpha.entries {
        running += a as u64;
        acc = acc.checked_mul(binomial(running, a as u64)?).ok_or(Error::Overflow {
            what: "multinomial coefficient",
        })?;
    }
    Ok(acc)
}

/// `M_k = C(d + k − 1, k)`.
pub fn monomial_count(d: usize, k: u32) -> Result<u64> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    binomial(d as u64 + k as u64 - 1, k as u64).map_err(|_| Error::Overflow { what: "monomial count" })
}
