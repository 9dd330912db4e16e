//! Multi-index enumeration and monomial evaluation.
//!
//! A basis is the truncation set of all exponent vectors `alpha` with total
//! degree `1 <= |alpha|_1 <= d` and interaction order `|alpha|_0 <= r`,
//! optionally with the constant `alpha = 0` in front.
//!
//! Ordering is graded: indices are listed by ascending total degree, and
//! within one degree in descending lexicographic order of the exponent
//! vector. For `dim = 2, d = 2` this gives `1, x1, x2, x1^2, x1 x2, x2^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on basis cardinality.
pub const DEFAULT_SIZE_CAP: usize = 1_000_000;

/// Exponent vector of one monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|alpha|_1`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Interaction order `|alpha|_0`.
    pub fn interaction(&self) -> usize {
        self.0.iter().filter(|&&a| a > 0).count()
    }

    /// Evaluates the monomial at `phi`, with `0^0 = 1`.
    pub fn eval(&self, phi: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(phi)
            .filter(|(&a, _)| a > 0)
            .map(|(&a, &v)| v.powi(a as i32))
            .product()
    }
}

/// Truncation parameters of a polynomial basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    /// Regressor dimension. Zero in a plan file means "take it from the layout".
    #[serde(default)]
    pub dim: usize,
    pub max_degree: u32,
    pub max_interaction: u32,
    #[serde(default)]
    pub include_constant: bool,
}

impl BasisSpec {
    pub fn new(dim: usize, max_degree: u32, max_interaction: u32) -> Self {
        Self {
            dim,
            max_degree,
            max_interaction,
            include_constant: false,
        }
    }

    pub fn with_constant(mut self, include: bool) -> Self {
        self.include_constant = include;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.max_degree == 0 || self.max_interaction == 0 {
            return Err(Error::Invalid(format!(
                "basis needs dim, degree and interaction >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Number of multi-indices in the truncation set, saturating at `u128::MAX`.
    pub fn cardinality(&self) -> u128 {
        let d = self.max_degree as u128;
        let r = (self.max_interaction as usize).min(self.max_degree as usize).min(self.dim);
        let mut total: u128 = u128::from(self.include_constant);
        // alpha with |alpha|_1 = k and exactly j nonzero entries:
        // C(dim, j) supports times C(k-1, j-1) compositions of k into j parts.
        for j in 1..=r {
            let supports = binomial(self.dim as u128, j as u128);
            let mut per_support: u128 = 0;
            for k in j as u128..=d {
                per_support = per_support.saturating_add(binomial(k - 1, j as u128 - 1));
            }
            total = total.saturating_add(supports.saturating_mul(per_support));
        }
        total
    }
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Enumerates the basis in graded order, refusing sets larger than `cap`.
pub fn enumerate_basis_capped(spec: &BasisSpec, cap: usize) -> Result<Vec<MultiIndex>> {
    spec.validate()?;
    let size = spec.cardinality();
    if size > cap as u128 {
        return Err(Error::SizeOverflow {
            size: size.min(usize::MAX as u128) as usize,
            cap,
        });
    }
    let mut out = Vec::with_capacity(size as usize);
    if spec.include_constant {
        out.push(MultiIndex(vec![0; spec.dim]));
    }
    let mut current = vec![0u32; spec.dim];
    for degree in 1..=spec.max_degree {
        fill(&mut current, 0, degree, spec.max_interaction as usize, &mut out);
    }
    debug_assert_eq!(out.len() as u128, size);
    Ok(out)
}

/// [`enumerate_basis_capped`] with [`DEFAULT_SIZE_CAP`].
pub fn enumerate_basis(spec: &BasisSpec) -> Result<Vec<MultiIndex>> {
    enumerate_basis_capped(spec, DEFAULT_SIZE_CAP)
}

fn fill(current: &mut [u32], pos: usize, remaining: u32, nonzero_left: usize, out: &mut Vec<MultiIndex>) {
    if remaining == 0 {
        out.push(MultiIndex(current.to_vec()));
        return;
    }
    if pos == current.len() || nonzero_left == 0 {
        return;
    }
    for e in (1..=remaining).rev() {
        current[pos] = e;
        fill(current, pos + 1, remaining - e, nonzero_left - 1, out);
    }
    current[pos] = 0;
    fill(current, pos + 1, remaining, nonzero_left, out);
}

/// Evaluates every monomial of `basis` at `phi`.
pub fn eval_monomials(basis: &[MultiIndex], phi: &[f64]) -> Result<Vec<f64>> {
    let out: Vec<f64> = basis.iter().map(|a| a.eval(phi)).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("monomial evaluation overflowed".into()));
    }
    Ok(out)
}

/// Sparse form of a basis for repeated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CompiledBasis {
    terms: Vec<Vec<(usize, i32)>>,
}

impl CompiledBasis {
    pub(crate) fn new(basis: &[MultiIndex]) -> Self {
        Self {
            terms: basis
                .iter()
                .map(|a| {
                    a.exponents()
                        .iter()
                        .enumerate()
                        .filter(|(_, &e)| e > 0)
                        .map(|(i, &e)| (i, e as i32))
                        .collect()
                })
                .collect(),
        }
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        self.terms.len()
    }

    pub(crate) fn eval_into(&self, phi: &[f64], out: &mut [f64]) {
        for (o, term) in out.iter_mut().zip(&self.terms) {
            *o = term.iter().map(|&(i, e)| phi[i].powi(e)).product();
        }
    }

    /// `sum_j c_j P_j(phi)` without materializing the monomials.
    pub(crate) fn dot(&self, coefficients: &[f64], phi: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(coefficients)
            .map(|(term, c)| c * term.iter().map(|&(i, e)| phi[i].powi(e)).product::<f64>())
            .sum()
    }
}
