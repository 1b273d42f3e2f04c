//! Zero number `z`, the odd/even roundings `V⁻`/`V⁺`, and nondegeneracy
//! classification on sampled functions.
//!
//! A sample counts as zero when `|v| <= eps_rel * sup|v|`. Such samples are
//! dropped and the strict sign alternations of the survivors are counted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sup_norm, Samples};

/// Relative zero threshold, `0 < eps_rel < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Tolerance(f64);

impl Tolerance {
    pub const DEFAULT_EPS_REL: f64 = 1e-9;

    pub fn new(eps_rel: f64) -> Result<Self> {
        if eps_rel > 0.0 && eps_rel < 1.0 {
            Ok(Tolerance(eps_rel))
        } else {
            Err(Error::InvalidArgument(format!(
                "eps_rel must lie in (0, 1), got {eps_rel}"
            )))
        }
    }

    pub fn eps_rel(self) -> f64 {
        self.0
    }

    fn threshold(self, values: &[f64]) -> f64 {
        self.0 * sup_norm(values)
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance(Self::DEFAULT_EPS_REL)
    }
}

impl TryFrom<f64> for Tolerance {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Tolerance::new(v)
    }
}

impl From<Tolerance> for f64 {
    fn from(t: Tolerance) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroCount {
    pub z: usize,
    /// A run of dropped samples sits between two survivors of equal sign.
    pub degenerate: bool,
}

/// Which functional a monotonicity check tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Z,
    VMinus,
    VPlus,
}

impl Functional {
    pub fn name(self) -> &'static str {
        match self {
            Functional::Z => "z",
            Functional::VMinus => "v_minus",
            Functional::VPlus => "v_plus",
        }
    }

    pub fn of_z(self, z: usize) -> usize {
        match self {
            Functional::Z => z,
            Functional::VMinus => v_minus_of(z),
            Functional::VPlus => v_plus_of(z),
        }
    }
}

impl std::str::FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z" => Ok(Functional::Z),
            "v_minus" | "v-" | "vminus" => Ok(Functional::VMinus),
            "v_plus" | "v+" | "vplus" => Ok(Functional::VPlus),
            other => Err(Error::Parse(format!("unknown functional `{other}`"))),
        }
    }
}

/// Sign of each sample: `0` for dropped samples.
fn signs(values: &[f64], tol: Tolerance) -> Vec<i8> {
    let eps = tol.threshold(values);
    values
        .iter()
        .map(|&v| {
            if v.abs() <= eps {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

pub fn zero_number<S: Samples + ?Sized>(phi: &S, tol: Tolerance) -> ZeroCount {
    let values = phi.samples();
    if sup_norm(values) == 0.0 {
        return ZeroCount {
            z: 0,
            degenerate: false,
        };
    }
    let s = signs(values, tol);
    let mut z = 0;
    let mut degenerate = false;
    let mut last: Option<i8> = None;
    let mut dropped_since_last = false;
    for &sg in &s {
        if sg == 0 {
            dropped_since_last = true;
            continue;
        }
        if let Some(prev) = last {
            if prev != sg {
                z += 1;
            } else if dropped_since_last {
                degenerate = true;
            }
        }
        last = Some(sg);
        dropped_since_last = false;
    }
    ZeroCount { z, degenerate }
}

pub fn v_minus_of(z: usize) -> usize {
    2 * (z / 2) + 1
}

pub fn v_plus_of(z: usize) -> usize {
    2 * z.div_ceil(2)
}

/// `V⁻ = 2⌊z/2⌋ + 1`, always odd.
pub fn v_minus<S: Samples + ?Sized>(phi: &S, tol: Tolerance) -> usize {
    v_minus_of(zero_number(phi, tol).z)
}

/// `V⁺ = 2⌊(z+1)/2⌋`, always even.
pub fn v_plus<S: Samples + ?Sized>(phi: &S, tol: Tolerance) -> usize {
    v_plus_of(zero_number(phi, tol).z)
}

/// True when every zero is simple on the sample set: each dropped run is a
/// single sample flanked by survivors of opposite sign, or a single sample at
/// an endpoint.
pub fn is_nondegenerate<S: Samples + ?Sized>(phi: &S, tol: Tolerance) -> bool {
    nondegenerate_impl(phi.samples(), tol, false)
}

/// As [`is_nondegenerate`], additionally requiring both endpoint samples to
/// exceed the zero threshold.
pub fn is_nondegenerate_no_boundary_zeros<S: Samples + ?Sized>(phi: &S, tol: Tolerance) -> bool {
    nondegenerate_impl(phi.samples(), tol, true)
}

fn nondegenerate_impl(values: &[f64], tol: Tolerance, forbid_boundary: bool) -> bool {
    if sup_norm(values) == 0.0 {
        return false;
    }
    let s = signs(values, tol);
    let n = s.len();
    if forbid_boundary && (s[0] == 0 || s[n - 1] == 0) {
        return false;
    }
    let mut i = 0;
    while i < n {
        if s[i] != 0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && s[i] == 0 {
            i += 1;
        }
        if i - start >= 2 {
            return false;
        }
        let left = start.checked_sub(1).map(|k| s[k]);
        let right = (i < n).then(|| s[i]);
        if let (Some(l), Some(r)) = (left, right) {
            if l == r {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFunction;
    use std::f64::consts::PI;

    /// Longest subsequence with strictly alternating signs, by enumeration of
    /// index subsets. Exponential; only for short inputs.
    pub(crate) fn brute_force_sup_count(values: &[f64], tol: Tolerance) -> usize {
        let eps = tol.eps_rel() * sup_norm(values);
        let cleaned: Vec<f64> = values
            .iter()
            .map(|&v| if v.abs() <= eps { 0.0 } else { v })
            .collect();
        let n = cleaned.len();
        let mut best = 0;
        for mask in 1u32..(1 << n) {
            let picked: Vec<f64> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| cleaned[i]).collect();
            if picked.windows(2).all(|w| w[0] * w[1] < 0.0) {
                best = best.max(picked.len() - 1);
            }
        }
        best
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn zero_number_examples() {
        let c3 = GridFunction::from_fn(257, |x| (3.0 * PI * x).cos()).unwrap();
        assert_eq!(zero_number(&c3, tol()).z, 3);
        let sq = GridFunction::from_fn(257, |x| (x - 0.5) * (x - 0.5)).unwrap();
        assert_eq!(zero_number(&sq, tol()).z, 0);
        let alt = [1.0, -1.0, 1.0, -1.0, 1.0];
        assert_eq!(zero_number(&alt[..], tol()).z, 4);
        assert_eq!(brute_force_sup_count(&alt, tol()), 4);
    }

    #[test]
    fn zero_function_has_zero_count() {
        let zero = vec![0.0; 9];
        assert_eq!(
            zero_number(&zero, tol()),
            ZeroCount {
                z: 0,
                degenerate: false
            }
        );
    }

    #[test]
    fn v_examples() {
        let one = vec![1.0; 5];
        assert_eq!(v_minus(&one, tol()), 1);
        assert_eq!(v_plus(&one, tol()), 0);
        let c3 = GridFunction::from_fn(257, |x| (3.0 * PI * x).cos()).unwrap();
        assert_eq!(v_minus(&c3, tol()), 3);
        let c1 = GridFunction::from_fn(257, |x| (PI * x).cos()).unwrap();
        assert_eq!(v_plus(&c1, tol()), 2);
        let alt = vec![1.0, -1.0, 1.0, -1.0, 1.0];
        assert_eq!(v_minus(&alt, tol()), 5);
        assert_eq!(v_plus(&alt, tol()), 4);
    }

    #[test]
    fn nondegeneracy_examples() {
        let c3 = GridFunction::from_fn(257, |x| (3.0 * PI * x).cos()).unwrap();
        assert!(is_nondegenerate(&c3, tol()));
        let sq = GridFunction::from_fn(257, |x| (x - 0.5) * (x - 0.5)).unwrap();
        assert!(!is_nondegenerate(&sq, tol()));
        assert!(zero_number(&sq, tol()).degenerate);
        let bump = GridFunction::from_fn(257, |x| x * (1.0 - x)).unwrap();
        assert!(is_nondegenerate(&bump, tol()));
        assert!(!is_nondegenerate_no_boundary_zeros(&bump, tol()));
    }

    #[test]
    fn sample_on_zero_with_sign_change_is_simple() {
        let v = [1.0, 0.0, -1.0, -2.0];
        assert!(is_nondegenerate(&v[..], tol()));
        assert_eq!(zero_number(&v[..], tol()), ZeroCount { z: 1, degenerate: false });
        let flat = [1.0, 0.0, 0.0, -1.0];
        assert!(!is_nondegenerate(&flat[..], tol()));
    }

    #[test]
    fn tolerance_bounds() {
        assert!(Tolerance::new(0.0).is_err());
        assert!(Tolerance::new(1.0).is_err());
        assert!(Tolerance::new(1e-6).is_ok());
    }

    #[test]
    fn refinement_stabilizes() {
        for k in 1..=6usize {
            let n0 = 4 * k + 1;
            for n in n0..n0 + 40 {
                let g = GridFunction::from_fn(n, |x| (k as f64 * PI * x).cos()).unwrap();
                assert_eq!(zero_number(&g, tol()).z, k, "k={k} n={n}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scale_and_sign_invariance(v in proptest::collection::vec(-10.0f64..10.0, 3..40), lam in 1e-3f64..1e3, neg in any::<bool>()) {
                let lam = if neg { -lam } else { lam };
                let scaled: Vec<f64> = v.iter().map(|x| lam * x).collect();
                let flipped: Vec<f64> = v.iter().map(|x| -x).collect();
                prop_assert_eq!(zero_number(&v, tol()).z, zero_number(&scaled, tol()).z);
                prop_assert_eq!(zero_number(&v, tol()).z, zero_number(&flipped, tol()).z);
            }

            #[test]
            fn v_parity_and_gap(z in 0usize..1000) {
                prop_assert_eq!(v_minus_of(z) % 2, 1);
                prop_assert_eq!(v_plus_of(z) % 2, 0);
                prop_assert_eq!(v_plus_of(z), 2 * ((z + 1) / 2));
                prop_assert!(v_minus_of(z).abs_diff(z) <= 1);
                prop_assert!(v_plus_of(z).abs_diff(z) <= 1);
                prop_assert!(v_minus_of(z + 1) >= v_minus_of(z));
                prop_assert!(v_plus_of(z + 1) >= v_plus_of(z));
            }

            #[test]
            fn matches_brute_force(v in proptest::collection::vec(prop_oneof![Just(0.0), -3.0f64..3.0], 1..12)) {
                prop_assert_eq!(zero_number(&v, tol()).z, brute_force_sup_count(&v, tol()));
            }
        }
    }
}
