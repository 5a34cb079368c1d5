//! Independent reference computations shared by the integration tests.
//! Nothing here calls the solver or estimator under test.

#![allow(dead_code)]

use chsh_kyber::chsh::Mat4;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub type CMat = DMatrix<Complex64>;

pub fn to_dmatrix(m: &Mat4) -> CMat {
    DMatrix::from_fn(4, 4, |i, j| m[i][j])
}

pub fn pauli(which: char) -> CMat {
    let c = |re: f64| Complex64::new(re, 0.0);
    match which {
        'I' => DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(1.0)]),
        'X' => DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]),
        'Z' => DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]),
        _ => unreachable!(),
    }
}

/// Observables written out directly: A0 = Z, A1 = X, B0/B1 = (Z ± X)/√2.
pub fn reference_observable(party: char, setting: u8) -> CMat {
    let (z, x) = (pauli('Z'), pauli('X'));
    let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match (party, setting) {
        ('A', 0) => z,
        ('A', 1) => x,
        ('B', 0) => (z + x) * r,
        ('B', 1) => (z - x) * r,
        _ => unreachable!(),
    }
}

/// `½(I − (−1)^{ab} A_a ⊗ B_b)` assembled with nalgebra's Kronecker product.
pub fn reference_term(a: u8, b: u8) -> CMat {
    let sign = if a == 1 && b == 1 { -1.0 } else { 1.0 };
    let ab = reference_observable('A', a).kronecker(&reference_observable('B', b));
    (CMat::identity(4, 4) - ab * Complex64::new(sign, 0.0)) * Complex64::new(0.5, 0.0)
}

pub fn epr_vector() -> DVector<Complex64> {
    let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    DVector::from_vec(vec![r, z, z, r])
}

/// Sorted eigenvalues of a Hermitian matrix via nalgebra's own solver.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)[0]
}

/// Embeds a 4×4 block acting on pair `p` into `pairs` pairs: `I ⊗ … ⊗ H ⊗ … ⊗ I`.
pub fn embed(block: &CMat, p: usize, pairs: usize) -> CMat {
    let mut out = CMat::identity(1, 1);
    for i in 0..pairs {
        let f = if i == p {
            block.clone()
        } else {
            CMat::identity(4, 4)
        };
        out = out.kronecker(&f);
    }
    out
}

/// Eigenvalues of the circulant kernel for `s' = s + e mod q` with `e`
/// uniform on `support`: `λ_k = mean_j exp(2πi·k·e_j/q)`.
pub fn circulant_eigen_magnitudes(q: u32, support: &[i64]) -> Vec<f64> {
    let mut mags: Vec<f64> = (0..q)
        .map(|k| {
            let z: Complex64 = support
                .iter()
                .map(|&e| {
                    Complex64::from_polar(
                        1.0,
                        2.0 * std::f64::consts::PI * k as f64 * e as f64 / q as f64,
                    )
                })
                .sum();
            (z / support.len() as f64).norm()
        })
        .collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    mags
}

/// Pearson χ² over cells with positive expected count; returns the p-value.
pub fn chi_square_p(observed: &[u64], expected_probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        if p > 0.0 {
            let e = p * n as f64;
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        } else {
            assert_eq!(o, 0, "observed a transition with zero probability");
        }
    }
    let dof = (cells - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Pooled χ² across several independent rows (degrees of freedom add).
pub fn pooled_chi_square_p(rows: &[(Vec<u64>, Vec<f64>)]) -> f64 {
    let mut stat = 0.0;
    let mut dof = 0.0;
    for (observed, probs) in rows {
        let n: u64 = observed.iter().sum();
        let mut cells = 0;
        for (&o, &p) in observed.iter().zip(probs) {
            if p > 0.0 {
                let e = p * n as f64;
                stat += (o as f64 - e).powi(2) / e;
                cells += 1;
            } else {
                assert_eq!(o, 0, "observed a transition with zero probability");
            }
        }
        dof += (cells - 1) as f64;
    }
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Exact CBD(η) probabilities over `−η..=η` from binomial coefficients:
/// the difference of two Bin(η, 1/2) draws.
pub fn cbd_pmf(eta: u32) -> Vec<f64> {
    let eta = eta as i64;
    let choose = |n: i64, k: i64| -> f64 {
        if k < 0 || k > n {
            return 0.0;
        }
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    let total = 4f64.powi(eta as i32);
    (-eta..=eta)
        .map(|d| {
            (0..=eta)
                .map(|a| choose(eta, a) * choose(eta, a - d))
                .sum::<f64>()
                / total
        })
        .collect()
}

/// `|x|` of the centered representative in `(−q/2, q/2]`.
pub fn centered_abs(x: i64, q: i64) -> i64 {
    let r = x.rem_euclid(q);
    if r > q / 2 {
        q - r
    } else {
        r
    }
}

pub fn mean_var(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
    for x in xs {
        n += 1;
        s += x;
        s2 += x * x;
    }
    let mean = s / n as f64;
    (mean, s2 / n as f64 - mean * mean, n)
}
