//! Small combinatorial helpers shared across modules.

/// Binomial coefficient `C(n, k)` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Binomial coefficient `C(n, k)` as an exact integer.
pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `ln(n!)` by direct summation; exact enough for the user counts seen here.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Falling factorial `m (m-1) ... (m-k+1)`.
pub fn falling_factorial(m: usize, k: usize) -> f64 {
    if k > m {
        return 0.0;
    }
    (0..k).map(|i| (m - i) as f64).product()
}
