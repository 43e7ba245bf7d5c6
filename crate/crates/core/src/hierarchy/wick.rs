use crate::states::binomial;

/// `(n - 1)!!` for even `n`, the number of perfect matchings of `n` items;
/// `(-1)!! = 1`.
fn matchings(n: usize) -> f64 {
    debug_assert!(n.is_multiple_of(2));
    let mut acc = 1.0;
    let mut j = n as i64 - 1;
    while j > 1 {
        acc *= j as f64;
        j -= 2;
    }
    acc
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|j| j as f64).product()
}

/// Central moment `<delta^n eta^k>` of a bivariate Gaussian with covariance
/// `[[cxx, cxp], [cxp, cpp]]`.
///
/// Isserlis pairing, grouped by the number `j` of mixed `delta`-`eta` pairs:
/// choose which `j` of the `delta`s and `eta`s pair across (`C(n,j) C(k,j) j!`
/// ways) and pair the rest among themselves.
pub fn wick_closure(cxx: f64, cxp: f64, cpp: f64, n: usize, k: usize) -> f64 {
    if (n + k) % 2 == 1 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut j = n % 2;
    while j <= n.min(k) {
        let a = n - j;
        let b = k - j;
        acc += binomial(n, j)
            * binomial(k, j)
            * factorial(j)
            * matchings(a)
            * matchings(b)
            * cxx.powi((a / 2) as i32)
            * cpp.powi((b / 2) as i32)
            * cxp.powi(j as i32);
        j += 2;
    }
    acc
}
