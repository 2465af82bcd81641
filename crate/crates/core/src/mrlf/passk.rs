/// Unbiased pass@k estimate from `n` samples of which `c` passed:
/// `1 - C(n-c, k) / C(n, k)`, evaluated as a running product.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> f64 {
    assert!(c <= n && k <= n, "need c <= n and k <= n (n={n}, c={c}, k={k})");
    if n - c < k {
        return 1.0;
    }
    let mut miss = 1.0;
    for i in (n - c + 1)..=n {
        miss *= 1.0 - k as f64 / i as f64;
    }
    1.0 - miss
}
