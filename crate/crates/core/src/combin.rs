//! Small combinatorics helpers shared by the channel constructions.

/// Binomial coefficient as `f64`. Exact while the value fits in 2^53.
pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i as u128 + 1),
            None => return ln_binom(n, k).exp(),
        }
    }
    acc as f64
}

pub fn ln_binom(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    statrs::function::factorial::ln_binomial(n as u64, k as u64)
}

/// Σ_{i=0}^{k} C(n, i).
pub fn binom_cumsum(n: usize, k: usize) -> f64 {
    (0..=k.min(n)).map(|i| binom(n, i)).sum()
}

/// Iterates all k-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut cur: Option<Vec<usize>> = if k <= n { Some((0..k).collect()) } else { None };
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let next = {
            let mut c = out.clone();
            let mut i = k;
            loop {
                if i == 0 {
                    break None;
                }
                i -= 1;
                if c[i] < n - k + i {
                    c[i] += 1;
                    for j in i + 1..k {
                        c[j] = c[j - 1] + 1;
                    }
                    break Some(c);
                }
            }
        };
        cur = next;
        Some(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binom(5, 2), 10.0);
        assert_eq!(binom(32, 3), 4960.0);
        assert_eq!(binom(3, 4), 0.0);
        assert_eq!(binom_cumsum(32, 3), 1.0 + 32.0 + 496.0 + 4960.0);
        assert!((ln_binom(40, 20) - binom(40, 20).ln()).abs() < 1e-9);
    }

    #[test]
    fn subset_enumeration() {
        let all: Vec<_> = subsets(4, 2).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[5], vec![2, 3]);
        assert_eq!(subsets(3, 0).count(), 1);
        assert_eq!(subsets(2, 3).count(), 0);
    }
}
