//! Small sampling helpers shared by the simulators.

use rand::Rng;

/// Index `i` with `F(i-1) <= u·W < F(i)` for the cumulative weights `F`,
/// scanning from the left. Zero-weight entries are never returned.
pub fn categorical(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = Some(i);
            if target < acc {
                return i;
            }
        }
    }
    last_positive.expect("categorical draw from all-zero weights")
}

/// Uniform in `[0, 1)` from the top 53 bits of one `u64`.
#[inline]
pub fn unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Exponential waiting time with the given total rate.
#[inline]
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u = 1.0 - unit(rng);
    -u.ln() / rate
}

/// Fenwick tree over nonnegative rates with `O(log n)` update and search.
#[derive(Debug, Clone)]
pub struct Fenwick {
    tree: Vec<f64>,
    values: Vec<f64>,
}

impl Fenwick {
    pub fn new(n: usize) -> Self {
        Self {
            tree: vec![0.0; n + 1],
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replaces all values in `O(n)`.
    pub fn rebuild(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.values.len());
        self.values.copy_from_slice(values);
        let n = values.len();
        self.tree[0] = 0.0;
        self.tree[1..].copy_from_slice(values);
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                self.tree[parent] += self.tree[i];
            }
        }
    }

    pub fn set(&mut self, index: usize, value: f64) {
        let delta = value - self.values[index];
        self.values[index] = value;
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Sum of all values.
    pub fn total(&self) -> f64 {
        let mut i = self.values.len();
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Smallest index whose prefix sum exceeds `target`, skipping zero-valued
    /// entries that rounding might otherwise land on.
    pub fn search(&self, target: f64) -> usize {
        let n = self.values.len();
        let mut pos = 0;
        let mut remaining = target;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= remaining {
                pos = next;
                remaining -= self.tree[next];
            }
            step >>= 1;
        }
        let mut idx = pos.min(n - 1);
        while self.values[idx] <= 0.0 {
            match (idx + 1..n).find(|&j| self.values[j] > 0.0) {
                Some(j) => idx = j,
                None => {
                    idx = (0..idx)
                        .rev()
                        .find(|&j| self.values[j] > 0.0)
                        .expect("search over all-zero rates");
                }
            }
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_skips_zero_weights() {
        let w = [0.0, 1.0, 0.0, 3.0];
        assert_eq!(categorical(&w, 4.0, 0.0), 1);
        assert_eq!(categorical(&w, 4.0, 0.24), 1);
        assert_eq!(categorical(&w, 4.0, 0.26), 3);
        assert_eq!(categorical(&w, 4.0, 0.999_999), 3);
    }

    #[test]
    fn fenwick_matches_linear_scan() {
        let vals = [0.5, 0.0, 2.0, 1.5, 0.0, 3.0, 0.25];
        let mut f = Fenwick::new(vals.len());
        f.rebuild(&vals);
        let total: f64 = vals.iter().sum();
        assert!((f.total() - total).abs() < 1e-12);
        for k in 0..1000 {
            let u = k as f64 / 1000.0;
            assert_eq!(f.search(u * total), categorical(&vals, total, u), "u = {u}");
        }
        f.set(2, 0.0);
        f.set(4, 1.0);
        let mut vals2 = vals;
        vals2[2] = 0.0;
        vals2[4] = 1.0;
        let total2: f64 = vals2.iter().sum();
        assert!((f.total() - total2).abs() < 1e-12);
        for k in 0..1000 {
            let u = k as f64 / 1000.0;
            assert_eq!(f.search(u * total2), categorical(&vals2, total2, u));
        }
    }
}
