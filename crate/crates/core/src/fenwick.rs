/// Binary indexed tree over `u64` counts with prefix sums.
#[derive(Debug, Default, Clone)]
pub(crate) struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    pub(crate) fn reset(&mut self, n: usize) {
        self.tree.clear();
        self.tree.resize(n + 1, 0);
    }

    pub(crate) fn add(&mut self, pos: usize, v: u64) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over positions `0..=pos`.
    pub(crate) fn prefix(&self, pos: usize) -> u64 {
        let mut i = pos + 1;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_sums_match_naive() {
        let mut f = Fenwick::default();
        f.reset(17);
        let mut naive = [0u64; 17];
        for (k, pos) in [3usize, 0, 16, 3, 9, 12, 1].into_iter().enumerate() {
            f.add(pos, k as u64 + 1);
            naive[pos] += k as u64 + 1;
            for p in 0..17 {
                assert_eq!(f.prefix(p), naive[..=p].iter().sum::<u64>());
            }
        }
    }
}
