use alloc::vec::Vec;
use core::fmt;

/// A subset of sources, stored as sorted, de-duplicated zero-based indices.
///
/// Displayed one-based and space separated (`{0, 2}` prints as `1 3`), which
/// is also the form used in reports.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceSet(Vec<usize>);

impl SourceSet {
    pub fn new<I: IntoIterator<Item = usize>>(items: I) -> Self {
        let mut v: Vec<usize> = items.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        SourceSet(v)
    }

    pub fn empty() -> Self {
        SourceSet(Vec::new())
    }

    /// `{0, 1, ..., k-1}`, the "first k sources" truth sets used in experiments.
    pub fn first(k: usize) -> Self {
        SourceSet((0..k).collect())
    }

    /// Parse one-based indices.
    pub fn from_one_based<I: IntoIterator<Item = usize>>(items: I) -> Option<Self> {
        let mut v = Vec::new();
        for i in items {
            v.push(i.checked_sub(1)?);
        }
        Some(Self::new(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Sources of `[M]` not in the set, ascending.
    pub fn complement(&self, m: usize) -> impl Iterator<Item = usize> + '_ {
        (0..m).filter(move |&i| !self.contains(i))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// Replace the contents with `items`, reusing the allocation.
    pub fn assign(&mut self, items: &[usize]) {
        self.0.clear();
        self.0.extend_from_slice(items);
        self.0.sort_unstable();
        self.0.dedup();
    }

    /// Every subset of `[m]` whose size lies in `lower..=upper`, by size then
    /// lexicographically.
    pub fn enumerate(m: usize, lower: usize, upper: usize) -> Vec<SourceSet> {
        let mut out = Vec::new();
        for k in lower..=upper.min(m) {
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                out.push(SourceSet(idx.clone()));
                // advance to the next k-combination
                let mut pos = k;
                while pos > 0 && idx[pos - 1] == m - k + pos - 1 {
                    pos -= 1;
                }
                if pos == 0 {
                    break;
                }
                idx[pos - 1] += 1;
                for j in pos..k {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
        out
    }
}

impl fmt::Display for SourceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", i + 1)?;
        }
        Ok(())
    }
}

impl FromIterator<usize> for SourceSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        SourceSet::new(iter)
    }
}
