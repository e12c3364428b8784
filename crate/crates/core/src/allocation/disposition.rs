/// A set of simultaneously active beams on one subcarrier.
///
/// `index` is the 0-based position of `beams` among all subsets of the same
/// size in lexicographic order, so `(size, index)` is reproducible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disposition {
    size: usize,
    index: usize,
    beams: Vec<usize>,
    mask: u64,
}

impl Disposition {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn beams(&self) -> &[usize] {
        &self.beams
    }

    pub fn contains(&self, beam: usize) -> bool {
        beam < 64 && self.mask & (1 << beam) != 0
    }
}

/// All dispositions of `t` beams, grouped by size.
#[derive(Clone, Debug)]
pub struct DispositionTable {
    beams: usize,
    by_size: Vec<Vec<Disposition>>,
}

impl DispositionTable {
    pub fn new(beams: usize) -> Self {
        assert!((1..=16).contains(&beams), "beam count must be in 1..=16");
        let by_size = (1..=beams)
            .map(|size| {
                combinations(beams, size)
                    .into_iter()
                    .enumerate()
                    .map(|(index, set)| Disposition {
                        size,
                        index,
                        mask: set.iter().fold(0, |m, &q| m | 1 << q),
                        beams: set,
                    })
                    .collect()
            })
            .collect();
        Self { beams, by_size }
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn of_size(&self, size: usize) -> &[Disposition] {
        assert!((1..=self.beams).contains(&size), "disposition size out of range");
        &self.by_size[size - 1]
    }

    pub fn get(&self, size: usize, index: usize) -> Option<&Disposition> {
        self.by_size.get(size.checked_sub(1)?)?.get(index)
    }

    /// Every disposition, smallest size first, then by index.
    pub fn iter(&self) -> impl Iterator<Item = &Disposition> {
        self.by_size.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.by_size.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Size-`k` subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // rightmost position that can still move
        let Some(i) = (0..k).rev().find(|&i| current[i] < n - k + i) else {
            return out;
        };
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order() {
        let table = DispositionTable::new(4);
        let pairs: Vec<Vec<usize>> = table.of_size(2).iter().map(|d| d.beams().to_vec()).collect();
        assert_eq!(
            pairs,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(table.of_size(4).len(), 1);
        assert_eq!(table.len(), 15);
    }

    #[test]
    fn counts_match_binomials() {
        for t in 1..=6 {
            let table = DispositionTable::new(t);
            for size in 1..=t {
                assert_eq!(table.of_size(size).len(), binomial(t, size));
                for (j, d) in table.of_size(size).iter().enumerate() {
                    assert_eq!(d.index(), j);
                    assert_eq!(d.size(), size);
                    assert!(d.beams().iter().all(|&q| d.contains(q)));
                    assert_eq!((0..t).filter(|&q| d.contains(q)).count(), size);
                }
            }
        }
    }

    #[test]
    fn lookup() {
        let table = DispositionTable::new(3);
        assert_eq!(table.get(2, 2).unwrap().beams(), &[1, 2]);
        assert!(table.get(0, 0).is_none());
        assert!(table.get(4, 0).is_none());
        assert!(table.get(1, 3).is_none());
    }
}
