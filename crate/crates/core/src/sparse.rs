use std::ops::{AddAssign, Mul};

use faer::sparse::{SparseColMat, Triplet};

/// Square compressed-row matrix with duplicates summed at construction.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Csr<T> {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T> Csr<T>
where
    T: Copy + Default + AddAssign + Mul<Output = T>,
{
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, T)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data: Vec<T> = Vec::with_capacity(trip.len());
        let mut last = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                data.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Csr {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i).find(|&(c, _)| c == j).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let mut acc = T::default();
                for (j, v) in self.row(i) {
                    acc += v * x[j];
                }
                acc
            })
            .collect()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn map<U, F: Fn(usize, usize, T) -> U>(&self, f: F) -> Csr<U> {
        let data = self.triplets().map(|(i, j, v)| f(i, j, v)).collect();
        Csr {
            n: self.n,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            data,
        }
    }
}

impl Csr<f64> {
    /// `A D A` for a symmetric `A` and diagonal `D`.
    pub fn symmetric_sandwich(&self, d: &[f64]) -> Csr<f64> {
        let n = self.n;
        let mut acc = vec![0.0; n];
        let mut seen = vec![false; n];
        let mut cols = Vec::new();
        let mut trip = Vec::new();
        for i in 0..n {
            for (k, aik) in self.row(i) {
                let s = aik * d[k];
                for (j, akj) in self.row(k) {
                    if !seen[j] {
                        seen[j] = true;
                        cols.push(j);
                    }
                    acc[j] += s * akj;
                }
            }
            for &j in &cols {
                trip.push((i, j, acc[j]));
                acc[j] = 0.0;
                seen[j] = false;
            }
            cols.clear();
        }
        Csr::from_triplets(n, trip)
    }
}

macro_rules! to_faer {
    ($t:ty) => {
        impl Csr<$t> {
            pub fn to_faer(&self) -> SparseColMat<usize, $t> {
                let trip: Vec<Triplet<usize, usize, $t>> = self
                    .triplets()
                    .map(|(i, j, v)| Triplet::new(i, j, v))
                    .collect();
                SparseColMat::try_new_from_triplets(self.n, self.n, &trip)
                    .expect("indices are in range")
            }
        }
    };
}

to_faer!(f64);
to_faer!(crate::C64);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sandwich_matches_dense_product() {
        let a = Csr::from_triplets(3, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 2, -3.0), (2, 1, -3.0)]);
        let d = [0.5, 2.0, 4.0];
        let m = a.symmetric_sandwich(&d);
        let dense = |i: usize, j: usize| (0..3).map(|k| a.get(i, k) * d[k] * a.get(k, j)).sum::<f64>();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), dense(i, j));
            }
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let m = Csr::from_triplets(2, vec![(1, 0, 2.0), (0, 1, 1.0), (1, 0, 3.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 0), 5.0);
        assert_eq!(m.matvec(&[1.0, 2.0]), vec![2.0, 5.0]);
    }
}
