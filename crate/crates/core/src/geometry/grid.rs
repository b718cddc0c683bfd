use crate::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Row-major index arithmetic for a `d`-dimensional grid (axis 0 slowest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridShape {
    dim: usize,
    dims: [usize; MAX_DIM],
}

impl GridShape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "grid dimension must be 1..={MAX_DIM}, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("grid dims must be positive: {dims:?}")));
        }
        let mut d = [1; MAX_DIM];
        d[..dims.len()].copy_from_slice(dims);
        Ok(Self { dim: dims.len(), dims: d })
    }

    pub fn cube(dim: usize, n: usize) -> Result<Self> {
        Self::new(&vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, c: [usize; MAX_DIM]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; MAX_DIM] {
        let c2 = idx % self.dims[2];
        let rest = idx / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], c2]
    }

    /// Index of `c` with periodic wraparound on every axis.
    #[inline]
    pub fn wrap_index(&self, c: [i64; MAX_DIM]) -> usize {
        let w = |v: i64, n: usize| v.rem_euclid(n as i64) as usize;
        self.index([w(c[0], self.dims[0]), w(c[1], self.dims[1]), w(c[2], self.dims[2])])
    }

    /// Index of `c`, or `None` when it falls outside the grid.
    #[inline]
    pub fn checked_index(&self, c: [i64; MAX_DIM]) -> Option<usize> {
        for a in 0..MAX_DIM {
            if c[a] < 0 || c[a] >= self.dims[a] as i64 {
                return None;
            }
        }
        Some(self.index([c[0] as usize, c[1] as usize, c[2] as usize]))
    }

    /// Calls `f` for every face neighbour of `idx` inside the grid.
    pub fn for_each_face_neighbor(&self, idx: usize, mut f: impl FnMut(usize)) {
        let c = self.coords(idx);
        for a in 0..self.dim {
            if c[a] > 0 {
                let mut n = c;
                n[a] -= 1;
                f(self.index(n));
            }
            if c[a] + 1 < self.dims[a] {
                let mut n = c;
                n[a] += 1;
                f(self.index(n));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = GridShape::new(&[3, 4, 5]).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.index(g.coords(i)), i);
        }
        assert_eq!(g.index([0, 0, 1]), 1);
        assert_eq!(g.index([1, 0, 0]), 20);
    }

    #[test]
    fn wrap_and_check() {
        let g = GridShape::new(&[4, 4]).unwrap();
        assert_eq!(g.wrap_index([-1, 5, 0]), g.index([3, 1, 0]));
        assert_eq!(g.checked_index([-1, 0, 0]), None);
        assert_eq!(g.checked_index([3, 3, 0]), Some(15));
    }

    #[test]
    fn face_neighbors_of_corner() {
        let g = GridShape::new(&[3, 3]).unwrap();
        let mut v = Vec::new();
        g.for_each_face_neighbor(0, |n| v.push(n));
        v.sort();
        assert_eq!(v, vec![1, 3]);
    }
}
