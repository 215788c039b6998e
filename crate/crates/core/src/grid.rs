//! Dense row-major indexing of an axis-aligned box of `Z^D`.

use crate::geometry::Site;

#[derive(Debug, Clone)]
pub(crate) struct BoxGrid<const D: usize> {
    lo: [i32; D],
    dims: [usize; D],
    strides: [usize; D],
    len: usize,
}

impl<const D: usize> BoxGrid<D> {
    pub fn new(lo: [i32; D], hi: [i32; D]) -> Self {
        let mut dims = [0usize; D];
        for a in 0..D {
            dims[a] = (hi[a] - lo[a] + 1).max(0) as usize;
        }
        let mut strides = [0usize; D];
        let mut len = 1usize;
        for a in (0..D).rev() {
            strides[a] = len;
            len *= dims[a];
        }
        Self { lo, dims, strides, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn index(&self, x: &Site<D>) -> Option<usize> {
        let mut idx = 0;
        for a in 0..D {
            let off = x.0[a] - self.lo[a];
            if off < 0 || off as usize >= self.dims[a] {
                return None;
            }
            idx += off as usize * self.strides[a];
        }
        Some(idx)
    }

    pub fn site(&self, mut idx: usize) -> Site<D> {
        let mut c = [0i32; D];
        for a in 0..D {
            c[a] = self.lo[a] + (idx / self.strides[a]) as i32;
            idx %= self.strides[a];
        }
        Site(c)
    }

    pub fn coord(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.dims[axis]
    }

    /// Neighbour along `axis` in direction `+1` (`up`) or `-1`.
    #[inline]
    pub fn step(&self, idx: usize, axis: usize, up: bool) -> Option<usize> {
        let c = self.coord(idx, axis);
        if up {
            (c + 1 < self.dims[axis]).then(|| idx + self.strides[axis])
        } else {
            (c > 0).then(|| idx - self.strides[axis])
        }
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }
}
