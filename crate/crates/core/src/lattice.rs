//! Lattice sites of Z^d, unit directions and torus indexing.
//!
//! Directions are indexed `0..2d`: index `i < d` is `+e_{i+1}`, index
//! `i >= d` is `-e_{i-d+1}`. Every loop over directions in the crate uses
//! this order, which fixes path enumeration order and inverse-CDF sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 6;
pub const MAX_DIRS: usize = 2 * MAX_DIM;

/// A point of Z^d for `d <= MAX_DIM`; unused trailing coordinates are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default, Serialize, Deserialize)]
pub struct Site {
    coords: [i32; MAX_DIM],
}

impl Site {
    pub const ORIGIN: Site = Site { coords: [0; MAX_DIM] };

    pub fn new(coords: &[i32]) -> Result<Self> {
        if coords.len() > MAX_DIM {
            return Err(Error::Dimension {
                expected: MAX_DIM,
                got: coords.len(),
            });
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site { coords: c })
    }

    /// Unit vector `e_dir`.
    pub fn unit(dir: usize, d: usize) -> Self {
        Site::ORIGIN.step(dir, d)
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> i32 {
        self.coords[axis]
    }

    #[inline]
    pub fn coords(&self, d: usize) -> &[i32] {
        &self.coords[..d]
    }

    #[inline]
    pub fn step(&self, dir: usize, d: usize) -> Self {
        let mut c = self.coords;
        if dir < d {
            c[dir] += 1;
        } else {
            c[dir - d] -= 1;
        }
        Site { coords: c }
    }

    pub fn add(&self, other: &Site) -> Self {
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(other.coords.iter()) {
            *a += *b;
        }
        Site { coords: c }
    }

    pub fn sub(&self, other: &Site) -> Self {
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(other.coords.iter()) {
            *a -= *b;
        }
        Site { coords: c }
    }

    /// `x · e_dir`.
    #[inline]
    pub fn project(&self, dir: usize, d: usize) -> i64 {
        if dir < d {
            self.coords[dir] as i64
        } else {
            -(self.coords[dir - d] as i64)
        }
    }

    pub fn l1_norm(&self) -> u64 {
        self.coords.iter().map(|c| c.unsigned_abs() as u64).sum()
    }

    pub fn linf_norm(&self) -> u64 {
        self.coords.iter().map(|c| c.unsigned_abs() as u64).max().unwrap_or(0)
    }

    pub fn is_neighbor(&self, other: &Site) -> bool {
        self.sub(other).l1_norm() == 1
    }

    pub fn to_vec(&self, d: usize) -> Vec<i32> {
        self.coords(d).to_vec()
    }
}

#[inline]
pub fn opposite(dir: usize, d: usize) -> usize {
    (dir + d) % (2 * d)
}

#[inline]
pub fn axis(dir: usize, d: usize) -> usize {
    dir % d
}

/// Direction index of the step `from -> to`, if they are neighbors.
pub fn direction_between(from: &Site, to: &Site, d: usize) -> Option<usize> {
    (0..2 * d).find(|&dir| from.step(dir, d) == *to)
}

/// `(Z/NZ)^d` with row-major site indexing (first coordinate fastest).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGeometry {
    pub n: usize,
    pub d: usize,
}

impl TorusGeometry {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::UnsupportedTorus(n));
        }
        if d == 0 || d > MAX_DIM {
            return Err(Error::Dimension {
                expected: MAX_DIM,
                got: d,
            });
        }
        Ok(TorusGeometry { n, d })
    }

    pub fn size(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn dirs(&self) -> usize {
        2 * self.d
    }

    pub fn index(&self, x: &Site) -> usize {
        let n = self.n as i64;
        let mut idx = 0usize;
        for axis in (0..self.d).rev() {
            let c = (x.coord(axis) as i64).rem_euclid(n) as usize;
            idx = idx * self.n + c;
        }
        idx
    }

    pub fn site(&self, mut idx: usize) -> Site {
        let mut c = [0i32; MAX_DIM];
        for slot in c.iter_mut().take(self.d) {
            *slot = (idx % self.n) as i32;
            idx /= self.n;
        }
        Site { coords: c }
    }

    pub fn neighbor(&self, idx: usize, dir: usize) -> usize {
        self.index(&self.site(idx).step(dir, self.d))
    }

    /// `table[idx * 2d + dir]` is the neighbor of `idx` in direction `dir`.
    pub fn neighbor_table(&self) -> Vec<usize> {
        let dirs = self.dirs();
        let mut table = Vec::with_capacity(self.size() * dirs);
        for idx in 0..self.size() {
            for dir in 0..dirs {
                table.push(self.neighbor(idx, dir));
            }
        }
        table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_follow_the_signed_convention() {
        let d = 3;
        assert_eq!(Site::unit(0, d).coords(d), &[1, 0, 0]);
        assert_eq!(Site::unit(3, d).coords(d), &[-1, 0, 0]);
        assert_eq!(Site::unit(5, d).coords(d), &[0, 0, -1]);
        assert_eq!(opposite(1, d), 4);
        assert_eq!(opposite(4, d), 1);
        assert_eq!(Site::unit(4, d).project(4, d), 1);
        assert_eq!(Site::unit(1, d).project(4, d), -1);
    }

    #[test]
    fn torus_index_roundtrip_and_wrap() {
        let g = TorusGeometry::new(4, 2).unwrap();
        for idx in 0..g.size() {
            assert_eq!(g.index(&g.site(idx)), idx);
        }
        let x = Site::new(&[-1, 5]).unwrap();
        assert_eq!(g.site(g.index(&x)).coords(2), &[3, 1]);
        let west = g.neighbor(0, 2);
        assert_eq!(g.site(west).coords(2), &[3, 0]);
    }

    #[test]
    fn small_torus_rejected() {
        assert_eq!(TorusGeometry::new(2, 2), Err(Error::UnsupportedTorus(2)));
    }
}
