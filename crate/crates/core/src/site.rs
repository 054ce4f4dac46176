//! Lattice sites and finite site sets.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest lattice dimension supported.
pub const MAX_DIM: usize = 3;

/// A point of the integer lattice `Z^dim`, `dim` in `1..=3`.
///
/// Sites are ordered lexicographically by coordinates, which fixes the
/// summation order of every windowed sum in the crate.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl Site {
    pub fn new(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::Contract(format!(
                "site dimension {} outside 1..={MAX_DIM}",
                coords.len()
            )));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site {
            dim: coords.len() as u8,
            coords: c,
        })
    }

    /// One-dimensional site.
    pub const fn d1(n: i64) -> Self {
        Site {
            dim: 1,
            coords: [n, 0, 0],
        }
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "unsupported dimension {dim}");
        Site {
            dim: dim as u8,
            coords: [0; MAX_DIM],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim()]
    }

    /// First coordinate; the lattice index for one-dimensional models.
    pub fn index(&self) -> i64 {
        self.coords[0]
    }

    pub fn add(&self, other: &Site) -> Site {
        debug_assert_eq!(self.dim, other.dim);
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(other.coords.iter()) {
            *a += b;
        }
        Site { dim: self.dim, coords: c }
    }

    pub fn sub(&self, other: &Site) -> Site {
        debug_assert_eq!(self.dim, other.dim);
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(other.coords.iter()) {
            *a -= b;
        }
        Site { dim: self.dim, coords: c }
    }

    /// Chebyshev (max-coordinate) distance.
    pub fn cheb_dist(&self, other: &Site) -> u64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| a.abs_diff(*b))
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            return write!(f, "{}", self.coords[0]);
        }
        write!(f, "(")?;
        for (k, c) in self.coords().iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Site {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<i64> = Vec::deserialize(d)?;
        Site::new(&v).map_err(serde::de::Error::custom)
    }
}

/// Finite, lexicographically ordered set of sites.
pub type SiteSet = BTreeSet<Site>;

/// Contiguous 1-D block `lo..=hi`.
pub fn interval(lo: i64, hi: i64) -> SiteSet {
    (lo..=hi).map(Site::d1).collect()
}

/// Axis-aligned box `[lo, hi]^dim`.
pub fn cube(dim: usize, lo: i64, hi: i64) -> SiteSet {
    let mut out = SiteSet::new();
    let mut cur = vec![lo; dim];
    if lo > hi {
        return out;
    }
    loop {
        out.insert(Site::new(&cur).expect("dimension checked by caller"));
        let mut axis = dim;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if cur[axis] < hi {
                cur[axis] += 1;
                for c in cur.iter_mut().skip(axis + 1) {
                    *c = lo;
                }
                break;
            }
        }
    }
}

/// All sites within Chebyshev distance `width` of `set`.
pub fn widen(set: &SiteSet, width: u64) -> SiteSet {
    let Some(first) = set.iter().next() else {
        return SiteSet::new();
    };
    let w = width as i64;
    let offsets = cube(first.dim(), -w, w);
    let mut out = SiteSet::new();
    for s in set {
        for o in &offsets {
            out.insert(s.add(o));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_lexicographic() {
        let a = Site::new(&[0, 5]).unwrap();
        let b = Site::new(&[1, -3]).unwrap();
        assert!(a < b);
        assert!(Site::d1(-2) < Site::d1(1));
    }

    #[test]
    fn cube_enumerates_all_points() {
        assert_eq!(cube(2, -1, 1).len(), 9);
        assert_eq!(cube(3, 0, 1).len(), 8);
        assert_eq!(cube(1, 3, 2).len(), 0);
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(Site::new(&[]).is_err());
        assert!(Site::new(&[1, 2, 3, 4]).is_err());
    }

    #[test]
    fn widen_adds_halo() {
        let s: SiteSet = [Site::d1(0)].into_iter().collect();
        assert_eq!(widen(&s, 2), interval(-2, 2));
    }
}
