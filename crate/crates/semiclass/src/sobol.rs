//! Sobol low-discrepancy sequences (Gray-code construction, 32-bit precision,
//! Joe–Kuo direction numbers for the first 64 dimensions).
//!
//! Conventions, fixed once and relied on for reproducibility everywhere:
//!
//! * point index 0 is the origin and is **skipped** by all samplers — streams
//!   enumerate indices 1, 2, 3, ...;
//! * a generator created with a *dimension offset* `o` produces the
//!   coordinates `o, o+1, ...` of the underlying global sequence, so two
//!   streams with disjoint dimension ranges never share coordinates (the
//!   leading-term and correction-term node sets use offsets 0 and 2d);
//! * skip-ahead to any index is O(log index) via the Gray-code XOR form.

use crate::error::{Error, Result};

const BITS: usize = 32;

/// Largest supported coordinate index of the global sequence.
pub const MAX_DIMENSION: usize = 64;

/// Direction numbers (already shifted to 32-bit integers) for one coordinate.
type Directions = [u32; BITS];

/// Joe–Kuo primitive-polynomial table, dimensions 2..=64 (dimension 1 is the
/// van der Corput sequence and needs no table entry). Format per line:
/// `d s a m_1 ... m_s`.
const DIRECTION_TABLE: &str = include_str!("../data/new-joe-kuo-6.64.txt");

fn parse_table() -> Vec<(u32, u32, Vec<u32>)> {
    let mut rows = Vec::with_capacity(MAX_DIMENSION - 1);
    for line in DIRECTION_TABLE.lines().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<u32> = line
            .split_whitespace()
            .map(|t| t.parse().expect("direction table: integer fields"))
            .collect();
        let (s, a) = (fields[1], fields[2]);
        let m = fields[3..].to_vec();
        assert_eq!(m.len(), s as usize, "direction table: row length");
        rows.push((s, a, m));
    }
    rows
}

/// Direction numbers for global coordinate `dim` (0-based).
fn directions_for(dim: usize, table: &[(u32, u32, Vec<u32>)]) -> Directions {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (31 - k);
        }
        return v;
    }
    let (s, a, m) = &table[dim - 1];
    let s = *s as usize;
    for k in 0..s.min(BITS) {
        v[k] = m[k] << (31 - k);
    }
    for k in s..BITS {
        // Recurrence: v_k = v_{k-s} ⊕ (v_{k-s} >> s) ⊕ Σ a_j v_{k-j}.
        let mut val = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                val ^= v[k - j];
            }
        }
        v[k] = val;
    }
    v
}

/// Generator for a contiguous block of coordinates of the global Sobol
/// sequence, with random access by point index.
#[derive(Debug, Clone)]
pub struct SobolGenerator {
    dims: usize,
    offset: usize,
    v: Vec<Directions>,
}

impl SobolGenerator {
    /// Coordinates `0..dims` of the global sequence.
    pub fn new(dims: usize) -> Result<Self> {
        Self::with_dimension_offset(dims, 0)
    }

    /// Coordinates `offset..offset+dims` of the global sequence.
    pub fn with_dimension_offset(dims: usize, offset: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidInput("sobol: dims must be positive".into()));
        }
        if offset + dims > MAX_DIMENSION {
            return Err(Error::InvalidInput(format!(
                "sobol: coordinates {}..{} exceed the {MAX_DIMENSION}-dimension table",
                offset,
                offset + dims
            )));
        }
        let table = parse_table();
        let v = (offset..offset + dims)
            .map(|d| directions_for(d, &table))
            .collect();
        Ok(Self { dims, offset, v })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn dimension_offset(&self) -> usize {
        self.offset
    }

    /// Raw 32-bit integer coordinate `j` of point `index`.
    #[inline]
    fn coord_u32(&self, index: u64, j: usize) -> u32 {
        debug_assert!(index < 1 << 32, "sobol index beyond 32-bit range");
        let mut g = (index ^ (index >> 1)) as u32; // Gray code
        let mut x = 0u32;
        let mut b = 0;
        while g != 0 {
            if g & 1 == 1 {
                x ^= self.v[j][b];
            }
            g >>= 1;
            b += 1;
        }
        x
    }

    /// Point `index` of the sequence written into `out` (length `dims`).
    /// Index 0 is the origin; samplers start at index 1, where every
    /// coordinate lies strictly inside (0, 1).
    pub fn point_into(&self, index: u64, out: &mut [f64]) {
        assert_eq!(out.len(), self.dims);
        const SCALE: f64 = 1.0 / (1u64 << 32) as f64;
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.coord_u32(index, j) as f64 * SCALE;
        }
    }

    pub fn point(&self, index: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.dims];
        self.point_into(index, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_coordinate_is_van_der_corput() {
        let g = SobolGenerator::new(1).unwrap();
        assert_eq!(g.point(1), vec![0.5]);
        assert_eq!(g.point(2), vec![0.75]);
        assert_eq!(g.point(3), vec![0.25]);
        assert_eq!(g.point(4), vec![0.375]);
        assert_eq!(g.point(0), vec![0.0]); // origin, skipped by samplers
    }

    #[test]
    fn known_points_dimension_two() {
        // Dimension 2 uses s=1, a=0, m=(1): classic Sobol pairs.
        let g = SobolGenerator::new(2).unwrap();
        assert_eq!(g.point(1), vec![0.5, 0.5]);
        assert_eq!(g.point(2), vec![0.75, 0.25]);
        assert_eq!(g.point(3), vec![0.25, 0.75]);
    }

    #[test]
    fn skip_ahead_frozen_values() {
        // Random access deep into the stream; values frozen from an
        // independent implementation of the same direction-number table.
        let g = SobolGenerator::new(6).unwrap();
        let p = g.point(1_048_576);
        let expect = [
            1.430511474609375e-6,
            0.46875715255737305,
            0.679572582244873,
            0.8334460258483887,
            0.6472315788269043,
            0.8886866569519043,
        ];
        for (a, b) in p.iter().zip(expect) {
            assert_eq!(*a, b);
        }
        let p = g.point(1_048_577);
        let expect = [
            0.5000014305114746,
            0.968757152557373,
            0.17957258224487305,
            0.33344602584838867,
            0.1472315788269043,
            0.3886866569519043,
        ];
        for (a, b) in p.iter().zip(expect) {
            assert_eq!(*a, b);
        }
    }

    #[test]
    fn dimension_offset_reproduces_global_coordinates() {
        let full = SobolGenerator::new(12).unwrap();
        let tail = SobolGenerator::with_dimension_offset(6, 6).unwrap();
        for idx in [1u64, 2, 3, 17, 1000, 65537] {
            let a = full.point(idx);
            let b = tail.point(idx);
            assert_eq!(&a[6..], &b[..]);
        }
    }

    #[test]
    fn aligned_blocks_are_exactly_equidistributed() {
        // For every aligned block [j·2^m, (j+1)·2^m) each dyadic interval of
        // width 2^{-k}, k ≤ m, receives exactly 2^{m-k} points — the defining
        // one-dimensional net property of the construction.
        let g = SobolGenerator::new(8).unwrap();
        for m in [3u32, 4, 5] {
            let n = 1u64 << m;
            for j in [1u64, 2, 3] {
                for dim in 0..8 {
                    for k in 1..=m {
                        let bins = 1usize << k;
                        let mut counts = vec![0usize; bins];
                        for i in j * n..(j + 1) * n {
                            let u = g.point(i)[dim];
                            counts[(u * bins as f64) as usize] += 1;
                        }
                        let ideal = (n >> k) as usize;
                        assert!(
                            counts.iter().all(|&c| c == ideal),
                            "m={m} j={j} dim={dim} k={k}: {counts:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn leading_block_from_one_deviates_by_at_most_one_point() {
        // Indices 1..2^m are the aligned block [0, 2^m) with the origin
        // removed and the single point 2^m added, so dyadic counts at k ≤ m
        // are off by at most one from ideal. (They are *not* exactly ideal in
        // general — the swapped-in point need not land in the origin's bin.)
        let g = SobolGenerator::new(8).unwrap();
        for m in [3u32, 4, 5, 6] {
            let n = 1u64 << m;
            for dim in 0..8 {
                for k in 1..=m {
                    let bins = 1usize << k;
                    let mut counts = vec![0i64; bins];
                    for i in 1..=n {
                        let u = g.point(i)[dim];
                        counts[(u * bins as f64) as usize] += 1;
                    }
                    let ideal = (n >> k) as i64;
                    let dev = counts.iter().map(|c| (c - ideal).abs()).max().unwrap();
                    assert!(dev <= 1, "m={m} dim={dim} k={k}: {counts:?}");
                }
            }
        }
    }

    #[test]
    fn all_supported_dimensions_construct_and_fill() {
        let g = SobolGenerator::new(MAX_DIMENSION).unwrap();
        let p = g.point(123_456);
        assert!(p.iter().all(|&u| (0.0..1.0).contains(&u)));
        assert!(SobolGenerator::new(MAX_DIMENSION + 1).is_err());
        assert!(SobolGenerator::with_dimension_offset(4, 61).is_err());
        assert!(SobolGenerator::with_dimension_offset(4, 60).is_ok());
    }

    #[test]
    fn points_after_index_zero_avoid_boundaries() {
        let g = SobolGenerator::new(16).unwrap();
        for idx in 1..200u64 {
            for &u in &g.point(idx) {
                assert!(u > 0.0 && u < 1.0, "index {idx}: coordinate {u}");
            }
        }
    }
}
