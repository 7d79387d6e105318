//! Binary PGM (P5) rendering of segment ids.

use crate::format::Solution;

/// Gray level of 0-based segment `z` among `j`: `(z + 1)·255/j`, rounded
/// half up.
pub fn gray(z: usize, j: usize) -> u8 {
    let num = 2 * (z + 1) * 255 + j;
    (num / (2 * j)) as u8
}

/// `None` when the solution has no grid header or the grid does not match
/// the node count.
pub fn render_pgm(sol: &Solution) -> Option<Vec<u8>> {
    let (h, w) = sol.grid?;
    if h * w != sol.num_nodes() || sol.num_segments() == 0 {
        return None;
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(sol.segments.iter().map(|&z| gray(z, sol.num_segments())));
    Some(out)
}
