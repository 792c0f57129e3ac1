//! A desk-scale digit surrogate: 8x8 glyphs with pixel noise and
//! one-pixel jitter. Ten classes, 64 features in [0, 1], linearly
//! separable enough for a logistic model yet noisy enough that label
//! skew shows up in client updates.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::numkit::{DenseMatrix, RngStream};

const GLYPHS: [[&str; 8]; 10] = [
    [
        "..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.",
        "..####..",
    ],
    [
        "...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "...##...",
        "..####..",
    ],
    [
        "..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....",
        ".######.",
    ],
    [
        "..####..", ".#....#.", "......#.", "...###..", "......#.", "......#.", ".#....#.",
        "..####..",
    ],
    [
        "....##..", "...#.#..", "..#..#..", ".#...#..", ".######.", ".....#..", ".....#..",
        ".....#..",
    ],
    [
        ".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.",
        "..####..",
    ],
    [
        "..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.",
        "..####..",
    ],
    [
        ".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....",
        "...#....",
    ],
    [
        "..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.",
        "..####..",
    ],
    [
        "..####..", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", "......#.",
        "..####..",
    ],
];

const SIDE: usize = 8;
pub const DIGITS_INPUT_DIM: usize = SIDE * SIDE;
pub const DIGITS_NUM_CLASSES: usize = 10;

fn glyph(class: usize) -> [f64; DIGITS_INPUT_DIM] {
    let mut g = [0.0; DIGITS_INPUT_DIM];
    for (r, row) in GLYPHS[class].iter().enumerate() {
        for (c, ch) in row.bytes().enumerate() {
            g[r * SIDE + c] = if ch == b'#' { 1.0 } else { 0.0 };
        }
    }
    g
}

/// Generate a balanced pool of noisy digit images.
///
/// Sample i carries class `i % 10`; features are the class glyph
/// shifted by up to one pixel in each direction plus Gaussian pixel
/// noise, clamped to [0, 1].
pub fn digits_pool(n_samples: usize, rng: &mut RngStream) -> (DenseMatrix, Vec<usize>) {
    let noise = Normal::new(0.0, 0.15).expect("fixed std");
    let glyphs: Vec<[f64; DIGITS_INPUT_DIM]> = (0..DIGITS_NUM_CLASSES).map(glyph).collect();
    let mut features = DenseMatrix::zeros(n_samples, DIGITS_INPUT_DIM);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let class = i % DIGITS_NUM_CLASSES;
        labels.push(class);
        let dx: i64 = rng.random_range(-1..=1);
        let dy: i64 = rng.random_range(-1..=1);
        let row = features.row_mut(i);
        for r in 0..SIDE {
            for c in 0..SIDE {
                let sr = r as i64 - dy;
                let sc = c as i64 - dx;
                let base = if (0..SIDE as i64).contains(&sr) && (0..SIDE as i64).contains(&sc) {
                    glyphs[class][sr as usize * SIDE + sc as usize]
                } else {
                    0.0
                };
                let v = 0.9 * base + noise.sample(rng);
                row[r * SIDE + c] = v.clamp(0.0, 1.0);
            }
        }
    }
    (features, labels)
}
