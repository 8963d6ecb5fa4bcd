//! Exhaustive block matching, motion-compensated prediction and residuals.

use super::frame::{Frame, MotionVectorField, ResidualFrame};
use super::CodecError;

fn sad(prev: &Frame, cur: &Frame, y0: usize, x0: usize, sy: usize, sx: usize, bs: usize) -> u32 {
    let w = prev.width();
    let (p, c) = (prev.samples(), cur.samples());
    let mut total = 0u32;
    for r in 0..bs {
        let prow = &p[(sy + r) * w + sx..(sy + r) * w + sx + bs];
        let crow = &c[(y0 + r) * w + x0..(y0 + r) * w + x0 + bs];
        total += prow
            .iter()
            .zip(crow)
            .map(|(&a, &b)| u32::from(a.abs_diff(b)))
            .sum::<u32>();
    }
    total
}

/// Full-search block matching of `cur` against `prev`.
///
/// For each block the window is `[-radius, radius]^2` clamped so the source
/// block stays inside `prev`. The displacement with the lowest sum of
/// absolute differences wins; `(0, 0)` wins any tie it takes part in, other
/// ties go to the lexicographically smallest `(dy, dx)`.
pub fn estimate_motion(
    prev: &Frame,
    cur: &Frame,
    block_size: usize,
    search_radius: usize,
) -> Result<MotionVectorField, CodecError> {
    if !prev.same_dims(cur) {
        return Err(CodecError::InvalidInput("frame dimensions differ".into()));
    }
    if search_radius > i8::MAX as usize {
        return Err(CodecError::InvalidInput(format!(
            "search radius {search_radius} exceeds {}",
            i8::MAX
        )));
    }
    prev.check_blocks(block_size)?;
    let rows = prev.height() / block_size;
    let cols = prev.width() / block_size;
    let r = search_radius as isize;
    let mut vectors = Vec::with_capacity(rows * cols);
    for by in 0..rows {
        for bx in 0..cols {
            let y0 = by * block_size;
            let x0 = bx * block_size;
            let dy_lo = (-r).max(-(y0 as isize));
            let dy_hi = r.min((prev.height() - block_size - y0) as isize);
            let dx_lo = (-r).max(-(x0 as isize));
            let dx_hi = r.min((prev.width() - block_size - x0) as isize);

            let mut best = (0i8, 0i8);
            let mut best_sad = sad(prev, cur, y0, x0, y0, x0, block_size);
            for dy in dy_lo..=dy_hi {
                for dx in dx_lo..=dx_hi {
                    if best_sad == 0 {
                        break;
                    }
                    let s = sad(
                        prev,
                        cur,
                        y0,
                        x0,
                        (y0 as isize + dy) as usize,
                        (x0 as isize + dx) as usize,
                        block_size,
                    );
                    if s < best_sad {
                        best_sad = s;
                        best = (dy as i8, dx as i8);
                    }
                }
            }
            vectors.push(best);
        }
    }
    MotionVectorField::new(block_size, rows, cols, vectors)
}

/// Translates each block of `prev` by its vector. Reads outside the frame
/// are clamped to the nearest edge sample.
pub fn predict(prev: &Frame, mv: &MotionVectorField) -> Result<Frame, CodecError> {
    if !mv.matches(prev) {
        return Err(CodecError::InvalidInput(format!(
            "{}x{} vector grid of block {} does not cover {}x{}",
            mv.rows(),
            mv.cols(),
            mv.block_size(),
            prev.width(),
            prev.height()
        )));
    }
    let bs = mv.block_size();
    let w = prev.width();
    let mut out = vec![0u8; w * prev.height()];
    for by in 0..mv.rows() {
        for bx in 0..mv.cols() {
            let (dy, dx) = mv.get(by, bx);
            for r in 0..bs {
                let y = by * bs + r;
                for c in 0..bs {
                    let x = bx * bs + c;
                    out[y * w + x] =
                        prev.at_clamped(y as isize + isize::from(dy), x as isize + isize::from(dx));
                }
            }
        }
    }
    Frame::new(w, prev.height(), out)
}

/// Element-wise `cur - predicted`.
pub fn residual(cur: &Frame, predicted: &Frame) -> Result<ResidualFrame, CodecError> {
    if !cur.same_dims(predicted) {
        return Err(CodecError::InvalidInput("frame dimensions differ".into()));
    }
    let values = cur
        .samples()
        .iter()
        .zip(predicted.samples())
        .map(|(&a, &b)| i16::from(a) - i16::from(b))
        .collect();
    ResidualFrame::new(cur.width(), cur.height(), values)
}

/// `clamp(predicted + residual, 0, 255)`.
pub fn reconstruct(predicted: &Frame, r: &ResidualFrame) -> Result<Frame, CodecError> {
    if predicted.width() != r.width() || predicted.height() != r.height() {
        return Err(CodecError::InvalidInput("residual dimensions differ".into()));
    }
    let samples = predicted
        .samples()
        .iter()
        .zip(r.values())
        .map(|(&p, &v)| (i16::from(p) + v).clamp(0, 255) as u8)
        .collect();
    Frame::new(predicted.width(), predicted.height(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn noise_frame(w: usize, h: usize, seed: u64) -> Frame {
        let mut g = SplitMix64::new(seed);
        Frame::new(w, h, (0..w * h).map(|_| g.next_u64() as u8).collect()).unwrap()
    }

    /// Plain full search with the documented tie rule, written against the
    /// window definition rather than the production loop.
    fn oracle_vector(prev: &Frame, cur: &Frame, by: usize, bx: usize, bs: usize, r: isize) -> (i8, i8) {
        let cost = |dy: isize, dx: isize| -> Option<u32> {
            let sy = (by * bs) as isize + dy;
            let sx = (bx * bs) as isize + dx;
            if sy < 0 || sx < 0 || sy + bs as isize > prev.height() as isize || sx + bs as isize > prev.width() as isize {
                return None;
            }
            let mut t = 0u32;
            for i in 0..bs {
                for j in 0..bs {
                    let a = prev.at(sy as usize + i, sx as usize + j);
                    let b = cur.at(by * bs + i, bx * bs + j);
                    t += u32::from(a.abs_diff(b));
                }
            }
            Some(t)
        };
        let mut candidates: Vec<(u32, isize, isize)> = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if let Some(c) = cost(dy, dx) {
                    candidates.push((c, dy, dx));
                }
            }
        }
        let min = candidates.iter().map(|c| c.0).min().unwrap();
        if cost(0, 0) == Some(min) {
            return (0, 0);
        }
        let (_, dy, dx) = candidates.into_iter().filter(|c| c.0 == min).min_by_key(|c| (c.1, c.2)).unwrap();
        (dy as i8, dx as i8)
    }

    #[test]
    fn identical_frames_give_zero_field() {
        let f = noise_frame(32, 24, 1);
        let mv = estimate_motion(&f, &f, 8, 7).unwrap();
        assert!(mv.is_zero());
        assert_eq!((mv.rows(), mv.cols()), (3, 4));
        assert_eq!(predict(&f, &mv).unwrap(), f);
    }

    #[test]
    fn constant_frames_tie_to_zero() {
        let a = Frame::filled(16, 16, 10).unwrap();
        let b = Frame::filled(16, 16, 200).unwrap();
        assert!(estimate_motion(&a, &b, 8, 7).unwrap().is_zero());
    }

    #[test]
    fn one_pixel_pan_is_found() {
        // The view pans right by one column: cur(y, x) = prev(y, x + 1),
        // with the last column replicated.
        let prev = noise_frame(64, 64, 3);
        let cur = Frame::from_fn(64, 64, |y, x| prev.at(y, (x + 1).min(63))).unwrap();
        let mv = estimate_motion(&prev, &cur, 8, 7).unwrap();
        for by in 0..8 {
            for bx in 0..7 {
                assert_eq!(mv.get(by, bx), (0, 1), "block ({by},{bx})");
                assert_eq!(mv.get(by, bx), oracle_vector(&prev, &cur, by, bx, 8, 7));
            }
        }
    }

    #[test]
    fn matches_full_search_oracle_on_noise() {
        for seed in 0..4 {
            let prev = noise_frame(32, 32, seed);
            let mut g = SplitMix64::new(seed + 100);
            // Perturb a shifted copy so SAD minima are not all zero.
            let cur = Frame::from_fn(32, 32, |y, x| {
                prev.at_clamped(y as isize - 2, x as isize + 3)
            })
            .unwrap();
            let cur = Frame::new(
                32,
                32,
                cur.samples().iter().map(|&s| s.wrapping_add((g.next_u64() % 3) as u8)).collect(),
            )
            .unwrap();
            let mv = estimate_motion(&prev, &cur, 8, 7).unwrap();
            for by in 0..4 {
                for bx in 0..4 {
                    assert_eq!(mv.get(by, bx), oracle_vector(&prev, &cur, by, bx, 8, 7));
                }
            }
        }
    }

    #[test]
    fn predict_single_block_with_edge_clamp() {
        let prev = Frame::from_fn(8, 8, |y, x| (y * 8 + x) as u8).unwrap();
        let mv = MotionVectorField::new(8, 1, 1, vec![(0, 1)]).unwrap();
        let out = predict(&prev, &mv).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(out.at(y, x), prev.at(y, (x + 1).min(7)));
            }
        }
    }

    #[test]
    fn residual_examples() {
        let a = Frame::filled(8, 8, 255).unwrap();
        let z = Frame::filled(8, 8, 0).unwrap();
        assert!(residual(&a, &a).unwrap().values().iter().all(|&v| v == 0));
        assert!(residual(&a, &z).unwrap().values().iter().all(|&v| v == 255));
        let p = noise_frame(8, 8, 9);
        let q = noise_frame(8, 8, 10);
        let r = residual(&p, &q).unwrap();
        for i in 0..64 {
            assert_eq!(i32::from(r.values()[i]), i32::from(p.samples()[i]) - i32::from(q.samples()[i]));
        }
        assert_eq!(reconstruct(&q, &r).unwrap(), p);
    }

    #[test]
    fn errors_on_mismatch() {
        let a = Frame::filled(16, 16, 0).unwrap();
        let b = Frame::filled(16, 8, 0).unwrap();
        assert!(estimate_motion(&a, &b, 8, 7).is_err());
        assert!(estimate_motion(&a, &a, 5, 7).is_err());
        assert!(residual(&a, &b).is_err());
        let mv = MotionVectorField::zeros(8, 1, 2);
        assert!(predict(&a, &mv).is_err());
    }
}
