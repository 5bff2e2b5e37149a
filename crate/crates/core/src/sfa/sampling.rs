use crate::cube::{Cube, Plane};
use crate::error::{Error, Result};
use crate::real::Real;

use super::SfaPattern;

/// Y(h,w) = X(layout[h mod r1, w mod r2], h, w).
pub fn mosaic_sample<T: Real>(cube: &Cube<T>, pattern: &SfaPattern) -> Result<Plane<T>> {
    if cube.bands() != pattern.bands() {
        return Err(Error::BandMismatch { expected: pattern.bands(), found: cube.bands() });
    }
    let (height, width) = (cube.height(), cube.width());
    Ok(Plane::from_fn(height, width, |h, w| cube.get(pattern.band_at(h, w), h, w)))
}

/// Binary sampling mask M: band b is 1 exactly where the pattern samples b.
pub fn mask_of<T: Real>(pattern: &SfaPattern, height: usize, width: usize) -> Cube<T> {
    Cube::from_fn(pattern.bands(), height, width, |b, h, w| {
        if pattern.band_at(h, w) == b {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Places each mosaic value in its own band, zeros elsewhere. This is
/// also the adjoint of [`mosaic_sample`].
pub fn sparse_expand<T: Real>(mosaic: &Plane<T>, pattern: &SfaPattern) -> Cube<T> {
    let (height, width) = mosaic.dims();
    let mut cube = Cube::zeros(pattern.bands(), height, width);
    for h in 0..height {
        for w in 0..width {
            cube.set(pattern.band_at(h, w), h, w, mosaic.get(h, w));
        }
    }
    cube
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pat2() -> SfaPattern {
        SfaPattern::new(2, 2, 4, vec![0, 1, 2, 3]).unwrap()
    }

    #[test]
    fn constant_cube_gives_constant_mosaic() {
        let cube = Cube::<f64>::filled(4, 6, 6, 0.3);
        let y = mosaic_sample(&cube, &pat2()).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn band_index_cube_tiles_the_layout() {
        let cube = Cube::<f64>::from_fn(4, 4, 4, |b, _, _| b as f64);
        let y = mosaic_sample(&cube, &pat2()).unwrap();
        let want = [0., 1., 0., 1., 2., 3., 2., 3., 0., 1., 0., 1., 2., 3., 2., 3.];
        assert_eq!(y.as_slice(), &want);
    }

    #[test]
    fn band_mismatch_rejected() {
        let cube = Cube::<f64>::zeros(3, 4, 4);
        assert!(matches!(mosaic_sample(&cube, &pat2()), Err(Error::BandMismatch { expected: 4, found: 3 })));
    }

    #[test]
    fn degenerate_and_single_period_masks() {
        let m = mask_of::<f64>(&SfaPattern::row_major(1, 1), 3, 2);
        assert_eq!(m.dims(), (1, 3, 2));
        assert!(m.as_slice().iter().all(|&v| v == 1.0));

        let m = mask_of::<f64>(&pat2(), 2, 2);
        for b in 0..4 {
            let hot: Vec<f64> = (0..4).map(|i| if i == b { 1.0 } else { 0.0 }).collect();
            assert_eq!(m.band(b), hot.as_slice());
        }
    }

    #[test]
    fn sparse_expand_of_constant_and_zero() {
        let y = Plane::<f64>::filled(4, 4, 0.7);
        let c = sparse_expand(&y, &pat2());
        for b in 0..4 {
            for h in 0..4 {
                for w in 0..4 {
                    let want = if pat2().band_at(h, w) == b { 0.7 } else { 0.0 };
                    assert_eq!(c.get(b, h, w), want);
                }
            }
        }
        let z = sparse_expand(&Plane::<f64>::zeros(4, 4), &pat2());
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
    }

    proptest! {
        #[test]
        fn sample_matches_loop_oracle(seed in 0u64..1000, h in 1usize..9, w in 1usize..9) {
            let p = SfaPattern::new(2, 2, 4, vec![3, 1, 0, 2]).unwrap();
            let cube = Cube::<f64>::from_fn(4, h, w, |b, i, j| ((seed as usize * 31 + b * 7 + i * 13 + j * 17) % 97) as f64 / 97.0);
            let y = mosaic_sample(&cube, &p).unwrap();
            let mask = mask_of::<f64>(&p, h, w);
            for i in 0..h {
                for j in 0..w {
                    let mut acc = 0.0;
                    for b in 0..4 {
                        acc += cube.get(b, i, j) * mask.get(b, i, j);
                    }
                    prop_assert_eq!(y.get(i, j), acc);
                }
            }
        }

        #[test]
        fn masks_partition_unity(r1 in 1usize..5, r2 in 1usize..5, h in 1usize..12, w in 1usize..12) {
            let p = SfaPattern::row_major(r1, r2);
            let m = mask_of::<f64>(&p, h, w);
            for i in 0..h {
                for j in 0..w {
                    let s: f64 = (0..p.bands()).map(|b| m.get(b, i, j)).sum();
                    prop_assert_eq!(s, 1.0);
                }
            }
        }

        #[test]
        fn expand_then_sample_is_identity(vals in proptest::collection::vec(-1.0f64..1.0, 36)) {
            let p = SfaPattern::row_major(3, 2);
            let y = Plane::from_vec(6, 6, vals).unwrap();
            prop_assert_eq!(mosaic_sample(&sparse_expand(&y, &p), &p).unwrap(), y);
        }
    }
}
