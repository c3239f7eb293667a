use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::ImageBuffer;
use crate::error::{check_len, Error, Result};
use crate::linalg::LinearOperator;

/// Recorded in run metadata so noisy inputs can be regenerated bit for bit.
pub const GAUSSIAN_ALGORITHM: &str = "ChaCha8 stream, ziggurat standard normal (rand_distr 0.4)";

/// `img + std * N(0, 1)` i.i.d. Values are not clipped.
pub fn add_gaussian_noise(img: &ImageBuffer, std: f64, seed: u64) -> Result<ImageBuffer> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::param(
            "std",
            format!("must be finite and non-negative, got {std}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data
        .iter()
        .map(|&v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + std * e
        })
        .collect();
    Ok(ImageBuffer {
        n1: img.n1,
        n2: img.n2,
        data,
    })
}

/// Emission measurements `b = counts + c`, both in measurement space.
#[derive(Clone, Debug, PartialEq)]
pub struct PetData {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// `b_j ~ Poisson((T x)_j) + c_j`. The background defaults to all ones and
/// must be strictly positive, which keeps `b > 0` without a floor.
pub fn poisson_measurements(
    x: &ImageBuffer,
    radon: &dyn LinearOperator,
    c: Option<Vec<f64>>,
    seed: u64,
) -> Result<PetData> {
    check_len(radon.domain_dim(), x.data.len())?;
    let m = radon.codomain_dim();
    let c = c.unwrap_or_else(|| vec![1.0; m]);
    check_len(m, c.len())?;
    if c.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::param("c", "background must be strictly positive"));
    }
    let mut rates = vec![0.0; m];
    radon.apply_into(&x.data, &mut rates);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Vec::with_capacity(m);
    for (j, (&r, &cj)) in rates.iter().zip(&c).enumerate() {
        // tiny negative rates are round-off from exact zeros
        let r = if r < 0.0 && r > -1e-9 { 0.0 } else { r };
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::param(
                "x",
                format!("negative Poisson rate {r} at measurement {j}"),
            ));
        }
        let k = if r == 0.0 {
            0.0
        } else {
            Poisson::new(r)
                .expect("positive finite rate")
                .sample(&mut rng)
        };
        b.push(k + cj);
    }
    Ok(PetData { b, c })
}

/// Modified Shepp-Logan table: intensity, semi-axes a (horizontal) and b
/// (vertical), centre, rotation in degrees.
pub const SHEPP_LOGAN_ELLIPSES: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// Phantom on `[-1, 1]^2` sampled at pixel midpoints, scaled to `[0, 255]`.
pub fn shepp_logan(n1: usize, n2: usize) -> Result<ImageBuffer> {
    if n1 < 16 || n2 < 16 {
        return Err(Error::param(
            "n",
            format!("phantom needs at least 16x16 pixels, got {n1}x{n2}"),
        ));
    }
    let mut data = vec![0.0; n1 * n2];
    for r in 0..n1 {
        let y = 1.0 - (2 * r + 1) as f64 / n1 as f64;
        for c in 0..n2 {
            let x = (2 * c + 1) as f64 / n2 as f64 - 1.0;
            let mut v = 0.0;
            for &[amp, a, b, x0, y0, deg] in &SHEPP_LOGAN_ELLIPSES {
                let (s, co) = deg.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = dx * co + dy * s;
                let w = -dx * s + dy * co;
                if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
                    v += amp;
                }
            }
            // overlapping ellipses leave values in [0, 1] up to round-off
            data[r * n2 + c] = (255.0 * v).clamp(0.0, 255.0);
        }
    }
    Ok(ImageBuffer { n1, n2, data })
}

/// Block-average pooling by an integer factor.
pub fn downsample(img: &ImageBuffer, factor: usize) -> Result<ImageBuffer> {
    if factor == 0 || !img.n1.is_multiple_of(factor) || !img.n2.is_multiple_of(factor) {
        return Err(Error::param(
            "factor",
            format!(
                "{factor} does not divide the image size {}x{}",
                img.n1, img.n2
            ),
        ));
    }
    let (m1, m2) = (img.n1 / factor, img.n2 / factor);
    let mut data = vec![0.0; m1 * m2];
    for r in 0..img.n1 {
        for c in 0..img.n2 {
            data[(r / factor) * m2 + c / factor] += img.data[r * img.n2 + c];
        }
    }
    let inv = 1.0 / (factor * factor) as f64;
    data.iter_mut().for_each(|v| *v *= inv);
    Ok(ImageBuffer {
        n1: m1,
        n2: m2,
        data,
    })
}
