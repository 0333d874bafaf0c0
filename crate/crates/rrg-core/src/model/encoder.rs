//! Frozen patch encoder: tile the image into n_p square patches and apply a
//! fixed seeded random projection per patch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::GrayImage;
use crate::error::{CoreError, Result};
use crate::numkit::Array;

use super::config::ModelConfig;
use super::init::init_matrix;

/// Side length of the patch grid; n_p must be a perfect square.
fn patch_grid(n_p: usize) -> Result<usize> {
    let g = (n_p as f64).sqrt().round() as usize;
    if g * g != n_p {
        return Err(CoreError::InvalidArgument(format!(
            "n_p {n_p} is not a perfect square"
        )));
    }
    Ok(g)
}

/// The frozen projection applied to every flattened patch.
pub fn make_patch_projection(config: &ModelConfig, image_size: usize) -> Result<Array> {
    let g = patch_grid(config.n_p)?;
    if image_size % g != 0 {
        return Err(CoreError::InvalidArgument(format!(
            "image size {image_size} not divisible into a {g}x{g} patch grid"
        )));
    }
    let patch = image_size / g;
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed ^ 0x70617463685f656e);
    Ok(init_matrix(&mut rng, patch * patch, config.d_v))
}

/// Encodes a normalised image to n_p x d_v features using `projection`
/// (from `make_patch_projection`). Pixels are scaled to [0,1] first.
pub fn encode_patches(
    image: &GrayImage,
    config: &ModelConfig,
    projection: &Array,
) -> Result<Array> {
    if image.width != image.height {
        return Err(CoreError::InvalidArgument(
            "patch encoder expects square images".into(),
        ));
    }
    let g = patch_grid(config.n_p)?;
    if image.width % g != 0 {
        return Err(CoreError::InvalidArgument(format!(
            "image size {} not divisible into a {g}x{g} patch grid",
            image.width
        )));
    }
    let patch = image.width / g;
    if projection.rows() != patch * patch || projection.cols() != config.d_v {
        return Err(CoreError::Shape("patch projection shape mismatch".into()));
    }
    let mut out = vec![0.0; config.n_p * config.d_v];
    for py in 0..g {
        for px in 0..g {
            let p = py * g + px;
            let mut flat = Vec::with_capacity(patch * patch);
            for y in 0..patch {
                for x in 0..patch {
                    flat.push(image.at(px * patch + x, py * patch + y) as f64 / 255.0);
                }
            }
            for c in 0..config.d_v {
                let mut acc = 0.0;
                for (i, &v) in flat.iter().enumerate() {
                    acc += v * projection.at(i, c);
                }
                out[p * config.d_v + c] = acc;
            }
        }
    }
    Array::new(vec![config.n_p, config.d_v], out)
}
