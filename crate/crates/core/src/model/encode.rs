use crate::error::{Error, Result};
use crate::render::DepthImage;

use super::Tensor;

pub const DEFAULT_NEAR: f64 = 0.4;
pub const DEFAULT_FAR: f64 = 1.4;

const JET_KNOTS: [(f64, [f64; 3]); 6] = [
    (0.0, [0.0, 0.0, 0.5]),
    (0.125, [0.0, 0.0, 1.0]),
    (0.375, [0.0, 1.0, 1.0]),
    (0.625, [1.0, 1.0, 0.0]),
    (0.875, [1.0, 0.0, 0.0]),
    (1.0, [0.5, 0.0, 0.0]),
];

/// Piecewise-linear jet colormap; `t` is clamped to [0, 1].
pub fn jet(t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0);
    for pair in JET_KNOTS.windows(2) {
        let (t0, c0) = pair[0];
        let (t1, c1) = pair[1];
        if t <= t1 {
            let s = (t - t0) / (t1 - t0);
            return std::array::from_fn(|k| c0[k] + s * (c1[k] - c0[k]));
        }
    }
    JET_KNOTS[5].1
}

/// Jet-colored depth: depths are clamped to `[near, far]` and normalized;
/// missing returns are treated as `far`.
pub fn encode_input(depth: &DepthImage, near: f64, far: f64) -> Result<Tensor> {
    if !(near.is_finite() && far.is_finite() && near < far) {
        return Err(Error::InvalidArgument(format!("normalization window [{near}, {far}]")));
    }
    let (w, h) = (depth.width as usize, depth.height as usize);
    let mut out = Tensor::zeros(3, h, w);
    let n = w * h;
    for (i, &z) in depth.data.iter().enumerate() {
        let z = if z > 0.0 { z as f64 } else { far };
        let t = (z.clamp(near, far) - near) / (far - near);
        let rgb = jet(t);
        for (c, value) in rgb.into_iter().enumerate() {
            out.data[c * n + i] = value;
        }
    }
    Ok(out)
}
