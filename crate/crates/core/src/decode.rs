//! Grasp proposals from output tensors: peak selection, reprojection of the
//! anchoring pixel, translation to the tool center point and transformation
//! into the robot base frame.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Pt3, Quat, Vec3};
use crate::model::{Tensor, CONTACT_CHANNELS, TCP_CHANNELS};
use crate::render::{CameraIntrinsics, DepthImage};

/// Which grasp anchoring the output tensor uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Pixels are visible grasp contacts (6 channels).
    #[default]
    Contact,
    /// Pixels are grasp centers with a depth offset channel (7 channels).
    Tcp,
}

impl Representation {
    pub fn channels(self) -> usize {
        match self {
            Representation::Contact => CONTACT_CHANNELS,
            Representation::Tcp => TCP_CHANNELS,
        }
    }
}

impl std::str::FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contact" => Ok(Representation::Contact),
            "tcp" => Ok(Representation::Tcp),
            other => Err(Error::InvalidArgument(format!("unknown representation '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmsParams {
    /// Minimum predicted quality of a proposal.
    pub gamma: f64,
    /// Chebyshev radius of the peak neighborhood and minimum peak spacing.
    pub peak_distance: u32,
    pub max_proposals: usize,
}

impl Default for NmsParams {
    fn default() -> Self {
        NmsParams {
            gamma: 0.4,
            peak_distance: 4,
            max_proposals: 10,
        }
    }
}

/// Greedy peak selection on a row-major quality plane. A pixel qualifies if
/// its value is at least `gamma` and no pixel in its
/// `(2 peak_distance + 1)^2` window is larger. Qualifying pixels are taken
/// in descending value (row-major among ties) while they keep a Chebyshev
/// distance of at least `peak_distance` to every pixel already taken.
pub fn nms_select(plane: &[f64], width: usize, height: usize, params: &NmsParams) -> Vec<(u32, u32)> {
    assert_eq!(plane.len(), width * height, "plane size");
    let pd = params.peak_distance as usize;
    // Separable sliding-window maximum.
    let mut row_max = vec![f64::NEG_INFINITY; plane.len()];
    for v in 0..height {
        for u in 0..width {
            let lo = u.saturating_sub(pd);
            let hi = (u + pd).min(width - 1);
            row_max[v * width + u] = plane[v * width + lo..=v * width + hi]
                .iter()
                .fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        }
    }
    let mut candidates: Vec<usize> = Vec::new();
    for v in 0..height {
        for u in 0..width {
            let i = v * width + u;
            let value = plane[i];
            if value.is_nan() || value < params.gamma {
                continue;
            }
            let lo = v.saturating_sub(pd);
            let hi = (v + pd).min(height - 1);
            let window = (lo..=hi)
                .map(|r| row_max[r * width + u])
                .fold(f64::NEG_INFINITY, f64::max);
            if value >= window {
                candidates.push(i);
            }
        }
    }
    // Stable sort keeps row-major order among equal values.
    candidates.sort_by(|&a, &b| plane[b].total_cmp(&plane[a]));
    let mut kept: Vec<(u32, u32)> = Vec::new();
    for i in candidates {
        if kept.len() >= params.max_proposals {
            break;
        }
        let (u, v) = ((i % width) as i64, (i / width) as i64);
        let spaced = kept
            .iter()
            .all(|&(ku, kv)| (u - ku as i64).abs().max((v - kv as i64).abs()) >= pd as i64);
        if spaced {
            kept.push((u as u32, v as u32));
        }
    }
    kept
}

/// A decoded grasp in the camera frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraGrasp {
    pub rotation: Quat,
    pub tcp: Pt3,
    pub width: f64,
    pub quality: f64,
    pub pixel: (u32, u32),
    /// The predicted width fell outside `[0, max_width]` and was clamped.
    pub width_clamped: bool,
}

fn read_pixel(
    tensor: &Tensor,
    pixel: (u32, u32),
    depth: &DepthImage,
    max_width: f64,
) -> Result<(Quat, f64, f64, bool, f64)> {
    let (u, v) = (pixel.0 as usize, pixel.1 as usize);
    if u >= tensor.width || v >= tensor.height {
        return Err(Error::InvalidArgument(format!("pixel ({u}, {v}) outside the tensor")));
    }
    let z = depth.get(pixel.0, pixel.1) as f64;
    if z <= 0.0 {
        return Err(Error::InvalidArgument(format!("no depth return at pixel ({u}, {v})")));
    }
    let raw = nalgebra::Quaternion::new(
        tensor.at(1, v, u),
        tensor.at(2, v, u),
        tensor.at(3, v, u),
        tensor.at(4, v, u),
    );
    let n = raw.norm();
    if !(n.is_finite() && n > 1e-12) {
        return Err(Error::Degenerate(format!(
            "zero rotation prediction at pixel ({u}, {v})"
        )));
    }
    let rotation = Quat::new_normalize(raw);
    let w = tensor.at(5, v, u);
    let width = w.clamp(0.0, max_width);
    Ok((rotation, width, z, width != w, tensor.at(0, v, u)))
}

fn check_dims(tensor: &Tensor, intrinsics: &CameraIntrinsics, depth: &DepthImage, channels: usize) -> Result<()> {
    let (w, h) = (intrinsics.width as usize, intrinsics.height as usize);
    if tensor.channels != channels || tensor.width != w || tensor.height != h {
        return Err(Error::DimensionMismatch {
            expected: format!("{channels}x{h}x{w}"),
            actual: format!("{}x{}x{}", tensor.channels, tensor.height, tensor.width),
        });
    }
    if depth.width as usize != w || depth.height as usize != h {
        return Err(Error::DimensionMismatch {
            expected: format!("{w}x{h} depth"),
            actual: format!("{}x{} depth", depth.width, depth.height),
        });
    }
    Ok(())
}

/// Contact representation: reproject the contact pixel at its depth and
/// move half the predicted width along the grasp x axis.
pub fn decode_grasp(
    tensor: &Tensor,
    pixel: (u32, u32),
    intrinsics: &CameraIntrinsics,
    depth: &DepthImage,
    max_width: f64,
) -> Result<CameraGrasp> {
    let (rotation, width, z, clamped, quality) = read_pixel(tensor, pixel, depth, max_width)?;
    let contact = intrinsics.backproject(pixel.0 as f64, pixel.1 as f64, z);
    let tcp = contact + (rotation * Vec3::x()) * (0.5 * width);
    Ok(CameraGrasp {
        rotation,
        tcp,
        width,
        quality,
        pixel,
        width_clamped: clamped,
    })
}

/// Grasp-center representation: the center lies `ẑ` behind the visible
/// surface along the pixel's unit viewing ray.
pub fn decode_tcp_variant(
    tensor: &Tensor,
    pixel: (u32, u32),
    intrinsics: &CameraIntrinsics,
    depth: &DepthImage,
    max_width: f64,
) -> Result<CameraGrasp> {
    if tensor.channels < TCP_CHANNELS {
        return Err(Error::DimensionMismatch {
            expected: format!("{TCP_CHANNELS} channels"),
            actual: format!("{} channels", tensor.channels),
        });
    }
    let (rotation, width, z, clamped, quality) = read_pixel(tensor, pixel, depth, max_width)?;
    let (u, v) = (pixel.0 as f64, pixel.1 as f64);
    let surface = intrinsics.backproject(u, v, z);
    let offset = tensor.at(6, pixel.1 as usize, pixel.0 as usize);
    let tcp = surface + intrinsics.ray(u, v).normalize() * offset;
    Ok(CameraGrasp {
        rotation,
        tcp,
        width,
        quality,
        pixel,
        width_clamped: clamped,
    })
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// A grasp in the robot base frame. Serialized as
/// `{tcp_m, r: [w, x, y, z], width_m, quality, pixel: [u, v]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspProposal {
    #[serde(rename = "tcp_m")]
    pub tcp: Pt3,
    #[serde(rename = "r", with = "crate::geometry::serde_wxyz")]
    pub rotation: Quat,
    #[serde(rename = "width_m")]
    pub width: f64,
    pub quality: f64,
    #[serde(rename = "pixel")]
    pub source_pixel: [u32; 2],
    #[serde(default, skip_serializing_if = "is_false")]
    pub width_clamped: bool,
}

impl GraspProposal {
    pub fn approach(&self) -> Vec3 {
        self.rotation * Vec3::z()
    }
}

/// Expresses a camera-frame grasp in the base frame, given the camera pose
/// in that frame.
pub fn to_base_frame(grasp: &CameraGrasp, extrinsics: &Pose) -> GraspProposal {
    GraspProposal {
        tcp: extrinsics * grasp.tcp,
        rotation: extrinsics.rotation * grasp.rotation,
        width: grasp.width,
        quality: grasp.quality,
        source_pixel: [grasp.pixel.0, grasp.pixel.1],
        width_clamped: grasp.width_clamped,
    }
}

/// A selected peak that could not be decoded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedPixel {
    pub pixel: [u32; 2],
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub proposals: Vec<GraspProposal>,
    pub skipped: Vec<SkippedPixel>,
}

/// Peak selection, decoding and base-frame transformation. Proposals are
/// ordered by descending quality.
pub fn propose(
    tensor: &Tensor,
    intrinsics: &CameraIntrinsics,
    depth: &DepthImage,
    extrinsics: &Pose,
    nms: &NmsParams,
    max_width: f64,
    representation: Representation,
) -> Result<DecodeReport> {
    check_dims(tensor, intrinsics, depth, representation.channels())?;
    let peaks = nms_select(tensor.plane(0), tensor.width, tensor.height, nms);
    let mut report = DecodeReport::default();
    for pixel in peaks {
        let decoded = match representation {
            Representation::Contact => decode_grasp(tensor, pixel, intrinsics, depth, max_width),
            Representation::Tcp => decode_tcp_variant(tensor, pixel, intrinsics, depth, max_width),
        };
        match decoded {
            Ok(g) => report.proposals.push(to_base_frame(&g, extrinsics)),
            Err(e) => report.skipped.push(SkippedPixel {
                pixel: [pixel.0, pixel.1],
                reason: e.to_string(),
            }),
        }
    }
    // NMS already yields descending quality; the stable sort only guards it.
    report.proposals.sort_by(|a, b| b.quality.total_cmp(&a.quality));
    Ok(report)
}

pub fn write_proposals(proposals: &[GraspProposal], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_vec_pretty(proposals).expect("proposals serialize");
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_proposals(path: impl AsRef<Path>) -> Result<Vec<GraspProposal>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.column() as u64, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Translation3, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> NmsParams {
        NmsParams::default()
    }

    /// Brute force statement of the selection rules.
    fn nms_oracle(plane: &[f64], w: usize, h: usize, p: &NmsParams) -> Vec<(u32, u32)> {
        let pd = p.peak_distance as i64;
        let mut cands = Vec::new();
        for v in 0..h as i64 {
            for u in 0..w as i64 {
                let x = plane[(v as usize) * w + u as usize];
                if x < p.gamma {
                    continue;
                }
                let mut is_max = true;
                for dv in -pd..=pd {
                    for du in -pd..=pd {
                        let (a, b) = (u + du, v + dv);
                        if a >= 0 && b >= 0 && a < w as i64 && b < h as i64 && plane[b as usize * w + a as usize] > x {
                            is_max = false;
                        }
                    }
                }
                if is_max {
                    cands.push((x, v, u));
                }
            }
        }
        // Descending value; among ties, row-major.
        cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut kept: Vec<(i64, i64)> = Vec::new();
        for (_, v, u) in cands {
            if kept.len() == p.max_proposals {
                break;
            }
            if kept.iter().all(|&(ku, kv)| (u - ku).abs().max((v - kv).abs()) >= pd) {
                kept.push((u, v));
            }
        }
        kept.into_iter().map(|(u, v)| (u as u32, v as u32)).collect()
    }

    #[test]
    fn single_peak() {
        let mut plane = vec![0.01; 100];
        plane[37] = 0.9;
        assert_eq!(nms_select(&plane, 10, 10, &params()), vec![(7, 3)]);
    }

    #[test]
    fn close_peaks_suppressed() {
        let mut plane = vec![0.01; 400];
        plane[5 * 20 + 5] = 0.9;
        plane[5 * 20 + 8] = 0.8;
        assert_eq!(nms_select(&plane, 20, 20, &params()), vec![(5, 5)]);
    }

    #[test]
    fn caps_at_ten_largest() {
        let mut plane = vec![0.0; 60 * 60];
        let mut expected = Vec::new();
        for k in 0..15 {
            let (u, v) = ((k % 5) * 12 + 2, (k / 5) * 12 + 2);
            let q = 0.41 + 0.03 * k as f64;
            plane[v * 60 + u] = q;
            expected.push((q, (u as u32, v as u32)));
        }
        expected.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let got = nms_select(&plane, 60, 60, &params());
        let want: Vec<_> = expected[..10].iter().map(|e| e.1).collect();
        assert_eq!(got, want);
        assert_eq!(got, nms_oracle(&plane, 60, 60, &params()));
    }

    #[test]
    fn matches_brute_force_on_random_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for trial in 0..200 {
            let mut plane: Vec<f64> = (0..64 * 64).map(|_| rng.random::<f64>()).collect();
            if trial % 2 == 0 {
                // Quantized values provoke ties.
                for x in &mut plane {
                    *x = (*x * 8.0).floor() / 8.0;
                }
            }
            let p = NmsParams {
                gamma: rng.random_range(0.1..0.95),
                peak_distance: rng.random_range(1..6),
                max_proposals: rng.random_range(1..30),
            };
            assert_eq!(nms_select(&plane, 64, 64, &p), nms_oracle(&plane, 64, 64, &p));
        }
    }

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 500.0,
            fy: 500.0,
            cx: 10.0,
            cy: 8.0,
            width: 21,
            height: 17,
        }
    }

    fn tensor_at(channels: usize, u: usize, v: usize, r: Quat, w: f64, z: f64) -> Tensor {
        let mut t = Tensor::zeros(channels, 17, 21);
        t.fill_channel(1, 1.0);
        t.set(0, v, u, 0.95);
        let q = r.quaternion();
        for (k, c) in [q.w, q.i, q.j, q.k].into_iter().enumerate() {
            t.set(1 + k, v, u, c);
        }
        t.set(5, v, u, w);
        if channels == 7 {
            t.set(6, v, u, z);
        }
        t
    }

    #[test]
    fn principal_point_decode() {
        let depth = DepthImage::new(21, 17, vec![0.5; 21 * 17]).unwrap();
        let t = tensor_at(6, 10, 8, Quat::identity(), 0.08, 0.0);
        let g = decode_grasp(&t, (10, 8), &intr(), &depth, 0.08).unwrap();
        assert!((g.tcp - Pt3::new(0.04, 0.0, 0.5)).norm() < 1e-15);
        let t = tensor_at(6, 10, 8, Quat::identity(), 0.0, 0.0);
        let g = decode_grasp(&t, (10, 8), &intr(), &depth, 0.08).unwrap();
        assert!((g.tcp - Pt3::new(0.0, 0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn tcp_variant_decode() {
        let depth = DepthImage::new(21, 17, vec![0.5; 21 * 17]).unwrap();
        let t = tensor_at(7, 10, 8, Quat::identity(), 0.05, 0.03);
        let g = decode_tcp_variant(&t, (10, 8), &intr(), &depth, 0.08).unwrap();
        assert!((g.tcp - Pt3::new(0.0, 0.0, 0.53)).norm() < 1e-12);
        let t = tensor_at(7, 3, 2, Quat::identity(), 0.05, 0.0);
        let g = decode_tcp_variant(&t, (3, 2), &intr(), &depth, 0.08).unwrap();
        assert!((g.tcp - intr().backproject(3.0, 2.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn width_clamping_and_missing_depth() {
        let mut data = vec![0.5f32; 21 * 17];
        data[0] = 0.0;
        let depth = DepthImage::new(21, 17, data).unwrap();
        let t = tensor_at(6, 4, 4, Quat::identity(), -0.01, 0.0);
        let g = decode_grasp(&t, (4, 4), &intr(), &depth, 0.08).unwrap();
        assert_eq!(g.width, 0.0);
        assert!(g.width_clamped);
        let t = tensor_at(6, 4, 4, Quat::identity(), 0.2, 0.0);
        assert_eq!(decode_grasp(&t, (4, 4), &intr(), &depth, 0.08).unwrap().width, 0.08);
        assert!(decode_grasp(&t, (0, 0), &intr(), &depth, 0.08).is_err());
    }

    #[test]
    fn reprojection_roundtrip() {
        let k = CameraIntrinsics::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (u, v) = (rng.random_range(0..640u32), rng.random_range(0..480u32));
            let z = rng.random_range(0.4..1.4);
            let p = k.backproject(u as f64, v as f64, z);
            let (pu, pv) = k.project(&p);
            assert!((pu - u as f64).abs() < 1e-6 && (pv - v as f64).abs() < 1e-6);
        }
    }

    fn sample_grasp() -> CameraGrasp {
        CameraGrasp {
            rotation: UnitQuaternion::from_scaled_axis(Vec3::new(0.4, -0.2, 1.3)),
            tcp: Pt3::new(0.02, -0.05, 0.61),
            width: 0.05,
            quality: 0.8,
            pixel: (3, 4),
            width_clamped: false,
        }
    }

    #[test]
    fn base_frame_transforms() {
        let g = sample_grasp();
        let id = to_base_frame(&g, &Pose::identity());
        assert_eq!(id.tcp, g.tcp);
        assert_eq!(id.rotation, g.rotation);
        let shift = Pose::from_parts(Translation3::new(1.0, 0.0, 0.0), Quat::identity());
        let s = to_base_frame(&g, &shift);
        assert_eq!(s.tcp, g.tcp + Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(s.rotation, g.rotation);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let axis = Vec3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let t = Vec3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let pose = Pose::from_parts(Translation3::from(t), UnitQuaternion::from_scaled_axis(axis));
            let there = to_base_frame(&g, &pose);
            let back = CameraGrasp {
                rotation: there.rotation,
                tcp: there.tcp,
                ..g.clone()
            };
            let home = to_base_frame(&back, &pose.inverse());
            assert!((home.tcp - g.tcp).norm() < 1e-9);
            assert!(home.rotation.angle_to(&g.rotation) < 1e-9);
        }
    }

    #[test]
    fn propose_sorted_and_thresholded() {
        let depth = DepthImage::new(21, 17, vec![0.5; 21 * 17]).unwrap();
        let mut t = tensor_at(6, 2, 2, Quat::identity(), 0.05, 0.0);
        t.set(0, 12, 15, 0.7);
        t.set(0, 2, 15, 0.3);
        let r = propose(
            &t,
            &intr(),
            &depth,
            &Pose::identity(),
            &params(),
            0.08,
            Representation::Contact,
        )
        .unwrap();
        assert_eq!(r.proposals.len(), 2);
        assert!(r.proposals[0].quality >= r.proposals[1].quality);
        assert!(r.proposals.iter().all(|p| p.quality >= 0.4));
        let high = NmsParams {
            gamma: 0.99,
            ..params()
        };
        let r = propose(
            &t,
            &intr(),
            &depth,
            &Pose::identity(),
            &high,
            0.08,
            Representation::Contact,
        )
        .unwrap();
        assert!(r.proposals.is_empty());
        let bad = Tensor::zeros(7, 17, 21);
        assert!(propose(
            &bad,
            &intr(),
            &depth,
            &Pose::identity(),
            &params(),
            0.08,
            Representation::Contact
        )
        .is_err());
    }

    #[test]
    fn proposal_json_layout() {
        let p = to_base_frame(&sample_grasp(), &Pose::identity());
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<_> = obj.keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["pixel", "quality", "r", "tcp_m", "width_m"]);
        assert_eq!(obj["tcp_m"].as_array().unwrap().len(), 3);
        let back: GraspProposal = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
