use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp::SamplerParams;

use super::{CameraIntrinsics, CameraPose, DepthImage, GraspEntry, NoiseParams, SparseGraspMap};

pub const DEPTH_FILE: &str = "depth.f32";
pub const NOISY_DEPTH_FILE: &str = "depth_noisy.f32";
pub const MASK_FILE: &str = "mask.u8";
pub const GRASPS_FILE: &str = "grasps.json";
pub const META_FILE: &str = "meta.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSeeds {
    pub master: u64,
    pub camera: u64,
    pub noise: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub object_id: String,
    pub stable_pose_id: usize,
    pub image_index: usize,
    pub scale_factor: f64,
    pub intrinsics: CameraIntrinsics,
    pub camera_pose: CameraPose,
    pub sampler: SamplerParams,
    pub noise: NoiseParams,
    pub robustness_threshold: f64,
    pub visibility_tolerance: f64,
    pub seeds: SampleSeeds,
    /// CRC32 of every data file, filled in by [`write_sample`].
    #[serde(default)]
    pub crc32: BTreeMap<String, u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub meta: SampleMeta,
    pub depth: DepthImage,
    pub depth_noisy: DepthImage,
    pub map: SparseGraspMap,
}

/// Directory of one rendered image inside a dataset root.
pub fn sample_dir(root: &Path, object_id: &str, pose: usize, image: usize) -> PathBuf {
    root.join(format!("obj_{object_id}"))
        .join(format!("pose_{pose}"))
        .join(format!("img_{image}"))
}

fn f32_bytes(data: &[f32]) -> Vec<u8> {
    data.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], crc: &mut BTreeMap<String, u32>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    crc.insert(name.to_string(), crc32fast::hash(bytes));
    Ok(())
}

/// Writes a sample directory. The stored checksums cover every data file.
pub fn write_sample(dir: &Path, sample: &Sample) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut crc = BTreeMap::new();
    write_file(dir, DEPTH_FILE, &f32_bytes(&sample.depth.data), &mut crc)?;
    write_file(dir, NOISY_DEPTH_FILE, &f32_bytes(&sample.depth_noisy.data), &mut crc)?;
    write_file(dir, MASK_FILE, &sample.map.mask, &mut crc)?;
    let grasps = serde_json::to_vec_pretty(&sample.map.entries).expect("grasp entries serialize");
    write_file(dir, GRASPS_FILE, &grasps, &mut crc)?;
    let mut meta = sample.meta.clone();
    meta.crc32 = crc;
    let meta_bytes = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
    let path = dir.join(META_FILE);
    fs::write(&path, meta_bytes).map_err(|e| Error::io(&path, e))
}

fn read_checked(dir: &Path, name: &str, meta: &SampleMeta) -> Result<Vec<u8>> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let stored = *meta
        .crc32
        .get(name)
        .ok_or_else(|| Error::format(dir.join(META_FILE), 0, format!("no checksum for {name}")))?;
    let computed = crc32fast::hash(&bytes);
    if stored != computed {
        return Err(Error::Checksum {
            file: path.display().to_string(),
            stored,
            computed,
        });
    }
    Ok(bytes)
}

fn read_depth(dir: &Path, name: &str, meta: &SampleMeta) -> Result<DepthImage> {
    let bytes = read_checked(dir, name, meta)?;
    let (w, h) = (meta.intrinsics.width, meta.intrinsics.height);
    let expected = w as usize * h as usize * 4;
    if bytes.len() != expected {
        return Err(Error::format(
            dir.join(name),
            0,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    DepthImage::new(w, h, data)
}

/// Reads a sample directory, verifying every checksum.
pub fn read_sample(dir: &Path) -> Result<Sample> {
    let meta_path = dir.join(META_FILE);
    let meta_bytes = fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: SampleMeta =
        serde_json::from_slice(&meta_bytes).map_err(|e| Error::format(&meta_path, e.column() as u64, e.to_string()))?;
    let depth = read_depth(dir, DEPTH_FILE, &meta)?;
    let depth_noisy = read_depth(dir, NOISY_DEPTH_FILE, &meta)?;
    let mask = read_checked(dir, MASK_FILE, &meta)?;
    if mask.len() != meta.intrinsics.pixel_count() {
        return Err(Error::format(
            dir.join(MASK_FILE),
            0,
            "mask size does not match intrinsics",
        ));
    }
    let grasp_bytes = read_checked(dir, GRASPS_FILE, &meta)?;
    let entries: Vec<GraspEntry> = serde_json::from_slice(&grasp_bytes)
        .map_err(|e| Error::format(dir.join(GRASPS_FILE), e.column() as u64, e.to_string()))?;
    let map = SparseGraspMap {
        width: meta.intrinsics.width,
        height: meta.intrinsics.height,
        entries,
        mask,
    };
    Ok(Sample {
        meta,
        depth,
        depth_noisy,
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pt3, Quat, Vec3};
    use nalgebra::UnitQuaternion;

    fn sample(entries: Vec<GraspEntry>) -> Sample {
        let k = CameraIntrinsics {
            fx: 50.0,
            fy: 50.0,
            cx: 3.5,
            cy: 2.5,
            width: 8,
            height: 6,
        };
        let depth: Vec<f32> = (0..48)
            .map(|i| if i % 5 == 0 { 0.0 } else { 0.5 + i as f32 * 1e-3 })
            .collect();
        let noisy: Vec<f32> = depth
            .iter()
            .map(|d| if *d > 0.0 { d + 1.234e-4 } else { 0.0 })
            .collect();
        let mask = (0..48).map(|i| u8::from(i % 3 == 0)).collect();
        Sample {
            meta: SampleMeta {
                object_id: "cube".into(),
                stable_pose_id: 2,
                image_index: 7,
                scale_factor: 0.123456789,
                intrinsics: k,
                camera_pose: CameraPose::look_at(&Pt3::new(0.1, -0.4, 0.6), &Pt3::origin()).unwrap(),
                sampler: SamplerParams::default(),
                noise: NoiseParams::default(),
                robustness_threshold: 0.5,
                visibility_tolerance: 0.005,
                seeds: SampleSeeds {
                    master: 1,
                    camera: 2,
                    noise: 3,
                },
                crc32: BTreeMap::new(),
            },
            depth: DepthImage::new(8, 6, depth).unwrap(),
            depth_noisy: DepthImage::new(8, 6, noisy).unwrap(),
            map: SparseGraspMap {
                width: 8,
                height: 6,
                entries,
                mask,
            },
        }
    }

    fn entry() -> GraspEntry {
        let r: Quat = UnitQuaternion::from_scaled_axis(Vec3::new(0.3, -1.1, 0.7));
        GraspEntry {
            u: 3,
            v: 0,
            q: 1,
            r,
            width_m: 0.0543210987,
            epsilon: 0.87,
            contact_m: [0.01, -0.02, 0.53],
            z_m: None,
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut tcp_entry = entry();
        tcp_entry.u = 5;
        tcp_entry.z_m = Some(0.0312345678);
        let s = sample(vec![entry(), tcp_entry]);
        write_sample(dir.path(), &s).unwrap();
        let back = read_sample(dir.path()).unwrap();
        assert_eq!(back.depth, s.depth);
        assert_eq!(back.depth_noisy, s.depth_noisy);
        assert_eq!(back.map, s.map);
        assert_eq!(back.meta.camera_pose, s.meta.camera_pose);
        assert_eq!(back.meta.crc32.len(), 4);
        let mut m = back.meta.clone();
        m.crc32.clear();
        assert_eq!(m, s.meta);
    }

    #[test]
    fn empty_entries_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample(vec![]);
        write_sample(dir.path(), &s).unwrap();
        assert!(read_sample(dir.path()).unwrap().map.entries.is_empty());
    }

    #[test]
    fn corrupted_byte_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        write_sample(dir.path(), &sample(vec![entry()])).unwrap();
        let path = dir.path().join(NOISY_DEPTH_FILE);
        let mut bytes = fs::read(&path).unwrap();
        bytes[17] ^= 0x40;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_sample(dir.path()), Err(Error::Checksum { .. })));
    }

    #[test]
    fn layout() {
        let p = sample_dir(Path::new("/data"), "cube", 1, 4);
        assert_eq!(p, Path::new("/data/obj_cube/pose_1/img_4"));
    }
}
