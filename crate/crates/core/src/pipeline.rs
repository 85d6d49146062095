//! Dataset generation: mesh preparation, per-pose hinge analysis, rendering
//! and ground-truth projection, written as one directory per image.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::decode::Representation;
use crate::error::{Error, Result};
use crate::geometry::{derive_seed, Pose, Pt3, Quat};
use crate::grasp::{sample_contact_pairs, GraspCandidate, HingePattern, OrientedGrasp};
use crate::mesh::{load_mesh, stable_poses_with, write_obj, Scene, StablePose, TriMesh};
use crate::render::{
    apply_sensor_noise, project_contacts, project_tcp, render_depth, sample_camera_pose, sample_dir, write_sample,
    CameraPose, DepthImage, Sample, SampleMeta, SampleSeeds, SparseGraspMap,
};
use crate::sim::{simulate_grasp, SimResult};

pub const OBJECT_FILE: &str = "object.json";
pub const MESH_FILE: &str = "mesh.obj";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

// Sub-stream keys below an object seed.
const KEY_WIDTH: u64 = 1;
const KEY_STABLE: u64 = 2;
const KEY_SAMPLER: u64 = 3;
const KEY_CAMERA: u64 = 4;
const KEY_NOISE: u64 = 5;

/// Seed of every random stream that belongs to one object.
pub fn object_seed(master: u64, object_id: &str) -> u64 {
    derive_seed(master, &[crc32fast::hash(object_id.as_bytes()) as u64])
}

/// A rescaled object with its resting poses and object-frame candidates.
#[derive(Clone, Debug)]
pub struct ObjectAsset {
    pub id: String,
    pub mesh: Arc<TriMesh>,
    pub scale_factor: f64,
    pub target_width: f64,
    pub stable_poses: Vec<StablePose>,
    pub candidates: Vec<GraspCandidate>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectRecord {
    id: String,
    scale_factor: f64,
    target_width: f64,
    stable_poses: Vec<StablePose>,
    candidates: Vec<GraspCandidate>,
    vertices: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
}

impl ObjectAsset {
    /// Rescales `mesh` to a random width, finds its resting poses and
    /// samples candidates, all seeded from `(config.seed, id)`.
    pub fn prepare(id: &str, mesh: &TriMesh, config: &PipelineConfig) -> Result<ObjectAsset> {
        let seed = object_seed(config.seed, id);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[KEY_WIDTH]));
        let s = &config.scale;
        let target_width = s.width_min + (s.width_max - s.width_min) * rng.random::<f64>();
        let (mesh, scale_factor) = mesh.rescale_to_width(target_width)?;
        let stable_poses = stable_poses_with(
            &mesh,
            config.stable.max_poses,
            config.stable.samples,
            derive_seed(seed, &[KEY_STABLE]),
        );
        if stable_poses.is_empty() {
            return Err(Error::Degenerate(format!("object {id} has no stable pose")));
        }
        let candidates = sample_contact_pairs(
            &mesh,
            &config.gripper,
            &config.sampler,
            derive_seed(seed, &[KEY_SAMPLER]),
        );
        if candidates.is_empty() {
            log::warn!("object {id}: no feasible grasp candidates");
        }
        Ok(ObjectAsset {
            id: id.to_string(),
            mesh: Arc::new(mesh),
            scale_factor,
            target_width,
            stable_poses,
            candidates,
        })
    }

    /// Writes `object.json` and a copy of the rescaled mesh as `mesh.obj`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_obj(&self.mesh, dir.join(MESH_FILE))?;
        let record = ObjectRecord {
            id: self.id.clone(),
            scale_factor: self.scale_factor,
            target_width: self.target_width,
            stable_poses: self.stable_poses.clone(),
            candidates: self.candidates.clone(),
            vertices: self.mesh.vertices().iter().map(|v| [v.x, v.y, v.z]).collect(),
            faces: self.mesh.faces().to_vec(),
        };
        let path = dir.join(OBJECT_FILE);
        let json = serde_json::to_vec_pretty(&record).expect("object record serializes");
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<ObjectAsset> {
        let path = dir.join(OBJECT_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let record: ObjectRecord =
            serde_json::from_slice(&bytes).map_err(|e| Error::format(&path, e.column() as u64, e.to_string()))?;
        // The exact vertex and face order lives in the record; mesh.obj is a
        // viewer copy.
        let vertices = record.vertices.iter().map(|v| Pt3::new(v[0], v[1], v[2])).collect();
        let mesh = TriMesh::new(vertices, record.faces)?;
        Ok(ObjectAsset {
            id: record.id,
            mesh: Arc::new(mesh),
            scale_factor: record.scale_factor,
            target_width: record.target_width,
            stable_poses: record.stable_poses,
            candidates: record.candidates,
        })
    }

    /// Candidates expressed in the world frame of an object placed at `pose`.
    pub fn world_candidates(&self, pose: &Pose) -> Vec<GraspCandidate> {
        self.candidates.iter().map(|c| c.transformed(pose)).collect()
    }
}

pub fn object_dir(root: &Path, object_id: &str) -> PathBuf {
    root.join(format!("obj_{object_id}"))
}

/// Mesh files (`.obj`, `.stl`) directly inside `dir`, sorted by file name,
/// paired with their file stems as object ids.
pub fn discover_meshes(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("obj" | "stl")) {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            found.push((id, path));
        }
    }
    found.sort_by(|a, b| a.1.cmp(&b.1));
    for pair in found.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::InvalidArgument(format!(
                "two meshes share the object id '{}'",
                pair[0].0
            )));
        }
    }
    Ok(found)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub source: String,
    pub error: String,
}

/// Loads and prepares every mesh in `dir`. Meshes that fail are logged and
/// reported; when all of them fail the first error is returned.
pub fn prepare_objects(dir: &Path, config: &PipelineConfig) -> Result<(Vec<ObjectAsset>, Vec<Failure>)> {
    let meshes = discover_meshes(dir)?;
    if meshes.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no .obj or .stl meshes in {}",
            dir.display()
        )));
    }
    let results: Vec<Result<ObjectAsset>> = meshes
        .par_iter()
        .map(|(id, path)| load_mesh(path).and_then(|m| ObjectAsset::prepare(id, &m, config)))
        .collect();
    let mut assets = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for ((_, path), r) in meshes.iter().zip(results) {
        match r {
            Ok(a) => assets.push(a),
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                failures.push(Failure {
                    source: file_name(path),
                    error: e.to_string(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    match (assets.is_empty(), first_error) {
        (true, Some(e)) => Err(e),
        _ => Ok((assets, failures)),
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads the objects of a generated dataset in manifest order.
pub fn load_dataset_objects(root: &Path) -> Result<Vec<ObjectAsset>> {
    let manifest = Manifest::read(root)?;
    manifest
        .objects
        .par_iter()
        .map(|o| ObjectAsset::read(&object_dir(root, &o.id)))
        .collect()
}

/// One object placed on the table together with its hinge analysis.
pub struct PlacedObject {
    pub scene: Scene,
    pub candidates: Vec<GraspCandidate>,
    pub patterns: Vec<HingePattern>,
}

impl PlacedObject {
    pub fn new(asset: &ObjectAsset, pose: Pose, config: &PipelineConfig) -> Result<PlacedObject> {
        let scene = Scene::new(asset.mesh.clone(), pose)?;
        let candidates = asset.world_candidates(&pose);
        let patterns = candidates
            .iter()
            .map(|c| HingePattern::compute(c, &scene, &config.gripper))
            .collect();
        Ok(PlacedObject {
            scene,
            candidates,
            patterns,
        })
    }

    /// Center of mass in the world frame.
    pub fn center(&self) -> Pt3 {
        self.scene.object_pose * self.scene.mesh.com()
    }

    pub fn view(&self, camera: CameraPose, config: &PipelineConfig, noise_seed: u64) -> View {
        let intr = &config.camera.intrinsics;
        let (depth, mask) = render_depth(&self.scene, intr, &camera);
        let noisy = apply_sensor_noise(&depth, &config.render.noise, noise_seed);
        let ray = camera.principal_ray();
        let grasps = self
            .candidates
            .iter()
            .zip(&self.patterns)
            .map(|(c, p)| p.orient(c, &ray, config.label.delta))
            .collect();
        View {
            camera,
            depth,
            noisy,
            mask,
            grasps,
        }
    }
}

/// A rendered image with the grasps oriented for its camera.
pub struct View {
    pub camera: CameraPose,
    pub depth: DepthImage,
    pub noisy: DepthImage,
    pub mask: Vec<u8>,
    pub grasps: Vec<OrientedGrasp>,
}

impl View {
    pub fn ground_truth(
        &self,
        scene: &Scene,
        config: &PipelineConfig,
        representation: Representation,
    ) -> SparseGraspMap {
        let (intr, tau) = (&config.camera.intrinsics, config.label.visibility_tolerance);
        let anchored = |r: &Quat, tcp: &Pt3| {
            simulate_grasp(scene, r, tcp, &config.gripper, &config.sim).result == SimResult::Success
        };
        match representation {
            Representation::Contact => project_contacts(
                &self.grasps,
                scene,
                intr,
                &self.camera,
                &self.depth,
                &self.mask,
                tau,
                &anchored,
            ),
            Representation::Tcp => project_tcp(
                &self.grasps,
                intr,
                &self.camera,
                &self.depth,
                &self.mask,
                tau,
                &anchored,
            ),
        }
    }

    /// Depth image the decoder reprojects with.
    pub fn decode_depth(&self, config: &PipelineConfig) -> &DepthImage {
        if config.decode.noisy_depth {
            &self.noisy
        } else {
            &self.depth
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub id: String,
    pub source: String,
    pub scale_factor: f64,
    pub target_width: f64,
    pub candidates: usize,
    pub poses: usize,
    pub images: usize,
    pub grasp_entries: usize,
    pub positive_entries: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub objects: usize,
    pub poses: usize,
    pub images: usize,
    pub grasp_entries: usize,
    pub positive_entries: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub totals: Totals,
    pub objects: Vec<ManifestObject>,
    pub failures: Vec<Failure>,
}

impl Manifest {
    pub fn read(root: &Path) -> Result<Manifest> {
        let path = root.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::format(&path, e.column() as u64, e.to_string()))
    }

    fn write(&self, root: &Path) -> Result<()> {
        let path = root.join(MANIFEST_FILE);
        let json = serde_json::to_vec_pretty(self).expect("manifest serializes");
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }
}

/// Writes the effective configuration next to a run's outputs.
pub fn write_config(dir: &Path, config: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(CONFIG_FILE);
    fs::write(&path, config.to_toml()).map_err(|e| Error::io(&path, e))
}

/// Full generation run from a mesh directory into `out`.
pub fn generate(config: &PipelineConfig, meshes: &Path, out: &Path) -> Result<Manifest> {
    config.validate()?;
    write_config(out, config)?;
    let (assets, failures) = prepare_objects(meshes, config)?;
    let sources: Vec<(String, String)> = discover_meshes(meshes)?
        .into_iter()
        .map(|(id, p)| (id, file_name(&p)))
        .collect();

    assets
        .par_iter()
        .map(|a| a.write(&object_dir(out, &a.id)))
        .collect::<Result<()>>()?;

    let pose_jobs: Vec<(usize, usize)> = assets
        .iter()
        .enumerate()
        .flat_map(|(oi, a)| (0..a.stable_poses.len()).map(move |p| (oi, p)))
        .collect();
    let placed: Vec<PlacedObject> = pose_jobs
        .par_iter()
        .map(|&(oi, p)| PlacedObject::new(&assets[oi], assets[oi].stable_poses[p].pose(), config))
        .collect::<Result<_>>()?;

    let n_img = config.render.images_per_pose;
    let image_jobs: Vec<(usize, usize)> = (0..pose_jobs.len())
        .flat_map(|j| (0..n_img).map(move |n| (j, n)))
        .collect();
    let counts: Vec<(usize, usize)> = image_jobs
        .par_iter()
        .map(|&(j, n)| {
            let (oi, p) = pose_jobs[j];
            render_sample(&assets[oi], p, n, &placed[j], config, out)
        })
        .collect::<Result<_>>()?;

    let mut manifest = Manifest {
        seed: config.seed,
        failures,
        ..Manifest::default()
    };
    for (oi, a) in assets.iter().enumerate() {
        let mut m = ManifestObject {
            id: a.id.clone(),
            source: sources
                .iter()
                .find(|(id, _)| *id == a.id)
                .map(|(_, f)| f.clone())
                .unwrap_or_default(),
            scale_factor: a.scale_factor,
            target_width: a.target_width,
            candidates: a.candidates.len(),
            poses: a.stable_poses.len(),
            images: a.stable_poses.len() * n_img,
            ..ManifestObject::default()
        };
        for (k, &(j, _)) in image_jobs.iter().enumerate() {
            if pose_jobs[j].0 == oi {
                m.grasp_entries += counts[k].0;
                m.positive_entries += counts[k].1;
            }
        }
        let t = &mut manifest.totals;
        t.objects += 1;
        t.poses += m.poses;
        t.images += m.images;
        t.grasp_entries += m.grasp_entries;
        t.positive_entries += m.positive_entries;
        manifest.objects.push(m);
    }
    manifest.write(out)?;
    Ok(manifest)
}

/// Renders and writes one image; returns (entries, positive entries).
fn render_sample(
    asset: &ObjectAsset,
    pose: usize,
    image: usize,
    placed: &PlacedObject,
    config: &PipelineConfig,
    out: &Path,
) -> Result<(usize, usize)> {
    let seed = object_seed(config.seed, &asset.id);
    let (p, n) = (pose as u64, image as u64);
    let camera_seed = derive_seed(seed, &[KEY_CAMERA, p, n]);
    let noise_seed = derive_seed(seed, &[KEY_NOISE, p, n]);
    let camera = sample_camera_pose(&placed.center(), &config.camera.bounds, camera_seed)?;
    let view = placed.view(camera, config, noise_seed);
    let map = view.ground_truth(&placed.scene, config, Representation::Contact);
    let counts = (map.entries.len(), map.entries.iter().filter(|e| e.q == 1).count());
    let sample = Sample {
        meta: SampleMeta {
            object_id: asset.id.clone(),
            stable_pose_id: pose,
            image_index: image,
            scale_factor: asset.scale_factor,
            intrinsics: config.camera.intrinsics,
            camera_pose: view.camera,
            sampler: config.sampler.clone(),
            noise: config.render.noise.clone(),
            robustness_threshold: config.label.delta,
            visibility_tolerance: config.label.visibility_tolerance,
            seeds: SampleSeeds {
                master: config.seed,
                camera: camera_seed,
                noise: noise_seed,
            },
            crc32: Default::default(),
        },
        depth: view.depth,
        depth_noisy: view.noisy,
        map,
    };
    write_sample(&sample_dir(out, &asset.id, pose, image), &sample)?;
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    fn small_config() -> PipelineConfig {
        let mut c = PipelineConfig {
            seed: 5,
            ..PipelineConfig::default()
        };
        c.stable.samples = 500;
        c.sampler.max_grasps = 20;
        c.sampler.epsilon.trials = 20;
        c.render.images_per_pose = 1;
        c.camera.intrinsics.width = 64;
        c.camera.intrinsics.height = 48;
        c.camera.intrinsics.fx = 40.0;
        c.camera.intrinsics.fy = 40.0;
        c.camera.intrinsics.cx = 31.5;
        c.camera.intrinsics.cy = 23.5;
        c
    }

    #[test]
    fn asset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cube = primitives::cuboid(0.1, 0.1, 0.1).build().unwrap();
        let a = ObjectAsset::prepare("cube", &cube, &small_config()).unwrap();
        assert!((a.mesh.characteristic_width() - a.target_width).abs() < 1e-12);
        a.write(dir.path()).unwrap();
        let b = ObjectAsset::read(dir.path()).unwrap();
        assert_eq!(b.mesh.vertices(), a.mesh.vertices());
        assert_eq!(b.candidates, a.candidates);
        assert_eq!(b.stable_poses, a.stable_poses);
    }

    #[test]
    fn generate_small_dataset() {
        let meshes = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        write_obj(
            &primitives::cuboid(0.1, 0.1, 0.1).build().unwrap(),
            meshes.path().join("cube.obj"),
        )
        .unwrap();
        fs::write(meshes.path().join("broken.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        let cfg = small_config();
        let m = generate(&cfg, meshes.path(), out.path()).unwrap();
        assert_eq!(m.totals.objects, 1);
        assert_eq!(m.failures.len(), 1);
        assert_eq!(m.failures[0].source, "broken.obj");
        assert_eq!(m.totals.images, m.totals.poses);
        assert!(m.totals.poses <= 6);
        assert!(out.path().join(CONFIG_FILE).exists());
        let s = crate::render::read_sample(&sample_dir(out.path(), "cube", 0, 0)).unwrap();
        assert_eq!(s.depth.width, 64);
        assert_eq!(Manifest::read(out.path()).unwrap(), m);
        let loaded = load_dataset_objects(out.path()).unwrap();
        assert_eq!(loaded[0].id, "cube");
    }

    #[test]
    fn all_meshes_failing_is_an_error() {
        let meshes = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        fs::write(meshes.path().join("broken.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert!(matches!(
            generate(&small_config(), meshes.path(), out.path()),
            Err(Error::NotWatertight { .. })
        ));
    }
}
