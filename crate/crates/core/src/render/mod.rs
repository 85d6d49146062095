//! Object-on-plane scenes seen through a pinhole depth camera: camera
//! sampling, ray-cast depth and mask rendering, sensor noise, contact
//! projection into sparse grasp maps and per-image dataset files.

mod camera;
mod depth;
mod project;
mod sample_io;

pub use camera::{sample_camera_pose, CameraBounds, CameraIntrinsics, CameraPose};
pub use depth::{apply_sensor_noise, render_depth, DepthImage, NoiseParams};
pub use project::{project_contacts, project_tcp, GraspEntry, SparseGraspMap, VISIBILITY_TOLERANCE};
pub use sample_io::{
    read_sample, sample_dir, write_sample, Sample, SampleMeta, SampleSeeds, DEPTH_FILE, GRASPS_FILE, MASK_FILE,
    META_FILE, NOISY_DEPTH_FILE,
};
