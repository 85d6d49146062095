//! C interface to the grasp pipeline.
//!
//! Every fallible function returns a [`CgStatus`]; on failure the message is
//! available from [`cg_last_error`] on the same thread. Objects cross the
//! boundary as opaque handles that the caller releases with the matching
//! `*_free` function. Quaternions are scalar-first `[w, x, y, z]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use contactgrasp::config::PipelineConfig;
use contactgrasp::decode::{propose, GraspProposal, NmsParams, Representation};
use contactgrasp::geometry::{Pt3, RigidTransform};
use contactgrasp::mesh::{load_mesh, stable_poses, TriMesh};
use contactgrasp::model::Tensor;
use contactgrasp::pipeline;
use contactgrasp::render::{CameraIntrinsics, DepthImage};
use contactgrasp::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgStatus {
    Ok = 0,
    InvalidArgument = 1,
    Io = 2,
    Format = 3,
    Geometry = 4,
    DimensionMismatch = 5,
    Checksum = 6,
    Config = 7,
    NullPointer = 8,
    Panic = 9,
}

impl From<&Error> for CgStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => CgStatus::Io,
            Error::Format { .. } => CgStatus::Format,
            Error::NotWatertight { .. } | Error::Degenerate(_) => CgStatus::Geometry,
            Error::InvalidArgument(_) => CgStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => CgStatus::DimensionMismatch,
            Error::Checksum { .. } => CgStatus::Checksum,
            Error::Config(_) => CgStatus::Config,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|b| *b != 0);
    let s = CString::new(bytes).expect("interior nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

enum Failure {
    Status(CgStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(CgStatus::NullPointer, format!("{what} is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CgStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            CgStatus::from(&e)
        }
        Ok(Err(Failure::Status(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            CgStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(CgStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

pub struct CgMesh(TriMesh);

pub struct CgTensor(Tensor);

pub struct CgProposals(Vec<GraspProposal>);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CgIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CgTransform {
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CgDecodeParams {
    pub gamma: f64,
    pub peak_distance: u32,
    pub max_proposals: u32,
    pub max_width: f64,
    /// 0 for contact-anchored tensors, 1 for grasp-center tensors.
    pub representation: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CgProposal {
    pub tcp: [f64; 3],
    pub rotation: [f64; 4],
    pub width: f64,
    pub quality: f64,
    pub pixel: [u32; 2],
    pub width_clamped: bool,
}

/// Defaults of the decoder and the gripper.
#[no_mangle]
pub extern "C" fn cg_decode_params_default() -> CgDecodeParams {
    let c = PipelineConfig::default();
    CgDecodeParams {
        gamma: c.decode.gamma,
        peak_distance: c.decode.peak_distance,
        max_proposals: c.decode.max_proposals as u32,
        max_width: c.gripper.max_width,
        representation: 0,
    }
}

/// Loads an OBJ or STL mesh.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_mesh_load(path: *const c_char, out: *mut *mut CgMesh) -> CgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let mesh = load_mesh(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(CgMesh(mesh)));
        Ok(())
    })
}

/// Builds a mesh from `n_vertices` xyz triples and `n_faces` index triples.
///
/// # Safety
/// The arrays must hold `3 * n_vertices` and `3 * n_faces` elements.
#[no_mangle]
pub unsafe extern "C" fn cg_mesh_from_arrays(
    vertices: *const f64,
    n_vertices: usize,
    faces: *const u32,
    n_faces: usize,
    out: *mut *mut CgMesh,
) -> CgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if vertices.is_null() || faces.is_null() {
            return Err(null("vertex or face array"));
        }
        let v = slice::from_raw_parts(vertices, 3 * n_vertices);
        let f = slice::from_raw_parts(faces, 3 * n_faces);
        let verts = v.chunks_exact(3).map(|c| Pt3::new(c[0], c[1], c[2])).collect();
        let tris = f.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        *out = Box::into_raw(Box::new(CgMesh(TriMesh::new(verts, tris)?)));
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cg_mesh_free(mesh: *mut CgMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Enclosed volume in cubic meters.
///
/// # Safety
/// `mesh` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_mesh_volume(mesh: *const CgMesh, out: *mut f64) -> CgStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        *out_arg(out, "out")? = m.0.volume();
        Ok(())
    })
}

/// Writes up to `capacity` stable-pose probabilities (descending) into
/// `probabilities` and the total number of poses into `count`. Pass a NULL
/// buffer to query the count only.
///
/// # Safety
/// `probabilities` must hold `capacity` values when not NULL.
#[no_mangle]
pub unsafe extern "C" fn cg_mesh_stable_poses(
    mesh: *const CgMesh,
    max_poses: usize,
    probabilities: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> CgStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        let count = out_arg(count, "count")?;
        let poses = stable_poses(&m.0, max_poses);
        *count = poses.len();
        if !probabilities.is_null() {
            let buf = slice::from_raw_parts_mut(probabilities, capacity);
            for (slot, p) in buf.iter_mut().zip(&poses) {
                *slot = p.probability;
            }
        }
        Ok(())
    })
}

/// Reads a tensor file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_tensor_read(path: *const c_char, out: *mut *mut CgTensor) -> CgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let t = Tensor::read(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(CgTensor(t)));
        Ok(())
    })
}

/// Wraps a channel-major `channels x height x width` float array.
///
/// # Safety
/// `data` must hold `channels * height * width` values.
#[no_mangle]
pub unsafe extern "C" fn cg_tensor_from_data(
    data: *const f32,
    channels: usize,
    height: usize,
    width: usize,
    out: *mut *mut CgTensor,
) -> CgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if data.is_null() {
            return Err(null("data"));
        }
        let n = channels * height * width;
        let values = slice::from_raw_parts(data, n).iter().map(|v| *v as f64).collect();
        *out = Box::into_raw(Box::new(CgTensor(Tensor::from_data(channels, height, width, values)?)));
        Ok(())
    })
}

/// # Safety
/// `tensor` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_tensor_dims(
    tensor: *const CgTensor,
    channels: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> CgStatus {
    guard(|| {
        let t = &tensor.as_ref().ok_or_else(|| null("tensor"))?.0;
        *out_arg(channels, "channels")? = t.channels;
        *out_arg(height, "height")? = t.height;
        *out_arg(width, "width")? = t.width;
        Ok(())
    })
}

/// # Safety
/// `tensor` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cg_tensor_free(tensor: *mut CgTensor) {
    if !tensor.is_null() {
        drop(Box::from_raw(tensor));
    }
}

/// Decodes grasp proposals in the base frame, best first. `depth` is the
/// row-major z-depth image matching `intrinsics`; `extrinsics` maps camera
/// to base coordinates.
///
/// # Safety
/// `depth` must hold `width * height` values; all pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cg_decode(
    tensor: *const CgTensor,
    intrinsics: *const CgIntrinsics,
    depth: *const f32,
    extrinsics: *const CgTransform,
    params: *const CgDecodeParams,
    out: *mut *mut CgProposals,
) -> CgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let t = &tensor.as_ref().ok_or_else(|| null("tensor"))?.0;
        let k = intrinsics.as_ref().ok_or_else(|| null("intrinsics"))?;
        let x = extrinsics.as_ref().ok_or_else(|| null("extrinsics"))?;
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if depth.is_null() {
            return Err(null("depth"));
        }
        let k = CameraIntrinsics {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        };
        k.validate()?;
        let d = slice::from_raw_parts(depth, k.pixel_count()).to_vec();
        let d = DepthImage::new(k.width, k.height, d)?;
        let pose = RigidTransform {
            rotation: x.rotation,
            translation: x.translation,
        }
        .to_pose()?;
        let representation = match p.representation {
            0 => Representation::Contact,
            1 => Representation::Tcp,
            r => {
                return Err(Failure::Status(
                    CgStatus::InvalidArgument,
                    format!("unknown representation {r}"),
                ))
            }
        };
        let nms = NmsParams {
            gamma: p.gamma,
            peak_distance: p.peak_distance,
            max_proposals: p.max_proposals as usize,
        };
        let report = propose(t, &k, &d, &pose, &nms, p.max_width, representation)?;
        *out = Box::into_raw(Box::new(CgProposals(report.proposals)));
        Ok(())
    })
}

/// Number of proposals; 0 for NULL.
///
/// # Safety
/// `proposals` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cg_proposals_len(proposals: *const CgProposals) -> usize {
    proposals.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `proposals` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_proposals_get(
    proposals: *const CgProposals,
    index: usize,
    out: *mut CgProposal,
) -> CgStatus {
    guard(|| {
        let list = &proposals.as_ref().ok_or_else(|| null("proposals"))?.0;
        let out = out_arg(out, "out")?;
        let g = list.get(index).ok_or_else(|| {
            Failure::Status(
                CgStatus::InvalidArgument,
                format!("index {index} out of range for {} proposals", list.len()),
            )
        })?;
        let r = &g.rotation;
        *out = CgProposal {
            tcp: [g.tcp.x, g.tcp.y, g.tcp.z],
            rotation: [r.w, r.i, r.j, r.k],
            width: g.width,
            quality: g.quality,
            pixel: g.source_pixel,
            width_clamped: g.width_clamped,
        };
        Ok(())
    })
}

/// # Safety
/// `proposals` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cg_proposals_free(proposals: *mut CgProposals) {
    if !proposals.is_null() {
        drop(Box::from_raw(proposals));
    }
}

/// Generates a dataset from a mesh directory. `config_path` may be NULL
/// for the defaults; `seed` overrides the configured seed.
///
/// # Safety
/// Non-NULL strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cg_generate(
    meshes_dir: *const c_char,
    out_dir: *const c_char,
    config_path: *const c_char,
    seed: u64,
) -> CgStatus {
    guard(|| {
        let meshes = path_arg(meshes_dir, "meshes_dir")?;
        let out = path_arg(out_dir, "out_dir")?;
        let mut config = if config_path.is_null() {
            PipelineConfig::default()
        } else {
            PipelineConfig::load(path_arg(config_path, "config_path")?)?
        };
        config.seed = seed;
        pipeline::generate(&config, &meshes, &out)?;
        Ok(())
    })
}
