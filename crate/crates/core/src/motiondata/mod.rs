//! Recordings, skeletons, file I/O and sample windows.

mod io;
mod recording;
mod skeleton;
mod synth;
pub mod vec3;
mod velocity;
mod windows;

pub use io::{
    load_recording, save_recording, Manifest, ManifestFiles, SkeletonRef, MANIFEST_VERSION,
};
pub use recording::{Recording, UNIT_TOLERANCE};
pub use skeleton::{BodyPart, SkeletonSpec};
pub use synth::{synth_generate, SynthConfig};
pub use vec3::Vec3;
pub use velocity::{compute_velocity_directions, VelocityDirections, DEFAULT_EPS_V};
pub use windows::{make_windows, SampleWindow, Setting, WindowSource, DEFAULT_SEQ_LEN};
