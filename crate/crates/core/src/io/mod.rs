//! On-disk formats: binary tensors and mesh sequences, and checkpoints.

pub mod checkpoint;
pub mod formats;

pub use checkpoint::{
    animator_checkpoint, restore_animator, restore_sed_head, restore_sed_trainer, sed_head_checkpoint,
    sed_trainer_checkpoint, sidecar_path, Checkpoint, Dtype, Sidecar, TensorEntry,
};
pub use formats::{
    decode_mesh, decode_tensor, encode_mesh, encode_tensor, read_bytes, read_mesh_file, read_tensor_file, write_atomic,
    write_mesh_file, write_tensor_file,
};
