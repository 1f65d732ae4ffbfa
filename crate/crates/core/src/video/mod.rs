//! Person-centric cropping, composite action sequences and clip stitching.

mod crop;
mod sequences;
mod stitch;

pub use crop::{
    compute_person_crop, frame_crop, union_crop, CropBox, CropMode, CropResult, DEFAULT_MARGIN,
    MIN_EXTENT,
};
pub use sequences::{
    generate_composite_sequences, sequence_id, CompositeSequence, SequenceGenerator, SequenceSpec,
};
pub use stitch::{
    assign_and_stitch, crop_corpus, derive_seed, plan_stitching, render_stitched, resolve,
    video_id, ClipCrop, MediaIo, StitchOptions,
};
