//! Synthetic corpus generation, frame-directory I/O, and pair sampling.

pub mod pairs;
pub mod scene;
pub mod video;

pub use pairs::{
    corpus_hash, load_corpus, load_labeled_video, sample_pair, save_labeled_video, split_corpus,
    synthesize_corpus, PairMode, TransferPair,
};
pub use scene::{
    frame_centroid, make_moving_shapes, CorpusSpec, LabeledVideo, MotionSpec, SceneSpec,
    ShapeKind, ShapeSpec, Trajectory,
};
pub use video::{
    load_target_png, load_video_dir, save_target_png, save_video_dir, TargetImage, Video,
    VideoMeta,
};
