//! Source/target pair sampling and corpus storage.

use super::scene::{make_moving_shapes, LabeledVideo, SceneSpec, Trajectory};
use super::video::{load_video_dir, save_video_dir, TargetImage, Video};
use crate::error::{Error, Result};
use crate::parallel::par_map_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairMode {
    /// Target is the source's own first frame; pixel ground truth exists.
    #[serde(rename = "self")]
    SelfPair,
    /// Target comes from a different scene; adversarial supervision only.
    #[serde(rename = "cross")]
    Cross,
}

#[derive(Debug, Clone)]
pub struct TransferPair {
    pub source: Video,
    pub target: TargetImage,
    pub mode: PairMode,
    /// Present iff mode is `SelfPair`.
    pub gt_video: Option<Video>,
    pub gt_trajectory: Option<Trajectory>,
    pub source_index: usize,
    pub target_index: usize,
}

/// Draw one training pair. Deterministic in `rng_seed`.
pub fn sample_pair(corpus: &[LabeledVideo], mode: PairMode, rng_seed: u64) -> Result<TransferPair> {
    if corpus.is_empty() {
        return Err(Error::Config("empty corpus".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    match mode {
        PairMode::SelfPair => {
            let i = rng.gen_range(0..corpus.len());
            let item = &corpus[i];
            Ok(TransferPair {
                source: item.video.clone(),
                target: item.video.first_frame_target(),
                mode,
                gt_video: Some(item.video.clone()),
                gt_trajectory: Some(item.trajectory.clone()),
                source_index: i,
                target_index: i,
            })
        }
        PairMode::Cross => {
            if corpus.len() < 2 {
                return Err(Error::Config(
                    "cross pairs need at least two corpus items".into(),
                ));
            }
            let i = rng.gen_range(0..corpus.len());
            let mut j = rng.gen_range(0..corpus.len() - 1);
            if j >= i {
                j += 1;
            }
            Ok(TransferPair {
                source: corpus[i].video.clone(),
                target: corpus[j].video.first_frame_target(),
                mode,
                gt_video: None,
                gt_trajectory: Some(corpus[i].trajectory.clone()),
                source_index: i,
                target_index: j,
            })
        }
    }
}

fn item_dir(root: &Path, index: usize) -> std::path::PathBuf {
    root.join(format!("scene_{index:04}"))
}

pub fn save_labeled_video(item: &LabeledVideo, dir: &Path) -> Result<()> {
    save_video_dir(&item.video, dir)?;
    let spec_path = dir.join("scene.json");
    fs::write(
        &spec_path,
        serde_json::to_string_pretty(&item.spec).expect("scene serializes"),
    )
    .map_err(|e| Error::io(&spec_path, e))?;
    let traj_path = dir.join("trajectory.json");
    fs::write(
        &traj_path,
        serde_json::to_string_pretty(&item.trajectory).expect("trajectory serializes"),
    )
    .map_err(|e| Error::io(&traj_path, e))?;
    Ok(())
}

pub fn load_labeled_video(dir: &Path) -> Result<LabeledVideo> {
    let video = load_video_dir(dir)?;
    let spec_path = dir.join("scene.json");
    let spec: SceneSpec = serde_json::from_str(
        &fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?,
    )
    .map_err(|e| Error::Format(format!("bad scene.json in {}: {e}", dir.display())))?;
    let traj_path = dir.join("trajectory.json");
    let trajectory: Trajectory = serde_json::from_str(
        &fs::read_to_string(&traj_path).map_err(|e| Error::io(&traj_path, e))?,
    )
    .map_err(|e| Error::Format(format!("bad trajectory.json in {}: {e}", dir.display())))?;
    if trajectory.num_frames() != video.num_frames() {
        return Err(Error::Format(format!(
            "trajectory has {} frames but video has {} in {}",
            trajectory.num_frames(),
            video.num_frames(),
            dir.display()
        )));
    }
    Ok(LabeledVideo {
        video,
        trajectory,
        spec,
    })
}

/// Render `count` scenes from `spec` into `scene_0000/ .. scene_NNNN/`.
pub fn synthesize_corpus(
    spec: &super::scene::CorpusSpec,
    count: usize,
    out: &Path,
) -> Result<Vec<LabeledVideo>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let items: Vec<Result<LabeledVideo>> = par_map_indices(count, |i| {
        let scene = spec.scene(i as u64);
        let item = make_moving_shapes(&scene)?;
        save_labeled_video(&item, &item_dir(out, i))?;
        Ok(item)
    });
    items.into_iter().collect()
}

pub fn load_corpus(root: &Path) -> Result<Vec<LabeledVideo>> {
    if !root.is_dir() {
        return Err(Error::NotFound(root.to_path_buf()));
    }
    let mut items = Vec::new();
    for i in 0.. {
        let dir = item_dir(root, i);
        if !dir.is_dir() {
            break;
        }
        items.push(load_labeled_video(&dir)?);
    }
    if items.is_empty() {
        return Err(Error::Format(format!(
            "no scene_0000/ style items under {}",
            root.display()
        )));
    }
    Ok(items)
}

/// Deterministic train/holdout split: every `holdout_every`-th item (by index)
/// is held out. `holdout_every == 0` keeps everything in the training split.
pub fn split_corpus(
    items: &[LabeledVideo],
    holdout_every: usize,
) -> (Vec<LabeledVideo>, Vec<LabeledVideo>) {
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for (i, item) in items.iter().enumerate() {
        if holdout_every > 0 && (i + 1) % holdout_every == 0 {
            holdout.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    (train, holdout)
}

/// SHA-256 over every frame, scene spec, and trajectory of a corpus, for
/// fairness/provenance stamping in reports.
pub fn corpus_hash(items: &[LabeledVideo]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    for item in items {
        hasher.update(serde_json::to_vec(&item.spec).expect("spec serializes"));
        hasher.update(serde_json::to_vec(&item.trajectory).expect("trajectory serializes"));
        for v in item.video.frames.iter() {
            hasher.update(v.to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::scene::CorpusSpec;

    fn tiny_corpus(n: usize) -> Vec<LabeledVideo> {
        let cs = CorpusSpec::demo(4);
        (0..n)
            .map(|i| make_moving_shapes(&cs.scene(i as u64)).unwrap())
            .collect()
    }

    #[test]
    fn self_pair_target_is_source_frame_zero() {
        let corpus = tiny_corpus(1);
        let pair = sample_pair(&corpus, PairMode::SelfPair, 7).unwrap();
        assert_eq!(pair.target.pixels, corpus[0].video.frame(0));
        assert_eq!(
            pair.gt_video.as_ref().unwrap().frames,
            corpus[0].video.frames
        );
    }

    #[test]
    fn cross_sampling_is_deterministic_in_seed() {
        let corpus = tiny_corpus(2);
        let a = sample_pair(&corpus, PairMode::Cross, 42).unwrap();
        let b = sample_pair(&corpus, PairMode::Cross, 42).unwrap();
        assert_eq!(a.source_index, b.source_index);
        assert_eq!(a.target_index, b.target_index);
        assert_eq!(a.source.frames, b.source.frames);
    }

    #[test]
    fn cross_with_singleton_corpus_is_a_config_error() {
        let corpus = tiny_corpus(1);
        match sample_pair(&corpus, PairMode::Cross, 0) {
            Err(Error::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    /// Ordered (i, j) pair frequencies stay within 10% of uniform over many draws.
    #[test]
    fn cross_draws_are_close_to_uniform() {
        let corpus = tiny_corpus(5);
        let draws = 10_000usize;
        let mut counts = vec![vec![0usize; 5]; 5];
        for s in 0..draws {
            let p = sample_pair(&corpus, PairMode::Cross, s as u64).unwrap();
            counts[p.source_index][p.target_index] += 1;
        }
        let expect = draws as f64 / 20.0; // 5*4 ordered pairs
        for i in 0..5 {
            assert_eq!(counts[i][i], 0, "self pair drawn in cross mode");
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let c = counts[i][j] as f64;
                assert!(
                    (c - expect).abs() / expect < 0.10,
                    "pair ({i},{j}) count {c} vs expected {expect}"
                );
            }
        }
    }

    #[test]
    fn corpus_roundtrip_and_split() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec::demo(4);
        let items = synthesize_corpus(&spec, 8, dir.path()).unwrap();
        let loaded = load_corpus(dir.path()).unwrap();
        assert_eq!(loaded.len(), 8);
        for (a, b) in items.iter().zip(loaded.iter()) {
            assert_eq!(a.video.frames, b.video.frames);
            assert_eq!(a.spec, b.spec);
        }
        let (train, holdout) = split_corpus(&loaded, 4);
        assert_eq!(train.len(), 6);
        assert_eq!(holdout.len(), 2);
        assert_eq!(corpus_hash(&loaded), corpus_hash(&items));
    }
}
