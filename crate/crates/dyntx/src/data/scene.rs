//! Synthetic moving-shapes scenes with analytic ground-truth trajectories.

use super::video::Video;
use crate::error::{Error, Result};
use ndarray::{Array3, Array4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Disc,
    Square,
    Triangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    /// Bounding radius in pixels (half-side for squares, circumradius for triangles).
    pub radius: f64,
    /// Fill grey level in [-1, 1].
    pub fill: f64,
}

impl ShapeSpec {
    /// Radius of the smallest disc covering the shape's support.
    pub fn cover_radius(&self) -> f64 {
        match self.kind {
            ShapeKind::Square => self.radius * std::f64::consts::SQRT_2,
            _ => self.radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotionSpec {
    Linear {
        start: [f64; 2],
        /// px / frame
        velocity: [f64; 2],
    },
    Circular {
        center: [f64; 2],
        orbit_radius: f64,
        /// rad / frame
        angular_velocity: f64,
        phase: f64,
    },
    Sinusoidal {
        center: [f64; 2],
        /// Oscillation direction (normalized internally).
        axis: [f64; 2],
        amplitude: f64,
        /// frames per full cycle
        period: f64,
        phase: f64,
    },
}

impl MotionSpec {
    /// Unclamped analytic position (x, y) at frame t.
    pub fn position(&self, t: usize) -> [f64; 2] {
        let tf = t as f64;
        match self {
            MotionSpec::Linear { start, velocity } => [
                start[0] + velocity[0] * tf,
                start[1] + velocity[1] * tf,
            ],
            MotionSpec::Circular {
                center,
                orbit_radius,
                angular_velocity,
                phase,
            } => {
                let a = phase + angular_velocity * tf;
                [
                    center[0] + orbit_radius * a.cos(),
                    center[1] + orbit_radius * a.sin(),
                ]
            }
            MotionSpec::Sinusoidal {
                center,
                axis,
                amplitude,
                period,
                phase,
            } => {
                let norm = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt().max(1e-12);
                let s = amplitude * (2.0 * std::f64::consts::PI * tf / period + phase).sin();
                [center[0] + s * axis[0] / norm, center[1] + s * axis[1] / norm]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// [height, width] in pixels.
    pub canvas: [usize; 2],
    pub num_frames: usize,
    #[serde(default = "default_fps")]
    pub fps: u32,
    /// Background grey level in [-1, 1].
    pub background: f64,
    pub shapes: Vec<ShapeSpec>,
    /// One motion per shape.
    pub motions: Vec<MotionSpec>,
    /// Reserved for randomized scene fields; rendering itself is deterministic.
    pub seed: u64,
}

fn default_fps() -> u32 {
    8
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let [h, w] = self.canvas;
        if h < 2 || w < 2 {
            return Err(Error::Config(format!("canvas {h}x{w} too small")));
        }
        if self.num_frames < 1 {
            return Err(Error::Config("num_frames must be >= 1".into()));
        }
        if self.shapes.is_empty() {
            return Err(Error::Config("scene needs at least one shape".into()));
        }
        if self.shapes.len() != self.motions.len() {
            return Err(Error::Config(format!(
                "{} shapes but {} motions (need one motion per shape)",
                self.shapes.len(),
                self.motions.len()
            )));
        }
        if !(-1.0..=1.0).contains(&self.background) {
            return Err(Error::Config("background outside [-1, 1]".into()));
        }
        for (i, s) in self.shapes.iter().enumerate() {
            if s.radius <= 0.0 {
                return Err(Error::Config(format!("shape {i} has radius {}", s.radius)));
            }
            if !(-1.0..=1.0).contains(&s.fill) {
                return Err(Error::Config(format!("shape {i} fill outside [-1, 1]")));
            }
            // the clamp interval [r, dim-1-r] must be non-empty on both axes
            if 2.0 * s.radius > (h - 1) as f64 || 2.0 * s.radius > (w - 1) as f64 {
                return Err(Error::Config(format!(
                    "canvas {h}x{w} too small for shape radius {}",
                    s.radius
                )));
            }
        }
        Ok(())
    }

    /// Position of shape `s` at frame `t`, clamped so the shape stays inside
    /// the canvas by at least its radius.
    pub fn clamped_position(&self, s: usize, t: usize) -> [f64; 2] {
        let [h, w] = self.canvas;
        let r = self.shapes[s].radius;
        let [x, y] = self.motions[s].position(t);
        [
            x.clamp(r, (w - 1) as f64 - r),
            y.clamp(r, (h - 1) as f64 - r),
        ]
    }
}

/// Per-frame analytic shape centroids: (T, num_shapes, 2) as (x, y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub centroids: Vec<Vec<[f64; 2]>>,
}

impl Trajectory {
    pub fn num_frames(&self) -> usize {
        self.centroids.len()
    }

    pub fn num_shapes(&self) -> usize {
        self.centroids.first().map_or(0, |row| row.len())
    }

    pub fn at(&self, t: usize, shape: usize) -> [f64; 2] {
        self.centroids[t][shape]
    }
}

#[derive(Debug, Clone)]
pub struct LabeledVideo {
    pub video: Video,
    pub trajectory: Trajectory,
    pub spec: SceneSpec,
}

const SUPERSAMPLE: usize = 4;

fn inside(kind: ShapeKind, radius: f64, dx: f64, dy: f64) -> bool {
    match kind {
        ShapeKind::Disc => dx * dx + dy * dy <= radius * radius,
        ShapeKind::Square => dx.abs() <= radius && dy.abs() <= radius,
        ShapeKind::Triangle => {
            // equilateral, apex pointing up (negative y in image coordinates)
            let verts = [
                (0.0, -radius),
                (radius * (3.0f64).sqrt() / 2.0, radius / 2.0),
                (-radius * (3.0f64).sqrt() / 2.0, radius / 2.0),
            ];
            for i in 0..3 {
                let (x1, y1) = verts[i];
                let (x2, y2) = verts[(i + 1) % 3];
                let cross = (x2 - x1) * (dy - y1) - (y2 - y1) * (dx - x1);
                if cross < 0.0 {
                    return false;
                }
            }
            true
        }
    }
}

/// Supersampled coverage of the shape over pixel (px, py).
fn coverage(kind: ShapeKind, radius: f64, cx: f64, cy: f64, px: usize, py: usize) -> f64 {
    let mut hits = 0usize;
    for sy in 0..SUPERSAMPLE {
        for sx in 0..SUPERSAMPLE {
            let x = px as f64 - 0.5 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
            let y = py as f64 - 0.5 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
            if inside(kind, radius, x - cx, y - cy) {
                hits += 1;
            }
        }
    }
    hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64
}

/// Render a scene to a video plus its analytic trajectory. Deterministic:
/// the same spec always produces a bit-identical result. Frames are snapped
/// to the 8-bit pixel lattice so a rendered corpus is identical in memory and
/// after a PNG round trip.
pub fn make_moving_shapes(spec: &SceneSpec) -> Result<LabeledVideo> {
    spec.validate()?;
    let [h, w] = spec.canvas;
    let t_total = spec.num_frames;
    let mut frames = Array4::<f32>::from_elem((t_total, 1, h, w), spec.background as f32);
    let mut centroids = Vec::with_capacity(t_total);
    for t in 0..t_total {
        let mut row = Vec::with_capacity(spec.shapes.len());
        for (si, shape) in spec.shapes.iter().enumerate() {
            let [cx, cy] = spec.clamped_position(si, t);
            row.push([cx, cy]);
            let r = shape.cover_radius();
            let x0 = ((cx - r - 1.0).floor().max(0.0)) as usize;
            let x1 = ((cx + r + 1.0).ceil() as usize).min(w - 1);
            let y0 = ((cy - r - 1.0).floor().max(0.0)) as usize;
            let y1 = ((cy + r + 1.0).ceil() as usize).min(h - 1);
            for py in y0..=y1 {
                for px in x0..=x1 {
                    let a = coverage(shape.kind, shape.radius, cx, cy, px, py);
                    if a > 0.0 {
                        let prev = frames[[t, 0, py, px]] as f64;
                        let mixed = prev + a * (shape.fill - prev);
                        frames[[t, 0, py, px]] = mixed as f32;
                    }
                }
            }
        }
        centroids.push(row);
    }
    frames.mapv_inplace(|v| {
        super::video::pixel_to_unit(super::video::unit_to_pixel(v))
    });
    Ok(LabeledVideo {
        video: Video::new(frames, spec.fps)?,
        trajectory: Trajectory { centroids },
        spec: spec.clone(),
    })
}

/// Intensity-weighted centroid of |frame - background| above `threshold`.
/// The independent oracle for trajectory checks on single-shape scenes.
pub fn frame_centroid(frame: &Array3<f32>, background: f64, threshold: f64) -> Option<[f64; 2]> {
    let (_c, h, w) = frame.dim();
    let mut mass = 0.0f64;
    let mut mx = 0.0f64;
    let mut my = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let mut v = 0.0f64;
            for c in 0..frame.dim().0 {
                v += (frame[[c, y, x]] as f64 - background).abs();
            }
            let wgt = (v / frame.dim().0 as f64 - threshold).max(0.0);
            mass += wgt;
            mx += wgt * x as f64;
            my += wgt * y as f64;
        }
    }
    if mass <= 1e-9 {
        None
    } else {
        Some([mx / mass, my / mass])
    }
}

/// Parameter ranges for randomized corpus generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub canvas: [usize; 2],
    pub num_frames: usize,
    #[serde(default = "default_fps")]
    pub fps: u32,
    pub seed: u64,
    #[serde(default = "CorpusSpec::default_kinds")]
    pub kinds: Vec<ShapeKind>,
    #[serde(default = "CorpusSpec::default_radius_range")]
    pub radius_range: [f64; 2],
    #[serde(default = "CorpusSpec::default_background_range")]
    pub background_range: [f64; 2],
    /// |fill - background| is drawn from this range (sign randomized).
    #[serde(default = "CorpusSpec::default_contrast_range")]
    pub contrast_range: [f64; 2],
    #[serde(default = "CorpusSpec::default_speed_range")]
    pub speed_range: [f64; 2],
}

impl CorpusSpec {
    fn default_kinds() -> Vec<ShapeKind> {
        vec![ShapeKind::Disc, ShapeKind::Square, ShapeKind::Triangle]
    }
    fn default_radius_range() -> [f64; 2] {
        [3.0, 6.0]
    }
    fn default_background_range() -> [f64; 2] {
        [-0.3, 0.3]
    }
    fn default_contrast_range() -> [f64; 2] {
        [0.5, 1.0]
    }
    fn default_speed_range() -> [f64; 2] {
        [0.5, 2.0]
    }

    pub fn demo(num_frames: usize) -> Self {
        CorpusSpec {
            canvas: [32, 32],
            num_frames,
            fps: 8,
            seed: 0,
            kinds: Self::default_kinds(),
            radius_range: Self::default_radius_range(),
            background_range: Self::default_background_range(),
            contrast_range: Self::default_contrast_range(),
            speed_range: Self::default_speed_range(),
        }
    }

    /// Deterministic per-index scene sampling (single-shape scenes).
    pub fn scene(&self, index: u64) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(self.seed, index));
        let [h, w] = self.canvas;
        let kind = self.kinds[rng.gen_range(0..self.kinds.len())];
        let radius = rng.gen_range(self.radius_range[0]..=self.radius_range[1]);
        let background = rng.gen_range(self.background_range[0]..=self.background_range[1]);
        let contrast = rng.gen_range(self.contrast_range[0]..=self.contrast_range[1]);
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let fill = (background + sign * contrast).clamp(-1.0, 1.0);
        let margin = radius * std::f64::consts::SQRT_2 + 1.0;
        let sx = rng.gen_range(margin..(w as f64 - 1.0 - margin));
        let sy = rng.gen_range(margin..(h as f64 - 1.0 - margin));
        let speed = rng.gen_range(self.speed_range[0]..=self.speed_range[1]);
        let motion = match rng.gen_range(0..3u32) {
            0 => {
                let dir = rng.gen_range(0.0..std::f64::consts::TAU);
                MotionSpec::Linear {
                    start: [sx, sy],
                    velocity: [speed * dir.cos(), speed * dir.sin()],
                }
            }
            1 => {
                let orbit = rng.gen_range(2.0..=(margin.min(6.0)).max(2.5));
                MotionSpec::Circular {
                    center: [sx, sy],
                    orbit_radius: orbit,
                    angular_velocity: speed / orbit,
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                }
            }
            _ => {
                let dir = rng.gen_range(0.0..std::f64::consts::TAU);
                let amplitude = rng.gen_range(2.0..=6.0);
                MotionSpec::Sinusoidal {
                    center: [sx, sy],
                    axis: [dir.cos(), dir.sin()],
                    amplitude,
                    period: rng.gen_range(6.0..=16.0),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                }
            }
        };
        SceneSpec {
            canvas: self.canvas,
            num_frames: self.num_frames,
            fps: self.fps,
            background,
            shapes: vec![ShapeSpec { kind, radius, fill }],
            motions: vec![motion],
            seed: splitmix(self.seed, index ^ 0x9e37),
        }
    }
}

fn splitmix(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

use rand::SeedableRng;

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Axis;

    fn one_disc(velocity: [f64; 2], t: usize) -> SceneSpec {
        SceneSpec {
            canvas: [32, 32],
            num_frames: t,
            fps: 8,
            background: -0.2,
            shapes: vec![ShapeSpec {
                kind: ShapeKind::Disc,
                radius: 3.0,
                fill: 0.8,
            }],
            motions: vec![MotionSpec::Linear {
                start: [4.0, 16.0],
                velocity,
            }],
            seed: 0,
        }
    }

    #[test]
    fn zero_motion_gives_identical_frames() {
        let lv = make_moving_shapes(&one_disc([0.0, 0.0], 5)).unwrap();
        let f0 = lv.video.frames.index_axis(Axis(0), 0).to_owned();
        for t in 1..5 {
            assert_eq!(lv.video.frames.index_axis(Axis(0), t), f0);
        }
        for t in 0..5 {
            assert_eq!(lv.trajectory.at(t, 0), [4.0, 16.0]);
        }
    }

    #[test]
    fn seed_field_does_not_perturb_deterministic_scene() {
        let mut a = one_disc([1.0, 0.0], 4);
        let mut b = a.clone();
        a.seed = 1;
        b.seed = 99;
        let va = make_moving_shapes(&a).unwrap();
        let vb = make_moving_shapes(&b).unwrap();
        assert_eq!(va.video.frames, vb.video.frames);
    }

    #[test]
    fn rendering_twice_is_bit_identical() {
        let spec = one_disc([1.0, 0.5], 6);
        let a = make_moving_shapes(&spec).unwrap();
        let b = make_moving_shapes(&spec).unwrap();
        assert_eq!(a.video.frames, b.video.frames);
        assert_eq!(a.trajectory, b.trajectory);
    }

    /// Closed-form kinematics: start x=4, vx=1, T=8 -> x = 4..=11, and the
    /// rasterize-then-centroid oracle agrees frame by frame.
    #[test]
    fn linear_trajectory_matches_centroid_oracle() {
        let lv = make_moving_shapes(&one_disc([1.0, 0.0], 8)).unwrap();
        for t in 0..8 {
            let expect_x = 4.0 + t as f64;
            let gt = lv.trajectory.at(t, 0);
            assert!((gt[0] - expect_x).abs() < 1e-12);
            assert!((gt[1] - 16.0).abs() < 1e-12);
            let frame = lv.video.frame(t);
            let measured = frame_centroid(&frame, lv.spec.background, 0.1).unwrap();
            let err = ((measured[0] - gt[0]).powi(2) + (measured[1] - gt[1]).powi(2)).sqrt();
            assert!(err < 0.5, "frame {t}: centroid off by {err} px");
        }
    }

    #[test]
    fn centroid_accuracy_for_all_kinds_at_subpixel_positions() {
        for kind in [ShapeKind::Disc, ShapeKind::Square, ShapeKind::Triangle] {
            for frac in [0.0, 0.25, 0.6] {
                let spec = SceneSpec {
                    canvas: [32, 32],
                    num_frames: 1,
                    fps: 8,
                    background: 0.0,
                    shapes: vec![ShapeSpec {
                        kind,
                        radius: 4.0,
                        fill: -0.9,
                    }],
                    motions: vec![MotionSpec::Linear {
                        start: [12.0 + frac, 14.0 - frac],
                        velocity: [0.0, 0.0],
                    }],
                    seed: 0,
                };
                let lv = make_moving_shapes(&spec).unwrap();
                let frame = lv.video.frame(0);
                let c = frame_centroid(&frame, 0.0, 0.1).unwrap();
                let gt = lv.trajectory.at(0, 0);
                // triangles are not symmetric about their circumcenter in y
                let tol = if kind == ShapeKind::Triangle { 1.1 } else { 0.5 };
                let err = ((c[0] - gt[0]).powi(2) + (c[1] - gt[1]).powi(2)).sqrt();
                assert!(err < tol, "{kind:?} frac {frac}: err {err}");
            }
        }
    }

    #[test]
    fn trajectories_are_clamped_inside_the_canvas() {
        let lv = make_moving_shapes(&one_disc([4.0, 0.0], 16)).unwrap();
        for t in 0..16 {
            let [x, y] = lv.trajectory.at(t, 0);
            assert!(x >= 3.0 && x <= 28.0, "x={x}");
            assert!(y >= 3.0 && y <= 28.0, "y={y}");
        }
    }

    #[test]
    fn too_small_canvas_is_a_config_error() {
        let mut spec = one_disc([0.0, 0.0], 1);
        spec.canvas = [5, 5];
        spec.shapes[0].radius = 3.0;
        match make_moving_shapes(&spec) {
            Err(Error::Config(msg)) => assert!(msg.contains("too small"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn corpus_scenes_are_deterministic_and_valid() {
        let cs = CorpusSpec::demo(8);
        for i in 0..20 {
            let a = cs.scene(i);
            let b = cs.scene(i);
            assert_eq!(a, b);
            a.validate().unwrap();
            make_moving_shapes(&a).unwrap();
        }
    }
}
