//! Synthetic contact scenarios, smoothing, and the sensor noise model.
//!
//! The generators stand in for a physics simulator: each produces a
//! deterministic, seeded ground-truth recording of a compact contact patch
//! so that frames are sparse under the Haar basis.
//!
//! * `SquarePress` - a uniform square footprint ramps up over the first
//!   quarter of the recording, holds for half, and ramps back down.
//! * `ShapeDrag` - an L-shaped footprint (two overlapping rectangles)
//!   translates across the grid at constant velocity and leaves it.
//! * `BlobPath` - an isotropic Gaussian bump (sigma 1.5 taxels, truncated
//!   at 3 sigma) follows a seeded random walk reflected at the borders.
//!
//! Noise is zero-mean Gaussian whose standard deviation peaks at the
//! sensor range midpoint and tapers linearly to zero at both range ends;
//! noisy values are clipped back into the range.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{Frame, GridShape, Recording, DEFAULT_FORCE_MAX, DEFAULT_FORCE_MIN};

/// Noise standard deviation at the sensor range midpoint, in Newtons
/// (5 percent of the default midpoint force).
pub const DEFAULT_NOISE_SIGMA_MID: f64 = 0.0628;

/// Gaussian bump width for `BlobPath`, in taxels.
pub const BLOB_SIGMA: f64 = 1.5;

/// The bump is exactly zero beyond this radius.
pub const BLOB_CUTOFF: f64 = 3.0 * BLOB_SIGMA;

/// Contact pattern plus its kind-specific geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioKind {
    /// Square footprint of `footprint` x `footprint` taxels at the grid
    /// center.
    SquarePress { footprint: usize },
    /// L-shaped footprint dragged rightward at `velocity` taxels per step.
    ShapeDrag { footprint: usize, velocity: f64 },
    /// Gaussian bump random walk advancing `step_len` taxels per step.
    BlobPath { step_len: f64 },
}

/// Everything needed to generate one deterministic recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub shape: GridShape,
    /// Number of time-steps T.
    pub steps: usize,
    /// Seconds per time-step.
    pub dt: f64,
    /// Peak contact force in Newtons; must not exceed the sensor maximum.
    pub peak_force: f64,
    pub seed: u64,
}

/// Tapered Gaussian sensor noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation at the range midpoint, in Newtons.
    pub sigma_mid: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma_mid: DEFAULT_NOISE_SIGMA_MID,
            f_min: DEFAULT_FORCE_MIN,
            f_max: DEFAULT_FORCE_MAX,
            seed: 0,
        }
    }
}

impl NoiseModel {
    /// Noise standard deviation at force level `v`: linear taper from
    /// `sigma_mid` at the midpoint to zero at both range ends.
    pub fn sigma_at(&self, v: f64) -> f64 {
        let mid = 0.5 * (self.f_min + self.f_max);
        let half = mid - self.f_min;
        (self.sigma_mid * (1.0 - (v - mid).abs() / half)).max(0.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma_mid.is_finite() && self.sigma_mid >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma_mid must be nonnegative, got {}",
                self.sigma_mid
            )));
        }
        if !(self.f_min.is_finite() && self.f_max.is_finite() && self.f_min < self.f_max) {
            return Err(Error::InvalidParameter(format!(
                "noise range must satisfy f_min < f_max, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        Ok(())
    }
}

/// Generates the ground-truth recording for a scenario. Deterministic
/// given the spec (including its seed).
pub fn generate(spec: &ScenarioSpec) -> Result<Recording> {
    if spec.steps == 0 {
        return Err(Error::InvalidParameter(
            "scenario needs at least 1 time-step".into(),
        ));
    }
    if !(spec.dt.is_finite() && spec.dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {}",
            spec.dt
        )));
    }
    if !(spec.peak_force > 0.0 && spec.peak_force <= DEFAULT_FORCE_MAX) {
        return Err(Error::InvalidParameter(format!(
            "peak force must lie in (0, {DEFAULT_FORCE_MAX}], got {}",
            spec.peak_force
        )));
    }
    let frames = match spec.kind {
        ScenarioKind::SquarePress { footprint } => square_press(spec, footprint)?,
        ScenarioKind::ShapeDrag {
            footprint,
            velocity,
        } => shape_drag(spec, footprint, velocity)?,
        ScenarioKind::BlobPath { step_len } => blob_path(spec, step_len)?,
    };
    Recording::new(
        spec.shape,
        spec.dt,
        frames,
        DEFAULT_FORCE_MIN,
        DEFAULT_FORCE_MAX,
    )
}

fn check_footprint(shape: GridShape, footprint: usize) -> Result<()> {
    if footprint == 0 || footprint > shape.rows() || footprint > shape.cols() {
        return Err(Error::InvalidParameter(format!(
            "footprint {footprint} does not fit a {}x{} grid",
            shape.rows(),
            shape.cols()
        )));
    }
    Ok(())
}

// Force level over time: ramp 0 -> peak over T/4 steps, hold at peak for
// T/2, ramp back to zero over the remainder. The first frame is zero.
fn press_profile(steps: usize, peak: f64, t: usize) -> f64 {
    let ramp_up = steps / 4;
    let hold = steps / 2;
    let ramp_down = steps - ramp_up - hold;
    if t < ramp_up {
        peak * t as f64 / ramp_up as f64
    } else if t < ramp_up + hold {
        peak
    } else {
        peak * (steps - 1 - t) as f64 / ramp_down as f64
    }
}

fn square_press(spec: &ScenarioSpec, footprint: usize) -> Result<Vec<Frame>> {
    check_footprint(spec.shape, footprint)?;
    let shape = spec.shape;
    let r0 = (shape.rows() - footprint) / 2;
    let c0 = (shape.cols() - footprint) / 2;
    let frames = (0..spec.steps)
        .map(|t| {
            let force = press_profile(spec.steps, spec.peak_force, t).min(DEFAULT_FORCE_MAX);
            let mut values = vec![0.0; shape.n()];
            if force > 0.0 {
                for r in r0..r0 + footprint {
                    for c in c0..c0 + footprint {
                        values[shape.index(r, c)] = force;
                    }
                }
            }
            Frame::new(shape, values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(frames)
}

// Cells of an L-shaped footprint inside an s x s bounding box: a vertical
// arm along the left edge and a horizontal arm along the bottom edge,
// both ceil(s/2) thick.
fn l_shape_cells(footprint: usize) -> Vec<(usize, usize)> {
    let thickness = footprint.div_ceil(2);
    let mut cells = Vec::new();
    for r in 0..footprint {
        for c in 0..footprint {
            let vertical = c < thickness;
            let horizontal = r >= footprint - thickness;
            if vertical || horizontal {
                cells.push((r, c));
            }
        }
    }
    cells
}

fn shape_drag(spec: &ScenarioSpec, footprint: usize, velocity: f64) -> Result<Vec<Frame>> {
    check_footprint(spec.shape, footprint)?;
    if !velocity.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "drag velocity must be finite, got {velocity}"
        )));
    }
    let shape = spec.shape;
    let cells = l_shape_cells(footprint);
    let r0 = (shape.rows() - footprint) / 2;
    let force = spec.peak_force.min(DEFAULT_FORCE_MAX);
    let frames = (0..spec.steps)
        .map(|t| {
            let offset = (t as f64 * velocity).round() as i64;
            let mut values = vec![0.0; shape.n()];
            for &(dr, dc) in &cells {
                let r = r0 + dr;
                let c = dc as i64 + offset;
                if c >= 0 && (c as usize) < shape.cols() {
                    values[shape.index(r, c as usize)] = force;
                }
            }
            Frame::new(shape, values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(frames)
}

// Reflects a coordinate into [0, limit] by folding.
fn reflect(mut x: f64, limit: f64) -> f64 {
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > limit {
            x = 2.0 * limit - x;
        } else {
            return x;
        }
    }
}

fn blob_path(spec: &ScenarioSpec, step_len: f64) -> Result<Vec<Frame>> {
    if !(step_len.is_finite() && step_len >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "path step length must be nonnegative, got {step_len}"
        )));
    }
    let shape = spec.shape;
    let max_r = (shape.rows() - 1) as f64;
    let max_c = (shape.cols() - 1) as f64;
    if step_len > max_r.min(max_c) {
        return Err(Error::InvalidParameter(format!(
            "path step length {step_len} exceeds the grid extent"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pr = rng.random::<f64>() * max_r;
    let mut pc = rng.random::<f64>() * max_c;
    let peak = spec.peak_force.min(DEFAULT_FORCE_MAX);
    let two_sigma_sq = 2.0 * BLOB_SIGMA * BLOB_SIGMA;
    let mut frames = Vec::with_capacity(spec.steps);
    for _ in 0..spec.steps {
        let mut values = vec![0.0; shape.n()];
        let r_lo = ((pr - BLOB_CUTOFF).floor().max(0.0)) as usize;
        let r_hi = ((pr + BLOB_CUTOFF).ceil().min(max_r)) as usize;
        let c_lo = ((pc - BLOB_CUTOFF).floor().max(0.0)) as usize;
        let c_hi = ((pc + BLOB_CUTOFF).ceil().min(max_c)) as usize;
        for r in r_lo..=r_hi {
            for c in c_lo..=c_hi {
                let d2 = (r as f64 - pr).powi(2) + (c as f64 - pc).powi(2);
                if d2 <= BLOB_CUTOFF * BLOB_CUTOFF {
                    values[shape.index(r, c)] =
                        (peak * (-d2 / two_sigma_sq).exp()).min(DEFAULT_FORCE_MAX);
                }
            }
        }
        frames.push(Frame::new(shape, values)?);
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        pr = reflect(pr + step_len * angle.sin(), max_r);
        pc = reflect(pc + step_len * angle.cos(), max_c);
    }
    Ok(frames)
}

/// Causal per-taxel moving average over the trailing `width` frames. The
/// first frames average over whatever history exists.
///
/// Each window is summed directly (no running sum), so width 1 is a
/// bitwise identity and the result matches a direct convolution oracle.
pub fn smooth(rec: &Recording, width: usize) -> Result<Recording> {
    if width == 0 {
        return Err(Error::InvalidParameter(
            "smoothing width must be at least 1".into(),
        ));
    }
    let n = rec.shape().n();
    let mut frames = Vec::with_capacity(rec.len());
    for t in 0..rec.len() {
        let lo = (t + 1).saturating_sub(width);
        let window = (t + 1 - lo) as f64;
        let mut values = vec![0.0; n];
        for s in lo..=t {
            for (sum, &v) in values.iter_mut().zip(rec.frames()[s].values()) {
                *sum += v;
            }
        }
        for v in &mut values {
            *v /= window;
        }
        frames.push(Frame::new(rec.shape(), values)?);
    }
    Recording::new(rec.shape(), rec.dt(), frames, rec.f_min(), rec.f_max())
}

/// Adds per-taxel, per-step tapered Gaussian noise and clips back into
/// the sensor range. Input values must already lie within the model's
/// range. Deterministic given the model seed.
pub fn add_noise(rec: &Recording, model: &NoiseModel) -> Result<Recording> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut frames = Vec::with_capacity(rec.len());
    for (t, frame) in rec.frames().iter().enumerate() {
        let values = frame
            .values()
            .iter()
            .map(|&v| {
                if v < model.f_min || v > model.f_max {
                    return Err(Error::Validation(format!(
                        "frame {t} holds {v}, outside the sensor range [{}, {}]",
                        model.f_min, model.f_max
                    )));
                }
                // Always consume one draw so the stream is data-independent.
                let z: f64 = StandardNormal.sample(&mut rng);
                Ok((v + model.sigma_at(v) * z).clamp(model.f_min, model.f_max))
            })
            .collect::<Result<Vec<f64>>>()?;
        frames.push(Frame::new(rec.shape(), values)?);
    }
    Recording::new(rec.shape(), rec.dt(), frames, rec.f_min(), rec.f_max())
}
