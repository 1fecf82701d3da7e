//! End-to-end processing of a capture stream.
//!
//! Per frame: swap correction, pilot and DC-gap interpolation, notch repair,
//! power flattening, reference power scaling, windowed IDFT, first-signal
//! detection, delay calibration, π-shift correction and an optional moving
//! average, followed by peak tracking and noise-floor statistics on the
//! resulting series.
//!
//! The flattening profile needs a first pass over (a leading window of) the
//! capture; everything else runs in one streaming pass holding at most the
//! moving-average window in memory.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    delay_cdf, local_peaks, noise_power, peak_exclusions, resolution_s, CdfPoint, Track,
    TrackBuilder, DEFAULT_MASK_HALF_WIDTH_BINS, DEFAULT_TRACK_GATE_BINS,
};
use crate::calibrate::{
    calibrate_pair, fix_pi_shift, CalibratedPair, CalibrationState, StreamingMovingAverage,
};
use crate::capture::CaptureReader;
use crate::error::{Error, Result};
use crate::layout::SubcarrierLayout;
use crate::preprocess::{
    fix_swap_pair, interpolate_dc_gap, interpolate_pilots, repair_notches, scale_to_reference,
    FlatteningAccumulator, PowerFlatteningProfile, DC_CONTEXT,
};
use crate::sounding::{Sounder, WindowKind};
use crate::types::{CalibrationParams, ChainRecord, CsiFrame, ImpulseResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub ref_chain: usize,
    pub target_chain: usize,
    /// Delay-domain oversampling factor.
    pub kappa: usize,
    pub window: WindowKind,
    /// Overrides the capture's reference distance.
    pub d_ref_m: Option<f64>,
    /// Overrides the capture's first-signal threshold.
    pub first_peak_threshold_db: Option<f64>,
    /// Overrides the capture's moving-average window; 1 disables averaging.
    pub ma_window: Option<usize>,
    pub flatten: bool,
    /// Leading frames used to estimate the flattening profile; `None` uses
    /// the whole capture.
    pub flattening_frames: Option<usize>,
    pub dc_context: usize,
    pub interpolate_pilots: bool,
    pub fix_swaps: bool,
    pub fix_pi_shifts: bool,
    /// Peak threshold for tracks and noise masks, relative to the frame max.
    pub peak_threshold_db: f64,
    /// Track jump gate in resolution bins per frame.
    pub track_gate_bins: f64,
    /// Noise-mask half-width around each peak, in resolution bins.
    pub mask_half_width_bins: f64,
    /// Tracks shorter than this are dropped from the result.
    pub min_track_len: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            ref_chain: 0,
            target_chain: 1,
            kappa: 8,
            window: WindowKind::Blackman,
            d_ref_m: None,
            first_peak_threshold_db: None,
            ma_window: None,
            flatten: true,
            flattening_frames: None,
            dc_context: DC_CONTEXT,
            interpolate_pilots: true,
            fix_swaps: true,
            fix_pi_shifts: true,
            peak_threshold_db: -30.0,
            track_gate_bins: DEFAULT_TRACK_GATE_BINS,
            mask_half_width_bins: DEFAULT_MASK_HALF_WIDTH_BINS,
            min_track_len: 5,
        }
    }
}

impl PipelineOptions {
    /// Capture parameters with this run's overrides applied.
    pub fn effective_params(&self, base: &CalibrationParams) -> CalibrationParams {
        let mut p = base.clone();
        if let Some(d) = self.d_ref_m {
            p.d_ref_m = d;
        }
        if let Some(t) = self.first_peak_threshold_db {
            p.first_peak_threshold_db = t;
        }
        if let Some(w) = self.ma_window {
            p.ma_window = w;
        }
        p
    }
}

/// Settings echoed into the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub ref_chain: usize,
    pub target_chain: usize,
    pub kappa: usize,
    pub window: WindowKind,
    pub ma_window: usize,
    pub first_peak_threshold_db: f64,
    pub d_ref_m: f64,
    pub tau_ref_s: f64,
    pub center_freq_hz: f64,
    pub delay_bin_s: f64,
    pub resolution_s: f64,
    pub flatten: bool,
    pub peak_threshold_db: f64,
    pub track_gate_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunCounts {
    pub frames_read: usize,
    pub frames_calibrated: usize,
    pub no_signal: usize,
    pub swaps_fixed: usize,
    pub pi_shifts_fixed: usize,
    pub flattening_frames: usize,
    pub read_warnings: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseFloors {
    /// Mean masked noise power of the calibrated targets, dB.
    pub calibrated_db: Option<f64>,
    /// Same, after the moving average.
    pub averaged_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub config: RunConfig,
    pub counts: RunCounts,
    /// Capture frame index of each calibrated frame.
    pub frame_index: Vec<usize>,
    pub tau_star_s: Vec<f64>,
    pub theta_star_rad: Vec<f64>,
    pub swapped_frames: Vec<usize>,
    pub pi_flipped_frames: Vec<usize>,
    pub no_signal_frames: Vec<usize>,
    pub first_signal_cdf: Vec<CdfPoint>,
    pub noise_floor: NoiseFloors,
    /// Tracks over the output series; `frame` counts calibrated frames.
    pub tracks: Vec<Track>,
    /// Longest propagation distance among tracks present in the first
    /// output frame.
    pub max_path_distance_m: Option<f64>,
}

/// Calibration result of one input frame.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub frame_index: usize,
    pub timestamp_ns: u64,
    pub pair: CalibratedPair,
    pub swapped: bool,
    pub pi_flipped: bool,
}

/// One entry of the output series (the calibrated target, averaged when a
/// moving average is configured).
#[derive(Debug, Clone)]
pub struct SeriesFrame {
    /// Position in the output series.
    pub position: usize,
    pub frame_index: usize,
    pub timestamp_ns: u64,
    pub ir: ImpulseResponse,
}

/// What one call to [`Pipeline::process`] produced.
#[derive(Debug, Default)]
pub struct Step {
    /// `None` when the frame had no detectable reference signal.
    pub output: Option<FrameOutput>,
    /// Output-series entries that became final.
    pub ready: Vec<SeriesFrame>,
}

#[derive(Debug, Default)]
struct NoiseAccumulator {
    sum: f64,
    frames: usize,
}

impl NoiseAccumulator {
    fn add(&mut self, p: f64) {
        self.sum += p;
        self.frames += 1;
    }

    fn db(&self) -> Option<f64> {
        (self.frames > 0).then(|| 10.0 * (self.sum / self.frames as f64).log10())
    }
}

/// Streaming pipeline over one capture.
#[derive(Debug)]
pub struct Pipeline {
    layout: SubcarrierLayout,
    params: CalibrationParams,
    options: PipelineOptions,
    sounder: Sounder,
    profile: PowerFlatteningProfile,
    state: CalibrationState,
    averager: Option<StreamingMovingAverage>,
    pending: VecDeque<(usize, u64)>,
    tracker: TrackBuilder,
    counts: RunCounts,
    frame_index: Vec<usize>,
    tau_star: Vec<f64>,
    theta_star: Vec<f64>,
    swapped_frames: Vec<usize>,
    pi_flipped_frames: Vec<usize>,
    no_signal_frames: Vec<usize>,
    noise_calibrated: NoiseAccumulator,
    noise_final: NoiseAccumulator,
    emitted: usize,
}

impl Pipeline {
    pub fn new(layout: &SubcarrierLayout, params: &CalibrationParams, options: PipelineOptions) -> Result<Self> {
        layout.validate()?;
        let params = options.effective_params(params);
        params.validate()?;
        if options.ref_chain == options.target_chain {
            return Err(Error::InvalidConfig(
                "reference and target chains must differ".into(),
            ));
        }
        let sounder = Sounder::new(layout, options.kappa, options.window)?;
        let averager = if params.ma_window > 1 {
            Some(StreamingMovingAverage::new(params.ma_window)?)
        } else {
            None
        };
        let gate = options.track_gate_bins * resolution_s(layout);
        Ok(Pipeline {
            layout: layout.clone(),
            profile: PowerFlatteningProfile::identity(layout.count),
            sounder,
            state: CalibrationState::default(),
            averager,
            pending: VecDeque::new(),
            tracker: TrackBuilder::new(gate),
            counts: RunCounts::default(),
            frame_index: Vec::new(),
            tau_star: Vec::new(),
            theta_star: Vec::new(),
            swapped_frames: Vec::new(),
            pi_flipped_frames: Vec::new(),
            no_signal_frames: Vec::new(),
            noise_calibrated: NoiseAccumulator::default(),
            noise_final: NoiseAccumulator::default(),
            emitted: 0,
            params,
            options,
        })
    }

    pub fn params(&self) -> &CalibrationParams {
        &self.params
    }

    pub fn sounder(&self) -> &Sounder {
        &self.sounder
    }

    pub fn profile(&self) -> &PowerFlatteningProfile {
        &self.profile
    }

    pub fn set_profile(&mut self, profile: PowerFlatteningProfile) -> Result<()> {
        if profile.per_subcarrier_gain.len() != self.layout.count {
            return Err(Error::LengthMismatch {
                expected: self.layout.count,
                found: profile.per_subcarrier_gain.len(),
            });
        }
        self.counts.flattening_frames = profile.frames_used;
        self.profile = profile;
        Ok(())
    }

    fn sanitize(&self, chain: &ChainRecord) -> Result<ChainRecord> {
        let chain = if self.options.interpolate_pilots && !self.layout.pilot_indices.is_empty() {
            interpolate_pilots(chain, &self.layout)?
        } else {
            chain.clone()
        };
        let chain = interpolate_dc_gap(&chain, &self.layout, self.options.dc_context)?;
        Ok(repair_notches(&chain, &self.layout))
    }

    fn check_frame(&self, frame: &CsiFrame) -> Result<()> {
        frame.validate(&self.layout)?;
        for idx in [self.options.ref_chain, self.options.target_chain] {
            frame.chain(idx)?;
        }
        Ok(())
    }

    /// Estimates the flattening profile from the reference chain of the
    /// given frames (after swap correction and sanitization) and applies it
    /// to both chains from then on. Honors `flattening_frames`.
    pub fn fit_flattening<I>(&mut self, frames: I) -> Result<()>
    where
        I: IntoIterator<Item = Result<CsiFrame>>,
    {
        if !self.options.flatten {
            return Ok(());
        }
        let limit = self.options.flattening_frames.unwrap_or(usize::MAX);
        let mut acc = FlatteningAccumulator::new(self.layout.count);
        let mut state = CalibrationState::default();
        let (r, t) = (self.options.ref_chain, self.options.target_chain);
        for (index, frame) in frames.into_iter().take(limit).enumerate() {
            let mut frame = frame.map_err(|e| e.at_frame(index))?;
            self.check_frame(&frame).map_err(|e| e.at_frame(index))?;
            if self.options.fix_swaps {
                fix_swap_pair(&mut frame, r, t, &mut state)?;
            }
            if !(frame.chains[r].mean_power() > 0.0) {
                continue;
            }
            let reference = self.sanitize(&frame.chains[r]).map_err(|e| e.at_frame(index))?;
            acc.add(&reference)?;
        }
        if acc.frames() == 0 {
            return Ok(());
        }
        let profile = acc.finish(&self.layout)?;
        self.set_profile(profile)
    }

    /// Runs one frame through the pipeline. Frames must arrive in capture
    /// order; `frame_index` is the frame's position in the capture.
    pub fn process(&mut self, frame_index: usize, frame: CsiFrame) -> Result<Step> {
        self.counts.frames_read += 1;
        self.process_inner(frame_index, frame)
            .map_err(|e| e.at_frame(frame_index))
    }

    fn process_inner(&mut self, frame_index: usize, mut frame: CsiFrame) -> Result<Step> {
        self.check_frame(&frame)?;
        let (r, t) = (self.options.ref_chain, self.options.target_chain);
        let swapped = if self.options.fix_swaps {
            fix_swap_pair(&mut frame, r, t, &mut self.state)?
        } else {
            false
        };
        for idx in [r, t] {
            let clean = self.sanitize(&frame.chains[idx])?;
            frame.chains[idx] = self.profile.apply(&clean)?;
        }
        let calibrated = scale_to_reference(&frame, &self.params, r, t).and_then(|scaled| {
            let ref_ir = self.sounder.impulse_response(&scaled.chains[r].csi)?;
            let target_ir = self.sounder.impulse_response(&scaled.chains[t].csi)?;
            calibrate_pair(&ref_ir, &target_ir, &self.params)
        });
        let mut pair = match calibrated {
            Ok(p) => p,
            Err(Error::NoSignal) => {
                self.counts.no_signal += 1;
                self.no_signal_frames.push(frame_index);
                return Ok(Step::default());
            }
            Err(e) => return Err(e),
        };
        let pi_flipped = self.options.fix_pi_shifts && fix_pi_shift(&mut pair, &mut self.state);

        self.counts.frames_calibrated += 1;
        if swapped {
            self.counts.swaps_fixed += 1;
            self.swapped_frames.push(frame_index);
        }
        if pi_flipped {
            self.counts.pi_shifts_fixed += 1;
            self.pi_flipped_frames.push(frame_index);
        }
        self.frame_index.push(frame_index);
        self.tau_star.push(pair.tau_star_s);
        self.theta_star.push(pair.theta_star_rad);
        self.noise_calibrated.add(self.masked_noise(&pair.h_target)?);

        let mut ready = Vec::new();
        self.pending.push_back((frame_index, frame.timestamp_ns));
        match self.averager.as_mut() {
            Some(avg) => {
                if let Some((_, ir)) = avg.push(pair.h_target.clone())? {
                    ready.push(self.emit(ir)?);
                }
            }
            None => ready.push(self.emit(pair.h_target.clone())?),
        }
        Ok(Step {
            output: Some(FrameOutput {
                frame_index,
                timestamp_ns: frame.timestamp_ns,
                pair,
                swapped,
                pi_flipped,
            }),
            ready,
        })
    }

    fn masked_noise(&self, ir: &ImpulseResponse) -> Result<f64> {
        let peaks = local_peaks(ir, self.options.peak_threshold_db);
        let half = self.options.mask_half_width_bins * resolution_s(&self.layout);
        noise_power(ir, &peak_exclusions(&peaks, half))
    }

    fn emit(&mut self, ir: ImpulseResponse) -> Result<SeriesFrame> {
        let (frame_index, timestamp_ns) = self
            .pending
            .pop_front()
            .expect("one pending entry per calibrated frame");
        let position = self.emitted;
        self.emitted += 1;
        self.noise_final.add(self.masked_noise(&ir)?);
        self.tracker
            .push(position, &local_peaks(&ir, self.options.peak_threshold_db));
        Ok(SeriesFrame {
            position,
            frame_index,
            timestamp_ns,
            ir,
        })
    }

    /// Flushes the moving average and assembles the result.
    pub fn finish(mut self) -> Result<(ResultBundle, Vec<SeriesFrame>)> {
        let mut ready = Vec::new();
        if let Some(avg) = self.averager.take() {
            for (_, ir) in avg.finish() {
                ready.push(self.emit(ir)?);
            }
        }
        let min_len = self.options.min_track_len.min(self.emitted).max(1);
        let tracks: Vec<Track> = self
            .tracker
            .finish()
            .into_iter()
            .filter(|t| t.len() >= min_len)
            .collect();
        let max_path_distance_m = tracks
            .iter()
            .filter_map(|t| t.at_frame(0))
            .map(|p| p.delay_s * self.params.c_mps)
            .reduce(f64::max);
        let first_signal_cdf = if self.tau_star.is_empty() {
            Vec::new()
        } else {
            delay_cdf(&self.tau_star)?
        };
        let config = RunConfig {
            ref_chain: self.options.ref_chain,
            target_chain: self.options.target_chain,
            kappa: self.options.kappa,
            window: self.options.window,
            ma_window: self.params.ma_window,
            first_peak_threshold_db: self.params.first_peak_threshold_db,
            d_ref_m: self.params.d_ref_m,
            tau_ref_s: self.params.tau_ref_s(),
            center_freq_hz: self.params.center_freq_hz,
            delay_bin_s: self.sounder.delay_bin_s(),
            resolution_s: resolution_s(&self.layout),
            flatten: self.options.flatten,
            peak_threshold_db: self.options.peak_threshold_db,
            track_gate_s: self.options.track_gate_bins * resolution_s(&self.layout),
        };
        let bundle = ResultBundle {
            config,
            counts: self.counts,
            frame_index: self.frame_index,
            tau_star_s: self.tau_star,
            theta_star_rad: self.theta_star,
            swapped_frames: self.swapped_frames,
            pi_flipped_frames: self.pi_flipped_frames,
            no_signal_frames: self.no_signal_frames,
            first_signal_cdf,
            noise_floor: NoiseFloors {
                calibrated_db: self.noise_calibrated.db(),
                averaged_db: self.noise_final.db(),
            },
            tracks,
            max_path_distance_m,
        };
        Ok((bundle, ready))
    }
}

/// Result of running the pipeline over in-memory frames.
#[derive(Debug)]
pub struct PipelineRun {
    pub bundle: ResultBundle,
    pub outputs: Vec<FrameOutput>,
    pub series: Vec<SeriesFrame>,
}

/// Runs the pipeline over in-memory frames, keeping every per-frame output.
pub fn run_frames(
    layout: &SubcarrierLayout,
    params: &CalibrationParams,
    frames: &[CsiFrame],
    options: PipelineOptions,
) -> Result<PipelineRun> {
    let mut pipeline = Pipeline::new(layout, params, options)?;
    pipeline.fit_flattening(frames.iter().cloned().map(Ok))?;
    let mut outputs = Vec::new();
    let mut series = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        let step = pipeline.process(i, frame.clone())?;
        outputs.extend(step.output);
        series.extend(step.ready);
    }
    let (bundle, tail) = pipeline.finish()?;
    series.extend(tail);
    Ok(PipelineRun {
        bundle,
        outputs,
        series,
    })
}

/// Runs the pipeline over a capture file, streaming. `on_series` receives
/// every output-series entry in order.
pub fn run_pipeline_with(
    path: impl AsRef<Path>,
    options: PipelineOptions,
    mut on_series: impl FnMut(&SeriesFrame) -> Result<()>,
) -> Result<ResultBundle> {
    let path = path.as_ref();
    let reader = CaptureReader::open(path)?;
    let header = reader.header().clone();
    let mut pipeline = Pipeline::new(&header.layout, &header.params, options)?;
    pipeline.fit_flattening(reader)?;

    let mut reader = CaptureReader::open(path)?;
    for index in 0.. {
        let Some(frame) = reader.next() else { break };
        let frame = frame?;
        for s in pipeline.process(index, frame)?.ready {
            on_series(&s)?;
        }
    }
    let warnings = reader.warnings();
    let (mut bundle, tail) = pipeline.finish()?;
    for s in &tail {
        on_series(s)?;
    }
    bundle.counts.read_warnings = warnings;
    Ok(bundle)
}

/// Runs the pipeline over a capture file and returns only the summary.
pub fn run_pipeline(path: impl AsRef<Path>, options: PipelineOptions) -> Result<ResultBundle> {
    run_pipeline_with(path, options, |_| Ok(()))
}
