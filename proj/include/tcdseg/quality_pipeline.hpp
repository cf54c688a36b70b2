#ifndef TCDSEG_QUALITY_PIPELINE_HPP
#define TCDSEG_QUALITY_PIPELINE_HPP

#include <span>
#include <vector>

#include "tcdseg/annotations.hpp"
#include "tcdseg/beat_detection.hpp"
#include "tcdseg/config.hpp"
#include "tcdseg/types.hpp"

namespace tcdseg {

// One-sided power spectral density on a uniform frequency grid starting
// at 0 Hz.
struct Psd {
    std::vector<double> freqs;
    std::vector<double> power;

    bool operator==(const Psd&) const = default;
};

// Canonical CBFV pulse: pointwise median of the accepted beats, resampled
// to a common length.
struct PulseTemplate {
    std::vector<double> values;
    int n_beats = 0;

    bool operator==(const PulseTemplate&) const = default;
};

// Returned by band_correlation when either band-restricted power vector has
// zero variance. Below any admissible r_min, so the window is rejected.
inline constexpr double degenerate_band_r = -2.0;

// Stage 1: a beat is an artifact iff min < v_min or max > v_max. The metric
// records the violating extremum (the minimum is checked first).
BeatLabel stage_amplitude(std::span<const double> beat, const PipelineConfig& cfg);

// Welch PSD: averaged periodogram over Hann-windowed overlapping segments,
// each demeaned before windowing. Frequency resolution is 1/segment_s.
Psd welch_psd(std::span<const double> samples, double fs_hz, double segment_s, double overlap);

// Pearson correlation of two PSDs restricted to bins with lo_hz <= f <= hi_hz.
// Grids must be identical and the band must contain at least 3 bins.
double band_correlation(const Psd& a, const Psd& b, double lo_hz, double hi_hz);

// Stage-2 decision rule: a window is an artifact iff r < r_min (strict).
inline Verdict spectral_verdict(double r, const PipelineConfig& cfg) {
    return r < cfg.r_min ? Verdict::Artifact : Verdict::Good;
}

// Stage 2: tiles the recording into consecutive non-overlapping full
// windows of window_s seconds and correlates the CBFV and ABP band PSDs in
// each. Beats whose onset lies in a rejected window become stage-2
// artifacts (stage-1 labels are kept); still-good beats whose onset lies in
// the trailing partial window become unclassifiable.
std::vector<WindowVerdict> stage_spectral(const Recording& rec,
                                          std::span<const Beat> beats,
                                          std::vector<BeatLabel>& labels,
                                          const PipelineConfig& cfg);

// Linear interpolation of one beat onto template_len uniformly spaced
// points spanning the beat; endpoints are preserved.
std::vector<double> resample_beat(std::span<const double> beat, int template_len);

// Pointwise median (even count: mean of the two middle values) of the
// accepted beats after resampling to template_len. Throws NoAcceptedBeats
// when the list is empty.
PulseTemplate build_template(const std::vector<std::vector<double>>& accepted_beats,
                             const PipelineConfig& cfg);

// Residual power over template variance:
//   nmse(b, t) = sum (b_i - t_i)^2 / sum (t_i - mean(t))^2.
// Returns +infinity for a constant template.
double nmse(std::span<const double> beat_resampled, std::span<const double> tmpl);

// Stage 3: every still-good beat with nmse(resample_beat(beat), template)
// strictly above nmse_max becomes a stage-3 artifact.
void stage_template(const Channel& cbfv,
                    std::span<const Beat> beats,
                    std::vector<BeatLabel>& labels,
                    const PulseTemplate& tmpl,
                    const PipelineConfig& cfg);

// The full hierarchy: detect onsets on the scaled CBFV, segment, then run
// stages 1-3 in order. A beat's label records the first failing stage. The
// recording must be aligned and at least max(window_s, learn_s) long.
// Deterministic for fixed input and configuration.
AnnotationSet classify(const Recording& rec,
                       const OnsetConfig& onset_cfg = {},
                       const PipelineConfig& cfg = {});

}  // namespace tcdseg

#endif  // TCDSEG_QUALITY_PIPELINE_HPP
