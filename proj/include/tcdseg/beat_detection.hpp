#ifndef TCDSEG_BEAT_DETECTION_HPP
#define TCDSEG_BEAT_DETECTION_HPP

#include <span>
#include <vector>

#include "tcdseg/config.hpp"
#include "tcdseg/types.hpp"

namespace tcdseg {

// A half-open sample interval [onset, end) over the CBFV channel.
struct Beat {
    SampleIndex onset = 0;
    SampleIndex end = 0;

    SampleIndex length() const { return end - onset; }
    bool operator==(const Beat&) const = default;
};

inline std::span<const double> beat_samples(const Channel& ch, const Beat& b) {
    return std::span<const double>(ch.samples).subspan(static_cast<std::size_t>(b.onset),
                                                       static_cast<std::size_t>(b.length()));
}

// Multiplies every sample by k (k > 0), keeping rate and kind.
Channel scale_cbfv(const Channel& ch, double k);

// Zero-phase low-pass: a second-order Butterworth section run forward and
// backward. DC gain is 1 to within 1e-6; filter state is initialised to the
// steady state of the boundary sample, so constants pass through exactly.
Channel lowpass(const Channel& ch, double cutoff_hz);

// Slope sum function: ssf[n] = sum over the trailing window of the positive
// first differences. The first window's worth of samples is computed over
// whatever history exists. Output is nonnegative.
Channel slope_sum(const Channel& ch, double window_s);

// Beat-onset detection. The channel is low-passed, transformed to its slope
// sum, and scanned left to right with an adaptive threshold equal to
// threshold_fraction times the rolling mean of recent SSF peak amplitudes
// (horizon learn_s, seeded from the first learn_s of signal). Each onset is
// the sample where the SSF crosses the threshold upward, ahead of the local
// SSF peak; consecutive onsets are at least refractory_s apart.
//
// Onset indices are invariant under positive rescaling of the input.
std::vector<SampleIndex> detect_onsets(const Channel& ch, const OnsetConfig& cfg = {});

// Beat i spans [onset_i, onset_i+1); the tail after the last onset is
// discarded, so n onsets produce n-1 beats.
std::vector<Beat> segment_beats(const Channel& ch, std::span<const SampleIndex> onsets);

}  // namespace tcdseg

#endif  // TCDSEG_BEAT_DETECTION_HPP
