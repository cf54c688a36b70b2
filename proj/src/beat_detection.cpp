#include "tcdseg/beat_detection.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "tcdseg/errors.hpp"

namespace tcdseg {

Channel scale_cbfv(const Channel& ch, double k) {
    if (!(k > 0.0)) throw NonPositiveScale("scale factor must be positive, got " + std::to_string(k));
    Channel out = ch;
    for (auto& v : out.samples) v *= k;
    return out;
}

namespace {

struct Biquad {
    double b0, b1, b2, a1, a2;
};

// Second-order Butterworth low-pass, bilinear transform.
Biquad butterworth_lowpass(double cutoff_hz, double fs_hz) {
    const double k = std::tan(std::numbers::pi * cutoff_hz / fs_hz);
    const double q = 1.0 / std::numbers::sqrt2;
    const double norm = 1.0 / (1.0 + k / q + k * k);
    Biquad f;
    f.b0 = k * k * norm;
    f.b1 = 2.0 * f.b0;
    f.b2 = f.b0;
    f.a1 = 2.0 * (k * k - 1.0) * norm;
    f.a2 = (1.0 - k / q + k * k) * norm;
    return f;
}

// Direct-form II transposed, with the state initialised to the steady state
// of x[0] so a constant input passes through without a transient.
void filter_forward(const Biquad& f, std::vector<double>& x) {
    if (x.empty()) return;
    double z1 = (1.0 - f.b0) * x[0];
    double z2 = (f.b2 - f.a2) * x[0];
    for (auto& v : x) {
        const double in = v;
        const double out = f.b0 * in + z1;
        z1 = f.b1 * in - f.a1 * out + z2;
        z2 = f.b2 * in - f.a2 * out;
        v = out;
    }
}

}  // namespace

Channel lowpass(const Channel& ch, double cutoff_hz) {
    const double nyquist = ch.fs.hz / 2.0;
    if (!(cutoff_hz > 0.0) || cutoff_hz >= nyquist)
        throw CutoffAboveNyquist("cutoff " + std::to_string(cutoff_hz) + " Hz outside (0, " +
                                 std::to_string(nyquist) + ")");
    Channel out = ch;
    const Biquad f = butterworth_lowpass(cutoff_hz, ch.fs.hz);
    filter_forward(f, out.samples);
    std::reverse(out.samples.begin(), out.samples.end());
    filter_forward(f, out.samples);
    std::reverse(out.samples.begin(), out.samples.end());
    return out;
}

Channel slope_sum(const Channel& ch, double window_s) {
    const auto w = static_cast<SampleIndex>(std::llround(window_s * ch.fs.hz));
    if (w < 1) throw WindowTooShort("slope-sum window shorter than one sample");

    const auto n = static_cast<SampleIndex>(ch.samples.size());
    Channel out = ch;
    std::vector<double>& ssf = out.samples;

    // Running sum of positive first differences over the trailing window;
    // before index w the sum covers whatever history exists.
    auto pos_diff = [&](SampleIndex i) {
        return i >= 1 ? std::max(0.0, ch.samples[i] - ch.samples[i - 1]) : 0.0;
    };
    double sum = 0.0;
    for (SampleIndex i = 0; i < n; ++i) {
        sum += pos_diff(i);
        if (i >= w) sum -= pos_diff(i - w);
        ssf[i] = std::max(0.0, sum);  // clip accumulated rounding noise
    }
    return out;
}

std::vector<SampleIndex> detect_onsets(const Channel& ch, const OnsetConfig& cfg) {
    const auto n = static_cast<SampleIndex>(ch.samples.size());
    if (ch.samples.empty() || ch.duration_s() < cfg.learn_s)
        throw RecordingTooShort("need at least " + std::to_string(cfg.learn_s) + " s of signal");

    const Channel filtered = lowpass(ch, cfg.lowpass_cutoff_hz);
    const Channel ssf_ch = slope_sum(filtered, cfg.ssf_window_s);
    const std::vector<double>& ssf = ssf_ch.samples;

    // A signal with no upstrokes has an SSF of rounding noise only. Both
    // guards are relative to the signal, so detection stays invariant under
    // positive rescaling.
    const auto [x_min, x_max] = std::minmax_element(ch.samples.begin(), ch.samples.end());
    const double range = *x_max - *x_min;
    const double ssf_max = *std::max_element(ssf.begin(), ssf.end());
    if (range == 0.0 || ssf_max <= 1e-9 * range) return {};

    const double fs = ch.fs.hz;
    const auto refractory = std::max<SampleIndex>(1, std::llround(cfg.refractory_s * fs));
    const auto horizon = std::max<SampleIndex>(1, std::llround(cfg.learn_s * fs));

    // Threshold seed: the median of per-block SSF maxima over the learning
    // window. A median survives a transient in one or two blocks where a
    // plain maximum would lock the threshold far above the beat peaks.
    const auto learn_n = std::min(horizon, n);
    const auto block = std::max<SampleIndex>(1, learn_n / 8);
    std::vector<double> block_maxima;
    for (SampleIndex lo = 0; lo < learn_n; lo += block) {
        const auto hi = std::min(learn_n, lo + block);
        block_maxima.push_back(*std::max_element(ssf.begin() + lo, ssf.begin() + hi));
    }
    std::nth_element(block_maxima.begin(), block_maxima.begin() + static_cast<std::ptrdiff_t>(block_maxima.size() / 2),
                     block_maxima.end());
    const double seed_peak = block_maxima[block_maxima.size() / 2];

    struct SsfPeak {
        SampleIndex idx;
        double amp;
    };
    std::deque<SsfPeak> recent;
    double recent_sum = 0.0;

    std::vector<SampleIndex> onsets;
    for (SampleIndex i = 1; i < n; ++i) {
        while (!recent.empty() && recent.front().idx < i - horizon) {
            recent_sum -= recent.front().amp;
            recent.pop_front();
        }
        const double mean_peak = recent.empty() ? seed_peak : recent_sum / static_cast<double>(recent.size());
        const double threshold = cfg.threshold_fraction * mean_peak;

        if (!(ssf[i] > threshold && ssf[i - 1] <= threshold)) continue;
        if (!onsets.empty() && i - onsets.back() < refractory) continue;

        // Track the peak of this above-threshold excursion (bounded by the
        // refractory span) so the adaptive threshold follows the signal.
        // The admitted amplitude is saturated at twice the rolling mean:
        // one outlier excursion must not price ordinary beats out.
        SsfPeak peak{i, ssf[i]};
        for (SampleIndex j = i; j < std::min(n, i + refractory) && ssf[j] > threshold; ++j) {
            if (ssf[j] > peak.amp) peak = {j, ssf[j]};
        }
        peak.amp = std::min(peak.amp, 2.0 * mean_peak);
        recent.push_back(peak);
        recent_sum += peak.amp;
        onsets.push_back(i);
    }
    return onsets;
}

std::vector<Beat> segment_beats(const Channel& ch, std::span<const SampleIndex> onsets) {
    const auto n = static_cast<SampleIndex>(ch.samples.size());
    for (std::size_t i = 0; i < onsets.size(); ++i) {
        if (onsets[i] < 0 || onsets[i] >= n)
            throw UnsortedOnsets("onset " + std::to_string(onsets[i]) + " out of range");
        if (i > 0 && onsets[i] <= onsets[i - 1]) throw UnsortedOnsets("onsets not strictly increasing");
    }
    std::vector<Beat> beats;
    if (onsets.size() < 2) return beats;
    beats.reserve(onsets.size() - 1);
    for (std::size_t i = 0; i + 1 < onsets.size(); ++i) beats.push_back(Beat{onsets[i], onsets[i + 1]});
    return beats;
}

}  // namespace tcdseg
