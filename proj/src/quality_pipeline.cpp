#include "tcdseg/quality_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "tcdseg/errors.hpp"

namespace tcdseg {

BeatLabel stage_amplitude(std::span<const double> beat, const PipelineConfig& cfg) {
    const auto [lo, hi] = std::minmax_element(beat.begin(), beat.end());
    if (*lo < cfg.v_min) return BeatLabel::artifact(stage_amplitude_gate, *lo);
    if (*hi > cfg.v_max) return BeatLabel::artifact(stage_amplitude_gate, *hi);
    return BeatLabel::good();
}

namespace {

// RAII wrappers around the FFTW C API.
struct FftwBuffers {
    double* in = nullptr;
    fftw_complex* out = nullptr;
    fftw_plan plan = nullptr;

    explicit FftwBuffers(int n) {
        in = fftw_alloc_real(static_cast<std::size_t>(n));
        out = fftw_alloc_complex(static_cast<std::size_t>(n) / 2 + 1);
        plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    }
    ~FftwBuffers() {
        fftw_destroy_plan(plan);
        fftw_free(in);
        fftw_free(out);
    }
    FftwBuffers(const FftwBuffers&) = delete;
    FftwBuffers& operator=(const FftwBuffers&) = delete;
};

}  // namespace

Psd welch_psd(std::span<const double> samples, double fs_hz, double segment_s, double overlap) {
    const auto nper = static_cast<SampleIndex>(std::llround(segment_s * fs_hz));
    if (nper < 2) throw TooFewSamples("PSD segment shorter than 2 samples");
    if (static_cast<SampleIndex>(samples.size()) < nper)
        throw TooFewSamples("need at least one full PSD segment (" + std::to_string(nper) + " samples)");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw TooFewSamples("overlap must be in [0, 1)");

    const auto hop = std::max<SampleIndex>(1, nper - static_cast<SampleIndex>(std::floor(overlap * static_cast<double>(nper))));
    const auto nbins = static_cast<std::size_t>(nper / 2 + 1);

    // Periodic Hann window.
    std::vector<double> window(static_cast<std::size_t>(nper));
    double u = 0.0;  // sum of squared window values
    for (SampleIndex i = 0; i < nper; ++i) {
        window[static_cast<std::size_t>(i)] =
            0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(nper)));
        u += window[static_cast<std::size_t>(i)] * window[static_cast<std::size_t>(i)];
    }

    FftwBuffers fft(static_cast<int>(nper));
    std::vector<double> acc(nbins, 0.0);
    int nseg = 0;
    for (SampleIndex start = 0; start + nper <= static_cast<SampleIndex>(samples.size()); start += hop) {
        // Remove the segment mean before windowing so low-frequency bins
        // are not swamped by spectral leakage from the DC component.
        double mean = 0.0;
        for (SampleIndex i = 0; i < nper; ++i) mean += samples[static_cast<std::size_t>(start + i)];
        mean /= static_cast<double>(nper);
        for (SampleIndex i = 0; i < nper; ++i)
            fft.in[i] = (samples[static_cast<std::size_t>(start + i)] - mean) * window[static_cast<std::size_t>(i)];

        fftw_execute(fft.plan);
        for (std::size_t j = 0; j < nbins; ++j) {
            const double re = fft.out[j][0];
            const double im = fft.out[j][1];
            double p = (re * re + im * im) / (fs_hz * u);
            const bool is_dc = j == 0;
            const bool is_nyquist = (nper % 2 == 0) && j == nbins - 1;
            if (!is_dc && !is_nyquist) p *= 2.0;  // fold the one-sided spectrum
            acc[j] += p;
        }
        ++nseg;
    }

    Psd psd;
    psd.freqs.resize(nbins);
    psd.power.resize(nbins);
    for (std::size_t j = 0; j < nbins; ++j) {
        psd.freqs[j] = static_cast<double>(j) * fs_hz / static_cast<double>(nper);
        psd.power[j] = acc[j] / static_cast<double>(nseg);
    }
    return psd;
}

double band_correlation(const Psd& a, const Psd& b, double lo_hz, double hi_hz) {
    if (a.freqs.size() != b.freqs.size() || a.freqs != b.freqs)
        throw GridMismatch("PSD frequency grids differ");

    std::vector<double> pa, pb;
    for (std::size_t j = 0; j < a.freqs.size(); ++j) {
        if (a.freqs[j] >= lo_hz - 1e-9 && a.freqs[j] <= hi_hz + 1e-9) {
            pa.push_back(a.power[j]);
            pb.push_back(b.power[j]);
        }
    }
    if (pa.size() < 3)
        throw BandTooNarrow("band [" + std::to_string(lo_hz) + ", " + std::to_string(hi_hz) +
                            "] Hz covers only " + std::to_string(pa.size()) + " bins");

    const auto n = static_cast<double>(pa.size());
    const double ma = std::accumulate(pa.begin(), pa.end(), 0.0) / n;
    const double mb = std::accumulate(pb.begin(), pb.end(), 0.0) / n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t j = 0; j < pa.size(); ++j) {
        const double da = pa[j] - ma;
        const double db = pb[j] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    // Constant band power cannot support a correlation; force rejection.
    if (va <= 1e-30 * (1.0 + ma * ma) || vb <= 1e-30 * (1.0 + mb * mb)) return degenerate_band_r;
    return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

std::vector<WindowVerdict> stage_spectral(const Recording& rec,
                                          std::span<const Beat> beats,
                                          std::vector<BeatLabel>& labels,
                                          const PipelineConfig& cfg) {
    if (!rec.is_aligned()) throw NotAligned("stage_spectral needs an aligned recording");
    if (labels.size() != beats.size()) throw LengthMismatch("one label per beat required");

    const auto n = static_cast<SampleIndex>(rec.cbfv.samples.size());
    const double fs = rec.cbfv.fs.hz;
    const auto win = static_cast<SampleIndex>(std::llround(cfg.window_s * fs));
    if (win < 1) throw WindowTooShort("spectral window shorter than one sample");

    std::vector<WindowVerdict> windows;
    for (SampleIndex start = 0; start + win <= n; start += win) {
        const auto offset = static_cast<std::size_t>(start);
        const auto len = static_cast<std::size_t>(win);
        const Psd cbfv = welch_psd(std::span(rec.cbfv.samples).subspan(offset, len), fs,
                                   cfg.psd_segment_s, cfg.psd_overlap);
        const Psd abp = welch_psd(std::span(rec.abp.samples).subspan(offset, len), fs,
                                  cfg.psd_segment_s, cfg.psd_overlap);
        const double r = band_correlation(cbfv, abp, cfg.band_lo_hz, cfg.band_hi_hz);
        windows.push_back(WindowVerdict{start, start + win, r, spectral_verdict(r, cfg)});
    }

    const SampleIndex covered = windows.empty() ? 0 : windows.back().end;
    for (std::size_t i = 0; i < beats.size(); ++i) {
        if (!labels[i].is_good()) continue;  // stage-1 labels are final
        if (beats[i].onset >= covered) {
            labels[i] = BeatLabel::unclassifiable();
            continue;
        }
        const auto& w = windows[static_cast<std::size_t>(beats[i].onset / win)];
        if (w.verdict == Verdict::Artifact)
            labels[i] = BeatLabel::artifact(stage_spectral_check, w.r);
    }
    return windows;
}

std::vector<double> resample_beat(std::span<const double> beat, int template_len) {
    if (beat.size() < 2) throw BeatTooShort("cannot resample a beat of fewer than 2 samples");
    if (template_len < 2) throw LengthMismatch("template length must be at least 2");

    const auto n = beat.size();
    std::vector<double> out(static_cast<std::size_t>(template_len));
    const double step = static_cast<double>(n - 1) / static_cast<double>(template_len - 1);
    for (int j = 0; j < template_len; ++j) {
        const double pos = static_cast<double>(j) * step;
        auto i = static_cast<std::size_t>(pos);
        if (i >= n - 1) {
            out[static_cast<std::size_t>(j)] = beat[n - 1];
            continue;
        }
        const double frac = pos - static_cast<double>(i);
        out[static_cast<std::size_t>(j)] = beat[i] + frac * (beat[i + 1] - beat[i]);
    }
    out.front() = beat.front();
    out.back() = beat.back();
    return out;
}

PulseTemplate build_template(const std::vector<std::vector<double>>& accepted_beats,
                             const PipelineConfig& cfg) {
    if (accepted_beats.empty()) throw NoAcceptedBeats("no beats survived stages 1-2");

    std::vector<std::vector<double>> resampled;
    resampled.reserve(accepted_beats.size());
    for (const auto& b : accepted_beats) resampled.push_back(resample_beat(b, cfg.template_len));

    PulseTemplate tmpl;
    tmpl.n_beats = static_cast<int>(resampled.size());
    tmpl.values.resize(static_cast<std::size_t>(cfg.template_len));
    std::vector<double> column(resampled.size());
    for (std::size_t j = 0; j < tmpl.values.size(); ++j) {
        for (std::size_t i = 0; i < resampled.size(); ++i) column[i] = resampled[i][j];
        const auto mid = column.size() / 2;
        std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid), column.end());
        double median = column[mid];
        if (column.size() % 2 == 0) {
            const double below = *std::max_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid));
            median = 0.5 * (below + median);
        }
        tmpl.values[j] = median;
    }
    return tmpl;
}

double nmse(std::span<const double> beat_resampled, std::span<const double> tmpl) {
    if (beat_resampled.size() != tmpl.size())
        throw LengthMismatch("beat length " + std::to_string(beat_resampled.size()) +
                             " vs template length " + std::to_string(tmpl.size()));

    const double mean = std::accumulate(tmpl.begin(), tmpl.end(), 0.0) / static_cast<double>(tmpl.size());
    double residual = 0.0, variance = 0.0;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        const double d = beat_resampled[i] - tmpl[i];
        const double t = tmpl[i] - mean;
        residual += d * d;
        variance += t * t;
    }
    if (variance == 0.0) return std::numeric_limits<double>::infinity();
    return residual / variance;
}

void stage_template(const Channel& cbfv,
                    std::span<const Beat> beats,
                    std::vector<BeatLabel>& labels,
                    const PulseTemplate& tmpl,
                    const PipelineConfig& cfg) {
    if (labels.size() != beats.size()) throw LengthMismatch("one label per beat required");
    for (std::size_t i = 0; i < beats.size(); ++i) {
        if (!labels[i].is_good()) continue;
        const double err = nmse(resample_beat(beat_samples(cbfv, beats[i]), cfg.template_len), tmpl.values);
        if (err > cfg.nmse_max) labels[i] = BeatLabel::artifact(stage_template_check, err);
    }
}

AnnotationSet classify(const Recording& rec, const OnsetConfig& onset_cfg, const PipelineConfig& cfg) {
    if (!rec.is_aligned()) throw NotAligned("classify needs an aligned recording (run align first)");
    if (rec.cbfv.fs.hz < min_processing_hz)
        throw RateTooLow("pipeline needs fs >= " + std::to_string(min_processing_hz) + " Hz");
    const double min_duration = std::max(cfg.window_s, onset_cfg.learn_s);
    if (rec.cbfv.duration_s() < min_duration)
        throw RecordingTooShort("recording shorter than " + std::to_string(min_duration) + " s");

    const std::vector<SampleIndex> onsets =
        detect_onsets(scale_cbfv(rec.cbfv, onset_cfg.cbfv_scale), onset_cfg);
    const std::vector<Beat> beats = segment_beats(rec.cbfv, onsets);

    std::vector<BeatLabel> labels;
    labels.reserve(beats.size());
    for (const auto& b : beats) labels.push_back(stage_amplitude(beat_samples(rec.cbfv, b), cfg));

    std::vector<WindowVerdict> windows = stage_spectral(rec, beats, labels, cfg);

    std::vector<std::vector<double>> accepted;
    for (std::size_t i = 0; i < beats.size(); ++i) {
        if (!labels[i].is_good()) continue;
        const auto s = beat_samples(rec.cbfv, beats[i]);
        accepted.emplace_back(s.begin(), s.end());
    }
    if (!accepted.empty()) {
        const PulseTemplate tmpl = build_template(accepted, cfg);
        stage_template(rec.cbfv, beats, labels, tmpl, cfg);
    }
    // With no accepted beats the recording is unclassifiable at stage 3;
    // the stage-1/2 labels stand as they are.

    AnnotationSet ann;
    ann.config = ConfigSnapshot{rec.cbfv.fs.hz, onset_cfg, cfg};
    ann.beats.reserve(beats.size());
    for (std::size_t i = 0; i < beats.size(); ++i)
        ann.beats.push_back(AnnotatedBeat{beats[i].onset, beats[i].end, labels[i]});
    ann.windows = std::move(windows);
    return ann;
}

}  // namespace tcdseg
