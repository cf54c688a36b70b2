#include "tcdseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "tcdseg/beat_detection.hpp"
#include "tcdseg/errors.hpp"

namespace tcdseg {

using ordered_json = nlohmann::ordered_json;

namespace {

// Synthetic beats place the systolic peak a fixed delay after onset; the
// upstroke from baseline to peak is what the onset detector keys on.
constexpr double systolic_peak_delay_s = 0.20;
constexpr double dicrotic_width_s = 0.10;
constexpr double abp_baseline_mmhg = 80.0;
constexpr double abp_gain = 0.5;
// In-band (low-passed) noise; wideband noise would vanish under the Welch
// averaging and leave the ABP/CBFV coupling indistinguishable from 1.
constexpr double abp_noise_sd = 3.0;
constexpr double abp_noise_cutoff_hz = 6.0;
constexpr double decouple_window_s = 8.0;

double gaussian_bump(double t, double center, double sigma) {
    const double d = (t - center) / sigma;
    return std::exp(-0.5 * d * d);
}

// CBFV value at time-since-onset tau for one pulse.
double pulse_value(const PulseModel& m, double tau) {
    return m.systolic_amp * gaussian_bump(tau, systolic_peak_delay_s, m.systolic_width_s) +
           m.dicrotic_amp * gaussian_bump(tau, systolic_peak_delay_s + m.dicrotic_delay_s, dicrotic_width_s);
}

void validate_model(const PulseModel& m, double duration_s, double fs_hz) {
    const bool ok = m.systolic_amp > 0 && m.systolic_width_s > 0 && m.dicrotic_amp > 0 &&
                    m.dicrotic_delay_s > 0 && m.baseline > 0 && m.hr_bpm > 0 &&
                    m.hr_jitter >= 0 && m.hr_jitter < 1;
    if (!ok) throw InvalidModel("pulse model fields must be positive (jitter in [0,1))");
    if (duration_s < 10.0) throw InvalidModel("duration must be at least 10 s");
    if (fs_hz < 100.0) throw InvalidModel("generator requires fs >= 100 Hz");
}

}  // namespace

SyntheticRecording gen_recording(const PulseModel& model, double duration_s,
                                 double fs_hz, std::uint32_t seed) {
    validate_model(model, duration_s, fs_hz);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    std::normal_distribution<double> white(0.0, 1.0);

    const auto n = static_cast<SampleIndex>(std::llround(duration_s * fs_hz));
    const double nominal_period = 60.0 / model.hr_bpm;

    // Jittered onset times, one past the end so the last beat can close.
    std::vector<double> onset_times{0.0};
    while (onset_times.back() < duration_s)
        onset_times.push_back(onset_times.back() + nominal_period * (1.0 + model.hr_jitter * jitter(rng)));

    std::vector<SampleIndex> onsets;
    onsets.reserve(onset_times.size());
    for (double t : onset_times) onsets.push_back(std::llround(t * fs_hz));

    std::vector<double> cbfv(static_cast<std::size_t>(n), model.baseline);
    for (std::size_t b = 0; b + 1 < onsets.size(); ++b) {
        const SampleIndex lo = onsets[b];
        const SampleIndex hi = std::min<SampleIndex>(onsets[b + 1], n);
        for (SampleIndex k = lo; k < hi; ++k) {
            const double t = static_cast<double>(k) / fs_hz;
            double v = model.baseline + pulse_value(model, t - onset_times[b]);
            if (b > 0) v += pulse_value(model, t - onset_times[b - 1]);  // dicrotic tail overlap
            cbfv[static_cast<std::size_t>(k)] = v;
        }
    }

    std::vector<double> noise(static_cast<std::size_t>(n));
    for (auto& v : noise) v = white(rng);
    Channel noise_ch{std::move(noise), SampleRate(fs_hz), ChannelKind::ABP};
    noise_ch = lowpass(noise_ch, std::min(abp_noise_cutoff_hz, 0.4 * fs_hz / 2.0));
    double nm = 0.0, nsq = 0.0;
    for (double v : noise_ch.samples) {
        nm += v;
        nsq += v * v;
    }
    nm /= static_cast<double>(n);
    const double nsd = std::sqrt(std::max(1e-12, nsq / static_cast<double>(n) - nm * nm));

    std::vector<double> abp(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < abp.size(); ++k)
        abp[k] = abp_baseline_mmhg + abp_gain * (cbfv[k] - model.baseline) +
                 abp_noise_sd * (noise_ch.samples[k] - nm) / nsd;

    SyntheticRecording out;
    out.rec.cbfv = Channel{std::move(cbfv), SampleRate(fs_hz), ChannelKind::CBFV};
    out.rec.abp = Channel{std::move(abp), SampleRate(fs_hz), ChannelKind::ABP};
    for (std::size_t b = 0; b + 1 < onsets.size() && onsets[b + 1] <= n; ++b) {
        out.truth.beats.push_back(TrueBeat{onsets[b], onsets[b + 1], false, std::nullopt});
        out.onsets.push_back(onsets[b]);
    }
    return out;
}

namespace {

// Stratified pick: one random beat per contiguous stratum of the eligible
// list. Spreads the injected beats over the recording instead of letting
// them pile into a few spectral windows.
std::vector<std::size_t> pick_good_beats(const GroundTruth& truth, double fraction, std::mt19937& rng) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < truth.beats.size(); ++i)
        if (!truth.beats[i].artifact) eligible.push_back(i);
    const auto want = std::min<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(truth.beats.size()))),
        eligible.size());

    std::vector<std::size_t> picked;
    picked.reserve(want);
    for (std::size_t k = 0; k < want; ++k) {
        const std::size_t lo = k * eligible.size() / want;
        const std::size_t hi = (k + 1) * eligible.size() / want;
        std::uniform_int_distribution<std::size_t> in_stratum(lo, hi - 1);
        picked.push_back(eligible[in_stratum(rng)]);
    }
    return picked;
}

void inject_dropout(Recording& rec, GroundTruth& truth, double fraction, std::mt19937& rng) {
    std::uniform_real_distribution<double> floor_value(0.0, 3.0);
    std::uniform_real_distribution<double> phase(0.25, 0.4);
    for (std::size_t i : pick_good_beats(truth, fraction, rng)) {
        TrueBeat& tb = truth.beats[i];
        const auto len = static_cast<double>(tb.end - tb.onset);
        // Signal loss starts partway through the beat (the upstroke
        // survives, so the beat stays detectable as its own interval) and
        // re-acquires over the last stretch: a ramp back to the original
        // level too gentle for the detector to read as an upstroke.
        const auto start = tb.onset + static_cast<SampleIndex>(phase(rng) * len);
        const auto ramp_start = tb.onset + static_cast<SampleIndex>(0.6 * len);
        const double recover = rec.cbfv.samples[static_cast<std::size_t>(tb.end) - 1];
        double floor_at_ramp = 1.5;
        for (SampleIndex k = start; k < ramp_start; ++k) {
            const double v = floor_value(rng);
            rec.cbfv.samples[static_cast<std::size_t>(k)] = v;
            floor_at_ramp = v;
        }
        for (SampleIndex k = ramp_start; k < tb.end; ++k) {
            const double u = static_cast<double>(k - ramp_start) / static_cast<double>(tb.end - ramp_start);
            rec.cbfv.samples[static_cast<std::size_t>(k)] = floor_at_ramp + u * (recover - floor_at_ramp);
        }
        tb.artifact = true;
        tb.kind = ArtifactKind::Dropout;
    }
}

void inject_spike(Recording& rec, GroundTruth& truth, double fraction, std::mt19937& rng) {
    std::uniform_real_distribution<double> peak(330.0, 390.0);
    std::uniform_real_distribution<double> phase(0.2, 0.8);
    const auto n = static_cast<SampleIndex>(rec.cbfv.samples.size());
    for (std::size_t i : pick_good_beats(truth, fraction, rng)) {
        TrueBeat& tb = truth.beats[i];
        const auto pos = tb.onset + static_cast<SampleIndex>(phase(rng) * static_cast<double>(tb.end - tb.onset));
        const double target = peak(rng);
        for (SampleIndex j = -2; j <= 2; ++j) {
            const SampleIndex k = pos + j;
            if (k < tb.onset || k >= std::min(tb.end, n)) continue;
            auto& v = rec.cbfv.samples[static_cast<std::size_t>(k)];
            v += (target - v) * (1.0 - std::abs(static_cast<double>(j)) / 3.0);
        }
        tb.artifact = true;
        tb.kind = ArtifactKind::Spike;
    }
}

void inject_decouple(Recording& rec, GroundTruth& truth, double fraction, std::mt19937& rng) {
    const double fs = rec.cbfv.fs.hz;
    const auto win = static_cast<SampleIndex>(std::llround(decouple_window_s * fs));
    const auto n = static_cast<SampleIndex>(rec.cbfv.samples.size());
    const auto n_windows = static_cast<std::size_t>(n / win);
    const auto want = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_windows)));

    std::vector<std::size_t> windows(n_windows);
    std::iota(windows.begin(), windows.end(), 0);
    std::shuffle(windows.begin(), windows.end(), rng);
    windows.resize(std::min(want, windows.size()));
    std::sort(windows.begin(), windows.end());

    std::normal_distribution<double> white(0.0, 1.0);
    for (std::size_t w : windows) {
        const auto lo = static_cast<SampleIndex>(w) * win;
        const auto hi = lo + win;

        double mean = 0.0, sq = 0.0;
        for (SampleIndex k = lo; k < hi; ++k) {
            const double v = rec.cbfv.samples[static_cast<std::size_t>(k)];
            mean += v;
            sq += v * v;
        }
        mean /= static_cast<double>(win);
        const double sd = std::sqrt(std::max(0.0, sq / static_cast<double>(win) - mean * mean));

        // Amplitude-matched band-pass filtered noise (5-16 Hz): plausible
        // velocity wiggle for the onset detector to chew on, with no power
        // concentrated on the cardiac harmonics below 5 Hz.
        Channel noise{std::vector<double>(static_cast<std::size_t>(win)), rec.cbfv.fs, ChannelKind::CBFV};
        for (auto& v : noise.samples) v = white(rng);
        const Channel low = lowpass(noise, std::min(5.0, 0.2 * fs / 2.0));
        for (std::size_t k = 0; k < noise.samples.size(); ++k) noise.samples[k] -= low.samples[k];
        noise = lowpass(noise, std::min(16.0, 0.45 * fs / 2.0));
        double nm = 0.0, nsq = 0.0;
        for (double v : noise.samples) {
            nm += v;
            nsq += v * v;
        }
        nm /= static_cast<double>(win);
        const double nsd = std::sqrt(std::max(1e-12, nsq / static_cast<double>(win) - nm * nm));
        for (SampleIndex k = lo; k < hi; ++k) {
            const double z = (noise.samples[static_cast<std::size_t>(k - lo)] - nm) / nsd;
            rec.cbfv.samples[static_cast<std::size_t>(k)] = std::clamp(mean + sd * z, 10.0, 250.0);
        }

        truth.decoupled_window_starts.push_back(lo);
        for (auto& tb : truth.beats) {
            if (tb.onset >= lo && tb.onset < hi) {
                tb.artifact = true;
                tb.kind = ArtifactKind::Decouple;  // waveform replaced, prior kind is gone
            }
        }
    }
}

void inject_morph_distort(Recording& rec, GroundTruth& truth, double fraction, std::mt19937& rng) {
    const double fs = rec.cbfv.fs.hz;
    const auto kernel = std::max<SampleIndex>(3, static_cast<SampleIndex>(std::llround(0.06 * fs)) | 1);
    std::uniform_real_distribution<double> plateau_q(0.35, 0.55);
    for (std::size_t i : pick_good_beats(truth, fraction, rng)) {
        TrueBeat& tb = truth.beats[i];
        const auto len = static_cast<std::size_t>(tb.end - tb.onset);
        std::vector<double> beat(len);
        for (std::size_t k = 0; k < len; ++k)
            beat[k] = rec.cbfv.samples[static_cast<std::size_t>(tb.onset) + k];

        // Damped pulse: keep the upstroke (the detector must still see the
        // beat) but replace everything past the systolic peak with a slow
        // plateau decay and no dicrotic bump. The onset-relative shape is
        // what stage 3 compares, and this one is far off the template.
        const double base = *std::min_element(beat.begin(), beat.end());
        const auto peak_at = static_cast<std::size_t>(
            std::max_element(beat.begin(), beat.end()) - beat.begin());
        const double peak_v = beat[peak_at];
        const double q = plateau_q(rng);
        std::vector<double> warped = beat;
        for (std::size_t k = peak_at + 1; k < len; ++k) {
            const double u = static_cast<double>(k - peak_at) / static_cast<double>(len - 1 - peak_at);
            warped[k] = base + (peak_v - base) * std::pow(1.0 - u, q);
        }
        warped[len - 1] = beat[len - 1];  // meet the next beat's foot

        // Round it off with a short moving average (edges reflected).
        std::vector<double> smooth(len);
        const SampleIndex half = kernel / 2;
        for (std::size_t k = 0; k < len; ++k) {
            double acc = 0.0;
            for (SampleIndex j = -half; j <= half; ++j) {
                auto idx = static_cast<SampleIndex>(k) + j;
                if (idx < 0) idx = -idx;
                if (idx >= static_cast<SampleIndex>(len)) idx = 2 * static_cast<SampleIndex>(len) - 2 - idx;
                acc += warped[static_cast<std::size_t>(idx)];
            }
            smooth[k] = acc / static_cast<double>(kernel);
        }
        for (std::size_t k = 0; k < len; ++k)
            rec.cbfv.samples[static_cast<std::size_t>(tb.onset) + k] = smooth[k];

        tb.artifact = true;
        tb.kind = ArtifactKind::MorphDistort;
    }
}

}  // namespace

void inject(Recording& rec, GroundTruth& truth, const ArtifactSpec& spec) {
    if (!(spec.fraction >= 0.0 && spec.fraction <= 1.0))
        throw InvalidModel("artifact fraction must be in [0, 1]");
    if (spec.fraction == 0.0) return;
    std::mt19937 rng(spec.rng_seed);
    switch (spec.kind) {
        case ArtifactKind::Dropout: inject_dropout(rec, truth, spec.fraction, rng); break;
        case ArtifactKind::Spike: inject_spike(rec, truth, spec.fraction, rng); break;
        case ArtifactKind::Decouple: inject_decouple(rec, truth, spec.fraction, rng); break;
        case ArtifactKind::MorphDistort: inject_morph_distort(rec, truth, spec.fraction, rng); break;
    }
}

ConfusionStats evaluate(const AnnotationSet& ann, const GroundTruth& truth) {
    ConfusionStats stats;
    std::size_t ti = 0;
    for (const auto& pb : ann.beats) {
        if (pb.label.is_unclassifiable()) continue;

        while (ti < truth.beats.size() && truth.beats[ti].end <= pb.onset) ++ti;
        SampleIndex best_overlap = 0;
        const TrueBeat* best = nullptr;
        for (std::size_t tj = ti; tj < truth.beats.size() && truth.beats[tj].onset < pb.end; ++tj) {
            const SampleIndex ov = std::min(pb.end, truth.beats[tj].end) - std::max(pb.onset, truth.beats[tj].onset);
            if (ov > best_overlap) {
                best_overlap = ov;
                best = &truth.beats[tj];
            }
        }
        if (!best) continue;

        const bool pred_artifact = pb.label.is_artifact();
        if (pred_artifact && best->artifact) ++stats.tp;
        else if (!pred_artifact && !best->artifact) ++stats.tn;
        else if (pred_artifact && !best->artifact) ++stats.fp;
        else ++stats.fn;
    }

    const std::int64_t total = stats.tp + stats.tn + stats.fp + stats.fn;
    if (total == 0) throw NoOverlap("no predicted beat overlaps any truth beat");
    stats.disagreement = static_cast<double>(stats.fp + stats.fn) / static_cast<double>(total);
    stats.sensitivity = stats.tp + stats.fn > 0
                            ? static_cast<double>(stats.tp) / static_cast<double>(stats.tp + stats.fn)
                            : 0.0;
    stats.specificity = stats.tn + stats.fp > 0
                            ? static_cast<double>(stats.tn) / static_cast<double>(stats.tn + stats.fp)
                            : 0.0;
    return stats;
}

namespace {

const char* kind_str(ArtifactKind k) {
    switch (k) {
        case ArtifactKind::Dropout: return "dropout";
        case ArtifactKind::Spike: return "spike";
        case ArtifactKind::Decouple: return "decouple";
        case ArtifactKind::MorphDistort: return "distort";
    }
    return "?";
}

ArtifactKind kind_from(const std::string& s) {
    if (s == "dropout") return ArtifactKind::Dropout;
    if (s == "spike") return ArtifactKind::Spike;
    if (s == "decouple") return ArtifactKind::Decouple;
    if (s == "distort") return ArtifactKind::MorphDistort;
    throw ParseError("unknown artifact kind '" + s + "'");
}

}  // namespace

void write_truth(const GroundTruth& truth, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& b : truth.beats) {
        ordered_json j;
        j["onset"] = b.onset;
        j["end"] = b.end;
        j["label"] = b.artifact ? "artifact" : "good";
        if (b.kind) j["kind"] = kind_str(*b.kind);
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

GroundTruth read_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    GroundTruth truth;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        TrueBeat b;
        b.onset = j.at("onset").get<SampleIndex>();
        b.end = j.at("end").get<SampleIndex>();
        b.artifact = j.at("label").get<std::string>() == "artifact";
        if (j.contains("kind")) b.kind = kind_from(j.at("kind").get<std::string>());
        truth.beats.push_back(b);
    }
    for (std::size_t i = 1; i < truth.beats.size(); ++i)
        if (truth.beats[i].onset < truth.beats[i - 1].end)
            throw ParseError("truth beat " + std::to_string(i) + " overlaps its predecessor");
    return truth;
}

}  // namespace tcdseg
