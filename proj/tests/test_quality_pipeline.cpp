#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "tcdseg/quality_pipeline.hpp"
#include "tcdseg/synthetic.hpp"
#include "tcdseg/waveform_io.hpp"
#include "test_support.hpp"

using namespace tcdseg;
using test_support::make_channel;
using test_support::sine_channel;

TEST_CASE("stage_amplitude") {
    PipelineConfig cfg;

    SUBCASE("interior beat is good") {
        const std::vector<double> beat{40, 80, 120, 90, 50};
        CHECK(stage_amplitude(beat, cfg).is_good());
    }
    SUBCASE("dip below 5 cm/s") {
        const std::vector<double> beat{40, 4, 120};
        const BeatLabel l = stage_amplitude(beat, cfg);
        CHECK(l.is_artifact());
        CHECK(l.stage == 1);
        CHECK(l.metric == 4.0);
    }
    SUBCASE("peak above 300 cm/s") {
        const std::vector<double> beat{40, 310, 120};
        const BeatLabel l = stage_amplitude(beat, cfg);
        CHECK(l.is_artifact());
        CHECK(l.stage == 1);
        CHECK(l.metric == 310.0);
    }
    SUBCASE("bounds themselves are not violations") {
        CHECK(stage_amplitude(std::vector<double>{5.0, 100.0}, cfg).is_good());
        CHECK(stage_amplitude(std::vector<double>{100.0, 300.0}, cfg).is_good());
    }
}

TEST_CASE("welch_psd") {
    PipelineConfig cfg;

    SUBCASE("zero signal has zero power") {
        const std::vector<double> zeros(1000, 0.0);
        const Psd psd = welch_psd(zeros, 125.0, cfg.psd_segment_s, cfg.psd_overlap);
        for (double p : psd.power) CHECK(p == 0.0);
        CHECK(psd.freqs.front() == 0.0);
        CHECK(psd.freqs[1] == doctest::Approx(0.5));  // 1 / psd_segment_s
    }
    SUBCASE("pure 1 Hz sinusoid peaks at the nearest bin, matching the DFT oracle") {
        const Channel sine = sine_channel(1.0, 125.0, 8.0, 30.0, 60.0);
        const Psd psd = welch_psd(sine.samples, 125.0, cfg.psd_segment_s, cfg.psd_overlap);
        CHECK(test_support::peak_freq(psd) == doctest::Approx(1.0));
        const auto oracle = test_support::dft_periodogram(sine.samples, 125.0);
        CHECK(test_support::peak_freq(oracle) == doctest::Approx(1.0));
    }
    SUBCASE("white-noise band power matches the bandwidth fraction") {
        std::mt19937 rng(4242);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<double> noise(125 * 64);
        for (auto& v : noise) v = g(rng);
        const Psd psd = welch_psd(noise, 125.0, cfg.psd_segment_s, cfg.psd_overlap);
        const double band = test_support::band_power(psd, 0.5, 5.0);
        const double full = test_support::band_power(psd, 0.0, 62.5);
        const double expected = 4.5 / 62.5;
        CHECK(band / full == doctest::Approx(expected).epsilon(0.2));
    }
    SUBCASE("needs at least one segment") {
        const std::vector<double> shorty(100, 1.0);
        CHECK_THROWS_AS(welch_psd(shorty, 125.0, 2.0, 0.5), TooFewSamples);
        const std::vector<double> pair{1.0, 2.0};
        CHECK_THROWS_AS(welch_psd(pair, 125.0, 0.004, 0.5), TooFewSamples);
    }
}

namespace {

Psd psd_from_band(std::vector<double> power) {
    Psd psd;
    for (std::size_t j = 0; j < power.size(); ++j) psd.freqs.push_back(0.5 + 0.5 * static_cast<double>(j));
    psd.power = std::move(power);
    return psd;
}

}  // namespace

TEST_CASE("band_correlation") {
    SUBCASE("self-correlation is 1") {
        const Psd a = psd_from_band({1, 2, 3, 4, 5});
        CHECK(band_correlation(a, a, 0.5, 2.5) == doctest::Approx(1.0));
    }
    SUBCASE("scale invariance: b = 3a") {
        const Psd a = psd_from_band({1, 2, 3, 4});
        const Psd b = psd_from_band({3, 6, 9, 12});
        CHECK(band_correlation(a, b, 0.5, 2.0) == doctest::Approx(1.0));
    }
    SUBCASE("perfect anticorrelation") {
        const Psd a = psd_from_band({1, 2, 3, 4});
        const Psd b = psd_from_band({4, 3, 2, 1});
        CHECK(band_correlation(a, b, 0.5, 2.0) == doctest::Approx(-1.0));
    }
    SUBCASE("symmetry and affine invariance") {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> dist(0.1, 9.0);
        for (int trial = 0; trial < 25; ++trial) {
            std::vector<double> pa(10), pb(10);
            for (auto& v : pa) v = dist(rng);
            for (auto& v : pb) v = dist(rng);
            const Psd a = psd_from_band(pa);
            const Psd b = psd_from_band(pb);
            const double r = band_correlation(a, b, 0.5, 5.0);
            CHECK(band_correlation(b, a, 0.5, 5.0) == doctest::Approx(r).epsilon(1e-12));
            std::vector<double> pb2(10);
            for (std::size_t j = 0; j < 10; ++j) pb2[j] = 2.5 * pb[j] + 7.0;
            CHECK(band_correlation(a, psd_from_band(pb2), 0.5, 5.0) == doctest::Approx(r).epsilon(1e-9));
            CHECK(r >= -1.0);
            CHECK(r <= 1.0);
        }
    }
    SUBCASE("constant band power forces the degenerate sentinel") {
        const Psd a = psd_from_band({2, 2, 2, 2});
        const Psd b = psd_from_band({1, 2, 3, 4});
        CHECK(band_correlation(a, b, 0.5, 2.0) == degenerate_band_r);
        CHECK(band_correlation(b, a, 0.5, 2.0) == degenerate_band_r);
    }
    SUBCASE("grid mismatch") {
        const Psd a = psd_from_band({1, 2, 3, 4});
        Psd b = psd_from_band({1, 2, 3, 4});
        b.freqs[1] += 0.01;
        CHECK_THROWS_AS(band_correlation(a, b, 0.5, 2.0), GridMismatch);
        const Psd c = psd_from_band({1, 2, 3});
        CHECK_THROWS_AS(band_correlation(a, c, 0.5, 2.0), GridMismatch);
    }
    SUBCASE("band must hold at least 3 bins") {
        const Psd a = psd_from_band({1, 2, 3, 4});
        CHECK_THROWS_AS(band_correlation(a, a, 0.5, 0.6), BandTooNarrow);
    }
}

TEST_CASE("spectral_verdict boundary is strict") {
    PipelineConfig cfg;  // r_min = 0.5
    CHECK(spectral_verdict(0.5, cfg) == Verdict::Good);
    CHECK(spectral_verdict(0.4999999, cfg) == Verdict::Artifact);
    CHECK(spectral_verdict(degenerate_band_r, cfg) == Verdict::Artifact);
}

namespace {

// Recording whose ABP equals the CBFV pulse train exactly.
Recording identical_channels_recording(std::uint32_t seed, double duration_s = 40.0) {
    auto syn = gen_recording(PulseModel::clean(), duration_s, 125.0, seed);
    Recording rec = syn.rec;
    rec.abp.samples = rec.cbfv.samples;
    return rec;
}

}  // namespace

TEST_CASE("stage_spectral") {
    PipelineConfig cfg;

    SUBCASE("identical channels make every window good with r = 1") {
        const Recording rec = identical_channels_recording(3);
        const auto onsets = detect_onsets(scale_cbfv(rec.cbfv, 2.0));
        const auto beats = segment_beats(rec.cbfv, onsets);
        std::vector<BeatLabel> labels(beats.size(), BeatLabel::good());
        const auto windows = stage_spectral(rec, beats, labels, cfg);
        REQUIRE(windows.size() == 5);  // 40 s / 8 s
        for (const auto& w : windows) {
            CHECK(w.verdict == Verdict::Good);
            CHECK(w.r == doctest::Approx(1.0));
        }
    }
    SUBCASE("a decoupled window is rejected and its beats inherit its r") {
        auto syn = gen_recording(PulseModel::clean(), 64.0, 125.0, 19);
        inject(syn.rec, syn.truth, {ArtifactKind::Decouple, 0.15, 99});
        REQUIRE(syn.truth.decoupled_window_starts.size() == 1);
        const SampleIndex bad_start = syn.truth.decoupled_window_starts[0];

        const auto onsets = detect_onsets(scale_cbfv(syn.rec.cbfv, 2.0));
        const auto beats = segment_beats(syn.rec.cbfv, onsets);
        std::vector<BeatLabel> labels;
        for (const auto& b : beats) labels.push_back(stage_amplitude(beat_samples(syn.rec.cbfv, b), cfg));
        const auto windows = stage_spectral(syn.rec, beats, labels, cfg);

        const auto win_len = windows[0].end - windows[0].start;
        std::size_t stage2 = 0;
        for (const auto& w : windows) {
            if (w.start == bad_start) {
                CHECK(w.verdict == Verdict::Artifact);
                CHECK(w.r < 0.5);
            } else {
                CHECK(w.verdict == Verdict::Good);
            }
        }
        for (std::size_t i = 0; i < beats.size(); ++i) {
            const bool in_bad = beats[i].onset >= bad_start && beats[i].onset < bad_start + win_len;
            if (in_bad && labels[i].is_artifact() && labels[i].stage == 2) {
                ++stage2;
                const auto& w = *std::find_if(windows.begin(), windows.end(),
                                              [&](const WindowVerdict& x) { return x.start == bad_start; });
                CHECK(labels[i].metric == w.r);  // inherits exactly
            }
            if (!in_bad && beats[i].onset < windows.back().end) CHECK(!(labels[i].stage == 2));
        }
        CHECK(stage2 > 3);
    }
    SUBCASE("stage-1 labels survive a rejected window") {
        auto syn = gen_recording(PulseModel::clean(), 64.0, 125.0, 19);
        inject(syn.rec, syn.truth, {ArtifactKind::Decouple, 0.15, 99});
        const auto onsets = detect_onsets(scale_cbfv(syn.rec.cbfv, 2.0));
        const auto beats = segment_beats(syn.rec.cbfv, onsets);
        std::vector<BeatLabel> labels(beats.size(), BeatLabel::artifact(1, 4.0));
        stage_spectral(syn.rec, beats, labels, cfg);
        for (const auto& l : labels) {
            CHECK(l.stage == 1);
            CHECK(l.metric == 4.0);
        }
    }
    SUBCASE("beats in the trailing partial window become unclassifiable") {
        const Recording rec = identical_channels_recording(5, 44.0);  // 5 windows + 4 s tail
        const auto onsets = detect_onsets(scale_cbfv(rec.cbfv, 2.0));
        const auto beats = segment_beats(rec.cbfv, onsets);
        std::vector<BeatLabel> labels(beats.size(), BeatLabel::good());
        const auto windows = stage_spectral(rec, beats, labels, cfg);
        const SampleIndex covered = windows.back().end;
        std::size_t tail_beats = 0;
        for (std::size_t i = 0; i < beats.size(); ++i) {
            if (beats[i].onset >= covered) {
                ++tail_beats;
                CHECK(labels[i].is_unclassifiable());
            } else {
                CHECK(labels[i].is_good());
            }
        }
        CHECK(tail_beats > 0);
    }
}

TEST_CASE("resample_beat") {
    SUBCASE("length-preserving call returns the values") {
        std::mt19937 rng(11);
        const auto beat = test_support::random_template(rng, 100);
        const auto out = resample_beat(beat, 100);
        for (std::size_t i = 0; i < beat.size(); ++i) CHECK(out[i] == doctest::Approx(beat[i]).epsilon(1e-9));
    }
    SUBCASE("linear ramp maps to a linear ramp of the new length") {
        std::vector<double> ramp(37);
        for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 36.0;
        const auto out = resample_beat(ramp, 100);
        REQUIRE(out.size() == 100);
        for (std::size_t j = 0; j < 100; ++j)
            CHECK(out[j] == doctest::Approx(static_cast<double>(j) / 99.0).epsilon(1e-12));
        CHECK(out.front() == 0.0);
        CHECK(out.back() == 1.0);
    }
    SUBCASE("round trip on a smooth pulse is nearly lossless") {
        const auto syn = gen_recording(PulseModel::clean(), 12.0, 125.0, 2);
        const auto& tb = syn.truth.beats[3];
        const std::vector<double> beat(syn.rec.cbfv.samples.begin() + tb.onset,
                                       syn.rec.cbfv.samples.begin() + tb.end);
        const auto down = resample_beat(beat, 100);
        const auto back = resample_beat(down, static_cast<int>(beat.size()));
        CHECK(nmse(back, beat) < 1e-3);
    }
    SUBCASE("too short") {
        CHECK_THROWS_AS(resample_beat(std::vector<double>{1.0}, 100), BeatTooShort);
    }
}

TEST_CASE("build_template") {
    PipelineConfig cfg;

    SUBCASE("identical beats reproduce the beat") {
        std::mt19937 rng(3);
        const auto p = test_support::random_template(rng, 80);
        const std::vector<std::vector<double>> beats{p, p, p};
        const PulseTemplate t = build_template(beats, cfg);
        CHECK(t.n_beats == 3);
        const auto expect = resample_beat(p, cfg.template_len);
        for (std::size_t j = 0; j < expect.size(); ++j) CHECK(t.values[j] == doctest::Approx(expect[j]));
    }
    SUBCASE("majority median: {p, p, q} gives p") {
        std::mt19937 rng(5);
        const auto p = test_support::random_template(rng, 100);
        const auto q = test_support::random_template(rng, 100);
        const PulseTemplate t = build_template({p, p, q}, cfg);
        for (std::size_t j = 0; j < p.size(); ++j) CHECK(t.values[j] == doctest::Approx(p[j]));
    }
    SUBCASE("no accepted beats") {
        CHECK_THROWS_AS(build_template({}, cfg), NoAcceptedBeats);
    }
    SUBCASE("median resists a few spike-corrupted beats") {
        const auto syn = gen_recording(PulseModel::clean(), 60.0, 125.0, 23);
        std::vector<std::vector<double>> beats;
        for (std::size_t i = 0; i < 55 && i < syn.truth.beats.size(); ++i) {
            const auto& tb = syn.truth.beats[i];
            beats.emplace_back(syn.rec.cbfv.samples.begin() + tb.onset, syn.rec.cbfv.samples.begin() + tb.end);
        }
        REQUIRE(beats.size() == 55);
        const PulseTemplate t0 = build_template(beats, cfg);  // before corruption
        std::mt19937 rng(8);
        std::uniform_int_distribution<std::size_t> pos(10, 80);
        for (std::size_t i = 0; i < 5; ++i) beats[i * 11][pos(rng)] = 400.0;
        const PulseTemplate t = build_template(beats, cfg);

        double diff = 0.0, ref = 0.0;
        for (std::size_t j = 0; j < t.values.size(); ++j) {
            diff += (t.values[j] - t0.values[j]) * (t.values[j] - t0.values[j]);
            ref += t0.values[j] * t0.values[j];
        }
        CHECK(std::sqrt(diff / ref) < 0.02);
    }
    SUBCASE("order invariance") {
        const auto syn = gen_recording(PulseModel::clean(), 30.0, 125.0, 31);
        std::vector<std::vector<double>> beats;
        for (const auto& tb : syn.truth.beats)
            beats.emplace_back(syn.rec.cbfv.samples.begin() + tb.onset, syn.rec.cbfv.samples.begin() + tb.end);
        const PulseTemplate ref = build_template(beats, cfg);
        std::mt19937 rng(77);
        for (int trial = 0; trial < 5; ++trial) {
            std::shuffle(beats.begin(), beats.end(), rng);
            CHECK(build_template(beats, cfg).values == ref.values);
        }
    }
}

TEST_CASE("nmse") {
    std::mt19937 rng(55);

    SUBCASE("identity and mirror") {
        for (int trial = 0; trial < 20; ++trial) {
            const auto t = test_support::random_template(rng, 100);
            CHECK(nmse(t, t) == 0.0);
            const double mean = std::accumulate(t.begin(), t.end(), 0.0) / 100.0;
            std::vector<double> mirror(100);
            for (std::size_t i = 0; i < 100; ++i) mirror[i] = 2.0 * mean - t[i];
            CHECK(nmse(mirror, t) == doctest::Approx(4.0).epsilon(1e-12));
        }
    }
    SUBCASE("constant offset follows the closed form") {
        const auto t = test_support::random_template(rng, 100);
        const double mean = std::accumulate(t.begin(), t.end(), 0.0) / 100.0;
        double variance = 0.0;
        for (double v : t) variance += (v - mean) * (v - mean);
        const double c = 3.0;
        std::vector<double> offset(t);
        for (auto& v : offset) v += c;
        CHECK(nmse(offset, t) == doctest::Approx(c * c * 100.0 / variance).epsilon(1e-12));
    }
    SUBCASE("length mismatch") {
        const std::vector<double> a(10, 1.0), b(11, 1.0);
        CHECK_THROWS_AS(nmse(a, b), LengthMismatch);
    }
    SUBCASE("constant template yields the infinite sentinel") {
        const std::vector<double> t(10, 2.0), b(10, 3.0);
        CHECK(std::isinf(nmse(b, t)));
    }
}

TEST_CASE("stage_template") {
    PipelineConfig cfg;
    const auto syn = gen_recording(PulseModel::clean(), 30.0, 125.0, 41);
    const auto onsets = detect_onsets(scale_cbfv(syn.rec.cbfv, 2.0));
    const auto beats = segment_beats(syn.rec.cbfv, onsets);
    std::vector<std::vector<double>> all;
    for (const auto& b : beats) {
        const auto s = beat_samples(syn.rec.cbfv, b);
        all.emplace_back(s.begin(), s.end());
    }
    const PulseTemplate tmpl = build_template(all, cfg);

    SUBCASE("clean beats stay good") {
        std::vector<BeatLabel> labels(beats.size(), BeatLabel::good());
        stage_template(syn.rec.cbfv, beats, labels, tmpl, cfg);
        for (const auto& l : labels) CHECK(l.is_good());
    }
    SUBCASE("a mirrored beat fails with a large metric") {
        Channel mutated = syn.rec.cbfv;
        const Beat& victim = beats[4];
        const double tmean = std::accumulate(tmpl.values.begin(), tmpl.values.end(), 0.0) /
                             static_cast<double>(tmpl.values.size());
        for (SampleIndex k = victim.onset; k < victim.end; ++k)
            mutated.samples[static_cast<std::size_t>(k)] =
                2.0 * tmean - mutated.samples[static_cast<std::size_t>(k)];

        std::vector<BeatLabel> labels(beats.size(), BeatLabel::good());
        stage_template(mutated, beats, labels, tmpl, cfg);
        CHECK(labels[4].is_artifact());
        CHECK(labels[4].stage == 3);
        CHECK(*labels[4].metric > 3.5);  // near the exact mirror value of 4
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (i != 4) CHECK(labels[i].is_good());
    }
    SUBCASE("unclassifiable beats are not re-labeled") {
        std::vector<BeatLabel> labels(beats.size(), BeatLabel::unclassifiable());
        stage_template(syn.rec.cbfv, beats, labels, tmpl, cfg);
        for (const auto& l : labels) CHECK(l.is_unclassifiable());
    }
}

TEST_CASE("morphology-distorted beats are flagged at stage 3") {
    auto syn = gen_recording(PulseModel::clean(), 300.0, 125.0, 11);
    inject(syn.rec, syn.truth, {ArtifactKind::MorphDistort, 0.10, 55});
    const AnnotationSet ann = classify(syn.rec);

    std::size_t flagged3 = 0, distorted = 0;
    for (const auto& tb : syn.truth.beats) {
        if (!tb.artifact) continue;
        ++distorted;
        SampleIndex best_ov = 0;
        const AnnotatedBeat* best = nullptr;
        for (const auto& pb : ann.beats) {
            const auto ov = std::min(pb.end, tb.end) - std::max(pb.onset, tb.onset);
            if (ov > best_ov) {
                best_ov = ov;
                best = &pb;
            }
        }
        if (best && best->label.is_artifact() && best->label.stage == 3) ++flagged3;
    }
    REQUIRE(distorted > 20);
    CHECK(static_cast<double>(flagged3) >= 0.95 * static_cast<double>(distorted));
}

TEST_CASE("classify") {
    SUBCASE("clean recording is nearly all good") {
        const auto syn = gen_recording(PulseModel::clean(), 300.0, 125.0, 62);
        const AnnotationSet ann = classify(syn.rec);
        std::size_t good = 0, classifiable = 0;
        for (const auto& b : ann.beats) {
            if (b.label.is_unclassifiable()) continue;
            ++classifiable;
            good += b.label.is_good() ? 1 : 0;
        }
        REQUIRE(classifiable > 300);
        CHECK(static_cast<double>(good) >= 0.98 * static_cast<double>(classifiable));
    }
    SUBCASE("every dropout beat is a stage-1 artifact and disagreement stays under 5%") {
        auto syn = gen_recording(PulseModel::clean(), 300.0, 125.0, 71);
        inject(syn.rec, syn.truth, {ArtifactKind::Dropout, 0.10, 72});
        const AnnotationSet ann = classify(syn.rec);

        for (const auto& tb : syn.truth.beats) {
            if (!tb.artifact) continue;
            SampleIndex best_ov = 0;
            const AnnotatedBeat* best = nullptr;
            for (const auto& pb : ann.beats) {
                const auto ov = std::min(pb.end, tb.end) - std::max(pb.onset, tb.onset);
                if (ov > best_ov) {
                    best_ov = ov;
                    best = &pb;
                }
            }
            REQUIRE(best != nullptr);
            CHECK(best->label.is_artifact());
            CHECK(best->label.stage == 1);
        }
        CHECK(evaluate(ann, syn.truth).disagreement <= 0.05);
    }
    SUBCASE("deterministic byte-for-byte") {
        const auto syn = gen_recording(PulseModel::clean(), 60.0, 125.0, 83);
        test_support::TempFile f1("ann1"), f2("ann2");
        write_annotations(classify(syn.rec), f1.path);
        write_annotations(classify(syn.rec), f2.path);
        std::ifstream a(f1.path), b(f2.path);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        CHECK(sa.str() == sb.str());
        CHECK(!sa.str().empty());
    }
    SUBCASE("window tiling is exact") {
        const auto syn = gen_recording(PulseModel::clean(), 100.0, 125.0, 29);
        const AnnotationSet ann = classify(syn.rec);
        const auto n = static_cast<SampleIndex>(syn.rec.cbfv.samples.size());
        const SampleIndex win = 8 * 125;
        REQUIRE(ann.windows.size() == static_cast<std::size_t>(n / win));
        for (std::size_t k = 0; k < ann.windows.size(); ++k) {
            CHECK(ann.windows[k].start == static_cast<SampleIndex>(k) * win);
            CHECK(ann.windows[k].end == static_cast<SampleIndex>(k + 1) * win);
        }
    }
    SUBCASE("hierarchy monotonicity: the recorded stage is the first failing stage") {
        auto syn = gen_recording(PulseModel::clean(), 300.0, 125.0, 87);
        inject(syn.rec, syn.truth, {ArtifactKind::Dropout, 0.10, 88});
        inject(syn.rec, syn.truth, {ArtifactKind::Decouple, 0.10, 89});
        inject(syn.rec, syn.truth, {ArtifactKind::MorphDistort, 0.05, 90});
        const AnnotationSet ann = classify(syn.rec);
        PipelineConfig cfg;

        auto window_of = [&](SampleIndex onset) -> const WindowVerdict* {
            for (const auto& w : ann.windows)
                if (onset >= w.start && onset < w.end) return &w;
            return nullptr;
        };
        for (const auto& b : ann.beats) {
            const auto& s = syn.rec.cbfv.samples;
            const auto lo = *std::min_element(s.begin() + b.onset, s.begin() + b.end);
            const auto hi = *std::max_element(s.begin() + b.onset, s.begin() + b.end);
            const bool amp_violation = lo < cfg.v_min || hi > cfg.v_max;
            const WindowVerdict* w = window_of(b.onset);

            if (b.label.is_unclassifiable()) {
                CHECK(w == nullptr);
                continue;
            }
            REQUIRE(w != nullptr);
            if (amp_violation) {
                CHECK(b.label.stage == 1);
            } else if (w->verdict == Verdict::Artifact) {
                CHECK(b.label.stage == 2);
                CHECK(b.label.metric == w->r);
            } else if (b.label.is_artifact()) {
                CHECK(b.label.stage == 3);
                CHECK(*b.label.metric > cfg.nmse_max);
            }
        }
    }
    SUBCASE("verdicts of stages 2 and 3 are invariant under CBFV rescaling") {
        auto syn = gen_recording(PulseModel::clean(), 300.0, 125.0, 93);
        inject(syn.rec, syn.truth, {ArtifactKind::Dropout, 0.08, 94});
        inject(syn.rec, syn.truth, {ArtifactKind::MorphDistort, 0.05, 95});
        const AnnotationSet ref = classify(syn.rec);

        for (double k : {0.5, 2.0}) {
            CAPTURE(k);
            Recording scaled = syn.rec;
            scaled.cbfv = scale_cbfv(scaled.cbfv, k);
            const AnnotationSet ann = classify(scaled);
            REQUIRE(ann.beats.size() == ref.beats.size());
            REQUIRE(ann.windows.size() == ref.windows.size());
            for (std::size_t i = 0; i < ann.windows.size(); ++i) {
                CHECK(ann.windows[i].verdict == ref.windows[i].verdict);
                CHECK(ann.windows[i].r == doctest::Approx(ref.windows[i].r).epsilon(1e-9));
            }
            for (std::size_t i = 0; i < ann.beats.size(); ++i) {
                CHECK(ann.beats[i].onset == ref.beats[i].onset);
                CHECK(ann.beats[i].label.verdict == ref.beats[i].label.verdict);
                CHECK(ann.beats[i].label.stage == ref.beats[i].label.stage);
                if (ref.beats[i].label.stage == 3)
                    CHECK(*ann.beats[i].label.metric ==
                          doctest::Approx(*ref.beats[i].label.metric).epsilon(1e-6));
            }
        }
    }
    SUBCASE("classify uses exactly the onsets of the scaled channel") {
        const auto syn = gen_recording(PulseModel::clean(), 60.0, 125.0, 45);
        OnsetConfig onset_cfg;
        const AnnotationSet ann = classify(syn.rec, onset_cfg);
        const auto onsets = detect_onsets(scale_cbfv(syn.rec.cbfv, onset_cfg.cbfv_scale), onset_cfg);
        const auto beats = segment_beats(syn.rec.cbfv, onsets);
        REQUIRE(ann.beats.size() == beats.size());
        for (std::size_t i = 0; i < beats.size(); ++i) {
            CHECK(ann.beats[i].onset == beats[i].onset);
            CHECK(ann.beats[i].end == beats[i].end);
        }
    }
    SUBCASE("with no accepted beats stage 3 is skipped and earlier labels stand") {
        auto syn = gen_recording(PulseModel::clean(), 60.0, 125.0, 51);
        inject(syn.rec, syn.truth, {ArtifactKind::Dropout, 1.0, 52});  // every beat dips below 5
        const AnnotationSet ann = classify(syn.rec);
        REQUIRE(!ann.beats.empty());
        for (const auto& b : ann.beats) {
            if (b.label.is_unclassifiable()) continue;
            CHECK(b.label.is_artifact());
            CHECK((b.label.stage == 1 || b.label.stage == 2));
        }
    }
    SUBCASE("preconditions") {
        const auto syn = gen_recording(PulseModel::clean(), 20.0, 125.0, 99);
        Recording bad = syn.rec;
        bad.abp.samples.pop_back();
        CHECK_THROWS_AS(classify(bad), NotAligned);

        const auto tiny = gen_recording(PulseModel::clean(), 10.0, 125.0, 99);
        Recording shorty = tiny.rec;
        shorty.cbfv.samples.resize(500);
        shorty.abp.samples.resize(500);
        CHECK_THROWS_AS(classify(shorty), RecordingTooShort);

        Recording slow = syn.rec;
        slow.cbfv.fs = SampleRate(10.0);
        slow.abp.fs = SampleRate(10.0);
        CHECK_THROWS_AS(classify(slow), RateTooLow);
    }
}
