#ifndef TCDSEG_SYNTHETIC_HPP
#define TCDSEG_SYNTHETIC_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "tcdseg/annotations.hpp"
#include "tcdseg/types.hpp"

namespace tcdseg {

// Synthetic CBFV pulse: baseline plus a systolic and a dicrotic Gaussian
// bump. The clean preset stays well inside the (v_min, v_max) band.
struct PulseModel {
    double systolic_amp = 60.0;     // cm/s above baseline
    double systolic_width_s = 0.09; // Gaussian sigma
    double dicrotic_amp = 15.0;
    double dicrotic_delay_s = 0.35; // after the systolic peak
    double baseline = 40.0;         // cm/s
    double hr_bpm = 70.0;
    double hr_jitter = 0.05;        // relative period jitter, in [0, 1)

    static PulseModel clean() { return {}; }
};

enum class ArtifactKind { Dropout, Spike, Decouple, MorphDistort };

struct ArtifactSpec {
    ArtifactKind kind = ArtifactKind::Dropout;
    double fraction = 0.0;       // of beats (or of full windows for Decouple)
    std::uint32_t rng_seed = 0;
};

struct TrueBeat {
    SampleIndex onset = 0;
    SampleIndex end = 0;  // exclusive
    bool artifact = false;
    std::optional<ArtifactKind> kind;

    bool operator==(const TrueBeat&) const = default;
};

// Generator-side labels, aligned with the generated beat boundaries.
// decoupled_window_starts records which full spectral windows were replaced
// by noise (kept in memory for stage-attribution checks; not serialized).
struct GroundTruth {
    std::vector<TrueBeat> beats;
    std::vector<SampleIndex> decoupled_window_starts;

    bool operator==(const GroundTruth&) const = default;
};

// Artifact = positive.
struct ConfusionStats {
    std::int64_t tp = 0;
    std::int64_t tn = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    double disagreement = 0.0;  // (fp + fn) / (tp + tn + fp + fn)
    double sensitivity = 0.0;   // tp / (tp + fn), 0 when undefined
    double specificity = 0.0;   // tn / (tn + fp), 0 when undefined
};

struct SyntheticRecording {
    Recording rec;
    GroundTruth truth;
    std::vector<SampleIndex> onsets;  // generator beat onsets
};

// Deterministic per seed. CBFV is a jittered pulse train; ABP is
// 80 + 0.5 * (CBFV - baseline) plus small independent noise, so the two
// channels are spectrally coupled but not identical.
SyntheticRecording gen_recording(const PulseModel& model, double duration_s,
                                 double fs_hz, std::uint32_t seed);

// Corrupts the recording in place and updates the ground truth.
//   Dropout      clamps each chosen beat to uniform(0,3) cm/s from a random
//                mid-beat phase to the beat end (the systolic upstroke is
//                kept so the beat remains detectable as its own beat)
//   Spike        adds a short impulse exceeding 300 cm/s
//   Decouple     replaces whole 8 s windows of CBFV with amplitude-matched
//                filtered noise
//   MorphDistort smooths the pulse after its systolic peak into a slow
//                decay and halves the dicrotic bump
// The number of affected beats (windows for Decouple) is
// round(fraction * total); only still-good beats are chosen.
void inject(Recording& rec, GroundTruth& truth, const ArtifactSpec& spec);

// Scores classifier output against generator truth. Each evaluable
// predicted beat (stage-0 beats are excluded) is matched to the truth beat
// with maximal interval overlap. Throws NoOverlap when no predicted beat
// overlaps any truth beat.
ConfusionStats evaluate(const AnnotationSet& ann, const GroundTruth& truth);

// Truth sidecar: JSON lines {"onset":int,"end":int,"label":"good"|"artifact"}
// with a "kind" field on injected beats.
void write_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth read_truth(const std::filesystem::path& path);

}  // namespace tcdseg

#endif  // TCDSEG_SYNTHETIC_HPP
