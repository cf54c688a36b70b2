#ifndef TCDSEG_ANNOTATIONS_HPP
#define TCDSEG_ANNOTATIONS_HPP

#include <cmath>
#include <optional>
#include <vector>

#include "tcdseg/config.hpp"
#include "tcdseg/types.hpp"

namespace tcdseg {

enum class Verdict { Good, Artifact };

// Stage numbers used in beat labels and annotation files.
inline constexpr int stage_unclassifiable = 0;
inline constexpr int stage_amplitude_gate = 1;
inline constexpr int stage_spectral_check = 2;
inline constexpr int stage_template_check = 3;

// Per-beat classification result.
//
// Encoding follows the annotation wire format:
//   - good, fully evaluated beat:   verdict Good, no stage, no metric
//   - unclassifiable beat (onset in the trailing partial window):
//                                   verdict Good, stage 0, no metric
//   - artifact:                     verdict Artifact, stage 1..3, metric =
//                                   the offending value (violating extremum,
//                                   window r, or nmse)
struct BeatLabel {
    Verdict verdict = Verdict::Good;
    std::optional<int> stage;
    std::optional<double> metric;

    static BeatLabel good() { return {}; }

    static BeatLabel unclassifiable() {
        BeatLabel l;
        l.stage = stage_unclassifiable;
        return l;
    }

    static BeatLabel artifact(int failing_stage, double offending_value) {
        BeatLabel l;
        l.verdict = Verdict::Artifact;
        l.stage = failing_stage;
        if (std::isfinite(offending_value)) l.metric = offending_value;
        return l;
    }

    bool is_artifact() const { return verdict == Verdict::Artifact; }
    // Good and actually evaluated by every applicable stage.
    bool is_good() const { return verdict == Verdict::Good && !stage.has_value(); }
    // Excluded from evaluation denominators.
    bool is_unclassifiable() const { return verdict == Verdict::Good && stage == stage_unclassifiable; }

    bool operator==(const BeatLabel&) const = default;
};

struct AnnotatedBeat {
    SampleIndex onset = 0;
    SampleIndex end = 0;  // exclusive
    BeatLabel label;

    bool operator==(const AnnotatedBeat&) const = default;
};

// Verdict of one full spectral-check window.
struct WindowVerdict {
    SampleIndex start = 0;
    SampleIndex end = 0;  // exclusive
    double r = 0.0;       // band PSD correlation; -2 marks a degenerate band
    Verdict verdict = Verdict::Good;

    bool operator==(const WindowVerdict&) const = default;
};

// Complete labeled output of one classification run. Beat intervals are
// disjoint, sorted and half-open; windows are consecutive full windows
// starting at sample 0. Indices refer to the aligned recording.
struct AnnotationSet {
    ConfigSnapshot config;
    std::vector<AnnotatedBeat> beats;
    std::vector<WindowVerdict> windows;

    bool operator==(const AnnotationSet&) const = default;
};

}  // namespace tcdseg

#endif  // TCDSEG_ANNOTATIONS_HPP
