#ifndef TCDSEG_CONFIG_HPP
#define TCDSEG_CONFIG_HPP

namespace tcdseg {

// Parameters of the beat-onset detector (low-pass -> slope sum -> adaptive
// threshold). cbfv_scale is the multiplicative factor applied to the CBFV
// trace before detection so its amplitudes land in the pressure-like range
// the detector was designed for.
struct OnsetConfig {
    double lowpass_cutoff_hz = 16.0;
    double ssf_window_s = 0.128;
    double refractory_s = 0.25;
    double learn_s = 8.0;
    double cbfv_scale = 2.0;
    double threshold_fraction = 0.6;  // fraction of the rolling mean SSF peak

    bool operator==(const OnsetConfig&) const = default;
};

// Thresholds of the three-stage classifier and of the spectral estimator
// behind stage 2.
struct PipelineConfig {
    double v_min = 5.0;        // cm/s, stage 1 lower bound
    double v_max = 300.0;      // cm/s, stage 1 upper bound
    double window_s = 8.0;     // stage 2 window length
    double band_lo_hz = 0.5;   // correlation band, inclusive
    double band_hi_hz = 5.0;
    double r_min = 0.5;        // windows with r < r_min are artifacts
    double nmse_max = 0.2;     // beats with nmse > nmse_max are artifacts
    int template_len = 100;
    double psd_segment_s = 2.0;
    double psd_overlap = 0.5;  // in [0, 1)

    bool operator==(const PipelineConfig&) const = default;
};

// Everything that influenced a classification run. Echoed verbatim into the
// annotation file header so any run can be reproduced from its output alone.
struct ConfigSnapshot {
    double fs_hz = 0.0;
    OnsetConfig onset;
    PipelineConfig pipeline;

    bool operator==(const ConfigSnapshot&) const = default;
};

}  // namespace tcdseg

#endif  // TCDSEG_CONFIG_HPP
