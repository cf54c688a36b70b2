#ifndef TCDSEG_TYPES_HPP
#define TCDSEG_TYPES_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcdseg/errors.hpp"

namespace tcdseg {

using SampleIndex = std::int64_t;

// Sampling rate in Hz. Any positive rate is representable; the quality
// pipeline additionally requires >= min_processing_hz (the spectral band
// extends to 5 Hz and needs a Nyquist margin), which is checked at the
// pipeline entry, not here.
struct SampleRate {
    double hz = 0.0;

    SampleRate() = default;
    explicit SampleRate(double rate_hz) : hz(rate_hz) {
        if (!(hz > 0.0)) throw RateTooLow("sample rate must be positive, got " + std::to_string(rate_hz));
    }

    bool operator==(const SampleRate&) const = default;
};

inline constexpr double min_processing_hz = 20.0;  // 2 * 5 Hz * margin 2

enum class ChannelKind { CBFV, ABP };

// One uniformly sampled signal. CBFV values are cm/s, ABP values are mmHg;
// units are trusted as given.
struct Channel {
    std::vector<double> samples;
    SampleRate fs;
    ChannelKind kind = ChannelKind::CBFV;

    double duration_s() const {
        return samples.empty() ? 0.0 : static_cast<double>(samples.size() - 1) / fs.hz;
    }

    bool operator==(const Channel&) const = default;
};

// A two-channel recording. After align() both channels share the sample
// rate and length, so a sample index addresses the same instant in both.
struct Recording {
    Channel cbfv;
    Channel abp;
    std::optional<std::string> start_time;

    bool is_aligned() const {
        return cbfv.fs == abp.fs && cbfv.samples.size() == abp.samples.size();
    }

    bool operator==(const Recording&) const = default;
};

}  // namespace tcdseg

#endif  // TCDSEG_TYPES_HPP
