#ifndef TCDSEG_WAVEFORM_IO_HPP
#define TCDSEG_WAVEFORM_IO_HPP

#include <filesystem>
#include <optional>

#include "tcdseg/annotations.hpp"
#include "tcdseg/types.hpp"

namespace tcdseg {

// Loads a two-channel CSV recording. Accepted headers are "t,abp,cbfv"
// (rate inferred from the time column unless fs_override is given) and
// "abp,cbfv" (fs_override required). Column order in the file is free;
// extra columns are ignored. Every cell must parse to a finite number.
//
// Throws EmptyFile, MissingColumn, MissingSampleRate, NonMonotoneTime,
// NonFiniteSample (message names the offending data row), IoError.
Recording load_recording(const std::filesystem::path& path,
                         std::optional<double> fs_override = std::nullopt);

// Writes a recording in the same CSV format load_recording accepts
// (header "t,abp,cbfv").
void write_recording_csv(const Recording& rec, const std::filesystem::path& path);

// Linear interpolation onto the uniform target grid spanning the same
// duration; the first sample is preserved exactly. Constants and linear
// ramps are reproduced exactly.
Channel resample_channel(const Channel& ch, SampleRate target);

// Brings both channels to a common rate (the lower-rate channel is
// resampled up) and truncates both to the shorter duration. Channels that
// already share a rate are only truncated, never resampled. Idempotent.
Recording align(const Recording& rec);

// Annotation files are JSON lines: one config header, one line per beat,
// one line per spectral window. write/read round-trip exactly.
void write_annotations(const AnnotationSet& ann, const std::filesystem::path& path);
AnnotationSet read_annotations(const std::filesystem::path& path);

}  // namespace tcdseg

#endif  // TCDSEG_WAVEFORM_IO_HPP
