#ifndef TCDSEG_ERRORS_HPP
#define TCDSEG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tcdseg {

// Base class for all errors raised by this library. Each concrete type
// corresponds to one failure mode of the contracts in the public headers,
// so callers (and tests) can catch precisely what they expect.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- input / file errors -------------------------------------------------
struct EmptyFile : Error { using Error::Error; };
struct MissingColumn : Error { using Error::Error; };
struct NonMonotoneTime : Error { using Error::Error; };
struct NonFiniteSample : Error { using Error::Error; };
struct MissingSampleRate : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

// ---- sampling / signal errors ---------------------------------------------
struct RateTooLow : Error { using Error::Error; };
struct CutoffAboveNyquist : Error { using Error::Error; };
struct WindowTooShort : Error { using Error::Error; };
struct RecordingTooShort : Error { using Error::Error; };
struct UnsortedOnsets : Error { using Error::Error; };
struct NonPositiveScale : Error { using Error::Error; };
struct NotAligned : Error { using Error::Error; };

// ---- spectral / template errors -------------------------------------------
struct TooFewSamples : Error { using Error::Error; };
struct GridMismatch : Error { using Error::Error; };
struct BandTooNarrow : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct BeatTooShort : Error { using Error::Error; };
struct NoAcceptedBeats : Error { using Error::Error; };

// ---- synthesis / evaluation errors -----------------------------------------
struct InvalidModel : Error { using Error::Error; };
struct NoOverlap : Error { using Error::Error; };

}  // namespace tcdseg

#endif  // TCDSEG_ERRORS_HPP
