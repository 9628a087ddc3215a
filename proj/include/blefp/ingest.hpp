// ingest.hpp - binary IQ capture reader/writer: little-endian interleaved
// float32/float64 I,Q with fixed-window or energy-detect framing, plus a JSON
// sidecar manifest carrying labels.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blefp/iq_core.hpp"

namespace blefp {

struct MalformedFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoFramesDetected : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SampleLayout { InterleavedF32, InterleavedF64 };

struct Framing {
    enum class Kind { Preframed, EnergyDetect } kind = Kind::Preframed;
    std::size_t frame_len = 0;          // PREFRAMED
    double threshold_rel = 0.1;         // ENERGY_DETECT: fraction of max smoothed power
    std::size_t min_gap_samples = 16;   // merge bursts separated by less than this
    long alignment_offset = 0;          // manual shift of each detected start
};

struct CaptureSpec {
    std::string path;
    double sample_rate_hz = 6e6;
    SampleLayout layout = SampleLayout::InterleavedF32;
    Framing framing;
};

std::vector<IqFrame> read_capture(const CaptureSpec& spec);

// PREFRAMED writer; also writes `<path>.manifest.json` with per-frame labels.
void write_capture(const std::vector<IqFrame>& frames, const CaptureSpec& spec);

}  // namespace blefp
