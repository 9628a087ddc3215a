// iq_core.hpp - complex baseband frame types and numeric primitives:
// angle, unwrap, radix-2 FFT, PSD, power normalization.
#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blefp {

using cplx = std::complex<double>;

struct NonPowerOfTwoLength : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ZeroEnergyFrame : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Scenario/label metadata carried alongside a frame.
struct FrameMeta {
    std::optional<int> device_id;
    std::optional<int> channel_index;  // BLE data channel, 0..36
    std::string domain_label;          // e.g. "wired", "loc1", "rx2"
    std::vector<uint8_t> pdu_bits;     // opaque payload bits, may be empty

    void validate() const;
};

struct IqFrame {
    std::vector<cplx> samples;
    double sample_rate_hz = 0.0;
    FrameMeta meta;

    void validate() const;
    std::size_t size() const { return samples.size(); }
};

// Phase sequence in radians. Wrapped means every value lies in (-pi, pi].
struct PhaseSeq {
    std::vector<double> values;
    bool wrapped = true;
};

// Per-sample four-quadrant arctangent in (-pi, pi]; angle(0+0j) := 0.
PhaseSeq angle(const IqFrame& frame);
double angle_of(cplx z);

// Cumulative 2*pi correction so consecutive differences lie in (-pi, pi].
// First element passes through unchanged.
PhaseSeq unwrap(const PhaseSeq& phases);

// Unnormalized forward DFT; length must be a power of two.
std::vector<cplx> fft(std::vector<cplx> x);

// |FFT(x zero-padded to nfft)|^2 / nfft. nfft must be a power of two >= frame length.
std::vector<double> psd(const IqFrame& frame, std::size_t nfft);
std::vector<double> psd(const std::vector<cplx>& x, std::size_t nfft);

// Scale the frame so mean per-sample power is 1. Phases untouched.
IqFrame normalize_power(const IqFrame& frame);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

}  // namespace blefp
