// features.hpp - classifier input representations: TPD (phase derivative of
// the transient+preamble window), TP (raw windowed I/Q), Mbed (magnitude,
// phase, PSD stack) and Raw IQ.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "blefp/gfsk.hpp"
#include "blefp/iq_core.hpp"

namespace blefp {

struct WindowExceedsFrame : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class FeatureMethod { TPD, TP, MBED, RAWIQ };

std::string to_string(FeatureMethod m);
FeatureMethod feature_method_from_string(const std::string& s);

struct FeatureTensor {
    std::vector<std::vector<double>> data;  // channels x length
    FeatureMethod method = FeatureMethod::TPD;

    std::size_t channels() const { return data.size(); }
    std::size_t length() const { return data.empty() ? 0 : data[0].size(); }
};

// Number of samples covering transient + preamble.
struct WindowSpec {
    std::size_t length = 0;
};

WindowSpec window_length(const GfskConfig& cfg);

// 1 x (L-1): first difference of the unwrapped phase over the window.
FeatureTensor tpd(const IqFrame& frame, const WindowSpec& w);

// 2 x L: real and imaginary parts of the power-normalized window.
FeatureTensor tp(const IqFrame& frame, const WindowSpec& w);

// 3 x L: |x|, wrapped angle(x), PSD truncated to L bins (nfft = next pow2 >= L).
// unwrap_phase_channel switches channel 1 to the unwrapped phase (ablation).
FeatureTensor mbed(const IqFrame& frame, const WindowSpec& w, bool unwrap_phase_channel = false);

// 2 x N: the entire power-normalized frame.
FeatureTensor raw_iq(const IqFrame& frame);

FeatureTensor extract(FeatureMethod m, const IqFrame& frame, const WindowSpec& w);

// CSV export: header `method,device_id,channel_index,domain_label`, then one
// row per channel of comma-separated values.
void write_feature_csv(std::ostream& os, const FeatureTensor& t, const FrameMeta& meta);

}  // namespace blefp
