#include "blefp/features.hpp"

#include <cmath>
#include <ostream>

namespace blefp {

std::string to_string(FeatureMethod m) {
    switch (m) {
        case FeatureMethod::TPD: return "TPD";
        case FeatureMethod::TP: return "TP";
        case FeatureMethod::MBED: return "MBED";
        case FeatureMethod::RAWIQ: return "RAWIQ";
    }
    return "?";
}

FeatureMethod feature_method_from_string(const std::string& s) {
    if (s == "TPD" || s == "tpd") return FeatureMethod::TPD;
    if (s == "TP" || s == "tp") return FeatureMethod::TP;
    if (s == "MBED" || s == "mbed" || s == "Mbed") return FeatureMethod::MBED;
    if (s == "RAWIQ" || s == "rawiq" || s == "raw_iq") return FeatureMethod::RAWIQ;
    throw std::invalid_argument("unknown feature method: " + s);
}

WindowSpec window_length(const GfskConfig& cfg) {
    cfg.validate();
    WindowSpec w;
    w.length = (static_cast<std::size_t>(cfg.transient_symbols) + cfg.preamble_bits.size()) *
               static_cast<std::size_t>(cfg.sps());
    return w;
}

namespace {
IqFrame normalized_window(const IqFrame& frame, const WindowSpec& w) {
    if (w.length > frame.samples.size()) {
        throw WindowExceedsFrame("feature window exceeds frame length");
    }
    IqFrame out = normalize_power(frame);
    out.samples.resize(w.length);
    return out;
}
}  // namespace

FeatureTensor tpd(const IqFrame& frame, const WindowSpec& w) {
    const IqFrame win = normalized_window(frame, w);
    const PhaseSeq sigma = unwrap(angle(win));
    FeatureTensor t;
    t.method = FeatureMethod::TPD;
    t.data.resize(1);
    t.data[0].resize(sigma.values.size() - 1);
    for (std::size_t n = 0; n + 1 < sigma.values.size(); ++n) {
        t.data[0][n] = sigma.values[n + 1] - sigma.values[n];
    }
    return t;
}

FeatureTensor tp(const IqFrame& frame, const WindowSpec& w) {
    const IqFrame win = normalized_window(frame, w);
    FeatureTensor t;
    t.method = FeatureMethod::TP;
    t.data.assign(2, std::vector<double>(win.samples.size()));
    for (std::size_t n = 0; n < win.samples.size(); ++n) {
        t.data[0][n] = win.samples[n].real();
        t.data[1][n] = win.samples[n].imag();
    }
    return t;
}

FeatureTensor mbed(const IqFrame& frame, const WindowSpec& w, bool unwrap_phase_channel) {
    const IqFrame win = normalized_window(frame, w);
    const std::size_t L = win.samples.size();
    FeatureTensor t;
    t.method = FeatureMethod::MBED;
    t.data.assign(3, std::vector<double>(L));
    PhaseSeq ph = angle(win);
    if (unwrap_phase_channel) {
        ph = unwrap(ph);
    }
    for (std::size_t n = 0; n < L; ++n) {
        t.data[0][n] = std::abs(win.samples[n]);
        t.data[1][n] = ph.values[n];
    }
    const auto spectrum = psd(win.samples, next_power_of_two(L));
    for (std::size_t n = 0; n < L; ++n) {
        t.data[2][n] = spectrum[n];
    }
    return t;
}

FeatureTensor raw_iq(const IqFrame& frame) {
    const IqFrame norm = normalize_power(frame);
    FeatureTensor t;
    t.method = FeatureMethod::RAWIQ;
    t.data.assign(2, std::vector<double>(norm.samples.size()));
    for (std::size_t n = 0; n < norm.samples.size(); ++n) {
        t.data[0][n] = norm.samples[n].real();
        t.data[1][n] = norm.samples[n].imag();
    }
    return t;
}

FeatureTensor extract(FeatureMethod m, const IqFrame& frame, const WindowSpec& w) {
    switch (m) {
        case FeatureMethod::TPD: return tpd(frame, w);
        case FeatureMethod::TP: return tp(frame, w);
        case FeatureMethod::MBED: return mbed(frame, w);
        case FeatureMethod::RAWIQ: return raw_iq(frame);
    }
    throw std::invalid_argument("extract: bad method");
}

void write_feature_csv(std::ostream& os, const FeatureTensor& t, const FrameMeta& meta) {
    os << "method,device_id,channel_index,domain_label\n";
    os << to_string(t.method) << ',';
    if (meta.device_id) os << *meta.device_id;
    os << ',';
    if (meta.channel_index) os << *meta.channel_index;
    os << ',' << meta.domain_label << '\n';
    os.precision(17);
    for (const auto& row : t.data) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) os << ',';
            os << row[i];
        }
        os << '\n';
    }
}

}  // namespace blefp
