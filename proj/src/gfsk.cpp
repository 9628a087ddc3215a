#include "blefp/gfsk.hpp"

#include <cmath>

#include "blefp/rng.hpp"

namespace blefp {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kSpeedOfLight = 299792458.0;
}  // namespace

void GfskConfig::validate() const {
    if (!(sample_rate_hz > 0.0) || !(symbol_rate_hz > 0.0)) {
        throw std::invalid_argument("GfskConfig: rates must be positive");
    }
    const double ratio = sample_rate_hz / symbol_rate_hz;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0) {
        throw std::invalid_argument("GfskConfig: sample rate must be an integer multiple of symbol rate");
    }
    if (!(bt_nominal > 0.0) || bt_nominal > 1.0) {
        throw InvalidBt("GfskConfig: bt_nominal must be in (0, 1]");
    }
    if (!(f_m_hz > 0.0)) {
        throw std::invalid_argument("GfskConfig: f_m_hz must be positive");
    }
    if (filter_span_symbols < 1) {
        throw std::invalid_argument("GfskConfig: filter_span_symbols must be >= 1");
    }
    if (transient_symbols < 0) {
        throw std::invalid_argument("GfskConfig: transient_symbols must be >= 0");
    }
    if (preamble_bits.empty()) {
        throw std::invalid_argument("GfskConfig: preamble_bits empty");
    }
}

void ImpairmentSet::validate() const {
    if (!(std::abs(iq_amp) < 1.0)) {
        throw InvalidImpairment("ImpairmentSet: |iq_amp| must be < 1");
    }
    if (!(bt_actual > 0.0) || bt_actual > 1.0) {
        throw InvalidImpairment("ImpairmentSet: bt_actual must be in (0, 1]");
    }
}

ImpairmentSet combine_tx_rx(const ImpairmentSet& device, const ImpairmentSet& receiver) {
    ImpairmentSet out = device;
    out.cfo_hz += receiver.cfo_hz;
    out.iq_amp += receiver.iq_amp;
    out.iq_phase_rad += receiver.iq_phase_rad;
    out.i_dc += receiver.i_dc;
    out.q_dc += receiver.q_dc;
    out.theta_po_rad += receiver.theta_po_rad;
    return out;
}

std::vector<double> nrz_encode(const std::vector<uint8_t>& bits) {
    if (bits.empty()) {
        throw EmptyBits("nrz_encode: empty bit sequence");
    }
    std::vector<double> out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        out[i] = bits[i] ? 1.0 : -1.0;
    }
    return out;
}

double gaussian_a(double bt) {
    if (!(bt > 0.0)) {
        throw InvalidBt("gaussian_a: bt must be positive");
    }
    return std::sqrt(std::log(2.0) / 2.0) / bt;
}

std::vector<double> gaussian_taps(double bt, int sps, int span_symbols) {
    if (!(bt > 0.0)) {
        throw InvalidBt("gaussian_taps: bt must be positive");
    }
    if (sps < 1 || span_symbols < 1) {
        throw std::invalid_argument("gaussian_taps: sps and span must be >= 1");
    }
    const int half = (span_symbols * sps) / 2;
    const int count = 2 * half + 1;
    const double a = gaussian_a(bt);
    std::vector<double> taps(count);
    double sum = 0.0;
    for (int i = 0; i < count; ++i) {
        const double t = static_cast<double>(i - half) / sps;  // in symbol durations
        taps[i] = std::exp(-kPi * kPi * t * t / (a * a));
        sum += taps[i];
    }
    for (auto& v : taps) {
        v /= sum;
    }
    return taps;
}

namespace {

// Sample-hold upsample, edge-replicated pad, then same-length convolution with
// the (symmetric) Gaussian taps. Output length = symbols.size() * sps.
std::vector<double> shaped_stream(const std::vector<double>& symbols, const std::vector<double>& taps,
                                  int sps) {
    const int half = static_cast<int>(taps.size()) / 2;
    const std::size_t n = symbols.size() * static_cast<std::size_t>(sps);
    std::vector<double> padded(n + 2 * half);
    for (std::size_t i = 0; i < padded.size(); ++i) {
        const long idx = static_cast<long>(i) - half;
        double v;
        if (idx < 0) {
            v = symbols.front();
        } else if (static_cast<std::size_t>(idx) >= n) {
            v = symbols.back();
        } else {
            v = symbols[static_cast<std::size_t>(idx) / sps];
        }
        padded[i] = v;
    }
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < taps.size(); ++k) {
            acc += taps[k] * padded[i + k];
        }
        out[i] = acc;
    }
    return out;
}

// Phase trajectory from the shaped stream, anchored so phase[anchor] = 0,
// extended backward before the anchor.
std::vector<double> accumulate_phase(const std::vector<double>& g, double f_dev, double fs,
                                     std::size_t anchor) {
    std::vector<double> phi(g.size(), 0.0);
    const double k = kTwoPi * f_dev / fs;
    phi[anchor] = 0.0;
    for (std::size_t n = anchor + 1; n < g.size(); ++n) {
        phi[n] = phi[n - 1] + k * g[n];
    }
    for (std::size_t n = anchor; n > 0; --n) {
        phi[n - 1] = phi[n] - k * g[n];
    }
    return phi;
}

}  // namespace

IqFrame modulate(const std::vector<uint8_t>& bits, const GfskConfig& cfg) {
    cfg.validate();
    if (bits.empty()) {
        throw EmptyBits("modulate: empty bit sequence");
    }
    const int sps = cfg.sps();
    const auto taps = gaussian_taps(cfg.bt_nominal, sps, cfg.filter_span_symbols);
    const auto g = shaped_stream(nrz_encode(bits), taps, sps);
    const auto phi = accumulate_phase(g, cfg.f_m_hz, cfg.sample_rate_hz, 0);

    IqFrame frame;
    frame.sample_rate_hz = cfg.sample_rate_hz;
    frame.samples.reserve(phi.size());
    for (double p : phi) {
        frame.samples.emplace_back(std::cos(p), std::sin(p));
    }
    return frame;
}

std::vector<uint8_t> build_frame_bits(const GfskConfig& cfg, const std::vector<uint8_t>& pdu_bits) {
    std::vector<uint8_t> out = cfg.preamble_bits;
    out.insert(out.end(), pdu_bits.begin(), pdu_bits.end());
    return out;
}

IqFrame modulate_frame(const std::vector<uint8_t>& pdu_bits, const GfskConfig& cfg,
                       const ImpairmentSet& imp) {
    cfg.validate();
    imp.validate();
    const int sps = cfg.sps();
    const auto bits = build_frame_bits(cfg, pdu_bits);

    // Warm-up symbols replicate the first bit; the transient is the filter's
    // settling response with the phase trajectory extended backward from the
    // first frame sample.
    std::vector<double> symbols(static_cast<std::size_t>(cfg.transient_symbols), bits[0] ? 1.0 : -1.0);
    for (uint8_t b : bits) {
        symbols.push_back(b ? 1.0 : -1.0);
    }
    const auto taps = gaussian_taps(imp.bt_actual, sps, cfg.filter_span_symbols);
    const auto g = shaped_stream(symbols, taps, sps);
    const std::size_t transient_len = static_cast<std::size_t>(cfg.transient_symbols) * sps;
    const double f_dev = cfg.f_m_hz + imp.delta_f_hz;
    const auto phi = accumulate_phase(g, f_dev, cfg.sample_rate_hz, transient_len);

    IqFrame frame;
    frame.sample_rate_hz = cfg.sample_rate_hz;
    frame.samples.resize(phi.size());
    const double gain_i = 1.0 - imp.iq_amp;
    const double gain_q = 1.0 + imp.iq_amp;
    const double skew = imp.iq_phase_rad / 2.0;
    for (std::size_t n = 0; n < phi.size(); ++n) {
        // Raised-cosine amplitude ramp 0 -> 1 across the transient span.
        double ramp = 1.0;
        if (n < transient_len) {
            ramp = 0.5 * (1.0 - std::cos(kPi * static_cast<double>(n + 1) /
                                         static_cast<double>(transient_len)));
        }
        const double yi = ramp * gain_i * std::cos(phi[n] - skew) + imp.i_dc;
        const double yq = ramp * gain_q * std::sin(phi[n] + skew) + imp.q_dc;
        const double rot = kTwoPi * imp.cfo_hz * static_cast<double>(n) / cfg.sample_rate_hz +
                           imp.theta_po_rad;
        frame.samples[n] = cplx(yi, yq) * cplx(std::cos(rot), std::sin(rot));
    }
    frame.meta.pdu_bits = pdu_bits;
    return frame;
}

IqFrame apply_channel(const IqFrame& frame, const ChannelParams& ch, uint64_t rng_seed) {
    if (!(ch.alpha > 0.0)) {
        throw std::invalid_argument("apply_channel: alpha must be positive");
    }
    const double theta = ch.theta_channel_rad -
                         kTwoPi * ch.carrier_hz * ch.distance_m / kSpeedOfLight;
    const cplx h = ch.alpha * cplx(std::cos(theta), std::sin(theta));
    IqFrame out = frame;
    double power = 0.0;
    for (auto& s : out.samples) {
        s *= h;
        power += std::norm(s);
    }
    if (ch.has_noise) {
        power /= static_cast<double>(out.samples.size());
        const double noise_power = power / std::pow(10.0, ch.snr_db / 10.0);
        const double sigma = std::sqrt(noise_power / 2.0);
        Rng rng(rng_seed);
        for (auto& s : out.samples) {
            s += cplx(sigma * rng.gaussian(), sigma * rng.gaussian());
        }
    }
    return out;
}

void set_impairment_field(ImpairmentSet& imp, const std::string& name, double value) {
    if (name == "cfo_hz" || name == "cfo") {
        imp.cfo_hz = value;
    } else if (name == "iq_amp") {
        imp.iq_amp = value;
    } else if (name == "iq_phase_rad" || name == "iq_phase") {
        imp.iq_phase_rad = value;
    } else if (name == "i_dc") {
        imp.i_dc = value;
    } else if (name == "q_dc") {
        imp.q_dc = value;
    } else if (name == "delta_f_hz" || name == "delta_f") {
        imp.delta_f_hz = value;
    } else if (name == "bt_actual" || name == "bt") {
        imp.bt_actual = value;
    } else if (name == "theta_po_rad" || name == "theta_po") {
        imp.theta_po_rad = value;
    } else {
        throw UnknownImpairmentField("unknown impairment field: " + name);
    }
}

std::vector<std::pair<double, IqFrame>> impairment_sweep(const std::string& name,
                                                         const std::vector<double>& values,
                                                         const GfskConfig& cfg,
                                                         const ImpairmentSet& base_imp,
                                                         const std::vector<uint8_t>& pdu_bits) {
    std::vector<std::pair<double, IqFrame>> out;
    out.reserve(values.size());
    for (double v : values) {
        ImpairmentSet imp = base_imp;
        set_impairment_field(imp, name, v);
        out.emplace_back(v, modulate_frame(pdu_bits, cfg, imp));
    }
    return out;
}

}  // namespace blefp
