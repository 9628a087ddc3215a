// gfsk.hpp - BLE 1M-PHY GFSK baseband synthesis: ideal modulator, hardware
// impairment model (CFO, IQ imbalance, DC offsets, deviation and BT error),
// transient ramp, LoS channel, and per-impairment sweeps.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "blefp/iq_core.hpp"

namespace blefp {

struct EmptyBits : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvalidBt : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvalidImpairment : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct UnknownImpairmentField : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct GfskConfig {
    double sample_rate_hz = 6e6;
    double symbol_rate_hz = 1e6;
    double bt_nominal = 0.5;
    double f_m_hz = 250e3;  // peak frequency deviation
    int filter_span_symbols = 3;
    int transient_symbols = 1;
    std::vector<uint8_t> preamble_bits = {0, 1, 0, 1, 0, 1, 0, 1};

    int sps() const { return static_cast<int>(sample_rate_hz / symbol_rate_hz); }
    void validate() const;
};

// Six-impairment device/receiver signature.
struct ImpairmentSet {
    double cfo_hz = 0.0;
    double iq_amp = 0.0;        // epsilon in the (1 +/- eps) I/Q gains
    double iq_phase_rad = 0.0;
    double i_dc = 0.0;
    double q_dc = 0.0;
    double delta_f_hz = 0.0;    // peak-deviation error
    double bt_actual = 0.5;
    double theta_po_rad = 0.0;  // oscillator phase error theta_0

    void validate() const;
};

// Receiver impairments add onto device impairments; BT and deviation error
// are transmit-only and come from the device alone.
ImpairmentSet combine_tx_rx(const ImpairmentSet& device, const ImpairmentSet& receiver);

struct ChannelParams {
    double alpha = 1.0;             // path loss gain
    double theta_channel_rad = 0.0; // extra phase term on top of geometry
    bool has_noise = false;
    double snr_db = 0.0;
    double distance_m = 0.0;
    double carrier_hz = 2.402e9;
};

// Bits to +/-1 levels: 1 -> +1, 0 -> -1.
std::vector<double> nrz_encode(const std::vector<uint8_t>& bits);

// Gaussian filter bandwidth parameter a = sqrt(ln2/2)/BT.
double gaussian_a(double bt);

// Symmetric Gaussian taps over [-span/2, span/2] symbols, sum renormalized to 1.
std::vector<double> gaussian_taps(double bt, int sps, int span_symbols);

// Ideal GFSK modulation (no transient, no impairments). Unit envelope.
IqFrame modulate(const std::vector<uint8_t>& bits, const GfskConfig& cfg);

// Preamble followed by PDU bits.
std::vector<uint8_t> build_frame_bits(const GfskConfig& cfg, const std::vector<uint8_t>& pdu_bits);

// Full impaired frame: transient ramp + preamble + PDU with the six-parameter
// impairment model applied. Total length (transient_symbols + nbits) * sps.
IqFrame modulate_frame(const std::vector<uint8_t>& pdu_bits, const GfskConfig& cfg,
                       const ImpairmentSet& imp);

// Flat LoS channel: alpha * e^{j(theta - 2 pi f_c d / c)}, plus optional AWGN.
IqFrame apply_channel(const IqFrame& frame, const ChannelParams& ch, uint64_t rng_seed);

// Names accepted by impairment_sweep / set_impairment_field:
// cfo_hz, iq_amp, iq_phase_rad, i_dc, q_dc, delta_f_hz, bt_actual, theta_po_rad.
void set_impairment_field(ImpairmentSet& imp, const std::string& name, double value);

std::vector<std::pair<double, IqFrame>> impairment_sweep(const std::string& name,
                                                         const std::vector<double>& values,
                                                         const GfskConfig& cfg,
                                                         const ImpairmentSet& base_imp,
                                                         const std::vector<uint8_t>& pdu_bits = {});

}  // namespace blefp
