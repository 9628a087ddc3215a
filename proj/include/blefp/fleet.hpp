// fleet.hpp - synthetic device populations and domain scenarios: channel map,
// impairment sampling, labeled dataset generation, and the wired/wireless/
// receiver scenario presets.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blefp/gfsk.hpp"
#include "blefp/iq_core.hpp"

namespace blefp {

struct ChannelOutOfRange : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvalidRanges : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DeviceSignature {
    int device_id = 0;
    ImpairmentSet imp;  // theta_po_rad here is the oscillator phase theta_0
};

struct Range {
    double min = 0.0;
    double max = 0.0;
};

struct FleetSpec {
    int n_devices = 2;
    uint64_t seed = 1;
    // Physically plausible BLE SoC spreads; deviation and BT bounds follow the
    // 0.45..0.55 modulation-index tolerance.
    Range cfo_hz{-50e3, 50e3};
    Range iq_amp{-0.05, 0.05};
    Range iq_phase_rad{-0.05, 0.05};
    Range i_dc{-0.02, 0.02};
    Range q_dc{-0.02, 0.02};
    Range delta_f_hz{-25e3, 25e3};
    Range bt_actual{0.45, 0.55};
    Range theta_0_rad{-3.14159265358979323846, 3.14159265358979323846};

    void validate() const;
};

struct PduPolicy {
    enum class Kind { FIXED, RANDOM } kind = Kind::FIXED;
    std::vector<uint8_t> fixed_bits;   // FIXED
    int min_length_bytes = 2;          // RANDOM
    int max_length_bytes = 2;
};

struct DomainScenario {
    std::string name;
    int channel_index = 0;
    double distance_m = 0.0;
    std::optional<double> snr_db;    // absent = noiseless
    double snr_jitter_db = 0.0;      // per-frame uniform jitter, +/- this value
    ImpairmentSet receiver_imp;      // additive receiver-side terms
    PduPolicy pdu_policy;
};

struct LabeledFrame {
    IqFrame frame;
    int device_id = 0;
};

struct LabeledDataset {
    std::vector<LabeledFrame> items;
    DomainScenario scenario;
};

// BLE data-channel center frequency: k <= 10 -> 2404 + 2k MHz, k >= 11 -> 2428 + 2(k-11) MHz.
double channel_center_hz(int data_channel_index);

std::vector<DeviceSignature> sample_fleet(const FleetSpec& spec);

LabeledDataset generate_dataset(const std::vector<DeviceSignature>& fleet,
                                const DomainScenario& scenario, int frames_per_device,
                                const GfskConfig& cfg, uint64_t seed);

// Presets for the three experiment families: wired-ch{1,2,14,32} with distinct
// fixed PDUs per channel, loc1..loc4 wireless at 1/1.5/2/3 m, and rx2.
std::map<std::string, DomainScenario> make_paper_scenarios();

}  // namespace blefp
