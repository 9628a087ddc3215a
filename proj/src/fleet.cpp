#include "blefp/fleet.hpp"

#include <cmath>

#include "blefp/rng.hpp"

namespace blefp {

void FleetSpec::validate() const {
    if (n_devices < 2) {
        throw InvalidRanges("FleetSpec: n_devices must be >= 2");
    }
    const Range* ranges[] = {&cfo_hz, &iq_amp,     &iq_phase_rad, &i_dc,
                             &q_dc,   &delta_f_hz, &bt_actual,    &theta_0_rad};
    for (const Range* r : ranges) {
        if (r->min > r->max) {
            throw InvalidRanges("FleetSpec: range min > max");
        }
    }
    if (iq_amp.min <= -1.0 || iq_amp.max >= 1.0) {
        throw InvalidRanges("FleetSpec: iq_amp bounds must keep |iq_amp| < 1");
    }
    if (bt_actual.min <= 0.0 || bt_actual.max > 1.0) {
        throw InvalidRanges("FleetSpec: bt_actual bounds must lie in (0, 1]");
    }
}

double channel_center_hz(int k) {
    if (k < 0 || k > 36) {
        throw ChannelOutOfRange("channel_center_hz: data channel index out of [0,36]");
    }
    if (k <= 10) {
        return (2404.0 + 2.0 * k) * 1e6;
    }
    return (2428.0 + 2.0 * (k - 11)) * 1e6;
}

std::vector<DeviceSignature> sample_fleet(const FleetSpec& spec) {
    spec.validate();
    std::vector<DeviceSignature> out;
    out.reserve(spec.n_devices);
    for (int id = 0; id < spec.n_devices; ++id) {
        Rng rng(derive_seed(spec.seed, static_cast<uint64_t>(id), 0xF1EE7));
        DeviceSignature d;
        d.device_id = id;
        d.imp.cfo_hz = rng.uniform(spec.cfo_hz.min, spec.cfo_hz.max);
        d.imp.iq_amp = rng.uniform(spec.iq_amp.min, spec.iq_amp.max);
        d.imp.iq_phase_rad = rng.uniform(spec.iq_phase_rad.min, spec.iq_phase_rad.max);
        d.imp.i_dc = rng.uniform(spec.i_dc.min, spec.i_dc.max);
        d.imp.q_dc = rng.uniform(spec.q_dc.min, spec.q_dc.max);
        d.imp.delta_f_hz = rng.uniform(spec.delta_f_hz.min, spec.delta_f_hz.max);
        d.imp.bt_actual = rng.uniform(spec.bt_actual.min, spec.bt_actual.max);
        d.imp.theta_po_rad = rng.uniform(spec.theta_0_rad.min, spec.theta_0_rad.max);
        d.imp.validate();
        out.push_back(d);
    }
    return out;
}

namespace {
std::vector<uint8_t> draw_pdu(const PduPolicy& policy, Rng& rng) {
    if (policy.kind == PduPolicy::Kind::FIXED) {
        return policy.fixed_bits;
    }
    const int span = policy.max_length_bytes - policy.min_length_bytes;
    const int nbytes = policy.min_length_bytes +
                       (span > 0 ? static_cast<int>(rng.below(static_cast<uint64_t>(span) + 1)) : 0);
    std::vector<uint8_t> bits(static_cast<std::size_t>(nbytes) * 8);
    for (auto& b : bits) {
        b = static_cast<uint8_t>(rng.next() & 1u);
    }
    return bits;
}
}  // namespace

LabeledDataset generate_dataset(const std::vector<DeviceSignature>& fleet,
                                const DomainScenario& scenario, int frames_per_device,
                                const GfskConfig& cfg, uint64_t seed) {
    if (frames_per_device < 1) {
        throw std::invalid_argument("generate_dataset: frames_per_device must be >= 1");
    }
    LabeledDataset ds;
    ds.scenario = scenario;
    ds.items.reserve(fleet.size() * static_cast<std::size_t>(frames_per_device));
    const double carrier = channel_center_hz(scenario.channel_index);
    for (const auto& dev : fleet) {
        const ImpairmentSet imp = combine_tx_rx(dev.imp, scenario.receiver_imp);
        for (int f = 0; f < frames_per_device; ++f) {
            Rng rng(derive_seed(seed, static_cast<uint64_t>(dev.device_id),
                                static_cast<uint64_t>(f), 0xDA7A));
            const auto pdu = draw_pdu(scenario.pdu_policy, rng);
            IqFrame frame = modulate_frame(pdu, cfg, imp);

            ChannelParams ch;
            ch.alpha = 1.0;
            ch.carrier_hz = carrier;
            ch.distance_m = scenario.distance_m;
            if (scenario.snr_db) {
                ch.has_noise = true;
                ch.snr_db = *scenario.snr_db +
                            rng.uniform(-scenario.snr_jitter_db, scenario.snr_jitter_db);
            }
            frame = apply_channel(frame, ch, rng.next());

            frame.meta.device_id = dev.device_id;
            frame.meta.channel_index = scenario.channel_index;
            frame.meta.domain_label = scenario.name;
            frame.meta.pdu_bits = pdu;
            ds.items.push_back(LabeledFrame{std::move(frame), dev.device_id});
        }
    }
    return ds;
}

namespace {
// Stand-in for the header/CRC content change that comes with hardcoding a
// channel: a distinct deterministic 64-bit payload per channel index.
std::vector<uint8_t> channel_pdu(int channel_index) {
    uint64_t s = 0xB1E5ULL + 0x5EEDULL * static_cast<uint64_t>(channel_index);
    uint64_t word = splitmix64(s);
    std::vector<uint8_t> bits(64);
    for (int i = 0; i < 64; ++i) {
        bits[static_cast<std::size_t>(i)] = static_cast<uint8_t>((word >> i) & 1u);
    }
    return bits;
}

DomainScenario wired_scenario(const std::string& name, int channel_index) {
    DomainScenario s;
    s.name = name;
    s.channel_index = channel_index;
    s.distance_m = 2.0;  // coax run; makes the channel-dependent phase term real
    s.snr_db = 30.0;
    s.pdu_policy.kind = PduPolicy::Kind::FIXED;
    s.pdu_policy.fixed_bits = channel_pdu(channel_index);
    return s;
}
}  // namespace

std::map<std::string, DomainScenario> make_paper_scenarios() {
    std::map<std::string, DomainScenario> out;
    out["wired-ch1"] = wired_scenario("wired-ch1", 1);
    out["wired-ch2"] = wired_scenario("wired-ch2", 2);
    out["wired-ch14"] = wired_scenario("wired-ch14", 14);
    out["wired-ch32"] = wired_scenario("wired-ch32", 32);

    const double loc_dist[4] = {1.0, 1.5, 2.0, 3.0};
    for (int i = 0; i < 4; ++i) {
        DomainScenario s;
        s.name = "loc" + std::to_string(i + 1);
        s.channel_index = 1;
        s.distance_m = loc_dist[i];
        s.snr_db = 20.0;
        s.snr_jitter_db = 2.0;
        s.pdu_policy.kind = PduPolicy::Kind::FIXED;
        s.pdu_policy.fixed_bits = channel_pdu(1);
        out[s.name] = s;
    }

    // Second receiver on the wired-ch1 setup: small CFO/IQ/DC bias plus a
    // large front-end phase rotation. Magnitudes are artifact choices.
    DomainScenario rx2 = wired_scenario("rx2", 1);
    rx2.receiver_imp.cfo_hz = 2e3;
    rx2.receiver_imp.iq_amp = 0.01;
    rx2.receiver_imp.iq_phase_rad = 0.01;
    rx2.receiver_imp.i_dc = 0.005;
    rx2.receiver_imp.q_dc = -0.005;
    rx2.receiver_imp.theta_po_rad = 1.5;
    out["rx2"] = rx2;
    return out;
}

}  // namespace blefp
