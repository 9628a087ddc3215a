#include "blefp/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace blefp {

namespace {

std::vector<cplx> decode_samples(const std::vector<char>& bytes, SampleLayout layout) {
    const std::size_t width = layout == SampleLayout::InterleavedF32 ? 4 : 8;
    if (bytes.size() % (2 * width) != 0) {
        throw MalformedFile("capture byte count not divisible by sample pair width");
    }
    const std::size_t n = bytes.size() / (2 * width);
    std::vector<cplx> out(n);
    const char* p = bytes.data();
    for (std::size_t i = 0; i < n; ++i) {
        double re, im;
        if (layout == SampleLayout::InterleavedF32) {
            float fr, fi;
            std::memcpy(&fr, p, 4);
            std::memcpy(&fi, p + 4, 4);
            p += 8;
            re = fr;
            im = fi;
        } else {
            std::memcpy(&re, p, 8);
            std::memcpy(&im, p + 8, 8);
            p += 16;
        }
        out[i] = cplx(re, im);
    }
    return out;
}

// Moving-average smoothed power, window 5.
std::vector<double> smoothed_power(const std::vector<cplx>& x) {
    constexpr std::size_t kWin = 5;
    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        p[i] = std::norm(x[i]);
    }
    std::vector<double> out(x.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc += p[i];
        if (i >= kWin) {
            acc -= p[i - kWin];
        }
        out[i] = acc / static_cast<double>(std::min(i + 1, kWin));
    }
    return out;
}

struct Burst {
    std::size_t start, end;  // [start, end)
};

std::vector<Burst> detect_bursts(const std::vector<cplx>& x, const Framing& f) {
    const auto pw = smoothed_power(x);
    const double peak = *std::max_element(pw.begin(), pw.end());
    if (peak <= 0.0) {
        throw NoFramesDetected("energy detect: silent capture");
    }
    const double thresh = f.threshold_rel * peak;
    std::vector<Burst> bursts;
    bool in_burst = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < pw.size(); ++i) {
        const bool active = pw[i] > thresh;
        if (active && !in_burst) {
            in_burst = true;
            start = i;
        } else if (!active && in_burst) {
            in_burst = false;
            bursts.push_back({start, i});
        }
    }
    if (in_burst) {
        bursts.push_back({start, pw.size()});
    }
    // Merge bursts separated by short gaps.
    std::vector<Burst> merged;
    for (const auto& b : bursts) {
        if (!merged.empty() && b.start - merged.back().end < f.min_gap_samples) {
            merged.back().end = b.end;
        } else {
            merged.push_back(b);
        }
    }
    if (merged.empty()) {
        throw NoFramesDetected("energy detect: no bursts above threshold");
    }
    return merged;
}

}  // namespace

std::vector<IqFrame> read_capture(const CaptureSpec& spec) {
    std::ifstream is(spec.path, std::ios::binary);
    if (!is) {
        throw IoError("read_capture: cannot open " + spec.path);
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const auto samples = decode_samples(bytes, spec.layout);

    std::vector<IqFrame> frames;
    if (spec.framing.kind == Framing::Kind::Preframed) {
        if (spec.framing.frame_len == 0) {
            throw std::invalid_argument("read_capture: PREFRAMED needs frame_len > 0");
        }
        if (samples.size() % spec.framing.frame_len != 0) {
            throw MalformedFile("read_capture: capture not a whole number of frames");
        }
        for (std::size_t off = 0; off < samples.size(); off += spec.framing.frame_len) {
            IqFrame frame;
            frame.sample_rate_hz = spec.sample_rate_hz;
            frame.samples.assign(samples.begin() + static_cast<long>(off),
                                 samples.begin() + static_cast<long>(off + spec.framing.frame_len));
            frames.push_back(std::move(frame));
        }
    } else {
        for (const auto& b : detect_bursts(samples, spec.framing)) {
            long start = static_cast<long>(b.start) + spec.framing.alignment_offset;
            start = std::clamp<long>(start, 0, static_cast<long>(samples.size()) - 1);
            const std::size_t end = b.end;
            if (static_cast<std::size_t>(start) >= end) {
                continue;
            }
            IqFrame frame;
            frame.sample_rate_hz = spec.sample_rate_hz;
            frame.samples.assign(samples.begin() + start, samples.begin() + static_cast<long>(end));
            frames.push_back(std::move(frame));
        }
        if (frames.empty()) {
            throw NoFramesDetected("read_capture: no usable bursts");
        }
    }

    // Attach labels from the sidecar manifest when one exists.
    std::ifstream ms(spec.path + ".manifest.json");
    if (ms) {
        nlohmann::json j = nlohmann::json::parse(ms, nullptr, false);
        if (!j.is_discarded() && j.contains("frames")) {
            const auto& jframes = j["frames"];
            for (std::size_t i = 0; i < frames.size() && i < jframes.size(); ++i) {
                const auto& jf = jframes[i];
                if (jf.contains("device_id")) frames[i].meta.device_id = jf["device_id"].get<int>();
                if (jf.contains("channel_index")) {
                    frames[i].meta.channel_index = jf["channel_index"].get<int>();
                }
                if (jf.contains("domain_label")) {
                    frames[i].meta.domain_label = jf["domain_label"].get<std::string>();
                }
            }
        }
    }
    return frames;
}

void write_capture(const std::vector<IqFrame>& frames, const CaptureSpec& spec) {
    if (frames.empty()) {
        throw std::invalid_argument("write_capture: no frames");
    }
    std::ofstream os(spec.path, std::ios::binary);
    if (!os) {
        throw IoError("write_capture: cannot open " + spec.path);
    }
    nlohmann::json manifest;
    manifest["sample_rate_hz"] = spec.sample_rate_hz;
    manifest["layout"] = spec.layout == SampleLayout::InterleavedF32 ? "f32" : "f64";
    manifest["frames"] = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& frame : frames) {
        for (const auto& s : frame.samples) {
            if (spec.layout == SampleLayout::InterleavedF32) {
                const float fr = static_cast<float>(s.real());
                const float fi = static_cast<float>(s.imag());
                os.write(reinterpret_cast<const char*>(&fr), 4);
                os.write(reinterpret_cast<const char*>(&fi), 4);
            } else {
                const double dr = s.real(), di = s.imag();
                os.write(reinterpret_cast<const char*>(&dr), 8);
                os.write(reinterpret_cast<const char*>(&di), 8);
            }
        }
        nlohmann::json jf;
        jf["offset"] = offset;
        jf["length"] = frame.samples.size();
        if (frame.meta.device_id) jf["device_id"] = *frame.meta.device_id;
        if (frame.meta.channel_index) jf["channel_index"] = *frame.meta.channel_index;
        jf["domain_label"] = frame.meta.domain_label;
        manifest["frames"].push_back(jf);
        offset += frame.samples.size();
    }
    if (!os) {
        throw IoError("write_capture: write failed");
    }
    std::ofstream ms(spec.path + ".manifest.json");
    if (!ms) {
        throw IoError("write_capture: cannot write manifest");
    }
    ms << manifest.dump(2) << '\n';
}

}  // namespace blefp
