#include <cmath>
#include <cstdio>
#include <fstream>

#include "blefp/gfsk.hpp"
#include "blefp/ingest.hpp"
#include "doctest.h"

using namespace blefp;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() {
        std::remove(path.c_str());
        std::remove((path + ".manifest.json").c_str());
    }
};

std::vector<IqFrame> two_frames() {
    GfskConfig cfg;
    ImpairmentSet none;
    ImpairmentSet imp;
    imp.cfo_hz = 7e3;
    std::vector<IqFrame> frames;
    frames.push_back(modulate_frame({1, 0, 1, 1}, cfg, none));
    frames.push_back(modulate_frame({0, 0, 1, 0}, cfg, imp));
    frames[0].meta.device_id = 4;
    frames[0].meta.channel_index = 1;
    frames[0].meta.domain_label = "wired";
    frames[1].meta.device_id = 9;
    frames[1].meta.channel_index = 14;
    frames[1].meta.domain_label = "loc2";
    return frames;
}

}  // namespace

TEST_CASE("preframed round trip: f64 exact, f32 within rounding") {
    const auto frames = two_frames();
    const std::size_t flen = frames[0].samples.size();

    CaptureSpec spec;
    spec.path = "test_capture_f64.bin";
    spec.layout = SampleLayout::InterleavedF64;
    spec.framing.kind = Framing::Kind::Preframed;
    spec.framing.frame_len = flen;
    TempFile guard(spec.path);

    write_capture(frames, spec);
    const auto back = read_capture(spec);
    REQUIRE(back.size() == 2);
    for (std::size_t f = 0; f < 2; ++f) {
        REQUIRE(back[f].samples.size() == flen);
        // f64 storage is bit-exact.
        CHECK(back[f].samples == frames[f].samples);
        CHECK(*back[f].meta.device_id == *frames[f].meta.device_id);
        CHECK(*back[f].meta.channel_index == *frames[f].meta.channel_index);
        CHECK(back[f].meta.domain_label == frames[f].meta.domain_label);
    }

    CaptureSpec spec32 = spec;
    spec32.path = "test_capture_f32.bin";
    spec32.layout = SampleLayout::InterleavedF32;
    TempFile guard32(spec32.path);
    write_capture(frames, spec32);
    const auto back32 = read_capture(spec32);
    REQUIRE(back32.size() == 2);
    for (std::size_t f = 0; f < 2; ++f) {
        for (std::size_t n = 0; n < flen; ++n) {
            // Unit-magnitude samples round to within single precision.
            CHECK(std::abs(back32[f].samples[n] - frames[f].samples[n]) < 1e-6);
        }
    }
}

TEST_CASE("preframed errors: partial frame, missing file") {
    CaptureSpec spec;
    spec.path = "test_capture_bad.bin";
    spec.layout = SampleLayout::InterleavedF64;
    spec.framing.kind = Framing::Kind::Preframed;
    spec.framing.frame_len = 7;
    TempFile guard(spec.path);
    {
        // 5 f64 sample pairs: not divisible into frames of 7.
        std::ofstream os(spec.path, std::ios::binary);
        const std::vector<double> zeros(10, 0.0);
        os.write(reinterpret_cast<const char*>(zeros.data()), 80);
    }
    CHECK_THROWS_AS(read_capture(spec), MalformedFile);

    // Truncated byte count (not a whole sample pair).
    {
        std::ofstream os(spec.path, std::ios::binary | std::ios::trunc);
        os.write("abc", 3);
    }
    CHECK_THROWS_AS(read_capture(spec), MalformedFile);

    CaptureSpec missing = spec;
    missing.path = "definitely_not_here.bin";
    CHECK_THROWS_AS(read_capture(missing), IoError);
}

TEST_CASE("energy detect: silence rejected, bursts located, offset applied") {
    CaptureSpec spec;
    spec.path = "test_capture_ed.bin";
    spec.layout = SampleLayout::InterleavedF64;
    spec.framing.kind = Framing::Kind::EnergyDetect;
    spec.framing.threshold_rel = 0.1;
    spec.framing.min_gap_samples = 8;
    TempFile guard(spec.path);

    // All-zero capture: nothing to detect.
    {
        IqFrame silent;
        silent.sample_rate_hz = 6e6;
        silent.samples.assign(64, cplx(0, 0));
        CaptureSpec w = spec;
        w.framing.kind = Framing::Kind::Preframed;
        w.framing.frame_len = 64;
        write_capture({silent}, w);
    }
    CHECK_THROWS_AS(read_capture(spec), NoFramesDetected);

    // Two bursts of ones with generous silent gaps.
    const std::size_t pre = 40, burst = 30, gap = 50;
    {
        IqFrame stream;
        stream.sample_rate_hz = 6e6;
        stream.samples.assign(pre, cplx(0, 0));
        stream.samples.insert(stream.samples.end(), burst, cplx(1, 0));
        stream.samples.insert(stream.samples.end(), gap, cplx(0, 0));
        stream.samples.insert(stream.samples.end(), burst, cplx(0, 1));
        stream.samples.insert(stream.samples.end(), pre, cplx(0, 0));
        CaptureSpec w = spec;
        w.framing.kind = Framing::Kind::Preframed;
        w.framing.frame_len = stream.samples.size();
        write_capture({stream}, w);
        std::remove((spec.path + ".manifest.json").c_str());  // no labels here
    }
    const auto frames = read_capture(spec);
    REQUIRE(frames.size() == 2);
    // Detected lengths are close to the true burst length (smoothing blurs
    // edges by at most the window width).
    for (const auto& f : frames) {
        CHECK(f.samples.size() >= burst - 5);
        CHECK(f.samples.size() <= burst + 5);
    }
    // First burst should begin near the true onset.
    CHECK(std::abs(std::abs(frames[0].samples[5])) == doctest::Approx(1.0));

    // Alignment offset shifts every detected start by the same amount.
    CaptureSpec shifted = spec;
    shifted.framing.alignment_offset = -4;
    const auto sf = read_capture(shifted);
    REQUIRE(sf.size() == 2);
    CHECK(sf[0].samples.size() == frames[0].samples.size() + 4);
    CHECK(sf[1].samples.size() == frames[1].samples.size() + 4);
}

TEST_CASE("energy detect merges bursts separated by short gaps") {
    CaptureSpec spec;
    spec.path = "test_capture_merge.bin";
    spec.layout = SampleLayout::InterleavedF64;
    spec.framing.kind = Framing::Kind::EnergyDetect;
    spec.framing.min_gap_samples = 32;
    TempFile guard(spec.path);
    {
        IqFrame stream;
        stream.sample_rate_hz = 6e6;
        stream.samples.assign(30, cplx(0, 0));
        stream.samples.insert(stream.samples.end(), 20, cplx(1, 0));
        stream.samples.insert(stream.samples.end(), 10, cplx(0, 0));  // < min_gap
        stream.samples.insert(stream.samples.end(), 20, cplx(1, 0));
        stream.samples.insert(stream.samples.end(), 30, cplx(0, 0));
        CaptureSpec w = spec;
        w.framing.kind = Framing::Kind::Preframed;
        w.framing.frame_len = stream.samples.size();
        write_capture({stream}, w);
        std::remove((spec.path + ".manifest.json").c_str());
    }
    const auto frames = read_capture(spec);
    CHECK(frames.size() == 1);
    CHECK(frames[0].samples.size() >= 45);
}

TEST_CASE("manifest carries offsets, lengths and labels") {
    const auto frames = two_frames();
    CaptureSpec spec;
    spec.path = "test_capture_mf.bin";
    spec.layout = SampleLayout::InterleavedF64;
    spec.framing.kind = Framing::Kind::Preframed;
    spec.framing.frame_len = frames[0].samples.size();
    TempFile guard(spec.path);
    write_capture(frames, spec);

    std::ifstream ms(spec.path + ".manifest.json");
    REQUIRE(ms.good());
    std::string text((std::istreambuf_iterator<char>(ms)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"device_id\": 4") != std::string::npos);
    CHECK(text.find("\"domain_label\": \"loc2\"") != std::string::npos);
    const std::string flen = std::to_string(frames[0].samples.size());
    CHECK(text.find("\"offset\": 0") != std::string::npos);
    CHECK(text.find("\"offset\": " + flen) != std::string::npos);
    CHECK(text.find("\"length\": " + flen) != std::string::npos);
}
