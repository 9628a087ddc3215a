#include <cmath>

#include "blefp/iq_core.hpp"
#include "blefp/rng.hpp"
#include "doctest.h"

using namespace blefp;

namespace {
constexpr double kPi = 3.14159265358979323846;

IqFrame make_frame(std::vector<cplx> samples, double fs = 6e6) {
    IqFrame f;
    f.samples = std::move(samples);
    f.sample_rate_hz = fs;
    return f;
}

IqFrame random_frame(Rng& rng, std::size_t n) {
    std::vector<cplx> s(n);
    for (auto& v : s) {
        v = cplx(rng.gaussian(), rng.gaussian());
    }
    return make_frame(std::move(s));
}

// Independent unwrap oracle: nearest-multiple-of-2pi continuation.
std::vector<double> unwrap_oracle(const std::vector<double>& in) {
    std::vector<double> out(in.size());
    if (in.empty()) return out;
    out[0] = in[0];
    for (std::size_t i = 1; i < in.size(); ++i) {
        const double k = std::floor((out[i - 1] - in[i]) / (2.0 * kPi) + 0.5);
        out[i] = in[i] + 2.0 * kPi * k;
    }
    return out;
}

// Naive O(N^2) DFT.
std::vector<cplx> naive_dft(const std::vector<cplx>& x) {
    const std::size_t n = x.size();
    std::vector<cplx> out(n, cplx(0, 0));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * kPi * static_cast<double>(k * t) / static_cast<double>(n);
            out[k] += x[t] * cplx(std::cos(ang), std::sin(ang));
        }
    }
    return out;
}
}  // namespace

TEST_CASE("angle axis cases and zero convention") {
    auto ph = angle(make_frame({cplx(1, 0)}));
    CHECK(ph.values[0] == doctest::Approx(0.0));
    ph = angle(make_frame({cplx(0, 1), cplx(-1, 0)}));
    CHECK(ph.values[0] == doctest::Approx(kPi / 2));
    CHECK(ph.values[1] == doctest::Approx(kPi));
    ph = angle(make_frame({cplx(0.6, 0.8)}));
    CHECK(ph.values[0] == doctest::Approx(0.9272952180016122).epsilon(1e-12));
    CHECK(angle_of(cplx(0, 0)) == 0.0);
}

TEST_CASE("unwrap matches spec examples") {
    PhaseSeq in;
    in.values = {0, 1, 2};
    CHECK(unwrap(in).values == std::vector<double>{0, 1, 2});

    in.values = {0, 3.0, -3.0};
    auto out = unwrap(in);
    CHECK(out.values[2] == doctest::Approx(2 * kPi - 3.0).epsilon(1e-12));

    in.values = {kPi, -kPi + 0.1};
    out = unwrap(in);
    CHECK(out.values[1] == doctest::Approx(kPi + 0.1).epsilon(1e-12));
}

TEST_CASE("unwrap properties: diffs in (-pi,pi], congruent mod 2pi") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        PhaseSeq in;
        for (int i = 0; i < 64; ++i) {
            in.values.push_back(rng.uniform(-kPi, kPi));
        }
        const auto out = unwrap(in);
        const auto oracle = unwrap_oracle(in.values);
        for (std::size_t i = 0; i < in.values.size(); ++i) {
            CHECK(out.values[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
            const double residue = std::remainder(out.values[i] - in.values[i], 2 * kPi);
            CHECK(std::abs(residue) < 1e-12);
            if (i > 0) {
                const double d = out.values[i] - out.values[i - 1];
                CHECK(d > -kPi - 1e-12);
                CHECK(d <= kPi + 1e-12);
            }
        }
    }
}

TEST_CASE("fft examples and naive DFT oracle") {
    auto y = fft({cplx(1, 0), cplx(0, 0), cplx(0, 0), cplx(0, 0)});
    for (const auto& v : y) {
        CHECK(v.real() == doctest::Approx(1.0));
        CHECK(std::abs(v.imag()) < 1e-14);
    }
    y = fft({cplx(1, 0), cplx(1, 0), cplx(1, 0), cplx(1, 0)});
    CHECK(y[0].real() == doctest::Approx(4.0));
    for (std::size_t k = 1; k < 4; ++k) {
        CHECK(std::abs(y[k]) < 1e-14);
    }

    Rng rng(5);
    for (std::size_t n : {1u, 2u, 4u, 8u, 16u, 32u, 64u}) {
        std::vector<cplx> x(n);
        for (auto& v : x) {
            v = cplx(rng.gaussian(), rng.gaussian());
        }
        const auto fast = fft(x);
        const auto slow = naive_dft(x);
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(std::abs(fast[k] - slow[k]) < 1e-10);
        }
    }

    CHECK_THROWS_AS(fft(std::vector<cplx>(3)), NonPowerOfTwoLength);
}

TEST_CASE("psd: tone bin, zeros, Parseval") {
    const std::size_t nfft = 64;
    std::vector<cplx> tone(nfft);
    const std::size_t k0 = 5;
    for (std::size_t n = 0; n < nfft; ++n) {
        const double ang = 2 * kPi * static_cast<double>(k0 * n) / static_cast<double>(nfft);
        tone[n] = cplx(std::cos(ang), std::sin(ang));
    }
    auto p = psd(tone, nfft);
    for (std::size_t k = 0; k < nfft; ++k) {
        if (k == k0) {
            CHECK(p[k] == doctest::Approx(64.0));
        } else {
            CHECK(p[k] < 1e-18);
        }
    }

    p = psd(std::vector<cplx>(16, cplx(0, 0)), 16);
    for (double v : p) {
        CHECK(v == 0.0);
    }

    Rng rng(17);
    for (std::size_t n : {100u, 1000u, 4096u}) {
        auto frame = random_frame(rng, n);
        const std::size_t nf = next_power_of_two(n);
        const auto spec = psd(frame, nf);
        double sum_psd = 0.0, energy = 0.0;
        for (double v : spec) {
            sum_psd += v;
        }
        for (const auto& s : frame.samples) {
            energy += std::norm(s);
        }
        CHECK(sum_psd == doctest::Approx(energy).epsilon(1e-9));
    }

    CHECK_THROWS_AS(psd(std::vector<cplx>(8), 12), NonPowerOfTwoLength);
}

TEST_CASE("normalize_power: mean power 1, phase preserved, idempotent") {
    auto f = make_frame(std::vector<cplx>(10, cplx(2, 0)));
    auto n1 = normalize_power(f);
    for (const auto& s : n1.samples) {
        CHECK(s.real() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s.imag() == 0.0);
    }

    Rng rng(23);
    auto r = random_frame(rng, 257);
    auto norm = normalize_power(r);
    double power = 0.0;
    for (const auto& s : norm.samples) {
        power += std::norm(s);
    }
    power /= static_cast<double>(norm.samples.size());
    CHECK(power == doctest::Approx(1.0).epsilon(1e-12));

    // Scale invariance and idempotence.
    auto scaled = r;
    for (auto& s : scaled.samples) {
        s *= 0.37;
    }
    auto norm2 = normalize_power(scaled);
    auto twice = normalize_power(norm);
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        CHECK(std::abs(norm2.samples[i] - norm.samples[i]) < 1e-12);
        CHECK(std::abs(twice.samples[i] - norm.samples[i]) < 1e-12);
        if (std::abs(r.samples[i]) > 0) {
            CHECK(angle_of(norm.samples[i]) == doctest::Approx(angle_of(r.samples[i])));
        }
    }

    CHECK_THROWS_AS(normalize_power(make_frame(std::vector<cplx>(4, cplx(0, 0)))),
                    ZeroEnergyFrame);
}
