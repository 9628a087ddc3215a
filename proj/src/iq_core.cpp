#include "blefp/iq_core.hpp"

#include <cmath>

namespace blefp {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
}  // namespace

void FrameMeta::validate() const {
    if (channel_index && (*channel_index < 0 || *channel_index > 36)) {
        throw std::invalid_argument("channel_index out of [0,36]");
    }
}

void IqFrame::validate() const {
    if (samples.empty()) {
        throw std::invalid_argument("IqFrame: empty sample vector");
    }
    if (!(sample_rate_hz > 0.0)) {
        throw std::invalid_argument("IqFrame: sample_rate_hz must be > 0");
    }
    for (const auto& s : samples) {
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
            throw std::invalid_argument("IqFrame: non-finite sample");
        }
    }
    meta.validate();
}

double angle_of(cplx z) {
    if (z.real() == 0.0 && z.imag() == 0.0) {
        return 0.0;
    }
    return std::atan2(z.imag(), z.real());
}

PhaseSeq angle(const IqFrame& frame) {
    PhaseSeq out;
    out.wrapped = true;
    out.values.reserve(frame.samples.size());
    for (const auto& s : frame.samples) {
        out.values.push_back(angle_of(s));
    }
    return out;
}

namespace {
// Map a difference into (-pi, pi]. Exactly -pi goes to +pi.
double wrap_diff(double d) {
    double w = std::fmod(d + kPi, kTwoPi);
    if (w <= 0.0) {
        w += kTwoPi;
    }
    return w - kPi;
}
}  // namespace

PhaseSeq unwrap(const PhaseSeq& phases) {
    PhaseSeq out;
    out.wrapped = false;
    out.values.resize(phases.values.size());
    if (phases.values.empty()) {
        return out;
    }
    out.values[0] = phases.values[0];
    for (std::size_t i = 1; i < phases.values.size(); ++i) {
        double d = phases.values[i] - phases.values[i - 1];
        out.values[i] = out.values[i - 1] + wrap_diff(d);
    }
    return out;
}

bool is_power_of_two(std::size_t n) {
    return n != 0 && (n & (n - 1)) == 0;
}

std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

std::vector<cplx> fft(std::vector<cplx> x) {
    const std::size_t n = x.size();
    if (!is_power_of_two(n)) {
        throw NonPowerOfTwoLength("fft: length must be a power of two");
    }
    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(x[i], x[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -kTwoPi / static_cast<double>(len);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cplx u = x[i + k];
                cplx v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    return x;
}

std::vector<double> psd(const std::vector<cplx>& x, std::size_t nfft) {
    if (!is_power_of_two(nfft)) {
        throw NonPowerOfTwoLength("psd: nfft must be a power of two");
    }
    if (nfft < x.size()) {
        throw std::invalid_argument("psd: nfft smaller than input length");
    }
    std::vector<cplx> padded(nfft, cplx(0.0, 0.0));
    std::copy(x.begin(), x.end(), padded.begin());
    auto spec = fft(std::move(padded));
    std::vector<double> out(nfft);
    for (std::size_t k = 0; k < nfft; ++k) {
        out[k] = std::norm(spec[k]) / static_cast<double>(nfft);
    }
    return out;
}

std::vector<double> psd(const IqFrame& frame, std::size_t nfft) {
    return psd(frame.samples, nfft);
}

IqFrame normalize_power(const IqFrame& frame) {
    double energy = 0.0;
    for (const auto& s : frame.samples) {
        energy += std::norm(s);
    }
    if (energy <= 0.0) {
        throw ZeroEnergyFrame("normalize_power: frame has zero energy");
    }
    const double scale = std::sqrt(static_cast<double>(frame.samples.size()) / energy);
    IqFrame out = frame;
    for (auto& s : out.samples) {
        s *= scale;
    }
    return out;
}

}  // namespace blefp
