#pragma once

// Counter-based random streams for reproducible Monte Carlo.
//
// The generator is Philox4x64-10 (Salmon et al., SC'11), the same block
// function numpy exposes as `numpy.random.Philox`.  A stream is identified by
// the 128-bit key (master_seed, stream_id); successive 256-bit blocks are the
// encryptions of counters 0, 1, 2, ...  Replicate r of an experiment draws
// from stream (seed, r), so results never depend on how replicates are
// scheduled across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include "error.hpp"

namespace pspline {

using Philox4x64Block = std::array<std::uint64_t, 4>;
using Philox4x64Key = std::array<std::uint64_t, 2>;

namespace detail {

inline void mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    const unsigned __int128 product = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(product >> 64);
    lo = static_cast<std::uint64_t>(product);
}

}  // namespace detail

/// Philox4x64 with 10 rounds applied to one counter block.
inline Philox4x64Block philox4x64_10(Philox4x64Block ctr, Philox4x64Key key) {
    constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
    constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
    constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
    constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint64_t hi0, lo0, hi1, lo1;
        detail::mulhilo64(kMul0, ctr[0], hi0, lo0);
        detail::mulhilo64(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

/// Inverse of the standard normal CDF (Wichura, AS241, ~1e-16 relative).
inline double normal_quantile(double p) {
    detail::require(p > 0.0 && p < 1.0, "normal_quantile: p must lie in (0, 1)");
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        value = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                     1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
                  4.6303378461565452959) * r + 1.42343711074968357734) /
                (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                     0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
                  2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                     0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
                  5.4637849111641143699) * r + 6.6579046435011037772) /
                (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                     7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                  0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -value : value;
}

/// One reproducible random stream.  Not thread-safe; give each worker its own.
class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, std::uint64_t stream_id) : key_{master_seed, stream_id} {}

    std::uint64_t next_u64() {
        if (pos_ == buffer_.size()) {
            buffer_ = philox4x64_10({block_, 0, 0, 0}, key_);
            ++block_;
            pos_ = 0;
        }
        return buffer_[pos_++];
    }

    /// Uniform on the open interval (0, 1), 53 bits of resolution.
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal by inversion, one uniform per deviate.
    double normal() { return normal_quantile(uniform()); }

    /// Gamma(shape, 1) by Marsaglia and Tsang's squeeze method.
    double gamma(double shape) {
        detail::require(shape > 0.0, "gamma: shape must be positive");
        if (shape < 1.0) {
            const double boost = std::pow(uniform(), 1.0 / shape);
            return gamma(shape + 1.0) * boost;
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double z, v;
            do {
                z = normal();
                v = 1.0 + c * z;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * z * z * z * z) return d * v;
            if (std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    const Philox4x64Key& key() const { return key_; }

private:
    Philox4x64Key key_;
    std::uint64_t block_ = 0;
    Philox4x64Block buffer_{};
    std::size_t pos_ = 4;
};

}  // namespace pspline
