#ifndef POSSMIX_RNG_HPP_
#define POSSMIX_RNG_HPP_

#include <array>
#include <cstdint>

namespace possmix {

/// One SplitMix64 step; also the stream-splitting hash.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a decorrelated substream seed from a seed and a stream index.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s = a ^ (stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    std::uint64_t b = splitmix64(s);
    splitmix64(s);
    return b ^ s;
}

/// xoshiro256++ generator. Cheap to construct, so every possession or
/// multistart run can own a stream derived with mix_seed; that is what makes
/// sampling order-independent and thread-count invariant.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
    }
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(mix_seed(seed, stream_id));
    }

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    /// Uniform on (0, 1).
    double next_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }
    /// Uniform integer in [0, n).
    int next_below(int n) {
        return static_cast<int>(next_double() * n) % n;
    }

private:
    std::array<std::uint64_t, 4> state_;
};

/// Index drawn from the discrete distribution given by probs[0..n-1]
/// (assumed to sum to 1; the final index absorbs rounding slack).
int sample_index(Rng& rng, const double* probs, int n);

/// Standard normal via inverse CDF (single uniform per draw).
double sample_normal(Rng& rng);

/// Gamma(shape, scale) via Marsaglia-Tsang with the shape < 1 boost.
double sample_gamma(Rng& rng, double shape, double scale);

/// Normal(mean, sd) truncated to [lo, hi], sampled by inverse CDF on the
/// truncated interval; robust under extreme truncation.
double sample_trunc_normal(Rng& rng, double mean, double sd, double lo, double hi);

}  // namespace possmix

#endif  // POSSMIX_RNG_HPP_
