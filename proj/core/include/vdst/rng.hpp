#pragma once

#include <cstdint>
#include <cmath>

namespace vdst {

// SplitMix64 finalizer, used to derive independent stream seeds.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ull + splitmix64(b)));
}

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

// PCG-XSH-RR 32. Bit-identical sequences on every platform; all randomness
// in the project flows through instances of this generator, keyed by
// (root seed, stream id, counters) so runs are reproducible and resumable.
class Pcg32 {
public:
    Pcg32() : Pcg32(0x853c49e6748fea9bull, 0) {}
    Pcg32(uint64_t seed, uint64_t stream) {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ull + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    // 53-bit uniform in [0,1)
    double uniform() {
        uint64_t hi = next_u32();
        uint64_t lo = next_u32();
        uint64_t bits = ((hi << 32) | lo) >> 11;
        return static_cast<double>(bits) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [lo, hi] inclusive
    int uniform_int(int lo, int hi) {
        uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
        uint64_t x = (static_cast<uint64_t>(next_u32()) * range) >> 32;
        return lo + static_cast<int>(x);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Marsaglia polar method with cached spare
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

private:
    uint64_t state_ = 0;
    uint64_t inc_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stream ids for the components that draw randomness. Each (component,
// epoch, step) tuple gets its own generator so that disabling one component
// never shifts the draws of another.
enum class RngStream : uint64_t {
    backbone_init = 1,
    teacher_init = 2,
    student_init = 3,
    shuffle = 4,
    teacher_downsample = 5,
    teacher_dropout = 6,
    student_dropout = 7,
    synth = 8,
};

inline Pcg32 make_stream(uint64_t seed, RngStream s, uint64_t a = 0, uint64_t b = 0) {
    return Pcg32(mix_seed(seed, static_cast<uint64_t>(s)), mix_seed(a, b));
}

} // namespace vdst
