#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace seqcl {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic PRNG with a portable bit-exact sequence. The standard
// <random> distributions are implementation-defined, so every sampling
// routine used by the pipeline lives here.
class DetRng {
public:
    explicit DetRng(uint64_t seed) : state_(seed) {
        // burn-in so nearby seeds decorrelate
        splitmix64(state_);
        splitmix64(state_);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // unbiased uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) return 0;
        uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; second deviate cached
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // gaussian redrawn until within 2 sigma, then scaled
    double truncated_normal(double sigma) {
        for (;;) {
            double g = gaussian();
            if (std::fabs(g) <= 2.0) return g * sigma;
        }
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Independent, named sub-streams derived from a root seed. Streams are a
// function of (seed, words...) only, so e.g. the augmentation stream for
// (seed, user, epoch) is identical no matter what ran before it.
inline uint64_t derive_seed(uint64_t seed, std::initializer_list<uint64_t> words) {
    uint64_t s = seed ^ 0x6a09e667f3bcc908ULL;
    splitmix64(s);
    for (uint64_t w : words) {
        s ^= w + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        splitmix64(s);
    }
    return splitmix64(s);
}

inline uint64_t hash_string(std::string_view sv) {
    // FNV-1a 64
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : sv) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline DetRng make_stream(uint64_t seed, std::string_view name,
                          std::initializer_list<uint64_t> words = {}) {
    uint64_t s = derive_seed(seed, {hash_string(name)});
    s = derive_seed(s, words);
    return DetRng(s);
}

}  // namespace seqcl
