#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace matnet {

// Deterministic random stream. Draws are produced from the raw mt19937_64
// output so results do not depend on the standard library's distribution
// implementations; identical seeds give identical sequences everywhere.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is negligible for the small n
    // used here (shuffles, regime picks).
    std::uint64_t uniform_int(std::uint64_t n) {
        return n == 0 ? 0 : engine_() % n;
    }

    // Standard normal via Box-Muller; consumes two uniforms per call, no
    // cached spare, so the draw count stays predictable.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        if (items.size() < 2) return;
        for (std::size_t i = items.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
            std::swap(items[i], items[j]);
        }
    }

    std::string save_state() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void load_state(const std::string& state) {
        std::istringstream is(state);
        is >> engine_;
    }

private:
    std::mt19937_64 engine_;
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

// Stream-splitting scheme: every consumer (weight init, shuffling, dropout,
// synthetic data) owns a named stream derived as
//   stream_seed = splitmix64(master_seed XOR fnv1a64(name)).
// Streams are therefore independent of each other's draw order, and the same
// (master seed, name) pair always yields the same stream.
inline RngStream named_stream(std::uint64_t master_seed, std::string_view name) {
    return RngStream(detail::splitmix64(master_seed ^ detail::fnv1a64(name)));
}

}  // namespace matnet
