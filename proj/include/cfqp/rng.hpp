#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cfqp {

// All seeded sampling goes through mt19937_64 with explicit uniform
// derivation. std::uniform_int_distribution is implementation-defined, so
// reduction is done by hand to keep runs byte-identical across toolchains.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, n). Modulo bias is irrelevant at desk-scale n.
    std::uint64_t bounded(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    double unit_real() {
        // 53 random bits -> [0,1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

private:
    std::mt19937_64 engine_;
};

// Deterministic Fisher-Yates; std::shuffle is not portable across library
// implementations.
template <typename T>
void seeded_shuffle(std::vector<T>& items, SeededRng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.bounded(i));
        std::swap(items[i - 1], items[j]);
    }
}

// Sample m distinct indices from [0, n) in seed-determined order.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t m, SeededRng& rng) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(m);
    for (std::size_t taken = 0; taken < m && taken < n; ++taken) {
        std::size_t j = taken + static_cast<std::size_t>(rng.bounded(n - taken));
        std::swap(pool[taken], pool[j]);
        out.push_back(pool[taken]);
    }
    return out;
}

// Mix a base seed with context strings/values into a derived stream seed
// (FNV-1a over the components).
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag, std::uint64_t extra = 0) {
    std::uint64_t h = 14695981039346656037ULL;
    auto eat = [&h](const unsigned char* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    eat(reinterpret_cast<const unsigned char*>(&seed), sizeof(seed));
    eat(reinterpret_cast<const unsigned char*>(tag.data()), tag.size());
    eat(reinterpret_cast<const unsigned char*>(&extra), sizeof(extra));
    return h;
}

}  // namespace cfqp
