#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cfqp/http.hpp"

namespace cfqp {

// Dense vector over a text. Invariant: entries finite and either unit L2
// norm (within 1e-6) or all-zero (the empty-text sentinel).
struct Embedding {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    bool is_zero() const;
    double norm() const;
};

enum class EmbedProvider { hash, remote };

struct EmbedderConfig {
    EmbedProvider provider = EmbedProvider::hash;
    std::size_t dim = 768;
    std::string endpoint;         // remote only
    std::string model_name = "bge-base";
    std::optional<std::filesystem::path> cache_path;
    std::size_t max_in_flight = 8;  // remote request parallelism cap
    std::size_t batch_size = 16;    // texts per remote request
};

// Deterministic signed feature-hashing embedder. Tokens are hashed with
// 64-bit FNV-1a; bucket = h mod dim, sign from the hash's top bit; the
// accumulator is L2-normalized unless all-zero.
Embedding hash_embed(std::string_view text, std::size_t dim);

// Append-only key -> vector store, keyed by SHA-256(provider, dim, NFC text).
class EmbedCache {
public:
    explicit EmbedCache(std::filesystem::path path);

    std::optional<std::vector<double>> get(const std::string& key) const;
    void put(const std::string& key, const std::vector<double>& values);
    std::size_t size() const;

private:
    std::filesystem::path path_;
    std::unordered_map<std::string, std::vector<double>> entries_;
    mutable std::mutex mutex_;
};

class Embedder {
public:
    explicit Embedder(EmbedderConfig cfg, http::PostFn transport = {});

    // NFC-normalizes, consults the cache, then the provider. Safe for
    // concurrent calls.
    Embedding embed(std::string_view text);

    // Batch entry point; remote requests are chunked and issued with at
    // most cfg.max_in_flight in flight. Output order matches input.
    std::vector<Embedding> embed_many(const std::vector<std::string>& texts);

    const EmbedderConfig& config() const { return cfg_; }
    static std::string cache_key(const EmbedderConfig& cfg, std::string_view nfc_text);

    // Texts longer than this are truncated before remote embedding (and the
    // truncation logged); the hash provider has no length limit.
    static constexpr std::size_t kRemoteMaxChars = 8192;

private:
    std::vector<Embedding> remote_embed(const std::vector<std::string>& texts);

    EmbedderConfig cfg_;
    http::PostFn post_;
    std::unique_ptr<EmbedCache> cache_;
    std::mutex remote_mutex_;
};

}  // namespace cfqp
