#include "cfqp/embedder.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <thread>

#include "cfqp/errors.hpp"
#include "cfqp/simd.hpp"
#include "cfqp/text.hpp"

namespace cfqp {

using nlohmann::json;

bool Embedding::is_zero() const {
    for (double v : values) {
        if (v != 0.0) return false;
    }
    return true;
}

double Embedding::norm() const {
    return std::sqrt(simd::sum_squares(values.data(), values.size()));
}

Embedding hash_embed(std::string_view text_in, std::size_t dim) {
    if (dim < 8) throw ConfigError("hash_embed requires dim >= 8");
    Embedding e;
    e.values.assign(dim, 0.0);
    for (const auto& token : text::tokenize(text_in)) {
        std::uint64_t h = text::fnv1a64(token);
        std::size_t bucket = static_cast<std::size_t>(h % dim);
        double sign = (h >> 63) ? 1.0 : -1.0;
        e.values[bucket] += sign;
    }
    double n = e.norm();
    if (n > 0.0) {
        for (double& v : e.values) v /= n;
    }
    return e;
}

EmbedCache::EmbedCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("key") || !j.contains("values")) continue;
        entries_[j["key"].get<std::string>()] = j["values"].get<std::vector<double>>();
    }
}

std::optional<std::vector<double>> EmbedCache::get(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbedCache::put(const std::string& key, const std::vector<double>& values) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!entries_.emplace(key, values).second) return;  // already stored
    if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    json j;
    j["key"] = key;
    j["values"] = values;
    out << j.dump() << "\n";
}

std::size_t EmbedCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

Embedder::Embedder(EmbedderConfig cfg, http::PostFn transport)
    : cfg_(std::move(cfg)), post_(transport ? std::move(transport) : http::default_post()) {
    if (cfg_.dim == 0) throw ConfigError("embedding dim must be positive");
    if (cfg_.provider == EmbedProvider::remote && cfg_.endpoint.empty()) {
        throw ConfigError("remote embedder requires an endpoint");
    }
    if (cfg_.cache_path) cache_ = std::make_unique<EmbedCache>(*cfg_.cache_path);
}

std::string Embedder::cache_key(const EmbedderConfig& cfg, std::string_view nfc_text) {
    std::string material;
    material += (cfg.provider == EmbedProvider::hash) ? "hash" : "remote";
    material += '\x1f';
    material += std::to_string(cfg.dim);
    material += '\x1f';
    material.append(nfc_text);
    return text::sha256_hex(material);
}

Embedding Embedder::embed(std::string_view text_in) {
    auto out = embed_many({std::string(text_in)});
    return std::move(out.front());
}

std::vector<Embedding> Embedder::embed_many(const std::vector<std::string>& texts) {
    std::vector<Embedding> out(texts.size());
    std::vector<std::string> normalized(texts.size());
    std::vector<std::size_t> misses;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        normalized[i] = text::nfc(texts[i]);
        if (cache_) {
            if (auto hit = cache_->get(cache_key(cfg_, normalized[i]))) {
                if (hit->size() != cfg_.dim) {
                    throw ConfigError("cached embedding dimension mismatch");
                }
                out[i].values = std::move(*hit);
                continue;
            }
        }
        misses.push_back(i);
    }

    if (!misses.empty()) {
        if (cfg_.provider == EmbedProvider::hash) {
            for (std::size_t i : misses) {
                out[i] = hash_embed(normalized[i], cfg_.dim);
            }
        } else {
            std::vector<std::string> pending;
            pending.reserve(misses.size());
            for (std::size_t i : misses) pending.push_back(normalized[i]);
            auto fetched = remote_embed(pending);
            for (std::size_t k = 0; k < misses.size(); ++k) {
                out[misses[k]] = std::move(fetched[k]);
            }
        }
        if (cache_) {
            for (std::size_t i : misses) {
                cache_->put(cache_key(cfg_, normalized[i]), out[i].values);
            }
        }
    }
    return out;
}

std::vector<Embedding> Embedder::remote_embed(const std::vector<std::string>& texts) {
    // Empty texts keep the zero-vector sentinel without a remote call.
    std::vector<std::size_t> live;
    std::vector<std::string> payload;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) continue;
        live.push_back(i);
        std::string t = texts[i];
        if (t.size() > kRemoteMaxChars) {
            t.resize(kRemoteMaxChars);
            std::cerr << "[cfqp] warning: embedding input truncated to " << kRemoteMaxChars
                      << " chars\n";
        }
        payload.push_back(std::move(t));
    }

    std::vector<Embedding> out(texts.size());
    for (auto& e : out) e.values.assign(cfg_.dim, 0.0);
    if (live.empty()) return out;

    struct Batch {
        std::size_t offset;
        std::vector<std::string> texts;
    };
    std::vector<Batch> batches;
    for (std::size_t off = 0; off < payload.size(); off += cfg_.batch_size) {
        Batch b;
        b.offset = off;
        for (std::size_t i = off; i < payload.size() && i < off + cfg_.batch_size; ++i) {
            b.texts.push_back(payload[i]);
        }
        batches.push_back(std::move(b));
    }

    std::vector<std::vector<std::vector<double>>> results(batches.size());
    const char* key = std::getenv("CFQP_EMBED_API_KEY");

    auto fetch = [&](const Batch& b) {
        json body;
        body["input"] = b.texts;
        body["model"] = cfg_.model_name;
        http::Request req;
        req.url = cfg_.endpoint;
        req.body = body.dump();
        if (key && *key) req.headers.emplace_back("Authorization", std::string("Bearer ") + key);
        http::Response res = post_(req);
        if (res.timed_out) throw TimeoutError("embedding request timed out");
        if (res.status == 0) {
            throw TransportError("embedding transport failure: " + res.error, 0);
        }
        if (res.status < 200 || res.status >= 300) {
            throw TransportError("embedding HTTP " + std::to_string(res.status), res.status);
        }
        json parsed = json::parse(res.body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("data") || !parsed["data"].is_array() ||
            parsed["data"].size() != b.texts.size()) {
            throw TransportError("malformed embedding response", res.status);
        }
        std::vector<std::vector<double>> vecs;
        for (const auto& item : parsed["data"]) {
            if (!item.contains("embedding") || !item["embedding"].is_array()) {
                throw TransportError("malformed embedding response", res.status);
            }
            auto v = item["embedding"].get<std::vector<double>>();
            if (v.size() != cfg_.dim) {
                throw ConfigError("embedding dimension mismatch: expected " +
                                  std::to_string(cfg_.dim) + ", got " + std::to_string(v.size()));
            }
            // Normalize to the unit-norm invariant; all-zero stays zero.
            double ss = simd::sum_squares(v.data(), v.size());
            if (ss > 0.0) {
                double n = std::sqrt(ss);
                for (double& x : v) x /= n;
            }
            vecs.push_back(std::move(v));
        }
        return vecs;
    };

    // Bounded parallelism across batches.
    std::size_t parallel = std::max<std::size_t>(1, cfg_.max_in_flight);
    for (std::size_t start = 0; start < batches.size(); start += parallel) {
        std::vector<std::future<std::vector<std::vector<double>>>> futures;
        std::size_t end = std::min(batches.size(), start + parallel);
        for (std::size_t bi = start; bi < end; ++bi) {
            futures.push_back(std::async(std::launch::async, fetch, std::cref(batches[bi])));
        }
        for (std::size_t bi = start; bi < end; ++bi) {
            results[bi] = futures[bi - start].get();
        }
    }

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        for (std::size_t k = 0; k < results[bi].size(); ++k) {
            std::size_t payload_idx = batches[bi].offset + k;
            out[live[payload_idx]].values = std::move(results[bi][k]);
        }
    }
    return out;
}

}  // namespace cfqp
