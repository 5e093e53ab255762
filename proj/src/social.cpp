#include "cfqp/social.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "cfqp/errors.hpp"
#include "cfqp/simd.hpp"

namespace cfqp {

using nlohmann::ordered_json;

std::size_t SimilarityMatrix::index_of(const std::string& user_id) const {
    for (std::size_t i = 0; i < user_ids.size(); ++i) {
        if (user_ids[i] == user_id) return i;
    }
    return static_cast<std::size_t>(-1);
}

void SimilarityMatrix::save(const std::filesystem::path& file) const {
    ordered_json j;
    j["dim"] = dim;
    j["user_ids"] = user_ids;
    j["rows"] = ordered_json::array();
    for (std::size_t i = 0; i < size(); ++i) {
        ordered_json row = ordered_json::array();
        for (std::size_t k = 0; k < size(); ++k) row.push_back(at(i, k));
        j["rows"].push_back(std::move(row));
    }
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << "\n";
}

SimilarityMatrix SimilarityMatrix::load(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw SchemaError("cannot open matrix file " + file.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("user_ids") || !j.contains("rows")) {
        throw SchemaError("malformed matrix file " + file.string());
    }
    SimilarityMatrix m;
    m.dim = j.value("dim", 0);
    m.user_ids = j["user_ids"].get<std::vector<std::string>>();
    const auto n = m.user_ids.size();
    m.values.assign(n * n, 0.0);
    if (j["rows"].size() != n) throw SchemaError("matrix row count mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = j["rows"][i];
        if (row.size() != n) throw SchemaError("matrix column count mismatch");
        for (std::size_t k = 0; k < n; ++k) m.values[i * n + k] = row[k].get<double>();
    }
    return m;
}

UserDocument build_document(const UserProfile& profile,
                            const std::vector<const Session*>& sessions) {
    UserDocument doc;
    doc.user_id = profile.user_id;
    doc.text = "[PROFILE]\n" + profile.static_profile;
    for (const Session* s : sessions) {
        if (s->user_id != profile.user_id) {
            throw SchemaError("session '" + s->session_id + "' does not belong to user '" +
                              profile.user_id + "'");
        }
        doc.text += "\n[SESSION " + s->session_id + "]";
        for (const auto& u : s->utterances) {
            doc.text += (u.speaker == Speaker::user) ? "\nQ: " : "\nA: ";
            doc.text += u.text;
        }
    }
    doc.text += "\n";
    return doc;
}

double cosine(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim()) {
        throw ConfigError("cosine dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()));
    }
    double ssa = simd::sum_squares(a.values.data(), a.dim());
    double ssb = simd::sum_squares(b.values.data(), b.dim());
    if (ssa == 0.0 || ssb == 0.0) return 0.0;
    if (a.values == b.values) return 1.0;  // cos(v, v) is exactly 1
    double d = simd::dot(a.values.data(), b.values.data(), a.dim());
    double c = d / (std::sqrt(ssa) * std::sqrt(ssb));
    return std::clamp(c, -1.0, 1.0);
}

SimilarityMatrix build_matrix(const std::vector<UserDocument>& docs, Embedder& embedder) {
    if (docs.empty()) throw ConfigError("build_matrix needs at least one document");
    SimilarityMatrix m;
    m.dim = embedder.config().dim;
    std::vector<std::string> texts;
    texts.reserve(docs.size());
    for (const auto& d : docs) {
        m.user_ids.push_back(d.user_id);
        texts.push_back(d.text);
    }
    for (std::size_t i = 0; i < m.user_ids.size(); ++i) {
        for (std::size_t k = i + 1; k < m.user_ids.size(); ++k) {
            if (m.user_ids[i] == m.user_ids[k]) {
                throw SchemaError("duplicate user_id '" + m.user_ids[i] + "' in documents");
            }
        }
    }

    std::vector<Embedding> vecs;
    try {
        vecs = embedder.embed_many(texts);
    } catch (const std::exception& e) {
        throw TransportError("embedding documents failed: " + std::string(e.what()), 0);
    }

    const std::size_t n = docs.size();
    m.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        m.values[i * n + i] = vecs[i].is_zero() ? 0.0 : 1.0;
        for (std::size_t k = i + 1; k < n; ++k) {
            double s = cosine(vecs[i], vecs[k]);
            m.values[i * n + k] = s;
            m.values[k * n + i] = s;
        }
    }
    return m;
}

Neighborhood top_k(const SimilarityMatrix& matrix, const std::string& target, std::size_t k) {
    std::size_t t = matrix.index_of(target);
    if (t == static_cast<std::size_t>(-1)) {
        throw ConfigError("unknown target user '" + target + "'");
    }
    Neighborhood hood;
    hood.target = target;
    std::vector<Neighbor> all;
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        if (i == t) continue;
        all.push_back({matrix.user_ids[i], matrix.at(t, i)});
    }
    std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.user_id < b.user_id;
    });
    if (all.size() > k) all.resize(k);
    hood.neighbors = std::move(all);
    return hood;
}

}  // namespace cfqp
