#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cfqp/corpus.hpp"
#include "cfqp/embedder.hpp"

namespace cfqp {

struct UserDocument {
    std::string user_id;
    std::string text;
};

// N x N symmetric user-user cosine matrix; immutable after build.
struct SimilarityMatrix {
    std::vector<std::string> user_ids;  // row/column order
    std::vector<double> values;         // row-major, size N*N
    std::size_t dim = 0;                // embedding dim the matrix was built with

    std::size_t size() const { return user_ids.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
    // Index of user_id, or npos.
    std::size_t index_of(const std::string& user_id) const;

    void save(const std::filesystem::path& file) const;
    static SimilarityMatrix load(const std::filesystem::path& file);
};

struct Neighbor {
    std::string user_id;
    double score = 0.0;
};

struct Neighborhood {
    std::string target;
    std::vector<Neighbor> neighbors;  // score desc, ties by ascending user_id
};

// "[PROFILE]\n" + static profile + per-session "[SESSION id]\n" + Q/A lines.
UserDocument build_document(const UserProfile& profile, const std::vector<const Session*>& sessions);

// Exact cosine, clamped to [-1,1]; zero vector against anything is 0.
double cosine(const Embedding& a, const Embedding& b);

// Upper triangle computed once and mirrored; diagonal is 1 for users with a
// nonzero document embedding, 0 otherwise. Row order = input order.
SimilarityMatrix build_matrix(const std::vector<UserDocument>& docs, Embedder& embedder);

// Top-k most similar users to target (self excluded).
Neighborhood top_k(const SimilarityMatrix& matrix, const std::string& target, std::size_t k);

}  // namespace cfqp
