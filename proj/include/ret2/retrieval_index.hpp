// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Flat exhaustive retrieval index. Every document embedding is scanned for
// every query and scored either by dot product (single-token embeddings) or
// by late interaction (sum over query tokens of the best-matching document
// token). Exactness is the point: results are reference answers the tests
// and evaluations can trust, and the scan parallelizes well enough for the
// corpus sizes this repo targets.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ret2/common.hpp"

namespace ret2 {

enum class ScoringMode { Dot, MaxSim };

std::string to_string(ScoringMode mode);
ScoringMode scoring_mode_from_string(const std::string& s);

// Embeddings as written by the encoder: n records of k x d_bar, row-major.
struct EmbeddingFile {
    std::vector<std::string> ids;
    std::vector<double> matrix;
    int64_t k = 1;
    int64_t d_bar = 0;

    int64_t count() const { return static_cast<int64_t>(ids.size()); }
    int64_t row_width() const { return k * d_bar; }
    const double* row(int64_t i) const { return matrix.data() + i * row_width(); }
    void validate() const;
};

void save_embeddings(const EmbeddingFile& emb, const std::string& path);
EmbeddingFile load_embeddings(const std::string& path);

struct IndexShard {
    std::vector<std::string> doc_ids;
    std::vector<double> matrix;  // num_docs x (k * d_bar), row-major
    int64_t k = 1;
    int64_t d_bar = 0;
    ScoringMode mode = ScoringMode::Dot;

    int64_t num_docs() const { return static_cast<int64_t>(doc_ids.size()); }
    int64_t row_width() const { return k * d_bar; }
};

// Throws DataError on duplicate ids, ShapeError on inconsistent sizes. A Dot
// shard requires k == 1.
IndexShard build_index(const std::vector<std::string>& ids, const std::vector<double>& matrix,
                       int64_t k, int64_t d_bar, ScoringMode mode);
IndexShard build_index(const EmbeddingFile& emb, ScoringMode mode);

void save_shard(const IndexShard& shard, const std::string& path);
IndexShard load_shard(const std::string& path);

struct SearchHit {
    std::string doc_id;
    double score;
};

struct RetrievalResult {
    std::string query_id;
    std::vector<SearchHit> hits;  // scores non-increasing; ties keep insertion order
    bool k_clamped = false;       // requested K exceeded the corpus size
};

// Exact top-K by exhaustive scan (bounded min-heap selection). The query is
// kq x d_bar row-major; Dot mode requires kq == 1. K > num_docs returns every
// document with k_clamped set. Searching an empty shard throws DataError.
RetrievalResult search(const IndexShard& shard, const std::string& query_id,
                       const std::vector<double>& query, int64_t kq, int64_t top_k);

// Fraction of queries whose relevant document id appears in the top K hits.
// Every query must have a relevance entry.
double recall_at_k(const std::vector<RetrievalResult>& results,
                   const std::map<std::string, std::string>& relevance, int64_t top_k);

// Fraction of queries where some top-K document's raw text contains the
// query's answer string, case-insensitively. Documents without raw text never
// match; queries without an answer entry throw DataError.
double pseudo_recall_at_k(const std::vector<RetrievalResult>& results,
                          const std::map<std::string, std::string>& answers,
                          const std::map<std::string, std::string>& raw_texts, int64_t top_k);

}  // namespace ret2
