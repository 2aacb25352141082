// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0

#include "ret2/retrieval_index.hpp"

#include <algorithm>
#include <cctype>
#include <queue>
#include <set>

#include "json.hpp"
#include "ret2/envelope.hpp"
#include "ret2/kernels.hpp"

namespace ret2 {

std::string to_string(ScoringMode mode) { return mode == ScoringMode::Dot ? "dot" : "maxsim"; }

ScoringMode scoring_mode_from_string(const std::string& s) {
    if (s == "dot") return ScoringMode::Dot;
    if (s == "maxsim") return ScoringMode::MaxSim;
    throw ConfigError("unknown scoring mode: " + s);
}

void EmbeddingFile::validate() const {
    if (k < 1 || d_bar < 1) throw ShapeError("embeddings: k and d_bar must be positive");
    if (static_cast<int64_t>(matrix.size()) != count() * row_width())
        throw ShapeError("embeddings: matrix size does not match ids");
}

void save_embeddings(const EmbeddingFile& emb, const std::string& path) {
    emb.validate();
    Envelope env;
    env.magic = kEmbeddingMagic;
    env.header = {{"k", emb.k}, {"d_bar", emb.d_bar}, {"ids", emb.ids}};
    env.payload.reserve(emb.matrix.size());
    for (double v : emb.matrix) env.payload.push_back(static_cast<float>(v));
    write_envelope(path, env);
}

EmbeddingFile load_embeddings(const std::string& path) {
    Envelope env = read_envelope(path, kEmbeddingMagic);
    EmbeddingFile emb;
    try {
        emb.k = env.header.at("k").get<int64_t>();
        emb.d_bar = env.header.at("d_bar").get<int64_t>();
        emb.ids = env.header.at("ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("embeddings header: ") + e.what());
    }
    emb.matrix.reserve(env.payload.size());
    for (float v : env.payload) emb.matrix.push_back(static_cast<double>(v));
    emb.validate();
    return emb;
}

IndexShard build_index(const std::vector<std::string>& ids, const std::vector<double>& matrix,
                       int64_t k, int64_t d_bar, ScoringMode mode) {
    if (k < 1 || d_bar < 1) throw ShapeError("index: k and d_bar must be positive");
    if (mode == ScoringMode::Dot && k != 1) throw ShapeError("index: dot mode requires k == 1");
    if (static_cast<int64_t>(matrix.size()) != static_cast<int64_t>(ids.size()) * k * d_bar)
        throw ShapeError("index: matrix size does not match ids");
    std::set<std::string> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second) throw DataError("index: duplicate document id " + id);
    IndexShard shard;
    shard.doc_ids = ids;
    shard.matrix = matrix;
    shard.k = k;
    shard.d_bar = d_bar;
    shard.mode = mode;
    return shard;
}

IndexShard build_index(const EmbeddingFile& emb, ScoringMode mode) {
    return build_index(emb.ids, emb.matrix, emb.k, emb.d_bar, mode);
}

void save_shard(const IndexShard& shard, const std::string& path) {
    Envelope env;
    env.magic = kShardMagic;
    env.header = {{"k", shard.k},
                  {"d_bar", shard.d_bar},
                  {"mode", to_string(shard.mode)},
                  {"doc_ids", shard.doc_ids}};
    env.payload.reserve(shard.matrix.size());
    for (double v : shard.matrix) env.payload.push_back(static_cast<float>(v));
    write_envelope(path, env);
}

IndexShard load_shard(const std::string& path) {
    Envelope env = read_envelope(path, kShardMagic);
    std::vector<std::string> ids;
    int64_t k = 0, d_bar = 0;
    ScoringMode mode;
    try {
        k = env.header.at("k").get<int64_t>();
        d_bar = env.header.at("d_bar").get<int64_t>();
        mode = scoring_mode_from_string(env.header.at("mode").get<std::string>());
        ids = env.header.at("doc_ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("shard header: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("shard header: ") + e.what());
    }
    std::vector<double> matrix;
    matrix.reserve(env.payload.size());
    for (float v : env.payload) matrix.push_back(static_cast<double>(v));
    return build_index(ids, matrix, k, d_bar, mode);
}

RetrievalResult search(const IndexShard& shard, const std::string& query_id,
                       const std::vector<double>& query, int64_t kq, int64_t top_k) {
    if (shard.num_docs() == 0) throw DataError("search: empty shard");
    if (top_k < 1) throw ConfigError("search: K must be at least 1");
    if (kq < 1 || static_cast<int64_t>(query.size()) != kq * shard.d_bar)
        throw ShapeError("search: query shape does not match shard");
    if (shard.mode == ScoringMode::Dot && kq != 1)
        throw ShapeError("search: dot mode requires a single query token");

    const int64_t n = shard.num_docs();
    std::vector<double> scores(static_cast<size_t>(n));
    if (shard.mode == ScoringMode::Dot) {
        kernels::dot_scores(shard.matrix.data(), n, query.data(), shard.d_bar, scores.data());
    } else {
        kernels::maxsim_scores(shard.matrix.data(), n, query.data(), kq, shard.k, shard.d_bar,
                               scores.data());
    }

    RetrievalResult out;
    out.query_id = query_id;
    int64_t keep = top_k;
    if (keep > n) {
        keep = n;
        out.k_clamped = true;
    }

    // Bounded selection. Ranking order is score descending, insertion order
    // ascending on ties; the heap surfaces the worst kept candidate so a
    // better one can displace it. Equal-score latecomers never displace.
    auto better = [&](int64_t a, int64_t b) {
        if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
            return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
        return a < b;
    };
    std::priority_queue<int64_t, std::vector<int64_t>, decltype(better)> heap(better);
    for (int64_t i = 0; i < n; ++i) {
        if (static_cast<int64_t>(heap.size()) < keep) {
            heap.push(i);
        } else if (scores[static_cast<size_t>(i)] > scores[static_cast<size_t>(heap.top())]) {
            heap.pop();
            heap.push(i);
        }
    }
    std::vector<int64_t> kept;
    kept.reserve(static_cast<size_t>(keep));
    while (!heap.empty()) {
        kept.push_back(heap.top());
        heap.pop();
    }
    std::reverse(kept.begin(), kept.end());
    for (int64_t idx : kept)
        out.hits.push_back({shard.doc_ids[static_cast<size_t>(idx)], scores[static_cast<size_t>(idx)]});
    return out;
}

double recall_at_k(const std::vector<RetrievalResult>& results,
                   const std::map<std::string, std::string>& relevance, int64_t top_k) {
    if (results.empty()) throw DataError("recall: no results");
    if (top_k < 1) throw ConfigError("recall: K must be at least 1");
    int64_t hits = 0;
    for (const auto& r : results) {
        auto it = relevance.find(r.query_id);
        if (it == relevance.end()) throw DataError("recall: no relevance entry for " + r.query_id);
        const int64_t limit = std::min<int64_t>(top_k, static_cast<int64_t>(r.hits.size()));
        for (int64_t i = 0; i < limit; ++i)
            if (r.hits[static_cast<size_t>(i)].doc_id == it->second) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

namespace {

std::string lowered(const std::string& s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

double pseudo_recall_at_k(const std::vector<RetrievalResult>& results,
                          const std::map<std::string, std::string>& answers,
                          const std::map<std::string, std::string>& raw_texts, int64_t top_k) {
    if (results.empty()) throw DataError("pseudo-recall: no results");
    if (top_k < 1) throw ConfigError("pseudo-recall: K must be at least 1");
    int64_t hits = 0;
    for (const auto& r : results) {
        auto it = answers.find(r.query_id);
        if (it == answers.end()) throw DataError("pseudo-recall: no answer for " + r.query_id);
        const std::string answer = lowered(it->second);
        const int64_t limit = std::min<int64_t>(top_k, static_cast<int64_t>(r.hits.size()));
        for (int64_t i = 0; i < limit; ++i) {
            auto doc = raw_texts.find(r.hits[static_cast<size_t>(i)].doc_id);
            if (doc == raw_texts.end()) continue;
            if (lowered(doc->second).find(answer) != std::string::npos) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

}  // namespace ret2
