// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Precomputed backbone activations: in-memory model, the RET2FEAT on-disk
// format, and a synthetic corpus generator for desk-scale experiments.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ret2/common.hpp"

namespace ret2 {

enum class Modality { Text, Visual, Absent };

// Activations of one modality: the selected backbone layers (shallow to
// deep), each token_count x backbone_dim row-major, plus the pooler token.
struct LayerFeatures {
    Modality modality = Modality::Absent;
    std::vector<std::vector<double>> layers;
    std::vector<double> pooler;
    int64_t token_count = 0;
    int64_t backbone_dim = 0;

    bool present() const { return modality != Modality::Absent; }
};

struct CorpusRecord {
    std::string id;
    LayerFeatures text;
    LayerFeatures visual;
    std::optional<std::string> label;     // ground-truth answer text
    std::optional<std::string> raw_text;  // passage text, for pseudo-recall
};

struct FeatureFile {
    int64_t s = 3;    // selected layers per modality
    int64_t d_b = 0;  // backbone token width
    int64_t d_g = 0;  // pooler width
    std::vector<CorpusRecord> records;
};

// Throws DataError when invariants are broken (side shapes inconsistent with
// the file dims, Absent sides carrying data, records with no modality).
void validate(const FeatureFile& file);

// Values are stored as little-endian f32; doubles produced by this codebase
// are already f32-quantized, so write/read round trips are bit-exact.
void write_features(const FeatureFile& file, const std::string& path);
FeatureFile read_features(const std::string& path);

struct SynthConfig {
    int64_t num_entities = 64;
    int64_t queries_per_entity = 8;
    int64_t n_text = 4;   // text tokens per record
    int64_t n_vis = 4;    // visual tokens per record
    int64_t d_b = 16;
    int64_t s = 3;
    int64_t d_g = 32;
    double noise = 0.1;
    // Poolers are injected additively into final embeddings, so their scale
    // relative to the learned projection decides how much irreducible noise
    // the retrieval scores inherit. Kept well below 1 by default.
    double pooler_scale = 0.1;
    double missing_text_rate = 0.0;    // chance a record's text side is Absent
    double missing_visual_rate = 0.0;  // chance a record's visual side is Absent
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json synth_config_to_json(const SynthConfig& config);

struct SynthCorpus {
    FeatureFile queries;
    FeatureFile documents;
    std::map<std::string, std::string> relevance;  // query id -> positive doc id
};

// Generator internals, exposed so tests can reconstruct records from first
// principles. Maps are row-major d_b x d_b (layers) and d_b x d_g (pooler);
// the outer index is the modality (0 text, 1 visual).
struct SynthDebug {
    std::vector<std::vector<double>> latents;
    std::vector<std::vector<std::vector<double>>> query_maps, doc_maps;
    std::vector<std::vector<double>> query_pool, doc_pool;
};

// Each entity draws one latent; its queries and its single document are noisy
// linear images of that latent through side-specific mixing maps. Relevance
// links every query of entity e to document "d<e>". Deterministic given seed.
SynthCorpus synth_corpus(const SynthConfig& config, uint64_t seed, SynthDebug* debug = nullptr);

}  // namespace ret2
