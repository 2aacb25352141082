// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Contrastive training loop: shuffled query-document pair batches, symmetric
// in-batch InfoNCE, Adam with linear warmup into cosine decay. Deterministic
// given (seed, config, corpus); the resulting checkpoint is quantized to f32
// before it is returned so in-memory and reloaded parameters agree bit for
// bit.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ret2/fusion_cell.hpp"
#include "ret2/retrieval_index.hpp"

namespace ret2 {

struct TrainConfig {
    double lr = 5e-5;
    int64_t warmup_steps = 0;
    int64_t batch_size = 32;
    int64_t max_steps = 2000;
    uint64_t seed = 0;
    CellMode mode = CellMode::ReT2;
    ScoringMode scoring = ScoringMode::Dot;  // Dot scores fused embeddings
    bool use_temperature = true;
    int64_t eval_every = 0;  // 0 disables periodic retrieval evaluation
    int64_t d = 64;
    int64_t n_heads = 4;

    void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// First and second moment buffers aligned with ParamStore entry order.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    int64_t t = 0;
};

AdamState init_adam(const ParamStore& params);

// Standard bias-corrected update; `grads` must align with params.entries().
void adam_step(ParamStore& params, const std::vector<std::vector<double>>& grads, AdamState& state,
               double lr_t);

// Linear warmup to config.lr over warmup_steps, cosine decay to 0 at
// max_steps. Throws ConfigError outside [0, max_steps].
double lr_at(int64_t step, const TrainConfig& config);

// Optional held-out retrieval evaluation run every eval_every steps.
struct EvalSet {
    const FeatureFile* queries = nullptr;
    const std::map<std::string, std::string>* relevance = nullptr;
    int64_t top_k = 1;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<nlohmann::json> metrics;  // one object per step, JSONL-ready
    double final_loss = 0.0;
    double final_batch_accuracy = 0.0;
};

// Trains on (query, relevant document) pairs drawn from the two feature
// files. Every query must map through `relevance` to an existing document.
// Metrics stream to `metrics_out` as line-delimited JSON when given.
TrainResult train(const FeatureFile& queries, const FeatureFile& documents,
                  const std::map<std::string, std::string>& relevance, const TrainConfig& config,
                  std::ostream* metrics_out = nullptr, const EvalSet* eval_set = nullptr);

// Encode every record with the given parameters; rows follow record order.
EmbeddingFile encode_corpus(const FeatureFile& features, const ParamStore& params,
                            const CellConfig& config);

}  // namespace ret2
