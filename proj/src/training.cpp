// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0

#include "ret2/training.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <set>

#include "ret2/envelope.hpp"
#include "ret2/scoring.hpp"

namespace ret2 {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (batch_size < 2) throw ConfigError("train: batch_size must be at least 2");
    if (max_steps < 1) throw ConfigError("train: max_steps must be at least 1");
    if (warmup_steps < 0 || warmup_steps >= max_steps)
        throw ConfigError("train: warmup_steps must lie in [0, max_steps)");
    if (eval_every < 0) throw ConfigError("train: eval_every must be non-negative");
    if (d < 1 || n_heads < 1 || d % n_heads != 0)
        throw ConfigError("train: d must be a positive multiple of n_heads");
}

nlohmann::json train_config_to_json(const TrainConfig& config) {
    return {{"lr", config.lr},
            {"warmup_steps", config.warmup_steps},
            {"batch_size", config.batch_size},
            {"max_steps", config.max_steps},
            {"seed", config.seed},
            {"mode", to_string(config.mode)},
            {"scoring", to_string(config.scoring)},
            {"use_temperature", config.use_temperature},
            {"eval_every", config.eval_every},
            {"d", config.d},
            {"n_heads", config.n_heads}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    require_known_keys(j,
                       {"lr", "warmup_steps", "batch_size", "max_steps", "seed", "mode", "scoring",
                        "use_temperature", "eval_every", "d", "n_heads"},
                       "train config");
    TrainConfig config;
    try {
        if (j.contains("lr")) config.lr = j.at("lr").get<double>();
        if (j.contains("warmup_steps")) config.warmup_steps = j.at("warmup_steps").get<int64_t>();
        if (j.contains("batch_size")) config.batch_size = j.at("batch_size").get<int64_t>();
        if (j.contains("max_steps")) config.max_steps = j.at("max_steps").get<int64_t>();
        if (j.contains("seed")) config.seed = j.at("seed").get<uint64_t>();
        if (j.contains("mode")) config.mode = cell_mode_from_string(j.at("mode").get<std::string>());
        if (j.contains("scoring"))
            config.scoring = scoring_mode_from_string(j.at("scoring").get<std::string>());
        if (j.contains("use_temperature"))
            config.use_temperature = j.at("use_temperature").get<bool>();
        if (j.contains("eval_every")) config.eval_every = j.at("eval_every").get<int64_t>();
        if (j.contains("d")) config.d = j.at("d").get<int64_t>();
        if (j.contains("n_heads")) config.n_heads = j.at("n_heads").get<int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    config.validate();
    return config;
}

AdamState init_adam(const ParamStore& params) {
    AdamState state;
    for (const auto& e : params.entries()) {
        state.m.emplace_back(e.value.size(), 0.0);
        state.v.emplace_back(e.value.size(), 0.0);
    }
    return state;
}

void adam_step(ParamStore& params, const std::vector<std::vector<double>>& grads, AdamState& state,
               double lr_t) {
    auto& entries = params.entries();
    require(grads.size() == entries.size() && state.m.size() == entries.size() &&
                state.v.size() == entries.size(),
            "adam: gradient/state buffers misaligned with parameters");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
    for (size_t p = 0; p < entries.size(); ++p) {
        auto& theta = entries[p].value;
        const auto& g = grads[p];
        require(g.size() == theta.size(), "adam: gradient size mismatch for " + entries[p].name);
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (size_t i = 0; i < theta.size(); ++i) {
            m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
            v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= lr_t * m_hat / (std::sqrt(v_hat) + kAdamEps);
        }
    }
}

double lr_at(int64_t step, const TrainConfig& config) {
    config.validate();
    if (step < 0 || step > config.max_steps)
        throw ConfigError("lr_at: step outside [0, max_steps]");
    if (step < config.warmup_steps)
        return config.lr * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
    const double progress = static_cast<double>(step - config.warmup_steps) /
                            static_cast<double>(config.max_steps - config.warmup_steps);
    return config.lr * 0.5 * (1.0 + std::cos(progress * 3.14159265358979323846));
}

namespace {

// Shuffled pair order dealt into full batches with no repeated positive
// document inside a batch (a duplicate positive would sit on the negative
// side of its twin's softmax). Collisions spill into the next batch; the
// tail that cannot fill a batch is dropped.
std::vector<std::vector<size_t>> deal_batches(const std::vector<size_t>& order,
                                              const std::vector<std::pair<size_t, size_t>>& pairs,
                                              int64_t batch_size) {
    std::vector<std::vector<size_t>> batches;
    std::deque<size_t> pending(order.begin(), order.end());
    while (static_cast<int64_t>(pending.size()) >= batch_size) {
        std::vector<size_t> batch;
        std::vector<size_t> skipped;
        std::set<size_t> docs;
        while (static_cast<int64_t>(batch.size()) < batch_size && !pending.empty()) {
            size_t idx = pending.front();
            pending.pop_front();
            if (docs.insert(pairs[idx].second).second)
                batch.push_back(idx);
            else
                skipped.push_back(idx);
        }
        for (auto it = skipped.rbegin(); it != skipped.rend(); ++it) pending.push_front(*it);
        if (static_cast<int64_t>(batch.size()) < batch_size) break;
        batches.push_back(std::move(batch));
    }
    return batches;
}

double batch_accuracy(const Tensor& sim) {
    const int64_t b = sim.rows();
    int64_t correct = 0;
    for (int64_t i = 0; i < b; ++i) {
        int64_t arg = 0;
        for (int64_t j = 1; j < b; ++j)
            if (sim.at(i, j) > sim.at(i, arg)) arg = j;
        if (arg == i) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(b);
}

double eval_recall(const ParamStore& params, const CellConfig& cell, ScoringMode scoring,
                   const FeatureFile& documents, const EvalSet& eval) {
    EmbeddingFile docs = encode_corpus(documents, params, cell);
    IndexShard shard = build_index(docs, scoring);
    EmbeddingFile qs = encode_corpus(*eval.queries, params, cell);
    std::vector<RetrievalResult> results;
    for (int64_t i = 0; i < qs.count(); ++i) {
        std::vector<double> row(qs.row(i), qs.row(i) + qs.row_width());
        results.push_back(
            search(shard, qs.ids[static_cast<size_t>(i)], row, qs.k, eval.top_k));
    }
    return recall_at_k(results, *eval.relevance, eval.top_k);
}

}  // namespace

EmbeddingFile encode_corpus(const FeatureFile& features, const ParamStore& params,
                            const CellConfig& config) {
    BoundParams bound = bind_params(params, nullptr);
    EmbeddingFile out;
    out.k = config.k();
    out.d_bar = config.d_bar;
    out.matrix.reserve(static_cast<size_t>(features.records.size()) *
                       static_cast<size_t>(out.row_width()));
    for (const auto& rec : features.records) {
        out.ids.push_back(rec.id);
        Tensor emb = encode(rec, bound, config).embedding;
        // Embeddings are f32 on disk; match that here so in-memory scores
        // equal scores computed after a save/load cycle.
        for (double v : emb.data()) out.matrix.push_back(through_f32(v));
    }
    out.validate();
    return out;
}

TrainResult train(const FeatureFile& queries, const FeatureFile& documents,
                  const std::map<std::string, std::string>& relevance, const TrainConfig& config,
                  std::ostream* metrics_out, const EvalSet* eval_set) {
    config.validate();
    if (queries.d_b != documents.d_b || queries.d_g != documents.d_g ||
        queries.s != documents.s)
        throw ShapeError("train: query and document feature geometries differ");

    std::map<std::string, size_t> doc_index;
    for (size_t i = 0; i < documents.records.size(); ++i)
        if (!doc_index.emplace(documents.records[i].id, i).second)
            throw DataError("train: duplicate document id " + documents.records[i].id);

    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t qi = 0; qi < queries.records.size(); ++qi) {
        const auto& id = queries.records[qi].id;
        auto rel = relevance.find(id);
        if (rel == relevance.end()) throw DataError("train: no relevance entry for query " + id);
        auto doc = doc_index.find(rel->second);
        if (doc == doc_index.end())
            throw DataError("train: relevant document " + rel->second + " not in corpus");
        pairs.emplace_back(qi, doc->second);
    }
    if (static_cast<int64_t>(pairs.size()) < config.batch_size)
        throw DataError("train: corpus smaller than one batch");

    CellConfig cell;
    cell.mode = config.mode;
    cell.d = config.d;
    cell.d_b = queries.d_b;
    cell.d_bar = queries.d_g;
    cell.s = queries.s;
    cell.n_heads = config.n_heads;
    cell.validate();

    ParamStore params = init_params(cell, config.seed);
    AdamState adam = init_adam(params);
    Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

    TrainResult result;
    int64_t step = 0;
    while (step < config.max_steps) {
        std::vector<size_t> order = shuffle_rng.permutation(pairs.size());
        auto batches = deal_batches(order, pairs, config.batch_size);
        if (batches.empty()) throw DataError("train: corpus cannot fill one distinct-doc batch");
        for (const auto& batch : batches) {
            if (step >= config.max_steps) break;
            const double lr = lr_at(step, config);

            Tape tape;
            BoundParams bound = bind_params(params, &tape);
            std::vector<Tensor> qembs, dembs;
            qembs.reserve(batch.size());
            dembs.reserve(batch.size());
            for (size_t idx : batch) {
                qembs.push_back(
                    encode(queries.records[pairs[idx].first], bound, cell).embedding);
                dembs.push_back(
                    encode(documents.records[pairs[idx].second], bound, cell).embedding);
            }
            Tensor sim = config.scoring == ScoringMode::MaxSim
                             ? similarity_matrix_maxsim(qembs, dembs)
                             : similarity_matrix_fusion(qembs, dembs);
            Tensor loss = config.use_temperature ? infonce(sim, bound("temperature"))
                                                 : infonce(sim);
            const double loss_val = loss.value();
            if (!std::isfinite(loss_val))
                throw NumericError("train: non-finite loss at step " + std::to_string(step));
            tape.backward(loss);

            std::vector<std::vector<double>> grads;
            grads.reserve(params.entries().size());
            for (const auto& e : params.entries()) {
                const auto& g = bound(e.name).grad();
                if (!all_finite(g))
                    throw NumericError("train: non-finite gradient in " + e.name + " at step " +
                                       std::to_string(step));
                grads.push_back(g);
            }
            adam_step(params, grads, adam, lr);
            auto& temp = params.at("temperature").value[0];
            temp = std::clamp(temp, kTemperatureMin, kTemperatureMax);

            const double acc = batch_accuracy(sim);
            nlohmann::json line = {
                {"step", step}, {"lr", lr}, {"loss", loss_val}, {"batch_accuracy", acc}};
            if (config.use_temperature) line["temperature"] = temp;
            ++step;
            if (eval_set != nullptr && config.eval_every > 0 && step % config.eval_every == 0) {
                line["eval_recall"] =
                    eval_recall(params, cell, config.scoring, documents, *eval_set);
                line["eval_top_k"] = eval_set->top_k;
            }
            if (metrics_out != nullptr) *metrics_out << line.dump() << "\n";
            result.metrics.push_back(std::move(line));
            result.final_loss = loss_val;
            result.final_batch_accuracy = acc;
        }
    }

    quantize_params(params);
    result.checkpoint = Checkpoint{cell, config.seed, std::move(params)};
    return result;
}

}  // namespace ret2
