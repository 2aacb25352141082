// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: synth | train | encode | index | search | eval | diag.
// Every command resolves its configuration from an optional JSON file plus
// flag overrides (flags win), writes a run manifest next to its primary
// output before producing artifacts, and maps failures to stable exit codes:
// 0 ok, 2 config error, 3 data error, 4 numeric error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ret2/diagnostics.hpp"
#include "ret2/features.hpp"
#include "ret2/fusion_cell.hpp"
#include "ret2/retrieval_index.hpp"
#include "ret2/training.hpp"

namespace {

using nlohmann::json;
using namespace ret2;

std::string slurp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json_file(const std::string& path, bool config) {
    std::string text = slurp_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        if (config) throw ConfigError(path + ": " + e.what());
        throw DataError(path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << text;
    if (!out) throw DataError("short write to " + path);
}

// The manifest precedes every artifact so a run can be reproduced (same
// command, same resolved config, same input hashes) or audited after a
// partial failure.
void write_manifest(const std::string& primary_out, const std::string& command,
                    const json& resolved_config, std::optional<uint64_t> seed,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json manifest;
    manifest["command"] = command;
    manifest["config"] = resolved_config;
    if (seed) manifest["seed"] = *seed;
    json in_list = json::array();
    for (const auto& path : inputs)
        in_list.push_back({{"path", path}, {"sha1", git_blob_sha1(slurp_file(path))}});
    manifest["inputs"] = in_list;
    manifest["outputs"] = outputs;
    write_text_file(primary_out + ".manifest.json", manifest.dump(2) + "\n");
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string queries_out;
    std::string docs_out;
    std::string relevance_out;
    SynthConfig overrides;
    CLI::App* cmd = nullptr;
};

void add_synth(CLI::App& app, SynthArgs& a) {
    a.cmd = app.add_subcommand("synth", "Generate a synthetic multimodal feature corpus");
    a.cmd->add_option("--config", a.config_path, "Synth config JSON (flags override fields)");
    a.cmd->add_option("--seed", a.seed, "Generator seed (also in config as \"seed\")");
    a.cmd->add_option("--queries-out", a.queries_out, "Query feature file")->required();
    a.cmd->add_option("--docs-out", a.docs_out, "Document feature file")->required();
    a.cmd->add_option("--relevance-out", a.relevance_out,
                      "Relevance JSON (relevance, answers, raw_texts)")
        ->required();
    a.cmd->add_option("--num-entities", a.overrides.num_entities);
    a.cmd->add_option("--queries-per-entity", a.overrides.queries_per_entity);
    a.cmd->add_option("--n-text", a.overrides.n_text);
    a.cmd->add_option("--n-vis", a.overrides.n_vis);
    a.cmd->add_option("--d-b", a.overrides.d_b);
    a.cmd->add_option("--s", a.overrides.s);
    a.cmd->add_option("--d-g", a.overrides.d_g);
    a.cmd->add_option("--noise", a.overrides.noise);
    a.cmd->add_option("--pooler-scale", a.overrides.pooler_scale);
    a.cmd->add_option("--missing-text-rate", a.overrides.missing_text_rate);
    a.cmd->add_option("--missing-visual-rate", a.overrides.missing_visual_rate);
}

int run_synth(const SynthArgs& a) {
    json base = json::object();
    std::vector<std::string> inputs;
    if (!a.config_path.empty()) {
        base = read_json_file(a.config_path, true);
        inputs.push_back(a.config_path);
    }
    uint64_t seed = 0;
    if (base.contains("seed")) {
        try {
            seed = base["seed"].get<uint64_t>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("synth config seed: ") + e.what());
        }
        base.erase("seed");
    }
    if (a.cmd->count("--seed") > 0) seed = a.seed;

    // Flags win over config fields.
    auto put = [&](const char* flag, const char* key, auto value) {
        if (a.cmd->count(flag) > 0) base[key] = value;
    };
    put("--num-entities", "num_entities", a.overrides.num_entities);
    put("--queries-per-entity", "queries_per_entity", a.overrides.queries_per_entity);
    put("--n-text", "n_text", a.overrides.n_text);
    put("--n-vis", "n_vis", a.overrides.n_vis);
    put("--d-b", "d_b", a.overrides.d_b);
    put("--s", "s", a.overrides.s);
    put("--d-g", "d_g", a.overrides.d_g);
    put("--noise", "noise", a.overrides.noise);
    put("--pooler-scale", "pooler_scale", a.overrides.pooler_scale);
    put("--missing-text-rate", "missing_text_rate", a.overrides.missing_text_rate);
    put("--missing-visual-rate", "missing_visual_rate", a.overrides.missing_visual_rate);
    SynthConfig config = synth_config_from_json(base);

    json resolved = synth_config_to_json(config);
    resolved["seed"] = seed;
    write_manifest(a.queries_out, "synth", resolved, seed, inputs,
                   {a.queries_out, a.docs_out, a.relevance_out});

    SynthCorpus corpus = synth_corpus(config, seed);
    write_features(corpus.queries, a.queries_out);
    write_features(corpus.documents, a.docs_out);

    json rel;
    rel["relevance"] = corpus.relevance;
    json answers = json::object();
    for (const auto& q : corpus.queries.records)
        if (q.label) answers[q.id] = *q.label;
    json raw_texts = json::object();
    for (const auto& d : corpus.documents.records)
        if (d.raw_text) raw_texts[d.id] = *d.raw_text;
    rel["answers"] = answers;
    rel["raw_texts"] = raw_texts;
    write_text_file(a.relevance_out, rel.dump(2) + "\n");

    std::cout << json({{"queries", corpus.queries.records.size()},
                       {"documents", corpus.documents.records.size()},
                       {"seed", seed}})
                     .dump()
              << "\n";
    return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string config_path;
    std::string queries;
    std::string docs;
    std::string relevance;
    std::string checkpoint_out;
    std::string metrics_out;
    std::string eval_queries;
    TrainConfig overrides;
    std::string mode_str;
    std::string scoring_str;
    bool no_temperature = false;
    CLI::App* cmd = nullptr;
};

void add_train(CLI::App& app, TrainArgs& a) {
    a.cmd = app.add_subcommand("train", "Train the fusion encoder with in-batch contrastive loss");
    a.cmd->add_option("--config", a.config_path, "Train config JSON (flags override fields)");
    a.cmd->add_option("--queries", a.queries, "Query feature file")->required();
    a.cmd->add_option("--docs", a.docs, "Document feature file")->required();
    a.cmd->add_option("--relevance", a.relevance, "Relevance JSON")->required();
    a.cmd->add_option("--checkpoint-out", a.checkpoint_out, "Checkpoint path")->required();
    a.cmd->add_option("--metrics-out", a.metrics_out, "Metrics JSONL path");
    a.cmd->add_option("--eval-queries", a.eval_queries,
                      "Held-out query features for periodic recall (needs --eval-every)");
    a.cmd->add_option("--lr", a.overrides.lr);
    a.cmd->add_option("--warmup-steps", a.overrides.warmup_steps);
    a.cmd->add_option("--batch-size", a.overrides.batch_size);
    a.cmd->add_option("--max-steps", a.overrides.max_steps);
    a.cmd->add_option("--seed", a.overrides.seed);
    a.cmd->add_option("--mode", a.mode_str, "ret2 | baseline");
    a.cmd->add_option("--scoring", a.scoring_str, "dot | maxsim");
    a.cmd->add_flag("--no-temperature", a.no_temperature,
                    "Use raw similarities instead of learnable-temperature logits");
    a.cmd->add_option("--eval-every", a.overrides.eval_every);
    a.cmd->add_option("--d", a.overrides.d, "Hidden width");
    a.cmd->add_option("--n-heads", a.overrides.n_heads);
}

int run_train(const TrainArgs& a) {
    json base = json::object();
    std::vector<std::string> inputs{a.queries, a.docs, a.relevance};
    if (!a.config_path.empty()) {
        base = read_json_file(a.config_path, true);
        inputs.insert(inputs.begin(), a.config_path);
    }
    auto put = [&](const char* flag, const char* key, auto value) {
        if (a.cmd->count(flag) > 0) base[key] = value;
    };
    put("--lr", "lr", a.overrides.lr);
    put("--warmup-steps", "warmup_steps", a.overrides.warmup_steps);
    put("--batch-size", "batch_size", a.overrides.batch_size);
    put("--max-steps", "max_steps", a.overrides.max_steps);
    put("--seed", "seed", a.overrides.seed);
    put("--mode", "mode", a.mode_str);
    put("--scoring", "scoring", a.scoring_str);
    put("--eval-every", "eval_every", a.overrides.eval_every);
    put("--d", "d", a.overrides.d);
    put("--n-heads", "n_heads", a.overrides.n_heads);
    if (a.cmd->count("--no-temperature") > 0) base["use_temperature"] = false;
    TrainConfig config = train_config_from_json(base);
    if (!a.eval_queries.empty()) inputs.push_back(a.eval_queries);

    std::vector<std::string> outputs{a.checkpoint_out};
    if (!a.metrics_out.empty()) outputs.push_back(a.metrics_out);
    write_manifest(a.checkpoint_out, "train", train_config_to_json(config), config.seed, inputs,
                   outputs);

    FeatureFile queries = read_features(a.queries);
    FeatureFile documents = read_features(a.docs);
    json rel_json = read_json_file(a.relevance, false);
    std::map<std::string, std::string> relevance;
    try {
        relevance = rel_json.at("relevance").get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw DataError(a.relevance + ": " + e.what());
    }

    std::optional<FeatureFile> eval_queries;
    EvalSet eval_set;
    const EvalSet* eval_ptr = nullptr;
    if (!a.eval_queries.empty()) {
        eval_queries = read_features(a.eval_queries);
        eval_set.queries = &*eval_queries;
        eval_set.relevance = &relevance;
        eval_set.top_k = 1;
        eval_ptr = &eval_set;
    }

    std::ofstream metrics;
    std::ostream* metrics_ptr = nullptr;
    if (!a.metrics_out.empty()) {
        metrics.open(a.metrics_out, std::ios::trunc);
        if (!metrics) throw DataError("cannot write " + a.metrics_out);
        metrics_ptr = &metrics;
    }

    TrainResult result = train(queries, documents, relevance, config, metrics_ptr, eval_ptr);
    save_checkpoint(result.checkpoint, a.checkpoint_out);

    std::cout << json({{"steps", result.metrics.size()},
                       {"final_loss", result.final_loss},
                       {"final_batch_accuracy", result.final_batch_accuracy},
                       {"checkpoint", a.checkpoint_out}})
                     .dump()
              << "\n";
    return 0;
}

// ---- encode ---------------------------------------------------------------

struct EncodeArgs {
    std::string checkpoint;
    std::string features;
    std::string out;
    CLI::App* cmd = nullptr;
};

void add_encode(CLI::App& app, EncodeArgs& a) {
    a.cmd = app.add_subcommand("encode", "Encode a feature file into embeddings");
    a.cmd->add_option("--checkpoint", a.checkpoint, "Trained checkpoint")->required();
    a.cmd->add_option("--features", a.features, "Input feature file")->required();
    a.cmd->add_option("--out", a.out, "Embedding file")->required();
}

int run_encode(const EncodeArgs& a) {
    Checkpoint ckpt = load_checkpoint(a.checkpoint);
    json resolved = {{"checkpoint", a.checkpoint}, {"cell", cell_config_to_json(ckpt.config)}};
    write_manifest(a.out, "encode", resolved, ckpt.seed, {a.checkpoint, a.features}, {a.out});

    FeatureFile features = read_features(a.features);
    EmbeddingFile emb = encode_corpus(features, ckpt.params, ckpt.config);
    save_embeddings(emb, a.out);
    std::cout << json({{"records", emb.ids.size()}, {"k", emb.k}, {"d_bar", emb.d_bar}}).dump()
              << "\n";
    return 0;
}

// ---- index ----------------------------------------------------------------

struct IndexArgs {
    std::string embeddings;
    std::string out;
    std::string mode_str;
    CLI::App* cmd = nullptr;
};

void add_index(CLI::App& app, IndexArgs& a) {
    a.cmd = app.add_subcommand("index", "Build a flat searchable shard from embeddings");
    a.cmd->add_option("--embeddings", a.embeddings, "Document embedding file")->required();
    a.cmd->add_option("--out", a.out, "Shard path")->required();
    a.cmd->add_option("--mode", a.mode_str, "dot | maxsim (default: dot when k==1, else maxsim)");
}

int run_index(const IndexArgs& a) {
    EmbeddingFile emb = load_embeddings(a.embeddings);
    ScoringMode mode = emb.k == 1 ? ScoringMode::Dot : ScoringMode::MaxSim;
    if (a.cmd->count("--mode") > 0) mode = scoring_mode_from_string(a.mode_str);
    json resolved = {{"mode", to_string(mode)}, {"k", emb.k}, {"d_bar", emb.d_bar}};
    write_manifest(a.out, "index", resolved, std::nullopt, {a.embeddings}, {a.out});

    IndexShard shard = build_index(emb, mode);
    save_shard(shard, a.out);
    std::cout << json({{"documents", shard.num_docs()}, {"mode", to_string(mode)}}).dump() << "\n";
    return 0;
}

// ---- search ---------------------------------------------------------------

struct SearchArgs {
    std::string shard;
    std::string queries;
    std::string out;
    int64_t top_k = 5;
    CLI::App* cmd = nullptr;
};

void add_search(CLI::App& app, SearchArgs& a) {
    a.cmd = app.add_subcommand("search", "Exhaustive top-K search over a shard");
    a.cmd->add_option("--shard", a.shard, "Index shard")->required();
    a.cmd->add_option("--queries", a.queries, "Query embedding file")->required();
    a.cmd->add_option("--k", a.top_k, "Results per query (clamped to corpus size)");
    a.cmd->add_option("--out", a.out, "Results JSONL")->required();
}

int run_search(const SearchArgs& a) {
    json resolved = {{"k", a.top_k}};
    write_manifest(a.out, "search", resolved, std::nullopt, {a.shard, a.queries}, {a.out});

    IndexShard shard = load_shard(a.shard);
    EmbeddingFile queries = load_embeddings(a.queries);
    if (queries.d_bar != shard.d_bar)
        throw ShapeError("search: query width " + std::to_string(queries.d_bar) +
                         " does not match shard width " + std::to_string(shard.d_bar));

    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw DataError("cannot write " + a.out);
    bool any_clamped = false;
    for (int64_t i = 0; i < queries.count(); ++i) {
        std::vector<double> row(queries.row(i), queries.row(i) + queries.row_width());
        RetrievalResult res =
            search(shard, queries.ids[static_cast<size_t>(i)], row, queries.k, a.top_k);
        any_clamped = any_clamped || res.k_clamped;
        json hits = json::array();
        for (const auto& h : res.hits) hits.push_back({{"doc_id", h.doc_id}, {"score", h.score}});
        out << json({{"query_id", res.query_id}, {"hits", hits}, {"k_clamped", res.k_clamped}})
                   .dump()
            << "\n";
    }
    if (!out) throw DataError("short write to " + a.out);
    json summary = {{"queries", queries.count()}, {"k", a.top_k}};
    if (any_clamped) summary["warning"] = "K exceeded corpus size; results were clamped";
    std::cout << summary.dump() << "\n";
    return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string results;
    std::string relevance;
    std::vector<int64_t> ks{1};
    std::string out;
    CLI::App* cmd = nullptr;
};

void add_eval(CLI::App& app, EvalArgs& a) {
    a.cmd = app.add_subcommand("eval", "Compute recall@K (and pseudo-recall when answers exist)");
    a.cmd->add_option("--results", a.results, "Search results JSONL")->required();
    a.cmd->add_option("--relevance", a.relevance, "Relevance JSON")->required();
    a.cmd->add_option("--k", a.ks, "Cutoffs, repeatable (default 1)");
    a.cmd->add_option("--out", a.out, "Also write the metrics JSON here");
}

int run_eval(const EvalArgs& a) {
    if (!a.out.empty())
        write_manifest(a.out, "eval", {{"k", a.ks}}, std::nullopt, {a.results, a.relevance},
                       {a.out});

    std::vector<RetrievalResult> results;
    std::istringstream lines(slurp_file(a.results));
    std::string line;
    int64_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            RetrievalResult r;
            r.query_id = j.at("query_id").get<std::string>();
            for (const auto& h : j.at("hits"))
                r.hits.push_back(
                    {h.at("doc_id").get<std::string>(), h.at("score").get<double>()});
            results.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw DataError(a.results + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }

    json rel_json = read_json_file(a.relevance, false);
    std::map<std::string, std::string> relevance, answers, raw_texts;
    try {
        relevance = rel_json.at("relevance").get<std::map<std::string, std::string>>();
        if (rel_json.contains("answers"))
            answers = rel_json["answers"].get<std::map<std::string, std::string>>();
        if (rel_json.contains("raw_texts"))
            raw_texts = rel_json["raw_texts"].get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw DataError(a.relevance + ": " + e.what());
    }

    json metrics = json::object();
    for (int64_t k : a.ks) {
        metrics["recall@" + std::to_string(k)] = recall_at_k(results, relevance, k);
        if (!answers.empty() && !raw_texts.empty())
            metrics["pseudo_recall@" + std::to_string(k)] =
                pseudo_recall_at_k(results, answers, raw_texts, k);
    }
    metrics["queries"] = results.size();
    std::string text = metrics.dump(2) + "\n";
    std::cout << text;
    if (!a.out.empty()) write_text_file(a.out, text);
    return 0;
}

// ---- diag -----------------------------------------------------------------

struct DiagArgs {
    std::string checkpoint;
    std::string features;
    std::string gates_out;
    std::string collapse_out;
    CLI::App* cmd = nullptr;
};

void add_diag(CLI::App& app, DiagArgs& a) {
    a.cmd = app.add_subcommand("diag",
                               "Gate activation profile and rank-collapse scores for a sample");
    a.cmd->add_option("--checkpoint", a.checkpoint, "Trained checkpoint")->required();
    a.cmd->add_option("--features", a.features, "Sample feature file")->required();
    a.cmd->add_option("--gates-out", a.gates_out, "Gate profile CSV")->required();
    a.cmd->add_option("--collapse-out", a.collapse_out,
                      "Per-record rank-collapse CSV (header-only when k == 1)")
        ->required();
}

int run_diag(const DiagArgs& a) {
    Checkpoint ckpt = load_checkpoint(a.checkpoint);
    json resolved = {{"checkpoint", a.checkpoint}, {"cell", cell_config_to_json(ckpt.config)}};
    write_manifest(a.gates_out, "diag", resolved, ckpt.seed, {a.checkpoint, a.features},
                   {a.gates_out, a.collapse_out});

    FeatureFile features = read_features(a.features);
    GateProfile profile = profile_gates(features.records, ckpt.params, ckpt.config);
    write_text_file(a.gates_out, gate_profile_csv(profile));

    std::vector<std::pair<std::string, double>> scores;
    if (ckpt.config.k() >= 2) {
        EmbeddingFile emb = encode_corpus(features, ckpt.params, ckpt.config);
        for (int64_t i = 0; i < emb.count(); ++i) {
            std::vector<double> row(emb.row(i), emb.row(i) + emb.row_width());
            scores.emplace_back(emb.ids[static_cast<size_t>(i)],
                                rank_collapse_score(row, emb.k, emb.d_bar));
        }
    }
    write_text_file(a.collapse_out, collapse_csv(scores));

    double mean = 0.0;
    for (const auto& [id, s] : scores) mean += s;
    if (!scores.empty()) mean /= static_cast<double>(scores.size());
    json summary = {{"records", features.records.size()}, {"gates_csv", a.gates_out}};
    if (!scores.empty()) summary["mean_collapse_score"] = mean;
    std::cout << summary.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "ret2: recurrence-enhanced multimodal retrieval at desk scale.\n"
        "Set RET2_THREADS to cap worker threads."};
    app.require_subcommand(1);

    SynthArgs synth_args;
    TrainArgs train_args;
    EncodeArgs encode_args;
    IndexArgs index_args;
    SearchArgs search_args;
    EvalArgs eval_args;
    DiagArgs diag_args;
    add_synth(app, synth_args);
    add_train(app, train_args);
    add_encode(app, encode_args);
    add_index(app, index_args);
    add_search(app, search_args);
    add_eval(app, eval_args);
    add_diag(app, diag_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help and friends exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message
        return 2;     // bad invocations are config errors
    }

    auto fail = [](const char* kind, const std::string& message, int code) {
        std::cerr << nlohmann::json({{"error", {{"type", kind}, {"message", message}}}}).dump()
                  << "\n";
        return code;
    };
    try {
        if (synth_args.cmd->parsed()) return run_synth(synth_args);
        if (train_args.cmd->parsed()) return run_train(train_args);
        if (encode_args.cmd->parsed()) return run_encode(encode_args);
        if (index_args.cmd->parsed()) return run_index(index_args);
        if (search_args.cmd->parsed()) return run_search(search_args);
        if (eval_args.cmd->parsed()) return run_eval(eval_args);
        if (diag_args.cmd->parsed()) return run_diag(diag_args);
    } catch (const ConfigError& e) {
        return fail("config", e.what(), e.code);
    } catch (const NumericError& e) {
        return fail("numeric", e.what(), e.code);
    } catch (const Error& e) {  // DataError, ShapeError
        return fail("data", e.what(), e.code);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
    return 0;
}
