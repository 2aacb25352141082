// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate. Ten independent checks over the built library, one
// PASS/FAIL line each; the process exits nonzero if any check fails. All
// tolerances and workload sizes are pinned here so a run is comparable
// across machines.

#include <chrono>
#include <cinttypes>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"
#include "ret2/diagnostics.hpp"
#include "ret2/features.hpp"
#include "ret2/fusion_cell.hpp"
#include "ret2/retrieval_index.hpp"
#include "ret2/scoring.hpp"
#include "ret2/training.hpp"

namespace fs = std::filesystem;
using namespace ret2;

namespace {

// Pinned tolerances and workloads.
constexpr double kFdStep = 1e-5;          // central-difference step
constexpr double kGradAbsTol = 1e-8;      // gradient check: absolute
constexpr double kGradRelTol = 1e-4;      // gradient check: relative
constexpr double kEncodeTol = 1e-9;       // encoder vs reference, max abs
constexpr int kEncodeTrials = 100;
constexpr double kFusionRelTol = 1e-9;    // fusion score vs double sum
constexpr int kFusionTrials = 1000;
constexpr int kSearchShards = 200;        // search vs brute force
constexpr int64_t kSearchMaxDocs = 500;
constexpr int64_t kToyMaxSteps = 500;     // toy training run
constexpr int64_t kToyStepBudget = 2000;  // the run must fit this budget
constexpr double kToyRecallMin = 0.90;    // heldout recall@1
constexpr double kToyTimeLimitSec = 600.0;
constexpr double kCollapseDropMin = 0.1;  // token-diversity drop after training
constexpr double kUniformLossTol = 1e-9;  // uniform-similarity loss vs ln(B)
static_assert(kToyMaxSteps <= kToyStepBudget);

struct Result {
    bool pass = true;
    std::string detail;
};

Result fail(std::string detail) { return {false, std::move(detail)}; }
Result pass(std::string detail) { return {true, std::move(detail)}; }

std::string fmt(const char* format, ...) {
    va_list args;
    va_start(args, format);
    char buf[512];
    vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

struct TempDir {
    fs::path path;
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "ret2_accept_XXXXXX").string();
        path = mkdtemp(tmpl.data());
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CorpusRecord random_record(const std::string& id, int64_t n_text, int64_t n_vis,
                           const CellConfig& cfg, Rng& rng, bool text_absent, bool vis_absent) {
    CorpusRecord rec;
    rec.id = id;
    auto fill = [&](LayerFeatures& side, Modality m, int64_t n) {
        side.modality = m;
        side.token_count = n;
        side.backbone_dim = cfg.d_b;
        side.layers.assign(static_cast<size_t>(cfg.s), {});
        for (auto& layer : side.layers) {
            layer.resize(static_cast<size_t>(n * cfg.d_b));
            for (auto& v : layer) v = rng.gaussian();
        }
        side.pooler.resize(static_cast<size_t>(cfg.d_bar));
        for (auto& v : side.pooler) v = rng.gaussian();
    };
    if (!text_absent) fill(rec.text, Modality::Text, n_text);
    if (!vis_absent) fill(rec.visual, Modality::Visual, n_vis);
    return rec;
}

// ---- 1: analytic gradients vs central differences --------------------------
// Full production loss (encode -> fusion similarity -> contrastive loss with
// learned temperature) over a 2-pair batch, one record with an absent side,
// checked at every parameter scalar.

Result check_encoder_gradients() {
    SynthConfig sc;
    sc.num_entities = 2;
    sc.queries_per_entity = 1;
    sc.n_text = 3;
    sc.n_vis = 2;
    sc.d_b = 16;
    sc.s = 2;
    sc.d_g = 16;
    sc.noise = 0.3;
    SynthCorpus corpus = synth_corpus(sc, 4);
    corpus.queries.records[1].visual.modality = Modality::Absent;

    CellConfig cfg;
    cfg.mode = CellMode::ReT2;
    cfg.d = 32;
    cfg.d_b = 16;
    cfg.d_bar = 16;
    cfg.s = 2;
    cfg.n_heads = 4;
    ParamStore store = init_params(cfg, 9);

    auto loss_on = [&](const BoundParams& bound) {
        std::vector<Tensor> qs, ds;
        for (const auto& rec : corpus.queries.records) qs.push_back(encode(rec, bound, cfg).embedding);
        for (const auto& rec : corpus.documents.records) ds.push_back(encode(rec, bound, cfg).embedding);
        return infonce(similarity_matrix_fusion(qs, ds), bound("temperature"));
    };

    oracles::ParamFdReport rep =
        oracles::fd_check_params(store, loss_on, kFdStep, kGradAbsTol, kGradRelTol);
    if (rep.checked != store.total_scalars())
        return fail(fmt("checked %" PRId64 " of %" PRId64 " scalars", rep.checked,
                        store.total_scalars()));
    if (!rep.ok)
        return fail(fmt("gradient mismatch at %s: max_rel %.3e", rep.worst.c_str(), rep.max_rel));
    return pass(fmt("max_abs %.2e (max_rel %.2e at near-zero gradients) over %" PRId64 " scalars",
                rep.max_abs, rep.max_rel, rep.checked));
}

// ---- 2: encoder vs straight-line reference ---------------------------------

Result check_encoder_reference() {
    const int64_t dims[][2] = {{16, 2}, {32, 4}, {24, 4}, {16, 4}, {32, 2}};
    double worst = 0.0;
    for (int t = 0; t < kEncodeTrials; ++t) {
        CellConfig cfg;
        cfg.mode = (t % 2 == 0) ? CellMode::ReT2 : CellMode::Baseline;
        cfg.d = dims[t % 5][0];
        cfg.n_heads = dims[t % 5][1];
        cfg.d_b = (t % 3 == 0) ? 8 : 12;
        cfg.d_bar = (t % 4 == 0) ? 8 : 16;
        cfg.s = 2 + t % 2;
        Rng rng(6000 + static_cast<uint64_t>(t));
        bool text_absent = (t % 5 == 1);
        bool vis_absent = (t % 7 == 3) && !text_absent;
        CorpusRecord rec = random_record("r", 1 + t % 5, 1 + t % 4, cfg, rng, text_absent, vis_absent);

        ParamStore store = init_params(cfg, 1000 + static_cast<uint64_t>(t));
        BoundParams bound = bind_params(store, nullptr);
        std::vector<double> got = encode(rec, bound, cfg).embedding.data();
        std::vector<double> want = oracles::encode_oracle(rec, store, cfg);
        if (got.size() != want.size())
            return fail(fmt("trial %d: embedding size %zu vs reference %zu", t, got.size(),
                            want.size()));
        for (size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
        if (worst > kEncodeTol) return fail(fmt("trial %d: max abs diff %.3e", t, worst));
    }
    return pass(fmt("max abs diff %.2e over %d encoder instances", worst, kEncodeTrials));
}

// ---- 3: scoring identities --------------------------------------------------
// Fusion score equals the explicit double sum of pairwise dots; with one
// token per side both scorers equal the plain dot product exactly.

Result check_score_identities() {
    const int64_t k = 32, dim = 64;
    Rng rng(77);
    double worst_rel = 0.0;
    for (int t = 0; t < kFusionTrials; ++t) {
        std::vector<double> q(static_cast<size_t>(k * dim)), d(static_cast<size_t>(k * dim));
        for (auto& v : q) v = rng.gaussian();
        for (auto& v : d) v = rng.gaussian();
        double got = fusion_score(q, k, d, k, dim);
        double want = 0.0;
        for (int64_t i = 0; i < k; ++i)
            for (int64_t j = 0; j < k; ++j) {
                double s = 0.0;
                for (int64_t c = 0; c < dim; ++c)
                    s += q[static_cast<size_t>(i * dim + c)] * d[static_cast<size_t>(j * dim + c)];
                want += s;
            }
        double rel = std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1e-300});
        worst_rel = std::max(worst_rel, rel);
        if (rel > kFusionRelTol)
            return fail(fmt("trial %d: fusion %.17g vs double sum %.17g", t, got, want));
    }
    for (int t = 0; t < 200; ++t) {
        std::vector<double> q(static_cast<size_t>(dim)), d(static_cast<size_t>(dim));
        for (auto& v : q) v = rng.gaussian();
        for (auto& v : d) v = rng.gaussian();
        double dot = 0.0;
        for (int64_t c = 0; c < dim; ++c)
            dot += q[static_cast<size_t>(c)] * d[static_cast<size_t>(c)];
        if (maxsim_score(q, 1, d, 1, dim) != dot)
            return fail(fmt("single-token late interaction != dot at trial %d", t));
        if (fusion_score(q, 1, d, 1, dim) != dot)
            return fail(fmt("single-token fusion != dot at trial %d", t));
    }
    return pass(fmt("max rel err %.2e over %d fusion trials; single-token scores exact", worst_rel,
                    kFusionTrials));
}

// ---- 4: backbone layer selection -------------------------------------------

Result check_layer_selection() {
    const struct {
        int64_t depth;
        std::vector<int64_t> want;
    } table[] = {
        {12, {3, 7, 11}},
        {24, {3, 18, 23}},
        {32, {4, 25, 31}},
        {4, {0, 1, 2}},
    };
    for (const auto& row : table) {
        std::vector<int64_t> got = select_layers(row.depth);
        if (got != row.want) {
            std::string s;
            for (int64_t v : got) s += std::to_string(v) + ",";
            return fail(fmt("depth %" PRId64 " -> [%s]", row.depth, s.c_str()));
        }
    }
    for (int64_t depth = 4; depth <= 64; ++depth) {
        if (depth == 12 || depth == 24 || depth == 32) continue;  // pinned above
        std::vector<int64_t> got = select_layers(depth);
        if (got.size() != 3 || got[0] < 0 || !(got[0] < got[1] && got[1] < got[2]) ||
            got[2] != depth - 2)
            return fail(fmt("depth %" PRId64 ": spread rule must give three increasing indices "
                            "ending next to last",
                            depth));
    }
    try {
        select_layers(3);
        return fail("depth 3 accepted");
    } catch (const ConfigError&) {
    }
    return pass("published depths match; spread rule holds for 4..64; shallow depths rejected");
}

// ---- 5: search equals brute force -------------------------------------------

Result check_search_exact() {
    Rng rng(2024);
    for (int t = 0; t < kSearchShards; ++t) {
        ScoringMode mode = (t % 2 == 0) ? ScoringMode::Dot : ScoringMode::MaxSim;
        const int64_t n_docs = 1 + static_cast<int64_t>(rng.raw() % kSearchMaxDocs);
        const int64_t kd = mode == ScoringMode::Dot ? 1 : 1 + static_cast<int64_t>(rng.raw() % 4);
        const int64_t kq = mode == ScoringMode::Dot ? 1 : 1 + static_cast<int64_t>(rng.raw() % 3);
        const int64_t d = 4 + static_cast<int64_t>(rng.raw() % 13);

        std::vector<std::string> ids;
        std::vector<double> matrix;
        for (int64_t i = 0; i < n_docs; ++i) {
            ids.push_back("d" + std::to_string(i));
            for (int64_t j = 0; j < kd * d; ++j)
                matrix.push_back(static_cast<double>(rng.raw() % 3) - 1.0);  // ties are common
        }
        IndexShard shard = build_index(ids, matrix, kd, d, mode);

        std::vector<double> query(static_cast<size_t>(kq * d));
        for (auto& v : query) v = static_cast<double>(rng.raw() % 3) - 1.0;
        const int64_t top_k = 1 + static_cast<int64_t>(rng.raw() % (n_docs + 3));

        RetrievalResult got = search(shard, "q", query, kq, top_k);

        std::vector<std::pair<double, int64_t>> want;
        for (int64_t i = 0; i < n_docs; ++i) {
            std::vector<double> doc(matrix.begin() + i * kd * d, matrix.begin() + (i + 1) * kd * d);
            want.emplace_back(oracles::naive_maxsim(query, kq, doc, kd, d), i);
        }
        std::stable_sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const size_t expect_n = static_cast<size_t>(std::min(top_k, n_docs));
        if (got.hits.size() != expect_n)
            return fail(fmt("shard %d: %zu hits, expected %zu", t, got.hits.size(), expect_n));
        if (got.k_clamped != (top_k > n_docs)) return fail(fmt("shard %d: clamp flag wrong", t));
        for (size_t i = 0; i < expect_n; ++i) {
            if (got.hits[i].doc_id != ids[static_cast<size_t>(want[i].second)] ||
                got.hits[i].score != want[i].first)
                return fail(fmt("shard %d rank %zu: got (%s, %.17g) want (%s, %.17g)", t, i,
                                got.hits[i].doc_id.c_str(), got.hits[i].score,
                                ids[static_cast<size_t>(want[i].second)].c_str(), want[i].first));
        }
    }

    // Recall must be non-decreasing in K. Queries point harder at a decoy, so
    // the positive sits at rank 2 exactly.
    const int64_t n = 10;
    std::vector<std::string> ids;
    std::vector<double> docs;
    std::map<std::string, std::string> relevance;
    for (int64_t i = 0; i < n; ++i) {
        ids.push_back("d" + std::to_string(i));
        for (int64_t j = 0; j < n; ++j) docs.push_back(i == j ? 1.0 : 0.0);
        relevance["q" + std::to_string(i)] = "d" + std::to_string(i);
    }
    IndexShard shard = build_index(ids, docs, 1, n, ScoringMode::Dot);
    std::vector<RetrievalResult> results;
    for (int64_t i = 0; i < n; ++i) {
        std::vector<double> q(static_cast<size_t>(n), 0.0);
        q[static_cast<size_t>(i)] = 0.3;
        q[static_cast<size_t>((i + 1) % n)] = 1.0;
        results.push_back(search(shard, "q" + std::to_string(i), q, 1, n));
    }
    double prev = 0.0;
    for (int64_t k = 1; k <= n; ++k) {
        double r = recall_at_k(results, relevance, k);
        if (r < prev) return fail(fmt("recall@%" PRId64 " = %.3f below recall@K-1 = %.3f", k, r, prev));
        prev = r;
    }
    if (recall_at_k(results, relevance, 1) != 0.0 || recall_at_k(results, relevance, 2) != 1.0)
        return fail("positive at rank 2 not reflected by recall@1/recall@2");
    return pass(fmt("%d shards match brute force exactly; recall monotone in K", kSearchShards));
}

// ---- 6: toy end-to-end retrieval --------------------------------------------
// Train on all but the last query of each entity, then retrieve with the
// held-out queries against the full document set.

Result check_toy_retrieval() {
    const auto t0 = std::chrono::steady_clock::now();
    SynthConfig sc;  // 64 entities x 8 queries, defaults elsewhere
    sc.noise = 0.1;
    SynthCorpus corpus = synth_corpus(sc, 0);

    FeatureFile train_q, heldout_q;
    train_q.s = heldout_q.s = corpus.queries.s;
    train_q.d_b = heldout_q.d_b = corpus.queries.d_b;
    train_q.d_g = heldout_q.d_g = corpus.queries.d_g;
    for (size_t i = 0; i < corpus.queries.records.size(); ++i) {
        auto& dst = (i % static_cast<size_t>(sc.queries_per_entity) ==
                     static_cast<size_t>(sc.queries_per_entity) - 1)
                        ? heldout_q
                        : train_q;
        dst.records.push_back(corpus.queries.records[i]);
    }

    TrainConfig tc;
    tc.lr = 1e-3;
    tc.warmup_steps = 50;
    tc.batch_size = 32;
    tc.max_steps = kToyMaxSteps;
    tc.seed = 0;
    tc.mode = CellMode::ReT2;
    tc.scoring = ScoringMode::Dot;
    tc.d = 64;
    tc.n_heads = 4;
    TrainResult result = train(train_q, corpus.documents, corpus.relevance, tc);

    EmbeddingFile doc_emb =
        encode_corpus(corpus.documents, result.checkpoint.params, result.checkpoint.config);
    EmbeddingFile q_emb =
        encode_corpus(heldout_q, result.checkpoint.params, result.checkpoint.config);
    IndexShard shard = build_index(doc_emb, ScoringMode::Dot);
    std::vector<RetrievalResult> results;
    for (int64_t i = 0; i < q_emb.count(); ++i) {
        std::vector<double> row(q_emb.row(i), q_emb.row(i) + q_emb.row_width());
        results.push_back(search(shard, q_emb.ids[static_cast<size_t>(i)], row, q_emb.k, 1));
    }
    double recall = recall_at_k(results, corpus.relevance, 1);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > kToyTimeLimitSec)
        return fail(fmt("took %.1fs, budget %.0fs", secs, kToyTimeLimitSec));
    if (recall < kToyRecallMin)
        return fail(fmt("heldout recall@1 %.3f < %.2f after %" PRId64 " steps", recall,
                        kToyRecallMin, kToyMaxSteps));
    return pass(fmt("heldout recall@1 %.3f after %" PRId64 " steps over %zu heldout queries",
                    recall, kToyMaxSteps, results.size()));
}

// ---- 7: gate overrides -------------------------------------------------------

Result check_gate_overrides() {
    CellConfig cfg;
    cfg.mode = CellMode::ReT2;
    cfg.d = 16;
    cfg.d_b = 8;
    cfg.d_bar = 8;
    cfg.s = 3;
    cfg.n_heads = 2;
    ParamStore store = init_params(cfg, 13);
    Rng rng(14);
    CorpusRecord rec = random_record("r", 3, 2, cfg, rng, false, false);

    // Forced carry: forget 1, input 0 must hand the initial candidate state
    // through every step untouched, bit for bit.
    GateOverride carry{1.0, 0.0};
    EncodeOptions opts;
    opts.gate_override = &carry;
    BoundParams bound = bind_params(store, nullptr);
    EncoderOutput out = encode(rec, bound, cfg, opts);
    if (out.c_final.data() != store.at("h0").value)
        return fail("carry override changed the candidate state");

    // Zero gate weights: every sigmoid sits exactly at 1/2.
    for (const char* name : {"gate.wf.text", "gate.wf.visual", "gate.wi.text", "gate.wi.visual"})
        for (auto& v : store.at(name).value) v = 0.0;
    std::vector<CorpusRecord> sample;
    for (int i = 0; i < 4; ++i)
        sample.push_back(random_record("s" + std::to_string(i), 2 + i % 2, 2, cfg, rng,
                                       i == 2, false));
    GateProfile profile = profile_gates(sample, store, cfg);
    if (profile.steps.size() != static_cast<size_t>(cfg.s))
        return fail(fmt("profile has %zu steps, expected %" PRId64, profile.steps.size(), cfg.s));
    for (const auto& step : profile.steps) {
        if (step.forget != 0.5 || step.input_text != 0.5 || step.input_visual != 0.5)
            return fail(fmt("zero-weight gate means %.17g/%.17g/%.17g, expected exactly 0.5",
                            step.forget, step.input_text, step.input_visual));
        if (step.n_forget != 4 || step.n_input_text != 3 || step.n_input_visual != 4)
            return fail("gate sample counts do not match present modalities");
    }
    return pass("forced carry is bitwise; zero-weight gates profile at exactly 0.5");
}

// ---- 8: absent modalities are structurally invisible -------------------------

Result check_missing_modality() {
    for (CellMode mode : {CellMode::ReT2, CellMode::Baseline}) {
        CellConfig cfg;
        cfg.mode = mode;
        cfg.d = 16;
        cfg.d_b = 8;
        cfg.d_bar = 8;
        cfg.s = 2;
        cfg.n_heads = 2;
        ParamStore store = init_params(cfg, 21);
        BoundParams bound = bind_params(store, nullptr);
        for (bool drop_text : {true, false}) {
            Rng rng(22);
            CorpusRecord clean = random_record("r", 3, 2, cfg, rng, drop_text, !drop_text);
            std::vector<double> base = encode(clean, bound, cfg).embedding.data();

            // Stuff the absent side with garbage; the embedding must not move.
            CorpusRecord tampered = clean;
            LayerFeatures& side = drop_text ? tampered.text : tampered.visual;
            side.token_count = 3;
            side.backbone_dim = cfg.d_b;
            side.layers.assign(static_cast<size_t>(cfg.s),
                               std::vector<double>(static_cast<size_t>(3 * cfg.d_b), 1e6));
            side.pooler.assign(static_cast<size_t>(cfg.d_bar), -1e6);
            std::vector<double> same = encode(tampered, bound, cfg).embedding.data();
            if (base != same)
                return fail(fmt("%s mode: garbage in the absent %s side leaked into the embedding",
                                to_string(mode).c_str(), drop_text ? "text" : "visual"));
        }
    }
    return pass("absent sides are bitwise invisible in both modes");
}

// ---- 9: late-interaction training collapses token diversity ------------------

Result check_token_collapse() {
    Tensor uniform = constant({32, 32}, std::vector<double>(32 * 32, 0.7));
    double loss = infonce(uniform, std::nullopt).value();
    if (std::abs(loss - std::log(32.0)) > kUniformLossTol)
        return fail(fmt("uniform-similarity loss %.12f != ln 32 = %.12f", loss, std::log(32.0)));

    SynthConfig sc;
    sc.num_entities = 32;
    sc.queries_per_entity = 8;  // 256 query embeddings
    sc.noise = 0.1;
    SynthCorpus corpus = synth_corpus(sc, 1);

    TrainConfig tc;
    tc.lr = 1e-3;
    tc.warmup_steps = 10;
    tc.batch_size = 8;
    tc.max_steps = 150;
    tc.seed = 2;
    tc.mode = CellMode::Baseline;
    tc.scoring = ScoringMode::MaxSim;
    tc.use_temperature = false;
    tc.d = 32;
    tc.n_heads = 4;
    TrainResult result = train(corpus.queries, corpus.documents, corpus.relevance, tc);

    CellConfig cell = result.checkpoint.config;
    ParamStore at_init = init_params(cell, tc.seed);  // the exact training start
    auto mean_collapse = [&](const ParamStore& params) {
        EmbeddingFile emb = encode_corpus(corpus.queries, params, cell);
        double total = 0.0;
        for (int64_t i = 0; i < emb.count(); ++i) {
            std::vector<double> row(emb.row(i), emb.row(i) + emb.row_width());
            total += rank_collapse_score(row, emb.k, emb.d_bar);
        }
        return total / static_cast<double>(emb.count());
    };
    double before = mean_collapse(at_init);
    double after = mean_collapse(result.checkpoint.params);
    if (before - after < kCollapseDropMin)
        return fail(fmt("diversity score %.3f -> %.3f, drop %.3f < %.2f", before, after,
                        before - after, kCollapseDropMin));
    return pass(fmt("diversity score %.3f -> %.3f over 256 query embeddings; uniform loss = ln 32",
                    before, after));
}

// ---- 10: determinism and byte-exact round trips ------------------------------

Result check_determinism() {
    TempDir dir;
    SynthConfig sc;
    sc.num_entities = 12;
    sc.queries_per_entity = 2;
    sc.n_text = 2;
    sc.n_vis = 2;
    sc.d_b = 8;
    sc.s = 2;
    sc.d_g = 8;
    SynthCorpus corpus = synth_corpus(sc, 5);

    TrainConfig tc;
    tc.lr = 1e-3;
    tc.warmup_steps = 2;
    tc.batch_size = 4;
    tc.max_steps = 20;
    tc.seed = 7;
    tc.d = 16;
    tc.n_heads = 2;
    TrainResult a = train(corpus.queries, corpus.documents, corpus.relevance, tc);
    TrainResult b = train(corpus.queries, corpus.documents, corpus.relevance, tc);
    save_checkpoint(a.checkpoint, dir / "a.ret2");
    save_checkpoint(b.checkpoint, dir / "b.ret2");
    if (slurp(dir / "a.ret2") != slurp(dir / "b.ret2"))
        return fail("same-seed training runs produced different checkpoints");
    if (a.metrics != b.metrics) return fail("same-seed training runs produced different metrics");
    tc.seed = 8;
    TrainResult c = train(corpus.queries, corpus.documents, corpus.relevance, tc);
    save_checkpoint(c.checkpoint, dir / "c.ret2");
    if (slurp(dir / "a.ret2") == slurp(dir / "c.ret2"))
        return fail("different seeds produced identical checkpoints");

    // Each on-disk format must survive write -> read -> write byte for byte.
    write_features(corpus.queries, dir / "f1");
    write_features(read_features(dir / "f1"), dir / "f2");
    if (slurp(dir / "f1") != slurp(dir / "f2")) return fail("feature file round trip drifted");

    EmbeddingFile emb = encode_corpus(corpus.documents, a.checkpoint.params, a.checkpoint.config);
    save_embeddings(emb, dir / "e1");
    save_embeddings(load_embeddings(dir / "e1"), dir / "e2");
    if (slurp(dir / "e1") != slurp(dir / "e2")) return fail("embedding file round trip drifted");

    IndexShard shard = build_index(emb, ScoringMode::Dot);
    save_shard(shard, dir / "s1");
    save_shard(load_shard(dir / "s1"), dir / "s2");
    if (slurp(dir / "s1") != slurp(dir / "s2")) return fail("index shard round trip drifted");

    save_checkpoint(load_checkpoint(dir / "a.ret2"), dir / "a2.ret2");
    if (slurp(dir / "a.ret2") != slurp(dir / "a2.ret2"))
        return fail("checkpoint round trip drifted");
    return pass("same-seed runs and all four formats are byte-identical");
}

}  // namespace

int main() {
    struct Check {
        const char* name;
        std::function<Result()> run;
    };
    const Check checks[] = {
        {"encoder-gradients", check_encoder_gradients},
        {"encoder-reference", check_encoder_reference},
        {"score-identities", check_score_identities},
        {"layer-selection", check_layer_selection},
        {"search-exact", check_search_exact},
        {"toy-retrieval", check_toy_retrieval},
        {"gate-overrides", check_gate_overrides},
        {"missing-modality", check_missing_modality},
        {"token-collapse", check_token_collapse},
        {"determinism", check_determinism},
    };

    int failed = 0;
    int idx = 0;
    for (const auto& check : checks) {
        ++idx;
        const auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = check.run();
        } catch (const std::exception& e) {
            r = fail(fmt("unexpected exception: %s", e.what()));
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        printf("%2d/10 %s %-18s %s (%.1fs)\n", idx, r.pass ? "PASS" : "FAIL", check.name,
               r.detail.c_str(), secs);
        fflush(stdout);
        if (!r.pass) ++failed;
    }
    if (failed == 0) {
        printf("all 10 checks passed\n");
        return 0;
    }
    printf("%d of 10 checks FAILED\n", failed);
    return 1;
}
