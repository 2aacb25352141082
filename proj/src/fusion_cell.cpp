// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0

#include "ret2/fusion_cell.hpp"

#include <cmath>

#include "ret2/envelope.hpp"

namespace ret2 {

std::string to_string(CellMode mode) { return mode == CellMode::ReT2 ? "ret2" : "baseline"; }

CellMode cell_mode_from_string(const std::string& s) {
    if (s == "ret2") return CellMode::ReT2;
    if (s == "baseline") return CellMode::Baseline;
    throw ConfigError("unknown cell mode '" + s + "' (expected ret2 or baseline)");
}

void CellConfig::validate() const {
    if (d < 1 || d_b < 1 || d_bar < 1 || s < 1 || n_heads < 1)
        throw ConfigError("cell config dims must be positive");
    if (d % n_heads != 0) throw ConfigError("hidden width must be divisible by the head count");
}

nlohmann::json cell_config_to_json(const CellConfig& c) {
    return {{"mode", to_string(c.mode)}, {"d", c.d},         {"d_b", c.d_b},
            {"d_bar", c.d_bar},          {"s", c.s},         {"n_heads", c.n_heads}};
}

CellConfig cell_config_from_json(const nlohmann::json& j) {
    CellConfig c;
    try {
        if (j.contains("mode")) c.mode = cell_mode_from_string(j["mode"].get<std::string>());
        if (j.contains("d")) c.d = j["d"].get<int64_t>();
        if (j.contains("d_b")) c.d_b = j["d_b"].get<int64_t>();
        if (j.contains("d_bar")) c.d_bar = j["d_bar"].get<int64_t>();
        if (j.contains("s")) c.s = j["s"].get<int64_t>();
        if (j.contains("n_heads")) c.n_heads = j["n_heads"].get<int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad cell config: ") + e.what());
    }
    c.validate();
    return c;
}

void ParamStore::add(std::string name, Shape shape, std::vector<double> value) {
    require(shape_numel(shape) == static_cast<int64_t>(value.size()),
            "parameter " + name + ": shape/value mismatch");
    require(index_.count(name) == 0, "duplicate parameter " + name);
    index_[name] = entries_.size();
    entries_.push_back({std::move(name), std::move(shape), std::move(value)});
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter " + name);
    return entries_[it->second];
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter " + name);
    return entries_[it->second];
}

int64_t ParamStore::total_scalars() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += static_cast<int64_t>(e.value.size());
    return n;
}

namespace {

std::vector<double> gaussian_fill(Rng& rng, int64_t n, double stddev) {
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.gaussian(stddev);
    return v;
}

void add_layernorm(ParamStore& p, const std::string& prefix, int64_t d) {
    p.add(prefix + ".gain", {d}, std::vector<double>(static_cast<size_t>(d), 1.0));
    p.add(prefix + ".bias", {d}, std::vector<double>(static_cast<size_t>(d), 0.0));
}

void add_attention(ParamStore& p, const std::string& prefix, int64_t kv_width, int64_t d, Rng& rng) {
    const double kInitStd = 0.02;
    p.add(prefix + ".wq", {d, d}, gaussian_fill(rng, d * d, kInitStd));
    p.add(prefix + ".bq", {d}, std::vector<double>(static_cast<size_t>(d), 0.0));
    p.add(prefix + ".wk", {kv_width, d}, gaussian_fill(rng, kv_width * d, kInitStd));
    p.add(prefix + ".bk", {d}, std::vector<double>(static_cast<size_t>(d), 0.0));
    p.add(prefix + ".wv", {kv_width, d}, gaussian_fill(rng, kv_width * d, kInitStd));
    p.add(prefix + ".bv", {d}, std::vector<double>(static_cast<size_t>(d), 0.0));
    p.add(prefix + ".wo", {d, d}, gaussian_fill(rng, d * d, kInitStd));
    p.add(prefix + ".bo", {d}, std::vector<double>(static_cast<size_t>(d), 0.0));
}

}  // namespace

ParamStore init_params(const CellConfig& cfg, uint64_t seed) {
    cfg.validate();
    const double kInitStd = 0.02;
    Rng rng(seed);
    ParamStore p;
    const int64_t k = cfg.k(), d = cfg.d;
    p.add("h0", {k, d}, gaussian_fill(rng, k * d, kInitStd));
    add_layernorm(p, "ln_attn", d);
    if (cfg.mode == CellMode::Baseline) {
        add_layernorm(p, "ln_self", d);
        add_attention(p, "self", d, d, rng);
    }
    add_attention(p, "attn.text", cfg.d_b, d, rng);
    add_attention(p, "attn.visual", cfg.d_b, d, rng);
    for (const char* gate : {"gate.wf.text", "gate.wf.visual", "gate.wi.text", "gate.wi.visual"})
        p.add(gate, {d, d}, gaussian_fill(rng, d * d, kInitStd));
    add_layernorm(p, "ln_mlp", d);
    p.add("mlp.w1", {d, 4 * d}, gaussian_fill(rng, d * 4 * d, kInitStd));
    p.add("mlp.w2", {4 * d, d}, gaussian_fill(rng, 4 * d * d, kInitStd));
    p.add("w_final", {d, cfg.d_bar}, gaussian_fill(rng, d * cfg.d_bar, kInitStd));
    p.add("temperature", {1}, {0.07});
    return p;
}

const Tensor& BoundParams::operator()(const std::string& name) const {
    auto it = tensors.find(name);
    require(it != tensors.end(), "unbound parameter " + name);
    return it->second;
}

BoundParams bind_params(const ParamStore& store, Tape* tape) {
    BoundParams bound;
    for (const auto& e : store.entries())
        bound.tensors.emplace(e.name,
                              tape ? tape->leaf(e.shape, e.value) : constant(e.shape, e.value));
    return bound;
}

std::vector<int64_t> select_layers(int64_t total_layers) {
    if (total_layers < 4) throw ConfigError("layer selection needs a backbone of at least 4 layers");
    switch (total_layers) {
        case 12: return {3, 7, 11};   // CLIP ViT-B
        case 24: return {3, 18, 23};  // SigLIP2 ViT-L
        case 32: return {4, 25, 31};  // OpenCLIP ViT-H
        default: break;
    }
    // Spread rule for unlisted depths: one early, one around three quarters,
    // one next-to-last, kept strictly increasing.
    const int64_t late = total_layers - 2;
    int64_t early = (total_layers + 7) / 8;
    if (early > late - 2) early = late - 2;
    int64_t mid = (3 * total_layers + 3) / 4;
    mid = std::max(early + 1, std::min(mid, late - 1));
    return {early, mid, late};
}

namespace {

// Shared by cross- and self-attention; `prefix` selects the weight set and
// `memory` supplies keys and values.
Tensor attention_block(const Tensor& q_src, const Tensor& memory, const BoundParams& p,
                       const std::string& prefix, const CellConfig& cfg) {
    Tensor q = add_rowvec(matmul(q_src, p(prefix + ".wq")), p(prefix + ".bq"));
    Tensor k = add_rowvec(matmul(memory, p(prefix + ".wk")), p(prefix + ".bk"));
    Tensor v = add_rowvec(matmul(memory, p(prefix + ".wv")), p(prefix + ".bv"));
    const int64_t hd = cfg.head_dim();
    const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Tensor> heads;
    heads.reserve(static_cast<size_t>(cfg.n_heads));
    for (int64_t h = 0; h < cfg.n_heads; ++h) {
        Tensor qh = slice_cols(q, h * hd, hd);
        Tensor kh = slice_cols(k, h * hd, hd);
        Tensor vh = slice_cols(v, h * hd, hd);
        Tensor attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_hd));
        heads.push_back(matmul(attn, vh));
    }
    Tensor merged = cfg.n_heads == 1 ? heads[0] : concat_cols(heads);
    return add_rowvec(matmul(merged, p(prefix + ".wo")), p(prefix + ".bo"));
}

void record_gate(GateStats& stats, const Tensor& gate, bool keep_raw) {
    stats.present = true;
    double s = 0.0;
    for (double x : gate.data()) s += x;
    stats.mean = s / static_cast<double>(gate.numel());
    if (keep_raw) stats.raw = gate.data();
}

}  // namespace

Tensor cross_attend(const Tensor& h_norm, const Tensor& features, const BoundParams& params,
                    const std::string& mod, const CellConfig& config) {
    require(mod == "text" || mod == "visual", "modality must be text or visual");
    return attention_block(h_norm, features, params, "attn." + mod, config);
}

std::pair<Tensor, Tensor> cell_step(const Tensor& h, const Tensor& c,
                                    const std::optional<Tensor>& text_tokens,
                                    const std::optional<Tensor>& visual_tokens,
                                    const BoundParams& params, const CellConfig& config,
                                    const GateOverride* override_gates, StepTrace* trace,
                                    bool keep_raw_gates) {
    if (!text_tokens && !visual_tokens)
        throw DataError("cell step needs at least one present modality");

    Tensor h_in = h;
    if (config.mode == CellMode::Baseline) {
        Tensor hn = layer_norm(h_in, params("ln_self.gain"), params("ln_self.bias"));
        h_in = add(h_in, attention_block(hn, hn, params, "self", config));
    }
    Tensor h_norm = layer_norm(h_in, params("ln_attn.gain"), params("ln_attn.bias"));

    std::optional<Tensor> z_text, z_visual;
    if (text_tokens) z_text = cross_attend(h_norm, *text_tokens, params, "text", config);
    if (visual_tokens) z_visual = cross_attend(h_norm, *visual_tokens, params, "visual", config);

    // Forget gate pools both modalities; each input gate sees only its own.
    // Absent modalities contribute nothing. Gate biases are fixed at zero.
    std::optional<Tensor> forget_pre;
    if (z_text) forget_pre = matmul(*z_text, params("gate.wf.text"));
    if (z_visual) {
        Tensor t = matmul(*z_visual, params("gate.wf.visual"));
        forget_pre = forget_pre ? add(*forget_pre, t) : t;
    }
    Tensor forget = sigmoid(*forget_pre);
    std::optional<Tensor> in_text, in_visual;
    if (z_text) in_text = sigmoid(matmul(*z_text, params("gate.wi.text")));
    if (z_visual) in_visual = sigmoid(matmul(*z_visual, params("gate.wi.visual")));

    if (trace != nullptr) {
        record_gate(trace->forget, forget, keep_raw_gates);
        if (in_text) record_gate(trace->input_text, *in_text, keep_raw_gates);
        if (in_visual) record_gate(trace->input_visual, *in_visual, keep_raw_gates);
    }

    std::optional<Tensor> c_next;
    auto accumulate = [&](const Tensor& term) {
        c_next = c_next ? add(*c_next, term) : term;
    };
    // Exact 0/1 overrides drop or pass terms structurally so the carry
    // identities hold bitwise, not just within rounding.
    auto gated = [&](const Tensor& value, const Tensor& gate, double forced) {
        if (override_gates == nullptr) {
            accumulate(hadamard(value, gate));
        } else if (forced == 1.0) {
            accumulate(value);
        } else if (forced != 0.0) {
            accumulate(hadamard(value, full(value.shape(), forced)));
        }
    };
    gated(c, forget, override_gates ? override_gates->f : -1.0);
    if (z_text) gated(*z_text, *in_text, override_gates ? override_gates->i : -1.0);
    if (z_visual) gated(*z_visual, *in_visual, override_gates ? override_gates->i : -1.0);
    if (!c_next) c_next = zeros(c.shape());  // every term overridden away

    Tensor normed = layer_norm(*c_next, params("ln_mlp.gain"), params("ln_mlp.bias"));
    Tensor mlp = matmul(gelu(matmul(normed, params("mlp.w1"))), params("mlp.w2"));
    Tensor h_next = add(*c_next, mlp);
    return {h_next, *c_next};
}

EncoderOutput encode(const CorpusRecord& record, const BoundParams& params,
                     const CellConfig& config, const EncodeOptions& opts) {
    const LayerFeatures& text = record.text;
    const LayerFeatures& visual = record.visual;
    if (!text.present() && !visual.present())
        throw DataError("record " + record.id + ": both modalities Absent");
    for (const LayerFeatures* side : {&text, &visual}) {
        if (!side->present()) continue;
        if (side->backbone_dim != config.d_b)
            throw DataError("record " + record.id + ": backbone dim " +
                            std::to_string(side->backbone_dim) + " != configured " +
                            std::to_string(config.d_b));
        if (static_cast<int64_t>(side->layers.size()) != config.s)
            throw DataError("record " + record.id + ": layer count mismatch");
        // Pooler injection needs matching widths; the multi-token mode never
        // touches the poolers.
        if (config.mode == CellMode::ReT2 &&
            static_cast<int64_t>(side->pooler.size()) != config.d_bar)
            throw DataError("record " + record.id + ": pooler width " +
                            std::to_string(side->pooler.size()) + " != output width " +
                            std::to_string(config.d_bar));
    }

    EncoderOutput out;
    Tensor h = params("h0");
    Tensor c = params("h0");
    for (int64_t l = 0; l < config.s; ++l) {
        std::optional<Tensor> text_tokens, visual_tokens;
        if (text.present())
            text_tokens = constant({text.token_count, config.d_b},
                                   text.layers[static_cast<size_t>(l)]);
        if (visual.present())
            visual_tokens = constant({visual.token_count, config.d_b},
                                     visual.layers[static_cast<size_t>(l)]);
        StepTrace trace;
        auto [h_next, c_next] =
            cell_step(h, c, text_tokens, visual_tokens, params, config, opts.gate_override,
                      opts.log_gates ? &trace : nullptr, opts.keep_raw_gates);
        if (opts.log_gates) out.gate_log.push_back(std::move(trace));
        h = h_next;
        c = c_next;
    }

    Tensor embedding = matmul(h, params("w_final"));
    if (config.mode == CellMode::ReT2) {
        // Global feature injection: sum the present pooler tokens into the
        // single projected token.
        if (text.present()) embedding = add(embedding, constant({1, config.d_bar}, text.pooler));
        if (visual.present())
            embedding = add(embedding, constant({1, config.d_bar}, visual.pooler));
    }
    out.embedding = embedding;
    out.c_final = c;
    return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ckpt.config.validate();
    Envelope env;
    env.magic = kCheckpointMagic;
    nlohmann::json params = nlohmann::json::array();
    for (const auto& e : ckpt.params.entries()) {
        params.push_back({{"name", e.name}, {"shape", e.shape}});
        for (double v : e.value) env.payload.push_back(static_cast<float>(v));
    }
    env.header = {{"config", cell_config_to_json(ckpt.config)},
                  {"seed", ckpt.seed},
                  {"params", params}};
    write_envelope(path, env);
}

Checkpoint load_checkpoint(const std::string& path) {
    Envelope env = read_envelope(path, kCheckpointMagic);
    Checkpoint ckpt;
    try {
        ckpt.config = cell_config_from_json(env.header.at("config"));
        ckpt.seed = env.header.at("seed").get<uint64_t>();
        size_t cursor = 0;
        for (const auto& j : env.header.at("params")) {
            const auto name = j.at("name").get<std::string>();
            const auto shape = j.at("shape").get<Shape>();
            const auto count = static_cast<size_t>(shape_numel(shape));
            if (cursor + count > env.payload.size())
                throw DataError("truncated parameter payload in " + path);
            std::vector<double> value(count);
            for (size_t i = 0; i < count; ++i) value[i] = static_cast<double>(env.payload[cursor + i]);
            cursor += count;
            ckpt.params.add(name, shape, std::move(value));
        }
        if (cursor != env.payload.size())
            throw DataError("checkpoint payload has trailing bytes in " + path);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad checkpoint header in " + path + ": " + e.what());
    } catch (const ConfigError& e) {
        throw DataError("bad checkpoint config in " + path + ": " + e.what());
    }
    return ckpt;
}

void quantize_params(ParamStore& params) {
    for (auto& e : params.entries())
        for (auto& v : e.value) v = through_f32(v);
}

}  // namespace ret2
