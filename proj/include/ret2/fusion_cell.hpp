// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// The recurrence-enhanced Transformer cell. One cell step per selected
// backbone layer: cross-attend the hidden state into each modality's token
// features, mix the results into a candidate state through sigmoidal forget
// and input gates, then apply a residual MLP. The final hidden state is
// projected to the retrieval space; the single-token mode additionally sums
// in the backbone pooler tokens. Query and document sides share all weights.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ret2/features.hpp"
#include "ret2/tensor.hpp"

namespace ret2 {

// ReT2: single hidden token, pooler injection at the output.
// Baseline: 32 hidden tokens with self-attention inside each step, emitted
// as-is for late-interaction scoring.
enum class CellMode { ReT2, Baseline };

std::string to_string(CellMode mode);
CellMode cell_mode_from_string(const std::string& s);

struct CellConfig {
    CellMode mode = CellMode::ReT2;
    int64_t d = 1024;    // hidden width
    int64_t d_b = 0;     // backbone token width (matches feature files)
    int64_t d_bar = 0;   // output width; must equal the feature d_g
    int64_t s = 3;       // recurrent steps == selected layers
    int64_t n_heads = 8;

    int64_t k() const { return mode == CellMode::ReT2 ? 1 : 32; }
    int64_t head_dim() const { return d / n_heads; }
    void validate() const;
};

nlohmann::json cell_config_to_json(const CellConfig& config);
CellConfig cell_config_from_json(const nlohmann::json& j);

// Ordered named parameter buffers. The order fixes both the checkpoint layout
// and the optimizer's state alignment.
class ParamStore {
  public:
    struct Entry {
        std::string name;
        Shape shape;
        std::vector<double> value;
    };

    void add(std::string name, Shape shape, std::vector<double> value);
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;
    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    int64_t total_scalars() const;

  private:
    std::vector<Entry> entries_;
    std::map<std::string, size_t> index_;
};

// Fresh parameters for a config: weight matrices and h0 from N(0, 0.02^2),
// LayerNorm gain 1 / bias 0, attention biases 0, temperature 0.07. Gate
// biases are fixed zero scalars and are not stored.
ParamStore init_params(const CellConfig& config, uint64_t seed);

// Leaf tensors on a tape (training) or constants (tape == nullptr).
struct BoundParams {
    std::map<std::string, Tensor> tensors;
    const Tensor& operator()(const std::string& name) const;
};
BoundParams bind_params(const ParamStore& store, Tape* tape);

// Three backbone layer indices (early, middle, late), 0-based. Known backbone
// depths use their published selections; other depths fall back to a spread
// rule. Throws ConfigError for depths below 4.
std::vector<int64_t> select_layers(int64_t total_layers);

// Multi-head cross-attention of the normalized hidden state (k x d) into one
// modality's token features (n x d_b). `mod` is "text" or "visual".
Tensor cross_attend(const Tensor& h_norm, const Tensor& features, const BoundParams& params,
                    const std::string& mod, const CellConfig& config);

// Test hook: force every forget-gate element to `f` and every input-gate
// element to `i`, bypassing the learned gates. Exact 0 and 1 drop or carry
// terms structurally so identities hold bitwise.
struct GateOverride {
    double f = 1.0;
    double i = 0.0;
};

struct GateStats {
    bool present = false;
    double mean = 0.0;
    std::vector<double> raw;  // filled only when gate logging is on
};

struct StepTrace {
    GateStats forget, input_text, input_visual;
};

// One recurrent step: returns (h_next, c_next).
std::pair<Tensor, Tensor> cell_step(const Tensor& h, const Tensor& c,
                                    const std::optional<Tensor>& text_tokens,
                                    const std::optional<Tensor>& visual_tokens,
                                    const BoundParams& params, const CellConfig& config,
                                    const GateOverride* override_gates = nullptr,
                                    StepTrace* trace = nullptr, bool keep_raw_gates = false);

struct EncodeOptions {
    bool log_gates = false;        // fill per-step traces
    bool keep_raw_gates = false;   // additionally keep raw gate activations
    const GateOverride* gate_override = nullptr;
};

struct EncoderOutput {
    Tensor embedding;  // k x d_bar
    Tensor c_final;    // k x d candidate state after the last step
    std::vector<StepTrace> gate_log;
};

EncoderOutput encode(const CorpusRecord& record, const BoundParams& params,
                     const CellConfig& config, const EncodeOptions& opts = {});

// Checkpoint: config + seed + every parameter, f32 on disk.
struct Checkpoint {
    CellConfig config;
    uint64_t seed = 0;
    ParamStore params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// In-place f32 quantization of every parameter, mirroring a save/load cycle.
void quantize_params(ParamStore& params);

}  // namespace ret2
