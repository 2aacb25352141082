// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0

#include "ret2/features.hpp"

#include <cmath>

#include "ret2/envelope.hpp"

namespace ret2 {
namespace {

void validate_side(const LayerFeatures& side, const FeatureFile& file, const std::string& id,
                   Modality expect) {
    if (side.modality == Modality::Absent) {
        if (!side.layers.empty() || !side.pooler.empty())
            throw DataError("record " + id + ": Absent side must carry no data");
        return;
    }
    if (side.modality != expect) throw DataError("record " + id + ": side/modality mismatch");
    if (static_cast<int64_t>(side.layers.size()) != file.s)
        throw DataError("record " + id + ": expected " + std::to_string(file.s) + " layers");
    if (side.backbone_dim != file.d_b || side.token_count <= 0)
        throw DataError("record " + id + ": bad token shape");
    const size_t want = static_cast<size_t>(side.token_count * side.backbone_dim);
    for (const auto& layer : side.layers)
        if (layer.size() != want) throw DataError("record " + id + ": layer size mismatch");
    if (static_cast<int64_t>(side.pooler.size()) != file.d_g)
        throw DataError("record " + id + ": pooler size mismatch");
}

void append_side(std::vector<float>& payload, const LayerFeatures& side) {
    if (!side.present()) return;
    for (const auto& layer : side.layers)
        for (double v : layer) payload.push_back(static_cast<float>(v));
    for (double v : side.pooler) payload.push_back(static_cast<float>(v));
}

LayerFeatures read_side(const std::vector<float>& payload, size_t& cursor, Modality modality,
                        int64_t n, const FeatureFile& file, const std::string& path) {
    LayerFeatures side;
    side.modality = modality;
    side.token_count = n;
    side.backbone_dim = file.d_b;
    const size_t per_layer = static_cast<size_t>(n * file.d_b);
    const size_t need = per_layer * static_cast<size_t>(file.s) + static_cast<size_t>(file.d_g);
    if (cursor + need > payload.size()) throw DataError("truncated payload in " + path);
    for (int64_t l = 0; l < file.s; ++l) {
        std::vector<double> layer(per_layer);
        for (size_t i = 0; i < per_layer; ++i) layer[i] = static_cast<double>(payload[cursor++]);
        side.layers.push_back(std::move(layer));
    }
    side.pooler.resize(static_cast<size_t>(file.d_g));
    for (auto& v : side.pooler) v = static_cast<double>(payload[cursor++]);
    return side;
}

}  // namespace

void validate(const FeatureFile& file) {
    if (file.s <= 0 || file.d_b <= 0 || file.d_g <= 0)
        throw DataError("feature file dims must be positive");
    for (const auto& rec : file.records) {
        if (rec.id.empty()) throw DataError("record with empty id");
        validate_side(rec.text, file, rec.id, Modality::Text);
        validate_side(rec.visual, file, rec.id, Modality::Visual);
        if (!rec.text.present() && !rec.visual.present())
            throw DataError("record " + rec.id + ": both modalities Absent");
    }
}

void write_features(const FeatureFile& file, const std::string& path) {
    validate(file);
    Envelope env;
    env.magic = kFeatureMagic;
    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : file.records) {
        nlohmann::json j{{"id", rec.id}};
        if (rec.label) j["label"] = *rec.label;
        if (rec.raw_text) j["raw_text"] = *rec.raw_text;
        if (rec.text.present()) j["text"] = {{"n", rec.text.token_count}};
        if (rec.visual.present()) j["visual"] = {{"n", rec.visual.token_count}};
        records.push_back(std::move(j));
    }
    env.header = {{"s", file.s}, {"d_b", file.d_b}, {"d_g", file.d_g}, {"records", records}};
    for (const auto& rec : file.records) {
        append_side(env.payload, rec.text);
        append_side(env.payload, rec.visual);
    }
    write_envelope(path, env);
}

FeatureFile read_features(const std::string& path) {
    Envelope env = read_envelope(path, kFeatureMagic);
    FeatureFile file;
    try {
        file.s = env.header.at("s").get<int64_t>();
        file.d_b = env.header.at("d_b").get<int64_t>();
        file.d_g = env.header.at("d_g").get<int64_t>();
        size_t cursor = 0;
        for (const auto& j : env.header.at("records")) {
            CorpusRecord rec;
            rec.id = j.at("id").get<std::string>();
            if (j.contains("label")) rec.label = j["label"].get<std::string>();
            if (j.contains("raw_text")) rec.raw_text = j["raw_text"].get<std::string>();
            if (j.contains("text"))
                rec.text = read_side(env.payload, cursor, Modality::Text,
                                     j["text"].at("n").get<int64_t>(), file, path);
            if (j.contains("visual"))
                rec.visual = read_side(env.payload, cursor, Modality::Visual,
                                       j["visual"].at("n").get<int64_t>(), file, path);
            file.records.push_back(std::move(rec));
        }
        if (cursor != env.payload.size())
            throw DataError("payload has " + std::to_string(env.payload.size() - cursor) +
                            " unread floats in " + path);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad feature header in " + path + ": " + e.what());
    }
    validate(file);
    return file;
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
    require_known_keys(j,
                       {"num_entities", "queries_per_entity", "n_text", "n_vis", "d_b", "s", "d_g",
                        "noise", "pooler_scale", "missing_text_rate", "missing_visual_rate"},
                       "synth config");
    SynthConfig c;
    try {
        if (j.contains("num_entities")) c.num_entities = j["num_entities"].get<int64_t>();
        if (j.contains("queries_per_entity")) c.queries_per_entity = j["queries_per_entity"].get<int64_t>();
        if (j.contains("n_text")) c.n_text = j["n_text"].get<int64_t>();
        if (j.contains("n_vis")) c.n_vis = j["n_vis"].get<int64_t>();
        if (j.contains("d_b")) c.d_b = j["d_b"].get<int64_t>();
        if (j.contains("s")) c.s = j["s"].get<int64_t>();
        if (j.contains("d_g")) c.d_g = j["d_g"].get<int64_t>();
        if (j.contains("noise")) c.noise = j["noise"].get<double>();
        if (j.contains("pooler_scale")) c.pooler_scale = j["pooler_scale"].get<double>();
        if (j.contains("missing_text_rate")) c.missing_text_rate = j["missing_text_rate"].get<double>();
        if (j.contains("missing_visual_rate"))
            c.missing_visual_rate = j["missing_visual_rate"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad synth config: ") + e.what());
    }
    if (c.num_entities < 1 || c.queries_per_entity < 1 || c.n_text < 1 || c.n_vis < 1 ||
        c.d_b < 1 || c.s < 1 || c.d_g < 1)
        throw ConfigError("synth config: counts and dims must be positive");
    if (c.noise < 0.0 || !std::isfinite(c.noise)) throw ConfigError("synth config: bad noise level");
    if (!(c.pooler_scale > 0.0) || !std::isfinite(c.pooler_scale))
        throw ConfigError("synth config: pooler_scale must be positive");
    if (c.missing_text_rate < 0.0 || c.missing_text_rate > 1.0 || c.missing_visual_rate < 0.0 ||
        c.missing_visual_rate > 1.0)
        throw ConfigError("synth config: missing-modality rates must lie in [0, 1]");
    return c;
}

nlohmann::json synth_config_to_json(const SynthConfig& c) {
    return {{"num_entities", c.num_entities},
            {"queries_per_entity", c.queries_per_entity},
            {"n_text", c.n_text},
            {"n_vis", c.n_vis},
            {"d_b", c.d_b},
            {"s", c.s},
            {"d_g", c.d_g},
            {"noise", c.noise},
            {"pooler_scale", c.pooler_scale},
            {"missing_text_rate", c.missing_text_rate},
            {"missing_visual_rate", c.missing_visual_rate}};
}

namespace {

std::vector<double> draw_map(Rng& rng, int64_t rows, int64_t cols, double scale) {
    std::vector<double> m(static_cast<size_t>(rows * cols));
    for (auto& v : m) v = rng.gaussian(scale);
    return m;
}

// row = scale * (latent * map + noise), quantized to f32 like everything on
// disk.
std::vector<double> mix_row(const std::vector<double>& latent, const std::vector<double>& map,
                            int64_t cols, double noise, Rng& rng, double scale = 1.0) {
    std::vector<double> out(static_cast<size_t>(cols));
    const int64_t d_b = static_cast<int64_t>(latent.size());
    for (int64_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (int64_t i = 0; i < d_b; ++i) s += latent[static_cast<size_t>(i)] * map[static_cast<size_t>(i * cols + j)];
        out[static_cast<size_t>(j)] = through_f32(scale * (s + rng.gaussian(noise)));
    }
    return out;
}

LayerFeatures make_side(Modality modality, int64_t n, const SynthConfig& cfg,
                        const std::vector<double>& latent,
                        const std::vector<std::vector<double>>& layer_maps,
                        const std::vector<double>& pool_map, Rng& rng) {
    LayerFeatures side;
    side.modality = modality;
    side.token_count = n;
    side.backbone_dim = cfg.d_b;
    for (int64_t l = 0; l < cfg.s; ++l) {
        std::vector<double> layer;
        layer.reserve(static_cast<size_t>(n * cfg.d_b));
        for (int64_t t = 0; t < n; ++t) {
            auto row = mix_row(latent, layer_maps[static_cast<size_t>(l)], cfg.d_b, cfg.noise, rng);
            layer.insert(layer.end(), row.begin(), row.end());
        }
        side.layers.push_back(std::move(layer));
    }
    side.pooler = mix_row(latent, pool_map, cfg.d_g, cfg.noise, rng, cfg.pooler_scale);
    return side;
}

}  // namespace

SynthCorpus synth_corpus(const SynthConfig& cfg, uint64_t seed, SynthDebug* debug) {
    Rng rng(seed);
    const double map_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_b));

    std::vector<std::vector<double>> latents;
    for (int64_t e = 0; e < cfg.num_entities; ++e) latents.push_back(draw_map(rng, cfg.d_b, 1, 1.0));

    // Per side (query, document) and modality: one map per layer plus pooler.
    auto draw_side_maps = [&](std::vector<std::vector<std::vector<double>>>& layer_maps,
                              std::vector<std::vector<double>>& pool_maps) {
        for (int mod = 0; mod < 2; ++mod) {
            std::vector<std::vector<double>> per_layer;
            for (int64_t l = 0; l < cfg.s; ++l)
                per_layer.push_back(draw_map(rng, cfg.d_b, cfg.d_b, map_scale));
            layer_maps.push_back(std::move(per_layer));
            pool_maps.push_back(draw_map(rng, cfg.d_b, cfg.d_g, map_scale));
        }
    };
    std::vector<std::vector<std::vector<double>>> qmaps, dmaps;
    std::vector<std::vector<double>> qpool, dpool;
    draw_side_maps(qmaps, qpool);
    draw_side_maps(dmaps, dpool);

    SynthCorpus corpus;
    for (auto* f : {&corpus.queries, &corpus.documents}) {
        f->s = cfg.s;
        f->d_b = cfg.d_b;
        f->d_g = cfg.d_g;
    }

    auto make_record = [&](const std::string& id, const std::vector<double>& latent,
                           const std::vector<std::vector<std::vector<double>>>& maps,
                           const std::vector<std::vector<double>>& pools) {
        CorpusRecord rec;
        rec.id = id;
        bool text_missing = rng.bernoulli(cfg.missing_text_rate);
        bool vis_missing = rng.bernoulli(cfg.missing_visual_rate);
        if (text_missing && vis_missing) text_missing = false;  // keep at least one side
        if (!text_missing)
            rec.text = make_side(Modality::Text, cfg.n_text, cfg, latent, maps[0], pools[0], rng);
        if (!vis_missing)
            rec.visual = make_side(Modality::Visual, cfg.n_vis, cfg, latent, maps[1], pools[1], rng);
        return rec;
    };

    // Fixed-width answer strings so no label is a substring of another.
    auto answer = [](int64_t e) {
        std::string n = std::to_string(e);
        return "ans_" + std::string(6 - std::min<size_t>(6, n.size()), '0') + n;
    };

    for (int64_t e = 0; e < cfg.num_entities; ++e) {
        const std::string did = "d" + std::to_string(e);
        CorpusRecord doc = make_record(did, latents[static_cast<size_t>(e)], dmaps, dpool);
        doc.raw_text = "entity passage " + std::to_string(e) + " answer " + answer(e);
        corpus.documents.records.push_back(std::move(doc));
    }
    for (int64_t e = 0; e < cfg.num_entities; ++e) {
        for (int64_t q = 0; q < cfg.queries_per_entity; ++q) {
            const std::string qid = "q" + std::to_string(e) + "_" + std::to_string(q);
            CorpusRecord query = make_record(qid, latents[static_cast<size_t>(e)], qmaps, qpool);
            query.label = answer(e);
            corpus.relevance[qid] = "d" + std::to_string(e);
            corpus.queries.records.push_back(std::move(query));
        }
    }

    if (debug != nullptr) {
        debug->latents = std::move(latents);
        debug->query_maps = std::move(qmaps);
        debug->doc_maps = std::move(dmaps);
        debug->query_pool = std::move(qpool);
        debug->doc_pool = std::move(dpool);
    }
    validate(corpus.queries);
    validate(corpus.documents);
    return corpus;
}

}  // namespace ret2
