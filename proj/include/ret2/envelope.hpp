// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Common on-disk container: 8-byte magic, u32 version, u32 JSON header
// length, UTF-8 JSON header, then a raw little-endian f32 payload. Feature
// files, checkpoints, embeddings and index shards all use this envelope and
// differ only in magic and header schema.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ret2 {

struct Envelope {
    std::string magic;  // exactly 8 bytes
    uint32_t version = 1;
    nlohmann::json header;
    std::vector<float> payload;
};

void write_envelope(const std::string& path, const Envelope& env);

// Validates magic and version; throws DataError on any malformed input.
Envelope read_envelope(const std::string& path, const std::string& expect_magic,
                       uint32_t expect_version = 1);

// Throws ConfigError when a user-supplied config object carries a key the
// parser would otherwise drop silently (typos would go unnoticed).
void require_known_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                        const std::string& context);

inline constexpr const char* kFeatureMagic = "RET2FEAT";
inline constexpr const char* kCheckpointMagic = "RET2CKPT";
inline constexpr const char* kShardMagic = "RET2SHRD";
inline constexpr const char* kEmbeddingMagic = "RET2EMBD";

}  // namespace ret2
