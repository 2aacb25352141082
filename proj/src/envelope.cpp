// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0

#include "ret2/envelope.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ret2/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian and rely on a little-endian host");
static_assert(sizeof(float) == 4, "payload format requires 32-bit floats");

namespace ret2 {
namespace {

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(const std::string& in, size_t off) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(in[off + i])) << (8 * i);
    return v;
}

}  // namespace

void write_envelope(const std::string& path, const Envelope& env) {
    require(env.magic.size() == 8, "envelope magic must be exactly 8 bytes");
    std::string head = env.magic;
    put_u32(head, env.version);
    const std::string body = env.header.dump();
    put_u32(head, static_cast<uint32_t>(body.size()));
    head += body;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    if (!env.payload.empty())
        out.write(reinterpret_cast<const char*>(env.payload.data()),
                  static_cast<std::streamsize>(env.payload.size() * sizeof(float)));
    out.flush();
    if (!out) throw DataError("short write: " + path);
}

Envelope read_envelope(const std::string& path, const std::string& expect_magic,
                       uint32_t expect_version) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16) throw DataError("truncated file (no envelope header): " + path);

    Envelope env;
    env.magic = bytes.substr(0, 8);
    if (env.magic != expect_magic)
        throw DataError("bad magic in " + path + ": expected " + expect_magic + ", got '" +
                        env.magic + "'");
    env.version = get_u32(bytes, 8);
    if (env.version != expect_version)
        throw DataError("unsupported version " + std::to_string(env.version) + " in " + path);
    const uint32_t hlen = get_u32(bytes, 12);
    if (bytes.size() < 16 + static_cast<size_t>(hlen))
        throw DataError("truncated header in " + path);
    try {
        env.header = nlohmann::json::parse(bytes.substr(16, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed JSON header in " + path + ": " + e.what());
    }

    const size_t payload_off = 16 + static_cast<size_t>(hlen);
    const size_t payload_bytes = bytes.size() - payload_off;
    if (payload_bytes % sizeof(float) != 0)
        throw DataError("payload size is not a multiple of 4 bytes in " + path);
    env.payload.resize(payload_bytes / sizeof(float));
    if (payload_bytes > 0)
        std::memcpy(env.payload.data(), bytes.data() + payload_off, payload_bytes);
    return env;
}

void require_known_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                        const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
    for (const auto& item : j.items()) {
        const std::string& key = item.key();
        bool found = false;
        for (std::string_view k : known) {
            if (key == k) {
                found = true;
                break;
            }
        }
        if (found) continue;
        std::string list;
        for (std::string_view k : known) {
            if (!list.empty()) list += ", ";
            list += k;
        }
        throw ConfigError(context + ": unknown key \"" + key + "\" (known keys: " + list + ")");
    }
}

}  // namespace ret2
