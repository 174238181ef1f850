#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "klever/config.hpp"
#include "klever/corpus.hpp"
#include "klever/error.hpp"
#include "klever/model.hpp"

namespace klever {

// Layout (little-endian):
//   "KLEVCKPT"            8 bytes
//   version               u32
//   header length         u64
//   header                UTF-8 JSON: config, catalog, vocabularies, graph
//                         edges, stopwords and a tensor directory whose
//                         offsets are relative to the payload start
//   payload               f32 row-major tensors in directory order

inline constexpr std::array<char, 8> kCheckpointMagic = {'K', 'L', 'E', 'V', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
public:
    using Error::Error;
};

class VersionMismatchError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class MissingTensorError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class TruncatedPayloadError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::string& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const char* data) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, data, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace detail

/// Serializes the model. Identical models produce identical bytes.
inline std::string serialize_checkpoint(const Model& m) {
    nlohmann::json header;
    header["config"] = to_json(m.config);
    nlohmann::json catalog = nlohmann::json::array();
    for (const auto& item : m.catalog.items()) {
        catalog.push_back(to_json(item));
    }
    header["catalog"] = std::move(catalog);
    header["vocab"] = m.vocab.words();
    header["entities"] = m.entities;
    header["relations"] = m.relations;

    nlohmann::json idg = nlohmann::json::array();
    for (const auto& [u, w] : m.idg.edges()) {
        idg.push_back({u, w});
    }
    header["idg_edges"] = std::move(idg);
    nlohmann::json kg = nlohmann::json::array();
    for (const auto& e : m.item_kg.edges()) {
        kg.push_back({e.head, e.relation, e.tail});
    }
    header["item_kg_edges"] = std::move(kg);
    nlohmann::json wk = nlohmann::json::array();
    for (const auto& [a, b] : m.word_kg.edges()) {
        wk.push_back({a, b});
    }
    header["word_kg_edges"] = std::move(wk);
    std::vector<std::string> stop(m.stopwords.begin(), m.stopwords.end());
    std::sort(stop.begin(), stop.end());
    header["stopwords"] = std::move(stop);

    std::string payload;
    nlohmann::json directory = nlohmann::json::array();
    for (const auto& [name, p] : m.params) {
        directory.push_back({{"name", name}, {"dims", p.value.dims()}, {"offset", payload.size()}});
        for (double v : p.value.data()) {
            detail::put_le(payload, static_cast<float>(v));
        }
    }
    header["tensors"] = std::move(directory);
    header["payload_bytes"] = payload.size();

    const std::string text = header.dump();
    std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
    detail::put_le<std::uint32_t>(out, kCheckpointVersion);
    detail::put_le<std::uint64_t>(out, text.size());
    out += text;
    out += payload;
    return out;
}

inline Model deserialize_checkpoint(const std::string& bytes) {
    constexpr std::size_t prefix = 8 + 4 + 8;
    if (bytes.size() < 8 || !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin())) {
        throw VersionMismatchError("not a checkpoint: bad magic bytes");
    }
    if (bytes.size() < prefix) {
        throw TruncatedPayloadError("checkpoint truncated inside the fixed header");
    }
    const auto version = detail::get_le<std::uint32_t>(bytes.data() + 8);
    if (version != kCheckpointVersion) {
        throw VersionMismatchError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                   std::to_string(kCheckpointVersion) + ")");
    }
    const auto header_len = detail::get_le<std::uint64_t>(bytes.data() + 12);
    if (bytes.size() - prefix < header_len) {
        throw TruncatedPayloadError("checkpoint truncated inside the JSON header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + prefix, bytes.begin() + static_cast<std::ptrdiff_t>(prefix + header_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
    }
    const std::size_t payload_start = prefix + header_len;
    const std::size_t payload_size = bytes.size() - payload_start;

    try {
        const auto config = config_from_json(header.at("config"));
        Catalog catalog;
        for (const auto& j : header.at("catalog")) {
            catalog.add(parse_item(j));
        }
        const auto vocab = header.at("vocab").get<std::vector<std::string>>();
        std::vector<std::string> item_ids;
        for (const auto& item : catalog.items()) {
            item_ids.push_back(item.item_id);
        }
        DescriptiveGraph idg(item_ids, vocab);
        for (const auto& e : header.at("idg_edges")) {
            idg.add_edge(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
        }

        NamedRelationalGraph kg;
        kg.entities = header.at("entities").get<std::vector<std::string>>();
        kg.relations = header.at("relations").get<std::vector<std::string>>();
        kg.graph = RelationalGraph(kg.entities.size(), kg.relations.size());
        for (const auto& e : header.at("item_kg_edges")) {
            kg.graph.add_edge(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<std::size_t>());
        }
        NamedWordGraph wk;
        wk.words = vocab;
        wk.graph = WordGraph(vocab.size());
        for (const auto& e : header.at("word_kg_edges")) {
            wk.graph.add_edge(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
        }
        StopwordSet stop;
        for (const auto& s : header.at("stopwords")) {
            stop.insert(s.get<std::string>());
        }

        Model m = build_model(std::move(catalog), idg, config, kg, wk, std::move(stop));

        std::map<std::string, const nlohmann::json*> directory;
        for (const auto& t : header.at("tensors")) {
            directory.emplace(t.at("name").get<std::string>(), &t);
        }
        for (auto& [name, p] : m.params) {
            auto it = directory.find(name);
            if (it == directory.end()) {
                throw MissingTensorError("checkpoint is missing tensor '" + name + "'");
            }
            const auto& entry = *it->second;
            const auto dims = entry.at("dims").get<std::vector<std::size_t>>();
            if (dims != p.value.dims()) {
                throw CheckpointError("tensor '" + name + "' has unexpected dims");
            }
            const auto offset = entry.at("offset").get<std::size_t>();
            const auto length = p.value.size() * sizeof(float);
            if (offset > payload_size || payload_size - offset < length) {
                throw TruncatedPayloadError("payload truncated in tensor '" + name + "'");
            }
            const char* src = bytes.data() + payload_start + offset;
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                p.value[i] = static_cast<double>(detail::get_le<float>(src + i * sizeof(float)));
            }
            ensure_finite(p.value, name);
        }
        if (header.contains("payload_bytes") && header.at("payload_bytes").get<std::size_t>() != payload_size) {
            throw TruncatedPayloadError("payload size " + std::to_string(payload_size) + " does not match header (" +
                                        std::to_string(header.at("payload_bytes").get<std::size_t>()) + ")");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
    }
}

inline void save_checkpoint(const Model& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write checkpoint '" + path + "'");
    }
    const auto bytes = serialize_checkpoint(m);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_checkpoint(buf.str());
}

}  // namespace klever
