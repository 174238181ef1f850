#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "klever/gnn.hpp"
#include "klever/optim.hpp"
#include "klever/tensor.hpp"

namespace klever {

/// Parameter names shared by every module that reads or trains the model.
namespace param {

inline const std::string entity_embedding = "emb.entity";
inline const std::string word_embedding = "emb.word";

inline std::string idg_neighbor(std::size_t layer) { return "idg.W." + std::to_string(layer); }
inline std::string idg_self(std::size_t layer) { return "idg.W0." + std::to_string(layer); }
inline std::string rgcn_relation(std::size_t layer, std::size_t relation) {
    return "rgcn.W." + std::to_string(layer) + "." + std::to_string(relation);
}
inline std::string rgcn_self(std::size_t layer) { return "rgcn.W0." + std::to_string(layer); }
inline std::string wgcn_neighbor(std::size_t layer) { return "wgcn.W." + std::to_string(layer); }
inline std::string wgcn_self(std::size_t layer) { return "wgcn.W0." + std::to_string(layer); }

inline const std::string fuse_item_weight = "fuse.item.W";
inline const std::string fuse_item_bias = "fuse.item.b";
inline const std::string fuse_word_weight = "fuse.word.W";
inline const std::string fuse_word_bias = "fuse.word.b";
inline const std::string attn_entity_proj = "attn.entity.W1";
inline const std::string attn_entity_score = "attn.entity.w2";
inline const std::string attn_word_proj = "attn.word.W1";
inline const std::string attn_word_score = "attn.word.w2";
inline const std::string gate_weight = "gate.W";
inline const std::string gate_bias = "gate.b";
inline const std::string bow_state = "bow.Ws";
inline const std::string bow_weight = "bow.W";
inline const std::string bow_bias = "bow.b";

}  // namespace param

/// Sizes of the embedding tables and encoder stacks.
struct StoreShape {
    std::size_t entities = 0;  // catalog items first, then other KG entities
    std::size_t words = 0;     // descriptive-graph words first, then word-KG words
    std::size_t dim = 128;
    std::size_t layers = 1;
    std::size_t relations = 0;
};

/// Registers base embeddings and the weights of the three graph encoders.
inline void init_embedding_store(ParamRegistry& registry, const StoreShape& shape, std::mt19937_64& rng) {
    const auto d = shape.dim;
    registry.add(param::entity_embedding, init_xavier({shape.entities, d}, rng));
    registry.add(param::word_embedding, init_xavier({shape.words, d}, rng));
    for (std::size_t l = 0; l < shape.layers; ++l) {
        registry.add(param::idg_neighbor(l), init_xavier({d, d}, rng));
        registry.add(param::idg_self(l), init_xavier({d, d}, rng));
        for (std::size_t r = 0; r < shape.relations; ++r) {
            registry.add(param::rgcn_relation(l, r), init_xavier({d, d}, rng));
        }
        registry.add(param::rgcn_self(l), init_xavier({d, d}, rng));
        registry.add(param::wgcn_neighbor(l), init_xavier({d, d}, rng));
        registry.add(param::wgcn_self(l), init_xavier({d, d}, rng));
    }
}

inline std::size_t count_layers(const ParamRegistry& registry) {
    std::size_t l = 0;
    while (registry.contains(param::idg_self(l))) {
        ++l;
    }
    return l;
}

inline std::vector<ConvLayer> idg_layers(const ParamRegistry& registry) {
    std::vector<ConvLayer> out;
    for (std::size_t l = 0; l < count_layers(registry); ++l) {
        out.push_back({{&registry.value(param::idg_neighbor(l))}, &registry.value(param::idg_self(l))});
    }
    return out;
}

inline std::vector<ConvLayer> rgcn_layers(const ParamRegistry& registry, std::size_t relations) {
    std::vector<ConvLayer> out;
    for (std::size_t l = 0; l < count_layers(registry); ++l) {
        ConvLayer layer;
        for (std::size_t r = 0; r < relations; ++r) {
            layer.neighbor.push_back(&registry.value(param::rgcn_relation(l, r)));
        }
        layer.self = &registry.value(param::rgcn_self(l));
        out.push_back(std::move(layer));
    }
    return out;
}

inline std::vector<ConvLayer> wgcn_layers(const ParamRegistry& registry) {
    std::vector<ConvLayer> out;
    for (std::size_t l = 0; l < count_layers(registry); ++l) {
        out.push_back({{&registry.value(param::wgcn_neighbor(l))}, &registry.value(param::wgcn_self(l))});
    }
    return out;
}

}  // namespace klever
