#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "klever/config.hpp"
#include "klever/corpus.hpp"
#include "klever/gnn.hpp"
#include "klever/idg.hpp"
#include "klever/kg.hpp"
#include "klever/optim.hpp"
#include "klever/store.hpp"
#include "klever/text.hpp"

namespace klever {

/// Everything needed to encode, score and persist: vocabularies, graphs
/// aligned to them, and the parameter registry.
///
/// Index conventions:
///  - items are catalog indices; the first catalog.size() entities are the
///    items, followed by entities that only occur in the item KG;
///  - the word vocabulary lists descriptive-graph words first, then words that
///    only occur in the word KG;
///  - `idg` is reindexed onto (catalog ids, vocabulary).
struct Model {
    TrainingConfig config;
    Catalog catalog;
    Vocabulary vocab;
    std::vector<std::string> entities;
    std::vector<std::string> relations;
    DescriptiveGraph idg;
    RelationalGraph item_kg;
    WordGraph word_kg;
    StopwordSet stopwords = default_stopwords();
    ParamRegistry params;

    [[nodiscard]] std::size_t num_items() const noexcept { return catalog.size(); }
    [[nodiscard]] std::size_t num_words() const noexcept { return vocab.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return config.dim; }
};

namespace detail {

inline void register_head_parameters(ParamRegistry& reg, const TrainingConfig& cfg, std::size_t vocab,
                                     std::mt19937_64& rng) {
    const auto d = cfg.dim;
    const auto da = cfg.effective_attention_dim();
    reg.add(param::fuse_item_weight, init_xavier({d, 2 * d}, rng));
    reg.add(param::fuse_item_bias, Tensor::vector(d));
    reg.add(param::fuse_word_weight, init_xavier({d, 2 * d}, rng));
    reg.add(param::fuse_word_bias, Tensor::vector(d));
    reg.add(param::attn_entity_proj, init_xavier({da, d}, rng));
    reg.add(param::attn_entity_score, init_xavier({da}, rng));
    reg.add(param::attn_word_proj, init_xavier({da, d}, rng));
    reg.add(param::attn_word_score, init_xavier({da}, rng));
    reg.add(param::gate_weight, init_xavier({1, 2 * d}, rng));
    reg.add(param::gate_bias, Tensor::vector(1));
    reg.add(param::bow_state, init_xavier({cfg.gen_dim, 2 * d}, rng));
    reg.add(param::bow_weight, init_xavier({vocab, cfg.gen_dim + 2 * d}, rng));
    reg.add(param::bow_bias, Tensor::vector(vocab));
}

}  // namespace detail

/// Assembles a model over the catalog and descriptive graph, optionally with
/// an item KG (whose entity list must start with the catalog ids, as produced
/// by read_item_kg seeded with them) and a word KG. Parameters are freshly
/// initialized from config.seed.
inline Model build_model(Catalog catalog, const DescriptiveGraph& graph, const TrainingConfig& config,
                         const std::optional<NamedRelationalGraph>& item_kg = std::nullopt,
                         const std::optional<NamedWordGraph>& word_kg = std::nullopt,
                         StopwordSet stopwords = default_stopwords()) {
    config.validate();
    Model m;
    m.config = config;
    m.stopwords = std::move(stopwords);

    for (const auto& w : graph.words()) {
        m.vocab.add(w);
    }
    if (word_kg) {
        for (const auto& w : word_kg->words) {
            m.vocab.add(w);
        }
    }

    std::vector<std::string> item_ids;
    for (const auto& item : catalog.items()) {
        item_ids.push_back(item.item_id);
    }
    m.idg = graph.reindexed(item_ids, m.vocab.words());

    m.entities = item_ids;
    if (item_kg) {
        for (std::size_t i = 0; i < item_ids.size(); ++i) {
            if (i >= item_kg->entities.size() || item_kg->entities[i] != item_ids[i]) {
                throw Error("build_model: item KG entity list must start with the catalog ids");
            }
        }
        m.entities = item_kg->entities;
        m.relations = item_kg->relations;
        m.item_kg = item_kg->graph;
    } else {
        m.item_kg = RelationalGraph(m.entities.size(), 0);
    }

    m.word_kg = WordGraph(m.vocab.size());
    if (word_kg) {
        for (const auto& [a, b] : word_kg->graph.edges()) {
            m.word_kg.add_edge(*m.vocab.find(word_kg->words[a]), *m.vocab.find(word_kg->words[b]));
        }
    }
    m.catalog = std::move(catalog);

    std::mt19937_64 rng(config.seed);
    init_embedding_store(m.params,
                         StoreShape{.entities = m.entities.size(),
                                    .words = m.vocab.size(),
                                    .dim = config.dim,
                                    .layers = config.gnn_layers,
                                    .relations = m.relations.size()},
                         rng);
    detail::register_head_parameters(m.params, config, m.vocab.size(), rng);
    return m;
}

/// Forward pass of every node encoder plus the fusion layer.
struct Encoded {
    IdgEncoding idg;
    ConvResult rgcn;
    ConvResult wgcn;
    Tensor item_input;  // [e_u | \hat e_u], items x 2d
    Tensor word_input;  // [e_w | \hat e_w], words x 2d
    Tensor items;       // fused h_u
    Tensor words;       // fused h_w
};

inline Tensor concat_columns(const Tensor& left, const Tensor& right, std::size_t rows) {
    Tensor out = Tensor::matrix(rows, left.cols() + right.cols());
    for (std::size_t i = 0; i < rows; ++i) {
        auto o = out.row(i);
        auto l = left.row(i);
        auto r = right.row(i);
        std::copy(l.begin(), l.end(), o.begin());
        std::copy(r.begin(), r.end(), o.begin() + static_cast<std::ptrdiff_t>(l.size()));
    }
    return out;
}

/// h = W [e, \hat e] + b for every row.
inline Tensor fuse_rows(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    Tensor out = linear(input, weight);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        axpy(1.0, bias.data(), out.row(i));
    }
    return out;
}

inline Encoded encode(const Model& m) {
    const auto& p = m.params;
    Encoded e;
    const auto idg_l = idg_layers(p);
    const auto rgcn_l = rgcn_layers(p, m.relations.size());
    const auto wgcn_l = wgcn_layers(p);
    e.idg = idg_gcn_forward(m.idg, p.value(param::entity_embedding), p.value(param::word_embedding), idg_l,
                            m.config.idg_normalize);
    e.rgcn = rgcn_forward(m.item_kg, p.value(param::entity_embedding), rgcn_l);
    e.wgcn = word_gcn_forward(m.word_kg, p.value(param::word_embedding), wgcn_l);
    e.item_input = concat_columns(e.rgcn.output, e.idg.items, m.num_items());
    e.word_input = concat_columns(e.wgcn.output, e.idg.words, m.num_words());
    e.items = fuse_rows(e.item_input, p.value(param::fuse_item_weight), p.value(param::fuse_item_bias));
    e.words = fuse_rows(e.word_input, p.value(param::fuse_word_weight), p.value(param::fuse_word_bias));
    return e;
}

/// Gradients flowing into an Encoded: w.r.t. the fused rows and, for the link
/// objective, directly w.r.t. the descriptive-graph encodings.
struct EncodedGrads {
    Tensor items;
    Tensor words;
    Tensor idg_items;
    Tensor idg_words;

    EncodedGrads() = default;
    explicit EncodedGrads(const Encoded& e)
        : items(e.items.dims()), words(e.words.dims()), idg_items(e.idg.items.dims()), idg_words(e.idg.words.dims()) {}
};

/// Back-propagates through fusion and the three encoders into m.params grads.
inline void backward_encoders(Model& m, const Encoded& e, const EncodedGrads& g) {
    auto& p = m.params;
    const auto d = m.dim();

    Tensor d_entity_from_rgcn = Tensor::matrix(m.entities.size(), d);
    Tensor d_idg_items = g.idg_items;
    Tensor d_wgcn_out = Tensor::matrix(m.num_words(), d);
    Tensor d_idg_words = g.idg_words;

    auto fuse_back = [&](const Tensor& input, const Tensor& d_out, const std::string& wname, const std::string& bname,
                         Tensor& d_kg, Tensor& d_idg) {
        accumulate_weight_grad(input, d_out, p.grad(wname));
        auto& db = p.grad(bname);
        for (std::size_t i = 0; i < d_out.rows(); ++i) {
            axpy(1.0, d_out.row(i), db.data());
        }
        Tensor d_in = Tensor::matrix(input.rows(), input.cols());
        accumulate_input_grad(p.value(wname), d_out, d_in);
        for (std::size_t i = 0; i < d_in.rows(); ++i) {
            auto row = d_in.row(i);
            axpy(1.0, row.subspan(0, d), d_kg.row(i));
            axpy(1.0, row.subspan(d, d), d_idg.row(i));
        }
    };
    fuse_back(e.item_input, g.items, param::fuse_item_weight, param::fuse_item_bias, d_entity_from_rgcn, d_idg_items);
    fuse_back(e.word_input, g.words, param::fuse_word_weight, param::fuse_word_bias, d_wgcn_out, d_idg_words);

    const auto idg_l = idg_layers(p);
    auto ig = idg_gcn_backward(m.idg, e.idg, idg_l, d_idg_items, d_idg_words, m.config.idg_normalize);
    p.grad(param::entity_embedding) += ig.d_item_x;
    p.grad(param::word_embedding) += ig.d_word_x;
    for (std::size_t l = 0; l < idg_l.size(); ++l) {
        p.grad(param::idg_neighbor(l)) += ig.d_neighbor[l];
        p.grad(param::idg_self(l)) += ig.d_self[l];
    }

    const auto rgcn_l = rgcn_layers(p, m.relations.size());
    auto rg = rgcn_backward(m.item_kg, e.rgcn, rgcn_l, d_entity_from_rgcn);
    p.grad(param::entity_embedding) += rg.d_input;
    for (std::size_t l = 0; l < rgcn_l.size(); ++l) {
        p.grad(param::rgcn_self(l)) += rg.d_self[l];
        for (std::size_t r = 0; r < m.relations.size(); ++r) {
            p.grad(param::rgcn_relation(l, r)) += rg.d_neighbor[l][r];
        }
    }

    const auto wgcn_l = wgcn_layers(p);
    auto wg = word_gcn_backward(m.word_kg, e.wgcn, wgcn_l, d_wgcn_out);
    p.grad(param::word_embedding) += wg.d_input;
    for (std::size_t l = 0; l < wgcn_l.size(); ++l) {
        p.grad(param::wgcn_neighbor(l)) += wg.d_neighbor[l][0];
        p.grad(param::wgcn_self(l)) += wg.d_self[l];
    }
}

}  // namespace klever
