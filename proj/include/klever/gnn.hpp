#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "klever/error.hpp"
#include "klever/idg.hpp"
#include "klever/kg.hpp"
#include "klever/tensor.hpp"

namespace klever {

/// Row i lists (j, c): node i aggregates c * x_j.
using SparseRows = std::vector<std::vector<std::pair<std::size_t, double>>>;

/// Weights of one convolution layer: one neighbor transform per adjacency
/// (relation) plus the self transform. All are (d_out x d_in).
struct ConvLayer {
    std::vector<const Tensor*> neighbor;
    const Tensor* self = nullptr;
};

struct ConvCache {
    Tensor input;
    std::vector<Tensor> aggregated;
    Tensor pre;
};

struct ConvResult {
    Tensor output;
    std::vector<ConvCache> layers;
};

struct ConvGrads {
    Tensor d_input;
    std::vector<std::vector<Tensor>> d_neighbor;  // [layer][relation]
    std::vector<Tensor> d_self;                   // [layer]
};

namespace detail {

inline Tensor aggregate(const SparseRows& adjacency, const Tensor& x) {
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    const auto n = std::min(adjacency.size(), x.rows());
    for (std::size_t i = 0; i < n; ++i) {
        auto oi = out.row(i);
        for (const auto& [j, c] : adjacency[i]) {
            axpy(c, x.row(j), oi);
        }
    }
    return out;
}

/// d_x[j] += c * d_agg[i] for every (i <- j, c).
inline void scatter_aggregate(const SparseRows& adjacency, const Tensor& d_agg, Tensor& d_x) {
    const auto n = std::min(adjacency.size(), d_agg.rows());
    for (std::size_t i = 0; i < n; ++i) {
        auto gi = d_agg.row(i);
        for (const auto& [j, c] : adjacency[i]) {
            axpy(c, gi, d_x.row(j));
        }
    }
}

}  // namespace detail

/// Generic multi-relation graph convolution with Leaky ReLU:
///   h' = LeakyReLU( sum_r A_r h W_r^T + h W_0^T )
/// Rows of `x` beyond the adjacency size are treated as isolated nodes.
inline ConvResult graph_conv_forward(std::span<const SparseRows> adjacency, const Tensor& x,
                                     std::span<const ConvLayer> layers) {
    ConvResult result;
    Tensor h = x;
    for (const auto& layer : layers) {
        if (layer.neighbor.size() != adjacency.size() || layer.self == nullptr) {
            throw DimensionError("graph_conv_forward: layer has " + std::to_string(layer.neighbor.size()) +
                                 " neighbor weights for " + std::to_string(adjacency.size()) + " relations");
        }
        ConvCache cache;
        cache.pre = linear(h, *layer.self);
        for (std::size_t r = 0; r < adjacency.size(); ++r) {
            Tensor agg = detail::aggregate(adjacency[r], h);
            cache.pre += linear(agg, *layer.neighbor[r]);
            cache.aggregated.push_back(std::move(agg));
        }
        Tensor next = leaky_relu(cache.pre);
        cache.input = std::move(h);
        h = std::move(next);
        result.layers.push_back(std::move(cache));
    }
    result.output = std::move(h);
    return result;
}

inline ConvGrads graph_conv_backward(std::span<const SparseRows> adjacency, const ConvResult& forward,
                                     std::span<const ConvLayer> layers, const Tensor& d_output) {
    ConvGrads grads;
    grads.d_neighbor.resize(layers.size());
    grads.d_self.resize(layers.size());
    Tensor d_h = d_output;
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& cache = forward.layers[l];
        const auto& layer = layers[l];
        Tensor d_pre = d_h;
        leaky_relu_backward(cache.pre, d_pre);

        Tensor d_in = Tensor::matrix(cache.input.rows(), cache.input.cols());
        grads.d_self[l] = Tensor(layer.self->dims());
        accumulate_weight_grad(cache.input, d_pre, grads.d_self[l]);
        accumulate_input_grad(*layer.self, d_pre, d_in);

        for (std::size_t r = 0; r < adjacency.size(); ++r) {
            Tensor d_w(layer.neighbor[r]->dims());
            accumulate_weight_grad(cache.aggregated[r], d_pre, d_w);
            grads.d_neighbor[l].push_back(std::move(d_w));
            Tensor d_agg = Tensor::matrix(cache.input.rows(), cache.input.cols());
            accumulate_input_grad(*layer.neighbor[r], d_pre, d_agg);
            detail::scatter_aggregate(adjacency[r], d_agg, d_in);
        }
        d_h = std::move(d_in);
    }
    grads.d_input = std::move(d_h);
    return grads;
}

// ---------------------------------------------------------------------------
// Item descriptive graph: items and words share one weight pair per layer, so
// the bipartite convolution is the generic one over the stacked node set
// [items; words] with a single adjacency.

/// Unnormalized neighbor sums by default; `normalize` switches to
/// 1/sqrt(deg(u) deg(w)).
inline SparseRows idg_adjacency(const DescriptiveGraph& g, std::size_t item_rows, bool normalize = false) {
    SparseRows rows(item_rows + g.num_words());
    for (std::size_t u = 0; u < g.num_items(); ++u) {
        for (auto w : g.item_neighbors(u)) {
            const double c = normalize ? 1.0 / std::sqrt(static_cast<double>(g.item_neighbors(u).size() *
                                                                             g.word_neighbors(w).size()))
                                       : 1.0;
            rows[u].emplace_back(item_rows + w, c);
            rows[item_rows + w].emplace_back(u, c);
        }
    }
    return rows;
}

struct IdgEncoding {
    Tensor items;  // \hat e_u, one row per item row of the input
    Tensor words;  // \hat e_w
    ConvResult conv;
    std::size_t item_rows = 0;
};

inline Tensor stack_rows(const Tensor& top, const Tensor& bottom) {
    if (top.cols() != bottom.cols() && top.rows() != 0 && bottom.rows() != 0) {
        throw DimensionError("stack_rows: width mismatch");
    }
    const auto cols = top.rows() != 0 ? top.cols() : bottom.cols();
    Tensor out = Tensor::matrix(top.rows() + bottom.rows(), cols);
    std::copy(top.data().begin(), top.data().end(), out.data().begin());
    std::copy(bottom.data().begin(), bottom.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(top.size()));
    return out;
}

inline Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
    Tensor out = Tensor::matrix(end - begin, t.cols());
    std::copy(t.data().begin() + static_cast<std::ptrdiff_t>(begin * t.cols()),
              t.data().begin() + static_cast<std::ptrdiff_t>(end * t.cols()), out.data().begin());
    return out;
}

/// Joint item/word convolution over the descriptive graph:
///   e_u' = LeakyReLU( sum_{w in N(u)} W e_w + W_0 e_u ), symmetrically for words.
/// `item_x` must have at least g.num_items() rows and `word_x` exactly
/// g.num_words() rows; extra item rows are isolated nodes.
inline IdgEncoding idg_gcn_forward(const DescriptiveGraph& g, const Tensor& item_x, const Tensor& word_x,
                                   std::span<const ConvLayer> layers, bool normalize = false) {
    if (layers.empty()) {
        throw Error("idg_gcn_forward: at least one layer is required");
    }
    if (item_x.rows() < g.num_items() || word_x.rows() != g.num_words()) {
        throw DimensionError("idg_gcn_forward: embedding rows do not cover the graph");
    }
    if (item_x.cols() != word_x.cols() && word_x.rows() != 0) {
        throw DimensionError("idg_gcn_forward: item and word widths differ");
    }
    const SparseRows adj = idg_adjacency(g, item_x.rows(), normalize);
    IdgEncoding enc;
    enc.item_rows = item_x.rows();
    enc.conv = graph_conv_forward(std::span<const SparseRows>(&adj, 1), stack_rows(item_x, word_x), layers);
    enc.items = slice_rows(enc.conv.output, 0, enc.item_rows);
    enc.words = slice_rows(enc.conv.output, enc.item_rows, enc.conv.output.rows());
    return enc;
}

struct IdgGrads {
    Tensor d_item_x;
    Tensor d_word_x;
    std::vector<Tensor> d_neighbor;
    std::vector<Tensor> d_self;
};

inline IdgGrads idg_gcn_backward(const DescriptiveGraph& g, const IdgEncoding& enc, std::span<const ConvLayer> layers,
                                 const Tensor& d_items, const Tensor& d_words, bool normalize = false) {
    const SparseRows adj = idg_adjacency(g, enc.item_rows, normalize);
    auto grads = graph_conv_backward(std::span<const SparseRows>(&adj, 1), enc.conv, layers, stack_rows(d_items, d_words));
    IdgGrads out;
    out.d_item_x = slice_rows(grads.d_input, 0, enc.item_rows);
    out.d_word_x = slice_rows(grads.d_input, enc.item_rows, grads.d_input.rows());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        out.d_neighbor.push_back(std::move(grads.d_neighbor[l][0]));
        out.d_self.push_back(std::move(grads.d_self[l]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Knowledge-graph encoders.

/// Per-relation mean aggregation: c = 1 / |N_r(u)|.
inline std::vector<SparseRows> rgcn_adjacency(const RelationalGraph& g) {
    std::vector<SparseRows> out(g.num_relations(), SparseRows(g.num_nodes()));
    for (std::size_t r = 0; r < g.num_relations(); ++r) {
        for (std::size_t u = 0; u < g.num_nodes(); ++u) {
            const auto& in = g.incoming(r, u);
            for (auto v : in) {
                out[r][u].emplace_back(v, 1.0 / static_cast<double>(in.size()));
            }
        }
    }
    return out;
}

/// Symmetric normalization: c = 1 / sqrt(deg_i deg_j).
inline SparseRows word_gcn_adjacency(const WordGraph& g) {
    SparseRows out(g.num_nodes());
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        const auto di = static_cast<double>(g.neighbors(i).size());
        for (auto j : g.neighbors(i)) {
            const auto dj = static_cast<double>(g.neighbors(j).size());
            out[i].emplace_back(j, 1.0 / std::sqrt(di * dj));
        }
    }
    return out;
}

inline ConvResult rgcn_forward(const RelationalGraph& g, const Tensor& x, std::span<const ConvLayer> layers) {
    if (x.rows() != g.num_nodes()) {
        throw DimensionError("rgcn_forward: embedding rows != graph nodes");
    }
    const auto adj = rgcn_adjacency(g);
    return graph_conv_forward(adj, x, layers);
}

inline ConvGrads rgcn_backward(const RelationalGraph& g, const ConvResult& fwd, std::span<const ConvLayer> layers,
                               const Tensor& d_output) {
    const auto adj = rgcn_adjacency(g);
    return graph_conv_backward(adj, fwd, layers, d_output);
}

inline ConvResult word_gcn_forward(const WordGraph& g, const Tensor& x, std::span<const ConvLayer> layers) {
    if (x.rows() != g.num_nodes()) {
        throw DimensionError("word_gcn_forward: embedding rows != graph nodes");
    }
    const auto adj = word_gcn_adjacency(g);
    return graph_conv_forward(std::span<const SparseRows>(&adj, 1), x, layers);
}

inline ConvGrads word_gcn_backward(const WordGraph& g, const ConvResult& fwd, std::span<const ConvLayer> layers,
                                   const Tensor& d_output) {
    const auto adj = word_gcn_adjacency(g);
    return graph_conv_backward(std::span<const SparseRows>(&adj, 1), fwd, layers, d_output);
}

}  // namespace klever
