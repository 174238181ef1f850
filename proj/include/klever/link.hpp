#pragma once

#include <algorithm>
#include <cstddef>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "klever/error.hpp"
#include "klever/gnn.hpp"
#include "klever/idg.hpp"
#include "klever/optim.hpp"
#include "klever/store.hpp"
#include "klever/tensor.hpp"

namespace klever {

/// sigmoid(e_w . e_u)
inline double link_probability(std::span<const double> word, std::span<const double> item) {
    if (word.size() != item.size()) {
        throw DimensionError("link_probability: dimension mismatch");
    }
    return sigmoid(dot(word, item));
}

/// (word_index, item_index) pairs.
using WordItemPair = std::pair<std::size_t, std::size_t>;

struct LinkBatch {
    std::vector<WordItemPair> positives;
    std::vector<WordItemPair> negatives;

    [[nodiscard]] std::size_t size() const noexcept { return positives.size() + negatives.size(); }
};

/// Every edge of the graph as a (word, item) positive.
inline std::vector<WordItemPair> all_positives(const DescriptiveGraph& g) {
    std::vector<WordItemPair> out;
    out.reserve(g.num_edges());
    for (const auto& [u, w] : g.edges()) {
        out.emplace_back(w, u);
    }
    return out;
}

/// For each positive (w, u) draws `ratio` corrupted pairs (w, u') with u'
/// uniform over items and (w, u') not an edge. Each draw may reject at most
/// 100 * |items| candidates.
inline LinkBatch sample_negatives(const DescriptiveGraph& g, std::vector<WordItemPair> positives, std::size_t ratio,
                                  std::mt19937_64& rng) {
    if (ratio < 1) {
        throw Error("sample_negatives: ratio must be >= 1");
    }
    if (g.num_items() == 0) {
        throw SamplingExhaustedError("sample_negatives: graph has no items");
    }
    LinkBatch batch;
    batch.negatives.reserve(positives.size() * ratio);
    std::uniform_int_distribution<std::size_t> pick(0, g.num_items() - 1);
    const std::size_t max_rejections = 100 * g.num_items();
    for (const auto& [w, u] : positives) {
        for (std::size_t k = 0; k < ratio; ++k) {
            std::size_t rejections = 0;
            while (true) {
                const auto candidate = pick(rng);
                if (!g.has_edge(candidate, w)) {
                    batch.negatives.emplace_back(w, candidate);
                    break;
                }
                if (++rejections > max_rejections) {
                    throw SamplingExhaustedError("no non-edge found for word '" + g.words()[w] + "' after " +
                                                 std::to_string(max_rejections) + " rejections");
                }
            }
        }
    }
    batch.positives = std::move(positives);
    return batch;
}

inline LinkBatch sample_negatives(const DescriptiveGraph& g, std::vector<WordItemPair> positives, std::size_t ratio,
                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_negatives(g, std::move(positives), ratio, rng);
}

struct LinkLoss {
    double loss = 0.0;
    Tensor d_items;
    Tensor d_words;
};

/// Binary cross-entropy over positives and negatives, averaged over
/// N = |E+| + |E-|:
///   L = -(1/N) [ sum_{E+} log p + sum_{E-} log(1 - p) ],  p = sigmoid(e_w . e_u).
/// Gradients are with respect to the encoded item and word matrices.
inline LinkLoss link_loss(const LinkBatch& batch, const Tensor& items, const Tensor& words) {
    if (batch.size() == 0) {
        throw Error("link_loss: empty batch");
    }
    LinkLoss out;
    out.d_items = Tensor(items.dims());
    out.d_words = Tensor(words.dims());
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    auto term = [&](const WordItemPair& pair, bool positive) {
        const auto [w, u] = pair;
        const auto ew = words.row(w);
        const auto eu = items.row(u);
        const double s = dot(ew, eu);
        out.loss -= positive ? log_sigmoid(s) : log_sigmoid(-s);
        const double ds = (sigmoid(s) - (positive ? 1.0 : 0.0)) * inv_n;
        axpy(ds, eu, out.d_words.row(w));
        axpy(ds, ew, out.d_items.row(u));
    };
    for (const auto& p : batch.positives) {
        term(p, true);
    }
    for (const auto& n : batch.negatives) {
        term(n, false);
    }
    out.loss *= inv_n;
    return out;
}

/// Encodes the descriptive graph from the store, evaluates `weight * L_link`
/// and accumulates its gradient into the registry.
inline double link_objective(const DescriptiveGraph& g, ParamRegistry& registry, const LinkBatch& batch,
                             bool normalize = false, double weight = 1.0) {
    const auto layers = idg_layers(registry);
    const auto enc = idg_gcn_forward(g, registry.value(param::entity_embedding), registry.value(param::word_embedding),
                                     layers, normalize);
    auto ll = link_loss(batch, enc.items, enc.words);
    ll.d_items *= weight;
    ll.d_words *= weight;
    auto grads = idg_gcn_backward(g, enc, layers, ll.d_items, ll.d_words, normalize);
    registry.grad(param::entity_embedding) += grads.d_item_x;
    registry.grad(param::word_embedding) += grads.d_word_x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        registry.grad(param::idg_neighbor(l)) += grads.d_neighbor[l];
        registry.grad(param::idg_self(l)) += grads.d_self[l];
    }
    return weight * ll.loss;
}

/// Parameters touched by the link objective.
inline std::set<std::string> link_parameters(const ParamRegistry& registry) {
    std::set<std::string> out{param::entity_embedding, param::word_embedding};
    for (std::size_t l = 0; l < count_layers(registry); ++l) {
        out.insert(param::idg_neighbor(l));
        out.insert(param::idg_self(l));
    }
    return out;
}

struct LinkTrainConfig {
    std::size_t epochs = 100;
    double lr = 1e-3;
    std::size_t negative_ratio = 1;
    /// Positive edges per step; 0 means full batch.
    std::size_t batch_size = 0;
    /// Draw fresh negatives every step; otherwise one set is drawn per
    /// positive batch at the start and reused.
    bool resample_negatives = true;
    bool normalize = false;
    std::uint64_t seed = 7;
};

struct LinkTrainReport {
    std::vector<double> epoch_loss;
};

/// Adam on L_link over the descriptive graph.
inline LinkTrainReport train_link_prediction(const DescriptiveGraph& g, ParamRegistry& registry,
                                             const LinkTrainConfig& config) {
    LinkTrainReport report;
    if (config.epochs == 0) {
        return report;
    }
    std::mt19937_64 rng(config.seed);
    AdamState adam(AdamOptions{.lr = config.lr});
    const auto trainable = link_parameters(registry);

    auto edges = all_positives(g);
    if (edges.empty()) {
        throw Error("train_link_prediction: graph has no edges");
    }
    const std::size_t batch = config.batch_size == 0 ? edges.size() : std::min(config.batch_size, edges.size());
    const bool full_batch = batch == edges.size();

    std::vector<LinkBatch> fixed;
    if (!config.resample_negatives && full_batch) {
        fixed.push_back(sample_negatives(g, edges, config.negative_ratio, rng));
    }

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (!full_batch) {
            std::shuffle(edges.begin(), edges.end(), rng);
        }
        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < edges.size(); start += batch) {
            const auto end = std::min(start + batch, edges.size());
            LinkBatch lb = fixed.empty()
                               ? sample_negatives(g, {edges.begin() + static_cast<std::ptrdiff_t>(start),
                                                      edges.begin() + static_cast<std::ptrdiff_t>(end)},
                                                  config.negative_ratio, rng)
                               : fixed.front();
            registry.zero_grad();
            total += link_objective(g, registry, lb, config.normalize);
            adam_step(registry, adam, trainable);
            ++steps;
        }
        report.epoch_loss.push_back(total / static_cast<double>(steps));
    }
    return report;
}

}  // namespace klever
