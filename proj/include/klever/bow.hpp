#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "klever/corpus.hpp"
#include "klever/error.hpp"
#include "klever/idg.hpp"
#include "klever/model.hpp"
#include "klever/optim.hpp"
#include "klever/recommender.hpp"
#include "klever/tensor.hpp"

namespace klever {

// The dialog head below only covers the knowledge-guided bag-of-words part of
// generation. Decoder hidden states come from a small stand-in,
//   s_j = tanh( W_s [x_{j-1}, c] ),
// where x_{j-1} is the fused embedding of the previous response token (zero
// at j = 1) and c the mean fused embedding of the context words.

struct DecoderState {
    Tensor inputs;  // N x 2d, [x_{j-1}, c]
    Tensor states;  // N x d_gen, s_j

    [[nodiscard]] std::size_t length() const noexcept { return states.rows(); }
};

/// `response` holds vocabulary indices of the ground-truth tokens.
inline DecoderState standin_decoder_states(const ConversationContext& ctx, std::span<const std::size_t> response,
                                           const Tensor& word_vectors, const Tensor& state_weight) {
    if (response.empty()) {
        throw Error("standin_decoder_states: empty response");
    }
    const auto d = word_vectors.cols();
    if (state_weight.cols() != 2 * d) {
        throw DimensionError("standin_decoder_states: W_s width must be 2d");
    }
    std::vector<double> context_mean(d, 0.0);
    for (auto w : ctx.words) {
        axpy(1.0 / static_cast<double>(ctx.words.size()), word_vectors.row(w), context_mean);
    }
    DecoderState st;
    st.inputs = Tensor::matrix(response.size(), 2 * d);
    for (std::size_t j = 0; j < response.size(); ++j) {
        auto in = st.inputs.row(j);
        if (j > 0) {
            auto prev = word_vectors.row(response[j - 1]);
            std::copy(prev.begin(), prev.end(), in.begin());
        }
        std::copy(context_mean.begin(), context_mean.end(), in.begin() + static_cast<std::ptrdiff_t>(d));
    }
    st.states = linear(st.inputs, state_weight);
    for (auto& v : st.states.data()) {
        v = std::tanh(v);
    }
    return st;
}

/// a_j = W_bow [s_j, p_u, p_w] + b_bow
inline std::vector<double> bow_scores(std::span<const double> state, std::span<const double> entity_pref,
                                      std::span<const double> word_pref, const Tensor& weight,
                                      std::span<const double> bias) {
    if (weight.cols() != state.size() + entity_pref.size() + word_pref.size() || bias.size() != weight.rows()) {
        throw DimensionError("bow_scores: dimension mismatch");
    }
    std::vector<double> out(weight.rows());
    const auto ns = state.size();
    const auto ne = entity_pref.size();
    for (std::size_t v = 0; v < weight.rows(); ++v) {
        auto row = weight.row(v);
        out[v] = dot(row.subspan(0, ns), state) + dot(row.subspan(ns, ne), entity_pref) +
                 dot(row.subspan(ns + ne), word_pref) + bias[v];
    }
    return out;
}

/// P_bow = sigmoid( sum_j a_j ), elementwise.
inline std::vector<double> bow_distribution(const std::vector<std::vector<double>>& scores) {
    if (scores.empty()) {
        throw Error("bow_distribution: no positions");
    }
    std::vector<double> total(scores.front().size(), 0.0);
    for (const auto& a : scores) {
        axpy(1.0, a, total);
    }
    for (auto& v : total) {
        v = sigmoid(v);
    }
    return total;
}

/// N_1(u) for every context entity, with multiplicity. Words are
/// vocabulary indices of the model's aligned graph.
inline std::vector<std::size_t> context_neighbor_words(const ConversationContext& ctx, const DescriptiveGraph& idg) {
    std::vector<std::size_t> out;
    for (auto u : ctx.entities) {
        if (u >= idg.num_items()) {
            throw NotFoundError("bow_loss: context entity " + std::to_string(u) + " not in graph");
        }
        const auto& n = idg.item_neighbors(u);
        out.insert(out.end(), n.begin(), n.end());
    }
    return out;
}

/// -sum_{u in context} sum_{w in N_1(u)} log P_bow(w)
inline double bow_loss(std::span<const double> p_bow, std::span<const std::size_t> neighbor_words) {
    double loss = 0.0;
    for (auto w : neighbor_words) {
        loss -= std::log(std::max(p_bow[w], std::numeric_limits<double>::min()));
    }
    return loss;
}

inline double bow_loss(std::span<const double> p_bow, const ConversationContext& ctx, const DescriptiveGraph& idg) {
    return bow_loss(p_bow, context_neighbor_words(ctx, idg));
}

/// Softmax over a_j.
inline std::vector<double> pr3_distribution(std::span<const double> scores) { return softmax(scores); }

// ---------------------------------------------------------------------------
// Objective and training.

struct BowSample {
    ConversationContext context;
    std::vector<std::size_t> response;  // vocabulary indices
};

/// Frozen recommender-side inputs of one sample.
struct BowInputs {
    std::vector<double> entity_pref;
    std::vector<double> word_pref;
    std::vector<std::size_t> neighbors;
};

inline BowInputs bow_inputs(const BowSample& sample, const Recommender& rec) {
    auto pref = rec.preference(sample.context);
    return {std::move(pref.entity), std::move(pref.word), context_neighbor_words(sample.context, rec.model().idg)};
}

struct BowObjective {
    double bow = 0.0;  // L_bow
    double ce = 0.0;   // sum_j -log Pr3(y_j)
    [[nodiscard]] double total(double lambda_bow) const { return lambda_bow * bow + ce; }
};

/// lambda_bow * L_bow + sum_j CE(Pr3(a_j), y_j), gradients into bow.Ws,
/// bow.W and bow.b. `word_vectors` are the (frozen) fused word embeddings.
inline BowObjective bow_objective(ParamRegistry& p, const Tensor& word_vectors, const BowSample& sample,
                                  const BowInputs& in, double lambda_bow, double scale = 1.0) {
    const auto& ws = p.value(param::bow_state);
    const auto& wb = p.value(param::bow_weight);
    const auto& bb = p.value(param::bow_bias);
    const auto st = standin_decoder_states(sample.context, sample.response, word_vectors, ws);
    const auto n = st.length();
    const auto gen = ws.rows();
    const auto vocab = wb.rows();

    std::vector<std::vector<double>> scores(n);
    for (std::size_t j = 0; j < n; ++j) {
        scores[j] = bow_scores(st.states.row(j), in.entity_pref, in.word_pref, wb, bb.data());
    }
    const auto p_bow = bow_distribution(scores);

    BowObjective obj;
    obj.bow = bow_loss(p_bow, in.neighbors);

    // d/dS of lambda * L_bow, S = sum_j a_j.
    std::vector<double> d_sum(vocab, 0.0);
    for (auto w : in.neighbors) {
        d_sum[w] -= scale * lambda_bow * (1.0 - p_bow[w]);
    }

    auto& g_ws = p.grad(param::bow_state);
    auto& g_wb = p.grad(param::bow_weight);
    auto g_bb = p.grad(param::bow_bias).data();
    std::vector<double> features(wb.cols());
    for (std::size_t j = 0; j < n; ++j) {
        const auto probs = pr3_distribution(scores[j]);
        const auto y = sample.response[j];
        obj.ce -= std::log(std::max(probs[y], std::numeric_limits<double>::min()));

        std::vector<double> d_a(d_sum);
        for (std::size_t v = 0; v < vocab; ++v) {
            d_a[v] += scale * (probs[v] - (v == y ? 1.0 : 0.0));
        }

        const auto s = st.states.row(j);
        std::copy(s.begin(), s.end(), features.begin());
        std::copy(in.entity_pref.begin(), in.entity_pref.end(), features.begin() + static_cast<std::ptrdiff_t>(gen));
        std::copy(in.word_pref.begin(), in.word_pref.end(),
                  features.begin() + static_cast<std::ptrdiff_t>(gen + in.entity_pref.size()));

        std::vector<double> d_state(gen, 0.0);
        for (std::size_t v = 0; v < vocab; ++v) {
            if (d_a[v] == 0.0) {
                continue;
            }
            axpy(d_a[v], features, g_wb.row(v));
            g_bb[v] += d_a[v];
            axpy(d_a[v], wb.row(v).subspan(0, gen), d_state);
        }
        const auto x = st.inputs.row(j);
        for (std::size_t k = 0; k < gen; ++k) {
            const double d_pre = d_state[k] * (1.0 - s[k] * s[k]);
            axpy(d_pre, x, g_ws.row(k));
        }
    }
    obj.bow *= scale;
    obj.ce *= scale;
    return obj;
}

/// P_bow of one (context, response) sample under the current head.
inline std::vector<double> sample_bow_distribution(const Recommender& rec, const BowSample& sample) {
    const auto& p = rec.model().params;
    const auto pref = rec.preference(sample.context);
    const auto st = standin_decoder_states(sample.context, sample.response, rec.encoded().words,
                                           p.value(param::bow_state));
    std::vector<std::vector<double>> scores;
    for (std::size_t j = 0; j < st.length(); ++j) {
        scores.push_back(bow_scores(st.states.row(j), pref.entity, pref.word, p.value(param::bow_weight),
                                    p.value(param::bow_bias).data()));
    }
    return bow_distribution(scores);
}

struct NeighborGap {
    double neighbor = 0.0;      // mean P_bow over IDG neighbors of context entities
    double non_neighbor = 0.0;  // mean P_bow over every other vocabulary word
    std::size_t samples = 0;    // samples with at least one neighbor word
    [[nodiscard]] double gap() const { return neighbor - non_neighbor; }
};

/// Per-sample neighbor / non-neighbor means, averaged over samples whose
/// context entities have IDG neighbors.
inline NeighborGap bow_neighbor_gap(const Recommender& rec, const std::vector<BowSample>& samples) {
    NeighborGap out;
    const auto vocab = rec.model().num_words();
    for (const auto& s : samples) {
        const auto nbrs = context_neighbor_words(s.context, rec.model().idg);
        std::set<std::size_t> unique(nbrs.begin(), nbrs.end());
        if (unique.empty() || unique.size() == vocab) {
            continue;
        }
        const auto p_bow = sample_bow_distribution(rec, s);
        double in = 0.0;
        double rest = 0.0;
        for (std::size_t w = 0; w < vocab; ++w) {
            (unique.count(w) != 0 ? in : rest) += p_bow[w];
        }
        out.neighbor += in / static_cast<double>(unique.size());
        out.non_neighbor += rest / static_cast<double>(vocab - unique.size());
        ++out.samples;
    }
    if (out.samples > 0) {
        out.neighbor /= static_cast<double>(out.samples);
        out.non_neighbor /= static_cast<double>(out.samples);
    }
    return out;
}

inline std::set<std::string> bow_parameters() { return {param::bow_state, param::bow_weight, param::bow_bias}; }

struct BowTrainReport {
    std::vector<double> epoch_loss;
};

/// Trains only the bag-of-words head; encoder and recommender weights stay
/// frozen, so their outputs are computed once up front.
inline BowTrainReport train_bow_head(Model& m, const std::vector<BowSample>& dataset, std::size_t epochs,
                                     double lambda_bow) {
    BowTrainReport report;
    if (epochs == 0 || dataset.empty()) {
        return report;
    }
    const Recommender frozen(m);
    std::vector<BowInputs> inputs;
    inputs.reserve(dataset.size());
    for (const auto& s : dataset) {
        inputs.push_back(bow_inputs(s, frozen));
    }
    const Tensor& words = frozen.encoded().words;

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(m.config.seed ^ 0xb0b0b0b0ULL);
    AdamState adam(AdamOptions{.lr = m.config.lr});
    const auto trainable = bow_parameters();
    const auto batch = m.config.batch_size;

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const auto end = std::min(start + batch, order.size());
            const double scale = 1.0 / static_cast<double>(end - start);
            m.params.zero_grad();
            double loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                loss += bow_objective(m.params, words, dataset[order[i]], inputs[order[i]], lambda_bow, scale)
                            .total(lambda_bow);
            }
            adam_step(m.params, adam, trainable);
            total += loss;
            ++steps;
        }
        report.epoch_loss.push_back(total / static_cast<double>(steps));
    }
    return report;
}

/// P_bow from a single stand-in decoder state (previous token = none), used
/// to surface the words the head associates with the current context.
inline std::vector<double> context_bow_distribution(const Recommender& rec, const ConversationContext& ctx) {
    const auto& p = rec.model().params;
    const auto pref = rec.preference(ctx);
    const std::size_t dummy = 0;
    if (rec.model().num_words() == 0) {
        return {};
    }
    const auto st = standin_decoder_states(ctx, std::span<const std::size_t>(&dummy, 1), rec.encoded().words,
                                           p.value(param::bow_state));
    const auto a = bow_scores(st.states.row(0), pref.entity, pref.word, p.value(param::bow_weight),
                              p.value(param::bow_bias).data());
    return bow_distribution({a});
}

}  // namespace klever
