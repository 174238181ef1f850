#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "klever/corpus.hpp"
#include "klever/error.hpp"
#include "klever/link.hpp"
#include "klever/model.hpp"
#include "klever/optim.hpp"
#include "klever/tensor.hpp"

namespace klever {

enum class Side { item, word };

/// h = W [e, \hat e] + b; linear, no activation.
inline std::vector<double> fuse(std::span<const double> base, std::span<const double> idg, const Tensor& weight,
                                std::span<const double> bias) {
    if (base.size() != idg.size() || weight.cols() != base.size() + idg.size() || bias.size() != weight.rows()) {
        throw DimensionError("fuse: dimension mismatch");
    }
    std::vector<double> input(base.begin(), base.end());
    input.insert(input.end(), idg.begin(), idg.end());
    auto out = matvec(weight, input);
    axpy(1.0, bias, out);
    return out;
}

inline std::vector<double> fuse(std::span<const double> base, std::span<const double> idg, const ParamRegistry& p,
                                Side side) {
    const auto& w = p.value(side == Side::item ? param::fuse_item_weight : param::fuse_word_weight);
    const auto& b = p.value(side == Side::item ? param::fuse_item_bias : param::fuse_word_bias);
    return fuse(base, idg, w, b.data());
}

// ---------------------------------------------------------------------------
// Self-attention pooling: alpha = softmax_i( w2 . tanh(W1 v_i) ), out = sum alpha_i v_i.

struct AttentionParams {
    const Tensor* proj = nullptr;   // W1, (d_a x d)
    const Tensor* score = nullptr;  // w2, (d_a)
};

struct AttentionPool {
    std::vector<double> output;
    std::vector<double> weights;   // alpha
    Tensor hidden;                 // tanh(W1 v_i), one row per input
    std::vector<std::size_t> rows;  // source rows of the pooled vectors
};

/// Pools `rows` of `vectors`. Throws on an empty selection.
inline AttentionPool attention_pool(const Tensor& vectors, std::span<const std::size_t> rows,
                                    const AttentionParams& params) {
    if (rows.empty()) {
        throw Error("attention_pool: empty context");
    }
    const auto& w1 = *params.proj;
    const auto& w2 = *params.score;
    AttentionPool out;
    out.rows.assign(rows.begin(), rows.end());
    out.hidden = Tensor::matrix(rows.size(), w1.rows());
    std::vector<double> scores(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto z = matvec(w1, vectors.row(rows[i]));
        for (auto& v : z) {
            v = std::tanh(v);
        }
        std::copy(z.begin(), z.end(), out.hidden.row(i).begin());
        scores[i] = dot(w2.data(), z);
    }
    out.weights = softmax(scores);
    out.output.assign(vectors.cols(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        axpy(out.weights[i], vectors.row(rows[i]), out.output);
    }
    return out;
}

/// Convenience for a plain list of vectors.
inline std::vector<double> attention_pool(const std::vector<std::vector<double>>& vectors, const AttentionParams& params) {
    if (vectors.empty()) {
        throw Error("attention_pool: empty context");
    }
    Tensor m = Tensor::matrix(vectors.size(), vectors.front().size());
    std::vector<std::size_t> rows(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].size() != m.cols()) {
            throw DimensionError("attention_pool: ragged input");
        }
        std::copy(vectors[i].begin(), vectors[i].end(), m.row(i).begin());
        rows[i] = i;
    }
    return attention_pool(m, rows, params).output;
}

/// Accumulates gradients of the pooled output into d_vectors (rows of the
/// source matrix) and the attention parameters.
inline void attention_pool_backward(const Tensor& vectors, const AttentionPool& pool, const AttentionParams& params,
                                    std::span<const double> d_output, Tensor& d_vectors, Tensor& d_proj,
                                    Tensor& d_score) {
    const auto& w1 = *params.proj;
    const auto& w2 = *params.score;
    const auto n = pool.rows.size();
    std::vector<double> d_alpha(n);
    for (std::size_t i = 0; i < n; ++i) {
        d_alpha[i] = dot(d_output, vectors.row(pool.rows[i]));
    }
    const double mean = std::inner_product(pool.weights.begin(), pool.weights.end(), d_alpha.begin(), 0.0);
    std::vector<double> d_hidden_pre(w1.rows());
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = pool.rows[i];
        axpy(pool.weights[i], d_output, d_vectors.row(row));
        const double ds = pool.weights[i] * (d_alpha[i] - mean);
        if (ds == 0.0) {
            continue;
        }
        const auto z = pool.hidden.row(i);
        axpy(ds, z, d_score.data());
        for (std::size_t a = 0; a < w1.rows(); ++a) {
            d_hidden_pre[a] = ds * w2[a] * (1.0 - z[a] * z[a]);
            axpy(d_hidden_pre[a], vectors.row(row), d_proj.row(a));
            axpy(d_hidden_pre[a], w1.row(a), d_vectors.row(row));
        }
    }
}

// ---------------------------------------------------------------------------
// Gated user preference.

struct Preference {
    std::vector<double> user;      // u
    std::vector<double> entity;    // p_u (zero when no entities)
    std::vector<double> word;      // p_w (zero when no words)
    double beta = 0.5;
    std::optional<AttentionPool> entity_pool;
    std::optional<AttentionPool> word_pool;
};

inline AttentionParams entity_attention(const ParamRegistry& p) {
    return {&p.value(param::attn_entity_proj), &p.value(param::attn_entity_score)};
}
inline AttentionParams word_attention(const ParamRegistry& p) {
    return {&p.value(param::attn_word_proj), &p.value(param::attn_word_score)};
}

/// beta = sigmoid(W_gate [p_u, p_w] + b_gate);  u = beta p_u + (1 - beta) p_w.
inline void apply_gate(Preference& pref, const Tensor& gate_weight, double gate_bias) {
    const auto d = pref.entity.size();
    const auto gw = gate_weight.data();
    const double g = dot(gw.subspan(0, d), pref.entity) + dot(gw.subspan(d, d), pref.word) + gate_bias;
    pref.beta = sigmoid(g);
    pref.user.assign(d, 0.0);
    axpy(pref.beta, pref.entity, pref.user);
    axpy(1.0 - pref.beta, pref.word, pref.user);
}

inline Preference user_preference(const ConversationContext& ctx, const Encoded& enc, const ParamRegistry& p) {
    const auto d = enc.items.cols();
    Preference pref;
    pref.entity.assign(d, 0.0);
    pref.word.assign(d, 0.0);
    if (!ctx.entities.empty()) {
        pref.entity_pool = attention_pool(enc.items, ctx.entities, entity_attention(p));
        pref.entity = pref.entity_pool->output;
    }
    if (!ctx.words.empty()) {
        pref.word_pool = attention_pool(enc.words, ctx.words, word_attention(p));
        pref.word = pref.word_pool->output;
    }
    apply_gate(pref, p.value(param::gate_weight), p.value(param::gate_bias)[0]);
    return pref;
}

/// Back-propagates d(loss)/du through the gate and both pools.
inline void user_preference_backward(const Preference& pref, const Encoded& enc, ParamRegistry& p,
                                     std::span<const double> d_user, EncodedGrads& g) {
    const auto d = pref.user.size();
    const auto gw = p.value(param::gate_weight).data();
    std::vector<double> diff(pref.entity);
    axpy(-1.0, pref.word, diff);
    const double d_beta = dot(d_user, diff);
    const double d_gate = d_beta * pref.beta * (1.0 - pref.beta);

    std::vector<double> d_entity(d, 0.0);
    std::vector<double> d_word(d, 0.0);
    axpy(pref.beta, d_user, d_entity);
    axpy(d_gate, gw.subspan(0, d), d_entity);
    axpy(1.0 - pref.beta, d_user, d_word);
    axpy(d_gate, gw.subspan(d, d), d_word);

    auto dgw = p.grad(param::gate_weight).data();
    axpy(d_gate, pref.entity, dgw.subspan(0, d));
    axpy(d_gate, pref.word, dgw.subspan(d, d));
    p.grad(param::gate_bias)[0] += d_gate;

    if (pref.entity_pool) {
        attention_pool_backward(enc.items, *pref.entity_pool, entity_attention(p), d_entity, g.items,
                                p.grad(param::attn_entity_proj), p.grad(param::attn_entity_score));
    }
    if (pref.word_pool) {
        attention_pool_backward(enc.words, *pref.word_pool, word_attention(p), d_word, g.words,
                                p.grad(param::attn_word_proj), p.grad(param::attn_word_score));
    }
}

/// logits_i = u . h_i
inline std::vector<double> item_logits(std::span<const double> user, const Tensor& items) {
    std::vector<double> out(items.rows());
    for (std::size_t i = 0; i < items.rows(); ++i) {
        out[i] = dot(user, items.row(i));
    }
    return out;
}

/// P_rec = softmax(logits)
inline std::vector<double> score_items(std::span<const double> user, const Tensor& items) {
    return softmax(item_logits(user, items));
}

// ---------------------------------------------------------------------------
// Ranking.

struct Recommendation {
    std::size_t item = 0;
    double probability = 0.0;
};

/// Top-k by probability descending, ties by index ascending, skipping
/// `excluded` indices.
inline std::vector<Recommendation> top_k(std::span<const double> probabilities, std::size_t k,
                                         std::span<const std::size_t> excluded = {}) {
    if (k < 1) {
        throw Error("top_k: k must be >= 1");
    }
    std::vector<char> skip(probabilities.size(), 0);
    for (auto e : excluded) {
        if (e < skip.size()) {
            skip[e] = 1;
        }
    }
    std::vector<std::size_t> order;
    order.reserve(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        if (skip[i] == 0) {
            order.push_back(i);
        }
    }
    const auto n = std::min(k, order.size());
    auto cmp = [&](std::size_t a, std::size_t b) {
        if (probabilities[a] != probabilities[b]) {
            return probabilities[a] > probabilities[b];
        }
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), cmp);
    std::vector<Recommendation> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({order[i], probabilities[order[i]]});
    }
    return out;
}

/// Immutable scoring view over a model: the fused node matrices are computed
/// once and shared by any number of concurrent callers.
class Recommender {
public:
    explicit Recommender(const Model& model) : model_(&model), encoded_(encode(model)) {}

    [[nodiscard]] const Model& model() const noexcept { return *model_; }
    [[nodiscard]] const Encoded& encoded() const noexcept { return encoded_; }

    [[nodiscard]] Preference preference(const ConversationContext& ctx) const {
        return user_preference(ctx, encoded_, model_->params);
    }

    [[nodiscard]] std::vector<double> logits(const ConversationContext& ctx) const {
        return item_logits(preference(ctx).user, encoded_.items);
    }

    [[nodiscard]] std::vector<double> probabilities(const ConversationContext& ctx) const {
        return score_items(preference(ctx).user, encoded_.items);
    }

    /// Items already in the context are never recommended.
    [[nodiscard]] std::vector<Recommendation> recommend_topk(const ConversationContext& ctx, std::size_t k) const {
        return top_k(probabilities(ctx), k, ctx.entities);
    }

private:
    const Model* model_;
    Encoded encoded_;
};

// ---------------------------------------------------------------------------
// Training objective.

struct RecExample {
    ConversationContext context;
    std::size_t target = 0;
};

struct ObjectiveValue {
    double rec = 0.0;
    double link = 0.0;
    [[nodiscard]] double total(double lambda_link) const { return rec + lambda_link * link; }
};

/// scale * sum_examples -log P_rec(target) + lambda_link * L_link(batch),
/// with every gradient accumulated into m.params. `link` may be null.
inline ObjectiveValue recommendation_objective(Model& m, std::span<const RecExample> examples, const LinkBatch* link,
                                               double lambda_link, double scale = 1.0) {
    const Encoded enc = encode(m);
    EncodedGrads g(enc);
    ObjectiveValue value;

    for (const auto& ex : examples) {
        if (ex.target >= m.num_items()) {
            throw NotFoundError("rec_loss: target index " + std::to_string(ex.target) + " not in catalog");
        }
        const auto pref = user_preference(ex.context, enc, m.params);
        const auto probs = score_items(pref.user, enc.items);
        value.rec -= scale * std::log(std::max(probs[ex.target], 1e-300));

        std::vector<double> d_user(m.dim(), 0.0);
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const double dl = scale * (probs[i] - (i == ex.target ? 1.0 : 0.0));
            axpy(dl, pref.user, g.items.row(i));
            axpy(dl, enc.items.row(i), d_user);
        }
        user_preference_backward(pref, enc, m.params, d_user, g);
    }

    if (link != nullptr && lambda_link > 0.0 && link->size() > 0) {
        auto ll = link_loss(*link, enc.idg.items, enc.idg.words);
        value.link = ll.loss;
        ll.d_items *= lambda_link;
        ll.d_words *= lambda_link;
        g.idg_items += ll.d_items;
        g.idg_words += ll.d_words;
    }
    backward_encoders(m, enc, g);
    return value;
}

/// Parameters trained in the recommendation phase (everything except the
/// bag-of-words head).
inline std::set<std::string> recommendation_parameters(const ParamRegistry& p) {
    std::set<std::string> out;
    for (const auto& name : p.names()) {
        if (name.rfind("bow.", 0) != 0) {
            out.insert(name);
        }
    }
    return out;
}

struct RecTrainReport {
    std::vector<double> epoch_loss;  // mean rec NLL + lambda_1 * link per step
    std::vector<double> epoch_rec;
    std::vector<double> epoch_link;
};

/// Joint training of the recommender and the link objective. Each step uses
/// a mini-batch of examples (mean NLL) and a freshly sampled link batch over
/// every descriptive-graph edge.
inline RecTrainReport train_recommender(Model& m, std::vector<RecExample> examples, std::size_t epochs) {
    RecTrainReport report;
    if (epochs == 0 || examples.empty()) {
        return report;
    }
    const auto& cfg = m.config;
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    AdamState adam(AdamOptions{.lr = cfg.lr});
    const auto trainable = recommendation_parameters(m.params);
    // Words linked to every item admit no negative, so they cannot be sampled.
    auto positives = all_positives(m.idg);
    std::erase_if(positives, [&](const WordItemPair& pr) { return m.idg.word_neighbors(pr.first).size() >= m.num_items(); });
    const bool use_link = cfg.lambda_link > 0.0 && !positives.empty();

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(examples.begin(), examples.end(), rng);
        double total = 0.0;
        double rec = 0.0;
        double lnk = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < examples.size(); start += cfg.batch_size) {
            const auto end = std::min(start + cfg.batch_size, examples.size());
            std::span<const RecExample> batch(examples.data() + start, end - start);
            std::optional<LinkBatch> lb;
            if (use_link) {
                lb = sample_negatives(m.idg, positives, cfg.negative_ratio, rng);
            }
            m.params.zero_grad();
            const auto v = recommendation_objective(m, batch, lb ? &*lb : nullptr, cfg.lambda_link,
                                                    1.0 / static_cast<double>(batch.size()));
            adam_step(m.params, adam, trainable);
            total += v.total(cfg.lambda_link);
            rec += v.rec;
            lnk += v.link;
            ++steps;
        }
        const auto s = static_cast<double>(steps);
        report.epoch_loss.push_back(total / s);
        report.epoch_rec.push_back(rec / s);
        report.epoch_link.push_back(lnk / s);
    }
    return report;
}

}  // namespace klever
