#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "klever/corpus.hpp"
#include "klever/recommender.hpp"

namespace klever {

struct EvalExample {
    ConversationContext context;
    std::size_t target = 0;
    bool is_cold_start = false;
    std::string conv_id;
    std::size_t turn = 0;
};

/// One example per (recommender turn, mentioned item) with the prior turns as
/// context. Turn 0 has no context and is skipped, as are targets already
/// present in the context (those can never be recommended).
inline std::vector<EvalExample> build_eval_set(const std::vector<ConversationRecord>& conversations,
                                               const Catalog& catalog, const Vocabulary& vocab,
                                               const StopwordSet& stopwords = default_stopwords()) {
    std::vector<EvalExample> out;
    for (const auto& conv : conversations) {
        ContextAccumulator acc(catalog, vocab, stopwords);
        for (std::size_t t = 0; t < conv.turns.size(); ++t) {
            const auto& turn = conv.turns[t];
            if (t > 0 && turn.speaker == Speaker::recommender) {
                const auto& ctx = acc.context();
                std::set<std::size_t> emitted;
                for (const auto& id : turn.mentioned_items) {
                    auto idx = catalog.find(id);
                    if (!idx || emitted.count(*idx) != 0 ||
                        std::find(ctx.entities.begin(), ctx.entities.end(), *idx) != ctx.entities.end()) {
                        continue;
                    }
                    emitted.insert(*idx);
                    out.push_back({ctx, *idx, ctx.entities.empty(), conv.conv_id, t});
                }
            }
            acc.add_turn(turn);
        }
    }
    return out;
}

inline std::vector<RecExample> to_training_examples(const std::vector<EvalExample>& examples) {
    std::vector<RecExample> out;
    out.reserve(examples.size());
    for (const auto& e : examples) {
        out.push_back({e.context, e.target});
    }
    return out;
}

struct SplitRecall {
    std::size_t count = 0;
    std::map<std::size_t, double> recall;  // k -> R@k
};

struct MetricsReport {
    SplitRecall all;
    SplitRecall cold_start;
    std::map<std::size_t, double> distinct;  // n -> Distinct-n
};

/// Recall@k over `examples` for a ranking callback
///   rank(const ConversationContext&, std::size_t k) -> std::vector<std::size_t>
/// returning the top-k item indices.
template <typename RankFn>
    requires std::invocable<RankFn&, const ConversationContext&, std::size_t>
MetricsReport recall_at_k(RankFn&& rank, const std::vector<EvalExample>& examples, const std::vector<std::size_t>& ks) {
    if (ks.empty()) {
        throw Error("recall_at_k: no cutoffs");
    }
    const auto max_k = *std::max_element(ks.begin(), ks.end());
    std::map<std::size_t, std::size_t> hits_all;
    std::map<std::size_t, std::size_t> hits_cold;
    MetricsReport report;
    for (const auto& ex : examples) {
        const std::vector<std::size_t> ranked = rank(ex.context, max_k);
        ++report.all.count;
        if (ex.is_cold_start) {
            ++report.cold_start.count;
        }
        const auto pos = std::find(ranked.begin(), ranked.end(), ex.target);
        const auto position = static_cast<std::size_t>(pos - ranked.begin());
        for (auto k : ks) {
            const bool hit = pos != ranked.end() && position < k;
            hits_all[k] += hit ? 1 : 0;
            if (ex.is_cold_start) {
                hits_cold[k] += hit ? 1 : 0;
            }
        }
    }
    for (auto k : ks) {
        report.all.recall[k] =
            report.all.count == 0 ? 0.0 : static_cast<double>(hits_all[k]) / static_cast<double>(report.all.count);
        report.cold_start.recall[k] = report.cold_start.count == 0 ? 0.0
                                                                   : static_cast<double>(hits_cold[k]) /
                                                                         static_cast<double>(report.cold_start.count);
    }
    return report;
}

inline MetricsReport recall_at_k(const Recommender& rec, const std::vector<EvalExample>& examples,
                                 const std::vector<std::size_t>& ks = {1, 10, 50}) {
    return recall_at_k(
        [&](const ConversationContext& ctx, std::size_t k) {
            std::vector<std::size_t> out;
            for (const auto& r : rec.recommend_topk(ctx, k)) {
                out.push_back(r.item);
            }
            return out;
        },
        examples, ks);
}

/// Unique n-grams / total n-grams over all sequences; 0 if there are none.
inline double distinct_n(const std::vector<std::vector<std::string>>& sequences, std::size_t n) {
    if (n < 1) {
        throw Error("distinct_n: n must be >= 1");
    }
    std::set<std::vector<std::string>> unique;
    std::size_t total = 0;
    for (const auto& seq : sequences) {
        if (seq.size() < n) {
            continue;
        }
        for (std::size_t i = 0; i + n <= seq.size(); ++i) {
            unique.emplace(seq.begin() + static_cast<std::ptrdiff_t>(i),
                           seq.begin() + static_cast<std::ptrdiff_t>(i + n));
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(unique.size()) / static_cast<double>(total);
}

inline nlohmann::json to_json(const MetricsReport& r) {
    auto split = [](const SplitRecall& s) {
        nlohmann::json j{{"count", s.count}};
        for (const auto& [k, v] : s.recall) {
            j["recall@" + std::to_string(k)] = v;
        }
        return j;
    };
    nlohmann::json j{{"all", split(r.all)}, {"cold_start", split(r.cold_start)}};
    if (!r.distinct.empty()) {
        nlohmann::json d;
        for (const auto& [n, v] : r.distinct) {
            d["distinct-" + std::to_string(n)] = v;
        }
        j["distinct"] = d;
    }
    return j;
}

/// Plain-text table, R@k columns grouped by All / Cold-start.
inline std::string format_table(const MetricsReport& r, bool cold_start_only = false) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3);
    auto header = [&](const char* name, const SplitRecall& s) {
        for (const auto& [k, _] : s.recall) {
            out << '\t' << name << " R@" << k;
        }
    };
    auto values = [&](const SplitRecall& s) {
        for (const auto& [_, v] : s.recall) {
            out << '\t' << v;
        }
    };
    out << "model";
    if (!cold_start_only) {
        header("All", r.all);
    }
    header("Cold-start", r.cold_start);
    out << "\nklever";
    if (!cold_start_only) {
        values(r.all);
    }
    values(r.cold_start);
    out << "\nexamples";
    if (!cold_start_only) {
        out << "\tall=" << r.all.count;
    }
    out << "\tcold_start=" << r.cold_start.count << '\n';
    return out.str();
}

}  // namespace klever
