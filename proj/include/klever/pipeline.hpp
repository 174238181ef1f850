#pragma once

#include <cstddef>
#include <vector>

#include "klever/bow.hpp"
#include "klever/corpus.hpp"
#include "klever/evaluator.hpp"
#include "klever/model.hpp"
#include "klever/recommender.hpp"

namespace klever {

/// (context, response) pairs from every recommender turn after the first
/// turn. Response tokens outside the model vocabulary are dropped; turns
/// left without tokens are skipped.
inline std::vector<BowSample> build_bow_dataset(const std::vector<ConversationRecord>& conversations, const Model& m) {
    std::vector<BowSample> out;
    for (const auto& conv : conversations) {
        ContextAccumulator acc(m.catalog, m.vocab, m.stopwords);
        for (std::size_t t = 0; t < conv.turns.size(); ++t) {
            const auto& turn = conv.turns[t];
            if (t > 0 && turn.speaker == Speaker::recommender) {
                BowSample s;
                s.context = acc.context();
                for (const auto& tok : tokenize(turn.text)) {
                    if (auto w = m.vocab.find(tok)) {
                        s.response.push_back(*w);
                    }
                }
                if (!s.response.empty()) {
                    out.push_back(std::move(s));
                }
            }
            acc.add_turn(turn);
        }
    }
    return out;
}

struct TrainSummary {
    std::size_t rec_examples = 0;
    std::size_t bow_samples = 0;
    RecTrainReport rec;
    BowTrainReport bow;
};

/// Recommendation phase (recommender jointly with the link objective) followed
/// by the bag-of-words phase with everything but the head frozen.
inline TrainSummary train_model(Model& m, const std::vector<ConversationRecord>& conversations) {
    TrainSummary summary;
    auto examples = build_eval_set(conversations, m.catalog, m.vocab, m.stopwords);
    summary.rec_examples = examples.size();
    summary.rec = train_recommender(m, to_training_examples(examples), m.config.epochs);
    const auto bow = build_bow_dataset(conversations, m);
    summary.bow_samples = bow.size();
    summary.bow = train_bow_head(m, bow, m.config.bow_epochs, m.config.lambda_bow);
    return summary;
}

}  // namespace klever
