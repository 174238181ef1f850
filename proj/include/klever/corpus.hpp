#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "klever/error.hpp"
#include "klever/text.hpp"

namespace klever {

struct ItemRecord {
    std::string item_id;
    std::string title;
    std::vector<std::string> categories;
    std::string description;
    std::vector<std::string> reviews;
    std::vector<std::string> keywords;

    friend bool operator==(const ItemRecord&, const ItemRecord&) = default;
};

enum class Speaker { seeker, recommender };

struct Turn {
    Speaker speaker = Speaker::seeker;
    std::string text;
    std::vector<std::string> mentioned_items;
};

struct ConversationRecord {
    std::string conv_id;
    std::vector<Turn> turns;
};

/// Items in file order plus an id index and a lookup for title matching.
class Catalog {
public:
    Catalog() = default;

    explicit Catalog(std::vector<ItemRecord> items) {
        for (auto& item : items) {
            add(std::move(item));
        }
    }

    /// Throws DuplicateKeyError (line = 1-based position) on a repeated id.
    std::size_t add(ItemRecord item, std::size_t line = 0) {
        if (item.item_id.empty()) {
            throw Error("item_id must be non-empty");
        }
        const auto index = items_.size();
        if (!index_.emplace(item.item_id, index).second) {
            throw DuplicateKeyError(item.item_id, line == 0 ? index + 1 : line);
        }
        auto title_tokens = tokenize(item.title);
        if (!title_tokens.empty()) {
            titles_by_head_[title_tokens.front()].push_back(index);
        }
        title_tokens_.push_back(std::move(title_tokens));
        items_.push_back(std::move(item));
        return index;
    }

    [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }
    [[nodiscard]] bool empty() const noexcept { return items_.empty(); }
    [[nodiscard]] const std::vector<ItemRecord>& items() const noexcept { return items_; }
    [[nodiscard]] const ItemRecord& operator[](std::size_t i) const { return items_.at(i); }

    [[nodiscard]] std::optional<std::size_t> find(const std::string& item_id) const {
        auto it = index_.find(item_id);
        if (it == index_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    [[nodiscard]] std::size_t index_of(const std::string& item_id) const {
        auto idx = find(item_id);
        if (!idx) {
            throw NotFoundError("unknown item '" + item_id + "'");
        }
        return *idx;
    }

    /// Items whose full title token sequence occurs contiguously in `tokens`,
    /// in order of first appearance.
    [[nodiscard]] std::vector<std::size_t> match_titles(const TokenStream& tokens) const {
        std::vector<std::size_t> out;
        for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
            auto it = titles_by_head_.find(tokens[pos]);
            if (it == titles_by_head_.end()) {
                continue;
            }
            for (auto idx : it->second) {
                const auto& title = title_tokens_[idx];
                if (pos + title.size() > tokens.size()) {
                    continue;
                }
                if (std::equal(title.begin(), title.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos))) {
                    out.push_back(idx);
                }
            }
        }
        return out;
    }

private:
    std::vector<ItemRecord> items_;
    std::vector<TokenStream> title_tokens_;
    std::unordered_map<std::string, std::size_t> index_;
    std::unordered_map<std::string, std::vector<std::size_t>> titles_by_head_;
};

/// Indexed word list.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(const std::vector<std::string>& words) {
        for (const auto& w : words) {
            add(w);
        }
    }

    std::size_t add(const std::string& word) {
        auto [it, inserted] = index_.emplace(word, words_.size());
        if (inserted) {
            words_.push_back(word);
        }
        return it->second;
    }

    [[nodiscard]] std::optional<std::size_t> find(const std::string& word) const {
        auto it = index_.find(word);
        if (it == index_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    [[nodiscard]] std::size_t size() const noexcept { return words_.size(); }
    [[nodiscard]] const std::vector<std::string>& words() const noexcept { return words_; }
    [[nodiscard]] const std::string& operator[](std::size_t i) const { return words_.at(i); }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Entity (catalog index) and word (vocabulary index) evidence gathered from a
/// conversation prefix. Both lists are deduplicated in first-occurrence order.
struct ConversationContext {
    std::vector<std::size_t> entities;
    std::vector<std::size_t> words;

    [[nodiscard]] bool cold_start() const noexcept { return entities.empty(); }

    friend bool operator==(const ConversationContext&, const ConversationContext&) = default;
};

namespace detail {

template <typename T>
void push_unique(std::vector<T>& out, std::unordered_set<T>& seen, T value) {
    if (seen.insert(value).second) {
        out.push_back(value);
    }
}

inline std::vector<std::string> json_string_list(const nlohmann::json& obj, const char* key) {
    std::vector<std::string> out;
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return out;
    }
    const auto& arr = obj.at(key);
    if (!arr.is_array()) {
        throw Error(std::string("field '") + key + "' must be an array of strings");
    }
    for (const auto& v : arr) {
        out.push_back(v.get<std::string>());
    }
    return out;
}

inline std::string json_string(const nlohmann::json& obj, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return {};
    }
    return obj.at(key).get<std::string>();
}

inline bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace detail

/// Incremental builder so that a conversation can grow turn by turn (the chat
/// service uses this) while producing the same result as extract_context.
class ContextAccumulator {
public:
    ContextAccumulator(const Catalog& catalog, const Vocabulary& vocab, const StopwordSet& stopwords)
        : catalog_(&catalog), vocab_(&vocab), stopwords_(&stopwords) {}

    void add_turn(const Turn& turn) {
        for (const auto& id : turn.mentioned_items) {
            if (auto idx = catalog_->find(id)) {
                detail::push_unique(context_.entities, seen_entities_, *idx);
            }
        }
        const auto tokens = tokenize(turn.text);
        for (auto idx : catalog_->match_titles(tokens)) {
            detail::push_unique(context_.entities, seen_entities_, idx);
        }
        for (const auto& tok : remove_stopwords(tokens, *stopwords_)) {
            if (auto w = vocab_->find(tok)) {
                detail::push_unique(context_.words, seen_words_, *w);
            }
        }
    }

    [[nodiscard]] const ConversationContext& context() const noexcept { return context_; }

private:
    const Catalog* catalog_;
    const Vocabulary* vocab_;
    const StopwordSet* stopwords_;
    ConversationContext context_;
    std::unordered_set<std::size_t> seen_entities_;
    std::unordered_set<std::size_t> seen_words_;
};

/// Context over turns[0..=upto_turn]; both speakers contribute.
inline ConversationContext extract_context(const ConversationRecord& conv, std::size_t upto_turn,
                                           const Catalog& catalog, const Vocabulary& vocab,
                                           const StopwordSet& stopwords = default_stopwords()) {
    if (upto_turn >= conv.turns.size()) {
        throw Error("extract_context: upto_turn " + std::to_string(upto_turn) + " out of range for conversation '" +
                    conv.conv_id + "'");
    }
    ContextAccumulator acc(catalog, vocab, stopwords);
    for (std::size_t t = 0; t <= upto_turn; ++t) {
        acc.add_turn(conv.turns[t]);
    }
    return acc.context();
}

inline ItemRecord parse_item(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw Error("expected a JSON object");
    }
    if (!j.contains("item_id") || !j.at("item_id").is_string()) {
        throw Error("missing string field 'item_id'");
    }
    ItemRecord item;
    item.item_id = j.at("item_id").get<std::string>();
    if (item.item_id.empty()) {
        throw Error("empty 'item_id'");
    }
    item.title = detail::json_string(j, "title");
    item.categories = detail::json_string_list(j, "categories");
    item.keywords = detail::json_string_list(j, "keywords");
    item.description = detail::json_string(j, "description");
    item.reviews = detail::json_string_list(j, "reviews");
    return item;
}

inline nlohmann::json to_json(const ItemRecord& item) {
    return nlohmann::json{{"item_id", item.item_id},         {"title", item.title},
                          {"categories", item.categories},   {"keywords", item.keywords},
                          {"description", item.description}, {"reviews", item.reviews}};
}

inline Catalog read_items(std::istream& in, const std::string& source = "<items>") {
    Catalog catalog;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) {
            continue;
        }
        ItemRecord item;
        try {
            item = parse_item(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(source, lineno, e.what());
        } catch (const DuplicateKeyError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(source, lineno, e.what());
        }
        catalog.add(std::move(item), lineno);
    }
    return catalog;
}

inline Catalog load_items(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open items file '" + path + "'");
    }
    return read_items(in, path);
}

inline ConversationRecord parse_conversation(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw Error("expected a JSON object");
    }
    ConversationRecord conv;
    conv.conv_id = detail::json_string(j, "conv_id");
    if (!j.contains("turns") || !j.at("turns").is_array()) {
        throw Error("missing array field 'turns'");
    }
    for (const auto& jt : j.at("turns")) {
        Turn turn;
        const auto speaker = detail::json_string(jt, "speaker");
        if (speaker == "seeker") {
            turn.speaker = Speaker::seeker;
        } else if (speaker == "recommender") {
            turn.speaker = Speaker::recommender;
        } else {
            throw Error("unknown speaker '" + speaker + "'");
        }
        turn.text = detail::json_string(jt, "text");
        turn.mentioned_items = detail::json_string_list(jt, "mentioned_items");
        conv.turns.push_back(std::move(turn));
    }
    if (conv.turns.empty()) {
        throw Error("conversation has no turns");
    }
    return conv;
}

inline nlohmann::json to_json(const ConversationRecord& conv) {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& t : conv.turns) {
        turns.push_back({{"speaker", t.speaker == Speaker::seeker ? "seeker" : "recommender"},
                         {"text", t.text},
                         {"mentioned_items", t.mentioned_items}});
    }
    return {{"conv_id", conv.conv_id}, {"turns", std::move(turns)}};
}

inline std::vector<ConversationRecord> read_conversations(std::istream& in, const std::string& source = "<convs>") {
    std::vector<ConversationRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) {
            continue;
        }
        try {
            out.push_back(parse_conversation(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(source, lineno, e.what());
        } catch (const Error& e) {
            throw ParseError(source, lineno, e.what());
        }
    }
    return out;
}

inline std::vector<ConversationRecord> load_conversations(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open conversations file '" + path + "'");
    }
    return read_conversations(in, path);
}

/// Mentioned item ids that do not resolve against the catalog, as
/// "conv_id/turn: item_id" strings.
inline std::vector<std::string> validate_conversations(const std::vector<ConversationRecord>& convs,
                                                       const Catalog& catalog) {
    std::vector<std::string> problems;
    for (const auto& conv : convs) {
        for (std::size_t t = 0; t < conv.turns.size(); ++t) {
            for (const auto& id : conv.turns[t].mentioned_items) {
                if (!catalog.find(id)) {
                    problems.push_back(conv.conv_id + "/" + std::to_string(t) + ": " + id);
                }
            }
        }
    }
    return problems;
}

}  // namespace klever
