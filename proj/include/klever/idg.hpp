#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "klever/corpus.hpp"
#include "klever/error.hpp"
#include "klever/text.hpp"

namespace klever {

/// Bipartite item/word graph. Adjacency lists are kept sorted by index and
/// are always consistent with the edge set.
class DescriptiveGraph {
public:
    DescriptiveGraph() = default;

    DescriptiveGraph(std::vector<std::string> items, std::vector<std::string> words)
        : items_(std::move(items)), words_(std::move(words)), item_words_(items_.size()), word_items_(words_.size()) {}

    /// Adds (item, word); duplicates are ignored.
    void add_edge(std::size_t item, std::size_t word) {
        if (item >= items_.size() || word >= words_.size()) {
            throw GraphError("edge (" + std::to_string(item) + ", " + std::to_string(word) + ") out of range");
        }
        auto& iw = item_words_[item];
        auto pos = std::lower_bound(iw.begin(), iw.end(), word);
        if (pos != iw.end() && *pos == word) {
            return;
        }
        iw.insert(pos, word);
        auto& wi = word_items_[word];
        wi.insert(std::lower_bound(wi.begin(), wi.end(), item), item);
        ++edge_count_;
    }

    [[nodiscard]] bool has_edge(std::size_t item, std::size_t word) const {
        const auto& iw = item_words_.at(item);
        return std::binary_search(iw.begin(), iw.end(), word);
    }

    [[nodiscard]] std::size_t num_items() const noexcept { return items_.size(); }
    [[nodiscard]] std::size_t num_words() const noexcept { return words_.size(); }
    [[nodiscard]] std::size_t num_edges() const noexcept { return edge_count_; }

    [[nodiscard]] const std::vector<std::string>& items() const noexcept { return items_; }
    [[nodiscard]] const std::vector<std::string>& words() const noexcept { return words_; }

    /// N(u)
    [[nodiscard]] const std::vector<std::size_t>& item_neighbors(std::size_t item) const { return item_words_.at(item); }
    /// N(w)
    [[nodiscard]] const std::vector<std::size_t>& word_neighbors(std::size_t word) const { return word_items_.at(word); }

    /// All (item, word) pairs, item-major.
    [[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> edges() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        out.reserve(edge_count_);
        for (std::size_t u = 0; u < items_.size(); ++u) {
            for (auto w : item_words_[u]) {
                out.emplace_back(u, w);
            }
        }
        return out;
    }

    /// Test helper for adjacency symmetry.
    [[nodiscard]] bool adjacency_consistent() const {
        std::size_t forward = 0;
        for (std::size_t u = 0; u < items_.size(); ++u) {
            for (auto w : item_words_[u]) {
                const auto& wi = word_items_[w];
                if (!std::binary_search(wi.begin(), wi.end(), u)) {
                    return false;
                }
                ++forward;
            }
        }
        std::size_t backward = 0;
        for (const auto& wi : word_items_) {
            backward += wi.size();
        }
        return forward == edge_count_ && backward == edge_count_;
    }

    /// Same edges over a new item/word ordering. Nodes of this graph that are
    /// missing from the new ordering are an error; extra nodes become isolated.
    [[nodiscard]] DescriptiveGraph reindexed(const std::vector<std::string>& item_order,
                                             const std::vector<std::string>& word_order) const {
        std::unordered_map<std::string, std::size_t> item_pos;
        std::unordered_map<std::string, std::size_t> word_pos;
        for (std::size_t i = 0; i < item_order.size(); ++i) {
            item_pos.emplace(item_order[i], i);
        }
        for (std::size_t i = 0; i < word_order.size(); ++i) {
            word_pos.emplace(word_order[i], i);
        }
        DescriptiveGraph out(item_order, word_order);
        for (std::size_t u = 0; u < items_.size(); ++u) {
            if (item_words_[u].empty()) {
                continue;
            }
            auto iu = item_pos.find(items_[u]);
            if (iu == item_pos.end()) {
                throw NotFoundError("graph item '" + items_[u] + "' is not in the target item set");
            }
            for (auto w : item_words_[u]) {
                auto iw = word_pos.find(words_[w]);
                if (iw == word_pos.end()) {
                    throw NotFoundError("graph word '" + words_[w] + "' is not in the target vocabulary");
                }
                out.add_edge(iu->second, iw->second);
            }
        }
        return out;
    }

    friend bool operator==(const DescriptiveGraph& a, const DescriptiveGraph& b) {
        return a.items_ == b.items_ && a.words_ == b.words_ && a.item_words_ == b.item_words_;
    }

private:
    std::vector<std::string> items_;
    std::vector<std::string> words_;
    std::vector<std::vector<std::size_t>> item_words_;
    std::vector<std::vector<std::size_t>> word_items_;
    std::size_t edge_count_ = 0;
};

struct IdgBuildConfig {
    std::size_t min_frequency = 10;  // m, applied to corpus-wide counts
    std::size_t top_k = 30;          // k, applied per item
    StopwordSet stopwords = default_stopwords();
};

/// Words that become edges regardless of frequency: tokens of the title,
/// categories and keywords, minus stopwords.
inline std::vector<std::string> tag_words(const ItemRecord& item, const StopwordSet& stopwords) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    auto take = [&](const std::string& text) {
        for (auto& tok : remove_stopwords(tokenize(text), stopwords)) {
            if (seen.insert(tok).second) {
                out.push_back(std::move(tok));
            }
        }
    };
    take(item.title);
    for (const auto& c : item.categories) {
        take(c);
    }
    for (const auto& k : item.keywords) {
        take(k);
    }
    return out;
}

/// Per-item token counts over description and reviews, minus stopwords.
inline std::map<std::string, std::size_t> text_word_counts(const ItemRecord& item, const StopwordSet& stopwords) {
    std::map<std::string, std::size_t> counts;
    auto take = [&](const std::string& text) {
        for (const auto& tok : remove_stopwords(tokenize(text), stopwords)) {
            ++counts[tok];
        }
    };
    take(item.description);
    for (const auto& r : item.reviews) {
        take(r);
    }
    return counts;
}

/// Top-k eligible words of one item by per-item count, ties broken by
/// lexicographic order.
inline std::vector<std::string> select_frequent_words(const std::map<std::string, std::size_t>& item_counts,
                                                      const std::unordered_map<std::string, std::size_t>& corpus_counts,
                                                      std::size_t min_frequency, std::size_t top_k) {
    std::vector<std::pair<std::string, std::size_t>> eligible;
    for (const auto& [word, count] : item_counts) {
        if (corpus_counts.at(word) >= min_frequency) {
            eligible.emplace_back(word, count);
        }
    }
    std::stable_sort(eligible.begin(), eligible.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (eligible.size() > top_k) {
        eligible.resize(top_k);
    }
    std::vector<std::string> out;
    out.reserve(eligible.size());
    for (auto& [word, _] : eligible) {
        out.push_back(std::move(word));
    }
    return out;
}

/// Builds the item descriptive graph. Items are ordered by item_id and words
/// lexicographically, so the result is canonical for a given catalog and
/// config (and survives a TSV round trip with identical indices).
inline DescriptiveGraph build_idg(const Catalog& catalog, const IdgBuildConfig& config) {
    if (config.min_frequency < 1 || config.top_k < 1) {
        throw Error("build_idg: min_frequency and top_k must be >= 1");
    }
    if (catalog.empty()) {
        throw Error("build_idg: empty catalog");
    }

    std::vector<std::map<std::string, std::size_t>> per_item;
    per_item.reserve(catalog.size());
    std::unordered_map<std::string, std::size_t> corpus_counts;
    for (const auto& item : catalog.items()) {
        per_item.push_back(text_word_counts(item, config.stopwords));
        for (const auto& [word, count] : per_item.back()) {
            corpus_counts[word] += count;
        }
    }

    std::map<std::string, std::set<std::string>> adjacency;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        const auto& item = catalog[i];
        auto& words = adjacency[item.item_id];
        for (auto& w : tag_words(item, config.stopwords)) {
            words.insert(std::move(w));
        }
        for (auto& w : select_frequent_words(per_item[i], corpus_counts, config.min_frequency, config.top_k)) {
            words.insert(std::move(w));
        }
    }

    std::set<std::string> vocab;
    for (const auto& [_, words] : adjacency) {
        vocab.insert(words.begin(), words.end());
    }
    std::vector<std::string> item_ids;
    for (const auto& [id, _] : adjacency) {
        item_ids.push_back(id);
    }
    std::vector<std::string> word_list(vocab.begin(), vocab.end());
    std::unordered_map<std::string, std::size_t> word_index;
    for (std::size_t i = 0; i < word_list.size(); ++i) {
        word_index.emplace(word_list[i], i);
    }

    DescriptiveGraph graph(item_ids, word_list);
    std::size_t u = 0;
    for (const auto& [_, words] : adjacency) {
        for (const auto& w : words) {
            graph.add_edge(u, word_index.at(w));
        }
        ++u;
    }
    return graph;
}

/// One `item_id<TAB>word` line per edge, sorted by (item_id, word).
inline void write_idg(const DescriptiveGraph& graph, std::ostream& out) {
    std::vector<std::pair<std::string, std::string>> lines;
    lines.reserve(graph.num_edges());
    for (const auto& [u, w] : graph.edges()) {
        lines.emplace_back(graph.items()[u], graph.words()[w]);
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& [item, word] : lines) {
        out << item << '\t' << word << '\n';
    }
}

inline void save_idg(const DescriptiveGraph& graph, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write graph file '" + path + "'");
    }
    write_idg(graph, out);
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

/// Parses the TSV edge list. An identifier used both as an item and as a word
/// would make the graph non-bipartite and is rejected. Nodes are indexed in
/// sorted order, matching build_idg.
inline DescriptiveGraph read_idg(std::istream& in, const std::string& source = "<idg>") {
    std::set<std::pair<std::string, std::string>> edges;
    std::map<std::string, std::size_t> first_line_as_item;
    std::map<std::string, std::size_t> first_line_as_word;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
            throw ParseError(source, lineno, "expected exactly two tab-separated fields");
        }
        std::string item = line.substr(0, tab);
        std::string word = line.substr(tab + 1);
        if (item.empty() || word.empty()) {
            throw ParseError(source, lineno, "empty field");
        }
        if (first_line_as_word.count(item) != 0 || first_line_as_item.count(word) != 0 || item == word) {
            throw GraphError(source + ":" + std::to_string(lineno) + ": bipartite violation, '" +
                             (first_line_as_word.count(item) != 0 || item == word ? item : word) +
                             "' appears as both item and word");
        }
        first_line_as_item.emplace(item, lineno);
        first_line_as_word.emplace(word, lineno);
        edges.emplace(std::move(item), std::move(word));
    }

    std::vector<std::string> items;
    std::vector<std::string> words;
    std::unordered_map<std::string, std::size_t> item_index;
    std::unordered_map<std::string, std::size_t> word_index;
    for (const auto& [name, _] : first_line_as_item) {
        item_index.emplace(name, items.size());
        items.push_back(name);
    }
    for (const auto& [name, _] : first_line_as_word) {
        word_index.emplace(name, words.size());
        words.push_back(name);
    }
    DescriptiveGraph graph(std::move(items), std::move(words));
    for (const auto& [item, word] : edges) {
        graph.add_edge(item_index.at(item), word_index.at(word));
    }
    return graph;
}

inline DescriptiveGraph load_idg(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open graph file '" + path + "'");
    }
    return read_idg(in, path);
}

}  // namespace klever
