#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "klever/error.hpp"

namespace klever {

struct RelationalEdge {
    std::size_t head = 0;
    std::size_t relation = 0;
    std::size_t tail = 0;

    friend bool operator==(const RelationalEdge&, const RelationalEdge&) = default;
};

/// Typed directed multigraph over entities. Messages flow head -> tail, so
/// N_r(u) is the set of heads of relation-r edges ending at u.
class RelationalGraph {
public:
    RelationalGraph() = default;
    RelationalGraph(std::size_t num_nodes, std::size_t num_relations)
        : num_nodes_(num_nodes), num_relations_(num_relations), incoming_(num_relations) {
        for (auto& per_node : incoming_) {
            per_node.resize(num_nodes);
        }
    }

    void add_edge(std::size_t head, std::size_t relation, std::size_t tail) {
        if (relation >= num_relations_) {
            throw GraphError("relation id " + std::to_string(relation) + " out of range (R = " +
                             std::to_string(num_relations_) + ")");
        }
        if (head >= num_nodes_ || tail >= num_nodes_) {
            throw GraphError("relational edge endpoint out of range");
        }
        edges_.push_back({head, relation, tail});
        incoming_[relation][tail].push_back(head);
    }

    [[nodiscard]] std::size_t num_nodes() const noexcept { return num_nodes_; }
    [[nodiscard]] std::size_t num_relations() const noexcept { return num_relations_; }
    [[nodiscard]] const std::vector<RelationalEdge>& edges() const noexcept { return edges_; }
    [[nodiscard]] const std::vector<std::size_t>& incoming(std::size_t relation, std::size_t node) const {
        return incoming_.at(relation).at(node);
    }

private:
    std::size_t num_nodes_ = 0;
    std::size_t num_relations_ = 0;
    std::vector<RelationalEdge> edges_;
    std::vector<std::vector<std::vector<std::size_t>>> incoming_;
};

/// Undirected simple graph over words. Self loops and repeated pairs are
/// dropped on insertion.
class WordGraph {
public:
    WordGraph() = default;
    explicit WordGraph(std::size_t num_nodes) : adjacency_(num_nodes) {}

    void add_edge(std::size_t a, std::size_t b) {
        if (a >= adjacency_.size() || b >= adjacency_.size()) {
            throw GraphError("word edge endpoint out of range");
        }
        if (a == b) {
            return;
        }
        auto& na = adjacency_[a];
        auto pos = std::lower_bound(na.begin(), na.end(), b);
        if (pos != na.end() && *pos == b) {
            return;
        }
        na.insert(pos, b);
        auto& nb = adjacency_[b];
        nb.insert(std::lower_bound(nb.begin(), nb.end(), a), a);
        edges_.emplace_back(std::min(a, b), std::max(a, b));
    }

    [[nodiscard]] std::size_t num_nodes() const noexcept { return adjacency_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& neighbors(std::size_t node) const { return adjacency_.at(node); }
    [[nodiscard]] const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }

private:
    std::vector<std::vector<std::size_t>> adjacency_;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

/// Name tables that come with a loaded relational graph.
struct NamedRelationalGraph {
    std::vector<std::string> entities;
    std::vector<std::string> relations;
    RelationalGraph graph;
};

struct NamedWordGraph {
    std::vector<std::string> words;
    WordGraph graph;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) {
            break;
        }
        start = tab + 1;
    }
    return out;
}

class NameTable {
public:
    explicit NameTable(const std::vector<std::string>& seed) {
        for (const auto& s : seed) {
            intern(s);
        }
    }
    std::size_t intern(const std::string& name) {
        auto [it, inserted] = index_.emplace(name, names_.size());
        if (inserted) {
            names_.push_back(name);
        }
        return it->second;
    }
    std::vector<std::string> take() { return std::move(names_); }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace detail

/// `head_id<TAB>relation<TAB>tail_id` lines. Entity indices start with
/// `seed_entities` in order (catalog item ids) and then follow first
/// appearance. With `add_inverse`, every relation r gets a companion "r^-1"
/// carrying tail -> head messages.
inline NamedRelationalGraph read_item_kg(std::istream& in, const std::vector<std::string>& seed_entities,
                                         bool add_inverse = true, const std::string& source = "<item-kg>") {
    detail::NameTable entities(seed_entities);
    detail::NameTable relations({});
    std::vector<RelationalEdge> raw;
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
        auto fields = detail::split_tabs(line);
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
            throw ParseError(source, lineno, "expected head<TAB>relation<TAB>tail");
        }
        raw.push_back({entities.intern(fields[0]), relations.intern(fields[1]), entities.intern(fields[2])});
    }
    NamedRelationalGraph out;
    out.entities = entities.take();
    out.relations = relations.take();
    const auto base = out.relations.size();
    if (add_inverse) {
        for (std::size_t r = 0; r < base; ++r) {
            out.relations.push_back(out.relations[r] + "^-1");
        }
    }
    out.graph = RelationalGraph(out.entities.size(), out.relations.size());
    for (const auto& e : raw) {
        out.graph.add_edge(e.head, e.relation, e.tail);
        if (add_inverse) {
            out.graph.add_edge(e.tail, base + e.relation, e.head);
        }
    }
    return out;
}

inline NamedRelationalGraph load_item_kg(const std::string& path, const std::vector<std::string>& seed_entities,
                                         bool add_inverse = true) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open item KG file '" + path + "'");
    }
    return read_item_kg(in, seed_entities, add_inverse, path);
}

/// `word<TAB>word` lines; node indices start with `seed_words`.
inline NamedWordGraph read_word_kg(std::istream& in, const std::vector<std::string>& seed_words,
                                   const std::string& source = "<word-kg>") {
    detail::NameTable words(seed_words);
    std::vector<std::pair<std::size_t, std::size_t>> raw;
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
        auto fields = detail::split_tabs(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
            throw ParseError(source, lineno, "expected word<TAB>word");
        }
        const auto a = words.intern(fields[0]);
        raw.emplace_back(a, words.intern(fields[1]));
    }
    NamedWordGraph out;
    out.words = words.take();
    out.graph = WordGraph(out.words.size());
    for (const auto& [a, b] : raw) {
        out.graph.add_edge(a, b);
    }
    return out;
}

inline NamedWordGraph load_word_kg(const std::string& path, const std::vector<std::string>& seed_words) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open word KG file '" + path + "'");
    }
    return read_word_kg(in, seed_words, path);
}

}  // namespace klever
