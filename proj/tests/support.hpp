#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "klever/corpus.hpp"
#include "klever/idg.hpp"
#include "klever/model.hpp"

namespace klever::test {

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("klever_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline ItemRecord item(const std::string& id, const std::string& title, std::vector<std::string> categories,
                       const std::string& description, std::vector<std::string> reviews = {}) {
    ItemRecord r;
    r.item_id = id;
    r.title = title;
    r.categories = std::move(categories);
    r.description = description;
    r.reviews = std::move(reviews);
    return r;
}

/// Three items with disjoint vocabularies: m1 horror, m2 romance, m3 space.
inline Catalog toy_catalog() {
    Catalog c;
    c.add(item("m1", "Nightshade", {"horror"}, "ghost ghost scary haunted house"));
    c.add(item("m2", "Sweetheart", {"romance"}, "love love kiss wedding date"));
    c.add(item("m3", "Starfall", {"scifi"}, "space space alien rocket planet"));
    return c;
}

inline TrainingConfig toy_config() {
    TrainingConfig cfg;
    cfg.dim = 6;
    cfg.gen_dim = 5;
    cfg.min_frequency = 1;
    cfg.top_k = 3;
    cfg.epochs = 5;
    cfg.bow_epochs = 5;
    cfg.batch_size = 4;
    cfg.seed = 11;
    return cfg;
}

inline Model toy_model(const TrainingConfig& cfg = toy_config(), bool with_kgs = true) {
    auto catalog = toy_catalog();
    IdgBuildConfig b;
    b.min_frequency = cfg.min_frequency;
    b.top_k = cfg.top_k;
    const auto g = build_idg(catalog, b);
    if (!with_kgs) {
        return build_model(std::move(catalog), g, cfg);
    }
    std::istringstream kg("m1\tgenre\tg:dark\nm2\tgenre\tg:light\nm3\tgenre\tg:dark\n");
    auto item_kg = read_item_kg(kg, {"m1", "m2", "m3"});
    std::istringstream wk("ghost\tscary\nlove\tkiss\nspace\talien\nalien\tufo\n");
    auto word_kg = read_word_kg(wk, g.words());
    return build_model(std::move(catalog), g, cfg, item_kg, word_kg);
}

/// Smallest useful model for gradient checks: d = 4, ten words, five KG
/// entities, two relations (plus inverses).
inline Model tiny_model(std::uint64_t seed = 5) {
    TrainingConfig cfg = toy_config();
    cfg.dim = 4;
    cfg.gen_dim = 3;
    cfg.attention_dim = 3;
    cfg.top_k = 1;
    cfg.seed = seed;
    auto catalog = toy_catalog();
    IdgBuildConfig b;
    b.min_frequency = 1;
    b.top_k = 1;
    const auto g = build_idg(catalog, b);
    std::istringstream kg("m1\tgenre\tg:dark\nm3\tgenre\tg:dark\nm2\tmood\tg:light\nm1\tmood\tg:light\n");
    auto item_kg = read_item_kg(kg, {"m1", "m2", "m3"});
    std::istringstream wk("ghost\tlove\nspace\tufo\nhorror\tghost\n");
    auto word_kg = read_word_kg(wk, g.words());
    return build_model(std::move(catalog), g, cfg, item_kg, word_kg);
}

inline Turn seeker(const std::string& text, std::vector<std::string> items = {}) {
    return Turn{Speaker::seeker, text, std::move(items)};
}

inline Turn recommender(const std::string& text, std::vector<std::string> items = {}) {
    return Turn{Speaker::recommender, text, std::move(items)};
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = dist(rng);
    }
    return v;
}

inline void randomize(ParamRegistry& reg, std::uint64_t seed, double scale = 0.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, scale);
    for (auto& [_, p] : reg) {
        for (auto& v : p.value.data()) {
            v = dist(rng);
        }
    }
}

}  // namespace klever::test
