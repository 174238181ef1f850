#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "klever/corpus.hpp"
#include "klever/error.hpp"

namespace klever::synthetic {

// A small CRS world with known structure: every item is described by three
// cue words that dominate its reviews, seekers ask for items through those
// cues, and recommenders answer with the matching item.

inline constexpr std::size_t kMaxItems = 20;
inline constexpr std::size_t kCuesPerItem = 3;

inline const std::array<const char*, kMaxItems> kTitles = {
    "Zorblax", "Quintara", "Velmoor", "Drakkon", "Lumivale", "Pexaris", "Thornwick", "Obsidara", "Kelvaro",  "Miravon",
    "Sundrel", "Brimholt", "Caspian", "Nythera", "Orlesque", "Vantorin", "Glimmerd", "Fenwraith", "Istoria", "Harrowgate",
};

inline const std::array<std::array<const char*, kCuesPerItem>, kMaxItems> kCues = {{
    {"haunted", "ghost", "scary"},       {"romantic", "valentine", "girlfriend"}, {"space", "alien", "rocket"},
    {"cowboy", "desert", "outlaw"},      {"pirate", "treasure", "ocean"},         {"zombie", "apocalypse", "survival"},
    {"wizard", "dragon", "castle"},      {"detective", "murder", "clues"},        {"superhero", "villain", "cape"},
    {"heist", "vault", "robbery"},       {"dinosaur", "jungle", "fossil"},        {"samurai", "sword", "honor"},
    {"submarine", "navy", "torpedo"},    {"vampire", "blood", "coffin"},          {"dance", "ballet", "rhythm"},
    {"boxing", "champion", "underdog"},  {"robot", "android", "circuit"},         {"time-travel", "paradox", "machine"},
    {"courtroom", "lawyer", "verdict"},  {"mountain", "climbing", "avalanche"},
}};

inline const std::array<const char*, 4> kGenres = {"drama", "comedy", "action", "thriller"};

inline const std::array<const char*, 16> kNoise = {
    "film",   "story", "actor",  "scene",  "plot",      "cast",     "screen",     "ending",
    "camera", "music", "writer", "studio", "character", "audience", "soundtrack", "sequel",
};

struct WorldConfig {
    std::size_t items = kMaxItems;
    std::size_t conversations = 500;
    /// Fraction of conversations whose recommendation follows a mentioned item.
    double warm_fraction = 0.4;
    std::uint64_t seed = 2024;
};

struct World {
    std::vector<ItemRecord> items;
    std::vector<ConversationRecord> conversations;
    /// head<TAB>relation<TAB>tail lines
    std::vector<std::string> item_kg;
    /// word<TAB>word lines
    std::vector<std::string> word_kg;
};

namespace detail {

inline std::string lower(std::string s) {
    for (auto& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

inline std::string repeat_word(const std::string& w, std::size_t times) {
    std::string out;
    for (std::size_t i = 0; i < times; ++i) {
        out += w;
        out += ' ';
    }
    return out;
}

}  // namespace detail

inline std::string item_id(std::size_t i) { return "m" + std::to_string(i + 1); }

/// Item i: one genre category, cue words with per-item counts 14/12/11 spread
/// over description and reviews, and three shared noise words with counts
/// 3/2/1.
inline ItemRecord make_item(std::size_t i) {
    ItemRecord item;
    item.item_id = item_id(i);
    item.title = kTitles[i];
    item.categories = {kGenres[i % kGenres.size()]};
    const auto& cues = kCues[i];
    item.description = std::string("A ") + cues[0] + " film with " + cues[1] + " and " + cues[2] + ".";
    const std::array<std::size_t, kCuesPerItem> review_counts = {13, 11, 10};
    const std::array<std::size_t, 3> noise_counts = {3, 2, 1};
    std::string review;
    for (std::size_t c = 0; c < kCuesPerItem; ++c) {
        review += detail::repeat_word(cues[c], review_counts[c]);
    }
    for (std::size_t n = 0; n < noise_counts.size(); ++n) {
        review += detail::repeat_word(kNoise[(i * 3 + n * 5) % kNoise.size()], noise_counts[n]);
    }
    item.reviews = {"Loved it! " + review};
    return item;
}

inline World make_world(const WorldConfig& cfg) {
    if (cfg.items < 2 || cfg.items > kMaxItems) {
        throw Error("synthetic world supports 2.." + std::to_string(kMaxItems) + " items");
    }
    World w;
    for (std::size_t i = 0; i < cfg.items; ++i) {
        w.items.push_back(make_item(i));
        w.item_kg.push_back(item_id(i) + "\thas_genre\tgenre:" + kGenres[i % kGenres.size()]);
        const auto& cues = kCues[i];
        w.word_kg.push_back(std::string(cues[0]) + "\t" + cues[1]);
        w.word_kg.push_back(std::string(cues[1]) + "\t" + cues[2]);
    }

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick_item(0, cfg.items - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::array<const char*, 3> asks = {"hi! can you suggest something {a} and {b}?",
                                             "i am in the mood for a {a} movie, maybe with {b}",
                                             "looking for {a} {b} stuff tonight"};

    auto fill = [](std::string tmpl, const std::string& a, const std::string& b) {
        tmpl.replace(tmpl.find("{a}"), 3, a);
        tmpl.replace(tmpl.find("{b}"), 3, b);
        return tmpl;
    };

    for (std::size_t c = 0; c < cfg.conversations; ++c) {
        ConversationRecord conv;
        conv.conv_id = "c" + std::to_string(c + 1);
        const auto target = pick_item(rng);
        std::array<std::size_t, kCuesPerItem> order = {0, 1, 2};
        std::shuffle(order.begin(), order.end(), rng);
        const std::string a = kCues[target][order[0]];
        const std::string b = kCues[target][order[1]];
        const std::string ask = fill(asks[rng() % asks.size()], a, b);

        if (unit(rng) < cfg.warm_fraction) {
            auto liked = pick_item(rng);
            while (liked == target) {
                liked = pick_item(rng);
            }
            const auto& lc = kCues[liked];
            conv.turns.push_back(
                {Speaker::seeker, std::string("i really enjoyed ") + kTitles[liked] + " last week", {item_id(liked)}});
            conv.turns.push_back({Speaker::recommender,
                                  std::string("oh ") + kTitles[liked] + " is so " + lc[0] + " with " + lc[1] + " and " +
                                      lc[2] + "! what else do you like?",
                                  {}});
            conv.turns.push_back({Speaker::seeker, ask, {}});
        } else {
            conv.turns.push_back({Speaker::seeker, ask, {}});
        }
        const auto& tc = kCues[target];
        conv.turns.push_back({Speaker::recommender,
                              std::string("you should watch ") + kTitles[target] + ", it is " + tc[0] + " and " + tc[2] +
                                  " with " + tc[1],
                              {item_id(target)}});
        conv.turns.push_back({Speaker::seeker, "thanks, sounds great", {}});
        w.conversations.push_back(std::move(conv));
    }
    return w;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write '" + path + "'");
    }
    for (const auto& l : lines) {
        out << l << '\n';
    }
}

inline void write_items(const std::string& path, const std::vector<ItemRecord>& items) {
    std::vector<std::string> lines;
    for (const auto& i : items) {
        lines.push_back(to_json(i).dump());
    }
    write_lines(path, lines);
}

inline void write_conversations(const std::string& path, const std::vector<ConversationRecord>& convs) {
    std::vector<std::string> lines;
    for (const auto& c : convs) {
        lines.push_back(to_json(c).dump());
    }
    write_lines(path, lines);
}

}  // namespace klever::synthetic
