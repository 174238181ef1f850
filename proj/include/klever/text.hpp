#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "klever/error.hpp"

namespace klever {

using TokenStream = std::vector<std::string>;
using StopwordSet = std::unordered_set<std::string>;

namespace detail {

// Bytes >= 0x80 belong to UTF-8 multibyte sequences and are treated as letters.
inline bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

inline bool is_joiner(unsigned char c) { return c == '-' || c == '\''; }

inline bool all_digits(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace detail

/// Lowercases and splits on whitespace and punctuation. A hyphen or apostrophe
/// survives only between two word characters ("sci-fi", "don't"). Tokens made
/// only of digits are dropped.
inline TokenStream tokenize(std::string_view text) {
    TokenStream out;
    std::string current;
    auto flush = [&] {
        if (!current.empty() && !detail::all_digits(current)) {
            out.push_back(current);
        }
        current.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (detail::is_word_byte(c)) {
            current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else if (detail::is_joiner(c) && !current.empty() && i + 1 < text.size() &&
                   detail::is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
            current.push_back(static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

inline TokenStream remove_stopwords(const TokenStream& stream, const StopwordSet& stopwords) {
    TokenStream out;
    out.reserve(stream.size());
    std::copy_if(stream.begin(), stream.end(), std::back_inserter(out),
                 [&](const std::string& t) { return stopwords.count(t) == 0; });
    return out;
}

/// The 179-word English stopword list distributed with NLTK.
inline const StopwordSet& default_stopwords() {
    static const StopwordSet words = {
        "i",          "me",       "my",        "myself",  "we",         "our",      "ours",     "ourselves",
        "you",        "you're",   "you've",    "you'll",  "you'd",      "your",     "yours",    "yourself",
        "yourselves", "he",       "him",       "his",     "himself",    "she",      "she's",    "her",
        "hers",       "herself",  "it",        "it's",    "its",        "itself",   "they",     "them",
        "their",      "theirs",   "themselves", "what",   "which",      "who",      "whom",     "this",
        "that",       "that'll",  "these",     "those",   "am",         "is",       "are",      "was",
        "were",       "be",       "been",      "being",   "have",       "has",      "had",      "having",
        "do",         "does",     "did",       "doing",   "a",          "an",       "the",      "and",
        "but",        "if",       "or",        "because", "as",         "until",    "while",    "of",
        "at",         "by",       "for",       "with",    "about",      "against",  "between",  "into",
        "through",    "during",   "before",    "after",   "above",      "below",    "to",       "from",
        "up",         "down",     "in",        "out",     "on",         "off",      "over",     "under",
        "again",      "further",  "then",      "once",    "here",       "there",    "when",     "where",
        "why",        "how",      "all",       "any",     "both",       "each",     "few",      "more",
        "most",       "other",    "some",      "such",    "no",         "nor",      "not",      "only",
        "own",        "same",     "so",        "than",    "too",        "very",     "s",        "t",
        "can",        "will",     "just",      "don",     "don't",      "should",   "should've", "now",
        "d",          "ll",       "m",         "o",       "re",         "ve",       "y",        "ain",
        "aren",       "aren't",   "couldn",    "couldn't", "didn",      "didn't",   "doesn",    "doesn't",
        "hadn",       "hadn't",   "hasn",      "hasn't",  "haven",      "haven't",  "isn",      "isn't",
        "ma",         "mightn",   "mightn't",  "mustn",   "mustn't",    "needn",    "needn't",  "shan",
        "shan't",     "shouldn",  "shouldn't", "wasn",    "wasn't",     "weren",    "weren't",  "won",
        "won't",      "wouldn",   "wouldn't",
    };
    return words;
}

/// One word per line; blank lines and lines starting with '#' are skipped.
inline StopwordSet load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open stopword file '" + path + "'");
    }
    StopwordSet out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())) != 0) {
            line.pop_back();
        }
        auto start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') {
            continue;
        }
        std::string word = line.substr(start);
        std::transform(word.begin(), word.end(), word.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        out.insert(std::move(word));
    }
    return out;
}

}  // namespace klever
