#include <sstream>

#include <gtest/gtest.h>

#include "klever/kg.hpp"

using namespace klever;

TEST(ItemKg, SeedEntitiesComeFirstAndInversesAdded) {
    std::istringstream in("m2\tdirected_by\tp:nolan\nm1\tdirected_by\tp:nolan\n\nm1\tstarring\tp:bale\n");
    auto kg = read_item_kg(in, {"m1", "m2", "m3"});
    EXPECT_EQ(kg.entities, (std::vector<std::string>{"m1", "m2", "m3", "p:nolan", "p:bale"}));
    EXPECT_EQ(kg.relations, (std::vector<std::string>{"directed_by", "starring", "directed_by^-1", "starring^-1"}));
    EXPECT_EQ(kg.graph.edges().size(), 6u);
    // nolan receives from m1 and m2 over directed_by; m1 hears back over the inverse
    EXPECT_EQ(kg.graph.incoming(0, 3), (std::vector<std::size_t>{1, 0}));
    EXPECT_EQ(kg.graph.incoming(2, 0), (std::vector<std::size_t>{3}));
}

TEST(ItemKg, WithoutInverse) {
    std::istringstream in("a\tr\tb\n");
    auto kg = read_item_kg(in, {}, false);
    EXPECT_EQ(kg.relations.size(), 1u);
    EXPECT_TRUE(kg.graph.incoming(0, 0).empty());
}

TEST(ItemKg, MalformedLine) {
    std::istringstream in("a\tr\n");
    try {
        read_item_kg(in, {});
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1u);
    }
}

TEST(ItemKg, RelationOutOfRange) {
    RelationalGraph g(2, 1);
    EXPECT_THROW(g.add_edge(0, 1, 1), GraphError);
    EXPECT_THROW(g.add_edge(0, 0, 2), GraphError);
}

TEST(WordKg, UndirectedWithoutSelfLoopsOrDuplicates) {
    std::istringstream in("ghost\tspirit\nspirit\tghost\nghost\tghost\nghost\tscary\n");
    auto wk = read_word_kg(in, {"scary"});
    EXPECT_EQ(wk.words, (std::vector<std::string>{"scary", "ghost", "spirit"}));
    EXPECT_EQ(wk.graph.edges().size(), 2u);
    EXPECT_EQ(wk.graph.neighbors(1).size(), 2u);
    EXPECT_EQ(wk.graph.neighbors(0), std::vector<std::size_t>{1});
}

TEST(WordKg, MissingFile) { EXPECT_THROW(load_word_kg("/nonexistent/kg.tsv", {}), IoError); }
