#include <sstream>

#include <gtest/gtest.h>

#include "klever/corpus.hpp"
#include "support.hpp"

using namespace klever;
using klever::test::recommender;
using klever::test::seeker;

TEST(Items, TwoValidLines) {
    std::istringstream in(R"({"item_id":"m1","title":"A"}
{"item_id":"m2","title":"B","categories":["horror"],"reviews":["good"]}
)");
    auto c = read_items(in);
    EXPECT_EQ(c.size(), 2u);
    EXPECT_EQ(c[1].categories, std::vector<std::string>{"horror"});
    EXPECT_EQ(c.index_of("m2"), 1u);
}

TEST(Items, DuplicateIdCitesLine) {
    std::istringstream in(R"({"item_id":"m1"}
{"item_id":"m2"}
{"item_id":"m1"}
)");
    try {
        read_items(in);
        FAIL() << "expected DuplicateKeyError";
    } catch (const DuplicateKeyError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("m1"), std::string::npos);
    }
}

TEST(Items, MalformedLineCitesLine) {
    std::istringstream in("{\"item_id\":\"m1\"}\n\n{not json\n");
    try {
        read_items(in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    std::istringstream missing("{\"title\":\"x\"}\n");
    EXPECT_THROW(read_items(missing), ParseError);
    std::istringstream wrong_type("{\"item_id\":\"m1\",\"categories\":\"horror\"}\n");
    EXPECT_THROW(read_items(wrong_type), ParseError);
}

TEST(Items, LargeCatalogLoads) {
    auto dir = test::temp_dir("catalog6924");
    std::ostringstream text;
    for (int i = 0; i < 6924; ++i) {
        ItemRecord r = test::item("m" + std::to_string(i), "Movie " + std::to_string(i), {"drama"},
                                  "a film about things", {"nice", "bad"});
        text << to_json(r).dump() << '\n';
    }
    test::write_file(dir / "items.jsonl", text.str());
    auto c = load_items((dir / "items.jsonl").string());
    EXPECT_EQ(c.size(), 6924u);
}

TEST(Items, JsonRoundTrip) {
    auto r = test::item("m9", "Title", {"a", "b"}, "desc", {"r1"});
    r.keywords = {"k"};
    EXPECT_EQ(parse_item(to_json(r)), r);
}

TEST(Catalog, TitleMatching) {
    Catalog c;
    c.add(test::item("m1", "The Conjuring", {}, ""));
    c.add(test::item("m2", "Up", {}, ""));
    auto hits = c.match_titles(tokenize("have you seen the conjuring? or up"));
    EXPECT_EQ(hits, (std::vector<std::size_t>{0, 1}));
    EXPECT_TRUE(c.match_titles(tokenize("the conjurings")).empty());
}

namespace {

struct Fixture {
    Catalog catalog = test::toy_catalog();
    Vocabulary vocab{std::vector<std::string>{"horror", "ghost", "love"}};
    StopwordSet stop = default_stopwords();
};

}  // namespace

TEST(Context, MentionAtTurnZero) {
    Fixture f;
    ConversationRecord conv{"c", {seeker("hi", {"m1"})}};
    auto ctx = extract_context(conv, 0, f.catalog, f.vocab, f.stop);
    EXPECT_EQ(ctx.entities, std::vector<std::size_t>{0});
    EXPECT_TRUE(ctx.words.empty());
}

TEST(Context, WordOnlyContext) {
    Fixture f;
    ConversationRecord conv{"c", {seeker("any good horror movies?")}};
    auto ctx = extract_context(conv, 0, f.catalog, f.vocab, f.stop);
    EXPECT_TRUE(ctx.entities.empty());
    EXPECT_EQ(ctx.words, std::vector<std::size_t>{0});
    EXPECT_TRUE(ctx.cold_start());
}

TEST(Context, EntitiesDeduplicatedInOrder) {
    Fixture f;
    ConversationRecord conv{"c", {seeker("x", {"m1"}), recommender("y", {"m1", "m2"}), seeker("z")}};
    auto ctx = extract_context(conv, 1, f.catalog, f.vocab, f.stop);
    EXPECT_EQ(ctx.entities, (std::vector<std::size_t>{0, 1}));
    EXPECT_THROW(extract_context(conv, 3, f.catalog, f.vocab, f.stop), Error);
}

TEST(Context, AccumulatorMatchesExtract) {
    Fixture f;
    ConversationRecord conv{
        "c", {seeker("ghost love", {"m3"}), recommender("Nightshade maybe", {}), seeker("horror ghost please", {"m2"})}};
    ContextAccumulator acc(f.catalog, f.vocab, f.stop);
    for (std::size_t t = 0; t < conv.turns.size(); ++t) {
        acc.add_turn(conv.turns[t]);
        EXPECT_EQ(acc.context(), extract_context(conv, t, f.catalog, f.vocab, f.stop));
    }
    EXPECT_EQ(acc.context().entities, (std::vector<std::size_t>{2, 0, 1}));
    EXPECT_EQ(acc.context().words, (std::vector<std::size_t>{1, 2, 0}));
}

TEST(Conversations, ParseAndValidate) {
    std::istringstream in(
        R"({"conv_id":"c1","turns":[{"speaker":"seeker","text":"hi","mentioned_items":["m1"]},{"speaker":"recommender","text":"try","mentioned_items":["m404"]}]})"
        "\n");
    auto convs = read_conversations(in);
    ASSERT_EQ(convs.size(), 1u);
    EXPECT_EQ(convs[0].turns[1].speaker, Speaker::recommender);
    auto problems = validate_conversations(convs, test::toy_catalog());
    ASSERT_EQ(problems.size(), 1u);
    EXPECT_NE(problems[0].find("m404"), std::string::npos);

    std::istringstream bad(R"({"conv_id":"c1","turns":[{"speaker":"robot","text":"hi"}]})");
    EXPECT_THROW(read_conversations(bad), ParseError);
    std::istringstream empty_turns(R"({"conv_id":"c1","turns":[]})");
    EXPECT_THROW(read_conversations(empty_turns), ParseError);
}
