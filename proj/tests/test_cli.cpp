#include <cstdio>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "klever/cli.hpp"
#include "support.hpp"

using namespace klever;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run dispatch(std::vector<std::string> args) {
    args.insert(args.begin(), "klever");
    std::ostringstream out, err;
    const int code = cli_dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

/// Runs the real binary; returns exit status and combined output.
Run spawn(const std::string& args) {
    const std::string cmd = std::string(KLEVER_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) throw std::runtime_error("popen failed");
    std::string text;
    char buf[512];
    while (std::fgets(buf, sizeof buf, pipe) != nullptr) text += buf;
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, text, {}};
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) {
        if (!l.empty()) out.push_back(l);
    }
    return out;
}

}  // namespace

class CliPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = test::temp_dir("cli").string();
        const auto synth = dispatch({"synth", "--out-dir", dir_, "--convs", "120", "--heldout", "20", "--items", "6"});
        ASSERT_EQ(synth.code, 0) << synth.err;
        const auto idg = dispatch({"build-idg", "--items", dir_ + "/items.jsonl", "--out", dir_ + "/idg.tsv"});
        ASSERT_EQ(idg.code, 0) << idg.err;
        const auto train = dispatch({"train", "--items", dir_ + "/items.jsonl", "--convs", dir_ + "/train.jsonl",
                                     "--idg", dir_ + "/idg.tsv", "--item-kg", dir_ + "/item_kg.tsv", "--word-kg",
                                     dir_ + "/word_kg.tsv", "--out", dir_ + "/model.ckpt", "--epochs", "3",
                                     "--bow-epochs", "1", "--dim", "8", "--lr", "0.01"});
        ASSERT_EQ(train.code, 0) << train.err;
    }

    static std::string dir_;
};

std::string CliPipeline::dir_;

TEST_F(CliPipeline, SynthWritesEveryFile) {
    for (const auto* f : {"items.jsonl", "train.jsonl", "test.jsonl", "item_kg.tsv", "word_kg.tsv", "idg.tsv",
                          "model.ckpt"}) {
        EXPECT_TRUE(std::filesystem::exists(dir_ + "/" + f)) << f;
    }
    EXPECT_EQ(lines(test::read_file(dir_ + "/items.jsonl")).size(), 6u);
    EXPECT_EQ(lines(test::read_file(dir_ + "/test.jsonl")).size(), 20u);
}

TEST_F(CliPipeline, RecommendPrintsKRankedLines) {
    const auto r = spawn("recommend --ckpt " + dir_ + "/model.ckpt --text 'any good scary movies?' --k 3");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto ls = lines(r.out);
    ASSERT_EQ(ls.size(), 3u) << r.out;
    for (std::size_t i = 0; i < ls.size(); ++i) {
        std::istringstream in(ls[i]);
        std::size_t rank = 0;
        std::string id;
        double score = -1;
        in >> rank >> id >> score;
        EXPECT_EQ(rank, i + 1);
        EXPECT_EQ(id[0], 'm');
        EXPECT_GT(score, 0.0);
        EXPECT_LE(score, 1.0);
    }
}

TEST_F(CliPipeline, EvalReportsJsonAndTable) {
    const auto r = dispatch({"eval", "--ckpt", dir_ + "/model.ckpt", "--convs", dir_ + "/test.jsonl"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto first = r.out.substr(0, r.out.find('\n'));
    const auto j = nlohmann::json::parse(first);
    EXPECT_EQ(j["cold_start"]["count"], 20);
    EXPECT_TRUE(j["all"].contains("recall@50"));
    EXPECT_NE(r.out.find("Cold-start R@1"), std::string::npos);

    const auto cold = dispatch({"eval", "--ckpt", dir_ + "/model.ckpt", "--convs", dir_ + "/test.jsonl",
                                "--cold-start-only"});
    ASSERT_EQ(cold.code, 0);
    const auto jc = nlohmann::json::parse(cold.out.substr(0, cold.out.find('\n')));
    EXPECT_FALSE(jc.contains("all"));
    EXPECT_EQ(cold.out.find("All R@"), std::string::npos);
}

TEST_F(CliPipeline, UnknownFlagIsAUsageError) {
    const auto r = spawn("recommend --ckpt " + dir_ + "/model.ckpt --text hi --bogus 3");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("--bogus"), std::string::npos) << r.out;
}

TEST(Cli, MissingRequiredFlagNamesIt) {
    const auto r = dispatch({"recommend", "--text", "hello"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("--ckpt"), std::string::npos) << r.err;
}

TEST(Cli, NoSubcommandIsAUsageError) {
    EXPECT_EQ(dispatch({}).code, kExitUsage);
    EXPECT_EQ(spawn("").code, 1);
}

TEST(Cli, InvalidValuesAreUsageErrors) {
    EXPECT_EQ(dispatch({"recommend", "--ckpt", "x", "--text", "y", "--k", "0"}).code, kExitUsage);
    EXPECT_EQ(dispatch({"build-idg", "--items", "x", "--out", "y", "--top-k", "abc"}).code, kExitUsage);
}

TEST(Cli, RuntimeFailuresExitTwo) {
    const auto dir = test::temp_dir("cli_err");
    const auto r = dispatch({"recommend", "--ckpt", (dir / "missing.ckpt").string(), "--text", "hi"});
    EXPECT_EQ(r.code, kExitRuntime);
    EXPECT_NE(r.err.find("missing.ckpt"), std::string::npos);
    test::write_file(dir / "bad.jsonl", "{not json}\n");
    const auto b = spawn("build-idg --items " + (dir / "bad.jsonl").string() + " --out " + (dir / "g.tsv").string());
    EXPECT_EQ(b.code, 2);
    EXPECT_NE(b.out.find("bad.jsonl:1:"), std::string::npos) << b.out;
}

TEST(Cli, BuildIdgHonoursThresholds) {
    const auto dir = test::temp_dir("cli_idg");
    test::write_file(dir / "items.jsonl",
                     R"({"item_id":"m1","title":"Nightshade","categories":["horror"],"description":"ghost ghost scary","reviews":[]})"
                     "\n"
                     R"({"item_id":"m2","title":"Sweetheart","categories":["romance"],"description":"love love ghost","reviews":[]})"
                     "\n");
    const auto r = dispatch({"build-idg", "--items", (dir / "items.jsonl").string(), "--out",
                             (dir / "g.tsv").string(), "--min-freq", "2", "--top-k", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto g = load_idg((dir / "g.tsv").string());
    auto index = [](const std::vector<std::string>& v, const std::string& x) {
        return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
    };
    const auto& words = g.words();
    EXPECT_EQ(index(words, "scary"), words.size());  // below the frequency threshold
    EXPECT_TRUE(g.has_edge(index(g.items(), "m1"), index(words, "ghost")));
    EXPECT_TRUE(g.has_edge(index(g.items(), "m2"), index(words, "love")));
}
