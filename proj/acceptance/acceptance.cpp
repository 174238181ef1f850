// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "klever/bow.hpp"
#include "klever/checkpoint.hpp"
#include "klever/evaluator.hpp"
#include "klever/link.hpp"
#include "klever/pipeline.hpp"
#include "klever/synthetic.hpp"
#include "planted.hpp"

using namespace klever;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool passed = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const Outcome& o) {
    std::cout << (o.passed ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.passed) ++failures;
}

Outcome guarded(const std::function<Outcome()>& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        return {false, std::string("exception: ") + e.what()};
    }
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

std::string sci(double v) {
    std::ostringstream s;
    s << std::scientific << std::setprecision(1) << v;
    return s.str();
}

struct Spawned {
    int code = -1;
    std::string output;
};

Spawned run_cli(const std::string& args) {
    const std::string cmd = std::string(KLEVER_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) throw std::runtime_error("cannot start " + cmd);
    Spawned s;
    char buf[512];
    while (std::fgets(buf, sizeof buf, pipe) != nullptr) s.output += buf;
    const int status = pclose(pipe);
    s.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return s;
}

Spawned must_run(const std::string& args) {
    auto s = run_cli(args);
    if (s.code != 0) throw std::runtime_error("`klever " + args + "` exited " + std::to_string(s.code) + ": " + s.output);
    return s;
}

ItemRecord make_record(const std::string& id, const std::string& title, std::vector<std::string> cats,
                       const std::string& desc) {
    ItemRecord r;
    r.item_id = id;
    r.title = title;
    r.categories = std::move(cats);
    r.description = desc;
    return r;
}

/// 3 items and 5 words (8 IDG nodes), 4 KG entities, d = 4.
Model gradient_model() {
    Catalog c;
    c.add(make_record("m1", "Ghost", {"horror"}, ""));
    c.add(make_record("m2", "Love", {"romance"}, ""));
    c.add(make_record("m3", "Space", {}, ""));
    IdgBuildConfig b;
    b.min_frequency = 1;
    const auto g = build_idg(c, b);
    TrainingConfig cfg;
    cfg.dim = 4;
    cfg.gen_dim = 3;
    cfg.attention_dim = 3;
    cfg.seed = 5;
    std::istringstream kg("m1\tgenre\tg:dark\nm3\tgenre\tg:dark\nm2\tmood\tg:light\n");
    auto item_kg = read_item_kg(kg, {"m1", "m2", "m3"});
    std::istringstream wk("ghost\thorror\nlove\tromance\n");
    auto word_kg = read_word_kg(wk, g.words());
    return build_model(std::move(c), g, cfg, item_kg, word_kg);
}

void randomize(ParamRegistry& reg, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, scale);
    for (auto& [_, p] : reg) {
        for (auto& v : p.value.data()) v = dist(rng);
    }
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    std::vector<std::string> failed;
    double worst = 0.0;
    auto check = [&](const std::string& name, const GradCheckReport& r) {
        worst = std::max(worst, r.max_relative_error);
        if (!r.passed || r.entries_checked == 0) failed.push_back(name + "(" + r.worst_parameter + ")");
    };

    // link objective on a 4 x 5 graph
    {
        std::mt19937_64 rng(17);
        DescriptiveGraph g({"a", "b", "c", "d"}, {"p", "q", "r", "s", "t"});
        std::bernoulli_distribution coin(0.4);
        for (std::size_t u = 0; u < 4; ++u)
            for (std::size_t w = 0; w < 5; ++w)
                if (coin(rng)) g.add_edge(u, w);
        g.add_edge(0, 0);
        ParamRegistry reg;
        init_embedding_store(reg, StoreShape{.entities = 4, .words = 5, .dim = 4, .layers = 1, .relations = 0}, rng);
        randomize(reg, 3, 0.6);
        const auto batch = sample_negatives(g, all_positives(g), 1, std::uint64_t{5});
        GradCheckOptions opts;
        opts.only = link_parameters(reg);
        check("L_link", finite_diff_check([&](ParamRegistry& r) { return link_objective(g, r, batch); }, reg, opts));
    }

    // recommendation objective (with and without the joint link term)
    auto m = gradient_model();
    randomize(m.params, 21, 0.6);
    const std::vector<RecExample> ex{{ConversationContext{{0}, {1, 4}}, 2},
                                     {ConversationContext{{}, {3, 0}}, 0},
                                     {ConversationContext{{1, 2}, {}}, 0}};
    const auto link = sample_negatives(m.idg, all_positives(m.idg), 1, std::uint64_t{3});
    GradCheckOptions rec_opts;
    rec_opts.only = recommendation_parameters(m.params);
    check("L_rec", finite_diff_check([&](ParamRegistry&) { return recommendation_objective(m, ex, nullptr, 0.0).rec; },
                                     m.params, rec_opts));
    check("L_rec+L_link", finite_diff_check(
                              [&](ParamRegistry&) { return recommendation_objective(m, ex, &link, 0.25).total(0.25); },
                              m.params, rec_opts));

    // bag-of-words head: lambda = 0 isolates the pr3 cross-entropy
    const Recommender rec(m);
    const BowSample sample{ConversationContext{{0}, {1, 3}}, {2, 4}};
    const auto in = bow_inputs(sample, rec);
    const Tensor words = rec.encoded().words;
    GradCheckOptions bow_opts;
    bow_opts.only = bow_parameters();
    for (double lambda : {0.0, 0.5, 3.0}) {
        check(lambda == 0.0 ? "pr3-CE" : "L_bow(lambda=" + fmt(lambda, 1) + ")",
              finite_diff_check(
                  [&](ParamRegistry& r) { return bow_objective(r, words, sample, in, lambda).total(lambda); },
                  m.params, bow_opts));
    }

    const double secs = seconds_since(t0);
    const bool ok = failed.empty() && secs < 30.0;
    std::string detail = "max rel err " + fmt(worst, 8) + " (tol 1e-4), " + fmt(secs, 1) + " s (limit 30 s)";
    for (const auto& f : failed) detail += ", failed " + f;
    return {ok, detail};
}

Outcome planted_link_auc() {
    const auto t0 = Clock::now();
    const auto planted = test::planted_graph(1);
    ParamRegistry reg;
    std::mt19937_64 rng(1);
    init_embedding_store(reg, StoreShape{.entities = 20, .words = 30, .dim = 4, .layers = 1, .relations = 0}, rng);
    const double before = test::held_out_auc(planted, reg);
    LinkTrainConfig cfg;
    cfg.epochs = 500;
    cfg.lr = 1e-3;
    cfg.seed = 1;
    train_link_prediction(planted.train, reg, cfg);
    const double auc = test::held_out_auc(planted, reg);
    const double secs = seconds_since(t0);
    return {auc >= 0.95 && secs < 60.0, "held-out AUC " + fmt(auc) + " (>= 0.95; untrained " + fmt(before) + "), " +
                                            std::to_string(planted.held_out.size()) + " held-out edges, " +
                                            fmt(secs, 1) + " s (limit 60 s)"};
}

struct EndToEnd {
    fs::path dir;
    bool ready = false;
};

double cold_recall_at_1(const fs::path& ckpt, const fs::path& convs, std::size_t* count = nullptr) {
    const auto out = must_run("eval --ckpt " + ckpt.string() + " --convs " + convs.string() + " --cold-start-only");
    const auto j = nlohmann::json::parse(out.output.substr(0, out.output.find('\n')));
    if (count != nullptr) *count = j.at("cold_start").at("count").get<std::size_t>();
    return j.at("cold_start").at("recall@1").get<double>();
}

std::string train_args(const fs::path& d, const std::string& idg, const std::string& out) {
    return "train --items " + (d / "items.jsonl").string() + " --convs " + (d / "train.jsonl").string() + " --idg " +
           (d / idg).string() + " --item-kg " + (d / "item_kg.tsv").string() + " --word-kg " +
           (d / "word_kg.tsv").string() + " --out " + (d / out).string();
}

Outcome end_to_end(EndToEnd& e2e) {
    const auto t0 = Clock::now();
    const auto& d = e2e.dir;
    must_run("synth --out-dir " + d.string() + " --convs 500 --heldout 100");
    must_run("build-idg --items " + (d / "items.jsonl").string() + " --out " + (d / "idg.tsv").string());
    must_run(train_args(d, "idg.tsv", "model.ckpt"));
    std::size_t count = 0;
    const double r1 = cold_recall_at_1(d / "model.ckpt", d / "test.jsonl", &count);
    const double secs = seconds_since(t0);
    e2e.ready = true;
    return {r1 >= 0.9 && count == 100 && secs < 300.0, "cold-start R@1 " + fmt(r1, 3) + " (>= 0.9) on " +
                                                           std::to_string(count) + " held-out examples, " +
                                                           fmt(secs, 1) + " s (limit 300 s)"};
}

Outcome keyword_sweep(const EndToEnd& e2e) {
    if (!e2e.ready) return {false, "end-to-end data unavailable"};
    const auto& d = e2e.dir;
    std::map<int, double> r1;
    for (int k : {1, 3, 6}) {
        const auto idg = "idg_k" + std::to_string(k) + ".tsv";
        const auto ckpt = "model_k" + std::to_string(k) + ".ckpt";
        must_run("build-idg --items " + (d / "items.jsonl").string() + " --out " + (d / idg).string() + " --top-k " +
                 std::to_string(k));
        // the bag-of-words head does not influence rankings
        must_run(train_args(d, idg, ckpt) + " --bow-epochs 0");
        r1[k] = cold_recall_at_1(d / ckpt, d / "test.jsonl");
    }
    return {r1[3] >= r1[1], "R@1 k=1 " + fmt(r1[1], 3) + ", k=3 " + fmt(r1[3], 3) + ", k=6 " + fmt(r1[6], 3) +
                                " (need k=3 >= k=1)"};
}

Outcome invariants(const EndToEnd& e2e) {
    std::vector<std::string> broken;
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal(0.0, 1.0);

    // softmax normalization
    double worst_sum = 0.0;
    for (int t = 0; t < 200; ++t) {
        std::vector<double> v(1 + t % 50);
        const double scale = std::pow(10.0, t % 4);
        for (auto& x : v) x = normal(rng) * scale;
        const auto p = softmax(v);
        worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
    }
    if (worst_sum > 1e-9) broken.push_back("softmax sum off by " + fmt(worst_sum, 12));

    // gate range and convex combination
    auto m = gradient_model();
    for (int t = 0; t < 50; ++t) {
        randomize(m.params, 1000 + t, 0.5);
        const Recommender rec(m);
        ConversationContext ctx{{static_cast<std::size_t>(t % 3)}, {static_cast<std::size_t>(t % m.num_words())}};
        const auto p = rec.preference(ctx);
        bool ok = p.beta > 0.0 && p.beta < 1.0;
        for (std::size_t i = 0; i < p.user.size(); ++i) {
            ok = ok && std::abs(p.user[i] - (p.beta * p.entity[i] + (1 - p.beta) * p.word[i])) < 1e-12;
        }
        if (!ok) {
            broken.push_back("gate at trial " + std::to_string(t));
            break;
        }
    }

    // bipartite, consistent, degree-capped descriptive graphs
    std::vector<Catalog> catalogs;
    {
        Catalog synth;
        for (const auto& it : synthetic::make_world({}).items) synth.add(it);
        catalogs.push_back(std::move(synth));
        const std::vector<std::string> pool{"ghost", "love", "space", "dark", "funny", "war", "alien", "kiss", "zombie"};
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (int c = 0; c < 20; ++c) {
            Catalog cat;
            for (int i = 0; i < 6; ++i) {
                std::string desc;
                for (int w = 0; w < 12; ++w) desc += pool[pick(rng)] + " ";
                cat.add(make_record("i" + std::to_string(i), "T" + std::to_string(i), {pool[pick(rng)]}, desc));
            }
            catalogs.push_back(std::move(cat));
        }
    }
    for (std::size_t k : {1, 2, 3, 30}) {
        for (const auto& cat : catalogs) {
            IdgBuildConfig b;
            b.min_frequency = 2;
            b.top_k = k;
            const auto g = build_idg(cat, b);
            bool ok = g.adjacency_consistent();
            for (std::size_t u = 0; u < g.num_items(); ++u) {
                const auto tags = tag_words(cat[*cat.find(g.items()[u])], b.stopwords);
                std::size_t extra = 0;
                for (auto w : g.item_neighbors(u)) {
                    ok = ok && w < g.num_words();
                    if (std::find(tags.begin(), tags.end(), g.words()[w]) == tags.end()) ++extra;
                }
                ok = ok && extra <= k;
            }
            for (const auto& word : g.words()) {
                ok = ok && std::find(g.items().begin(), g.items().end(), word) == g.items().end();
            }
            if (!ok) {
                broken.push_back("idg invariant at k=" + std::to_string(k));
                break;
            }
        }
    }

    // recall monotone in k; distinct-n in [0,1]
    {
        randomize(m.params, 5, 1.0);
        const Recommender rec(m);
        std::vector<EvalExample> ex;
        for (std::size_t i = 0; i < 60; ++i) {
            ex.push_back({ConversationContext{{}, {i % m.num_words()}}, i % m.num_items(), true, "c", 1});
        }
        const auto r = recall_at_k(rec, ex, {1, 2, 3});
        if (!(r.all.recall.at(1) <= r.all.recall.at(2) && r.all.recall.at(2) <= r.all.recall.at(3))) {
            broken.push_back("recall not monotone");
        }
        std::uniform_int_distribution<int> tok(0, 3);
        for (int t = 0; t < 100; ++t) {
            std::vector<std::vector<std::string>> seqs(1 + t % 4, std::vector<std::string>(t % 7));
            for (auto& s : seqs)
                for (auto& x : s) x = std::string(1, static_cast<char>('a' + tok(rng)));
            for (std::size_t n = 1; n <= 4; ++n) {
                const double v = distinct_n(seqs, n);
                if (v < 0.0 || v > 1.0) broken.push_back("distinct-" + std::to_string(n) + " = " + fmt(v));
            }
        }
    }

    // checkpoint byte identity (toy model and the trained end-to-end model)
    {
        const auto bytes = serialize_checkpoint(m);
        if (serialize_checkpoint(deserialize_checkpoint(bytes)) != bytes) broken.push_back("toy checkpoint resave");
        if (e2e.ready) {
            std::ifstream in(e2e.dir / "model.ckpt", std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            if (serialize_checkpoint(deserialize_checkpoint(buf.str())) != buf.str()) {
                broken.push_back("trained checkpoint resave");
            }
        }
    }

    // fixed-seed determinism of per-epoch losses
    {
        auto run = [] {
            synthetic::WorldConfig wc;
            wc.items = 6;
            wc.conversations = 40;
            const auto w = synthetic::make_world(wc);
            Catalog c;
            for (const auto& it : w.items) c.add(it);
            IdgBuildConfig b;
            b.min_frequency = 2;
            const auto g = build_idg(c, b);
            TrainingConfig cfg;
            cfg.dim = 8;
            cfg.gen_dim = 8;
            cfg.epochs = 3;
            cfg.bow_epochs = 3;
            auto model = build_model(std::move(c), g, cfg);
            const auto s = train_model(model, w.conversations);
            auto losses = s.rec.epoch_loss;
            losses.insert(losses.end(), s.bow.epoch_loss.begin(), s.bow.epoch_loss.end());
            return losses;
        };
        const auto a = run();
        if (a.size() != 6 || a != run()) broken.push_back("training losses differ between identical runs");
    }

    std::string detail = broken.empty() ? "softmax (max |sum-1| " + sci(worst_sum) +
                                              "), gate, IDG, recall monotonicity, distinct-n, checkpoint bytes, "
                                              "loss determinism"
                                        : "";
    for (const auto& b : broken) detail += (detail.empty() ? "" : "; ") + b;
    return {broken.empty(), detail};
}

Outcome oracle_equivalence() {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::size_t topk_mismatch = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + rng() % 60;
        std::vector<double> scores(n);
        for (auto& s : scores) s = std::round(normal(rng) * 4) / 4;  // ties on purpose
        const std::size_t k = 1 + rng() % (n + 3);
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
        idx.resize(std::min(k, n));
        const auto got = top_k(scores, k);
        bool same = got.size() == idx.size();
        for (std::size_t i = 0; same && i < idx.size(); ++i) same = got[i].item == idx[i];
        topk_mismatch += same ? 0 : 1;
    }

    std::size_t recall_mismatch = 0;
    const std::size_t items = 15;
    std::vector<EvalExample> ex;
    std::vector<std::vector<std::size_t>> outputs;
    for (std::size_t e = 0; e < 50; ++e) {
        ex.push_back({ConversationContext{}, rng() % items, e % 3 == 0, "c", 1});
        std::vector<std::size_t> order(items);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        outputs.push_back(order);
    }
    const std::vector<std::size_t> ks{1, 5, 10, 15};
    std::size_t call = 0;
    const auto r = recall_at_k([&](const ConversationContext&, std::size_t) { return outputs[call++]; }, ex, ks);
    for (auto k : ks) {
        std::size_t hits = 0, cold = 0, cold_hits = 0;
        for (std::size_t e = 0; e < ex.size(); ++e) {
            bool hit = false;
            for (std::size_t i = 0; i < k; ++i) hit = hit || outputs[e][i] == ex[e].target;
            hits += hit;
            if (ex[e].is_cold_start) {
                ++cold;
                cold_hits += hit;
            }
        }
        if (r.all.recall.at(k) != static_cast<double>(hits) / ex.size()) ++recall_mismatch;
        if (r.cold_start.recall.at(k) != static_cast<double>(cold_hits) / cold) ++recall_mismatch;
    }
    return {topk_mismatch == 0 && recall_mismatch == 0,
            "top-k mismatches " + std::to_string(topk_mismatch) + "/100, recall mismatches " +
                std::to_string(recall_mismatch) + " over 50 outputs x 4 cutoffs x 2 splits"};
}

Outcome bow_behavior(const EndToEnd& e2e) {
    if (!e2e.ready) return {false, "end-to-end checkpoint unavailable"};
    const Model m = load_checkpoint((e2e.dir / "model.ckpt").string());
    synthetic::WorldConfig wc;
    wc.conversations = 100;
    wc.warm_fraction = 1.0;
    wc.seed = 777;
    const auto held = build_bow_dataset(synthetic::make_world(wc).conversations, m);
    const auto gap = bow_neighbor_gap(Recommender(m), held);
    return {gap.samples > 0 && gap.gap() >= 0.2,
            "mean P_bow neighbors " + fmt(gap.neighbor) + " vs non-neighbors " + fmt(gap.non_neighbor) + ", gap " +
                fmt(gap.gap()) + " (>= 0.2) over " + std::to_string(gap.samples) + " held-out samples"};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
    fs::remove_all(work);
    fs::create_directories(work);
    EndToEnd e2e{work / "synthetic"};

    report("gradient-suite", guarded(gradient_suite));
    report("planted-link-auc", guarded(planted_link_auc));
    report("end-to-end-cold-start", guarded([&] { return end_to_end(e2e); }));
    report("keyword-sweep", guarded([&] { return keyword_sweep(e2e); }));
    report("invariants", guarded([&] { return invariants(e2e); }));
    report("oracle-equivalence", guarded(oracle_equivalence));
    report("bow-behavior", guarded([&] { return bow_behavior(e2e); }));

    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
