#pragma once

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "klever/checkpoint.hpp"
#include "klever/config.hpp"
#include "klever/corpus.hpp"
#include "klever/evaluator.hpp"
#include "klever/idg.hpp"
#include "klever/kg.hpp"
#include "klever/model.hpp"
#include "klever/pipeline.hpp"
#include "klever/service.hpp"
#include "klever/synthetic.hpp"

namespace klever {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

namespace detail {

struct TrainArgs {
    std::string items, convs, idg, item_kg, word_kg, out, config, stopwords;
    std::optional<std::size_t> epochs, bow_epochs, dim, batch_size;
    std::optional<std::uint64_t> seed;
    std::optional<double> lr;
};

inline StopwordSet stopwords_from(const std::string& path) {
    return path.empty() ? default_stopwords() : load_stopwords(path);
}

inline int run_build_idg(const std::string& items, const std::string& out, std::size_t min_freq, std::size_t top_k,
                         const std::string& stopwords, std::ostream& log) {
    const auto catalog = load_items(items);
    IdgBuildConfig cfg;
    cfg.min_frequency = min_freq;
    cfg.top_k = top_k;
    cfg.stopwords = stopwords_from(stopwords);
    const auto g = build_idg(catalog, cfg);
    save_idg(g, out);
    log << "wrote " << g.num_edges() << " edges (" << g.num_items() << " items, " << g.num_words() << " words) to "
        << out << '\n';
    return kExitOk;
}

inline int run_train(const TrainArgs& a, std::ostream& log) {
    TrainingConfig cfg;
    if (!a.config.empty()) {
        cfg = load_config(a.config);
    }
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.bow_epochs) cfg.bow_epochs = *a.bow_epochs;
    if (a.dim) cfg.dim = *a.dim;
    if (a.batch_size) cfg.batch_size = *a.batch_size;
    if (a.seed) cfg.seed = *a.seed;
    if (a.lr) cfg.lr = *a.lr;
    cfg.validate();

    auto catalog = load_items(a.items);
    const auto convs = load_conversations(a.convs);
    const auto graph = load_idg(a.idg);
    std::vector<std::string> item_ids;
    for (const auto& item : catalog.items()) {
        item_ids.push_back(item.item_id);
    }
    std::optional<NamedRelationalGraph> item_kg;
    if (!a.item_kg.empty()) {
        item_kg = load_item_kg(a.item_kg, item_ids);
    }
    std::optional<NamedWordGraph> word_kg;
    if (!a.word_kg.empty()) {
        word_kg = load_word_kg(a.word_kg, graph.words());
    }
    for (const auto& problem : validate_conversations(convs, catalog)) {
        log << "warning: " << problem << '\n';
    }

    Model m = build_model(std::move(catalog), graph, cfg, item_kg, word_kg, stopwords_from(a.stopwords));
    const auto summary = train_model(m, convs);
    log << "recommendation examples: " << summary.rec_examples << ", bow samples: " << summary.bow_samples << '\n';
    for (std::size_t e = 0; e < summary.rec.epoch_loss.size(); ++e) {
        log << "rec epoch " << e + 1 << " loss " << summary.rec.epoch_loss[e] << '\n';
    }
    for (std::size_t e = 0; e < summary.bow.epoch_loss.size(); ++e) {
        log << "bow epoch " << e + 1 << " loss " << summary.bow.epoch_loss[e] << '\n';
    }
    save_checkpoint(m, a.out);
    log << "saved checkpoint to " << a.out << '\n';
    return kExitOk;
}

inline int run_eval(const std::string& ckpt, const std::string& convs_path, bool cold_only, std::ostream& out) {
    const Model m = load_checkpoint(ckpt);
    const auto convs = load_conversations(convs_path);
    auto examples = build_eval_set(convs, m.catalog, m.vocab, m.stopwords);
    if (cold_only) {
        std::erase_if(examples, [](const EvalExample& e) { return !e.is_cold_start; });
    }
    const Recommender rec(m);
    const auto report = recall_at_k(rec, examples);
    nlohmann::json j = to_json(report);
    if (cold_only) {
        j.erase("all");
    }
    out << j.dump() << '\n' << format_table(report, cold_only);
    return kExitOk;
}

inline int run_recommend(const std::string& ckpt, const std::string& text, std::size_t k, std::ostream& out) {
    const Model m = load_checkpoint(ckpt);
    ContextAccumulator acc(m.catalog, m.vocab, m.stopwords);
    acc.add_turn(Turn{Speaker::seeker, text, {}});
    const Recommender rec(m);
    const auto top = rec.recommend_topk(acc.context(), k);
    out << std::setprecision(6);
    for (std::size_t i = 0; i < top.size(); ++i) {
        out << i + 1 << '\t' << m.catalog[top[i].item].item_id << '\t' << top[i].probability << '\n';
    }
    return kExitOk;
}

inline int run_serve(const std::string& ckpt, int port, const std::string& host, std::ostream& log) {
    auto model = std::make_shared<const Model>(load_checkpoint(ckpt));
    log << "serving " << model->num_items() << " items on " << host << ':' << port << '\n' << std::flush;
    http_service(model, port, host);
    return kExitOk;
}

inline int run_synth(const std::string& dir, std::size_t conversations, std::size_t heldout, std::size_t items,
                     std::uint64_t seed, std::ostream& log) {
    std::filesystem::create_directories(dir);
    synthetic::WorldConfig cfg;
    cfg.items = items;
    cfg.conversations = conversations;
    cfg.seed = seed;
    const auto world = synthetic::make_world(cfg);
    synthetic::WorldConfig test_cfg = cfg;
    test_cfg.conversations = heldout;
    test_cfg.warm_fraction = 0.0;
    test_cfg.seed = seed + 1;
    const auto test = synthetic::make_world(test_cfg);
    const std::filesystem::path d(dir);
    synthetic::write_items((d / "items.jsonl").string(), world.items);
    synthetic::write_conversations((d / "train.jsonl").string(), world.conversations);
    synthetic::write_conversations((d / "test.jsonl").string(), test.conversations);
    synthetic::write_lines((d / "item_kg.tsv").string(), world.item_kg);
    synthetic::write_lines((d / "word_kg.tsv").string(), world.word_kg);
    log << "wrote " << world.items.size() << " items, " << world.conversations.size() << " training and "
        << test.conversations.size() << " held-out conversations to " << dir << '\n';
    return kExitOk;
}

}  // namespace detail

/// Entry point of the `klever` tool. Returns 0 on success, 1 on usage
/// errors (the message names the offending flag) and 2 on runtime errors.
inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
    CLI::App app{"klever: knowledge-enhanced conversational recommender"};
    app.require_subcommand(1);

    std::string items, out_path, stopwords;
    std::size_t min_freq = 10;
    std::size_t top_k_words = 30;
    auto* build = app.add_subcommand("build-idg", "build the item descriptive graph from an item catalog");
    build->add_option("--items", items, "items JSONL")->required();
    build->add_option("--out", out_path, "output graph TSV")->required();
    build->add_option("--min-freq", min_freq, "corpus-wide frequency threshold m")->check(CLI::PositiveNumber);
    build->add_option("--top-k", top_k_words, "words kept per item k")->check(CLI::PositiveNumber);
    build->add_option("--stopwords", stopwords, "stopword list (one word per line)");

    detail::TrainArgs t;
    auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
    train->add_option("--items", t.items)->required();
    train->add_option("--convs", t.convs)->required();
    train->add_option("--idg", t.idg)->required();
    train->add_option("--item-kg", t.item_kg);
    train->add_option("--word-kg", t.word_kg);
    train->add_option("--out", t.out)->required();
    train->add_option("--config", t.config, "JSON config; flags below override it");
    train->add_option("--stopwords", t.stopwords);
    train->add_option("--epochs", t.epochs);
    train->add_option("--bow-epochs", t.bow_epochs);
    train->add_option("--dim", t.dim);
    train->add_option("--batch-size", t.batch_size);
    train->add_option("--seed", t.seed);
    train->add_option("--lr", t.lr);

    std::string ckpt, convs;
    bool cold_only = false;
    auto* eval = app.add_subcommand("eval", "report Recall@k on a conversation file");
    eval->add_option("--ckpt", ckpt)->required();
    eval->add_option("--convs", convs)->required();
    eval->add_flag("--cold-start-only", cold_only);

    std::string text;
    std::size_t k = 10;
    auto* recommend = app.add_subcommand("recommend", "rank items for a single utterance");
    recommend->add_option("--ckpt", ckpt)->required();
    recommend->add_option("--text", text)->required();
    recommend->add_option("--k", k)->check(CLI::PositiveNumber);

    int port = 8080;
    std::string host = "0.0.0.0";
    auto* serve = app.add_subcommand("serve", "run the HTTP chat service");
    serve->add_option("--ckpt", ckpt)->required();
    serve->add_option("--port", port)->required()->check(CLI::Range(0, 65535));
    serve->add_option("--host", host);

    std::string dir;
    std::size_t n_convs = 500;
    std::size_t n_heldout = 100;
    std::size_t n_items = synthetic::kMaxItems;
    std::uint64_t seed = 2024;
    auto* synth = app.add_subcommand("synth", "write a small synthetic corpus with known structure");
    synth->add_option("--out-dir", dir)->required();
    synth->add_option("--convs", n_convs);
    synth->add_option("--heldout", n_heldout);
    synth->add_option("--items", n_items);
    synth->add_option("--seed", seed);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) {
        reversed.pop_back();  // program name
    }
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (build->parsed()) {
            return detail::run_build_idg(items, out_path, min_freq, top_k_words, stopwords, err);
        }
        if (train->parsed()) {
            return detail::run_train(t, err);
        }
        if (eval->parsed()) {
            return detail::run_eval(ckpt, convs, cold_only, out);
        }
        if (recommend->parsed()) {
            return detail::run_recommend(ckpt, text, k, out);
        }
        if (serve->parsed()) {
            return detail::run_serve(ckpt, port, host, err);
        }
        if (synth->parsed()) {
            return detail::run_synth(dir, n_convs, n_heldout, n_items, seed, err);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

inline int cli_dispatch(int argc, char** argv) {
    return cli_dispatch(std::vector<std::string>(argv, argv + argc));
}

}  // namespace klever
