#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "klever/bow.hpp"
#include "klever/corpus.hpp"
#include "klever/error.hpp"
#include "klever/model.hpp"
#include "klever/recommender.hpp"

namespace klever {

// Chat sessions live in memory only; restarting the service drops them.

struct ChatSession {
    std::string id;
    std::chrono::system_clock::time_point created;
    std::vector<std::string> utterances;
    ContextAccumulator context;
    std::mutex mutex;

    ChatSession(std::string session_id, const Model& m)
        : id(std::move(session_id)), created(std::chrono::system_clock::now()),
          context(m.catalog, m.vocab, m.stopwords) {}
};

struct ServiceResponse {
    int status = 200;
    nlohmann::json body;
};

inline ServiceResponse error_response(int status, const std::string& message) {
    return {status, nlohmann::json{{"error", message}}};
}

/// Request handling independent of the transport. The model and its encoded
/// snapshot are immutable; each session is mutated under its own mutex.
class ChatService {
public:
    explicit ChatService(std::shared_ptr<const Model> model, std::size_t top_k = 10)
        : model_(std::move(model)), rec_(*model_), top_k_(top_k), rng_(std::random_device{}()) {}

    [[nodiscard]] const Model& model() const noexcept { return *model_; }
    [[nodiscard]] const Recommender& recommender() const noexcept { return rec_; }

    ServiceResponse create_session() {
        std::unique_lock lock(sessions_mutex_);
        std::string id;
        do {
            id = new_id();
        } while (sessions_.count(id) != 0);
        sessions_.emplace(id, std::make_shared<ChatSession>(id, *model_));
        return {201, nlohmann::json{{"session_id", id}}};
    }

    ServiceResponse delete_session(const std::string& id) {
        std::unique_lock lock(sessions_mutex_);
        if (sessions_.erase(id) == 0) {
            return error_response(404, "unknown session '" + id + "'");
        }
        return {204, nullptr};
    }

    ServiceResponse get_session(const std::string& id) const {
        auto s = find(id);
        if (!s) {
            return error_response(404, "unknown session '" + id + "'");
        }
        std::lock_guard lock(s->mutex);
        return {200, summary(*s)};
    }

    ServiceResponse post_message(const std::string& id, const std::string& raw_body) {
        auto s = find(id);
        if (!s) {
            return error_response(404, "unknown session '" + id + "'");
        }
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(raw_body);
        } catch (const nlohmann::json::exception&) {
            return error_response(400, "request body is not valid JSON");
        }
        if (!body.is_object() || !body.contains("text") || !body.at("text").is_string()) {
            return error_response(400, "request body must be an object with a string field 'text'");
        }
        const auto text = body.at("text").get<std::string>();

        std::lock_guard lock(s->mutex);
        s->utterances.push_back(text);
        s->context.add_turn(Turn{Speaker::seeker, text, {}});
        return {200, reply(s->context.context())};
    }

    ServiceResponse get_item(const std::string& item_id) const {
        auto idx = model_->catalog.find(item_id);
        if (!idx) {
            return error_response(404, "unknown item '" + item_id + "'");
        }
        return {200, to_json(model_->catalog[*idx])};
    }

    [[nodiscard]] std::size_t session_count() const {
        std::shared_lock lock(sessions_mutex_);
        return sessions_.size();
    }

    /// Reply payload for a context; exposed for tests and the CLI.
    [[nodiscard]] nlohmann::json reply(const ConversationContext& ctx) const {
        const auto& m = *model_;
        const auto pref = rec_.preference(ctx);
        const auto probs = score_items(pref.user, rec_.encoded().items);
        const auto top = top_k(probs, top_k_, ctx.entities);

        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : top) {
            const auto& item = m.catalog[r.item];
            recs.push_back({{"item_id", item.item_id}, {"title", item.title}, {"score", r.probability}});
        }
        std::string reply_text = top.empty() ? std::string("I have nothing new to recommend right now.")
                                             : "I would recommend " + m.catalog[top.front().item].title + ".";

        std::vector<std::string> words;
        for (auto w : ctx.words) {
            words.push_back(m.vocab[w]);
        }
        std::vector<std::string> entities;
        for (auto e : ctx.entities) {
            entities.push_back(m.catalog[e].item_id);
        }

        std::vector<std::string> keywords;
        const auto p_bow = context_bow_distribution(rec_, ctx);
        std::vector<std::size_t> order(p_bow.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto n = std::min<std::size_t>(10, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                          [&](std::size_t a, std::size_t b) { return p_bow[a] != p_bow[b] ? p_bow[a] > p_bow[b] : a < b; });
        for (std::size_t i = 0; i < n; ++i) {
            keywords.push_back(m.vocab[order[i]]);
        }

        return {{"reply_text", reply_text},       {"recommendations", recs}, {"gate_beta", pref.beta},
                {"matched_words", words},         {"matched_entities", entities},
                {"bow_keywords", keywords}};
    }

private:
    std::shared_ptr<ChatSession> find(const std::string& id) const {
        std::shared_lock lock(sessions_mutex_);
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

    nlohmann::json summary(const ChatSession& s) const {
        const auto& ctx = s.context.context();
        std::vector<std::string> words;
        for (auto w : ctx.words) {
            words.push_back(model_->vocab[w]);
        }
        std::vector<std::string> entities;
        for (auto e : ctx.entities) {
            entities.push_back(model_->catalog[e].item_id);
        }
        const auto created =
            std::chrono::duration_cast<std::chrono::seconds>(s.created.time_since_epoch()).count();
        return {{"session_id", s.id},     {"created_at", created},      {"turns", s.utterances.size()},
                {"utterances", s.utterances}, {"matched_words", words}, {"matched_entities", entities}};
    }

    // called with sessions_mutex_ held exclusively
    std::string new_id() {
        static constexpr char hex[] = "0123456789abcdef";
        std::string id(16, '0');
        for (auto& c : id) {
            c = hex[rng_() & 0xf];
        }
        return id;
    }

    std::shared_ptr<const Model> model_;
    Recommender rec_;
    std::size_t top_k_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<ChatSession>> sessions_;
    std::mt19937_64 rng_;
};

namespace detail {

inline void send(httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    if (r.status != 204) {
        res.set_content(r.body.dump(), "application/json; charset=utf-8");
    }
}

}  // namespace detail

/// Registers the API routes on `server`.
inline void mount_routes(httplib::Server& server, ChatService& service) {
    using httplib::Request;
    using httplib::Response;
    server.Get("/healthz", [](const Request&, Response& res) { res.set_content("ok", "text/plain"); });
    server.Post("/api/session", [&service](const Request&, Response& res) { detail::send(res, service.create_session()); });
    server.Post(R"(/api/session/([^/]+)/message)", [&service](const Request& req, Response& res) {
        detail::send(res, service.post_message(req.matches[1], req.body));
    });
    server.Get(R"(/api/session/([^/]+))", [&service](const Request& req, Response& res) {
        detail::send(res, service.get_session(req.matches[1]));
    });
    server.Delete(R"(/api/session/([^/]+))", [&service](const Request& req, Response& res) {
        detail::send(res, service.delete_session(req.matches[1]));
    });
    server.Get(R"(/api/items/([^/]+))", [&service](const Request& req, Response& res) {
        detail::send(res, service.get_item(req.matches[1]));
    });
    server.set_exception_handler([](const Request&, Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        detail::send(res, error_response(500, what));
    });
    server.set_error_handler([](const Request&, Response& res) {
        if (res.body.empty()) {
            detail::send(res, error_response(res.status, "no route for this request"));
        }
    });
}

/// Blocks serving on host:port until the server is stopped.
inline void http_service(std::shared_ptr<const Model> model, int port, const std::string& host = "0.0.0.0") {
    ChatService service(std::move(model));
    httplib::Server server;
    mount_routes(server, service);
    if (!server.listen(host, port)) {
        throw IoError("cannot listen on " + host + ":" + std::to_string(port));
    }
}

}  // namespace klever
