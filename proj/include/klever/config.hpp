#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "klever/error.hpp"

namespace klever {

/// Hyperparameters. Defaults for d, d_gen, layers, lr, lambdas, m and k are
/// the published settings; the remaining fields are sized for desk-scale runs.
struct TrainingConfig {
    std::size_t dim = 128;        // d
    std::size_t gen_dim = 300;    // d_gen
    std::size_t gnn_layers = 1;
    double lr = 1e-3;
    double lambda_link = 0.25;    // lambda_1
    double lambda_bow = 0.5;      // lambda_2
    std::size_t min_frequency = 10;  // m
    std::size_t top_k = 30;          // k
    std::size_t negative_ratio = 1;
    std::size_t epochs = 30;
    std::size_t bow_epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 42;
    std::size_t attention_dim = 0;  // 0 means d
    bool idg_normalize = false;

    [[nodiscard]] std::size_t effective_attention_dim() const { return attention_dim == 0 ? dim : attention_dim; }

    void validate() const {
        if (dim == 0 || gen_dim == 0 || gnn_layers == 0 || min_frequency == 0 || top_k == 0 || negative_ratio == 0 ||
            batch_size == 0) {
            throw Error("config: dimensions, layers, m, k, negative_ratio and batch_size must be positive");
        }
        if (!(lr > 0.0) || lambda_link < 0.0 || lambda_bow < 0.0) {
            throw Error("config: lr must be positive and lambdas non-negative");
        }
    }

    friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

inline nlohmann::json to_json(const TrainingConfig& c) {
    return {
        {"dim", c.dim},
        {"gen_dim", c.gen_dim},
        {"gnn_layers", c.gnn_layers},
        {"lr", c.lr},
        {"lambda_link", c.lambda_link},
        {"lambda_bow", c.lambda_bow},
        {"min_frequency", c.min_frequency},
        {"top_k", c.top_k},
        {"negative_ratio", c.negative_ratio},
        {"epochs", c.epochs},
        {"bow_epochs", c.bow_epochs},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"attention_dim", c.attention_dim},
        {"idg_normalize", c.idg_normalize},
    };
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are an error so
/// that typos in config files surface.
inline TrainingConfig config_from_json(const nlohmann::json& j, TrainingConfig base = {}) {
    if (!j.is_object()) {
        throw Error("config: expected a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "dim") base.dim = value.get<std::size_t>();
            else if (key == "gen_dim") base.gen_dim = value.get<std::size_t>();
            else if (key == "gnn_layers") base.gnn_layers = value.get<std::size_t>();
            else if (key == "lr") base.lr = value.get<double>();
            else if (key == "lambda_link") base.lambda_link = value.get<double>();
            else if (key == "lambda_bow") base.lambda_bow = value.get<double>();
            else if (key == "min_frequency") base.min_frequency = value.get<std::size_t>();
            else if (key == "top_k") base.top_k = value.get<std::size_t>();
            else if (key == "negative_ratio") base.negative_ratio = value.get<std::size_t>();
            else if (key == "epochs") base.epochs = value.get<std::size_t>();
            else if (key == "bow_epochs") base.bow_epochs = value.get<std::size_t>();
            else if (key == "batch_size") base.batch_size = value.get<std::size_t>();
            else if (key == "seed") base.seed = value.get<std::uint64_t>();
            else if (key == "attention_dim") base.attention_dim = value.get<std::size_t>();
            else if (key == "idg_normalize") base.idg_normalize = value.get<bool>();
            else throw Error("config: unknown key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw Error("config: bad value for '" + key + "': " + e.what());
        }
    }
    base.validate();
    return base;
}

inline TrainingConfig load_config(const std::string& path, TrainingConfig base = {}) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file '" + path + "'");
    }
    try {
        return config_from_json(nlohmann::json::parse(in), base);
    } catch (const nlohmann::json::exception& e) {
        throw Error("config '" + path + "': " + e.what());
    }
}

}  // namespace klever
