#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "klever/error.hpp"
#include "klever/tensor.hpp"

namespace klever {

struct Parameter {
    Tensor value;
    Tensor grad;
};

/// Named trainable tensors with matching gradient accumulators. Iteration
/// order is lexicographic by name, which keeps optimizer steps and
/// serialization deterministic.
class ParamRegistry {
public:
    Parameter& add(const std::string& name, Tensor value) {
        if (params_.count(name) != 0) {
            throw DuplicateKeyError(name, 0);
        }
        Tensor grad(value.dims());
        auto [it, _] = params_.emplace(name, Parameter{std::move(value), std::move(grad)});
        return it->second;
    }

    [[nodiscard]] bool contains(const std::string& name) const { return params_.count(name) != 0; }

    Tensor& value(const std::string& name) { return lookup(name).value; }
    [[nodiscard]] const Tensor& value(const std::string& name) const { return lookup(name).value; }
    Tensor& grad(const std::string& name) { return lookup(name).grad; }
    [[nodiscard]] const Tensor& grad(const std::string& name) const { return lookup(name).grad; }

    void zero_grad() {
        for (auto& [_, p] : params_) {
            p.grad.fill(0.0);
        }
    }

    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (const auto& [name, _] : params_) {
            out.push_back(name);
        }
        return out;
    }

    [[nodiscard]] std::size_t size() const noexcept { return params_.size(); }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    [[nodiscard]] auto begin() const { return params_.begin(); }
    [[nodiscard]] auto end() const { return params_.end(); }

private:
    Parameter& lookup(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) {
            throw NotFoundError("unknown parameter '" + name + "'");
        }
        return it->second;
    }
    [[nodiscard]] const Parameter& lookup(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) {
            throw NotFoundError("unknown parameter '" + name + "'");
        }
        return it->second;
    }

    std::map<std::string, Parameter> params_;
};

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamOptions options;
    long step = 0;
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;

    AdamState() = default;
    explicit AdamState(AdamOptions opts) : options(opts) {}
};

/// One Adam update over every parameter (or only over `trainable` when it is
/// non-empty), followed by zeroing all gradients.
///
/// Uses the folded bias correction
///   lr_t  = lr * sqrt(1 - beta2^t) / (1 - beta1^t)
///   theta -= lr_t * m / (sqrt(v) + eps)
/// so eps is applied to the uncorrected second moment.
inline void adam_step(ParamRegistry& registry, AdamState& state, const std::set<std::string>& trainable = {}) {
    for (const auto& [name, p] : registry) {
        if (!trainable.empty() && trainable.count(name) == 0) {
            continue;
        }
        if (!p.grad.all_finite()) {
            throw NonFiniteError(name);
        }
    }

    const auto& o = state.options;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double lr_t = o.lr * std::sqrt(1.0 - std::pow(o.beta2, t)) / (1.0 - std::pow(o.beta1, t));

    for (auto& [name, p] : registry) {
        if (!trainable.empty() && trainable.count(name) == 0) {
            continue;
        }
        auto& m = state.first_moment.try_emplace(name, Tensor(p.value.dims())).first->second;
        auto& v = state.second_moment.try_emplace(name, Tensor(p.value.dims())).first->second;
        auto g = p.grad.data();
        auto x = p.value.data();
        auto md = m.data();
        auto vd = v.data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            md[i] = o.beta1 * md[i] + (1.0 - o.beta1) * g[i];
            vd[i] = o.beta2 * vd[i] + (1.0 - o.beta2) * g[i] * g[i];
            x[i] -= lr_t * md[i] / (std::sqrt(vd[i]) + o.eps);
        }
        ensure_finite(p.value, name);
    }
    registry.zero_grad();
}

struct GradCheckReport {
    bool passed = true;
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    std::size_t entries_checked = 0;
};

struct GradCheckOptions {
    double epsilon = 1e-5;
    double tolerance = 1e-4;
    /// Denominator floor for the relative error, so entries whose true
    /// gradient is ~0 are judged by absolute error instead.
    double floor = 1e-6;
    /// Restrict the check to these parameters (empty = all).
    std::set<std::string> only;
};

/// Compares the analytic gradient left in the registry by `loss_fn` against
/// central differences. `loss_fn` must return the loss at the current
/// parameter values and accumulate its gradient into the registry.
inline GradCheckReport finite_diff_check(const std::function<double(ParamRegistry&)>& loss_fn,
                                         ParamRegistry& registry, const GradCheckOptions& options = {}) {
    registry.zero_grad();
    loss_fn(registry);
    std::map<std::string, Tensor> analytic;
    for (const auto& [name, p] : registry) {
        analytic.emplace(name, p.grad);
    }

    GradCheckReport report;
    for (const auto& name : registry.names()) {
        if (!options.only.empty() && options.only.count(name) == 0) {
            continue;
        }
        auto& value = registry.value(name);
        const auto& grad = analytic.at(name);
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double saved = value[i];
            value[i] = saved + options.epsilon;
            registry.zero_grad();
            const double up = loss_fn(registry);
            value[i] = saved - options.epsilon;
            registry.zero_grad();
            const double down = loss_fn(registry);
            value[i] = saved;

            const double numeric = (up - down) / (2.0 * options.epsilon);
            const double denom = std::max({std::abs(numeric), std::abs(grad[i]), options.floor});
            const double rel = std::abs(numeric - grad[i]) / denom;
            ++report.entries_checked;
            if (rel > report.max_relative_error || !std::isfinite(rel)) {
                report.max_relative_error = rel;
                report.worst_parameter = name;
                report.worst_index = i;
            }
        }
    }
    registry.zero_grad();
    report.passed = std::isfinite(report.max_relative_error) && report.max_relative_error <= options.tolerance;
    return report;
}

}  // namespace klever
