#pragma once

/**
 * Run configuration. Every field has a default; JSON input may override any
 * subset, and unknown sections or keys are rejected.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "indexforge/buffer.hpp"
#include "indexforge/error.hpp"
#include "indexforge/evaluate.hpp"
#include "indexforge/metrics.hpp"
#include "indexforge/policy.hpp"
#include "indexforge/reward.hpp"
#include "indexforge/search.hpp"
#include "indexforge/token.hpp"

namespace indexforge {

struct BufferConfig {
    std::size_t initial_capacity = 200;
    std::size_t min_capacity = 20;
};

struct RunSettings {
    std::size_t expressions_per_iteration = 16;
    std::size_t top_k = 2;
    std::size_t max_iters = 30;
    std::size_t patience = 5;
    std::uint64_t seed = 0;
    double action_temperature = 1.0;  // tau applied to root visit counts
};

struct PretrainSettings {
    std::size_t iterations = 50;
    std::size_t n_channels = 0;
};

struct RunConfig {
    std::size_t max_len = kDefaultMaxLen;
    NormalizeConfig normalize;
    RewardConfig reward;
    SearchConfig search;
    BufferConfig buffer;
    PolicyConfig policy;
    TrainConfig train;
    RunSettings run;
    ProxyConfig proxy;
    PretrainSettings pretrain;

    void validate() const {
        if (max_len < 3) throw ContractError("expression.max_len must be at least 3");
        if (!(normalize.clip_k > 0.0)) throw ContractError("normalize.clip_k must be positive");
        reward.validate();
        if (search.n_simulations == 0) throw ContractError("search.n_simulations must be at least 1");
        if (buffer.min_capacity == 0) throw ContractError("buffer.min_capacity must be positive");
        if (run.expressions_per_iteration == 0) throw ContractError("run.expressions_per_iteration must be positive");
        if (run.top_k == 0) throw ContractError("run.top_k must be positive");
        if (!(run.action_temperature > 0.0)) throw ContractError("run.action_temperature must be positive");
        if (train.batch_size == 0) throw ContractError("policy.batch_size must be positive");
    }

    /// Copies shared knobs into the module configs that consume them.
    RunConfig resolved() const {
        RunConfig c = *this;
        c.reward.normalize = normalize;
        c.proxy.normalize = normalize;
        c.policy.max_len = max_len;
        return c;
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    return {
        {"expression", {{"max_len", c.max_len}}},
        {"normalize",
         {{"clip_k", c.normalize.clip_k},
          {"nonfinite_fill", c.normalize.nonfinite_fill},
          {"degenerate_threshold", c.normalize.degenerate_threshold}}},
        {"reward",
         {{"metric", to_string(c.reward.metric.kind)},
          {"threshold", c.reward.metric.threshold},
          {"auc_single_threshold", c.reward.metric.auc_single_threshold},
          {"combiner", to_string(c.reward.combiner)},
          {"sample_cap", c.reward.sample_cap}}},
        {"search",
         {{"n_simulations", c.search.n_simulations},
          {"exploration", c.search.exploration},
          {"rollout_max_len", c.search.rollout_max_len},
          {"rollout_temperature", c.search.rollout_temperature},
          {"use_policy_priors", c.search.use_policy_priors}}},
        {"buffer", {{"initial_capacity", c.buffer.initial_capacity}, {"min_capacity", c.buffer.min_capacity}}},
        {"policy",
         {{"context_window", c.policy.context_window},
          {"embedding_dim", c.policy.embedding_dim},
          {"hidden", c.policy.hidden},
          {"train_epochs", c.train.epochs},
          {"learning_rate", c.train.learning_rate},
          {"batch_size", c.train.batch_size},
          {"beta1", c.train.beta1},
          {"beta2", c.train.beta2},
          {"epsilon", c.train.epsilon}}},
        {"run",
         {{"expressions_per_iteration", c.run.expressions_per_iteration},
          {"top_k", c.run.top_k},
          {"max_iters", c.run.max_iters},
          {"patience", c.run.patience},
          {"seed", c.run.seed},
          {"action_temperature", c.run.action_temperature}}},
        {"proxy", {{"steps", c.proxy.steps}, {"step_size", c.proxy.step_size}}},
        {"pretrain", {{"iterations", c.pretrain.iterations}, {"n_channels", c.pretrain.n_channels}}},
    };
}

namespace detail {

class SectionReader {
public:
    SectionReader(const nlohmann::json& doc, const std::string& name) : name_(name) {
        if (doc.contains(name)) {
            obj_ = &doc.at(name);
            if (!obj_->is_object()) throw ContractError("config section '" + name + "' must be an object");
        }
    }

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!obj_ || !obj_->contains(key)) return;
        try {
            out = obj_->at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ContractError("config key '" + name_ + "." + key + "' has the wrong type");
        }
    }

    void finish() const {
        if (!obj_) return;
        for (auto it = obj_->begin(); it != obj_->end(); ++it)
            if (!seen_.count(it.key())) throw ContractError("unknown config key '" + name_ + "." + it.key() + "'");
    }

private:
    std::string name_;
    const nlohmann::json* obj_ = nullptr;
    std::set<std::string> seen_;
};

}  // namespace detail

/// Defaults overridden by doc; throws ContractError on unknown keys.
inline RunConfig config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ContractError("config must be a JSON object");
    static const std::set<std::string> sections = {"expression", "normalize", "reward", "search", "buffer",
                                                   "policy",     "run",       "proxy",  "pretrain"};
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (!sections.count(it.key())) throw ContractError("unknown config section '" + it.key() + "'");
    RunConfig c;
    {
        detail::SectionReader r(doc, "expression");
        r.read("max_len", c.max_len);
        r.finish();
    }
    {
        detail::SectionReader r(doc, "normalize");
        r.read("clip_k", c.normalize.clip_k);
        r.read("nonfinite_fill", c.normalize.nonfinite_fill);
        r.read("degenerate_threshold", c.normalize.degenerate_threshold);
        r.finish();
    }
    {
        detail::SectionReader r(doc, "reward");
        std::string metric = to_string(c.reward.metric.kind), combiner = to_string(c.reward.combiner);
        r.read("metric", metric);
        r.read("threshold", c.reward.metric.threshold);
        r.read("auc_single_threshold", c.reward.metric.auc_single_threshold);
        r.read("combiner", combiner);
        r.read("sample_cap", c.reward.sample_cap);
        r.finish();
        c.reward.metric.kind = parse_metric(metric);
        c.reward.combiner = parse_combiner(combiner);
    }
    {
        detail::SectionReader r(doc, "search");
        r.read("n_simulations", c.search.n_simulations);
        r.read("exploration", c.search.exploration);
        r.read("rollout_max_len", c.search.rollout_max_len);
        r.read("rollout_temperature", c.search.rollout_temperature);
        r.read("use_policy_priors", c.search.use_policy_priors);
        r.finish();
    }
    {
        detail::SectionReader r(doc, "buffer");
        r.read("initial_capacity", c.buffer.initial_capacity);
        r.read("min_capacity", c.buffer.min_capacity);
        r.finish();
    }
    {
        detail::SectionReader r(doc, "policy");
        r.read("context_window", c.policy.context_window);
        r.read("embedding_dim", c.policy.embedding_dim);
        r.read("hidden", c.policy.hidden);
        r.read("train_epochs", c.train.epochs);
        r.read("learning_rate", c.train.learning_rate);
        r.read("batch_size", c.train.batch_size);
        r.read("beta1", c.train.beta1);
        r.read("beta2", c.train.beta2);
        r.read("epsilon", c.train.epsilon);
        r.finish();
    }
    {
        detail::SectionReader r(doc, "run");
        r.read("expressions_per_iteration", c.run.expressions_per_iteration);
        r.read("top_k", c.run.top_k);
        r.read("max_iters", c.run.max_iters);
        r.read("patience", c.run.patience);
        r.read("seed", c.run.seed);
        r.read("action_temperature", c.run.action_temperature);
        r.finish();
    }
    {
        detail::SectionReader r(doc, "proxy");
        r.read("steps", c.proxy.steps);
        r.read("step_size", c.proxy.step_size);
        r.finish();
    }
    {
        detail::SectionReader r(doc, "pretrain");
        r.read("iterations", c.pretrain.iterations);
        r.read("n_channels", c.pretrain.n_channels);
        r.finish();
    }
    c.validate();
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ContractError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

}  // namespace indexforge
