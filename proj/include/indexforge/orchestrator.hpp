#pragma once

/**
 * The two-phase loop: collect expressions with policy-guided search, then
 * train the policy on the buffer and shrink it.
 *
 * A run directory holds config.json, policy.ckpt, buffer.json,
 * metrics.jsonl, run_state.json and, for discovery, expressions.json.
 * Resume reads the snapshot pair under state/ that run_state.json names,
 * so a kill at any point leaves a consistent restart point. Every
 * iteration draws its randomness from (seed, phase, iteration), so a
 * resumed run continues exactly as if uninterrupted.
 */

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "indexforge/buffer.hpp"
#include "indexforge/config.hpp"
#include "indexforge/dataset.hpp"
#include "indexforge/error.hpp"
#include "indexforge/expr.hpp"
#include "indexforge/parallel.hpp"
#include "indexforge/policy.hpp"
#include "indexforge/reward.hpp"
#include "indexforge/rng.hpp"
#include "indexforge/search.hpp"
#include "indexforge/stats.hpp"

namespace indexforge {

enum class Phase : std::uint8_t { Pretrain = 1, Discover = 2 };

inline std::string to_string(Phase p) { return p == Phase::Pretrain ? "pretrain" : "discover"; }

struct RunOptions {
    std::filesystem::path out_dir;
    bool resume = false;
    std::optional<std::filesystem::path> policy_in;
    std::optional<std::filesystem::path> dump_tree;
    std::size_t stop_after = 0;  // return after this many iterations in this call; 0 runs to the end
    std::function<void(const nlohmann::json&)> on_iteration;
};

struct RunOutcome {
    std::size_t iterations = 0;  // completed so far, across resumes
    bool finished = false;
    Policy policy;
    AdaptiveBuffer buffer;
};

namespace detail {

inline constexpr std::uint64_t kTrainTag = 1000;
inline constexpr std::uint64_t kSampleTag = 1001;
inline constexpr std::uint64_t kProxyTag = 1002;
inline constexpr std::uint64_t kInitTag = 1003;
inline constexpr std::uint64_t kCorrTag = 1004;

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp);
        out << content;
        if (!out) throw DataError("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + " is not valid JSON: " + e.what());
    }
}

/// Keeps the first `lines` lines of a JSON-lines file.
inline void truncate_lines(const std::filesystem::path& path, std::size_t lines) {
    std::ifstream in(path);
    std::string kept, line;
    for (std::size_t i = 0; i < lines && std::getline(in, line); ++i) kept += line + '\n';
    in.close();
    write_atomic(path, kept);
}

/// Thread-safe cache of a pure function of an expression's text.
class RewardMemo {
public:
    template <class F>
    double get(const std::string& key, F&& compute) {
        {
            std::lock_guard lock(mu_);
            if (auto it = map_.find(key); it != map_.end()) return it->second;
        }
        const double v = compute();
        std::lock_guard lock(mu_);
        map_.emplace(key, v);
        return v;
    }

private:
    std::mutex mu_;
    std::unordered_map<std::string, double> map_;
};

struct LoopState {
    std::size_t iteration = 0;
    bool filled = false;
    std::optional<double> best;
    std::size_t stale = 0;
    bool finished = false;
};

inline std::string snapshot_name(const char* stem, std::size_t iteration, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "state/%s-%06zu%s", stem, iteration, ext);
    return buf;
}

inline nlohmann::json state_json(const LoopState& s, Phase phase, std::size_t n_channels) {
    nlohmann::json j;
    j["policy_file"] = snapshot_name("policy", s.iteration, ".ckpt");
    j["buffer_file"] = snapshot_name("buffer", s.iteration, ".json");
    j["phase"] = to_string(phase);
    j["n_channels"] = n_channels;
    j["iteration"] = s.iteration;
    j["filled"] = s.filled;
    j["best_reward"] = s.best ? nlohmann::json(*s.best) : nlohmann::json(nullptr);
    j["stale"] = s.stale;
    j["finished"] = s.finished;
    return j;
}

inline nlohmann::json expression_report(const BufferEntry& e, std::size_t rank, const Dataset* dataset,
                                        const RunConfig& cfg) {
    const ExprTree tree = parse(e.expression);
    nlohmann::json j;
    j["rank"] = rank;
    j["text"] = e.text;
    j["canonical"] = render(tree);
    j["minified"] = render(minify(tree));
    j["reward"] = e.reward;
    if (dataset) {
        const auto train = dataset->subset(Split::Train);
        double h = -1.0;
        try {
            h = heuristic_reward(tree, train, cfg.reward);
        } catch (const DegenerateIndex&) {
        }
        j["heuristic"] = h;
    }
    return j;
}

}  // namespace detail

/// Two-phase loop shared by pretraining (dataset == nullptr) and discovery.
inline RunOutcome run_loop(Phase phase, RunConfig cfg, std::size_t n_channels, const Dataset* dataset,
                           const RunOptions& opts) {
    namespace fs = std::filesystem;
    if (opts.out_dir.empty()) throw ContractError("a run directory (--out) is required");
    const fs::path dir = opts.out_dir;
    const fs::path state_path = dir / "run_state.json";
    const fs::path metrics_path = dir / "metrics.jsonl";

    detail::LoopState st;
    Policy policy;
    std::optional<AdaptiveBuffer> buffer;

    if (fs::exists(state_path)) {
        if (!opts.resume) throw ContractError(dir.string() + " already holds a run; pass --resume to continue it");
        const auto sj = detail::read_json(state_path);
        if (sj.at("phase").get<std::string>() != to_string(phase))
            throw ContractError(dir.string() + " holds a " + sj.at("phase").get<std::string>() + " run");
        if (sj.at("n_channels").get<std::size_t>() != n_channels)
            throw ContractError("resumed run has a different channel count");
        cfg = config_from_json(detail::read_json(dir / "config.json"));
        st.iteration = sj.at("iteration").get<std::size_t>();
        st.filled = sj.at("filled").get<bool>();
        if (!sj.at("best_reward").is_null()) st.best = sj.at("best_reward").get<double>();
        st.stale = sj.at("stale").get<std::size_t>();
        st.finished = sj.at("finished").get<bool>();
        policy = load_policy(dir / sj.at("policy_file").get<std::string>());
        buffer = AdaptiveBuffer::from_json(detail::read_json(dir / sj.at("buffer_file").get<std::string>()),
                                           cfg.max_len);
        detail::truncate_lines(metrics_path, st.iteration);
    } else {
        fs::create_directories(dir);
        cfg.validate();
        if (opts.policy_in) {
            policy = load_policy(*opts.policy_in);
            if (policy.n_channels() != n_channels)
                throw ContractError("policy checkpoint has " + std::to_string(policy.n_channels()) +
                                    " channels but the task has " + std::to_string(n_channels));
        } else {
            policy = Policy::init(n_channels, cfg.resolved().policy,
                                  derive_seed(cfg.run.seed, {static_cast<std::uint64_t>(phase), detail::kInitTag}));
        }
        buffer.emplace(cfg.buffer.initial_capacity, cfg.buffer.min_capacity);
        detail::write_atomic(dir / "config.json", to_json(cfg).dump(2) + "\n");
        detail::write_atomic(metrics_path, "");
    }
    const RunConfig rc = cfg.resolved();
    if (policy.config().max_len != rc.max_len) throw ContractError("policy max_len differs from the run's max_len");
    const std::uint64_t seed = rc.run.seed;
    const auto tag = static_cast<std::uint64_t>(phase);
    const std::size_t max_iters = phase == Phase::Pretrain ? rc.pretrain.iterations : rc.run.max_iters;

    std::vector<ImageSample> train;
    if (dataset) {
        if (dataset->count(Split::Train) == 0) throw DataError("dataset has no train split");
        train = dataset->subset(Split::Train);
    }
    detail::RewardMemo search_memo, final_memo;
    const RewardFn reward_fn = [&](const TokenSequence& s) -> double {
        if (!s.is_terminal()) return s.is_truncated() ? -1.0 : 0.0;
        if (phase == Phase::Pretrain) return pretrain_reward(s);
        return search_memo.get(to_text(s), [&] { return episode_reward(s, train, rc.reward); });
    };
    const std::uint64_t proxy_seed = derive_seed(seed, {detail::kProxyTag});
    auto final_reward = [&](const TokenSequence& s) -> double {
        if (phase == Phase::Pretrain) return pretrain_reward(s);
        return final_memo.get(to_text(s), [&] {
            try {
                const auto fit = proxy_fit(CompiledExpr(parse(s)), *dataset, proxy_seed, rc.proxy);
                return fit.degenerate ? -1.0 : fit.iou;
            } catch (const ParseError&) {
                return -1.0;
            } catch (const EvaluationError&) {
                return -1.0;
            }
        });
    };

    // Phase one writes the versioned snapshot; phase two points
    // run_state.json at it, refreshes the user-facing copies and drops the
    // previous snapshot.
    auto commit_snapshot = [&](bool publish) {
        const fs::path pol = dir / detail::snapshot_name("policy", st.iteration, ".ckpt");
        const fs::path buf = dir / detail::snapshot_name("buffer", st.iteration, ".json");
        const std::string buffer_text = buffer->to_json().dump(2) + "\n";
        if (!publish) {
            fs::create_directories(dir / "state");
            save_policy(policy, pol.string() + ".tmp");
            fs::rename(pol.string() + ".tmp", pol);
            detail::write_atomic(buf, buffer_text);
            return;
        }
        detail::write_atomic(state_path, detail::state_json(st, phase, n_channels).dump(2) + "\n");
        fs::copy_file(pol, dir / "policy.ckpt.tmp", fs::copy_options::overwrite_existing);
        fs::rename(dir / "policy.ckpt.tmp", dir / "policy.ckpt");
        detail::write_atomic(dir / "buffer.json", buffer_text);
        for (const auto& entry : fs::directory_iterator(dir / "state"))
            if (entry.path() != pol && entry.path() != buf) fs::remove(entry.path());
    };
    if (!fs::exists(state_path)) {
        commit_snapshot(false);
        commit_snapshot(true);
    }

    std::size_t ran = 0;
    while (!st.finished && st.iteration < max_iters) {
        if (opts.stop_after && ran >= opts.stop_after) break;
        const std::size_t it = st.iteration;
        const PolicySnapshot snapshot(policy);
        const std::size_t E = rc.run.expressions_per_iteration;
        std::vector<TokenSequence> emitted(E);
        std::optional<nlohmann::json> tree_dump;
        parallel_for(E, [&](std::size_t e) {
            Rng rng(derive_seed(seed, {tag, it, e}));
            TokenSequence s(rc.max_len);
            while (!s.is_terminal() && s.size() < s.max_len()) {
                auto res = run_search(s, snapshot, reward_fn, rc.search, rng);
                if (e == 0 && s.empty() && opts.dump_tree) tree_dump = tree_to_json(*res.root, 4);
                const auto p = search_policy_distribution(res.visit_counts, rc.run.action_temperature);
                s.push_back(Token::from_id(PolicySnapshot::sample_index(p, rng)));
            }
            emitted[e] = std::move(s);
        });
        if (tree_dump) detail::write_atomic(*opts.dump_tree, tree_dump->dump(2) + "\n");

        std::vector<double> rewards(E);
        parallel_for(E, [&](std::size_t e) { rewards[e] = final_reward(emitted[e]); });

        std::size_t valid = 0;
        std::vector<double> valid_rewards;
        for (std::size_t e = 0; e < E; ++e) {
            if (!emitted[e].is_terminal() || rewards[e] == -1.0) continue;
            ++valid;
            valid_rewards.push_back(rewards[e]);
            buffer->insert(emitted[e], rewards[e]);
        }
        if (!st.filled && buffer->full()) st.filled = true;

        std::optional<double> train_loss;
        if (st.filled) {
            const auto seqs = buffer->expressions();
            const auto hist = train_policy(policy, seqs, rc.train, derive_seed(seed, {tag, it, detail::kTrainTag}));
            if (!hist.empty()) train_loss = hist.back();
            buffer->shrink();
        }

        // Validity of fresh samples from the updated policy.
        std::size_t sample_valid = 0;
        {
            const PolicySnapshot after(policy);
            Rng rng(derive_seed(seed, {tag, it, detail::kSampleTag}));
            constexpr std::size_t kSamples = 64;
            for (std::size_t k = 0; k < kSamples; ++k) sample_valid += pretrain_reward(after.sample_sequence(rng)) != -1.0;
        }

        const std::optional<double> top =
            buffer->empty() ? std::nullopt : std::optional<double>(buffer->entries().front().reward);
        if (top && (!st.best || *top > *st.best)) {
            st.best = top;
            st.stale = 0;
        } else {
            ++st.stale;
        }
        st.iteration = it + 1;
        if (st.iteration >= max_iters ||
            (st.filled && buffer->capacity() == buffer->min_capacity() && st.stale >= rc.run.patience))
            st.finished = true;

        nlohmann::json m;
        m["iteration"] = it;
        m["phase"] = to_string(phase);
        m["emitted"] = E;
        m["valid_rate"] = static_cast<double>(valid) / static_cast<double>(E);
        m["mean_emitted_reward"] = valid_rewards.empty() ? nlohmann::json(nullptr) : nlohmann::json(mean(valid_rewards));
        m["buffer_size"] = buffer->size();
        m["capacity"] = buffer->capacity();
        m["filled"] = st.filled;
        m["mean_reward"] = buffer->mean_reward();
        m["top_reward"] = top ? nlohmann::json(*top) : nlohmann::json(nullptr);
        m["top_expression"] = buffer->empty() ? nlohmann::json(nullptr) : nlohmann::json(buffer->entries().front().text);
        m["train_loss"] = train_loss ? nlohmann::json(*train_loss) : nlohmann::json(nullptr);
        m["policy_valid_rate"] = static_cast<double>(sample_valid) / 64.0;
        {
            std::ofstream out(metrics_path, std::ios::app);
            if (!out) throw DataError("cannot append to " + metrics_path.string());
            out << m.dump() << '\n';
        }
        commit_snapshot(false);
        if (phase == Phase::Discover) {
            nlohmann::json ex;
            ex["top_k"] = nlohmann::json::array();
            std::size_t rank = 1;
            for (const auto& e : buffer->top_k(rc.run.top_k))
                ex["top_k"].push_back(detail::expression_report(e, rank++, dataset, rc));
            ex["iterations"] = st.iteration;
            detail::write_atomic(dir / "expressions.json", ex.dump(2) + "\n");
        }
        commit_snapshot(true);
        if (opts.on_iteration) opts.on_iteration(m);
        ++ran;
    }

    RunOutcome out;
    out.iterations = st.iteration;
    out.finished = st.finished || st.iteration >= max_iters;
    out.policy = std::move(policy);
    out.buffer = std::move(*buffer);
    return out;
}

inline RunOutcome run_pretrain(const RunConfig& cfg, std::size_t n_channels, const RunOptions& opts) {
    if (n_channels == 0) throw ContractError("pretraining needs the channel count");
    return run_loop(Phase::Pretrain, cfg, n_channels, nullptr, opts);
}

inline RunOutcome run_discover(const RunConfig& cfg, const Dataset& dataset, const RunOptions& opts) {
    dataset.validate();
    if (dataset.count(Split::Train) == 0) throw DataError("dataset has no train split");
    if (dataset.count(Split::Val) == 0) throw DataError("dataset has no val split");
    return run_loop(Phase::Discover, cfg, dataset.n_channels, &dataset, opts);
}

/// Samples n distinct expressions from the policy and correlates every
/// heuristic (metric x combiner) with the proxy training reward.
/// Degenerate expressions score -1 on every axis and stay in the sample.
inline nlohmann::json run_correlation(const RunConfig& cfg, const Dataset& dataset, std::size_t n,
                                      const std::optional<Policy>& policy_in = std::nullopt) {
    if (n < 10) throw ContractError("the correlation study needs at least 10 expressions");
    dataset.validate();
    const RunConfig rc = cfg.resolved();
    const std::uint64_t seed = rc.run.seed;
    const Policy policy =
        policy_in ? *policy_in : Policy::init(dataset.n_channels, rc.policy, derive_seed(seed, {detail::kCorrTag}));
    const PolicySnapshot snap(policy);
    Rng rng(derive_seed(seed, {detail::kCorrTag, 1}));
    std::vector<TokenSequence> exprs;
    std::vector<std::string> texts;
    for (std::size_t attempts = 0; exprs.size() < n; ++attempts) {
        if (attempts >= 1000 * n) throw Error("could not sample enough distinct expressions");
        auto s = snap.sample_sequence(rng);
        if (!s.is_terminal()) continue;
        const auto t = to_text(s);
        if (std::find(texts.begin(), texts.end(), t) != texts.end()) continue;
        texts.push_back(t);
        exprs.push_back(std::move(s));
    }

    struct Axis {
        MetricKind metric;
        CombinerKind combiner;
    };
    std::vector<Axis> axes;
    for (auto c : {CombinerKind::OrientationMax, CombinerKind::MinLiteral})
        for (auto m : kAllMetrics) axes.push_back({m, c});

    const auto train = dataset.subset(Split::Train);
    const std::uint64_t proxy_seed = derive_seed(seed, {detail::kProxyTag});
    std::vector<double> proxy(n);
    std::vector<std::vector<double>> scores(axes.size(), std::vector<double>(n));
    parallel_for(n, [&](std::size_t i) {
        const ExprTree tree = parse(exprs[i]);
        const CompiledExpr compiled(tree);
        const auto fit = proxy_fit(compiled, dataset, proxy_seed, rc.proxy);
        proxy[i] = fit.degenerate ? -1.0 : fit.iou;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            RewardConfig r = rc.reward;
            r.metric.kind = axes[a].metric;
            r.combiner = axes[a].combiner;
            try {
                scores[a][i] = heuristic_reward(compiled, train, r);
            } catch (const DegenerateIndex&) {
                scores[a][i] = -1.0;
            }
        }
    });

    nlohmann::json report;
    report["n"] = n;
    report["target"] = "proxy_iou";
    report["heuristics"] = nlohmann::json::array();
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const double r = pearson(scores[a], proxy);
        const double t = correlation_t(r, n);
        report["heuristics"].push_back({{"metric", to_string(axes[a].metric)},
                                        {"combiner", to_string(axes[a].combiner)},
                                        {"r", r},
                                        {"t", t},
                                        {"p", correlation_p(t, n)}});
    }
    report["expressions"] = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) {
        nlohmann::json e;
        e["text"] = texts[i];
        e["proxy"] = proxy[i];
        for (std::size_t a = 0; a < axes.size(); ++a)
            e["scores"][to_string(axes[a].metric) + "/" + to_string(axes[a].combiner)] = scores[a][i];
        report["expressions"].push_back(std::move(e));
    }
    return report;
}

}  // namespace indexforge
