#pragma once

/**
 * Autoregressive next-token policy.
 *
 * The last `context_window` tokens (left-padded with a dedicated pad id)
 * are embedded, concatenated and fed through two tanh layers to logits over
 * the vocabulary. Invalid actions are masked out before the softmax, both
 * in training and at inference.
 *
 * Parameters live in one flat float32 vector so checkpoints are a single
 * block; all arithmetic is done in double.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "indexforge/error.hpp"
#include "indexforge/grammar.hpp"
#include "indexforge/rng.hpp"
#include "indexforge/token.hpp"

namespace indexforge {

struct PolicyConfig {
    std::size_t context_window = 8;
    std::size_t embedding_dim = 32;
    std::size_t hidden = 64;
    std::size_t max_len = kDefaultMaxLen;

    friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

struct TrainConfig {
    std::size_t epochs = 20;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// One teacher-forcing step: predict target from the prefix before it.
struct TrainExample {
    std::array<std::uint32_t, 64> context{};  // first context_window ids are used
    std::uint32_t target = 0;
    std::vector<std::uint32_t> valid;  // valid action ids at this prefix
};

class Policy {
public:
    Policy() = default;

    /// Uniform init in +-1/sqrt(fan_in); the embedding table has fan-in 1.
    static Policy init(std::size_t n_channels, const PolicyConfig& cfg, std::uint64_t seed) {
        if (n_channels == 0) throw ContractError("policy needs at least one channel");
        if (cfg.context_window == 0 || cfg.context_window > 64) throw ContractError("context_window must be in 1..64");
        if (cfg.embedding_dim == 0 || cfg.hidden == 0) throw ContractError("layer widths must be positive");
        Policy p;
        p.cfg_ = cfg;
        p.n_channels_ = n_channels;
        p.seed_ = seed;
        p.layout();
        p.params_.assign(p.total_, 0.0f);
        Rng rng(seed);
        auto fill = [&](std::size_t off, std::size_t count, double fan_in) {
            const double r = 1.0 / std::sqrt(fan_in);
            for (std::size_t i = 0; i < count; ++i) p.params_[off + i] = static_cast<float>(rng.uniform(-r, r));
        };
        const std::size_t in = cfg.context_window * cfg.embedding_dim;
        const std::size_t V = p.vocab();
        fill(p.off_emb_, (V + 1) * cfg.embedding_dim, 1.0);
        fill(p.off_w1_, in * cfg.hidden, static_cast<double>(in));
        fill(p.off_b1_, cfg.hidden, static_cast<double>(in));
        fill(p.off_w2_, cfg.hidden * cfg.hidden, static_cast<double>(cfg.hidden));
        fill(p.off_b2_, cfg.hidden, static_cast<double>(cfg.hidden));
        fill(p.off_w3_, cfg.hidden * V, static_cast<double>(cfg.hidden));
        fill(p.off_b3_, V, static_cast<double>(cfg.hidden));
        return p;
    }

    const PolicyConfig& config() const noexcept { return cfg_; }
    std::size_t n_channels() const noexcept { return n_channels_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t vocab() const noexcept { return vocab_size(n_channels_); }
    std::size_t pad_id() const noexcept { return vocab(); }
    std::size_t parameter_count() const noexcept { return params_.size(); }
    std::span<const float> parameters() const noexcept { return params_; }
    std::span<float> parameters() noexcept { return params_; }

    friend bool operator==(const Policy& a, const Policy& b) {
        return a.cfg_ == b.cfg_ && a.n_channels_ == b.n_channels_ && a.seed_ == b.seed_ && a.params_ == b.params_;
    }

    /// Named parameter blocks as (name, rows, cols), in storage order.
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> shapes() const {
        const std::size_t in = cfg_.context_window * cfg_.embedding_dim;
        return {{"embedding", vocab() + 1, cfg_.embedding_dim},
                {"w1", in, cfg_.hidden},
                {"b1", 1, cfg_.hidden},
                {"w2", cfg_.hidden, cfg_.hidden},
                {"b2", 1, cfg_.hidden},
                {"w3", cfg_.hidden, vocab()},
                {"b3", 1, vocab()}};
    }

    /// Left-padded window of the most recent token ids.
    TrainExample window(std::span<const Token> prefix) const {
        TrainExample ex;
        const std::size_t W = cfg_.context_window;
        for (std::size_t i = 0; i < W; ++i) ex.context[i] = static_cast<std::uint32_t>(pad_id());
        const std::size_t take = std::min(W, prefix.size());
        for (std::size_t i = 0; i < take; ++i)
            ex.context[W - take + i] = static_cast<std::uint32_t>(prefix[prefix.size() - take + i].id());
        return ex;
    }

    /// Unmasked logits for the next token after prefix.
    std::vector<double> logits(std::span<const Token> prefix) const {
        Activations a;
        forward(window(prefix).context.data(), a);
        return a.logits;
    }

    /// Teacher-forcing decomposition of a terminal, valid sequence.
    std::vector<TrainExample> examples(const TokenSequence& seq) const {
        if (!seq.is_terminal() || !scan_prefix(seq.tokens()))
            throw ContractError("training sequence '" + describe(seq) + "' is not a valid terminal expression");
        std::vector<TrainExample> out;
        PrefixState state;
        for (std::size_t i = 0; i < seq.size(); ++i) {
            TrainExample ex = window(seq.tokens().subspan(0, i));
            ex.target = static_cast<std::uint32_t>(seq[i].id());
            for (auto t : valid_next_actions(state, n_channels_, seq.max_len()))
                ex.valid.push_back(static_cast<std::uint32_t>(t.id()));
            if (std::find(ex.valid.begin(), ex.valid.end(), ex.target) == ex.valid.end())
                throw ContractError("training sequence '" + describe(seq) + "' takes an invalid action");
            out.push_back(std::move(ex));
            state = state.advanced(seq[i]);
        }
        return out;
    }

    /// Masked cross-entropy of one example; accumulates d(loss)/d(params)
    /// scaled by weight into grad when grad is non-empty.
    double example_loss(const TrainExample& ex, std::span<double> grad, double weight = 1.0) const {
        Activations a;
        forward(ex.context.data(), a);
        std::vector<double> p(vocab(), 0.0);
        const double lse = masked_logsumexp(a.logits, ex.valid);
        for (auto id : ex.valid) p[id] = std::exp(a.logits[id] - lse);
        const double loss = lse - a.logits[ex.target];
        if (!grad.empty()) backward(ex, a, p, grad, weight);
        return loss;
    }

private:
    struct Activations {
        std::vector<double> h1, h2, logits;
    };

    static std::string describe(const TokenSequence& seq) {
        std::string s;
        for (auto t : seq.tokens()) s += spelling(t);
        return s;
    }

    void layout() {
        const std::size_t in = cfg_.context_window * cfg_.embedding_dim;
        const std::size_t V = vocab();
        const std::size_t H = cfg_.hidden;
        off_emb_ = 0;
        off_w1_ = off_emb_ + (V + 1) * cfg_.embedding_dim;
        off_b1_ = off_w1_ + in * H;
        off_w2_ = off_b1_ + H;
        off_b2_ = off_w2_ + H * H;
        off_w3_ = off_b2_ + H;
        off_b3_ = off_w3_ + H * V;
        total_ = off_b3_ + V;
    }

    static double masked_logsumexp(const std::vector<double>& logits, const std::vector<std::uint32_t>& valid) {
        double mx = -std::numeric_limits<double>::infinity();
        for (auto id : valid) mx = std::max(mx, logits[id]);
        double s = 0.0;
        for (auto id : valid) s += std::exp(logits[id] - mx);
        return mx + std::log(s);
    }

    void forward(const std::uint32_t* ctx, Activations& a) const {
        const std::size_t E = cfg_.embedding_dim, H = cfg_.hidden, V = vocab();
        const float* P = params_.data();
        a.h1.assign(P + off_b1_, P + off_b1_ + H);
        for (std::size_t pos = 0; pos < cfg_.context_window; ++pos) {
            const float* emb = P + off_emb_ + ctx[pos] * E;
            for (std::size_t e = 0; e < E; ++e) {
                const double x = emb[e];
                const float* w = P + off_w1_ + (pos * E + e) * H;
                for (std::size_t j = 0; j < H; ++j) a.h1[j] += x * w[j];
            }
        }
        for (auto& v : a.h1) v = std::tanh(v);
        a.h2.assign(P + off_b2_, P + off_b2_ + H);
        for (std::size_t i = 0; i < H; ++i) {
            const double x = a.h1[i];
            const float* w = P + off_w2_ + i * H;
            for (std::size_t j = 0; j < H; ++j) a.h2[j] += x * w[j];
        }
        for (auto& v : a.h2) v = std::tanh(v);
        a.logits.assign(P + off_b3_, P + off_b3_ + V);
        for (std::size_t i = 0; i < H; ++i) {
            const double x = a.h2[i];
            const float* w = P + off_w3_ + i * V;
            for (std::size_t k = 0; k < V; ++k) a.logits[k] += x * w[k];
        }
    }

    void backward(const TrainExample& ex, const Activations& a, const std::vector<double>& p, std::span<double> g,
                  double weight) const {
        const std::size_t E = cfg_.embedding_dim, H = cfg_.hidden, V = vocab();
        const float* P = params_.data();
        std::vector<double> dl(p);
        dl[ex.target] -= 1.0;
        for (auto& v : dl) v *= weight;

        std::vector<double> dh2(H, 0.0);
        for (std::size_t i = 0; i < H; ++i) {
            const float* w = P + off_w3_ + i * V;
            double* gw = g.data() + off_w3_ + i * V;
            double s = 0.0;
            for (std::size_t k = 0; k < V; ++k) {
                gw[k] += a.h2[i] * dl[k];
                s += w[k] * dl[k];
            }
            dh2[i] = s;
        }
        for (std::size_t k = 0; k < V; ++k) g[off_b3_ + k] += dl[k];

        std::vector<double> da2(H);
        for (std::size_t j = 0; j < H; ++j) da2[j] = dh2[j] * (1.0 - a.h2[j] * a.h2[j]);
        std::vector<double> dh1(H, 0.0);
        for (std::size_t i = 0; i < H; ++i) {
            const float* w = P + off_w2_ + i * H;
            double* gw = g.data() + off_w2_ + i * H;
            double s = 0.0;
            for (std::size_t j = 0; j < H; ++j) {
                gw[j] += a.h1[i] * da2[j];
                s += w[j] * da2[j];
            }
            dh1[i] = s;
        }
        for (std::size_t j = 0; j < H; ++j) g[off_b2_ + j] += da2[j];

        std::vector<double> da1(H);
        for (std::size_t j = 0; j < H; ++j) da1[j] = dh1[j] * (1.0 - a.h1[j] * a.h1[j]);
        for (std::size_t pos = 0; pos < cfg_.context_window; ++pos) {
            const std::size_t tok = ex.context[pos];
            const float* emb = P + off_emb_ + tok * E;
            double* gemb = g.data() + off_emb_ + tok * E;
            for (std::size_t e = 0; e < E; ++e) {
                const float* w = P + off_w1_ + (pos * E + e) * H;
                double* gw = g.data() + off_w1_ + (pos * E + e) * H;
                double s = 0.0;
                for (std::size_t j = 0; j < H; ++j) {
                    gw[j] += emb[e] * da1[j];
                    s += w[j] * da1[j];
                }
                gemb[e] += s;
            }
        }
        for (std::size_t j = 0; j < H; ++j) g[off_b1_ + j] += da1[j];
    }

    PolicyConfig cfg_;
    std::size_t n_channels_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<float> params_;
    std::size_t off_emb_ = 0, off_w1_ = 0, off_b1_ = 0, off_w2_ = 0, off_b2_ = 0, off_w3_ = 0, off_b3_ = 0,
                total_ = 0;

    friend class PolicySnapshot;
    friend Policy load_policy(const std::filesystem::path&);
};

/// Immutable inference view of a policy. The first layer is folded into a
/// per-(position, token) table so a step costs one table gather per slot.
/// Safe to share across threads.
class PolicySnapshot {
public:
    explicit PolicySnapshot(const Policy& policy) : policy_(policy) {
        const auto& cfg = policy_.cfg_;
        const std::size_t E = cfg.embedding_dim, H = cfg.hidden, V1 = policy_.vocab() + 1;
        const float* P = policy_.params_.data();
        table_.assign(cfg.context_window * V1 * H, 0.0);
        for (std::size_t pos = 0; pos < cfg.context_window; ++pos)
            for (std::size_t tok = 0; tok < V1; ++tok) {
                double* row = table_.data() + (pos * V1 + tok) * H;
                const float* emb = P + policy_.off_emb_ + tok * E;
                for (std::size_t e = 0; e < E; ++e) {
                    const double x = emb[e];
                    const float* w = P + policy_.off_w1_ + (pos * E + e) * H;
                    for (std::size_t j = 0; j < H; ++j) row[j] += x * w[j];
                }
            }
    }

    const Policy& policy() const noexcept { return policy_; }
    std::size_t n_channels() const noexcept { return policy_.n_channels(); }
    std::size_t max_len() const noexcept { return policy_.config().max_len; }

    std::vector<double> logits(std::span<const Token> prefix) const {
        const auto& cfg = policy_.cfg_;
        const std::size_t H = cfg.hidden, V = policy_.vocab(), V1 = V + 1;
        const float* P = policy_.params_.data();
        const auto ctx = policy_.window(prefix).context;
        std::vector<double> h1(P + policy_.off_b1_, P + policy_.off_b1_ + H);
        for (std::size_t pos = 0; pos < cfg.context_window; ++pos) {
            const double* row = table_.data() + (pos * V1 + ctx[pos]) * H;
            for (std::size_t j = 0; j < H; ++j) h1[j] += row[j];
        }
        for (auto& v : h1) v = std::tanh(v);
        std::vector<double> h2(P + policy_.off_b2_, P + policy_.off_b2_ + H);
        for (std::size_t i = 0; i < H; ++i) {
            const float* w = P + policy_.off_w2_ + i * H;
            for (std::size_t j = 0; j < H; ++j) h2[j] += h1[i] * w[j];
        }
        for (auto& v : h2) v = std::tanh(v);
        std::vector<double> out(P + policy_.off_b3_, P + policy_.off_b3_ + V);
        for (std::size_t i = 0; i < H; ++i) {
            const float* w = P + policy_.off_w3_ + i * V;
            for (std::size_t k = 0; k < V; ++k) out[k] += h2[i] * w[k];
        }
        return out;
    }

    /// Masked softmax at the given temperature; invalid actions get exactly 0.
    std::vector<double> next_distribution(const TokenSequence& state, double temperature = 1.0) const {
        if (!(temperature > 0.0)) throw ContractError("temperature must be positive");
        const auto valid = valid_next_actions(state, n_channels());
        if (valid.empty()) throw ContractError("no valid action from this state");
        const auto z = logits(state.tokens());
        std::vector<double> p(z.size(), 0.0);
        double mx = -std::numeric_limits<double>::infinity();
        for (auto t : valid) mx = std::max(mx, z[t.id()] / temperature);
        double s = 0.0;
        for (auto t : valid) s += p[t.id()] = std::exp(z[t.id()] / temperature - mx);
        for (auto t : valid) p[t.id()] /= s;
        return p;
    }

    /// Most probable valid action, lowest id on ties.
    Token greedy_action(const TokenSequence& state) const {
        const auto valid = valid_next_actions(state, n_channels());
        if (valid.empty()) throw ContractError("no valid action from this state");
        const auto z = logits(state.tokens());
        Token best = valid.front();
        for (auto t : valid)
            if (z[t.id()] > z[best.id()]) best = t;
        return best;
    }

    Token sample_action(const TokenSequence& state, Rng& rng, double temperature = 1.0) const {
        const auto p = next_distribution(state, temperature);
        return Token::from_id(sample_index(p, rng));
    }

    /// Extends prefix until End or until stop_len tokens (0 = max_len).
    TokenSequence complete(TokenSequence prefix, Rng& rng, double temperature = 1.0, bool greedy = false,
                           std::size_t stop_len = 0) const {
        const std::size_t limit = stop_len == 0 ? prefix.max_len() : std::min(stop_len, prefix.max_len());
        while (!prefix.is_terminal() && prefix.size() < limit)
            prefix.push_back(greedy ? greedy_action(prefix) : sample_action(prefix, rng, temperature));
        return prefix;
    }

    TokenSequence sample_sequence(Rng& rng, double temperature = 1.0, bool greedy = false) const {
        return complete(TokenSequence(max_len()), rng, temperature, greedy);
    }

    /// Inverse-CDF draw; skips zero-probability entries.
    static std::size_t sample_index(std::span<const double> p, Rng& rng) {
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t last = p.size();
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] <= 0.0) continue;
            acc += p[i];
            last = i;
            if (u < acc) return i;
        }
        if (last == p.size()) throw ContractError("cannot sample from an all-zero distribution");
        return last;
    }

private:
    Policy policy_;
    std::vector<double> table_;
};

inline std::vector<double> next_distribution(const Policy& policy, const TokenSequence& state) {
    return PolicySnapshot(policy).next_distribution(state);
}

inline TokenSequence sample_sequence(const Policy& policy, double temperature, std::uint64_t seed,
                                     bool greedy = false) {
    Rng rng(seed);
    return PolicySnapshot(policy).sample_sequence(rng, temperature, greedy);
}

/// Mean masked cross-entropy over every teacher-forcing step of entries.
inline double policy_loss(const Policy& policy, std::span<const TokenSequence> entries) {
    if (entries.empty()) throw ContractError("policy_loss needs at least one expression");
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& seq : entries)
        for (const auto& ex : policy.examples(seq)) {
            total += policy.example_loss(ex, {});
            ++count;
        }
    return total / static_cast<double>(count);
}

/// Gradient of policy_loss with respect to every parameter.
inline std::vector<double> policy_gradient(const Policy& policy, std::span<const TokenSequence> entries) {
    std::vector<TrainExample> all;
    for (const auto& seq : entries)
        for (auto& ex : policy.examples(seq)) all.push_back(std::move(ex));
    if (all.empty()) throw ContractError("policy_gradient needs at least one expression");
    std::vector<double> g(policy.parameter_count(), 0.0);
    const double w = 1.0 / static_cast<double>(all.size());
    for (const auto& ex : all) policy.example_loss(ex, g, w);
    return g;
}

/// Minibatch Adam on mean masked cross-entropy. Optimizer state starts
/// fresh on every call. Returns the mean loss of each epoch.
inline std::vector<double> train_policy(Policy& policy, std::span<const TokenSequence> entries,
                                        const TrainConfig& cfg, std::uint64_t seed) {
    if (entries.empty()) throw ContractError("train_policy needs at least one expression");
    if (cfg.batch_size == 0) throw ContractError("batch_size must be positive");
    std::vector<TrainExample> all;
    for (const auto& seq : entries)
        for (auto& ex : policy.examples(seq)) all.push_back(std::move(ex));

    auto params = policy.parameters();
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0), g(params.size());
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double b1t = 1.0, b2t = 1.0;
    std::vector<double> history;
    history.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(seed, {epoch}));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::fill(g.begin(), g.end(), 0.0);
            const double w = 1.0 / static_cast<double>(stop - start);
            for (std::size_t k = start; k < stop; ++k) epoch_loss += policy.example_loss(all[order[k]], g, w);
            b1t *= cfg.beta1;
            b2t *= cfg.beta2;
            for (std::size_t i = 0; i < params.size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                const double step =
                    cfg.learning_rate * (m[i] / (1.0 - b1t)) / (std::sqrt(v[i] / (1.0 - b2t)) + cfg.epsilon);
                params[i] = static_cast<float>(params[i] - step);
            }
        }
        epoch_loss /= static_cast<double>(all.size());
        if (!std::isfinite(epoch_loss))
            throw Error("policy training diverged at epoch " + std::to_string(epoch) + " (mean loss " +
                        std::to_string(epoch_loss) + ", " + std::to_string(all.size()) + " examples)");
        for (float p : params)
            if (!std::isfinite(p)) throw Error("policy training produced a non-finite weight at epoch " +
                                               std::to_string(epoch));
        history.push_back(epoch_loss);
    }
    return history;
}

inline constexpr char kCheckpointMagic[8] = {'I', 'D', 'X', 'F', 'O', 'R', 'G', 'E'};

/// Writes magic, a uint32 header length, a JSON header and the raw
/// little-endian float32 parameter block.
inline void save_policy(const Policy& policy, const std::filesystem::path& path) {
    nlohmann::json header;
    header["format"] = 1;
    header["n_channels"] = policy.n_channels();
    header["seed"] = policy.seed();
    header["config"] = {{"context_window", policy.config().context_window},
                        {"embedding_dim", policy.config().embedding_dim},
                        {"hidden", policy.config().hidden},
                        {"max_len", policy.config().max_len}};
    header["shapes"] = nlohmann::json::array();
    for (const auto& [name, r, c] : policy.shapes()) header["shapes"].push_back({name, r, c});
    header["parameter_count"] = policy.parameter_count();
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kCheckpointMagic, 8);
    const auto len = static_cast<std::uint32_t>(text.size());
    const unsigned char lb[4] = {static_cast<unsigned char>(len), static_cast<unsigned char>(len >> 8),
                                 static_cast<unsigned char>(len >> 16), static_cast<unsigned char>(len >> 24)};
    out.write(reinterpret_cast<const char*>(lb), 4);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    const auto params = policy.parameters();
    out.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size_bytes()));
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

inline Policy load_policy(const std::filesystem::path& path) {
    const std::string name = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + name);
    char magic[8];
    unsigned char lb[4];
    if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw DataError(name + ": not a policy checkpoint");
    if (!in.read(reinterpret_cast<char*>(lb), 4)) throw DataError(name + ": truncated checkpoint");
    const std::uint32_t len = lb[0] | (std::uint32_t{lb[1]} << 8) | (std::uint32_t{lb[2]} << 16) |
                              (std::uint32_t{lb[3]} << 24);
    std::string text(len, '\0');
    if (!in.read(text.data(), len)) throw DataError(name + ": truncated checkpoint header");
    nlohmann::json h;
    PolicyConfig cfg;
    std::size_t n_channels = 0;
    std::uint64_t seed = 0;
    std::size_t count = 0;
    try {
        h = nlohmann::json::parse(text);
        if (h.at("format").get<int>() != 1) throw DataError(name + ": unsupported checkpoint format");
        n_channels = h.at("n_channels").get<std::size_t>();
        seed = h.at("seed").get<std::uint64_t>();
        const auto& c = h.at("config");
        cfg.context_window = c.at("context_window").get<std::size_t>();
        cfg.embedding_dim = c.at("embedding_dim").get<std::size_t>();
        cfg.hidden = c.at("hidden").get<std::size_t>();
        cfg.max_len = c.at("max_len").get<std::size_t>();
        count = h.at("parameter_count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(name + ": bad checkpoint header: " + e.what());
    }
    Policy p = Policy::init(n_channels, cfg, seed);
    if (p.parameter_count() != count) throw DataError(name + ": parameter count does not match its shapes");
    if (!in.read(reinterpret_cast<char*>(p.params_.data()), static_cast<std::streamsize>(count * sizeof(float))))
        throw DataError(name + ": truncated parameter block");
    if (in.peek() != std::char_traits<char>::eof()) throw DataError(name + ": trailing bytes in checkpoint");
    return p;
}

}  // namespace indexforge
