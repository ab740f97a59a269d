#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "indexforge/error.hpp"
#include "indexforge/expr.hpp"
#include "indexforge/grammar.hpp"
#include "indexforge/policy.hpp"
#include "indexforge/rng.hpp"
#include "indexforge/token.hpp"

namespace indexforge {

struct SearchConfig {
    std::size_t n_simulations = 64;
    double exploration = 1.4142135623730951;  // sqrt(2)
    std::size_t rollout_max_len = 0;          // 0 means the state's max_len
    double rollout_temperature = 1.0;
    bool use_policy_priors = false;           // PUCT selection instead of UCB1
};

/// Return of a (possibly non-terminal) end state. Must be thread-safe when
/// searches run concurrently.
using RewardFn = std::function<double(const TokenSequence&)>;

struct SearchNode {
    TokenSequence state;
    std::uint64_t visits = 0;
    double total_return = 0.0;
    std::uint64_t own_evaluations = 0;  // times this node was itself scored
    std::vector<Token> actions;                        // valid actions, ascending id
    std::vector<std::unique_ptr<SearchNode>> children; // aligned with actions; null until expanded

    double mean_return() const noexcept { return visits ? total_return / static_cast<double>(visits) : 0.0; }
};

/// Q + c * sqrt(ln(parent_visits) / N); +inf for an unvisited child.
inline double ucb1(std::uint64_t parent_visits, std::uint64_t child_visits, double child_mean, double c) {
    if (parent_visits < 1) throw ContractError("ucb1 needs parent_visits >= 1");
    if (child_visits == 0) return std::numeric_limits<double>::infinity();
    if (c == 0.0) return child_mean;
    return child_mean +
           c * std::sqrt(std::log(static_cast<double>(parent_visits)) / static_cast<double>(child_visits));
}

inline double ucb1(std::uint64_t parent_visits, const SearchNode& child, double c) {
    return ucb1(parent_visits, child.visits, child.mean_return(), c);
}

struct SearchResult {
    std::vector<std::uint64_t> visit_counts;  // indexed by token id
    std::unique_ptr<SearchNode> root;
};

namespace detail {

inline std::unique_ptr<SearchNode> make_node(TokenSequence state, std::size_t n_channels) {
    auto node = std::make_unique<SearchNode>();
    node->state = std::move(state);
    if (!node->state.is_terminal() && node->state.size() < node->state.max_len())
        node->actions = valid_next_actions(node->state, n_channels);
    node->children.resize(node->actions.size());
    return node;
}

}  // namespace detail

/// Rollout-guided MCTS from root_state. Each simulation descends by UCB1,
/// expands the lowest-id unvisited child, completes it with the policy and
/// backs the end-state reward up the path.
inline SearchResult run_search(const TokenSequence& root_state, const PolicySnapshot& policy,
                               const RewardFn& reward_fn, const SearchConfig& cfg, Rng& rng) {
    if (root_state.is_terminal()) throw ContractError("search root is terminal");
    if (cfg.n_simulations == 0) throw ContractError("n_simulations must be at least 1");
    const std::size_t n_channels = policy.n_channels();
    SearchResult result;
    result.root = detail::make_node(root_state, n_channels);
    if (result.root->actions.empty()) throw ContractError("search root has no valid actions");

    std::vector<SearchNode*> path;
    for (std::size_t sim = 0; sim < cfg.n_simulations; ++sim) {
        path.clear();
        SearchNode* node = result.root.get();
        path.push_back(node);
        double r = 0.0;
        for (;;) {
            if (node->actions.empty()) {
                r = reward_fn(node->state);
                ++node->own_evaluations;
                break;
            }
            std::size_t pick = node->actions.size();
            if (cfg.use_policy_priors) {
                const auto p = policy.next_distribution(node->state);
                double best = -std::numeric_limits<double>::infinity();
                const double sq = std::sqrt(static_cast<double>(node->visits));
                for (std::size_t i = 0; i < node->actions.size(); ++i) {
                    const SearchNode* ch = node->children[i].get();
                    const double q = ch ? ch->mean_return() : 0.0;
                    const double n = ch ? static_cast<double>(ch->visits) : 0.0;
                    const double score = q + cfg.exploration * p[node->actions[i].id()] * sq / (1.0 + n);
                    if (score > best) {
                        best = score;
                        pick = i;
                    }
                }
            } else {
                for (std::size_t i = 0; i < node->actions.size(); ++i)
                    if (!node->children[i]) {
                        pick = i;
                        break;
                    }
                if (pick == node->actions.size()) {
                    double best = -std::numeric_limits<double>::infinity();
                    for (std::size_t i = 0; i < node->actions.size(); ++i) {
                        const double s = ucb1(node->visits, *node->children[i], cfg.exploration);
                        if (s > best) {
                            best = s;
                            pick = i;
                        }
                    }
                }
            }
            if (!node->children[pick]) {
                TokenSequence next = node->state;
                next.push_back(node->actions[pick]);
                node->children[pick] = detail::make_node(std::move(next), n_channels);
                SearchNode* leaf = node->children[pick].get();
                path.push_back(leaf);
                const TokenSequence end =
                    leaf->state.is_terminal()
                        ? leaf->state
                        : policy.complete(leaf->state, rng, cfg.rollout_temperature, false, cfg.rollout_max_len);
                r = reward_fn(end);
                ++leaf->own_evaluations;
                break;
            }
            node = node->children[pick].get();
            path.push_back(node);
        }
        for (SearchNode* n : path) {
            ++n->visits;
            n->total_return += r;
        }
    }

    result.visit_counts.assign(vocab_size(n_channels), 0);
    for (std::size_t i = 0; i < result.root->actions.size(); ++i)
        if (result.root->children[i]) result.visit_counts[result.root->actions[i].id()] = result.root->children[i]->visits;
    return result;
}

/// p_a proportional to N_a^(1/tau); greedy gives the one-hot argmax with the
/// lowest id winning ties.
inline std::vector<double> search_policy_distribution(std::span<const std::uint64_t> visits, double temperature,
                                                      bool greedy = false) {
    if (visits.empty()) throw ContractError("empty visit counts");
    std::uint64_t total = 0, top = 0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < visits.size(); ++i) {
        total += visits[i];
        if (visits[i] > top) {
            top = visits[i];
            arg = i;
        }
    }
    if (total == 0) throw ContractError("visit counts sum to zero");
    std::vector<double> p(visits.size(), 0.0);
    if (greedy) {
        p[arg] = 1.0;
        return p;
    }
    if (!(temperature > 0.0)) throw ContractError("temperature must be positive");
    double s = 0.0;
    for (std::size_t i = 0; i < visits.size(); ++i) {
        if (visits[i] == 0) continue;
        p[i] = std::pow(static_cast<double>(visits[i]) / static_cast<double>(top), 1.0 / temperature);
        s += p[i];
    }
    for (auto& v : p) v /= s;
    return p;
}

/// Debug snapshot of a search tree, children listed by token text.
inline nlohmann::json tree_to_json(const SearchNode& node, std::size_t max_depth = 3) {
    nlohmann::json j;
    j["state"] = to_text(node.state);
    j["N"] = node.visits;
    j["W"] = node.total_return;
    j["Q"] = node.mean_return();
    j["own_evaluations"] = node.own_evaluations;
    if (max_depth > 0) {
        nlohmann::json kids = nlohmann::json::object();
        for (std::size_t i = 0; i < node.actions.size(); ++i)
            if (node.children[i]) kids[spelling(node.actions[i])] = tree_to_json(*node.children[i], max_depth - 1);
        j["children"] = std::move(kids);
    }
    return j;
}

}  // namespace indexforge
