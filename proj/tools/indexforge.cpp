// indexforge command line: synth, pretrain, discover, eval, score, update, corr.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "indexforge/indexforge.hpp"

namespace fs = std::filesystem;
using namespace indexforge;
using nlohmann::json;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool verbose = false;
};

RunConfig effective_config(const Globals& g) {
    RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
    if (g.seed) cfg.run.seed = *g.seed;
    return cfg;
}

void require_out(const Globals& g) {
    if (g.out.empty()) throw ContractError("--out is required for this command");
}

ExprTree user_expression(const std::string& text, std::size_t max_len) {
    try {
        return parse_text(text, max_len);
    } catch (const ParseError& e) {
        throw ContractError("cannot parse expression '" + text + "': " + e.what());
    }
}

/// Expressions from a discovery report (expressions.json) or a JSON list of strings.
std::vector<ExprTree> expressions_from_file(const std::string& path, std::size_t limit, std::size_t max_len) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path + " is not valid JSON: " + e.what());
    }
    std::vector<std::string> texts;
    if (doc.is_object() && doc.contains("top_k")) {
        for (const auto& e : doc["top_k"]) texts.push_back(e.at("text").get<std::string>());
    } else if (doc.is_array()) {
        for (const auto& e : doc) texts.push_back(e.is_string() ? e.get<std::string>() : e.at("text").get<std::string>());
    } else {
        throw DataError(path + " holds neither a top_k report nor a list of expressions");
    }
    if (limit && texts.size() > limit) texts.resize(limit);
    std::vector<ExprTree> out;
    for (const auto& t : texts) out.push_back(user_expression(t, max_len));
    return out;
}

auto verbose_printer(const Globals& g) {
    return [verbose = g.verbose](const json& m) {
        if (verbose) std::cerr << m.dump() << '\n';
    };
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral index discovery with policy-guided tree search"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Base random seed (overrides run.seed)");
    app.add_option("--out", g.out, "Output directory");
    app.add_flag("--verbose,-v", g.verbose, "Per-iteration progress on stderr");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with a planted index");
    synth->fallthrough();
    SynthConfig sc;
    std::size_t synth_n = 50;
    std::size_t synth_size = 32;
    synth->add_option("--channels", sc.n_channels, "Channel count")->capture_default_str();
    synth->add_option("--n", synth_n, "Total samples, split 40/20/40 into train/val/test")->capture_default_str();
    synth->add_option("--size", synth_size, "Image height and width")->capture_default_str();
    synth->add_option("--target", sc.target, "Planted expression")->capture_default_str();
    synth->add_option("--theta", sc.theta, "Mask threshold on the normalized index")->capture_default_str();
    synth->add_option("--sigma", sc.sigma, "Channel noise standard deviation")->capture_default_str();
    synth->add_option("--texture", sc.texture, "Within-class spectral texture amplitude")->capture_default_str();

    // pretrain
    auto* pretrain = app.add_subcommand("pretrain", "Pretrain the policy with the dataset-free reward");
    pretrain->fallthrough();
    std::size_t pre_channels = 0;
    std::optional<std::size_t> pre_iters;
    std::string policy_out;
    bool resume = false;
    pretrain->add_option("--channels", pre_channels, "Channel count of the target tasks")->required();
    pretrain->add_option("--iterations", pre_iters, "Iterations (overrides pretrain.iterations)");
    pretrain->add_option("--policy-out", policy_out, "Also copy the final checkpoint here");
    pretrain->add_flag("--resume", resume, "Continue the run stored in --out");

    // discover
    auto* discover = app.add_subcommand("discover", "Search for indices on a dataset");
    discover->fallthrough();
    std::string data, policy_in, dump_tree;
    std::optional<std::size_t> max_iters;
    discover->add_option("--data", data, "Dataset manifest")->required();
    discover->add_option("--policy-in", policy_in, "Initial policy checkpoint");
    discover->add_option("--policy-out", policy_out, "Also copy the final checkpoint here");
    discover->add_option("--max-iters", max_iters, "Iteration cap (overrides run.max_iters)");
    discover->add_option("--dump-tree", dump_tree, "Write a JSON snapshot of a search tree each iteration");
    discover->add_flag("--resume", resume, "Continue the run stored in --out");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate an expression on every image of a dataset");
    eval->fallthrough();
    std::string expr_text;
    eval->add_option("--data", data, "Dataset manifest")->required();
    eval->add_option("--expr", expr_text, "Expression text")->required();

    // score
    auto* score = app.add_subcommand("score", "Heuristic scores of an expression against the masks");
    score->fallthrough();
    std::string metric = "pcc", combiner = "max", split = "train";
    score->add_option("--data", data, "Dataset manifest")->required();
    score->add_option("--expr", expr_text, "Expression text")->required();
    score->add_option("--metric", metric, "f1, auc, cs, iou or pcc")->capture_default_str();
    score->add_option("--combiner", combiner, "max or min")->capture_default_str();
    score->add_option("--split", split, "train, val or test")->capture_default_str();

    // update
    auto* update = app.add_subcommand("update", "Write a dataset with indices appended or substituted");
    update->fallthrough();
    std::string exprs_path, mode = "C";
    std::size_t top = 0;
    update->add_option("--data", data, "Dataset manifest")->required();
    update->add_option("--exprs", exprs_path, "expressions.json or a JSON list of expression strings")->required();
    update->add_option("--mode", mode, "C, CM, R or RM")->capture_default_str();
    update->add_option("--top", top, "Use only the first N expressions (default: 1 for C/R, all for CM/RM)");

    // corr
    auto* corr = app.add_subcommand("corr", "Correlate heuristic rewards with the proxy training reward");
    corr->fallthrough();
    std::size_t corr_n = 50;
    corr->add_option("--data", data, "Dataset manifest")->required();
    corr->add_option("--n", corr_n, "Number of distinct random expressions")->capture_default_str();
    corr->add_option("--policy-in", policy_in, "Sample from this checkpoint instead of a fresh policy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            require_out(g);
            sc.seed = g.seed.value_or(sc.seed);
            sc.height = sc.width = synth_size;
            if (synth_n < 3) throw ContractError("--n must be at least 3");
            sc.n_train = (synth_n * 2 + 2) / 5;
            sc.n_val = (synth_n + 2) / 5;
            sc.n_test = synth_n - sc.n_train - sc.n_val;
            const Dataset ds = generate_synthetic(sc);
            const auto manifest = save_dataset(ds, g.out);
            std::cout << json{{"manifest", manifest.string()},
                              {"samples", ds.samples.size()},
                              {"train", ds.count(Split::Train)},
                              {"val", ds.count(Split::Val)},
                              {"test", ds.count(Split::Test)},
                              {"n_channels", ds.n_channels}}
                             .dump()
                      << '\n';
        } else if (pretrain->parsed()) {
            require_out(g);
            RunConfig cfg = effective_config(g);
            if (pre_iters) cfg.pretrain.iterations = *pre_iters;
            cfg.pretrain.n_channels = pre_channels;
            RunOptions opts;
            opts.out_dir = g.out;
            opts.resume = resume;
            opts.on_iteration = verbose_printer(g);
            const auto outcome = run_pretrain(cfg, pre_channels, opts);
            if (!policy_out.empty()) save_policy(outcome.policy, policy_out);
            std::cout << json{{"iterations", outcome.iterations},
                              {"checkpoint", (fs::path(g.out) / "policy.ckpt").string()}}
                             .dump()
                      << '\n';
        } else if (discover->parsed()) {
            require_out(g);
            RunConfig cfg = effective_config(g);
            if (max_iters) cfg.run.max_iters = *max_iters;
            const Dataset ds = load_dataset(data);
            RunOptions opts;
            opts.out_dir = g.out;
            opts.resume = resume;
            if (!policy_in.empty()) opts.policy_in = policy_in;
            if (!dump_tree.empty()) opts.dump_tree = dump_tree;
            opts.on_iteration = verbose_printer(g);
            const auto outcome = run_discover(cfg, ds, opts);
            if (!policy_out.empty()) save_policy(outcome.policy, policy_out);
            std::ifstream rep(fs::path(g.out) / "expressions.json");
            std::cout << json::parse(rep).dump() << '\n';
        } else if (eval->parsed()) {
            const RunConfig cfg = effective_config(g);
            const Dataset ds = load_dataset(data);
            const CompiledExpr expr(user_expression(expr_text, cfg.max_len));
            if (!g.out.empty()) fs::create_directories(g.out);
            for (std::size_t i = 0; i < ds.samples.size(); ++i) {
                const auto& s = ds.samples[i];
                EvaluatedIndex idx;
                try {
                    idx = evaluate_index(expr, s.image, cfg.normalize);
                } catch (const DegenerateIndex& e) {
                    throw DataError("sample " + std::to_string(i) + ": " + e.what());
                }
                if (!g.out.empty()) {
                    char name[32];
                    std::snprintf(name, sizeof name, "%04zu.npy", i);
                    const std::size_t shape[2] = {idx.height, idx.width};
                    save_npy(fs::path(g.out) / name, shape, idx.values);
                }
                std::cout << json{{"sample", i},
                                  {"split", to_string(s.split)},
                                  {"raw_mean", idx.mean},
                                  {"raw_stddev", idx.stddev},
                                  {"nonfinite_fraction", idx.degenerate_fraction}}
                                 .dump()
                          << '\n';
            }
        } else if (score->parsed()) {
            RunConfig cfg = effective_config(g).resolved();
            cfg.reward.metric.kind = parse_metric(metric);
            cfg.reward.combiner = parse_combiner(combiner);
            const Split which = [&] {
                try {
                    return parse_split(split);
                } catch (const DataError& e) {
                    throw ContractError(e.what());
                }
            }();
            const Dataset ds = load_dataset(data);
            const CompiledExpr expr(user_expression(expr_text, cfg.max_len));
            double total = 0.0;
            std::size_t count = 0;
            for (std::size_t i = 0; i < ds.samples.size(); ++i) {
                const auto& s = ds.samples[i];
                if (s.split != which) continue;
                EvaluatedIndex idx;
                try {
                    idx = evaluate_index(expr, s.image, cfg.normalize);
                } catch (const DegenerateIndex& e) {
                    throw DataError("sample " + std::to_string(i) + ": " + e.what());
                }
                const double a = metric_score(idx.values, s.mask, cfg.reward.metric).value;
                const double b = metric_score(idx.values, s.mask, cfg.reward.metric, true).value;
                const double v = combine(a, b, cfg.reward.combiner);
                total += v;
                ++count;
                std::cout << json{{"sample", i}, {"score", v}, {"direct", a}, {"complement", b}}.dump() << '\n';
            }
            if (count == 0) throw DataError("no samples in split " + split);
            std::cout << json{{"metric", metric},
                              {"combiner", combiner},
                              {"split", split},
                              {"count", count},
                              {"mean", total / static_cast<double>(count)}}
                             .dump()
                      << '\n';
        } else if (update->parsed()) {
            require_out(g);
            const RunConfig cfg = effective_config(g);
            const UpdateMode m = parse_update_mode(mode);
            const std::size_t limit = top ? top : (m == UpdateMode::C || m == UpdateMode::R) ? 1 : 0;
            const auto exprs = expressions_from_file(exprs_path, limit, cfg.max_len);
            const Dataset ds = load_dataset(data);
            const Dataset out = update_dataset(ds, exprs, m, cfg.normalize);
            const auto manifest = save_dataset(out, g.out);
            std::cout << json{{"manifest", manifest.string()}, {"mode", mode}, {"n_channels", out.n_channels}}.dump()
                      << '\n';
        } else if (corr->parsed()) {
            const RunConfig cfg = effective_config(g);
            const Dataset ds = load_dataset(data);
            std::optional<Policy> pol;
            if (!policy_in.empty()) pol = load_policy(policy_in);
            const json report = run_correlation(cfg, ds, corr_n, pol);
            if (!g.out.empty()) {
                fs::create_directories(g.out);
                std::ofstream(fs::path(g.out) / "corr.json") << report.dump(2) << '\n';
            }
            std::cout << report["heuristics"].dump() << '\n';
        }
    } catch (const ContractError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
