#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace indexforge;
using testsupport::read_file;
using testsupport::TempDir;

namespace {

const Dataset& tiny_data() {
    static const Dataset ds = [] {
        SynthConfig c;
        c.n_train = 3;
        c.n_val = 2;
        c.n_test = 1;
        c.height = c.width = 16;
        return generate_synthetic(c);
    }();
    return ds;
}

RunConfig tiny_config() {
    RunConfig c;
    c.max_len = 12;
    c.search.n_simulations = 6;
    c.buffer.initial_capacity = 8;
    c.buffer.min_capacity = 3;
    c.policy.embedding_dim = 8;
    c.policy.hidden = 16;
    c.train.epochs = 2;
    c.run.expressions_per_iteration = 4;
    c.run.max_iters = 7;
    c.run.patience = 50;
    c.run.seed = 3;
    c.proxy.steps = 40;
    c.pretrain.iterations = 3;
    return c;
}

std::vector<std::string> artifacts() {
    return {"expressions.json", "metrics.jsonl", "buffer.json", "policy.ckpt", "run_state.json", "config.json"};
}

std::vector<nlohmann::json> metric_lines(const std::filesystem::path& p) {
    std::vector<nlohmann::json> out;
    std::istringstream in(read_file(p));
    for (std::string line; std::getline(in, line);) out.push_back(nlohmann::json::parse(line));
    return out;
}

}  // namespace

TEST(Config, DefaultsRoundTripThroughJson) {
    const RunConfig c;
    const auto j = to_json(c);
    EXPECT_EQ(to_json(config_from_json(j)), j);
    EXPECT_EQ(j["reward"]["metric"], "pcc");
    EXPECT_EQ(j["reward"]["combiner"], "max");
    EXPECT_EQ(j["buffer"]["initial_capacity"], 200);
    auto t = to_json(tiny_config());
    EXPECT_EQ(to_json(config_from_json(t)), t);
}

TEST(Config, RejectsUnknownAndMistyped) {
    EXPECT_THROW(config_from_json({{"search", {{"n_sims", 3}}}}), ContractError);
    EXPECT_THROW(config_from_json({{"searches", nlohmann::json::object()}}), ContractError);
    EXPECT_THROW(config_from_json({{"search", {{"n_simulations", "many"}}}}), ContractError);
    EXPECT_THROW(config_from_json({{"reward", {{"metric", "dice"}}}}), ContractError);
    EXPECT_THROW(config_from_json({{"run", {{"top_k", 0}}}}), ContractError);
    const auto c = config_from_json({{"reward", {{"metric", "iou"}, {"combiner", "min"}}}});
    EXPECT_EQ(c.reward.metric.kind, MetricKind::IoU);
    EXPECT_EQ(c.reward.combiner, CombinerKind::MinLiteral);
}

TEST(Orchestrator, SameSeedSameBytes) {
    TempDir a("runa"), b("runb");
    auto oa = testsupport::options(a.path()), ob = testsupport::options(b.path());
    const auto ra = run_discover(tiny_config(), tiny_data(), oa);
    run_discover(tiny_config(), tiny_data(), ob);
    EXPECT_EQ(ra.iterations, 7u);
    for (const auto& f : artifacts()) EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
    const auto ex = nlohmann::json::parse(read_file(a / "expressions.json"));
    ASSERT_EQ(ex["top_k"].size(), 2u);
    EXPECT_EQ(ex["top_k"][0]["rank"], 1);
    EXPECT_GE(ex["top_k"][0]["reward"].get<double>(), ex["top_k"][1]["reward"].get<double>());
    for (const char* key : {"text", "canonical", "minified", "reward", "heuristic"})
        EXPECT_TRUE(ex["top_k"][0].contains(key)) << key;
}

TEST(Orchestrator, DifferentSeedDiffers) {
    TempDir a("runa"), b("runb");
    auto c = tiny_config();
    run_discover(c, tiny_data(), testsupport::options(a.path()));
    c.run.seed = 4;
    run_discover(c, tiny_data(), testsupport::options(b.path()));
    EXPECT_NE(read_file(a / "metrics.jsonl"), read_file(b / "metrics.jsonl"));
}

TEST(Orchestrator, KillAndResumeAfterEveryIteration) {
    TempDir ref("ref");
    run_discover(tiny_config(), tiny_data(), testsupport::options(ref.path()));
    for (std::size_t stop = 1; stop < 7; ++stop) {
        TempDir d("resume");
        auto first = testsupport::options(d.path());
        first.stop_after = stop;
        const auto part = run_discover(tiny_config(), tiny_data(), first);
        ASSERT_EQ(part.iterations, stop);
        // Simulate a crash inside the next iteration: a half-written metrics
        // line and an orphaned next snapshot.
        std::ofstream(d / "metrics.jsonl", std::ios::app) << "{\"iteration\":" << stop << ",\"trunc";
        std::ofstream(d.path() / "state" / detail::snapshot_name("policy", stop + 1, ".ckpt").substr(6)) << "junk";
        auto rest = testsupport::options(d.path());
        rest.resume = true;
        const auto done = run_discover(tiny_config(), tiny_data(), rest);
        EXPECT_EQ(done.iterations, 7u);
        for (const auto& f : artifacts()) EXPECT_EQ(read_file(d / f), read_file(ref / f)) << f << " stop " << stop;
    }
}

TEST(Orchestrator, ExistingRunNeedsResumeFlag) {
    TempDir d("again");
    auto c = tiny_config();
    c.run.max_iters = 1;
    run_discover(c, tiny_data(), testsupport::options(d.path()));
    EXPECT_THROW(run_discover(c, tiny_data(), testsupport::options(d.path())), ContractError);
    auto r = testsupport::options(d.path());
    r.resume = true;
    EXPECT_EQ(run_discover(c, tiny_data(), r).iterations, 1u);  // already finished
}

TEST(Orchestrator, BufferMeanNeverDropsOnceFilled) {
    TempDir d("mono");
    auto c = tiny_config();
    c.run.max_iters = 10;
    run_discover(c, tiny_data(), testsupport::options(d.path()));
    const auto lines = metric_lines(d / "metrics.jsonl");
    ASSERT_EQ(lines.size(), 10u);
    bool seen_filled = false;
    double prev = -1e300;
    std::size_t shrinks = 0;
    for (const auto& m : lines) {
        if (!m["filled"].get<bool>()) {
            EXPECT_EQ(m["train_loss"], nullptr);
            continue;
        }
        seen_filled = true;
        ++shrinks;
        EXPECT_EQ(m["capacity"].get<std::size_t>(), shrunk_capacity(8, shrinks, 3));
        EXPECT_GE(m["mean_reward"].get<double>(), prev);
        prev = m["mean_reward"].get<double>();
        EXPECT_TRUE(m["train_loss"].is_number());
    }
    EXPECT_TRUE(seen_filled);
}

TEST(Orchestrator, PatienceStopsEarlyAtMinimumCapacity) {
    TempDir d("patience");
    auto c = tiny_config();
    c.run.max_iters = 40;
    c.run.patience = 1;
    const auto out = run_discover(c, tiny_data(), testsupport::options(d.path()));
    EXPECT_TRUE(out.finished);
    EXPECT_LT(out.iterations, 40u);
    EXPECT_EQ(out.buffer.capacity(), 3u);
    const auto st = nlohmann::json::parse(read_file(d / "run_state.json"));
    EXPECT_TRUE(st["finished"].get<bool>());
}

TEST(Orchestrator, PretrainRunsWithoutData) {
    TempDir d("pre");
    const auto out = run_pretrain(tiny_config(), 4, testsupport::options(d.path()));
    EXPECT_EQ(out.iterations, 3u);
    EXPECT_EQ(out.policy.n_channels(), 4u);
    EXPECT_EQ(metric_lines(d / "metrics.jsonl").size(), 3u);
    EXPECT_FALSE(std::filesystem::exists(d / "expressions.json"));
    EXPECT_TRUE(load_policy(d / "policy.ckpt") == out.policy);
    for (const auto& e : out.buffer.entries()) EXPECT_EQ(e.reward, pretrain_reward(e.expression));
}

TEST(Orchestrator, DiscoverFromPretrainedPolicy) {
    TempDir pre("pre"), run("disc");
    run_pretrain(tiny_config(), 3, testsupport::options(pre.path()));
    auto c = tiny_config();
    c.run.max_iters = 2;
    auto o = testsupport::options(run.path());
    o.policy_in = pre / "policy.ckpt";
    EXPECT_EQ(run_discover(c, tiny_data(), o).iterations, 2u);
    TempDir wrong("wrong");
    run_pretrain(tiny_config(), 5, testsupport::options(wrong.path() / "p"));
    auto bad = testsupport::options(wrong.path() / "d");
    bad.policy_in = wrong.path() / "p" / "policy.ckpt";
    EXPECT_THROW(run_discover(c, tiny_data(), bad), ContractError);
}

TEST(Correlation, ReportShape) {
    auto c = tiny_config();
    const auto rep = run_correlation(c, tiny_data(), 12);
    ASSERT_EQ(rep["heuristics"].size(), 10u);
    ASSERT_EQ(rep["expressions"].size(), 12u);
    for (const auto& h : rep["heuristics"]) {
        const double r = h["r"].get<double>();
        EXPECT_LE(std::abs(r), 1.0 + 1e-12);
        EXPECT_NEAR(h["t"].get<double>(), correlation_t(r, 12), 1e-12);
    }
    EXPECT_THROW(run_correlation(c, tiny_data(), 5), ContractError);
}

TEST(Stats, TStatisticAndPValue) {
    EXPECT_NEAR(correlation_t(0.1417, 200), 2.014, 0.01);
    EXPECT_NEAR(correlation_p(correlation_t(0.1417, 200), 200), 0.0453, 0.001);
    const std::vector<double> x = {1, 2, 3, 4}, y = {2, 4, 6, 8.5};
    EXPECT_NEAR(pearson(x, y), 0.9983814394570298, 1e-12);
    const std::vector<double> flat = {1, 1, 1, 1};
    EXPECT_EQ(pearson(flat, y), 0.0);
}
