#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "selfbias/pipeline.hpp"

using namespace selfbias;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("selfbias_sw_" + std::to_string(std::chrono::steady_clock::now()
                                                    .time_since_epoch()
                                                    .count()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Corpus with distinct neighborhood tiers: composites in eighths around the
// audited model at 64 (8.0). far0 at 69 joins only at epsilon 0.625+.
const std::vector<std::pair<std::string, int>> kTiers = {
    {"audit", 64}, {"eq0", 64}, {"eq1", 64}, {"up0", 66}, {"dn0", 62},
    {"far0", 69},  {"hi0", 78}, {"lo0", 40}, {"lo1", 40},
};

Dataset tier_dataset(int questions) {
    Dataset ds;
    const std::vector<std::string> cats = {"Text Generation", "Information Provision",
                                           "Explanation"};
    for (int q = 0; q < questions; ++q) {
        char qid[16];
        std::snprintf(qid, sizeof(qid), "q%04d", q);
        ds.add_question({qid, "Synthetic tier task " + std::to_string(q) + ".",
                         cats[static_cast<std::size_t>(q) % cats.size()]});
        for (const auto& [model, eighths] : kTiers) {
            ds.add_response(model, qid, "Answer from " + model + " to " + qid + ".");
        }
    }
    return ds;
}

// Benchmark records reproducing the tier composites. An odd eighth count is
// split across the two judges as adjacent quarter steps.
void seed_tier_scores(const fs::path& run_dir, const Dataset& ds) {
    std::vector<ScoreRecord> records;
    for (const auto& [model, eighths] : kTiers) {
        const int q1 = (eighths + 1) / 2;
        const int q2 = eighths - q1;
        for (const auto& q : ds.questions()) {
            const GridScore s1 = GridScore::from_quarters(q1);
            const GridScore s2 = GridScore::from_quarters(q2);
            records.push_back(ScoreRecord::make(model, q.id, "bench1",
                                                DimensionScores{s1, s1, s1, s1, s1}, s1.points()));
            records.push_back(ScoreRecord::make(model, q.id, "bench2",
                                                DimensionScores{s2, s2, s2, s2, s2}, s2.points()));
        }
    }
    fs::create_directories(run_dir);
    save_score_records(records, run_dir / "scores.jsonl");
}

RunConfig tier_config(std::uint64_t seed, double q_self, double q_target) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.benchmark_judges = {"bench1", "bench2"};
    cfg.bootstrap.iterations = 200;
    cfg.hc_sample_size = 20;

    BackendEntry bench1;
    bench1.judge_id = "bench1";
    BackendEntry bench2;
    bench2.judge_id = "bench2";
    BackendEntry audit;
    audit.judge_id = "audit";
    audit.sim.q_self = q_self;
    audit.sim.q_target = q_target;
    audit.sim.d = 0.95;
    cfg.backends = {bench1, bench2, audit};
    return cfg;
}

// Independent enumeration of the presentations a quantification at the given
// epsilon needs: two per self pairing; the simulated judge draws each ordered
// null pair independently, so an unordered null body costs four.
std::int64_t presentations_at(const Dataset& ds, int eps_eighths) {
    std::map<std::string, int> score;
    for (const auto& [m, e] : kTiers) score[m] = e;
    std::int64_t self_pairs = 0;
    std::set<std::pair<std::string, std::string>> null_bodies;
    for (const auto& [m, e] : kTiers) {
        if (m == "audit") continue;
        if (std::abs(e - score["audit"]) <= eps_eighths) ++self_pairs;
    }
    for (const auto& [j, ej] : kTiers) {
        for (const auto& [k, ek] : kTiers) {
            if (j == "audit" || k == "audit" || j >= k) continue;
            const bool in = std::abs(ej - score["audit"]) <= eps_eighths &&
                            std::abs(ek - score["audit"]) <= eps_eighths &&
                            std::abs(ej - ek) <= eps_eighths;
            if (in) null_bodies.insert({j, k});
        }
    }
    return static_cast<std::int64_t>(ds.size()) *
           (2 * self_pairs + 4 * static_cast<std::int64_t>(null_bodies.size()));
}

} // namespace

TEST_CASE("epsilon sweep regimes and delta queries") {
    TempDir dir;
    const Dataset ds = tier_dataset(12);
    RunConfig cfg = tier_config(51, 0.8, 0.6);
    seed_tier_scores(dir.path / "run", ds);

    Pipeline pipeline(cfg, dir.path / "run", ds);

    SECTION("sweep requires a baseline quantification") {
        CHECK_THROWS_AS(pipeline.cmd_sweep_epsilon("audit", {0.125}), MissingBaseline);
    }

    SECTION("regimes, counters, and the set-difference oracle") {
        pipeline.cmd_verify("audit");
        pipeline.cmd_quantify("audit");

        const std::vector<double> eps = {0.0, 0.125, 0.25, 0.5, 0.75};
        const auto points = pipeline.cmd_sweep_epsilon("audit", eps);
        REQUIRE(points.size() == 5);

        // Strict-subset points (epsilon <= 0.25) execute nothing new.
        for (int i = 0; i < 3; ++i) {
            CHECK(points[static_cast<std::size_t>(i)].strict_subset);
            CHECK(points[static_cast<std::size_t>(i)].new_queries == 0);
        }
        CHECK_FALSE(points[3].strict_subset);
        CHECK_FALSE(points[4].strict_subset);

        // Enlarged points execute exactly the brute-force pair-set difference.
        const std::int64_t p025 = presentations_at(ds, 2);
        const std::int64_t p050 = presentations_at(ds, 4);
        const std::int64_t p075 = presentations_at(ds, 6);
        CHECK(points[3].new_queries == p050 - p025);
        CHECK(points[4].new_queries == p075 - p050);
        CHECK(points[3].new_queries > 0);
        CHECK(points[4].new_queries > 0);

        // Pair counts grow with epsilon.
        CHECK(points[0].n_pairs <= points[2].n_pairs);
        CHECK(points[2].n_pairs <= points[4].n_pairs);

        CHECK(fs::exists(pipeline.reports_dir() / "sweep_audit.csv"));

        // A second sweep over the same run is fully cached.
        const auto again = pipeline.cmd_sweep_epsilon("audit", eps);
        for (const auto& p : again) CHECK(p.new_queries == 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            CHECK(again[i].beta == points[i].beta);
        }
    }
}

TEST_CASE("report bundle") {
    TempDir dir;
    const Dataset ds = tier_dataset(12);
    RunConfig cfg = tier_config(61, 0.9, 0.5);
    // Second audited judge with mild bias.
    BackendEntry second;
    second.judge_id = "eq0";
    second.sim.q_self = 0.6;
    second.sim.q_target = 0.5;
    second.sim.d = 0.95;
    cfg.backends.push_back(second);

    seed_tier_scores(dir.path / "run", ds);
    Pipeline pipeline(cfg, dir.path / "run", ds);

    SECTION("report before quantify is MissingPhase") {
        CHECK_THROWS_AS(pipeline.cmd_report(), MissingPhase);
    }

    SECTION("tables, ordering, and deterministic regeneration") {
        pipeline.cmd_verify("audit");
        pipeline.cmd_verify("eq0");
        const BiasReport strong = pipeline.cmd_quantify("audit");
        const BiasReport mild = pipeline.cmd_quantify("eq0");
        REQUIRE(strong.beta > mild.beta);
        pipeline.cmd_mitigate("audit", /*include_cot=*/false, /*force=*/true);
        pipeline.cmd_report();

        const std::string bias_csv = slurp(pipeline.reports_dir() / "bias_table.csv");
        const auto audit_pos = bias_csv.find("\naudit,");
        const auto eq0_pos = bias_csv.find("\neq0,");
        REQUIRE(audit_pos != std::string::npos);
        REQUIRE(eq0_pos != std::string::npos);
        CHECK(audit_pos < eq0_pos); // sorted by descending SPB

        const std::string archetype_csv = slurp(pipeline.reports_dir() / "archetype_table.csv");
        CHECK(archetype_csv.find("audit,") != std::string::npos);
        CHECK(archetype_csv.find(",high") != std::string::npos);

        CHECK(fs::exists(pipeline.reports_dir() / "mitigation_table.csv"));
        CHECK(fs::exists(pipeline.reports_dir() / "scatter_quality_beta.csv"));
        CHECK(fs::exists(pipeline.reports_dir() / "scatter_pi_beta.csv"));
        CHECK(fs::exists(pipeline.reports_dir() / "summary.json"));

        // Regeneration is byte-identical.
        const std::string scatter = slurp(pipeline.reports_dir() / "scatter_pi_beta.csv");
        pipeline.cmd_report();
        CHECK(slurp(pipeline.reports_dir() / "bias_table.csv") == bias_csv);
        CHECK(slurp(pipeline.reports_dir() / "archetype_table.csv") == archetype_csv);
        CHECK(slurp(pipeline.reports_dir() / "scatter_pi_beta.csv") == scatter);
    }
}

TEST_CASE("simulation mode validates the estimators") {
    SECTION("pure position bias produces exactly zero beta and no significance") {
        SimulationCell cell;
        cell.p_first = 1.0;
        BiasComputationConfig cfg;
        cfg.bootstrap.iterations = 200;
        const SimulationRow row = simulate_cell(cell, 400, 77, cfg);
        CHECK(row.beta_hat == 0.0);
        CHECK(row.beta_true == 0.0);
        CHECK_FALSE(row.significant);
        CHECK(row.covered);
    }

    SECTION("degenerate all-or-nothing preferences") {
        SimulationCell cell;
        cell.q_self = 0.0;
        cell.q_target = 0.0;
        BiasComputationConfig cfg;
        cfg.bootstrap.iterations = 200;
        const SimulationRow row = simulate_cell(cell, 300, 78, cfg);
        CHECK(row.beta_hat == 0.0);
        CHECK_FALSE(row.significant);
    }

    SECTION("injected bias is recovered in a small cell") {
        SimulationCell cell;
        cell.q_self = 0.9;
        cell.q_target = 0.4;
        BiasComputationConfig cfg;
        cfg.bootstrap.iterations = 300;
        const SimulationRow row = simulate_cell(cell, 1200, 79, cfg);
        CHECK_THAT(row.beta_hat,
                   Catch::Matchers::WithinAbs(expected_beta(0.9, 0.4), 0.05));
        CHECK(row.significant);
    }
}
