// spb-audit: command-line driver for the self-preference bias auditing
// pipeline. Subcommands mirror the run phases: score, verify, quantify,
// mitigate, sweep-epsilon, simulate, report.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selfbias/backend_http.hpp"
#include "selfbias/pipeline.hpp"
#include "selfbias/reports.hpp"

namespace {

using namespace selfbias;

struct CommonArgs {
    std::string config_path;
    std::string run_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> epsilon;
    std::optional<int> parallelism;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
    auto* config = cmd->add_option("--config", args.config_path, "run configuration file (JSON)");
    if (needs_config) config->required();
    cmd->add_option("--run-dir", args.run_dir, "run directory for manifest, records, and reports")
        ->required();
    cmd->add_option("--seed", args.seed, "override the configured root seed");
    cmd->add_option("--epsilon", args.epsilon, "override the equal-quality threshold");
    cmd->add_option("--parallelism", args.parallelism, "override the backend fan-out bound");
    cmd->add_flag("--force", args.force, "bypass gate/selection checks");
}

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg = args.config_path.empty() ? RunConfig{} : RunConfig::load(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    if (args.epsilon) cfg.epsilon = *args.epsilon;
    if (args.parallelism) cfg.parallelism = *args.parallelism;
    return cfg;
}

std::unique_ptr<Pipeline> make_pipeline(const CommonArgs& args) {
    auto pipeline = std::make_unique<Pipeline>(load_config(args), args.run_dir);
    pipeline->set_live_backend_factory([](const BackendEntry& entry, const RetryPolicy& retry) {
        return std::make_unique<LiveJudge>(entry, retry);
    });
    return pipeline;
}

std::vector<std::string> audited_judges(const Pipeline& pipeline,
                                        const std::vector<std::string>& requested) {
    if (!requested.empty()) return requested;
    std::vector<std::string> out;
    for (const auto& b : pipeline.config().backends) {
        bool is_benchmark = false;
        for (const auto& bench : pipeline.config().benchmark_judges) {
            is_benchmark = is_benchmark || bench == b.judge_id;
        }
        if (!is_benchmark) out.push_back(b.judge_id);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-preference bias auditing for LLM judges"};
    app.require_subcommand(1);

    CommonArgs args;
    std::vector<std::string> judges;
    std::vector<double> epsilons = {0.0, 0.125, 0.25, 0.5, 0.75};
    std::vector<double> q_self_grid = {0.8};
    std::vector<double> q_target_grid = {0.6};
    std::optional<double> p_first;
    std::int64_t sim_pairs = 5000;
    std::uint64_t sim_seed = 0;
    bool no_cot = false;

    auto* score = app.add_subcommand("score", "score all responses with the two benchmark judges");
    add_common(score, args);

    auto* verify = app.add_subcommand("verify", "run the high-contrast discriminability gate");
    add_common(verify, args);
    verify->add_option("--judge", judges, "judge(s) to verify; default: every audited backend");

    auto* quantify = app.add_subcommand("quantify", "measure PIR, Null-PIR, and SPB");
    add_common(quantify, args);
    quantify->add_option("--judge", judges, "judge(s) to quantify; default: every audited backend");

    auto* mitigate = app.add_subcommand("mitigate",
                                        "re-run quantification under the structured prompt");
    add_common(mitigate, args);
    mitigate->add_option("--judge", judges, "judge(s) to mitigate");
    mitigate->add_flag("--no-cot", no_cot, "skip the chain-of-thought comparison arm");

    auto* sweep = app.add_subcommand("sweep-epsilon", "recompute SPB across epsilon thresholds");
    add_common(sweep, args);
    sweep->add_option("--judge", judges, "judge(s) to sweep");
    sweep->add_option("--epsilons", epsilons, "epsilon values (multiples of 0.125)");

    auto* simulate = app.add_subcommand("simulate",
                                        "validate the estimators against simulated judges");
    add_common(simulate, args, /*needs_config=*/false);
    simulate->add_option("--q-self", q_self_grid, "per-presentation self-preference grid");
    simulate->add_option("--q-target", q_target_grid, "per-presentation target-preference grid");
    simulate->add_option("--p-first", p_first, "pure position-bias override");
    simulate->add_option("--pairs", sim_pairs, "self pairings per simulated corpus");
    simulate->add_option("--sim-seed", sim_seed, "seed for the simulation study");

    auto* report = app.add_subcommand("report", "emit the CSV/JSON report bundle");
    add_common(report, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (score->parsed()) {
            auto pipeline = make_pipeline(args);
            const auto records = pipeline->cmd_score();
            std::printf("scored %zu records; %zu question(s) flagged\n", records.size(),
                        pipeline->manifest().flagged_questions.size());
        } else if (verify->parsed()) {
            auto pipeline = make_pipeline(args);
            for (const auto& judge : audited_judges(*pipeline, judges)) {
                const CapabilityReport r = pipeline->cmd_verify(judge);
                std::printf("%s: pi %.3f (%lld/%lld) gate %s\n", judge.c_str(), r.pi,
                            static_cast<long long>(r.n_correct),
                            static_cast<long long>(r.n_pairs),
                            r.gate_passed ? "passed" : "FAILED");
            }
        } else if (quantify->parsed()) {
            auto pipeline = make_pipeline(args);
            for (const auto& judge : audited_judges(*pipeline, judges)) {
                const BiasReport r = pipeline->cmd_quantify(judge, args.force);
                std::printf("%s: PIR %.3f Null-PIR %.3f SPB %.3f CI [%.3f, %.3f] sig(>=2/3) %s%s\n",
                            judge.c_str(), r.pir, r.null_pir, r.beta, r.ci_low, r.ci_high,
                            r.significance.sig_two_of_three ? "yes" : "no",
                            r.forced_despite_gate ? " [forced: failed gate]" : "");
            }
        } else if (mitigate->parsed()) {
            auto pipeline = make_pipeline(args);
            for (const auto& judge : audited_judges(*pipeline, judges)) {
                const MitigationReport r = pipeline->cmd_mitigate(judge, !no_cot, args.force);
                std::printf("%s: beta %.3f -> %.3f (eta %.1f%%), pi %.3f -> %.3f\n", judge.c_str(),
                            r.beta_baseline, r.beta_mitigated, r.eta * 100.0, r.pi_before,
                            r.pi_after);
            }
        } else if (sweep->parsed()) {
            auto pipeline = make_pipeline(args);
            for (const auto& judge : audited_judges(*pipeline, judges)) {
                const auto points = pipeline->cmd_sweep_epsilon(judge, epsilons);
                for (const auto& p : points) {
                    std::printf("%s eps %.3f (%s): beta %.3f, %lld new queries\n", judge.c_str(),
                                p.epsilon, p.strict_subset ? "strict-subset" : "enlarged", p.beta,
                                static_cast<long long>(p.new_queries));
                }
            }
        } else if (simulate->parsed()) {
            std::filesystem::create_directories(std::filesystem::path(args.run_dir) / "reports");
            std::vector<SimulationRow> rows;
            std::uint64_t cell_index = 0;
            for (double qs : q_self_grid) {
                for (double qt : q_target_grid) {
                    SimulationCell cell{qs, qt, p_first};
                    rows.push_back(simulate_cell(cell, sim_pairs,
                                                 derive_seed(sim_seed, "cell", cell_index++),
                                                 BiasComputationConfig{}));
                    const auto& r = rows.back();
                    std::printf("q_self %.2f q_target %.2f: beta_true %.3f beta_hat %.3f "
                                "CI [%.3f, %.3f] covered %s sig %s\n",
                                qs, qt, r.beta_true, r.beta_hat, r.ci_low, r.ci_high,
                                r.covered ? "yes" : "no", r.significant ? "yes" : "no");
                }
            }
            write_text(std::filesystem::path(args.run_dir) / "reports" / "simulation.csv",
                       simulation_csv(rows, "simulation"));
        } else if (report->parsed()) {
            auto pipeline = make_pipeline(args);
            pipeline->cmd_report();
            std::printf("reports written to %s\n",
                        (std::filesystem::path(args.run_dir) / "reports").c_str());
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
