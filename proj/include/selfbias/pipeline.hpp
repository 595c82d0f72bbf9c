#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "selfbias/backend.hpp"
#include "selfbias/config.hpp"
#include "selfbias/dataset.hpp"
#include "selfbias/manifest.hpp"
#include "selfbias/metrics.hpp"
#include "selfbias/pairing.hpp"
#include "selfbias/protocol.hpp"
#include "selfbias/record_log.hpp"
#include "selfbias/reports.hpp"
#include "selfbias/simulation.hpp"

namespace selfbias {

// Bounded fan-out over independent work items; aggregation stays ordered by
// index, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n = std::min<int>(threads, static_cast<int>(count));
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Shared quantification and verification drivers

struct QuantifyOutcome {
    BiasReport report;
    std::vector<OutcomeRow> self_rows;
    std::vector<OutcomeRow> null_rows;
    std::vector<NullPair> null_pairs;
    std::vector<Neighborhood> neighborhoods;
    std::int64_t new_queries = 0;
};

inline QuantifyOutcome run_quantification(JudgeSession& session, QueryCache& cache,
                                          const Dataset& dataset, const CompositeTable& table,
                                          const std::string& judge, const EpsilonConfig& eps,
                                          PromptKind kind, const BiasComputationConfig& bias_cfg,
                                          int parallelism) {
    QuantifyOutcome out;
    out.neighborhoods = build_neighborhoods(table, eps, judge);
    out.null_pairs = build_null_pairs(table, eps, judge);
    const std::int64_t executed_before = cache.executed();

    struct SelfTask {
        const std::string* question;
        const std::string* other;
    };
    std::vector<SelfTask> self_tasks;
    for (const auto& hood : out.neighborhoods) {
        for (const auto& member : hood.members) {
            self_tasks.push_back({&hood.question_id, &member});
        }
    }

    std::vector<std::optional<FirmOutcome>> self_results(self_tasks.size());
    parallel_for(self_tasks.size(), parallelism, [&](std::size_t i) {
        const auto& task = self_tasks[i];
        const Question& q = dataset.question(*task.question);
        self_results[i] = session.double_query(
            q.id, q.instruction, {judge, dataset.response(judge, q.id)},
            {*task.other, dataset.response(*task.other, q.id)}, PairClass::SelfVsOther, kind);
    });

    std::vector<std::optional<FirmOutcome>> null_results(out.null_pairs.size());
    parallel_for(out.null_pairs.size(), parallelism, [&](std::size_t i) {
        const NullPair& p = out.null_pairs[i];
        const Question& q = dataset.question(p.question_id);
        null_results[i] = session.double_query(
            q.id, q.instruction, {p.target_model, dataset.response(p.target_model, q.id)},
            {p.competitor_model, dataset.response(p.competitor_model, q.id)},
            PairClass::ThirdParty, kind);
    });

    std::int64_t discarded_self = 0, discarded_null = 0;
    for (std::size_t i = 0; i < self_tasks.size(); ++i) {
        if (self_results[i]) {
            out.self_rows.push_back({*self_tasks[i].question, self_results[i]->outcome});
        } else {
            ++discarded_self;
        }
    }
    for (std::size_t i = 0; i < out.null_pairs.size(); ++i) {
        if (null_results[i]) {
            out.null_rows.push_back({out.null_pairs[i].question_id, null_results[i]->outcome});
        } else {
            ++discarded_null;
        }
    }

    out.report = compute_bias_report(judge, out.self_rows, out.null_rows, bias_cfg,
                                     discarded_self, discarded_null);
    out.report.prompt_kind = prompt_kind_name(kind);
    out.new_queries = cache.executed() - executed_before;
    return out;
}

struct VerifyOutcome {
    CapabilityReport report;
    std::vector<HighContrastPair> sample;
    std::int64_t new_queries = 0;
};

// High-contrast verification: one presentation per sampled pair in an order
// randomized from the run seed. The presentation order is independent of the
// prompt kind, so before/after mitigation comparisons are strictly paired.
inline VerifyOutcome run_capability_check(JudgeSession& session, QueryCache& cache,
                                          const Dataset& dataset, const CompositeTable& table,
                                          const std::string& judge, const EpsilonConfig& eps,
                                          PromptKind kind, double pi_threshold,
                                          std::uint64_t order_seed, int parallelism) {
    VerifyOutcome out;
    const auto hc_set = build_high_contrast_set(table, eps);
    out.sample = sample_high_contrast(hc_set, eps, judge);
    const std::int64_t executed_before = cache.executed();

    std::vector<std::optional<bool>> results(out.sample.size());
    parallel_for(out.sample.size(), parallelism, [&](std::size_t i) {
        const HighContrastPair& p = out.sample[i];
        const Question& q = dataset.question(p.question_id);
        Rng order_rng(derive_seed(order_seed, "hc_order/" + judge + '\x1f' + p.question_id +
                                                  '\x1f' + p.better_model + '\x1f' + p.worse_model));
        const bool better_first = order_rng.uniform() < 0.5;
        results[i] = session.high_contrast_presentation(
            q.id, q.instruction, {p.better_model, dataset.response(p.better_model, q.id)},
            {p.worse_model, dataset.response(p.worse_model, q.id)}, kind, better_first);
    });

    std::vector<HighContrastJudgment> judgments;
    std::int64_t discarded = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i]) {
            judgments.push_back({out.sample[i].question_id, *results[i]});
        } else {
            ++discarded;
        }
    }
    out.report = discriminability(judge, judgments, discarded, pi_threshold);
    out.new_queries = cache.executed() - executed_before;
    return out;
}

// ---------------------------------------------------------------------------
// Simulation mode

struct SimulationCell {
    double q_self = 0.5;
    double q_target = 0.5;
    std::optional<double> p_first;
};

struct SimulationRow {
    SimulationCell cell;
    double beta_true = 0.0;
    double beta_hat = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool covered = false;
    bool significant = false;
    std::int64_t n_pairs = 0;
    std::int64_t n_null_pairs = 0;
};

// Runs the pairing -> double-query -> metrics pipeline against a simulated
// judge on a synthetic corpus sized for roughly pairs_per_leg self pairings.
inline SimulationRow simulate_cell(const SimulationCell& cell, std::int64_t pairs_per_leg,
                                   std::uint64_t seed, const BiasComputationConfig& bias_cfg_in,
                                   int parallelism = 1) {
    SimCorpusSpec spec;
    spec.eq_models = 2;
    spec.up_models = 1;
    spec.down_models = 1;
    spec.hc_high = 0;
    spec.hc_low = 0;
    const int per_question = spec.eq_models + spec.up_models + spec.down_models;
    spec.questions = static_cast<int>((pairs_per_leg + per_question - 1) / per_question);
    const SimCorpus corpus = make_sim_corpus(spec);

    SimJudgeParams params;
    params.q_self = cell.q_self;
    params.q_target = cell.q_target;
    params.p_first = cell.p_first;
    SimulatedJudge judge(corpus.audited, params, derive_seed(seed, "sim_backend"));

    RecordLog log; // memory-only
    QueryCache cache(log);
    JudgeSession session(judge, cache);

    BiasComputationConfig bias_cfg = bias_cfg_in;
    bias_cfg.bootstrap.rng_seed = derive_seed(seed, "sim_bootstrap");

    const QuantifyOutcome q =
        run_quantification(session, cache, corpus.dataset, corpus.table, corpus.audited,
                           EpsilonConfig::make(0.25, 2.5, 1, seed), PromptKind::BaselinePreference,
                           bias_cfg, parallelism);

    SimulationRow row;
    row.cell = cell;
    row.beta_true = cell.p_first ? 0.0 : expected_beta(cell.q_self, cell.q_target);
    row.beta_hat = q.report.beta;
    row.ci_low = q.report.ci_low;
    row.ci_high = q.report.ci_high;
    row.covered = q.report.ci_low <= row.beta_true && row.beta_true <= q.report.ci_high;
    row.significant = q.report.significance.sig_two_of_three;
    row.n_pairs = q.report.n_pairs;
    row.n_null_pairs = q.report.n_null_pairs;
    return row;
}

inline std::string simulation_csv(const std::vector<SimulationRow>& rows,
                                  const std::string& run_id) {
    std::string out = "# run " + run_id + "\n";
    out += "q_self,q_target,p_first,beta_true,beta_hat,ci_low,ci_high,covered,significant,"
           "n_pairs,n_null_pairs\n";
    for (const auto& r : rows) {
        char head[96];
        std::snprintf(head, sizeof(head), "%.3f,%.3f,%s", r.cell.q_self, r.cell.q_target,
                      r.cell.p_first ? fmt3(*r.cell.p_first).c_str() : "");
        out += std::string(head) + ',' + fmt3(r.beta_true) + ',' + fmt3(r.beta_hat) + ',' +
               fmt3(r.ci_low) + ',' + fmt3(r.ci_high) + ',' + (r.covered ? "yes" : "no") + ',' +
               (r.significant ? "yes" : "no") + ',' + std::to_string(r.n_pairs) + ',' +
               std::to_string(r.n_null_pairs) + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Epsilon sweep

struct SweepPoint {
    double epsilon = 0.25;
    bool strict_subset = true;
    double beta = 0.0;
    std::int64_t new_queries = 0;
    std::int64_t n_pairs = 0;
    std::int64_t n_null_pairs = 0;
};

inline std::string sweep_csv(const std::vector<SweepPoint>& points, const std::string& judge,
                             const std::string& run_id) {
    std::string out = "# run " + run_id + " judge " + judge + "\n";
    out += "epsilon,regime,beta,new_queries,n_pairs,n_null_pairs\n";
    for (const auto& p : points) {
        out += fmt3(p.epsilon) + ',' + (p.strict_subset ? "strict-subset" : "enlarged") + ',' +
               fmt3(p.beta) + ',' + std::to_string(p.new_queries) + ',' +
               std::to_string(p.n_pairs) + ',' + std::to_string(p.n_null_pairs) + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline: phases over one run directory

class Pipeline {
public:
    using LiveBackendFactory =
        std::function<std::unique_ptr<JudgeBackend>(const BackendEntry&, const RetryPolicy&)>;

    Pipeline(RunConfig cfg, std::filesystem::path run_dir)
        : cfg_(std::move(cfg)), run_dir_(std::move(run_dir)) {
        dataset_ = Dataset::load(cfg_.questions_path, cfg_.responses_path);
        manifest_ = RunManifest::open_or_create(run_dir_, cfg_.config_hash(),
                                                dataset_.content_hash(), cfg_.seed, cfg_.epsilon,
                                                backend_ids());
        std::filesystem::create_directories(run_dir_ / "pairs");
        std::filesystem::create_directories(run_dir_ / "reports");
        log_ = std::make_unique<RecordLog>(run_dir_ / "records.log");
        cache_ = std::make_unique<QueryCache>(*log_);
    }

    // Construction for pre-built datasets (simulation studies, tests).
    Pipeline(RunConfig cfg, std::filesystem::path run_dir, Dataset dataset)
        : cfg_(std::move(cfg)), run_dir_(std::move(run_dir)), dataset_(std::move(dataset)) {
        manifest_ = RunManifest::open_or_create(run_dir_, cfg_.config_hash(),
                                                dataset_.content_hash(), cfg_.seed, cfg_.epsilon,
                                                backend_ids());
        std::filesystem::create_directories(run_dir_ / "pairs");
        std::filesystem::create_directories(run_dir_ / "reports");
        log_ = std::make_unique<RecordLog>(run_dir_ / "records.log");
        cache_ = std::make_unique<QueryCache>(*log_);
    }

    void set_live_backend_factory(LiveBackendFactory factory) { live_factory_ = std::move(factory); }

    // Replaces the configured backend for a judge; used by embedding code and
    // tests that need scripted behavior.
    void install_backend(const std::string& judge_id, std::unique_ptr<JudgeBackend> backend) {
        backends_[judge_id] = std::move(backend);
    }

    const RunManifest& manifest() const { return manifest_; }
    const Dataset& dataset() const { return dataset_; }
    const RunConfig& config() const { return cfg_; }
    QueryCache& cache() { return *cache_; }
    std::filesystem::path reports_dir() const { return run_dir_ / "reports"; }

    // ---- score ------------------------------------------------------------

    std::vector<ScoreRecord> cmd_score() {
        if (cfg_.benchmark_judges.size() != 2) {
            throw ConfigError("scoring needs exactly two benchmark judges, got " +
                              std::to_string(cfg_.benchmark_judges.size()));
        }
        const std::int64_t executed_before = cache_->executed();

        struct ScoreTask {
            const std::string* judge;
            const std::string* model;
            const Question* question;
        };
        const auto models = dataset_.models();
        std::vector<ScoreTask> tasks;
        for (const auto& judge : cfg_.benchmark_judges) {
            backend(judge); // constructed before the fan-out below
            for (const auto& model : models) {
                for (const auto& q : dataset_.questions()) {
                    tasks.push_back({&judge, &model, &q});
                }
            }
        }

        std::vector<QueryRecord> raw(tasks.size());
        parallel_for(tasks.size(), cfg_.parallelism, [&](std::size_t i) {
            const ScoreTask& t = tasks[i];
            QueryKey key{*t.judge, t.question->id, *t.model, "", "quality_score"};
            raw[i] = cache_->get_or_run(key, [&]() {
                const std::string prompt = render_quality_prompt(
                    t.question->instruction, dataset_.response(*t.model, t.question->id));
                QueryRecord record;
                record.timestamp_ms = detail::now_ms();
                record.raw_reply = backend(*t.judge).score(t.question->id, *t.model, prompt);
                record.status = QueryStatus::Ok;
                record.choice = Choice::A; // unused for scoring records
                return record;
            });
        });

        std::vector<ScoreRecord> records;
        std::set<std::string> flagged;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            try {
                const ParsedEvaluation parsed = parse_eval_output(raw[i].raw_reply, cfg_.grid_policy);
                records.push_back(ScoreRecord::make(*tasks[i].model, tasks[i].question->id,
                                                    *tasks[i].judge, parsed.dims,
                                                    parsed.recomputed_mean));
            } catch (const Error&) {
                flagged.insert(tasks[i].question->id);
            }
        }
        if (!flagged.empty()) {
            std::erase_if(records,
                          [&](const ScoreRecord& r) { return flagged.count(r.question_id) > 0; });
            manifest_.flagged_questions.assign(flagged.begin(), flagged.end());
        }
        save_score_records(records, scores_path());
        write_agreement_report(records);

        manifest_.add_queries("benchmark", cache_->executed() - executed_before);
        manifest_.mark_phase("score");
        manifest_.save(run_dir_);
        scores_.reset();
        return records;
    }

    // ---- verify -----------------------------------------------------------

    CapabilityReport cmd_verify(const std::string& judge) {
        return verify_with_kind(judge, cfg_.prompt_kind);
    }

    CapabilityReport verify_with_kind(const std::string& judge, PromptKind kind) {
        const CompositeTable& table = composites();
        JudgeSession session{backend(judge), *cache_, session_options()};
        const VerifyOutcome out = run_capability_check(
            session, *cache_, dataset_, table, judge, cfg_.epsilon_config(), kind,
            cfg_.thresholds.pi_thresh, derive_seed(cfg_.seed, "hc_order"), cfg_.parallelism);

        write_pair_manifest("high_contrast_" + judge + ".jsonl", out.sample, table);
        manifest_.capability[judge + "/" + prompt_kind_name(kind)] = capability_json(out.report);
        manifest_.add_queries(judge, out.new_queries);
        manifest_.mark_phase("verify/" + judge + "/" + prompt_kind_name(kind));
        manifest_.save(run_dir_);
        write_json(reports_dir() / ("capability_" + judge + "_" + prompt_kind_name(kind) + ".json"),
                   capability_json(out.report));
        return out.report;
    }

    // ---- quantify ---------------------------------------------------------

    BiasReport cmd_quantify(const std::string& judge, bool force = false) {
        return quantify_with_kind(judge, cfg_.prompt_kind, force);
    }

    BiasReport quantify_with_kind(const std::string& judge, PromptKind kind, bool force) {
        const CompositeTable& table = composites();
        const auto cap = capability_for(judge, PromptKind::BaselinePreference);
        if (!cap) {
            throw MissingPhase("run verify for " + judge + " before quantify");
        }
        const bool gate_passed = cap->gate_passed;
        if (!gate_passed && !force) {
            throw ConfigError("judge " + judge + " failed the discriminability gate (pi " +
                              fmt3(cap->pi) + " < " + fmt3(cap->pi_threshold) +
                              "); pass --force to quantify anyway");
        }

        JudgeSession session{backend(judge), *cache_, session_options()};
        BiasComputationConfig bias_cfg = bias_computation_config(judge, kind);
        QuantifyOutcome out = run_quantification(session, *cache_, dataset_, table, judge,
                                                 cfg_.epsilon_config(), kind, bias_cfg,
                                                 cfg_.parallelism);
        out.report.forced_despite_gate = !gate_passed;
        const auto kind_cap = capability_for(judge, kind);
        const CapabilityReport& pi_source = kind_cap ? *kind_cap : *cap;
        out.report.pi = pi_source.pi;
        out.report.archetype = classify(pi_source.pi, out.report.beta, cfg_.thresholds);

        write_equal_quality_manifest(table);
        write_null_manifest(judge, out.null_pairs, table);
        write_json(bias_report_path(judge, kind), bias_report_json(out.report));
        manifest_.add_queries(judge, out.new_queries);
        manifest_.mark_phase("quantify/" + judge + "/" + prompt_kind_name(kind));
        manifest_.save(run_dir_);
        return out.report;
    }

    // ---- mitigate ---------------------------------------------------------

    MitigationReport cmd_mitigate(const std::string& judge, bool include_cot = true,
                                  bool force = false) {
        const auto baseline_path = bias_report_path(judge, PromptKind::BaselinePreference);
        if (!std::filesystem::exists(baseline_path)) {
            throw MissingBaseline("no baseline bias report for " + judge +
                                  "; run quantify first");
        }
        const BiasReport baseline = bias_report_from_json(read_json(baseline_path));
        if (std::fabs(baseline.beta) <= cfg_.thresholds.beta_thresh && !force) {
            throw ConfigError("judge " + judge + " is not selected for mitigation (|beta| = " +
                              fmt3(std::fabs(baseline.beta)) + " <= " +
                              fmt3(cfg_.thresholds.beta_thresh) + "); pass --force to override");
        }

        MitigationReport report;
        report.judge_id = judge;
        report.beta_baseline = baseline.beta;
        report.pi_before = baseline.pi.value_or(0.0);

        const BiasReport structured =
            quantify_with_kind(judge, PromptKind::StructuredMultidim, /*force=*/true);
        report.beta_mitigated = structured.beta;
        report.eta = improvement_rate(baseline.beta, structured.beta);

        if (include_cot) {
            const BiasReport cot = quantify_with_kind(judge, PromptKind::CotBaseline, true);
            report.beta_cot = cot.beta;
            report.eta_cot = improvement_rate(baseline.beta, cot.beta);
        }

        const CapabilityReport after = verify_with_kind(judge, PromptKind::StructuredMultidim);
        report.pi_after = after.pi;

        write_json(reports_dir() / ("mitigation_" + judge + ".json"), mitigation_json(report));
        manifest_.mark_phase("mitigate/" + judge);
        manifest_.save(run_dir_);
        return report;
    }

    // ---- epsilon sweep ----------------------------------------------------

    std::vector<SweepPoint> cmd_sweep_epsilon(const std::string& judge,
                                              const std::vector<double>& epsilons) {
        if (!std::filesystem::exists(bias_report_path(judge, cfg_.prompt_kind))) {
            throw MissingBaseline("no baseline bias report for " + judge +
                                  " at epsilon " + fmt3(cfg_.epsilon) + "; run quantify first");
        }
        const CompositeTable& table = composites();
        const int baseline_eighths = EpsilonConfig::to_eighths(cfg_.epsilon, "epsilon");

        std::vector<SweepPoint> points;
        for (double eps : epsilons) {
            const EpsilonConfig eps_cfg = cfg_.epsilon_config().with_epsilon(eps);
            JudgeSession session{backend(judge), *cache_, session_options()};
            const QuantifyOutcome out =
                run_quantification(session, *cache_, dataset_, table, judge, eps_cfg,
                                   cfg_.prompt_kind, bias_computation_config(judge, cfg_.prompt_kind),
                                   cfg_.parallelism);
            SweepPoint point;
            point.epsilon = eps;
            point.strict_subset = eps_cfg.epsilon_eighths <= baseline_eighths;
            point.beta = out.report.beta;
            point.new_queries = out.new_queries;
            point.n_pairs = out.report.n_pairs;
            point.n_null_pairs = out.report.n_null_pairs;
            if (point.strict_subset && point.new_queries != 0) {
                throw Error("strict-subset sweep point executed new queries; cache invariant broken");
            }
            manifest_.add_queries(judge, out.new_queries);
            points.push_back(point);
        }
        write_text(reports_dir() / ("sweep_" + judge + ".csv"),
                   sweep_csv(points, judge, manifest_.run_id));
        manifest_.mark_phase("sweep/" + judge);
        manifest_.save(run_dir_);
        return points;
    }

    // ---- report -----------------------------------------------------------

    void cmd_report() {
        const CompositeTable& table = composites();

        std::vector<BiasReport> bias_reports;
        std::vector<ArchetypeRow> archetype_rows;
        std::vector<ScatterRow> quality_rows, pi_rows;
        std::vector<MitigationReport> mitigations;

        for (const auto& judge : backend_ids()) {
            const auto path = bias_report_path(judge, cfg_.prompt_kind);
            if (!std::filesystem::exists(path)) continue;
            const BiasReport r = bias_report_from_json(read_json(path));
            bias_reports.push_back(r);

            if (const auto cap = capability_for(judge, PromptKind::BaselinePreference)) {
                ArchetypeRow row;
                row.judge_id = judge;
                row.pi = cap->pi;
                row.beta = r.beta;
                row.p_value =
                    binomial_test(cap->n_correct, cap->n_pairs, 0.5, Sidedness::OneGreater).p_value;
                row.archetype = classify(cap->pi, r.beta, cfg_.thresholds);
                archetype_rows.push_back(row);
                pi_rows.push_back({judge, cap->pi, r.beta});
            }
            quality_rows.push_back({judge, table.mean_points(judge), r.beta});

            const auto mpath = reports_dir() / ("mitigation_" + judge + ".json");
            if (std::filesystem::exists(mpath)) {
                mitigations.push_back(mitigation_from_json(read_json(mpath)));
            }
        }
        if (bias_reports.empty()) {
            throw MissingPhase("nothing to report: no quantified judges in this run");
        }

        write_text(reports_dir() / "bias_table.csv",
                   bias_table_csv(bias_reports, manifest_.run_id));
        write_text(reports_dir() / "archetype_table.csv",
                   archetype_table_csv(archetype_rows, cfg_.thresholds.pi_thresh, manifest_.run_id));
        write_text(reports_dir() / "mitigation_table.csv",
                   mitigation_table_csv(mitigations, manifest_.run_id));
        write_text(reports_dir() / "scatter_quality_beta.csv",
                   scatter_csv(quality_rows, "avg_quality", manifest_.run_id));
        write_text(reports_dir() / "scatter_pi_beta.csv",
                   scatter_csv(pi_rows, "pi", manifest_.run_id));

        nlohmann::json bundle{{"run_id", manifest_.run_id},
                              {"config_hash", manifest_.config_hash},
                              {"dataset_hash", manifest_.dataset_hash}};
        for (const auto& r : bias_reports) bundle["bias"].push_back(bias_report_json(r));
        for (const auto& m : mitigations) bundle["mitigation"].push_back(mitigation_json(m));
        write_json(reports_dir() / "summary.json", bundle);

        manifest_.mark_phase("report");
        manifest_.save(run_dir_);
    }

    // ---- helpers ----------------------------------------------------------

    JudgeBackend& backend(const std::string& judge_id) {
        auto it = backends_.find(judge_id);
        if (it != backends_.end()) return *it->second;
        const BackendEntry& entry = cfg_.backend(judge_id);
        std::unique_ptr<JudgeBackend> built;
        if (entry.simulated) {
            auto sim = std::make_unique<SimulatedJudge>(entry.judge_id, entry.sim,
                                                        derive_seed(cfg_.seed, "backend/" + judge_id));
            for (const auto& [kind, params] : entry.sim_overrides) sim->set_params(kind, params);
            sim->set_score_range(entry.score_low, entry.score_high);
            built = std::move(sim);
        } else {
            if (!live_factory_) {
                throw ConfigError("backend " + judge_id +
                                  " is live but no live-backend factory is installed");
            }
            built = live_factory_(entry, cfg_.retry);
        }
        auto [pos, ok] = backends_.emplace(judge_id, std::move(built));
        return *pos->second;
    }

    const CompositeTable& composites() {
        if (!scores_) {
            if (!std::filesystem::exists(scores_path())) {
                throw MissingPhase("no score records; run the score phase first");
            }
            const auto records = load_score_records(scores_path(), cfg_.grid_policy);
            scores_ = CompositeTable::from_score_records(records, cfg_.grid_policy);
        }
        return *scores_;
    }

    std::filesystem::path scores_path() const { return run_dir_ / "scores.jsonl"; }

    std::filesystem::path bias_report_path(const std::string& judge, PromptKind kind) const {
        return reports_dir() / ("bias_" + judge + "_" + std::string(prompt_kind_name(kind)) +
                                ".json");
    }

    std::optional<CapabilityReport> capability_for(const std::string& judge, PromptKind kind) const {
        const auto it = manifest_.capability.find(judge + "/" + prompt_kind_name(kind));
        if (it == manifest_.capability.end()) return std::nullopt;
        return capability_from_json(it->second);
    }

private:
    JudgeSession::Options session_options() const {
        JudgeSession::Options opts;
        opts.reask_on_ambiguous = cfg_.reask_on_ambiguous;
        return opts;
    }

    BiasComputationConfig bias_computation_config(const std::string& judge, PromptKind kind) const {
        BiasComputationConfig bias_cfg;
        bias_cfg.alpha = cfg_.alpha;
        bias_cfg.binomial_null = cfg_.binomial_null;
        bias_cfg.bootstrap = cfg_.bootstrap;
        bias_cfg.bootstrap.rng_seed =
            derive_seed(cfg_.seed, "bootstrap/" + judge + "/" + prompt_kind_name(kind));
        return bias_cfg;
    }

    std::vector<std::string> backend_ids() const {
        std::vector<std::string> ids;
        for (const auto& b : cfg_.backends) ids.push_back(b.judge_id);
        return ids;
    }

    void write_agreement_report(const std::vector<ScoreRecord>& records) {
        std::map<std::pair<std::string, std::string>, std::map<std::string, double>> cells;
        for (const auto& r : records) {
            cells[{r.model_id, r.question_id}][r.judge_id] = r.overall;
        }
        std::vector<std::pair<double, double>> pairs;
        std::vector<double> xs, ys;
        for (const auto& [cell, per_judge] : cells) {
            const auto a = per_judge.find(cfg_.benchmark_judges[0]);
            const auto b = per_judge.find(cfg_.benchmark_judges[1]);
            if (a == per_judge.end() || b == per_judge.end()) continue;
            pairs.emplace_back(a->second, b->second);
            xs.push_back(a->second);
            ys.push_back(b->second);
        }
        if (pairs.empty()) return;
        const AgreementHistogram h = agreement_histogram(pairs);

        std::string csv = "# run " + manifest_.run_id + "\n";
        csv += "range,count,cumulative,cumulative_pct\n";
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            char pct[16];
            std::snprintf(pct, sizeof(pct), "%.1f",
                          100.0 * static_cast<double>(h.cumulative[b]) /
                              static_cast<double>(h.total));
            csv += std::string(AgreementHistogram::kLabels[b]) + ',' +
                   std::to_string(h.counts[b]) + ',' + std::to_string(h.cumulative[b]) + ',' +
                   pct + '\n';
        }
        write_text(reports_dir() / "agreement.csv", csv);

        nlohmann::json summary{
            {"total", h.total},
            {"mean_abs_diff", h.mean_abs},
            {"median_abs_diff", h.median_abs},
            {"stddev_abs_diff", h.stddev_abs},
        };
        try {
            summary["spearman"] = spearman(xs, ys);
        } catch (const DegenerateInput&) {
            summary["spearman"] = nullptr;
        }
        write_json(reports_dir() / "agreement_summary.json", summary);
    }

    void write_equal_quality_manifest(const CompositeTable& table) {
        const auto pairs = build_equal_quality_pairs(table, cfg_.epsilon_config());
        std::ofstream out(run_dir_ / "pairs" / "equal_quality.jsonl");
        for (const auto& p : pairs) {
            out << nlohmann::json{{"kind", "equal_quality"},
                                  {"question_id", p.question_id},
                                  {"model_a", p.model_a},
                                  {"model_b", p.model_b},
                                  {"score_a", p.score_a_eighths * 0.125},
                                  {"score_b", p.score_b_eighths * 0.125}}
                       .dump()
                << '\n';
        }
    }

    void write_null_manifest(const std::string& judge, const std::vector<NullPair>& pairs,
                             const CompositeTable& table) {
        std::ofstream out(run_dir_ / "pairs" / ("null_" + judge + ".jsonl"));
        for (const auto& p : pairs) {
            out << nlohmann::json{{"kind", "null"},
                                  {"question_id", p.question_id},
                                  {"model_a", p.target_model},
                                  {"model_b", p.competitor_model},
                                  {"score_a", table.at(p.target_model, p.question_id).points()},
                                  {"score_b", table.at(p.competitor_model, p.question_id).points()}}
                       .dump()
                << '\n';
        }
    }

    void write_pair_manifest(const std::string& name, const std::vector<HighContrastPair>& pairs,
                             const CompositeTable& table) {
        std::ofstream out(run_dir_ / "pairs" / name);
        for (const auto& p : pairs) {
            out << nlohmann::json{{"kind", "high_contrast"},
                                  {"question_id", p.question_id},
                                  {"model_a", p.better_model},
                                  {"model_b", p.worse_model},
                                  {"score_a", table.at(p.better_model, p.question_id).points()},
                                  {"score_b", table.at(p.worse_model, p.question_id).points()}}
                       .dump()
                << '\n';
        }
    }

    RunConfig cfg_;
    std::filesystem::path run_dir_;
    Dataset dataset_;
    RunManifest manifest_;
    std::unique_ptr<RecordLog> log_;
    std::unique_ptr<QueryCache> cache_;
    std::map<std::string, std::unique_ptr<JudgeBackend>> backends_;
    std::optional<CompositeTable> scores_;
    LiveBackendFactory live_factory_;
};

} // namespace selfbias
