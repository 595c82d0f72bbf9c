#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfbias/backend.hpp"
#include "selfbias/errors.hpp"
#include "selfbias/metrics.hpp"
#include "selfbias/pairing.hpp"
#include "selfbias/prompts.hpp"
#include "selfbias/stats.hpp"

namespace selfbias {

struct RetryPolicy {
    int max_attempts = 3;
    int initial_backoff_ms = 250;
};

struct BackendEntry {
    std::string judge_id;
    bool simulated = true;

    // live settings; the API key is read from the named environment variable,
    // never from the config file.
    std::string base_url;
    std::string chat_path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env;
    int timeout_s = 120;

    // simulator settings
    SimJudgeParams sim;
    std::map<PromptKind, SimJudgeParams> sim_overrides;
    double score_low = 6.0;
    double score_high = 9.5;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path questions_path;
    std::filesystem::path responses_path;
    std::vector<std::string> benchmark_judges; // exactly two ids for scoring
    std::vector<BackendEntry> backends;

    PromptKind prompt_kind = PromptKind::BaselinePreference;
    double epsilon = 0.25;
    double high_contrast_delta = 2.5;
    int hc_sample_size = 100;
    Thresholds thresholds;
    BootstrapConfig bootstrap;
    double alpha = 0.05;
    BinomialNull binomial_null = BinomialNull::NullPir;
    GridPolicy grid_policy = GridPolicy::Snap;
    int parallelism = 1;
    RetryPolicy retry;
    std::int64_t min_task_pairs = 50;
    bool reask_on_ambiguous = false;

    EpsilonConfig epsilon_config() const {
        return EpsilonConfig::make(epsilon, high_contrast_delta, hc_sample_size,
                                   derive_seed(seed, "pairing"));
    }

    const BackendEntry& backend(const std::string& judge_id) const {
        for (const auto& b : backends) {
            if (b.judge_id == judge_id) return b;
        }
        throw ConfigError("no backend configured for judge '" + judge_id + "'");
    }

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);

    // Canonical hash used by the run manifest to pin a run to one configuration.
    std::string config_hash() const {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(0, to_json().dump())));
        return buf;
    }
};

namespace detail {

inline nlohmann::json sim_params_json(const SimJudgeParams& p) {
    nlohmann::json j{{"q_self", p.q_self}, {"q_target", p.q_target}, {"d", p.d}};
    if (p.p_first) j["p_first"] = *p.p_first;
    return j;
}

inline SimJudgeParams sim_params_from(const nlohmann::json& j) {
    SimJudgeParams p;
    p.q_self = j.value("q_self", 0.5);
    p.q_target = j.value("q_target", 0.5);
    p.d = j.value("d", 0.9);
    if (j.contains("p_first")) p.p_first = j.at("p_first").get<double>();
    p.validate();
    return p;
}

} // namespace detail

inline nlohmann::json RunConfig::to_json() const {
    nlohmann::json backends_json = nlohmann::json::array();
    for (const auto& b : backends) {
        nlohmann::json e{{"judge_id", b.judge_id}, {"kind", b.simulated ? "simulated" : "live"}};
        if (b.simulated) {
            e["sim"] = detail::sim_params_json(b.sim);
            for (const auto& [kind, params] : b.sim_overrides) {
                e["sim_overrides"][prompt_kind_name(kind)] = detail::sim_params_json(params);
            }
            e["score_range"] = {b.score_low, b.score_high};
        } else {
            e["base_url"] = b.base_url;
            e["chat_path"] = b.chat_path;
            e["model"] = b.model;
            e["api_key_env"] = b.api_key_env;
            e["timeout_s"] = b.timeout_s;
        }
        backends_json.push_back(std::move(e));
    }
    return nlohmann::json{
        {"seed", seed},
        {"dataset", {{"questions", questions_path.string()}, {"responses", responses_path.string()}}},
        {"benchmark_judges", benchmark_judges},
        {"backends", backends_json},
        {"prompt_kind", prompt_kind_name(prompt_kind)},
        {"epsilon", epsilon},
        {"high_contrast_delta", high_contrast_delta},
        {"hc_sample_size", hc_sample_size},
        {"thresholds", {{"pi", thresholds.pi_thresh}, {"beta", thresholds.beta_thresh}}},
        {"bootstrap",
         {{"iterations", bootstrap.iterations},
          {"alpha", bootstrap.alpha},
          {"mode",
           bootstrap.mode == BootstrapConfig::Mode::HierarchicalByPrompt ? "hierarchical" : "flat"}}},
        {"alpha", alpha},
        {"binomial_null", binomial_null == BinomialNull::NullPir ? "null_pir" : "coin_flip"},
        {"grid_policy", grid_policy == GridPolicy::Snap ? "snap" : "reject"},
        {"parallelism", parallelism},
        {"retry", {{"max_attempts", retry.max_attempts}, {"initial_backoff_ms", retry.initial_backoff_ms}}},
        {"min_task_pairs", min_task_pairs},
        {"reask_on_ambiguous", reask_on_ambiguous},
    };
}

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig cfg;
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("dataset")) {
        cfg.questions_path = j.at("dataset").value("questions", "");
        cfg.responses_path = j.at("dataset").value("responses", "");
    }
    cfg.benchmark_judges = j.value("benchmark_judges", std::vector<std::string>{});
    if (j.contains("backends")) {
        for (const auto& e : j.at("backends")) {
            BackendEntry b;
            b.judge_id = e.at("judge_id").get<std::string>();
            const std::string kind = e.value("kind", "simulated");
            if (kind == "simulated") {
                b.simulated = true;
                if (e.contains("sim")) b.sim = detail::sim_params_from(e.at("sim"));
                if (e.contains("sim_overrides")) {
                    for (const auto& [name, params] : e.at("sim_overrides").items()) {
                        b.sim_overrides[prompt_kind_from(name)] = detail::sim_params_from(params);
                    }
                }
                if (e.contains("score_range")) {
                    b.score_low = e.at("score_range").at(0).get<double>();
                    b.score_high = e.at("score_range").at(1).get<double>();
                }
            } else if (kind == "live") {
                b.simulated = false;
                b.base_url = e.at("base_url").get<std::string>();
                b.chat_path = e.value("chat_path", "/v1/chat/completions");
                b.model = e.at("model").get<std::string>();
                b.api_key_env = e.value("api_key_env", "");
                b.timeout_s = e.value("timeout_s", 120);
                if (e.contains("api_key") || e.contains("token")) {
                    throw ConfigError("credentials belong in environment variables, not the config file");
                }
            } else {
                throw ConfigError("backend kind must be 'simulated' or 'live', got '" + kind + "'");
            }
            cfg.backends.push_back(std::move(b));
        }
    }
    cfg.prompt_kind = prompt_kind_from(j.value("prompt_kind", "baseline_preference"));
    cfg.epsilon = j.value("epsilon", 0.25);
    cfg.high_contrast_delta = j.value("high_contrast_delta", 2.5);
    cfg.hc_sample_size = j.value("hc_sample_size", 100);
    if (j.contains("thresholds")) {
        cfg.thresholds.pi_thresh = j.at("thresholds").value("pi", 0.8);
        cfg.thresholds.beta_thresh = j.at("thresholds").value("beta", 0.08);
    }
    if (j.contains("bootstrap")) {
        cfg.bootstrap.iterations = j.at("bootstrap").value("iterations", 1000);
        cfg.bootstrap.alpha = j.at("bootstrap").value("alpha", 0.05);
        const std::string mode = j.at("bootstrap").value("mode", "hierarchical");
        if (mode == "hierarchical") {
            cfg.bootstrap.mode = BootstrapConfig::Mode::HierarchicalByPrompt;
        } else if (mode == "flat") {
            cfg.bootstrap.mode = BootstrapConfig::Mode::Flat;
        } else {
            throw ConfigError("bootstrap mode must be 'hierarchical' or 'flat'");
        }
    }
    cfg.alpha = j.value("alpha", 0.05);
    const std::string null_mode = j.value("binomial_null", "null_pir");
    if (null_mode == "null_pir") {
        cfg.binomial_null = BinomialNull::NullPir;
    } else if (null_mode == "coin_flip") {
        cfg.binomial_null = BinomialNull::CoinFlip;
    } else {
        throw ConfigError("binomial_null must be 'null_pir' or 'coin_flip'");
    }
    const std::string grid = j.value("grid_policy", "snap");
    if (grid == "snap") {
        cfg.grid_policy = GridPolicy::Snap;
    } else if (grid == "reject") {
        cfg.grid_policy = GridPolicy::Reject;
    } else {
        throw ConfigError("grid_policy must be 'snap' or 'reject'");
    }
    cfg.parallelism = j.value("parallelism", 1);
    if (cfg.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (j.contains("retry")) {
        cfg.retry.max_attempts = j.at("retry").value("max_attempts", 3);
        cfg.retry.initial_backoff_ms = j.at("retry").value("initial_backoff_ms", 250);
    }
    cfg.min_task_pairs = j.value("min_task_pairs", std::int64_t{50});
    cfg.reask_on_ambiguous = j.value("reask_on_ambiguous", false);
    return cfg;
}

inline RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

} // namespace selfbias
