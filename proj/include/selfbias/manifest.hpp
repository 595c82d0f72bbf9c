#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfbias/errors.hpp"
#include "selfbias/rng.hpp"

namespace selfbias {

// One manifest per run directory. The run id is a function of the config and
// dataset hashes, so a changed configuration can never silently extend an
// existing run; query counters are monotone.
struct RunManifest {
    std::string run_id;
    std::string config_hash;
    std::string dataset_hash;
    std::uint64_t seed = 0;
    double epsilon = 0.25;
    std::vector<std::string> backend_ids;
    std::map<std::string, bool> phases;
    std::map<std::string, std::int64_t> query_counters;
    // Capability results keyed "<judge>/<prompt kind>".
    std::map<std::string, nlohmann::json> capability;
    std::vector<std::string> flagged_questions;

    static std::string derive_run_id(const std::string& config_hash,
                                     const std::string& dataset_hash) {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(
                          splitmix64(fnv1a64(fnv1a64(0, config_hash), dataset_hash))));
        return buf;
    }

    bool phase_done(const std::string& name) const {
        auto it = phases.find(name);
        return it != phases.end() && it->second;
    }

    void mark_phase(const std::string& name) { phases[name] = true; }

    void add_queries(const std::string& backend_id, std::int64_t executed) {
        if (executed < 0) throw InvalidParams("query counters never decrease");
        query_counters[backend_id] += executed;
    }

    nlohmann::json to_json() const {
        nlohmann::json caps = nlohmann::json::object();
        for (const auto& [k, v] : capability) caps[k] = v;
        return nlohmann::json{
            {"run_id", run_id},
            {"config_hash", config_hash},
            {"dataset_hash", dataset_hash},
            {"seed", seed},
            {"epsilon", epsilon},
            {"backends", backend_ids},
            {"phases", phases},
            {"query_counters", query_counters},
            {"capability", caps},
            {"flagged_questions", flagged_questions},
        };
    }

    static RunManifest from_json(const nlohmann::json& j) {
        RunManifest m;
        m.run_id = j.at("run_id").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.dataset_hash = j.at("dataset_hash").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.epsilon = j.at("epsilon").get<double>();
        m.backend_ids = j.at("backends").get<std::vector<std::string>>();
        m.phases = j.at("phases").get<std::map<std::string, bool>>();
        m.query_counters = j.at("query_counters").get<std::map<std::string, std::int64_t>>();
        if (j.contains("capability")) {
            for (const auto& [k, v] : j.at("capability").items()) m.capability[k] = v;
        }
        m.flagged_questions = j.value("flagged_questions", std::vector<std::string>{});
        return m;
    }

    void save(const std::filesystem::path& run_dir) const {
        std::ofstream out(run_dir / "manifest.json");
        if (!out) throw Error("cannot write manifest in " + run_dir.string());
        out << to_json().dump(2) << '\n';
    }

    static RunManifest open_or_create(const std::filesystem::path& run_dir,
                                      const std::string& config_hash,
                                      const std::string& dataset_hash, std::uint64_t seed,
                                      double epsilon, std::vector<std::string> backend_ids) {
        std::filesystem::create_directories(run_dir);
        const auto path = run_dir / "manifest.json";
        if (std::filesystem::exists(path)) {
            std::ifstream in(path);
            nlohmann::json j;
            in >> j;
            RunManifest m = from_json(j);
            if (m.config_hash != config_hash) {
                throw ConfigError("run directory " + run_dir.string() +
                                  " was created with a different configuration; use a new run "
                                  "directory (reports never mix configurations)");
            }
            if (m.dataset_hash != dataset_hash) {
                throw ConfigError("dataset changed under run directory " + run_dir.string());
            }
            return m;
        }
        RunManifest m;
        m.run_id = derive_run_id(config_hash, dataset_hash);
        m.config_hash = config_hash;
        m.dataset_hash = dataset_hash;
        m.seed = seed;
        m.epsilon = epsilon;
        m.backend_ids = std::move(backend_ids);
        m.save(run_dir);
        return m;
    }
};

} // namespace selfbias
