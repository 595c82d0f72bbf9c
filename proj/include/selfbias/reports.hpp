#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfbias/errors.hpp"
#include "selfbias/metrics.hpp"

namespace selfbias {

// Report values are rounded to three decimals, matching the published tables;
// internal arithmetic stays at full precision.
inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    // Avoid the "-0.000" artifact.
    if (std::string(buf) == "-0.000") return "0.000";
    return buf;
}

inline std::string fmt_pct1(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", ratio * 100.0);
    if (std::string(buf) == "-0.0") return "0.0";
    return buf;
}

inline std::string fmt_sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

inline const char* yes_no(bool b) { return b ? "Yes" : "No"; }

// ---------------------------------------------------------------------------
// JSON serialization of the report structures

inline nlohmann::json verdict_json(const TestVerdict& v) {
    return {{"statistic", v.statistic}, {"p_value", v.p_value},   {"alpha", v.alpha},
            {"significant", v.significant}, {"sidedness", sidedness_name(v.sidedness)}};
}

inline TestVerdict verdict_from_json(const nlohmann::json& j) {
    TestVerdict v;
    v.statistic = j.at("statistic").get<double>();
    v.p_value = j.at("p_value").get<double>();
    v.alpha = j.at("alpha").get<double>();
    v.significant = j.at("significant").get<bool>();
    const std::string s = j.at("sidedness").get<std::string>();
    v.sidedness = s == "two" ? Sidedness::Two
                             : (s == "one-greater" ? Sidedness::OneGreater : Sidedness::OneLess);
    return v;
}

inline nlohmann::json capability_json(const CapabilityReport& r) {
    return {{"judge_id", r.judge_id},   {"n_pairs", r.n_pairs},
            {"n_correct", r.n_correct}, {"discarded", r.discarded},
            {"pi", r.pi},               {"gate_passed", r.gate_passed},
            {"pi_threshold", r.pi_threshold}};
}

inline CapabilityReport capability_from_json(const nlohmann::json& j) {
    CapabilityReport r;
    r.judge_id = j.at("judge_id").get<std::string>();
    r.n_pairs = j.at("n_pairs").get<std::int64_t>();
    r.n_correct = j.at("n_correct").get<std::int64_t>();
    r.discarded = j.at("discarded").get<std::int64_t>();
    r.pi = j.at("pi").get<double>();
    r.gate_passed = j.at("gate_passed").get<bool>();
    r.pi_threshold = j.at("pi_threshold").get<double>();
    return r;
}

inline nlohmann::json bias_report_json(const BiasReport& r) {
    nlohmann::json j{
        {"judge_id", r.judge_id},
        {"prompt_kind", r.prompt_kind},
        {"n_pairs", r.n_pairs},
        {"n_null_pairs", r.n_null_pairs},
        {"firm_self", r.firm_self},
        {"firm_null_target", r.firm_null_target},
        {"discarded_self", r.discarded_self},
        {"discarded_null", r.discarded_null},
        {"pir", r.pir},
        {"null_pir", r.null_pir},
        {"beta", r.beta},
        {"ci_low", r.ci_low},
        {"ci_high", r.ci_high},
        {"binomial", verdict_json(r.significance.binomial)},
        {"z_test", verdict_json(r.significance.z_test)},
        {"bootstrap_significant", r.significance.bootstrap_significant},
        {"sig_two_of_three", r.significance.sig_two_of_three},
        {"forced_despite_gate", r.forced_despite_gate},
    };
    if (r.pi) j["pi"] = *r.pi;
    if (r.archetype) j["archetype"] = archetype_name(*r.archetype);
    return j;
}

inline BiasReport bias_report_from_json(const nlohmann::json& j) {
    BiasReport r;
    r.judge_id = j.at("judge_id").get<std::string>();
    r.prompt_kind = j.at("prompt_kind").get<std::string>();
    r.n_pairs = j.at("n_pairs").get<std::int64_t>();
    r.n_null_pairs = j.at("n_null_pairs").get<std::int64_t>();
    r.firm_self = j.at("firm_self").get<std::int64_t>();
    r.firm_null_target = j.at("firm_null_target").get<std::int64_t>();
    r.discarded_self = j.at("discarded_self").get<std::int64_t>();
    r.discarded_null = j.at("discarded_null").get<std::int64_t>();
    r.pir = j.at("pir").get<double>();
    r.null_pir = j.at("null_pir").get<double>();
    r.beta = j.at("beta").get<double>();
    r.ci_low = j.at("ci_low").get<double>();
    r.ci_high = j.at("ci_high").get<double>();
    r.significance.binomial = verdict_from_json(j.at("binomial"));
    r.significance.z_test = verdict_from_json(j.at("z_test"));
    r.significance.bootstrap_significant = j.at("bootstrap_significant").get<bool>();
    r.significance.sig_two_of_three = j.at("sig_two_of_three").get<bool>();
    r.forced_despite_gate = j.value("forced_despite_gate", false);
    if (j.contains("pi")) r.pi = j.at("pi").get<double>();
    if (j.contains("archetype")) {
        const std::string name = j.at("archetype").get<std::string>();
        if (name == archetype_name(Archetype::ObjectiveJudge)) r.archetype = Archetype::ObjectiveJudge;
        if (name == archetype_name(Archetype::MachiavellianJudge)) r.archetype = Archetype::MachiavellianJudge;
        if (name == archetype_name(Archetype::IncompetentRandomizer)) r.archetype = Archetype::IncompetentRandomizer;
        if (name == archetype_name(Archetype::BlindlyBiasedJudge)) r.archetype = Archetype::BlindlyBiasedJudge;
    }
    return r;
}

inline nlohmann::json mitigation_json(const MitigationReport& r) {
    nlohmann::json j{
        {"judge_id", r.judge_id},
        {"beta_baseline", r.beta_baseline},
        {"beta_mitigated", r.beta_mitigated},
        {"eta", r.eta},
        {"pi_before", r.pi_before},
        {"pi_after", r.pi_after},
    };
    if (r.beta_cot) j["beta_cot"] = *r.beta_cot;
    if (r.eta_cot) j["eta_cot"] = *r.eta_cot;
    return j;
}

inline MitigationReport mitigation_from_json(const nlohmann::json& j) {
    MitigationReport r;
    r.judge_id = j.at("judge_id").get<std::string>();
    r.beta_baseline = j.at("beta_baseline").get<double>();
    r.beta_mitigated = j.at("beta_mitigated").get<double>();
    r.eta = j.at("eta").get<double>();
    r.pi_before = j.at("pi_before").get<double>();
    r.pi_after = j.at("pi_after").get<double>();
    if (j.contains("beta_cot")) r.beta_cot = j.at("beta_cot").get<double>();
    if (j.contains("eta_cot")) r.eta_cot = j.at("eta_cot").get<double>();
    return r;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingPhase("missing report file " + path.string());
    nlohmann::json j;
    in >> j;
    return j;
}

// ---------------------------------------------------------------------------
// CSV tables

// Bias table mirroring the published layout, sorted in descending order of
// SPB (ties broken by judge id for stable output).
inline std::string bias_table_csv(std::vector<BiasReport> reports, const std::string& run_id) {
    std::sort(reports.begin(), reports.end(), [](const BiasReport& a, const BiasReport& b) {
        if (a.beta != b.beta) return a.beta > b.beta;
        return a.judge_id < b.judge_id;
    });
    std::string out = "# run " + run_id + "\n";
    out += "model,pir,null_pir,spb,n_pairs,n_null_pairs,binomial,z_test,bootstrap,sig_2of3,"
           "ci_low,ci_high\n";
    for (const auto& r : reports) {
        out += r.judge_id + ',' + fmt3(r.pir) + ',' + fmt3(r.null_pir) + ',' + fmt3(r.beta) + ',' +
               std::to_string(r.n_pairs) + ',' + std::to_string(r.n_null_pairs) + ',' +
               yes_no(r.significance.binomial.significant) + ',' +
               yes_no(r.significance.z_test.significant) + ',' +
               yes_no(r.significance.bootstrap_significant) + ',' +
               yes_no(r.significance.sig_two_of_three) + ',' + fmt3(r.ci_low) + ',' +
               fmt3(r.ci_high) + '\n';
    }
    return out;
}

struct ArchetypeRow {
    std::string judge_id;
    double pi = 0.0;
    double beta = 0.0;
    double p_value = 1.0; // discriminability above chance
    Archetype archetype = Archetype::IncompetentRandomizer;
};

// Archetype table split at the discriminability threshold, high band first,
// each band sorted by descending pi.
inline std::string archetype_table_csv(std::vector<ArchetypeRow> rows, double pi_thresh,
                                       const std::string& run_id) {
    std::sort(rows.begin(), rows.end(), [&](const ArchetypeRow& a, const ArchetypeRow& b) {
        const bool ha = a.pi >= pi_thresh, hb = b.pi >= pi_thresh;
        if (ha != hb) return ha;
        if (a.pi != b.pi) return a.pi > b.pi;
        return a.judge_id < b.judge_id;
    });
    std::string out = "# run " + run_id + "\n";
    out += "model,pi,beta,p_value,archetype,band\n";
    for (const auto& r : rows) {
        out += r.judge_id + ',' + fmt3(r.pi) + ',' + fmt3(r.beta) + ',' + fmt_sci(r.p_value) + ',' +
               archetype_name(r.archetype) + ',' + (r.pi >= pi_thresh ? "high" : "low") + '\n';
    }
    return out;
}

inline std::string mitigation_table_csv(const std::vector<MitigationReport>& reports,
                                        const std::string& run_id) {
    std::string out = "# run " + run_id + "\n";
    out += "model,setting,spb,reduction,eta_pct\n";
    for (const auto& r : reports) {
        out += r.judge_id + ",baseline," + fmt3(r.beta_baseline) + ",,\n";
        if (r.beta_cot) {
            out += r.judge_id + ",cot," + fmt3(*r.beta_cot) + ',' +
                   fmt3(r.beta_baseline - *r.beta_cot) + ',' + fmt_pct1(*r.eta_cot) + '\n';
        }
        out += r.judge_id + ",structured," + fmt3(r.beta_mitigated) + ',' +
               fmt3(r.beta_baseline - r.beta_mitigated) + ',' + fmt_pct1(r.eta) + '\n';
    }
    return out;
}

struct ScatterRow {
    std::string judge_id;
    double x = 0.0;
    double beta = 0.0;
};

inline std::string scatter_csv(std::vector<ScatterRow> rows, const std::string& x_name,
                               const std::string& run_id) {
    std::sort(rows.begin(), rows.end(),
              [](const ScatterRow& a, const ScatterRow& b) { return a.judge_id < b.judge_id; });
    std::string out = "# run " + run_id + "\n";
    out += "model," + x_name + ",spb\n";
    for (const auto& r : rows) {
        out += r.judge_id + ',' + fmt3(r.x) + ',' + fmt3(r.beta) + '\n';
    }
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

} // namespace selfbias
