#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "selfbias/errors.hpp"
#include "selfbias/rng.hpp"
#include "selfbias/scores.hpp"

namespace selfbias {

// Pair construction works on composite scores held in integer eighth points,
// so the epsilon boundary (inclusive) is decided exactly.

struct EpsilonConfig {
    int epsilon_eighths = 2;           // 0.25 points
    int high_contrast_eighths = 20;    // 2.5 points
    int hc_sample_size = 100;
    std::uint64_t rng_seed = 0;

    static int to_eighths(double points, const char* what) {
        const double steps = points * 8.0;
        const long nearest = std::lround(steps);
        if (std::fabs(points - static_cast<double>(nearest) * 0.125) > 1e-9) {
            throw InvalidParams(std::string(what) + " must be a multiple of 0.125, got " +
                                std::to_string(points));
        }
        return static_cast<int>(nearest);
    }

    static EpsilonConfig make(double epsilon = 0.25, double high_contrast_delta = 2.5,
                              int hc_sample_size = 100, std::uint64_t rng_seed = 0) {
        EpsilonConfig cfg;
        cfg.epsilon_eighths = to_eighths(epsilon, "epsilon");
        cfg.high_contrast_eighths = to_eighths(high_contrast_delta, "high_contrast_delta");
        cfg.hc_sample_size = hc_sample_size;
        cfg.rng_seed = rng_seed;
        if (cfg.epsilon_eighths < 0) throw InvalidParams("epsilon must be >= 0");
        if (cfg.high_contrast_eighths <= cfg.epsilon_eighths) {
            throw InvalidParams("high_contrast_delta must exceed epsilon");
        }
        if (cfg.hc_sample_size < 1) throw InvalidParams("hc_sample_size must be >= 1");
        return cfg;
    }

    double epsilon_points() const { return epsilon_eighths * 0.125; }
    double high_contrast_points() const { return high_contrast_eighths * 0.125; }

    EpsilonConfig with_epsilon(double epsilon) const {
        EpsilonConfig cfg = *this;
        cfg.epsilon_eighths = to_eighths(epsilon, "epsilon");
        if (cfg.high_contrast_eighths <= cfg.epsilon_eighths) {
            throw InvalidParams("high_contrast_delta must exceed epsilon");
        }
        return cfg;
    }
};

// Dense (model, question) -> composite score table. Builders require every
// cell to be present; a hole raises MissingScore when touched.
class CompositeTable {
public:
    void add(const std::string& model_id, const std::string& question_id, CompositeValue value) {
        auto [it, inserted] = cells_.try_emplace({model_id, question_id}, value);
        if (!inserted) {
            throw InvalidParams("duplicate composite score for (" + model_id + ", " + question_id + ")");
        }
        models_.insert(model_id);
        questions_.insert(question_id);
    }

    bool has(const std::string& model_id, const std::string& question_id) const {
        return cells_.count({model_id, question_id}) > 0;
    }

    CompositeValue at(const std::string& model_id, const std::string& question_id) const {
        auto it = cells_.find({model_id, question_id});
        if (it == cells_.end()) {
            throw MissingScore("no composite score for (" + model_id + ", " + question_id + ")");
        }
        return it->second;
    }

    int eighths(const std::string& model_id, const std::string& question_id) const {
        return at(model_id, question_id).eighths();
    }

    std::vector<std::string> models() const { return {models_.begin(), models_.end()}; }
    std::vector<std::string> questions() const { return {questions_.begin(), questions_.end()}; }
    std::size_t size() const { return cells_.size(); }

    void require_dense() const {
        for (const auto& m : models_) {
            for (const auto& q : questions_) {
                if (!has(m, q)) throw MissingScore("no composite score for (" + m + ", " + q + ")");
            }
        }
    }

    double mean_points(const std::string& model_id) const {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& q : questions_) {
            sum += at(model_id, q).points();
            ++n;
        }
        if (n == 0) throw NoData("no questions scored for " + model_id);
        return sum / static_cast<double>(n);
    }

    // Builds the table from per-judge score records. Every (model, question)
    // must carry exactly one record from each of the two benchmark judges; the
    // per-judge overall is validated onto the quarter grid before averaging.
    static CompositeTable from_score_records(std::span<const ScoreRecord> records,
                                             GridPolicy policy = GridPolicy::Snap) {
        std::map<std::pair<std::string, std::string>, std::map<std::string, double>> by_cell;
        for (const ScoreRecord& r : records) {
            auto& per_judge = by_cell[{r.model_id, r.question_id}];
            if (!per_judge.emplace(r.judge_id, r.overall).second) {
                throw InvalidParams("duplicate score record for (" + r.model_id + ", " +
                                    r.question_id + ", " + r.judge_id + ")");
            }
        }
        CompositeTable table;
        for (const auto& [cell, per_judge] : by_cell) {
            if (per_judge.size() != 2) {
                throw MissingScore("(" + cell.first + ", " + cell.second + ") has " +
                                   std::to_string(per_judge.size()) + " judge scores, expected 2");
            }
            auto it = per_judge.begin();
            const GridScore s1 = GridScore::validate(it->second, policy);
            const GridScore s2 = GridScore::validate(std::next(it)->second, policy);
            table.add(cell.first, cell.second, CompositeValue::average(s1, s2));
        }
        return table;
    }

private:
    std::map<std::pair<std::string, std::string>, CompositeValue> cells_;
    std::set<std::string> models_;
    std::set<std::string> questions_;
};

// ---------------------------------------------------------------------------
// Pair structures

struct EqualQualityPair {
    std::string question_id;
    std::string model_a; // lexicographically smaller
    std::string model_b;
    int score_a_eighths = 0;
    int score_b_eighths = 0;
    int delta_eighths = 0;

    friend bool operator==(const EqualQualityPair&, const EqualQualityPair&) = default;
};

struct HighContrastPair {
    std::string question_id;
    std::string better_model;
    std::string worse_model;
    int gap_eighths = 0;

    friend bool operator==(const HighContrastPair&, const HighContrastPair&) = default;
    friend bool operator<(const HighContrastPair& a, const HighContrastPair& b) {
        return std::tie(a.question_id, a.better_model, a.worse_model) <
               std::tie(b.question_id, b.better_model, b.worse_model);
    }
};

struct NullPair {
    std::string question_id;
    std::string audited_model;
    std::string target_model;     // first element of the ordered pair
    std::string competitor_model;

    friend bool operator==(const NullPair&, const NullPair&) = default;
};

struct Neighborhood {
    std::string question_id;
    std::string audited_model;
    std::vector<std::string> members; // sorted third-party model ids
};

// ---------------------------------------------------------------------------
// Builders. All outputs are sorted (question, then model ids) so identical
// inputs produce byte-identical manifests.

inline std::vector<Neighborhood> build_neighborhoods(const CompositeTable& table,
                                                     const EpsilonConfig& cfg,
                                                     const std::string& audited) {
    table.require_dense();
    const auto models = table.models();
    std::vector<Neighborhood> out;
    for (const auto& q : table.questions()) {
        Neighborhood hood{q, audited, {}};
        const int s_audited = table.eighths(audited, q);
        for (const auto& m : models) {
            if (m == audited) continue;
            if (std::abs(table.eighths(m, q) - s_audited) <= cfg.epsilon_eighths) {
                hood.members.push_back(m);
            }
        }
        out.push_back(std::move(hood));
    }
    return out;
}

inline std::int64_t total_pairings(const std::vector<Neighborhood>& hoods) {
    std::int64_t n = 0;
    for (const auto& h : hoods) n += static_cast<std::int64_t>(h.members.size());
    return n;
}

inline std::vector<EqualQualityPair> build_equal_quality_pairs(const CompositeTable& table,
                                                               const EpsilonConfig& cfg) {
    table.require_dense();
    const auto models = table.models();
    std::vector<EqualQualityPair> out;
    for (const auto& q : table.questions()) {
        for (std::size_t a = 0; a < models.size(); ++a) {
            const int sa = table.eighths(models[a], q);
            for (std::size_t b = a + 1; b < models.size(); ++b) {
                const int sb = table.eighths(models[b], q);
                const int delta = std::abs(sa - sb);
                if (delta <= cfg.epsilon_eighths) {
                    out.push_back({q, models[a], models[b], sa, sb, delta});
                }
            }
        }
    }
    return out;
}

inline std::vector<HighContrastPair> build_high_contrast_set(const CompositeTable& table,
                                                             const EpsilonConfig& cfg) {
    table.require_dense();
    const auto models = table.models();
    std::vector<HighContrastPair> out;
    for (const auto& q : table.questions()) {
        for (const auto& better : models) {
            const int sb = table.eighths(better, q);
            for (const auto& worse : models) {
                if (better == worse) continue;
                const int gap = sb - table.eighths(worse, q);
                if (gap >= cfg.high_contrast_eighths) {
                    out.push_back({q, better, worse, gap});
                }
            }
        }
    }
    return out;
}

// Seeded sample without replacement. Pairs involving a response authored by
// the judge under test are excluded so the capability gate stays independent
// of self-preference.
inline std::vector<HighContrastPair> sample_high_contrast(std::span<const HighContrastPair> set,
                                                          const EpsilonConfig& cfg,
                                                          const std::string& judge_id) {
    std::vector<HighContrastPair> eligible;
    for (const auto& p : set) {
        if (p.better_model != judge_id && p.worse_model != judge_id) eligible.push_back(p);
    }
    if (eligible.size() < static_cast<std::size_t>(cfg.hc_sample_size)) {
        throw InsufficientHighContrastPairs(
            "judge " + judge_id + ": " + std::to_string(eligible.size()) +
            " eligible high-contrast pairs, need " + std::to_string(cfg.hc_sample_size));
    }
    Rng rng(derive_seed(cfg.rng_seed, "hc_sample/" + judge_id));
    const auto picks = rng.sample_indices(eligible.size(), static_cast<std::size_t>(cfg.hc_sample_size));
    std::vector<HighContrastPair> out;
    out.reserve(picks.size());
    for (std::size_t i : picks) out.push_back(eligible[i]);
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<NullPair> build_null_pairs(const CompositeTable& table, const EpsilonConfig& cfg,
                                              const std::string& audited) {
    table.require_dense();
    const auto models = table.models();
    std::vector<NullPair> out;
    for (const auto& q : table.questions()) {
        const int si = table.eighths(audited, q);
        std::vector<const std::string*> hood;
        for (const auto& m : models) {
            if (m != audited && std::abs(table.eighths(m, q) - si) <= cfg.epsilon_eighths) {
                hood.push_back(&m);
            }
        }
        for (const std::string* j : hood) {
            const int sj = table.eighths(*j, q);
            for (const std::string* k : hood) {
                if (j == k) continue;
                if (std::abs(sj - table.eighths(*k, q)) <= cfg.epsilon_eighths) {
                    out.push_back({q, audited, *j, *k});
                }
            }
        }
    }
    return out;
}

} // namespace selfbias
