#pragma once

#include <string>
#include <vector>

#include "selfbias/dataset.hpp"
#include "selfbias/pairing.hpp"

namespace selfbias {

// Synthetic corpora with controlled pair structure, used by the simulation
// mode and the estimator-validation studies.
//
// Per question, composites are laid out around the audited model at 8.0:
//   eq_models   at 8.0   (always inside the neighborhood, down to epsilon 0)
//   up_models   at 8.25  (join at epsilon 0.25; never pair with down_models
//                         until epsilon 0.5)
//   down_models at 7.75
//   hc_high     at 9.75 / hc_low at 5.0 (high-contrast material, outside all
//                         neighborhoods for epsilon <= 0.75)
//
// With e = eq, a = up, b = down, the per-question pairing counts at
// epsilon 0.25 are N_i = e + a + b and
// N_null = e(e-1) + 2e(a+b) + a(a-1) + b(b-1).
struct SimCorpusSpec {
    int questions = 100;
    int eq_models = 2;
    int up_models = 1;
    int down_models = 1;
    int hc_high = 2;
    int hc_low = 2;
    std::string audited = "audit";
};

struct SimCorpus {
    Dataset dataset;
    CompositeTable table;
    std::string audited;
};

inline SimCorpus make_sim_corpus(const SimCorpusSpec& spec) {
    SimCorpus corpus;
    corpus.audited = spec.audited;

    std::vector<std::pair<std::string, int>> models; // (id, composite eighths)
    models.emplace_back(spec.audited, 64);           // 8.0
    for (int i = 0; i < spec.eq_models; ++i) models.emplace_back("eq" + std::to_string(i), 64);
    for (int i = 0; i < spec.up_models; ++i) models.emplace_back("up" + std::to_string(i), 66);
    for (int i = 0; i < spec.down_models; ++i) models.emplace_back("dn" + std::to_string(i), 62);
    for (int i = 0; i < spec.hc_high; ++i) models.emplace_back("hi" + std::to_string(i), 78);
    for (int i = 0; i < spec.hc_low; ++i) models.emplace_back("lo" + std::to_string(i), 40);

    const std::vector<std::string> categories = {"Text Generation", "Information Provision",
                                                 "Explanation"};
    for (int q = 0; q < spec.questions; ++q) {
        char qid[16];
        std::snprintf(qid, sizeof(qid), "q%05d", q);
        corpus.dataset.add_question({qid,
                                     "Synthetic task " + std::to_string(q) +
                                         ": describe the assigned topic.",
                                     categories[static_cast<std::size_t>(q) % categories.size()]});
        for (const auto& [model, eighths] : models) {
            corpus.dataset.add_response(model, qid, "Answer from " + model + " to " + qid + ".");
            corpus.table.add(model, qid, CompositeValue::from_eighths(eighths));
        }
    }
    return corpus;
}

// Closed-form expected rates for the simulated judge: each presentation is an
// independent Bernoulli draw, so the firm rate of a preference with
// per-presentation probability q is q^2.
inline double expected_firm_rate(double q) { return q * q; }
inline double expected_beta(double q_self, double q_target) {
    return q_self * q_self - q_target * q_target;
}

} // namespace selfbias
