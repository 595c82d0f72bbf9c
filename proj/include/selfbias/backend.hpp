#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "selfbias/errors.hpp"
#include "selfbias/prompts.hpp"
#include "selfbias/rng.hpp"
#include "selfbias/scores.hpp"

namespace selfbias {

enum class PairClass { SelfVsOther, ThirdParty, HighContrast };

inline const char* pair_class_name(PairClass c) {
    switch (c) {
        case PairClass::SelfVsOther: return "self_vs_other";
        case PairClass::ThirdParty: return "third_party";
        case PairClass::HighContrast: return "high_contrast";
    }
    return "?";
}

// Everything a backend may need to answer one presentation. Live backends use
// only the prompt; the simulator uses the authorship metadata.
struct QueryContext {
    std::string question_id;
    std::string first_author;
    std::string second_author;
    std::string target_author; // self / designated null target / benchmark-better response
    PairClass pair_class = PairClass::ThirdParty;
    PromptKind kind = PromptKind::BaselinePreference;
};

class JudgeBackend {
public:
    virtual ~JudgeBackend() = default;
    virtual const std::string& judge_id() const = 0;
    // Returns the raw model reply for one preference presentation.
    virtual std::string complete(const QueryContext& ctx, const std::string& prompt) = 0;
    // Returns the raw reply for one quality-scoring request.
    virtual std::string score(const std::string& question_id, const std::string& model_id,
                              const std::string& prompt) = 0;
    // A live judge answers a presentation the same way regardless of which
    // null-pair orientation asked, so the two orientations of an unordered
    // pair reuse the same two cached presentations. The simulator instead
    // draws independently per ordered pair, which is what gives the firm
    // rates their exact q^2 closed form; it opts out of the reuse.
    virtual bool draws_per_orientation() const { return false; }
};

// ---------------------------------------------------------------------------
// Simulated judge
//
// Generative model with closed-form firm rates: each presentation is an
// independent Bernoulli draw, so the firm (both-orders) rate of a preference
// with per-presentation probability q is exactly q^2. Draws are keyed by the
// presentation identity rather than by call order, which keeps resumed and
// reordered runs bit-identical.

struct SimJudgeParams {
    double q_self = 0.5;   // P(choose own response) per presentation
    double q_target = 0.5; // P(choose designated target in third-party pairs)
    double d = 0.9;        // P(choose higher-scored response in high-contrast pairs)
    std::optional<double> p_first; // pure position-bias override

    void validate() const {
        auto check = [](double v, const char* name) {
            if (v < 0.0 || v > 1.0) {
                throw InvalidParams(std::string("sim parameter ") + name + " must lie in [0, 1]");
            }
        };
        check(q_self, "q_self");
        check(q_target, "q_target");
        check(d, "d");
        if (p_first) check(*p_first, "p_first");
    }
};

// Pure decision rule given a uniform draw u in [0, 1).
inline Choice simulate_choice(const SimJudgeParams& params, const std::string& judge_id,
                              const QueryContext& ctx, double u) {
    if (params.p_first) {
        return u < *params.p_first ? Choice::A : Choice::B;
    }
    double prob = 0.5;
    bool preferred_is_first = true;
    switch (ctx.pair_class) {
        case PairClass::SelfVsOther:
            prob = params.q_self;
            preferred_is_first = ctx.first_author == judge_id;
            break;
        case PairClass::ThirdParty:
            prob = params.q_target;
            preferred_is_first = ctx.first_author == ctx.target_author;
            break;
        case PairClass::HighContrast:
            prob = params.d;
            preferred_is_first = ctx.first_author == ctx.target_author;
            break;
    }
    const bool picked_preferred = u < prob;
    return picked_preferred == preferred_is_first ? Choice::A : Choice::B;
}

class SimulatedJudge : public JudgeBackend {
public:
    SimulatedJudge(std::string judge_id, SimJudgeParams params, std::uint64_t seed)
        : judge_id_(std::move(judge_id)), seed_(seed) {
        params.validate();
        params_by_kind_[PromptKind::BaselinePreference] = params;
    }

    // Per-prompt-kind overrides model judges whose bias changes under a
    // mitigation prompt.
    void set_params(PromptKind kind, SimJudgeParams params) {
        params.validate();
        params_by_kind_[kind] = params;
    }

    // Scoring behavior: each dimension is an independent on-grid draw from
    // [score_low, score_high], keyed by (judge, model, question, dimension).
    void set_score_range(double low, double high) {
        score_low_ = GridScore::validate(low).quarters();
        score_high_ = GridScore::validate(high).quarters();
        if (score_high_ < score_low_) throw InvalidParams("sim score range inverted");
    }

    const std::string& judge_id() const override { return judge_id_; }

    const SimJudgeParams& params_for(PromptKind kind) const {
        auto it = params_by_kind_.find(kind);
        if (it != params_by_kind_.end()) return it->second;
        return params_by_kind_.at(PromptKind::BaselinePreference);
    }

    bool draws_per_orientation() const override { return true; }

    std::string complete(const QueryContext& ctx, const std::string&) override {
        const std::string label = "sim_choice/" + judge_id_ + '\x1f' + ctx.question_id + '\x1f' +
                                  ctx.first_author + '\x1f' + ctx.second_author + '\x1f' +
                                  ctx.target_author + '\x1f' + prompt_kind_name(ctx.kind);
        Rng rng(derive_seed(seed_, label));
        const Choice c = simulate_choice(params_for(ctx.kind), judge_id_, ctx, rng.uniform());
        const char letter = static_cast<char>(c);
        if (ctx.kind == PromptKind::StructuredVerbose) {
            std::string reply;
            for (int dim = 1; dim <= 5; ++dim) {
                reply += std::to_string(dim);
                reply += ". ";
                reply += letter;
                reply += '\n';
            }
            return reply;
        }
        return std::string(1, letter);
    }

    std::string score(const std::string& question_id, const std::string& model_id,
                      const std::string&) override {
        DimensionScores dims = simulated_dimensions(question_id, model_id);
        return format_eval_output(dims, dims.mean_points());
    }

    DimensionScores simulated_dimensions(const std::string& question_id,
                                         const std::string& model_id) const {
        std::array<GridScore, 5> scores;
        const int span = score_high_ - score_low_ + 1;
        for (std::size_t i = 0; i < kDimensionNames.size(); ++i) {
            const std::string label = "sim_score/" + judge_id_ + '\x1f' + model_id + '\x1f' +
                                      question_id + '\x1f' + std::string(kDimensionNames[i]);
            Rng rng(derive_seed(seed_, label));
            scores[i] = GridScore::from_quarters(score_low_ +
                                                 static_cast<int>(rng.below(static_cast<std::uint64_t>(span))));
        }
        return DimensionScores{scores[0], scores[1], scores[2], scores[3], scores[4]};
    }

private:
    std::string judge_id_;
    std::uint64_t seed_;
    std::map<PromptKind, SimJudgeParams> params_by_kind_;
    int score_low_ = 24;  // 6.0
    int score_high_ = 38; // 9.5
};

} // namespace selfbias
