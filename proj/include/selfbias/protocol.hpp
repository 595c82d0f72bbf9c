#pragma once

#include <atomic>
#include <optional>
#include <string>
#include <utility>

#include "selfbias/backend.hpp"
#include "selfbias/errors.hpp"
#include "selfbias/prompts.hpp"
#include "selfbias/record_log.hpp"

namespace selfbias {

enum class FirmKind { FirmTarget, FirmOther, Inconsistent };

inline const char* firm_kind_name(FirmKind k) {
    switch (k) {
        case FirmKind::FirmTarget: return "firm_target";
        case FirmKind::FirmOther: return "firm_other";
        case FirmKind::Inconsistent: return "inconsistent";
    }
    return "?";
}

struct FirmOutcome {
    std::string target_author;
    std::string other_author;
    FirmKind outcome = FirmKind::Inconsistent;
};

struct ResponseRef {
    std::string author;
    std::string text;
};

// Runs presentations through the query cache: rendering, backend call, choice
// parsing, and persistence. Every preference metric downstream is derived
// from the records this session writes.
class JudgeSession {
public:
    struct Options {
        bool lenient_cot_parse = true;   // CoT replies end with the verdict letter
        bool reask_on_ambiguous = false; // one re-ask when a reply fails to parse
    };

    JudgeSession(JudgeBackend& backend, QueryCache& cache)
        : backend_(backend), cache_(cache) {}

    JudgeSession(JudgeBackend& backend, QueryCache& cache, Options options)
        : backend_(backend), cache_(cache), options_(options) {}

    // One presentation, at most once per corpus.
    QueryRecord run_presentation(const QueryContext& ctx, const std::string& instruction,
                                 const std::string& first_text, const std::string& second_text) {
        std::string kind_key = prompt_kind_name(ctx.kind);
        if (ctx.pair_class == PairClass::ThirdParty && backend_.draws_per_orientation()) {
            kind_key += "#target=" + ctx.target_author;
        }
        QueryKey key{backend_.judge_id(), ctx.question_id, ctx.first_author, ctx.second_author,
                     std::move(kind_key)};
        return cache_.get_or_run(key, [&]() {
            const std::string prompt = render_prompt(ctx.kind, instruction, first_text, second_text);
            QueryRecord record;
            record.timestamp_ms = detail::now_ms();
            record.raw_reply = backend_.complete(ctx, prompt);
            record.attempts = 1;
            try {
                record.choice = parse_reply(ctx.kind, record.raw_reply);
                record.status = QueryStatus::Ok;
            } catch (const AmbiguousOutput&) {
                if (options_.reask_on_ambiguous) {
                    record.raw_reply = backend_.complete(ctx, prompt);
                    record.attempts = 2;
                    try {
                        record.choice = parse_reply(ctx.kind, record.raw_reply);
                        record.status = QueryStatus::Ok;
                    } catch (const AmbiguousOutput&) {
                        record.status = QueryStatus::Ambiguous;
                    }
                } else {
                    record.status = QueryStatus::Ambiguous;
                }
            }
            return record;
        });
    }

    // Order-swapped double query: (target, other) then (other, target). The
    // outcome is firm only when the same response wins both presentations.
    // Returns nullopt when either presentation was discarded as ambiguous.
    std::optional<FirmOutcome> double_query(const std::string& question_id,
                                            const std::string& instruction,
                                            const ResponseRef& target, const ResponseRef& other,
                                            PairClass pair_class, PromptKind kind) {
        QueryContext forward{question_id, target.author, other.author, target.author, pair_class, kind};
        QueryContext swapped{question_id, other.author, target.author, target.author, pair_class, kind};

        const QueryRecord first = run_presentation(forward, instruction, target.text, other.text);
        const QueryRecord second = run_presentation(swapped, instruction, other.text, target.text);

        if (first.status != QueryStatus::Ok || second.status != QueryStatus::Ok) {
            ++discarded_;
            return std::nullopt;
        }

        const bool target_won_first = first.choice == Choice::A;
        const bool target_won_second = second.choice == Choice::B;

        FirmOutcome outcome{target.author, other.author, FirmKind::Inconsistent};
        if (target_won_first && target_won_second) {
            outcome.outcome = FirmKind::FirmTarget;
        } else if (!target_won_first && !target_won_second) {
            outcome.outcome = FirmKind::FirmOther;
        }
        return outcome;
    }

    // Single randomized-order presentation for a high-contrast pair; returns
    // nullopt for a discarded trial, otherwise whether the benchmark-better
    // response was selected.
    std::optional<bool> high_contrast_presentation(const std::string& question_id,
                                                   const std::string& instruction,
                                                   const ResponseRef& better,
                                                   const ResponseRef& worse, PromptKind kind,
                                                   bool better_first) {
        const ResponseRef& first = better_first ? better : worse;
        const ResponseRef& second = better_first ? worse : better;
        QueryContext ctx{question_id, first.author, second.author, better.author,
                         PairClass::HighContrast, kind};
        const QueryRecord record = run_presentation(ctx, instruction, first.text, second.text);
        if (record.status != QueryStatus::Ok) {
            ++discarded_;
            return std::nullopt;
        }
        const bool picked_first = record.choice == Choice::A;
        return picked_first == better_first;
    }

    std::int64_t discarded() const { return discarded_.load(); }
    JudgeBackend& backend() { return backend_; }

private:
    Choice parse_reply(PromptKind kind, const std::string& raw) const {
        if (kind == PromptKind::StructuredVerbose) return parse_structured_verbose(raw);
        const bool lenient = kind == PromptKind::CotBaseline && options_.lenient_cot_parse;
        return parse_choice(raw, lenient);
    }

    JudgeBackend& backend_;
    QueryCache& cache_;
    Options options_{};
    std::atomic<std::int64_t> discarded_{0};
};

} // namespace selfbias
