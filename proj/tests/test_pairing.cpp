#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "selfbias/pairing.hpp"
#include "selfbias/rng.hpp"

using namespace selfbias;

namespace {

CompositeTable table_from(const std::vector<std::tuple<std::string, std::string, double>>& cells) {
    CompositeTable t;
    for (const auto& [model, question, points] : cells) {
        t.add(model, question, CompositeValue::from_eighths(static_cast<int>(points * 8.0 + 0.5)));
    }
    return t;
}

CompositeTable random_table(Rng& rng, int n_models, int n_questions) {
    CompositeTable t;
    for (int m = 0; m < n_models; ++m) {
        for (int q = 0; q < n_questions; ++q) {
            t.add("m" + std::to_string(m), "q" + std::to_string(q),
                  CompositeValue::from_eighths(static_cast<int>(rng.below(81))));
        }
    }
    return t;
}

// Independent O(n^2)/O(n^3) enumerations used as pairing oracles.

std::set<std::tuple<std::string, std::string, std::string>> oracle_equal_pairs(
    const CompositeTable& t, int eps_eighths) {
    std::set<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& q : t.questions()) {
        const auto models = t.models();
        for (const auto& a : models) {
            for (const auto& b : models) {
                if (a >= b) continue;
                if (std::abs(t.eighths(a, q) - t.eighths(b, q)) <= eps_eighths) {
                    out.insert({q, a, b});
                }
            }
        }
    }
    return out;
}

std::set<std::tuple<std::string, std::string, std::string>> oracle_high_contrast(
    const CompositeTable& t, int delta_eighths) {
    std::set<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& q : t.questions()) {
        for (const auto& hi : t.models()) {
            for (const auto& lo : t.models()) {
                if (hi == lo) continue;
                if (t.eighths(hi, q) - t.eighths(lo, q) >= delta_eighths) out.insert({q, hi, lo});
            }
        }
    }
    return out;
}

std::set<std::tuple<std::string, std::string, std::string>> oracle_null_pairs(
    const CompositeTable& t, int eps_eighths, const std::string& audited) {
    std::set<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& q : t.questions()) {
        for (const auto& j : t.models()) {
            for (const auto& k : t.models()) {
                if (j == audited || k == audited || j == k) continue;
                const bool ok = std::abs(t.eighths(audited, q) - t.eighths(j, q)) <= eps_eighths &&
                                std::abs(t.eighths(audited, q) - t.eighths(k, q)) <= eps_eighths &&
                                std::abs(t.eighths(j, q) - t.eighths(k, q)) <= eps_eighths;
                if (ok) out.insert({q, j, k});
            }
        }
    }
    return out;
}

} // namespace

TEST_CASE("epsilon config validation") {
    const EpsilonConfig cfg = EpsilonConfig::make();
    CHECK(cfg.epsilon_eighths == 2);
    CHECK(cfg.high_contrast_eighths == 20);
    CHECK(cfg.hc_sample_size == 100);

    CHECK_THROWS_AS(EpsilonConfig::make(-0.125), InvalidParams);
    CHECK_THROWS_AS(EpsilonConfig::make(0.2), InvalidParams);        // not an eighth step
    CHECK_THROWS_AS(EpsilonConfig::make(0.25, 0.25), InvalidParams); // delta must exceed epsilon
    CHECK_THROWS_AS(EpsilonConfig::make(0.25, 2.5, 0), InvalidParams);
}

TEST_CASE("neighborhoods") {
    // Scores {i: 8.0, j: 8.25, k: 8.0, l: 7.0} with epsilon 0.25.
    const CompositeTable t = table_from({
        {"i", "q1", 8.0}, {"j", "q1", 8.25}, {"k", "q1", 8.0}, {"l", "q1", 7.0},
    });
    const EpsilonConfig cfg = EpsilonConfig::make(0.25, 2.5, 1, 0);

    const auto hoods = build_neighborhoods(t, cfg, "i");
    REQUIRE(hoods.size() == 1);
    CHECK(hoods[0].members == std::vector<std::string>{"j", "k"});
    CHECK(total_pairings(hoods) == 2);

    SECTION("boundary delta exactly epsilon is included") {
        const CompositeTable edge = table_from({{"i", "q1", 8.0}, {"j", "q1", 8.25}});
        const auto h = build_neighborhoods(edge, cfg, "i");
        CHECK(h[0].members == std::vector<std::string>{"j"});
    }

    SECTION("audited model alone gives an empty neighborhood") {
        const CompositeTable solo = table_from({{"i", "q1", 8.0}});
        const auto h = build_neighborhoods(solo, cfg, "i");
        REQUIRE(h.size() == 1);
        CHECK(h[0].members.empty());
        CHECK(total_pairings(h) == 0);
    }

    SECTION("matches a brute-force pairwise scan on random tables") {
        Rng rng(41);
        for (int trial = 0; trial < 20; ++trial) {
            const CompositeTable rt = random_table(rng, 6, 5);
            const auto h = build_neighborhoods(rt, cfg, "m0");
            std::int64_t expected = 0;
            for (const auto& q : rt.questions()) {
                for (const auto& m : rt.models()) {
                    if (m != "m0" && std::abs(rt.eighths(m, q) - rt.eighths("m0", q)) <= 2) {
                        ++expected;
                    }
                }
            }
            CHECK(total_pairings(h) == expected);
        }
    }

    SECTION("missing cells raise MissingScore") {
        CompositeTable sparse;
        sparse.add("i", "q1", CompositeValue::from_eighths(64));
        sparse.add("j", "q1", CompositeValue::from_eighths(64));
        sparse.add("i", "q2", CompositeValue::from_eighths(64));
        CHECK_THROWS_AS(build_neighborhoods(sparse, cfg, "i"), MissingScore);
    }
}

TEST_CASE("equal-quality pairs") {
    const EpsilonConfig cfg = EpsilonConfig::make(0.25, 2.5, 1, 0);

    SECTION("published example pair: 9.375 vs 9.25 has delta 0.125") {
        const CompositeTable t = table_from({{"kimi", "q0", 9.375}, {"claude", "q0", 9.25}});
        const auto pairs = build_equal_quality_pairs(t, cfg);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].model_a == "claude");
        CHECK(pairs[0].model_b == "kimi");
        CHECK(pairs[0].delta_eighths == 1); // 0.125 points
    }

    SECTION("delta 0.5 is excluded at epsilon 0.25") {
        const CompositeTable t = table_from({{"a", "q0", 8.0}, {"b", "q0", 8.5}});
        CHECK(build_equal_quality_pairs(t, cfg).empty());
    }

    SECTION("four identically scored models yield all six unordered pairs") {
        const CompositeTable t = table_from(
            {{"a", "q0", 8.0}, {"b", "q0", 8.0}, {"c", "q0", 8.0}, {"d", "q0", 8.0}});
        CHECK(build_equal_quality_pairs(t, cfg).size() == 6);
    }

    SECTION("construction is deterministic and matches the oracle across epsilon") {
        Rng rng(43);
        for (double eps : {0.0, 0.125, 0.25, 0.5, 0.75}) {
            const EpsilonConfig c = EpsilonConfig::make(eps, 2.5, 1, 0);
            const CompositeTable t = random_table(rng, 8, 6);
            const auto pairs = build_equal_quality_pairs(t, c);
            const auto again = build_equal_quality_pairs(t, c);
            CHECK(pairs == again);

            std::set<std::tuple<std::string, std::string, std::string>> got;
            for (const auto& p : pairs) {
                CHECK(p.model_a < p.model_b);
                CHECK(p.delta_eighths <= c.epsilon_eighths);
                got.insert({p.question_id, p.model_a, p.model_b});
            }
            CHECK(got == oracle_equal_pairs(t, c.epsilon_eighths));
        }
    }

    SECTION("pair sets grow monotonically with epsilon") {
        Rng rng(47);
        const CompositeTable t = random_table(rng, 7, 5);
        std::size_t prev = 0;
        for (double eps : {0.0, 0.125, 0.25, 0.5, 0.75}) {
            const auto pairs =
                build_equal_quality_pairs(t, EpsilonConfig::make(eps, 2.5, 1, 0));
            CHECK(pairs.size() >= prev);
            prev = pairs.size();
        }
    }
}

TEST_CASE("high-contrast set and sampling") {
    const EpsilonConfig cfg = EpsilonConfig::make(0.25, 2.5, 3, 1234);

    SECTION("gap boundary: 2.5 included, 2.25 excluded") {
        const CompositeTable t = table_from(
            {{"a", "q0", 9.0}, {"b", "q0", 6.5}, {"c", "q0", 6.75}});
        const auto set = build_high_contrast_set(t, cfg);
        REQUIRE(set.size() == 1);
        CHECK(set[0].better_model == "a");
        CHECK(set[0].worse_model == "b");
        CHECK(set[0].gap_eighths == 20);
    }

    SECTION("six-model table equals exhaustive enumeration") {
        Rng rng(53);
        for (int trial = 0; trial < 20; ++trial) {
            const CompositeTable t = random_table(rng, 6, 4);
            const auto set = build_high_contrast_set(t, cfg);
            std::set<std::tuple<std::string, std::string, std::string>> got;
            for (const auto& p : set) got.insert({p.question_id, p.better_model, p.worse_model});
            CHECK(got == oracle_high_contrast(t, cfg.high_contrast_eighths));
        }
    }

    SECTION("sampling is seeded, without replacement, and excludes the judge") {
        std::vector<HighContrastPair> set;
        for (int q = 0; q < 10; ++q) {
            set.push_back({"q" + std::to_string(q), "good", "bad", 20});
            set.push_back({"q" + std::to_string(q), "good", "judge", 20});
            set.push_back({"q" + std::to_string(q), "judge", "bad", 24});
        }
        const auto sample = sample_high_contrast(set, cfg, "judge");
        REQUIRE(sample.size() == 3);
        std::set<std::tuple<std::string, std::string, std::string>> seen;
        for (const auto& p : sample) {
            CHECK(p.better_model != "judge");
            CHECK(p.worse_model != "judge");
            seen.insert({p.question_id, p.better_model, p.worse_model});
        }
        CHECK(seen.size() == 3); // no duplicates

        const auto replay = sample_high_contrast(set, cfg, "judge");
        CHECK(sample == replay);

        EpsilonConfig other = cfg;
        other.rng_seed = 99;
        // A different seed is allowed to pick a different sample; the draw is
        // a function of the seed only.
        const auto reseeded = sample_high_contrast(set, other, "judge");
        CHECK(reseeded.size() == 3);
    }

    SECTION("insufficient eligible pairs") {
        std::vector<HighContrastPair> set = {
            {"q0", "judge", "bad", 20},
            {"q0", "good", "judge", 20},
            {"q1", "good", "bad", 20},
        };
        CHECK_THROWS_AS(sample_high_contrast(set, cfg, "judge"), InsufficientHighContrastPairs);
    }
}

TEST_CASE("null pairs") {
    const EpsilonConfig cfg = EpsilonConfig::make(0.25, 2.5, 1, 0);

    SECTION("published-style example yields both orientations") {
        const CompositeTable t = table_from({
            {"i", "q1", 8.0}, {"j", "q1", 8.25}, {"k", "q1", 8.0}, {"l", "q1", 7.0},
        });
        const auto pairs = build_null_pairs(t, cfg, "i");
        REQUIRE(pairs.size() == 2);
        CHECK(pairs[0].target_model == "j");
        CHECK(pairs[0].competitor_model == "k");
        CHECK(pairs[1].target_model == "k");
        CHECK(pairs[1].competitor_model == "j");
    }

    SECTION("neighborhood smaller than two gives the empty set") {
        const CompositeTable t = table_from({{"i", "q1", 8.0}, {"j", "q1", 8.25}});
        CHECK(build_null_pairs(t, cfg, "i").empty());
    }

    SECTION("three mutually close neighbors give all six ordered pairs") {
        const CompositeTable t = table_from({
            {"i", "q1", 8.0}, {"j", "q1", 8.0}, {"k", "q1", 8.25}, {"m", "q1", 7.75},
        });
        // j, k, m are all within 0.25 of i, but k and m differ by 0.5.
        const auto pairs = build_null_pairs(t, cfg, "i");
        std::set<std::pair<std::string, std::string>> got;
        for (const auto& p : pairs) got.insert({p.target_model, p.competitor_model});
        CHECK(got == std::set<std::pair<std::string, std::string>>{
                         {"j", "k"}, {"k", "j"}, {"j", "m"}, {"m", "j"}});

        const CompositeTable all_equal = table_from({
            {"i", "q1", 8.0}, {"j", "q1", 8.0}, {"k", "q1", 8.0}, {"m", "q1", 8.0},
        });
        CHECK(build_null_pairs(all_equal, cfg, "i").size() == 6);
    }

    SECTION("matches the brute-force triple scan and the cross-structure predicate") {
        Rng rng(61);
        for (double eps : {0.0, 0.125, 0.25, 0.5, 0.75}) {
            const EpsilonConfig c = EpsilonConfig::make(eps, 2.5, 1, 0);
            const CompositeTable t = random_table(rng, 8, 5);
            const auto pairs = build_null_pairs(t, c, "m0");

            std::set<std::tuple<std::string, std::string, std::string>> got;
            for (const auto& p : pairs) got.insert({p.question_id, p.target_model, p.competitor_model});
            CHECK(got == oracle_null_pairs(t, c.epsilon_eighths, "m0"));

            // Every null pair body is itself an equal-quality pair.
            const auto eq = oracle_equal_pairs(t, c.epsilon_eighths);
            for (const auto& p : pairs) {
                const auto lo = std::min(p.target_model, p.competitor_model);
                const auto hi = std::max(p.target_model, p.competitor_model);
                CHECK(eq.count({p.question_id, lo, hi}) == 1);
            }
        }
    }
}

TEST_CASE("composite table from score records") {
    std::vector<ScoreRecord> records;
    DimensionScores nine_half{GridScore::validate(9.5), GridScore::validate(9.5),
                              GridScore::validate(9.5), GridScore::validate(9.5),
                              GridScore::validate(9.5)};
    DimensionScores nine{GridScore::validate(9.0), GridScore::validate(9.0),
                         GridScore::validate(9.0), GridScore::validate(9.0),
                         GridScore::validate(9.0)};
    records.push_back(ScoreRecord::make("claude", "q0", "judge1", nine_half, 9.5));
    records.push_back(ScoreRecord::make("claude", "q0", "judge2", nine, 9.0));

    const CompositeTable t = CompositeTable::from_score_records(records);
    CHECK(t.at("claude", "q0").points() == 9.25);

    SECTION("missing judge record") {
        records.pop_back();
        CHECK_THROWS_AS(CompositeTable::from_score_records(records), MissingScore);
    }

    SECTION("duplicate judge record") {
        records.push_back(ScoreRecord::make("claude", "q0", "judge1", nine, 9.0));
        CHECK_THROWS_AS(CompositeTable::from_score_records(records), InvalidParams);
    }
}
