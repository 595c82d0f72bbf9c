#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "selfbias/errors.hpp"

namespace selfbias {

// Benchmark-judge scores live on a 0.0-10.0 scale with 0.25 steps. They are
// held as integer quarter points so that grid arithmetic and the epsilon
// comparisons built on top of it are exact; doubles appear only at the I/O
// boundary.

enum class GridPolicy {
    Reject, // off-grid input raises OffGridScore
    Snap,   // off-grid input snaps to the nearest step, flagged as adjusted
};

class GridScore {
public:
    static constexpr int kMaxQuarters = 40;
    static constexpr double kGridTolerance = 1e-9;

    GridScore() = default;

    static GridScore from_quarters(int quarters, bool adjusted = false) {
        if (quarters < 0 || quarters > kMaxQuarters) {
            throw OutOfRange("score " + std::to_string(quarters * 0.25) + " outside [0, 10]");
        }
        GridScore s;
        s.quarters_ = quarters;
        s.adjusted_ = adjusted;
        return s;
    }

    static GridScore validate(double points, GridPolicy policy = GridPolicy::Reject) {
        if (points < -kGridTolerance || points > 10.0 + kGridTolerance) {
            throw OutOfRange("score " + std::to_string(points) + " outside [0, 10]");
        }
        const double steps = points * 4.0;
        const long nearest = std::lround(steps);
        const double off_by = std::fabs(points - static_cast<double>(nearest) * 0.25);
        if (off_by <= kGridTolerance) {
            return from_quarters(static_cast<int>(std::clamp(nearest, 0L, 40L)));
        }
        if (policy == GridPolicy::Reject) {
            throw OffGridScore("score " + std::to_string(points) + " is not a multiple of 0.25");
        }
        return from_quarters(static_cast<int>(std::clamp(nearest, 0L, 40L)), /*adjusted=*/true);
    }

    int quarters() const { return quarters_; }
    double points() const { return quarters_ * 0.25; }
    bool adjusted() const { return adjusted_; }

    friend bool operator==(GridScore a, GridScore b) { return a.quarters_ == b.quarters_; }

private:
    int quarters_ = 0;
    bool adjusted_ = false;
};

inline constexpr std::array<std::string_view, 5> kDimensionNames = {
    "Relevance", "Accuracy", "Depth", "Logic", "Clarity",
};

struct DimensionScores {
    GridScore relevance;
    GridScore accuracy;
    GridScore depth;
    GridScore logic;
    GridScore clarity;

    std::array<GridScore, 5> as_array() const { return {relevance, accuracy, depth, logic, clarity}; }

    int sum_quarters() const {
        return relevance.quarters() + accuracy.quarters() + depth.quarters() +
               logic.quarters() + clarity.quarters();
    }

    // Mean of five quarter-step scores; exact in twentieths of a point.
    double mean_points() const { return sum_quarters() * 0.05; }

    bool any_adjusted() const {
        for (GridScore s : as_array()) {
            if (s.adjusted()) return true;
        }
        return false;
    }
};

// One benchmark judge's five-dimension evaluation of one model response.
struct ScoreRecord {
    std::string model_id;
    std::string question_id;
    std::string judge_id;
    DimensionScores dims;
    double overall = 0.0; // arithmetic mean of the five dimensions

    static ScoreRecord make(std::string model_id, std::string question_id, std::string judge_id,
                            DimensionScores dims, double overall) {
        if (std::fabs(overall - dims.mean_points()) > 1e-9) {
            throw OverallMismatch("overall " + std::to_string(overall) +
                                  " does not equal the dimension mean " +
                                  std::to_string(dims.mean_points()));
        }
        return ScoreRecord{std::move(model_id), std::move(question_id), std::move(judge_id), dims, overall};
    }
};

// Composite of the two benchmark judges: (s1 + s2) / 2, exact in eighth points.
class CompositeValue {
public:
    CompositeValue() = default;

    static CompositeValue from_eighths(int eighths) {
        if (eighths < 0 || eighths > 80) {
            throw OutOfRange("composite " + std::to_string(eighths * 0.125) + " outside [0, 10]");
        }
        CompositeValue v;
        v.eighths_ = eighths;
        return v;
    }

    static CompositeValue average(GridScore s1, GridScore s2) {
        // quarters are points*4, so (s1 + s2)/2 in points is (q1 + q2) eighths.
        return from_eighths(s1.quarters() + s2.quarters());
    }

    int eighths() const { return eighths_; }
    double points() const { return eighths_ * 0.125; }

    friend bool operator==(CompositeValue a, CompositeValue b) { return a.eighths_ == b.eighths_; }

private:
    int eighths_ = 0;
};

inline CompositeValue composite_score(GridScore s1, GridScore s2) {
    return CompositeValue::average(s1, s2);
}

inline CompositeValue composite_score(double s1, double s2, GridPolicy policy = GridPolicy::Reject) {
    return CompositeValue::average(GridScore::validate(s1, policy), GridScore::validate(s2, policy));
}

struct CompositeScore {
    std::string model_id;
    std::string question_id;
    CompositeValue value;
};

// Renders a points value with one or two decimals, whichever is lossless
// ("8.0", "8.5", "8.25", "8.05").
inline std::string format_points(double points) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", points);
    std::string s(buf);
    if (s.size() >= 2 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
    return s;
}

// ---------------------------------------------------------------------------
// Evaluator-output parsing
//
// The quality-evaluation reply is expected to contain the block
//
//   Dimension Scores:
//   - Relevance: X.X points
//   ...
//   Overall Score: X.X points
//
// possibly surrounded by free-form reasoning text.

struct ParsedEvaluation {
    DimensionScores dims;
    double stated_overall = 0.0;
    double recomputed_mean = 0.0;
    bool overall_mismatch = false; // |stated - mean| > 0.05 points
    bool any_adjusted = false;
};

namespace detail {

inline bool parse_labeled_points(std::string_view text, std::string_view label, double& out) {
    std::size_t pos = 0;
    while ((pos = text.find(label, pos)) != std::string_view::npos) {
        std::size_t p = pos + label.size();
        while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
        if (p < text.size() && text[p] == ':') {
            ++p;
            while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
            std::size_t end = p;
            while (end < text.size() &&
                   (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.' ||
                    text[end] == '-' || text[end] == '+')) {
                ++end;
            }
            if (end > p) {
                out = std::stod(std::string(text.substr(p, end - p)));
                return true;
            }
        }
        pos += label.size();
    }
    return false;
}

} // namespace detail

inline ParsedEvaluation parse_eval_output(std::string_view text, GridPolicy policy = GridPolicy::Snap) {
    if (text.empty()) throw UnparseableOutput("empty evaluator reply");

    std::array<GridScore, 5> scores;
    for (std::size_t i = 0; i < kDimensionNames.size(); ++i) {
        double value = 0.0;
        if (!detail::parse_labeled_points(text, kDimensionNames[i], value)) {
            throw MissingDimension("dimension '" + std::string(kDimensionNames[i]) +
                                   "' not found in evaluator reply");
        }
        scores[i] = GridScore::validate(value, policy);
    }

    double stated = 0.0;
    if (!detail::parse_labeled_points(text, "Overall Score", stated)) {
        throw UnparseableOutput("'Overall Score' not found in evaluator reply");
    }

    ParsedEvaluation parsed;
    parsed.dims = DimensionScores{scores[0], scores[1], scores[2], scores[3], scores[4]};
    parsed.stated_overall = stated;
    parsed.recomputed_mean = parsed.dims.mean_points();
    parsed.overall_mismatch = std::fabs(stated - parsed.recomputed_mean) > 0.05 + 1e-9;
    parsed.any_adjusted = parsed.dims.any_adjusted();
    return parsed;
}

// Inverse of parse_eval_output for well-formed blocks; also used by the
// simulated scoring backend.
inline std::string format_eval_output(const DimensionScores& dims, double overall) {
    std::string out = "Dimension Scores:\n";
    const auto arr = dims.as_array();
    for (std::size_t i = 0; i < kDimensionNames.size(); ++i) {
        out += "- ";
        out += kDimensionNames[i];
        out += ": ";
        out += format_points(arr[i].points());
        out += " points\n";
    }
    out += "\nOverall Score: ";
    out += format_points(overall);
    out += " points\n";
    return out;
}

// ---------------------------------------------------------------------------
// Dual-judge agreement

struct AgreementHistogram {
    // Bucket upper edges in points; the last bucket collects |delta| > 2.0.
    static constexpr std::array<double, 6> kEdges = {0.0, 0.25, 0.5, 1.0, 1.5, 2.0};
    static constexpr std::array<std::string_view, 7> kLabels = {
        "= 0", "<= 0.25", "<= 0.5", "<= 1.0", "<= 1.5", "<= 2.0", "> 2.0",
    };

    std::array<std::int64_t, 7> counts{};
    std::array<std::int64_t, 7> cumulative{};
    std::int64_t total = 0;
    double mean_abs = 0.0;
    double median_abs = 0.0;
    double stddev_abs = 0.0; // population standard deviation
};

inline AgreementHistogram agreement_histogram(std::span<const std::pair<double, double>> pairs) {
    if (pairs.empty()) throw EmptyInput("agreement histogram needs at least one score pair");

    AgreementHistogram h;
    std::vector<double> deltas;
    deltas.reserve(pairs.size());
    for (const auto& [s1, s2] : pairs) {
        const double d = std::fabs(s1 - s2);
        deltas.push_back(d);
        std::size_t bucket = AgreementHistogram::kEdges.size();
        for (std::size_t b = 0; b < AgreementHistogram::kEdges.size(); ++b) {
            if (d <= AgreementHistogram::kEdges[b] + 1e-9) {
                bucket = b;
                break;
            }
        }
        ++h.counts[bucket];
    }

    h.total = static_cast<std::int64_t>(pairs.size());
    std::int64_t running = 0;
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        running += h.counts[b];
        h.cumulative[b] = running;
    }

    double sum = 0.0, sum_sq = 0.0;
    for (double d : deltas) {
        sum += d;
        sum_sq += d * d;
    }
    const double n = static_cast<double>(deltas.size());
    h.mean_abs = sum / n;
    h.stddev_abs = std::sqrt(std::max(0.0, sum_sq / n - h.mean_abs * h.mean_abs));

    std::sort(deltas.begin(), deltas.end());
    const std::size_t mid = deltas.size() / 2;
    h.median_abs = (deltas.size() % 2 == 1) ? deltas[mid] : 0.5 * (deltas[mid - 1] + deltas[mid]);
    return h;
}

} // namespace selfbias
