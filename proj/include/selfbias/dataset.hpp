#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfbias/errors.hpp"
#include "selfbias/rng.hpp"
#include "selfbias/scores.hpp"

namespace selfbias {

// The seven task categories used for per-task breakdowns.
inline const std::vector<std::string> kDefaultTaskCategories = {
    "Text Generation",   "Information Provision", "Explanation", "Question Answering",
    "Code Implementation", "Text Editing",        "Other",
};

struct Question {
    std::string id;
    std::string instruction;
    std::string task_category;
};

// Question corpus plus one response per (model, question). Both come from
// line-delimited JSON files supplied by the user.
class Dataset {
public:
    void add_question(Question q) {
        if (q.id.empty()) throw ConfigError("question with empty id");
        if (q.instruction.empty()) throw ConfigError("question " + q.id + " has empty instruction");
        if (!index_.try_emplace(q.id, questions_.size()).second) {
            throw ConfigError("duplicate question id " + q.id);
        }
        questions_.push_back(std::move(q));
    }

    void add_response(const std::string& model_id, const std::string& question_id, std::string text) {
        if (!index_.count(question_id)) {
            throw ConfigError("response references unknown question " + question_id);
        }
        if (!responses_.try_emplace({model_id, question_id}, std::move(text)).second) {
            throw ConfigError("duplicate response for (" + model_id + ", " + question_id + ")");
        }
        models_.insert(model_id);
    }

    const Question& question(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw ConfigError("unknown question " + id);
        return questions_[it->second];
    }

    const std::string& response(const std::string& model_id, const std::string& question_id) const {
        auto it = responses_.find({model_id, question_id});
        if (it == responses_.end()) {
            throw ConfigError("no response for (" + model_id + ", " + question_id + ")");
        }
        return it->second;
    }

    bool has_response(const std::string& model_id, const std::string& question_id) const {
        return responses_.count({model_id, question_id}) > 0;
    }

    const std::vector<Question>& questions() const { return questions_; }
    std::vector<std::string> models() const { return {models_.begin(), models_.end()}; }
    std::size_t size() const { return questions_.size(); }

    std::map<std::string, std::string> task_labels() const {
        std::map<std::string, std::string> out;
        for (const auto& q : questions_) out[q.id] = q.task_category;
        return out;
    }

    void validate(const std::vector<std::string>& allowed_categories = kDefaultTaskCategories) const {
        if (questions_.empty()) throw ConfigError("dataset has no questions");
        const std::set<std::string> allowed(allowed_categories.begin(), allowed_categories.end());
        for (const auto& q : questions_) {
            if (!allowed.count(q.task_category)) {
                throw MissingTaskLabel("question " + q.id + " has task category '" +
                                       q.task_category + "' outside the declared label set");
            }
        }
        for (const auto& m : models_) {
            for (const auto& q : questions_) {
                if (!has_response(m, q.id)) {
                    throw ConfigError("model " + m + " has no response for question " + q.id);
                }
            }
        }
    }

    // Content hash over a canonical serialization; feeds the run manifest.
    std::string content_hash() const {
        std::uint64_t h = 0;
        for (const auto& q : questions_) {
            h = fnv1a64(h, q.id);
            h = fnv1a64(h, q.instruction);
            h = fnv1a64(h, q.task_category);
        }
        for (const auto& [key, text] : responses_) {
            h = fnv1a64(h, key.first);
            h = fnv1a64(h, key.second);
            h = fnv1a64(h, text);
        }
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

    static Dataset load(const std::filesystem::path& questions_path,
                        const std::filesystem::path& responses_path,
                        const std::vector<std::string>& allowed = kDefaultTaskCategories) {
        Dataset ds;
        {
            std::ifstream in(questions_path);
            if (!in) throw ConfigError("cannot open questions file " + questions_path.string());
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto j = nlohmann::json::parse(line);
                ds.add_question({j.at("question_id").get<std::string>(),
                                 j.at("instruction").get<std::string>(),
                                 j.at("task_category").get<std::string>()});
            }
        }
        {
            std::ifstream in(responses_path);
            if (!in) throw ConfigError("cannot open responses file " + responses_path.string());
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto j = nlohmann::json::parse(line);
                ds.add_response(j.at("model_id").get<std::string>(),
                                j.at("question_id").get<std::string>(),
                                j.at("text").get<std::string>());
            }
        }
        ds.validate(allowed);
        return ds;
    }

private:
    std::vector<Question> questions_;
    std::map<std::string, std::size_t> index_;
    std::map<std::pair<std::string, std::string>, std::string> responses_;
    std::set<std::string> models_;
};

// ---------------------------------------------------------------------------
// Score record files: one JSON object per line with the flat field layout
// {model_id, question_id, judge_id, relevance, accuracy, depth, logic,
//  clarity, overall}.

inline void save_score_records(std::span<const ScoreRecord> records,
                               const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write score records to " + path.string());
    for (const ScoreRecord& r : records) {
        nlohmann::json j{
            {"model_id", r.model_id},     {"question_id", r.question_id},
            {"judge_id", r.judge_id},     {"relevance", r.dims.relevance.points()},
            {"accuracy", r.dims.accuracy.points()}, {"depth", r.dims.depth.points()},
            {"logic", r.dims.logic.points()},       {"clarity", r.dims.clarity.points()},
            {"overall", r.overall},
        };
        out << j.dump() << '\n';
    }
}

inline std::vector<ScoreRecord> load_score_records(const std::filesystem::path& path,
                                                   GridPolicy policy = GridPolicy::Snap) {
    std::ifstream in(path);
    if (!in) throw MissingPhase("no score records at " + path.string());
    std::vector<ScoreRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        DimensionScores dims{
            GridScore::validate(j.at("relevance").get<double>(), policy),
            GridScore::validate(j.at("accuracy").get<double>(), policy),
            GridScore::validate(j.at("depth").get<double>(), policy),
            GridScore::validate(j.at("logic").get<double>(), policy),
            GridScore::validate(j.at("clarity").get<double>(), policy),
        };
        records.push_back(ScoreRecord::make(j.at("model_id").get<std::string>(),
                                            j.at("question_id").get<std::string>(),
                                            j.at("judge_id").get<std::string>(), dims,
                                            j.at("overall").get<double>()));
    }
    return records;
}

} // namespace selfbias
