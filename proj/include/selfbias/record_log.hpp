#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfbias/errors.hpp"
#include "selfbias/prompts.hpp"
#include "selfbias/rng.hpp"

namespace selfbias {

// The record log is append-only line-delimited JSON with a per-line checksum
// and is the single source of truth for every metric. A query key identifies
// one presentation; re-running a corpus never executes a persisted key twice.

struct QueryKey {
    std::string judge_id;
    std::string question_id;
    std::string first_author;
    std::string second_author;
    std::string kind; // prompt kind name, or "quality_score" for scoring calls

    friend bool operator<(const QueryKey& a, const QueryKey& b) {
        return std::tie(a.judge_id, a.question_id, a.first_author, a.second_author, a.kind) <
               std::tie(b.judge_id, b.question_id, b.first_author, b.second_author, b.kind);
    }
    friend bool operator==(const QueryKey&, const QueryKey&) = default;
};

enum class QueryStatus { Ok, Ambiguous };

struct QueryRecord {
    QueryKey key;
    QueryStatus status = QueryStatus::Ok;
    Choice choice = Choice::A; // meaningful only when status == Ok
    std::string raw_reply;
    int attempts = 1;
    std::int64_t timestamp_ms = 0;
};

namespace detail {

inline std::string checksum_hex(const std::string& payload) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(0, payload)));
    return std::string(buf);
}

inline std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

} // namespace detail

inline std::string encode_record(const QueryRecord& r) {
    nlohmann::json j{
        {"judge", r.key.judge_id},
        {"question", r.key.question_id},
        {"first", r.key.first_author},
        {"second", r.key.second_author},
        {"kind", r.key.kind},
        {"status", r.status == QueryStatus::Ok ? "ok" : "ambiguous"},
        {"choice", r.status == QueryStatus::Ok ? std::string(1, static_cast<char>(r.choice)) : ""},
        {"raw", r.raw_reply},
        {"attempts", r.attempts},
        {"ts", r.timestamp_ms},
    };
    const std::string payload = j.dump();
    j["crc"] = detail::checksum_hex(payload);
    return j.dump();
}

inline QueryRecord decode_record(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw StoreCorruption(std::string("record log line is not valid JSON: ") + e.what());
    }
    if (!j.contains("crc")) throw StoreCorruption("record log line has no checksum");
    const std::string stored_crc = j.at("crc").get<std::string>();
    j.erase("crc");
    if (detail::checksum_hex(j.dump()) != stored_crc) {
        throw StoreCorruption("record log checksum mismatch");
    }

    QueryRecord r;
    r.key.judge_id = j.at("judge").get<std::string>();
    r.key.question_id = j.at("question").get<std::string>();
    r.key.first_author = j.at("first").get<std::string>();
    r.key.second_author = j.at("second").get<std::string>();
    r.key.kind = j.at("kind").get<std::string>();
    const std::string status = j.at("status").get<std::string>();
    r.status = status == "ok" ? QueryStatus::Ok : QueryStatus::Ambiguous;
    const std::string choice = j.at("choice").get<std::string>();
    if (r.status == QueryStatus::Ok) {
        if (choice != "A" && choice != "B") throw StoreCorruption("record has invalid choice");
        r.choice = choice == "A" ? Choice::A : Choice::B;
    }
    r.raw_reply = j.at("raw").get<std::string>();
    r.attempts = j.at("attempts").get<int>();
    r.timestamp_ms = j.at("ts").get<std::int64_t>();
    return r;
}

class RecordLog {
public:
    // Memory-only log, used by the simulation mode.
    RecordLog() = default;

    explicit RecordLog(std::filesystem::path path) : path_(std::move(path)) {
        if (std::filesystem::exists(path_)) {
            std::ifstream in(path_);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                QueryRecord r = decode_record(line);
                records_.emplace(r.key, std::move(r));
            }
        }
        out_.open(path_, std::ios::app);
        if (!out_) throw Error("cannot open record log " + path_.string());
    }

    bool contains(const QueryKey& key) const {
        std::lock_guard lock(mu_);
        return records_.count(key) > 0;
    }

    std::optional<QueryRecord> find(const QueryKey& key) const {
        std::lock_guard lock(mu_);
        auto it = records_.find(key);
        if (it == records_.end()) return std::nullopt;
        return it->second;
    }

    void append(const QueryRecord& record) {
        std::lock_guard lock(mu_);
        if (records_.count(record.key)) {
            throw Error("duplicate record log key for " + record.key.judge_id + "/" +
                        record.key.question_id);
        }
        if (out_.is_open()) {
            out_ << encode_record(record) << '\n';
            out_.flush();
        }
        records_.emplace(record.key, record);
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return records_.size();
    }

    std::vector<QueryRecord> snapshot() const {
        std::lock_guard lock(mu_);
        std::vector<QueryRecord> out;
        out.reserve(records_.size());
        for (const auto& [key, rec] : records_) out.push_back(rec);
        return out;
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::map<QueryKey, QueryRecord> records_;
    std::ofstream out_;
};

// At-most-once execution wrapper over the log. Concurrent callers asking for
// the same key block until the first runner has appended its record.
class QueryCache {
public:
    explicit QueryCache(RecordLog& log) : log_(log) {}

    QueryRecord get_or_run(const QueryKey& key, const std::function<QueryRecord()>& runner) {
        {
            std::unique_lock lock(mu_);
            for (;;) {
                if (auto cached = log_.find(key)) {
                    ++hits_;
                    return *cached;
                }
                if (!inflight_.count(key)) break;
                cv_.wait(lock);
            }
            inflight_.insert(key);
        }

        try {
            QueryRecord record = runner();
            record.key = key;
            log_.append(record);
            {
                std::unique_lock lock(mu_);
                inflight_.erase(key);
                ++executed_;
            }
            cv_.notify_all();
            return record;
        } catch (...) {
            {
                std::unique_lock lock(mu_);
                inflight_.erase(key);
            }
            cv_.notify_all();
            throw;
        }
    }

    std::int64_t executed() const {
        std::lock_guard lock(mu_);
        return executed_;
    }
    std::int64_t hits() const {
        std::lock_guard lock(mu_);
        return hits_;
    }
    void reset_counters() {
        std::lock_guard lock(mu_);
        executed_ = 0;
        hits_ = 0;
    }

    RecordLog& log() { return log_; }

private:
    RecordLog& log_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::set<QueryKey> inflight_;
    std::int64_t executed_ = 0;
    std::int64_t hits_ = 0;
};

} // namespace selfbias
