#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>
#include <vector>

#include "selfbias/record_log.hpp"

using namespace selfbias;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("selfbias_test_" + std::to_string(std::chrono::steady_clock::now()
                                                      .time_since_epoch()
                                                      .count()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

QueryRecord sample_record(const std::string& question) {
    QueryRecord r;
    r.key = {"judge-1", question, "m1", "m2", "baseline_preference"};
    r.status = QueryStatus::Ok;
    r.choice = Choice::A;
    r.raw_reply = "A";
    r.attempts = 1;
    r.timestamp_ms = 1700000000000;
    return r;
}

} // namespace

TEST_CASE("record encoding round trip with checksum") {
    const QueryRecord r = sample_record("q1");
    const std::string line = encode_record(r);
    const QueryRecord back = decode_record(line);
    CHECK(back.key == r.key);
    CHECK(back.choice == r.choice);
    CHECK(back.raw_reply == r.raw_reply);
    CHECK(back.timestamp_ms == r.timestamp_ms);

    SECTION("tampered payload fails the checksum") {
        std::string corrupted = line;
        const auto pos = corrupted.find("\"choice\":\"A\"");
        REQUIRE(pos != std::string::npos);
        corrupted.replace(pos, 12, "\"choice\":\"B\"");
        CHECK_THROWS_AS(decode_record(corrupted), StoreCorruption);
    }

    SECTION("garbage line") {
        CHECK_THROWS_AS(decode_record("not json"), StoreCorruption);
        CHECK_THROWS_AS(decode_record("{\"judge\":\"x\"}"), StoreCorruption);
    }
}

TEST_CASE("record log persists and reloads") {
    TempDir dir;
    const fs::path log_path = dir.path / "records.log";

    {
        RecordLog log(log_path);
        log.append(sample_record("q1"));
        log.append(sample_record("q2"));
        CHECK(log.size() == 2);
        CHECK_THROWS_AS(log.append(sample_record("q1")), Error);
    }

    {
        RecordLog reloaded(log_path);
        CHECK(reloaded.size() == 2);
        CHECK(reloaded.contains(sample_record("q1").key));
        auto rec = reloaded.find(sample_record("q2").key);
        REQUIRE(rec.has_value());
        CHECK(rec->choice == Choice::A);
    }

    SECTION("a corrupted line poisons the load") {
        std::ofstream out(log_path, std::ios::app);
        out << "{\"judge\":\"j\",\"crc\":\"0000000000000000\"}\n";
        out.close();
        CHECK_THROWS_AS(RecordLog(log_path), StoreCorruption);
    }
}

TEST_CASE("query cache executes each key at most once") {
    TempDir dir;
    RecordLog log(dir.path / "records.log");
    QueryCache cache(log);

    int runs = 0;
    auto runner = [&]() {
        ++runs;
        QueryRecord r = sample_record("q1");
        return r;
    };

    const QueryKey key = sample_record("q1").key;
    cache.get_or_run(key, runner);
    cache.get_or_run(key, runner);
    cache.get_or_run(key, runner);
    CHECK(runs == 1);
    CHECK(cache.executed() == 1);
    CHECK(cache.hits() == 2);

    SECTION("a warm cache needs zero executions after reload") {
        RecordLog log2(dir.path / "records.log");
        QueryCache cache2(log2);
        int cold_runs = 0;
        cache2.get_or_run(key, [&]() {
            ++cold_runs;
            return sample_record("q1");
        });
        CHECK(cold_runs == 0);
        CHECK(cache2.executed() == 0);
        CHECK(cache2.hits() == 1);
    }
}

TEST_CASE("query cache is at-most-once under concurrency") {
    TempDir dir;
    RecordLog log(dir.path / "records.log");
    QueryCache cache(log);

    std::atomic<int> runs{0};
    auto slow_runner = [&]() {
        runs.fetch_add(1);
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        return sample_record("q1");
    };

    const QueryKey key = sample_record("q1").key;
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&]() {
            const QueryRecord r = cache.get_or_run(key, slow_runner);
            if (r.choice == Choice::A) ok.fetch_add(1);
        });
    }
    for (auto& t : threads) t.join();
    CHECK(runs.load() == 1);
    CHECK(ok.load() == 8);
    CHECK(log.size() == 1);
}

TEST_CASE("resumed corpus executes only the missing keys") {
    TempDir dir;
    const fs::path log_path = dir.path / "records.log";

    std::vector<QueryKey> keys;
    for (int i = 0; i < 10; ++i) keys.push_back(sample_record("q" + std::to_string(i)).key);

    // First run is interrupted after 4 keys.
    {
        RecordLog log(log_path);
        QueryCache cache(log);
        for (int i = 0; i < 4; ++i) {
            cache.get_or_run(keys[static_cast<std::size_t>(i)],
                             [&]() { return sample_record("q" + std::to_string(i)); });
        }
    }

    // The resumed run executes exactly (total - persisted) keys.
    RecordLog log(log_path);
    const std::size_t persisted = log.size();
    QueryCache cache(log);
    for (int i = 0; i < 10; ++i) {
        cache.get_or_run(keys[static_cast<std::size_t>(i)],
                         [&]() { return sample_record("q" + std::to_string(i)); });
    }
    CHECK(persisted == 4);
    CHECK(cache.executed() == static_cast<std::int64_t>(keys.size() - persisted));
}
