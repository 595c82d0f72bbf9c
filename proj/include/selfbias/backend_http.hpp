#pragma once

// Live chat-completion backend. Kept in its own header so that only the
// binaries that talk to real endpoints pull in the HTTP stack.

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "selfbias/backend.hpp"
#include "selfbias/config.hpp"
#include "selfbias/errors.hpp"

namespace selfbias {

class LiveJudge : public JudgeBackend {
public:
    LiveJudge(BackendEntry entry, RetryPolicy retry) : entry_(std::move(entry)), retry_(retry) {
        if (entry_.simulated) throw ConfigError("LiveJudge requires a live backend entry");
        if (!entry_.api_key_env.empty() && std::getenv(entry_.api_key_env.c_str()) == nullptr) {
            throw ConfigError("environment variable " + entry_.api_key_env +
                              " is not set for backend " + entry_.judge_id);
        }
    }

    const std::string& judge_id() const override { return entry_.judge_id; }

    std::string complete(const QueryContext&, const std::string& prompt) override {
        return post_chat(prompt);
    }

    std::string score(const std::string&, const std::string&, const std::string& prompt) override {
        return post_chat(prompt);
    }

private:
    std::string post_chat(const std::string& prompt) {
        const nlohmann::json body{
            {"model", entry_.model},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
            {"temperature", 0},
            {"top_p", 1},
        };
        const std::string payload = body.dump();

        std::string last_error;
        int backoff_ms = retry_.initial_backoff_ms;
        for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
            if (attempt > 1) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
                backoff_ms *= 2;
            }
            httplib::Client client(entry_.base_url);
            client.set_connection_timeout(entry_.timeout_s, 0);
            client.set_read_timeout(entry_.timeout_s, 0);
            httplib::Headers headers;
            if (!entry_.api_key_env.empty()) {
                const char* key = std::getenv(entry_.api_key_env.c_str());
                headers.emplace("Authorization", std::string("Bearer ") + (key ? key : ""));
            }
            auto res = client.Post(entry_.chat_path, headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw BackendFailure("backend " + entry_.judge_id + " returned HTTP " +
                                     std::to_string(res->status) + ": " + res->body.substr(0, 200));
            }
            try {
                const auto j = nlohmann::json::parse(res->body);
                return j.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                throw BackendFailure("backend " + entry_.judge_id +
                                     " returned an unexpected payload: " + e.what());
            }
        }
        throw BackendFailure("backend " + entry_.judge_id + " failed after " +
                             std::to_string(retry_.max_attempts) + " attempts (" + last_error + ")");
    }

    BackendEntry entry_;
    RetryPolicy retry_;
};

} // namespace selfbias
