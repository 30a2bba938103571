#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "collab/errors.hpp"
#include "collab/types.hpp"

namespace collab {

enum class LlmMode { Live, Mock };

inline const char* to_string(LlmMode m) { return m == LlmMode::Live ? "live" : "mock"; }

struct LlmConfig {
    std::string base_url = "http://localhost:8000";
    std::string model_id = "gpt-5";
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout_seconds = 30.0;
    int max_retries = 2;
    int max_in_flight = 4;
    LlmMode mode = LlmMode::Mock;
    double backoff_initial_seconds = 0.25;
};

struct HttpRequest {
    std::string base_url;
    std::string path;
    std::string body;      // JSON
    std::string api_key;   // empty in anonymous setups
    double timeout_seconds = 30.0;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

using Transport = std::function<HttpResponse(const HttpRequest&)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;
using MockResponder = std::function<std::string(const std::string& prompt)>;

// Plain-HTTP OpenAI-compatible transport. TLS termination is left to the
// gateway; inject a custom Transport for anything else.
inline HttpResponse default_transport(const HttpRequest& req) {
    httplib::Client client(req.base_url);
    auto timeout = std::chrono::duration<double>(req.timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    httplib::Headers headers;
    if (!req.api_key.empty()) headers.emplace("Authorization", "Bearer " + req.api_key);
    auto res = client.Post(req.path, headers, req.body, "application/json");
    if (!res) {
        std::stringstream msg;
        msg << "transport failure: " << httplib::to_string(res.error());
        throw Timeout(msg.str());
    }
    return {res->status, res->body};
}

// Boundary to chat-completion and embedding services. In Mock mode no
// network operation ever happens; chat dispatches to a registered
// deterministic responder instead.
class LlmClient {
public:
    explicit LlmClient(LlmConfig cfg, Transport transport = {}, Sleeper sleeper = {})
        : cfg_(std::move(cfg)),
          transport_(transport ? std::move(transport) : default_transport),
          sleeper_(sleeper ? std::move(sleeper)
                           : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
          in_flight_(std::max(1, cfg_.max_in_flight)) {}

    LlmMode mode() const { return cfg_.mode; }
    const LlmConfig& config() const { return cfg_; }

    void set_mock_responder(MockResponder responder) {
        std::lock_guard lock(mutex_);
        responder_ = std::move(responder);
    }

    std::string chat(const std::string& prompt) { return chat(prompt, MockResponder{}); }

    // In Mock mode the per-call responder wins over the registered one.
    std::string chat(const std::string& prompt, const MockResponder& responder) {
        if (cfg_.mode == LlmMode::Mock) {
            if (responder) return responder(prompt);
            std::lock_guard lock(mutex_);
            if (!responder_) throw ServiceUnavailable("mock chat: no responder registered");
            return responder_(prompt);
        }
        nlohmann::json body = {
            {"model", cfg_.model_id},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
            {"temperature", 0},
        };
        auto response = post_with_retries("/v1/chat/completions", body.dump());
        try {
            auto j = nlohmann::json::parse(response.body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw HttpError(response.status,
                            std::string("chat: malformed completion response: ") + e.what());
        }
    }

    std::vector<double> embed_remote(const std::string& text) {
        if (cfg_.mode == LlmMode::Mock)
            throw ServiceUnavailable("embed_remote: no remote embeddings in mock mode");
        nlohmann::json body = {{"model", cfg_.model_id}, {"input", text}};
        auto response = post_with_retries("/v1/embeddings", body.dump());
        std::vector<double> vec;
        try {
            auto j = nlohmann::json::parse(response.body);
            vec = j.at("data").at(0).at("embedding").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw HttpError(response.status,
                            std::string("embed: malformed embedding response: ") + e.what());
        }
        std::lock_guard lock(mutex_);
        if (embedding_dim_ == 0) {
            embedding_dim_ = vec.size();
        } else if (embedding_dim_ != vec.size()) {
            throw DimensionDrift("embedding dimension changed from " +
                                 std::to_string(embedding_dim_) + " to " +
                                 std::to_string(vec.size()));
        }
        return vec;
    }

    size_t embedding_dimension() const {
        std::lock_guard lock(mutex_);
        return embedding_dim_;
    }

private:
    HttpResponse post_with_retries(const std::string& path, std::string body) {
        const char* key = std::getenv(cfg_.api_key_env.c_str());
        if (key == nullptr || *key == '\0')
            throw MissingApiKey("environment variable " + cfg_.api_key_env + " is not set");

        HttpRequest req{cfg_.base_url, path, std::move(body), key, cfg_.timeout_seconds};
        for (int attempt = 0;; ++attempt) {
            try {
                in_flight_.acquire();
                HttpResponse res;
                try {
                    res = transport_(req);
                } catch (...) {
                    in_flight_.release();
                    throw;
                }
                in_flight_.release();
                if (res.status >= 400)
                    throw HttpError(res.status, "HTTP " + std::to_string(res.status) + " from " +
                                                    path + ": " + res.body.substr(0, 200));
                return res;
            } catch (const MissingApiKey&) {
                throw;
            } catch (const Error&) {
                if (attempt >= cfg_.max_retries) throw;
                auto delay = std::chrono::duration<double>(cfg_.backoff_initial_seconds *
                                                           static_cast<double>(1 << attempt));
                sleeper_(std::chrono::duration_cast<std::chrono::milliseconds>(delay));
            }
        }
    }

    LlmConfig cfg_;
    Transport transport_;
    Sleeper sleeper_;
    std::counting_semaphore<4096> in_flight_;
    mutable std::mutex mutex_;
    MockResponder responder_;
    size_t embedding_dim_ = 0;
};

}  // namespace collab
