#include "xfkt/http_provider.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "xfkt/error.hpp"

namespace xfkt {

using nlohmann::json;

namespace {

void split_url(const std::string& url, std::string& host, std::string& path) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorKind::InvalidArgument, "API base '" + url + "' lacks a scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    host = url.substr(0, path_start);
    path = path_start == std::string::npos ? std::string{} : url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
}

}  // namespace

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
    if (config_.api_key.empty()) throw Error(ErrorKind::AuthError, "no API key configured (set KT_API_KEY)");
    if (config_.retry.max_attempts < 1) throw Error(ErrorKind::InvalidArgument, "max_attempts must be >= 1");
    if (!config_.sleeper) config_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    split_url(config_.base_url, host_, path_prefix_);
}

GenerationOutput HttpProvider::complete(const GenerationRequest& request) {
    json body;
    body["model"] = request.params.model_id;
    body["messages"] = json::array({{{"role", "user"}, {"content", request.prompt.text}}});
    body["temperature"] = request.params.temperature;
    body["max_tokens"] = request.params.max_tokens;
    const std::string payload = body.dump();
    const std::string path = path_prefix_ + "/chat/completions";

    std::string last_failure;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        httplib::Client client(host_);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);
        client.set_bearer_token_auth(config_.api_key);

        const auto t0 = std::chrono::steady_clock::now();
        auto res = client.Post(path, payload, "application/json");
        const auto latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();

        bool transient = false;
        if (!res) {
            transient = true;
            last_failure = "transport error: " + httplib::to_string(res.error());
        } else if (res->status == 401 || res->status == 403) {
            throw Error(ErrorKind::AuthError, "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
        } else if (res->status == 429 || res->status >= 500) {
            transient = true;
            last_failure = "HTTP " + std::to_string(res->status);
        } else if (res->status < 200 || res->status >= 300) {
            throw Error(ErrorKind::ProviderUnavailable, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        } else {
            try {
                const auto doc = json::parse(res->body);
                GenerationOutput out;
                out.provider_id = id();
                out.latency_ms = latency;
                const auto& content = doc.at("choices").at(0).at("message").at("content");
                if (content.is_string()) out.text = content.get<std::string>();
                out.soft_error = out.text.empty();
                if (doc.contains("usage") && doc["usage"].is_object()) {
                    out.usage = TokenUsage{doc["usage"].value("prompt_tokens", std::int64_t{0}),
                                           doc["usage"].value("completion_tokens", std::int64_t{0})};
                }
                return out;
            } catch (const json::exception& e) {
                throw Error(ErrorKind::ProviderUnavailable, std::string("unexpected response shape: ") + e.what());
            }
        }

        if (transient && attempt < config_.retry.max_attempts) {
            const double scale = std::pow(config_.retry.factor, attempt - 1);
            config_.sleeper(std::chrono::milliseconds(
                static_cast<std::int64_t>(static_cast<double>(config_.retry.base.count()) * scale)));
        }
    }
    throw Error(ErrorKind::ProviderUnavailable, "gave up after " + std::to_string(config_.retry.max_attempts) +
                                                    " attempts (last: " + last_failure + ")");
}

ProviderPtr make_http_provider_from_env(RetryPolicy retry) {
    const char* key = std::getenv("KT_API_KEY");
    if (key == nullptr || *key == '\0') throw Error(ErrorKind::AuthError, "KT_API_KEY is not set");
    HttpProviderConfig cfg;
    cfg.api_key = key;
    if (const char* base = std::getenv("KT_API_BASE"); base != nullptr && *base != '\0') cfg.base_url = base;
    cfg.retry = retry;
    return std::make_shared<HttpProvider>(std::move(cfg));
}

}  // namespace xfkt
