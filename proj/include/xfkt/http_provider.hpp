#pragma once

#include <chrono>
#include <functional>
#include <string>

#include "xfkt/llm_client.hpp"

namespace xfkt {

// Transient failures (HTTP 429, 5xx, transport errors) are retried: attempt
// n waits base * factor^(n-1) before the next try, up to max_attempts tries.
struct RetryPolicy {
    std::chrono::milliseconds base{1000};
    double factor = 2.0;
    int max_attempts = 5;
};

struct HttpProviderConfig {
    std::string base_url = "https://api.openai.com/v1";  // POST <base_url>/chat/completions
    std::string api_key;
    RetryPolicy retry;
    std::chrono::seconds timeout{120};
    // Injected so tests can observe backoff without sleeping.
    std::function<void(std::chrono::milliseconds)> sleeper;
};

// OpenAI-compatible chat completions. The prompt is sent as one user
// message; the reply is choices[0].message.content.
//   401 / 403          AuthError, no retry
//   429, 5xx, network  retried, then ProviderUnavailable
//   other non-2xx      ProviderUnavailable
class HttpProvider final : public Provider {
public:
    explicit HttpProvider(HttpProviderConfig config);
    GenerationOutput complete(const GenerationRequest& request) override;
    std::string id() const override { return "http"; }

private:
    HttpProviderConfig config_;
    std::string host_;         // scheme://host[:port]
    std::string path_prefix_;  // e.g. /v1
};

// Reads KT_API_KEY (required, else AuthError) and KT_API_BASE (optional).
ProviderPtr make_http_provider_from_env(RetryPolicy retry = {});

}  // namespace xfkt
