#pragma once

// Chat-completion provider abstraction. Concrete providers: an
// OpenAI-compatible HTTP client (http_provider.hpp), and deterministic test
// doubles (scripted, heuristic mock, oracle / anti-oracle, unparseable).
// Wrappers add call counting, a token budget and the transcript cache.

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "xfkt/prompting.hpp"
#include "xfkt/types.hpp"

namespace xfkt {

class TranscriptCache;

struct GenerationParams {
    double temperature = 0.0;
    int max_tokens = 512;
    std::string model_id = "default";
    // 0 for the first request of a prompt, 1 for the re-request after an
    // unparseable answer; part of the cache key so a retry is a fresh call.
    int attempt = 0;

    bool operator==(const GenerationParams&) const = default;
};

// Sorted-key JSON; the cache key hashes the prompt digest with this string.
std::string canonical_params(const GenerationParams& params);

// Side information for test-double providers. Never rendered into prompts
// and never part of the cache key.
struct RequestContext {
    StudentId student;
    std::vector<std::size_t> shot_seqs;     // history positions of shots 1..j
    std::optional<std::size_t> target_seq;  // PP / LPE only
    std::vector<ConceptId> concepts;        // KSA: concepts to label
};

struct GenerationRequest {
    RenderedPrompt prompt;
    GenerationParams params;
    RequestContext context;
};

struct TokenUsage {
    std::int64_t prompt = 0;
    std::int64_t completion = 0;

    bool operator==(const TokenUsage&) const = default;
};

struct GenerationOutput {
    std::string text;
    std::string provider_id;
    std::int64_t latency_ms = 0;
    std::optional<TokenUsage> usage;
    bool soft_error = false;  // set when text is empty because the provider failed softly

    bool operator==(const GenerationOutput&) const = default;
};

class Provider {
public:
    virtual ~Provider() = default;
    // Must be safe to call concurrently.
    virtual GenerationOutput complete(const GenerationRequest& request) = 0;
    virtual std::string id() const = 0;
};

using ProviderPtr = std::shared_ptr<Provider>;

// Replays a fixed list of replies in order; wraps around when `cycle`.
class ScriptedProvider final : public Provider {
public:
    explicit ScriptedProvider(std::vector<std::string> replies, bool cycle = true);
    GenerationOutput complete(const GenerationRequest& request) override;
    std::string id() const override { return "scripted"; }
    std::size_t calls() const;

private:
    mutable std::mutex mu_;
    std::vector<std::string> replies_;
    bool cycle_;
    std::size_t next_ = 0;
};

class CallbackProvider final : public Provider {
public:
    using Fn = std::function<std::string(const GenerationRequest&)>;
    explicit CallbackProvider(Fn fn, std::string id = "callback");
    GenerationOutput complete(const GenerationRequest& request) override;
    std::string id() const override { return id_; }

private:
    Fn fn_;
    std::string id_;
};

// Deterministic stand-in for a model: every concept "fair", boilerplate
// interpretations/explanations, PP answer derived from the prompt digest.
ProviderPtr make_mock_provider();

// Reads ground truth from the dataset via the request context.
//   PP   true label (inverted for the anti-oracle)
//   KSA  per concept, running correct ratio over shots 1..j:
//        good >= 2/3, fail <= 1/3, fair otherwise
//   LTI / LPE fixed boilerplate
ProviderPtr make_oracle_provider(std::shared_ptr<const Dataset> dataset);
ProviderPtr make_anti_oracle_provider(std::shared_ptr<const Dataset> dataset);

// Always answers "maybe".
ProviderPtr make_unparseable_provider();

MasteryLevel mastery_from_ratio(std::size_t correct, std::size_t total);

class CountingProvider final : public Provider {
public:
    explicit CountingProvider(ProviderPtr inner);
    GenerationOutput complete(const GenerationRequest& request) override;
    std::string id() const override { return inner_->id(); }

    std::size_t calls() const noexcept { return calls_.load(); }
    std::size_t calls(PromptKind kind) const noexcept;
    void reset() noexcept;

private:
    ProviderPtr inner_;
    std::atomic<std::size_t> calls_{0};
    std::array<std::atomic<std::size_t>, 4> per_kind_{};
};

// Throws BudgetExceeded once cumulative tokens pass `max_tokens`. Missing
// usage reports are estimated at four characters per token.
class BudgetedProvider final : public Provider {
public:
    BudgetedProvider(ProviderPtr inner, std::int64_t max_tokens);
    GenerationOutput complete(const GenerationRequest& request) override;
    std::string id() const override { return inner_->id(); }
    std::int64_t used() const noexcept { return used_.load(); }

private:
    ProviderPtr inner_;
    std::int64_t max_tokens_;
    std::atomic<std::int64_t> used_{0};
};

// Hit: stored output, no provider call. Miss: provider call, then persist.
// In replay mode a miss throws ReplayMiss.
GenerationOutput cached_complete(TranscriptCache& cache, Provider& provider, const GenerationRequest& request);

class CachedProvider final : public Provider {
public:
    CachedProvider(ProviderPtr inner, std::shared_ptr<TranscriptCache> cache);
    GenerationOutput complete(const GenerationRequest& request) override;
    std::string id() const override { return inner_ ? inner_->id() : "replay"; }

private:
    ProviderPtr inner_;
    std::shared_ptr<TranscriptCache> cache_;
};

}  // namespace xfkt
