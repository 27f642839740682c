#include "xfkt/llm_client.hpp"

#include <algorithm>
#include <chrono>

#include <json.hpp>

#include "xfkt/error.hpp"
#include "xfkt/transcript_cache.hpp"

namespace xfkt {

using nlohmann::json;

std::string canonical_params(const GenerationParams& params) {
    json j;
    j["attempt"] = params.attempt;
    j["max_tokens"] = params.max_tokens;
    j["model_id"] = params.model_id;
    j["temperature"] = params.temperature;
    return j.dump();
}

ScriptedProvider::ScriptedProvider(std::vector<std::string> replies, bool cycle)
    : replies_(std::move(replies)), cycle_(cycle) {
    if (replies_.empty()) throw Error(ErrorKind::InvalidArgument, "scripted provider needs at least one reply");
}

GenerationOutput ScriptedProvider::complete(const GenerationRequest&) {
    std::lock_guard lock(mu_);
    if (next_ >= replies_.size() && !cycle_) {
        throw Error(ErrorKind::ProviderUnavailable, "scripted provider ran out of replies");
    }
    GenerationOutput out;
    out.text = replies_[next_ % replies_.size()];
    out.provider_id = id();
    ++next_;
    return out;
}

std::size_t ScriptedProvider::calls() const {
    std::lock_guard lock(mu_);
    return next_;
}

CallbackProvider::CallbackProvider(Fn fn, std::string id) : fn_(std::move(fn)), id_(std::move(id)) {}

GenerationOutput CallbackProvider::complete(const GenerationRequest& request) {
    GenerationOutput out;
    out.text = fn_(request);
    out.provider_id = id_;
    return out;
}

MasteryLevel mastery_from_ratio(std::size_t correct, std::size_t total) {
    if (total == 0) return MasteryLevel::Fair;
    if (3 * correct >= 2 * total) return MasteryLevel::Good;
    if (3 * correct <= total) return MasteryLevel::Fail;
    return MasteryLevel::Fair;
}

namespace {

std::string boilerplate(PromptKind kind) {
    if (kind == PromptKind::LTI) return "The record is consistent with the estimated knowledge state.";
    return "The prediction follows from the estimated knowledge states of the tested concepts.";
}

class MockProvider final : public Provider {
public:
    GenerationOutput complete(const GenerationRequest& request) override {
        GenerationOutput out;
        out.provider_id = id();
        switch (request.prompt.template_id) {
            case PromptKind::KSA:
                for (const auto& c : request.context.concepts) out.text += c.value + ": fair\n";
                break;
            case PromptKind::PP: {
                const char h = request.prompt.digest.empty() ? '0' : request.prompt.digest.front();
                const int nibble = (h >= 'a') ? h - 'a' + 10 : h - '0';
                out.text = (nibble & 1) ? "1" : "0";
                break;
            }
            default:
                out.text = boilerplate(request.prompt.template_id);
        }
        return out;
    }
    std::string id() const override { return "mock"; }
};

class OracleProvider final : public Provider {
public:
    OracleProvider(std::shared_ptr<const Dataset> dataset, bool invert)
        : dataset_(std::move(dataset)), invert_(invert) {
        if (!dataset_) throw Error(ErrorKind::InvalidArgument, "oracle provider needs a dataset");
    }

    GenerationOutput complete(const GenerationRequest& request) override {
        GenerationOutput out;
        out.provider_id = id();
        const auto& ctx = request.context;
        switch (request.prompt.template_id) {
            case PromptKind::KSA: {
                const auto& recs = history(ctx.student).records;
                for (const auto& c : ctx.concepts) {
                    std::size_t correct = 0, total = 0;
                    for (auto seq : ctx.shot_seqs) {
                        const auto& r = recs.at(seq);
                        const auto& ids = dataset_->exercise(r.exercise).concept_ids;
                        if (std::find(ids.begin(), ids.end(), c) == ids.end()) continue;
                        ++total;
                        correct += r.correct ? 1 : 0;
                    }
                    out.text += c.value + ": " + std::string(to_string(mastery_from_ratio(correct, total))) + "\n";
                }
                break;
            }
            case PromptKind::PP: {
                if (!ctx.target_seq) throw Error(ErrorKind::InvalidArgument, "oracle PP request without target");
                const bool label = history(ctx.student).records.at(*ctx.target_seq).correct;
                out.text = (label != invert_) ? "1" : "0";
                break;
            }
            default:
                out.text = boilerplate(request.prompt.template_id);
        }
        return out;
    }

    std::string id() const override { return invert_ ? "anti-oracle" : "oracle"; }

private:
    const StudentHistory& history(const StudentId& s) const {
        auto it = dataset_->histories.find(s);
        if (it == dataset_->histories.end()) throw Error(ErrorKind::InvalidArgument, "oracle: unknown student '" + s.value + "'");
        return it->second;
    }

    std::shared_ptr<const Dataset> dataset_;
    bool invert_;
};

class UnparseableProvider final : public Provider {
public:
    GenerationOutput complete(const GenerationRequest&) override {
        GenerationOutput out;
        out.text = "maybe";
        out.provider_id = id();
        return out;
    }
    std::string id() const override { return "unparseable"; }
};

}  // namespace

ProviderPtr make_mock_provider() { return std::make_shared<MockProvider>(); }

ProviderPtr make_oracle_provider(std::shared_ptr<const Dataset> dataset) {
    return std::make_shared<OracleProvider>(std::move(dataset), false);
}

ProviderPtr make_anti_oracle_provider(std::shared_ptr<const Dataset> dataset) {
    return std::make_shared<OracleProvider>(std::move(dataset), true);
}

ProviderPtr make_unparseable_provider() { return std::make_shared<UnparseableProvider>(); }

CountingProvider::CountingProvider(ProviderPtr inner) : inner_(std::move(inner)) {
    if (!inner_) throw Error(ErrorKind::InvalidArgument, "null provider");
}

GenerationOutput CountingProvider::complete(const GenerationRequest& request) {
    calls_.fetch_add(1);
    per_kind_[static_cast<std::size_t>(request.prompt.template_id)].fetch_add(1);
    return inner_->complete(request);
}

std::size_t CountingProvider::calls(PromptKind kind) const noexcept {
    return per_kind_[static_cast<std::size_t>(kind)].load();
}

void CountingProvider::reset() noexcept {
    calls_.store(0);
    for (auto& c : per_kind_) c.store(0);
}

BudgetedProvider::BudgetedProvider(ProviderPtr inner, std::int64_t max_tokens)
    : inner_(std::move(inner)), max_tokens_(max_tokens) {
    if (!inner_) throw Error(ErrorKind::InvalidArgument, "null provider");
}

GenerationOutput BudgetedProvider::complete(const GenerationRequest& request) {
    if (used_.load() > max_tokens_) {
        throw Error(ErrorKind::BudgetExceeded, "token budget of " + std::to_string(max_tokens_) + " already spent");
    }
    auto out = inner_->complete(request);
    std::int64_t spent = 0;
    if (out.usage) spent = out.usage->prompt + out.usage->completion;
    else spent = static_cast<std::int64_t>((request.prompt.text.size() + out.text.size() + 3) / 4);
    const auto total = used_.fetch_add(spent) + spent;
    if (total > max_tokens_) {
        throw Error(ErrorKind::BudgetExceeded, "cumulative tokens " + std::to_string(total) + " exceed budget of " +
                                                   std::to_string(max_tokens_));
    }
    return out;
}

GenerationOutput cached_complete(TranscriptCache& cache, Provider& provider, const GenerationRequest& request) {
    const auto key = TranscriptCache::cache_key(request.prompt, request.params);
    if (auto hit = cache.lookup(key)) return *hit;
    if (cache.mode() == CacheMode::Replay) {
        throw Error(ErrorKind::ReplayMiss, "no cached completion for " + std::string(to_string(request.prompt.template_id)) +
                                               " prompt " + request.prompt.digest.substr(0, 12));
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto out = provider.complete(request);
    if (out.latency_ms == 0) {
        out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    }

    TranscriptEntry entry;
    entry.key = key;
    entry.digest = request.prompt.digest;
    entry.template_id = request.prompt.template_id;
    entry.params = request.params;
    entry.output = out;
    entry.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::system_clock::now().time_since_epoch())
                             .count();
    if (!cache.store(entry)) {
        // Another worker stored the same key first; serve its entry so every
        // caller sees one answer per key.
        if (auto stored = cache.lookup(key)) return *stored;
    }
    return out;
}

CachedProvider::CachedProvider(ProviderPtr inner, std::shared_ptr<TranscriptCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {
    if (!cache_) throw Error(ErrorKind::InvalidArgument, "null cache");
}

namespace {
class NullProvider final : public Provider {
public:
    GenerationOutput complete(const GenerationRequest&) override {
        throw Error(ErrorKind::ProviderUnavailable, "no provider configured behind the cache");
    }
    std::string id() const override { return "none"; }
};
}  // namespace

GenerationOutput CachedProvider::complete(const GenerationRequest& request) {
    if (!inner_) {
        NullProvider none;
        return cached_complete(*cache_, none, request);
    }
    return cached_complete(*cache_, *inner_, request);
}

}  // namespace xfkt
