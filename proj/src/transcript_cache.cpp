#include "xfkt/transcript_cache.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "xfkt/error.hpp"
#include "xfkt/hashing.hpp"

namespace xfkt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kTranscripts = "transcripts.jsonl";
constexpr const char* kIndex = "index.tsv";

json entry_to_json(const TranscriptEntry& e) {
    json j;
    j["key"] = e.key;
    j["digest"] = e.digest;
    j["template"] = std::string(to_string(e.template_id));
    j["params"] = json::parse(canonical_params(e.params));
    json out;
    out["text"] = e.output.text;
    out["provider_id"] = e.output.provider_id;
    out["latency_ms"] = e.output.latency_ms;
    out["soft_error"] = e.output.soft_error;
    if (e.output.usage) out["usage"] = {{"prompt", e.output.usage->prompt}, {"completion", e.output.usage->completion}};
    j["output"] = std::move(out);
    j["time_ms"] = e.wall_time_ms;
    return j;
}

TranscriptEntry entry_from_json(const json& j) {
    TranscriptEntry e;
    e.key = j.at("key").get<std::string>();
    e.digest = j.at("digest").get<std::string>();
    e.template_id = parse_prompt_kind(j.at("template").get<std::string>());
    const auto& p = j.at("params");
    e.params.attempt = p.at("attempt").get<int>();
    e.params.max_tokens = p.at("max_tokens").get<int>();
    e.params.model_id = p.at("model_id").get<std::string>();
    e.params.temperature = p.at("temperature").get<double>();
    const auto& o = j.at("output");
    e.output.text = o.at("text").get<std::string>();
    e.output.provider_id = o.at("provider_id").get<std::string>();
    e.output.latency_ms = o.at("latency_ms").get<std::int64_t>();
    e.output.soft_error = o.value("soft_error", false);
    if (o.contains("usage")) {
        e.output.usage = TokenUsage{o["usage"].at("prompt").get<std::int64_t>(), o["usage"].at("completion").get<std::int64_t>()};
    }
    e.wall_time_ms = j.value("time_ms", std::int64_t{0});
    return e;
}

}  // namespace

TranscriptCache::TranscriptCache(fs::path dir, CacheMode mode) : dir_(std::move(dir)), mode_(mode) {
    if (mode_ == CacheMode::Replay) {
        if (!fs::exists(dir_ / kTranscripts)) {
            throw Error(ErrorKind::Io, "replay cache '" + dir_.string() + "' has no " + kTranscripts);
        }
    } else {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create cache directory '" + dir_.string() + "': " + ec.message());
    }
    open_files();
}

std::string TranscriptCache::cache_key(const RenderedPrompt& prompt, const GenerationParams& params) {
    return sha256_hex(prompt.digest + "\n" + canonical_params(params));
}

void TranscriptCache::open_files() {
    const auto tpath = dir_ / kTranscripts;
    if (!fs::exists(tpath)) {
        std::ofstream(tpath, std::ios::app);
        std::ofstream(dir_ / kIndex, std::ios::trunc);
        return;
    }

    // A crash mid-append can leave a partial last line; terminate it so the
    // next append starts on a fresh line (the partial entry is ignored).
    const auto size = fs::file_size(tpath);
    if (size > 0 && mode_ == CacheMode::ReadWrite) {
        std::ifstream in(tpath, std::ios::binary);
        in.seekg(static_cast<std::streamoff>(size - 1));
        char last = '\n';
        in.get(last);
        if (last != '\n') std::ofstream(tpath, std::ios::app | std::ios::binary) << '\n';
    }

    bool index_ok = fs::exists(dir_ / kIndex);
    if (index_ok) {
        std::ifstream idx(dir_ / kIndex);
        std::string key;
        std::uint64_t offset = 0;
        const auto tsize = fs::file_size(tpath);
        while (idx >> key >> offset) {
            if (offset >= tsize) {
                index_ok = false;
                break;
            }
            offsets_[key] = offset;
        }
        if (index_ok) {
            // Pick up entries appended after the last indexed one.
            std::uint64_t resume = 0;
            for (const auto& [_, off] : offsets_) resume = std::max(resume, off);
            std::ifstream in(tpath, std::ios::binary);
            in.seekg(static_cast<std::streamoff>(resume));
            std::string line;
            if (!offsets_.empty()) std::getline(in, line);
            std::uint64_t pos = offsets_.empty() ? 0 : static_cast<std::uint64_t>(in.tellg());
            bool appended = false;
            while (in && std::getline(in, line)) {
                try {
                    auto j = json::parse(line);
                    const auto key2 = j.at("key").get<std::string>();
                    if (offsets_.emplace(key2, pos).second) appended = true;
                } catch (const std::exception&) {
                }
                pos += line.size() + 1;
            }
            if (appended && mode_ == CacheMode::ReadWrite) {
                std::ofstream idx_out(dir_ / kIndex, std::ios::trunc);
                for (const auto& [k, off] : offsets_) idx_out << k << '\t' << off << '\n';
            }
        }
    }
    if (!index_ok) rebuild_index();
}

void TranscriptCache::rebuild_index() {
    offsets_.clear();
    std::ifstream in(dir_ / kTranscripts, std::ios::binary);
    std::string line;
    std::uint64_t pos = 0;
    while (std::getline(in, line)) {
        try {
            auto j = json::parse(line);
            offsets_.emplace(j.at("key").get<std::string>(), pos);
        } catch (const std::exception&) {
            // partial or foreign line
        }
        pos += line.size() + 1;
    }
    if (mode_ == CacheMode::ReadWrite) {
        std::ofstream idx(dir_ / kIndex, std::ios::trunc);
        for (const auto& [k, off] : offsets_) idx << k << '\t' << off << '\n';
    }
}

std::optional<TranscriptEntry> TranscriptCache::read_at(std::uint64_t offset) const {
    std::ifstream in(dir_ / kTranscripts, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(offset));
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    try {
        return entry_from_json(json::parse(line));
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Io, "corrupt transcript entry at offset " + std::to_string(offset) + " in '" +
                                       (dir_ / kTranscripts).string() + "': " + e.what());
    }
}

std::optional<GenerationOutput> TranscriptCache::lookup(const std::string& key) const {
    std::shared_lock lock(mu_);
    auto it = offsets_.find(key);
    if (it == offsets_.end()) return std::nullopt;
    auto entry = read_at(it->second);
    if (!entry || entry->key != key) {
        throw Error(ErrorKind::Io, "transcript index points at the wrong entry for key " + key.substr(0, 12));
    }
    return entry->output;
}

bool TranscriptCache::store(const TranscriptEntry& entry) {
    if (mode_ == CacheMode::Replay) throw Error(ErrorKind::InvalidArgument, "cannot store into a replay cache");
    std::unique_lock lock(mu_);
    if (offsets_.contains(entry.key)) return false;

    const auto tpath = dir_ / kTranscripts;
    const std::uint64_t offset = fs::file_size(tpath);
    {
        std::ofstream out(tpath, std::ios::app | std::ios::binary);
        out << entry_to_json(entry).dump() << '\n';
        if (!out) throw Error(ErrorKind::Io, "failed to append to '" + tpath.string() + "'");
    }
    {
        std::ofstream idx(dir_ / kIndex, std::ios::app);
        idx << entry.key << '\t' << offset << '\n';
    }
    offsets_.emplace(entry.key, offset);
    return true;
}

std::size_t TranscriptCache::size() const {
    std::shared_lock lock(mu_);
    return offsets_.size();
}

std::vector<TranscriptEntry> TranscriptCache::entries() const {
    std::shared_lock lock(mu_);
    std::vector<std::pair<std::uint64_t, std::string>> order;
    for (const auto& [k, off] : offsets_) order.emplace_back(off, k);
    std::sort(order.begin(), order.end());
    std::vector<TranscriptEntry> out;
    for (const auto& [off, _] : order) {
        if (auto e = read_at(off)) out.push_back(std::move(*e));
    }
    return out;
}

}  // namespace xfkt
