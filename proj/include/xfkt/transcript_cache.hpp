#pragma once

// Persistent store of model completions keyed by SHA-256(prompt digest ||
// canonical params). On disk, one directory per experiment:
//   transcripts.jsonl  append-only, one self-describing entry per line
//   index.tsv          "<key>\t<byte offset>" per entry
// The index is rebuilt from the transcript file when missing or stale.
// Readers share a lock; writers are serialised and never store a key twice.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "xfkt/llm_client.hpp"

namespace xfkt {

enum class CacheMode { ReadWrite, Replay };

struct TranscriptEntry {
    std::string key;
    std::string digest;
    PromptKind template_id = PromptKind::KSA;
    GenerationParams params;
    GenerationOutput output;
    std::int64_t wall_time_ms = 0;  // epoch milliseconds when stored
};

class TranscriptCache {
public:
    TranscriptCache(std::filesystem::path dir, CacheMode mode);

    static std::string cache_key(const RenderedPrompt& prompt, const GenerationParams& params);

    CacheMode mode() const noexcept { return mode_; }
    const std::filesystem::path& dir() const noexcept { return dir_; }

    std::optional<GenerationOutput> lookup(const std::string& key) const;
    // Returns false when the key is already stored (the existing entry wins).
    bool store(const TranscriptEntry& entry);

    std::size_t size() const;
    std::vector<TranscriptEntry> entries() const;

private:
    void open_files();
    void rebuild_index();
    std::optional<TranscriptEntry> read_at(std::uint64_t offset) const;

    std::filesystem::path dir_;
    CacheMode mode_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::uint64_t> offsets_;
};

}  // namespace xfkt
