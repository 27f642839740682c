#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "xfkt/ingestion.hpp"
#include "xfkt/types.hpp"

namespace fixtures {

inline std::filesystem::path source_dir() { return XFKT_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "tests" / "data"; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "xfkt") {
        static std::atomic<unsigned> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::shared_ptr<const xfkt::Dataset> mini_frcsub() {
    return std::make_shared<const xfkt::Dataset>(xfkt::load_frcsub_dir(data_dir() / "frcsub_mini"));
}

inline std::shared_ptr<const xfkt::Dataset> small_log() {
    return std::make_shared<const xfkt::Dataset>(xfkt::load_interaction_log(data_dir() / "log_small.jsonl"));
}

inline const xfkt::StudentHistory& history(const xfkt::Dataset& ds, const std::string& student) {
    return ds.histories.at(xfkt::StudentId{student});
}

}  // namespace fixtures
