#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace divr {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Content-addressed response store. Entries live in memory and, when a
/// directory is configured, as one `<key>.json` file each holding
/// {"fingerprint": ..., <payload fields>}. The first stored value for a key wins.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path dir);

    /// Key for a fingerprint: SHA-256 of its canonical (sorted-key) dump.
    static std::string key_for(const nlohmann::json& fingerprint);

    std::optional<nlohmann::json> get(const std::string& key) const;
    void put(const std::string& key, const nlohmann::json& entry);

    const std::optional<std::filesystem::path>& dir() const noexcept { return dir_; }

private:
    std::optional<std::filesystem::path> dir_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::string, nlohmann::json> memory_;
};

}  // namespace divr
