#include "divr/cache.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "divr/error.hpp"

namespace divr {

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorKind::IoError, "SHA-256 failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) fail(ErrorKind::IoError, "cannot create cache dir " + dir_->string() + ": " + ec.message());
}

std::string ResponseCache::key_for(const nlohmann::json& fingerprint) { return sha256_hex(fingerprint.dump()); }

std::optional<nlohmann::json> ResponseCache::get(const std::string& key) const {
    std::lock_guard lock(mu_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    if (!dir_) return std::nullopt;
    std::ifstream in(*dir_ / (key + ".json"), std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    auto entry = nlohmann::json::parse(ss.str(), nullptr, false);
    if (entry.is_discarded() || !entry.is_object()) return std::nullopt;
    memory_.emplace(key, entry);
    return entry;
}

void ResponseCache::put(const std::string& key, const nlohmann::json& entry) {
    std::lock_guard lock(mu_);
    if (!memory_.emplace(key, entry).second) return;
    if (!dir_) return;
    const auto final_path = *dir_ / (key + ".json");
    if (std::filesystem::exists(final_path)) return;
    const auto tmp = *dir_ / (key + ".json.tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::IoError, "cannot write cache entry " + tmp.string());
        out << entry.dump(2) << '\n';
    }
    std::error_code ec;
    std::filesystem::rename(tmp, final_path, ec);
    if (ec) fail(ErrorKind::IoError, "cannot publish cache entry: " + ec.message());
}

}  // namespace divr
