#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "divr/cache.hpp"
#include "divr/transport.hpp"

namespace divr {

struct EndpointConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    std::string model_id = "deepseek-r1-distill-qwen-7b";
    /// Model used by embed(); empty means model_id.
    std::string embedding_model;
    std::chrono::milliseconds timeout{120'000};
    int max_retries = 3;
    int concurrency_limit = 8;
    /// Delay before retry n (0-based) is backoff_base * 2^n, capped at backoff_max.
    std::chrono::milliseconds backoff_base{500};
    std::chrono::milliseconds backoff_max{30'000};
    std::string cache_dir;

    void validate() const;
    /// Overrides base_url, api_key and cache_dir from DIVR_BASE_URL,
    /// DIVR_API_KEY and DIVR_CACHE_DIR when those are set.
    static EndpointConfig from_env(EndpointConfig base);
    static EndpointConfig from_env() { return from_env(EndpointConfig()); }
};

enum class DecodeMode { ZeroThink, LessThink, RegularThink, MoreThink };

std::string_view to_string(DecodeMode mode) noexcept;
/// Accepts zero_think/zerothink, less_think/lessthink, regular_think/regular, more_think/morethink.
DecodeMode parse_decode_mode(std::string_view s);

inline constexpr std::string_view kLessThinkSentence =
    "Okay, the user ask for this, I can answer it without thinking much.";
inline constexpr std::string_view kRoleContinuation = "Wait, I need to think from {role}'s perspective.\n";
inline constexpr std::string_view kBareContinuation = "Wait, ";

struct DecodeStrategy {
    DecodeMode mode = DecodeMode::RegularThink;
    /// Forced continuations; only meaningful for MoreThink.
    int wait_count = 0;
    /// Instantiated with the next role when a role sequence is given.
    std::string continuation_template = std::string(kRoleContinuation);
    /// Used when no role sequence is given.
    std::string bare_continuation = std::string(kBareContinuation);
    double temperature = 0.7;
    double top_p = 0.95;
    int max_new_tokens = 4096;
    std::optional<std::uint64_t> seed = std::nullopt;
    std::string open_think = "<think>";
    std::string end_think = "</think>";

    static DecodeStrategy zero_think() { return {.mode = DecodeMode::ZeroThink}; }
    static DecodeStrategy less_think() { return {.mode = DecodeMode::LessThink}; }
    static DecodeStrategy regular_think() { return {}; }
    static DecodeStrategy more_think(int waits = 3) { return {.mode = DecodeMode::MoreThink, .wait_count = waits}; }

    void validate() const;
    /// Text placed at the start of the assistant turn before generation.
    std::string assistant_prefix() const;
};

/// Replaces every "{role}" in the template.
std::string instantiate_continuation(std::string_view templ, std::string_view role);

struct CompletionResult {
    std::string think_text;
    std::string answer_text;
    int injected_continuations = 0;
    /// Model output of each request, in order.
    std::vector<std::string> raw_segments;
    bool cache_hit = false;
    /// Assistant turn as the model saw it: prefix, generated text and injections.
    std::string full_text;
};

/// Splits an assistant turn at the last end-of-thinking delimiter. Without a
/// delimiter everything is answer text.
void split_think(std::string_view full_text, std::string_view open_think, std::string_view end_think,
                 std::string& think, std::string& answer);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Client for OpenAI-compatible chat-completions and embeddings endpoints.
/// Shareable across threads: at most `concurrency_limit` requests are in
/// flight, and cache writes are serialized.
class Gateway {
public:
    Gateway(EndpointConfig config, std::shared_ptr<Transport> transport);
    Gateway(EndpointConfig config, std::shared_ptr<Transport> transport, std::shared_ptr<ResponseCache> cache);

    /// Transport from the base URL: "mock://..." selects the built-in
    /// simulated model, anything else HTTP.
    static std::shared_ptr<Gateway> from_config(const EndpointConfig& config);

    CompletionResult complete(const std::string& prompt, const DecodeStrategy& strategy);

    /// Extends thinking by suppressing the end delimiter `wait_count` times,
    /// each time appending the continuation for the next role (or the bare
    /// continuation when `roles` is empty) and re-requesting.
    CompletionResult budget_forced_complete(const std::string& prompt, const std::vector<std::string>& roles,
                                            const DecodeStrategy& strategy);

    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts);

    const EndpointConfig& config() const noexcept { return config_; }
    const ResponseCache& cache() const noexcept { return *cache_; }

private:
    struct Reply {
        std::string text;
        bool cache_hit = false;
    };

    Reply chat(const std::string& prompt, const std::string& assistant_prefix, const DecodeStrategy& strategy);
    nlohmann::json send(const std::string& path, const nlohmann::json& body);

    EndpointConfig config_;
    std::shared_ptr<Transport> transport_;
    std::shared_ptr<ResponseCache> cache_;
    std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace divr
