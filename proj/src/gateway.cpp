#include "divr/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "divr/error.hpp"
#include "divr/simulated.hpp"

namespace divr {

namespace {

bool is_transient(int status) noexcept { return status == 0 || status == 408 || status == 409 || status == 429 || status >= 500; }

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

std::string excerpt(const std::string& s) { return s.size() > 200 ? s.substr(0, 200) + "..." : s; }

}  // namespace

void EndpointConfig::validate() const {
    if (timeout.count() <= 0) fail(ErrorKind::InvalidParameter, "timeout must be positive");
    if (max_retries < 0) fail(ErrorKind::InvalidParameter, "max_retries must be >= 0");
    if (concurrency_limit < 1) fail(ErrorKind::InvalidParameter, "concurrency_limit must be >= 1");
    if (base_url.empty()) fail(ErrorKind::InvalidParameter, "base_url is empty");
    if (model_id.empty()) fail(ErrorKind::InvalidParameter, "model_id is empty");
}

EndpointConfig EndpointConfig::from_env(EndpointConfig base) {
    if (auto v = env_or_empty("DIVR_BASE_URL"); !v.empty()) base.base_url = v;
    if (auto v = env_or_empty("DIVR_API_KEY"); !v.empty()) base.api_key = v;
    if (auto v = env_or_empty("DIVR_CACHE_DIR"); !v.empty()) base.cache_dir = v;
    return base;
}

std::string_view to_string(DecodeMode mode) noexcept {
    switch (mode) {
        case DecodeMode::ZeroThink: return "zero_think";
        case DecodeMode::LessThink: return "less_think";
        case DecodeMode::RegularThink: return "regular_think";
        case DecodeMode::MoreThink: return "more_think";
    }
    return "regular_think";
}

DecodeMode parse_decode_mode(std::string_view s) {
    if (s == "zero_think" || s == "zerothink") return DecodeMode::ZeroThink;
    if (s == "less_think" || s == "lessthink") return DecodeMode::LessThink;
    if (s == "regular_think" || s == "regular") return DecodeMode::RegularThink;
    if (s == "more_think" || s == "morethink") return DecodeMode::MoreThink;
    fail(ErrorKind::ParseError, "unknown decode strategy '" + std::string(s) + "'");
}

void DecodeStrategy::validate() const {
    if (wait_count < 0) fail(ErrorKind::InvalidParameter, "wait_count must be >= 0");
    if (wait_count != 0 && mode != DecodeMode::MoreThink)
        fail(ErrorKind::InvalidParameter, "wait_count is only allowed with more_think");
    if (!(temperature >= 0.0)) fail(ErrorKind::InvalidParameter, "temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) fail(ErrorKind::InvalidParameter, "top_p must be in (0,1]");
    if (max_new_tokens < 1) fail(ErrorKind::InvalidParameter, "max_new_tokens must be >= 1");
    if (end_think.empty()) fail(ErrorKind::InvalidParameter, "end-of-thinking delimiter is empty");
}

std::string DecodeStrategy::assistant_prefix() const {
    switch (mode) {
        case DecodeMode::ZeroThink: return open_think + end_think;
        case DecodeMode::LessThink: return open_think + std::string(kLessThinkSentence) + end_think;
        case DecodeMode::RegularThink:
        case DecodeMode::MoreThink: return open_think;
    }
    return open_think;
}

std::string instantiate_continuation(std::string_view templ, std::string_view role) {
    static constexpr std::string_view kPlaceholder = "{role}";
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto hit = templ.find(kPlaceholder, pos);
        if (hit == std::string_view::npos) break;
        out.append(templ.substr(pos, hit - pos));
        out.append(role);
        pos = hit + kPlaceholder.size();
    }
    out.append(templ.substr(pos));
    return out;
}

void split_think(std::string_view full_text, std::string_view open_think, std::string_view end_think,
                 std::string& think, std::string& answer) {
    const auto delim = full_text.rfind(end_think);
    if (delim == std::string_view::npos) {
        think.clear();
        auto rest = full_text;
        if (!open_think.empty() && rest.substr(0, open_think.size()) == open_think) rest.remove_prefix(open_think.size());
        answer = std::string(rest);
        return;
    }
    auto head = full_text.substr(0, delim);
    if (!open_think.empty() && head.substr(0, open_think.size()) == open_think) head.remove_prefix(open_think.size());
    think = std::string(head);
    answer = std::string(full_text.substr(delim + end_think.size()));
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) fail(ErrorKind::InvalidParameter, "cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

Gateway::Gateway(EndpointConfig config, std::shared_ptr<Transport> transport)
    : Gateway(config, std::move(transport),
              config.cache_dir.empty() ? std::make_shared<ResponseCache>()
                                       : std::make_shared<ResponseCache>(config.cache_dir)) {}

Gateway::Gateway(EndpointConfig config, std::shared_ptr<Transport> transport, std::shared_ptr<ResponseCache> cache)
    : config_(std::move(config)), transport_(std::move(transport)), cache_(std::move(cache)) {
    config_.validate();
    if (!transport_) fail(ErrorKind::InvalidParameter, "gateway needs a transport");
    if (!cache_) cache_ = std::make_shared<ResponseCache>();
    slots_ = std::make_unique<std::counting_semaphore<>>(config_.concurrency_limit);
}

std::shared_ptr<Gateway> Gateway::from_config(const EndpointConfig& config) {
    std::shared_ptr<Transport> transport;
    if (config.base_url.rfind("mock://", 0) == 0) transport = std::make_shared<SimulatedTransport>();
    else transport = make_http_transport(config.base_url, config.timeout);
    return std::make_shared<Gateway>(config, std::move(transport));
}

nlohmann::json Gateway::send(const std::string& path, const nlohmann::json& body) {
    Headers headers{{"Content-Type", "application/json"}};
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    const std::string payload = body.dump();

    HttpResponse last;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = config_.backoff_base * (1LL << std::min(attempt - 1, 20));
            std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(delay, config_.backoff_max));
        }
        slots_->acquire();
        try {
            last = transport_->post(path, payload, headers);
        } catch (...) {
            slots_->release();
            throw;
        }
        slots_->release();

        if (last.status >= 200 && last.status < 300) {
            auto parsed = nlohmann::json::parse(last.body, nullptr, false);
            if (parsed.is_discarded()) fail(ErrorKind::ProtocolError, "response is not JSON: " + excerpt(last.body));
            return parsed;
        }
        if (!is_transient(last.status)) break;
    }
    fail(ErrorKind::TransportError,
         "POST " + path + " failed with status " + std::to_string(last.status) + ": " + excerpt(last.body));
}

Gateway::Reply Gateway::chat(const std::string& prompt, const std::string& assistant_prefix,
                             const DecodeStrategy& strategy) {
    nlohmann::json body = {
        {"model", config_.model_id},
        {"messages",
         {{{"role", "user"}, {"content", prompt}}, {{"role", "assistant"}, {"content", assistant_prefix}}}},
        {"temperature", strategy.temperature},
        {"top_p", strategy.top_p},
        {"max_tokens", strategy.max_new_tokens},
        {"continue_final_message", true},
        {"add_generation_prompt", false},
    };
    if (strategy.seed) body["seed"] = *strategy.seed;

    const nlohmann::json fingerprint = {{"kind", "chat"}, {"request", body}};
    const auto key = ResponseCache::key_for(fingerprint);
    if (auto hit = cache_->get(key); hit && hit->contains("response") && (*hit)["response"].is_string())
        return {(*hit)["response"].get<std::string>(), true};

    const auto response = send("/chat/completions", body);
    const auto* content = [&]() -> const nlohmann::json* {
        if (!response.contains("choices") || !response["choices"].is_array() || response["choices"].empty())
            return nullptr;
        const auto& choice = response["choices"][0];
        if (!choice.contains("message") || !choice["message"].contains("content")) return nullptr;
        return &choice["message"]["content"];
    }();
    if (!content || !content->is_string())
        fail(ErrorKind::ProtocolError, "chat response lacks choices[0].message.content");
    std::string text = content->get<std::string>();
    cache_->put(key, {{"fingerprint", fingerprint}, {"response", text}});
    return {std::move(text), false};
}

CompletionResult Gateway::complete(const std::string& prompt, const DecodeStrategy& strategy) {
    strategy.validate();
    if (prompt.empty()) fail(ErrorKind::InvalidParameter, "prompt is empty");
    if (strategy.mode == DecodeMode::MoreThink) return budget_forced_complete(prompt, {}, strategy);

    const auto prefix = strategy.assistant_prefix();
    auto reply = chat(prompt, prefix, strategy);
    CompletionResult result;
    result.full_text = prefix + reply.text;
    result.raw_segments.push_back(std::move(reply.text));
    result.cache_hit = reply.cache_hit;
    split_think(result.full_text, strategy.open_think, strategy.end_think, result.think_text, result.answer_text);
    return result;
}

CompletionResult Gateway::budget_forced_complete(const std::string& prompt, const std::vector<std::string>& roles,
                                                 const DecodeStrategy& strategy) {
    strategy.validate();
    if (strategy.mode != DecodeMode::MoreThink)
        fail(ErrorKind::InvalidParameter, "budget forcing requires the more_think strategy");
    if (prompt.empty()) fail(ErrorKind::InvalidParameter, "prompt is empty");
    if (!roles.empty() && roles.size() < static_cast<std::size_t>(strategy.wait_count))
        fail(ErrorKind::InvalidParameter, "role sequence shorter than wait_count");
    if (strategy.wait_count == 0) {
        auto regular = strategy;
        regular.mode = DecodeMode::RegularThink;
        return complete(prompt, regular);
    }

    CompletionResult result;
    result.cache_hit = true;
    std::string assistant = strategy.assistant_prefix();
    while (true) {
        auto reply = chat(prompt, assistant, strategy);
        result.cache_hit = result.cache_hit && reply.cache_hit;
        const auto delim = reply.text.find(strategy.end_think);
        if (delim == std::string::npos) {
            fail(ErrorKind::BudgetExceeded, "no end-of-thinking delimiter within " +
                                                std::to_string(strategy.max_new_tokens) + " tokens (segment " +
                                                std::to_string(result.raw_segments.size() + 1) + ")");
        }
        result.raw_segments.push_back(reply.text);
        if (result.injected_continuations >= strategy.wait_count) {
            assistant += reply.text;
            break;
        }
        const auto next = static_cast<std::size_t>(result.injected_continuations);
        const auto continuation = roles.empty() ? strategy.bare_continuation
                                                : instantiate_continuation(strategy.continuation_template, roles[next]);
        assistant += reply.text.substr(0, delim);
        assistant += '\n';
        assistant += continuation;
        ++result.injected_continuations;
    }
    result.full_text = std::move(assistant);
    split_think(result.full_text, strategy.open_think, strategy.end_think, result.think_text, result.answer_text);
    return result;
}

std::vector<std::vector<double>> Gateway::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) fail(ErrorKind::InvalidParameter, "embed needs at least one text");
    const std::string model = config_.embedding_model.empty() ? config_.model_id : config_.embedding_model;

    std::vector<std::vector<double>> out(texts.size());
    std::vector<std::string> keys(texts.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = ResponseCache::key_for({{"kind", "embedding"}, {"model", model}, {"input", texts[i]}});
        if (auto hit = cache_->get(keys[i]); hit && hit->contains("embedding")) {
            out[i] = (*hit)["embedding"].get<std::vector<double>>();
        } else {
            missing.push_back(i);
        }
    }
    if (!missing.empty()) {
        nlohmann::json input = nlohmann::json::array();
        for (auto i : missing) input.push_back(texts[i]);
        const auto response = send("/embeddings", {{"model", model}, {"input", input}});
        if (!response.contains("data") || !response["data"].is_array() || response["data"].size() != missing.size())
            fail(ErrorKind::ProtocolError, "embedding response has wrong number of items");
        for (std::size_t j = 0; j < missing.size(); ++j) {
            const auto& item = response["data"][j];
            const std::size_t slot = item.contains("index") && item["index"].is_number_unsigned()
                                         ? item["index"].get<std::size_t>()
                                         : j;
            if (slot >= missing.size() || !item.contains("embedding") || !item["embedding"].is_array())
                fail(ErrorKind::ProtocolError, "malformed embedding item");
            std::vector<double> vec;
            try {
                vec = item["embedding"].get<std::vector<double>>();
            } catch (const nlohmann::json::exception&) {
                fail(ErrorKind::ProtocolError, "embedding is not a numeric array");
            }
            const auto i = missing[slot];
            cache_->put(keys[i], {{"fingerprint", {{"kind", "embedding"}, {"model", model}, {"input", texts[i]}}},
                                  {"embedding", vec}});
            out[i] = std::move(vec);
        }
    }
    for (const auto& v : out) {
        if (v.empty() || v.size() != out.front().size()) fail(ErrorKind::ProtocolError, "inconsistent embedding dimension");
    }
    return out;
}

}  // namespace divr
