#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace divr {

using Headers = std::vector<std::pair<std::string, std::string>>;

/// status 0 means no HTTP response at all (connection refused, timeout).
struct HttpResponse {
    int status = 0;
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    /// `path` is relative to the endpoint base, e.g. "/chat/completions".
    virtual HttpResponse post(const std::string& path, const std::string& body, const Headers& headers) = 0;
};

/// cpp-httplib client. `base_url` may carry a path prefix such as
/// "https://api.example.com/v1".
std::shared_ptr<Transport> make_http_transport(const std::string& base_url, std::chrono::milliseconds timeout);

/// Scripted in-process transport for tests. The handler receives the parsed
/// request body; counters record call volume and peak concurrency.
class MockTransport : public Transport {
public:
    using Handler = std::function<HttpResponse(const std::string& path, const nlohmann::json& body)>;

    explicit MockTransport(Handler handler);

    HttpResponse post(const std::string& path, const std::string& body, const Headers& headers) override;

    /// The next `n` calls return 503 without reaching the handler.
    void fail_next(int n) { failures_remaining_ = n; }
    void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

    int calls() const noexcept { return calls_; }
    int max_in_flight() const noexcept { return max_in_flight_; }
    std::vector<nlohmann::json> requests() const;
    Headers last_headers() const;

private:
    Handler handler_;
    std::atomic<int> failures_remaining_{0};
    std::atomic<int> calls_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::chrono::milliseconds latency_{0};
    mutable std::mutex mu_;
    std::vector<nlohmann::json> requests_;
    Headers last_headers_;
};

/// OpenAI-shaped response bodies for handlers.
HttpResponse chat_response(const std::string& content, const std::string& finish_reason = "stop");
HttpResponse embedding_response(const std::vector<std::vector<double>>& vectors);

}  // namespace divr
