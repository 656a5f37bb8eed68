#include "divr/transport.hpp"

#include <algorithm>
#include <thread>

#include <httplib.h>

#include "divr/error.hpp"

namespace divr {

namespace {

class HttpTransport : public Transport {
public:
    HttpTransport(const std::string& base_url, std::chrono::milliseconds timeout) : timeout_(timeout) {
        const auto scheme_end = base_url.find("://");
        if (scheme_end == std::string::npos) fail(ErrorKind::InvalidParameter, "base URL needs a scheme: " + base_url);
        const auto path_start = base_url.find('/', scheme_end + 3);
        origin_ = base_url.substr(0, path_start);
        if (path_start != std::string::npos) prefix_ = base_url.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }

    HttpResponse post(const std::string& path, const std::string& body, const Headers& headers) override {
        // httplib::Client is not safe to share across threads; one per call.
        httplib::Client client(origin_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        httplib::Headers h;
        for (const auto& [k, v] : headers)
            if (k != "Content-Type") h.emplace(k, v);
        auto res = client.Post(prefix_ + path, h, body, "application/json");
        if (!res) return {0, httplib::to_string(res.error())};
        return {res->status, res->body};
    }

private:
    std::string origin_;
    std::string prefix_;
    std::chrono::milliseconds timeout_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(const std::string& base_url, std::chrono::milliseconds timeout) {
    return std::make_shared<HttpTransport>(base_url, timeout);
}

MockTransport::MockTransport(Handler handler) : handler_(std::move(handler)) {}

HttpResponse MockTransport::post(const std::string& path, const std::string& body, const Headers& headers) {
    ++calls_;
    const int now = ++in_flight_;
    int peak = max_in_flight_.load();
    while (now > peak && !max_in_flight_.compare_exchange_weak(peak, now)) {
    }
    struct Leave {
        std::atomic<int>& counter;
        ~Leave() { --counter; }
    } leave{in_flight_};

    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
    nlohmann::json parsed = nlohmann::json::parse(body, nullptr, false);
    {
        std::lock_guard lock(mu_);
        requests_.push_back(parsed);
        last_headers_ = headers;
    }
    int remaining = failures_remaining_.load();
    while (remaining > 0) {
        if (failures_remaining_.compare_exchange_weak(remaining, remaining - 1))
            return {503, R"({"error":{"message":"scripted failure"}})"};
    }
    return handler_(path, parsed);
}

std::vector<nlohmann::json> MockTransport::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

Headers MockTransport::last_headers() const {
    std::lock_guard lock(mu_);
    return last_headers_;
}

HttpResponse chat_response(const std::string& content, const std::string& finish_reason) {
    nlohmann::json j = {
        {"object", "chat.completion"},
        {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", finish_reason}}}},
    };
    return {200, j.dump()};
}

HttpResponse embedding_response(const std::vector<std::vector<double>>& vectors) {
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t i = 0; i < vectors.size(); ++i)
        data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", vectors[i]}});
    return {200, nlohmann::json{{"object", "list"}, {"data", data}}.dump()};
}

}  // namespace divr
