#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <thread>

#include "divr/cache.hpp"
#include "divr/error.hpp"
#include "divr/gateway.hpp"
#include "divr/simulated.hpp"

using namespace divr;

namespace {

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected divr::Error");
    return ErrorKind::IoError;
}

std::size_t count(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto at = hay.find(needle); at != std::string_view::npos; at = hay.find(needle, at + 1)) ++n;
    return n;
}

EndpointConfig fast_config() {
    EndpointConfig c;
    c.base_url = "http://unused";
    c.backoff_base = std::chrono::milliseconds(1);
    c.backoff_max = std::chrono::milliseconds(2);
    return c;
}

std::string assistant_of(const nlohmann::json& body) { return body["messages"][1]["content"].get<std::string>(); }

/// Always thinks one line and closes the think block.
std::shared_ptr<MockTransport> scripted() {
    return std::make_shared<MockTransport>([](const std::string& path, const nlohmann::json& body) {
        if (path == "/embeddings") return embedding_response({{1, 0}});
        const auto prefix = assistant_of(body);
        return chat_response("step " + std::to_string(prefix.size()) + "\n</think>\n\nFinal answer: **B**");
    });
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("assistant prefixes per strategy") {
    CHECK(DecodeStrategy::zero_think().assistant_prefix() == "<think></think>");
    CHECK(DecodeStrategy::less_think().assistant_prefix() ==
          "<think>Okay, the user ask for this, I can answer it without thinking much.</think>");
    CHECK(DecodeStrategy::regular_think().assistant_prefix() == "<think>");
    CHECK(DecodeStrategy::more_think().assistant_prefix() == "<think>");
    CHECK(DecodeStrategy::more_think().wait_count == 3);
    CHECK(parse_decode_mode("zerothink") == DecodeMode::ZeroThink);
    CHECK(parse_decode_mode("morethink") == DecodeMode::MoreThink);
    CHECK(kind_of([] { parse_decode_mode("deepthink"); }) == ErrorKind::ParseError);
    auto bad = DecodeStrategy::regular_think();
    bad.wait_count = 2;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("zero_think sends the exact prefix and has empty thinking") {
    auto t = scripted();
    Gateway g(fast_config(), t);
    const auto r = g.complete("Q?", DecodeStrategy::zero_think());
    REQUIRE(t->requests().size() == 1);
    const auto req = t->requests()[0];
    CHECK(assistant_of(req) == "<think></think>");
    CHECK(req["continue_final_message"] == true);
    CHECK(req["add_generation_prompt"] == false);
    CHECK(req["messages"][0]["content"] == "Q?");
    CHECK(r.full_text.rfind("<think></think>", 0) == 0);
    CHECK(r.injected_continuations == 0);
}

TEST_CASE("request carries sampling parameters and key") {
    auto t = scripted();
    auto cfg = fast_config();
    cfg.api_key = "sk-test";
    cfg.model_id = "m1";
    Gateway g(cfg, t);
    auto s = DecodeStrategy::regular_think();
    s.temperature = 1.0;
    s.top_p = 0.5;
    s.max_new_tokens = 77;
    s.seed = 9;
    g.complete("Q", s);
    const auto req = t->requests().at(0);
    CHECK(req["model"] == "m1");
    CHECK(req["temperature"] == 1.0);
    CHECK(req["top_p"] == 0.5);
    CHECK(req["max_tokens"] == 77);
    CHECK(req["seed"] == 9);
    bool auth = false;
    for (const auto& [k, v] : t->last_headers()) auth = auth || (k == "Authorization" && v == "Bearer sk-test");
    CHECK(auth);
}

TEST_CASE("identical calls hit the cache") {
    auto t = scripted();
    Gateway g(fast_config(), t);
    const auto a = g.complete("same prompt", DecodeStrategy::regular_think());
    const auto b = g.complete("same prompt", DecodeStrategy::regular_think());
    CHECK_FALSE(a.cache_hit);
    CHECK(b.cache_hit);
    CHECK(a.full_text == b.full_text);
    CHECK(t->calls() == 1);
    auto seeded = DecodeStrategy::regular_think();
    seeded.seed = 1;
    CHECK_FALSE(g.complete("same prompt", seeded).cache_hit);
    CHECK(t->calls() == 2);
}

TEST_CASE("disk cache replays without the network") {
    const auto dir = fresh_dir("divr_gateway_cache");
    auto cfg = fast_config();
    cfg.cache_dir = dir.string();
    std::string first;
    {
        Gateway g(cfg, scripted());
        first = g.complete("replay me", DecodeStrategy::more_think(2)).full_text;
    }
    auto dead = std::make_shared<MockTransport>([](const std::string&, const nlohmann::json&) {
        return HttpResponse{500, "down"};
    });
    cfg.max_retries = 0;
    Gateway offline(cfg, dead);
    const auto again = offline.complete("replay me", DecodeStrategy::more_think(2));
    CHECK(again.full_text == first);
    CHECK(again.cache_hit);
    CHECK(dead->calls() == 0);
    CHECK(kind_of([&] { offline.complete("not cached", DecodeStrategy::regular_think()); }) == ErrorKind::TransportError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cache keys and storage") {
    const auto a = ResponseCache::key_for({{"x", 1}, {"y", 2}});
    const auto b = ResponseCache::key_for(nlohmann::json::parse(R"({"y":2,"x":1})"));
    CHECK(a == b);
    CHECK(a.size() == 64);
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    ResponseCache mem;
    mem.put("k", {{"v", 1}});
    mem.put("k", {{"v", 2}});
    CHECK((*mem.get("k"))["v"] == 1);
    CHECK_FALSE(mem.get("other").has_value());
}

TEST_CASE("transient failures are retried") {
    auto t = scripted();
    auto cfg = fast_config();
    cfg.max_retries = 3;
    Gateway g(cfg, t);
    t->fail_next(3);
    CHECK_NOTHROW(g.complete("retry", DecodeStrategy::regular_think()));
    CHECK(t->calls() == 4);

    auto t2 = scripted();
    Gateway g2(cfg, t2);
    t2->fail_next(4);
    CHECK(kind_of([&] { g2.complete("retry", DecodeStrategy::regular_think()); }) == ErrorKind::TransportError);
    CHECK(t2->calls() == 4);
}

TEST_CASE("client errors are not retried; bad bodies are protocol errors") {
    auto t = std::make_shared<MockTransport>([](const std::string&, const nlohmann::json&) {
        return HttpResponse{400, R"({"error":"bad"})"};
    });
    Gateway g(fast_config(), t);
    CHECK(kind_of([&] { g.complete("x", DecodeStrategy::regular_think()); }) == ErrorKind::TransportError);
    CHECK(t->calls() == 1);

    auto junk = std::make_shared<MockTransport>([](const std::string&, const nlohmann::json&) {
        return HttpResponse{200, "<html>"};
    });
    Gateway g2(fast_config(), junk);
    CHECK(kind_of([&] { g2.complete("x", DecodeStrategy::regular_think()); }) == ErrorKind::ProtocolError);

    auto empty = std::make_shared<MockTransport>([](const std::string&, const nlohmann::json&) {
        return HttpResponse{200, R"({"choices":[]})"};
    });
    Gateway g3(fast_config(), empty);
    CHECK(kind_of([&] { g3.complete("x", DecodeStrategy::regular_think()); }) == ErrorKind::ProtocolError);
}

TEST_CASE("budget forcing injects exactly wait_count continuations") {
    auto t = scripted();
    Gateway g(fast_config(), t);
    const auto r = g.budget_forced_complete("Q", {}, DecodeStrategy::more_think(3));
    CHECK(r.injected_continuations == 3);
    CHECK(count(r.full_text, "</think>") == 1);
    CHECK(count(r.full_text, "Wait, ") == 3);
    CHECK(r.raw_segments.size() == 4);
    CHECK(t->calls() == 4);
    CHECK(r.answer_text.find("**B**") != std::string::npos);
    // Each request continues from the text built so far.
    const auto reqs = t->requests();
    for (std::size_t i = 1; i < reqs.size(); ++i)
        CHECK(assistant_of(reqs[i]).rfind(assistant_of(reqs[i - 1]), 0) == 0);
}

TEST_CASE("role continuations name roles in order") {
    auto t = scripted();
    Gateway g(fast_config(), t);
    const auto r = g.budget_forced_complete("Q", {"educator", "parent"}, DecodeStrategy::more_think(2));
    const auto e = r.full_text.find("Wait, I need to think from educator's perspective.\n");
    const auto p = r.full_text.find("Wait, I need to think from parent's perspective.\n");
    REQUIRE(e != std::string::npos);
    REQUIRE(p != std::string::npos);
    CHECK(e < p);
    CHECK(count(r.full_text, "</think>") == 1);
    CHECK(kind_of([&] { g.budget_forced_complete("Q", {"only"}, DecodeStrategy::more_think(2)); }) ==
          ErrorKind::InvalidParameter);
    CHECK(instantiate_continuation("{role}/{role}", "x") == "x/x");
}

TEST_CASE("wait_count 0 equals regular thinking byte for byte") {
    Gateway a(fast_config(), scripted());
    Gateway b(fast_config(), scripted());
    const auto forced = a.budget_forced_complete("Q0", {}, DecodeStrategy::more_think(0));
    const auto regular = b.complete("Q0", DecodeStrategy::regular_think());
    CHECK(forced.full_text == regular.full_text);
    CHECK(forced.think_text == regular.think_text);
    CHECK(forced.answer_text == regular.answer_text);
    CHECK(forced.injected_continuations == 0);
}

TEST_CASE("missing delimiter exceeds the budget") {
    auto t = std::make_shared<MockTransport>([](const std::string&, const nlohmann::json&) {
        return chat_response("thinking forever", "length");
    });
    Gateway g(fast_config(), t);
    CHECK(kind_of([&] { g.budget_forced_complete("Q", {}, DecodeStrategy::more_think(1)); }) ==
          ErrorKind::BudgetExceeded);
}

TEST_CASE("split_think") {
    std::string think, answer;
    split_think("<think>abc</think>def", "<think>", "</think>", think, answer);
    CHECK(think == "abc");
    CHECK(answer == "def");
    split_think("plain", "<think>", "</think>", think, answer);
    CHECK(think.empty());
    CHECK(answer == "plain");
}

TEST_CASE("embeddings") {
    auto basis = std::make_shared<MockTransport>([](const std::string&, const nlohmann::json& body) {
        std::vector<std::vector<double>> out;
        for (const auto& t : body["input"]) {
            std::vector<double> v(4, 0.0);
            v[std::hash<std::string>{}(t.get<std::string>()) % 4] = 1.0;
            out.push_back(v);
        }
        return embedding_response(out);
    });
    Gateway g(fast_config(), basis);
    // Pick two texts that land on different axes.
    std::string other = "b";
    while (std::hash<std::string>{}(other) % 4 == std::hash<std::string>{}("a") % 4) other += "b";
    const auto v = g.embed({"a", other, "a"});
    CHECK(v[0] == v[2]);
    CHECK(cosine_similarity(v[0], v[0]) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity(v[0], v[1]) == 0.0);
    const int before = basis->calls();
    g.embed({"a"});
    CHECK(basis->calls() == before);
    CHECK(kind_of([&] { g.embed({}); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("concurrency limit bounds requests in flight") {
    auto t = scripted();
    t->set_latency(std::chrono::milliseconds(15));
    auto cfg = fast_config();
    cfg.concurrency_limit = 3;
    Gateway g(cfg, t);
    std::vector<std::thread> threads;
    for (int i = 0; i < 12; ++i)
        threads.emplace_back([&g, i] { g.complete("p" + std::to_string(i), DecodeStrategy::regular_think()); });
    for (auto& th : threads) th.join();
    CHECK(t->calls() == 12);
    CHECK(t->max_in_flight() <= 3);
    CHECK(t->max_in_flight() >= 1);
}

TEST_CASE("endpoint config from the environment") {
    ::setenv("DIVR_BASE_URL", "mock://env", 1);
    ::setenv("DIVR_API_KEY", "k-env", 1);
    ::setenv("DIVR_CACHE_DIR", "/tmp/divr-env-cache", 1);
    const auto c = EndpointConfig::from_env();
    CHECK(c.base_url == "mock://env");
    CHECK(c.api_key == "k-env");
    CHECK(c.cache_dir == "/tmp/divr-env-cache");
    ::unsetenv("DIVR_BASE_URL");
    ::unsetenv("DIVR_API_KEY");
    ::unsetenv("DIVR_CACHE_DIR");
    auto bad = EndpointConfig{};
    bad.concurrency_limit = 0;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("simulated model") {
    SimulatedTransport sim;
    auto post = [&](const std::string& prompt, std::uint64_t seed) {
        nlohmann::json body = {{"model", "m"},
                               {"messages", {{{"role", "user"}, {"content", prompt}}, {{"role", "assistant"}, {"content", "<think>"}}}},
                               {"seed", seed}};
        const auto res = sim.post("/chat/completions", body.dump(), {});
        REQUIRE(res.status == 200);
        return nlohmann::json::parse(res.body)["choices"][0]["message"]["content"].get<std::string>();
    };
    const auto roles = post("Please generate 2-5 role perspective ...\nInput: Question: why?\n\nOutput:", 0);
    CHECK(roles.front() == '[');
    CHECK(roles.back() == ']');
    const auto a = post("Question? Your answer should be in the format **X. answer** where X is \"A\", \"B\", or \"C\".", 1);
    CHECK(a == post("Question? Your answer should be in the format **X. answer** where X is \"A\", \"B\", or \"C\".", 1));
    CHECK(count(a, "</think>") == 1);
    CHECK(a.find("**") != std::string::npos);
    const auto v = SimulatedTransport::embed_text("hello world");
    CHECK(v.size() == SimulatedTransport::kEmbeddingDim);
    CHECK(cosine_similarity(v, SimulatedTransport::embed_text("Hello, world!")) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("http transport against a local server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (hits++ == 0) {
            res.status = 503;
            return;
        }
        const auto body = nlohmann::json::parse(req.body);
        const auto reply = chat_response("echo " + body["messages"][0]["content"].get<std::string>() + "</think>ok");
        res.set_content(reply.body, "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto cfg = fast_config();
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    Gateway g(cfg, make_http_transport(cfg.base_url, cfg.timeout));
    const auto r = g.complete("ping", DecodeStrategy::regular_think());
    CHECK(r.think_text == "echo ping");
    CHECK(r.answer_text == "ok");
    CHECK(hits == 2);

    server.stop();
    th.join();

    cfg.max_retries = 0;
    Gateway down(cfg, make_http_transport(cfg.base_url, std::chrono::milliseconds(500)));
    CHECK(kind_of([&] { down.complete("ping", DecodeStrategy::regular_think()); }) == ErrorKind::TransportError);
}
