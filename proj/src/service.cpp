#include "divr/service.hpp"

#include <httplib.h>

#include "divr/error.hpp"
#include "divr/gateway.hpp"

namespace divr {

namespace {

nlohmann::json error_body(const std::string& kind, const std::string& message) {
    return {{"error", {{"kind", kind}, {"message", message}}}};
}

bool is_client_error(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ParseError:
        case ErrorKind::InvalidParameter:
        case ErrorKind::InvalidGroundTruth:
        case ErrorKind::InvalidWeights:
        case ErrorKind::InvalidScore:
        case ErrorKind::EmptyGroup:
        case ErrorKind::MissingRoleAnswer: return true;
        default: return false;
    }
}

}  // namespace

ScoreRequest score_request_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::ParseError, "request must be a JSON object");
    ScoreRequest r;
    try {
        r.completions = j.at("completions").get<std::vector<std::string>>();
        r.ground_truth = ground_truth_from_json(j.at("ground_truth"));
        if (j.contains("answer_format")) r.answer_format = answer_format_from_json(j["answer_format"]);
        if (j.contains("alphas")) {
            const auto& a = j["alphas"];
            if (a.is_array() && a.size() == 2) r.alphas = {a[0].get<double>(), a[1].get<double>()};
            else if (a.is_object()) r.alphas = {a.at("acc").get<double>(), a.at("div").get<double>()};
            else fail(ErrorKind::ParseError, "alphas must be [acc, div] or {acc, div}");
        }
        if (j.contains("diversity_scope")) r.diversity_scope = parse_diversity_scope(j["diversity_scope"].get<std::string>());
        if (j.contains("end_think")) r.end_think = j["end_think"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("bad score request: ") + e.what());
    }
    if (r.completions.empty()) fail(ErrorKind::EmptyGroup, "completions must not be empty");
    r.ground_truth.validate();
    r.alphas.validate();
    if (r.end_think.empty()) fail(ErrorKind::InvalidParameter, "end_think must not be empty");
    return r;
}

nlohmann::json to_json(const ScoreRequest& r) {
    return {{"completions", r.completions},
            {"ground_truth", to_json(r.ground_truth)},
            {"answer_format", to_json(r.answer_format)},
            {"alphas", {r.alphas.acc, r.alphas.div}},
            {"diversity_scope", std::string(to_string(r.diversity_scope))},
            {"end_think", r.end_think}};
}

nlohmann::json to_json(const ScoreResponse& r) {
    nlohmann::json breakdowns = nlohmann::json::array();
    for (const auto& b : r.breakdowns) breakdowns.push_back(to_json(b));
    return {{"breakdowns", breakdowns}, {"advantages", r.advantages}};
}

ScoreResponse serve_score(const ScoreRequest& request, const FunctionWordLexicon& lexicon) {
    if (request.completions.empty()) fail(ErrorKind::EmptyGroup, "completions must not be empty");
    request.answer_format.validate();
    const auto& truth = request.ground_truth;

    std::vector<std::string> roles;
    for (const auto& [role, _] : truth.per_role_answers) roles.push_back(role);

    std::vector<Completion> completions;
    std::vector<RewardBreakdown> rewards;
    for (const auto& text : request.completions) {
        CompletionResult parsed;
        parsed.full_text = text;
        split_think(text, "<think>", request.end_think, parsed.think_text, parsed.answer_text);

        Completion c{text, {}};
        double acc = 0.0;
        if (truth.mode == MergeMode::Divergent) {
            c.answers = extract_role_answers(text, roles, request.answer_format, request.end_think);
            RoleAnswers padded;
            for (const auto& r : roles) {
                const auto* a = find_answer(c.answers, r);
                padded.emplace_back(r, a ? *a : std::string());
            }
            acc = accuracy_reward(padded, truth);
        } else if (auto a = extract_answer(text, request.answer_format, request.end_think)) {
            c.answers.emplace_back("answer", *a);
            acc = accuracy_reward(c.answers, truth);
        }
        const auto report = score_or_zero(diversity_text(parsed, request.diversity_scope), lexicon, {});
        rewards.push_back(shaped_reward(acc, report.combined.value_or(0.0), request.alphas));
        completions.push_back(std::move(c));
    }
    RolloutGroup group(std::move(completions), std::move(rewards));
    return {group.rewards(), group.advantages()};
}

HttpReply handle_score(const std::string& body, const FunctionWordLexicon& lexicon) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) return {400, error_body("ParseError", "request body is not valid JSON").dump()};
    try {
        const auto request = score_request_from_json(j);
        return {200, to_json(serve_score(request, lexicon)).dump()};
    } catch (const Error& e) {
        return {is_client_error(e.kind()) ? 400 : 500, error_body(std::string(to_string(e.kind())), e.what()).dump()};
    } catch (const std::exception& e) {
        return {500, error_body("InternalError", e.what()).dump()};
    }
}

struct ScoreServer::Impl {
    httplib::Server server;
};

ScoreServer::ScoreServer() : impl_(std::make_unique<Impl>()) {
    impl_->server.Post("/v1/score", [](const httplib::Request& req, httplib::Response& res) {
        const auto reply = handle_score(req.body);
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    });
    impl_->server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });
}

ScoreServer::~ScoreServer() { stop(); }

int ScoreServer::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) fail(ErrorKind::IoError, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void ScoreServer::listen() {
    if (!impl_->server.listen_after_bind()) fail(ErrorKind::IoError, "server stopped with an error");
}

void ScoreServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

bool ScoreServer::running() const { return impl_->server.is_running(); }

}  // namespace divr
