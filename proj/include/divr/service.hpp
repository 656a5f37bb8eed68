#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "divr/answer.hpp"
#include "divr/eval.hpp"
#include "divr/reward.hpp"

namespace divr {

struct ScoreRequest {
    std::vector<std::string> completions;
    GroundTruth ground_truth;
    AnswerFormat answer_format;
    RewardWeights alphas;
    DiversityScope diversity_scope = DiversityScope::Full;
    std::string end_think = "</think>";
};

/// Accepts alphas as [acc, div] or {"acc": .., "div": ..}. Throws ParseError
/// (or the validation error of the offending field) on bad input.
ScoreRequest score_request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScoreRequest& r);

struct ScoreResponse {
    std::vector<RewardBreakdown> breakdowns;
    std::vector<double> advantages;
};

nlohmann::json to_json(const ScoreResponse& r);

/// Accuracy per completion against the ground truth, diversity over the
/// configured scope, shaped totals and group advantages. Pure: depends only
/// on the request and the lexicon.
ScoreResponse serve_score(const ScoreRequest& request, const FunctionWordLexicon& lexicon = FunctionWordLexicon::builtin());

struct HttpReply {
    int status = 200;
    std::string body;
};

/// Request body -> reply for POST /v1/score. 400 for malformed or invalid
/// requests, 500 for anything else.
HttpReply handle_score(const std::string& body, const FunctionWordLexicon& lexicon = FunctionWordLexicon::builtin());

class ScoreServer {
public:
    ScoreServer();
    ~ScoreServer();
    ScoreServer(const ScoreServer&) = delete;
    ScoreServer& operator=(const ScoreServer&) = delete;

    /// Binds host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace divr
