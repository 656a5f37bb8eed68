#include "divr/reward.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "divr/error.hpp"

namespace divr {

std::string_view to_string(MergeMode mode) noexcept {
    return mode == MergeMode::Divergent ? "divergent" : "convergent";
}

MergeMode parse_merge_mode(std::string_view s) {
    if (s == "divergent") return MergeMode::Divergent;
    if (s == "convergent") return MergeMode::Convergent;
    fail(ErrorKind::ParseError, "unknown merge mode '" + std::string(s) + "'");
}

const std::string* find_answer(const RoleAnswers& answers, std::string_view role) noexcept {
    for (const auto& [r, a] : answers)
        if (r == role) return &a;
    return nullptr;
}

GroundTruth GroundTruth::convergent(std::string answer) {
    GroundTruth t;
    t.mode = MergeMode::Convergent;
    t.scalar_answer = std::move(answer);
    t.validate();
    return t;
}

GroundTruth GroundTruth::divergent(RoleAnswers per_role) {
    GroundTruth t;
    t.mode = MergeMode::Divergent;
    t.per_role_answers = std::move(per_role);
    t.validate();
    return t;
}

void GroundTruth::validate() const {
    if (mode == MergeMode::Convergent) {
        if (!scalar_answer || scalar_answer->empty())
            fail(ErrorKind::InvalidGroundTruth, "convergent ground truth needs scalar_answer");
        return;
    }
    if (per_role_answers.empty()) fail(ErrorKind::InvalidGroundTruth, "divergent ground truth needs per-role answers");
    std::unordered_set<std::string> seen;
    for (const auto& [role, answer] : per_role_answers) {
        if (role.empty() || answer.empty()) fail(ErrorKind::InvalidGroundTruth, "empty role or answer in ground truth");
        if (!seen.insert(role).second) fail(ErrorKind::InvalidGroundTruth, "duplicate role '" + role + "'");
    }
}

nlohmann::json to_json(const GroundTruth& truth) {
    nlohmann::json j;
    j["mode"] = std::string(to_string(truth.mode));
    if (truth.mode == MergeMode::Convergent) {
        j["scalar_answer"] = truth.scalar_answer.value_or("");
    } else {
        nlohmann::json roles = nlohmann::json::array();
        for (const auto& [r, a] : truth.per_role_answers) roles.push_back({r, a});
        j["per_role_answers"] = roles;
    }
    return j;
}

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::ParseError, "ground_truth must be an object");
    GroundTruth t;
    try {
        t.mode = parse_merge_mode(j.at("mode").get<std::string>());
        if (j.contains("scalar_answer") && !j["scalar_answer"].is_null())
            t.scalar_answer = j["scalar_answer"].get<std::string>();
        if (j.contains("per_role_answers")) {
            const auto& p = j["per_role_answers"];
            // Objects lose key order in nlohmann::json; [[role, answer], ...] keeps it.
            if (p.is_object()) {
                for (const auto& [k, v] : p.items()) t.per_role_answers.emplace_back(k, v.get<std::string>());
            } else if (p.is_array()) {
                for (const auto& pair : p)
                    t.per_role_answers.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
            } else if (!p.is_null()) {
                fail(ErrorKind::ParseError, "per_role_answers must be an object or a list of pairs");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("ground_truth: ") + e.what());
    }
    t.validate();
    return t;
}

std::size_t majority_index(std::span<const std::string> values) {
    if (values.empty()) fail(ErrorKind::EmptyGroup, "majority vote over an empty group");
    std::unordered_map<std::string_view, std::pair<std::size_t, std::size_t>> tally;  // value -> (count, first)
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto [it, inserted] = tally.try_emplace(values[i], 0, i);
        ++it->second.first;
    }
    std::size_t best_count = 0;
    std::size_t best_first = 0;
    for (const auto& [_, cf] : tally) {
        if (cf.first > best_count || (cf.first == best_count && cf.second < best_first)) {
            best_count = cf.first;
            best_first = cf.second;
        }
    }
    return best_first;
}

double accuracy_reward(const RoleAnswers& answers, const GroundTruth& truth) {
    truth.validate();
    if (answers.empty()) fail(ErrorKind::EmptyGroup, "no role answers");
    if (truth.mode == MergeMode::Divergent) {
        std::size_t correct = 0;
        for (const auto& [role, expected] : truth.per_role_answers) {
            const auto* got = find_answer(answers, role);
            if (!got) fail(ErrorKind::MissingRoleAnswer, "no answer for role '" + role + "'");
            if (*got == expected) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(truth.per_role_answers.size());
    }
    std::vector<std::string> values;
    values.reserve(answers.size());
    for (const auto& [_, a] : answers) values.push_back(a);
    return values[majority_index(values)] == *truth.scalar_answer ? 1.0 : 0.0;
}

void RewardWeights::validate() const {
    if (!std::isfinite(acc) || !std::isfinite(div) || acc < 0.0 || div < 0.0 || std::abs(acc + div - 1.0) > 1e-9)
        fail(ErrorKind::InvalidScore, "reward weights must be non-negative and sum to 1");
}

RewardBreakdown shaped_reward(double r_acc, double r_div, const RewardWeights& weights) {
    weights.validate();
    auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!in_unit(r_acc) || !in_unit(r_div)) fail(ErrorKind::InvalidScore, "reward components must lie in [0,1]");
    RewardBreakdown b;
    b.r_acc = r_acc;
    b.r_div = r_div;
    b.alpha_acc = weights.acc;
    b.alpha_div = weights.div;
    b.r_total = weights.acc * r_acc + weights.div * r_div;
    return b;
}

nlohmann::json to_json(const RewardBreakdown& b) {
    return {{"acc", b.r_acc}, {"div", b.r_div}, {"total", b.r_total}};
}

std::vector<double> group_advantages(std::span<const double> rewards, double sigma_floor) {
    if (rewards.empty()) fail(ErrorKind::EmptyGroup, "advantages of an empty group");
    const double n = static_cast<double>(rewards.size());
    double mu = 0.0;
    for (double r : rewards) mu += r;
    mu /= n;
    double ss = 0.0;
    for (double r : rewards) ss += (r - mu) * (r - mu);
    const double sigma = std::sqrt(ss / n);
    std::vector<double> out(rewards.size(), 0.0);
    if (!(sigma > sigma_floor)) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mu) / sigma;
    return out;
}

RolloutGroup::RolloutGroup(std::vector<Completion> completions, std::vector<RewardBreakdown> rewards,
                           double sigma_floor)
    : completions_(std::move(completions)), rewards_(std::move(rewards)) {
    if (completions_.empty()) fail(ErrorKind::EmptyGroup, "rollout group needs at least one completion");
    if (completions_.size() != rewards_.size())
        fail(ErrorKind::InvalidParameter, "completion and reward counts differ");
    std::vector<double> totals;
    totals.reserve(rewards_.size());
    for (const auto& r : rewards_) totals.push_back(r.r_total);
    advantages_ = group_advantages(totals, sigma_floor);
}

nlohmann::json RolloutGroup::to_json() const {
    nlohmann::json breakdowns = nlohmann::json::array();
    for (const auto& r : rewards_) breakdowns.push_back(divr::to_json(r));
    return {{"breakdowns", breakdowns}, {"advantages", advantages_}};
}

}  // namespace divr
