#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace divr {

enum class MergeMode { Divergent, Convergent };

std::string_view to_string(MergeMode mode) noexcept;
MergeMode parse_merge_mode(std::string_view s);

/// Role name -> answer token, in insertion order.
using RoleAnswers = std::vector<std::pair<std::string, std::string>>;

const std::string* find_answer(const RoleAnswers& answers, std::string_view role) noexcept;

struct GroundTruth {
    MergeMode mode = MergeMode::Convergent;
    std::optional<std::string> scalar_answer;
    RoleAnswers per_role_answers;

    static GroundTruth convergent(std::string answer);
    static GroundTruth divergent(RoleAnswers per_role);

    /// Convergent needs a non-empty scalar answer; divergent a non-empty map
    /// with non-empty answers and unique roles. Throws InvalidGroundTruth.
    void validate() const;
};

nlohmann::json to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

/// Index of the representative of the most frequent value: the first
/// position holding it. Among tied values the one that occurs first wins.
/// Throws EmptyGroup for an empty span.
std::size_t majority_index(std::span<const std::string> values);

/// Divergent: mean over the truth's roles of [answer == role truth].
/// Convergent: majority vote over the answers (ties go to the earliest role),
/// then [vote == scalar answer].
double accuracy_reward(const RoleAnswers& answers, const GroundTruth& truth);

struct RewardWeights {
    double acc = 0.9;
    double div = 0.1;

    void validate() const;
};

struct RewardBreakdown {
    double r_acc = 0.0;
    double r_div = 0.0;
    double r_total = 0.0;
    double alpha_acc = 0.9;
    double alpha_div = 0.1;
};

/// r_total = alpha_acc * r_acc + alpha_div * r_div. Scores must be in [0,1]
/// and the weights a convex pair, otherwise InvalidScore.
RewardBreakdown shaped_reward(double r_acc, double r_div, const RewardWeights& weights = {});

nlohmann::json to_json(const RewardBreakdown& b);

inline constexpr double kDefaultSigmaFloor = 1e-12;

/// (r - mean) / population std. All zeros when std <= sigma_floor.
std::vector<double> group_advantages(std::span<const double> rewards, double sigma_floor = kDefaultSigmaFloor);

struct Completion {
    std::string text;
    RoleAnswers answers;
};

/// One prompt's rollouts, scored and normalized. Immutable once built.
class RolloutGroup {
public:
    RolloutGroup(std::vector<Completion> completions, std::vector<RewardBreakdown> rewards,
                 double sigma_floor = kDefaultSigmaFloor);

    std::size_t size() const noexcept { return completions_.size(); }
    const std::vector<Completion>& completions() const noexcept { return completions_; }
    const std::vector<RewardBreakdown>& rewards() const noexcept { return rewards_; }
    const std::vector<double>& advantages() const noexcept { return advantages_; }

    nlohmann::json to_json() const;

private:
    std::vector<Completion> completions_;
    std::vector<RewardBreakdown> rewards_;
    std::vector<double> advantages_;
};

}  // namespace divr
