#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "divr/dataset.hpp"
#include "divr/gateway.hpp"
#include "divr/rng.hpp"

namespace divr {

struct RoleCandidate {
    std::string name;
    double relevance = 0.0;
    double mean_dissimilarity = 0.0;
    double selection_probability = 0.0;
};

struct ReasoningTrace {
    std::string role;
    std::string think_text;
    std::string answer;
    int sample_index = 0;
    double temperature = 1.0;
};

struct SftExample {
    std::string instruction;
    std::string input;
    std::string output;
    std::vector<std::string> ordering;
    MergeMode merge_mode = MergeMode::Convergent;
};

/// {instruction, input, output, ordering, merge_mode}
nlohmann::json to_json(const SftExample& e);

inline constexpr std::string_view kSftInstruction =
    "Please think from diverse perspectives to answer the question. "
    "Respond in the following format: <think>...</think>...";
inline constexpr std::string_view kFirstRoleOpener = "First, I should think from {role}'s perspective.\n";

// ---- role generation -------------------------------------------------------

struct RoleRange {
    std::size_t min = 2;
    std::size_t max = 4;
};

/// Few-shot prompt asking for a bracketed list of roles with conflicting views.
std::string role_generation_prompt(const DatasetRecord& record);

/// Items of the first [...] list in `text`, trimmed, quotes stripped.
/// nullopt when there is no bracketed, non-empty list.
std::optional<std::vector<std::string>> parse_role_list(std::string_view text);

/// Case-insensitive de-duplication keeping first spellings, then truncation
/// to `range.max`. nullopt when fewer than `range.min` remain.
std::optional<std::vector<std::string>> clamp_roles(std::vector<std::string> roles, RoleRange range);

/// Asks the model for roles, retrying up to `max_retries` times with the
/// next seed when the reply is unusable. Throws RoleParseError after that.
std::vector<RoleCandidate> generate_roles(const DatasetRecord& record, Gateway& gateway, RoleRange range = {},
                                          int max_retries = 2, std::uint64_t seed = 0);

// ---- role selection --------------------------------------------------------

inline constexpr double kDefaultLambda = 0.5;

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> scores);

/// relevance = cos(embed(role + question), embed(question));
/// mean_dissimilarity = mean over the other candidates of 1 - cos(role, other);
/// probability = softmax(relevance + lambda * mean_dissimilarity).
std::vector<RoleCandidate> score_role_selection(const std::string& question, std::vector<RoleCandidate> candidates,
                                                Gateway& gateway, double lambda = kDefaultLambda);

/// Draws `count` distinct candidates in proportion to their probabilities.
/// Returned in draw order.
std::vector<RoleCandidate> sample_roles(const std::vector<RoleCandidate>& scored, std::size_t count, Rng& rng);

// ---- path sampling and filtering ------------------------------------------

/// Prompt for one role's reasoning over the record.
std::string role_prompt(const DatasetRecord& record, const std::string& role);

struct PathSample {
    std::vector<ReasoningTrace> traces;
    int dropped = 0;  // completions without an extractable answer or think text
};

/// k completions at temperature 1.0 with seeds base_seed..base_seed+k-1.
/// Throws NoValidPaths when every completion is dropped.
PathSample sample_paths(const DatasetRecord& record, const std::string& role, Gateway& gateway, int k,
                        const DecodeStrategy& strategy, std::uint64_t base_seed = 0);

/// Earliest trace carrying the majority answer; ties go to the answer seen first.
ReasoningTrace self_consistency_filter(std::span<const ReasoningTrace> paths);

/// Earliest trace whose answer equals `expected`.
std::optional<ReasoningTrace> ground_truth_filter(std::span<const ReasoningTrace> paths, const std::string& expected);

// ---- merging and dataset filters ------------------------------------------

using FilteredTraces = std::vector<std::pair<std::string, ReasoningTrace>>;

/// `count` distinct role orderings (all of them when count >= m!), each
/// rendered into one example. Throws InsufficientRoles for fewer than 2 roles.
std::vector<SftExample> merge_traces(const DatasetRecord& record, const FilteredTraces& filtered, int count, Rng& rng,
                                     const std::string& end_think = "</think>");

/// Exactly one delimiter and every role of the ordering named.
bool valid_sft_format(const SftExample& example, const std::string& end_think = "</think>");

/// keep[i] is false when lengths[i] is strictly below the lower or strictly
/// above the upper percentile (nearest rank on index round(p * (n - 1))).
std::vector<bool> percentile_keep_mask(std::span<const std::size_t> lengths, double lower_pct, double upper_pct);

/// Length-percentile and format filter. Fewer than 3 examples pass through untouched.
std::vector<SftExample> filter_sft_dataset(const std::vector<SftExample>& examples, double lower_pct = 10.0,
                                           double upper_pct = 10.0, const std::string& end_think = "</think>");

// ---- end to end -------------------------------------------------------------

enum class PathFilter { SelfConsistency, GroundTruthHinted };

PathFilter parse_path_filter(std::string_view s);

struct PipelineOptions {
    std::uint64_t seed = 0;
    double lambda = kDefaultLambda;
    int samples_per_role = 5;
    int orderings = 1;
    PathFilter filter = PathFilter::SelfConsistency;
    RoleRange role_range;
    /// Generated roles kept per record after weighted selection.
    std::size_t roles_per_record = 3;
    double lower_pct = 10.0;
    double upper_pct = 10.0;
    int role_retries = 2;
    DecodeStrategy strategy = DecodeStrategy::regular_think();
};

struct PipelineStats {
    std::size_t records = 0;
    std::size_t skipped_records = 0;
    std::size_t merged_examples = 0;
    std::size_t kept_examples = 0;
    std::size_t dropped_paths = 0;
    std::vector<std::pair<std::string, std::string>> skip_reasons;  // id -> reason
};

struct PipelineResult {
    std::vector<SftExample> examples;
    PipelineStats stats;
};

/// Roles, paths, filtering, merging and dataset filters for every record.
/// Records are processed in parallel; output order follows input order and
/// is fully determined by the seed and the gateway's responses.
PipelineResult build_sft_dataset(std::span<const DatasetRecord> records, Gateway& gateway,
                                 const PipelineOptions& options);

}  // namespace divr
