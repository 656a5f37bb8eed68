#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "divr/answer.hpp"
#include "divr/dataset.hpp"
#include "divr/gateway.hpp"
#include "divr/stats.hpp"
#include "divr/text_diversity.hpp"

namespace divr {

enum class DiversityScope { Full, ThinkOnly };

std::string_view to_string(DiversityScope scope) noexcept;
DiversityScope parse_diversity_scope(std::string_view s);

/// Text scored for diversity: think and answer without the think tags, or
/// the think segment alone.
std::string diversity_text(const CompletionResult& completion, DiversityScope scope);

/// Full report, or an all-zero report (combined = norm = 0) for text with no tokens.
DiversityReport score_or_zero(std::string_view text, const FunctionWordLexicon& lexicon, const ScoringOptions& options);

struct RecordEvaluation {
    std::string id;
    RoleAnswers answers;
    double accuracy = 0.0;
    DiversityReport diversity;
    int injected_continuations = 0;
    bool answer_absent = false;
};

struct EvalResult {
    std::vector<RecordEvaluation> per_record;
    double aggregate_accuracy = 0.0;
    double aggregate_diversity = 0.0;
    /// Per-record accuracy vs combined diversity; absent when either side is constant.
    std::optional<double> pearson_acc_div;
};

struct EvalOptions {
    DiversityScope scope = DiversityScope::Full;
    ScoringOptions scoring;
    const FunctionWordLexicon* lexicon = nullptr;  // builtin when null
    std::string end_think = "</think>";
};

/// Scores every record's output. A fixed `format` applies to all records;
/// otherwise each record's effective format is used. Records without an
/// extractable answer score 0 and stay in the average. Throws MissingOutput
/// when a record id has no output.
EvalResult evaluate(std::span<const DatasetRecord> dataset, const std::map<std::string, CompletionResult>& outputs,
                    const std::optional<AnswerFormat>& format = std::nullopt, const EvalOptions& options = {});

/// Correlation across settings (one point per run, aggregate accuracy vs
/// aggregate diversity).
double settings_correlation(std::span<const EvalResult> runs);

struct ReportFiles {
    std::filesystem::path summary;
    std::filesystem::path records;
    std::filesystem::path scatter;
};

/// Writes summary.json, records.csv and scatter.svg (accuracy vs diversity
/// with the least-squares line) into `out_dir`, creating it if needed.
/// `extra` is merged into the summary object.
ReportFiles emit_report(const EvalResult& result, const std::filesystem::path& out_dir,
                        const nlohmann::json& extra = nlohmann::json::object());

/// Evaluation prompt: the question, the answer-format instruction and, for
/// divergent records, a request for one answer per listed role.
std::string eval_prompt(const DatasetRecord& record);

/// Roles a record is reasoned about from: the divergent truth's roles, else
/// the preset roles.
std::vector<std::string> record_roles(const DatasetRecord& record);

/// Runs every record through the gateway. With more_think, continuations
/// name the record's roles when there are at least wait_count of them and
/// are bare otherwise. Records run in parallel; the map is keyed by id.
std::map<std::string, CompletionResult> generate_outputs(std::span<const DatasetRecord> dataset, Gateway& gateway,
                                                         const DecodeStrategy& strategy);

/// Reads an outputs JSONL file ({"id", "text"} per line) and splits each
/// text at the end-of-thinking delimiter.
std::map<std::string, CompletionResult> load_outputs(const std::string& path, const std::string& open_think = "<think>",
                                                     const std::string& end_think = "</think>");

/// "run-YYYYMMDDTHHMMSSZ-seed<seed>" for the given UTC time.
std::string run_directory_name(std::chrono::system_clock::time_point when, std::uint64_t seed);

}  // namespace divr
