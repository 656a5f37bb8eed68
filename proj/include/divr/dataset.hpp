#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "divr/answer.hpp"
#include "divr/reward.hpp"

namespace divr {

struct DatasetRecord {
    std::string id;
    std::string task;
    std::string question;
    /// Answer options in order; empty when the question has none.
    std::vector<std::string> options;
    MergeMode merge_mode = MergeMode::Convergent;
    GroundTruth ground_truth;
    std::vector<std::string> preset_roles;
    std::optional<AnswerFormat> answer_format;

    /// The explicit format, or one inferred from the options (lettered) or
    /// the ground truth (Yes/No, otherwise bare tokens).
    AnswerFormat effective_format() const;
    /// Question followed by "(A) ... (B) ..." when options exist.
    std::string render_question() const;
};

DatasetRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetRecord& r);

/// One record per line; blank lines skipped. Throws ParseError on malformed
/// lines or duplicate ids.
std::vector<DatasetRecord> load_dataset(const std::string& path);

/// Reads a JSONL file into parsed objects, reporting path:line on errors.
std::vector<nlohmann::json> read_jsonl(const std::string& path);
/// Writes one compact JSON object per line with a trailing newline.
void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& rows);

}  // namespace divr
