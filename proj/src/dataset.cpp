#include "divr/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <unordered_set>

#include "divr/error.hpp"

namespace divr {

namespace {

bool is_yes_no(const std::string& s) {
    std::string l(s);
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return l == "yes" || l == "no";
}

}  // namespace

AnswerFormat DatasetRecord::effective_format() const {
    if (answer_format) return *answer_format;
    if (!options.empty()) return AnswerFormat::letters(AnswerPattern::BoldLetter, std::min<std::size_t>(options.size(), 26));

    std::vector<std::string> truths;
    if (ground_truth.scalar_answer) truths.push_back(*ground_truth.scalar_answer);
    for (const auto& [_, a] : ground_truth.per_role_answers) truths.push_back(a);
    if (!truths.empty() && std::all_of(truths.begin(), truths.end(), is_yes_no)) return AnswerFormat::yes_no();

    std::set<std::string> distinct(truths.begin(), truths.end());
    AnswerFormat f;
    f.kind = AnswerPattern::BoldBare;
    f.alphabet.assign(distinct.begin(), distinct.end());
    if (f.alphabet.empty()) f.alphabet = {"A", "B", "C"};
    return f;
}

std::string DatasetRecord::render_question() const {
    std::string out = question;
    if (!options.empty()) {
        out += "\n";
        for (std::size_t i = 0; i < options.size(); ++i) {
            if (i) out += ' ';
            out += "(" + std::string(1, static_cast<char>('A' + i)) + ") " + options[i];
        }
    }
    return out;
}

DatasetRecord record_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::ParseError, "record must be a JSON object");
    DatasetRecord r;
    try {
        r.id = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
        r.task = j.value("task", std::string());
        r.question = j.at("question").get<std::string>();
        if (j.contains("options") && !j["options"].is_null()) {
            r.options = j["options"].get<std::vector<std::string>>();
            if (r.options.empty()) fail(ErrorKind::ParseError, "record " + r.id + ": options present but empty");
        }
        r.merge_mode = parse_merge_mode(j.value("merge_mode", std::string("convergent")));
        r.ground_truth = ground_truth_from_json(j.at("ground_truth"));
        if (j.contains("preset_roles") && !j["preset_roles"].is_null())
            r.preset_roles = j["preset_roles"].get<std::vector<std::string>>();
        if (j.contains("answer_format") && !j["answer_format"].is_null())
            r.answer_format = answer_format_from_json(j["answer_format"]);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("record: ") + e.what());
    }
    if (r.id.empty()) fail(ErrorKind::ParseError, "record id is empty");
    if (r.question.empty()) fail(ErrorKind::ParseError, "record " + r.id + ": question is empty");
    if (r.ground_truth.mode != r.merge_mode)
        fail(ErrorKind::ParseError, "record " + r.id + ": merge_mode and ground_truth.mode disagree");
    return r;
}

nlohmann::json to_json(const DatasetRecord& r) {
    nlohmann::json j = {
        {"id", r.id},
        {"task", r.task},
        {"question", r.question},
        {"options", r.options.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.options)},
        {"merge_mode", std::string(to_string(r.merge_mode))},
        {"ground_truth", to_json(r.ground_truth)},
        {"preset_roles", r.preset_roles},
    };
    if (r.answer_format) j["answer_format"] = to_json(*r.answer_format);
    return j;
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path);
    std::vector<nlohmann::json> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) fail(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": invalid JSON");
        rows.push_back(std::move(j));
    }
    return rows;
}

void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + path);
    for (const auto& r : rows) out << r.dump() << '\n';
    if (!out) fail(ErrorKind::IoError, "write failed for " + path);
}

std::vector<DatasetRecord> load_dataset(const std::string& path) {
    std::vector<DatasetRecord> records;
    std::unordered_set<std::string> ids;
    std::size_t n = 0;
    for (const auto& row : read_jsonl(path)) {
        ++n;
        try {
            records.push_back(record_from_json(row));
        } catch (const Error& e) {
            fail(ErrorKind::ParseError, path + " record " + std::to_string(n) + ": " + e.what());
        }
        if (!ids.insert(records.back().id).second)
            fail(ErrorKind::ParseError, path + ": duplicate id '" + records.back().id + "'");
    }
    return records;
}

}  // namespace divr
