#include "divr/eval.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>

#include "divr/error.hpp"

namespace divr {

namespace {

std::string fmt_double(double v, const char* spec = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + p.string());
    return out;
}

RecordEvaluation evaluate_one(const DatasetRecord& record, const CompletionResult& output, const AnswerFormat& format,
                              const EvalOptions& options, const FunctionWordLexicon& lexicon) {
    RecordEvaluation ev;
    ev.id = record.id;
    ev.injected_continuations = output.injected_continuations;
    const std::string& text = output.full_text.empty() ? output.answer_text : output.full_text;

    const auto& truth = record.ground_truth;
    if (truth.mode == MergeMode::Divergent) {
        std::vector<std::string> roles;
        for (const auto& [r, _] : truth.per_role_answers) roles.push_back(r);
        ev.answers = extract_role_answers(text, roles, format, options.end_think);
        ev.answer_absent = ev.answers.empty();
        RoleAnswers padded;
        for (const auto& r : roles) {
            const auto* a = find_answer(ev.answers, r);
            padded.emplace_back(r, a ? *a : std::string());
        }
        ev.accuracy = accuracy_reward(padded, truth);
    } else {
        if (auto a = extract_answer(text, format, options.end_think)) {
            ev.answers.emplace_back("answer", *a);
            ev.accuracy = accuracy_reward(ev.answers, truth);
        } else {
            ev.answer_absent = true;
            ev.accuracy = 0.0;
        }
    }
    ev.diversity = score_or_zero(diversity_text(output, options.scope), lexicon, options.scoring);
    return ev;
}

}  // namespace

std::string_view to_string(DiversityScope scope) noexcept { return scope == DiversityScope::Full ? "full" : "think_only"; }

DiversityScope parse_diversity_scope(std::string_view s) {
    if (s == "full") return DiversityScope::Full;
    if (s == "think_only") return DiversityScope::ThinkOnly;
    fail(ErrorKind::ParseError, "unknown diversity scope '" + std::string(s) + "'");
}

std::string diversity_text(const CompletionResult& completion, DiversityScope scope) {
    if (scope == DiversityScope::ThinkOnly) return completion.think_text;
    if (completion.think_text.empty()) return completion.answer_text;
    return completion.think_text + "\n" + completion.answer_text;
}

DiversityReport score_or_zero(std::string_view text, const FunctionWordLexicon& lexicon, const ScoringOptions& options) {
    try {
        return score_text(text, lexicon, options);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyText) throw;
    }
    DiversityReport zero;
    zero.combined = 0.0;
    zero.norm = 0.0;
    return zero;
}

EvalResult evaluate(std::span<const DatasetRecord> dataset, const std::map<std::string, CompletionResult>& outputs,
                    const std::optional<AnswerFormat>& format, const EvalOptions& options) {
    const auto& lexicon = options.lexicon ? *options.lexicon : FunctionWordLexicon::builtin();
    options.scoring.weights.validate();
    if (format) format->validate();
    for (const auto& r : dataset)
        if (!outputs.contains(r.id)) fail(ErrorKind::MissingOutput, "no output for record '" + r.id + "'");

    EvalResult result;
    result.per_record.resize(dataset.size());
    std::exception_ptr error;
    const auto n = static_cast<std::ptrdiff_t>(dataset.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& record = dataset[static_cast<std::size_t>(i)];
        try {
            result.per_record[static_cast<std::size_t>(i)] = evaluate_one(
                record, outputs.at(record.id), format ? *format : record.effective_format(), options, lexicon);
        } catch (...) {
#pragma omp critical(divr_eval_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);

    if (result.per_record.empty()) return result;
    std::vector<double> acc, div;
    for (const auto& r : result.per_record) {
        acc.push_back(r.accuracy);
        div.push_back(r.diversity.combined.value_or(0.0));
    }
    result.aggregate_accuracy = mean(acc);
    result.aggregate_diversity = mean(div);
    if (acc.size() >= 2) {
        try {
            result.pearson_acc_div = pearson(acc, div);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::DegenerateVariance) throw;
        }
    }
    return result;
}

double settings_correlation(std::span<const EvalResult> runs) {
    std::vector<double> acc, div;
    for (const auto& r : runs) {
        acc.push_back(r.aggregate_accuracy);
        div.push_back(r.aggregate_diversity);
    }
    return pearson(acc, div);
}

ReportFiles emit_report(const EvalResult& result, const std::filesystem::path& out_dir, const nlohmann::json& extra) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        fail(ErrorKind::IoError, "cannot create report directory " + out_dir.string());
    const ReportFiles files{out_dir / "summary.json", out_dir / "records.csv", out_dir / "scatter.svg"};

    std::vector<double> xs, ys;
    for (const auto& r : result.per_record) {
        xs.push_back(r.diversity.combined.value_or(0.0));
        ys.push_back(r.accuracy);
    }
    std::optional<LinearFit> fit;
    if (xs.size() >= 2) {
        try {
            fit = least_squares(xs, ys);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::DegenerateVariance) throw;
        }
    }

    {
        nlohmann::json summary = extra.is_object() ? extra : nlohmann::json::object();
        summary["records"] = result.per_record.size();
        summary["aggregate_accuracy"] = result.aggregate_accuracy;
        summary["aggregate_diversity"] = result.aggregate_diversity;
        summary["pearson_acc_div"] = result.pearson_acc_div ? nlohmann::json(*result.pearson_acc_div) : nlohmann::json(nullptr);
        summary["fit"] = fit ? nlohmann::json{{"slope", fit->slope}, {"intercept", fit->intercept}} : nlohmann::json(nullptr);
        std::size_t absent = 0;
        for (const auto& r : result.per_record) absent += r.answer_absent ? 1 : 0;
        summary["absent_answers"] = absent;
        auto out = open_out(files.summary);
        out << summary.dump(2) << '\n';
    }

    {
        auto out = open_out(files.records);
        out << "id,accuracy,diversity,norm,token_count,injected_continuations,answer_absent,answers";
        for (auto key : kSubMetricKeys) out << ',' << key;
        out << '\n';
        for (const auto& r : result.per_record) {
            std::string answers;
            for (const auto& [role, a] : r.answers) answers += (answers.empty() ? "" : ";") + role + "=" + a;
            out << csv_field(r.id) << ',' << fmt_double(r.accuracy) << ','
                << fmt_double(r.diversity.combined.value_or(0.0)) << ',' << fmt_double(r.diversity.norm.value_or(0.0))
                << ',' << r.diversity.token_count << ',' << r.injected_continuations << ','
                << (r.answer_absent ? "true" : "false") << ',' << csv_field(answers);
            for (double s : r.diversity.sub_scores()) out << ',' << fmt_double(s);
            out << '\n';
        }
    }

    {
        constexpr double W = 480, H = 360, M = 48;
        auto px = [&](double x) { return M + x * (W - 2 * M); };
        auto py = [&](double y) { return H - M - y * (H - 2 * M); };
        auto out = open_out(files.scatter);
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
            << W << ' ' << H << "\">\n";
        out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out << "  <line class=\"axis\" x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\"" << H - M
            << "\" stroke=\"black\"/>\n";
        out << "  <line class=\"axis\" x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M
            << "\" stroke=\"black\"/>\n";
        out << "  <text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">diversity</text>\n";
        out << "  <text x=\"14\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
            << H / 2 << ")\">accuracy</text>\n";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            out << "  <circle class=\"point\" cx=\"" << fmt_double(px(xs[i]), "%.3f") << "\" cy=\""
                << fmt_double(py(ys[i]), "%.3f") << "\" r=\"3\" fill=\"steelblue\" data-x=\"" << fmt_double(xs[i])
                << "\" data-y=\"" << fmt_double(ys[i]) << "\"><title>" << xml_escape(result.per_record[i].id)
                << "</title></circle>\n";
        }
        if (fit) {
            const double y0 = fit->intercept, y1 = fit->slope + fit->intercept;
            out << "  <line class=\"fit\" x1=\"" << fmt_double(px(0.0), "%.3f") << "\" y1=\"" << fmt_double(py(y0), "%.3f")
                << "\" x2=\"" << fmt_double(px(1.0), "%.3f") << "\" y2=\"" << fmt_double(py(y1), "%.3f")
                << "\" stroke=\"crimson\" data-slope=\"" << fmt_double(fit->slope) << "\" data-intercept=\""
                << fmt_double(fit->intercept) << "\"/>\n";
        }
        out << "</svg>\n";
    }
    return files;
}

std::string eval_prompt(const DatasetRecord& record) {
    std::string prompt = record.render_question() + "\n\n" + record.effective_format().instruction();
    if (record.merge_mode == MergeMode::Divergent) {
        const auto roles = record_roles(record);
        if (!roles.empty()) {
            prompt += "\nGive one answer per role for the following roles: ";
            for (std::size_t i = 0; i < roles.size(); ++i) prompt += (i ? ", " : "") + roles[i];
            prompt += "\nWrite each answer on its own line as \"role: answer\".";
        }
    }
    return prompt;
}

std::vector<std::string> record_roles(const DatasetRecord& record) {
    std::vector<std::string> roles;
    if (record.merge_mode == MergeMode::Divergent)
        for (const auto& [role, _] : record.ground_truth.per_role_answers) roles.push_back(role);
    if (roles.empty()) roles = record.preset_roles;
    return roles;
}

std::map<std::string, CompletionResult> generate_outputs(std::span<const DatasetRecord> dataset, Gateway& gateway,
                                                         const DecodeStrategy& strategy) {
    strategy.validate();
    std::vector<CompletionResult> results(dataset.size());
    std::exception_ptr error;
    const auto n = static_cast<std::ptrdiff_t>(dataset.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& record = dataset[static_cast<std::size_t>(i)];
        try {
            const auto prompt = eval_prompt(record);
            auto& out = results[static_cast<std::size_t>(i)];
            if (strategy.mode == DecodeMode::MoreThink) {
                auto roles = record_roles(record);
                if (roles.size() < static_cast<std::size_t>(strategy.wait_count)) roles.clear();
                out = gateway.budget_forced_complete(prompt, roles, strategy);
            } else {
                out = gateway.complete(prompt, strategy);
            }
        } catch (...) {
#pragma omp critical(divr_eval_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    std::map<std::string, CompletionResult> outputs;
    for (std::size_t i = 0; i < dataset.size(); ++i) outputs[dataset[i].id] = std::move(results[i]);
    return outputs;
}

std::map<std::string, CompletionResult> load_outputs(const std::string& path, const std::string& open_think,
                                                     const std::string& end_think) {
    std::map<std::string, CompletionResult> outputs;
    for (const auto& row : read_jsonl(path)) {
        if (!row.is_object() || !row.contains("id") || !row.contains("text") || !row["id"].is_string() ||
            !row["text"].is_string())
            fail(ErrorKind::ParseError, path + ": each output needs string fields id and text");
        CompletionResult c;
        c.full_text = row["text"].get<std::string>();
        c.injected_continuations = row.value("injected_continuations", 0);
        split_think(c.full_text, open_think, end_think, c.think_text, c.answer_text);
        c.raw_segments.push_back(c.full_text);
        outputs[row["id"].get<std::string>()] = std::move(c);
    }
    return outputs;
}

std::string run_directory_name(std::chrono::system_clock::time_point when, std::uint64_t seed) {
    const std::time_t t = std::chrono::system_clock::to_time_t(when);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return std::string("run-") + buf + "-seed" + std::to_string(seed);
}

}  // namespace divr
