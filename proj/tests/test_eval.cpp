#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "divr/error.hpp"
#include "divr/eval.hpp"
#include "test_util.hpp"

using namespace divr;
namespace fs = std::filesystem;

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

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("divr_eval_" + name);
    fs::remove_all(p);
    return p;
}

DatasetRecord mc(const std::string& id, const std::string& truth = "A") {
    DatasetRecord r;
    r.id = id;
    r.question = "Where does the waiter work?";
    r.options = {"restaurant", "server", "hospital"};
    r.ground_truth = GroundTruth::convergent(truth);
    return r;
}

CompletionResult output(const std::string& think, const std::string& answer) {
    CompletionResult c;
    c.think_text = think;
    c.answer_text = answer;
    c.full_text = "<think>" + think + "</think>" + answer;
    return c;
}

// Ordinary least squares slope, written out directly.
double oracle_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("answer extraction") {
    const auto letters = AnswerFormat::letters(AnswerPattern::BoldLetter, 3);
    CHECK(extract_answer("**B. The server**", letters) == "B");
    CHECK(extract_answer("maybe **A. x** then</think>**C. final**", letters) == "C");
    CHECK(extract_answer("**A. early**</think>nothing here", letters) == std::nullopt);
    CHECK(extract_answer("**Z. out of range**", letters) == std::nullopt);
    const auto parens = AnswerFormat::letters(AnswerPattern::BoldParen, 3);
    CHECK(extract_answer("**(C) hospital**", parens) == "C");
    CHECK(extract_answer("no answer at all", parens) == std::nullopt);
    CHECK(extract_answer("I say **yes**.", AnswerFormat::yes_no()) == "Yes");
}

TEST_CASE("property: extracting from a rendered marker is idempotent") {
    testutil::Gen gen(2);
    const std::vector<AnswerFormat> formats{AnswerFormat::letters(AnswerPattern::BoldLetter, 5),
                                            AnswerFormat::letters(AnswerPattern::BoldParen, 4),
                                            AnswerFormat::letters(AnswerPattern::BoldBare, 3), AnswerFormat::yes_no()};
    for (int trial = 0; trial < 400; ++trial) {
        const auto& f = formats[gen.below(formats.size())];
        const auto token = f.alphabet[gen.below(f.alphabet.size())];
        std::string noise;
        for (const auto& t : gen.tokens(gen.between(0, 20))) noise += t + " ";
        const auto text = noise + "</think>" + noise + f.marker(token);
        const auto got = extract_answer(text, f);
        REQUIRE(got.has_value());
        CHECK(*got == token);
        CHECK(extract_answer(f.marker(*got), f) == got);
    }
}

TEST_CASE("role answers") {
    const auto f = AnswerFormat::letters(AnswerPattern::BoldLetter, 3);
    const auto ra = extract_role_answers("</think>\nDoctor: **A. x**\nlawyer: **B. y**\nDoctor: **C. z**", {"doctor", "Lawyer", "ghost"}, f);
    CHECK(ra == RoleAnswers{{"doctor", "C"}, {"Lawyer", "B"}});
}

TEST_CASE("evaluate: mean accuracy and absent answers") {
    std::vector<DatasetRecord> ds{mc("a"), mc("b")};
    std::map<std::string, CompletionResult> out{{"a", output("first thought", "**A. restaurant**")},
                                                {"b", output("second thought", "**C. hospital**")}};
    const auto r = evaluate(ds, out);
    CHECK(r.aggregate_accuracy == 0.5);
    CHECK(r.per_record[0].accuracy == 1.0);
    CHECK(r.per_record[1].accuracy == 0.0);
    CHECK_FALSE(r.per_record[0].answer_absent);

    std::map<std::string, CompletionResult> none{{"a", output("hmm", "no idea")}, {"b", output("", "")}};
    const auto z = evaluate(ds, none);
    CHECK(z.aggregate_accuracy == 0.0);
    CHECK(z.per_record[0].answer_absent);
    CHECK(z.per_record[1].answer_absent);
    CHECK(z.per_record[1].diversity.combined == 0.0);

    std::map<std::string, CompletionResult> partial{{"a", output("x", "y")}};
    CHECK(kind_of([&] { evaluate(ds, partial); }) == ErrorKind::MissingOutput);
}

TEST_CASE("evaluate: divergent records score per role") {
    auto r = mc("d");
    r.merge_mode = MergeMode::Divergent;
    r.ground_truth = GroundTruth::divergent({{"Chef", "A"}, {"Critic", "B"}});
    std::vector<DatasetRecord> ds{r};
    std::map<std::string, CompletionResult> out{{"d", output("think", "Chef: **A. x**\nCritic: **C. y**")}};
    const auto e = evaluate(ds, out);
    CHECK(e.per_record[0].accuracy == 0.5);
    CHECK(eval_prompt(r).find("following roles: Chef, Critic") != std::string::npos);
    CHECK(record_roles(r) == std::vector<std::string>{"Chef", "Critic"});
}

TEST_CASE("evaluate: correlation of a constructed dataset is one") {
    std::vector<DatasetRecord> ds;
    std::map<std::string, CompletionResult> out;
    const std::string rich = "The chef weighs cost, taste and timing before deciding. Critics may disagree!";
    const std::string flat = "same same same same same same";
    for (int i = 0; i < 4; ++i) {
        const auto id = "r" + std::to_string(i);
        ds.push_back(mc(id));
        out[id] = i % 2 == 0 ? output(rich, "**A. restaurant**") : output(flat, "**B. server**");
    }
    const auto r = evaluate(ds, out);
    REQUIRE(r.pearson_acc_div.has_value());
    CHECK(std::abs(*r.pearson_acc_div - 1.0) < 1e-9);

    std::map<std::string, CompletionResult> same;
    for (const auto& d : ds) same[d.id] = output(rich, "**A. restaurant**");
    CHECK_FALSE(evaluate(ds, same).pearson_acc_div.has_value());
}

TEST_CASE("diversity scope") {
    const auto c = output("inner thought", "final words");
    CHECK(diversity_text(c, DiversityScope::Full) == "inner thought\nfinal words");
    CHECK(diversity_text(c, DiversityScope::ThinkOnly) == "inner thought");
    CHECK(parse_diversity_scope("think_only") == DiversityScope::ThinkOnly);
    CHECK(kind_of([] { parse_diversity_scope("half"); }) == ErrorKind::ParseError);
}

TEST_CASE("settings correlation") {
    std::vector<EvalResult> runs(3);
    for (int i = 0; i < 3; ++i) {
        runs[i].aggregate_accuracy = 0.2 * i;
        runs[i].aggregate_diversity = 0.1 + 0.3 * i;
    }
    CHECK(settings_correlation(runs) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("report: empty result") {
    const auto dir = scratch("empty");
    const auto files = emit_report(EvalResult{}, dir);
    const auto csv = slurp(files.records);
    CHECK(line_count(csv) == 1);
    CHECK(csv.rfind("id,accuracy,diversity", 0) == 0);
    const auto summary = nlohmann::json::parse(slurp(files.summary));
    CHECK(summary["records"] == 0);
    CHECK(summary["fit"].is_null());
    CHECK(slurp(files.scatter).find("<svg") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("report: rows, summary and fitted line") {
    std::vector<DatasetRecord> ds{mc("x1"), mc("x2"), mc("x3", "B")};
    std::map<std::string, CompletionResult> out{
        {"x1", output("Doctors weigh risk. Lawyers weigh liability? Both matter!", "**A. restaurant**")},
        {"x2", output("one one one two", "**A. restaurant**")},
        {"x3", output("Bakers rise early, and porters carry bags.", "**C. hospital**")}};
    const auto r = evaluate(ds, out);
    const auto dir = scratch("three");
    const auto files = emit_report(r, dir, {{"strategy", "regular"}});

    const auto csv = slurp(files.records);
    CHECK(line_count(csv) == 4);
    CHECK(csv.find("\nx2,1,") != std::string::npos);

    const auto summary = nlohmann::json::parse(slurp(files.summary));
    CHECK(summary["strategy"] == "regular");
    CHECK(summary["records"] == 3);
    CHECK(summary["aggregate_accuracy"].get<double>() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    std::vector<double> xs, ys;
    for (const auto& p : r.per_record) {
        xs.push_back(*p.diversity.combined);
        ys.push_back(p.accuracy);
    }
    const auto svg = slurp(files.scatter);
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, std::regex("data-slope=\"([^\"]+)\"")));
    CHECK(std::abs(std::stod(m[1].str()) - oracle_slope(xs, ys)) < 1e-6);
    std::size_t points = 0;
    for (std::size_t at = 0; (at = svg.find("class=\"point\"", at)) != std::string::npos; ++at) ++points;
    CHECK(points == 3);
    fs::remove_all(dir);
}

TEST_CASE("run directory name") {
    using namespace std::chrono;
    const auto t = sys_days{year{2024} / 3 / 9} + hours{7} + minutes{5} + seconds{2};
    CHECK(run_directory_name(t, 42) == "run-20240309T070502Z-seed42");
}

TEST_CASE("load outputs") {
    const auto path = fs::temp_directory_path() / "divr_eval_outputs.jsonl";
    {
        std::ofstream o(path);
        o << R"({"id":"a","text":"<think>why</think>**B. x**","injected_continuations":2})" << "\n";
        o << R"({"id":"b","text":"just an answer"})" << "\n";
    }
    const auto outs = load_outputs(path.string());
    CHECK(outs.at("a").think_text == "why");
    CHECK(outs.at("a").answer_text == "**B. x**");
    CHECK(outs.at("a").injected_continuations == 2);
    CHECK(outs.at("b").think_text.empty());
    CHECK(outs.at("b").answer_text == "just an answer");
    {
        std::ofstream o(path);
        o << R"({"id":"a"})" << "\n";
    }
    CHECK(kind_of([&] { load_outputs(path.string()); }) == ErrorKind::ParseError);
    fs::remove(path);
}

TEST_CASE("generate outputs against the simulated model") {
    EndpointConfig c;
    c.base_url = "mock://sim";
    auto g = Gateway::from_config(c);
    auto d = mc("div");
    d.merge_mode = MergeMode::Divergent;
    d.ground_truth = GroundTruth::divergent({{"Chef", "A"}, {"Critic", "B"}, {"Owner", "C"}});
    std::vector<DatasetRecord> ds{mc("con"), d};
    const auto outs = generate_outputs(ds, *g, DecodeStrategy::more_think(3));
    CHECK(outs.at("con").injected_continuations == 3);
    CHECK(outs.at("div").injected_continuations == 3);
    CHECK(outs.at("div").full_text.find("Critic") != std::string::npos);
    const auto r = evaluate(ds, outs);
    CHECK(r.per_record[1].answers.size() == 3);
    CHECK(r.per_record[0].injected_continuations == 3);
}
