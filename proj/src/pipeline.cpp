#include "divr/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>

#include "divr/error.hpp"
#include "divr/text_diversity.hpp"

namespace divr {

namespace {

constexpr std::string_view kRolePromptHead =
    "Please generate 2-5 role perspective to answer the following question. "
    "Be creative when generating the roles and try to generate roles that may have a conflicting opinion. "
    "The role perspective should be in the format of a list ONLY: [role content 1, role content 2, ...]"
    "Do not include any other information. "
    "Here are some examples that you should follow:\n\n";

struct FewShot {
    std::string_view question;
    std::string_view roles;
};

constexpr FewShot kFewShots[] = {
    {"The dental office handled a lot of patients who experienced traumatic mouth injury, where were these "
     "patients coming from?",
     "[Emergency room doctor, Police officer, Accident analyst]"},
    {"Jane was beautiful on the inside, but on the outside she wasn't much to look at.  How might she be described?",
     "[Critic, Psychological counselor, Fashion blogger]"},
    {"What does someone feel after running twenty six miles?",
     "[Professional marathon runner, Average people, Exercise physiologist, Disabled people]"},
    {"What would you do if you have curiosity about a new show?", "[Show director, Enthusiastic show fan, Busy people]"},
    {"The comedian made a dull joke about a bald eagle and it ending up that way because of what treatment?",
     "[wildlife protectors, Comedy theory researcher, Average audience]"},
    {"The color yellow is associated with the opposite of the characteristic, what is it?",
     "[Color psychologist, Early childhood educator, Personality researcher]"},
    {"The golfer was great at keeping a calm exterior as he finished up his final shots, but inside he was what "
     "because he knew he had won?",
     "[Golf commentator, Sports psychologist, Main competitor]"},
};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string replace_role(std::string_view templ, const std::string& role) { return instantiate_continuation(templ, role); }

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
    if (needle.empty()) return 0;
    std::size_t n = 0;
    for (auto at = hay.find(needle); at != std::string_view::npos; at = hay.find(needle, at + needle.size())) ++n;
    return n;
}

std::uint64_t record_seed(std::uint64_t seed, const std::string& id) { return splitmix64(seed ^ fnv1a64(id)); }

std::string answer_block(const DatasetRecord& record, const FilteredTraces& filtered) {
    const auto format = record.effective_format();
    if (record.merge_mode == MergeMode::Divergent) {
        std::string out;
        for (const auto& [role, trace] : filtered) out += role + ": " + trace.answer + "\n";
        return out;
    }
    std::vector<std::string> answers;
    for (const auto& [_, trace] : filtered) answers.push_back(trace.answer);
    const auto& winner = answers[majority_index(answers)];
    std::string_view label;
    if (winner.size() == 1 && winner[0] >= 'A' && static_cast<std::size_t>(winner[0] - 'A') < record.options.size())
        label = record.options[static_cast<std::size_t>(winner[0] - 'A')];
    return "Final answer: " + format.marker(winner, label) + "\n";
}

std::size_t factorial_capped(std::size_t m, std::size_t cap) {
    std::size_t f = 1;
    for (std::size_t i = 2; i <= m; ++i) {
        f *= i;
        if (f >= cap) return cap;
    }
    return f;
}

}  // namespace

nlohmann::json to_json(const SftExample& e) {
    return {{"instruction", e.instruction},
            {"input", e.input},
            {"output", e.output},
            {"ordering", e.ordering},
            {"merge_mode", std::string(to_string(e.merge_mode))}};
}

std::string role_generation_prompt(const DatasetRecord& record) {
    std::string out(kRolePromptHead);
    int i = 1;
    for (const auto& shot : kFewShots) {
        out += std::to_string(i++) + ".\nInput: Question: " + std::string(shot.question) + "\n\nOutput: " +
               std::string(shot.roles) + "\n\n";
    }
    out += "Your answer:\nInput: Question: " + record.render_question() + "\n\nOutput:";
    return out;
}

std::optional<std::vector<std::string>> parse_role_list(std::string_view text) {
    const auto open = text.find('[');
    if (open == std::string_view::npos) return std::nullopt;
    const auto close = text.find(']', open + 1);
    if (close == std::string_view::npos) return std::nullopt;
    const auto body = text.substr(open + 1, close - open - 1);
    std::vector<std::string> roles;
    std::size_t pos = 0;
    while (pos <= body.size()) {
        const auto comma = body.find(',', pos);
        auto item = trim(body.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        while (!item.empty() && (item.front() == '"' || item.front() == '\'')) item.remove_prefix(1);
        while (!item.empty() && (item.back() == '"' || item.back() == '\'')) item.remove_suffix(1);
        item = trim(item);
        if (!item.empty()) roles.emplace_back(item);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    if (roles.empty()) return std::nullopt;
    return roles;
}

std::optional<std::vector<std::string>> clamp_roles(std::vector<std::string> roles, RoleRange range) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& r : roles) {
        if (seen.insert(lower(r)).second) out.push_back(std::move(r));
    }
    if (out.size() > range.max) out.resize(range.max);
    if (out.size() < range.min) return std::nullopt;
    return out;
}

std::vector<RoleCandidate> generate_roles(const DatasetRecord& record, Gateway& gateway, RoleRange range,
                                          int max_retries, std::uint64_t seed) {
    if (range.min < 1 || range.max < range.min) fail(ErrorKind::InvalidParameter, "bad role count range");
    if (max_retries < 0) fail(ErrorKind::InvalidParameter, "max_retries must be >= 0");
    const auto prompt = role_generation_prompt(record);
    auto strategy = DecodeStrategy::zero_think();
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        strategy.seed = seed + static_cast<std::uint64_t>(attempt);
        const auto result = gateway.complete(prompt, strategy);
        auto parsed = parse_role_list(result.answer_text);
        if (!parsed) parsed = parse_role_list(result.full_text);
        if (!parsed) continue;
        if (auto roles = clamp_roles(std::move(*parsed), range)) {
            std::vector<RoleCandidate> out;
            for (auto& r : *roles) out.push_back({.name = std::move(r)});
            return out;
        }
    }
    fail(ErrorKind::RoleParseError, "no usable role list for record '" + record.id + "' after " +
                                        std::to_string(max_retries + 1) + " attempts");
}

std::vector<double> softmax(std::span<const double> scores) {
    if (scores.empty()) return {};
    const double top = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out;
    out.reserve(scores.size());
    for (double s : scores) out.push_back(std::exp(s - top));
    double total = 0.0;
    for (double v : out) total += v;
    for (double& v : out) v /= total;
    return out;
}

std::vector<RoleCandidate> score_role_selection(const std::string& question, std::vector<RoleCandidate> candidates,
                                                Gateway& gateway, double lambda) {
    if (candidates.size() < 2) fail(ErrorKind::InsufficientRoles, "role selection needs at least 2 candidates");
    if (!std::isfinite(lambda)) fail(ErrorKind::InvalidParameter, "lambda must be finite");
    const std::size_t n = candidates.size();
    std::vector<std::string> texts{question};
    for (const auto& c : candidates) texts.push_back(c.name + " " + question);
    for (const auto& c : candidates) texts.push_back(c.name);
    const auto vecs = gateway.embed(texts);
    if (vecs.size() != texts.size()) fail(ErrorKind::ProtocolError, "embedding count mismatch");

    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& c = candidates[i];
        c.relevance = cosine_similarity(vecs[1 + i], vecs[0]);
        double dis = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) dis += 1.0 - cosine_similarity(vecs[1 + n + i], vecs[1 + n + j]);
        c.mean_dissimilarity = dis / static_cast<double>(n - 1);
        logits[i] = c.relevance + lambda * c.mean_dissimilarity;
    }
    const auto probs = softmax(logits);
    for (std::size_t i = 0; i < n; ++i) candidates[i].selection_probability = probs[i];
    return candidates;
}

std::vector<RoleCandidate> sample_roles(const std::vector<RoleCandidate>& scored, std::size_t count, Rng& rng) {
    count = std::min(count, scored.size());
    std::vector<std::size_t> pool(scored.size());
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<RoleCandidate> out;
    while (out.size() < count) {
        double total = 0.0;
        for (auto i : pool) total += scored[i].selection_probability;
        std::size_t pick = pool.size() - 1;
        if (total > 0.0) {
            double u = rng.unit() * total;
            for (std::size_t k = 0; k < pool.size(); ++k) {
                u -= scored[pool[k]].selection_probability;
                if (u < 0.0) {
                    pick = k;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(rng.index(pool.size()));
        }
        out.push_back(scored[pool[pick]]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

std::string role_prompt(const DatasetRecord& record, const std::string& role) {
    return "Answer the following question from the perspective of " + role + ".\n\n" + record.render_question() +
           "\n\n" + record.effective_format().instruction();
}

PathSample sample_paths(const DatasetRecord& record, const std::string& role, Gateway& gateway, int k,
                        const DecodeStrategy& strategy, std::uint64_t base_seed) {
    if (k < 1) fail(ErrorKind::InvalidParameter, "k must be >= 1");
    const auto prompt = role_prompt(record, role);
    const auto format = record.effective_format();
    auto s = strategy;
    s.temperature = 1.0;
    PathSample out;
    for (int j = 0; j < k; ++j) {
        s.seed = base_seed + static_cast<std::uint64_t>(j);
        const auto result = gateway.complete(prompt, s);
        auto answer = extract_answer(result.full_text, format, s.end_think);
        const auto think = trim(result.think_text);
        if (!answer || think.empty()) {
            ++out.dropped;
            continue;
        }
        out.traces.push_back({.role = role,
                              .think_text = std::string(think),
                              .answer = std::move(*answer),
                              .sample_index = j,
                              .temperature = s.temperature});
    }
    if (out.traces.empty())
        fail(ErrorKind::NoValidPaths, "no extractable answer in " + std::to_string(k) + " paths for role '" + role + "'");
    return out;
}

ReasoningTrace self_consistency_filter(std::span<const ReasoningTrace> paths) {
    if (paths.empty()) fail(ErrorKind::EmptyGroup, "no paths to filter");
    std::vector<std::string> answers;
    for (const auto& p : paths) answers.push_back(p.answer);
    return paths[majority_index(answers)];
}

std::optional<ReasoningTrace> ground_truth_filter(std::span<const ReasoningTrace> paths, const std::string& expected) {
    for (const auto& p : paths)
        if (p.answer == expected) return p;
    return std::nullopt;
}

std::vector<SftExample> merge_traces(const DatasetRecord& record, const FilteredTraces& filtered, int count, Rng& rng,
                                     const std::string& end_think) {
    if (filtered.size() < 2) fail(ErrorKind::InsufficientRoles, "merging needs at least 2 roles");
    if (count < 1) fail(ErrorKind::InvalidParameter, "orderings per example must be >= 1");
    const std::size_t m = filtered.size();
    const auto wanted = static_cast<std::size_t>(count);

    std::vector<std::vector<std::size_t>> orders;
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    if (factorial_capped(m, wanted + 1) <= wanted) {
        // Every permutation, in lexicographic order.
        do orders.push_back(perm);
        while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        std::set<std::vector<std::size_t>> seen;
        while (orders.size() < wanted) {
            rng.shuffle(perm);
            if (seen.insert(perm).second) orders.push_back(perm);
        }
    }

    const auto input = record.render_question() + "\n" + record.effective_format().instruction();
    const auto answers = answer_block(record, filtered);
    std::vector<SftExample> out;
    for (const auto& order : orders) {
        SftExample ex;
        ex.instruction = std::string(kSftInstruction);
        ex.input = input;
        ex.merge_mode = record.merge_mode;
        std::string body = "<think>\n";
        for (std::size_t i = 0; i < order.size(); ++i) {
            const auto& [role, trace] = filtered[order[i]];
            body += replace_role(i == 0 ? kFirstRoleOpener : kRoleContinuation, role);
            body += std::string(trim(trace.think_text)) + "\n";
            ex.ordering.push_back(role);
        }
        ex.output = body + end_think + "\n" + answers;
        out.push_back(std::move(ex));
    }
    return out;
}

bool valid_sft_format(const SftExample& example, const std::string& end_think) {
    if (count_occurrences(example.output, end_think) != 1) return false;
    const auto text = lower(example.output);
    for (const auto& role : example.ordering)
        if (text.find(lower(role)) == std::string::npos) return false;
    return true;
}

std::vector<bool> percentile_keep_mask(std::span<const std::size_t> lengths, double lower_pct, double upper_pct) {
    if (!(lower_pct >= 0.0 && lower_pct <= 100.0 && upper_pct >= 0.0 && upper_pct <= 100.0))
        fail(ErrorKind::InvalidParameter, "percentiles must be within [0, 100]");
    std::vector<bool> keep(lengths.size(), true);
    if (lengths.empty()) return keep;
    std::vector<std::size_t> sorted(lengths.begin(), lengths.end());
    std::sort(sorted.begin(), sorted.end());
    const double last = static_cast<double>(sorted.size() - 1);
    auto at = [&](double pct) { return sorted[static_cast<std::size_t>(std::lround(pct / 100.0 * last))]; };
    const auto lo = at(lower_pct);
    const auto hi = at(100.0 - upper_pct);
    for (std::size_t i = 0; i < lengths.size(); ++i) keep[i] = lengths[i] >= lo && lengths[i] <= hi;
    return keep;
}

std::vector<SftExample> filter_sft_dataset(const std::vector<SftExample>& examples, double lower_pct, double upper_pct,
                                           const std::string& end_think) {
    if (examples.size() < 3) return examples;
    std::vector<std::size_t> lengths;
    lengths.reserve(examples.size());
    for (const auto& e : examples) lengths.push_back(tokenize(e.output).tokens.size());
    const auto keep = percentile_keep_mask(lengths, lower_pct, upper_pct);
    std::vector<SftExample> out;
    for (std::size_t i = 0; i < examples.size(); ++i)
        if (keep[i] && valid_sft_format(examples[i], end_think)) out.push_back(examples[i]);
    return out;
}

PathFilter parse_path_filter(std::string_view s) {
    if (s == "self-consistency" || s == "self_consistency") return PathFilter::SelfConsistency;
    if (s == "ground-truth-hinted" || s == "ground_truth_hinted") return PathFilter::GroundTruthHinted;
    fail(ErrorKind::ParseError, "unknown path filter '" + std::string(s) + "'");
}

namespace {

struct RecordOutcome {
    std::vector<SftExample> examples;
    std::size_t dropped = 0;
    std::optional<std::string> skip_reason;
};

std::vector<std::string> roles_for(const DatasetRecord& record, Gateway& gateway, const PipelineOptions& options,
                                   std::uint64_t seed) {
    std::vector<std::string> roles;
    if (record.merge_mode == MergeMode::Divergent && !record.ground_truth.per_role_answers.empty()) {
        for (const auto& [role, _] : record.ground_truth.per_role_answers) roles.push_back(role);
        return roles;
    }
    if (!record.preset_roles.empty()) return record.preset_roles;

    auto candidates = generate_roles(record, gateway, options.role_range, options.role_retries, seed);
    auto scored = score_role_selection(record.render_question(), std::move(candidates), gateway, options.lambda);
    Rng rng(seed ^ 0x5e1ec7ULL);
    const auto count = std::max<std::size_t>(2, options.roles_per_record);
    for (auto& c : sample_roles(scored, count, rng)) roles.push_back(std::move(c.name));
    return roles;
}

RecordOutcome process_record(const DatasetRecord& record, Gateway& gateway, const PipelineOptions& options) {
    RecordOutcome outcome;
    const auto seed = record_seed(options.seed, record.id);
    try {
        const auto roles = roles_for(record, gateway, options, seed);
        FilteredTraces filtered;
        for (const auto& role : roles) {
            const auto paths =
                sample_paths(record, role, gateway, options.samples_per_role, options.strategy, fnv1a64(role, seed));
            outcome.dropped += static_cast<std::size_t>(paths.dropped);
            if (options.filter == PathFilter::SelfConsistency) {
                filtered.emplace_back(role, self_consistency_filter(paths.traces));
                continue;
            }
            const std::string* expected = record.merge_mode == MergeMode::Divergent
                                              ? find_answer(record.ground_truth.per_role_answers, role)
                                              : (record.ground_truth.scalar_answer ? &*record.ground_truth.scalar_answer
                                                                                   : nullptr);
            std::optional<ReasoningTrace> hit;
            if (expected) hit = ground_truth_filter(paths.traces, *expected);
            if (!hit) fail(ErrorKind::NoValidPaths, "no path for role '" + role + "' matches the ground truth");
            filtered.emplace_back(role, std::move(*hit));
        }
        Rng rng(seed);
        outcome.examples = merge_traces(record, filtered, options.orderings, rng, options.strategy.end_think);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::RoleParseError && e.kind() != ErrorKind::NoValidPaths &&
            e.kind() != ErrorKind::InsufficientRoles)
            throw;
        outcome.examples.clear();
        outcome.skip_reason = e.what();
    }
    return outcome;
}

}  // namespace

PipelineResult build_sft_dataset(std::span<const DatasetRecord> records, Gateway& gateway,
                                 const PipelineOptions& options) {
    if (options.samples_per_role < 1) fail(ErrorKind::InvalidParameter, "samples per role must be >= 1");
    if (options.orderings < 1) fail(ErrorKind::InvalidParameter, "orderings must be >= 1");
    if (options.role_range.min < 2 || options.role_range.max < options.role_range.min)
        fail(ErrorKind::InvalidParameter, "role range must satisfy 2 <= min <= max");
    if (!std::isfinite(options.lambda)) fail(ErrorKind::InvalidParameter, "lambda must be finite");
    options.strategy.validate();

    std::vector<RecordOutcome> outcomes(records.size());
    std::exception_ptr error;
    const auto n = static_cast<std::ptrdiff_t>(records.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            outcomes[static_cast<std::size_t>(i)] = process_record(records[static_cast<std::size_t>(i)], gateway, options);
        } catch (...) {
#pragma omp critical(divr_pipeline_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);

    PipelineResult result;
    result.stats.records = records.size();
    std::vector<SftExample> merged;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        auto& o = outcomes[i];
        result.stats.dropped_paths += o.dropped;
        if (o.skip_reason) {
            ++result.stats.skipped_records;
            result.stats.skip_reasons.emplace_back(records[i].id, *o.skip_reason);
        }
        for (auto& e : o.examples) merged.push_back(std::move(e));
    }
    result.stats.merged_examples = merged.size();
    result.examples = filter_sft_dataset(merged, options.lower_pct, options.upper_pct, options.strategy.end_think);
    result.stats.kept_examples = result.examples.size();
    return result;
}

}  // namespace divr
