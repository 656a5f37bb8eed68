#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "divr/error.hpp"
#include "divr/reward.hpp"
#include "test_util.hpp"

using namespace divr;

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

double oracle_mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double oracle_pstd(const std::vector<double>& v) {
    const double m = oracle_mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

TEST_CASE("shaped reward coefficients") {
    CHECK(shaped_reward(1, 0).r_total == 0.9);
    CHECK(shaped_reward(0, 1).r_total == 0.1);
    CHECK(shaped_reward(1, 1).r_total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(shaped_reward(0, 0.5).r_total == doctest::Approx(0.05).epsilon(1e-15));
    const auto b = shaped_reward(0.25, 0.75, {0.6, 0.4});
    CHECK(b.alpha_acc == 0.6);
    CHECK(b.alpha_div == 0.4);
    CHECK(b.r_total == doctest::Approx(0.45).epsilon(1e-12));
}

TEST_CASE("shaped reward rejects bad input") {
    CHECK(kind_of([] { shaped_reward(1.5, 0); }) == ErrorKind::InvalidScore);
    CHECK(kind_of([] { shaped_reward(0.5, -0.1); }) == ErrorKind::InvalidScore);
    CHECK(kind_of([] { shaped_reward(NAN, 0.1); }) == ErrorKind::InvalidScore);
    CHECK(kind_of([] { shaped_reward(0.5, 0.5, {0.7, 0.7}); }) == ErrorKind::InvalidScore);
}

TEST_CASE("property: breakdown invariant") {
    testutil::Gen gen(3);
    for (int i = 0; i < 1000; ++i) {
        const double a = gen.unit(), d = gen.unit();
        const auto b = shaped_reward(a, d);
        CHECK(b.r_acc == a);
        CHECK(b.r_div == d);
        CHECK(std::abs(b.r_total - (0.9 * a + 0.1 * d)) < 1e-9);
        CHECK(b.r_total >= 0.0);
        CHECK(b.r_total <= 1.0);
    }
}

TEST_CASE("group advantages examples") {
    CHECK(group_advantages(std::vector<double>{1, 1, 1, 1}) == std::vector<double>{0, 0, 0, 0});
    const auto two = group_advantages(std::vector<double>{0, 1});
    CHECK(two[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(two[1] == doctest::Approx(1.0).epsilon(1e-12));
    const auto three = group_advantages(std::vector<double>{2, 4, 6});
    CHECK(std::abs(three[0] + 1.2247) < 1e-4);
    CHECK(std::abs(three[1]) < 1e-12);
    CHECK(std::abs(three[2] - 1.2247) < 1e-4);
    CHECK(group_advantages(std::vector<double>{0.7}) == std::vector<double>{0});
    CHECK(kind_of([] { group_advantages(std::vector<double>{}); }) == ErrorKind::EmptyGroup);
}

TEST_CASE("property: advantages are standardized and affine invariant") {
    testutil::Gen gen(42);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> r(gen.between(2, 16));
        for (auto& x : r) x = gen.unit();
        if (oracle_pstd(r) <= kDefaultSigmaFloor) continue;
        const auto adv = group_advantages(r);
        CHECK(std::abs(oracle_mean(adv)) < 1e-9);
        CHECK(std::abs(oracle_pstd(adv) - 1.0) < 1e-9);
        const double scale = 0.5 + gen.unit() * 4, shift = gen.unit() * 6 - 3;
        auto moved = r;
        for (auto& x : moved) x = scale * x + shift;
        const auto adv2 = group_advantages(moved);
        for (std::size_t i = 0; i < r.size(); ++i) CHECK(std::abs(adv[i] - adv2[i]) < 1e-9);
    }
}

TEST_CASE("accuracy under divergent and convergent merging") {
    const auto div = GroundTruth::divergent({{"r1", "A"}, {"r2", "C"}});
    CHECK(accuracy_reward({{"r1", "A"}, {"r2", "B"}}, div) == 0.5);
    const auto con = GroundTruth::convergent("A");
    CHECK(accuracy_reward({{"r1", "A"}, {"r2", "A"}, {"r3", "B"}}, con) == 1.0);
    // Tie: earliest role's answer (A) wins the vote.
    CHECK(accuracy_reward({{"r1", "A"}, {"r2", "B"}}, GroundTruth::convergent("B")) == 0.0);
    CHECK(accuracy_reward({{"r1", "A"}, {"r2", "B"}}, GroundTruth::convergent("A")) == 1.0);
}

TEST_CASE("accuracy errors") {
    const auto div = GroundTruth::divergent({{"r1", "A"}, {"r2", "C"}});
    CHECK(kind_of([&] { accuracy_reward({{"r1", "A"}}, div); }) == ErrorKind::MissingRoleAnswer);
    CHECK(kind_of([&] { accuracy_reward({}, GroundTruth::convergent("A")); }) == ErrorKind::EmptyGroup);
    GroundTruth bad;
    bad.mode = MergeMode::Convergent;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidGroundTruth);
    CHECK(kind_of([] { GroundTruth::divergent({{"r1", "A"}, {"r1", "B"}}); }) == ErrorKind::InvalidGroundTruth);
}

TEST_CASE("property: divergent accuracy is the mean of indicators") {
    for (std::size_t n = 1; n <= 6; ++n) {
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
            RoleAnswers truth, answers;
            unsigned correct = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto role = "role" + std::to_string(i);
                truth.emplace_back(role, "A");
                const bool hit = (mask >> i) & 1u;
                correct += hit;
                answers.emplace_back(role, hit ? "A" : "B");
            }
            // Extra roles in the answers are ignored.
            answers.emplace_back("bystander", "Z");
            const double acc = accuracy_reward(answers, GroundTruth::divergent(truth));
            CHECK(acc == doctest::Approx(static_cast<double>(correct) / static_cast<double>(n)).epsilon(1e-15));
        }
    }
}

TEST_CASE("property: convergent accuracy ignores role order under a strict majority") {
    testutil::Gen gen(8);
    const std::vector<std::string> alphabet{"A", "B", "C"};
    for (int trial = 0; trial < 500; ++trial) {
        RoleAnswers answers;
        const std::size_t n = gen.between(1, 7);
        for (std::size_t i = 0; i < n; ++i) answers.emplace_back("r" + std::to_string(i), alphabet[gen.below(3)]);
        std::map<std::string, int> counts;
        for (const auto& [_, a] : answers) counts[a]++;
        int top = 0, tops = 0;
        for (const auto& [_, c] : counts) top = std::max(top, c);
        for (const auto& [_, c] : counts) tops += c == top;
        if (tops != 1) continue;
        const auto truth = GroundTruth::convergent(alphabet[gen.below(3)]);
        const double base = accuracy_reward(answers, truth);
        auto shuffled = answers;
        std::shuffle(shuffled.begin(), shuffled.end(), gen.engine());
        CHECK(accuracy_reward(shuffled, truth) == base);
    }
}

TEST_CASE("majority index") {
    const std::vector<std::string> a{"B", "A", "A", "B", "C"};
    CHECK(majority_index(a) == 0);
    const std::vector<std::string> b{"C", "A", "A"};
    CHECK(majority_index(b) == 1);
    CHECK(kind_of([] { majority_index(std::vector<std::string>{}); }) == ErrorKind::EmptyGroup);
}

TEST_CASE("ground truth JSON") {
    const auto t = GroundTruth::divergent({{"zeta", "A"}, {"alpha", "B"}});
    const auto back = ground_truth_from_json(to_json(t));
    CHECK(back.per_role_answers == t.per_role_answers);
    const auto obj = ground_truth_from_json(nlohmann::json::parse(R"({"mode":"divergent","per_role_answers":{"x":"A"}})"));
    CHECK(obj.per_role_answers == RoleAnswers{{"x", "A"}});
    CHECK(ground_truth_from_json(to_json(GroundTruth::convergent("Yes"))).scalar_answer == "Yes");
    CHECK(kind_of([] { ground_truth_from_json(nlohmann::json::parse(R"({"mode":"sideways"})")); }) ==
          ErrorKind::ParseError);
    CHECK(parse_merge_mode("divergent") == MergeMode::Divergent);
}

TEST_CASE("rollout group") {
    std::vector<Completion> cs{{"x", {}}, {"y", {}}};
    std::vector<RewardBreakdown> rs{shaped_reward(1, 0.2), shaped_reward(1, 0.6)};
    const RolloutGroup g(cs, rs);
    CHECK(g.size() == 2);
    CHECK(g.advantages()[0] == doctest::Approx(-1.0).epsilon(1e-9));
    const auto j = g.to_json();
    CHECK(j["breakdowns"].size() == 2);
    CHECK(j["breakdowns"][0]["total"].get<double>() == doctest::Approx(0.92).epsilon(1e-12));
    CHECK(j["advantages"].size() == 2);
    CHECK(kind_of([] { RolloutGroup({}, {}); }) == ErrorKind::EmptyGroup);
}
