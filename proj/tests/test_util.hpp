#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace testutil {

/// Small generator wrapper for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : eng_(seed) {}

    std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }
    std::size_t between(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_);
    }
    double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
    double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(eng_); }
    std::mt19937_64& engine() { return eng_; }

    /// Words (some of them function words) with sentence punctuation mixed in.
    std::vector<std::string> tokens(std::size_t n) {
        static const std::vector<std::string> vocab = {
            "the", "of", "and", "a", "to", "in", "is", "it", "that", "cat", "dog", "river", "sat", "ran",
            "think", "role", "answer", "maybe", "doctor", "parent", "blue", "quick", "slow", "wait", ","};
        static const std::vector<std::string> ends = {".", "?", "!"};
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i)
            out.push_back(below(7) == 0 ? ends[below(ends.size())] : vocab[below(vocab.size())]);
        return out;
    }

    /// Sentences that each end with a terminal.
    std::vector<std::vector<std::string>> sentences(std::size_t count) {
        std::vector<std::vector<std::string>> out;
        static const std::vector<std::string> ends = {".", "?", "!"};
        for (std::size_t s = 0; s < count; ++s) {
            auto body = tokens(between(1, 12));
            for (auto& t : body)
                if (t == "." || t == "?" || t == "!") t = "word";
            body.push_back(ends[below(ends.size())]);
            out.push_back(std::move(body));
        }
        return out;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace testutil
