#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "divr/rng.hpp"
#include "divr/transport.hpp"

namespace divr {

/// Offline stand-in for an OpenAI-compatible server, selected with a
/// "mock://" base URL. Every response is a pure function of the request
/// body, so runs are reproducible without a network:
///   - role-generation prompts get a bracketed list of 2-4 roles;
///   - reasoning prompts get a few sentences, the end-of-thinking delimiter
///     and an answer in whatever bold format the prompt asks for;
///   - embeddings are signed hashed bags of words, L2-normalized (64 dims).
class SimulatedTransport : public Transport {
public:
    explicit SimulatedTransport(std::string end_think = "</think>") : end_think_(std::move(end_think)) {}

    HttpResponse post(const std::string& path, const std::string& body, const Headers& headers) override;

    static constexpr std::size_t kEmbeddingDim = 64;
    static std::vector<double> embed_text(std::string_view text);

private:
    std::string chat(const std::string& prompt, const std::string& prefix, std::uint64_t seed) const;

    std::string end_think_;
};

}  // namespace divr
