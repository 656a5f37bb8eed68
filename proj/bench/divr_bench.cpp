// Serial vs OpenMP timings for batch scoring and weight calibration.
//
//   divr_bench [texts] [samples]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "divr/batch.hpp"
#include "divr/calibration.hpp"
#include "divr/rng.hpp"

namespace {

template <typename F>
double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> make_texts(std::size_t n, divr::Rng& rng) {
    static const char* words[] = {"the", "a", "model", "role", "think", "answer", "because", "perhaps", "wait",
                                  "doctor", "parent", "and", "of", "is", "not", "clear", "evidence", "we"};
    static const char* ends[] = {".", "?", "!"};
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < n; ++i) {
        std::string t;
        const auto len = 50 + rng.index(400);
        for (std::uint64_t k = 0; k < len; ++k) {
            t += words[rng.index(std::size(words))];
            t += rng.index(9) == 0 ? std::string(ends[rng.index(3)]) + " " : " ";
        }
        texts.push_back(std::move(t));
    }
    return texts;
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t n_texts = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
    const std::size_t n_samples = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 60;
    divr::Rng rng(7);
    const auto& lexicon = divr::FunctionWordLexicon::builtin();

    const auto texts = make_texts(n_texts, rng);
    std::vector<std::optional<divr::DiversityReport>> a, b;
    const double batch_serial = seconds([&] { a = divr::score_batch_serial(texts, lexicon); });
    const double batch_par = seconds([&] { b = divr::score_batch(texts, lexicon); });

    std::vector<divr::CalibrationSample> samples;
    for (std::size_t i = 0; i < n_samples; ++i) {
        std::array<double, divr::kSubMetricCount> s{};
        for (auto& x : s) x = rng.unit();
        samples.push_back({divr::DiversityReport::from_sub_scores(s), rng.unit()});
    }
    divr::CalibrationResult ra, rb;
    const double cal_serial = seconds([&] { ra = divr::calibrate_weights_serial(samples); });
    const double cal_par = seconds([&] { rb = divr::calibrate_weights(samples); });

    std::printf("threads %d\n", divr::worker_threads());
    std::printf("%-22s %10s %10s %8s\n", "kernel", "serial_s", "openmp_s", "speedup");
    std::printf("%-22s %10.4f %10.4f %8.2f\n", "score_batch", batch_serial, batch_par, batch_serial / batch_par);
    std::printf("%-22s %10.4f %10.4f %8.2f\n", "calibrate_weights", cal_serial, cal_par, cal_serial / cal_par);
    std::printf("calibration agree: %s (r = %.6f vs %.6f)\n",
                ra.weights.as_array() == rb.weights.as_array() ? "yes" : "no", ra.correlation, rb.correlation);
    return 0;
}
