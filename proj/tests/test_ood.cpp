#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "llc/error.hpp"
#include "llc/ood.hpp"
#include "llc/rng.hpp"

using llc::BitCode;
using llc::Codebook;
using llc::DecodeIndex;
using llc::RandomStream;

namespace {

BitCode code_from_value(std::size_t value, std::size_t k) {
    BitCode c(k);
    for (std::size_t b = 0; b < k; ++b) c.set_bit(b, (value >> b) & 1u);
    return c;
}

// Same contract as the tuned rule, evaluated by brute force over a dense
// grid built from the observed scores.
double oracle_best_f1(const std::vector<double>& in_scores,
                      const std::vector<double>& ood_scores) {
    std::vector<double> all = in_scores;
    all.insert(all.end(), ood_scores.begin(), ood_scores.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    std::vector<double> grid;
    grid.push_back(all.front() - 1.0);  // below everything: flags nothing
    for (std::size_t i = 0; i + 1 < all.size(); ++i) grid.push_back(0.5 * (all[i] + all[i + 1]));
    grid.push_back(all.back());  // flags everything

    double best = -1.0;
    for (double t : grid) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (double s : ood_scores) (s <= t ? tp : fn)++;
        for (double s : in_scores)
            if (s <= t) ++fp;
        const double precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
        const double recall = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
        const double f1 =
            precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        best = std::max(best, f1);
    }
    return best;
}

}  // namespace

TEST_CASE("exact-miss flags exactly the codes outside the codebook, exhaustively at k = 10") {
    const std::size_t k = 10;
    RandomStream rng(83);
    std::vector<BitCode> codes;
    std::vector<bool> present(1u << k, false);
    while (codes.size() < 17) {
        const std::size_t value = rng.below(1u << k);
        if (present[value]) continue;
        present[value] = true;
        codes.push_back(code_from_value(value, k));
    }
    DecodeIndex index(Codebook(k, codes));

    std::size_t flagged = 0;
    for (std::size_t value = 0; value < (1u << k); ++value) {
        const bool miss = llc::exact_miss_detect(index, code_from_value(value, k));
        CHECK(miss == !present[value]);
        flagged += miss;
    }
    CHECK(flagged == (1u << k) - 17);
}

TEST_CASE("tuned threshold beats or matches a brute-force grid on 200 random score sets") {
    RandomStream rng(89);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n_in = 2 + rng.below(30);
        const std::size_t n_ood = 2 + rng.below(30);
        std::vector<double> in_scores(n_in), ood_scores(n_ood);
        // Uniform scores with random overlap; occasional duplicates via rounding.
        for (auto& s : in_scores) s = std::round(rng.uniform() * 20.0) / 20.0;
        for (auto& s : ood_scores) s = std::round(rng.uniform() * 16.0) / 16.0;

        const llc::ThresholdModel model = llc::tune_threshold_max_f1(in_scores, ood_scores);
        CHECK(model.calibration_count == n_in + n_ood);

        // F1 achieved by the chosen threshold.
        std::size_t tp = 0, fp = 0, fn = 0;
        for (double s : ood_scores) (model.is_ood(s) ? tp : fn)++;
        for (double s : in_scores)
            if (model.is_ood(s)) ++fp;
        const double precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
        const double recall = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
        const double f1 =
            precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        CHECK(f1 == doctest::Approx(oracle_best_f1(in_scores, ood_scores)).epsilon(1e-12));
    }
}

TEST_CASE("perfectly separated scores tune to a perfect, lowest-possible threshold") {
    // OOD scores all below ID scores: the first midpoint above the OOD block
    // achieves F1 = 1; ties resolve to the lowest candidate.
    std::vector<double> in_scores{0.8, 0.9, 0.95};
    std::vector<double> ood_scores{0.1, 0.2, 0.3};
    const auto model = llc::tune_threshold_max_f1(in_scores, ood_scores);
    CHECK(model.threshold == doctest::Approx(0.55).epsilon(1e-12));  // midpoint of 0.3 and 0.8
    for (double s : ood_scores) CHECK(model.is_ood(s));
    for (double s : in_scores) CHECK_FALSE(model.is_ood(s));
}

TEST_CASE("identical score distributions degenerate to flagging everything") {
    // With equal scores on both sides every candidate yields the same
    // precision, so recall decides and the all-positive boundary wins F1.
    std::vector<double> same{0.5, 0.5, 0.5};
    const auto model = llc::tune_threshold_max_f1(same, same);
    CHECK(model.threshold == 0.5);
    CHECK(model.is_ood(0.5));
}

TEST_CASE("conservative threshold is mean plus one population standard deviation") {
    const auto two = llc::conservative_threshold({0.1, 0.3});
    CHECK(two.threshold == doctest::Approx(0.3).epsilon(1e-12));  // 0.2 + 0.1
    CHECK(two.calibration_count == 2);

    const auto flat = llc::conservative_threshold({0.2, 0.2, 0.2, 0.2});
    CHECK(flat.threshold == doctest::Approx(0.2).epsilon(1e-12));

    // Clamped into [0, 1] no matter the calibration values.
    CHECK(llc::conservative_threshold({5.0, 5.0}).threshold == 1.0);
    CHECK_THROWS_AS(llc::conservative_threshold({}), llc::ValidationError);
}

TEST_CASE("with shared calibration data the tuned rule is at least as good as the conservative one") {
    RandomStream rng(97);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> in_scores(40), ood_scores(40);
        for (auto& s : in_scores) s = 0.5 + 0.5 * rng.uniform();
        for (auto& s : ood_scores) s = 0.7 * rng.uniform();
        const auto tuned = llc::tune_threshold_max_f1(in_scores, ood_scores);
        const auto conservative = llc::conservative_threshold(ood_scores);

        auto f1_of = [&](const llc::ThresholdModel& m) {
            std::vector<llc::OodVerdict> verdicts;
            std::vector<llc::OodTruth> truth;
            std::size_t id = 0;
            for (double s : in_scores) {
                verdicts.push_back({id, m.is_ood(s), llc::OodRule::tuned_threshold, s});
                truth.push_back({id, false});
                ++id;
            }
            for (double s : ood_scores) {
                verdicts.push_back({id, m.is_ood(s), llc::OodRule::tuned_threshold, s});
                truth.push_back({id, true});
                ++id;
            }
            return llc::evaluate_f1(verdicts, truth).f1;
        };
        CHECK(f1_of(tuned) >= f1_of(conservative) - 1e-12);
    }
}

TEST_CASE("f1 evaluation counts OOD as the positive class") {
    std::vector<llc::OodVerdict> verdicts{{0, true, llc::OodRule::exact_miss, {}},
                                          {1, true, llc::OodRule::exact_miss, {}},
                                          {2, false, llc::OodRule::exact_miss, {}},
                                          {3, false, llc::OodRule::exact_miss, {}}};
    std::vector<llc::OodTruth> truth{{0, true}, {1, false}, {2, true}, {3, false}};
    const auto report = llc::evaluate_f1(verdicts, truth);
    CHECK(report.true_positives == 1);
    CHECK(report.false_positives == 1);
    CHECK(report.false_negatives == 1);
    CHECK(report.precision == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(report.recall == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(report.f1 == doctest::Approx(0.5).epsilon(1e-12));

    // No predicted positives: precision and F1 fall back to zero.
    std::vector<llc::OodVerdict> nothing{{0, false, llc::OodRule::exact_miss, {}}};
    std::vector<llc::OodTruth> one_ood{{0, true}};
    const auto silent = llc::evaluate_f1(nothing, one_ood);
    CHECK(silent.precision == 0.0);
    CHECK(silent.f1 == 0.0);

    std::vector<llc::OodTruth> reordered{{7, true}};
    CHECK_THROWS_AS(llc::evaluate_f1(nothing, reordered), llc::ValidationError);
    CHECK_THROWS_AS(llc::evaluate_f1(nothing, truth), llc::ValidationError);
}

TEST_CASE("max softmax probability from scores and from distances") {
    // Equal scores spread mass evenly: max probability 1/3.
    llc::Matrix scores(2, 3);
    scores.fill(1.0);
    scores.at(1, 0) = 100.0;  // dominant class concentrates the mass
    const auto p = llc::max_softmax_probability(scores);
    CHECK(p[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0).epsilon(1e-12));

    // Distances act as negated scores; {0, 1} gives 1/(1 + e^-1).
    const auto q = llc::max_probability_from_distances({{0, 1}, {4, 4, 4, 4}});
    CHECK(q[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(q[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK_THROWS_AS(llc::max_probability_from_distances({{}}), llc::ValidationError);
}

TEST_CASE("the sweep exposes every candidate and contains the tuned optimum") {
    std::vector<double> in_scores{0.9, 0.7};
    std::vector<double> ood_scores{0.1, 0.4};
    const auto sweep = llc::f1_sweep(in_scores, ood_scores);
    REQUIRE(sweep.size() == 4);  // 3 midpoints + max boundary
    const auto tuned = llc::tune_threshold_max_f1(in_scores, ood_scores);
    double best = -1.0;
    for (const auto& point : sweep) best = std::max(best, point.f1);
    bool found = false;
    for (const auto& point : sweep)
        found |= point.threshold == tuned.threshold && point.f1 == best;
    CHECK(found);
    CHECK_THROWS_AS(llc::f1_sweep({}, ood_scores), llc::ValidationError);
}
