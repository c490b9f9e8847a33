#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <doctest.h>

#include "outskirt/error.hpp"
#include "outskirt/metrics.hpp"

using namespace outskirt;
using namespace outskirt::metrics;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            ++pairs;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return wins / static_cast<double>(pairs);
}

std::vector<int> labels_from(const Confusion& c, std::vector<int>& predicted) {
    std::vector<int> labels;
    predicted.clear();
    auto push = [&](std::size_t n, int y, int p) {
        for (std::size_t i = 0; i < n; ++i) {
            labels.push_back(y);
            predicted.push_back(p);
        }
    };
    push(c.tp, 1, 1);
    push(c.fn, 1, 0);
    push(c.fp, 0, 1);
    push(c.tn, 0, 0);
    return labels;
}

}  // namespace

TEST_CASE("roc_auc: simple cases") {
    CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}) == 1.0);
    CHECK(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}) == 0.5);
    const std::vector<double> s{0.3, 0.7, 0.7, 0.1, 0.9, 0.4};
    const std::vector<int> y{1, 0, 1, 0, 1, 0};
    CHECK(roc_auc(s, y) == doctest::Approx(pairwise_auc(s, y)));
    CHECK_THROWS_AS(roc_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), DataError);
}

TEST_CASE("roc_auc: matches brute force on random sets") {
    std::mt19937_64 e(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> size(2, 60), bit(0, 1), level(0, 9);
        const auto n = static_cast<std::size_t>(size(e));
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = level(e) / 10.0;  // coarse levels force ties
            y[i] = bit(e);
        }
        y[0] = 1;
        y[1] = 0;
        CHECK(roc_auc(s, y) == doctest::Approx(pairwise_auc(s, y)).epsilon(1e-12));
    }
}

TEST_CASE("roc_auc: monotone transforms and score negation") {
    std::mt19937_64 e(5);
    std::normal_distribution<double> normal;
    std::vector<double> s(100), t(100), neg(100);
    std::vector<int> y(100);
    for (std::size_t i = 0; i < 100; ++i) {
        y[i] = static_cast<int>(i % 3 == 0);
        s[i] = normal(e) + y[i];
        t[i] = std::exp(3.0 * s[i]);
        neg[i] = -s[i];
    }
    CHECK(roc_auc(s, y) == roc_auc(t, y));
    CHECK(roc_auc(s, y) + roc_auc(neg, y) == doctest::Approx(1.0));
}

TEST_CASE("rates: confusion example") {
    const Confusion c{90, 10, 5, 95};
    const auto r = rates(c);
    CHECK(r.tpr == doctest::Approx(0.9));
    CHECK(r.fpr == doctest::Approx(0.05));
    CHECK(r.precision == doctest::Approx(90.0 / 95.0));
    CHECK(r.recall == doctest::Approx(0.9));
    CHECK(!r.zero_division);

    // support-weighted F1 recomputed from per-class precision and recall
    const double f_in = 2 * (90.0 / 95.0) * 0.9 / (90.0 / 95.0 + 0.9);
    const double p_out = 95.0 / 105.0, r_out = 95.0 / 100.0;
    const double f_out = 2 * p_out * r_out / (p_out + r_out);
    CHECK(r.f1_inlier == doctest::Approx(f_in));
    CHECK(r.f1_weighted == doctest::Approx((100 * f_in + 100 * f_out) / 200));

    std::vector<int> predicted;
    const auto labels = labels_from(c, predicted);
    const auto c2 = confusion(predicted, labels);
    CHECK(c2.tp == 90);
    CHECK(c2.fn == 10);
    CHECK(c2.fp == 5);
    CHECK(c2.tn == 95);
    CHECK(f1_weighted(predicted, labels) == r.f1_weighted);
    CHECK(tpr_fpr(predicted, labels).tpr == r.tpr);
    CHECK(tpr_fpr(predicted, labels).fpr == r.fpr);
}

TEST_CASE("rates: perfect and all-positive predictions") {
    const auto perfect = rates(Confusion{10, 0, 0, 10});
    CHECK(perfect.f1_weighted == 1.0);
    CHECK(perfect.tpr == 1.0);
    CHECK(perfect.fpr == 0.0);

    const auto all_pos = rates(Confusion{10, 0, 10, 0});
    CHECK(all_pos.tpr == 1.0);
    CHECK(all_pos.fpr == 1.0);
    CHECK(all_pos.zero_division);  // outlier-class precision has no predictions

    const auto none = rates(Confusion{0, 10, 0, 10});
    CHECK(none.precision == 0.0);
    CHECK(none.zero_division);
}

TEST_CASE("predict_labels thresholds at zero") {
    CHECK(predict_labels(std::vector<double>{-1.0, 0.0, 0.5}) == std::vector<int>{0, 0, 1});
}

TEST_CASE("evaluate and aggregate") {
    const auto m = evaluate(std::vector<double>{1, 2, -1, -2, 0.5}, std::vector<int>{1, 1, 0, 0, 0});
    CHECK(m.auc == 1.0);
    CHECK(m.n_pos == 2);
    CHECK(m.n_neg == 3);
    CHECK(m.confusion.fp == 1);

    FoldMetrics a = m, b = m;
    b.auc = 0.5;
    const auto agg = aggregate(std::vector<FoldMetrics>{a, b});
    CHECK(agg.auc == 0.75);
    CHECK(agg.n_pos == 4);
}

TEST_CASE("kfold_split") {
    const auto folds = kfold_split(10, 5, 1);
    REQUIRE(folds.size() == 5);
    std::set<std::size_t> seen;
    for (const auto& f : folds) {
        CHECK(f.size() == 2);
        seen.insert(f.begin(), f.end());
    }
    CHECK(seen.size() == 10);
    CHECK(kfold_split(10, 5, 1) == folds);
    CHECK(kfold_split(10, 5, 2) != folds);

    const auto uneven = kfold_split(13, 5, 3);
    std::size_t lo = 100, hi = 0, total = 0;
    for (const auto& f : uneven) {
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
        total += f.size();
    }
    CHECK(hi - lo <= 1);
    CHECK(total == 13);
    CHECK_THROWS_AS(kfold_split(3, 5, 0), DataError);
}

TEST_CASE("outlier_count") {
    CHECK(outlier_count(20, 80) == 20);
    CHECK(outlier_count(50, 100) == 100);
    CHECK(outlier_count(10, 90) == 10);
    CHECK_THROWS_AS(outlier_count(100, 90), ConfigError);
}

TEST_CASE("report CSV has one row per fold plus the mean") {
    EvalReport r;
    r.per_fold.push_back(evaluate(std::vector<double>{1, -1}, std::vector<int>{1, 0}));
    r.per_fold.push_back(evaluate(std::vector<double>{1, 2}, std::vector<int>{1, 0}));
    r.per_fold[1].fold = 1;
    r.aggregate = aggregate(r.per_fold);
    std::ostringstream os;
    write_report_csv(os, r);
    const auto text = os.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(text.rfind("fold,outlier_pct,auc,", 0) == 0);
    CHECK(text.find("\nmean,") != std::string::npos);
    CHECK(format_number(0.5) == "0.500000");
    CHECK(format_number(std::nan("")) == "nan");
}
