#include "outskirt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "outskirt/error.hpp"
#include "outskirt/rng.hpp"

namespace outskirt::metrics {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DataError("roc_auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // doubled ranks keep tie averages integral: rank2 = first + last (1-based)
    std::uint64_t rank2_pos = 0;
    std::uint64_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const std::uint64_t rank2 = (i + 1) + j;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank2_pos += rank2;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::uint64_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("roc_auc needs both positive and negative labels");
    // 2U = sum(rank2 of positives) - n_pos (n_pos + 1)
    const std::uint64_t u2 = rank2_pos - n_pos * (n_pos + 1);
    return static_cast<double>(u2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

Confusion confusion(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size()) throw DataError("confusion: length mismatch");
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool p = predicted[i] == 1, t = labels[i] == 1;
        if (p && t) ++c.tp;
        else if (!p && t) ++c.fn;
        else if (p && !t) ++c.fp;
        else ++c.tn;
    }
    return c;
}

std::vector<int> predict_labels(std::span<const double> scores) {
    std::vector<int> out(scores.size());
    std::transform(scores.begin(), scores.end(), out.begin(), [](double s) { return s > 0.0 ? 1 : 0; });
    return out;
}

namespace {

double ratio(std::size_t num, std::size_t den, bool& flag) {
    if (den == 0) {
        flag = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double precision, double recall, bool& flag) {
    if (precision + recall == 0.0) {
        flag = true;
        return 0.0;
    }
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

Rates rates(const Confusion& c) {
    Rates r;
    bool z = false;
    r.tpr = ratio(c.tp, c.tp + c.fn, z);
    r.fpr = ratio(c.fp, c.fp + c.tn, z);
    r.precision = ratio(c.tp, c.tp + c.fp, z);
    r.recall = r.tpr;
    r.f1_inlier = f1_of(r.precision, r.recall, z);

    // outlier class viewed as positive
    const double prec_out = ratio(c.tn, c.tn + c.fn, z);
    const double rec_out = ratio(c.tn, c.tn + c.fp, z);
    const double f1_out = f1_of(prec_out, rec_out, z);
    const auto support_in = c.tp + c.fn, support_out = c.tn + c.fp;
    const auto total = support_in + support_out;
    r.f1_weighted = total == 0 ? 0.0
                               : (r.f1_inlier * static_cast<double>(support_in) +
                                  f1_out * static_cast<double>(support_out)) /
                                     static_cast<double>(total);
    r.zero_division = z;
    return r;
}

double f1_weighted(std::span<const int> predicted, std::span<const int> labels) {
    return rates(confusion(predicted, labels)).f1_weighted;
}

TprFpr tpr_fpr(std::span<const int> predicted, std::span<const int> labels) {
    const auto r = rates(confusion(predicted, labels));
    return {r.tpr, r.fpr};
}

FoldMetrics evaluate(std::span<const double> scores, std::span<const int> labels) {
    FoldMetrics m;
    m.auc = roc_auc(scores, labels);
    const auto pred = predict_labels(scores);
    m.confusion = confusion(pred, labels);
    m.rates = rates(m.confusion);
    m.n_pos = m.confusion.tp + m.confusion.fn;
    m.n_neg = m.confusion.fp + m.confusion.tn;
    return m;
}

FoldMetrics aggregate(std::span<const FoldMetrics> folds) {
    FoldMetrics a;
    if (folds.empty()) return a;
    const double k = static_cast<double>(folds.size());
    a.outlier_pct = folds.front().outlier_pct;
    for (const auto& f : folds) {
        a.auc += f.auc / k;
        a.rates.tpr += f.rates.tpr / k;
        a.rates.fpr += f.rates.fpr / k;
        a.rates.precision += f.rates.precision / k;
        a.rates.recall += f.rates.recall / k;
        a.rates.f1_inlier += f.rates.f1_inlier / k;
        a.rates.f1_weighted += f.rates.f1_weighted / k;
        a.rates.zero_division = a.rates.zero_division || f.rates.zero_division;
        a.confusion.tp += f.confusion.tp;
        a.confusion.fn += f.confusion.fn;
        a.confusion.fp += f.confusion.fp;
        a.confusion.tn += f.confusion.tn;
        a.n_pos += f.n_pos;
        a.n_neg += f.n_neg;
    }
    return a;
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("k-fold needs k >= 2");
    if (n < k) {
        throw DataError("k-fold needs at least k=" + std::to_string(k) + " samples, got " + std::to_string(n));
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Engine engine(seed);
    std::shuffle(idx.begin(), idx.end(), engine);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t at = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(at),
                        idx.begin() + static_cast<std::ptrdiff_t>(at + size));
        std::sort(folds[f].begin(), folds[f].end());
        at += size;
    }
    return folds;
}

std::size_t outlier_count(double pct, std::size_t test_inliers) {
    if (!(pct > 0.0 && pct < 100.0)) throw ConfigError("outlier percentage must be in (0, 100)");
    return static_cast<std::size_t>(std::llround(pct / (100.0 - pct) * static_cast<double>(test_inliers)));
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

namespace {

void write_row(std::ostream& os, const std::string& fold, const FoldMetrics& m) {
    os << fold << ',' << format_number(m.outlier_pct) << ',' << format_number(m.auc) << ','
       << format_number(m.rates.f1_weighted) << ',' << format_number(m.rates.f1_inlier) << ','
       << format_number(m.rates.precision) << ',' << format_number(m.rates.recall) << ','
       << format_number(m.rates.tpr) << ',' << format_number(m.rates.fpr) << ',' << m.confusion.tp << ','
       << m.confusion.fn << ',' << m.confusion.fp << ',' << m.confusion.tn << ',' << m.n_pos << ','
       << m.n_neg << '\n';
}

}  // namespace

void write_report_csv(std::ostream& os, const EvalReport& report, bool header) {
    if (header) os << "fold,outlier_pct,auc,f1,f1_inlier,precision,recall,tpr,fpr,tp,fn,fp,tn,n_pos,n_neg\n";
    for (const auto& f : report.per_fold) write_row(os, std::to_string(f.fold), f);
    write_row(os, "mean", report.aggregate);
}

}  // namespace outskirt::metrics
