// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Heavy criteria (MNIST, ablation, grid) run the real pipeline.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "outskirt/boundary.hpp"
#include "outskirt/classify.hpp"
#include "outskirt/data_io.hpp"
#include "outskirt/error.hpp"
#include "outskirt/hierarchy.hpp"
#include "outskirt/metrics.hpp"
#include "outskirt/pipeline.hpp"
#include "outskirt/rng.hpp"

using namespace outskirt;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using nnet::Matrix;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

std::string reports_csv(const pipeline::ExperimentResult& r) {
    std::ostringstream os;
    for (std::size_t i = 0; i < r.reports.size(); ++i) metrics::write_report_csv(os, r.reports[i], i == 0);
    return os.str();
}

pipeline::PipelineConfig preset(const std::string& name) {
    return pipeline::load_config(OUTSKIRT_CONFIG_DIR "/" + name + ".conf");
}

// ---------------------------------------------------------------------------
// Criteria 1, 2 and 7 share the MNIST runs.

struct MnistRuns {
    pipeline::ExperimentResult first, second;
    double first_seconds = 0.0;
    std::size_t epochs = 0;
    std::string csv_first, csv_second;
};

MnistRuns run_mnist(const std::string& dir, const fs::path& work) {
    auto cfg = preset("mnist");
    cfg.outlier_pcts = {10, 20, 30, 40, 50};
    MnistRuns r;
    r.epochs = cfg.train.epochs;

    const auto t0 = Clock::now();
    const auto data = pipeline::split_by_class(data_io::load_mnist_dir(dir), cfg.inlier_class);
    r.first = pipeline::run_experiment(cfg, data, 1);
    r.first_seconds = seconds_since(t0);

    r.second = pipeline::run_experiment(cfg, pipeline::split_by_class(data_io::load_mnist_dir(dir), cfg.inlier_class), 8);
    r.csv_first = reports_csv(r.first);
    r.csv_second = reports_csv(r.second);
    write_text(work / "mnist_workers1.csv", r.csv_first);
    write_text(work / "mnist_workers8.csv", r.csv_second);
    return r;
}

Outcome criterion1(const MnistRuns& r) {
    const auto& rep = r.first.reports.back();  // 50%
    const double auc = rep.aggregate.auc;
    Outcome o;
    o.pass = rep.aggregate.outlier_pct == 50.0 && auc >= 0.95 && r.first_seconds <= 1200.0 && r.epochs <= 50 &&
             rep.per_fold.size() == 5;
    o.detail = "MNIST class 0, 5-fold, 50% outliers: AUC " + fmt("%.4f", auc) + " (>= 0.95), " +
               fmt("%.0f", r.first_seconds) + " s (<= 1200), " + std::to_string(r.epochs) + " epochs (<= 50)";
    return o;
}

Outcome criterion2(const MnistRuns& r) {
    double lo = 1.0, hi = 0.0;
    std::string list;
    for (const auto& rep : r.first.reports) {
        lo = std::min(lo, rep.aggregate.auc);
        hi = std::max(hi, rep.aggregate.auc);
        list += (list.empty() ? "" : " ") + fmt("%.0f%%=", rep.aggregate.outlier_pct) + fmt("%.4f", rep.aggregate.auc);
    }
    return {r.first.reports.size() == 5 && hi - lo <= 0.02,
            "MNIST AUC spread over 10..50% outliers " + fmt("%.4f", hi - lo) + " (<= 0.02): " + list};
}

Outcome criterion7(const MnistRuns& r) {
    const bool same = !r.csv_first.empty() && r.csv_first == r.csv_second;
    return {same, std::string("two MNIST runs, same seed, workers 1 and 8: CSV reports ") +
                      (same ? "byte-identical" : "differ") + " (" + std::to_string(r.csv_first.size()) + " bytes)"};
}

// ---------------------------------------------------------------------------

Outcome criterion3(const fs::path& work) {
    const std::vector<std::string> names{"full", "no-vae-concat-ocsvm", "no-ae", "deterministic"};
    std::vector<double> sum(names.size(), 0.0);
    std::ostringstream csv;
    csv << "seed,variant,auc,status\n";
    bool all_ok = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto base = preset("blobs");
        base.seed = seed;
        std::vector<pipeline::AblationVariant> chosen;
        for (auto& v : pipeline::ablation_variants(base, false)) {
            if (std::find(names.begin(), names.end(), v.name) != names.end()) chosen.push_back(v);
        }
        const auto data = pipeline::from_blobs(data_io::make_blobs(200, 200, 8, 10.0, seed), "blobs");
        for (const auto& row : pipeline::ablate(chosen, data, 1)) {
            const auto k = static_cast<std::size_t>(std::find(names.begin(), names.end(), row.name) - names.begin());
            sum[k] += row.metrics.auc;
            all_ok = all_ok && row.status == "ok";
            csv << seed << ',' << row.name << ',' << metrics::format_number(row.metrics.auc) << ',' << row.status
                << '\n';
        }
    }
    write_text(work / "blobs_ablation.csv", csv.str());
    const double full = sum[0] / 5.0;
    bool pass = all_ok;
    std::string detail = "blobs ablation, 5 seeds: full " + fmt("%.4f", full);
    for (std::size_t k = 1; k < names.size(); ++k) {
        const double margin = full - sum[k] / 5.0;
        pass = pass && margin >= 0.03;
        detail += ", vs " + names[k] + " " + fmt("%.4f", sum[k] / 5.0) + " (margin " + fmt("%+.4f", margin) + ")";
    }
    return {pass, detail + " [need each margin >= 0.03]"};
}

// ---------------------------------------------------------------------------

hierarchy::LatentCatalog random_catalog(std::mt19937_64& e) {
    std::uniform_int_distribution<int> dim(1, 6), count(2, 100);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> sig(0.05, 2.0), scale(0.1, 5.0);
    const int d = dim(e), n = count(e);
    Eigen::VectorXd axis_scale(d);
    for (int j = 0; j < d; ++j) axis_scale[j] = scale(e);
    hierarchy::LatentCatalog q;
    for (int i = 0; i < n; ++i) {
        hierarchy::GaussianParams p{Eigen::VectorXd(d), Eigen::VectorXd(d)};
        for (int j = 0; j < d; ++j) {
            p.mu[j] = axis_scale[j] * normal(e);
            p.sigma[j] = sig(e);
        }
        q.entries.push_back(p);
    }
    return q;
}

// Membership recomputed from the raw inequalities.
std::vector<std::size_t> brute_members(const hierarchy::LatentCatalog& q, bool ellipsoid, double alpha) {
    const std::size_t n = q.size();
    const auto d = static_cast<Eigen::Index>(q.dim());
    std::vector<double> mean(static_cast<std::size_t>(d), 0.0), var(static_cast<std::size_t>(d), 0.0);
    std::vector<double> norms(n);
    double norm_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            mean[static_cast<std::size_t>(j)] += q.entries[i].mu[j] / static_cast<double>(n);
            sq += q.entries[i].mu[j] * q.entries[i].mu[j];
        }
        norms[i] = std::sqrt(sq);
        norm_mean += norms[i] / static_cast<double>(n);
    }
    double norm_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            const double r = q.entries[i].mu[j] - mean[static_cast<std::size_t>(j)];
            var[static_cast<std::size_t>(j)] += r * r / static_cast<double>(n - 1);
        }
        norm_var += (norms[i] - norm_mean) * (norms[i] - norm_mean) / static_cast<double>(n - 1);
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        bool member;
        if (ellipsoid) {
            double s = 0.0;
            for (Eigen::Index j = 0; j < d; ++j) {
                const double r = q.entries[i].mu[j] - mean[static_cast<std::size_t>(j)];
                s += r * r / (alpha * var[static_cast<std::size_t>(j)]);
            }
            member = s >= 1.0;
        } else {
            member = std::abs(norms[i] - norm_mean) >= alpha * std::sqrt(norm_var);
        }
        if (member) out.push_back(i);
    }
    return out;
}

Outcome criterion4() {
    std::mt19937_64 e(2024);
    std::size_t mismatches = 0, comparisons = 0, selected = 0;
    for (int c = 0; c < 200; ++c) {
        const auto q = random_catalog(e);
        const auto stats = boundary::meta_stats(q);
        for (double alpha : {0.5, 1.0, 1.5, 2.0, 3.0}) {
            for (bool ell : {true, false}) {
                const auto rule = ell ? boundary::Selector::ellipsoid : boundary::Selector::l2;
                const auto got = boundary::member_indices(rule, q, stats, alpha);
                const auto want = brute_members(q, ell, alpha);
                ++comparisons;
                selected += got.size();
                if (got != want) ++mismatches;
            }
        }
    }
    return {mismatches == 0, "selector oracle: 200 catalogs x 5 alphas x 2 rules, " + std::to_string(comparisons) +
                                 " membership sets, " + std::to_string(mismatches) + " mismatches (" +
                                 std::to_string(selected) + " members total)"};
}

// ---------------------------------------------------------------------------

Outcome criterion5() {
    std::mt19937_64 e(77);
    std::size_t samples = 0, violations = 0;
    for (auto noise : {boundary::Noise::half_normal, boundary::Noise::deterministic_one}) {
        std::size_t done = 0;
        for (std::uint64_t trial = 0; done < 10000; ++trial) {
            const auto q = random_catalog(e);
            const auto stats = boundary::meta_stats(q);
            const auto members = boundary::member_indices(boundary::Selector::ellipsoid, q, stats, 1.0);
            if (members.empty()) continue;
            const auto set = boundary::select(boundary::Selector::ellipsoid, q, stats, 1.0);
            boundary::SynthesisConfig sc;
            sc.beta = 1.0 + static_cast<double>(trial % 5);
            sc.noise = noise;
            sc.count = std::min<std::size_t>(1000, 10000 - done);
            sc.seed = trial;
            const auto y = boundary::synthesize(set, sc);
            for (Eigen::Index r = 0; r < y.points.rows(); ++r) {
                const auto& g = q.entries[y.generator[static_cast<std::size_t>(r)]];
                for (Eigen::Index j = 0; j < y.points.cols(); ++j) {
                    const double off = g.mu[j] - stats.mu_bar[j];
                    const double moved = y.points(r, j) - stats.mu_bar[j];
                    const double sign = off >= 0.0 ? 1.0 : -1.0;
                    const bool aligned = (y.points(r, j) - g.mu[j]) * sign >= 0.0;
                    if (!aligned || std::abs(moved) < std::abs(off)) ++violations;
                }
            }
            done += static_cast<std::size_t>(y.points.rows());
        }
        samples += done;
    }
    return {violations == 0 && samples == 20000,
            "directional synthesis: " + std::to_string(samples) +
                " samples (10^4 half-normal + 10^4 deterministic), " + std::to_string(violations) +
                " sign or distance violations"};
}

// ---------------------------------------------------------------------------

double central_diff(double* x, const std::function<double()>& f, double h = 1e-5) {
    const double saved = *x;
    *x = saved + h;
    const double up = f();
    *x = saved - h;
    const double down = f();
    *x = saved;
    return (up - down) / (2.0 * h);
}

bool close(double a, double b, double rtol, double atol) {
    return std::abs(a - b) <= rtol * std::max(std::abs(a), std::abs(b)) + atol;
}

Matrix uniform(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 e(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(e);
    return m;
}

// Returns {checked, failed} over every weight and bias of the hierarchy.
std::pair<std::size_t, std::size_t> hierarchy_gradcheck(nnet::Activation act, hierarchy::AeMode mode,
                                                        std::uint64_t seed) {
    using namespace hierarchy;
    HierarchyConfig cfg;
    cfg.ae_mode = mode;
    cfg.ae.activation = act;
    cfg.vae.activation = act;
    cfg.vae.latent_dim = 2;
    cfg.seed = seed;
    const FeatureSet f{uniform(5, 4, seed, 0.0, 1.0), uniform(5, 3, seed + 1, -1.0, 1.0)};
    Hierarchy h = build_hierarchy(f, cfg);
    for (auto* net : {&h.fusion->trunk, &h.fusion->mu_head, &h.fusion->logvar_head, &h.fusion->decoder}) {
        for (auto& l : net->layers()) l.bias = uniform(l.bias.size(), 1, seed + 7, -0.5, 0.5);
    }
    for (auto& ae : h.aes) {
        for (auto* net : {&ae.encoder, &ae.decoder}) {
            for (auto& l : net->layers()) l.bias = uniform(l.bias.size(), 1, seed + 9, -0.5, 0.5);
        }
    }
    const FeatureSet arranged = h.arrange(f);
    Engine e(seed);
    const Perturbation p = draw_perturbation(h, arranged, e);  // epsilon frozen for the whole check
    HierarchyGradients g = zero_gradients(h);
    hierarchy_backward(h, arranged, p, g);
    auto objective = [&] { return hierarchy_loss(h, arranged, p).total(); };

    std::vector<std::pair<nnet::DenseNet*, nnet::Gradients*>> nets;
    for (std::size_t i = 0; i < h.aes.size(); ++i) {
        nets.emplace_back(&h.aes[i].encoder, &g.encoder[i]);
        nets.emplace_back(&h.aes[i].decoder, &g.decoder[i]);
    }
    nets.emplace_back(&h.fusion->trunk, &g.trunk);
    nets.emplace_back(&h.fusion->mu_head, &g.mu_head);
    nets.emplace_back(&h.fusion->logvar_head, &g.logvar_head);
    nets.emplace_back(&h.fusion->decoder, &g.fusion_decoder);

    std::size_t checked = 0, failed = 0;
    for (auto [net, grad] : nets) {
        for (std::size_t l = 0; l < net->layers().size(); ++l) {
            auto& layer = net->layers()[l];
            for (Eigen::Index i = 0; i < layer.weight.size(); ++i, ++checked) {
                if (!close(grad->weight[l].data()[i], central_diff(&layer.weight.data()[i], objective), 1e-3, 1e-7))
                    ++failed;
            }
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i, ++checked) {
                if (!close(grad->bias[l][i], central_diff(&layer.bias[i], objective), 1e-3, 1e-7)) ++failed;
            }
        }
    }
    return {checked, failed};
}

std::pair<std::size_t, std::size_t> mlp_gradcheck(std::uint64_t seed) {
    const Matrix pos = uniform(20, 3, seed, 0.0, 2.0), neg = uniform(20, 3, seed + 1, -2.0, 0.0);
    classify::MlpSpec spec;
    spec.hidden = 6;
    spec.train.epochs = 5;
    spec.train.seed = seed;
    auto mlp = classify::mlp_fit(pos, neg, spec);
    auto& net = mlp.net;
    const Matrix x = uniform(8, 3, seed + 2, -2.0, 2.0);
    Matrix y(8, 1);
    for (Eigen::Index i = 0; i < 8; ++i) y(i, 0) = static_cast<double>(i % 2);
    auto objective = [&] { return nnet::bce_loss(net.forward(x), y).value; };
    auto g = net.zero_gradients();
    const Matrix out = net.forward_train(x);
    net.backward(nnet::bce_loss(out, y).grad, g);
    std::size_t checked = 0, failed = 0;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto& layer = net.layers()[l];
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i, ++checked) {
            if (!close(g.weight[l].data()[i], central_diff(&layer.weight.data()[i], objective), 1e-4, 1e-9)) ++failed;
        }
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i, ++checked) {
            if (!close(g.bias[l][i], central_diff(&layer.bias[i], objective), 1e-4, 1e-9)) ++failed;
        }
    }
    return {checked, failed};
}

// Monte-Carlo estimate of KL(q || N(0, I)) = E_q[log q(z) - log p(z)].
double kl_monte_carlo(const hierarchy::GaussianParams& p, std::size_t draws, std::uint64_t seed) {
    std::mt19937_64 e(seed);
    std::normal_distribution<double> normal;
    double total = 0.0;
    for (std::size_t s = 0; s < draws; ++s) {
        double log_ratio = 0.0;
        for (Eigen::Index j = 0; j < p.mu.size(); ++j) {
            const double eps = normal(e);
            const double z = p.mu[j] + p.sigma[j] * eps;
            log_ratio += -0.5 * eps * eps - std::log(p.sigma[j]) + 0.5 * z * z;
        }
        total += log_ratio;
    }
    return total / static_cast<double>(draws);
}

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

Outcome criterion6() {
    std::size_t h_checked = 0, h_failed = 0;
    std::uint64_t seed = 1;
    for (auto act : {nnet::Activation::tanh, nnet::Activation::sigmoid, nnet::Activation::relu,
                     nnet::Activation::linear}) {
        for (auto mode : {hierarchy::AeMode::individual, hierarchy::AeMode::concatenated}) {
            const auto [c, f] = hierarchy_gradcheck(act, mode, seed++);
            h_checked += c;
            h_failed += f;
        }
    }
    std::size_t m_checked = 0, m_failed = 0;
    for (std::uint64_t s = 1; s <= 4; ++s) {
        const auto [c, f] = mlp_gradcheck(s);
        m_checked += c;
        m_failed += f;
    }

    std::mt19937_64 e(9);
    std::uniform_real_distribution<double> mu(-2.0, 2.0), sig(0.3, 2.0);
    double worst_kl = 0.0;
    for (int t = 0; t < 10; ++t) {
        hierarchy::GaussianParams p{Eigen::VectorXd(3), Eigen::VectorXd(3)};
        for (int j = 0; j < 3; ++j) {
            p.mu[j] = mu(e);
            p.sigma[j] = sig(e);
        }
        const double exact = hierarchy::kl_to_standard_normal(p);
        const double mc = kl_monte_carlo(p, 200000, 100 + static_cast<std::uint64_t>(t));
        worst_kl = std::max(worst_kl, std::abs(mc - exact) / exact);
    }

    std::size_t auc_mismatch = 0;
    std::mt19937_64 a(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> size(2, 40), bit(0, 1), level(0, 7);
        const auto n = static_cast<std::size_t>(size(a));
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = level(a) / 8.0;
            y[i] = bit(a);
        }
        y[0] = 1;
        y[1] = 0;
        if (metrics::roc_auc(s, y) != pairwise_auc(s, y)) ++auc_mismatch;
    }

    const bool pass = h_failed == 0 && m_failed == 0 && worst_kl <= 0.02 && auc_mismatch == 0;
    return {pass, "numerics: AE+VAE gradients " + std::to_string(h_checked - h_failed) + "/" +
                      std::to_string(h_checked) + " at rtol 1e-3, MLP gradients " +
                      std::to_string(m_checked - m_failed) + "/" + std::to_string(m_checked) +
                      " at rtol 1e-4, KL vs Monte-Carlo worst " + fmt("%.4f", worst_kl) +
                      " (<= 0.02), AUC brute-force mismatches " + std::to_string(auc_mismatch) + "/50"};
}

// ---------------------------------------------------------------------------

Outcome criterion8(const fs::path& work) {
    auto cfg = preset("blobs");
    const auto data = pipeline::from_blobs(data_io::make_blobs(200, 200, 8, 10.0, 1), "blobs");
    const auto t0 = Clock::now();
    const auto cells = pipeline::grid_search_alpha_beta(cfg, data, pipeline::GridSpec{}, 1);
    const double secs = seconds_since(t0);
    std::ofstream out(work / "blobs_grid.csv");
    pipeline::write_grid_csv(out, cells);

    std::size_t ok = 0, invalid = 0, unmarked = 0;
    std::set<std::pair<double, double>> seen;
    for (const auto& c : cells) {
        seen.insert({c.alpha, c.beta});
        if (c.status == "ok" && std::isfinite(c.auc)) {
            ++ok;
        } else if (c.status == "invalid" && std::isnan(c.auc) && !c.reason.empty()) {
            ++invalid;
        } else {
            ++unmarked;
        }
    }
    // an alpha far beyond the catalog spread must come back as a marked cell
    pipeline::GridSpec far;
    far.alphas = {1e6};
    far.betas = {1.0};
    const auto empty = pipeline::grid_search_alpha_beta(cfg, data, far, 1);
    const bool marks_empty = empty.size() == 1 && empty[0].status == "invalid" && std::isnan(empty[0].auc) &&
                             empty[0].reason.find("empty outskirt") != std::string::npos;

    const bool pass = cells.size() == 45 && seen.size() == 45 && unmarked == 0 && secs <= 600.0 && marks_empty;
    return {pass, "blobs grid: " + std::to_string(cells.size()) + " cells (5x9), " + std::to_string(ok) + " ok, " +
                      std::to_string(invalid) + " marked invalid, " + std::to_string(unmarked) + " unmarked, " +
                      fmt("%.1f", secs) + " s (<= 600); empty-outskirt probe " +
                      (marks_empty ? "marked" : "NOT marked")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"outskirt acceptance suite"};
    std::string work_dir = "acceptance_runs";
    std::string mnist_dir = OUTSKIRT_DATA_DIR "/mnist";
    std::vector<int> only, known;
    app.add_option("--work-dir", work_dir, "Where run artifacts are written")->capture_default_str();
    app.add_option("--mnist-dir", mnist_dir, "MNIST IDX directory")->capture_default_str();
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    app.add_option("--known-failure", known, "Criteria expected to fail; they still print FAIL")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const fs::path work(work_dir);
    fs::create_directories(work);
    auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

    std::vector<int> failed;
    auto report = [&](int id, const std::function<Outcome()>& fn) {
        if (!wanted(id)) return;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) failed.push_back(id);
        const bool expected = std::find(known.begin(), known.end(), id) != known.end();
        std::printf("%s  criterion %d  %s  [%.1f s]%s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(),
                    seconds_since(t0), !o.pass && expected ? "  (known failure)" : "");
        std::fflush(stdout);
    };

    if (wanted(1) || wanted(2) || wanted(7)) {
        std::optional<MnistRuns> runs;
        std::string error;
        const auto t0 = Clock::now();
        try {
            runs = run_mnist(mnist_dir, work);
        } catch (const std::exception& e) {
            error = e.what();
        }
        std::printf("      MNIST runs finished in %.1f s\n", seconds_since(t0));
        auto from_runs = [&](Outcome (*fn)(const MnistRuns&)) {
            return [&, fn]() -> Outcome {
                if (!runs) return {false, "MNIST run failed: " + error};
                return fn(*runs);
            };
        };
        report(1, from_runs(criterion1));
        report(2, from_runs(criterion2));
        report(7, from_runs(criterion7));
    }
    report(3, [&] { return criterion3(work); });
    report(4, criterion4);
    report(5, criterion5);
    report(6, criterion6);
    report(8, [&] { return criterion8(work); });

    std::size_t unexpected = 0;
    for (int id : failed) unexpected += std::find(known.begin(), known.end(), id) == known.end();
    std::printf("%zu criterion(s) failed, %zu of them not declared as known failures\n", failed.size(), unexpected);
    return unexpected ? 1 : 0;
}
