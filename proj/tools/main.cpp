// outskirt command-line front end.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "outskirt/data_io.hpp"
#include "outskirt/error.hpp"
#include "outskirt/model_file.hpp"
#include "outskirt/pipeline.hpp"

namespace fs = std::filesystem;
using namespace outskirt;
using pipeline::PipelineConfig;

namespace {

struct Options {
    std::string config_file;
    std::string dataset;
    std::vector<std::string> settings;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha, beta;
    std::optional<std::string> selector;
    std::vector<double> outlier_pct;
    std::optional<std::size_t> folds;
    std::string out_dir = "out";
    std::size_t workers = 1;
    std::string model;
    std::size_t fold = 0;

    // make-blobs
    std::size_t n_in = 500, n_out = 500, dim = 2;
    double separation = 10.0;
};

PipelineConfig resolve_config(const Options& o) {
    PipelineConfig cfg;
    if (!o.config_file.empty()) cfg = pipeline::load_config(o.config_file, cfg);
    for (const auto& s : o.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        pipeline::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.alpha) cfg.alpha = *o.alpha;
    if (o.beta) cfg.beta = *o.beta;
    if (o.selector) pipeline::apply_setting(cfg, "selector", *o.selector);
    if (!o.outlier_pct.empty()) cfg.outlier_pcts = o.outlier_pct;
    if (o.folds) cfg.folds = *o.folds;
    cfg.validate();
    return cfg;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

// mnist:DIR[:CLASS], pgm:DIR[:CLASS], csv:INLIERS,OUTLIERS,
// blobs:N_IN,N_OUT,DIM,SEPARATION[,SEED]
pipeline::ExperimentData load_dataset(const std::string& spec, PipelineConfig& cfg) {
    if (spec.empty()) throw ConfigError("missing --dataset (e.g. --dataset mnist:data/mnist)");
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw ConfigError("dataset spec '" + spec + "' needs a kind prefix (mnist:, pgm:, csv:, blobs:)");
    const auto kind = spec.substr(0, colon);
    auto rest = spec.substr(colon + 1);

    if (kind == "mnist" || kind == "pgm") {
        // optional trailing :CLASS
        if (const auto c = rest.rfind(':'); c != std::string::npos && c + 1 < rest.size() &&
                                            rest.find_first_not_of("-0123456789", c + 1) == std::string::npos) {
            cfg.inlier_class = std::stoi(rest.substr(c + 1));
            rest = rest.substr(0, c);
        }
        if (!fs::exists(rest)) {
            throw DataError("dataset path '" + rest + "' does not exist (check --dataset " + kind + ":DIR)");
        }
        const auto d = kind == "mnist" ? data_io::load_mnist_dir(rest) : data_io::load_pgm_dir(rest);
        return pipeline::split_by_class(d, cfg.inlier_class);
    }
    if (kind == "csv") {
        const auto parts = split(rest, ',');
        if (parts.size() != 2) throw ConfigError("csv dataset spec is csv:INLIERS.csv,OUTLIERS.csv");
        auto in = data_io::load_csv(parts[0]);
        auto out = data_io::load_csv(parts[1]);
        return pipeline::from_matrices(std::move(in.values), std::move(out.values), "csv:" + rest);
    }
    if (kind == "blobs") {
        const auto parts = split(rest, ',');
        if (parts.size() < 4 || parts.size() > 5) {
            throw ConfigError("blobs dataset spec is blobs:N_IN,N_OUT,DIM,SEPARATION[,SEED]");
        }
        try {
            const auto seed = parts.size() == 5 ? std::stoull(parts[4]) : 0ULL;
            const auto b = data_io::make_blobs(std::stoul(parts[0]), std::stoul(parts[1]), std::stoul(parts[2]),
                                               std::stod(parts[3]), seed);
            return pipeline::from_blobs(b, "blobs:" + rest);
        } catch (const std::logic_error&) {
            throw ConfigError("blobs dataset spec has a non-numeric field: " + rest);
        }
    }
    throw ConfigError("unknown dataset kind '" + kind + "' (expected mnist, pgm, csv or blobs)");
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Run {
public:
    Run(std::string command, const Options& o) : o_(o), start_(std::chrono::steady_clock::now()) {
        m_.command = std::move(command);
        m_.started_utc = utc_now();
        fs::create_directories(o.out_dir);
    }

    pipeline::RunManifest& manifest() { return m_; }

    fs::path path(const std::string& name) {
        m_.outputs[name] = name;
        return fs::path(o_.out_dir) / name;
    }

    std::ofstream open(const std::string& name) {
        std::ofstream f(path(name));
        if (!f) throw DataError("cannot write " + (fs::path(o_.out_dir) / name).string());
        return f;
    }

    void finish(const PipelineConfig& cfg) {
        m_.config = cfg;
        m_.seeds = pipeline::seed_table(cfg);
        m_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ofstream f(fs::path(o_.out_dir) / (m_.command + "_manifest.json"));
        f << pipeline::manifest_json(m_);
        for (const auto& w : m_.warnings) std::cerr << "warning: " << w << '\n';
    }

private:
    const Options& o_;
    pipeline::RunManifest m_;
    std::chrono::steady_clock::time_point start_;
};

void print_metrics(const metrics::FoldMetrics& m) {
    std::cout << "outlier_pct=" << metrics::format_number(m.outlier_pct) << " auc=" << metrics::format_number(m.auc)
              << " f1=" << metrics::format_number(m.rates.f1_weighted)
              << " f1_inlier=" << metrics::format_number(m.rates.f1_inlier)
              << " tpr=" << metrics::format_number(m.rates.tpr) << " fpr=" << metrics::format_number(m.rates.fpr)
              << '\n';
}

std::string model_path(const Options& o) {
    return o.model.empty() ? (fs::path(o.out_dir) / "model.osk").string() : o.model;
}

int cmd_fit(const Options& o) {
    auto cfg = resolve_config(o);
    auto data = load_dataset(o.dataset, cfg);
    cfg.validate();
    if (o.fold >= cfg.folds) throw ConfigError("--fold must be < cv.folds");
    Run run("fit", o);
    run.manifest().datasets["dataset"] = data.fingerprint;

    const auto prep = pipeline::prepare(cfg, data, o.workers);
    const auto plan = pipeline::plan_folds(cfg, data.inliers.size(), data.outliers.size());
    pipeline::audit_zero_shot(data, plan.train[o.fold]);
    auto fit = pipeline::fit_model(cfg, pipeline::take_rows(prep.inliers, plan.train[o.fold]), o.fold);
    const auto path = model_path(o);
    save_model(path, fit.model);
    run.manifest().outputs["model"] = path;
    run.manifest().warnings = fit.warnings;
    run.manifest().metrics.emplace_back("outskirt_size", static_cast<double>(fit.negatives.outskirt_size));
    if (!fit.representation.loss_history.empty()) {
        run.manifest().metrics.emplace_back("final_loss", fit.representation.loss_history.back());
    }
    std::cout << "fold " << o.fold << ": trained on " << plan.train[o.fold].size() << " inliers, "
              << fit.negatives.points.rows() << " synthetic outliers from " << fit.negatives.outskirt_size
              << " outskirt distributions\nmodel written to " << path << '\n';
    run.finish(cfg);
    return 0;
}

int cmd_eval(const Options& o) {
    if (!o.model.empty()) {
        auto model = load_model(o.model);
        auto cfg = model.config;
        if (!o.outlier_pct.empty()) cfg.outlier_pcts = o.outlier_pct;
        model.config.outlier_pcts = cfg.outlier_pcts;
        auto data = load_dataset(o.dataset, cfg);
        if (cfg.inlier_class != model.config.inlier_class) {
            throw ConfigError("dataset inlier class differs from the class the model was trained on");
        }
        Run run("eval", o);
        run.manifest().datasets["dataset"] = data.fingerprint;
        const auto prep = pipeline::prepare(cfg, data, o.workers);
        const auto plan = pipeline::plan_folds(cfg, data.inliers.size(), data.outliers.size());
        pipeline::audit_zero_shot(data, plan.train[model.fold]);
        const auto per_pct = pipeline::evaluate_model(model, prep, plan);
        auto out = run.open("metrics.csv");
        for (std::size_t p = 0; p < per_pct.size(); ++p) {
            metrics::EvalReport rep;
            rep.per_fold = {per_pct[p]};
            rep.aggregate = metrics::aggregate(rep.per_fold);
            metrics::write_report_csv(out, rep, p == 0);
            print_metrics(per_pct[p]);
            run.manifest().metrics.emplace_back("auc@" + metrics::format_number(per_pct[p].outlier_pct),
                                                per_pct[p].auc);
        }
        run.finish(cfg);
        return 0;
    }

    auto cfg = resolve_config(o);
    auto data = load_dataset(o.dataset, cfg);
    cfg.validate();
    Run run("eval", o);
    run.manifest().datasets["dataset"] = data.fingerprint;
    const auto res = pipeline::run_experiment(cfg, data, o.workers);
    auto out = run.open("metrics.csv");
    for (std::size_t p = 0; p < res.reports.size(); ++p) {
        metrics::write_report_csv(out, res.reports[p], p == 0);
        print_metrics(res.reports[p].aggregate);
        run.manifest().metrics.emplace_back("auc@" + metrics::format_number(cfg.outlier_pcts[p]),
                                            res.reports[p].aggregate.auc);
        run.manifest().metrics.emplace_back("f1@" + metrics::format_number(cfg.outlier_pcts[p]),
                                            res.reports[p].aggregate.rates.f1_weighted);
    }
    run.manifest().warnings = res.warnings;
    run.finish(cfg);
    return 0;
}

int cmd_gridsearch(const Options& o) {
    auto cfg = resolve_config(o);
    auto data = load_dataset(o.dataset, cfg);
    cfg.validate();
    Run run("gridsearch", o);
    run.manifest().datasets["dataset"] = data.fingerprint;
    const auto cells = pipeline::grid_search_alpha_beta(cfg, data, {}, o.workers);
    auto out = run.open("grid.csv");
    pipeline::write_grid_csv(out, cells);
    std::size_t invalid = 0;
    for (const auto& c : cells) invalid += c.status != "ok";
    std::cout << cells.size() << " grid cells (" << invalid << " invalid) written to "
              << (fs::path(o.out_dir) / "grid.csv").string() << '\n';
    run.finish(cfg);
    return 0;
}

int cmd_ablate(const Options& o) {
    auto cfg = resolve_config(o);
    auto data = load_dataset(o.dataset, cfg);
    Run run("ablate", o);
    run.manifest().datasets["dataset"] = data.fingerprint;
    const auto rows = pipeline::ablate(pipeline::ablation_variants(cfg, data.inliers.is_images()), data, o.workers);
    auto out = run.open("ablation.csv");
    pipeline::write_ablation_csv(out, rows);
    for (const auto& r : rows) {
        std::cout << r.name << ": auc=" << metrics::format_number(r.metrics.auc) << ' ' << r.status
                  << (r.reason.empty() ? "" : " (" + r.reason + ")") << '\n';
        run.manifest().metrics.emplace_back("auc:" + r.name, r.metrics.auc);
    }
    run.finish(cfg);
    return 0;
}

int cmd_synth_export(const Options& o) {
    auto cfg = resolve_config(o);
    auto data = load_dataset(o.dataset, cfg);
    cfg.validate();
    if (cfg.fusion == hierarchy::FusionMode::none) throw ConfigError("synth-export needs a fusion stage");
    if (o.fold >= cfg.folds) throw ConfigError("--fold must be < cv.folds");
    Run run("synth-export", o);
    run.manifest().datasets["dataset"] = data.fingerprint;
    const auto prep = pipeline::prepare(cfg, data, o.workers);
    const auto plan = pipeline::plan_folds(cfg, data.inliers.size(), data.outliers.size());
    const auto train = pipeline::take_rows(prep.inliers, plan.train[o.fold]);
    const auto rep = pipeline::fit_representation(cfg, train, pipeline::fold_seed(cfg, o.fold));
    const auto neg = pipeline::make_negatives(cfg, rep, pipeline::fold_seed(cfg, o.fold));

    const auto d = static_cast<Eigen::Index>(rep.catalog.dim());
    std::vector<char> outskirt(rep.catalog.size(), 0);
    if (cfg.selector) {
        const auto stats = boundary::meta_stats(rep.catalog);
        for (auto i : boundary::member_indices(*cfg.selector, rep.catalog, stats, cfg.alpha)) outskirt[i] = 1;
    }
    nnet::Matrix q(static_cast<Eigen::Index>(rep.catalog.size()), 2 * d + 2);
    q.leftCols(d) = rep.catalog.means();
    q.middleCols(d, d) = rep.catalog.sigmas();
    for (std::size_t i = 0; i < rep.catalog.size(); ++i) {
        q(static_cast<Eigen::Index>(i), 2 * d) = static_cast<double>(data.inliers.ids[plan.train[o.fold][i]]);
        q(static_cast<Eigen::Index>(i), 2 * d + 1) = outskirt[i];
    }
    auto header = data_io::default_header(static_cast<std::size_t>(d), "mu");
    for (const auto& s : data_io::default_header(static_cast<std::size_t>(d), "sigma")) header.push_back(s);
    header.push_back("sample_id");
    header.push_back("outskirt");
    data_io::save_csv(run.path("catalog.csv"), q, header);

    nnet::Matrix y(neg.points.rows(), d + 1);
    y.leftCols(d) = neg.points;
    for (std::size_t j = 0; j < neg.generator.size(); ++j) {
        y(static_cast<Eigen::Index>(j), d) = static_cast<double>(neg.generator[j]);
    }
    auto yheader = data_io::default_header(static_cast<std::size_t>(d), "y");
    yheader.push_back("generator");
    data_io::save_csv(run.path("synthetic.csv"), y, yheader);
    std::cout << "catalog: " << rep.catalog.size() << " distributions (" << neg.outskirt_size
              << " outskirt), synthetic: " << y.rows() << " points\n";
    run.finish(cfg);
    return 0;
}

int cmd_make_blobs(const Options& o) {
    Run run("make-blobs", o);
    const auto b = data_io::make_blobs(o.n_in, o.n_out, o.dim, o.separation, o.seed.value_or(0));
    data_io::save_csv(run.path("inliers.csv"), b.inliers);
    data_io::save_csv(run.path("outliers.csv"), b.outliers);
    std::cout << "wrote " << o.n_in << " inliers and " << o.n_out << " outliers to " << o.out_dir << '\n';
    PipelineConfig cfg;
    cfg.seed = o.seed.value_or(0);
    run.manifest().datasets["inliers"] = data_io::fingerprint(b.inliers);
    run.manifest().datasets["outliers"] = data_io::fingerprint(b.outliers);
    run.finish(cfg);
    return 0;
}

void describe_net(const char* name, const nnet::DenseNet& n) {
    std::cout << "  " << name << ":";
    for (const auto& l : n.layers()) {
        std::cout << ' ' << l.in() << "->" << l.out() << '(' << nnet::to_string(l.activation) << ')';
    }
    std::cout << '\n';
}

int cmd_inspect(const Options& o) {
    if (o.model.empty()) throw ConfigError("inspect-model needs --model FILE");
    std::ifstream in(o.model, std::ios::binary);
    if (!in) throw DataError("cannot read model file " + o.model);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto info = inspect_model_file(bytes);
    const auto m = deserialize_model(bytes);
    std::printf("format %s, %llu bytes, crc32 %08x\n", info.version.str().c_str(),
                static_cast<unsigned long long>(info.size), info.crc);
    for (const auto& s : info.sections) {
        std::printf("  section %s offset %llu length %llu\n", s.tag.c_str(),
                    static_cast<unsigned long long>(s.offset), static_cast<unsigned long long>(s.length));
    }
    std::cout << "fold " << m.fold << ", classifier " << classify::to_string(classify::kind_of(m.classifier));
    if (const auto* s = std::get_if<classify::SvmModel>(&m.classifier)) {
        std::cout << ", " << s->support_vectors.rows() << " support vectors"
                  << (s->converged ? "" : " (not converged)");
    }
    std::cout << '\n';
    for (std::size_t i = 0; i < m.hierarchy.aes.size(); ++i) {
        describe_net(("ae" + std::to_string(i) + " encoder").c_str(), m.hierarchy.aes[i].encoder);
    }
    if (m.hierarchy.fusion) {
        describe_net("fusion trunk", m.hierarchy.fusion->trunk);
        describe_net("fusion mu", m.hierarchy.fusion->mu_head);
    }
    if (m.catalog) std::cout << "catalog: " << m.catalog->size() << " x " << m.catalog->dim() << '\n';
    std::cout << pipeline::config_text(m.config);
    return 0;
}

void add_common(CLI::App* c, Options& o, bool needs_data = true) {
    c->add_option("--config", o.config_file, "Flat key=value config file")->check(CLI::ExistingFile);
    if (needs_data) {
        c->add_option("--dataset", o.dataset,
                      "mnist:DIR[:CLASS] | pgm:DIR[:CLASS] | csv:IN.csv,OUT.csv | blobs:N_IN,N_OUT,DIM,SEP[,SEED]");
    }
    c->add_option("--set", o.settings, "Override one config key (key=value); repeatable");
    c->add_option("--seed", o.seed, "Master seed");
    c->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
    c->add_option("--workers", o.workers, "Worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_option("--alpha", o.alpha, "Outskirt selection alpha");
    c->add_option("--beta", o.beta, "Synthesis beta");
    c->add_option("--selector", o.selector, "ellipsoid | l2 | none");
    c->add_option("--outlier-pct", o.outlier_pct, "Outlier share(s) of the evaluation set, percent")->delimiter(',');
    c->add_option("--folds", o.folds, "Cross-validation folds");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot outlier detection via synthesized boundary samples"};
    app.require_subcommand(1);
    Options o;

    auto* fit = app.add_subcommand("fit", "Train one fold's model and save it");
    add_common(fit, o);
    fit->add_option("--model", o.model, "Model file to write (default OUT_DIR/model.osk)");
    fit->add_option("--fold", o.fold, "Fold whose training split is used")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "Cross-validated evaluation, or evaluate a saved model");
    add_common(eval, o);
    eval->add_option("--model", o.model, "Evaluate this saved model on its fold instead of running CV");

    auto* grid = app.add_subcommand("gridsearch", "AUC/F1 surface over the alpha/beta grid");
    add_common(grid, o);

    auto* abl = app.add_subcommand("ablate", "Ablation table over pipeline variants");
    add_common(abl, o);

    auto* synth = app.add_subcommand("synth-export", "Write the latent catalog and synthetic outliers to CSV");
    add_common(synth, o);
    synth->add_option("--fold", o.fold, "Fold whose training split is used")->capture_default_str();

    auto* blobs = app.add_subcommand("make-blobs", "Write a synthetic Gaussian blobs dataset");
    blobs->add_option("--n-in", o.n_in, "Inlier count")->capture_default_str();
    blobs->add_option("--n-out", o.n_out, "Outlier count")->capture_default_str();
    blobs->add_option("--dim", o.dim, "Dimension")->capture_default_str();
    blobs->add_option("--separation", o.separation, "Outlier mean offset")->capture_default_str();
    blobs->add_option("--seed", o.seed, "Seed");
    blobs->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();

    auto* inspect = app.add_subcommand("inspect-model", "Print a model file's header and contents");
    inspect->add_option("--model", o.model, "Model file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*fit) return cmd_fit(o);
        if (*eval) return cmd_eval(o);
        if (*grid) return cmd_gridsearch(o);
        if (*abl) return cmd_ablate(o);
        if (*synth) return cmd_synth_export(o);
        if (*blobs) return cmd_make_blobs(o);
        if (*inspect) return cmd_inspect(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
