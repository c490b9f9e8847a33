#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "outskirt/error.hpp"
#include "outskirt/pipeline.hpp"
#include "outskirt/rng.hpp"

namespace outskirt::pipeline {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                      std::string(want) + ")");
}

std::size_t as_size(std::string_view key, std::string_view v) {
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
    return out;
}

std::uint64_t as_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
    return out;
}

int as_int(std::string_view key, std::string_view v) {
    int out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an integer");
    return out;
}

double as_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a number");
    return out;
}

bool as_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, v, "true or false");
}

std::vector<std::string> split_list(std::string_view v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss{std::string(v)};
    while (std::getline(ss, item, ',')) {
        auto t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
    return out;
}

// Re-parses enum-valued settings through the owning module so error messages
// stay consistent across the CLI and config files.
template <class F>
auto wrap(std::string_view key, std::string_view v, F&& f) {
    try {
        return f(v);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

struct Setting {
    const char* key;
    std::function<void(PipelineConfig&, std::string_view, std::string_view)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

const std::vector<Setting>& settings() {
    using PC = PipelineConfig;
    using SV = std::string_view;
    static const std::vector<Setting> table = {
        {"features",
         [](PC& c, SV k, SV v) {
             c.features.clear();
             for (const auto& f : split_list(v)) c.features.push_back(wrap(k, f, parse_feature));
         },
         [](const PC& c) {
             std::vector<std::string> s;
             for (auto f : c.features) s.emplace_back(to_string(f));
             return join(s);
         }},
        {"hog.orientations", [](PC& c, SV k, SV v) { c.hog.orientations = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.hog.orientations); }},
        {"hog.cell_rows", [](PC& c, SV k, SV v) { c.hog.cell_rows = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.hog.cell_rows); }},
        {"hog.cell_cols", [](PC& c, SV k, SV v) { c.hog.cell_cols = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.hog.cell_cols); }},
        {"hog.block_rows", [](PC& c, SV k, SV v) { c.hog.block_rows = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.hog.block_rows); }},
        {"hog.block_cols", [](PC& c, SV k, SV v) { c.hog.block_cols = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.hog.block_cols); }},
        {"hog.signed", [](PC& c, SV k, SV v) { c.hog.is_signed = as_bool(k, v); },
         [](const PC& c) { return std::string(c.hog.is_signed ? "true" : "false"); }},
        {"lbp.points", [](PC& c, SV k, SV v) { c.lbp.points = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.lbp.points); }},
        {"lbp.radius", [](PC& c, SV k, SV v) { c.lbp.radius = as_double(k, v); },
         [](const PC& c) { return num(c.lbp.radius); }},
        {"lbp.method", [](PC& c, SV k, SV v) { c.lbp.method = wrap(k, v, features::parse_lbp_method); },
         [](const PC& c) { return std::string(features::to_string(c.lbp.method)); }},
        {"features.standardize", [](PC& c, SV k, SV v) { c.standardize = as_bool(k, v); },
         [](const PC& c) { return std::string(c.standardize ? "true" : "false"); }},
        {"features.std_floor", [](PC& c, SV k, SV v) { c.std_floor = as_double(k, v); },
         [](const PC& c) { return num(c.std_floor); }},
        {"vector.groups", [](PC& c, SV k, SV v) { c.vector_groups = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.vector_groups); }},
        {"ae.mode", [](PC& c, SV k, SV v) { c.ae_mode = wrap(k, v, hierarchy::parse_ae_mode); },
         [](const PC& c) { return std::string(hierarchy::to_string(c.ae_mode)); }},
        {"ae.layers", [](PC& c, SV k, SV v) { c.ae.layers = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.ae.layers); }},
        {"ae.width", [](PC& c, SV k, SV v) { c.ae.width = wrap(k, v, hierarchy::parse_width); },
         [](const PC& c) { return std::string(hierarchy::to_string(c.ae.width)); }},
        {"ae.activation", [](PC& c, SV k, SV v) { c.ae.activation = wrap(k, v, nnet::parse_activation); },
         [](const PC& c) { return std::string(nnet::to_string(c.ae.activation)); }},
        {"ae.noise", [](PC& c, SV k, SV v) { c.ae.noise_sigma = as_double(k, v); },
         [](const PC& c) { return num(c.ae.noise_sigma); }},
        {"ae.loss", [](PC& c, SV k, SV v) { c.ae_loss = wrap(k, v, hierarchy::parse_recon_loss); },
         [](const PC& c) { return std::string(hierarchy::to_string(c.ae_loss)); }},
        {"fusion", [](PC& c, SV k, SV v) { c.fusion = wrap(k, v, hierarchy::parse_fusion); },
         [](const PC& c) { return std::string(hierarchy::to_string(c.fusion)); }},
        {"vae.layers", [](PC& c, SV k, SV v) { c.vae.layers = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.vae.layers); }},
        {"vae.width", [](PC& c, SV k, SV v) { c.vae.width = wrap(k, v, hierarchy::parse_width); },
         [](const PC& c) { return std::string(hierarchy::to_string(c.vae.width)); }},
        {"vae.latent_dim", [](PC& c, SV k, SV v) { c.vae.latent_dim = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.vae.latent_dim); }},
        {"vae.activation", [](PC& c, SV k, SV v) { c.vae.activation = wrap(k, v, nnet::parse_activation); },
         [](const PC& c) { return std::string(nnet::to_string(c.vae.activation)); }},
        {"train.schedule", [](PC& c, SV k, SV v) { c.schedule = wrap(k, v, hierarchy::parse_schedule); },
         [](const PC& c) { return std::string(hierarchy::to_string(c.schedule)); }},
        {"train.lr", [](PC& c, SV k, SV v) { c.train.learning_rate = as_double(k, v); },
         [](const PC& c) { return num(c.train.learning_rate); }},
        {"train.batch", [](PC& c, SV k, SV v) { c.train.batch_size = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.train.batch_size); }},
        {"train.epochs", [](PC& c, SV k, SV v) { c.train.epochs = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.train.epochs); }},
        {"train.optimizer", [](PC& c, SV k, SV v) { c.train.optimizer = wrap(k, v, nnet::parse_optimizer); },
         [](const PC& c) { return std::string(nnet::to_string(c.train.optimizer)); }},
        {"selector",
         [](PC& c, SV k, SV v) {
             if (v == "none") c.selector.reset();
             else c.selector = wrap(k, v, boundary::parse_selector);
         },
         [](const PC& c) { return std::string(c.selector ? boundary::to_string(*c.selector) : "none"); }},
        {"alpha", [](PC& c, SV k, SV v) { c.alpha = as_double(k, v); }, [](const PC& c) { return num(c.alpha); }},
        {"beta", [](PC& c, SV k, SV v) { c.beta = as_double(k, v); }, [](const PC& c) { return num(c.beta); }},
        {"synthesis", [](PC& c, SV k, SV v) { c.synthesis = wrap(k, v, parse_synthesis); },
         [](const PC& c) { return std::string(to_string(c.synthesis)); }},
        {"synthesis.count", [](PC& c, SV k, SV v) { c.synthesis_count = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.synthesis_count); }},
        {"jitter.sigma", [](PC& c, SV k, SV v) { c.jitter_sigma = as_double(k, v); },
         [](const PC& c) { return num(c.jitter_sigma); }},
        {"classifier", [](PC& c, SV k, SV v) { c.classifier = wrap(k, v, classify::parse_classifier); },
         [](const PC& c) { return std::string(classify::to_string(c.classifier)); }},
        {"svm.kernel", [](PC& c, SV k, SV v) { c.kernel.type = wrap(k, v, classify::parse_kernel); },
         [](const PC& c) { return std::string(classify::to_string(c.kernel.type)); }},
        {"svm.gamma", [](PC& c, SV k, SV v) { c.kernel.gamma = as_double(k, v); },
         [](const PC& c) { return num(c.kernel.gamma); }},
        {"svm.coef0", [](PC& c, SV k, SV v) { c.kernel.coef0 = as_double(k, v); },
         [](const PC& c) { return num(c.kernel.coef0); }},
        {"svm.degree", [](PC& c, SV k, SV v) { c.kernel.degree = as_int(k, v); },
         [](const PC& c) { return std::to_string(c.kernel.degree); }},
        {"svm.C", [](PC& c, SV k, SV v) { c.svm_c = as_double(k, v); }, [](const PC& c) { return num(c.svm_c); }},
        {"svm.tol", [](PC& c, SV k, SV v) { c.solver.tolerance = as_double(k, v); },
         [](const PC& c) { return num(c.solver.tolerance); }},
        {"svm.max_passes", [](PC& c, SV k, SV v) { c.solver.max_passes = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.solver.max_passes); }},
        {"svm.cache_mb", [](PC& c, SV k, SV v) { c.solver.cache_mb = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.solver.cache_mb); }},
        {"ocsvm.nu", [](PC& c, SV k, SV v) { c.ocsvm_nu = as_double(k, v); },
         [](const PC& c) { return num(c.ocsvm_nu); }},
        {"mlp.hidden", [](PC& c, SV k, SV v) { c.mlp.hidden = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.mlp.hidden); }},
        {"mlp.lr", [](PC& c, SV k, SV v) { c.mlp.train.learning_rate = as_double(k, v); },
         [](const PC& c) { return num(c.mlp.train.learning_rate); }},
        {"mlp.batch", [](PC& c, SV k, SV v) { c.mlp.train.batch_size = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.mlp.train.batch_size); }},
        {"mlp.epochs", [](PC& c, SV k, SV v) { c.mlp.train.epochs = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.mlp.train.epochs); }},
        {"cv.folds", [](PC& c, SV k, SV v) { c.folds = as_size(k, v); },
         [](const PC& c) { return std::to_string(c.folds); }},
        {"cv.outlier_pct",
         [](PC& c, SV k, SV v) {
             c.outlier_pcts.clear();
             for (const auto& p : split_list(v)) c.outlier_pcts.push_back(as_double(k, p));
         },
         [](const PC& c) {
             std::vector<std::string> s;
             for (double p : c.outlier_pcts) s.push_back(num(p));
             return join(s);
         }},
        {"data.inlier_class", [](PC& c, SV k, SV v) { c.inlier_class = as_int(k, v); },
         [](const PC& c) { return std::to_string(c.inlier_class); }},
        {"seed", [](PC& c, SV k, SV v) { c.seed = as_u64(k, v); }, [](const PC& c) { return std::to_string(c.seed); }},
    };
    return table;
}

}  // namespace

void apply_setting(PipelineConfig& cfg, std::string_view key, std::string_view value) {
    const auto k = trim(key);
    const auto v = trim(value);
    for (const auto& s : settings()) {
        if (k == s.key) {
            s.set(cfg, k, v);
            return;
        }
    }
    throw ConfigError("unknown config key '" + k + "'");
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got '" + trim(line) + "'");
        }
        try {
            apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

PipelineConfig load_config(const std::string& path, PipelineConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str(), std::move(base));
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : settings()) out.emplace_back(s.key, s.get(cfg));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& s : settings()) out.emplace_back(s.key);
    std::sort(out.begin(), out.end());
    return out;
}

std::string config_text(const PipelineConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
    return out;
}

std::string config_fingerprint(const PipelineConfig& cfg) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config_text(cfg))));
    return buf;
}

}  // namespace outskirt::pipeline
