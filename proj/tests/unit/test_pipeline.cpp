#include <atomic>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "outskirt/error.hpp"
#include "outskirt/model_file.hpp"
#include "outskirt/pipeline.hpp"
#include "support.hpp"

using namespace outskirt;
using namespace outskirt::pipeline;

namespace {

PipelineConfig quick_config() {
    PipelineConfig cfg;
    cfg.vector_groups = 2;
    cfg.ae.activation = nnet::Activation::tanh;
    cfg.vae.activation = nnet::Activation::tanh;
    cfg.vae.latent_dim = 4;
    cfg.train.epochs = 20;
    cfg.train.batch_size = 16;
    cfg.train.learning_rate = 1e-2;
    cfg.alpha = 1.0;
    cfg.folds = 3;
    cfg.outlier_pcts = {20.0, 50.0};
    cfg.seed = 7;
    return cfg;
}

ExperimentData quick_data(std::uint64_t seed = 1) {
    return from_blobs(data_io::make_blobs(90, 200, 8, 10.0, seed), "blobs");
}

// bitwise CRC-32 (reflected, polynomial 0xEDB88320)
void reseal(std::vector<unsigned char>& bytes) {
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i + 4 < bytes.size(); ++i) {
        crc ^= bytes[i];
        for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
    crc = ~crc;
    for (int k = 0; k < 4; ++k) bytes[bytes.size() - 4 + k] = static_cast<unsigned char>(crc >> (8 * k));
}

std::string report_text(const ExperimentResult& r) {
    std::ostringstream os;
    for (const auto& rep : r.reports) metrics::write_report_csv(os, rep);
    return os.str();
}

}  // namespace

TEST_CASE("config: parse, print and fingerprint") {
    const auto cfg = parse_config(R"(# comment
alpha = 1.5
selector = ellipsoid   # trailing comment
features = hog,raw
cv.outlier_pct = 10,20

svm.kernel = linear
)");
    CHECK(cfg.alpha == 1.5);
    CHECK(cfg.selector == boundary::Selector::ellipsoid);
    CHECK(cfg.features == std::vector<FeatureKind>{FeatureKind::hog, FeatureKind::raw});
    CHECK(cfg.outlier_pcts == std::vector<double>{10, 20});
    CHECK(cfg.kernel.type == classify::KernelType::linear);

    const auto again = parse_config(config_text(cfg));
    CHECK(config_text(again) == config_text(cfg));
    CHECK(config_fingerprint(again) == config_fingerprint(cfg));
    CHECK(config_fingerprint(cfg) != config_fingerprint(PipelineConfig{}));

    const auto keys = config_keys();
    CHECK(std::is_sorted(keys.begin(), keys.end()));
    CHECK(config_entries(cfg).size() == keys.size());
}

TEST_CASE("config: errors name the key and line") {
    try {
        parse_config("alpha = 1\nbogus.key = 3\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("bogus.key") != std::string::npos);
    }
    PipelineConfig cfg;
    CHECK_THROWS_AS(apply_setting(cfg, "alpha", "abc"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "selector", "circle"), ConfigError);
    CHECK_THROWS_AS(parse_config("alpha 3\n"), ConfigError);
}

TEST_CASE("config: invariants") {
    PipelineConfig ok;
    CHECK_NOTHROW(ok.validate());

    auto c = ok;
    c.fusion = hierarchy::FusionMode::none;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.selector.reset();
    c.synthesis = SynthesisMode::none;
    c.classifier = classify::ClassifierKind::ocsvm;
    CHECK_NOTHROW(c.validate());

    c = ok;
    c.synthesis = SynthesisMode::none;
    CHECK_THROWS_AS(c.validate(), ConfigError);  // nothing to train svm negatives on

    c = ok;
    c.classifier = classify::ClassifierKind::ocsvm;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = ok;
    c.synthesis = SynthesisMode::jitter;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.fusion = hierarchy::FusionMode::ae;
    CHECK_NOTHROW(c.validate());

    c = ok;
    c.selector.reset();
    CHECK_THROWS_AS(c.validate(), ConfigError);

    for (const char* bad : {"alpha=0", "beta=-1", "cv.folds=1", "cv.outlier_pct=100", "features.std_floor=0"}) {
        c = ok;
        const std::string s = bad;
        CHECK_THROWS_AS((apply_setting(c, s.substr(0, s.find('=')), s.substr(s.find('=') + 1)), c.validate()),
                        ConfigError);
    }
}

TEST_CASE("vector data is split into column groups") {
    PipelineConfig cfg;
    cfg.vector_groups = 2;
    const auto s = SampleSet::from_vectors(testing::random_matrix(4, 5, 1), {0, 1, 2, 3});
    const auto f = extract_features(cfg, s);
    REQUIRE(f.size() == 2);
    CHECK(f[0].cols() == 3);
    CHECK(f[1].cols() == 2);
    CHECK(f[1].col(1) == s.vectors.col(4));
    cfg.vector_groups = 6;
    CHECK_THROWS_AS(extract_features(cfg, s), ConfigError);
}

TEST_CASE("image features follow the configured descriptors") {
    std::vector<features::GrayImage> imgs(3, features::GrayImage(28, 28, std::vector<double>(784, 0.5)));
    PipelineConfig cfg;
    const auto f = extract_features(cfg, SampleSet::from_images(imgs, {0, 1, 2}), 2);
    REQUIRE(f.size() == 3);
    CHECK(f[0].cols() == 36);
    CHECK(f[1].cols() == 6);
    CHECK(f[2].cols() == 784);
}

TEST_CASE("parallel_map keeps task order and reports the first failure") {
    const auto r = parallel_map<int>(20, 4, [](std::size_t i) { return static_cast<int>(i * i); });
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == static_cast<int>(i * i));
    try {
        parallel_map<int>(20, 4, [](std::size_t i) -> int {
            if (i == 3 || i == 15) throw DataError("task " + std::to_string(i));
            return 0;
        });
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()) == "task 3");
    }
}

TEST_CASE("fold plan: partitions, prefixes and the zero-shot audit") {
    const auto cfg = quick_config();
    const auto plan = plan_folds(cfg, 90, 200);
    REQUIRE(plan.test.size() == 3);
    for (std::size_t f = 0; f < 3; ++f) {
        CHECK(plan.test[f].size() + plan.train[f].size() == 90);
        const auto small = outlier_rows(plan, f, 10, plan.test[f].size());
        const auto large = outlier_rows(plan, f, 50, plan.test[f].size());
        CHECK(small.size() == metrics::outlier_count(10, plan.test[f].size()));
        CHECK(std::equal(small.begin(), small.end(), large.begin()));
    }
    CHECK(plan_folds(cfg, 90, 200).outlier_order == plan.outlier_order);
    CHECK_THROWS_AS(outlier_rows(plan, 0, 95, 30), DataError);

    auto data = quick_data();
    CHECK_NOTHROW(audit_zero_shot(data, plan.train[0]));
    data.outliers.ids[0] = data.inliers.ids[plan.train[0][0]];
    CHECK_THROWS_AS(audit_zero_shot(data, plan.train[0]), StateError);
}

TEST_CASE("model file round trip") {
    const auto cfg = quick_config();
    const auto data = quick_data();
    const auto prep = prepare(cfg, data);
    const auto plan = plan_folds(cfg, data.inliers.size(), data.outliers.size());
    const auto fit = fit_model(cfg, take_rows(prep.inliers, plan.train[1]), 1);

    const auto bytes = serialize_model(fit.model);
    auto resealed = bytes;
    reseal(resealed);
    CHECK(resealed == bytes);
    const auto loaded = deserialize_model(bytes);
    CHECK(serialize_model(loaded) == bytes);
    CHECK(loaded == fit.model);
    CHECK(loaded.fold == 1);
    CHECK(config_text(loaded.config) == config_text(cfg));
    CHECK(!loaded.hierarchy.scaler.empty());

    const Matrix probes = testing::random_matrix(100, 8, 3, -8, 8);
    const FeatureSet pf = extract_features(cfg, SampleSet::from_vectors(probes, std::vector<std::size_t>(100)));
    CHECK(loaded.score(pf) == fit.model.score(pf));

    const auto info = inspect_model_file(bytes);
    CHECK(info.version == kModelFormat);
    std::vector<std::string> tags;
    for (const auto& s : info.sections) tags.push_back(s.tag);
    CHECK(tags == std::vector<std::string>{"SCAL", "AEWT", "VAEW", "CATQ", "CLSF", "CONF"});

    auto corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= 0x01;
    try {
        deserialize_model(corrupt);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("checksum") != std::string::npos);
    }

    auto future = bytes;
    future[8] = 2;  // major version, little-endian u16 after the magic
    reseal(future);
    try {
        deserialize_model(future);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("newer") != std::string::npos);
    }

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad_magic), DataError);
    CHECK_THROWS_AS(deserialize_model(std::vector<unsigned char>(bytes.begin(), bytes.begin() + 10)), DataError);

    const auto path = std::filesystem::temp_directory_path() / "outskirt_test_model.osk";
    save_model(path, fit.model);
    CHECK(load_model(path) == fit.model);
    std::filesystem::remove(path);
}

TEST_CASE("model file round trip for every classifier") {
    auto base = quick_config();
    const auto data = quick_data();
    const auto prep = prepare(base, data);
    const auto train = take_rows(prep.inliers, plan_folds(base, 90, 200).train[0]);
    for (const char* kind : {"nb", "mlp", "ocsvm"}) {
        auto cfg = base;
        apply_setting(cfg, "classifier", kind);
        cfg.mlp.train.epochs = 3;
        if (std::string(kind) == "ocsvm") {
            cfg.synthesis = SynthesisMode::none;
            cfg.selector.reset();
        }
        const auto fit = fit_model(cfg, train, 0);
        const auto bytes = serialize_model(fit.model);
        CHECK(serialize_model(deserialize_model(bytes)) == bytes);
    }
}

TEST_CASE("negatives: deterministic synthesis ignores the noise stream") {
    auto cfg = quick_config();
    cfg.synthesis = SynthesisMode::deterministic;
    const auto data = quick_data();
    const auto prep = prepare(cfg, data);
    const auto rep = fit_representation(cfg, prep.inliers, 3);
    const auto stats = boundary::meta_stats(rep.catalog);
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto neg = make_negatives(cfg, rep, seed);
        CHECK(neg.points.rows() == 90);
        for (Eigen::Index r = 0; r < neg.points.rows(); ++r) {
            const auto& q = rep.catalog.entries[neg.generator[static_cast<std::size_t>(r)]];
            const Eigen::VectorXd y = q.mu + cfg.beta * boundary::direction_signs(q, stats).cwiseProduct(q.sigma);
            CHECK(neg.points.row(r).transpose().isApprox(y, 1e-12));
        }
    }
}

TEST_CASE("experiment: determinism across runs and worker counts") {
    const auto cfg = quick_config();
    const auto data = quick_data();
    const auto a = run_experiment(cfg, data, 1);
    const auto b = run_experiment(cfg, data, 1);
    const auto c = run_experiment(cfg, data, 8);
    REQUIRE(a.reports.size() == 2);
    CHECK(a.reports[0].per_fold.size() == 3);
    CHECK(report_text(a) == report_text(b));
    CHECK(report_text(a) == report_text(c));
    CHECK(a.reports[0].config_fingerprint == config_fingerprint(cfg));
    CHECK(a.reports[0].aggregate.auc > 0.7);

    // the 20% run uses a subset of the 50% run's outliers
    for (std::size_t f = 0; f < 3; ++f) CHECK(a.reports[0].per_fold[f].n_neg < a.reports[1].per_fold[f].n_neg);
}

TEST_CASE("grid search: 45 cells, alpha-major, invalid cells flagged") {
    auto cfg = quick_config();
    cfg.train.epochs = 2;
    const auto cells = grid_search_alpha_beta(cfg, quick_data(), GridSpec{}, 2);
    REQUIRE(cells.size() == 45);
    CHECK(cells[0].alpha == 1.0);
    CHECK(cells[0].beta == 1.0);
    CHECK(cells[8].beta == 5.0);
    CHECK(cells[9].alpha == 1.25);
    for (const auto& c : cells) {
        CHECK((c.status == "ok" || c.status == "invalid"));
        if (c.status == "invalid") {
            CHECK(std::isnan(c.auc));
            CHECK(!c.reason.empty());
        }
    }
    GridSpec huge;
    huge.alphas = {1e6};
    huge.betas = {1.0};
    const auto empty = grid_search_alpha_beta(cfg, quick_data(), huge, 1);
    REQUIRE(empty.size() == 1);
    CHECK(empty[0].status == "invalid");
    CHECK(empty[0].reason.find("empty outskirt") != std::string::npos);

    std::ostringstream os;
    write_grid_csv(os, cells);
    const auto text = os.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 46);
}

TEST_CASE("ablation variants") {
    const auto base = quick_config();
    const auto vec = ablation_variants(base, false);
    const auto img = ablation_variants(base, true);
    CHECK(img.size() == vec.size() + 3);
    std::vector<std::string> names;
    for (const auto& v : vec) {
        CHECK_NOTHROW(v.config.validate());
        names.push_back(v.name);
    }
    for (const char* n : {"full", "deterministic", "no-ae", "no-vae-concat-ocsvm", "ae-fusion-jitter"}) {
        CHECK(std::find(names.begin(), names.end(), n) != names.end());
    }
}

TEST_CASE("manifest JSON") {
    RunManifest m;
    m.command = "eval";
    m.config = quick_config();
    m.seeds = seed_table(m.config);
    m.version = std::string(version());
    m.metrics.emplace_back("auc", 0.5);
    const auto j = nlohmann::json::parse(manifest_json(m));
    CHECK(j.at("command") == "eval");
    CHECK(j.at("config").at("alpha") == "1");
    CHECK(j.at("seeds").contains("fold0.synthesis"));
    CHECK(j.at("config_fingerprint") == config_fingerprint(m.config));
}
