#include <random>

#include <benchmark/benchmark.h>

#include "outskirt/boundary.hpp"
#include "outskirt/classify.hpp"
#include "outskirt/features.hpp"
#include "outskirt/hierarchy.hpp"
#include "outskirt/metrics.hpp"
#include "outskirt/nnet.hpp"

using namespace outskirt;
using nnet::Matrix;

namespace {

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double shift = 0.0) {
    std::mt19937_64 e(seed);
    std::normal_distribution<double> n;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = shift + n(e);
    return m;
}

features::GrayImage noise_image(std::uint64_t seed) {
    std::mt19937_64 e(seed);
    std::uniform_real_distribution<double> u;
    std::vector<double> px(28 * 28);
    for (auto& p : px) p = u(e);
    return features::GrayImage(28, 28, std::move(px));
}

}  // namespace

static void BM_DenseForwardBackward(benchmark::State& state) {
    const auto width = static_cast<std::size_t>(state.range(0));
    const std::size_t sizes[] = {width, width, width};
    const nnet::Activation acts[] = {nnet::Activation::relu, nnet::Activation::linear};
    auto net = nnet::DenseNet::glorot(sizes, acts, 1);
    const Matrix x = gaussian(128, static_cast<Eigen::Index>(width), 2);
    auto g = net.zero_gradients();
    for (auto _ : state) {
        const Matrix out = net.forward_train(x);
        benchmark::DoNotOptimize(net.backward(nnet::mse_loss(out, x).grad, g));
    }
}
BENCHMARK(BM_DenseForwardBackward)->Arg(64)->Arg(784);

static void BM_Hog(benchmark::State& state) {
    const auto img = noise_image(3);
    const features::HogConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(features::hog(img, cfg));
}
BENCHMARK(BM_Hog);

static void BM_Lbp(benchmark::State& state) {
    const auto img = noise_image(4);
    const features::LbpConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(features::lbp_histogram(img, cfg));
}
BENCHMARK(BM_Lbp);

static void BM_SvmFit(benchmark::State& state) {
    const auto n = state.range(0);
    const Matrix pos = gaussian(n, 4, 5, 1.0), neg = gaussian(n, 4, 6, -1.0);
    for (auto _ : state) benchmark::DoNotOptimize(classify::svm_fit(pos, neg, {classify::KernelType::rbf, 1.0}, 0.1));
}
BENCHMARK(BM_SvmFit)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

static void BM_SelectAndSynthesize(benchmark::State& state) {
    const Matrix mu = gaussian(state.range(0), 4, 7);
    hierarchy::LatentCatalog q;
    for (Eigen::Index i = 0; i < mu.rows(); ++i) {
        q.entries.push_back({mu.row(i).transpose(), Eigen::VectorXd::Constant(4, 0.5)});
    }
    boundary::SynthesisConfig sc;
    sc.count = static_cast<std::size_t>(mu.rows());
    for (auto _ : state) {
        const auto stats = boundary::meta_stats(q);
        const auto set = boundary::select(boundary::Selector::l2, q, stats, 1.0);
        benchmark::DoNotOptimize(boundary::synthesize(set, sc));
    }
}
BENCHMARK(BM_SelectAndSynthesize)->Arg(1000)->Arg(10000);

static void BM_RocAuc(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 e(8);
    std::normal_distribution<double> normal;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 2);
        s[i] = normal(e) + y[i];
    }
    for (auto _ : state) benchmark::DoNotOptimize(metrics::roc_auc(s, y));
}
BENCHMARK(BM_RocAuc)->Arg(10000);
BENCHMARK_MAIN();
