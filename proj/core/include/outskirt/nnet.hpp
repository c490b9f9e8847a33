#pragma once

// Dense feed-forward networks with hand-written reverse-mode gradients.
//
// Batches are row-major [n x d] matrices, one sample per row. A layer maps
// its input X to act(X * W^T + 1 b^T) with W stored [out x in].

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace outskirt::nnet {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1, tanh = 2, linear = 3 };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Elementwise activation, and its derivative written in terms of the output.
void activate(Activation a, Matrix& values);
Matrix activation_derivative(Activation a, const Matrix& outputs);

struct Layer {
    Matrix weight;  // [out x in]
    Vector bias;    // [out]
    Activation activation = Activation::linear;

    std::size_t in() const { return static_cast<std::size_t>(weight.cols()); }
    std::size_t out() const { return static_cast<std::size_t>(weight.rows()); }
};

/// Per-layer parameter gradients, shaped like the network they belong to.
struct Gradients {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;

    void set_zero();
    Gradients& operator+=(const Gradients& other);
};

class DenseNet {
public:
    DenseNet() = default;
    explicit DenseNet(std::vector<Layer> layers);

    /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
    /// `sizes` has one more entry than `activations`.
    static DenseNet glorot(std::span<const std::size_t> sizes,
                           std::span<const Activation> activations, std::uint64_t seed);

    /// Inference pass; touches no mutable state and may run concurrently.
    Matrix forward(const Matrix& batch) const;

    /// Inference pass stopping before the final activation (logits).
    Matrix forward_logits(const Matrix& batch) const;

    /// Training pass; caches the activations `backward` needs.
    Matrix forward_train(const Matrix& batch);

    /// Accumulates parameter gradients of the last cached pass into `grads`
    /// and returns the gradient with respect to the batch input.
    Matrix backward(const Matrix& grad_output, Gradients& grads) const;

    Gradients zero_gradients() const;
    void clear_cache();

    std::size_t input_size() const;
    std::size_t output_size() const;
    std::size_t parameter_count() const;
    bool empty() const { return layers_.empty(); }
    bool all_finite() const;

    std::span<const Layer> layers() const { return layers_; }
    std::span<Layer> layers() { return layers_; }

    bool operator==(const DenseNet& other) const;

private:
    void check_input(const Matrix& batch) const;

    std::vector<Layer> layers_;
    std::vector<Matrix> inputs_;
    std::vector<Matrix> outputs_;
};

// ---------------------------------------------------------------------------
// Losses. Each returns the scalar value and dL/dpred.

struct LossValue {
    double value = 0.0;
    Matrix grad;
};

enum class Loss { mse, bce, sse };

/// Mean over every element.
LossValue mse_loss(const Matrix& pred, const Matrix& target);

/// Mean over every element; predictions clamped to [1e-7, 1-1e-7].
LossValue bce_loss(const Matrix& pred, const Matrix& target);

/// Squared error summed over columns, averaged over rows (batch).
LossValue sse_loss(const Matrix& pred, const Matrix& target);

/// Binary cross-entropy summed over columns, averaged over rows.
LossValue bce_sum_loss(const Matrix& pred, const Matrix& target);

LossValue evaluate_loss(Loss loss, const Matrix& pred, const Matrix& target);

inline constexpr double kBceClamp = 1e-7;

// ---------------------------------------------------------------------------
// Optimization.

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(OptimizerKind k);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 128;
    std::size_t epochs = 50;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::uint64_t seed = 0;

    void validate() const;
};

/// SGD or Adam (beta1 0.9, beta2 0.999, eps 1e-8) over any number of
/// attached networks. Each attached net owns a slot with its own moments.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate);

    std::size_t attach(const DenseNet& net);

    /// Applies one update to `net` from `grads`. Throws NumericError if any
    /// weight becomes non-finite.
    void step(std::size_t slot, DenseNet& net, const Gradients& grads);

private:
    struct Slot {
        std::vector<Matrix> m_w, v_w;
        std::vector<Vector> m_b, v_b;
        std::uint64_t t = 0;
    };

    OptimizerKind kind_;
    double lr_;
    std::vector<Slot> slots_;
};

/// One mini-batch update of a stand-alone network. Returns the loss before
/// the update.
double train_step(DenseNet& net, const Matrix& batch, const Matrix& target, Loss loss,
                  Optimizer& opt, std::size_t slot);

struct TrainHistory {
    std::vector<double> epoch_loss;
};

/// Mini-batch training with per-epoch shuffling drawn from `cfg.seed`.
/// A non-finite loss aborts with a NumericError naming the epoch, the batch
/// and the loss history so far.
TrainHistory train(DenseNet& net, const Matrix& inputs, const Matrix& targets, Loss loss,
                   const TrainConfig& cfg);

/// Rows of `m` selected by `rows`, in that order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

/// Throws NumericError with `context` if `loss` is not finite.
void require_finite_loss(double loss, std::size_t epoch, std::size_t batch,
                         std::span<const double> history, std::string_view context);

}  // namespace outskirt::nnet
