#include "outskirt/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "outskirt/error.hpp"
#include "outskirt/rng.hpp"

namespace outskirt::nnet {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::linear: return "linear";
    }
    return "?";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    if (name == "linear") return Activation::linear;
    throw ConfigError("unknown activation '" + std::string(name) +
                      "' (expected relu, sigmoid, tanh or linear)");
}

void activate(Activation a, Matrix& values) {
    switch (a) {
        case Activation::relu: values = values.cwiseMax(0.0); break;
        case Activation::sigmoid:
            values = values.unaryExpr([](double x) {
                // split on sign so exp never overflows
                if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
                const double e = std::exp(x);
                return e / (1.0 + e);
            });
            break;
        case Activation::tanh: values = values.array().tanh().matrix(); break;
        case Activation::linear: break;
    }
}

Matrix activation_derivative(Activation a, const Matrix& outputs) {
    switch (a) {
        case Activation::relu:
            return outputs.unaryExpr([](double y) { return y > 0.0 ? 1.0 : 0.0; });
        case Activation::sigmoid:
            return (outputs.array() * (1.0 - outputs.array())).matrix();
        case Activation::tanh: return (1.0 - outputs.array().square()).matrix();
        case Activation::linear: return Matrix::Ones(outputs.rows(), outputs.cols());
    }
    return {};
}

void Gradients::set_zero() {
    for (auto& w : weight) w.setZero();
    for (auto& b : bias) b.setZero();
}

Gradients& Gradients::operator+=(const Gradients& other) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
        weight[i] += other.weight[i];
        bias[i] += other.bias[i];
    }
    return *this;
}

DenseNet::DenseNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.out() == 0 || l.in() == 0) {
            throw ConfigError("layer " + std::to_string(i) + " has an empty dimension");
        }
        if (static_cast<std::size_t>(l.bias.size()) != l.out()) {
            throw ConfigError("layer " + std::to_string(i) + " bias size does not match its output");
        }
        if (i > 0 && layers_[i - 1].out() != l.in()) {
            throw ConfigError("layer " + std::to_string(i) + " input " + std::to_string(l.in()) +
                              " does not chain with previous output " +
                              std::to_string(layers_[i - 1].out()));
        }
    }
}

DenseNet DenseNet::glorot(std::span<const std::size_t> sizes,
                          std::span<const Activation> activations, std::uint64_t seed) {
    if (sizes.size() != activations.size() + 1 || activations.empty()) {
        throw ConfigError("glorot: need one activation per layer and at least one layer");
    }
    Engine engine(seed);
    std::vector<Layer> layers;
    layers.reserve(activations.size());
    for (std::size_t i = 0; i < activations.size(); ++i) {
        const auto fan_in = sizes[i];
        const auto fan_out = sizes[i + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Layer layer;
        layer.weight.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(engine);
        }
        layer.bias = Vector::Zero(static_cast<Eigen::Index>(fan_out));
        layer.activation = activations[i];
        layers.push_back(std::move(layer));
    }
    return DenseNet(std::move(layers));
}

void DenseNet::check_input(const Matrix& batch) const {
    if (layers_.empty()) throw StateError("forward on an empty network");
    if (static_cast<std::size_t>(batch.cols()) != input_size()) {
        throw ConfigError("batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                          std::to_string(input_size()));
    }
}

Matrix DenseNet::forward(const Matrix& batch) const {
    check_input(batch);
    Matrix x = batch;
    for (const auto& l : layers_) {
        Matrix z = x * l.weight.transpose();
        z.rowwise() += l.bias.transpose();
        activate(l.activation, z);
        x = std::move(z);
    }
    return x;
}

Matrix DenseNet::forward_logits(const Matrix& batch) const {
    check_input(batch);
    Matrix x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        Matrix z = x * l.weight.transpose();
        z.rowwise() += l.bias.transpose();
        if (i + 1 < layers_.size()) activate(l.activation, z);
        x = std::move(z);
    }
    return x;
}

Matrix DenseNet::forward_train(const Matrix& batch) {
    check_input(batch);
    inputs_.clear();
    outputs_.clear();
    Matrix x = batch;
    for (const auto& l : layers_) {
        inputs_.push_back(x);
        Matrix z = x * l.weight.transpose();
        z.rowwise() += l.bias.transpose();
        activate(l.activation, z);
        outputs_.push_back(z);
        x = std::move(z);
    }
    return x;
}

Matrix DenseNet::backward(const Matrix& grad_output, Gradients& grads) const {
    if (outputs_.size() != layers_.size() || layers_.empty()) {
        throw StateError("backward called before forward_train");
    }
    if (grads.weight.size() != layers_.size()) grads = zero_gradients();
    if (grad_output.rows() != outputs_.back().rows() || grad_output.cols() != outputs_.back().cols()) {
        throw ConfigError("backward: gradient shape does not match the cached output");
    }
    Matrix grad = grad_output;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const auto& l = layers_[k];
        Matrix delta = grad.cwiseProduct(activation_derivative(l.activation, outputs_[k]));
        grads.weight[k].noalias() += delta.transpose() * inputs_[k];
        grads.bias[k] += delta.colwise().sum().transpose();
        grad = delta * l.weight;
    }
    return grad;
}

Gradients DenseNet::zero_gradients() const {
    Gradients g;
    for (const auto& l : layers_) {
        g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
        g.bias.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
}

void DenseNet::clear_cache() {
    inputs_.clear();
    outputs_.clear();
}

std::size_t DenseNet::input_size() const { return layers_.empty() ? 0 : layers_.front().in(); }
std::size_t DenseNet::output_size() const { return layers_.empty() ? 0 : layers_.back().out(); }

std::size_t DenseNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.in() * l.out() + l.out();
    return n;
}

bool DenseNet::all_finite() const {
    return std::all_of(layers_.begin(), layers_.end(), [](const Layer& l) {
        return l.weight.allFinite() && l.bias.allFinite();
    });
}

bool DenseNet::operator==(const DenseNet& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& a = layers_[i];
        const auto& b = other.layers_[i];
        if (a.activation != b.activation || a.weight.rows() != b.weight.rows() ||
            a.weight.cols() != b.weight.cols() || a.weight != b.weight || a.bias != b.bias) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------

namespace {

void require_same_shape(const Matrix& pred, const Matrix& target, const char* name) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw ConfigError(std::string(name) + ": prediction and target shapes differ");
    }
    if (pred.size() == 0) throw ConfigError(std::string(name) + ": empty input");
}

}  // namespace

LossValue mse_loss(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "mse");
    const Matrix diff = pred - target;
    const double n = static_cast<double>(diff.size());
    return {diff.squaredNorm() / n, diff * (2.0 / n)};
}

LossValue sse_loss(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "sse");
    const Matrix diff = pred - target;
    const double rows = static_cast<double>(diff.rows());
    return {diff.squaredNorm() / rows, diff * (2.0 / rows)};
}

namespace {

LossValue bce_impl(const Matrix& pred, const Matrix& target, double denom) {
    LossValue out;
    out.grad.resize(pred.rows(), pred.cols());
    double total = 0.0;
    for (Eigen::Index r = 0; r < pred.rows(); ++r) {
        for (Eigen::Index c = 0; c < pred.cols(); ++c) {
            const double p = std::clamp(pred(r, c), kBceClamp, 1.0 - kBceClamp);
            const double t = target(r, c);
            total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
            out.grad(r, c) = (p - t) / (p * (1.0 - p)) / denom;
        }
    }
    out.value = total / denom;
    return out;
}

}  // namespace

LossValue bce_loss(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "bce");
    return bce_impl(pred, target, static_cast<double>(pred.size()));
}

LossValue bce_sum_loss(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "bce");
    return bce_impl(pred, target, static_cast<double>(pred.rows()));
}

LossValue evaluate_loss(Loss loss, const Matrix& pred, const Matrix& target) {
    switch (loss) {
        case Loss::mse: return mse_loss(pred, target);
        case Loss::bce: return bce_loss(pred, target);
        case Loss::sse: return sse_loss(pred, target);
    }
    throw ConfigError("unknown loss");
}

// ---------------------------------------------------------------------------

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("train.lr must be a positive finite number");
    }
    if (batch_size < 1) throw ConfigError("train.batch must be >= 1");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

std::size_t Optimizer::attach(const DenseNet& net) {
    Slot s;
    for (const auto& l : net.layers()) {
        s.m_w.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
        s.v_w.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
        s.m_b.push_back(Vector::Zero(l.bias.size()));
        s.v_b.push_back(Vector::Zero(l.bias.size()));
    }
    slots_.push_back(std::move(s));
    return slots_.size() - 1;
}

void Optimizer::step(std::size_t slot, DenseNet& net, const Gradients& grads) {
    auto layers = net.layers();
    if (grads.weight.size() != layers.size()) throw StateError("gradient/network layer count mismatch");
    if (kind_ == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].weight -= lr_ * grads.weight[i];
            layers[i].bias -= lr_ * grads.bias[i];
        }
    } else {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        Slot& s = slots_.at(slot);
        ++s.t;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
        for (std::size_t i = 0; i < layers.size(); ++i) {
            s.m_w[i] = b1 * s.m_w[i] + (1.0 - b1) * grads.weight[i];
            s.v_w[i] = b2 * s.v_w[i] + (1.0 - b2) * grads.weight[i].cwiseAbs2();
            s.m_b[i] = b1 * s.m_b[i] + (1.0 - b1) * grads.bias[i];
            s.v_b[i] = b2 * s.v_b[i] + (1.0 - b2) * grads.bias[i].cwiseAbs2();
            layers[i].weight.array() -=
                lr_ * (s.m_w[i].array() / c1) / ((s.v_w[i].array() / c2).sqrt() + eps);
            layers[i].bias.array() -=
                lr_ * (s.m_b[i].array() / c1) / ((s.v_b[i].array() / c2).sqrt() + eps);
        }
    }
    if (!net.all_finite()) throw NumericError("non-finite weight after optimizer step");
}

double train_step(DenseNet& net, const Matrix& batch, const Matrix& target, Loss loss,
                  Optimizer& opt, std::size_t slot) {
    const Matrix pred = net.forward_train(batch);
    LossValue lv = evaluate_loss(loss, pred, target);
    if (!std::isfinite(lv.value)) return lv.value;
    Gradients g = net.zero_gradients();
    net.backward(lv.grad, g);
    opt.step(slot, net, g);
    return lv.value;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

void require_finite_loss(double loss, std::size_t epoch, std::size_t batch,
                         std::span<const double> history, std::string_view context) {
    if (std::isfinite(loss)) return;
    std::ostringstream msg;
    msg << context << ": non-finite loss at epoch " << epoch << ", batch " << batch
        << "; epoch loss history [";
    for (std::size_t i = 0; i < history.size(); ++i) msg << (i ? ", " : "") << history[i];
    msg << "]";
    throw NumericError(msg.str());
}

TrainHistory train(DenseNet& net, const Matrix& inputs, const Matrix& targets, Loss loss,
                   const TrainConfig& cfg) {
    cfg.validate();
    if (inputs.rows() != targets.rows()) throw ConfigError("train: input/target row counts differ");
    if (inputs.rows() == 0) throw ConfigError("train: empty training set");
    Optimizer opt(cfg.optimizer, cfg.learning_rate);
    const auto slot = opt.attach(net);
    Engine engine(cfg.seed);
    std::vector<std::size_t> order(static_cast<std::size_t>(inputs.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainHistory history;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), engine);
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const auto end = std::min(order.size(), start + cfg.batch_size);
            std::span<const std::size_t> idx(order.data() + start, end - start);
            const double l = train_step(net, gather_rows(inputs, idx), gather_rows(targets, idx), loss,
                                        opt, slot);
            require_finite_loss(l, epoch, batches, history.epoch_loss, "train");
            sum += l;
            ++batches;
        }
        history.epoch_loss.push_back(sum / static_cast<double>(batches));
    }
    net.clear_cache();
    return history;
}

}  // namespace outskirt::nnet
