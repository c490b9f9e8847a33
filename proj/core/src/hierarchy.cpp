#include "outskirt/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "outskirt/error.hpp"

namespace outskirt::hierarchy {

using nnet::Activation;

WidthRule parse_width(std::string_view name) {
    if (name == "same") return WidthRule::same;
    if (name == "double") return WidthRule::twice;
    if (name == "half") return WidthRule::half;
    throw ConfigError("unknown width rule '" + std::string(name) + "' (expected same, double or half)");
}

std::string_view to_string(WidthRule w) {
    switch (w) {
        case WidthRule::same: return "same";
        case WidthRule::twice: return "double";
        case WidthRule::half: return "half";
    }
    return "?";
}

std::size_t apply_width(WidthRule w, std::size_t input_dim) {
    switch (w) {
        case WidthRule::same: return input_dim;
        case WidthRule::twice: return 2 * input_dim;
        case WidthRule::half: return std::max<std::size_t>(1, input_dim / 2);
    }
    return input_dim;
}

AeMode parse_ae_mode(std::string_view s) {
    if (s == "individual") return AeMode::individual;
    if (s == "concatenated") return AeMode::concatenated;
    if (s == "none") return AeMode::none;
    throw ConfigError("unknown ae.mode '" + std::string(s) + "'");
}

FusionMode parse_fusion(std::string_view s) {
    if (s == "vae") return FusionMode::vae;
    if (s == "ae") return FusionMode::ae;
    if (s == "none") return FusionMode::none;
    throw ConfigError("unknown fusion '" + std::string(s) + "'");
}

Schedule parse_schedule(std::string_view s) {
    if (s == "joint") return Schedule::joint;
    if (s == "staged") return Schedule::staged;
    throw ConfigError("unknown train.schedule '" + std::string(s) + "'");
}

ReconLoss parse_recon_loss(std::string_view s) {
    if (s == "sse") return ReconLoss::sse;
    if (s == "bce") return ReconLoss::bce;
    throw ConfigError("unknown ae.loss '" + std::string(s) + "'");
}

std::string_view to_string(AeMode m) {
    switch (m) {
        case AeMode::individual: return "individual";
        case AeMode::concatenated: return "concatenated";
        case AeMode::none: return "none";
    }
    return "?";
}

std::string_view to_string(FusionMode m) {
    switch (m) {
        case FusionMode::vae: return "vae";
        case FusionMode::ae: return "ae";
        case FusionMode::none: return "none";
    }
    return "?";
}

std::string_view to_string(Schedule s) { return s == Schedule::joint ? "joint" : "staged"; }
std::string_view to_string(ReconLoss l) { return l == ReconLoss::sse ? "sse" : "bce"; }

// ---------------------------------------------------------------------------

Matrix FeatureAE::encode(const Matrix& features) const { return encoder.forward(features); }

Matrix FeatureAE::reconstruct(const Matrix& features) const {
    return decoder.forward(encoder.forward(features));
}

void FeatureAE::validate() const {
    const auto enc = encoder.layers();
    const auto dec = decoder.layers();
    if (enc.empty() || enc.size() != dec.size()) {
        throw ConfigError("autoencoder decoder must mirror the encoder layer count");
    }
    for (std::size_t i = 0; i < enc.size(); ++i) {
        const auto& e = enc[i];
        const auto& d = dec[dec.size() - 1 - i];
        if (e.in() != d.out() || e.out() != d.in()) {
            throw ConfigError("autoencoder decoder layer shapes do not mirror the encoder");
        }
    }
}

FeatureAE make_feature_ae(std::size_t input_dim, const AeSpec& spec, bool unit_interval,
                          std::uint64_t seed, std::size_t feature_index) {
    if (spec.layers < 1) throw ConfigError("ae.layers must be >= 1");
    if (input_dim == 0) throw ConfigError("autoencoder input dimension must be positive");
    const auto width = apply_width(spec.width, input_dim);

    std::vector<std::size_t> enc_sizes{input_dim};
    for (std::size_t i = 0; i < spec.layers; ++i) enc_sizes.push_back(width);
    std::vector<Activation> enc_acts(spec.layers, spec.activation);

    std::vector<std::size_t> dec_sizes(enc_sizes.rbegin(), enc_sizes.rend());
    std::vector<Activation> dec_acts(spec.layers, spec.activation);
    dec_acts.back() = unit_interval ? Activation::sigmoid : Activation::linear;

    FeatureAE ae;
    ae.encoder = DenseNet::glorot(enc_sizes, enc_acts, derive_seed(seed, 0));
    ae.decoder = DenseNet::glorot(dec_sizes, dec_acts, derive_seed(seed, 1));
    ae.noise_sigma = spec.noise_sigma;
    ae.feature_index = feature_index;
    return ae;
}

// ---------------------------------------------------------------------------

Matrix LatentCatalog::means() const {
    Matrix m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < size(); ++i) m.row(static_cast<Eigen::Index>(i)) = entries[i].mu.transpose();
    return m;
}

Matrix LatentCatalog::sigmas() const {
    Matrix m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < size(); ++i) {
        m.row(static_cast<Eigen::Index>(i)) = entries[i].sigma.transpose();
    }
    return m;
}

void FusionVAE::validate() const {
    if (trunk.empty() || mu_head.empty() || decoder.empty()) throw ConfigError("fusion network is incomplete");
    if (mu_head.input_size() != trunk.output_size()) throw ConfigError("mu head does not chain with trunk");
    if (variational) {
        if (logvar_head.empty() || logvar_head.output_size() != mu_head.output_size() ||
            logvar_head.input_size() != trunk.output_size()) {
            throw ConfigError("mu and log-variance heads must have identical shapes");
        }
    }
    if (decoder.input_size() != latent_dim() || decoder.output_size() != input_dim()) {
        throw ConfigError("fusion decoder must map the latent space back to w");
    }
}

FusionVAE make_fusion_vae(std::size_t input_dim, const VaeSpec& spec, bool variational,
                          std::uint64_t seed) {
    if (spec.layers < 1) throw ConfigError("vae.layers must be >= 1");
    if (spec.latent_dim < 1) throw ConfigError("vae.latent_dim must be >= 1");
    const auto width = apply_width(spec.width, input_dim);

    std::vector<std::size_t> trunk_sizes{input_dim};
    for (std::size_t i = 0; i < spec.layers; ++i) trunk_sizes.push_back(width);
    const std::vector<Activation> hidden(spec.layers, spec.activation);

    const std::vector<std::size_t> head_sizes{width, spec.latent_dim};
    const std::vector<Activation> linear{Activation::linear};

    std::vector<std::size_t> dec_sizes{spec.latent_dim};
    for (std::size_t i = 0; i < spec.layers; ++i) dec_sizes.push_back(width);
    dec_sizes.push_back(input_dim);
    std::vector<Activation> dec_acts(spec.layers, spec.activation);
    dec_acts.push_back(Activation::linear);

    FusionVAE vae;
    vae.variational = variational;
    vae.trunk = DenseNet::glorot(trunk_sizes, hidden, derive_seed(seed, 0));
    vae.mu_head = DenseNet::glorot(head_sizes, linear, derive_seed(seed, 1));
    if (variational) vae.logvar_head = DenseNet::glorot(head_sizes, linear, derive_seed(seed, 2));
    vae.decoder = DenseNet::glorot(dec_sizes, dec_acts, derive_seed(seed, 3));
    return vae;
}

EncodedBatch vae_encode_batch(const FusionVAE& vae, const Matrix& w) {
    const Matrix h = vae.trunk.forward(w);
    EncodedBatch out;
    out.mu = vae.mu_head.forward(h);
    if (vae.variational) {
        out.sigma = (0.5 * vae.logvar_head.forward(h).array()).exp().matrix();
    } else {
        out.sigma = Matrix::Ones(out.mu.rows(), out.mu.cols());
    }
    if (!out.mu.allFinite() || !out.sigma.allFinite() || (out.sigma.array() <= 0.0).any()) {
        throw NumericError("fusion encoder produced non-finite or non-positive Gaussian parameters");
    }
    return out;
}

GaussianParams vae_encode(const FusionVAE& vae, const Eigen::VectorXd& w) {
    const Matrix row = w.transpose();
    auto enc = vae_encode_batch(vae, row);
    return {enc.mu.row(0).transpose(), enc.sigma.row(0).transpose()};
}

Eigen::VectorXd reparam_sample(const GaussianParams& p, const Eigen::VectorXd& eps) {
    return p.mu + p.sigma.cwiseProduct(eps);
}

Eigen::VectorXd reparam_sample(const GaussianParams& p, std::uint64_t seed) {
    Engine engine(seed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd eps(p.mu.size());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = normal(engine);
    return reparam_sample(p, eps);
}

double kl_to_standard_normal(const GaussianParams& p) {
    if (p.mu.size() != p.sigma.size()) throw ConfigError("kl: mu and sigma sizes differ");
    double kl = 0.0;
    for (Eigen::Index d = 0; d < p.mu.size(); ++d) {
        const double s = p.sigma[d];
        if (!(s > 0.0)) throw NumericError("kl: sigma must be strictly positive");
        const double s2 = s * s;
        kl += s2 + p.mu[d] * p.mu[d] - 1.0 - std::log(s2);
    }
    return 0.5 * kl;
}

double feature_loss(std::span<const FeatureAE> aes, std::span<const Matrix> features) {
    if (aes.size() != features.size()) {
        throw ConfigError("feature_loss: " + std::to_string(features.size()) + " feature blocks for " +
                          std::to_string(aes.size()) + " autoencoders");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < aes.size(); ++i) {
        total += nnet::sse_loss(aes[i].reconstruct(features[i]), features[i]).value;
    }
    return total;
}

Matrix concat_latents(std::span<const Matrix> codes) {
    if (codes.empty()) throw ConfigError("concat_latents: no codes");
    const auto rows = codes.front().rows();
    Eigen::Index cols = 0;
    for (const auto& c : codes) {
        if (c.rows() != rows) throw ConfigError("concat_latents: codes have different row counts");
        if (c.cols() == 0) throw ConfigError("concat_latents: missing code");
        cols += c.cols();
    }
    Matrix w(rows, cols);
    Eigen::Index at = 0;
    for (const auto& c : codes) {
        w.middleCols(at, c.cols()) = c;
        at += c.cols();
    }
    return w;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
Matrix blockwise(const Matrix& input, Eigen::Index out_cols, Fn&& fn) {
    Matrix out(input.rows(), out_cols);
    for (Eigen::Index start = 0; start < input.rows(); start += kEncodeBlock) {
        const auto len = std::min<Eigen::Index>(kEncodeBlock, input.rows() - start);
        out.middleRows(start, len) = fn(Matrix(input.middleRows(start, len)));
    }
    return out;
}

std::size_t code_width(const Hierarchy& h, const FeatureSet& arranged) {
    if (h.config.ae_mode == AeMode::none) {
        std::size_t n = 0;
        for (const auto& f : arranged) n += static_cast<std::size_t>(f.cols());
        return n;
    }
    std::size_t n = 0;
    for (const auto& ae : h.aes) n += ae.code_dim();
    return n;
}

}  // namespace

FeatureSet FeatureScaler::apply(const FeatureSet& features) const {
    if (features.size() != mean.size()) {
        throw ConfigError("scaler fitted on " + std::to_string(mean.size()) + " feature blocks, got " +
                          std::to_string(features.size()));
    }
    FeatureSet out;
    out.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].cols() != mean[i].size()) {
            throw ConfigError("feature block " + std::to_string(i) + " has " +
                              std::to_string(features[i].cols()) + " columns, scaler expects " +
                              std::to_string(mean[i].size()));
        }
        out.push_back(((features[i].rowwise() - mean[i]).array().rowwise() / scale[i].array()).matrix());
    }
    return out;
}

FeatureScaler fit_scaler(const FeatureSet& features, double floor) {
    if (!(floor > 0.0)) throw ConfigError("standardization floor must be positive");
    FeatureScaler s;
    for (const auto& f : features) {
        if (f.rows() < 1) throw DataError("cannot fit a scaler on an empty feature block");
        const Eigen::RowVectorXd mu = f.colwise().mean();
        Eigen::RowVectorXd sd = (f.rowwise() - mu).array().square().colwise().mean().sqrt().matrix();
        sd = sd.cwiseMax(floor);
        s.mean.push_back(mu);
        s.scale.push_back(sd);
    }
    return s;
}

FeatureSet Hierarchy::arrange(const FeatureSet& features) const {
    if (features.empty()) throw ConfigError("no feature blocks");
    if (!scaler.empty()) {
        const FeatureSet scaled = scaler.apply(features);
        if (config.ae_mode == AeMode::individual) return scaled;
        return FeatureSet{concat_latents(scaled)};
    }
    if (config.ae_mode == AeMode::individual) return features;
    return FeatureSet{concat_latents(features)};
}

Matrix Hierarchy::latent_codes(const FeatureSet& features) const {
    const FeatureSet arranged = arrange(features);
    if (config.ae_mode == AeMode::none) return concat_latents(arranged);
    if (arranged.size() != aes.size()) {
        throw ConfigError("expected " + std::to_string(aes.size()) + " feature blocks, got " +
                          std::to_string(arranged.size()));
    }
    FeatureSet codes;
    for (std::size_t i = 0; i < aes.size(); ++i) {
        const auto& ae = aes[i];
        codes.push_back(blockwise(arranged[i], static_cast<Eigen::Index>(ae.code_dim()),
                                  [&](const Matrix& b) { return ae.encode(b); }));
    }
    return concat_latents(codes);
}

EncodedBatch Hierarchy::encode(const FeatureSet& features) const {
    if (!fusion) throw StateError("hierarchy has no fusion stage");
    const Matrix w = latent_codes(features);
    EncodedBatch out{Matrix(w.rows(), static_cast<Eigen::Index>(fusion->latent_dim())),
                     Matrix(w.rows(), static_cast<Eigen::Index>(fusion->latent_dim()))};
    for (Eigen::Index start = 0; start < w.rows(); start += kEncodeBlock) {
        const auto len = std::min<Eigen::Index>(kEncodeBlock, w.rows() - start);
        auto enc = vae_encode_batch(*fusion, Matrix(w.middleRows(start, len)));
        out.mu.middleRows(start, len) = enc.mu;
        out.sigma.middleRows(start, len) = enc.sigma;
    }
    return out;
}

Matrix Hierarchy::embed(const FeatureSet& features) const {
    if (!fusion) return latent_codes(features);
    return encode(features).mu;
}

LatentCatalog Hierarchy::catalog(const FeatureSet& features) const {
    const auto enc = encode(features);
    LatentCatalog q;
    q.entries.reserve(static_cast<std::size_t>(enc.mu.rows()));
    for (Eigen::Index i = 0; i < enc.mu.rows(); ++i) {
        q.entries.push_back({enc.mu.row(i).transpose(), enc.sigma.row(i).transpose()});
    }
    return q;
}

bool Hierarchy::operator==(const Hierarchy& other) const {
    if (!(scaler == other.scaler)) return false;
    if (aes.size() != other.aes.size() || fusion.has_value() != other.fusion.has_value()) return false;
    for (std::size_t i = 0; i < aes.size(); ++i) {
        if (!(aes[i].encoder == other.aes[i].encoder) || !(aes[i].decoder == other.aes[i].decoder)) {
            return false;
        }
    }
    if (fusion) {
        const auto& a = *fusion;
        const auto& b = *other.fusion;
        return a.variational == b.variational && a.trunk == b.trunk && a.mu_head == b.mu_head &&
               a.logvar_head == b.logvar_head && a.decoder == b.decoder;
    }
    return true;
}

// ---------------------------------------------------------------------------

Perturbation zero_perturbation(const Hierarchy& h, const FeatureSet& arranged) {
    Perturbation p;
    const auto rows = arranged.empty() ? 0 : arranged.front().rows();
    if (h.config.ae_mode != AeMode::none) {
        for (const auto& f : arranged) p.corruption.push_back(Matrix::Zero(f.rows(), f.cols()));
    }
    const auto dz = h.fusion ? static_cast<Eigen::Index>(h.fusion->latent_dim()) : 0;
    p.epsilon = Matrix::Zero(rows, dz);
    return p;
}

Perturbation draw_perturbation(const Hierarchy& h, const FeatureSet& arranged, Engine& engine) {
    Perturbation p = zero_perturbation(h, arranged);
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < p.corruption.size(); ++i) {
        const double s = h.aes[i].noise_sigma;
        if (s == 0.0) continue;
        auto& m = p.corruption[i];
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = s * normal(engine);
        }
    }
    if (h.fusion && h.fusion->variational) {
        for (Eigen::Index r = 0; r < p.epsilon.rows(); ++r) {
            for (Eigen::Index c = 0; c < p.epsilon.cols(); ++c) p.epsilon(r, c) = normal(engine);
        }
    }
    return p;
}

HierarchyGradients zero_gradients(const Hierarchy& h) {
    HierarchyGradients g;
    for (const auto& ae : h.aes) {
        g.encoder.push_back(ae.encoder.zero_gradients());
        g.decoder.push_back(ae.decoder.zero_gradients());
    }
    if (h.fusion) {
        g.trunk = h.fusion->trunk.zero_gradients();
        g.mu_head = h.fusion->mu_head.zero_gradients();
        g.logvar_head = h.fusion->logvar_head.zero_gradients();
        g.fusion_decoder = h.fusion->decoder.zero_gradients();
    }
    return g;
}

namespace {

nnet::LossValue recon_loss(ReconLoss kind, const Matrix& pred, const Matrix& target) {
    return kind == ReconLoss::sse ? nnet::sse_loss(pred, target) : nnet::bce_sum_loss(pred, target);
}

LossBreakdown run_step(Hierarchy& h, const FeatureSet& arranged, const Perturbation& noise,
                       HierarchyGradients* grads, bool train_aes, bool train_fusion) {
    LossBreakdown loss;
    const bool use_aes = h.config.ae_mode != AeMode::none;
    if (use_aes && arranged.size() != h.aes.size()) {
        throw ConfigError("expected " + std::to_string(h.aes.size()) + " feature blocks, got " +
                          std::to_string(arranged.size()));
    }

    // Level one.
    FeatureSet codes;
    std::vector<nnet::LossValue> feature_terms;
    if (use_aes) {
        for (std::size_t i = 0; i < h.aes.size(); ++i) {
            auto& ae = h.aes[i];
            Matrix input = arranged[i];
            if (i < noise.corruption.size()) input += noise.corruption[i];
            Matrix code = ae.encoder.forward_train(input);
            const Matrix rec = ae.decoder.forward_train(code);
            feature_terms.push_back(recon_loss(h.config.ae_loss, rec, arranged[i]));
            loss.feature += feature_terms.back().value;
            codes.push_back(std::move(code));
        }
    }
    const Matrix w = use_aes ? concat_latents(codes) : concat_latents(arranged);
    const auto n = static_cast<double>(w.rows());

    // Level two.
    Matrix grad_w = Matrix::Zero(w.rows(), w.cols());
    if (h.fusion && train_fusion) {
        auto& f = *h.fusion;
        const Matrix hidden = f.trunk.forward_train(w);
        const Matrix mu = f.mu_head.forward_train(hidden);
        Matrix z = mu;
        Matrix sigma, logvar;
        if (f.variational) {
            logvar = f.logvar_head.forward_train(hidden);
            sigma = (0.5 * logvar.array()).exp().matrix();
            z += sigma.cwiseProduct(noise.epsilon);
            loss.kl = 0.5 * (sigma.array().square() + mu.array().square() - 1.0 - logvar.array()).sum() / n;
        }
        const Matrix w_hat = f.decoder.forward_train(z);
        const auto rec = nnet::sse_loss(w_hat, w);
        loss.reconstruction = rec.value;

        if (grads) {
            const Matrix grad_z = f.decoder.backward(rec.grad, grads->fusion_decoder);
            Matrix grad_mu = grad_z;
            Matrix grad_hidden;
            if (f.variational) {
                grad_mu += mu / n;
                const Matrix grad_logvar =
                    (grad_z.array() * noise.epsilon.array() * 0.5 * sigma.array() +
                     0.5 * (sigma.array().square() - 1.0) / n)
                        .matrix();
                grad_hidden = f.logvar_head.backward(grad_logvar, grads->logvar_head);
                grad_hidden += f.mu_head.backward(grad_mu, grads->mu_head);
            } else {
                grad_hidden = f.mu_head.backward(grad_mu, grads->mu_head);
            }
            grad_w = f.trunk.backward(grad_hidden, grads->trunk);
            grad_w -= rec.grad;  // w is also the reconstruction target
        }
    }

    if (!grads || !use_aes || !train_aes) return loss;

    Eigen::Index at = 0;
    for (std::size_t i = 0; i < h.aes.size(); ++i) {
        auto& ae = h.aes[i];
        const auto width = static_cast<Eigen::Index>(ae.code_dim());
        Matrix grad_code = ae.decoder.backward(feature_terms[i].grad, grads->decoder[i]);
        grad_code += grad_w.middleCols(at, width);
        ae.encoder.backward(grad_code, grads->encoder[i]);
        at += width;
    }
    return loss;
}

}  // namespace

LossBreakdown hierarchy_loss(const Hierarchy& h, const FeatureSet& arranged, const Perturbation& noise) {
    Hierarchy scratch = h;
    return run_step(scratch, arranged, noise, nullptr, true, true);
}

LossBreakdown hierarchy_backward(Hierarchy& h, const FeatureSet& arranged, const Perturbation& noise,
                                 HierarchyGradients& grads, bool train_aes, bool train_fusion) {
    return run_step(h, arranged, noise, &grads, train_aes, train_fusion);
}

// ---------------------------------------------------------------------------

namespace {

bool in_unit_interval(const Matrix& m) {
    return m.size() > 0 && m.minCoeff() >= 0.0 && m.maxCoeff() <= 1.0;
}

FeatureSet gather(const FeatureSet& set, std::span<const std::size_t> rows) {
    FeatureSet out;
    out.reserve(set.size());
    for (const auto& m : set) out.push_back(nnet::gather_rows(m, rows));
    return out;
}

struct Trainer {
    Hierarchy& h;
    nnet::Optimizer opt;
    std::vector<std::size_t> enc_slots, dec_slots;
    std::size_t trunk_slot = 0, mu_slot = 0, lv_slot = 0, fdec_slot = 0;

    explicit Trainer(Hierarchy& model)
        : h(model), opt(model.config.train.optimizer, model.config.train.learning_rate) {
        for (const auto& ae : h.aes) {
            enc_slots.push_back(opt.attach(ae.encoder));
            dec_slots.push_back(opt.attach(ae.decoder));
        }
        if (h.fusion) {
            trunk_slot = opt.attach(h.fusion->trunk);
            mu_slot = opt.attach(h.fusion->mu_head);
            lv_slot = opt.attach(h.fusion->logvar_head);
            fdec_slot = opt.attach(h.fusion->decoder);
        }
    }

    void apply(const HierarchyGradients& g, bool aes, bool fusion) {
        if (aes) {
            for (std::size_t i = 0; i < h.aes.size(); ++i) {
                opt.step(enc_slots[i], h.aes[i].encoder, g.encoder[i]);
                opt.step(dec_slots[i], h.aes[i].decoder, g.decoder[i]);
            }
        }
        if (fusion && h.fusion) {
            opt.step(trunk_slot, h.fusion->trunk, g.trunk);
            opt.step(mu_slot, h.fusion->mu_head, g.mu_head);
            if (h.fusion->variational) opt.step(lv_slot, h.fusion->logvar_head, g.logvar_head);
            opt.step(fdec_slot, h.fusion->decoder, g.fusion_decoder);
        }
    }
};

void run_epochs(Hierarchy& h, Trainer& trainer, const FeatureSet& arranged, bool train_aes,
                bool train_fusion, Engine& shuffle, Engine& noise, std::vector<double>& history,
                const char* stage) {
    const auto& cfg = h.config.train;
    const auto n = static_cast<std::size_t>(arranged.front().rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle);
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const auto end = std::min(n, start + cfg.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const FeatureSet batch = gather(arranged, idx);
            Perturbation p = draw_perturbation(h, batch, noise);
            if (!train_aes) {
                for (auto& c : p.corruption) c.setZero();
            }
            HierarchyGradients g = zero_gradients(h);
            const auto loss = hierarchy_backward(h, batch, p, g, train_aes, train_fusion);
            nnet::require_finite_loss(loss.total(), epoch, batches, history, stage);
            trainer.apply(g, train_aes, train_fusion);
            sum += loss.total();
            ++batches;
        }
        history.push_back(sum / static_cast<double>(batches));
    }
}

void clear_caches(Hierarchy& h) {
    for (auto& ae : h.aes) {
        ae.encoder.clear_cache();
        ae.decoder.clear_cache();
    }
    if (h.fusion) {
        h.fusion->trunk.clear_cache();
        h.fusion->mu_head.clear_cache();
        h.fusion->logvar_head.clear_cache();
        h.fusion->decoder.clear_cache();
    }
}

}  // namespace

Hierarchy build_hierarchy(const FeatureSet& features, const HierarchyConfig& cfg) {
    Hierarchy h;
    h.config = cfg;
    if (cfg.standardize) h.scaler = fit_scaler(features, cfg.std_floor);
    const FeatureSet arranged = h.arrange(features);
    if (cfg.ae_mode != AeMode::none) {
        const auto ae_seed = derive_seed(cfg.seed, "ae-init");
        for (std::size_t i = 0; i < arranged.size(); ++i) {
            h.aes.push_back(make_feature_ae(static_cast<std::size_t>(arranged[i].cols()), cfg.ae,
                                            in_unit_interval(arranged[i]), derive_seed(ae_seed, i), i));
        }
    }
    if (cfg.fusion != FusionMode::none) {
        h.fusion = make_fusion_vae(code_width(h, arranged), cfg.vae, cfg.fusion == FusionMode::vae,
                                   derive_seed(cfg.seed, "vae-init"));
    }
    return h;
}

FitResult fit_hierarchy(const FeatureSet& train, const HierarchyConfig& cfg) {
    cfg.train.validate();
    if (train.empty() || train.front().rows() < 2) {
        throw DataError("hierarchy training needs at least 2 inliers");
    }
    for (const auto& f : train) {
        if (f.rows() != train.front().rows()) throw DataError("feature blocks have different row counts");
        if (!f.allFinite()) throw DataError("training features contain non-finite values");
    }

    FitResult result;
    result.model = build_hierarchy(train, cfg);
    Hierarchy& h = result.model;
    const FeatureSet arranged = h.arrange(train);

    Engine shuffle(derive_seed(cfg.seed, "shuffle"));
    Engine noise(derive_seed(cfg.seed, "vae-noise"));
    const bool has_aes = !h.aes.empty();
    const bool has_fusion = h.fusion.has_value();

    if (has_aes || has_fusion) {
        Trainer trainer(h);
        if (cfg.schedule == Schedule::joint || !has_aes || !has_fusion) {
            run_epochs(h, trainer, arranged, has_aes, has_fusion, shuffle, noise, result.loss_history,
                       "hierarchy");
        } else {
            run_epochs(h, trainer, arranged, true, false, shuffle, noise, result.loss_history,
                       "hierarchy (autoencoders)");
            run_epochs(h, trainer, arranged, false, true, shuffle, noise, result.loss_history,
                       "hierarchy (fusion)");
        }
    }
    clear_caches(h);
    if (has_fusion) result.catalog = h.catalog(train);
    return result;
}

}  // namespace outskirt::hierarchy
