#pragma once

// Two-level distillation and fusion.
//
// Level one: one denoising autoencoder per feature descriptor. Level two: a
// variational autoencoder over the concatenated codes w, whose encoder gives
// one diagonal Gaussian (mu, sigma) per sample. The collection of those
// Gaussians over the training inliers is the latent catalog.
//
// Loss per sample (summed over vector dimensions, averaged over the batch):
//   L_f = sum_i |dec_i(enc_i(g_i + noise)) - g_i|^2
//   L_h = |dec_f(mu + sigma*eps) - w|^2 + KL(N(mu, sigma^2) || N(0, I))
// and the joint objective is L_f + L_h. w is built from the AE codes, so
// the reconstruction term back-propagates into the AEs through both the
// VAE input and the reconstruction target.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "outskirt/nnet.hpp"
#include "outskirt/rng.hpp"

namespace outskirt::hierarchy {

using nnet::DenseNet;
using nnet::Matrix;

/// Hidden-layer width relative to the network input.
enum class WidthRule { same, twice, half };

WidthRule parse_width(std::string_view name);
std::string_view to_string(WidthRule w);
std::size_t apply_width(WidthRule w, std::size_t input_dim);

struct AeSpec {
    std::size_t layers = 1;
    WidthRule width = WidthRule::same;
    nnet::Activation activation = nnet::Activation::relu;
    double noise_sigma = 0.1;  // additive Gaussian corruption, training only
};

struct FeatureAE {
    DenseNet encoder;
    DenseNet decoder;  // mirror of the encoder
    double noise_sigma = 0.1;
    std::size_t feature_index = 0;

    /// Deterministic code (no corruption).
    Matrix encode(const Matrix& features) const;
    Matrix reconstruct(const Matrix& features) const;

    std::size_t input_dim() const { return encoder.input_size(); }
    std::size_t code_dim() const { return encoder.output_size(); }

    /// Throws ConfigError unless the decoder mirrors the encoder.
    void validate() const;
};

/// `unit_interval` selects a sigmoid final decoder activation (inputs in
/// [0,1]); otherwise the final decoder layer is linear.
FeatureAE make_feature_ae(std::size_t input_dim, const AeSpec& spec, bool unit_interval,
                          std::uint64_t seed, std::size_t feature_index);

struct VaeSpec {
    std::size_t layers = 1;
    WidthRule width = WidthRule::same;
    std::size_t latent_dim = 2;
    nnet::Activation activation = nnet::Activation::relu;
};

struct GaussianParams {
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma;

    std::size_t dim() const { return static_cast<std::size_t>(mu.size()); }
    bool operator==(const GaussianParams&) const = default;
};

/// One Gaussian per training inlier, index-aligned with the inlier list.
struct LatentCatalog {
    std::vector<GaussianParams> entries;

    std::size_t size() const { return entries.size(); }
    std::size_t dim() const { return entries.empty() ? 0 : entries.front().dim(); }
    Matrix means() const;
    Matrix sigmas() const;
    bool operator==(const LatentCatalog&) const = default;
};

/// Fusion network. With `variational` false the log-variance head is unused,
/// no sampling happens and sigma is reported as ones (plain-AE fusion).
struct FusionVAE {
    DenseNet trunk;
    DenseNet mu_head;
    DenseNet logvar_head;
    DenseNet decoder;
    bool variational = true;

    std::size_t input_dim() const { return trunk.input_size(); }
    std::size_t latent_dim() const { return mu_head.output_size(); }
    void validate() const;
};

FusionVAE make_fusion_vae(std::size_t input_dim, const VaeSpec& spec, bool variational,
                          std::uint64_t seed);

struct EncodedBatch {
    Matrix mu;
    Matrix sigma;
};

/// sigma = exp(logvar / 2). Throws NumericError on non-finite head outputs.
EncodedBatch vae_encode_batch(const FusionVAE& vae, const Matrix& w);
GaussianParams vae_encode(const FusionVAE& vae, const Eigen::VectorXd& w);

/// z = mu + sigma * eps with eps ~ N(0, I) drawn from `seed`.
Eigen::VectorXd reparam_sample(const GaussianParams& p, std::uint64_t seed);
Eigen::VectorXd reparam_sample(const GaussianParams& p, const Eigen::VectorXd& eps);

/// 0.5 * sum(sigma^2 + mu^2 - 1 - ln sigma^2). Throws on sigma <= 0.
double kl_to_standard_normal(const GaussianParams& p);

/// Feature blocks, one [n x d_i] matrix per descriptor.
using FeatureSet = std::vector<Matrix>;

/// Per-column standardization of the raw feature blocks, fitted on the
/// training inliers: (x - mean) / max(std, floor). The floor keeps nearly
/// constant columns (background pixels) from being blown up.
struct FeatureScaler {
    std::vector<Eigen::RowVectorXd> mean;
    std::vector<Eigen::RowVectorXd> scale;

    bool empty() const { return mean.empty(); }
    FeatureSet apply(const FeatureSet& features) const;
    bool operator==(const FeatureScaler&) const = default;
};

FeatureScaler fit_scaler(const FeatureSet& features, double floor);

/// sum_i |reconstruct_i(g_i) - g_i|^2 averaged over rows.
double feature_loss(std::span<const FeatureAE> aes, std::span<const Matrix> features);

/// Column-wise concatenation in the given order.
Matrix concat_latents(std::span<const Matrix> codes);

enum class AeMode { individual, concatenated, none };
enum class FusionMode { vae, ae, none };
enum class Schedule { joint, staged };
enum class ReconLoss { sse, bce };

AeMode parse_ae_mode(std::string_view s);
FusionMode parse_fusion(std::string_view s);
Schedule parse_schedule(std::string_view s);
ReconLoss parse_recon_loss(std::string_view s);
std::string_view to_string(AeMode m);
std::string_view to_string(FusionMode m);
std::string_view to_string(Schedule s);
std::string_view to_string(ReconLoss l);

struct HierarchyConfig {
    AeMode ae_mode = AeMode::individual;
    AeSpec ae;
    ReconLoss ae_loss = ReconLoss::sse;
    FusionMode fusion = FusionMode::vae;
    VaeSpec vae;
    Schedule schedule = Schedule::joint;
    nnet::TrainConfig train;
    bool standardize = false;
    double std_floor = 0.1;
    std::uint64_t seed = 0;
};

class Hierarchy {
public:
    HierarchyConfig config;
    FeatureScaler scaler;  // empty unless config.standardize
    std::vector<FeatureAE> aes;
    std::optional<FusionVAE> fusion;

    /// Standardizes raw feature blocks (when a scaler is set) and groups
    /// them the way the AE mode consumes them: unchanged for individual, one
    /// concatenated block otherwise.
    FeatureSet arrange(const FeatureSet& features) const;

    /// Concatenated codes w (or the concatenated features without AEs).
    Matrix latent_codes(const FeatureSet& features) const;

    EncodedBatch encode(const FeatureSet& features) const;

    /// Classifier input: fused means, or w when there is no fusion stage.
    Matrix embed(const FeatureSet& features) const;

    /// One deterministic encoding pass over `features`.
    LatentCatalog catalog(const FeatureSet& features) const;

    bool operator==(const Hierarchy& other) const;
};

/// Randomness of one training step, fixed up-front so the loss is a pure
/// function of the parameters (used by the gradient checks).
struct Perturbation {
    std::vector<Matrix> corruption;  // per arranged feature block
    Matrix epsilon;                  // [n x latent_dim]
};

Perturbation draw_perturbation(const Hierarchy& h, const FeatureSet& arranged, Engine& engine);
Perturbation zero_perturbation(const Hierarchy& h, const FeatureSet& arranged);

struct LossBreakdown {
    double feature = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
    double total() const { return feature + reconstruction + kl; }
};

struct HierarchyGradients {
    std::vector<nnet::Gradients> encoder;
    std::vector<nnet::Gradients> decoder;
    nnet::Gradients trunk, mu_head, logvar_head, fusion_decoder;
};

HierarchyGradients zero_gradients(const Hierarchy& h);

/// Loss of one batch of arranged features under a fixed perturbation.
LossBreakdown hierarchy_loss(const Hierarchy& h, const FeatureSet& arranged,
                             const Perturbation& noise);

/// Same loss, plus gradients accumulated into `grads`. With `train_aes`
/// false the AEs act as frozen encoders (the feature loss is still reported).
LossBreakdown hierarchy_backward(Hierarchy& h, const FeatureSet& arranged, const Perturbation& noise,
                                 HierarchyGradients& grads, bool train_aes = true,
                                 bool train_fusion = true);

/// Builds an untrained hierarchy sized for `features`.
Hierarchy build_hierarchy(const FeatureSet& features, const HierarchyConfig& cfg);

struct FitResult {
    Hierarchy model;
    LatentCatalog catalog;  // empty when fusion is none
    std::vector<double> loss_history;
};

/// Trains on inlier features (>= 2 rows) and extracts the catalog.
FitResult fit_hierarchy(const FeatureSet& train, const HierarchyConfig& cfg);

/// Rows used per block when encoding; results never depend on thread count.
inline constexpr std::size_t kEncodeBlock = 256;

}  // namespace outskirt::hierarchy
