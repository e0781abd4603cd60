#pragma once

#include "mspose/autodiff.hpp"
#include "mspose/optim.hpp"
#include "mspose/pose.hpp"
#include "mspose/skeleton.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace mspose {

// Anything that can judge a 3D pose window and hand back a differentiable
// generator loss: the trained discriminator or the energy surrogate.
class PoseScorer {
public:
    virtual ~PoseScorer() = default;

    // `coords` is (frames*K) x 3 on the tape; returns a 1 x 1 loss.
    virtual ad::Var gen_loss(ad::Tape& tape, ad::Var coords, int frames) const = 0;
    virtual int min_frames() const = 0;

    double gen_loss(const PoseSequence3D& window) const;
};

// L'_gen: generator loss of R * window.
ad::Var gen_loss_rotated(ad::Tape& tape, const PoseScorer& scorer, ad::Var coords, int frames,
                         const Eigen::Matrix3d& r);
double gen_loss_rotated(const PoseScorer& scorer, const PoseSequence3D& window, const RotationAugment& r);

struct DiscriminatorConfig {
    int hidden = 64;
    double leaky_slope = 0.2;
    int interval = 1;  // TKCS interval

    void validate() const;
};

// Per-frame KCS/TKCS/coordinate features -> standardization -> dense layer ->
// temporal convolution (kernel 2) -> mean over time -> logistic output.
class Discriminator : public PoseScorer {
public:
    static constexpr double kEps = 1e-6;

    Discriminator() = default;
    Discriminator(const DiscriminatorConfig& cfg, const SkeletonTopology& topo, std::uint64_t seed);

    const DiscriminatorConfig& config() const { return cfg_; }
    const SkeletonTopology& topology() const { return topo_; }
    std::vector<Eigen::MatrixXd>& params() { return params_; }
    const std::vector<Eigen::MatrixXd>& params() const { return params_; }

    // Per-feature mean and inverse scale from real windows only.
    void fit_scaler(const std::vector<PoseSequence3D>& real_windows);
    const Eigen::RowVectorXd& scaler_mean() const { return mean_; }
    const Eigen::RowVectorXd& scaler_inv_scale() const { return inv_scale_; }
    void set_scaler(const Eigen::RowVectorXd& mean, const Eigen::RowVectorXd& inv_scale);

    struct Bound {
        std::vector<ad::Var> p;
    };
    Bound bind(ad::Tape& tape, bool requires_grad) const;
    ad::Var logit(ad::Tape& tape, const Bound& b, ad::Var coords, int frames) const;

    // Probability that the window is real, in (0, 1). Throws InvalidWindow
    // for windows shorter than interval + 1 frames.
    double score(const PoseSequence3D& window) const;

    ad::Var gen_loss(ad::Tape& tape, ad::Var coords, int frames) const override;
    int min_frames() const override { return cfg_.interval + 1; }
    using PoseScorer::gen_loss;

private:
    DiscriminatorConfig cfg_;
    SkeletonTopology topo_;
    std::vector<Eigen::MatrixXd> params_;
    Eigen::RowVectorXd mean_;
    Eigen::RowVectorXd inv_scale_;
};

struct AdversarialConfig {
    int steps = 500;
    int batch = 16;
    OptimizerConfig optimizer{OptimizerKind::adam, 1e-3};
    std::uint64_t seed = 0;
};

struct AdversarialReport {
    std::vector<double> loss;  // BCE per step
};

// Binary cross-entropy updates of the discriminator alone (the generator side
// is frozen): real windows labeled 1, generated windows 0. Throws
// TrainingDiverged on a non-finite loss after restoring the last good
// parameters.
AdversarialReport train_adversarial(Discriminator& disc, const std::vector<PoseSequence3D>& generated,
                                    const std::vector<PoseSequence3D>& real, const AdversarialConfig& cfg);

// BCE of one labeled batch on a tape; used by the alternating TCN loop.
ad::Var discriminator_bce(ad::Tape& tape, const Discriminator& disc, const Discriminator::Bound& b,
                          const std::vector<const PoseSequence3D*>& windows, const std::vector<int>& labels);

// Gaussian model of discriminator features over a reference motion corpus.
class KcsEnergyModel : public PoseScorer {
public:
    KcsEnergyModel() = default;
    // Covariance regularizer: each feature block's variances are floored at
    // `floor` times that block's mean variance and `ridge` times it is added
    // to the diagonal.
    static KcsEnergyModel fit(const std::vector<PoseSequence3D>& corpus, const SkeletonTopology& topo,
                              int interval = 1, double ridge = 1e-3, double floor = 1e-2);
    // Rebuilds a model from stored moments. Throws DegenerateInput when the
    // covariance is not positive definite.
    static KcsEnergyModel from_moments(const Eigen::RowVectorXd& mean, const Eigen::MatrixXd& covariance,
                                       const SkeletonTopology& topo, int interval);

    // Mean over frames of the squared Mahalanobis distance of each frame's features,
    // divided by the feature dimension.
    double energy(const PoseSequence3D& window) const;

    ad::Var gen_loss(ad::Tape& tape, ad::Var coords, int frames) const override;
    int min_frames() const override { return interval_ + 1; }
    using PoseScorer::gen_loss;

    const Eigen::RowVectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return covariance_; }
    const Eigen::MatrixXd& precision() const { return precision_; }
    int interval() const { return interval_; }
    const SkeletonTopology& topology() const { return topo_; }

private:
    SkeletonTopology topo_;
    int interval_ = 1;
    Eigen::RowVectorXd mean_;
    Eigen::MatrixXd covariance_;
    Eigen::MatrixXd precision_;
};

double energy_score(const PoseSequence3D& window, const KcsEnergyModel& model);

}  // namespace mspose
