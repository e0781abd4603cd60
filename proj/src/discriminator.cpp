#include "mspose/discriminator.hpp"

#include "mspose/errors.hpp"
#include "mspose/kcs.hpp"
#include "mspose/rng.hpp"

#include <Eigen/Cholesky>

#include <array>
#include <cmath>

namespace mspose {

using ad::Mat;

double PoseScorer::gen_loss(const PoseSequence3D& window) const
{
    ad::Tape tape;
    return tape.scalar(gen_loss(tape, tape.constant(window.coords), window.num_frames));
}

ad::Var gen_loss_rotated(ad::Tape& tape, const PoseScorer& scorer, ad::Var coords, int frames,
                         const Eigen::Matrix3d& r)
{
    const ad::Var rotated = tape.matmul(coords, tape.constant(r.transpose()));
    return scorer.gen_loss(tape, rotated, frames);
}

double gen_loss_rotated(const PoseScorer& scorer, const PoseSequence3D& window, const RotationAugment& r)
{
    ad::Tape tape;
    return tape.scalar(gen_loss_rotated(tape, scorer, tape.constant(window.coords), window.num_frames, r.matrix()));
}

namespace {

// [begin, end) column ranges of the Psi, Phi and coordinate blocks.
std::array<std::pair<int, int>, 3> feature_blocks(const SkeletonTopology& topo)
{
    const int tri = topo.num_bones() * (topo.num_bones() + 1) / 2;
    return {{{0, tri}, {tri, 2 * tri}, {2 * tri, 2 * tri + 3 * topo.num_keypoints()}}};
}

Mat stack_features(const std::vector<PoseSequence3D>& windows, const SkeletonTopology& topo, int interval)
{
    std::vector<Mat> parts;
    Eigen::Index rows = 0;
    for (const auto& w : windows) {
        parts.push_back(discriminator_features(w, topo, interval));
        rows += parts.back().rows();
    }
    Mat all(rows, feature_dim(topo));
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        all.middleRows(r, p.rows()) = p;
        r += p.rows();
    }
    return all;
}

Mat glorot(int in, int out, Rng& rng)
{
    const double a = std::sqrt(6.0 / (in + out));
    Mat w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(-a, a);
    return w;
}

}  // namespace

void DiscriminatorConfig::validate() const
{
    if (hidden < 1) throw ConfigError("discriminator: hidden must be >= 1");
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("discriminator: leaky_slope must be in [0, 1)");
    if (interval < 1) throw ConfigError("discriminator: interval must be >= 1");
}

Discriminator::Discriminator(const DiscriminatorConfig& cfg, const SkeletonTopology& topo, std::uint64_t seed)
    : cfg_(cfg), topo_(topo)
{
    cfg_.validate();
    Rng rng(seed);
    const int d = feature_dim(topo_);
    const int h = cfg_.hidden;
    params_.push_back(glorot(d, h, rng));
    params_.push_back(Mat::Zero(1, h));
    params_.push_back(glorot(2 * h, h, rng));
    params_.push_back(Mat::Zero(1, h));
    // Zero output layer: an untrained discriminator scores exactly 0.5.
    params_.push_back(Mat::Zero(h, 1));
    params_.push_back(Mat::Zero(1, 1));
    mean_ = Eigen::RowVectorXd::Zero(d);
    inv_scale_ = Eigen::RowVectorXd::Ones(d);
}

void Discriminator::fit_scaler(const std::vector<PoseSequence3D>& real_windows)
{
    if (real_windows.empty()) throw InvalidInput("discriminator: no real windows for the input scaler");
    const Mat f = stack_features(real_windows, topo_, cfg_.interval);
    mean_ = f.colwise().mean();
    const Eigen::RowVectorXd sd = ((f.rowwise() - mean_).cwiseAbs2().colwise().mean()).cwiseSqrt();
    inv_scale_.resize(sd.size());
    for (const auto& [b, e] : feature_blocks(topo_)) {
        const double floor = 1e-2 * std::max(sd.segment(b, e - b).mean(), 1e-12);
        for (int i = b; i < e; ++i) inv_scale_(i) = 1.0 / std::max(sd(i), floor);
    }
}

void Discriminator::set_scaler(const Eigen::RowVectorXd& mean, const Eigen::RowVectorXd& inv_scale)
{
    if (mean.size() != feature_dim(topo_) || inv_scale.size() != feature_dim(topo_))
        throw InvalidInput("discriminator: scaler size mismatch");
    mean_ = mean;
    inv_scale_ = inv_scale;
}

Discriminator::Bound Discriminator::bind(ad::Tape& tape, bool requires_grad) const
{
    Bound b;
    for (const auto& p : params_) b.p.push_back(tape.parameter(p, requires_grad));
    return b;
}

ad::Var Discriminator::logit(ad::Tape& tape, const Bound& b, ad::Var coords, int frames) const
{
    const ad::Var f = ad_kcs::discriminator_features(tape, coords, frames, topo_, cfg_.interval);
    const Mat scale = inv_scale_.replicate(frames, 1);
    const ad::Var z = tape.mul_const(tape.add_row(f, tape.constant(-mean_)), scale);
    const ad::Var h1 = tape.leaky_relu(tape.add_row(tape.matmul(z, b.p[0]), b.p[1]), cfg_.leaky_slope);
    const ad::Var h2 =
        tape.leaky_relu(tape.add_row(tape.matmul(tape.unfold(h1, 2), b.p[2]), b.p[3]), cfg_.leaky_slope);
    return tape.add_row(tape.matmul(tape.mean_rows(h2), b.p[4]), b.p[5]);
}

double Discriminator::score(const PoseSequence3D& window) const
{
    if (window.num_frames < min_frames())
        throw InvalidWindow("discriminator: window shorter than interval + 1 frames");
    ad::Tape tape;
    const Bound b = bind(tape, false);
    return tape.scalar(tape.sigmoid(logit(tape, b, tape.constant(window.coords), window.num_frames)));
}

ad::Var Discriminator::gen_loss(ad::Tape& tape, ad::Var coords, int frames) const
{
    if (frames < min_frames()) throw InvalidWindow("discriminator: window shorter than interval + 1 frames");
    const Bound b = bind(tape, false);
    const ad::Var s = tape.clamp(tape.sigmoid(logit(tape, b, coords, frames)), kEps, 1.0 - kEps);
    return tape.scale(tape.log(s), -1.0);
}

ad::Var discriminator_bce(ad::Tape& tape, const Discriminator& disc, const Discriminator::Bound& b,
                          const std::vector<const PoseSequence3D*>& windows, const std::vector<int>& labels)
{
    if (windows.empty() || windows.size() != labels.size()) throw InvalidInput("discriminator: bad BCE batch");
    std::vector<ad::Var> terms;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const ad::Var z = disc.logit(tape, b, tape.constant(windows[i]->coords), windows[i]->num_frames);
        // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z).
        terms.push_back(labels[i] ? tape.softplus(tape.scale(z, -1.0)) : tape.softplus(z));
    }
    return tape.mean(terms.size() == 1 ? terms[0] : tape.vcat(terms));
}

AdversarialReport train_adversarial(Discriminator& disc, const std::vector<PoseSequence3D>& generated,
                                    const std::vector<PoseSequence3D>& real, const AdversarialConfig& cfg)
{
    if (cfg.steps < 0 || cfg.batch < 2) throw ConfigError("adversarial: steps must be >= 0 and batch >= 2");
    AdversarialReport report;
    if (cfg.steps == 0) return report;
    if (generated.empty() || real.empty()) throw InvalidInput("adversarial: need real and generated windows");
    Optimizer opt(cfg.optimizer, disc.params());
    Rng rng(cfg.seed);
    std::vector<Mat> last_good = disc.params();
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<const PoseSequence3D*> batch;
        std::vector<int> labels;
        for (int i = 0; i < cfg.batch; ++i) {
            const bool is_real = i % 2 == 0;
            const auto& pool = is_real ? real : generated;
            batch.push_back(&pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)]);
            labels.push_back(is_real ? 1 : 0);
        }
        ad::Tape tape;
        const auto b = disc.bind(tape, true);
        const ad::Var loss = discriminator_bce(tape, disc, b, batch, labels);
        const double value = tape.scalar(loss);
        if (!std::isfinite(value)) {
            disc.params() = last_good;
            throw TrainingDiverged("adversarial: non-finite loss at step " + std::to_string(step));
        }
        report.loss.push_back(value);
        tape.backward(loss);
        std::vector<Mat> grads;
        for (const auto& v : b.p) grads.push_back(tape.grad(v));
        last_good = disc.params();
        opt.step(disc.params(), grads);
    }
    return report;
}

KcsEnergyModel KcsEnergyModel::fit(const std::vector<PoseSequence3D>& corpus, const SkeletonTopology& topo,
                                   int interval, double ridge, double floor)
{
    if (corpus.empty()) throw InvalidInput("energy model: empty reference corpus");
    if (!(ridge >= 0.0) || !(floor >= 0.0) || ridge + floor <= 0.0)
        throw ConfigError("energy model: ridge and floor must be >= 0, not both zero");
    const Mat f = stack_features(corpus, topo, interval);
    const Eigen::RowVectorXd mean = f.colwise().mean();
    const Mat centered = f.rowwise() - mean;
    Mat cov = (centered.transpose() * centered) / static_cast<double>(f.rows());
    for (const auto& [b, e] : feature_blocks(topo)) {
        const double block_var = std::max(cov.diagonal().segment(b, e - b).mean(), 1e-12);
        for (int i = b; i < e; ++i) cov(i, i) = std::max(cov(i, i), floor * block_var) + ridge * block_var;
    }
    return from_moments(mean, cov, topo, interval);
}

KcsEnergyModel KcsEnergyModel::from_moments(const Eigen::RowVectorXd& mean, const Eigen::MatrixXd& covariance,
                                            const SkeletonTopology& topo, int interval)
{
    const int d = feature_dim(topo);
    if (mean.size() != d || covariance.rows() != d || covariance.cols() != d)
        throw InvalidInput("energy model: moment sizes do not match the topology");
    if (interval < 1) throw ConfigError("energy model: interval must be >= 1");
    KcsEnergyModel m;
    m.topo_ = topo;
    m.interval_ = interval;
    m.mean_ = mean;
    m.covariance_ = covariance;
    Eigen::LLT<Mat> llt(m.covariance_);
    if (llt.info() != Eigen::Success) throw DegenerateInput("energy model: covariance is not positive definite");
    m.precision_ = llt.solve(Mat::Identity(d, d));
    m.precision_ = 0.5 * (m.precision_ + m.precision_.transpose());
    return m;
}

ad::Var KcsEnergyModel::gen_loss(ad::Tape& tape, ad::Var coords, int frames) const
{
    if (frames < min_frames()) throw InvalidWindow("energy model: window shorter than interval + 1 frames");
    const ad::Var f = ad_kcs::discriminator_features(tape, coords, frames, topo_, interval_);
    const ad::Var z = tape.add_row(f, tape.constant(-mean_));
    const ad::Var q = tape.mul(tape.matmul(z, tape.parameter(precision_, false)), z);
    return tape.scale(tape.sum(q), 1.0 / (static_cast<double>(frames) * static_cast<double>(mean_.size())));
}

double KcsEnergyModel::energy(const PoseSequence3D& window) const { return PoseScorer::gen_loss(window); }

double energy_score(const PoseSequence3D& window, const KcsEnergyModel& model) { return model.energy(window); }

}  // namespace mspose
