#include "mspose/optim.hpp"

#include "mspose/errors.hpp"

#include <cmath>

namespace mspose {

void OptimizerConfig::validate() const
{
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("optimizer: lr must be finite and >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer: momentum must be in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("optimizer: betas must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("optimizer: eps must be > 0");
    if (!(clip_norm >= 0.0)) throw ConfigError("optimizer: clip_norm must be >= 0");
}

OptimizerKind parse_optimizer(const std::string& name)
{
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

Optimizer::Optimizer(const OptimizerConfig& cfg, const std::vector<Eigen::MatrixXd>& params) : cfg_(cfg)
{
    cfg_.validate();
    for (const auto& p : params) {
        m_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
        if (cfg_.kind == OptimizerKind::adam) v_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    }
}

void Optimizer::step(std::vector<Eigen::MatrixXd>& params, const std::vector<Eigen::MatrixXd>& grads)
{
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw InvalidInput("optimizer: parameter list changed shape");
    ++t_;
    double scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads) sq += g.squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
    }
    if (cfg_.lr == 0.0) return;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (cfg_.kind == OptimizerKind::sgd) {
            m_[i] = cfg_.momentum * m_[i] + scale * grads[i];
            params[i] -= cfg_.lr * m_[i];
        } else {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * scale * grads[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * (scale * grads[i]).cwiseAbs2();
            const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
            const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
            params[i].array() -=
                cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
        }
    }
}

}  // namespace mspose
