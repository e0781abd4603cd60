#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace mspose {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 1e-3;
    double momentum = 0.9;  // sgd
    double beta1 = 0.9;     // adam
    double beta2 = 0.999;
    double eps = 1e-8;
    // Global gradient-norm clip; 0 disables.
    double clip_norm = 0.0;

    void validate() const;
};

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

// Stateful first-order optimizer over a fixed list of parameter tensors.
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(const OptimizerConfig& cfg, const std::vector<Eigen::MatrixXd>& params);

    void step(std::vector<Eigen::MatrixXd>& params, const std::vector<Eigen::MatrixXd>& grads);
    const OptimizerConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    long steps() const { return t_; }

private:
    OptimizerConfig cfg_;
    std::vector<Eigen::MatrixXd> m_;
    std::vector<Eigen::MatrixXd> v_;
    long t_ = 0;
};

}  // namespace mspose
