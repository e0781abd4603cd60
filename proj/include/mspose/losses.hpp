#pragma once

#include "mspose/autodiff.hpp"
#include "mspose/pose.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace mspose {

struct LossWeights {
    double w1 = 0.5;   // multi-view
    double w2 = 0.1;   // 2D re-projection
    double w3 = 0.01;  // rotated discriminator term

    void validate() const;
};

struct LossComponents {
    double l3d = 0.0;
    double lmv = 0.0;
    double l2d = 0.0;
    double lgen = 0.0;
};

// Mean over joints and frames of the squared Euclidean error (mm^2).
double loss_3d(const PoseSequence3D& pred, const PoseSequence3D& gt);
// Same form between R * pred_v1 and pred_v2.
double loss_multiview(const PoseSequence3D& pred_v1, const PoseSequence3D& pred_v2, const Eigen::Matrix3d& r);
// Mean squared 2D error between Orth(pred) and gt2d over unmasked entries;
// 0 when every entry is masked. pred and gt2d must share units.
double loss_2d(const PoseSequence3D& pred, const PoseSequence2D& gt2d);
double total_loss(const LossComponents& c, const LossWeights& w);

namespace ad_loss {

// Tape versions; `pred` is (T*K) x 3.
ad::Var loss_3d(ad::Tape& tape, ad::Var pred, const Eigen::MatrixX3d& gt);
ad::Var loss_multiview(ad::Tape& tape, ad::Var pred_v1, ad::Var pred_v2, const Eigen::Matrix3d& r);
ad::Var loss_2d(ad::Tape& tape, ad::Var pred, const Eigen::MatrixX2d& gt2d, const std::vector<std::uint8_t>& mask);
ad::Var total_loss(ad::Tape& tape, ad::Var l3d, ad::Var lmv, ad::Var l2d, ad::Var lgen, const LossWeights& w);

}  // namespace ad_loss

}  // namespace mspose
