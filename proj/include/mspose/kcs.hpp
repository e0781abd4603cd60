#pragma once

#include "mspose/autodiff.hpp"
#include "mspose/pose.hpp"
#include "mspose/skeleton.hpp"

#include <Eigen/Core>

#include <vector>

namespace mspose {

// 3 x M bone vectors, column m = child - parent of bone m (mm).
Eigen::Matrix3Xd bone_matrix(const Pose3& pose, const SkeletonTopology& topo);

// Psi = B^T B (mm^2). Diagonal: squared bone lengths; off-diagonal: inner
// products between bone pairs.
Eigen::MatrixXd kcs(const Pose3& pose, const SkeletonTopology& topo);

// Phi = Psi(later) - Psi(earlier) for two frames `interval` apart.
Eigen::MatrixXd tkcs(const Pose3& earlier, const Pose3& later, const SkeletonTopology& topo);

// Column-major flat indices of the upper triangle (diagonal included) of an
// M x M matrix, row by row: (0,0), (0,1), ..., (0,M-1), (1,1), ...
std::vector<int> upper_triangle_indices(int m);

// Per-frame feature length: two upper triangles plus 3K coordinates.
int feature_dim(const SkeletonTopology& topo);

// T x feature_dim matrix. Row t = [triu(Psi_t), triu(Phi_t), x0 y0 z0 x1 ...]
// where Phi_t = Psi_{t+interval} - Psi_t, zero for the last `interval` frames.
// Throws InvalidWindow when the window has fewer than interval + 1 frames.
Eigen::MatrixXd discriminator_features(const PoseSequence3D& window, const SkeletonTopology& topo,
                                       int interval = 1);

namespace ad_kcs {

// Differentiable discriminator_features over a (frames*K) x 3 coordinate
// variable. Same layout as the plain version.
ad::Var discriminator_features(ad::Tape& tape, ad::Var coords, int frames, const SkeletonTopology& topo,
                               int interval = 1);

}  // namespace ad_kcs

}  // namespace mspose
