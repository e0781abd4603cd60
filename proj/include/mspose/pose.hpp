#pragma once

#include "mspose/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace mspose {

// Single-frame pose, one row per keypoint (mm).
using Pose3 = Eigen::MatrixX3d;

// T x K x 3 keypoints stored as a (T*K) x 3 matrix, row t*K + k. Camera
// convention: x right, y down, z away from the camera, which sits at z = -inf.
struct PoseSequence3D {
    int num_frames = 0;
    int num_keypoints = 0;
    Eigen::MatrixX3d coords;
    // Empty, or T*K flags (1 = visible).
    std::vector<std::uint8_t> visibility;

    static PoseSequence3D zeros(int frames, int keypoints);

    Pose3 frame(int t) const { return coords.middleRows(t * num_keypoints, num_keypoints); }
    void set_frame(int t, const Pose3& pose) { coords.middleRows(t * num_keypoints, num_keypoints) = pose; }
    Eigen::Vector3d point(int t, int k) const { return coords.row(t * num_keypoints + k).transpose(); }

    bool all_finite() const { return coords.allFinite(); }
    // Copies frames [first, first + count).
    PoseSequence3D slice(int first, int count) const;
};

// T x K 2D keypoints in crop-normalized units plus per-entry confidence and
// occlusion mask. Masked entries carry zero coordinates and zero confidence.
struct PoseSequence2D {
    int num_frames = 0;
    int num_keypoints = 0;
    Eigen::MatrixX2d coords;
    Eigen::VectorXd confidence;
    std::vector<std::uint8_t> mask;

    static PoseSequence2D zeros(int frames, int keypoints);

    int index(int t, int k) const { return t * num_keypoints + k; }
    bool masked(int t, int k) const { return mask[index(t, k)] != 0; }
    void set_masked(int t, int k);
    PoseSequence2D slice(int first, int count) const;

    // Throws InvalidInput when shapes disagree, confidence leaves [0,1] or a
    // masked entry has nonzero confidence.
    void validate() const;
};

// Euler angles (radians) about x, y and z. The rotation is Rz * Ry * Rx.
struct RotationAugment {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    Eigen::Matrix3d matrix() const;

    // beta in [-pi, pi], alpha and gamma in [-0.2 pi, 0.2 pi].
    static RotationAugment sample(Rng& rng);
    // Throws InvalidInput when the angles leave the augmentation ranges.
    static RotationAugment checked(double alpha, double beta, double gamma);
};

// Drops z. Confidence 1, masks clear. Throws InvalidInput on non-finite input.
PoseSequence2D orthographic_project(const PoseSequence3D& pose);

PoseSequence3D rotate_pose(const PoseSequence3D& pose, const RotationAugment& r);
PoseSequence3D rotate_pose(const PoseSequence3D& pose, const Eigen::Matrix3d& r);

// Subtracts the root keypoint from every frame.
PoseSequence3D root_relative(const PoseSequence3D& pose, int root);

struct SimilarityFit {
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::RowVector3d translation = Eigen::RowVector3d::Zero();
    Pose3 aligned;
    // Sum of squared distances between `aligned` and the target.
    double residual = 0.0;
};

// Similarity transform s*R*pred + t (det R = +1, s > 0) closest to `gt` in
// the least-squares sense. Throws DegenerateInput when gt has no spread.
SimilarityFit procrustes_align(const Pose3& pred, const Pose3& gt);

}  // namespace mspose
