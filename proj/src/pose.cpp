#include "mspose/pose.hpp"

#include "mspose/errors.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace mspose {

PoseSequence3D PoseSequence3D::zeros(int frames, int keypoints)
{
    PoseSequence3D p;
    p.num_frames = frames;
    p.num_keypoints = keypoints;
    p.coords = Eigen::MatrixX3d::Zero(static_cast<Eigen::Index>(frames) * keypoints, 3);
    return p;
}

PoseSequence3D PoseSequence3D::slice(int first, int count) const
{
    if (first < 0 || count < 0 || first + count > num_frames)
        throw InvalidInput("frame slice out of range");
    PoseSequence3D out = zeros(count, num_keypoints);
    out.coords = coords.middleRows(static_cast<Eigen::Index>(first) * num_keypoints,
                                   static_cast<Eigen::Index>(count) * num_keypoints);
    if (!visibility.empty())
        out.visibility.assign(visibility.begin() + first * num_keypoints,
                              visibility.begin() + (first + count) * num_keypoints);
    return out;
}

PoseSequence2D PoseSequence2D::zeros(int frames, int keypoints)
{
    PoseSequence2D p;
    p.num_frames = frames;
    p.num_keypoints = keypoints;
    const auto n = static_cast<Eigen::Index>(frames) * keypoints;
    p.coords = Eigen::MatrixX2d::Zero(n, 2);
    p.confidence = Eigen::VectorXd::Zero(n);
    p.mask.assign(static_cast<std::size_t>(n), 0);
    return p;
}

void PoseSequence2D::set_masked(int t, int k)
{
    const int i = index(t, k);
    coords.row(i).setZero();
    confidence[i] = 0.0;
    mask[i] = 1;
}

PoseSequence2D PoseSequence2D::slice(int first, int count) const
{
    if (first < 0 || count < 0 || first + count > num_frames)
        throw InvalidInput("frame slice out of range");
    PoseSequence2D out = zeros(count, num_keypoints);
    const auto off = static_cast<Eigen::Index>(first) * num_keypoints;
    const auto n = static_cast<Eigen::Index>(count) * num_keypoints;
    out.coords = coords.middleRows(off, n);
    out.confidence = confidence.segment(off, n);
    out.mask.assign(mask.begin() + off, mask.begin() + off + n);
    return out;
}

void PoseSequence2D::validate() const
{
    const auto n = static_cast<Eigen::Index>(num_frames) * num_keypoints;
    if (coords.rows() != n || confidence.size() != n || static_cast<Eigen::Index>(mask.size()) != n)
        throw InvalidInput("2D pose sequence has inconsistent shapes");
    if (!coords.allFinite() || !confidence.allFinite())
        throw InvalidInput("2D pose sequence has non-finite values");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (confidence[i] < 0.0 || confidence[i] > 1.0)
            throw InvalidInput("confidence outside [0,1] at entry " + std::to_string(i));
        if (mask[i] && confidence[i] != 0.0)
            throw InvalidInput("masked entry " + std::to_string(i) + " has nonzero confidence");
    }
}

Eigen::Matrix3d RotationAugment::matrix() const
{
    using Eigen::AngleAxisd;
    using Eigen::Vector3d;
    return (AngleAxisd(gamma, Vector3d::UnitZ()) * AngleAxisd(beta, Vector3d::UnitY()) *
            AngleAxisd(alpha, Vector3d::UnitX()))
        .toRotationMatrix();
}

RotationAugment RotationAugment::sample(Rng& rng)
{
    RotationAugment r;
    r.alpha = rng.uniform(-0.2 * M_PI, 0.2 * M_PI);
    r.beta = rng.uniform(-M_PI, M_PI);
    r.gamma = rng.uniform(-0.2 * M_PI, 0.2 * M_PI);
    return r;
}

RotationAugment RotationAugment::checked(double alpha, double beta, double gamma)
{
    constexpr double side = 0.2 * M_PI;
    if (std::abs(alpha) > side || std::abs(gamma) > side || std::abs(beta) > M_PI)
        throw InvalidInput("rotation angles outside the augmentation ranges");
    return {alpha, beta, gamma};
}

PoseSequence2D orthographic_project(const PoseSequence3D& pose)
{
    if (!pose.all_finite()) throw InvalidInput("cannot project a non-finite pose");
    PoseSequence2D out = PoseSequence2D::zeros(pose.num_frames, pose.num_keypoints);
    out.coords = pose.coords.leftCols<2>();
    out.confidence.setOnes();
    return out;
}

PoseSequence3D rotate_pose(const PoseSequence3D& pose, const Eigen::Matrix3d& r)
{
    PoseSequence3D out = pose;
    out.coords = pose.coords * r.transpose();
    return out;
}

PoseSequence3D rotate_pose(const PoseSequence3D& pose, const RotationAugment& r)
{
    return rotate_pose(pose, r.matrix());
}

PoseSequence3D root_relative(const PoseSequence3D& pose, int root)
{
    PoseSequence3D out = pose;
    for (int t = 0; t < pose.num_frames; ++t) {
        const Eigen::RowVector3d origin = pose.coords.row(t * pose.num_keypoints + root);
        out.coords.middleRows(t * pose.num_keypoints, pose.num_keypoints).rowwise() -= origin;
    }
    return out;
}

SimilarityFit procrustes_align(const Pose3& pred, const Pose3& gt)
{
    if (pred.rows() != gt.rows()) throw InvalidInput("procrustes: keypoint counts differ");
    const Eigen::RowVector3d mu_pred = pred.colwise().mean();
    const Eigen::RowVector3d mu_gt = gt.colwise().mean();
    const Eigen::MatrixX3d x = pred.rowwise() - mu_pred;
    const Eigen::MatrixX3d y = gt.rowwise() - mu_gt;
    const double spread_gt = y.squaredNorm();
    if (!(spread_gt > 1e-18 * std::max(1.0, mu_gt.squaredNorm())))
        throw DegenerateInput("procrustes: ground truth keypoints are coincident");

    SimilarityFit fit;
    const double spread_pred = x.squaredNorm();
    if (spread_pred == 0.0) {
        fit.scale = 0.0;
        fit.translation = mu_gt;
    } else {
        // Umeyama: maximise tr(R^T y^T x) over proper rotations.
        const Eigen::Matrix3d h = y.transpose() * x;
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Vector3d d = Eigen::Vector3d::Ones();
        if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d[2] = -1.0;
        fit.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
        fit.scale = svd.singularValues().dot(d) / spread_pred;
        fit.translation = mu_gt - fit.scale * mu_pred * fit.rotation.transpose();
    }
    fit.aligned = (fit.scale * pred * fit.rotation.transpose()).rowwise() + fit.translation;
    fit.residual = (fit.aligned - gt).squaredNorm();
    return fit;
}

}  // namespace mspose
