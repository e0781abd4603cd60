#include "mspose/kcs.hpp"

#include "mspose/errors.hpp"

namespace mspose {

Eigen::Matrix3Xd bone_matrix(const Pose3& pose, const SkeletonTopology& topo)
{
    if (pose.rows() != topo.num_keypoints()) throw TopologyMismatch("pose does not match topology");
    Eigen::Matrix3Xd b(3, topo.num_bones());
    for (int m = 0; m < topo.num_bones(); ++m) {
        const Bone& bone = topo.bones()[m];
        b.col(m) = (pose.row(bone.child) - pose.row(bone.parent)).transpose();
    }
    return b;
}

Eigen::MatrixXd kcs(const Pose3& pose, const SkeletonTopology& topo)
{
    const Eigen::Matrix3Xd b = bone_matrix(pose, topo);
    return b.transpose() * b;
}

Eigen::MatrixXd tkcs(const Pose3& earlier, const Pose3& later, const SkeletonTopology& topo)
{
    return kcs(later, topo) - kcs(earlier, topo);
}

std::vector<int> upper_triangle_indices(int m)
{
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(m) * (m + 1) / 2);
    for (int r = 0; r < m; ++r)
        for (int c = r; c < m; ++c) idx.push_back(c * m + r);
    return idx;
}

int feature_dim(const SkeletonTopology& topo)
{
    const int m = topo.num_bones();
    return m * (m + 1) + 3 * topo.num_keypoints();
}

Eigen::MatrixXd discriminator_features(const PoseSequence3D& window, const SkeletonTopology& topo, int interval)
{
    if (interval < 1) throw InvalidWindow("TKCS interval must be at least 1");
    if (window.num_frames < interval + 1)
        throw InvalidWindow("window of " + std::to_string(window.num_frames) +
                            " frames is shorter than interval + 1");
    if (window.num_keypoints != topo.num_keypoints()) throw TopologyMismatch("window does not match topology");

    const int t_len = window.num_frames;
    const int m = topo.num_bones();
    const int k = topo.num_keypoints();
    const int tri = m * (m + 1) / 2;
    const auto idx = upper_triangle_indices(m);

    std::vector<Eigen::MatrixXd> psi(t_len);
    for (int t = 0; t < t_len; ++t) psi[t] = kcs(window.frame(t), topo);

    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(t_len, feature_dim(topo));
    for (int t = 0; t < t_len; ++t) {
        for (int j = 0; j < tri; ++j) f(t, j) = psi[t].data()[idx[j]];
        if (t + interval < t_len) {
            const Eigen::MatrixXd phi = psi[t + interval] - psi[t];
            for (int j = 0; j < tri; ++j) f(t, tri + j) = phi.data()[idx[j]];
        }
        for (int kp = 0; kp < k; ++kp)
            for (int c = 0; c < 3; ++c) f(t, 2 * tri + 3 * kp + c) = window.coords(t * k + kp, c);
    }
    return f;
}

namespace ad_kcs {

ad::Var discriminator_features(ad::Tape& tape, ad::Var coords, int frames, const SkeletonTopology& topo,
                               int interval)
{
    if (interval < 1) throw InvalidWindow("TKCS interval must be at least 1");
    if (frames < interval + 1) throw InvalidWindow("window is shorter than interval + 1");
    const int k = topo.num_keypoints();
    const int m = topo.num_bones();
    if (tape.value(coords).rows() != static_cast<Eigen::Index>(frames) * k)
        throw TopologyMismatch("coordinate rows do not match frames x keypoints");

    const Eigen::MatrixXd dt = topo.incidence().transpose();
    const auto tri = upper_triangle_indices(m);
    std::vector<int> coord_idx;
    for (int kp = 0; kp < k; ++kp)
        for (int c = 0; c < 3; ++c) coord_idx.push_back(c * k + kp);

    std::vector<ad::Var> psi(frames), pose(frames);
    for (int t = 0; t < frames; ++t) {
        pose[t] = tape.middle_rows(coords, t * k, k);
        const ad::Var bt = tape.matmul_const(dt, pose[t]);  // M x 3, row m = bone m
        psi[t] = tape.matmul(bt, tape.transpose(bt));
    }
    const ad::Var zero_phi = tape.constant(Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(tri.size())));
    std::vector<ad::Var> rows(frames);
    for (int t = 0; t < frames; ++t) {
        const ad::Var psi_row = tape.gather(psi[t], tri);
        const ad::Var phi_row =
            t + interval < frames ? tape.gather(tape.sub(psi[t + interval], psi[t]), tri) : zero_phi;
        rows[t] = tape.hcat({psi_row, phi_row, tape.gather(pose[t], coord_idx)});
    }
    return tape.vcat(rows);
}

}  // namespace ad_kcs

}  // namespace mspose
