#include "mspose/errors.hpp"
#include "mspose/kcs.hpp"
#include "mspose/synthetic.hpp"

#include "gradcheck.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include <sstream>

using namespace mspose;

namespace {

SkeletonTopology two_bones()
{
    std::stringstream ss("keypoint a\nkeypoint b\nkeypoint c\nbone a b\nbone a c\n");
    return SkeletonTopology::parse(ss);
}

SkeletonTopology one_bone()
{
    std::stringstream ss("keypoint a\nkeypoint b\nbone a b\n");
    return SkeletonTopology::parse(ss);
}

PoseSequence3D random_window(int frames, std::uint64_t seed)
{
    const auto topo = SkeletonTopology::h36m17();
    Rng rng(seed);
    PoseSequence3D w = PoseSequence3D::zeros(frames, topo.num_keypoints());
    for (int t = 0; t < frames; ++t) w.set_frame(t, random_pose(topo, rng));
    return w;
}

}  // namespace

TEST_CASE("bone_matrix: single bone and translation")
{
    const auto topo = one_bone();
    Pose3 p(2, 3);
    p << 0, 0, 0, 2, 0, 0;
    const auto b = bone_matrix(p, topo);
    CHECK(b.cols() == 1);
    CHECK(b.col(0) == Eigen::Vector3d(2, 0, 0));
    Pose3 q = p.rowwise() + Eigen::RowVector3d(7, -3, 11);
    CHECK(bone_matrix(q, topo) == b);
}

TEST_CASE("bone_matrix: matches a per-bone subtraction loop")
{
    const auto topo = SkeletonTopology::h36m17();
    Rng rng(1);
    const Pose3 p = random_pose(topo, rng);
    const auto b = bone_matrix(p, topo);
    for (int m = 0; m < topo.num_bones(); ++m) {
        const auto& bone = topo.bones()[m];
        for (int d = 0; d < 3; ++d) CHECK(b(d, m) == p(bone.child, d) - p(bone.parent, d));
    }
}

TEST_CASE("kcs: small closed forms")
{
    Pose3 p(3, 3);
    p << 0, 0, 0, 1, 0, 0, 0, 1, 0;
    CHECK(kcs(p, two_bones()).isApprox(Eigen::Matrix2d::Identity()));
    Pose3 q(2, 3);
    q << 0, 0, 0, 0, 2, 0;
    const auto psi = kcs(q, one_bone());
    CHECK(psi.rows() == 1);
    CHECK(psi(0, 0) == 4.0);
}

TEST_CASE("kcs: symmetry, PSD, bone-length diagonal and rotation invariance")
{
    const auto topo = SkeletonTopology::h36m17();
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const Pose3 p = random_pose(topo, rng);
        const auto psi = kcs(p, topo);
        const double scale = psi.cwiseAbs().maxCoeff();
        CHECK((psi - psi.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(psi);
        CHECK(es.eigenvalues().minCoeff() >= -1e-9 * scale);
        const auto b = bone_matrix(p, topo);
        for (int m = 0; m < topo.num_bones(); ++m) CHECK(psi(m, m) == doctest::Approx(b.col(m).squaredNorm()));
        const Eigen::Matrix3d r = RotationAugment::sample(rng).matrix();
        const auto rotated = kcs(p * r.transpose(), topo);
        CHECK((rotated - psi).cwiseAbs().maxCoeff() <= 1e-9 * scale);
    }
}

TEST_CASE("tkcs: identical frames, growing bone, and difference identity")
{
    const auto topo = one_bone();
    Pose3 a(2, 3), b(2, 3);
    a << 0, 0, 0, 1, 0, 0;
    b << 0, 0, 0, 2, 0, 0;
    CHECK(tkcs(a, a, topo).isZero());
    CHECK(tkcs(a, b, topo)(0, 0) == 3.0);
    CHECK(tkcs(b, a, topo)(0, 0) == -3.0);

    const auto h36 = SkeletonTopology::h36m17();
    const auto w = random_window(2, 3);
    const auto phi = tkcs(w.frame(0), w.frame(1), h36);
    CHECK((phi - (kcs(w.frame(1), h36) - kcs(w.frame(0), h36))).cwiseAbs().maxCoeff() == 0.0);
    CHECK((phi + tkcs(w.frame(1), w.frame(0), h36)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("discriminator_features: layout, constant window and rotation")
{
    const auto topo = SkeletonTopology::h36m17();
    const int m = topo.num_bones();
    const int tri = m * (m + 1) / 2;
    CHECK(feature_dim(topo) == 2 * tri + 3 * topo.num_keypoints());
    CHECK(upper_triangle_indices(3) == std::vector<int>{0, 3, 6, 4, 7, 8});

    auto w = random_window(1, 5);
    PoseSequence3D still = PoseSequence3D::zeros(6, topo.num_keypoints());
    for (int t = 0; t < 6; ++t) still.set_frame(t, w.frame(0));
    const auto f = discriminator_features(still, topo);
    CHECK(f.cols() == feature_dim(topo));
    CHECK(f.middleCols(tri, tri).isZero());

    const auto moving = random_window(6, 6);
    const auto f0 = discriminator_features(moving, topo, 2);
    const auto f1 = discriminator_features(rotate_pose(moving, RotationAugment{0.2, 2.0, -0.4}), topo, 2);
    const double scale = f0.leftCols(2 * tri).cwiseAbs().maxCoeff();
    CHECK((f0.leftCols(2 * tri) - f1.leftCols(2 * tri)).cwiseAbs().maxCoeff() <= 1e-9 * scale);
    CHECK((f0.rightCols(3 * topo.num_keypoints()) - f1.rightCols(3 * topo.num_keypoints())).cwiseAbs().maxCoeff() >
          1.0);
    // Last `interval` rows carry no temporal difference.
    CHECK(f0.bottomRows(2).middleCols(tri, tri).isZero());
    const Eigen::MatrixXd psi = kcs(moving.frame(3), topo);
    const Eigen::MatrixXd phi = kcs(moving.frame(5), topo) - psi;
    const auto idx = upper_triangle_indices(m);
    for (int j = 0; j < tri; ++j) {
        CHECK(f0(3, j) == psi(idx[j]));
        CHECK(f0(3, tri + j) == phi(idx[j]));
    }
    CHECK_THROWS_AS(discriminator_features(moving.slice(0, 2), topo, 2), InvalidWindow);
}

TEST_CASE("discriminator_features: tape version matches and differentiates")
{
    const auto topo = SkeletonTopology::h36m17();
    const auto w = random_window(4, 8);
    ad::Tape tape;
    const auto fv = ad_kcs::discriminator_features(tape, tape.constant(w.coords), 4, topo, 1);
    CHECK((tape.value(fv) - discriminator_features(w, topo, 1)).cwiseAbs().maxCoeff() == 0.0);

    Rng rng(9);
    Eigen::MatrixXd weights(tape.value(fv).rows(), tape.value(fv).cols());
    for (Eigen::Index i = 0; i < weights.size(); ++i) weights(i) = rng.uniform(-1e-6, 1e-6);
    const Eigen::MatrixXd x0 = w.coords * 1e-3;
    const auto r = oracle::grad_check(
        [&](ad::Tape& t, ad::Var x) {
            return t.sum(t.mul_const(ad_kcs::discriminator_features(t, t.scale(x, 1e3), 4, topo, 1), weights));
        },
        x0, 100, 3);
    CHECK(r.failed == 0);
}
