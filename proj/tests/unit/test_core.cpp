#include "mspose/errors.hpp"
#include "mspose/pose.hpp"
#include "mspose/rng.hpp"
#include "mspose/skeleton.hpp"
#include "mspose/synthetic.hpp"

#include <Eigen/Geometry>
#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace mspose;

namespace {

PoseSequence3D random_sequence(int frames, std::uint64_t seed)
{
    const auto topo = SkeletonTopology::h36m17();
    Rng rng(seed);
    PoseSequence3D s = PoseSequence3D::zeros(frames, topo.num_keypoints());
    for (int t = 0; t < frames; ++t) s.set_frame(t, random_pose(topo, rng));
    return s;
}

double bone_length(const Pose3& p, const Bone& b) { return (p.row(b.child) - p.row(b.parent)).norm(); }

}  // namespace

TEST_CASE("skeleton: built-in topology")
{
    const auto topo = SkeletonTopology::h36m17();
    CHECK(topo.num_keypoints() == 17);
    CHECK(topo.num_bones() == 16);
    CHECK(topo.parts().size() == 10);
    CHECK(topo.root() == topo.index_of("pelvis"));
    CHECK(topo.incidence().rows() == 17);
    CHECK(topo.incidence().cols() == 16);
}

TEST_CASE("skeleton: text round trip and bundled file")
{
    const auto topo = SkeletonTopology::h36m17();
    std::stringstream ss;
    topo.write(ss);
    const auto back = SkeletonTopology::parse(ss);
    CHECK(back.keypoint_names() == topo.keypoint_names());
    CHECK(back.num_bones() == topo.num_bones());
    CHECK(back.parts().size() == topo.parts().size());
    CHECK(back.mirror_pairs() == topo.mirror_pairs());

    const auto file = SkeletonTopology::load(MSPOSE_SOURCE_DIR "/data/h36m17.topology");
    CHECK(file.keypoint_names() == topo.keypoint_names());
}

TEST_CASE("skeleton: malformed topology is rejected")
{
    std::stringstream cyclic("keypoint a\nkeypoint b\nbone a b\nbone b a\n");
    CHECK_THROWS_AS(SkeletonTopology::parse(cyclic), Error);
    std::stringstream unknown("keypoint a\nbone a z\n");
    CHECK_THROWS_AS(SkeletonTopology::parse(unknown), Error);
}

TEST_CASE("orthographic_project: drops z")
{
    PoseSequence3D p = PoseSequence3D::zeros(1, 1);
    p.coords.row(0) << 1, 2, 3;
    const auto q = orthographic_project(p);
    CHECK(q.coords(0, 0) == 1.0);
    CHECK(q.coords(0, 1) == 2.0);
}

TEST_CASE("orthographic_project: z translation invariance and selection-matrix oracle")
{
    const auto s = random_sequence(3, 5);
    PoseSequence3D moved = s;
    moved.coords.col(2).array() += 100.0;
    CHECK(orthographic_project(moved).coords == orthographic_project(s).coords);

    Eigen::Matrix<double, 2, 3> sel;
    sel << 1, 0, 0, 0, 1, 0;
    const auto q = orthographic_project(s);
    for (Eigen::Index i = 0; i < s.coords.rows(); ++i) {
        const Eigen::Vector2d expect = sel * s.coords.row(i).transpose();
        CHECK(q.coords(i, 0) == expect(0));
        CHECK(q.coords(i, 1) == expect(1));
    }
}

TEST_CASE("rotate_pose: identity, involution and rigid lengths")
{
    const auto topo = SkeletonTopology::h36m17();
    const auto s = random_sequence(2, 9);
    CHECK(rotate_pose(s, RotationAugment{}).coords.isApprox(s.coords, 0.0));

    RotationAugment flip{0.0, M_PI, 0.0};
    const auto twice = rotate_pose(rotate_pose(s, flip), flip);
    CHECK((twice.coords - s.coords).cwiseAbs().maxCoeff() < 1e-9);

    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const auto r = RotationAugment::sample(rng);
        const auto out = rotate_pose(s, r);
        for (int t = 0; t < s.num_frames; ++t)
            for (const auto& b : topo.bones()) {
                const double before = bone_length(s.frame(t), b);
                CHECK(std::abs(bone_length(out.frame(t), b) - before) <= 1e-9 * before);
            }
    }
}

TEST_CASE("rotation sampler stays inside its ranges")
{
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const auto r = RotationAugment::sample(rng);
        CHECK(std::abs(r.beta) <= M_PI);
    }
    CHECK_THROWS_AS(RotationAugment::checked(0.0, 4.0, 0.0), InvalidInput);
}

TEST_CASE("procrustes_align: exact and recovered similarity")
{
    const auto topo = SkeletonTopology::h36m17();
    Rng rng(21);
    const Pose3 gt = random_pose(topo, rng);
    const auto same = procrustes_align(gt, gt);
    CHECK(same.residual < 1e-9);
    CHECK((same.aligned - gt).cwiseAbs().maxCoeff() < 1e-9);

    const Eigen::Matrix3d r = RotationAugment{0.3, -1.1, 0.7}.matrix();
    Pose3 pred = (2.5 * gt * r.transpose()).rowwise() + Eigen::RowVector3d(10, -40, 300);
    const auto fit = procrustes_align(pred, gt);
    CHECK(fit.residual < 1e-9);
}

TEST_CASE("procrustes_align: no random similarity beats the fit")
{
    const auto topo = SkeletonTopology::h36m17();
    Rng rng(33);
    const Pose3 gt = random_pose(topo, rng);
    Pose3 pred = gt;
    for (Eigen::Index i = 0; i < pred.size(); ++i) pred(i) += rng.normal(0.0, 40.0);
    const auto fit = procrustes_align(pred, gt);
    const Eigen::RowVector3d mp = pred.colwise().mean();
    const Eigen::RowVector3d mg = gt.colwise().mean();
    int better = 0;
    for (int i = 0; i < 10000; ++i) {
        // Random transforms near the optimum as well as far from it.
        const double spread = i % 2 ? 0.05 : 1.0;
        const Eigen::Matrix3d rr =
            (Eigen::AngleAxisd(rng.normal(0.0, spread), Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized()).toRotationMatrix()) *
            fit.rotation;
        const double sc = fit.scale * std::exp(rng.normal(0.0, spread * 0.2));
        Pose3 cand = (sc * ((pred.rowwise() - mp) * rr.transpose())).rowwise() + mg;
        const double res = (cand - gt).squaredNorm();
        better += res < fit.residual - 1e-9;
    }
    CHECK(better == 0);
}

TEST_CASE("procrustes_align: degenerate input")
{
    Pose3 zero = Pose3::Zero(17, 3);
    const auto topo = SkeletonTopology::h36m17();
    Rng rng(2);
    CHECK_THROWS_AS(procrustes_align(random_pose(topo, rng), zero), DegenerateInput);
    CHECK_THROWS_AS(procrustes_align(zero, Pose3::Zero(16, 3)), InvalidInput);
}

TEST_CASE("root_relative puts the root at the origin")
{
    auto s = random_sequence(3, 44);
    s.coords.rowwise() += Eigen::RowVector3d(5, 6, 7);
    const auto r = root_relative(s, 0);
    for (int t = 0; t < 3; ++t) CHECK(r.point(t, 0).norm() == 0.0);
}
