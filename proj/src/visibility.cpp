#include "mspose/visibility.hpp"

#include "mspose/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace mspose {

namespace {

constexpr double kDegenerateHeight = 1e-9;  // mm

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double torso_radius(const Pose3& pose, const SkeletonTopology& topo)
{
    const auto& shoulders = topo.torso_shoulders();
    double sum = 0.0;
    for (int s : shoulders) sum += (pose.row(s) - pose.row(topo.torso_neck())).norm();
    return sum / static_cast<double>(shoulders.size());
}

}  // namespace

std::vector<Cylinder> build_cylinders(const Pose3& pose, const SkeletonTopology& topo)
{
    if (pose.rows() != topo.num_keypoints())
        throw TopologyMismatch("pose has " + std::to_string(pose.rows()) + " keypoints, topology expects " +
                               std::to_string(topo.num_keypoints()));
    std::vector<Cylinder> out;
    out.reserve(topo.parts().size());
    for (int i = 0; i < static_cast<int>(topo.parts().size()); ++i) {
        const BodyPart& part = topo.parts()[i];
        Cylinder c;
        c.part = i;
        c.top = pose.row(part.top).transpose();
        c.bottom = pose.row(part.bottom).transpose();
        c.radius_mm = part.torso_radius ? torso_radius(pose, topo) : part.radius_mm;
        c.degenerate = c.height() < kDegenerateHeight || !(c.radius_mm > 0.0);
        out.push_back(c);
    }
    return out;
}

CrossSection cross_section(const Cylinder& c)
{
    CrossSection s;
    const Eigen::Vector3d axis = c.bottom - c.top;
    const double len = axis.norm();
    s.axis_unit = len > 0.0 ? Eigen::Vector3d(axis / len) : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d toward_camera(0.0, 0.0, -1.0);
    const Eigen::Vector3d n = toward_camera - toward_camera.dot(s.axis_unit) * s.axis_unit;
    if (n.norm() < 1e-12) {
        // Axis along the viewing ray: the rectangle projects to a segment.
        s.normal = toward_camera;
        s.lateral = Eigen::Vector3d::UnitX();
    } else {
        s.normal = n.normalized();
        s.lateral = s.axis_unit.cross(s.normal);
    }
    s.corner_a = c.top + c.radius_mm * s.lateral;
    return s;
}

bool in_projected_rectangle(const Eigen::Vector3d& p, const Cylinder& c)
{
    if (c.degenerate) return false;
    const Eigen::Vector2d axis = (c.bottom - c.top).head<2>();
    const double len = axis.norm();
    if (len < kDegenerateHeight) return false;
    const Eigen::Vector2d q = (p - c.top).head<2>();
    const double along = q.dot(axis) / len;
    const double across = (axis.x() * q.y() - axis.y() * q.x()) / len;
    return along >= 0.0 && along <= len && std::abs(across) <= c.radius_mm;
}

double plane_distance(const Eigen::Vector3d& p, const Cylinder& c)
{
    return (p - c.top).dot(cross_section(c).normal);
}

bool exempt_from(int k, const Cylinder& c, const SkeletonTopology& topo)
{
    const BodyPart& part = topo.parts()[c.part];
    if (k == part.top || k == part.bottom) return true;
    return std::find(part.members.begin(), part.members.end(), k) != part.members.end();
}

KeypointVisibility visibility(int keypoint, const Pose3& pose, std::span<const Cylinder> cylinders,
                              const SkeletonTopology& topo, const VisibilityOptions& opts)
{
    KeypointVisibility v;
    const Eigen::Vector3d p = pose.row(keypoint).transpose();
    for (const Cylinder& c : cylinders) {
        if (c.degenerate || exempt_from(keypoint, c, topo)) continue;
        if (!in_projected_rectangle(p, c)) continue;
        const double d = plane_distance(p, c);
        if (!(d > 0.0)) {
            if (v.hard) v.occluder = c.part;
            v.hard = 0;
        }
        v.soft *= sigmoid(opts.sharpness_per_mm * d);
    }
    return v;
}

KeypointVisibility visibility(int keypoint, const Pose3& pose, const SkeletonTopology& topo,
                              const VisibilityOptions& opts)
{
    const auto cyl = build_cylinders(pose, topo);
    return visibility(keypoint, pose, cyl, topo, opts);
}

VisibilityReport frame_visibility(const Pose3& pose, const SkeletonTopology& topo, const VisibilityOptions& opts)
{
    const auto cyl = build_cylinders(pose, topo);
    const int k = topo.num_keypoints();
    VisibilityReport r;
    r.hard.resize(k);
    r.soft.resize(k);
    r.occluder.resize(k);
    for (int i = 0; i < k; ++i) {
        const auto v = visibility(i, pose, cyl, topo, opts);
        r.hard[i] = static_cast<std::uint8_t>(v.hard);
        r.soft[i] = v.soft;
        r.occluder[i] = v.occluder;
    }
    return r;
}

SequenceVisibility sequence_visibility(const PoseSequence3D& seq, const SkeletonTopology& topo,
                                       const VisibilityOptions& opts, Exec exec)
{
    if (seq.num_keypoints != topo.num_keypoints())
        throw TopologyMismatch("sequence keypoint count does not match topology");
    SequenceVisibility out;
    out.num_frames = seq.num_frames;
    out.num_keypoints = seq.num_keypoints;
    const std::size_t n = static_cast<std::size_t>(seq.num_frames) * seq.num_keypoints;
    out.hard.assign(n, 1);
    out.soft.assign(n, 1.0);

    auto one_frame = [&](int t) {
        const Pose3 pose = seq.frame(t);
        const auto r = frame_visibility(pose, topo, opts);
        std::copy(r.hard.begin(), r.hard.end(), out.hard.begin() + t * seq.num_keypoints);
        std::copy(r.soft.begin(), r.soft.end(), out.soft.begin() + t * seq.num_keypoints);
    };

    if (exec == Exec::serial) {
        for (int t = 0; t < seq.num_frames; ++t) one_frame(t);
    } else {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < seq.num_frames; ++t) one_frame(t);
    }
    return out;
}

}  // namespace mspose
