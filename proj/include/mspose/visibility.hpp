#pragma once

#include "mspose/exec.hpp"
#include "mspose/pose.hpp"
#include "mspose/skeleton.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace mspose {

// Cylinder Man Model: each body part is a cylinder between two keypoints.
struct Cylinder {
    int part = -1;  // index into SkeletonTopology::parts()
    double radius_mm = 0.0;
    Eigen::Vector3d top = Eigen::Vector3d::Zero();
    Eigen::Vector3d bottom = Eigen::Vector3d::Zero();
    // Zero height; such a cylinder occludes nothing.
    bool degenerate = false;

    double height() const { return (bottom - top).norm(); }
};

// The cross-section rectangle ABCD: it contains the cylinder axis and faces
// the camera as directly as possible. `normal` has negative z (points toward
// the camera); `lateral` spans the rectangle width and has zero z.
struct CrossSection {
    Eigen::Vector3d axis_unit;
    Eigen::Vector3d normal;
    Eigen::Vector3d lateral;
    Eigen::Vector3d corner_a;  // top + r * lateral
};

struct VisibilityOptions {
    // Sigmoid sharpness kappa, per mm of signed plane distance.
    double sharpness_per_mm = 0.1;
};

struct KeypointVisibility {
    int hard = 1;          // product of Iverson brackets
    double soft = 1.0;     // product of sigmoid(kappa * distance)
    int occluder = -1;     // first occluding part, -1 when visible
};

struct VisibilityReport {
    std::vector<std::uint8_t> hard;
    std::vector<double> soft;
    std::vector<int> occluder;
};

// T x K visibility flags and soft scores, row-major by frame.
struct SequenceVisibility {
    int num_frames = 0;
    int num_keypoints = 0;
    std::vector<std::uint8_t> hard;
    std::vector<double> soft;
};

// Exactly one cylinder per topology part (ten for the default body). Throws
// TopologyMismatch when the pose does not have the topology's keypoints.
std::vector<Cylinder> build_cylinders(const Pose3& pose, const SkeletonTopology& topo);

CrossSection cross_section(const Cylinder& c);

// Whether the orthographic projection of p falls inside the projected
// cross-section rectangle A'B'C'D' (boundary inclusive).
bool in_projected_rectangle(const Eigen::Vector3d& p, const Cylinder& c);

// Signed distance (mm) of p from the cross-section plane; positive = toward
// the camera.
double plane_distance(const Eigen::Vector3d& p, const Cylinder& c);

// Whether keypoint k defines or belongs to the part behind cylinder c.
bool exempt_from(int k, const Cylinder& c, const SkeletonTopology& topo);

KeypointVisibility visibility(int keypoint, const Pose3& pose, std::span<const Cylinder> cylinders,
                              const SkeletonTopology& topo, const VisibilityOptions& opts = {});
KeypointVisibility visibility(int keypoint, const Pose3& pose, const SkeletonTopology& topo,
                              const VisibilityOptions& opts = {});

VisibilityReport frame_visibility(const Pose3& pose, const SkeletonTopology& topo,
                                  const VisibilityOptions& opts = {});

SequenceVisibility sequence_visibility(const PoseSequence3D& seq, const SkeletonTopology& topo,
                                       const VisibilityOptions& opts = {}, Exec exec = Exec::parallel);

}  // namespace mspose
