#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mspose {

struct Bone {
    int parent = -1;
    int child = -1;
};

// One rigid body segment approximated by a cylinder. `top` and `bottom` are
// the keypoints at the centers of the two end faces. When `torso_radius` is
// set the radius is measured per pose from the torso radius reference.
struct BodyPart {
    std::string name;
    int top = -1;
    int bottom = -1;
    double radius_mm = 0.0;
    bool torso_radius = false;
    // Keypoints lying on or inside this part (besides top/bottom) that the
    // part never occludes, e.g. shoulders and hips for the torso.
    std::vector<int> members;
};

// Fixed kinematic graph: ordered keypoints, parent->child bone list (a tree),
// body parts for the cylinder model and left/right mirror pairs.
class SkeletonTopology {
public:
    SkeletonTopology() = default;

    // 17-keypoint Human3.6M ordering with the ten-part cylinder body.
    static SkeletonTopology h36m17();

    static SkeletonTopology load(const std::filesystem::path& path);
    static SkeletonTopology parse(std::istream& in);
    void write(std::ostream& out) const;

    int num_keypoints() const { return static_cast<int>(names_.size()); }
    int num_bones() const { return static_cast<int>(bones_.size()); }
    int root() const { return root_; }

    const std::vector<std::string>& keypoint_names() const { return names_; }
    const std::vector<Bone>& bones() const { return bones_; }
    const std::vector<BodyPart>& parts() const { return parts_; }
    const std::vector<std::pair<int, int>>& mirror_pairs() const { return mirrors_; }

    int torso_neck() const { return torso_neck_; }
    const std::vector<int>& torso_shoulders() const { return torso_shoulders_; }

    // Throws TopologyMismatch when the name is unknown.
    int index_of(std::string_view name) const;

    // K x M matrix with -1 at the parent and +1 at the child of each bone, so
    // that a K x 3 pose P gives the bone vectors as (D^T P)^T.
    Eigen::MatrixXd incidence() const;

private:
    void validate();

    std::vector<std::string> names_;
    std::vector<Bone> bones_;
    std::vector<BodyPart> parts_;
    std::vector<std::pair<int, int>> mirrors_;
    int torso_neck_ = -1;
    std::vector<int> torso_shoulders_;
    int root_ = -1;
};

}  // namespace mspose
