#pragma once

#include "mspose/pose.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mspose {

// Pose files are CSV with a header line and one record per (frame, keypoint),
// frames outer, keypoints inner:
//
//   3D:  frame,keypoint,x,y,z,conf,mask[,action]
//   2D:  frame,keypoint,x,y,conf,mask[,action]
//
// `keypoint` is the topology index, coordinates are mm (3D) or crop-normalized
// units (2D), `mask` is 1 for occluded/unobserved entries. For 3D files the
// mask column carries the visibility channel inverted (mask = !visible) and
// conf is written as 1 - mask. The optional `action` column labels every
// record of a frame with an action name used by per-action evaluation.
// Numbers are written with 17 significant digits so files round-trip exactly.

struct PoseFile3D {
    PoseSequence3D pose;
    std::vector<std::string> actions;  // per frame, empty when absent
};

struct PoseFile2D {
    PoseSequence2D pose;
    std::vector<std::string> actions;
};

void write_pose3d(std::ostream& out, const PoseSequence3D& pose,
                  const std::vector<std::string>& actions = {});
void write_pose2d(std::ostream& out, const PoseSequence2D& pose,
                  const std::vector<std::string>& actions = {});
PoseFile3D read_pose3d(std::istream& in);
PoseFile2D read_pose2d(std::istream& in);

void save_pose3d(const std::filesystem::path& path, const PoseSequence3D& pose,
                 const std::vector<std::string>& actions = {});
void save_pose2d(const std::filesystem::path& path, const PoseSequence2D& pose,
                 const std::vector<std::string>& actions = {});
PoseFile3D load_pose3d(const std::filesystem::path& path);
PoseFile2D load_pose2d(const std::filesystem::path& path);

}  // namespace mspose
