#pragma once

#include "mspose/pose.hpp"
#include "mspose/rng.hpp"
#include "mspose/skeleton.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace mspose {

struct SyntheticMotionConfig {
    int num_sequences = 8;
    int num_subjects = 4;
    int frames = 256;
    // Per-subject uniform body scale and independent per-bone length jitter.
    double body_scale_min = 0.9;
    double body_scale_max = 1.1;
    double bone_jitter = 0.05;
    // Joint-angle random walk (rad/frame velocity noise, velocity decay and
    // pull toward the middle of each joint range).
    double angle_step = 0.004;
    double velocity_decay = 0.95;
    double center_pull = 0.002;
    // Playback speed of the underlying motion; one is drawn per sequence.
    std::vector<double> speed_multipliers{0.5, 1.0, 2.0, 3.0};
    // Camera yaw of each view (degrees, about the vertical axis).
    std::vector<double> view_yaws_deg{0.0, 90.0};
    double crop_mm = 2000.0;  // side of the crop in mm; 1.0 normalized unit
    double crop_px = 256.0;
    // 2D detection model: visible keypoints get confidence in
    // [visible_conf_min, 1], occluded ones [occluded_conf_min, occluded_conf_max];
    // noise sd in crop pixels is noise_px * (1 + 3 * (1 - conf)).
    double noise_px = 1.0;
    double visible_conf_min = 0.75;
    double occluded_conf_min = 0.2;
    double occluded_conf_max = 0.6;
    bool mask_occluded = false;
    std::uint64_t seed = 0;

    // Throws ConfigError.
    void validate() const;
};

struct SyntheticView {
    PoseSequence3D gt;       // root-relative, camera frame, visibility filled
    PoseSequence2D det;      // noisy detections with simulated confidence
    PoseSequence2D clean2d;  // exact normalized projection
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // body frame -> camera
    double crop_mm = 2000.0;
};

struct SyntheticSequence {
    int subject = 0;
    double speed = 1.0;
    std::string action;
    std::vector<SyntheticView> views;
};

// Per-keypoint rest offsets (mm, from the parent keypoint) for a topology that
// uses the default keypoint names. Throws ConfigError otherwise.
Eigen::MatrixX3d rest_offsets(const SkeletonTopology& topo);

// Random anthropometric body: rest offsets scaled per subject and per bone.
Eigen::MatrixX3d sample_body(const SkeletonTopology& topo, const SyntheticMotionConfig& cfg, Rng& rng);

// Forward kinematics from per-keypoint local Euler angles (T*K x 3, radians)
// and a per-frame root yaw. Output is root-relative.
PoseSequence3D forward_kinematics(const SkeletonTopology& topo, const Eigen::MatrixX3d& offsets,
                                  const Eigen::MatrixX3d& local_angles, const Eigen::VectorXd& root_yaw);

// One random static pose with joint angles drawn uniformly inside the joint
// ranges and a uniform random yaw.
Pose3 random_pose(const SkeletonTopology& topo, Rng& rng);

// Crop-normalized orthographic projection: 0.5 + xy / crop_mm.
PoseSequence2D project_to_crop(const PoseSequence3D& pose, double crop_mm);

std::vector<SyntheticSequence> generate_synthetic(const SyntheticMotionConfig& cfg, const SkeletonTopology& topo);

// Replaces `fraction` of the unmasked detections with gross errors: a random
// shift of [min_px, max_px] crop pixels or a left/right swap, with confidence
// drawn from [conf_min, conf_max]. Clean detections get confidence from
// [clean_conf_min, 1]. Returns the corrupted flags (T*K).
struct CorruptionConfig {
    double fraction = 0.3;
    double min_px = 15.0;
    double max_px = 40.0;
    double conf_min = 0.02;
    double conf_max = 0.3;
    double clean_conf_min = 0.4;
    double clean_noise_px = 1.0;
    double crop_px = 256.0;
};
std::vector<std::uint8_t> corrupt_detections(PoseSequence2D& det, const SkeletonTopology& topo,
                                             const CorruptionConfig& cfg, Rng& rng);

}  // namespace mspose
