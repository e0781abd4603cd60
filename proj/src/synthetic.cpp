#include "mspose/synthetic.hpp"

#include "mspose/errors.hpp"
#include "mspose/visibility.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace mspose {

namespace {

struct JointSpec {
    Eigen::Vector3d offset;  // rest offset from parent, mm
    Eigen::Vector3d lo;      // local Euler angle range, radians
    Eigen::Vector3d hi;
};

// Body frame matches the camera frame at zero yaw: x right (the subject's
// left), y down, z away from the camera; the subject faces the camera.
const std::map<std::string, JointSpec>& joint_table()
{
    using V = Eigen::Vector3d;
    static const std::map<std::string, JointSpec> table = {
        {"r_hip", {V(-130, 0, 0), V(-0.1, -0.1, -0.1), V(0.1, 0.1, 0.1)}},
        {"r_knee", {V(0, 450, 0), V(-1.6, -0.3, -0.1), V(0.5, 0.3, 0.5)}},
        {"r_ankle", {V(0, 440, 0), V(0.0, 0, 0), V(2.2, 0, 0)}},
        {"l_hip", {V(130, 0, 0), V(-0.1, -0.1, -0.1), V(0.1, 0.1, 0.1)}},
        {"l_knee", {V(0, 450, 0), V(-1.6, -0.3, -0.5), V(0.5, 0.3, 0.1)}},
        {"l_ankle", {V(0, 440, 0), V(0.0, 0, 0), V(2.2, 0, 0)}},
        {"spine", {V(0, -230, 0), V(-0.3, -0.4, -0.3), V(0.5, 0.4, 0.3)}},
        {"neck", {V(0, -250, 0), V(-0.2, -0.3, -0.2), V(0.3, 0.3, 0.2)}},
        {"nose", {V(0, -100, -50), V(-0.5, -0.8, -0.3), V(0.5, 0.8, 0.3)}},
        {"head_top", {V(0, -120, 40), V(0, 0, 0), V(0, 0, 0)}},
        {"l_shoulder", {V(160, 20, 0), V(-0.15, -0.15, -0.15), V(0.15, 0.15, 0.15)}},
        {"l_elbow", {V(0, 280, 0), V(-2.5, -0.5, -2.5), V(0.8, 0.5, 0.3)}},
        {"l_wrist", {V(0, 250, 0), V(-2.4, 0, 0), V(0.0, 0, 0)}},
        {"r_shoulder", {V(-160, 20, 0), V(-0.15, -0.15, -0.15), V(0.15, 0.15, 0.15)}},
        {"r_elbow", {V(0, 280, 0), V(-2.5, -0.5, -0.3), V(0.8, 0.5, 2.5)}},
        {"r_wrist", {V(0, 250, 0), V(-2.4, 0, 0), V(0.0, 0, 0)}},
    };
    return table;
}

std::vector<int> parents_of(const SkeletonTopology& topo)
{
    std::vector<int> parent(topo.num_keypoints(), -1);
    for (const Bone& b : topo.bones()) parent[b.child] = b.parent;
    return parent;
}

// Parents before children.
std::vector<int> topological_order(const SkeletonTopology& topo)
{
    const auto parent = parents_of(topo);
    std::vector<int> order{topo.root()};
    std::vector<char> done(topo.num_keypoints(), 0);
    done[topo.root()] = 1;
    while (static_cast<int>(order.size()) < topo.num_keypoints()) {
        for (int k = 0; k < topo.num_keypoints(); ++k)
            if (!done[k] && parent[k] >= 0 && done[parent[k]]) {
                order.push_back(k);
                done[k] = 1;
            }
    }
    return order;
}

const JointSpec& spec_for(const SkeletonTopology& topo, int k)
{
    const auto& table = joint_table();
    const auto it = table.find(topo.keypoint_names()[k]);
    if (it == table.end())
        throw ConfigError("synthetic motion has no joint model for keypoint '" + topo.keypoint_names()[k] + "'");
    return it->second;
}

Eigen::Matrix3d euler(const Eigen::Vector3d& a)
{
    return (Eigen::AngleAxisd(a.z(), Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(a.y(), Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(a.x(), Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

Eigen::Matrix3d yaw(double angle) { return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitY()).toRotationMatrix(); }

}  // namespace

void SyntheticMotionConfig::validate() const
{
    auto fail = [](const std::string& what) { throw ConfigError("synthetic: " + what); };
    if (num_sequences < 1) fail("num_sequences must be >= 1");
    if (num_subjects < 1) fail("num_subjects must be >= 1");
    if (frames < 2) fail("frames must be >= 2");
    if (!(body_scale_min > 0.0) || body_scale_max < body_scale_min) fail("invalid body scale range");
    if (!(bone_jitter >= 0.0) || bone_jitter >= 0.5) fail("bone_jitter must be in [0, 0.5)");
    if (!(angle_step >= 0.0)) fail("angle_step must be >= 0");
    if (!(velocity_decay >= 0.0 && velocity_decay < 1.0)) fail("velocity_decay must be in [0, 1)");
    if (!(center_pull >= 0.0)) fail("center_pull must be >= 0");
    if (speed_multipliers.empty()) fail("speed_multipliers must be nonempty");
    for (double s : speed_multipliers)
        if (!(s > 0.0)) fail("speed multipliers must be > 0");
    if (view_yaws_deg.empty()) fail("view_yaws_deg must be nonempty");
    if (!(crop_mm > 0.0) || !(crop_px > 0.0)) fail("crop sizes must be > 0");
    if (!(noise_px >= 0.0)) fail("noise_px must be >= 0");
    if (!(visible_conf_min >= 0.0 && visible_conf_min <= 1.0)) fail("visible_conf_min must be in [0,1]");
    if (!(occluded_conf_min >= 0.0 && occluded_conf_min <= occluded_conf_max && occluded_conf_max <= 1.0))
        fail("invalid occluded confidence range");
}

Eigen::MatrixX3d rest_offsets(const SkeletonTopology& topo)
{
    Eigen::MatrixX3d out = Eigen::MatrixX3d::Zero(topo.num_keypoints(), 3);
    for (int k = 0; k < topo.num_keypoints(); ++k)
        if (k != topo.root()) out.row(k) = spec_for(topo, k).offset.transpose();
    return out;
}

Eigen::MatrixX3d sample_body(const SkeletonTopology& topo, const SyntheticMotionConfig& cfg, Rng& rng)
{
    Eigen::MatrixX3d offsets = rest_offsets(topo);
    const double body = rng.uniform(cfg.body_scale_min, cfg.body_scale_max);
    for (int k = 0; k < topo.num_keypoints(); ++k)
        offsets.row(k) *= body * (1.0 + rng.uniform(-cfg.bone_jitter, cfg.bone_jitter));
    // Mirror pairs share lengths so the body is symmetric.
    for (const auto& [a, b] : topo.mirror_pairs()) {
        const double la = offsets.row(a).norm();
        const double lb = offsets.row(b).norm();
        if (la > 0.0 && lb > 0.0) offsets.row(b) *= la / lb;
    }
    return offsets;
}

PoseSequence3D forward_kinematics(const SkeletonTopology& topo, const Eigen::MatrixX3d& offsets,
                                  const Eigen::MatrixX3d& local_angles, const Eigen::VectorXd& root_yaw)
{
    const int k = topo.num_keypoints();
    const int t_count = static_cast<int>(root_yaw.size());
    if (offsets.rows() != k || local_angles.rows() != static_cast<Eigen::Index>(t_count) * k)
        throw InvalidInput("forward_kinematics: shape mismatch");
    const auto parent = parents_of(topo);
    const auto order = topological_order(topo);
    PoseSequence3D seq = PoseSequence3D::zeros(t_count, k);
    std::vector<Eigen::Matrix3d> global(k);
    for (int t = 0; t < t_count; ++t) {
        Pose3 pose = Pose3::Zero(k, 3);
        for (int j : order) {
            const Eigen::Vector3d a = local_angles.row(t * k + j).transpose();
            if (j == topo.root()) {
                global[j] = yaw(root_yaw(t)) * euler(a);
                continue;
            }
            global[j] = global[parent[j]] * euler(a);
            pose.row(j) = pose.row(parent[j]) + (global[j] * offsets.row(j).transpose()).transpose();
        }
        seq.set_frame(t, pose);
    }
    return seq;
}

Pose3 random_pose(const SkeletonTopology& topo, Rng& rng)
{
    const int k = topo.num_keypoints();
    Eigen::MatrixX3d angles = Eigen::MatrixX3d::Zero(k, 3);
    for (int j = 0; j < k; ++j) {
        if (j == topo.root()) {
            angles.row(j) << rng.uniform(-0.3, 0.3), 0.0, rng.uniform(-0.3, 0.3);
            continue;
        }
        const JointSpec& s = spec_for(topo, j);
        for (int c = 0; c < 3; ++c) angles(j, c) = rng.uniform(s.lo(c), s.hi(c));
    }
    SyntheticMotionConfig cfg;
    const Eigen::MatrixX3d offsets = sample_body(topo, cfg, rng);
    Eigen::VectorXd yaw_angle(1);
    yaw_angle(0) = rng.uniform(-M_PI, M_PI);
    return forward_kinematics(topo, offsets, angles, yaw_angle).frame(0);
}

PoseSequence2D project_to_crop(const PoseSequence3D& pose, double crop_mm)
{
    PoseSequence2D out = orthographic_project(pose);
    out.coords = (out.coords.array() / crop_mm + 0.5).matrix();
    return out;
}

namespace {

// Joint-angle walk at unit speed, n_steps long; returns n_steps x (K*3)
// angles and n_steps yaw values.
void angle_walk(const SkeletonTopology& topo, const SyntheticMotionConfig& cfg, int n_steps, Rng& rng,
                Eigen::MatrixXd& angles, Eigen::VectorXd& yaw_track)
{
    const int k = topo.num_keypoints();
    Eigen::VectorXd lo = Eigen::VectorXd::Zero(3 * k);
    Eigen::VectorXd hi = Eigen::VectorXd::Zero(3 * k);
    for (int j = 0; j < k; ++j) {
        if (j == topo.root()) {
            lo.segment<3>(3 * j) << -0.2, 0.0, -0.15;
            hi.segment<3>(3 * j) << 0.2, 0.0, 0.15;
            continue;
        }
        const JointSpec& s = spec_for(topo, j);
        lo.segment<3>(3 * j) = s.lo;
        hi.segment<3>(3 * j) = s.hi;
    }
    const Eigen::VectorXd mid = 0.5 * (lo + hi);
    Eigen::VectorXd theta(3 * k);
    for (int i = 0; i < 3 * k; ++i) theta(i) = rng.uniform(lo(i), hi(i));
    Eigen::VectorXd vel = Eigen::VectorXd::Zero(3 * k);
    double heading = rng.uniform(-M_PI, M_PI);
    double heading_vel = 0.0;

    angles.resize(n_steps, 3 * k);
    yaw_track.resize(n_steps);
    for (int s = 0; s < n_steps; ++s) {
        angles.row(s) = theta.transpose();
        yaw_track(s) = heading;
        for (int i = 0; i < 3 * k; ++i) {
            const double range = hi(i) - lo(i);
            if (range <= 0.0) continue;
            vel(i) = cfg.velocity_decay * vel(i) + cfg.angle_step * range * rng.normal() -
                     cfg.center_pull * (theta(i) - mid(i));
            theta(i) += vel(i);
            if (theta(i) < lo(i)) {
                theta(i) = 2.0 * lo(i) - theta(i);
                vel(i) = -vel(i);
            }
            if (theta(i) > hi(i)) {
                theta(i) = 2.0 * hi(i) - theta(i);
                vel(i) = -vel(i);
            }
            theta(i) = std::clamp(theta(i), lo(i), hi(i));
        }
        heading_vel = cfg.velocity_decay * heading_vel + 0.2 * cfg.angle_step * rng.normal();
        heading += heading_vel;
    }
}

std::string speed_label(double s)
{
    std::ostringstream os;
    os << "speed_" << s;
    return os.str();
}

}  // namespace

std::vector<SyntheticSequence> generate_synthetic(const SyntheticMotionConfig& cfg, const SkeletonTopology& topo)
{
    cfg.validate();
    const int k = topo.num_keypoints();
    Rng master(cfg.seed);
    std::vector<Eigen::MatrixX3d> bodies;
    for (int s = 0; s < cfg.num_subjects; ++s) {
        Rng r = master.split(1000 + s);
        bodies.push_back(sample_body(topo, cfg, r));
    }

    std::vector<SyntheticSequence> out;
    out.reserve(cfg.num_sequences);
    for (int n = 0; n < cfg.num_sequences; ++n) {
        Rng rng = master.split(static_cast<std::uint64_t>(n));
        SyntheticSequence seq;
        seq.subject = n % cfg.num_subjects;
        seq.speed = cfg.speed_multipliers[rng.uniform_int(0, static_cast<int>(cfg.speed_multipliers.size()) - 1)];
        seq.action = speed_label(seq.speed);

        // Time warp: frame t samples the unit-speed walk at t * speed.
        const int n_steps = static_cast<int>(std::ceil((cfg.frames - 1) * seq.speed)) + 2;
        Eigen::MatrixXd walk;
        Eigen::VectorXd walk_yaw;
        angle_walk(topo, cfg, n_steps, rng, walk, walk_yaw);
        Eigen::MatrixX3d angles(static_cast<Eigen::Index>(cfg.frames) * k, 3);
        Eigen::VectorXd root_yaw(cfg.frames);
        for (int t = 0; t < cfg.frames; ++t) {
            const double pos = t * seq.speed;
            const int i0 = std::min(static_cast<int>(pos), n_steps - 2);
            const double f = pos - i0;
            const Eigen::RowVectorXd a = (1.0 - f) * walk.row(i0) + f * walk.row(i0 + 1);
            for (int j = 0; j < k; ++j) angles.row(t * k + j) = a.segment<3>(3 * j);
            root_yaw(t) = (1.0 - f) * walk_yaw(i0) + f * walk_yaw(i0 + 1);
        }
        const PoseSequence3D body_motion = forward_kinematics(topo, bodies[seq.subject], angles, root_yaw);

        for (std::size_t v = 0; v < cfg.view_yaws_deg.size(); ++v) {
            SyntheticView view;
            view.crop_mm = cfg.crop_mm;
            view.rotation = yaw(cfg.view_yaws_deg[v] * M_PI / 180.0);
            view.gt = rotate_pose(body_motion, view.rotation);
            const SequenceVisibility vis = sequence_visibility(view.gt, topo);
            view.gt.visibility = vis.hard;
            view.clean2d = project_to_crop(view.gt, cfg.crop_mm);

            view.det = view.clean2d;
            Rng vr = rng.split(100 + v);
            for (int i = 0; i < cfg.frames * k; ++i) {
                const bool visible = vis.hard[i] != 0;
                if (!visible && cfg.mask_occluded) {
                    view.det.set_masked(i / k, i % k);
                    continue;
                }
                const double conf = visible ? vr.uniform(cfg.visible_conf_min, 1.0)
                                            : vr.uniform(cfg.occluded_conf_min, cfg.occluded_conf_max);
                const double sd = cfg.noise_px * (1.0 + 3.0 * (1.0 - conf)) / cfg.crop_px;
                view.det.coords(i, 0) += sd * vr.normal();
                view.det.coords(i, 1) += sd * vr.normal();
                view.det.confidence(i) = conf;
            }
            seq.views.push_back(std::move(view));
        }
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<std::uint8_t> corrupt_detections(PoseSequence2D& det, const SkeletonTopology& topo,
                                             const CorruptionConfig& cfg, Rng& rng)
{
    const int k = det.num_keypoints;
    std::vector<int> mirror(k, -1);
    for (const auto& [a, b] : topo.mirror_pairs()) {
        mirror[a] = b;
        mirror[b] = a;
    }
    const PoseSequence2D clean = det;
    std::vector<std::uint8_t> corrupted(det.mask.size(), 0);
    for (int t = 0; t < det.num_frames; ++t) {
        for (int j = 0; j < k; ++j) {
            const int i = det.index(t, j);
            if (det.mask[i]) continue;
            if (rng.bernoulli(cfg.fraction)) {
                corrupted[i] = 1;
                const bool swap = mirror[j] >= 0 && !clean.mask[det.index(t, mirror[j])] && rng.bernoulli(0.5);
                Eigen::RowVector2d target = clean.coords.row(i);
                if (swap) {
                    target = clean.coords.row(det.index(t, mirror[j]));
                } else {
                    const double angle = rng.uniform(-M_PI, M_PI);
                    const double mag = rng.uniform(cfg.min_px, cfg.max_px) / cfg.crop_px;
                    target += mag * Eigen::RowVector2d(std::cos(angle), std::sin(angle));
                }
                det.coords.row(i) = target;
                det.confidence(i) = rng.uniform(cfg.conf_min, cfg.conf_max);
            } else {
                const double sd = cfg.clean_noise_px / cfg.crop_px;
                det.coords(i, 0) = clean.coords(i, 0) + sd * rng.normal();
                det.coords(i, 1) = clean.coords(i, 1) + sd * rng.normal();
                det.confidence(i) = rng.uniform(cfg.clean_conf_min, 1.0);
            }
        }
    }
    return corrupted;
}

}  // namespace mspose
