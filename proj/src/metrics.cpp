#include "mspose/metrics.hpp"

#include "mspose/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

namespace mspose {

namespace {

void check_pair(const PoseSequence3D& pred, const PoseSequence3D& gt)
{
    if (pred.num_frames != gt.num_frames || pred.num_keypoints != gt.num_keypoints ||
        pred.coords.rows() != gt.coords.rows())
        throw InvalidInput("metrics: prediction and ground truth differ in shape");
    if (gt.num_frames == 0 || gt.num_keypoints == 0) throw InvalidInput("metrics: empty sequence");
    if (!pred.all_finite() || !gt.all_finite()) throw InvalidInput("metrics: non-finite coordinates");
}

}  // namespace

double mpjpe(const PoseSequence3D& pred, const PoseSequence3D& gt)
{
    check_pair(pred, gt);
    return (pred.coords - gt.coords).rowwise().norm().mean();
}

double p_mpjpe(const PoseSequence3D& pred, const PoseSequence3D& gt)
{
    check_pair(pred, gt);
    double total = 0.0;
    for (int t = 0; t < gt.num_frames; ++t) {
        const SimilarityFit fit = procrustes_align(pred.frame(t), gt.frame(t));
        total += (fit.aligned - gt.frame(t)).rowwise().norm().mean();
    }
    return total / gt.num_frames;
}

double pck(const PoseSequence3D& pred, const PoseSequence3D& gt, double radius_mm)
{
    check_pair(pred, gt);
    if (!(radius_mm >= 0.0)) throw InvalidInput("pck: radius must be >= 0");
    const Eigen::VectorXd err = (pred.coords - gt.coords).rowwise().norm();
    return static_cast<double>((err.array() <= radius_mm).count()) / static_cast<double>(err.size());
}

MaeResult mae(const PoseSequence3D& pred, const PoseSequence3D& gt, const SkeletonTopology& topo)
{
    check_pair(pred, gt);
    if (gt.num_keypoints != topo.num_keypoints()) throw TopologyMismatch("mae: keypoint count differs from topology");
    MaeResult r;
    double total = 0.0;
    long used = 0;
    for (int t = 0; t < gt.num_frames; ++t) {
        for (const Bone& b : topo.bones()) {
            const Eigen::Vector3d p = pred.point(t, b.child) - pred.point(t, b.parent);
            const Eigen::Vector3d g = gt.point(t, b.child) - gt.point(t, b.parent);
            const double np = p.norm(), ng = g.norm();
            if (np < 1e-9 || ng < 1e-9) {
                ++r.skipped;
                continue;
            }
            total += std::acos(std::clamp(p.dot(g) / (np * ng), -1.0, 1.0));
            ++used;
        }
    }
    r.radians = used > 0 ? total / static_cast<double>(used) : 0.0;
    return r;
}

namespace {

MetricRow row_for(const PoseSequence3D& pred, const PoseSequence3D& gt, const SkeletonTopology& topo,
                  const std::string& action, int* skipped)
{
    MetricRow row;
    row.action = action;
    row.frames = gt.num_frames;
    row.mpjpe_mm = mpjpe(pred, gt);
    row.p_mpjpe_mm = p_mpjpe(pred, gt);
    row.pck150 = pck(pred, gt, 150.0);
    const MaeResult m = mae(pred, gt, topo);
    row.mae_radians = m.radians;
    if (skipped) *skipped = m.skipped;
    return row;
}

PoseSequence3D gather_frames(const PoseSequence3D& pose, const std::vector<int>& frames)
{
    PoseSequence3D out = PoseSequence3D::zeros(static_cast<int>(frames.size()), pose.num_keypoints);
    for (std::size_t i = 0; i < frames.size(); ++i) out.set_frame(static_cast<int>(i), pose.frame(frames[i]));
    return out;
}

}  // namespace

EvalReport evaluate(const PoseSequence3D& pred, const PoseSequence3D& gt, const SkeletonTopology& topo,
                    const std::vector<std::string>& actions)
{
    check_pair(pred, gt);
    if (!actions.empty() && static_cast<int>(actions.size()) != gt.num_frames)
        throw InvalidInput("evaluate: action labels must cover every frame");
    EvalReport report;
    report.overall = row_for(pred, gt, topo, "all", &report.skipped_bones);
    std::map<std::string, std::vector<int>> groups;
    for (int t = 0; t < static_cast<int>(actions.size()); ++t) groups[actions[t]].push_back(t);
    for (const auto& [name, frames] : groups)
        report.per_action.push_back(row_for(gather_frames(pred, frames), gather_frames(gt, frames), topo, name, nullptr));
    return report;
}

void write_report(std::ostream& out, const EvalReport& report)
{
    const auto flags = out.flags();
    const auto precision = out.precision();
    out << std::setprecision(6) << std::fixed;
    out << "frames " << report.overall.frames << "\n"
        << "mpjpe_mm " << report.overall.mpjpe_mm << "\n"
        << "p_mpjpe_mm " << report.overall.p_mpjpe_mm << "\n"
        << "pck150 " << report.overall.pck150 << "\n"
        << "mae_radians " << report.overall.mae_radians << "\n"
        << "skipped_bones " << report.skipped_bones << "\n";
    if (!report.per_action.empty()) {
        out << "\naction,frames,mpjpe_mm,p_mpjpe_mm,pck150,mae_radians\n";
        for (const auto& r : report.per_action)
            out << r.action << "," << r.frames << "," << r.mpjpe_mm << "," << r.p_mpjpe_mm << "," << r.pck150 << ","
                << r.mae_radians << "\n";
    }
    out.flags(flags);
    out.precision(precision);
}

}  // namespace mspose
