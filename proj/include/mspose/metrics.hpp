#pragma once

#include "mspose/pose.hpp"
#include "mspose/skeleton.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mspose {

// All metrics take equally shaped sequences and throw InvalidInput otherwise.

// Mean Euclidean distance over frames and joints (mm).
double mpjpe(const PoseSequence3D& pred, const PoseSequence3D& gt);
// MPJPE after a per-frame similarity (Procrustes) alignment of pred onto gt.
double p_mpjpe(const PoseSequence3D& pred, const PoseSequence3D& gt);
// Fraction of joints whose error is within `radius_mm` (inclusive, so a zero
// radius counts exact matches).
double pck(const PoseSequence3D& pred, const PoseSequence3D& gt, double radius_mm = 150.0);

struct MaeResult {
    double radians = 0.0;
    int skipped = 0;  // zero-length bones left out of the mean
};
// Mean angle between predicted and true bone directions.
MaeResult mae(const PoseSequence3D& pred, const PoseSequence3D& gt, const SkeletonTopology& topo);

struct MetricRow {
    std::string action;
    int frames = 0;
    double mpjpe_mm = 0.0;
    double p_mpjpe_mm = 0.0;
    double pck150 = 0.0;
    double mae_radians = 0.0;
};

struct EvalReport {
    MetricRow overall;
    std::vector<MetricRow> per_action;  // sorted by action name
    int skipped_bones = 0;
};

// `actions` is empty or one label per frame.
EvalReport evaluate(const PoseSequence3D& pred, const PoseSequence3D& gt, const SkeletonTopology& topo,
                    const std::vector<std::string>& actions = {});

// Plain text: one "key value" line per overall metric, then an action table.
void write_report(std::ostream& out, const EvalReport& report);

}  // namespace mspose
