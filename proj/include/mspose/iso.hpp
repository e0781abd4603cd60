#pragma once

#include "mspose/autodiff.hpp"
#include "mspose/discriminator.hpp"
#include "mspose/exec.hpp"
#include "mspose/pose.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace mspose {

enum class WeightMode { constant, confidence, calibrated, hard_threshold, soft_threshold };

WeightMode parse_weight_mode(const std::string& name);
std::string to_string(WeightMode mode);

// Monotone map from raw to calibrated confidence: linear between knots,
// constant beyond the outer ones. No knots is the identity.
struct Calibration {
    std::vector<double> conf;   // strictly increasing
    std::vector<double> value;  // non-decreasing, within [0, 1]

    double operator()(double c) const;
    bool is_identity() const { return conf.empty(); }
    // Throws ConfigError.
    void validate() const;
};

// Isotonic regression of correctness on confidence (pool adjacent
// violators); knots sit at the mean confidence of each pooled block. Throws
// InvalidInput for an empty or mismatched set and DegenerateInput when every
// label is the same.
Calibration fit_calibration(const std::vector<double>& conf, const std::vector<int>& correct);
// Same, but returns the identity map instead of throwing on degenerate or
// absent validation data. `fell_back` reports whether that happened.
Calibration fit_calibration_or_identity(const std::vector<double>& conf, const std::vector<int>& correct,
                                        bool* fell_back = nullptr);

// Per-keypoint re-projection weight in [0, 1]. `l2d` is the re-projection
// distance in heatmap pixels. Throws ConfigError when sigma <= 0.
double reprojection_weight(WeightMode mode, double conf, double calibrated, double l2d, double sigma,
                           double threshold);

struct IsoConfig {
    WeightMode mode = WeightMode::soft_threshold;
    double sigma = 1.0;
    double threshold = 0.7;
    double lambda1 = 0.1;
    double lambda2 = 0.05;
    int iterations = 150;
    double step_size = 0.005;
    double momentum = 0.9;
    int refit_every = 25;
    // Heatmap resolution: one L2d unit is 1/heatmap_size of the crop.
    double heatmap_size = 64.0;
    int window_len = 64;
    Calibration calibration;

    // Throws ConfigError.
    void validate() const;
};

// Maps crop-normalized detections u to root-relative mm: D = scale * u + shift_t.
struct ScaleAlignment {
    double scale = 1.0;                 // mm per normalized unit
    Eigen::MatrixX2d shift;             // T x 2, mm
};

// Weighted least-squares fit of one scale and per-frame shifts between the
// detections and the projection of `pose`.
ScaleAlignment fit_alignment(const PoseSequence3D& pose, const PoseSequence2D& det, const Eigen::VectorXd& weights);

// Detections expressed in mm under an alignment, (T*K) x 2.
Eigen::MatrixX2d aligned_detections(const PoseSequence2D& det, const ScaleAlignment& align);

// Base weight of every entry for the mode (distance-independent part; the
// soft mode's base is c*). Masked entries weigh 0.
Eigen::VectorXd base_weights(const PoseSequence2D& det, const IsoConfig& cfg);

// Current per-entry weights for `pose`.
Eigen::VectorXd current_weights(const PoseSequence3D& pose, const PoseSequence2D& det, const ScaleAlignment& align,
                                const IsoConfig& cfg);

// L_rep = sum_k w_k |Orth(X_k) - D_k|^2 (mm^2) with fixed weights.
ad::Var rep_loss(ad::Tape& tape, ad::Var coords, const Eigen::MatrixX2d& det_mm, const Eigen::VectorXd& weights);
double rep_loss(const PoseSequence3D& pose, const PoseSequence2D& det, const ScaleAlignment& align,
                const IsoConfig& cfg);

struct IsoTerms {
    ad::Var total, rep, gen, smooth;
};
// L_ISO = L_rep + lambda1 * L_gen + lambda2 * sum_t |X_{t+1} - X_t|^2.
IsoTerms iso_loss(ad::Tape& tape, ad::Var coords, int frames, const Eigen::MatrixX2d& det_mm,
                  const Eigen::VectorXd& weights, const PoseScorer* scorer, const IsoConfig& cfg);
double iso_loss(const PoseSequence3D& pose, const PoseSequence2D& det, const PoseScorer* scorer,
                const IsoConfig& cfg);

struct IsoTraceRow {
    int iteration = 0;
    double rep = 0.0;
    double gen = 0.0;
    double smooth = 0.0;
    double total = 0.0;
    double mpjpe = -1.0;  // -1 without ground truth
};

struct IsoResult {
    PoseSequence3D pose;
    std::vector<IsoTraceRow> trace;
    bool diverged = false;
};

// Gradient descent with momentum on the 3D coordinates, the root keypoint
// held fixed. On divergence (loss above 10x the start) the best pose seen is
// returned with `diverged` set.
IsoResult refine(const PoseSequence3D& initial, const PoseSequence2D& det, const PoseScorer* scorer,
                 const IsoConfig& cfg, int root, const PoseSequence3D* gt = nullptr);

// Splits the sequence into consecutive windows of cfg.window_len frames and
// refines them independently. Traces are summed over windows per iteration.
IsoResult refine_sequence(const PoseSequence3D& initial, const PoseSequence2D& det, const PoseScorer* scorer,
                          const IsoConfig& cfg, int root, const PoseSequence3D* gt = nullptr,
                          Exec exec = Exec::parallel);

}  // namespace mspose
