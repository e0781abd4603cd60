#pragma once

#include "mspose/augment.hpp"
#include "mspose/discriminator.hpp"
#include "mspose/exec.hpp"
#include "mspose/losses.hpp"
#include "mspose/optim.hpp"
#include "mspose/pose.hpp"
#include "mspose/skeleton.hpp"
#include "mspose/synthetic.hpp"
#include "mspose/tcn.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace mspose {

// One source sequence. Sequences without 3D labels (gt empty) train through
// the 2D re-projection loss only.
struct TrainingClip {
    PoseSequence2D input;  // network input (detections)
    PoseSequence2D gt2d;   // 2D ground truth, crop-normalized
    PoseSequence3D gt;     // root-relative 3D ground truth or empty
    double crop_mm = 2000.0;
    // Index of the clip holding the same motion seen from another view, -1 if none.
    int partner = -1;
    Eigen::Matrix3d to_partner = Eigen::Matrix3d::Identity();  // R_{this -> partner}
    std::string action;

    bool has_3d() const { return gt.num_frames > 0; }
};

struct TrainingSet {
    std::vector<TrainingClip> clips;
    // (clip index, first frame) of every training clip window.
    std::vector<std::pair<int, int>> windows;
    int clip_len = 0;
};

// Every view of every sequence becomes a clip; views of one sequence are
// partners. Windows of clip_len frames are taken every `step` frames.
TrainingSet make_training_set(const std::vector<SyntheticSequence>& data, int clip_len, int step,
                              bool keep_3d = true);

struct TrainConfig {
    int steps = 1000;
    int batch = 16;
    OptimizerConfig optimizer{OptimizerKind::sgd, 2e-6, 0.9, 0.9, 0.999, 1e-8, 0.0};
    // The learning rate decays exponentially to lr * final_lr_fraction.
    double final_lr_fraction = 0.1;
    int pred_frames = 2;  // consecutive frames predicted per window
    LossWeights weights;
    bool use_multiview = true;
    bool use_2d = true;
    bool augment = false;
    OcclusionConfig occlusion;
    // Adversarial term; needs a discriminator and weights.w3 > 0.
    OptimizerConfig disc_optimizer{OptimizerKind::adam, 1e-3};
    int disc_scaler_windows = 256;
    std::uint64_t seed = 0;
    Exec exec = Exec::parallel;

    void validate() const;
};

struct TrainReport {
    std::vector<double> loss;  // batch mean of the total loss, per step
    std::vector<double> l3d;
    std::vector<double> lmv;
    std::vector<double> l2d;
    std::vector<double> lgen;
    std::vector<double> disc_loss;
};

// Gradients of the batch-mean loss w.r.t. every model parameter, summed in
// sample order so that serial and parallel runs agree bit for bit.
struct BatchResult {
    std::vector<Eigen::MatrixXd> grads;
    LossComponents mean;
    double loss = 0.0;
    std::vector<PoseSequence3D> predictions;  // per sample, pred_frames long
    std::vector<Eigen::Matrix3d> rotations;   // per sample rotation used by L'_gen
    std::vector<int> source_clip;
    std::vector<int> source_start;            // first predicted frame in the clip
};

struct BatchItem {
    int window = 0;
    std::uint64_t seed = 0;
};

BatchResult batch_gradients(const TcnModel& model, const TrainingSet& data, const std::vector<BatchItem>& items,
                            const TrainConfig& cfg, const SkeletonTopology& topo, const Discriminator* disc,
                            Exec exec);

// Trains in place. When the loss turns non-finite the model is restored to
// the last good parameters and TrainingDiverged is thrown.
TrainReport train(TcnModel& model, const TrainingSet& data, const TrainConfig& cfg, const SkeletonTopology& topo,
                  Discriminator* disc = nullptr);

// `count` random ground-truth windows of `frames` frames, each rotated by a
// sampled RotationAugment.
std::vector<PoseSequence3D> sample_real_windows(const TrainingSet& data, int frames, int count, Rng& rng);

}  // namespace mspose
