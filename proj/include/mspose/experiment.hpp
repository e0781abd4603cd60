#pragma once

#include "mspose/config.hpp"
#include "mspose/discriminator.hpp"
#include "mspose/iso.hpp"
#include "mspose/metrics.hpp"
#include "mspose/synthetic.hpp"
#include "mspose/tcn.hpp"
#include "mspose/train.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mspose {

struct ExperimentConfig {
    std::filesystem::path topology;  // empty: built-in 17-keypoint skeleton
    SyntheticMotionConfig data;
    int eval_sequences = 4;
    // Extra random occlusion on the evaluation detections.
    bool eval_occlusion = true;
    OcclusionConfig eval_occlusion_cfg;
    int clip_step = 8;
    TcnConfig tcn;
    TrainConfig train;
    DiscriminatorConfig disc;
    bool run_iso = true;
    IsoConfig iso;
    // "energy" or "discriminator" (needs loss.w3 > 0).
    std::string iso_scorer = "energy";
    // Fit the ISO confidence calibration on a held-out validation set.
    bool calibrate = true;
    int calibration_sequences = 2;
    double energy_ridge = 1e-3;
    double energy_floor = 1e-2;
    bool ladder = false;
    int ladder_seeds = 3;
    std::uint64_t seed = 0;

    void validate() const;
};

// Reads every section (synth., tcn., train., loss., occlusion., disc., iso.,
// eval_occlusion., experiment.) and rejects unknown keys.
ExperimentConfig read_experiment(const Config& c);
Config write_experiment(const ExperimentConfig& cfg);

SkeletonTopology experiment_topology(const ExperimentConfig& cfg);

// Independent streams derived from the experiment seed.
enum class Stream : std::uint64_t {
    train_data = 1,
    eval_data,
    eval_occlusion,
    model_init,
    disc_init,
    training,
    calibration,
};
std::uint64_t stream_seed(std::uint64_t seed, Stream s);

struct EvalSet {
    std::vector<PoseSequence3D> gt;
    std::vector<PoseSequence2D> det;
    std::vector<std::string> actions;  // per sequence
};
// First view of freshly generated sequences, with the optional extra occlusion.
EvalSet make_eval_set(const ExperimentConfig& cfg, const SkeletonTopology& topo, std::uint64_t seed);

// Ground-truth windows of every training view, window_len frames every
// window_len / 2 frames.
KcsEnergyModel fit_energy(const ExperimentConfig& cfg, const SkeletonTopology& topo,
                          const std::vector<SyntheticSequence>& data);

// Validation pairs for the confidence calibration: a detection counts as
// correct when it lies within one heatmap cell of the clean projection.
void calibration_pairs(const PoseSequence2D& det, const PoseSequence2D& clean, double heatmap_size,
                       std::vector<double>& conf, std::vector<int>& correct);

struct TrainedModel {
    TcnModel model;
    std::optional<Discriminator> disc;
    TrainReport report;
};
TrainedModel train_model(const ExperimentConfig& cfg, const SkeletonTopology& topo,
                         const std::vector<SyntheticSequence>& data, std::uint64_t seed);

struct LadderRung {
    std::string name;
    std::vector<double> mpjpe;  // per seed
    double mean = 0.0;
    double sd = 0.0;            // sample standard deviation
};
// Base (one stride, raw coordinates, no multi-view, no adversarial term, no
// augmentation, no ISO) and then each feature switched on in turn. Every seed
// shares its data and evaluation set across rungs.
std::vector<LadderRung> run_ladder(const ExperimentConfig& cfg, std::ostream* log = nullptr);
ExperimentConfig ladder_rung_config(const ExperimentConfig& full, int rung);
const std::vector<std::string>& ladder_rung_names();
// next may exceed prev by at most the larger of the two seed spreads.
bool ladder_step_ok(const LadderRung& prev, const LadderRung& next);

struct ExperimentResult {
    EvalReport baseline;
    std::optional<EvalReport> refined;
    std::vector<LadderRung> ladder;
};

// Runs synth -> energy -> train -> infer -> iso -> eval (-> ladder) into
// out_dir and finishes with manifest.txt. On a stage failure a manifest with
// the failure record is written and the error rethrown.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                std::ostream* log = nullptr);

}  // namespace mspose
