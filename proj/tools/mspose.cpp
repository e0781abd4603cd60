#include "mspose/augment.hpp"
#include "mspose/checkpoint.hpp"
#include "mspose/config.hpp"
#include "mspose/dataset.hpp"
#include "mspose/errors.hpp"
#include "mspose/experiment.hpp"
#include "mspose/kcs.hpp"
#include "mspose/manifest.hpp"
#include "mspose/metrics.hpp"
#include "mspose/pose_io.hpp"
#include "mspose/visibility.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>

using namespace mspose;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
};

// Keys outside these sections are typos; the sections a command does not use
// are ignored so one file can drive every command.
const char* const kSections[] = {"io.",        "synth.",     "tcn.",        "train.",          "loss.",
                                 "occlusion.", "disc.",      "adversarial.", "iso.",           "corruption.",
                                 "eval_occlusion.", "experiment.", "visibility.", "features."};

Config load_config(const Common& o)
{
    Config c;
    if (!o.config.empty()) c = Config::load(o.config);
    for (const auto& [key, value] : c.values()) {
        bool known = false;
        for (const char* s : kSections) known = known || key.rfind(s, 0) == 0;
        if (!known) throw ConfigError("unknown config key " + key);
    }
    return c;
}

fs::path require_path(const Config& c, const std::string& key)
{
    const fs::path p = c.require(key);
    if (!fs::exists(p)) throw ConfigError(key + ": " + p.string() + " does not exist");
    return p;
}

SkeletonTopology topology(const Config& c)
{
    const std::string path = c.get("io.topology", std::string());
    if (path.empty()) return SkeletonTopology::h36m17();
    return SkeletonTopology::load(require_path(c, "io.topology"));
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<PoseSequence3D> gt_windows(const std::vector<SyntheticSequence>& data, int len)
{
    std::vector<PoseSequence3D> out;
    for (const auto& s : data)
        for (const auto& v : s.views)
            for (int f = 0; f + len <= v.gt.num_frames; f += std::max(1, len / 2)) out.push_back(v.gt.slice(f, len));
    return out;
}

void cmd_synth_gen(const Common& o, std::vector<std::string>& status)
{
    const Config c = load_config(o);
    SyntheticMotionConfig sc = read_synthetic(c);
    sc.seed = o.seed;
    const SkeletonTopology topo = topology(c);
    const auto data = generate_synthetic(sc, topo);
    save_dataset(o.out, data);
    status.push_back("sequences " + std::to_string(data.size()));
}

void cmd_visibility(const Common& o, std::vector<std::string>& status)
{
    const Config c = load_config(o);
    const SkeletonTopology topo = topology(c);
    VisibilityOptions opts;
    opts.sharpness_per_mm = c.get("visibility.sharpness_per_mm", opts.sharpness_per_mm);
    const PoseFile3D in = load_pose3d(require_path(c, "io.pose3d"));
    if (in.pose.num_keypoints != topo.num_keypoints()) throw TopologyMismatch("visibility: keypoint count mismatch");
    std::ofstream out(fs::path(o.out) / "visibility.csv");
    out << "frame,keypoint,hard,soft,occluder\n";
    int occluded = 0;
    for (int t = 0; t < in.pose.num_frames; ++t) {
        const VisibilityReport r = frame_visibility(in.pose.frame(t), topo, opts);
        for (int k = 0; k < in.pose.num_keypoints; ++k) {
            const std::string part = r.occluder[k] < 0 ? "" : topo.parts()[r.occluder[k]].name;
            out << t << "," << k << "," << int(r.hard[k]) << "," << num(r.soft[k]) << "," << part << "\n";
            occluded += r.hard[k] == 0;
        }
    }
    status.push_back("occluded " + std::to_string(occluded));
}

void cmd_augment(const Common& o, std::vector<std::string>& status)
{
    const Config c = load_config(o);
    const SkeletonTopology topo = topology(c);
    OcclusionConfig oc = read_occlusion(c);
    const PoseFile2D in = load_pose2d(require_path(c, "io.pose2d"));
    Rng rng(o.seed);
    const PoseSequence2D aug = apply_occlusion(in.pose, oc, topo, rng);
    save_pose2d(fs::path(o.out) / "augmented.csv", aug, in.actions);
    int masked = 0;
    for (auto m : aug.mask) masked += m != 0;
    status.push_back("masked " + std::to_string(masked));
}

void cmd_features(const Common& o, std::vector<std::string>& status)
{
    const Config c = load_config(o);
    const SkeletonTopology topo = topology(c);
    const int interval = c.get("features.interval", 1);
    const PoseFile3D in = load_pose3d(require_path(c, "io.pose3d"));
    const Eigen::MatrixXd f = discriminator_features(in.pose, topo, interval);
    std::ofstream out(fs::path(o.out) / "features.csv");
    for (Eigen::Index t = 0; t < f.rows(); ++t) {
        for (Eigen::Index j = 0; j < f.cols(); ++j) out << (j ? "," : "") << num(f(t, j));
        out << "\n";
    }
    status.push_back("feature_dim " + std::to_string(f.cols()));
}

ExperimentConfig stage_config(const Config& c)
{
    ExperimentConfig e;
    e.tcn = read_tcn(c);
    e.train = read_train(c);
    e.disc = read_discriminator(c);
    e.clip_step = c.get("experiment.clip_step", e.clip_step);
    return e;
}

void cmd_train(const Common& o, std::vector<std::string>& status)
{
    const Config c = load_config(o);
    const SkeletonTopology topo = topology(c);
    const ExperimentConfig e = stage_config(c);
    const auto data = load_dataset(require_path(c, "io.dataset"));
    const TrainedModel tm = train_model(e, topo, data, o.seed);
    Checkpoint ckpt;
    put_tcn(ckpt, tm.model);
    if (tm.disc) put_discriminator(ckpt, *tm.disc);
    save_checkpoint(fs::path(o.out) / "model.ckpt", ckpt);
    std::ofstream out(fs::path(o.out) / "train_log.csv");
    out << "step,loss,l3d,lmv,l2d,lgen\n";
    for (std::size_t i = 0; i < tm.report.loss.size(); ++i)
        out << i << "," << num(tm.report.loss[i]) << "," << num(tm.report.l3d[i]) << "," << num(tm.report.lmv[i])
            << "," << num(tm.report.l2d[i]) << "," << num(tm.report.lgen[i]) << "\n";
    status.push_back("final_loss " + num(tm.report.loss.empty() ? 0.0 : tm.report.loss.back()));
}

void cmd_disc_train(const Common& o, std::vector<std::string>& status)
{
    const Config c = load_config(o);
    const SkeletonTopology topo = topology(c);
    DiscriminatorConfig dc = read_discriminator(c);
    AdversarialConfig ac = read_adversarial(c);
    ac.seed = Rng(o.seed).split(2).next();
    const int len = c.get("tcn.window_len", 64);
    const auto data = load_dataset(require_path(c, "io.dataset"));
    const auto real = gt_windows(data, len);
    if (real.empty()) throw InvalidInput("disc-train: dataset has no window of " + std::to_string(len) + " frames");

    // Fakes are the lifting model's predictions on the same windows.
    const TcnModel model = get_tcn(load_checkpoint(require_path(c, "io.model")));
    std::vector<PoseSequence3D> fake;
    for (const auto& s : data)
        for (const auto& v : s.views) {
            const PoseSequence3D pred = model.infer_sequence(v.det);
            for (int f = 0; f + len <= pred.num_frames; f += std::max(1, len / 2)) fake.push_back(pred.slice(f, len));
        }

    Discriminator disc(dc, topo, Rng(o.seed).split(1).next());
    disc.fit_scaler(real);
    const AdversarialReport rep = train_adversarial(disc, fake, real, ac);
    const KcsEnergyModel energy =
        KcsEnergyModel::fit(real, topo, dc.interval, c.get("experiment.energy_ridge", 1e-3),
                            c.get("experiment.energy_floor", 1e-2));
    Checkpoint ckpt;
    put_discriminator(ckpt, disc);
    put_energy(ckpt, energy);
    save_checkpoint(fs::path(o.out) / "disc.ckpt", ckpt);
    std::ofstream out(fs::path(o.out) / "disc_log.csv");
    out << "step,bce\n";
    for (std::size_t i = 0; i < rep.loss.size(); ++i) out << i << "," << num(rep.loss[i]) << "\n";
    status.push_back("final_bce " + num(rep.loss.empty() ? 0.0 : rep.loss.back()));
}

void cmd_disc_score(const Common& o, std::vector<std::string>& status)
{
    const Config c = load_config(o);
    const SkeletonTopology topo = topology(c);
    const Checkpoint ckpt = load_checkpoint(require_path(c, "io.scorer"));
    const PoseFile3D in = load_pose3d(require_path(c, "io.pose3d"));
    const int len = c.get("tcn.window_len", 64);
    std::optional<Discriminator> disc;
    std::optional<KcsEnergyModel> energy;
    if (has_discriminator(ckpt)) disc = get_discriminator(ckpt, topo);
    if (has_energy(ckpt)) energy = get_energy(ckpt, topo);
    if (!disc && !energy) throw InvalidInput("disc-score: checkpoint holds no scorer");
    std::ofstream out(fs::path(o.out) / "scores.csv");
    out << "first_frame,frames,disc_score,energy\n";
    int windows = 0;
    for (int f = 0; f < in.pose.num_frames; f += len) {
        const PoseSequence3D w = in.pose.slice(f, std::min(len, in.pose.num_frames - f));
        if (disc && w.num_frames < disc->min_frames()) break;
        if (energy && w.num_frames < energy->min_frames()) break;
        out << f << "," << w.num_frames << "," << (disc ? num(disc->score(w)) : "") << ","
            << (energy ? num(energy->energy(w)) : "") << "\n";
        ++windows;
    }
    status.push_back("windows " + std::to_string(windows));
}

void cmd_infer(const Common& o, std::vector<std::string>& status)
{
    const Config c = load_config(o);
    const TcnModel model = get_tcn(load_checkpoint(require_path(c, "io.model")));
    const PoseFile2D in = load_pose2d(require_path(c, "io.pose2d"));
    if (in.pose.num_keypoints != model.num_keypoints()) throw TopologyMismatch("infer: keypoint count mismatch");
    const PoseSequence3D pred = model.infer_sequence(in.pose);
    save_pose3d(fs::path(o.out) / "pred.csv", pred, in.actions);
    status.push_back("frames " + std::to_string(pred.num_frames));
}

void cmd_iso_refine(const Common& o, std::vector<std::string>& status)
{
    const Config c = load_config(o);
    const SkeletonTopology topo = topology(c);
    const IsoConfig iso = read_iso(c);
    const PoseFile3D init = load_pose3d(require_path(c, "io.pose3d"));
    const PoseFile2D det = load_pose2d(require_path(c, "io.pose2d"));
    std::optional<PoseFile3D> gt;
    if (c.has("io.gt")) gt = load_pose3d(require_path(c, "io.gt"));

    std::optional<Discriminator> disc;
    std::optional<KcsEnergyModel> energy;
    const PoseScorer* scorer = nullptr;
    if (c.has("io.scorer")) {
        const Checkpoint ckpt = load_checkpoint(require_path(c, "io.scorer"));
        const std::string kind = c.get("experiment.iso_scorer", std::string("energy"));
        if (kind == "energy" && has_energy(ckpt)) {
            energy = get_energy(ckpt, topo);
            scorer = &*energy;
        } else if (kind == "discriminator" && has_discriminator(ckpt)) {
            disc = get_discriminator(ckpt, topo);
            scorer = &*disc;
        } else {
            throw InvalidInput("iso-refine: checkpoint has no " + kind + " scorer");
        }
    } else if (iso.lambda1 > 0.0) {
        throw ConfigError("iso-refine: iso.lambda1 > 0 needs io.scorer");
    }
    const IsoResult r = refine_sequence(init.pose, det.pose, scorer, iso, topo.root(), gt ? &gt->pose : nullptr);
    save_pose3d(fs::path(o.out) / "refined.csv", r.pose, init.actions);
    std::ofstream out(fs::path(o.out) / "trace.csv");
    out << "iteration,rep,gen,smooth,total,mpjpe\n";
    for (const auto& row : r.trace)
        out << row.iteration << "," << num(row.rep) << "," << num(row.gen) << "," << num(row.smooth) << ","
            << num(row.total) << "," << num(row.mpjpe) << "\n";
    status.push_back(std::string("diverged ") + (r.diverged ? "true" : "false"));
}

void cmd_eval(const Common& o, std::vector<std::string>& status)
{
    const Config c = load_config(o);
    const SkeletonTopology topo = topology(c);
    const PoseFile3D pred = load_pose3d(require_path(c, "io.pred"));
    const PoseFile3D gt = load_pose3d(require_path(c, "io.gt"));
    const std::vector<std::string>& actions = !gt.actions.empty() ? gt.actions : pred.actions;
    const EvalReport rep = evaluate(pred.pose, gt.pose, topo, actions);
    std::ofstream out(fs::path(o.out) / "report.txt");
    write_report(out, rep);
    status.push_back("mpjpe_mm " + num(rep.overall.mpjpe_mm));
}

void cmd_run_experiment(const Common& o, std::vector<std::string>&)
{
    Config c = load_config(o);
    ExperimentConfig e = read_experiment(c);
    e.seed = o.seed;
    const ExperimentResult r = run_experiment(e, o.out, &std::cerr);
    std::cerr << "baseline mpjpe " << r.baseline.overall.mpjpe_mm << " mm\n";
    if (r.refined) std::cerr << "iso mpjpe " << r.refined->overall.mpjpe_mm << " mm\n";
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"mspose: multi-stride 3D pose lifting, occlusion augmentation and test-time refinement"};
    app.require_subcommand(1);

    struct Command {
        const char* name;
        const char* help;
        std::function<void(const Common&, std::vector<std::string>&)> run;
        bool writes_own_manifest = false;
    };
    const std::vector<Command> commands = {
        {"synth-gen", "generate a synthetic paired 3D/2D dataset", cmd_synth_gen},
        {"visibility", "cylinder visibility labels for a 3D pose file (io.pose3d)", cmd_visibility},
        {"augment", "apply occlusion augmentation to a 2D file (io.pose2d)", cmd_augment},
        {"features", "KCS/TKCS discriminator features of a 3D file (io.pose3d)", cmd_features},
        {"train", "train the lifting network on a dataset (io.dataset)", cmd_train},
        {"disc-train", "train the discriminator against a model (io.dataset, io.model)", cmd_disc_train},
        {"disc-score", "score 3D windows with a scorer checkpoint (io.scorer, io.pose3d)", cmd_disc_score},
        {"infer", "lift a 2D file with a model checkpoint (io.model, io.pose2d)", cmd_infer},
        {"iso-refine", "refine 3D predictions against detections (io.pose3d, io.pose2d)", cmd_iso_refine},
        {"eval", "evaluate predictions against ground truth (io.pred, io.gt)", cmd_eval},
        {"run-experiment", "run the whole pipeline end to end", cmd_run_experiment, true},
    };

    Common opts;
    const Command* chosen = nullptr;
    for (const auto& cmd : commands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", opts.config, "key = value config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opts.seed, "master seed")->default_val(0);
        sub->add_option("--out", opts.out, "output directory")->required();
        sub->callback([&chosen, &cmd] { chosen = &cmd; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    std::vector<std::string> status{"command " + std::string(chosen->name), "seed " + std::to_string(opts.seed)};
    try {
        fs::create_directories(opts.out);
        fs::remove(fs::path(opts.out) / "manifest.txt");
        chosen->run(opts, status);
        if (!chosen->writes_own_manifest) {
            status.insert(status.begin(), "status ok");
            write_manifest(opts.out, status);
        }
    } catch (const std::exception& e) {
        std::cerr << "mspose " << chosen->name << ": " << e.what() << "\n";
        if (!fs::exists(fs::path(opts.out) / "manifest.txt")) {
            try {
                status.insert(status.begin(), "status failed");
                status.push_back(std::string("error ") + e.what());
                if (fs::is_directory(opts.out)) write_manifest(opts.out, status);
            } catch (const std::exception&) {
            }
        }
        return 1;
    }
    return 0;
}
