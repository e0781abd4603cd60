#include "mspose/experiment.hpp"

#include "mspose/augment.hpp"
#include "mspose/checkpoint.hpp"
#include "mspose/errors.hpp"
#include "mspose/manifest.hpp"
#include "mspose/pose_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace mspose {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const
{
    data.validate();
    tcn.validate();
    train.validate();
    disc.validate();
    iso.validate();
    if (eval_occlusion) eval_occlusion_cfg.validate();
    if (eval_sequences < 1) throw ConfigError("experiment: eval_sequences must be >= 1");
    if (clip_step < 1) throw ConfigError("experiment: clip_step must be >= 1");
    if (iso_scorer != "energy" && iso_scorer != "discriminator")
        throw ConfigError("experiment: iso_scorer must be energy or discriminator");
    if (iso_scorer == "discriminator" && !(train.weights.w3 > 0.0))
        throw ConfigError("experiment: the discriminator scorer needs loss.w3 > 0");
    if (calibration_sequences < 1) throw ConfigError("experiment: calibration_sequences must be >= 1");
    if (ladder_seeds < 1) throw ConfigError("experiment: ladder_seeds must be >= 1");
    if (!topology.empty() && !fs::exists(topology))
        throw ConfigError("experiment: topology file " + topology.string() + " does not exist");
    if (data.frames < tcn.window_len + train.pred_frames - 1)
        throw ConfigError("experiment: synth.frames is shorter than one training clip");
}

ExperimentConfig read_experiment(const Config& c)
{
    ExperimentConfig e;
    e.topology = c.get("io.topology", std::string());
    e.data = read_synthetic(c);
    e.eval_sequences = c.get("experiment.eval_sequences", e.eval_sequences);
    e.eval_occlusion = c.get("experiment.eval_occlusion", e.eval_occlusion);
    e.eval_occlusion_cfg = read_occlusion(c, "eval_occlusion.");
    e.clip_step = c.get("experiment.clip_step", e.clip_step);
    e.tcn = read_tcn(c);
    e.train = read_train(c);
    e.disc = read_discriminator(c);
    e.run_iso = c.get("experiment.run_iso", e.run_iso);
    e.iso = read_iso(c);
    e.iso_scorer = c.get("experiment.iso_scorer", e.iso_scorer);
    e.calibrate = c.get("experiment.calibrate", e.calibrate);
    e.calibration_sequences = c.get("experiment.calibration_sequences", e.calibration_sequences);
    e.energy_ridge = c.get("experiment.energy_ridge", e.energy_ridge);
    e.energy_floor = c.get("experiment.energy_floor", e.energy_floor);
    e.ladder = c.get("experiment.ladder", e.ladder);
    e.ladder_seeds = c.get("experiment.ladder_seeds", e.ladder_seeds);
    c.reject_unused();
    e.validate();
    return e;
}

Config write_experiment(const ExperimentConfig& e)
{
    Config c;
    const SyntheticMotionConfig& s = e.data;
    c.set("io.topology", e.topology.string());
    c.set("synth.num_sequences", s.num_sequences);
    c.set("synth.num_subjects", s.num_subjects);
    c.set("synth.frames", s.frames);
    c.set("synth.body_scale_min", s.body_scale_min);
    c.set("synth.body_scale_max", s.body_scale_max);
    c.set("synth.bone_jitter", s.bone_jitter);
    c.set("synth.angle_step", s.angle_step);
    c.set("synth.velocity_decay", s.velocity_decay);
    c.set("synth.center_pull", s.center_pull);
    c.set("synth.speed_multipliers", s.speed_multipliers);
    c.set("synth.view_yaws_deg", s.view_yaws_deg);
    c.set("synth.crop_mm", s.crop_mm);
    c.set("synth.crop_px", s.crop_px);
    c.set("synth.noise_px", s.noise_px);
    c.set("synth.visible_conf_min", s.visible_conf_min);
    c.set("synth.occluded_conf_min", s.occluded_conf_min);
    c.set("synth.occluded_conf_max", s.occluded_conf_max);
    c.set("synth.mask_occluded", s.mask_occluded);
    c.set("experiment.eval_sequences", e.eval_sequences);
    c.set("experiment.eval_occlusion", e.eval_occlusion);
    auto put_occlusion = [&c](const std::string& p, const OcclusionConfig& o) {
        c.set(p + "p1", o.p1);
        c.set(p + "p2", o.p2);
        c.set(p + "p3", o.p3);
        c.set(p + "p4", o.p4);
        c.set(p + "max_len", o.max_len);
        c.set(p + "block_at_tail", o.block_at_tail);
        c.set(p + "shift_prob", o.shift_prob);
        c.set(p + "swap_prob", o.swap_prob);
        c.set(p + "shift_px", o.shift_px);
        c.set(p + "crop_px", o.crop_px);
    };
    put_occlusion("eval_occlusion.", e.eval_occlusion_cfg);
    put_occlusion("occlusion.", e.train.occlusion);
    c.set("experiment.clip_step", e.clip_step);
    write_tcn(c, e.tcn);
    const TrainConfig& t = e.train;
    c.set("train.steps", t.steps);
    c.set("train.batch", t.batch);
    auto put_optimizer = [&c](const std::string& p, const OptimizerConfig& o) {
        c.set(p + "kind", to_string(o.kind));
        c.set(p + "lr", o.lr);
        c.set(p + "momentum", o.momentum);
        c.set(p + "beta1", o.beta1);
        c.set(p + "beta2", o.beta2);
        c.set(p + "eps", o.eps);
        c.set(p + "clip_norm", o.clip_norm);
    };
    put_optimizer("train.optimizer.", t.optimizer);
    put_optimizer("train.disc_optimizer.", t.disc_optimizer);
    c.set("train.final_lr_fraction", t.final_lr_fraction);
    c.set("train.pred_frames", t.pred_frames);
    c.set("train.use_multiview", t.use_multiview);
    c.set("train.use_2d", t.use_2d);
    c.set("train.augment", t.augment);
    c.set("train.disc_scaler_windows", t.disc_scaler_windows);
    c.set("loss.w1", t.weights.w1);
    c.set("loss.w2", t.weights.w2);
    c.set("loss.w3", t.weights.w3);
    write_discriminator(c, e.disc);
    c.set("experiment.run_iso", e.run_iso);
    const IsoConfig& i = e.iso;
    c.set("iso.weight_mode", to_string(i.mode));
    c.set("iso.sigma", i.sigma);
    c.set("iso.threshold", i.threshold);
    c.set("iso.lambda1", i.lambda1);
    c.set("iso.lambda2", i.lambda2);
    c.set("iso.iterations", i.iterations);
    c.set("iso.step_size", i.step_size);
    c.set("iso.momentum", i.momentum);
    c.set("iso.refit_every", i.refit_every);
    c.set("iso.heatmap_size", i.heatmap_size);
    c.set("iso.window_len", i.window_len);
    c.set("iso.calibration_conf", i.calibration.conf);
    c.set("iso.calibration_value", i.calibration.value);
    c.set("experiment.iso_scorer", e.iso_scorer);
    c.set("experiment.calibrate", e.calibrate);
    c.set("experiment.calibration_sequences", e.calibration_sequences);
    c.set("experiment.energy_ridge", e.energy_ridge);
    c.set("experiment.energy_floor", e.energy_floor);
    c.set("experiment.ladder", e.ladder);
    c.set("experiment.ladder_seeds", e.ladder_seeds);
    return c;
}

SkeletonTopology experiment_topology(const ExperimentConfig& cfg)
{
    return cfg.topology.empty() ? SkeletonTopology::h36m17() : SkeletonTopology::load(cfg.topology);
}

std::uint64_t stream_seed(std::uint64_t seed, Stream s)
{
    return Rng(seed).split(static_cast<std::uint64_t>(s)).next();
}

EvalSet make_eval_set(const ExperimentConfig& cfg, const SkeletonTopology& topo, std::uint64_t seed)
{
    SyntheticMotionConfig sc = cfg.data;
    sc.num_sequences = cfg.eval_sequences;
    sc.seed = stream_seed(seed, Stream::eval_data);
    const auto seqs = generate_synthetic(sc, topo);
    Rng rng(stream_seed(seed, Stream::eval_occlusion));
    EvalSet set;
    for (const auto& s : seqs) {
        set.gt.push_back(s.views[0].gt);
        set.det.push_back(cfg.eval_occlusion ? apply_occlusion(s.views[0].det, cfg.eval_occlusion_cfg, topo, rng)
                                             : s.views[0].det);
        set.actions.push_back(s.action);
    }
    return set;
}

KcsEnergyModel fit_energy(const ExperimentConfig& cfg, const SkeletonTopology& topo,
                          const std::vector<SyntheticSequence>& data)
{
    const int len = cfg.tcn.window_len;
    std::vector<PoseSequence3D> corpus;
    for (const auto& s : data)
        for (const auto& v : s.views)
            for (int f = 0; f + len <= v.gt.num_frames; f += std::max(1, len / 2)) corpus.push_back(v.gt.slice(f, len));
    return KcsEnergyModel::fit(corpus, topo, cfg.tcn.tkcs_interval, cfg.energy_ridge, cfg.energy_floor);
}

void calibration_pairs(const PoseSequence2D& det, const PoseSequence2D& clean, double heatmap_size,
                       std::vector<double>& conf, std::vector<int>& correct)
{
    if (det.coords.rows() != clean.coords.rows()) throw InvalidInput("calibration pairs: shape mismatch");
    for (Eigen::Index i = 0; i < det.coords.rows(); ++i) {
        if (det.mask[i]) continue;
        conf.push_back(det.confidence(i));
        correct.push_back((det.coords.row(i) - clean.coords.row(i)).norm() <= 1.0 / heatmap_size ? 1 : 0);
    }
}

namespace {

Calibration fit_experiment_calibration(const ExperimentConfig& cfg, const SkeletonTopology& topo,
                                       std::uint64_t seed, bool* fell_back)
{
    if (!cfg.calibrate) {
        if (fell_back) *fell_back = false;
        return cfg.iso.calibration;
    }
    SyntheticMotionConfig sc = cfg.data;
    sc.num_sequences = cfg.calibration_sequences;
    sc.seed = stream_seed(seed, Stream::calibration);
    std::vector<double> conf;
    std::vector<int> correct;
    for (const auto& s : generate_synthetic(sc, topo))
        calibration_pairs(s.views[0].det, s.views[0].clean2d, cfg.iso.heatmap_size, conf, correct);
    return fit_calibration_or_identity(conf, correct, fell_back);
}

PoseSequence3D concat(const std::vector<PoseSequence3D>& parts)
{
    int frames = 0;
    for (const auto& p : parts) frames += p.num_frames;
    PoseSequence3D out = PoseSequence3D::zeros(frames, parts.front().num_keypoints);
    Eigen::Index row = 0;
    for (const auto& p : parts) {
        out.coords.middleRows(row, p.coords.rows()) = p.coords;
        row += p.coords.rows();
    }
    return out;
}

EvalReport evaluate_set(const std::vector<PoseSequence3D>& pred, const EvalSet& set, const SkeletonTopology& topo)
{
    std::vector<std::string> actions;
    for (std::size_t i = 0; i < set.gt.size(); ++i)
        actions.insert(actions.end(), set.gt[i].num_frames, set.actions[i]);
    return evaluate(concat(pred), concat(set.gt), topo, actions);
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string seq_name(std::size_t i, const char* suffix)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "seq%03zu%s.csv", i, suffix);
    return buf;
}

const PoseScorer* pick_scorer(const ExperimentConfig& cfg, const KcsEnergyModel& energy, const TrainedModel& tm)
{
    if (cfg.iso_scorer == "discriminator") {
        if (!tm.disc) throw ConfigError("experiment: no trained discriminator for the ISO scorer");
        return &*tm.disc;
    }
    return &energy;
}

}  // namespace

TrainedModel train_model(const ExperimentConfig& cfg, const SkeletonTopology& topo,
                         const std::vector<SyntheticSequence>& data, std::uint64_t seed)
{
    TrainConfig tc = cfg.train;
    tc.seed = stream_seed(seed, Stream::training);
    const TrainingSet set = make_training_set(data, cfg.tcn.window_len + tc.pred_frames - 1, cfg.clip_step);
    TrainedModel tm{TcnModel(cfg.tcn, topo.num_keypoints(), topo.root(), stream_seed(seed, Stream::model_init)),
                    std::nullopt, {}};
    // No adversarial term means no discriminator at all.
    if (tc.weights.w3 > 0.0) {
        DiscriminatorConfig dc = cfg.disc;
        dc.interval = cfg.tcn.tkcs_interval;
        tm.disc.emplace(dc, topo, stream_seed(seed, Stream::disc_init));
    }
    tm.report = train(tm.model, set, tc, topo, tm.disc ? &*tm.disc : nullptr);
    return tm;
}

const std::vector<std::string>& ladder_rung_names()
{
    static const std::vector<std::string> names = {"base",        "+embedding",  "+multi-stride", "+multi-view",
                                                   "+tkcs-disc",  "+occlusion",  "+iso"};
    return names;
}

ExperimentConfig ladder_rung_config(const ExperimentConfig& full, int rung)
{
    if (rung < 0 || rung >= static_cast<int>(ladder_rung_names().size()))
        throw ConfigError("ladder: rung index out of range");
    ExperimentConfig c = full;
    c.tcn.use_embedding = rung >= 1;
    if (rung < 2) c.tcn.strides = {full.tcn.strides.front()};
    c.train.use_multiview = rung >= 3 && full.train.use_multiview;
    if (rung < 3) c.train.weights.w1 = 0.0;
    if (rung < 4) c.train.weights.w3 = 0.0;
    c.train.augment = rung >= 5 && full.train.augment;
    c.run_iso = rung >= 6;
    if (c.iso_scorer == "discriminator" && rung < 4) c.iso_scorer = "energy";
    return c;
}

bool ladder_step_ok(const LadderRung& prev, const LadderRung& next)
{
    return next.mean <= prev.mean + std::max(prev.sd, next.sd);
}

std::vector<LadderRung> run_ladder(const ExperimentConfig& cfg, std::ostream* log)
{
    const SkeletonTopology topo = experiment_topology(cfg);
    const auto& names = ladder_rung_names();
    const int rungs = static_cast<int>(names.size());
    std::vector<LadderRung> out(rungs);
    for (int r = 0; r < rungs; ++r) out[r].name = names[r];

    for (int s = 0; s < cfg.ladder_seeds; ++s) {
        const std::uint64_t seed = Rng(cfg.seed).split(1000 + static_cast<std::uint64_t>(s)).next();
        SyntheticMotionConfig sc = cfg.data;
        sc.seed = stream_seed(seed, Stream::train_data);
        const auto data = generate_synthetic(sc, topo);
        const EvalSet eval = make_eval_set(cfg, topo, seed);
        std::vector<PoseSequence3D> last_pred;
        TrainedModel last;
        for (int r = 0; r + 1 < rungs; ++r) {
            const ExperimentConfig rc = ladder_rung_config(cfg, r);
            TrainedModel tm = train_model(rc, topo, data, seed);
            std::vector<PoseSequence3D> pred;
            double err = 0.0;
            for (std::size_t i = 0; i < eval.gt.size(); ++i) {
                pred.push_back(tm.model.infer_sequence(eval.det[i]));
                err += mpjpe(pred.back(), eval.gt[i]);
            }
            out[r].mpjpe.push_back(err / eval.gt.size());
            if (log) *log << "ladder seed " << s << " " << names[r] << " mpjpe " << out[r].mpjpe.back() << "\n";
            last_pred = std::move(pred);
            last = std::move(tm);
        }
        const ExperimentConfig ic = ladder_rung_config(cfg, rungs - 1);
        IsoConfig iso = ic.iso;
        iso.calibration = fit_experiment_calibration(ic, topo, seed, nullptr);
        const KcsEnergyModel energy = fit_energy(ic, topo, data);
        const PoseScorer* scorer = pick_scorer(ic, energy, last);
        double err = 0.0;
        for (std::size_t i = 0; i < eval.gt.size(); ++i)
            err += mpjpe(refine_sequence(last_pred[i], eval.det[i], scorer, iso, topo.root()).pose, eval.gt[i]);
        out[rungs - 1].mpjpe.push_back(err / eval.gt.size());
        if (log) *log << "ladder seed " << s << " " << names[rungs - 1] << " mpjpe " << out[rungs - 1].mpjpe.back() << "\n";
    }
    for (auto& r : out) {
        double m = 0.0;
        for (double v : r.mpjpe) m += v;
        m /= r.mpjpe.size();
        double var = 0.0;
        for (double v : r.mpjpe) var += (v - m) * (v - m);
        r.mean = m;
        r.sd = r.mpjpe.size() > 1 ? std::sqrt(var / (r.mpjpe.size() - 1)) : 0.0;
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream* log)
{
    cfg.validate();
    fs::create_directories(out_dir);
    std::vector<std::string> stages;
    std::string stage;
    ExperimentResult result;
    auto begin = [&](const char* name) {
        stage = name;
        if (log) *log << "[stage] " << name << "\n";
    };
    auto done = [&] { stages.push_back("stage " + stage + " ok"); };

    try {
        begin("config");
        {
            std::ofstream out(out_dir / "config.txt");
            write_experiment(cfg).write(out);
            out << "# seed " << cfg.seed << "\n";
        }
        const SkeletonTopology topo = experiment_topology(cfg);
        {
            std::ofstream out(out_dir / "topology.txt");
            topo.write(out);
        }
        done();

        begin("synth");
        SyntheticMotionConfig sc = cfg.data;
        sc.seed = stream_seed(cfg.seed, Stream::train_data);
        const auto data = generate_synthetic(sc, topo);
        const EvalSet eval = make_eval_set(cfg, topo, cfg.seed);
        fs::create_directories(out_dir / "eval");
        {
            std::ofstream out(out_dir / "train_summary.csv");
            out << "seq,subject,speed,action,views,frames\n";
            for (std::size_t i = 0; i < data.size(); ++i)
                out << i << "," << data[i].subject << "," << num(data[i].speed) << "," << data[i].action << ","
                    << data[i].views.size() << "," << data[i].views[0].gt.num_frames << "\n";
        }
        for (std::size_t i = 0; i < eval.gt.size(); ++i) {
            const std::vector<std::string> actions(eval.gt[i].num_frames, eval.actions[i]);
            save_pose3d(out_dir / "eval" / seq_name(i, "_gt"), eval.gt[i], actions);
            save_pose2d(out_dir / "eval" / seq_name(i, "_det"), eval.det[i], actions);
        }
        done();

        begin("energy");
        const KcsEnergyModel energy = fit_energy(cfg, topo, data);
        done();

        begin("train");
        const TrainedModel tm = train_model(cfg, topo, data, cfg.seed);
        {
            Checkpoint ckpt;
            put_tcn(ckpt, tm.model);
            if (tm.disc) put_discriminator(ckpt, *tm.disc);
            put_energy(ckpt, energy);
            save_checkpoint(out_dir / "model.ckpt", ckpt);
            std::ofstream out(out_dir / "train_log.csv");
            out << "step,loss,l3d,lmv,l2d,lgen,disc_loss\n";
            for (std::size_t i = 0; i < tm.report.loss.size(); ++i)
                out << i << "," << num(tm.report.loss[i]) << "," << num(tm.report.l3d[i]) << ","
                    << num(tm.report.lmv[i]) << "," << num(tm.report.l2d[i]) << "," << num(tm.report.lgen[i]) << ","
                    << (i < tm.report.disc_loss.size() ? num(tm.report.disc_loss[i]) : std::string("")) << "\n";
        }
        done();

        begin("infer");
        std::vector<PoseSequence3D> pred;
        fs::create_directories(out_dir / "pred");
        for (std::size_t i = 0; i < eval.det.size(); ++i) {
            pred.push_back(tm.model.infer_sequence(eval.det[i]));
            save_pose3d(out_dir / "pred" / seq_name(i, ""), pred.back());
        }
        done();

        begin("eval");
        result.baseline = evaluate_set(pred, eval, topo);
        {
            std::ofstream out(out_dir / "report_baseline.txt");
            write_report(out, result.baseline);
        }
        done();

        if (cfg.run_iso) {
            begin("iso");
            IsoConfig iso = cfg.iso;
            bool fell_back = false;
            iso.calibration = fit_experiment_calibration(cfg, topo, cfg.seed, &fell_back);
            {
                Config c;
                c.set("conf", iso.calibration.conf);
                c.set("value", iso.calibration.value);
                c.set("identity_fallback", fell_back);
                std::ofstream out(out_dir / "calibration.txt");
                c.write(out);
            }
            const PoseScorer* scorer = pick_scorer(cfg, energy, tm);
            std::vector<PoseSequence3D> refined;
            fs::create_directories(out_dir / "iso");
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const IsoResult r = refine_sequence(pred[i], eval.det[i], scorer, iso, topo.root(), &eval.gt[i]);
                refined.push_back(r.pose);
                save_pose3d(out_dir / "iso" / seq_name(i, "_refined"), r.pose);
                std::ofstream out(out_dir / "iso" / seq_name(i, "_trace"));
                out << "iteration,rep,gen,smooth,total,mpjpe\n";
                for (const auto& row : r.trace)
                    out << row.iteration << "," << num(row.rep) << "," << num(row.gen) << "," << num(row.smooth)
                        << "," << num(row.total) << "," << num(row.mpjpe) << "\n";
            }
            result.refined = evaluate_set(refined, eval, topo);
            std::ofstream out(out_dir / "report_iso.txt");
            write_report(out, *result.refined);
            done();
        }

        if (cfg.ladder) {
            begin("ladder");
            result.ladder = run_ladder(cfg, log);
            std::ofstream out(out_dir / "ladder.csv");
            out << "rung,mean_mpjpe,sd_mpjpe,not_worse_than_previous";
            for (int s = 0; s < cfg.ladder_seeds; ++s) out << ",seed" << s;
            out << "\n";
            for (std::size_t r = 0; r < result.ladder.size(); ++r) {
                const auto& row = result.ladder[r];
                out << row.name << "," << num(row.mean) << "," << num(row.sd) << ","
                    << (r == 0 ? "" : (ladder_step_ok(result.ladder[r - 1], row) ? "yes" : "no"));
                for (double v : row.mpjpe) out << "," << num(v);
                out << "\n";
            }
            done();
        }
    } catch (const std::exception& e) {
        std::vector<std::string> status{"status failed", "failed_stage " + stage, std::string("error ") + e.what()};
        status.insert(status.end(), stages.begin(), stages.end());
        write_manifest(out_dir, status);
        throw;
    }
    std::vector<std::string> status{"status ok"};
    status.insert(status.end(), stages.begin(), stages.end());
    write_manifest(out_dir, status);
    return result;
}

}  // namespace mspose
