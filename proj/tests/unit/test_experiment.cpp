#include "mspose/config.hpp"
#include "mspose/errors.hpp"
#include "mspose/experiment.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace mspose;
namespace fs = std::filesystem;

namespace {

ExperimentConfig smoke()
{
    return read_experiment(Config::load(fs::path(MSPOSE_SOURCE_DIR) / "configs" / "smoke.conf"));
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("mspose_exp_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("experiment: stream seeds are distinct and stable")
{
    CHECK(stream_seed(1, Stream::train_data) != stream_seed(1, Stream::eval_data));
    CHECK(stream_seed(1, Stream::train_data) != stream_seed(2, Stream::train_data));
    CHECK(stream_seed(9, Stream::training) == stream_seed(9, Stream::training));
}

TEST_CASE("experiment: same seed, byte-identical outputs")
{
    ExperimentConfig cfg = smoke();
    cfg.seed = 3;
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const auto ra = run_experiment(cfg, a);
    const auto rb = run_experiment(cfg, b);
    CHECK(ra.baseline.overall.mpjpe_mm == rb.baseline.overall.mpjpe_mm);
    REQUIRE(ra.refined.has_value());
    CHECK(slurp(a / "manifest.txt") == slurp(b / "manifest.txt"));
    CHECK(slurp(a / "manifest.txt").rfind("status ok\n", 0) == 0);
    CHECK(slurp(a / "manifest.txt").find("report_iso.txt") != std::string::npos);

    cfg.seed = 4;
    const fs::path c = scratch("det_c");
    run_experiment(cfg, c);
    CHECK(slurp(a / "manifest.txt") != slurp(c / "manifest.txt"));
}

TEST_CASE("experiment: no adversarial weight, no discriminator")
{
    ExperimentConfig cfg = smoke();
    cfg.train.weights.w3 = 0.0;
    cfg.train.steps = 3;
    const auto topo = experiment_topology(cfg);
    auto data_cfg = cfg.data;
    data_cfg.seed = stream_seed(cfg.seed, Stream::train_data);
    const auto data = generate_synthetic(data_cfg, topo);
    const auto trained = train_model(cfg, topo, data, 1);
    CHECK_FALSE(trained.disc.has_value());
    for (double g : trained.report.lgen) CHECK(g == 0.0);

    cfg.train.weights.w3 = 0.01;
    const auto with_disc = train_model(cfg, topo, data, 1);
    CHECK(with_disc.disc.has_value());
}

TEST_CASE("experiment: a failing stage leaves a failure manifest")
{
    ExperimentConfig cfg = smoke();
    cfg.train.optimizer.kind = OptimizerKind::sgd;
    cfg.train.optimizer.lr = 1e12;
    cfg.train.steps = 50;
    const fs::path dir = scratch("fail");
    CHECK_THROWS_AS(run_experiment(cfg, dir), TrainingDiverged);
    const std::string m = slurp(dir / "manifest.txt");
    CHECK(m.rfind("status failed\n", 0) == 0);
    CHECK(m.find("failed_stage train") != std::string::npos);
    CHECK(m.find("stage synth ok") != std::string::npos);
}

TEST_CASE("experiment: ladder rungs switch features on in order")
{
    ExperimentConfig full = smoke();
    full.tcn.strides = {1, 2, 3};
    const auto& names = ladder_rung_names();
    REQUIRE(names.size() == 7);
    const auto base = ladder_rung_config(full, 0);
    CHECK(base.tcn.strides.size() == 1);
    CHECK_FALSE(base.tcn.use_embedding);
    CHECK_FALSE(base.train.use_multiview);
    CHECK(base.train.weights.w3 == 0.0);
    CHECK_FALSE(base.train.augment);
    CHECK_FALSE(base.run_iso);
    CHECK(ladder_rung_config(full, 1).tcn.use_embedding);
    CHECK(ladder_rung_config(full, 2).tcn.strides == full.tcn.strides);
    CHECK(ladder_rung_config(full, 3).train.use_multiview);
    CHECK(ladder_rung_config(full, 4).train.weights.w3 == full.train.weights.w3);
    CHECK(ladder_rung_config(full, 5).train.augment);
    CHECK(ladder_rung_config(full, 6).run_iso);

    LadderRung p{"p", {}, 50.0, 2.0}, n{"n", {}, 52.5, 3.0};
    CHECK(ladder_step_ok(p, n));
    n.mean = 53.5;
    CHECK_FALSE(ladder_step_ok(p, n));
}

TEST_CASE("experiment: calibration pairs use one heatmap cell")
{
    PoseSequence2D clean = PoseSequence2D::zeros(1, 3), det = PoseSequence2D::zeros(1, 3);
    for (int k = 0; k < 3; ++k) {
        clean.mask[k] = det.mask[k] = 0;
        det.confidence(k) = 0.1 * (k + 1);
    }
    det.coords(0, 0) = 0.5 / 64.0;
    det.coords(1, 0) = 2.0 / 64.0;
    det.set_masked(0, 2);
    std::vector<double> conf;
    std::vector<int> correct;
    calibration_pairs(det, clean, 64.0, conf, correct);
    CHECK(conf == std::vector<double>{0.1, 0.2});
    CHECK(correct == std::vector<int>{1, 0});
}
