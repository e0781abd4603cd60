// Serial reference vs OpenMP kernels. Prints median wall time per kernel and
// whether the two paths produced identical output.
#include "mspose/discriminator.hpp"
#include "mspose/experiment.hpp"
#include "mspose/iso.hpp"
#include "mspose/synthetic.hpp"
#include "mspose/tcn.hpp"
#include "mspose/train.hpp"
#include "mspose/visibility.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

using namespace mspose;

namespace {

double median_ms(int reps, const std::function<void()>& fn)
{
    std::vector<double> t;
    for (int i = 0; i < reps; ++i) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
}

void row(const char* name, double serial, double parallel, bool same)
{
    std::printf("%-22s %10.2f %10.2f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
                same ? "identical" : "DIFFERENT");
}

}  // namespace

int main(int argc, char** argv)
{
    const int reps = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
    const auto topo = SkeletonTopology::h36m17();

    SyntheticMotionConfig sc;
    sc.num_sequences = 4;
    sc.frames = 512;
    sc.seed = 1;
    const auto data = generate_synthetic(sc, topo);
    const auto& view = data[0].views[0];

    std::printf("threads %d, median of %d runs (ms)\n", omp_get_max_threads(), reps);
    std::printf("%-22s %10s %10s %9s\n", "kernel", "serial", "openmp", "speedup");

    {
        SequenceVisibility a, b;
        const double s = median_ms(reps, [&] { a = sequence_visibility(view.gt, topo, {}, Exec::serial); });
        const double p = median_ms(reps, [&] { b = sequence_visibility(view.gt, topo, {}, Exec::parallel); });
        row("sequence_visibility", s, p, a.hard == b.hard && a.soft == b.soft);
    }

    TcnConfig tc;
    tc.embed_dim = 128;
    tc.channels = 64;
    tc.window_len = 27;
    tc.strides = {1, 2, 3};
    TcnModel model(tc, topo.num_keypoints(), topo.root(), 7);
    {
        PoseSequence3D a, b;
        const double s = median_ms(reps, [&] { a = model.infer_sequence(view.det, Exec::serial); });
        const double p = median_ms(reps, [&] { b = model.infer_sequence(view.det, Exec::parallel); });
        row("infer_sequence", s, p, a.coords == b.coords);
    }

    {
        const TrainingSet set = make_training_set(data, tc.window_len + 1, 8);
        TrainConfig cfg;
        cfg.augment = true;
        std::vector<BatchItem> items;
        for (int i = 0; i < 16; ++i)
            items.push_back({static_cast<int>((i * 37) % set.windows.size()), static_cast<std::uint64_t>(i)});
        BatchResult a, b;
        const double s = median_ms(reps, [&] { a = batch_gradients(model, set, items, cfg, topo, nullptr, Exec::serial); });
        const double p = median_ms(reps, [&] { b = batch_gradients(model, set, items, cfg, topo, nullptr, Exec::parallel); });
        bool same = a.loss == b.loss;
        for (std::size_t i = 0; i < a.grads.size(); ++i) same = same && a.grads[i] == b.grads[i];
        row("batch_gradients", s, p, same);
    }

    {
        std::vector<PoseSequence3D> corpus;
        for (const auto& seq : data)
            for (const auto& v : seq.views) corpus.push_back(v.gt);
        const auto energy = KcsEnergyModel::fit(corpus, topo);
        PoseSequence2D det = view.det;
        Rng rng(5);
        corrupt_detections(det, topo, CorruptionConfig{}, rng);
        IsoConfig ic;
        ic.iterations = 30;
        PoseSequence3D init = view.gt;
        for (Eigen::Index i = 0; i < init.coords.size(); ++i) init.coords(i) += rng.normal(0.0, 30.0);
        for (int t = 0; t < init.num_frames; ++t) init.coords.row(t * init.num_keypoints + topo.root()).setZero();
        IsoResult a, b;
        const double s = median_ms(reps, [&] { a = refine_sequence(init, det, &energy, ic, topo.root(), nullptr, Exec::serial); });
        const double p = median_ms(reps, [&] { b = refine_sequence(init, det, &energy, ic, topo.root(), nullptr, Exec::parallel); });
        row("refine_sequence", s, p, a.pose.coords == b.pose.coords && a.trace.size() == b.trace.size());
    }
    return 0;
}
