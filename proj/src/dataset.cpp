#include "mspose/dataset.hpp"

#include "mspose/errors.hpp"
#include "mspose/pose_io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace mspose {

namespace fs = std::filesystem;

fs::path view_file(const fs::path& dir, int seq, int view, const char* kind)
{
    char name[64];
    std::snprintf(name, sizeof name, "seq%03d_view%d_%s.csv", seq, view, kind);
    return dir / name;
}

void save_dataset(const fs::path& dir, const std::vector<SyntheticSequence>& data)
{
    fs::create_directories(dir);
    std::ofstream index(dir / "dataset.csv");
    if (!index) throw Error("cannot write " + (dir / "dataset.csv").string());
    index << "seq,view,subject,speed,action,crop_mm,r00,r01,r02,r10,r11,r12,r20,r21,r22\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (std::size_t s = 0; s < data.size(); ++s) {
        const SyntheticSequence& seq = data[s];
        for (std::size_t v = 0; v < seq.views.size(); ++v) {
            const SyntheticView& view = seq.views[v];
            index << s << "," << v << "," << seq.subject << "," << num(seq.speed) << "," << seq.action << ","
                  << num(view.crop_mm);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) index << "," << num(view.rotation(r, c));
            index << "\n";
            const std::vector<std::string> actions(view.gt.num_frames, seq.action);
            save_pose3d(view_file(dir, static_cast<int>(s), static_cast<int>(v), "gt"), view.gt, actions);
            save_pose2d(view_file(dir, static_cast<int>(s), static_cast<int>(v), "det"), view.det, actions);
            save_pose2d(view_file(dir, static_cast<int>(s), static_cast<int>(v), "clean2d"), view.clean2d, actions);
        }
    }
    if (!index) throw Error("write failed: " + (dir / "dataset.csv").string());
}

std::vector<SyntheticSequence> load_dataset(const fs::path& dir)
{
    std::ifstream index(dir / "dataset.csv");
    if (!index) throw InvalidInput("no dataset.csv in " + dir.string());
    std::string line;
    std::getline(index, line);
    std::map<int, SyntheticSequence> seqs;
    int row = 1;
    while (std::getline(index, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 15) throw InvalidInput("dataset.csv:" + std::to_string(row) + ": expected 15 fields");
        try {
            const int s = std::stoi(f[0]);
            const int v = std::stoi(f[1]);
            SyntheticSequence& seq = seqs[s];
            seq.subject = std::stoi(f[2]);
            seq.speed = std::stod(f[3]);
            seq.action = f[4];
            if (v != static_cast<int>(seq.views.size()))
                throw InvalidInput("dataset.csv:" + std::to_string(row) + ": views out of order");
            SyntheticView view;
            view.crop_mm = std::stod(f[5]);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) view.rotation(r, c) = std::stod(f[6 + 3 * r + c]);
            view.gt = load_pose3d(view_file(dir, s, v, "gt")).pose;
            view.det = load_pose2d(view_file(dir, s, v, "det")).pose;
            view.clean2d = load_pose2d(view_file(dir, s, v, "clean2d")).pose;
            seq.views.push_back(std::move(view));
        } catch (const std::logic_error&) {
            throw InvalidInput("dataset.csv:" + std::to_string(row) + ": malformed number");
        }
    }
    std::vector<SyntheticSequence> out;
    int expected = 0;
    for (auto& [s, seq] : seqs) {
        if (s != expected++) throw InvalidInput("dataset.csv: sequence indices are not contiguous");
        out.push_back(std::move(seq));
    }
    if (out.empty()) throw InvalidInput("dataset in " + dir.string() + " is empty");
    return out;
}

}  // namespace mspose
