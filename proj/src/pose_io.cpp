#include "mspose/pose_io.hpp"

#include "mspose/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mspose {

namespace {

std::string num(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        out.push_back(field);
    }
    return out;
}

double parse_double(const std::string& s, int line_no)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InvalidInput("pose file line " + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
}

int parse_int(const std::string& s, int line_no)
{
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InvalidInput("pose file line " + std::to_string(line_no) + ": bad integer '" + s + "'");
    return v;
}

struct Record {
    int frame;
    int keypoint;
    double values[5];
    std::string action;
};

// Reads the generic table; `value_cols` is the number of numeric columns
// after frame and keypoint.
std::vector<Record> read_table(std::istream& in, const std::vector<std::string>& expected,
                               bool& has_action)
{
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("pose file is empty");
    auto header = split_csv(line);
    has_action = header.size() == expected.size() + 1 && header.back() == "action";
    if (has_action) header.pop_back();
    if (header != expected) {
        std::string want;
        for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
        throw InvalidInput("pose file header must be '" + want + "[,action]'");
    }

    std::vector<Record> rows;
    int line_no = 1;
    const std::size_t value_cols = expected.size() - 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv(line);
        if (f.size() != expected.size() + (has_action ? 1 : 0))
            throw InvalidInput("pose file line " + std::to_string(line_no) + ": wrong field count");
        Record r{};
        r.frame = parse_int(f[0], line_no);
        r.keypoint = parse_int(f[1], line_no);
        for (std::size_t c = 0; c < value_cols; ++c) r.values[c] = parse_double(f[2 + c], line_no);
        if (has_action) r.action = f.back();
        rows.push_back(std::move(r));
    }
    return rows;
}

// Checks the frame-major dense layout and returns (T, K).
std::pair<int, int> dense_shape(const std::vector<Record>& rows)
{
    if (rows.empty()) return {0, 0};
    int k = 0;
    while (k < static_cast<int>(rows.size()) && rows[k].frame == rows[0].frame) ++k;
    if (rows.size() % static_cast<std::size_t>(k) != 0)
        throw InvalidInput("pose file does not have the same keypoint count in every frame");
    const int t = static_cast<int>(rows.size()) / k;
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
        if (rows[i].frame != i / k || rows[i].keypoint != i % k)
            throw InvalidInput("pose file records must be ordered by frame then keypoint from 0");
    }
    return {t, k};
}

std::vector<std::string> frame_actions(const std::vector<Record>& rows, int k, bool has_action)
{
    std::vector<std::string> actions;
    if (!has_action) return actions;
    for (std::size_t i = 0; i < rows.size(); i += static_cast<std::size_t>(k)) actions.push_back(rows[i].action);
    return actions;
}

template <typename Fn>
void with_file_out(const std::filesystem::path& path, Fn&& fn)
{
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    fn(out);
    if (!out) throw InvalidInput("write failed for " + path.string());
}

}  // namespace

void write_pose3d(std::ostream& out, const PoseSequence3D& pose, const std::vector<std::string>& actions)
{
    const bool with_action = !actions.empty();
    out << "frame,keypoint,x,y,z,conf,mask" << (with_action ? ",action" : "") << '\n';
    for (int t = 0; t < pose.num_frames; ++t) {
        for (int k = 0; k < pose.num_keypoints; ++k) {
            const int i = t * pose.num_keypoints + k;
            const int mask = pose.visibility.empty() ? 0 : (pose.visibility[i] ? 0 : 1);
            out << t << ',' << k << ',' << num(pose.coords(i, 0)) << ',' << num(pose.coords(i, 1)) << ','
                << num(pose.coords(i, 2)) << ',' << (mask ? 0 : 1) << ',' << mask;
            if (with_action) out << ',' << actions[t];
            out << '\n';
        }
    }
}

void write_pose2d(std::ostream& out, const PoseSequence2D& pose, const std::vector<std::string>& actions)
{
    const bool with_action = !actions.empty();
    out << "frame,keypoint,x,y,conf,mask" << (with_action ? ",action" : "") << '\n';
    for (int t = 0; t < pose.num_frames; ++t) {
        for (int k = 0; k < pose.num_keypoints; ++k) {
            const int i = pose.index(t, k);
            out << t << ',' << k << ',' << num(pose.coords(i, 0)) << ',' << num(pose.coords(i, 1)) << ','
                << num(pose.confidence[i]) << ',' << int(pose.mask[i] ? 1 : 0);
            if (with_action) out << ',' << actions[t];
            out << '\n';
        }
    }
}

PoseFile3D read_pose3d(std::istream& in)
{
    bool has_action = false;
    const auto rows = read_table(in, {"frame", "keypoint", "x", "y", "z", "conf", "mask"}, has_action);
    const auto [t, k] = dense_shape(rows);
    PoseFile3D file;
    file.pose = PoseSequence3D::zeros(t, k);
    bool any_mask = false;
    std::vector<std::uint8_t> vis(rows.size(), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int c = 0; c < 3; ++c) file.pose.coords(static_cast<Eigen::Index>(i), c) = rows[i].values[c];
        if (rows[i].values[4] != 0.0) {
            vis[i] = 0;
            any_mask = true;
        }
    }
    if (any_mask) file.pose.visibility = std::move(vis);
    if (!file.pose.all_finite()) throw InvalidInput("3D pose file contains non-finite coordinates");
    file.actions = frame_actions(rows, k, has_action);
    return file;
}

PoseFile2D read_pose2d(std::istream& in)
{
    bool has_action = false;
    const auto rows = read_table(in, {"frame", "keypoint", "x", "y", "conf", "mask"}, has_action);
    const auto [t, k] = dense_shape(rows);
    PoseFile2D file;
    file.pose = PoseSequence2D::zeros(t, k);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        file.pose.coords(r, 0) = rows[i].values[0];
        file.pose.coords(r, 1) = rows[i].values[1];
        file.pose.confidence[r] = rows[i].values[2];
        file.pose.mask[i] = rows[i].values[3] != 0.0 ? 1 : 0;
    }
    file.pose.validate();
    file.actions = frame_actions(rows, k, has_action);
    return file;
}

void save_pose3d(const std::filesystem::path& path, const PoseSequence3D& pose,
                 const std::vector<std::string>& actions)
{
    with_file_out(path, [&](std::ostream& out) { write_pose3d(out, pose, actions); });
}

void save_pose2d(const std::filesystem::path& path, const PoseSequence2D& pose,
                 const std::vector<std::string>& actions)
{
    with_file_out(path, [&](std::ostream& out) { write_pose2d(out, pose, actions); });
}

PoseFile3D load_pose3d(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    return read_pose3d(in);
}

PoseFile2D load_pose2d(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    return read_pose2d(in);
}

}  // namespace mspose
