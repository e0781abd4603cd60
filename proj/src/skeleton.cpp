#include "mspose/skeleton.hpp"

#include "mspose/errors.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

namespace mspose {

namespace {

constexpr const char* kH36m17 = R"(# 17-keypoint Human3.6M skeleton, radii in mm
keypoint pelvis
keypoint r_hip
keypoint r_knee
keypoint r_ankle
keypoint l_hip
keypoint l_knee
keypoint l_ankle
keypoint spine
keypoint neck
keypoint nose
keypoint head_top
keypoint l_shoulder
keypoint l_elbow
keypoint l_wrist
keypoint r_shoulder
keypoint r_elbow
keypoint r_wrist
bone pelvis r_hip
bone r_hip r_knee
bone r_knee r_ankle
bone pelvis l_hip
bone l_hip l_knee
bone l_knee l_ankle
bone pelvis spine
bone spine neck
bone neck nose
bone nose head_top
bone neck l_shoulder
bone l_shoulder l_elbow
bone l_elbow l_wrist
bone neck r_shoulder
bone r_shoulder r_elbow
bone r_elbow r_wrist
part head head_top neck 100 nose
part torso neck pelvis torso spine l_hip r_hip l_shoulder r_shoulder
part l_upper_arm l_shoulder l_elbow 50
part l_lower_arm l_elbow l_wrist 50
part r_upper_arm r_shoulder r_elbow 50
part r_lower_arm r_elbow r_wrist 50
part l_thigh l_hip l_knee 50
part l_lower_leg l_knee l_ankle 50
part r_thigh r_hip r_knee 50
part r_lower_leg r_knee r_ankle 50
torso_radius neck l_shoulder r_shoulder
mirror l_hip r_hip
mirror l_knee r_knee
mirror l_ankle r_ankle
mirror l_shoulder r_shoulder
mirror l_elbow r_elbow
mirror l_wrist r_wrist
)";

[[noreturn]] void fail_line(int line_no, const std::string& msg)
{
    throw TopologyMismatch("topology line " + std::to_string(line_no) + ": " + msg);
}

}  // namespace

SkeletonTopology SkeletonTopology::h36m17()
{
    std::istringstream in(kH36m17);
    return parse(in);
}

SkeletonTopology SkeletonTopology::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open topology file " + path.string());
    return parse(in);
}

SkeletonTopology SkeletonTopology::parse(std::istream& in)
{
    SkeletonTopology topo;
    std::string line;
    int line_no = 0;
    auto lookup = [&](const std::string& name) {
        for (int i = 0; i < topo.num_keypoints(); ++i)
            if (topo.names_[i] == name) return i;
        fail_line(line_no, "unknown keypoint '" + name + "'");
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;

        if (tag == "keypoint") {
            std::string name;
            if (!(ls >> name)) fail_line(line_no, "keypoint needs a name");
            for (const auto& n : topo.names_)
                if (n == name) fail_line(line_no, "duplicate keypoint '" + name + "'");
            topo.names_.push_back(name);
        } else if (tag == "bone") {
            std::string a, b;
            if (!(ls >> a >> b)) fail_line(line_no, "bone needs parent and child");
            topo.bones_.push_back({lookup(a), lookup(b)});
        } else if (tag == "part") {
            BodyPart part;
            std::string top, bottom, radius;
            if (!(ls >> part.name >> top >> bottom >> radius))
                fail_line(line_no, "part needs name, top, bottom, radius");
            part.top = lookup(top);
            part.bottom = lookup(bottom);
            if (radius == "torso") {
                part.torso_radius = true;
            } else {
                try {
                    part.radius_mm = std::stod(radius);
                } catch (const std::exception&) {
                    fail_line(line_no, "bad radius '" + radius + "'");
                }
                if (!(part.radius_mm > 0.0)) fail_line(line_no, "radius must be positive");
            }
            std::string member;
            while (ls >> member) part.members.push_back(lookup(member));
            topo.parts_.push_back(std::move(part));
        } else if (tag == "torso_radius") {
            std::string neck, shoulder;
            if (!(ls >> neck)) fail_line(line_no, "torso_radius needs a neck keypoint");
            topo.torso_neck_ = lookup(neck);
            while (ls >> shoulder) topo.torso_shoulders_.push_back(lookup(shoulder));
            if (topo.torso_shoulders_.empty()) fail_line(line_no, "torso_radius needs shoulders");
        } else if (tag == "mirror") {
            std::string a, b;
            if (!(ls >> a >> b)) fail_line(line_no, "mirror needs two keypoints");
            topo.mirrors_.emplace_back(lookup(a), lookup(b));
        } else {
            fail_line(line_no, "unknown directive '" + tag + "'");
        }
    }
    topo.validate();
    return topo;
}

void SkeletonTopology::write(std::ostream& out) const
{
    for (const auto& n : names_) out << "keypoint " << n << '\n';
    for (const auto& b : bones_) out << "bone " << names_[b.parent] << ' ' << names_[b.child] << '\n';
    for (const auto& p : parts_) {
        out << "part " << p.name << ' ' << names_[p.top] << ' ' << names_[p.bottom] << ' ';
        if (p.torso_radius)
            out << "torso";
        else
            out << p.radius_mm;
        for (int m : p.members) out << ' ' << names_[m];
        out << '\n';
    }
    if (torso_neck_ >= 0) {
        out << "torso_radius " << names_[torso_neck_];
        for (int s : torso_shoulders_) out << ' ' << names_[s];
        out << '\n';
    }
    for (const auto& [a, b] : mirrors_) out << "mirror " << names_[a] << ' ' << names_[b] << '\n';
}

int SkeletonTopology::index_of(std::string_view name) const
{
    for (int i = 0; i < num_keypoints(); ++i)
        if (names_[i] == name) return i;
    throw TopologyMismatch("unknown keypoint '" + std::string(name) + "'");
}

Eigen::MatrixXd SkeletonTopology::incidence() const
{
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(num_keypoints(), num_bones());
    for (int m = 0; m < num_bones(); ++m) {
        d(bones_[m].parent, m) = -1.0;
        d(bones_[m].child, m) = 1.0;
    }
    return d;
}

void SkeletonTopology::validate()
{
    const int k = num_keypoints();
    if (k == 0) throw TopologyMismatch("topology has no keypoints");
    if (num_bones() != k - 1)
        throw TopologyMismatch("bone graph must be a tree: expected " + std::to_string(k - 1) +
                               " bones, got " + std::to_string(num_bones()));

    std::vector<int> parent(k, -1);
    for (const auto& b : bones_) {
        if (b.parent == b.child) throw TopologyMismatch("bone connects a keypoint to itself");
        if (parent[b.child] != -1)
            throw TopologyMismatch("keypoint '" + names_[b.child] + "' has two parents");
        parent[b.child] = b.parent;
    }
    root_ = -1;
    for (int i = 0; i < k; ++i) {
        if (parent[i] != -1) continue;
        if (root_ != -1) throw TopologyMismatch("bone graph is not connected");
        root_ = i;
    }
    if (root_ < 0) throw TopologyMismatch("bone graph has a cycle");
    // With K-1 edges, one parent per non-root node and a single root, the graph
    // is a tree iff every node reaches the root.
    for (int i = 0; i < k; ++i) {
        int steps = 0;
        for (int j = i; j != root_; j = parent[j])
            if (++steps > k) throw TopologyMismatch("bone graph has a cycle");
    }

    const bool needs_torso = std::any_of(parts_.begin(), parts_.end(),
                                         [](const BodyPart& p) { return p.torso_radius; });
    if (needs_torso && torso_neck_ < 0)
        throw TopologyMismatch("a part uses the torso radius but torso_radius is not declared");
    for (const auto& p : parts_)
        if (p.top == p.bottom) throw TopologyMismatch("part '" + p.name + "' has identical ends");
}

}  // namespace mspose
