#include "mspose/checkpoint.hpp"

#include "mspose/errors.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mspose {

namespace {

constexpr const char* kMagic = "mspose-checkpoint 1";

std::string hex(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

}  // namespace

const Eigen::MatrixXd& Checkpoint::tensor(const std::string& name) const
{
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw InvalidInput("checkpoint: missing tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const
{
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt)
{
    out << kMagic << "\n";
    ckpt.header.write(out);
    for (const auto& [name, t] : ckpt.tensors) {
        out << "tensor " << name << " " << t.rows() << " " << t.cols() << "\n";
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.cols(); ++c) out << (c ? " " : "") << hex(t(r, c));
            out << "\n";
        }
    }
    out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != kMagic) throw InvalidInput("checkpoint: bad magic line");
    Checkpoint ckpt;
    std::stringstream header;
    bool ended = false;
    while (std::getline(in, line)) {
        if (line == "end") {
            ended = true;
            break;
        }
        if (line.rfind("tensor ", 0) != 0) {
            if (!ckpt.tensors.empty()) throw InvalidInput("checkpoint: header line after tensor data");
            header << line << "\n";
            continue;
        }
        std::istringstream ts(line.substr(7));
        std::string name;
        long rows = -1, cols = -1;
        if (!(ts >> name >> rows >> cols) || rows < 0 || cols < 0)
            throw InvalidInput("checkpoint: bad tensor line '" + line + "'");
        Eigen::MatrixXd t(rows, cols);
        for (long r = 0; r < rows; ++r) {
            if (!std::getline(in, line)) throw InvalidInput("checkpoint: truncated tensor '" + name + "'");
            const char* p = line.c_str();
            for (long c = 0; c < cols; ++c) {
                char* end = nullptr;
                t(r, c) = std::strtod(p, &end);
                if (end == p) throw InvalidInput("checkpoint: bad value in tensor '" + name + "'");
                p = end;
            }
        }
        ckpt.tensors.emplace_back(name, std::move(t));
    }
    if (!ended) throw InvalidInput("checkpoint: missing end marker");
    ckpt.header = Config::parse(header, "checkpoint header");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_checkpoint(out, ckpt);
    if (!out) throw Error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

void put_tcn(Checkpoint& ckpt, const TcnModel& model)
{
    write_tcn(ckpt.header, model.config(), "tcn.");
    ckpt.header.set("tcn.num_keypoints", model.num_keypoints());
    ckpt.header.set("tcn.root", model.root());
    for (std::size_t i = 0; i < model.params().size(); ++i)
        ckpt.tensors.emplace_back("tcn/" + model.param_names()[i], model.params()[i]);
}

bool has_tcn(const Checkpoint& ckpt) { return ckpt.header.has("tcn.num_keypoints"); }

TcnModel get_tcn(const Checkpoint& ckpt)
{
    if (!has_tcn(ckpt)) throw InvalidInput("checkpoint: no TCN model");
    const TcnConfig cfg = read_tcn(ckpt.header, "tcn.");
    const int k = ckpt.header.get("tcn.num_keypoints", 0);
    const int root = ckpt.header.get("tcn.root", 0);
    TcnModel model(cfg, k, root, 0);
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        const auto& t = ckpt.tensor("tcn/" + model.param_names()[i]);
        if (t.rows() != model.params()[i].rows() || t.cols() != model.params()[i].cols())
            throw InvalidInput("checkpoint: tensor '" + model.param_names()[i] + "' has the wrong shape");
        model.params()[i] = t;
    }
    return model;
}

void put_discriminator(Checkpoint& ckpt, const Discriminator& disc)
{
    write_discriminator(ckpt.header, disc.config(), "disc.");
    ckpt.header.set("disc.present", true);
    for (std::size_t i = 0; i < disc.params().size(); ++i)
        ckpt.tensors.emplace_back("disc/p" + std::to_string(i), disc.params()[i]);
    ckpt.tensors.emplace_back("disc/scaler_mean", disc.scaler_mean());
    ckpt.tensors.emplace_back("disc/scaler_inv_scale", disc.scaler_inv_scale());
}

bool has_discriminator(const Checkpoint& ckpt) { return ckpt.header.has("disc.present"); }

Discriminator get_discriminator(const Checkpoint& ckpt, const SkeletonTopology& topo)
{
    if (!has_discriminator(ckpt)) throw InvalidInput("checkpoint: no discriminator");
    ckpt.header.get("disc.present", true);
    Discriminator disc(read_discriminator(ckpt.header, "disc."), topo, 0);
    for (std::size_t i = 0; i < disc.params().size(); ++i) {
        const auto& t = ckpt.tensor("disc/p" + std::to_string(i));
        if (t.rows() != disc.params()[i].rows() || t.cols() != disc.params()[i].cols())
            throw TopologyMismatch("checkpoint: discriminator tensor shape does not match the topology");
        disc.params()[i] = t;
    }
    disc.set_scaler(ckpt.tensor("disc/scaler_mean"), ckpt.tensor("disc/scaler_inv_scale"));
    return disc;
}

void put_energy(Checkpoint& ckpt, const KcsEnergyModel& model)
{
    ckpt.header.set("energy.interval", model.interval());
    ckpt.tensors.emplace_back("energy/mean", model.mean());
    ckpt.tensors.emplace_back("energy/covariance", model.covariance());
}

bool has_energy(const Checkpoint& ckpt) { return ckpt.header.has("energy.interval"); }

KcsEnergyModel get_energy(const Checkpoint& ckpt, const SkeletonTopology& topo)
{
    if (!has_energy(ckpt)) throw InvalidInput("checkpoint: no energy model");
    const auto& mean = ckpt.tensor("energy/mean");
    if (mean.rows() != 1) throw InvalidInput("checkpoint: energy mean must be one row");
    return KcsEnergyModel::from_moments(mean.row(0), ckpt.tensor("energy/covariance"), topo,
                                        ckpt.header.get("energy.interval", 1));
}

}  // namespace mspose
