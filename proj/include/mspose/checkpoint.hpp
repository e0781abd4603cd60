#pragma once

#include "mspose/config.hpp"
#include "mspose/discriminator.hpp"
#include "mspose/skeleton.hpp"
#include "mspose/tcn.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mspose {

// Text container:
//
//   mspose-checkpoint 1
//   <key = value header lines>
//   tensor <name> <rows> <cols>
//   <rows lines of hexfloat values>
//   ...
//   end
//
// Hexfloats make the round trip exact.
struct Checkpoint {
    Config header;
    std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

    const Eigen::MatrixXd& tensor(const std::string& name) const;  // throws InvalidInput
    bool has_tensor(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Components live under "tcn", "disc" and "energy" prefixes, so one file can
// carry a model together with its scorer.
void put_tcn(Checkpoint& ckpt, const TcnModel& model);
bool has_tcn(const Checkpoint& ckpt);
TcnModel get_tcn(const Checkpoint& ckpt);

void put_discriminator(Checkpoint& ckpt, const Discriminator& disc);
bool has_discriminator(const Checkpoint& ckpt);
Discriminator get_discriminator(const Checkpoint& ckpt, const SkeletonTopology& topo);

void put_energy(Checkpoint& ckpt, const KcsEnergyModel& model);
bool has_energy(const Checkpoint& ckpt);
KcsEnergyModel get_energy(const Checkpoint& ckpt, const SkeletonTopology& topo);

}  // namespace mspose
