#pragma once

#include "mspose/augment.hpp"
#include "mspose/discriminator.hpp"
#include "mspose/iso.hpp"
#include "mspose/losses.hpp"
#include "mspose/optim.hpp"
#include "mspose/synthetic.hpp"
#include "mspose/tcn.hpp"
#include "mspose/train.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mspose {

// Plain text "key = value" file. '#' starts a comment, blank lines are
// ignored, keys are unique. Lists are comma separated. Struct fields are
// read under a dotted prefix, e.g. tcn.embed_dim or loss.w1.
class Config {
public:
    static Config load(const std::filesystem::path& path);
    static Config parse(std::istream& in, const std::string& source = "<config>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, double value);
    void set(const std::string& key, long long value);
    void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
    void set(const std::string& key, std::uint64_t value);
    void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
    void set(const std::string& key, const std::vector<int>& value);
    void set(const std::string& key, const std::vector<double>& value);

    // Getters return the fallback for a missing key and throw ConfigError on a
    // malformed value. Every read marks the key as used.
    std::string get(const std::string& key, const std::string& fallback) const;
    double get(const std::string& key, double fallback) const;
    int get(const std::string& key, int fallback) const;
    std::uint64_t get(const std::string& key, std::uint64_t fallback) const;
    bool get(const std::string& key, bool fallback) const;
    std::vector<int> get(const std::string& key, const std::vector<int>& fallback) const;
    std::vector<double> get(const std::string& key, const std::vector<double>& fallback) const;
    std::string require(const std::string& key) const;

    // Throws ConfigError naming every key that no getter has read.
    void reject_unused() const;
    const std::map<std::string, std::string>& values() const { return values_; }
    // Sorted, one key per line; parse(write(c)) == c.
    void write(std::ostream& out) const;

private:
    const std::string* find(const std::string& key) const;

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
    std::string source_ = "<config>";
};

// Readers start from the struct defaults and override present keys; each
// validates the result. Writers emit every field.
SyntheticMotionConfig read_synthetic(const Config& c, const std::string& prefix = "synth.");
TcnConfig read_tcn(const Config& c, const std::string& prefix = "tcn.");
LossWeights read_loss(const Config& c, const std::string& prefix = "loss.");
OcclusionConfig read_occlusion(const Config& c, const std::string& prefix = "occlusion.");
OptimizerConfig read_optimizer(const Config& c, const std::string& prefix, const OptimizerConfig& defaults);
TrainConfig read_train(const Config& c, const std::string& prefix = "train.");
DiscriminatorConfig read_discriminator(const Config& c, const std::string& prefix = "disc.");
AdversarialConfig read_adversarial(const Config& c, const std::string& prefix = "adversarial.");
IsoConfig read_iso(const Config& c, const std::string& prefix = "iso.");
CorruptionConfig read_corruption(const Config& c, const std::string& prefix = "corruption.");

void write_tcn(Config& c, const TcnConfig& cfg, const std::string& prefix = "tcn.");
void write_discriminator(Config& c, const DiscriminatorConfig& cfg, const std::string& prefix = "disc.");

}  // namespace mspose
