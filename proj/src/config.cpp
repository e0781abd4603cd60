#include "mspose/config.hpp"

#include "mspose/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mspose {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string format_double(double v)
{
    // Shortest text that reads back to the same double.
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text)
{
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size())
        throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
    return v;
}

long long parse_integer(const std::string& key, const std::string& text)
{
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError("config key '" + key + "': expected an integer, got '" + text + "'");
    return v;
}

}  // namespace

Config Config::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse(in, path.string());
}

Config Config::parse(std::istream& in, const std::string& source)
{
    Config c;
    c.source_ = source;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(number) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(number) + ": empty key");
        if (!c.values_.emplace(key, value).second)
            throw ConfigError(source + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    }
    return c;
}

void Config::set(const std::string& key, double value) { values_[key] = format_double(value); }
void Config::set(const std::string& key, long long value) { values_[key] = std::to_string(value); }
void Config::set(const std::string& key, std::uint64_t value) { values_[key] = std::to_string(value); }

void Config::set(const std::string& key, const std::vector<int>& value)
{
    std::string s;
    for (std::size_t i = 0; i < value.size(); ++i) s += (i ? ", " : "") + std::to_string(value[i]);
    values_[key] = s;
}

void Config::set(const std::string& key, const std::vector<double>& value)
{
    std::string s;
    for (std::size_t i = 0; i < value.size(); ++i) s += (i ? ", " : "") + format_double(value[i]);
    values_[key] = s;
}

const std::string* Config::find(const std::string& key) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
}

std::string Config::get(const std::string& key, const std::string& fallback) const
{
    const std::string* v = find(key);
    return v ? *v : fallback;
}

double Config::get(const std::string& key, double fallback) const
{
    const std::string* v = find(key);
    return v ? parse_double(key, *v) : fallback;
}

int Config::get(const std::string& key, int fallback) const
{
    const std::string* v = find(key);
    if (!v) return fallback;
    const long long x = parse_integer(key, *v);
    if (x < INT32_MIN || x > INT32_MAX) throw ConfigError("config key '" + key + "': integer out of range");
    return static_cast<int>(x);
}

std::uint64_t Config::get(const std::string& key, std::uint64_t fallback) const
{
    const std::string* v = find(key);
    if (!v) return fallback;
    std::uint64_t x = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
    if (ec != std::errc() || ptr != v->data() + v->size())
        throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + *v + "'");
    return x;
}

bool Config::get(const std::string& key, bool fallback) const
{
    const std::string* v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + *v + "'");
}

std::vector<int> Config::get(const std::string& key, const std::vector<int>& fallback) const
{
    const std::string* v = find(key);
    if (!v) return fallback;
    std::vector<int> out;
    for (const auto& item : split_list(*v)) out.push_back(static_cast<int>(parse_integer(key, item)));
    return out;
}

std::vector<double> Config::get(const std::string& key, const std::vector<double>& fallback) const
{
    const std::string* v = find(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(*v)) out.push_back(parse_double(key, item));
    return out;
}

std::string Config::require(const std::string& key) const
{
    const std::string* v = find(key);
    if (!v) throw ConfigError(source_ + ": missing required key '" + key + "'");
    return *v;
}

void Config::reject_unused() const
{
    std::string unknown;
    for (const auto& [k, v] : values_)
        if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    if (!unknown.empty()) throw ConfigError(source_ + ": unknown keys: " + unknown);
}

void Config::write(std::ostream& out) const
{
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
}

SyntheticMotionConfig read_synthetic(const Config& c, const std::string& p)
{
    SyntheticMotionConfig s;
    s.num_sequences = c.get(p + "num_sequences", s.num_sequences);
    s.num_subjects = c.get(p + "num_subjects", s.num_subjects);
    s.frames = c.get(p + "frames", s.frames);
    s.body_scale_min = c.get(p + "body_scale_min", s.body_scale_min);
    s.body_scale_max = c.get(p + "body_scale_max", s.body_scale_max);
    s.bone_jitter = c.get(p + "bone_jitter", s.bone_jitter);
    s.angle_step = c.get(p + "angle_step", s.angle_step);
    s.velocity_decay = c.get(p + "velocity_decay", s.velocity_decay);
    s.center_pull = c.get(p + "center_pull", s.center_pull);
    s.speed_multipliers = c.get(p + "speed_multipliers", s.speed_multipliers);
    s.view_yaws_deg = c.get(p + "view_yaws_deg", s.view_yaws_deg);
    s.crop_mm = c.get(p + "crop_mm", s.crop_mm);
    s.crop_px = c.get(p + "crop_px", s.crop_px);
    s.noise_px = c.get(p + "noise_px", s.noise_px);
    s.visible_conf_min = c.get(p + "visible_conf_min", s.visible_conf_min);
    s.occluded_conf_min = c.get(p + "occluded_conf_min", s.occluded_conf_min);
    s.occluded_conf_max = c.get(p + "occluded_conf_max", s.occluded_conf_max);
    s.mask_occluded = c.get(p + "mask_occluded", s.mask_occluded);
    s.validate();
    return s;
}

TcnConfig read_tcn(const Config& c, const std::string& p)
{
    TcnConfig t;
    t.embed_dim = c.get(p + "embed_dim", t.embed_dim);
    t.window_len = c.get(p + "window_len", t.window_len);
    t.strides = c.get(p + "strides", t.strides);
    t.channels = c.get(p + "channels", t.channels);
    t.kernel = c.get(p + "kernel", t.kernel);
    t.layers = c.get(p + "layers", t.layers);
    t.use_embedding = c.get(p + "use_embedding", t.use_embedding);
    t.tkcs_interval = c.get(p + "tkcs_interval", t.tkcs_interval);
    t.output_scale_mm = c.get(p + "output_scale_mm", t.output_scale_mm);
    t.validate();
    return t;
}

void write_tcn(Config& c, const TcnConfig& t, const std::string& p)
{
    c.set(p + "embed_dim", t.embed_dim);
    c.set(p + "window_len", t.window_len);
    c.set(p + "strides", t.strides);
    c.set(p + "channels", t.channels);
    c.set(p + "kernel", t.kernel);
    c.set(p + "layers", t.layers);
    c.set(p + "use_embedding", t.use_embedding);
    c.set(p + "tkcs_interval", t.tkcs_interval);
    c.set(p + "output_scale_mm", t.output_scale_mm);
}

LossWeights read_loss(const Config& c, const std::string& p)
{
    LossWeights w;
    w.w1 = c.get(p + "w1", w.w1);
    w.w2 = c.get(p + "w2", w.w2);
    w.w3 = c.get(p + "w3", w.w3);
    w.validate();
    return w;
}

OcclusionConfig read_occlusion(const Config& c, const std::string& p)
{
    OcclusionConfig o;
    o.p1 = c.get(p + "p1", o.p1);
    o.p2 = c.get(p + "p2", o.p2);
    o.p3 = c.get(p + "p3", o.p3);
    o.p4 = c.get(p + "p4", o.p4);
    o.max_len = c.get(p + "max_len", o.max_len);
    o.block_at_tail = c.get(p + "block_at_tail", o.block_at_tail);
    o.shift_prob = c.get(p + "shift_prob", o.shift_prob);
    o.swap_prob = c.get(p + "swap_prob", o.swap_prob);
    o.shift_px = c.get(p + "shift_px", o.shift_px);
    o.crop_px = c.get(p + "crop_px", o.crop_px);
    o.validate();
    return o;
}

OptimizerConfig read_optimizer(const Config& c, const std::string& p, const OptimizerConfig& defaults)
{
    OptimizerConfig o = defaults;
    o.kind = parse_optimizer(c.get(p + "kind", to_string(o.kind)));
    o.lr = c.get(p + "lr", o.lr);
    o.momentum = c.get(p + "momentum", o.momentum);
    o.beta1 = c.get(p + "beta1", o.beta1);
    o.beta2 = c.get(p + "beta2", o.beta2);
    o.eps = c.get(p + "eps", o.eps);
    o.clip_norm = c.get(p + "clip_norm", o.clip_norm);
    o.validate();
    return o;
}

TrainConfig read_train(const Config& c, const std::string& p)
{
    TrainConfig t;
    t.steps = c.get(p + "steps", t.steps);
    t.batch = c.get(p + "batch", t.batch);
    t.optimizer = read_optimizer(c, p + "optimizer.", t.optimizer);
    t.final_lr_fraction = c.get(p + "final_lr_fraction", t.final_lr_fraction);
    t.pred_frames = c.get(p + "pred_frames", t.pred_frames);
    t.use_multiview = c.get(p + "use_multiview", t.use_multiview);
    t.use_2d = c.get(p + "use_2d", t.use_2d);
    t.augment = c.get(p + "augment", t.augment);
    t.disc_optimizer = read_optimizer(c, p + "disc_optimizer.", t.disc_optimizer);
    t.disc_scaler_windows = c.get(p + "disc_scaler_windows", t.disc_scaler_windows);
    t.weights = read_loss(c);
    t.occlusion = read_occlusion(c);
    t.validate();
    return t;
}

DiscriminatorConfig read_discriminator(const Config& c, const std::string& p)
{
    DiscriminatorConfig d;
    d.hidden = c.get(p + "hidden", d.hidden);
    d.leaky_slope = c.get(p + "leaky_slope", d.leaky_slope);
    d.interval = c.get(p + "interval", d.interval);
    d.validate();
    return d;
}

void write_discriminator(Config& c, const DiscriminatorConfig& d, const std::string& p)
{
    c.set(p + "hidden", d.hidden);
    c.set(p + "leaky_slope", d.leaky_slope);
    c.set(p + "interval", d.interval);
}

AdversarialConfig read_adversarial(const Config& c, const std::string& p)
{
    AdversarialConfig a;
    a.steps = c.get(p + "steps", a.steps);
    a.batch = c.get(p + "batch", a.batch);
    a.optimizer = read_optimizer(c, p + "optimizer.", a.optimizer);
    if (a.steps < 0 || a.batch < 2) throw ConfigError("adversarial: steps must be >= 0 and batch >= 2");
    return a;
}

IsoConfig read_iso(const Config& c, const std::string& p)
{
    IsoConfig i;
    i.mode = parse_weight_mode(c.get(p + "weight_mode", to_string(i.mode)));
    i.sigma = c.get(p + "sigma", i.sigma);
    i.threshold = c.get(p + "threshold", i.threshold);
    i.lambda1 = c.get(p + "lambda1", i.lambda1);
    i.lambda2 = c.get(p + "lambda2", i.lambda2);
    i.iterations = c.get(p + "iterations", i.iterations);
    i.step_size = c.get(p + "step_size", i.step_size);
    i.momentum = c.get(p + "momentum", i.momentum);
    i.refit_every = c.get(p + "refit_every", i.refit_every);
    i.heatmap_size = c.get(p + "heatmap_size", i.heatmap_size);
    i.window_len = c.get(p + "window_len", i.window_len);
    i.calibration.conf = c.get(p + "calibration_conf", i.calibration.conf);
    i.calibration.value = c.get(p + "calibration_value", i.calibration.value);
    i.validate();
    return i;
}

CorruptionConfig read_corruption(const Config& c, const std::string& p)
{
    CorruptionConfig k;
    k.fraction = c.get(p + "fraction", k.fraction);
    k.min_px = c.get(p + "min_px", k.min_px);
    k.max_px = c.get(p + "max_px", k.max_px);
    k.conf_min = c.get(p + "conf_min", k.conf_min);
    k.conf_max = c.get(p + "conf_max", k.conf_max);
    k.clean_conf_min = c.get(p + "clean_conf_min", k.clean_conf_min);
    k.clean_noise_px = c.get(p + "clean_noise_px", k.clean_noise_px);
    k.crop_px = c.get(p + "crop_px", k.crop_px);
    if (!(k.fraction >= 0.0 && k.fraction <= 1.0) || !(k.min_px >= 0.0 && k.max_px >= k.min_px) ||
        !(k.conf_min >= 0.0 && k.conf_max <= 1.0 && k.conf_min <= k.conf_max) ||
        !(k.clean_conf_min >= 0.0 && k.clean_conf_min <= 1.0) || !(k.clean_noise_px >= 0.0) || !(k.crop_px > 0.0))
        throw ConfigError("corruption: values out of range");
    return k;
}

}  // namespace mspose
