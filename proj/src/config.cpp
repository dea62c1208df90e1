#include "lidarharm/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "lidarharm/error.hpp"

namespace lidarharm {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::string bad(std::string_view key, std::string_view value, const char* expected)
{
    return "config key '" + std::string(key) + "': invalid value '" + std::string(value) + "' (expected " +
           expected + ")";
}

double to_double(std::string_view key, std::string_view v)
{
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(bad(key, v, "a real number"));
    return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v)
{
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(bad(key, v, "a non-negative integer"));
    return out;
}

std::uint16_t to_id(std::string_view key, std::string_view v)
{
    const std::uint64_t id = to_u64(key, v);
    if (id >= kDictionarySize)
        throw ConfigError(bad(key, v, "a scan id below 45"));
    return static_cast<std::uint16_t>(id);
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

constexpr std::string_view kCorruptionPrefix = "corruption.scan.";

} // namespace

void set_config_value(Config& c, std::string_view key, std::string_view value)
{
    const std::string v(value);
    auto u64 = [&] { return to_u64(key, value); };
    auto real = [&] { return to_double(key, value); };
    auto size = [&] { return static_cast<std::size_t>(u64()); };

    if (key == "seed")
        c.seed = u64();
    else if (key == "scene.x_size")
        c.scene.x_size = real();
    else if (key == "scene.y_size")
        c.scene.y_size = real();
    else if (key == "scene.density")
        c.scene.density = real();
    else if (key == "scene.n_strips")
        c.scene.n_strips = static_cast<int>(u64());
    else if (key == "scene.strip_overlap")
        c.scene.strip_overlap = real();
    else if (key == "scene.strip_width")
        c.scene.strip_width = real();
    else if (key == "scene.jitter")
        c.scene.jitter = real();
    else if (key == "scene.mix.ground")
        c.scene.mix.ground = real();
    else if (key == "scene.mix.building")
        c.scene.mix.building = real();
    else if (key == "scene.mix.vegetation")
        c.scene.mix.vegetation = real();
    else if (key == "scene.correlation_length")
        c.scene.correlation_length = real();
    else if (key == "scene.nugget")
        c.scene.nugget = real();
    else if (key == "corruption.curves")
        c.curves_path = v;
    else if (key == "corruption.pool")
        c.curve_pool = v;
    else if (key.starts_with(kCorruptionPrefix)) {
        const std::uint16_t id = to_id(key, key.substr(kCorruptionPrefix.size()));
        c.corruption[id] = v;
    } else if (key == "shift.h")
        c.shift.h = real();
    else if (key == "shift.v")
        c.shift.v = real();
    else if (key == "shift.l")
        c.shift.l = real();
    else if (key == "shift.s")
        c.shift.s = real();
    else if (key == "shift.form") {
        if (value == "one-minus")
            c.shift.form = ShiftForm::one_minus;
        else if (value == "floor")
            c.shift.form = ShiftForm::floor;
        else
            throw ConfigError(bad(key, value, "one-minus or floor"));
    } else if (key == "dataset.target_id")
        c.dataset.target_id = to_id(key, value);
    else if (key == "dataset.k")
        c.dataset.k = size();
    else if (key == "dataset.radius")
        c.dataset.radius = real();
    else if (key == "dataset.min_neighbors")
        c.dataset.min_neighbors = size();
    else if (key == "dataset.min_overlap")
        c.dataset.min_overlap = size();
    else if (key == "dataset.n_bins")
        c.dataset.n_bins = size();
    else if (key == "dataset.overlap_samples")
        c.dataset.overlap_samples = size();
    else if (key == "dataset.inscan_samples")
        c.dataset.inscan_samples = size();
    else if (key == "dataset.train_examples")
        c.dataset.train_examples = size();
    else if (key == "dataset.val_fraction")
        c.dataset.val_fraction = real();
    else if (key == "train.epochs")
        c.train.epochs = static_cast<int>(u64());
    else if (key == "train.batch")
        c.train.batch = size();
    else if (key == "train.lr_max")
        c.train.schedule.lr_max = real();
    else if (key == "train.lr_min")
        c.train.schedule.lr_min = real();
    else if (key == "train.peak_decay")
        c.train.schedule.peak_decay = real();
    else if (key == "train.dropout")
        c.train.dropout = real();
    else if (key == "train.loss") {
        if (value == "l1")
            c.train.loss = LossKind::l1;
        else if (value == "l2")
            c.train.loss = LossKind::l2;
        else
            throw ConfigError(bad(key, value, "l1 or l2"));
    } else if (key == "eval.source_id")
        c.eval.source_id = to_id(key, value);
    else if (key == "eval.tile_size")
        c.eval.tile_size = real();
    else if (key == "eval.k")
        c.eval.k = size();
    else if (key == "eval.radius")
        c.eval.radius = real();
    else if (key == "eval.colormap") {
        if (value != "gray" && value != "viridis")
            throw ConfigError(bad(key, value, "gray or viridis"));
        c.eval.colormap = v;
    } else if (key == "eval.cell_size")
        c.eval.cell_size = real();
    else if (key == "eval.hist_bins")
        c.eval.hist_bins = size();
    else
        throw ConfigError("unknown config key '" + std::string(key) + "'");
}

Config parse_config(std::string_view text)
{
    Config config;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        if (!seen.emplace(key).second)
            throw ConfigError("line " + std::to_string(line_no) + ": repeated key '" + std::string(key) + "'");
        try {
            set_config_value(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return config;
}

Config load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const Config& c)
{
    std::string out;
    auto put = [&](const std::string& key, const std::string& value) { out += key + " = " + value + "\n"; };
    put("seed", std::to_string(c.seed));
    put("scene.x_size", fmt(c.scene.x_size));
    put("scene.y_size", fmt(c.scene.y_size));
    put("scene.density", fmt(c.scene.density));
    put("scene.n_strips", std::to_string(c.scene.n_strips));
    put("scene.strip_overlap", fmt(c.scene.strip_overlap));
    put("scene.strip_width", fmt(c.scene.strip_width));
    put("scene.jitter", fmt(c.scene.jitter));
    put("scene.mix.ground", fmt(c.scene.mix.ground));
    put("scene.mix.building", fmt(c.scene.mix.building));
    put("scene.mix.vegetation", fmt(c.scene.mix.vegetation));
    put("scene.correlation_length", fmt(c.scene.correlation_length));
    put("scene.nugget", fmt(c.scene.nugget));
    if (!c.curves_path.empty())
        put("corruption.curves", c.curves_path);
    put("corruption.pool", c.curve_pool);
    for (const auto& [id, spec] : c.corruption)
        put(std::string(kCorruptionPrefix) + std::to_string(id), spec);
    put("shift.h", fmt(c.shift.h));
    put("shift.v", fmt(c.shift.v));
    put("shift.l", fmt(c.shift.l));
    put("shift.s", fmt(c.shift.s));
    put("shift.form", c.shift.form == ShiftForm::one_minus ? "one-minus" : "floor");
    put("dataset.target_id", std::to_string(c.dataset.target_id));
    put("dataset.k", std::to_string(c.dataset.k));
    put("dataset.radius", fmt(c.dataset.radius));
    put("dataset.min_neighbors", std::to_string(c.dataset.min_neighbors));
    put("dataset.min_overlap", std::to_string(c.dataset.min_overlap));
    put("dataset.n_bins", std::to_string(c.dataset.n_bins));
    put("dataset.overlap_samples", std::to_string(c.dataset.overlap_samples));
    put("dataset.inscan_samples", std::to_string(c.dataset.inscan_samples));
    put("dataset.train_examples", std::to_string(c.dataset.train_examples));
    put("dataset.val_fraction", fmt(c.dataset.val_fraction));
    put("train.epochs", std::to_string(c.train.epochs));
    put("train.batch", std::to_string(c.train.batch));
    put("train.lr_max", fmt(c.train.schedule.lr_max));
    put("train.lr_min", fmt(c.train.schedule.lr_min));
    put("train.peak_decay", fmt(c.train.schedule.peak_decay));
    put("train.dropout", fmt(c.train.dropout));
    put("train.loss", c.train.loss == LossKind::l1 ? "l1" : "l2");
    put("eval.source_id", std::to_string(c.eval.source_id));
    put("eval.tile_size", fmt(c.eval.tile_size));
    put("eval.k", std::to_string(c.eval.k));
    put("eval.radius", fmt(c.eval.radius));
    put("eval.colormap", c.eval.colormap);
    put("eval.cell_size", fmt(c.eval.cell_size));
    put("eval.hist_bins", std::to_string(c.eval.hist_bins));
    return out;
}

void finalize(Config& c)
{
    c.scene.seed = c.seed;
    c.train.seed = c.seed;
    validate(c.scene);
    validate(c.shift);
    validate(c.train);
    const auto& d = c.dataset;
    if (d.k < 1 || !(d.radius > 0.0))
        throw ConfigError("dataset.k must be >= 1 and dataset.radius > 0");
    if (d.min_neighbors < 1 || d.min_neighbors > d.k)
        throw ConfigError("dataset.min_neighbors must lie in [1, dataset.k]");
    if (d.n_bins < 2)
        throw ConfigError("dataset.n_bins must be at least 2");
    if (!(d.val_fraction > 0.0 && d.val_fraction < 1.0))
        throw ConfigError("dataset.val_fraction must lie in (0, 1)");
    if (d.train_examples < 10)
        throw ConfigError("dataset.train_examples must be at least 10");
    if (static_cast<int>(d.target_id) >= c.scene.n_strips)
        throw ConfigError("dataset.target_id has no matching strip");
    if (static_cast<int>(c.eval.source_id) >= c.scene.n_strips || c.eval.source_id == d.target_id)
        throw ConfigError("eval.source_id must name a strip other than the target");
    if (c.eval.k < 1 || !(c.eval.radius > 0.0) || !(c.eval.tile_size > 0.0) || !(c.eval.cell_size > 0.0))
        throw ConfigError("eval.k, eval.radius, eval.tile_size and eval.cell_size must be positive");
    if (c.eval.hist_bins < 2)
        throw ConfigError("eval.hist_bins must be at least 2");
}

std::string curve_for_scan(const Config& c, std::uint16_t scan_id)
{
    if (const auto it = c.corruption.find(scan_id); it != c.corruption.end())
        return it->second;
    if (scan_id == c.dataset.target_id)
        return "identity";
    std::vector<std::string> pool;
    std::string_view rest = c.curve_pool;
    while (!rest.empty()) {
        const std::size_t comma = rest.find(',');
        const std::string_view item = trim(rest.substr(0, comma));
        if (!item.empty())
            pool.emplace_back(item);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (pool.empty())
        throw ConfigError("corruption.pool is empty");
    Rng rng = make_rng(c.seed, {0xc0, scan_id});
    return pool[uniform_index(rng, pool.size())];
}

} // namespace lidarharm
