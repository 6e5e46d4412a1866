#include "atomdetect/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace atomdetect::config {

namespace {

int line_of(const YAML::Node& node)
{
    return node.Mark().line + 1;
}

[[noreturn]] void fail(const YAML::Node& node, const std::string& what)
{
    if (node.Mark().is_null())
        throw ConfigError(what);
    throw ConfigError(fmt::format("line {}: {}", line_of(node), what));
}

// Checks that a section is a map with known keys only.
void check_keys(const YAML::Node& section, const std::string& name, const std::set<std::string>& allowed)
{
    if (!section.IsMap())
        fail(section, fmt::format("'{}' must be a mapping", name));
    for (const auto& kv : section) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key))
            fail(kv.first, fmt::format("unknown key '{}.{}'", name, key));
    }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& path, const char* type)
{
    if (!node.IsScalar())
        fail(node, fmt::format("'{}' must be a {}", path, type));
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        fail(node, fmt::format("'{}' must be a {}, got '{}'", path, type, node.Scalar()));
    }
}

double finite(const YAML::Node& node, const std::string& path)
{
    const double v = scalar<double>(node, path, "number");
    if (!std::isfinite(v))
        fail(node, fmt::format("'{}' must be finite", path));
    return v;
}

struct Reader
{
    YAML::Node section;
    std::string name;

    bool has(const char* key) const { return section && section[key]; }
    YAML::Node at(const char* key) const { return section[key]; }
    std::string path(const char* key) const { return name + "." + key; }

    void number(const char* key, double& out, const std::function<bool(double)>& ok = {},
                const char* rule = "") const
    {
        if (!has(key))
            return;
        const double v = finite(at(key), path(key));
        if (ok && !ok(v))
            fail(at(key), fmt::format("'{}' {}", path(key), rule));
        out = v;
    }
    void number(const char* key, std::optional<double>& out, const std::function<bool(double)>& ok = {},
                const char* rule = "") const
    {
        if (!has(key))
            return;
        double v = 0.0;
        number(key, v, ok, rule);
        out = v;
    }
    void integer(const char* key, int& out, int min) const
    {
        if (!has(key))
            return;
        const int v = scalar<int>(at(key), path(key), "integer");
        if (v < min)
            fail(at(key), fmt::format("'{}' must be >= {}", path(key), min));
        out = v;
    }
    void flag(const char* key, bool& out) const
    {
        if (has(key))
            out = scalar<bool>(at(key), path(key), "boolean");
    }
    void text(const char* key, std::string& out) const
    {
        if (has(key))
            out = scalar<std::string>(at(key), path(key), "string");
    }
};

const auto positive = [](double v) { return v > 0.0; };
const auto non_negative = [](double v) { return v >= 0.0; };

void read_species(const YAML::Node& node, SpeciesConfig& s)
{
    check_keys(node, "species", {"name", "mass_kg", "gamma_per_s", "wavelength_nm"});
    Reader r{node, "species"};
    r.text("name", s.name);
    if (s.name != "cesium" && s.name != "custom")
        fail(r.at("name"), "'species.name' must be 'cesium' or 'custom'");
    r.number("mass_kg", s.mass_kg, positive, "must be positive");
    r.number("gamma_per_s", s.gamma_per_s, positive, "must be positive");
    r.number("wavelength_nm", s.wavelength_nm, positive, "must be positive");
    if (s.name == "custom" && (!s.mass_kg || !s.gamma_per_s || !s.wavelength_nm))
        fail(node, "custom species needs mass_kg, gamma_per_s and wavelength_nm");
}

void read_profile(const YAML::Node& node, ProfileConfig& p)
{
    check_keys(node, "profile", {"x_start_um", "segments"});
    Reader r{node, "profile"};
    r.number("x_start_um", p.x_start_um);
    if (!r.has("segments"))
        return;
    const auto list = r.at("segments");
    if (!list.IsSequence() || list.size() == 0)
        fail(list, "'profile.segments' must be a non-empty list");
    p.segments.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto item = list[i];
        const std::string name = fmt::format("profile.segments[{}]", i);
        check_keys(item, name, {"width_um", "detuning_per_s", "rabi_per_s"});
        Reader s{item, name};
        SegmentConfig seg;
        s.number("width_um", seg.width_um, positive, "must be positive");
        s.number("detuning_per_s", seg.detuning_per_s);
        s.number("rabi_per_s", seg.rabi_per_s, non_negative, "must be >= 0");
        p.segments.push_back(seg);
    }
}

void read_grid(const YAML::Node& node, GridConfig& g)
{
    check_keys(node, "grid", {"v_min_cm_per_s", "v_max_cm_per_s", "n", "weights"});
    Reader r{node, "grid"};
    r.number("v_min_cm_per_s", g.v_min_cm_per_s, positive, "must be positive");
    r.number("v_max_cm_per_s", g.v_max_cm_per_s, positive, "must be positive");
    r.integer("n", g.n, 1);
    if (g.n == 1 && g.v_max_cm_per_s != g.v_min_cm_per_s && r.has("n"))
        fail(r.at("n"), "'grid.n' = 1 needs v_min_cm_per_s == v_max_cm_per_s");
    if (g.n > 1 && !(g.v_max_cm_per_s > g.v_min_cm_per_s))
        fail(r.has("v_max_cm_per_s") ? r.at("v_max_cm_per_s") : node, "'grid.v_max_cm_per_s' must exceed v_min_cm_per_s");
    if (r.has("weights")) {
        const auto list = r.at("weights");
        if (!list.IsSequence())
            fail(list, "'grid.weights' must be a list");
        g.weights.clear();
        double sum = 0.0;
        for (std::size_t i = 0; i < list.size(); ++i) {
            const double w = finite(list[i], "grid.weights");
            if (w < 0.0)
                fail(list[i], "'grid.weights' entries must be >= 0");
            g.weights.push_back(w);
            sum += w;
        }
        if (g.weights.size() != static_cast<std::size_t>(g.n))
            fail(list, fmt::format("'grid.weights' has {} entries, grid.n is {}", g.weights.size(), g.n));
        if (!(sum > 0.0))
            fail(list, "'grid.weights' must not all be zero");
    }
}

void read_optimize(const YAML::Node& node, OptimizeConfig& o)
{
    check_keys(node, "optimize",
               {"n_segments", "length_um", "x_start_um", "kappa", "multistart", "seed", "tie_detuning",
                "free_widths", "min_width_fraction", "detuning_min_per_s", "detuning_max_per_s",
                "rabi_max_per_s"});
    Reader r{node, "optimize"};
    r.integer("n_segments", o.n_segments, 1);
    r.number("length_um", o.length_um, positive, "must be positive");
    r.number("x_start_um", o.x_start_um);
    r.number("kappa", o.kappa, [](double v) { return v > 0.0 && v < 1.0; }, "must lie in (0, 1)");
    r.integer("multistart", o.multistart, 0);
    if (r.has("seed")) {
        const auto n = r.at("seed");
        if (n.IsScalar() && !n.Scalar().empty() && n.Scalar().front() == '-')
            fail(n, "'optimize.seed' must be a non-negative integer");
        o.seed = scalar<std::uint64_t>(n, "optimize.seed", "non-negative integer");
    }
    r.flag("tie_detuning", o.tie_detuning);
    r.flag("free_widths", o.free_widths);
    r.number("min_width_fraction", o.min_width_fraction, [](double v) { return v > 0.0 && v < 1.0; },
             "must lie in (0, 1)");
    r.number("detuning_min_per_s", o.detuning_min_per_s);
    r.number("detuning_max_per_s", o.detuning_max_per_s);
    r.number("rabi_max_per_s", o.rabi_max_per_s, positive, "must be positive");
    if (o.detuning_min_per_s && o.detuning_max_per_s && !(*o.detuning_max_per_s > *o.detuning_min_per_s))
        fail(r.at("detuning_max_per_s"), "'optimize.detuning_max_per_s' must exceed detuning_min_per_s");
    if (o.free_widths && o.min_width_fraction * o.n_segments >= 1.0)
        fail(node, "'optimize.min_width_fraction' times n_segments must be below 1");
}

void read_wavepacket(const YAML::Node& node, WavepacketConfig& w)
{
    check_keys(node, "wavepacket", {"v_mean_cm_per_s", "sigma_x_um", "x0_um", "mode", "t_max_us", "n_times"});
    Reader r{node, "wavepacket"};
    r.number("v_mean_cm_per_s", w.v_mean_cm_per_s, positive, "must be positive");
    r.number("sigma_x_um", w.sigma_x_um, positive, "must be positive");
    r.number("x0_um", w.x0_um);
    if (r.has("mode")) {
        std::string mode;
        r.text("mode", mode);
        if (mode == "one_channel")
            w.mode = ChannelMode::one_channel;
        else if (mode == "two_channel")
            w.mode = ChannelMode::two_channel;
        else
            fail(r.at("mode"), "'wavepacket.mode' must be one_channel or two_channel");
    }
    r.number("t_max_us", w.t_max_us, positive, "must be positive");
    r.integer("n_times", w.n_times, 2);
}

RunConfig from_node(const YAML::Node& root)
{
    RunConfig c;
    if (!root || root.IsNull())
        return c;
    check_keys(root, "config",
               {"species", "profile", "grid", "optimize", "wavepacket", "validate", "output", "threads"});
    if (root["species"])
        read_species(root["species"], c.species);
    if (root["profile"])
        read_profile(root["profile"], c.profile);
    if (root["grid"])
        read_grid(root["grid"], c.grid);
    if (root["optimize"])
        read_optimize(root["optimize"], c.optimize);
    if (root["wavepacket"])
        read_wavepacket(root["wavepacket"], c.wavepacket);
    if (root["validate"]) {
        check_keys(root["validate"], "validate", {"kappa"});
        Reader{root["validate"], "validate"}.number(
            "kappa", c.validate.kappa, [](double v) { return v > 0.0 && v < 1.0; }, "must lie in (0, 1)");
    }
    if (root["output"]) {
        check_keys(root["output"], "output", {"directory"});
        Reader{root["output"], "output"}.text("directory", c.output.directory);
        if (c.output.directory.empty())
            fail(root["output"]["directory"], "'output.directory' must not be empty");
    }
    if (root["threads"]) {
        const int t = scalar<int>(root["threads"], "threads", "integer");
        if (t < 1)
            fail(root["threads"], "'threads' must be >= 1");
        c.threads = static_cast<unsigned>(t);
    }
    return c;
}

YAML::Node load_text(const std::string& text)
{
    try {
        return YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(fmt::format("line {}: {}", e.mark.line + 1, e.msg));
    }
}

std::string emit(const YAML::Node& node)
{
    YAML::Emitter out;
    out << node;
    return std::string(out.c_str()) + "\n";
}

// Shortest representation that reads back to the same double.
std::string num(double v)
{
    return fmt::format("{}", v);
}

YAML::Node to_node(const RunConfig& c)
{
    YAML::Node root;
    auto& s = c.species;
    root["species"]["name"] = s.name;
    if (s.mass_kg)
        root["species"]["mass_kg"] = num(*s.mass_kg);
    if (s.gamma_per_s)
        root["species"]["gamma_per_s"] = num(*s.gamma_per_s);
    if (s.wavelength_nm)
        root["species"]["wavelength_nm"] = num(*s.wavelength_nm);

    root["profile"]["x_start_um"] = num(c.profile.x_start_um);
    YAML::Node segs(YAML::NodeType::Sequence);
    for (const auto& seg : c.profile.segments) {
        YAML::Node n;
        n["width_um"] = num(seg.width_um);
        n["detuning_per_s"] = num(seg.detuning_per_s);
        n["rabi_per_s"] = num(seg.rabi_per_s);
        n.SetStyle(YAML::EmitterStyle::Flow);
        segs.push_back(n);
    }
    root["profile"]["segments"] = segs;

    root["grid"]["v_min_cm_per_s"] = num(c.grid.v_min_cm_per_s);
    root["grid"]["v_max_cm_per_s"] = num(c.grid.v_max_cm_per_s);
    root["grid"]["n"] = c.grid.n;
    if (!c.grid.weights.empty()) {
        YAML::Node w(YAML::NodeType::Sequence);
        for (double x : c.grid.weights)
            w.push_back(num(x));
        w.SetStyle(YAML::EmitterStyle::Flow);
        root["grid"]["weights"] = w;
    }

    const auto& o = c.optimize;
    auto opt = root["optimize"];
    opt["n_segments"] = o.n_segments;
    opt["length_um"] = num(o.length_um);
    opt["x_start_um"] = num(o.x_start_um);
    opt["kappa"] = num(o.kappa);
    opt["multistart"] = o.multistart;
    opt["seed"] = o.seed;
    opt["tie_detuning"] = o.tie_detuning;
    opt["free_widths"] = o.free_widths;
    opt["min_width_fraction"] = num(o.min_width_fraction);
    if (o.detuning_min_per_s)
        opt["detuning_min_per_s"] = num(*o.detuning_min_per_s);
    if (o.detuning_max_per_s)
        opt["detuning_max_per_s"] = num(*o.detuning_max_per_s);
    if (o.rabi_max_per_s)
        opt["rabi_max_per_s"] = num(*o.rabi_max_per_s);

    const auto& w = c.wavepacket;
    auto wp = root["wavepacket"];
    wp["v_mean_cm_per_s"] = num(w.v_mean_cm_per_s);
    wp["sigma_x_um"] = num(w.sigma_x_um);
    wp["x0_um"] = num(w.x0_um);
    wp["mode"] = w.mode == ChannelMode::one_channel ? "one_channel" : "two_channel";
    if (w.t_max_us)
        wp["t_max_us"] = num(*w.t_max_us);
    wp["n_times"] = w.n_times;

    root["validate"]["kappa"] = num(c.validate.kappa);
    root["output"]["directory"] = c.output.directory;
    root["threads"] = c.threads;
    return root;
}

} // namespace

RunConfig parse(const std::string& text)
{
    const YAML::Node root = load_text(text);
    try {
        return from_node(root);
    } catch (const YAML::Exception& e) {
        throw ConfigError(fmt::format("line {}: {}", e.mark.line + 1, e.msg));
    }
}

RunConfig load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ":" + e.what());
    }
}

std::string serialize(const RunConfig& config)
{
    return emit(to_node(config));
}

RunConfig apply_environment(const RunConfig& config, const std::vector<std::string>& environment,
                            const std::string& prefix)
{
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& entry : environment) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos || entry.compare(0, prefix.size(), prefix) != 0)
            continue;
        std::string name = entry.substr(prefix.size(), eq - prefix.size());
        if (name.find("__") == std::string::npos)
            continue;   // plain names belong to command-line flags
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
        overrides.emplace_back(name, entry.substr(eq + 1));
    }
    if (overrides.empty())
        return config;
    std::sort(overrides.begin(), overrides.end());

    YAML::Node root = to_node(config);
    for (const auto& [name, value] : overrides) {
        const auto split = name.find("__");
        const std::string section = name.substr(0, split), key = name.substr(split + 2);
        const std::string var = prefix + name;
        YAML::Node parsed;
        try {
            parsed = YAML::Load(value);
        } catch (const YAML::Exception& e) {
            throw ConfigError(fmt::format("environment {}: {}", var, e.msg));
        }
        if (!root[section] || !root[section].IsMap())
            throw ConfigError(fmt::format("environment {}: unknown section '{}'", var, section));
        root[section][key] = parsed;
    }
    try {
        return from_node(load_text(emit(root)));
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("environment override: ") + e.what());
    }
}

AtomSpecies make_species(const RunConfig& config)
{
    const auto& s = config.species;
    AtomSpecies sp = cesium_default();
    if (s.name == "custom")
        sp.name = "custom";
    if (s.mass_kg)
        sp.mass_over_hbar = convert::s_per_m2_to_us_per_um2(*s.mass_kg / si::hbar);
    if (s.gamma_per_s)
        sp.gamma = convert::per_s_to_per_us(*s.gamma_per_s);
    if (s.wavelength_nm)
        sp.lambda_laser = convert::nm_to_um(*s.wavelength_nm);
    sp.validate();
    return sp;
}

LaserProfile make_profile(const RunConfig& config)
{
    LaserProfile p;
    p.species = make_species(config);
    p.x_start = config.profile.x_start_um;
    for (const auto& s : config.profile.segments)
        p.segments.push_back({s.width_um, convert::per_s_to_per_us(s.detuning_per_s),
                              convert::per_s_to_per_us(s.rabi_per_s)});
    p.validate();
    return p;
}

std::vector<double> grid_velocities(const RunConfig& config)
{
    const auto& g = config.grid;
    std::vector<double> v(static_cast<std::size_t>(g.n));
    for (int j = 0; j < g.n; ++j)
        v[static_cast<std::size_t>(j)] =
            g.n == 1 ? g.v_min_cm_per_s : g.v_min_cm_per_s + (g.v_max_cm_per_s - g.v_min_cm_per_s) * j / (g.n - 1);
    return v;
}

KGrid make_grid(const RunConfig& config)
{
    const auto sp = make_species(config);
    KGrid grid;
    for (double v : grid_velocities(config))
        grid.k.push_back(velocity_to_wavenumber(convert::cm_per_s_to_um_per_us(v), sp));
    const auto& w = config.grid.weights;
    if (w.empty()) {
        grid.weight.assign(grid.k.size(), 1.0 / static_cast<double>(grid.k.size()));
    } else {
        double sum = 0.0;
        for (double x : w)
            sum += x;
        for (double x : w)
            grid.weight.push_back(x / sum);
    }
    return grid;
}

OptimizationProblem make_problem(const RunConfig& config)
{
    const auto& o = config.optimize;
    OptimizationProblem p;
    p.species = make_species(config);
    p.grid = make_grid(config);
    p.n_segments = o.n_segments;
    p.total_length = o.length_um;
    p.x_start = o.x_start_um;
    p.kappa = o.kappa;
    p.bounds = ParameterBounds::defaults(p.species);
    if (o.detuning_min_per_s)
        p.bounds.detuning_min = convert::per_s_to_per_us(*o.detuning_min_per_s);
    if (o.detuning_max_per_s)
        p.bounds.detuning_max = convert::per_s_to_per_us(*o.detuning_max_per_s);
    if (o.rabi_max_per_s)
        p.bounds.rabi_max = convert::per_s_to_per_us(*o.rabi_max_per_s);
    p.multistart = o.multistart;
    p.seed = o.seed;
    p.tie_detuning = o.tie_detuning;
    p.free_widths = o.free_widths;
    p.min_width_fraction = o.min_width_fraction;
    p.threads = config.threads;
    p.validate();
    return p;
}

WavepacketSpec make_wavepacket(const RunConfig& config)
{
    const auto& w = config.wavepacket;
    WavepacketSpec spec{w.v_mean_cm_per_s, w.sigma_x_um, w.x0_um};
    spec.validate(make_species(config));
    return spec;
}

} // namespace atomdetect::config
