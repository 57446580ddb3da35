#include "episode_io.hpp"

#include "binary_io.hpp"
#include "error.hpp"
#include "rng.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rw {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

const std::string& require_key(const Manifest& m, const std::string& key)
{
    auto it = m.find(key);
    if (it == m.end()) fail(ErrorCode::malformed_file, "manifest missing key '" + key + "'");
    return it->second;
}

long long parse_int(const Manifest& m, const std::string& key)
{
    const std::string& v = require_key(m, key);
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        fail(ErrorCode::malformed_file, "manifest key '" + key + "' is not an integer: " + v);
    return out;
}

double parse_double(const Manifest& m, const std::string& key)
{
    const std::string& v = require_key(m, key);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        fail(ErrorCode::malformed_file, "manifest key '" + key + "' is not a number: " + v);
    }
}

struct ArraySpec {
    std::string dtype;
    std::vector<std::size_t> shape;
    std::string file;
};

ArraySpec parse_array(const Manifest& m, const std::string& name)
{
    std::istringstream is(require_key(m, "array." + name));
    ArraySpec spec;
    std::string dims;
    if (!(is >> spec.dtype >> dims >> spec.file))
        fail(ErrorCode::malformed_file, "array declaration for '" + name + "' is malformed");
    std::istringstream ds(dims);
    std::string tok;
    while (std::getline(ds, tok, ',')) {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            fail(ErrorCode::malformed_file, "array '" + name + "' has a malformed shape");
        spec.shape.push_back(v);
    }
    return spec;
}

std::size_t numel(const std::vector<std::size_t>& shape)
{
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_text(std::initializer_list<std::size_t> dims)
{
    std::string s;
    for (auto d : dims) s += (s.empty() ? "" : ",") + std::to_string(d);
    return s;
}

void expect_shape(const ArraySpec& spec, const std::string& name, const std::string& dtype,
                  std::initializer_list<std::size_t> expected)
{
    if (spec.dtype != dtype) fail(ErrorCode::malformed_file, "array '" + name + "' has dtype " + spec.dtype);
    if (spec.shape != std::vector<std::size_t>(expected))
        fail(ErrorCode::shape_mismatch, "array '" + name + "' shape does not match the world config");
}

}  // namespace

Manifest read_manifest(const fs::path& file)
{
    std::ifstream in(file);
    if (!in) fail(ErrorCode::io, "cannot open manifest " + file.string());
    Manifest m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::malformed_file, file.string() + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) fail(ErrorCode::malformed_file, file.string() + ":" + std::to_string(lineno) + ": empty key");
        m[key] = trim(line.substr(eq + 1));
    }
    return m;
}

void write_manifest(const Manifest& m, const fs::path& file)
{
    std::ofstream out(file);
    if (!out) fail(ErrorCode::io, "cannot write manifest " + file.string());
    for (const auto& [k, v] : m) out << k << " = " << v << '\n';
    if (!out) fail(ErrorCode::io, "failed writing manifest " + file.string());
}

void save_episode(const SceneEpisode& ep, const fs::path& dir)
{
    const WorldConfig& c = ep.config;
    fs::create_directories(dir);
    const auto frames = static_cast<std::size_t>(c.frame_count());
    const auto h = static_cast<std::size_t>(c.bev_h);
    const auto w = static_cast<std::size_t>(c.bev_w);
    const auto z = static_cast<std::size_t>(c.z_bins);
    const auto ch = static_cast<std::size_t>(observation_channels(c));
    const auto past = static_cast<std::size_t>(c.h_past + 1);

    Manifest m;
    m["format"] = "resworld-episode";
    m["format_version"] = std::to_string(kEpisodeFormatVersion);
    m["seed"] = std::to_string(ep.seed);
    m["config.bev_h"] = std::to_string(c.bev_h);
    m["config.bev_w"] = std::to_string(c.bev_w);
    m["config.z_bins"] = std::to_string(c.z_bins);
    m["config.cell_size"] = format_double(c.cell_size);
    m["config.num_classes"] = std::to_string(c.num_classes);
    m["config.h_past"] = std::to_string(c.h_past);
    m["config.f_future"] = std::to_string(c.f_future);
    m["config.dt"] = format_double(c.dt);
    m["noise.scale"] = format_double(ep.noise.scale);
    m["noise.mask_fraction"] = format_double(ep.noise.mask_fraction);
    m["ego.first_frame"] = std::to_string(ep.ego.first_frame);
    m["array.occ"] = "u8 " + shape_text({frames, h, w, z}) + " occ.bin";
    m["array.ego"] = "f64 " + shape_text({frames, 2}) + " ego.bin";
    m["array.commands"] = "u8 " + shape_text({static_cast<std::size_t>(c.f_future)}) + " commands.bin";
    m["array.observations"] = "f64 " + shape_text({past, h, w, ch}) + " observations.bin";

    std::vector<std::uint8_t> occ;
    occ.reserve(frames * h * w * z);
    for (const auto& g : ep.occ) occ.insert(occ.end(), g.labels.begin(), g.labels.end());
    write_u8(dir / "occ.bin", occ);

    std::vector<double> ego;
    for (const auto& p : ep.ego.positions) {
        ego.push_back(p.x);
        ego.push_back(p.y);
    }
    write_f64(dir / "ego.bin", ego);

    std::vector<std::uint8_t> cmds;
    for (auto cmd : ep.commands) cmds.push_back(static_cast<std::uint8_t>(cmd));
    write_u8(dir / "commands.bin", cmds);

    std::vector<double> obs;
    obs.reserve(past * h * w * ch);
    for (const auto& o : ep.observations) obs.insert(obs.end(), o.values.values().begin(), o.values.values().end());
    write_f64(dir / "observations.bin", obs);

    // Manifest last: a directory without one is an incomplete write.
    write_manifest(m, dir / "manifest.txt");
}

SceneEpisode load_episode(const fs::path& dir)
{
    const Manifest m = read_manifest(dir / "manifest.txt");
    if (require_key(m, "format") != "resworld-episode")
        fail(ErrorCode::malformed_file, "not an episode manifest: " + dir.string());
    const long long version = parse_int(m, "format_version");
    if (version != kEpisodeFormatVersion)
        fail(ErrorCode::format_version, "unsupported episode format version " + std::to_string(version));

    SceneEpisode ep;
    WorldConfig& c = ep.config;
    c.bev_h = static_cast<int>(parse_int(m, "config.bev_h"));
    c.bev_w = static_cast<int>(parse_int(m, "config.bev_w"));
    c.z_bins = static_cast<int>(parse_int(m, "config.z_bins"));
    c.cell_size = parse_double(m, "config.cell_size");
    c.num_classes = static_cast<int>(parse_int(m, "config.num_classes"));
    c.h_past = static_cast<int>(parse_int(m, "config.h_past"));
    c.f_future = static_cast<int>(parse_int(m, "config.f_future"));
    c.dt = parse_double(m, "config.dt");
    try {
        c.validate();
    } catch (const Error& e) {
        fail(ErrorCode::malformed_file, std::string("episode manifest: ") + e.what());
    }
    ep.seed = static_cast<std::uint64_t>(std::stoull(require_key(m, "seed")));
    ep.noise.scale = parse_double(m, "noise.scale");
    ep.noise.mask_fraction = parse_double(m, "noise.mask_fraction");
    ep.ego.first_frame = static_cast<int>(parse_int(m, "ego.first_frame"));

    const auto frames = static_cast<std::size_t>(c.frame_count());
    const auto h = static_cast<std::size_t>(c.bev_h);
    const auto w = static_cast<std::size_t>(c.bev_w);
    const auto z = static_cast<std::size_t>(c.z_bins);
    const auto ch = static_cast<std::size_t>(observation_channels(c));
    const auto past = static_cast<std::size_t>(c.h_past + 1);

    const ArraySpec occ_spec = parse_array(m, "occ");
    const ArraySpec ego_spec = parse_array(m, "ego");
    const ArraySpec cmd_spec = parse_array(m, "commands");
    const ArraySpec obs_spec = parse_array(m, "observations");
    expect_shape(occ_spec, "occ", "u8", {frames, h, w, z});
    expect_shape(ego_spec, "ego", "f64", {frames, 2});
    expect_shape(cmd_spec, "commands", "u8", {static_cast<std::size_t>(c.f_future)});
    expect_shape(obs_spec, "observations", "f64", {past, h, w, ch});

    const auto occ = read_u8(dir / occ_spec.file, numel(occ_spec.shape));
    const auto ego = read_f64(dir / ego_spec.file, numel(ego_spec.shape));
    const auto cmds = read_u8(dir / cmd_spec.file, numel(cmd_spec.shape));
    const auto obs = read_f64(dir / obs_spec.file, numel(obs_spec.shape));

    const std::size_t per_frame = h * w * z;
    for (std::size_t k = 0; k < frames; ++k) {
        SemanticOccGrid g(c.bev_h, c.bev_w, c.z_bins, static_cast<int>(k) - c.h_past);
        std::memcpy(g.labels.data(), occ.data() + k * per_frame, per_frame);
        g.validate(c);
        ep.occ.push_back(std::move(g));
    }
    for (std::size_t k = 0; k < frames; ++k) ep.ego.positions.push_back({ego[2 * k], ego[2 * k + 1]});
    for (auto v : cmds) {
        if (v >= kCommandCount) fail(ErrorCode::out_of_range, "invalid command id in " + dir.string());
        ep.commands.push_back(static_cast<Command>(v));
    }
    const std::size_t per_obs = h * w * ch;
    for (std::size_t k = 0; k < past; ++k) {
        Observation o;
        o.timestamp = static_cast<int>(k) - c.h_past;
        o.values = ag::Tensor({c.bev_h * c.bev_w, static_cast<int>(ch)},
                              std::vector<double>(obs.begin() + static_cast<std::ptrdiff_t>(k * per_obs),
                                                  obs.begin() + static_cast<std::ptrdiff_t>((k + 1) * per_obs)));
        ep.observations.push_back(std::move(o));
    }
    return ep;
}

std::uint64_t episode_hash(const SceneEpisode& ep)
{
    std::uint64_t hsh = fnv1a("episode");
    auto mix_bytes = [&](const void* p, std::size_t n) {
        hsh = fnv1a(std::string_view(static_cast<const char*>(p), n), hsh);
    };
    mix_bytes(&ep.seed, sizeof ep.seed);
    for (const auto& g : ep.occ) mix_bytes(g.labels.data(), g.labels.size());
    for (const auto& p : ep.ego.positions) {
        mix_bytes(&p.x, sizeof p.x);
        mix_bytes(&p.y, sizeof p.y);
    }
    for (const auto& o : ep.observations) mix_bytes(o.values.data(), o.values.size() * sizeof(double));
    return hsh;
}

}  // namespace rw
