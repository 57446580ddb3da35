#include "config.hpp"

#include "error.hpp"
#include "rng.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace rw {

using nlohmann::json;

void RunConfig::validate() const
{
    world.validate();
    generator.validate();
    model.validate();
    loss.validate();
    optim.validate();
    sampler.validate();
    check(train.steps >= 0, ErrorCode::config, "train.steps must be >= 0");
    check(train.batch_size >= 1, ErrorCode::config, "train.batch_size must be >= 1");
    check(train.teacher_forcing_fraction >= 0 && train.teacher_forcing_fraction <= 1, ErrorCode::config,
          "train.teacher_forcing_fraction must lie in [0, 1]");
    check(train.log_every >= 1, ErrorCode::config, "train.log_every must be >= 1");
    check(data.train_episodes >= 1, ErrorCode::config, "data.train_episodes must be >= 1");
    check(data.eval_episodes >= 1, ErrorCode::config, "data.eval_episodes must be >= 1");
    check(eval.max_episodes >= 0, ErrorCode::config, "eval.max_episodes must be >= 0");
    check(eval.latency_repeats >= 1, ErrorCode::config, "eval.latency_repeats must be >= 1");
    check(!output_root.empty(), ErrorCode::config, "output.root must not be empty");
}

json config_to_json(const RunConfig& c)
{
    const GeneratorParams& g = c.generator;
    return json{
        {"seed", c.seed},
        {"world",
         {{"bev_h", c.world.bev_h},
          {"bev_w", c.world.bev_w},
          {"z_bins", c.world.z_bins},
          {"cell_size", c.world.cell_size},
          {"num_classes", c.world.num_classes},
          {"h_past", c.world.h_past},
          {"f_future", c.world.f_future},
          {"dt", c.world.dt}}},
        {"generator",
         {{"min_vehicles", g.min_vehicles},
          {"max_vehicles", g.max_vehicles},
          {"min_pedestrians", g.min_pedestrians},
          {"max_pedestrians", g.max_pedestrians},
          {"max_agent_speed", g.max_agent_speed},
          {"vehicle_max_speed", g.vehicle_max_speed},
          {"pedestrian_max_speed", g.pedestrian_max_speed},
          {"velocity_change_prob", g.velocity_change_prob},
          {"static_density", g.static_density},
          {"intersection_prob", g.intersection_prob},
          {"ego_speed_min", g.ego_speed_min},
          {"ego_speed_max", g.ego_speed_max},
          {"ego_turn_prob", g.ego_turn_prob},
          {"ego_yaw_rate_min", g.ego_yaw_rate_min},
          {"ego_yaw_rate_max", g.ego_yaw_rate_max},
          {"noise", {{"scale", g.noise.scale}, {"mask_fraction", g.noise.mask_fraction}}}}},
        {"model",
         {{"dim", c.model.dim},
          {"layers", c.model.layers},
          {"heads", c.model.heads},
          {"points", c.model.points},
          {"memory", c.model.memory},
          {"ffn_mult", c.model.ffn_mult},
          {"ln_eps", c.model.ln_eps},
          {"attention", to_string(c.model.attention)},
          {"conditioning", to_string(c.model.conditioning)},
          {"mode", to_string(c.model.mode)},
          {"feature_alignment", c.model.feature_alignment},
          {"zero_init_outputs", c.model.zero_init_outputs}}},
        {"loss",
         {{"lambda_plan", c.loss.lambda_plan}, {"lambda_coll", c.loss.lambda_coll}, {"lambda_tss", c.loss.lambda_tss}}},
        {"optim",
         {{"lr", c.optim.lr},
          {"min_lr", c.optim.min_lr},
          {"beta1", c.optim.beta1},
          {"beta2", c.optim.beta2},
          {"eps", c.optim.eps},
          {"weight_decay", c.optim.weight_decay},
          {"grad_clip", c.optim.grad_clip},
          {"warmup_steps", c.optim.warmup_steps}}},
        {"train",
         {{"steps", c.train.steps},
          {"batch_size", c.train.batch_size},
          {"teacher_forcing_fraction", c.train.teacher_forcing_fraction},
          {"log_every", c.train.log_every}}},
        {"planning",
         {{"coupling", to_string(c.coupling)},
          {"sampler",
           {{"speeds", c.sampler.speeds},
            {"curvatures", c.sampler.curvatures},
            {"straight_band", c.sampler.straight_band},
            {"deviation_weight", c.sampler.deviation_weight}}}}},
        {"data",
         {{"train_episodes", c.data.train_episodes},
          {"eval_episodes", c.data.eval_episodes},
          {"dir", c.data.dir},
          {"seed", c.data.seed}}},
        {"eval", {{"max_episodes", c.eval.max_episodes}, {"latency_repeats", c.eval.latency_repeats}}},
        {"output", {{"root", c.output_root}, {"name", c.run_name}}},
    };
}

namespace {

const char* kind_name(const json& v)
{
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    if (v.is_object()) return "object";
    return "null";
}

bool compatible(const json& value, const json& reference)
{
    if (reference.is_boolean()) return value.is_boolean();
    if (reference.is_number_integer()) return value.is_number_integer();
    if (reference.is_number()) return value.is_number();
    if (reference.is_string()) return value.is_string();
    if (reference.is_array()) {
        if (!value.is_array()) return false;
        for (const auto& e : value)
            if (!e.is_number()) return false;
        return true;
    }
    if (reference.is_object()) return value.is_object();
    return false;
}

// Merges `input` into `base`, rejecting keys absent from `base`.
void merge_strict(json& base, const json& input, const std::string& path)
{
    check(input.is_object(), ErrorCode::config, "config " + (path.empty() ? std::string("root") : path) +
                                                    " must be an object");
    for (auto it = input.begin(); it != input.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        check(base.contains(it.key()), ErrorCode::config, "unknown config key '" + key + "'");
        json& slot = base[it.key()];
        if (slot.is_object()) {
            merge_strict(slot, it.value(), key);
            continue;
        }
        check(compatible(it.value(), slot), ErrorCode::config,
              "config key '" + key + "' expects " + kind_name(slot) + ", got " + kind_name(it.value()));
        slot = it.value();
    }
}

}  // namespace

RunConfig config_from_json(const json& input)
{
    json j = config_to_json(RunConfig{});
    merge_strict(j, input, "");
    RunConfig c;
    try {
        c.seed = j.at("seed").get<std::uint64_t>();
        const json& w = j.at("world");
        c.world.bev_h = w.at("bev_h").get<int>();
        c.world.bev_w = w.at("bev_w").get<int>();
        c.world.z_bins = w.at("z_bins").get<int>();
        c.world.cell_size = w.at("cell_size").get<double>();
        c.world.num_classes = w.at("num_classes").get<int>();
        c.world.h_past = w.at("h_past").get<int>();
        c.world.f_future = w.at("f_future").get<int>();
        c.world.dt = w.at("dt").get<double>();
        const json& g = j.at("generator");
        GeneratorParams& gp = c.generator;
        gp.min_vehicles = g.at("min_vehicles").get<int>();
        gp.max_vehicles = g.at("max_vehicles").get<int>();
        gp.min_pedestrians = g.at("min_pedestrians").get<int>();
        gp.max_pedestrians = g.at("max_pedestrians").get<int>();
        gp.max_agent_speed = g.at("max_agent_speed").get<int>();
        gp.vehicle_max_speed = g.at("vehicle_max_speed").get<int>();
        gp.pedestrian_max_speed = g.at("pedestrian_max_speed").get<int>();
        gp.velocity_change_prob = g.at("velocity_change_prob").get<double>();
        gp.static_density = g.at("static_density").get<double>();
        gp.intersection_prob = g.at("intersection_prob").get<double>();
        gp.ego_speed_min = g.at("ego_speed_min").get<double>();
        gp.ego_speed_max = g.at("ego_speed_max").get<double>();
        gp.ego_turn_prob = g.at("ego_turn_prob").get<double>();
        gp.ego_yaw_rate_min = g.at("ego_yaw_rate_min").get<double>();
        gp.ego_yaw_rate_max = g.at("ego_yaw_rate_max").get<double>();
        gp.noise.scale = g.at("noise").at("scale").get<double>();
        gp.noise.mask_fraction = g.at("noise").at("mask_fraction").get<double>();
        const json& m = j.at("model");
        c.model.dim = m.at("dim").get<int>();
        c.model.layers = m.at("layers").get<int>();
        c.model.heads = m.at("heads").get<int>();
        c.model.points = m.at("points").get<int>();
        c.model.memory = m.at("memory").get<int>();
        c.model.ffn_mult = m.at("ffn_mult").get<int>();
        c.model.ln_eps = m.at("ln_eps").get<double>();
        c.model.attention = parse_attention(m.at("attention").get<std::string>());
        c.model.conditioning = parse_conditioning(m.at("conditioning").get<std::string>());
        c.model.mode = parse_predict_mode(m.at("mode").get<std::string>());
        c.model.feature_alignment = m.at("feature_alignment").get<bool>();
        c.model.zero_init_outputs = m.at("zero_init_outputs").get<bool>();
        const json& l = j.at("loss");
        c.loss.lambda_plan = l.at("lambda_plan").get<double>();
        c.loss.lambda_coll = l.at("lambda_coll").get<double>();
        c.loss.lambda_tss = l.at("lambda_tss").get<double>();
        const json& o = j.at("optim");
        c.optim.lr = o.at("lr").get<double>();
        c.optim.min_lr = o.at("min_lr").get<double>();
        c.optim.beta1 = o.at("beta1").get<double>();
        c.optim.beta2 = o.at("beta2").get<double>();
        c.optim.eps = o.at("eps").get<double>();
        c.optim.weight_decay = o.at("weight_decay").get<double>();
        c.optim.grad_clip = o.at("grad_clip").get<double>();
        c.optim.warmup_steps = o.at("warmup_steps").get<int>();
        const json& t = j.at("train");
        c.train.steps = t.at("steps").get<int>();
        c.train.batch_size = t.at("batch_size").get<int>();
        c.train.teacher_forcing_fraction = t.at("teacher_forcing_fraction").get<double>();
        c.train.log_every = t.at("log_every").get<int>();
        const json& p = j.at("planning");
        c.coupling = parse_coupling(p.at("coupling").get<std::string>());
        c.sampler.speeds = p.at("sampler").at("speeds").get<std::vector<double>>();
        c.sampler.curvatures = p.at("sampler").at("curvatures").get<std::vector<double>>();
        c.sampler.straight_band = p.at("sampler").at("straight_band").get<double>();
        c.sampler.deviation_weight = p.at("sampler").at("deviation_weight").get<double>();
        const json& d = j.at("data");
        c.data.train_episodes = d.at("train_episodes").get<int>();
        c.data.eval_episodes = d.at("eval_episodes").get<int>();
        c.data.dir = d.at("dir").get<std::string>();
        c.data.seed = d.at("seed").get<std::int64_t>();
        c.eval.max_episodes = j.at("eval").at("max_episodes").get<int>();
        c.eval.latency_repeats = j.at("eval").at("latency_repeats").get<int>();
        c.output_root = j.at("output").at("root").get<std::string>();
        c.run_name = j.at("output").at("name").get<std::string>();
    } catch (const json::exception& e) {
        fail(ErrorCode::config, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    check(static_cast<bool>(in), ErrorCode::io, "cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCode::config, "config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

void apply_override(json& j, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    check(eq != std::string::npos && eq > 0, ErrorCode::config, "override must look like key=value: " + assignment);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    set_dotted(j, assignment.substr(0, eq), std::move(value));
}

void set_dotted(json& j, const std::string& key, json value)
{
    json* node = &j;
    std::string path;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        check(!part.empty(), ErrorCode::config, "malformed config key '" + key + "'");
        path += (path.empty() ? "" : ".") + part;
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        json& next = (*node)[part];
        if (next.is_null()) next = json::object();
        check(next.is_object(), ErrorCode::config, "config key '" + path + "' is not a section");
        node = &next;
        start = dot + 1;
    }
}

std::uint64_t data_seed(const RunConfig& cfg)
{
    return cfg.data.seed < 0 ? cfg.seed : static_cast<std::uint64_t>(cfg.data.seed);
}

std::uint64_t architecture_hash(const RunConfig& cfg)
{
    const json j = config_to_json(cfg);
    json arch{{"world", j.at("world")}, {"model", j.at("model")}};
    // Initialization-only flags do not change parameter shapes.
    arch["model"].erase("zero_init_outputs");
    return fnv1a(arch.dump());
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a(config_to_json(cfg).dump()); }

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string resolve_output_root(const RunConfig& cfg)
{
    if (const char* env = std::getenv("RESWORLD_OUTPUT_ROOT"); env && *env) return env;
    return cfg.output_root;
}

}  // namespace rw
