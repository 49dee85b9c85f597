#include "refnet/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

using json = nlohmann::json;

namespace refnet {

namespace {

json arch_to_json(const ArchConfig& a) {
    return {{"depth", a.depth},
            {"base_width", a.base_width},
            {"max_width", a.max_width},
            {"norm_groups", a.norm_groups},
            {"in_channels", a.in_channels},
            {"spatial_condition", a.spatial_condition}};
}

ArchConfig arch_from_json(const json& j) {
    ArchConfig a;
    a.depth = j.at("depth").get<int>();
    a.base_width = j.at("base_width").get<int>();
    a.max_width = j.at("max_width").get<int>();
    a.norm_groups = j.at("norm_groups").get<int>();
    a.in_channels = j.at("in_channels").get<int>();
    a.spatial_condition = j.at("spatial_condition").get<bool>();
    return a;
}

json critic_to_json(const CriticConfig& c) {
    return {{"in_channels", c.in_channels},
            {"base_width", c.base_width},
            {"num_layers", c.num_layers},
            {"max_width", c.max_width},
            {"leaky_slope", c.leaky_slope}};
}

CriticConfig critic_from_json(const json& j) {
    CriticConfig c;
    c.in_channels = j.at("in_channels").get<int>();
    c.base_width = j.at("base_width").get<int>();
    c.num_layers = j.at("num_layers").get<int>();
    c.max_width = j.at("max_width").get<int>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    return c;
}

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error("checkpoint: truncated header");
    return v;
}

} // namespace

std::string describe(const ArchConfig& a) {
    return "segmenter(depth=" + std::to_string(a.depth) +
           ", base_width=" + std::to_string(a.base_width) +
           ", max_width=" + std::to_string(a.max_width) +
           ", groups=" + std::to_string(a.norm_groups) +
           (a.spatial_condition ? ", spatial_condition" : ", pooled_condition") + ")";
}

std::string describe(const CriticConfig& c) {
    return "critic(layers=" + std::to_string(c.num_layers) +
           ", base_width=" + std::to_string(c.base_width) +
           ", in_channels=" + std::to_string(c.in_channels) + ")";
}

void save_checkpoint(const std::string& path, const TrainState& state, const TrainConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    const json header{{"magic", kCheckpointMagic},
                      {"iteration", state.iteration},
                      {"rng", state.rng.state()},
                      {"arch", arch_to_json(state.arch)},
                      {"critic", critic_to_json(state.critic_arch)},
                      {"opt",
                       {{"lr", cfg.lr},
                        {"seg_beta1", cfg.seg_beta1},
                        {"seg_beta2", cfg.seg_beta2},
                        {"critic_beta1", cfg.critic_beta1},
                        {"critic_beta2", cfg.critic_beta2}}}};
    const std::string hs = header.dump();
    out << kCheckpointMagic << "\n";
    write_u64(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

    state.model->params().save(out);
    state.critic_out->params().save(out);
    state.critic_in->params().save(out);
    state.opt_seg->save(out, state.model->params());
    state.opt_critic_out->save(out, state.critic_out->params());
    state.opt_critic_in->save(out, state.critic_in->params());
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

TrainState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string magic;
    std::getline(in, magic);
    if (magic != kCheckpointMagic)
        throw std::runtime_error("load_checkpoint: bad magic in " + path + " (got '" + magic +
                                 "')");
    std::string hs(read_u64(in), '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hs.size()));
    if (!in) throw std::runtime_error("load_checkpoint: truncated header");
    const json header = json::parse(hs);

    TrainState state;
    state.arch = arch_from_json(header.at("arch"));
    state.critic_arch = critic_from_json(header.at("critic"));
    state.iteration = header.at("iteration").get<std::int64_t>();
    state.rng.set_state(header.at("rng").get<std::string>());

    state.model = std::make_unique<Segmenter>(state.arch, 0);
    state.critic_out = std::make_unique<Critic>(state.critic_arch, 0);
    state.critic_in = std::make_unique<Critic>(state.critic_arch, 0);
    const auto& opt = header.at("opt");
    state.opt_seg = std::make_unique<nn::Adam>(opt.at("lr").get<double>(),
                                               opt.at("seg_beta1").get<double>(),
                                               opt.at("seg_beta2").get<double>());
    state.opt_critic_out = std::make_unique<nn::Adam>(opt.at("lr").get<double>(),
                                                      opt.at("critic_beta1").get<double>(),
                                                      opt.at("critic_beta2").get<double>());
    state.opt_critic_in = std::make_unique<nn::Adam>(opt.at("lr").get<double>(),
                                                     opt.at("critic_beta1").get<double>(),
                                                     opt.at("critic_beta2").get<double>());

    state.model->params().load(in);
    state.critic_out->params().load(in);
    state.critic_in->params().load(in);
    state.opt_seg->load(in, state.model->params());
    state.opt_critic_out->load(in, state.critic_out->params());
    state.opt_critic_in->load(in, state.critic_in->params());
    return state;
}

} // namespace refnet
