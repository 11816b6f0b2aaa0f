#include "robnas/serialization.hpp"

#include "robnas/config.hpp"
#include "robnas/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace robnas {

namespace config {

void require_known_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) fail(ErrorKind::validation, where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
        if (!ok) fail(ErrorKind::validation, where + ": unknown key \"" + key + "\"");
    }
}

json to_json(const netcore::NetworkSpec& s) {
    json j;
    j["family"] = netcore::family_name(s.family);
    if (s.family == netcore::Family::cell_network) {
        j["genotype"] = cellspace::format_genotype(s.genotype);
        j["cell_count"] = s.cell_count;
        j["stem_channels"] = s.stem_channels;
        j["in_channels"] = s.in_channels;
        j["image_size"] = s.image_size;
        j["num_classes"] = s.num_classes;
        return j;
    }
    j["input_dim"] = s.input_dim;
    if (s.family == netcore::Family::linear) {
        j["output_scale"] = s.output_scale;
        return j;
    }
    j["depth"] = s.depth;
    j["width"] = s.width;
    if (s.family == netcore::Family::residual_cnn) {
        j["pixels"] = s.pixels;
        j["filter_size"] = s.filter_size;
    }
    json acts = json::array();
    for (const auto& a : s.activations) acts.push_back(a.kind == netcore::ActivationKind::leaky_relu
                                                           ? json{{"name", a.name()}, {"slope", a.slope}}
                                                           : json(a.name()));
    j["activations"] = acts;
    j["skip_flags"] = s.skip_flags;
    j["output_scale"] = s.output_scale;
    return j;
}

netcore::NetworkSpec spec_from_json(const json& j) {
    require_known_keys(j,
                       {"family", "depth", "width", "input_dim", "pixels", "filter_size", "activations", "skip_flags",
                        "output_scale", "genotype", "cell_count", "stem_channels", "in_channels", "image_size",
                        "num_classes"},
                       "network");
    netcore::NetworkSpec s;
    try {
        s.family = netcore::parse_family(j.value("family", std::string("residual_fcnn")));
        s.depth = j.value("depth", s.depth);
        s.width = j.value("width", s.width);
        s.input_dim = j.value("input_dim", s.input_dim);
        s.pixels = j.value("pixels", s.pixels);
        s.filter_size = j.value("filter_size", s.filter_size);
        s.output_scale = j.value("output_scale", s.output_scale);
        if (j.contains("activations")) {
            for (const auto& a : j.at("activations")) {
                if (a.is_string()) {
                    s.activations.push_back(netcore::Activation::parse(a.get<std::string>()));
                } else {
                    require_known_keys(a, {"name", "slope"}, "network.activations");
                    auto act = netcore::Activation::parse(a.at("name").get<std::string>());
                    act.slope = a.value("slope", act.slope);
                    s.activations.push_back(act);
                }
            }
        }
        if (j.contains("skip_flags")) s.skip_flags = j.at("skip_flags").get<std::vector<int>>();
        if (j.contains("genotype")) s.genotype = cellspace::parse_genotype(j.at("genotype").get<std::string>());
        s.cell_count = j.value("cell_count", s.cell_count);
        s.stem_channels = j.value("stem_channels", s.stem_channels);
        s.in_channels = j.value("in_channels", s.in_channels);
        s.image_size = j.value("image_size", s.image_size);
        s.num_classes = j.value("num_classes", s.num_classes);
    } catch (const json::exception& e) {
        fail(ErrorKind::validation, std::string("network: ") + e.what());
    }
    s.validate();
    return s;
}

json to_json(const adversary::AdversaryConfig& c) {
    json j{{"kind", adversary::attack_kind_name(c.kind)},
           {"radius", c.radius},
           {"steps", c.steps},
           {"step_size", c.step_size},
           {"norm", adversary::norm_name(c.norm)},
           {"random_start", c.random_start},
           {"seed", c.seed}};
    if (c.clamp) j["clamp"] = {c.clamp->lo, c.clamp->hi};
    else j["clamp"] = nullptr;
    return j;
}

adversary::AdversaryConfig adversary_from_json(const json& j) {
    require_known_keys(j, {"kind", "radius", "steps", "step_size", "norm", "clamp", "random_start", "seed", "preset"},
                       "adversary");
    adversary::AdversaryConfig c;
    try {
        if (j.contains("preset")) {
            const auto preset = j.at("preset").get<std::string>();
            const double radius = j.value("radius", 8.0 / 255.0);
            if (preset == "train") c = adversary::AdversaryConfig::training_preset();
            else if (preset == "eval_pgd") c = adversary::AdversaryConfig::evaluation_pgd(radius);
            else if (preset == "eval_fgsm") c = adversary::AdversaryConfig::evaluation_fgsm(radius);
            else fail(ErrorKind::validation, "adversary: unknown preset " + preset);
            c.random_start = j.value("random_start", c.random_start);
            c.seed = j.value("seed", c.seed);
            c.validate();
            return c;
        }
        c.kind = adversary::parse_attack_kind(j.value("kind", std::string("pgd")));
        c.radius = j.value("radius", 0.0);
        c.norm = adversary::parse_norm(j.value("norm", std::string("l_inf")));
        if (c.kind == adversary::AttackKind::fgsm) {
            c.steps = 1;
            c.step_size = c.radius;
        } else {
            c.steps = j.value("steps", 1);
            c.step_size = j.value("step_size", c.radius);
        }
        if (j.contains("clamp") && !j.at("clamp").is_null()) {
            const auto r = j.at("clamp").get<std::array<double, 2>>();
            c.clamp = adversary::DataRange{r[0], r[1]};
        } else if (!j.contains("clamp") && c.norm == adversary::Norm::l_inf) {
            c.clamp = adversary::DataRange{};
        }
        c.random_start = j.value("random_start", false);
        c.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        fail(ErrorKind::validation, std::string("adversary: ") + e.what());
    }
    c.validate();
    return c;
}

objective::TrainConfig train_from_json(const json& j) {
    require_known_keys(j,
                       {"beta", "step_size", "iterations", "adversary", "mode", "momentum", "weight_decay",
                        "batch_size", "epochs", "base_lr", "peak_lr", "warmup_fraction", "seed"},
                       "train");
    objective::TrainConfig c;
    try {
        c.beta = j.value("beta", c.beta);
        c.step_size = j.value("step_size", c.step_size);
        c.iterations = j.value("iterations", c.iterations);
        if (j.contains("adversary")) c.adversary = adversary_from_json(j.at("adversary"));
        const auto mode = j.value("mode", std::string("algorithm1_online"));
        if (mode == "algorithm1_online") c.mode = objective::TrainMode::algorithm1_online;
        else if (mode == "minibatch_recipe") c.mode = objective::TrainMode::minibatch_recipe;
        else fail(ErrorKind::validation, "train: unknown mode " + mode);
        c.recipe.momentum = j.value("momentum", c.recipe.momentum);
        c.recipe.weight_decay = j.value("weight_decay", c.recipe.weight_decay);
        c.recipe.batch_size = j.value("batch_size", c.recipe.batch_size);
        c.recipe.epochs = j.value("epochs", c.recipe.epochs);
        c.recipe.base_lr = j.value("base_lr", c.recipe.base_lr);
        c.recipe.peak_lr = j.value("peak_lr", c.recipe.peak_lr);
        c.recipe.warmup_fraction = j.value("warmup_fraction", c.recipe.warmup_fraction);
        c.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        fail(ErrorKind::validation, std::string("train: ") + e.what());
    }
    c.validate();
    return c;
}

}  // namespace config

namespace serialization {

namespace {

constexpr std::array<char, 4> kMagic{'R', 'B', 'N', 'S'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
        return std::bit_cast<double>(v);
    }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    [[nodiscard]] bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) fail(ErrorKind::validation, "container truncated");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode(const Container& c) {
    std::string out(kMagic.begin(), kMagic.end());
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(c.kind));
    put_u32(out, static_cast<std::uint32_t>(c.header.size()));
    out += c.header;
    put_u32(out, static_cast<std::uint32_t>(c.arrays.size()));
    for (const auto& a : c.arrays) {
        put_u32(out, static_cast<std::uint32_t>(a.rows()));
        put_u32(out, static_cast<std::uint32_t>(a.cols()));
        for (Eigen::Index i = 0; i < a.size(); ++i) put_f64(out, a.data()[i]);
    }
    return out;
}

Container decode(std::string_view data) {
    Reader r(data);
    const auto magic = r.bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) fail(ErrorKind::validation, "bad container magic");
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        fail(ErrorKind::validation, "unsupported container version " + std::to_string(version));
    Container c;
    const std::uint32_t kind = r.u32();
    if (kind != static_cast<std::uint32_t>(ContainerKind::weights) &&
        kind != static_cast<std::uint32_t>(ContainerKind::kernels))
        fail(ErrorKind::validation, "unknown container kind " + std::to_string(kind));
    c.kind = static_cast<ContainerKind>(kind);
    c.header = std::string(r.bytes(r.u32()));
    const std::uint32_t count = r.u32();
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        Mat m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
        c.arrays.push_back(std::move(m));
    }
    if (!r.done()) fail(ErrorKind::validation, "trailing bytes after container");
    return c;
}

std::string encode_weights(const netcore::NetworkSpec& spec, const netcore::WeightSet& w) {
    netcore::check_weights(spec, w);
    Container c;
    c.kind = ContainerKind::weights;
    c.header = config::json{{"spec", config::to_json(spec)}, {"seed", w.seed}}.dump();
    c.arrays = w.layers;
    return encode(c);
}

std::pair<netcore::NetworkSpec, netcore::WeightSet> decode_weights(std::string_view data) {
    Container c = decode(data);
    if (c.kind != ContainerKind::weights) fail(ErrorKind::validation, "container does not hold weights");
    config::json h;
    try {
        h = config::json::parse(c.header);
    } catch (const config::json::exception& e) {
        fail(ErrorKind::validation, std::string("bad container header: ") + e.what());
    }
    netcore::NetworkSpec spec = config::spec_from_json(h.at("spec"));
    netcore::WeightSet w{std::move(c.arrays), h.value("seed", std::uint64_t{0})};
    netcore::check_weights(spec, w);
    return {std::move(spec), std::move(w)};
}

std::string encode_kernels(const kernels::KernelSet& ks) {
    Container c;
    c.kind = ContainerKind::kernels;
    config::json h{{"beta", ks.beta}, {"radius", ks.radius}, {"order", {"K", "Kbar_rho", "Khat_rho", "Kbar_2rho", "Khat_2rho"}}};
    h["provenance"] = ks.provenance.empty() ? config::json(nullptr) : config::json::parse(ks.provenance);
    c.header = h.dump();
    for (const auto* m : {&ks.clean, &ks.cross, &ks.robust, &ks.cross_twice, &ks.robust_twice}) c.arrays.push_back(*m);
    return encode(c);
}

kernels::KernelSet decode_kernels(std::string_view data) {
    Container c = decode(data);
    if (c.kind != ContainerKind::kernels || c.arrays.size() != 5)
        fail(ErrorKind::validation, "container does not hold a kernel set");
    const auto h = config::json::parse(c.header);
    kernels::KernelSet ks;
    ks.beta = h.value("beta", 0.0);
    ks.radius = h.value("radius", 0.0);
    ks.provenance = h.contains("provenance") && !h["provenance"].is_null() ? h["provenance"].dump() : "";
    ks.clean = c.arrays[0];
    ks.cross = c.arrays[1];
    ks.robust = c.arrays[2];
    ks.cross_twice = c.arrays[3];
    ks.robust_twice = c.arrays[4];
    return ks;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::not_found, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::not_found, "cannot write " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace serialization
}  // namespace robnas
