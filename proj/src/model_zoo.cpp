#include "hseg/model_zoo.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hseg/rng.hpp"

namespace hseg {

const char* decoder_name(DecoderVariant v) {
    switch (v) {
    case DecoderVariant::BilinearUpsampling: return "bilinear_upsampling";
    case DecoderVariant::ChannelAttention: return "channel_attention";
    case DecoderVariant::MLP: return "mlp";
    }
    return "?";
}

const char* conv_type_name(ConvType t) {
    return t == ConvType::Depthwise ? "depthwise" : "group";
}

void ModelConfig::validate() const {
    if (resolution < 32 || resolution % 32 != 0)
        throw ConfigError("resolution " + std::to_string(resolution) + " must be a multiple of 32");
    if (!(width_multiplier > 0.0f))
        throw ConfigError("width_multiplier must be > 0");
    if (conv_type == ConvType::Group && group_size < 1)
        throw ConfigError("group_size must be >= 1");
    if (se_reduction < 1)
        throw ConfigError("se_reduction must be >= 1");
    if (mlp_depth < 1 || head_expand < 1 || min_decoder_width < 1)
        throw ConfigError("decoder depth/expansion fields must be >= 1");
    if (!(decoder_width_ratio > 0.0f))
        throw ConfigError("decoder_width_ratio must be > 0");
    if (norm_std == 0.0f)
        throw ConfigError("norm_std must be nonzero");
}

std::string ModelConfig::summary() const {
    char w[16];
    std::snprintf(w, sizeof(w), "%.1f", static_cast<double>(width_multiplier));
    std::string dec = decoder == DecoderVariant::BilinearUpsampling ? "bilinear"
                      : decoder == DecoderVariant::ChannelAttention ? "attention"
                                                                    : "mlp";
    std::string conv = conv_type == ConvType::Depthwise ? "dw" : "group" + std::to_string(group_size);
    return "r" + std::to_string(resolution) + "_w" + w + "_" + dec + "_" + conv;
}

ModelConfig parse_model_config(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw ConfigError("model config must be a JSON object");
    const std::set<std::string> allowed = {"resolution", "width_multiplier", "decoder",
                                           "conv_type",  "group_size",       "se_reduction",
                                           "seed"};
    for (const auto& [key, value] : doc.items())
        if (!allowed.count(key))
            throw ConfigError("unknown model config key '" + key + "'");
    for (const std::string& key : allowed)
        if (!doc.contains(key))
            throw ConfigError("model config missing key '" + key + "'");

    ModelConfig cfg;
    try {
        cfg.resolution = doc.at("resolution").get<int>();
        cfg.width_multiplier = doc.at("width_multiplier").get<float>();
        cfg.group_size = doc.at("group_size").get<int>();
        cfg.se_reduction = doc.at("se_reduction").get<int>();
        cfg.seed = doc.at("seed").get<uint64_t>();
        const std::string dec = doc.at("decoder").get<std::string>();
        if (dec == "bilinear_upsampling")
            cfg.decoder = DecoderVariant::BilinearUpsampling;
        else if (dec == "channel_attention")
            cfg.decoder = DecoderVariant::ChannelAttention;
        else if (dec == "mlp")
            cfg.decoder = DecoderVariant::MLP;
        else
            throw ConfigError("unknown decoder variant '" + dec + "'");
        const std::string conv = doc.at("conv_type").get<std::string>();
        if (conv == "depthwise")
            cfg.conv_type = ConvType::Depthwise;
        else if (conv == "group")
            cfg.conv_type = ConvType::Group;
        else
            throw ConfigError("unknown conv_type '" + conv + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model config field: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string model_config_json(const ModelConfig& cfg) {
    nlohmann::json doc;
    doc["resolution"] = cfg.resolution;
    doc["width_multiplier"] = cfg.width_multiplier;
    doc["decoder"] = decoder_name(cfg.decoder);
    doc["conv_type"] = conv_type_name(cfg.conv_type);
    doc["group_size"] = cfg.group_size;
    doc["se_reduction"] = cfg.se_reduction;
    doc["seed"] = cfg.seed;
    return doc.dump(2);
}

const std::vector<StageSpec>& encoder_stage_table() {
    static const std::vector<StageSpec> table = {
        {16, 1, 1, 1, 3}, {24, 2, 2, 6, 3},  {40, 2, 2, 6, 5}, {80, 3, 2, 6, 3},
        {112, 3, 1, 6, 5}, {192, 4, 2, 6, 5}, {320, 1, 1, 6, 3},
    };
    return table;
}

int stem_channels() { return 32; }

int scale_channels(int base, float multiplier) {
    const double scaled = static_cast<double>(base) * multiplier;
    int v = std::max(8, static_cast<int>(scaled + 4.0) / 8 * 8);
    if (v < 0.9 * scaled)
        v += 8;
    return v;
}

namespace {

// Registers weight shapes (and, when materializing, He-initialized data)
// alongside node creation. One RNG per builder keeps init deterministic in
// build order.
class NetBuilder {
public:
    NetBuilder(Graph& g, uint64_t seed, bool init) : g_(g), rng_(seed), init_(init) {}

    int conv(const std::string& name, int input, const ConvSpec& spec) {
        const int out = g_.add_conv(name, input, spec);
        WeightTensor w;
        w.dims = {spec.cout, spec.cin / spec.groups, spec.kh, spec.kw};
        if (init_)
            fill_he(w, spec.kh * spec.kw * (spec.cin / spec.groups));
        g_.weights().put(name + ".w", std::move(w));
        if (spec.has_bias) {
            WeightTensor b;
            b.dims = {spec.cout};
            if (init_)
                b.data.assign(static_cast<size_t>(spec.cout), 0.0f);
            g_.weights().put(name + ".b", std::move(b));
        }
        return out;
    }

    int se(const std::string& name, int input, int reduction) {
        const int c = g_.tensor_shape(input).c;
        const int out = g_.add_se(name, input, reduction);
        const int cr = c / reduction;
        WeightTensor w1{{cr, c}, {}}, b1{{cr}, {}}, w2{{c, cr}, {}}, b2{{c}, {}};
        if (init_) {
            fill_he(w1, c);
            fill_he(w2, cr);
            b1.data.assign(static_cast<size_t>(cr), 0.0f);
            b2.data.assign(static_cast<size_t>(c), 0.0f);
        }
        g_.weights().put(name + ".w1", std::move(w1));
        g_.weights().put(name + ".b1", std::move(b1));
        g_.weights().put(name + ".w2", std::move(w2));
        g_.weights().put(name + ".b2", std::move(b2));
        return out;
    }

    int relu6(const std::string& name, int input) { return g_.add_activation(name, input, ActKind::ReLU6); }

    Graph& graph() { return g_; }

private:
    void fill_he(WeightTensor& w, int fan_in) {
        const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
        w.data.resize(static_cast<size_t>(w.count()));
        for (float& v : w.data)
            v = rng_.normal(0.0f, stddev);
    }

    Graph& g_;
    Rng rng_;
    bool init_;
};

ConvSpec pointwise(int cin, int cout) {
    ConvSpec s;
    s.kh = s.kw = 1;
    s.cin = cin;
    s.cout = cout;
    return s;
}

ConvSpec spatial_spec(const ModelConfig& cfg, int channels, int kernel, int stride) {
    ConvSpec s;
    s.kh = s.kw = kernel;
    s.sh = s.sw = stride;
    s.cin = s.cout = channels;
    s.groups = cfg.conv_type == ConvType::Depthwise ? channels : cfg.group_size;
    if (channels % s.groups != 0)
        throw ConfigError("group count " + std::to_string(s.groups) + " does not divide " +
                          std::to_string(channels) + " channels");
    return s;
}

ConvSpec depthwise3x3(int channels) {
    ConvSpec s;
    s.kh = s.kw = 3;
    s.cin = s.cout = channels;
    s.groups = channels;
    return s;
}

int dec_width(const ModelConfig& cfg, int tap_channels) {
    return std::max(cfg.min_decoder_width,
                    static_cast<int>(static_cast<float>(tap_channels) * cfg.decoder_width_ratio));
}

constexpr uint64_t kDecoderSeedTag = 0x6465636f64657221ull;

} // namespace

EncoderTaps build_encoder(Graph& g, const ModelConfig& cfg, int input, const BuildOptions& opts) {
    cfg.validate();
    const Shape in = g.tensor_shape(input);
    if (in.c != 3)
        throw ConfigError("encoder expects a 3-channel input, got " + in.str());
    if (in.h % 32 != 0 || in.w % 32 != 0)
        throw ConfigError("input spatial dims must be multiples of 32, got " + in.str());

    NetBuilder b(g, cfg.seed, opts.init_weights);
    const int stem = scale_channels(stem_channels(), cfg.width_multiplier);
    ConvSpec stem_spec = pointwise(3, stem);
    stem_spec.kh = stem_spec.kw = 3;
    stem_spec.sh = stem_spec.sw = 2;
    int x = b.conv("enc.stem", input, stem_spec);
    x = b.relu6("enc.stem.act", x);

    EncoderTaps taps;
    int cin = stem;
    const auto& table = encoder_stage_table();
    for (size_t si = 0; si < table.size(); ++si) {
        const StageSpec& st = table[si];
        const int cout = scale_channels(st.channels, cfg.width_multiplier);
        for (int bi = 0; bi < st.repeats; ++bi) {
            const int stride = bi == 0 ? st.stride : 1;
            const std::string prefix = "enc.s" + std::to_string(si + 1) + ".b" + std::to_string(bi);
            const int block_in = x;
            int e = cin;
            if (st.expansion != 1) {
                e = cin * st.expansion;
                x = b.conv(prefix + ".expand", x, pointwise(cin, e));
                x = b.relu6(prefix + ".expand_act", x);
            }
            x = b.conv(prefix + ".spatial", x, spatial_spec(cfg, e, st.kernel, stride));
            x = b.relu6(prefix + ".spatial_act", x);
            x = b.conv(prefix + ".project", x, pointwise(e, cout)); // linear
            if (stride == 1 && cin == cout)
                x = g.add_add(prefix + ".residual", block_in, x);
            cin = cout;
        }
        switch (si) {
        case 0: taps.s2 = x; break;
        case 1: taps.s4 = x; break;
        case 2: taps.s8 = x; break;
        case 4: taps.s16 = x; break;
        case 6: taps.s32 = x; break;
        default: break;
        }
    }
    return taps;
}

int build_decoder(Graph& g, const ModelConfig& cfg, const EncoderTaps& taps, const BuildOptions& opts) {
    cfg.validate();
    struct TapRef {
        const char* label;
        int id;
    };
    for (TapRef t : {TapRef{"1/2", taps.s2}, TapRef{"1/4", taps.s4}, TapRef{"1/8", taps.s8},
                     TapRef{"1/16", taps.s16}, TapRef{"1/32", taps.s32}})
        if (t.id < 0)
            throw ConfigError(std::string("decoder requires the ") + t.label + " encoder tap");
    for (auto [hi, lo] : {std::pair{taps.s2, taps.s4}, {taps.s4, taps.s8}, {taps.s8, taps.s16},
                          {taps.s16, taps.s32}}) {
        const Shape a = g.tensor_shape(hi), b = g.tensor_shape(lo);
        if (b.h * 2 != a.h || b.w * 2 != a.w)
            throw ConfigError("encoder taps are not successive halvings: " + a.str() + " vs " + b.str());
    }

    NetBuilder b(g, cfg.seed ^ kDecoderSeedTag, opts.init_weights);
    const int c32 = g.tensor_shape(taps.s32).c;
    const int w16 = dec_width(cfg, g.tensor_shape(taps.s16).c);
    const int w8 = dec_width(cfg, g.tensor_shape(taps.s8).c);
    const int w4 = dec_width(cfg, g.tensor_shape(taps.s4).c);

    // head: bottleneck with channel attention on the small 1/32 tensor
    const int e = c32 * cfg.head_expand;
    int x = b.conv("dec.head.expand", taps.s32, pointwise(c32, e));
    x = b.relu6("dec.head.expand_act", x);
    x = b.conv("dec.head.spatial", x, depthwise3x3(e));
    x = b.relu6("dec.head.spatial_act", x);
    x = b.se("dec.head.se", x, cfg.se_reduction);
    x = b.conv("dec.head.project", x, pointwise(e, w16)); // linear

    struct ScaleStep {
        const char* label;
        int tap;
        int w_in;  // stream width entering the scale
        int w_out; // stream width leaving it
    };
    std::vector<ScaleStep> steps;
    if (cfg.decoder == DecoderVariant::BilinearUpsampling)
        steps = {{"16", taps.s16, w16, w16}, {"8", taps.s8, w16, w16}, {"4", taps.s4, w16, w16}};
    else
        steps = {{"16", taps.s16, w16, w16}, {"8", taps.s8, w16, w8}, {"4", taps.s4, w8, w4}};

    for (const ScaleStep& s : steps) {
        const std::string skip_name = std::string("dec.skip") + s.label + ".proj";
        const int skip = b.conv(skip_name, s.tap, pointwise(g.tensor_shape(s.tap).c, s.w_in));
        const std::string p = std::string("dec.s") + s.label;
        x = g.add_upsample(p + ".up", x, 2);
        switch (cfg.decoder) {
        case DecoderVariant::BilinearUpsampling:
            x = g.add_add(p + ".add", x, skip);
            x = b.relu6(p + ".act", x);
            break;
        case DecoderVariant::MLP: {
            x = g.add_add(p + ".add", x, skip);
            int width = s.w_in;
            for (int d = 0; d < cfg.mlp_depth; ++d) {
                x = b.conv(p + ".mlp" + std::to_string(d), x, pointwise(width, s.w_out));
                x = b.relu6(p + ".mlp" + std::to_string(d) + "_act", x);
                width = s.w_out;
            }
            break;
        }
        case DecoderVariant::ChannelAttention: {
            x = b.se(p + ".se", x, cfg.se_reduction);
            x = g.add_add(p + ".add", x, skip);
            int width = s.w_in;
            for (int d = 0; d < cfg.mlp_depth; ++d) {
                x = b.conv(p + ".pw" + std::to_string(d), x, pointwise(width, s.w_out));
                x = b.relu6(p + ".pw" + std::to_string(d) + "_act", x);
                width = s.w_out;
            }
            x = b.conv(p + ".dw", x, depthwise3x3(s.w_out));
            x = b.relu6(p + ".dw_act", x);
            break;
        }
        }
    }

    const int w_last = cfg.decoder == DecoderVariant::BilinearUpsampling ? w16 : w4;
    x = b.conv("dec.mask.proj", x, pointwise(w_last, 1));
    x = g.add_upsample("dec.mask.up", x, 4);
    x = g.add_activation("dec.mask.act", x, ActKind::Sigmoid);
    return x;
}

Graph build_model(const ModelConfig& cfg, const BuildOptions& opts) {
    cfg.validate();
    Graph g;
    const int input = g.add_input(Shape{1, cfg.resolution, cfg.resolution, 3});
    const EncoderTaps taps = build_encoder(g, cfg, input, opts);
    const int mask = build_decoder(g, cfg, taps, opts);
    g.mark_output(mask);
    g.validate();
    return g;
}

namespace {

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char bytes[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i)
        bytes[i] = static_cast<unsigned char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw ExecError("truncated weight file");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

uint16_t read_u16(std::istream& is) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2))
        throw ExecError("truncated weight file");
    return static_cast<uint16_t>(b[0] | b[1] << 8);
}

constexpr uint32_t kWeightVersion = 1;

} // namespace

void save_weights(std::ostream& os, const WeightStore& ws) {
    os.write("HSWT", 4);
    write_le(os, kWeightVersion);
    write_le(os, static_cast<uint32_t>(ws.size()));
    for (const std::string& name : ws.names()) {
        const WeightTensor& w = ws.get(name);
        if (w.data.size() != static_cast<size_t>(w.count()))
            throw ExecError("weight tensor '" + name + "' has no materialized data to serialize");
        if (name.size() > 0xffff)
            throw ExecError("weight name too long");
        write_le(os, static_cast<uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le(os, static_cast<uint32_t>(w.dims.size()));
        for (int d : w.dims)
            write_le(os, static_cast<uint32_t>(d));
        for (float v : w.data) {
            uint32_t u;
            std::memcpy(&u, &v, 4);
            write_le(os, u);
        }
    }
    if (!os)
        throw ExecError("weight serialization failed");
}

void load_weights(std::istream& is, WeightStore& ws) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "HSWT", 4) != 0)
        throw ExecError("bad weight file magic");
    const uint32_t version = read_u32(is);
    if (version != kWeightVersion)
        throw ExecError("unsupported weight file version " + std::to_string(version));
    const uint32_t count = read_u32(is);
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = read_u16(is);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw ExecError("truncated weight file");
        const uint32_t rank = read_u32(is);
        if (rank > 8)
            throw ExecError("weight tensor rank " + std::to_string(rank) + " out of range");
        WeightTensor w;
        w.dims.resize(rank);
        for (uint32_t d = 0; d < rank; ++d)
            w.dims[d] = static_cast<int>(read_u32(is));
        const int64_t n = w.count();
        w.data.resize(static_cast<size_t>(n));
        for (int64_t k = 0; k < n; ++k) {
            const uint32_t u = read_u32(is);
            float f;
            std::memcpy(&f, &u, 4);
            w.data[static_cast<size_t>(k)] = f;
        }
        ws.put(name, std::move(w));
    }
}

} // namespace hseg
