#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hseg/graph.hpp"

namespace hseg {

enum class DecoderVariant { BilinearUpsampling, ChannelAttention, MLP };
enum class ConvType { Depthwise, Group };

const char* decoder_name(DecoderVariant v);
const char* conv_type_name(ConvType t);

// A point in the architecture search space. The JSON document form carries
// exactly the keys resolution, width_multiplier, decoder, conv_type,
// group_size, se_reduction, seed; the remaining fields are defaults exposed
// only programmatically.
struct ModelConfig {
    int resolution = 512;            // must be divisible by 32
    float width_multiplier = 1.0f;
    DecoderVariant decoder = DecoderVariant::MLP;
    ConvType conv_type = ConvType::Group;
    int group_size = 4;              // the g of Group(g): number of groups
    int se_reduction = 4;
    uint64_t seed = 1;

    // not part of the JSON schema
    int mlp_depth = 2;               // 1x1 convs per decoder scale (MLP/CA)
    float decoder_width_ratio = 0.5f; // decoder width = ratio * encoder tap width
    int min_decoder_width = 8;
    int head_expand = 2;             // decoder-head bottleneck expansion
    float norm_mean = 0.5f;          // input normalization for image inference
    float norm_std = 0.5f;

    void validate() const;
    std::string summary() const; // e.g. "r512_w1.0_mlp_group4"
};

ModelConfig parse_model_config(const std::string& json_text); // strict key set
std::string model_config_json(const ModelConfig& cfg);

// One encoder stage: `repeats` inverted residual bottleneck blocks.
struct StageSpec {
    int channels;   // pre-multiplier output width
    int repeats;
    int stride;     // applied by the first block
    int expansion;
    int kernel;
};

// EfficientNetLite-style table; stem stride 2 and stage strides multiply to 32.
const std::vector<StageSpec>& encoder_stage_table();
int stem_channels();

// base * multiplier rounded to a multiple of 8 (never below 8).
int scale_channels(int base, float multiplier);

// Skip-tap tensor ids at 1/2 .. 1/32 of the input resolution; -1 = missing.
struct EncoderTaps {
    int s2 = -1, s4 = -1, s8 = -1, s16 = -1, s32 = -1;
};

struct BuildOptions {
    bool init_weights = true; // false: register shapes only (analysis builds)
};

// Appends the encoder to `g`, consuming `input` (shape 1 x res x res x 3).
EncoderTaps build_encoder(Graph& g, const ModelConfig& cfg, int input,
                          const BuildOptions& opts = {});

// Appends the decoder; returns the mask tensor id (1 x res x res x 1, values
// in (0,1)). All five taps must be present.
int build_decoder(Graph& g, const ModelConfig& cfg, const EncoderTaps& taps,
                  const BuildOptions& opts = {});

// Full model: encoder + decoder wired, deterministic He-style init from
// cfg.seed.
Graph build_model(const ModelConfig& cfg, const BuildOptions& opts = {});

// Weight file: magic "HSWT", version u32, count u32, then per-tensor records
// (name-length u16, name bytes, rank u32, dims u32[rank], f32 LE payload).
void save_weights(std::ostream& os, const WeightStore& ws);
void load_weights(std::istream& is, WeightStore& ws);

} // namespace hseg
