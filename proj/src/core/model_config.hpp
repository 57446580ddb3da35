#pragma once

#include "gridworld.hpp"

#include <string>

namespace rw {

enum class AttentionKind { deformable, dense };
enum class Conditioning { add, cross_attention };
enum class PredictMode { residual, full_reconstruction };
enum class Coupling { tight, semi, decoupled };

const char* to_string(AttentionKind v);
const char* to_string(Conditioning v);
const char* to_string(PredictMode v);
const char* to_string(Coupling v);
AttentionKind parse_attention(const std::string& s);
Conditioning parse_conditioning(const std::string& s);
PredictMode parse_predict_mode(const std::string& s);
Coupling parse_coupling(const std::string& s);

struct ModelConfig {
    int dim = 32;
    int layers = 2;
    int heads = 4;
    int points = 4;   // sampling points per head
    int memory = 3;   // streaming memory capacity m
    int ffn_mult = 2;
    double ln_eps = 1e-5;
    AttentionKind attention = AttentionKind::deformable;
    Conditioning conditioning = Conditioning::add;
    PredictMode mode = PredictMode::residual;
    bool feature_alignment = true;
    // Zero-initialize the residual output projection, the encoder's final
    // layer and the plan output layer.
    bool zero_init_outputs = false;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

}  // namespace rw
