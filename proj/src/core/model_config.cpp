#include "model_config.hpp"

#include "error.hpp"

#include <array>

namespace rw {

namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string& s, const std::array<E, N>& values, const char* what)
{
    for (E v : values)
        if (s == to_string(v)) return v;
    std::string allowed;
    for (E v : values) allowed += (allowed.empty() ? "" : ", ") + std::string(to_string(v));
    fail(ErrorCode::config, std::string("unknown ") + what + " '" + s + "' (expected one of: " + allowed + ")");
}

}  // namespace

const char* to_string(AttentionKind v) { return v == AttentionKind::dense ? "dense" : "deformable"; }
const char* to_string(Conditioning v) { return v == Conditioning::add ? "add" : "cross_attention"; }
const char* to_string(PredictMode v) { return v == PredictMode::residual ? "residual" : "full_reconstruction"; }

const char* to_string(Coupling v)
{
    switch (v) {
    case Coupling::tight: return "tight";
    case Coupling::semi: return "semi";
    case Coupling::decoupled: return "decoupled";
    }
    return "?";
}

AttentionKind parse_attention(const std::string& s)
{
    return parse_enum(s, std::array{AttentionKind::deformable, AttentionKind::dense}, "attention kind");
}

Conditioning parse_conditioning(const std::string& s)
{
    return parse_enum(s, std::array{Conditioning::add, Conditioning::cross_attention}, "conditioning");
}

PredictMode parse_predict_mode(const std::string& s)
{
    return parse_enum(s, std::array{PredictMode::residual, PredictMode::full_reconstruction}, "predict mode");
}

Coupling parse_coupling(const std::string& s)
{
    return parse_enum(s, std::array{Coupling::tight, Coupling::semi, Coupling::decoupled}, "coupling");
}

void ModelConfig::validate() const
{
    check(dim >= 4, ErrorCode::config, "model.dim must be >= 4");
    check(heads >= 1 && dim % heads == 0, ErrorCode::config, "model.dim must be divisible by model.heads");
    check(dim % 4 == 0, ErrorCode::config, "model.dim must be divisible by 4");
    check(layers >= 1, ErrorCode::config, "model.layers must be >= 1");
    check(points >= 1, ErrorCode::config, "model.points must be >= 1");
    check(memory >= 1, ErrorCode::config, "model.memory must be >= 1");
    check(ffn_mult >= 1, ErrorCode::config, "model.ffn_mult must be >= 1");
    check(ln_eps > 0, ErrorCode::config, "model.ln_eps must be > 0");
}

}  // namespace rw
