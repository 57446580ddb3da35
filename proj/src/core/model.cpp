#include "model.hpp"

#include "error.hpp"

namespace rw {

namespace {

// Parameter groups are initialized from independent substreams so adding a
// block to one module does not change the initial values of another.
Rng init_stream(std::uint64_t seed, const char* block) { return Rng::substream(seed, std::string("init.") + block); }

template <typename T>
T make_block(ParamSet& ps, const WorldConfig& w, const ModelConfig& m, std::uint64_t seed, const char* name)
{
    Rng rng = init_stream(seed, name);
    return T(ps, w, m, rng);
}

}  // namespace

WorldModel::WorldModel(const WorldConfig& w, const ModelConfig& m, std::uint64_t seed)
    : world((w.validate(), w)),
      model((m.validate(), m)),
      encoder(make_block<EncoderParams>(params, world, model, seed, "encoder")),
      predictor(make_block<PredictorParams>(params, world, model, seed, "predictor")),
      align(make_block<AlignParams>(params, world, model, seed, "align")),
      occ(make_block<OccHeadParams>(params, world, model, seed, "occ")),
      plan(make_block<PlanHeadParams>(params, world, model, seed, "plan"))
{
}

void WorldModel::copy_values_from(const WorldModel& other)
{
    const auto& src = other.params.entries();
    auto& dst = params.entries();
    check(src.size() == dst.size(), ErrorCode::shape_mismatch, "copy_values_from: parameter layout differs");
    for (std::size_t i = 0; i < src.size(); ++i) {
        check(src[i].name == dst[i].name && src[i].var.shape() == dst[i].var.shape(), ErrorCode::shape_mismatch,
              "copy_values_from: parameter layout differs at " + dst[i].name);
        dst[i].var.mutable_value() = src[i].var.value();
    }
}

}  // namespace rw
