#include "checkpoint.hpp"

#include "error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <span>

namespace rw {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'R', 'W', 'C', 'K', 'P', 'T', '0', '1'};

class Writer {
public:
    explicit Writer(const std::filesystem::path& file) : out_(file, std::ios::binary | std::ios::trunc)
    {
        check(static_cast<bool>(out_), ErrorCode::io, "cannot write " + file.string());
    }
    template <class T>
    void pod(T v)
    {
        out_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void text(const std::string& s)
    {
        pod<std::uint64_t>(s.size());
        bytes(s.data(), s.size());
    }
    void doubles(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }
    void finish(const std::filesystem::path& file)
    {
        out_.flush();
        check(static_cast<bool>(out_), ErrorCode::io, "write failed for " + file.string());
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& file) : in_(file, std::ios::binary), file_(file.string())
    {
        check(static_cast<bool>(in_), ErrorCode::io, "cannot open checkpoint " + file_);
    }
    template <class T>
    T pod()
    {
        T v{};
        bytes(&v, sizeof v);
        return v;
    }
    void bytes(void* p, std::size_t n)
    {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        check(static_cast<std::size_t>(in_.gcount()) == n, ErrorCode::malformed_file,
              "checkpoint " + file_ + " is truncated");
    }
    std::string text(std::size_t limit)
    {
        const auto n = pod<std::uint64_t>();
        check(n <= limit, ErrorCode::malformed_file, "checkpoint " + file_ + " has an oversized string");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::vector<double> doubles(std::size_t n)
    {
        std::vector<double> v(n);
        bytes(v.data(), n * sizeof(double));
        return v;
    }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    std::ifstream in_;
    std::string file_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const RunConfig& cfg, const WorldModel& model,
                     const AdamW* optimizer, std::int64_t step)
{
    const auto tmp = std::filesystem::path(file.string() + ".tmp");
    {
        Writer w(tmp);
        w.bytes(kMagic, sizeof kMagic);
        w.pod<std::uint32_t>(kCheckpointVersion);
        w.pod<std::uint64_t>(config_hash(cfg));
        w.pod<std::uint64_t>(architecture_hash(cfg));
        w.pod<std::int64_t>(step);
        w.text(config_to_json(cfg).dump());
        const auto& entries = model.params.entries();
        w.pod<std::uint64_t>(entries.size());
        for (const auto& e : entries) {
            w.pod<std::uint32_t>(static_cast<std::uint32_t>(e.name.size()));
            w.bytes(e.name.data(), e.name.size());
            const auto& shape = e.var.value().shape();
            w.pod<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
            for (int d : shape) w.pod<std::uint32_t>(static_cast<std::uint32_t>(d));
            w.doubles(e.var.value().values());
        }
        w.pod<std::uint8_t>(optimizer != nullptr ? 1 : 0);
        if (optimizer != nullptr) {
            w.pod<std::int64_t>(optimizer->steps_taken());
            for (std::size_t k = 0; k < entries.size(); ++k) {
                w.doubles(optimizer->first_moment()[k]);
                w.doubles(optimizer->second_moment()[k]);
            }
        }
        w.finish(tmp);
    }
    std::filesystem::rename(tmp, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& file)
{
    Reader r(file);
    char magic[8];
    r.bytes(magic, sizeof magic);
    check(std::memcmp(magic, kMagic, sizeof magic) == 0, ErrorCode::malformed_file,
          file.string() + " is not a checkpoint");
    const auto version = r.pod<std::uint32_t>();
    check(version == kCheckpointVersion, ErrorCode::format_version,
          "checkpoint format version " + std::to_string(version) + " is not supported (expected " +
              std::to_string(kCheckpointVersion) + ")");

    Checkpoint c;
    c.config_hash = r.pod<std::uint64_t>();
    c.arch_hash = r.pod<std::uint64_t>();
    c.step = r.pod<std::int64_t>();
    const std::string text = r.text(1u << 24);
    const auto j = nlohmann::json::parse(text, nullptr, false);
    check(!j.is_discarded(), ErrorCode::malformed_file, "checkpoint config is not valid JSON");
    c.config = config_from_json(j);
    check(architecture_hash(c.config) == c.arch_hash, ErrorCode::malformed_file,
          "checkpoint architecture hash does not match its embedded config");
    check(config_hash(c.config) == c.config_hash, ErrorCode::malformed_file,
          "checkpoint config hash does not match its embedded config");

    c.model = std::make_unique<WorldModel>(c.config.world, c.config.model, c.config.seed);
    auto& entries = c.model->params.entries();
    const auto count = r.pod<std::uint64_t>();
    check(count == entries.size(), ErrorCode::shape_mismatch, "checkpoint parameter count differs from the model");
    for (auto& e : entries) {
        const auto len = r.pod<std::uint32_t>();
        check(len < 4096, ErrorCode::malformed_file, "checkpoint parameter name is oversized");
        std::string name(len, '\0');
        r.bytes(name.data(), len);
        check(name == e.name, ErrorCode::shape_mismatch, "checkpoint parameter '" + name + "' where '" + e.name +
                                                             "' was expected");
        const auto rank = r.pod<std::uint32_t>();
        check(rank <= 8, ErrorCode::malformed_file, "checkpoint parameter rank is implausible");
        std::vector<int> shape;
        for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<int>(r.pod<std::uint32_t>()));
        check(shape == e.var.value().shape(), ErrorCode::shape_mismatch, "checkpoint shape mismatch for " + name);
        const std::vector<double> values = r.doubles(e.var.size());
        e.var.mutable_value().values().assign(values.begin(), values.end());
    }
    c.has_optimizer = r.pod<std::uint8_t>() != 0;
    if (c.has_optimizer) {
        c.optimizer_steps = r.pod<std::int64_t>();
        for (const auto& e : entries) {
            c.first_moment.push_back(r.doubles(e.var.size()));
            c.second_moment.push_back(r.doubles(e.var.size()));
        }
    }
    check(r.at_end(), ErrorCode::malformed_file, "checkpoint has trailing bytes");
    return c;
}

void restore_optimizer(const Checkpoint& ckpt, AdamW& optimizer)
{
    check(ckpt.has_optimizer, ErrorCode::invalid_argument, "checkpoint holds no optimizer state");
    check(optimizer.first_moment().size() == ckpt.first_moment.size(), ErrorCode::shape_mismatch,
          "optimizer layout differs from the checkpoint");
    optimizer.first_moment() = ckpt.first_moment;
    optimizer.second_moment() = ckpt.second_moment;
    optimizer.set_steps_taken(static_cast<int>(ckpt.optimizer_steps));
}

void require_compatible(const Checkpoint& ckpt, const RunConfig& cfg)
{
    check(ckpt.arch_hash == architecture_hash(cfg), ErrorCode::config,
          "checkpoint architecture (" + hex64(ckpt.arch_hash) + ") conflicts with the config (" +
              hex64(architecture_hash(cfg)) + "): world or model shape keys differ");
}

}  // namespace rw
