#include "bassl/checkpoint.hpp"

#include "bassl/errors.hpp"
#include "bassl/trainer.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace bassl {

namespace {

constexpr std::uint8_t kMagic[] = {'B', 'A', 'S', 'S', 'L'};
constexpr std::uint8_t kVersion = 0x01;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += sizeof(T);
        return v;
    }

    std::string get_string(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t position() const noexcept { return pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw CorruptCheckpointError("checkpoint truncated at byte offset " + std::to_string(pos_));
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const Parameter* const> tensors) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.push_back(kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const Parameter* t : tensors) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t->name.size()));
        out.insert(out.end(), t->name.begin(), t->name.end());
        if (t->value.rank() > 255) {
            throw FormatError("tensor " + t->name + " has rank above 255");
        }
        out.push_back(static_cast<std::uint8_t>(t->value.rank()));
        for (std::size_t d : t->value.shape()) {
            put_le<std::uint64_t>(out, d);
        }
        for (double v : t->value.values()) {
            put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    put_le<std::uint32_t>(out, crc32_of(out));
    return out;
}

std::vector<Parameter> decode_checkpoint(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t kHeader = sizeof(kMagic) + 1;
    if (bytes.size() < kHeader + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw CorruptCheckpointError("not a checkpoint: bad magic");
    }
    if (bytes[sizeof(kMagic)] != kVersion) {
        throw CorruptCheckpointError("unsupported checkpoint version " +
                                     std::to_string(bytes[sizeof(kMagic)]));
    }
    const auto body = bytes.first(bytes.size() - 4);
    Reader trailer(bytes.last(4));
    if (trailer.get<std::uint32_t>() != crc32_of(body)) {
        throw CorruptCheckpointError("checkpoint CRC mismatch");
    }
    Reader r(body.subspan(kHeader));
    const auto count = r.get<std::uint32_t>();
    std::vector<Parameter> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.get<std::uint32_t>();
        std::string name = r.get_string(name_len);
        const auto rank = r.get<std::uint8_t>();
        Shape shape(rank);
        for (auto& d : shape) {
            d = static_cast<std::size_t>(r.get<std::uint64_t>());
            if (d == 0) {
                throw CorruptCheckpointError("tensor " + name + " has a zero dimension");
            }
        }
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (n > (body.size() / 8) / d) {
                throw CorruptCheckpointError("tensor " + name + " is larger than the file");
            }
            n *= d;
        }
        std::vector<double> values(n);
        for (double& v : values) {
            v = std::bit_cast<double>(r.get<std::uint64_t>());
        }
        out.push_back(Parameter{std::move(name), Tensor(std::move(shape), std::move(values))});
    }
    if (kHeader + r.position() != body.size()) {
        throw CorruptCheckpointError("trailing bytes after the last tensor");
    }
    return out;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw FormatError("cannot write " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw FormatError("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter* const> tensors) {
    write_file_atomic(path, encode_checkpoint(tensors));
}

std::vector<Parameter> load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file(path));
}

void save_trainer(Trainer& trainer, const std::filesystem::path& path) {
    const auto params = trainer.state_parameters();
    save_checkpoint(path, params);
}

void load_trainer(Trainer& trainer, const std::filesystem::path& path) {
    auto loaded = load_checkpoint(path);
    std::map<std::string, Tensor*> by_name;
    for (Parameter& p : loaded) {
        by_name[p.name] = &p.value;
    }
    const auto targets = trainer.state_parameters();
    if (by_name.size() != targets.size() || loaded.size() != targets.size()) {
        throw CorruptCheckpointError("checkpoint holds " + std::to_string(loaded.size()) +
                                     " tensors, trainer expects " + std::to_string(targets.size()));
    }
    for (Parameter* p : targets) {
        const auto it = by_name.find(p->name);
        if (it == by_name.end()) {
            throw CorruptCheckpointError("checkpoint lacks tensor " + p->name);
        }
        if (it->second->shape() != p->value.shape()) {
            throw CorruptCheckpointError("tensor " + p->name + " has shape " +
                                         shape_string(it->second->shape()) + ", expected " +
                                         shape_string(p->value.shape()));
        }
    }
    for (Parameter* p : targets) {
        p->value = *by_name.at(p->name);
    }
    const auto steps = static_cast<std::size_t>(by_name.at("train.step")->item());
    trainer.set_steps_done(steps);
    trainer.optimizer().set_step_count(steps);
}

}  // namespace bassl
