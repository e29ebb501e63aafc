#include "fgd/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "fgd/textio.hpp"

namespace fgd {

namespace {

template <typename U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
   public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename U>
    U get_le() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return v;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

   private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const std::vector<NamedArray>& arrays) {
    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& a : arrays) {
        if (shape_numel(a.shape) != a.values.size()) throw CheckpointError("array '" + a.name + "' shape mismatch");
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
        out += a.name;
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
        for (auto d : a.shape) put_le<std::uint64_t>(out, d);
        for (double v : a.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

std::vector<NamedArray> decode_checkpoint(std::string_view bytes) {
    Reader in(bytes);
    if (in.take(sizeof(kCheckpointMagic)) != std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
        throw CheckpointError("not a checkpoint (bad magic)");
    }
    const auto version = in.get_le<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = in.get_le<std::uint32_t>();
    std::vector<NamedArray> arrays;
    for (std::uint32_t k = 0; k < count; ++k) {
        NamedArray a;
        a.name = std::string(in.take(in.get_le<std::uint32_t>()));
        const auto rank = in.get_le<std::uint32_t>();
        for (std::uint32_t d = 0; d < rank; ++d) a.shape.push_back(static_cast<std::size_t>(in.get_le<std::uint64_t>()));
        const std::size_t n = shape_numel(a.shape);
        if (n > bytes.size() / sizeof(double)) throw CheckpointError("checkpoint truncated");
        a.values.resize(n);
        for (auto& v : a.values) v = std::bit_cast<double>(in.get_le<std::uint64_t>());
        arrays.push_back(std::move(a));
    }
    if (!in.done()) throw CheckpointError("trailing bytes after checkpoint payload");
    return arrays;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
    write_file_atomic(path, encode_checkpoint(arrays));
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw CheckpointError("checkpoint not found: " + path.string());
    return decode_checkpoint(read_file(path));
}

NamedArray snapshot(const Parameter& p) {
    return {p.name, p.tensor.shape(), {p.tensor.values().begin(), p.tensor.values().end()}};
}

void restore(const std::vector<NamedArray>& arrays, const std::vector<Parameter*>& params) {
    for (Parameter* p : params) {
        const NamedArray* match = nullptr;
        for (const auto& a : arrays) {
            if (a.name == p->name) match = &a;
        }
        if (!match) throw CheckpointError("checkpoint has no array named '" + p->name + "'");
        if (match->shape != p->tensor.shape()) {
            throw CheckpointError("shape mismatch for '" + p->name + "': " + shape_to_string(match->shape) + " vs " +
                                  shape_to_string(p->tensor.shape()));
        }
        auto dst = p->tensor.mutable_values();
        std::copy(match->values.begin(), match->values.end(), dst.begin());
    }
}

}  // namespace fgd
