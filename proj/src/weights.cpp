#include "taylorse/weights.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "taylorse/error.hpp"
#include "taylorse/model_zoo.hpp"

namespace taylorse {

std::string_view to_string(Variant v) { return v == Variant::taer ? "taer" : "taerlite"; }

Variant parse_variant(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "taer") return Variant::taer;
    if (lower == "taerlite") return Variant::taerlite;
    throw ConfigError("unknown variant '" + std::string(name) + "' (expected taer or taerlite)");
}

}  // namespace taylorse

namespace taylorse::weights {

namespace {

static_assert(std::endian::native == std::endian::little, "archive codec assumes a little-endian host");

constexpr std::uint8_t kDtypeF32 = 0;

class Writer {
public:
    void u8(std::uint8_t v) { out.push_back(v); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v));
        u8(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : buf(b) {}
    const std::uint8_t* take(std::size_t n) {
        if (pos + n > buf.size()) throw FormatError("weight archive truncated at byte " + std::to_string(pos));
        const auto* p = buf.data() + pos;
        pos += n;
        return p;
    }
    std::uint8_t u8() { return *take(1); }
    std::uint16_t u16() {
        const auto* p = take(2);
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }
    std::uint32_t u32() {
        const auto* p = take(4);
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }
    std::span<const std::uint8_t> buf;
    std::size_t pos = 0;
};

std::string shape_str(const std::vector<std::uint32_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

}  // namespace

Tensor& WeightArchive::add(std::string name, std::vector<std::uint32_t> shape, std::vector<float> data) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    if (n != data.size())
        throw ConfigError("tensor '" + name + "': shape " + shape_str(shape) + " needs " + std::to_string(n) +
                          " values, got " + std::to_string(data.size()));
    if (index_.contains(name)) throw ConfigError("duplicate tensor name '" + name + "'");
    index_.emplace(name, tensors_.size());
    tensors_.push_back({std::move(name), std::move(shape), std::move(data)});
    return tensors_.back();
}

const Tensor* WeightArchive::find(const std::string& name) const {
    const auto it = index_.find(name);
    return it == index_.end() ? nullptr : &tensors_[it->second];
}

Tensor* WeightArchive::find(const std::string& name) {
    const auto it = index_.find(name);
    return it == index_.end() ? nullptr : &tensors_[it->second];
}

std::span<const float> WeightArchive::lookup(const std::string& name) const {
    const Tensor* t = find(name);
    if (t == nullptr) throw ConfigError("weight archive has no tensor '" + name + "'");
    return t->data;
}

std::size_t WeightArchive::total_elements() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.data.size();
    return n;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t seed) {
    uLong crc = seed;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
        crc = ::crc32(crc, bytes.data() + pos, chunk);
        pos += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize(const WeightArchive& a) {
    Writer w;
    w.bytes(kMagic, 4);
    w.u16(a.header.version);
    w.u8(static_cast<std::uint8_t>(a.header.variant));
    w.u8(0);
    w.u16(a.header.order);
    w.u16(a.header.channels);
    w.u32(static_cast<std::uint32_t>(a.tensors().size()));
    std::uint32_t crc = 0;
    for (const auto& t : a.tensors()) {
        if (t.name.size() > 0xffff) throw ConfigError("tensor name too long: " + t.name.substr(0, 64));
        w.u16(static_cast<std::uint16_t>(t.name.size()));
        w.bytes(t.name.data(), t.name.size());
        w.u8(kDtypeF32);
        w.u8(static_cast<std::uint8_t>(t.shape.size()));
        for (auto d : t.shape) w.u32(d);
        const std::size_t start = w.out.size();
        w.bytes(t.data.data(), t.data.size() * sizeof(float));
        crc = crc32(std::span(w.out).subspan(start), crc);
    }
    w.u32(crc);
    return std::move(w.out);
}

WeightArchive deserialize(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    if (std::memcmp(r.take(4), kMagic, 4) != 0) throw FormatError("bad weight archive magic (expected TAYW)");
    WeightArchive a;
    a.header.version = r.u16();
    if (a.header.version != kVersion)
        throw FormatError("unsupported weight archive version " + std::to_string(a.header.version));
    const std::uint8_t variant = r.u8();
    if (variant > 1) throw FormatError("unknown variant code " + std::to_string(variant));
    a.header.variant = static_cast<Variant>(variant);
    r.u8();
    a.header.order = r.u16();
    a.header.channels = r.u16();
    const std::uint32_t count = r.u32();
    std::uint32_t crc = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t len = r.u16();
        const auto* name = r.take(len);
        const std::uint8_t dtype = r.u8();
        if (dtype != kDtypeF32) throw FormatError("unsupported dtype " + std::to_string(dtype));
        const std::uint8_t rank = r.u8();
        std::vector<std::uint32_t> shape(rank);
        std::size_t n = 1;
        for (auto& d : shape) {
            d = r.u32();
            n *= d;
        }
        const auto* payload = r.take(n * sizeof(float));
        crc = crc32({payload, n * sizeof(float)}, crc);
        std::vector<float> data(n);
        std::memcpy(data.data(), payload, n * sizeof(float));
        a.add(std::string(reinterpret_cast<const char*>(name), len), std::move(shape), std::move(data));
    }
    const std::uint32_t stored = r.u32();
    if (stored != crc) throw FormatError("weight archive CRC mismatch (payload corrupted)");
    if (r.pos != bytes.size()) throw FormatError("trailing bytes after weight archive");
    return a;
}

void save(const WeightArchive& archive, const std::filesystem::path& path) {
    const auto bytes = serialize(archive);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError("failed writing " + path.string());
}

WeightArchive load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open weight archive " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

std::string ValidationReport::summary() const {
    if (ok()) return "ok";
    std::ostringstream os;
    for (const auto& h : header_issues) os << "header: " << h << "\n";
    for (const auto& m : missing) os << "missing: " << m << "\n";
    for (const auto& e : extra) os << "extra: " << e << "\n";
    for (const auto& m : mismatched)
        os << "shape mismatch: " << m.name << " expected " << shape_str(m.expected) << " got " << shape_str(m.actual)
           << "\n";
    return os.str();
}

ValidationReport validate(const WeightArchive& archive, const model::ModelGraph& graph) {
    ValidationReport report;
    if (archive.header.variant != graph.variant)
        report.header_issues.push_back("variant " + std::string(to_string(archive.header.variant)) + " != graph " +
                                       std::string(to_string(graph.variant)));
    if (archive.header.order != graph.order)
        report.header_issues.push_back("order " + std::to_string(archive.header.order) + " != graph " +
                                       std::to_string(graph.order));
    if (archive.header.channels != graph.channels)
        report.header_issues.push_back("channels " + std::to_string(archive.header.channels) + " != graph " +
                                       std::to_string(graph.channels));
    std::unordered_set<std::string> declared;
    for (const auto& decl : graph.weight_decls()) {
        declared.insert(decl.role);
        std::vector<std::uint32_t> expected(decl.shape.begin(), decl.shape.end());
        const Tensor* t = archive.find(decl.role);
        if (t == nullptr) report.missing.push_back(decl.role);
        else if (t->shape != expected) report.mismatched.push_back({decl.role, expected, t->shape});
    }
    for (const auto& t : archive.tensors())
        if (!declared.contains(t.name)) report.extra.push_back(t.name);
    return report;
}

}  // namespace taylorse::weights
