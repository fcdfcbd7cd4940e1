#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "taylorse/variant.hpp"

namespace taylorse::model {
struct ModelGraph;
}

namespace taylorse::weights {

inline constexpr char kMagic[4] = {'T', 'A', 'Y', 'W'};
inline constexpr std::uint16_t kVersion = 1;

struct Tensor {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::vector<float> data;

    bool operator==(const Tensor&) const = default;
};

struct Header {
    std::uint16_t version = kVersion;
    Variant variant = Variant::taer;
    std::uint16_t order = 0;
    std::uint16_t channels = 1;

    bool operator==(const Header&) const = default;
};

/// Named f32 tensors in insertion order.
class WeightArchive {
public:
    Header header;

    /// Throws ConfigError on a duplicate name or a shape/data size mismatch.
    Tensor& add(std::string name, std::vector<std::uint32_t> shape, std::vector<float> data);

    const Tensor* find(const std::string& name) const;
    Tensor* find(const std::string& name);
    /// Throws ConfigError naming the tensor when it is absent.
    std::span<const float> lookup(const std::string& name) const;

    const std::vector<Tensor>& tensors() const { return tensors_; }
    std::size_t total_elements() const;

    bool operator==(const WeightArchive& o) const { return header == o.header && tensors_ == o.tensors_; }

private:
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t seed = 0);

std::vector<std::uint8_t> serialize(const WeightArchive& archive);
/// Throws FormatError on bad magic, version, truncation or CRC.
WeightArchive deserialize(std::span<const std::uint8_t> bytes);

void save(const WeightArchive& archive, const std::filesystem::path& path);
WeightArchive load(const std::filesystem::path& path);

struct Mismatch {
    std::string name;
    std::vector<std::uint32_t> expected;
    std::vector<std::uint32_t> actual;
};

/// Every discrepancy between an archive and a graph, collected rather than
/// thrown one at a time.
struct ValidationReport {
    std::vector<std::string> header_issues;
    std::vector<std::string> missing;
    std::vector<std::string> extra;
    std::vector<Mismatch> mismatched;

    bool ok() const { return header_issues.empty() && missing.empty() && extra.empty() && mismatched.empty(); }
    std::string summary() const;
};

ValidationReport validate(const WeightArchive& archive, const model::ModelGraph& graph);

}  // namespace taylorse::weights
