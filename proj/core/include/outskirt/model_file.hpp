#pragma once

// Binary model files.
//
//   "OSKMODEL" | u16 major, minor, patch, 0 | u32 section count
//   section table: 4-byte tag, u64 offset, u64 length (per section)
//   section payloads
//   u32 CRC-32 of every preceding byte
//
// All integers and float64 values are little-endian. Tags: SCAL (feature
// standardization, optional), AEWT (feature autoencoders), VAEW (fusion
// network), CATQ (latent catalog), CLSF (classifier), CONF (config JSON).
// See docs/model-format.md.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "outskirt/pipeline.hpp"

namespace outskirt {

struct FormatVersion {
    std::uint16_t major = 1;
    std::uint16_t minor = 0;
    std::uint16_t patch = 0;

    auto operator<=>(const FormatVersion&) const = default;
    std::string str() const;
};

inline constexpr FormatVersion kModelFormat{1, 0, 0};

std::vector<unsigned char> serialize_model(const pipeline::PipelineModel& model);

/// Throws DataError on a bad magic, checksum mismatch, a newer format
/// version or a malformed section.
pipeline::PipelineModel deserialize_model(const std::vector<unsigned char>& bytes);

void save_model(const std::filesystem::path& path, const pipeline::PipelineModel& model);
pipeline::PipelineModel load_model(const std::filesystem::path& path);

struct SectionInfo {
    std::string tag;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
};

struct ModelFileInfo {
    FormatVersion version;
    std::vector<SectionInfo> sections;
    std::uint32_t crc = 0;
    std::uint64_t size = 0;
};

/// Header and section table only (checksum verified).
ModelFileInfo inspect_model_file(const std::vector<unsigned char>& bytes);

}  // namespace outskirt
