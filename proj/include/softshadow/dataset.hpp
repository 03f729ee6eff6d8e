#pragma once

#include "softshadow/ao.hpp"
#include "softshadow/elm.hpp"
#include "softshadow/scene.hpp"
#include "softshadow/shadow_bases.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace softshadow {

void to_json(nlohmann::json& j, const CameraPose& pose);
void from_json(const nlohmann::json& j, CameraPose& pose);

struct MaterializedShadow {
    std::uint64_t seed = 0;
    std::string elm;     // relative path of the ELM JSON
    std::string shadow;  // relative path of the inverse-domain PFM
};

/// One manifest line. Paths are relative to the export root.
struct ManifestEntry {
    std::string id;
    std::string mesh_id;
    CameraPose pose;
    float ground_height = 0.0f;
    std::uint64_t seed = 0;
    int spp = 0;
    Perturbation perturbation;
    std::string mask;
    std::string ao;
    std::string ao_perturbed;
    std::string bases;
    std::vector<MaterializedShadow> materialized;
};

void to_json(nlohmann::json& j, const ManifestEntry& entry);
void from_json(const nlohmann::json& j, ManifestEntry& entry);

/// In-memory training triplet: cutout mask, AO map (plus its perturbed
/// variant) and the shadow bases of one (mesh, view) pair.
struct DatasetTriplet {
    ImageBuffer mask;
    AOMap ao;
    AOMap ao_perturbed;
    std::shared_ptr<const ShadowBasisSet> bases;
    ManifestEntry meta;
};

/// Appends newline-delimited JSON entries; the only shared writer of an export run.
class ManifestWriter {
public:
    explicit ManifestWriter(const std::filesystem::path& path);
    void append(const ManifestEntry& entry);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::mutex mutex_;
};

inline constexpr const char* kManifestName = "manifest.jsonl";

struct ExportOptions {
    int spp = kDefaultSpp;
    int materialize = 0;
    std::uint64_t seed = 0;
};

/// Renders mask, AO and bases for one view, then writes them with write_triplet().
DatasetTriplet make_triplet(const Mesh& normalized_mesh, const std::string& mesh_id,
                            const CameraPose& pose, const GroundPlane& ground,
                            const ExportOptions& options);

/// Writes mask.png, ao.pfm, ao_perturbed.pfm, bases.ssbb (and any materialized
/// shadows) under `root`, appends the manifest line, and returns the entry.
ManifestEntry write_triplet(const DatasetTriplet& triplet, const std::filesystem::path& root,
                            ManifestWriter& manifest, int materialize = 0);

ManifestEntry export_triplet(const Mesh& normalized_mesh, const std::string& mesh_id,
                             const CameraPose& pose, const GroundPlane& ground,
                             const ExportOptions& options, const std::filesystem::path& root,
                             ManifestWriter& manifest);

/// Every *.obj under `mesh_dir` (sorted by name) x the 15 canonical poses.
/// Triplet seeds are options.seed + running index.
std::vector<ManifestEntry> export_directory(const std::filesystem::path& mesh_dir,
                                            const std::filesystem::path& root,
                                            const ExportOptions& options, int image_size = 256);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
DatasetTriplet read_triplet(const std::filesystem::path& root, const ManifestEntry& entry);

struct TrainingPair {
    ImageBuffer mask;
    AOMap perturbed_ao;
    EnvLightMap elm;
    ImageBuffer elm_raster;
    ShadowMap target;  // inverse domain
};

/// Draws a light map and an AO perturbation from `seed` and composes the target.
TrainingPair sample_training_pair(const DatasetTriplet& triplet, std::uint64_t seed);

/// Deterministic id-independent seed mixing used for derived streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace softshadow
