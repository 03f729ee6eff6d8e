#include "softshadow/dataset.hpp"

#include "softshadow/errors.hpp"
#include "softshadow/image_io.hpp"

#include <algorithm>
#include <sstream>

namespace softshadow {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const CameraPose& pose)
{
    j = nlohmann::json{{"yaw", pose.yaw},     {"pitch", pose.pitch}, {"fov_y", pose.fov_y},
                       {"width", pose.width}, {"height", pose.height}};
}

void from_json(const nlohmann::json& j, CameraPose& pose)
{
    pose.yaw = j.value("yaw", 0.0);
    pose.pitch = j.value("pitch", 0.0);
    pose.fov_y = j.value("fov_y", 45.0);
    pose.width = j.value("width", 256);
    pose.height = j.value("height", 256);
}

void to_json(nlohmann::json& j, const ManifestEntry& e)
{
    nlohmann::json materialized = nlohmann::json::array();
    for (const auto& m : e.materialized) {
        materialized.push_back({{"seed", m.seed}, {"elm", m.elm}, {"shadow", m.shadow}});
    }
    j = nlohmann::json{
        {"id", e.id},
        {"mesh", e.mesh_id},
        {"pose", e.pose},
        {"ground_height", e.ground_height},
        {"seed", e.seed},
        {"spp", e.spp},
        {"perturbation",
         {{"op", e.perturbation.dilation ? "dilate" : "erode"}, {"radius", e.perturbation.radius}}},
        {"files",
         {{"mask", e.mask}, {"ao", e.ao}, {"ao_perturbed", e.ao_perturbed}, {"bases", e.bases}}},
        {"materialized", materialized},
        {"l2_reduction", "mean"},
        // Trainers typically revisit each triplet many times per epoch with fresh lights.
        {"epoch_repeat_hint", 40},
    };
}

void from_json(const nlohmann::json& j, ManifestEntry& e)
{
    j.at("id").get_to(e.id);
    j.at("mesh").get_to(e.mesh_id);
    j.at("pose").get_to(e.pose);
    j.at("ground_height").get_to(e.ground_height);
    j.at("seed").get_to(e.seed);
    j.at("spp").get_to(e.spp);
    const auto& p = j.at("perturbation");
    e.perturbation.dilation = p.at("op").get<std::string>() == "dilate";
    p.at("radius").get_to(e.perturbation.radius);
    const auto& files = j.at("files");
    files.at("mask").get_to(e.mask);
    files.at("ao").get_to(e.ao);
    files.at("ao_perturbed").get_to(e.ao_perturbed);
    files.at("bases").get_to(e.bases);
    e.materialized.clear();
    for (const auto& m : j.value("materialized", nlohmann::json::array())) {
        e.materialized.push_back({m.at("seed").get<std::uint64_t>(), m.at("elm").get<std::string>(),
                                  m.at("shadow").get<std::string>()});
    }
}

ManifestWriter::ManifestWriter(const fs::path& path) : path_(path)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    out_.open(path, std::ios::app);
    if (!out_) {
        throw IoError("cannot open manifest " + path.string());
    }
}

void ManifestWriter::append(const ManifestEntry& entry)
{
    std::lock_guard lock(mutex_);
    out_ << nlohmann::json(entry).dump() << '\n';
    out_.flush();
    if (!out_) {
        throw IoError("write failed for manifest " + path_.string());
    }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    return pixel_seed(seed, stream);
}

namespace {

std::string view_id(const std::string& mesh_id, const CameraPose& pose)
{
    std::ostringstream os;
    os << mesh_id << "/y" << pose.yaw << "_p" << pose.pitch;
    return os.str();
}

template <typename Fn>
void with_path_context(const fs::path& path, Fn&& fn)
{
    try {
        fn();
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

} // namespace

DatasetTriplet make_triplet(const Mesh& normalized_mesh, const std::string& mesh_id,
                            const CameraPose& pose, const GroundPlane& ground,
                            const ExportOptions& options)
{
    const Scene scene(normalized_mesh, pose, ground);
    DatasetTriplet t;
    t.mask = render_mask(scene);
    t.ao = compute_ao(scene, options.spp, options.seed);
    t.meta.perturbation = perturbation_for_seed(options.seed);
    t.ao_perturbed = apply_perturbation(t.ao, t.meta.perturbation);
    BuildOptions build;
    build.mesh_id = mesh_id;
    t.bases = std::make_shared<const ShadowBasisSet>(build_bases(scene, build));
    t.meta.id = view_id(mesh_id, pose);
    t.meta.mesh_id = mesh_id;
    t.meta.pose = pose;
    t.meta.ground_height = ground.height;
    t.meta.seed = options.seed;
    t.meta.spp = options.spp;
    return t;
}

ManifestEntry write_triplet(const DatasetTriplet& triplet, const fs::path& root,
                            ManifestWriter& manifest, int materialize)
{
    if (!triplet.bases) {
        throw PreconditionError("triplet has no bases");
    }
    if (!triplet.mask.same_shape(triplet.ao.pixels)
        || triplet.mask.width() != triplet.bases->width()
        || triplet.mask.height() != triplet.bases->height()) {
        throw GeometryError("triplet artifacts differ in image size");
    }
    ManifestEntry entry = triplet.meta;
    const fs::path rel = entry.id;
    const fs::path dir = root / rel;
    with_path_context(dir, [&] { fs::create_directories(dir); });

    entry.mask = (rel / "mask.png").generic_string();
    entry.ao = (rel / "ao.pfm").generic_string();
    entry.ao_perturbed = (rel / "ao_perturbed.pfm").generic_string();
    entry.bases = (rel / "bases.ssbb").generic_string();
    write_png_gray(root / entry.mask, triplet.mask);
    write_pfm(root / entry.ao, triplet.ao.pixels);
    write_pfm(root / entry.ao_perturbed, triplet.ao_perturbed.pixels);
    write_ssbb(root / entry.bases, *triplet.bases);

    entry.materialized.clear();
    for (int k = 0; k < materialize; ++k) {
        MaterializedShadow m;
        m.seed = derive_seed(entry.seed, 1000 + static_cast<std::uint64_t>(k));
        const EnvLightMap elm = sample_elm(m.seed);
        m.elm = (rel / ("elm_" + std::to_string(k) + ".json")).generic_string();
        m.shadow = (rel / ("shadow_" + std::to_string(k) + ".pfm")).generic_string();
        save_elm(root / m.elm, elm);
        write_pfm(root / m.shadow, compose(*triplet.bases, elm).pixels);
        entry.materialized.push_back(m);
    }
    manifest.append(entry);
    return entry;
}

ManifestEntry export_triplet(const Mesh& normalized_mesh, const std::string& mesh_id,
                             const CameraPose& pose, const GroundPlane& ground,
                             const ExportOptions& options, const fs::path& root,
                             ManifestWriter& manifest)
{
    return write_triplet(make_triplet(normalized_mesh, mesh_id, pose, ground, options), root,
                         manifest, options.materialize);
}

std::vector<ManifestEntry> export_directory(const fs::path& mesh_dir, const fs::path& root,
                                            const ExportOptions& options, int image_size)
{
    std::vector<fs::path> meshes;
    for (const auto& item : fs::directory_iterator(mesh_dir)) {
        if (item.is_regular_file() && item.path().extension() == ".obj") {
            meshes.push_back(item.path());
        }
    }
    std::sort(meshes.begin(), meshes.end());
    if (meshes.empty()) {
        throw IoError(mesh_dir.string() + ": no .obj files found");
    }
    fs::create_directories(root);
    ManifestWriter manifest(root / kManifestName);
    std::vector<ManifestEntry> entries;
    std::uint64_t index = 0;
    for (const fs::path& path : meshes) {
        const Mesh mesh = load_mesh(path);
        const GroundPlane ground = resting_ground(mesh);
        for (const CameraPose& pose : canonical_poses(image_size, image_size)) {
            ExportOptions per_view = options;
            per_view.seed = options.seed + index++;
            entries.push_back(export_triplet(mesh, path.stem().string(), pose, ground, per_view,
                                             root, manifest));
        }
    }
    return entries;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest " + path.string());
    }
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            entries.push_back(nlohmann::json::parse(line).get<ManifestEntry>());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return entries;
}

DatasetTriplet read_triplet(const fs::path& root, const ManifestEntry& entry)
{
    DatasetTriplet t;
    t.meta = entry;
    t.mask = read_png_gray(root / entry.mask);
    t.ao = AOMap{read_pfm(root / entry.ao), entry.spp};
    t.ao_perturbed = AOMap{read_pfm(root / entry.ao_perturbed), entry.spp};
    ShadowBasisSet bases = read_ssbb(root / entry.bases);
    t.bases = std::make_shared<const ShadowBasisSet>(
        bases.width(), bases.height(), bases.geometry(),
        std::vector<float>(bases.data().begin(), bases.data().end()),
        BasisProvenance{entry.mesh_id, entry.pose});
    return t;
}

TrainingPair sample_training_pair(const DatasetTriplet& triplet, std::uint64_t seed)
{
    if (!triplet.bases) {
        throw PreconditionError("triplet has no bases");
    }
    TrainingPair pair;
    pair.mask = triplet.mask;
    pair.perturbed_ao = perturb_ao(triplet.ao, derive_seed(seed, 1));
    pair.elm = sample_elm(derive_seed(seed, 2));
    pair.elm_raster = rasterize_elm(pair.elm);
    pair.target = compose(*triplet.bases, pair.elm_raster);
    return pair;
}

} // namespace softshadow
