#include "softshadow/service.hpp"

#include "softshadow/base64.hpp"
#include "softshadow/dataset.hpp"
#include "softshadow/errors.hpp"
#include "softshadow/image_io.hpp"
#include "softshadow/scene.hpp"

#include <condition_variable>
#include <cstdlib>
#include <iomanip>
#include <random>
#include <sstream>

namespace softshadow {

namespace {

std::string new_session_id()
{
    static std::mutex mutex;
    static std::random_device device;
    std::lock_guard lock(mutex);
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (int i = 0; i < 4; ++i) {
        os << std::setw(8) << device();
    }
    return os.str();
}

} // namespace

const char* to_string(BuildState state)
{
    switch (state) {
    case BuildState::Building: return "building";
    case BuildState::Ready: return "ready";
    case BuildState::Failed: return "failed";
    }
    return "unknown";
}

void to_json(nlohmann::json& j, const SessionStatus& s)
{
    j = nlohmann::json{{"id", s.id},         {"state", to_string(s.state)},
                       {"progress", s.progress}, {"width", s.width},
                       {"height", s.height}, {"has_ao", s.has_ao},
                       {"has_mask", s.has_mask}};
    if (!s.error.empty()) {
        j["error"] = s.error;
    }
}

class Session {
public:
    explicit Session(std::string session_id) : id(std::move(session_id)) { touch(); }

    void touch()
    {
        last_used.store(SessionManager::Clock::now().time_since_epoch().count());
    }
    SessionManager::Clock::time_point last_use() const
    {
        return SessionManager::Clock::time_point(SessionManager::Clock::duration(last_used.load()));
    }

    SessionStatus status() const
    {
        std::lock_guard lock(state_mu);
        SessionStatus s;
        s.id = id;
        s.state = state;
        s.progress = progress;
        s.error = error;
        s.width = width;
        s.height = height;
        s.has_ao = ao_geometric.has_value();
        s.has_mask = mask.has_value();
        return s;
    }

    std::shared_ptr<const ShadowBasisSet> ready_bases() const
    {
        std::lock_guard lock(state_mu);
        if (state == BuildState::Failed) {
            throw PreconditionError("session " + id + " failed to build: " + error);
        }
        if (!bases) {
            std::ostringstream os;
            os << "session " << id << " is still building (" << std::fixed << std::setprecision(0)
               << progress * 100.0 << "% done); retry later";
            throw NotReadyError(os.str());
        }
        return bases;
    }

    void publish(std::shared_ptr<const ShadowBasisSet> built, std::optional<ImageBuffer> built_mask,
                 std::optional<AOMap> built_ao)
    {
        {
            std::lock_guard lock(state_mu);
            width = built->width();
            height = built->height();
            ground_mask = built->ground_mask();
            mask = std::move(built_mask);
            ao_geometric = std::move(built_ao);
            bases = std::move(built);
            progress = 1.0;
            state = BuildState::Ready;
        }
        state_cv.notify_all();
    }

    void fail(const std::string& message)
    {
        {
            std::lock_guard lock(state_mu);
            error = message;
            state = BuildState::Failed;
        }
        state_cv.notify_all();
    }

    void set_progress(double value)
    {
        std::lock_guard lock(state_mu);
        progress = value;
    }

    /// Edited AO copy, seeded from the geometric map on first use. Needs op_mu.
    AOMap& editable_ao()
    {
        if (!ao) {
            std::lock_guard lock(state_mu);
            if (!ao_geometric) {
                throw PreconditionError("session " + id + " has no AO map");
            }
            ao = ao_geometric;
        }
        return *ao;
    }

    std::optional<ImageBuffer> ground() const
    {
        std::lock_guard lock(state_mu);
        return ground_mask;
    }

    std::optional<ImageBuffer> object_mask() const
    {
        std::lock_guard lock(state_mu);
        return mask;
    }

    const std::string id;
    std::string mesh_id = "upload";
    CameraPose pose;
    std::uint64_t seed = 0;
    std::atomic<SessionManager::Clock::rep> last_used{0};

    // Written by the builder, read by requests.
    mutable std::mutex state_mu;
    std::condition_variable state_cv;
    BuildState state = BuildState::Building;
    double progress = 0.0;
    std::string error;
    int width = 0;
    int height = 0;
    std::shared_ptr<const ShadowBasisSet> bases;
    std::optional<ImageBuffer> mask;
    std::optional<AOMap> ao_geometric;
    std::optional<ImageBuffer> ground_mask;

    // Request state, serialized by op_mu.
    std::mutex op_mu;
    std::optional<AOMap> ao;
    std::optional<EnvLightMap> elm;
    ImageBuffer elm_raster;
    std::optional<ShadowMap> shadow;
    double total = 0.0;
    float max_inverse = 0.0f;
    float max_radiance = 0.0f;
    ColorImage background;
    std::optional<Cutout> cutout;

    // Declared last so it is joined before the state above goes away.
    std::jthread builder;
};

SessionManager::SessionManager(ServiceConfig config) : config_(std::move(config))
{
    if (config_.data_dir) {
        std::filesystem::create_directories(*config_.data_dir);
    }
    if (config_.reaper) {
        reaper_ = std::jthread([this](std::stop_token stop) {
            std::mutex m;
            std::condition_variable_any cv;
            std::unique_lock lock(m);
            while (!stop.stop_requested()) {
                cv.wait_for(lock, stop, config_.reap_interval, [] { return false; });
                if (!stop.stop_requested()) {
                    expire_idle();
                }
            }
        });
    }
}

SessionManager::~SessionManager()
{
    reaper_ = {};
    std::unique_lock lock(mutex_);
    for (auto& [id, session] : sessions_) {
        session->builder.request_stop();
    }
    sessions_.clear();
}

std::string SessionManager::insert(std::shared_ptr<Session> session)
{
    std::unique_lock lock(mutex_);
    const std::string id = session->id;
    sessions_.emplace(id, std::move(session));
    return id;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id)
{
    std::shared_lock lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) {
        throw NotFoundError("no session '" + id + "'");
    }
    it->second->touch();
    return it->second;
}

std::string SessionManager::create(MeshSessionRequest request)
{
    // Constructing the camera validates the pose before any work is queued.
    const Scene probe(request.mesh, request.pose, resting_ground(request.mesh));
    if (request.spp <= 0) {
        throw InvalidParameterError("spp must be positive");
    }
    auto session = std::make_shared<Session>(new_session_id());
    session->mesh_id = request.mesh_id;
    session->pose = request.pose;
    session->seed = request.seed;
    session->width = request.pose.width;
    session->height = request.pose.height;
    Session* raw = session.get();
    session->builder = std::jthread([raw, request = std::move(request)](std::stop_token stop) {
        try {
            const Scene scene(request.mesh, request.pose, resting_ground(request.mesh));
            BuildOptions options;
            options.mesh_id = request.mesh_id;
            options.progress = [&](double fraction) { raw->set_progress(0.9 * fraction); };
            options.cancelled = [&] { return stop.stop_requested(); };
            auto bases = std::make_shared<const ShadowBasisSet>(build_bases(scene, options));
            if (stop.stop_requested()) {
                return;
            }
            ImageBuffer mask = render_mask(scene);
            AOMap ao = compute_ao(scene, request.spp, request.seed);
            raw->publish(std::move(bases), std::move(mask), std::move(ao));
        } catch (const CancelledError&) {
            raw->fail("cancelled");
        } catch (const std::exception& e) {
            raw->fail(e.what());
        }
    });
    return insert(std::move(session));
}

std::string SessionManager::create(BasesSessionRequest request)
{
    if (!request.bases) {
        throw PreconditionError("bases upload is missing the basis set");
    }
    const auto check = [&](const std::optional<ImageBuffer>& image, const char* name) {
        if (image && (image->width() != request.bases->width()
                      || image->height() != request.bases->height())) {
            throw GeometryError(std::string(name) + " is " + std::to_string(image->width()) + "x"
                                + std::to_string(image->height()) + " but the bases are "
                                + std::to_string(request.bases->width()) + "x"
                                + std::to_string(request.bases->height()));
        }
    };
    check(request.mask, "mask");
    check(request.ao, "ao");
    auto session = std::make_shared<Session>(new_session_id());
    session->mesh_id = request.bases->provenance().mesh_id.empty()
                           ? "upload"
                           : request.bases->provenance().mesh_id;
    session->pose = request.bases->provenance().pose;
    std::optional<AOMap> ao;
    if (request.ao) {
        ao = AOMap{std::move(*request.ao), 0};
    }
    session->publish(std::move(request.bases), std::move(request.mask), std::move(ao));
    return insert(std::move(session));
}

SessionStatus SessionManager::status(const std::string& id)
{
    return find(id)->status();
}

SessionStatus SessionManager::wait_ready(const std::string& id, std::chrono::milliseconds timeout)
{
    auto session = find(id);
    {
        std::unique_lock lock(session->state_mu);
        session->state_cv.wait_for(lock, timeout,
                                   [&] { return session->state != BuildState::Building; });
    }
    return session->status();
}

ComposeResult SessionManager::set_elm(const std::string& id, const EnvLightMap& elm)
{
    validate(elm);
    auto session = find(id);
    std::lock_guard op(session->op_mu);
    const auto bases = session->ready_bases();

    const auto start = Clock::now();
    // Only the upper hemisphere feeds the patch weights.
    ImageBuffer raster = rasterize_elm(elm, bases->geometry().top_rows());
    const std::vector<float> weights = patch_weights(raster, bases->geometry());
    ShadowMap shadow = compose_weights(*bases, weights);
    const auto stop = Clock::now();

    session->elm = elm;
    session->elm_raster = std::move(raster);
    session->total = unoccluded_total(weights, bases->geometry());
    session->shadow = shadow;
    session->max_inverse = std::max(session->max_inverse, shadow.pixels.max_value());

    ComposeResult result;
    result.shadow = std::move(shadow);
    result.compose_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    if (!session->background.empty() && session->cutout) {
        const auto ground = session->ground();
        const ImageBuffer lit = lit_fraction(result.shadow, session->total,
                                             ground ? &*ground : nullptr);
        result.preview = softshadow::composite(session->background, lit, *session->cutout);
    }
    return result;
}

ShadowMap SessionManager::shadow(const std::string& id, ShadowDomain domain)
{
    auto session = find(id);
    std::lock_guard op(session->op_mu);
    if (!session->shadow) {
        throw PreconditionError("session " + id + " has no composed shadow; PUT an ELM first");
    }
    if (domain == ShadowDomain::Inverse) {
        return *session->shadow;
    }
    const auto bases = session->ready_bases();
    const auto ground = session->ground();
    ShadowMap radiance = to_radiance(*session->shadow, session->elm_raster, bases->geometry(),
                                     ground ? &*ground : nullptr);
    session->max_radiance = std::max(session->max_radiance, radiance.pixels.max_value());
    return radiance;
}

float SessionManager::session_max(const std::string& id, ShadowDomain domain)
{
    auto session = find(id);
    std::lock_guard op(session->op_mu);
    return domain == ShadowDomain::Inverse ? session->max_inverse : session->max_radiance;
}

AOMap SessionManager::edit_ao(const std::string& id, const std::vector<BrushStroke>& strokes)
{
    auto session = find(id);
    std::lock_guard op(session->op_mu);
    AOMap& ao = session->editable_ao();
    ao.pixels = apply_strokes(ao.pixels, strokes);
    return ao;
}

AOMap SessionManager::ao(const std::string& id)
{
    auto session = find(id);
    std::lock_guard op(session->op_mu);
    return session->editable_ao();
}

void SessionManager::set_background(const std::string& id, ColorImage background)
{
    if (background.empty()) {
        throw FormatError("background image is empty");
    }
    auto session = find(id);
    std::lock_guard op(session->op_mu);
    session->background = std::move(background);
}

void SessionManager::set_cutout(const std::string& id, const ColorImage& image, Placement placement)
{
    if (image.empty()) {
        throw FormatError("cutout image is empty");
    }
    if (!(placement.scale > 0.0f) || !std::isfinite(placement.x) || !std::isfinite(placement.y)) {
        throw InvalidParameterError("cutout placement needs finite x, y and scale > 0");
    }
    auto session = find(id);
    std::lock_guard op(session->op_mu);
    const auto mask = session->object_mask();
    session->cutout = Cutout{make_cutout_rgba(image, mask ? &*mask : nullptr), placement};
}

ColorImage SessionManager::composite(const std::string& id)
{
    auto session = find(id);
    std::lock_guard op(session->op_mu);
    if (session->background.empty()) {
        throw PreconditionError("missing layer: background");
    }
    if (!session->cutout) {
        throw PreconditionError("missing layer: cutout");
    }
    if (!session->shadow) {
        throw PreconditionError("missing layer: shadow");
    }
    const auto ground = session->ground();
    const ImageBuffer lit = lit_fraction(*session->shadow, session->total,
                                         ground ? &*ground : nullptr);
    return softshadow::composite(session->background, lit, *session->cutout);
}

ExportBundle SessionManager::export_bundle(const std::string& id)
{
    auto session = find(id);
    std::lock_guard op(session->op_mu);
    const SessionStatus status = session->status();
    const auto mask = session->object_mask();

    ExportBundle bundle;
    nlohmann::json files = nlohmann::json::object();
    if (mask) {
        files["mask.png"] = base64_encode(encode_png_gray(*mask));
    }
    std::optional<AOMap> edited;
    if (status.has_ao) {
        edited = session->editable_ao();
        files["ao.pfm"] = base64_encode(encode_pfm(edited->pixels));
        std::lock_guard lock(session->state_mu);
        files["ao_geometric.pfm"] = base64_encode(encode_pfm(session->ao_geometric->pixels));
    }
    if (session->elm) {
        files["elm.json"] = base64_encode(dump_elm(*session->elm));
    }
    if (session->shadow) {
        files["shadow.pfm"] = base64_encode(encode_pfm(session->shadow->pixels));
        if (!session->background.empty() && session->cutout) {
            const auto ground = session->ground();
            const ImageBuffer lit = lit_fraction(*session->shadow, session->total,
                                                 ground ? &*ground : nullptr);
            files["composite.png"] = base64_encode(
                encode_png(softshadow::composite(session->background, lit, *session->cutout)));
        }
    }
    bundle.document = {{"id", session->id},
                       {"mesh", session->mesh_id},
                       {"pose", session->pose},
                       {"status", status},
                       {"files", files}};

    if (config_.data_dir && mask && edited && status.state == BuildState::Ready) {
        DatasetTriplet triplet;
        triplet.mask = *mask;
        triplet.ao = *edited;
        triplet.meta.perturbation = perturbation_for_seed(session->seed);
        triplet.ao_perturbed = apply_perturbation(*edited, triplet.meta.perturbation);
        triplet.bases = session->ready_bases();
        triplet.meta.id = "sessions/" + session->id;
        triplet.meta.mesh_id = session->mesh_id;
        triplet.meta.pose = session->pose;
        triplet.meta.seed = session->seed;
        triplet.meta.spp = edited->samples_per_pixel;
        ManifestWriter manifest(*config_.data_dir / kManifestName);
        const ManifestEntry entry = write_triplet(triplet, *config_.data_dir, manifest);
        const std::filesystem::path dir = *config_.data_dir / entry.id;
        if (session->elm) {
            save_elm(dir / "elm.json", *session->elm);
        }
        if (session->shadow) {
            write_pfm(dir / "shadow.pfm", session->shadow->pixels);
        }
        if (files.contains("composite.png")) {
            write_file(dir / "composite.png", base64_decode(files["composite.png"].get<std::string>()));
        }
        bundle.document["manifest"] = entry;
        bundle.directory = dir;
    }
    return bundle;
}

bool SessionManager::remove(const std::string& id)
{
    std::shared_ptr<Session> doomed;
    {
        std::unique_lock lock(mutex_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) {
            return false;
        }
        doomed = std::move(it->second);
        sessions_.erase(it);
    }
    doomed->builder.request_stop();
    return true;
}

std::size_t SessionManager::size() const
{
    std::shared_lock lock(mutex_);
    return sessions_.size();
}

std::size_t SessionManager::expire_idle(Clock::time_point now)
{
    std::vector<std::shared_ptr<Session>> doomed;
    {
        std::unique_lock lock(mutex_);
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            if (now - it->second->last_use() > config_.idle_timeout) {
                doomed.push_back(std::move(it->second));
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (auto& session : doomed) {
        session->builder.request_stop();
    }
    // Builders join as the last references drop, outside the map lock.
    return doomed.size();
}

int port_from_env(int fallback)
{
    const char* text = std::getenv("SOFTSHADOW_PORT");
    if (!text || !*text) {
        return fallback;
    }
    char* end = nullptr;
    const long port = std::strtol(text, &end, 10);
    if (*end != '\0' || port < 0 || port > 65535) {
        throw InvalidParameterError(std::string("SOFTSHADOW_PORT is not a port number: ") + text);
    }
    return static_cast<int>(port);
}

ColorImage decode_image_payload(std::string_view bytes)
{
    if (bytes.size() >= 8 && bytes.substr(1, 3) == "PNG") {
        return decode_png(bytes);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == 'f' || bytes[1] == 'F')) {
        if (bytes[1] == 'F') {
            return decode_pfm_color(bytes);
        }
        const ImageBuffer gray = decode_pfm(bytes);
        ColorImage out(gray.width(), gray.height(), 1);
        std::copy(gray.pixels().begin(), gray.pixels().end(), out.data().begin());
        return out;
    }
    const auto first = bytes.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && bytes[first] == '{') {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(bytes);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("image payload: ") + e.what());
        }
        if (!doc.contains("data") || !doc["data"].is_string()) {
            throw FormatError("image payload: JSON needs a base64 'data' field");
        }
        return decode_image_payload(base64_decode(doc["data"].get<std::string>()));
    }
    throw FormatError("image payload: expected PNG, PFM or JSON with base64 'data'");
}

} // namespace softshadow
