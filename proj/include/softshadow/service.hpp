#pragma once

#include "softshadow/ao.hpp"
#include "softshadow/compositing.hpp"
#include "softshadow/elm.hpp"
#include "softshadow/mesh.hpp"
#include "softshadow/shadow_bases.hpp"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

namespace softshadow {

enum class BuildState { Building, Ready, Failed };

const char* to_string(BuildState state);

struct SessionStatus {
    std::string id;
    BuildState state = BuildState::Building;
    double progress = 0.0;
    std::string error;
    int width = 0;
    int height = 0;
    bool has_ao = false;
    bool has_mask = false;
};

void to_json(nlohmann::json& j, const SessionStatus& status);

struct ComposeResult {
    ShadowMap shadow;  // inverse domain
    double compose_ms = 0.0;
    std::optional<ColorImage> preview;  // composite, when both layers are set
};

struct MeshSessionRequest {
    Mesh mesh;  // normalized
    std::string mesh_id = "upload";
    CameraPose pose;
    int spp = 64;
    std::uint64_t seed = 0;
};

struct BasesSessionRequest {
    std::shared_ptr<const ShadowBasisSet> bases;
    std::optional<ImageBuffer> mask;
    std::optional<ImageBuffer> ao;
};

struct ExportBundle {
    nlohmann::json document;  // files are base64 under "files"
    std::optional<std::filesystem::path> directory;  // set when written to the data dir
};

struct ServiceConfig {
    std::optional<std::filesystem::path> data_dir;
    std::chrono::seconds idle_timeout{30 * 60};
    std::chrono::seconds reap_interval{60};
    bool reaper = true;
};

class Session;

/// Owns every live session. Calls on distinct sessions run concurrently; calls on
/// one session are serialized. Basis builds run on a per-session thread and
/// publish the finished basis set once; until then compose requests fail fast
/// with NotReadyError.
class SessionManager {
public:
    using Clock = std::chrono::steady_clock;

    explicit SessionManager(ServiceConfig config = {});
    ~SessionManager();
    SessionManager(const SessionManager&) = delete;
    SessionManager& operator=(const SessionManager&) = delete;

    std::string create(MeshSessionRequest request);
    std::string create(BasesSessionRequest request);

    SessionStatus status(const std::string& id);
    /// Blocks until the build finishes or `timeout` passes; returns the final status.
    SessionStatus wait_ready(const std::string& id, std::chrono::milliseconds timeout);

    ComposeResult set_elm(const std::string& id, const EnvLightMap& elm);
    ShadowMap shadow(const std::string& id, ShadowDomain domain);
    /// Running max of every shadow returned by this session, per domain.
    float session_max(const std::string& id, ShadowDomain domain);

    AOMap edit_ao(const std::string& id, const std::vector<BrushStroke>& strokes);
    AOMap ao(const std::string& id);
    void set_background(const std::string& id, ColorImage background);
    void set_cutout(const std::string& id, const ColorImage& image, Placement placement);
    ColorImage composite(const std::string& id);
    ExportBundle export_bundle(const std::string& id);

    bool remove(const std::string& id);
    std::size_t size() const;
    /// Drops sessions idle since before now - idle_timeout. Returns how many.
    std::size_t expire_idle(Clock::time_point now = Clock::now());

    const ServiceConfig& config() const { return config_; }

private:
    std::shared_ptr<Session> find(const std::string& id);
    std::string insert(std::shared_ptr<Session> session);

    ServiceConfig config_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::jthread reaper_;
};

/// HTTP front end over a SessionManager.
class HttpService {
public:
    explicit HttpService(SessionManager& sessions);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds and serves until stop(); returns false if the port cannot be bound.
    bool listen(const std::string& host, int port);
    /// Binds to a free port and returns it; serve with listen_after_bind().
    int bind_any(const std::string& host);
    bool listen_after_bind();
    void wait_until_ready() const;
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Port from SOFTSHADOW_PORT, else `fallback`.
int port_from_env(int fallback = 8080);

/// Decodes a PNG, PFM or base64-in-JSON ({"data": ...}) image payload.
ColorImage decode_image_payload(std::string_view bytes);

} // namespace softshadow
