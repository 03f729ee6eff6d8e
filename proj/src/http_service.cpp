#include "softshadow/service.hpp"

#include "softshadow/base64.hpp"
#include "softshadow/errors.hpp"
#include "softshadow/image_io.hpp"

#include "httplib.h"

#include <charconv>

namespace softshadow {

namespace {

constexpr const char* kJson = "application/json";
constexpr const char* kPfm = "image/x-portable-floatmap";
constexpr const char* kPng = "image/png";
constexpr const char* kSessionPath = "/sessions/([0-9a-f]+)";

void send_error(httplib::Response& res, int status, const char* kind, const std::string& message)
{
    res.status = status;
    res.set_content(nlohmann::json{{"error", kind}, {"message", message}}.dump(), kJson);
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn)
{
    try {
        fn();
    } catch (const NotFoundError& e) {
        send_error(res, 404, "not_found", e.what());
    } catch (const NotReadyError& e) {
        res.set_header("Retry-After", "1");
        send_error(res, 503, "not_ready", e.what());
    } catch (const PreconditionError& e) {
        send_error(res, 409, "precondition", e.what());
    } catch (const FormatError& e) {
        send_error(res, 400, "format", e.what());
    } catch (const InvalidParameterError& e) {
        send_error(res, 400, "invalid_parameter", e.what());
    } catch (const DegenerateInputError& e) {
        send_error(res, 422, "degenerate_input", e.what());
    } catch (const GeometryError& e) {
        send_error(res, 422, "geometry", e.what());
    } catch (const DomainError& e) {
        send_error(res, 400, "domain", e.what());
    } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "format", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

/// Query parameter, then multipart field.
std::optional<std::string> field(const httplib::Request& req, const std::string& name)
{
    if (req.has_param(name)) {
        return req.get_param_value(name);
    }
    if (req.has_file(name)) {
        return req.get_file_value(name).content;
    }
    return std::nullopt;
}

template <typename T>
T number(const httplib::Request& req, const std::string& name, T fallback)
{
    const auto text = field(req, name);
    if (!text) {
        return fallback;
    }
    T value{};
    if constexpr (std::is_floating_point_v<T>) {
        try {
            std::size_t used = 0;
            value = static_cast<T>(std::stod(*text, &used));
            if (used != text->size()) {
                throw std::invalid_argument(name);
            }
        } catch (const std::exception&) {
            throw InvalidParameterError("parameter '" + name + "' is not a number: " + *text);
        }
    } else {
        const auto [end, ec] = std::from_chars(text->data(), text->data() + text->size(), value);
        if (ec != std::errc() || end != text->data() + text->size()) {
            throw InvalidParameterError("parameter '" + name + "' is not an integer: " + *text);
        }
    }
    return value;
}

std::string format_param(const httplib::Request& req, const char* fallback)
{
    return req.has_param("format") ? req.get_param_value("format") : fallback;
}

std::string create_session(SessionManager& sessions, const httplib::Request& req)
{
    std::optional<std::string> mesh_bytes;
    std::optional<std::string> bases_bytes;
    if (req.is_multipart_form_data()) {
        mesh_bytes = field(req, "mesh");
        bases_bytes = field(req, "bases");
    } else if (req.body.size() >= 4 && req.body.compare(0, 4, "SSBB") == 0) {
        bases_bytes = req.body;
    } else if (!req.body.empty()) {
        mesh_bytes = req.body;
    }
    if (bases_bytes) {
        BasesSessionRequest request;
        request.bases = std::make_shared<const ShadowBasisSet>(decode_ssbb(*bases_bytes));
        if (const auto mask = field(req, "mask")) {
            request.mask = decode_png_gray(*mask);
        }
        if (const auto ao = field(req, "ao")) {
            request.ao = decode_pfm(*ao);
        }
        return sessions.create(std::move(request));
    }
    if (!mesh_bytes) {
        throw FormatError("upload needs an OBJ mesh or an SSBB basis file");
    }
    MeshSessionRequest request;
    request.mesh = normalize(parse_obj(*mesh_bytes, "upload"));
    request.mesh_id = field(req, "mesh_id").value_or("upload");
    request.pose.yaw = number(req, "yaw", 0.0);
    request.pose.pitch = number(req, "pitch", 0.0);
    const int size = number(req, "size", 256);
    request.pose.width = number(req, "width", size);
    request.pose.height = number(req, "height", size);
    request.spp = number(req, "spp", request.spp);
    request.seed = number<std::uint64_t>(req, "seed", 0);
    return sessions.create(std::move(request));
}

std::vector<BrushStroke> parse_strokes(const std::string& body)
{
    const nlohmann::json doc = nlohmann::json::parse(body);
    const nlohmann::json& list = doc.is_array() ? doc : doc.at("strokes");
    if (!list.is_array()) {
        throw FormatError("'strokes' must be an array");
    }
    return list.get<std::vector<BrushStroke>>();
}

} // namespace

struct HttpService::Impl {
    explicit Impl(SessionManager& s) : sessions(s) { routes(); }

    void routes()
    {
        server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"ok":true})", kJson);
        });

        server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string id = create_session(sessions, req);
                res.status = 201;
                res.set_content(nlohmann::json(sessions.status(id)).dump(), kJson);
            });
        });

        const std::string base = kSessionPath;
        server.Get(base + "/status", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                res.set_content(nlohmann::json(sessions.status(req.matches[1])).dump(), kJson);
            });
        });

        server.Delete(base, [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                if (!sessions.remove(req.matches[1])) {
                    throw NotFoundError("no session '" + std::string(req.matches[1]) + "'");
                }
                res.status = 204;
            });
        });

        server.Put(base + "/elm", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const EnvLightMap elm = parse_elm(req.body);
                const ComposeResult result = sessions.set_elm(req.matches[1], elm);
                const std::string pfm = encode_pfm(result.shadow.pixels);
                if (format_param(req, "json") == "pfm") {
                    res.set_header("X-Compose-Ms", std::to_string(result.compose_ms));
                    res.set_content(pfm, kPfm);
                    return;
                }
                nlohmann::json doc{{"compose_ms", result.compose_ms},
                                   {"domain", "inverse"},
                                   {"width", result.shadow.pixels.width()},
                                   {"height", result.shadow.pixels.height()},
                                   {"shadow_pfm", base64_encode(pfm)}};
                if (result.preview) {
                    doc["preview_png"] = base64_encode(encode_png(*result.preview));
                }
                res.set_content(doc.dump(), kJson);
            });
        });

        server.Get(base + "/shadow", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string id = req.matches[1];
                const ShadowDomain domain = parse_domain(
                    req.has_param("domain") ? req.get_param_value("domain") : "inverse");
                const std::string format = format_param(req, "pfm");
                const ShadowMap shadow = sessions.shadow(id, domain);
                if (format == "pfm") {
                    res.set_content(encode_pfm(shadow.pixels), kPfm);
                } else if (format == "png") {
                    res.set_content(encode_png_preview(shadow.pixels, sessions.session_max(id, domain)),
                                    kPng);
                } else {
                    throw InvalidParameterError("format must be pfm or png, got '" + format + "'");
                }
                res.set_header("X-Shadow-Domain", to_string(domain));
            });
        });

        server.Put(base + "/ao/strokes", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto strokes = parse_strokes(req.body);
                const AOMap ao = sessions.edit_ao(req.matches[1], strokes);
                const std::string format = format_param(req, "json");
                if (format == "pfm") {
                    res.set_content(encode_pfm(ao.pixels), kPfm);
                } else if (format == "png") {
                    res.set_content(encode_png_preview(ao.pixels, 1.0f), kPng);
                } else {
                    res.set_content(nlohmann::json{{"strokes", strokes.size()},
                                                   {"ao_pfm", base64_encode(encode_pfm(ao.pixels))}}
                                        .dump(),
                                    kJson);
                }
            });
        });

        server.Put(base + "/background", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                sessions.set_background(req.matches[1], decode_image_payload(req.body));
                res.status = 204;
            });
        });

        server.Put(base + "/cutout", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                Placement place;
                place.x = number(req, "x", 0.0f);
                place.y = number(req, "y", 0.0f);
                place.scale = number(req, "scale", 1.0f);
                const auto first = req.body.find_first_not_of(" \t\r\n");
                if (first != std::string::npos && req.body[first] == '{') {
                    const auto doc = nlohmann::json::parse(req.body);
                    place.x = doc.value("x", place.x);
                    place.y = doc.value("y", place.y);
                    place.scale = doc.value("scale", place.scale);
                }
                sessions.set_cutout(req.matches[1], decode_image_payload(req.body), place);
                res.status = 204;
            });
        });

        server.Get(base + "/composite", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const ColorImage image = sessions.composite(req.matches[1]);
                if (format_param(req, "png") == "pfm") {
                    res.set_content(encode_pfm(image), kPfm);
                } else {
                    res.set_content(encode_png(image), kPng);
                }
            });
        });

        server.Get(base + "/export", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                res.set_content(sessions.export_bundle(req.matches[1]).document.dump(), kJson);
            });
        });
    }

    SessionManager& sessions;
    httplib::Server server;
};

HttpService::HttpService(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {}

HttpService::~HttpService()
{
    stop();
}

bool HttpService::listen(const std::string& host, int port)
{
    return impl_->server.listen(host, port);
}

int HttpService::bind_any(const std::string& host)
{
    return impl_->server.bind_to_any_port(host);
}

bool HttpService::listen_after_bind()
{
    return impl_->server.listen_after_bind();
}

void HttpService::wait_until_ready() const
{
    impl_->server.wait_until_ready();
}

void HttpService::stop()
{
    if (impl_) {
        impl_->server.stop();
    }
}

} // namespace softshadow
