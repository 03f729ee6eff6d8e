// softshadow command line: precompute, compose, AO, metrics, export, serve.

#include "softshadow/ao.hpp"
#include "softshadow/dataset.hpp"
#include "softshadow/elm.hpp"
#include "softshadow/errors.hpp"
#include "softshadow/image_io.hpp"
#include "softshadow/metrics.hpp"
#include "softshadow/oracle.hpp"
#include "softshadow/service.hpp"
#include "softshadow/shadow_bases.hpp"
#include "softshadow/transform.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <csignal>
#include <iostream>
#include <optional>

namespace ss = softshadow;

namespace {

struct ViewArgs {
    std::string mesh;
    double yaw = 0.0;
    double pitch = 0.0;
    int size = 256;

    void add(CLI::App* app)
    {
        app->add_option("--mesh", mesh, "OBJ file")->required()->check(CLI::ExistingFile);
        app->add_option("--yaw", yaw, "Mesh yaw in degrees");
        app->add_option("--pitch", pitch, "Camera pitch in degrees, [0, 90)");
        app->add_option("--size", size, "Image width and height")->check(CLI::PositiveNumber);
    }

    ss::CameraPose pose() const
    {
        ss::CameraPose p;
        p.yaw = yaw;
        p.pitch = pitch;
        p.width = size;
        p.height = size;
        return p;
    }

    ss::Scene scene() const
    {
        const ss::Mesh m = ss::load_mesh(mesh);
        return ss::Scene(m, pose(), ss::resting_ground(m));
    }
};

ss::ShadowMap read_shadow(const std::string& path, const std::string& domain)
{
    return ss::ShadowMap{ss::read_pfm(path), ss::parse_domain(domain)};
}

ss::HttpService* g_server = nullptr;

void stop_server(int)
{
    if (g_server) {
        g_server->stop();
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Soft shadow basis compiler and compositor"};
    app.require_subcommand(1);

    // mask
    ViewArgs mask_view;
    std::string mask_out;
    auto* mask = app.add_subcommand("mask", "Render the binary object mask as PNG");
    mask_view.add(mask);
    mask->add_option("--out", mask_out)->required();

    // sample-elm
    std::uint64_t elm_seed = 0;
    std::string elm_out;
    ss::ElmSampling ranges;
    auto* sample = app.add_subcommand("sample-elm", "Draw a random light map as JSON");
    sample->add_option("--seed", elm_seed);
    sample->add_option("--min-sigma2", ranges.min_sigma2, "Exclusive lower bound on sigma2");
    sample->add_option("--out", elm_out, "Output file (stdout when omitted)");

    // rasterize-elm
    std::string raster_elm, raster_out;
    auto* raster = app.add_subcommand("rasterize-elm", "Rasterize a light map to PFM");
    raster->add_option("--in,--elm", raster_elm)->required()->check(CLI::ExistingFile);
    raster->add_option("--out", raster_out)->required();

    // bases
    ViewArgs bases_view;
    std::string bases_out;
    auto* bases = app.add_subcommand("bases", "Precompute shadow bases (.ssbb)");
    bases_view.add(bases);
    bases->add_option("--out", bases_out)->required();

    // compose
    std::string compose_bases, compose_elm, compose_out, compose_domain = "inverse", compose_preview;
    auto* compose = app.add_subcommand("compose", "Compose a soft shadow from bases and a light map");
    compose->add_option("--bases", compose_bases)->required()->check(CLI::ExistingFile);
    compose->add_option("--elm", compose_elm)->required()->check(CLI::ExistingFile);
    compose->add_option("--out", compose_out)->required();
    compose->add_option("--domain", compose_domain)->check(CLI::IsMember({"inverse", "radiance"}));
    compose->add_flag_callback("--radiance", [&] { compose_domain = "radiance"; });
    compose->add_option("--preview", compose_preview, "Also write an 8-bit PNG preview");

    // ao
    ViewArgs ao_view;
    int ao_spp = ss::kDefaultSpp;
    std::uint64_t ao_seed = 0;
    std::string ao_out;
    auto* ao = app.add_subcommand("ao", "Compute the receiver-plane AO map");
    ao_view.add(ao);
    ao->add_option("--spp", ao_spp)->check(CLI::PositiveNumber);
    ao->add_option("--seed", ao_seed);
    ao->add_option("--out", ao_out)->required();

    // perturb-ao
    std::string perturb_in, perturb_out;
    std::uint64_t perturb_seed = 0;
    auto* perturb = app.add_subcommand("perturb-ao", "Erode or dilate an AO map by a seeded radius");
    perturb->add_option("--in,--ao", perturb_in)->required()->check(CLI::ExistingFile);
    perturb->add_option("--seed", perturb_seed);
    perturb->add_option("--out", perturb_out)->required();

    // invert
    std::string invert_in, invert_out;
    std::optional<float> invert_reference;
    auto* invert = app.add_subcommand("invert", "Inverse shadow transform: max(s) - s");
    invert->add_option("--in", invert_in)->required()->check(CLI::ExistingFile);
    invert->add_option("--out", invert_out)->required();
    invert->add_option("--reference", invert_reference, "Use this value instead of max(s)");

    // metrics
    std::string m_pred, m_gt, m_pred_domain = "inverse", m_gt_domain = "inverse", m_pred_ao, m_gt_ao;
    bool m_json = false;
    auto* metrics = app.add_subcommand("metrics", "RMSE, RMSE-s, ZNCC, DSSIM between two shadows");
    metrics->add_option("--pred", m_pred)->required()->check(CLI::ExistingFile);
    metrics->add_option("--gt", m_gt)->required()->check(CLI::ExistingFile);
    const auto domains = CLI::IsMember({"inverse", "radiance"});
    metrics->add_option("--pred-domain", m_pred_domain)->check(domains);
    metrics->add_option("--gt-domain", m_gt_domain)->check(domains);
    metrics->add_option_function<std::string>(
                "--domain", [&](const std::string& d) { m_pred_domain = m_gt_domain = d; },
                "Domain of both inputs")
        ->check(domains);
    metrics->add_option("--pred-ao", m_pred_ao)->check(CLI::ExistingFile);
    metrics->add_option("--gt-ao", m_gt_ao)->check(CLI::ExistingFile);
    metrics->add_flag("--json", m_json);

    // oracle
    ViewArgs oracle_view;
    std::string oracle_elm, oracle_out;
    auto* oracle = app.add_subcommand("oracle", "Per-direction reference render of a light map");
    oracle_view.add(oracle);
    oracle->add_option("--elm", oracle_elm)->required()->check(CLI::ExistingFile);
    oracle->add_option("--out", oracle_out)->required();

    // export
    std::string export_dir, export_out;
    ss::ExportOptions export_options;
    int export_size = 256;
    auto* exporter = app.add_subcommand("export", "Export training triplets for every mesh x pose");
    exporter->add_option("--mesh-dir", export_dir)->required()->check(CLI::ExistingDirectory);
    exporter->add_option("--out", export_out)->required();
    exporter->add_option("--spp", export_options.spp)->check(CLI::PositiveNumber);
    exporter->add_option("--materialize", export_options.materialize,
                         "Soft shadows to pre-render per triplet")
        ->check(CLI::NonNegativeNumber);
    exporter->add_option("--seed", export_options.seed);
    exporter->add_option("--size", export_size)->check(CLI::PositiveNumber);

    // serve
    int port = -1;
    std::string host = "127.0.0.1", data_dir;
    int idle_minutes = 30;
    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    serve->add_option("--port", port, "Defaults to $SOFTSHADOW_PORT, then 8080");
    serve->add_option("--host", host);
    serve->add_option("--data-dir", data_dir);
    serve->add_option("--idle-minutes", idle_minutes)->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*mask) {
            ss::write_png_gray(mask_out, ss::render_mask(mask_view.scene()));
        } else if (*sample) {
            const std::string text = ss::dump_elm(ss::sample_elm(elm_seed, ranges));
            if (elm_out.empty()) {
                std::cout << text << '\n';
            } else {
                ss::write_file(elm_out, text);
            }
        } else if (*raster) {
            ss::write_pfm(raster_out, ss::rasterize_elm(ss::load_elm(raster_elm)));
        } else if (*bases) {
            ss::BuildOptions options;
            options.mesh_id = std::filesystem::path(bases_view.mesh).stem().string();
            ss::write_ssbb(bases_out, ss::build_bases(bases_view.scene(), options));
        } else if (*compose) {
            const ss::ShadowBasisSet set = ss::read_ssbb(compose_bases);
            // A light map is either ELM JSON or an already rasterized PFM panorama.
            const bool is_pfm = std::filesystem::path(compose_elm).extension() == ".pfm";
            const ss::ImageBuffer raster_in = is_pfm ? ss::read_pfm(compose_elm) : ss::ImageBuffer();
            const ss::EnvLightMap elm = is_pfm ? ss::EnvLightMap{} : ss::load_elm(compose_elm);
            const auto start = std::chrono::steady_clock::now();
            ss::ShadowMap shadow = is_pfm ? ss::compose(set, raster_in) : ss::compose(set, elm);
            const auto stop = std::chrono::steady_clock::now();
            if (compose_domain == "radiance") {
                shadow = ss::to_radiance(shadow, is_pfm ? raster_in : ss::rasterize_elm(elm), set.geometry());
            }
            ss::write_pfm(compose_out, shadow.pixels);
            if (!compose_preview.empty()) {
                ss::write_file(compose_preview, ss::encode_png_preview(shadow.pixels));
            }
            std::cerr << "compose: "
                      << std::chrono::duration<double, std::milli>(stop - start).count() << " ms\n";
        } else if (*ao) {
            ss::write_pfm(ao_out, ss::compute_ao(ao_view.scene(), ao_spp, ao_seed).pixels);
        } else if (*perturb) {
            const ss::AOMap in{ss::read_pfm(perturb_in), 0};
            ss::write_pfm(perturb_out, ss::perturb_ao(in, perturb_seed).pixels);
        } else if (*invert) {
            const ss::ImageBuffer s = ss::read_pfm(invert_in);
            ss::write_pfm(invert_out, invert_reference ? ss::invert_shadow(s, *invert_reference)
                                                       : ss::invert_shadow(s));
        } else if (*metrics) {
            const ss::ShadowMap pred = read_shadow(m_pred, m_pred_domain);
            const ss::ShadowMap gt = read_shadow(m_gt, m_gt_domain);
            std::optional<ss::ImageBuffer> pred_ao, gt_ao;
            if (!m_pred_ao.empty() && !m_gt_ao.empty()) {
                pred_ao = ss::read_pfm(m_pred_ao);
                gt_ao = ss::read_pfm(m_gt_ao);
            }
            const ss::MetricReport report = ss::measure(pred, gt, pred_ao ? &*pred_ao : nullptr,
                                                        gt_ao ? &*gt_ao : nullptr);
            if (m_json) {
                std::cout << nlohmann::json(report).dump(2) << '\n';
            } else {
                std::cout << "rmse    " << report.rmse << '\n'
                          << "rmse_s  " << report.rmse_s << '\n'
                          << "zncc    " << (report.zncc ? std::to_string(*report.zncc) : "undefined")
                          << '\n'
                          << "dssim   " << report.dssim << '\n';
            }
        } else if (*oracle) {
            ss::write_pfm(oracle_out,
                          ss::render_oracle(oracle_view.scene(), ss::load_elm(oracle_elm)).pixels);
        } else if (*exporter) {
            const auto entries = ss::export_directory(export_dir, export_out, export_options, export_size);
            std::cerr << "export: " << entries.size() << " triplets\n";
        } else if (*serve) {
            ss::ServiceConfig config;
            if (!data_dir.empty()) {
                config.data_dir = data_dir;
            }
            config.idle_timeout = std::chrono::minutes(idle_minutes);
            ss::SessionManager sessions(config);
            ss::HttpService server(sessions);
            g_server = &server;
            std::signal(SIGINT, stop_server);
            std::signal(SIGTERM, stop_server);
            const int p = port >= 0 ? port : ss::port_from_env();
            std::cerr << "serving on http://" << host << ':' << p << '\n';
            if (!server.listen(host, p)) {
                std::cerr << "softshadow: error: cannot listen on " << host << ':' << p << '\n';
                return 1;
            }
        }
    } catch (const ss::DomainError& e) {
        std::cerr << "softshadow: domain error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "softshadow: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
