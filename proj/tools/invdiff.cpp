#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "invdiff/config.hpp"
#include "invdiff/detect.hpp"
#include "invdiff/emd.hpp"
#include "invdiff/kernels.hpp"
#include "invdiff/parallel.hpp"
#include "invdiff/prox_check.hpp"
#include "invdiff/solver.hpp"
#include "invdiff/synth.hpp"
#include "invdiff/tensor_io.hpp"

namespace {

using namespace invdiff;

struct ConfigSource {
    std::string preset = "desk";
    std::string config_path;
    std::optional<std::uint64_t> seed_override;

    RunConfig load() const {
        std::string text;
        if (config_path.empty()) {
            text = preset_json(preset);
        } else {
            try {
                text = read_text_file(config_path);
            } catch (const std::exception& e) {
                throw std::invalid_argument(e.what());
            }
        }
        RunConfig c = config_from_json(text);
        if (seed_override) c.seed = *seed_override;
        return c;
    }
};

void add_config_options(CLI::App* cmd, ConfigSource& src) {
    cmd->add_option("--preset", src.preset, "Built-in preset name (desk, paper-full)");
    cmd->add_option("--config", src.config_path, "Path to a run-config JSON file");
    cmd->add_option("--seed", src.seed_override, "Override the synthesis seed");
}

std::string sidecar_path(const std::string& image_path) { return image_path + ".json"; }

/// Wraps input loading so malformed files surface as usage errors (exit 2).
template <typename Fn>
auto load_input(Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw std::invalid_argument(e.what());
    }
}

int cmd_simulate(const ConfigSource& src, int bits_override, const std::string& out_image,
                 const std::string& out_truth, const std::string& out_psdr) {
    RunConfig cfg = src.load();
    if (bits_override > 0) cfg.bits = bits_override;
    const Scene scene = make_scene(cfg.scene_params());
    const SigmaGrid gen = cfg.generation_sigma();
    const PsdrStack psdr = scene_to_psdr(scene, gen);
    const KernelBank gen_bank = build_kernel_bank(gen, 1);
    const Rendered r = render(psdr, gen_bank, cfg.sigma_b, NoiseModel{cfg.bits, cfg.seed});

    ImageGrid img = r.image;
    img.pixel_pitch = cfg.pixel_pitch;
    write_image(out_image, img);
    nlohmann::json side;
    side["gain"] = r.gain;
    side["bits"] = cfg.bits;
    write_text_file(sidecar_path(out_image), side.dump(2) + "\n");
    if (!out_truth.empty()) write_text_file(out_truth, scene_to_json(scene));
    if (!out_psdr.empty()) write_stack(out_psdr, psdr);
    std::printf("simulated %dx%d image, %d cells, bits=%d, gain=%.17g\n", cfg.rows, cfg.cols,
                cfg.n_cells, cfg.bits, r.gain);
    return 0;
}

int cmd_solve(const ConfigSource& src, const std::string& image_path,
              const std::string& out_psdr, const std::string& out_log) {
    const RunConfig cfg = src.load();
    ImageGrid obs = load_input([&] { return read_image(image_path); });
    validate(obs);
    // 8-bit scale observations are solved on [0, 1].
    for (double& v : obs.data.vec()) v /= 255.0;

    const KernelBank bank = build_kernel_bank(cfg.analysis_sigma(), cfg.bank_rank());
    const WeightMaps weights = uniform_weights(obs.rows(), obs.cols());
    const SolveResult res = solve(obs, bank, weights, cfg.solve_config());

    write_stack(out_psdr, res.a_opt);
    if (!out_log.empty()) write_text_file(out_log, solve_log_csv(res.log));
    const SolveLogRow& last = res.log.rows.back();
    std::printf("solved: iters=%d eta=%.6g cost=%.12g nse=%.12g gs=%.12g\n", last.iter,
                res.log.eta, last.cost, last.nse, last.gs);
    return 0;
}

int cmd_detect(const ConfigSource& src, const std::string& psdr_path,
               const std::string& out_csv, double min_value) {
    const RunConfig cfg = src.load();
    PsdrStack a = load_input([&] { return read_stack(psdr_path); });
    if (a.bins() == static_cast<int>(cfg.sigma_edges.size()) - 1) {
        a.sigma.aleph = cfg.aleph;
    } else {
        // Stacks on other grids (e.g., the generation grid) use every bin.
        a.sigma.aleph.resize(static_cast<std::size_t>(a.bins()));
        for (int k = 0; k < a.bins(); ++k) a.sigma.aleph[static_cast<std::size_t>(k)] = k;
    }
    const DetectionList dets = local_maxima(pseudo_likelihood(a), min_value);
    write_text_file(out_csv, detections_to_csv(dets));
    std::printf("detected %zu candidate maxima\n", dets.size());
    return 0;
}

int cmd_evaluate(const ConfigSource& src, const std::string& dets_path,
                 const std::string& truth_path, std::optional<double> tolerance,
                 bool strict_diameter, const std::string& out_json,
                 const std::string& out_curve) {
    RunConfig cfg = src.load();
    if (tolerance) cfg.tolerance = *tolerance;
    if (strict_diameter) cfg.strict_diameter = true;
    const DetectionList dets =
        load_input([&] { return detections_from_csv(read_text_file(dets_path)); });
    const Scene truth = load_input([&] { return scene_from_json(read_text_file(truth_path)); });
    std::vector<PixelPos> positions;
    for (const Cell& c : truth.cells) positions.push_back({c.row, c.col});

    const SweepResult sweep = sweep_threshold(dets, positions, cfg.match_radius());
    write_text_file(out_json, report_to_json(sweep.report));
    if (!out_curve.empty()) {
        std::string csv = "delta,f1\n";
        char buf[96];
        for (const SweepPoint& p : sweep.curve) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.12g\n", p.delta, p.f1);
            csv += buf;
        }
        write_text_file(out_curve, csv);
    }
    std::printf("best delta=%.17g f1=%.6f (tp=%d fp=%d fn=%d)\n", sweep.best_delta,
                sweep.report.f1, sweep.report.tp, sweep.report.fp, sweep.report.fn);
    return 0;
}

int cmd_emd(const ConfigSource& src, const std::string& psdr_path,
            const std::string& truth_psdr_path, const std::string& truth_path,
            const std::string& out_json, const std::string& out_plan) {
    const RunConfig cfg = src.load();
    const PsdrStack recovered = load_input([&] { return read_stack(psdr_path); });
    const PsdrStack truth = load_input([&] { return read_stack(truth_psdr_path); });
    const Scene scene = load_input([&] { return scene_from_json(read_text_file(truth_path)); });
    const double n_cells = static_cast<double>(scene.cells.size());

    const SpatialDistribution p_hat =
        psdr_to_distribution(recovered, n_cells, cfg.prune_eps);
    const SpatialDistribution p_true = psdr_to_distribution(truth, n_cells, cfg.prune_eps);
    const EmdResult r = emd(p_hat, p_true);
    write_text_file(out_json, emd_to_json(r, p_hat, p_true));
    if (!out_plan.empty()) write_text_file(out_plan, plan_to_csv(r.plan, p_hat, p_true));
    std::printf("emd=%.12g pixels over %zu -> %zu support points\n", r.value,
                p_hat.support.size(), p_true.support.size());
    return 0;
}

int cmd_prox_check(std::uint64_t seed, int cases, bool inject_bug) {
    const ProxCheckReport rep = run_prox_check(seed, cases, inject_bug);
    if (rep.vacuous) {
        std::printf("warning: 0 cases requested, vacuous pass\n");
        return 0;
    }
    std::printf("prox-check over %d cases (seed %llu)\n", rep.cases,
                static_cast<unsigned long long>(seed));
    std::printf("  max moreau residual   %.3e (tol 1e-8)\n", rep.max_moreau);
    std::printf("  max ellipsoid kkt     %.3e (tol 1e-8)\n", rep.max_kkt);
    std::printf("  max oracle mismatch   %.3e (tol 1e-6)\n", rep.max_oracle);
    std::printf("%s\n", rep.pass() ? "PASS" : "FAIL");
    return rep.pass() ? 0 : 1;
}

int cmd_kernels(const ConfigSource& src, const std::string& report_csv,
                const std::string& export_dir) {
    const RunConfig cfg = src.load();
    const SigmaGrid sigma = cfg.analysis_sigma();
    const int rank = cfg.bank_rank();
    const KernelBank bank = build_kernel_bank(sigma, rank);

    std::string csv = "bin,sigma_lo,sigma_hi,radius,rank,rank_err_rel_fro,singular_values\n";
    for (int k = 0; k < bank.count(); ++k) {
        const BinKernel& bin = bank.bins[static_cast<std::size_t>(k)];
        double tail = 0.0, totsq = 0.0;
        for (std::size_t j = 0; j < bin.singular_values.size(); ++j) {
            const double s2 = bin.singular_values[j] * bin.singular_values[j];
            totsq += s2;
            if (j >= static_cast<std::size_t>(rank)) tail += s2;
        }
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%d,%d,%.12g,", k + 1,
                      sigma.edges[static_cast<std::size_t>(k)],
                      sigma.edges[static_cast<std::size_t>(k) + 1], bin.radius, rank,
                      std::sqrt(tail / totsq));
        csv += buf;
        for (int j = 0; j < std::min<int>(8, static_cast<int>(bin.singular_values.size()));
             ++j) {
            std::snprintf(buf, sizeof(buf), "%s%.12g", j ? " " : "",
                          bin.singular_values[static_cast<std::size_t>(j)]);
            csv += buf;
        }
        csv += "\n";
    }
    write_text_file(report_csv, csv);

    if (!export_dir.empty()) {
        nlohmann::json manifest;
        for (int k = 0; k < bank.count(); ++k) {
            const BinKernel& bin = bank.bins[static_cast<std::size_t>(k)];
            TensorMeta meta;
            const int side = 2 * bin.radius + 1;
            meta.shape = {side, side};
            const std::string path = export_dir + "/kernel_bin" + std::to_string(k + 1) + ".invd";
            tensor_write(path, meta, bin.full.vec());
            manifest["bins"].push_back({{"bin", k + 1},
                                        {"file", path},
                                        {"singular_values", bin.singular_values}});
        }
        write_text_file(export_dir + "/manifest.json", manifest.dump(2) + "\n");
    }
    std::printf("wrote kernel report for %d bins to %s\n", bank.count(), report_csv.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regularized inverse diffusion: synthesis, solving, evaluation"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "Cap worker threads (0 = hardware)");

    ConfigSource sim_src, solve_src, det_src, eval_src, emd_src, ker_src;
    std::string out_image = "observation.invd", out_truth = "truth.json",
                out_psdr = "psdr_true.invd";
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic scene and observation");
    sim->fallthrough();
    add_config_options(sim, sim_src);
    int sim_bits = 0;
    sim->add_option("--bits", sim_bits, "Override the noise-model bit depth");
    sim->add_option("--out-image", out_image);
    sim->add_option("--out-truth", out_truth);
    sim->add_option("--out-psdr", out_psdr);

    std::string image_path, solve_out = "psdr_opt.invd", solve_log = "solve_log.csv";
    auto* slv = app.add_subcommand("solve", "Run the accelerated proximal gradient solver");
    slv->fallthrough();
    add_config_options(slv, solve_src);
    slv->add_option("--image", image_path)->required();
    slv->add_option("--out-psdr", solve_out);
    slv->add_option("--out-log", solve_log);

    std::string det_psdr, det_out = "detections.csv";
    double det_min_value = 0.0;
    auto* det = app.add_subcommand("detect", "Extract local-maxima detections from a stack");
    det->fallthrough();
    add_config_options(det, det_src);
    det->add_option("--psdr", det_psdr)->required();
    det->add_option("--out", det_out);
    det->add_option("--min-value", det_min_value, "Drop maxima at or below this value");

    std::string eval_dets, eval_truth, eval_out = "report.json", eval_curve;
    std::optional<double> eval_tol;
    bool eval_strict = false;
    auto* ev = app.add_subcommand("evaluate", "Score detections against the ground truth");
    ev->fallthrough();
    add_config_options(ev, eval_src);
    ev->add_option("--dets", eval_dets)->required();
    ev->add_option("--truth", eval_truth)->required();
    ev->add_option("--tolerance", eval_tol, "Match radius in pixels");
    ev->add_flag("--strict-diameter", eval_strict,
                 "Treat the tolerance as a diameter (radius = tolerance / 2)");
    ev->add_option("--out", eval_out);
    ev->add_option("--out-curve", eval_curve, "Optional threshold/F1 curve CSV");

    std::string emd_psdr, emd_truth_psdr, emd_truth, emd_out = "emd.json", emd_plan;
    auto* em = app.add_subcommand("emd", "Earth mover's distance to the true distribution");
    em->fallthrough();
    add_config_options(em, emd_src);
    em->add_option("--psdr", emd_psdr)->required();
    em->add_option("--truth-psdr", emd_truth_psdr)->required();
    em->add_option("--truth", emd_truth)->required();
    em->add_option("--out", emd_out);
    em->add_option("--out-plan", emd_plan, "Optional transport plan CSV");

    std::uint64_t px_seed = 7;
    int px_cases = 10000;
    bool px_bug = false;
    auto* px = app.add_subcommand("prox-check", "Run the prox operator property batteries");
    px->fallthrough();
    px->add_option("--seed", px_seed);
    px->add_option("--cases", px_cases);
    px->add_flag("--inject-bug", px_bug)->group(""); // hidden test hook

    std::string ker_report = "kernels.csv", ker_export;
    auto* ker = app.add_subcommand("kernels", "Report per-bin singular values and errors");
    ker->fallthrough();
    add_config_options(ker, ker_src);
    ker->add_option("--report", ker_report);
    ker->add_option("--export", ker_export, "Directory for per-bin tensors and manifest");

    CLI11_PARSE(app, argc, argv);
    invdiff::set_max_threads(threads);

    try {
        if (sim->parsed()) return cmd_simulate(sim_src, sim_bits, out_image, out_truth, out_psdr);
        if (slv->parsed()) return cmd_solve(solve_src, image_path, solve_out, solve_log);
        if (det->parsed()) return cmd_detect(det_src, det_psdr, det_out, det_min_value);
        if (ev->parsed())
            return cmd_evaluate(eval_src, eval_dets, eval_truth, eval_tol, eval_strict,
                                eval_out, eval_curve);
        if (em->parsed())
            return cmd_emd(emd_src, emd_psdr, emd_truth_psdr, emd_truth, emd_out, emd_plan);
        if (px->parsed()) return cmd_prox_check(px_seed, px_cases, px_bug);
        if (ker->parsed()) return cmd_kernels(ker_src, ker_report, ker_export);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
