#include "cavity/experiments.hpp"

#include <cmath>
#include <sstream>

#include "cavity/dynamics.hpp"

namespace cavity {

std::filesystem::path default_output(const ExperimentConfig& config)
{
    return to_string(config.kind) + (config.format == OutputFormat::Json ? ".json" : ".csv");
}

namespace {

using io::Json;

struct Outcome {
    io::Table table;
    Json extra = Json::object();      ///< results beyond the table
    std::optional<Json> json_data;    ///< replaces the table in JSON output
    std::string summary;
};

bool resonant_closed_form_applies(const ExperimentConfig& cfg, const HybridState& init)
{
    if (cfg.scenario.params.delta != 0.0) return false;
    for (std::size_t k = 0; k < init.triples(); ++k)
        if (init.u(k) != 0.0 || init.v(k) != 0.0) return false;
    return true;
}

Outcome run_rabi(const ExperimentConfig& cfg)
{
    const RabiSpec& spec = *cfg.rabi;
    const Scenario& sc = cfg.scenario;
    const bool motionless = spec.motion == RabiSpec::Motion::Static;

    HybridState init;
    System system;
    if (motionless) {
        const int n_max = sc.truncation();
        init = prepare_initial_state(sc.field, sc.atom, sc.x0, sc.p0, n_max);
        system = System::jaynes_cummings(sc.params, spec.coupling, 0, static_cast<std::size_t>(n_max) + 1);
    }
    else {
        init = sc.initial_state();
        system = sc.system();
    }

    IntegratorConfig ic = cfg.integrator;
    ic.t_max = spec.t_end;
    const Trajectory tr = integrate(system, init, ic, {}, SampleSpec::uniform(0.0, spec.t_end, spec.dt));
    if (!tr.ok()) throw std::runtime_error("rabi: integration stopped: " + to_string(tr.reason));

    const bool exact = motionless || resonant_closed_form_applies(cfg, init);
    io::Table table{{"tau", "z", "x", "p"}, {}};
    if (exact) table.columns.push_back("z_exact");
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        const HybridState s = tr.state(i);
        std::vector<io::Cell> row{tr.t[i], population_inversion(s), s.x(), s.p()};
        if (exact) {
            const double z = motionless ? jc_inversion_exact(init, sc.params, spec.coupling, tr.t[i])
                                        : resonant_inversion_exact(init, sc.params.alpha, tr.t[i]);
            worst = std::max(worst, std::abs(z - population_inversion(s)));
            row.emplace_back(z);
        }
        table.add_row(std::move(row));
    }

    const ConservationReport cons = conservation_report(tr, system);
    Outcome out;
    out.table = std::move(table);
    out.extra = {{"steps", tr.steps},
                 {"conservation",
                  {{"energy", cons.energy},
                   {"max_norm", cons.max_norm},
                   {"total_norm", cons.total_norm},
                   {"flagged", cons.flagged()}}}};
    std::ostringstream s;
    s << tr.t.size() << " samples, " << tr.steps << " steps, integral drift " << cons.worst();
    if (exact) {
        out.extra["max_closed_form_deviation"] = worst;
        s << ", closed-form deviation " << worst;
    }
    out.summary = s.str();
    return out;
}

Outcome run_lyapmap(const ExperimentConfig& cfg, unsigned threads)
{
    const LyapMapSpec& spec = *cfg.lyapmap;
    const GridMap map = lyapunov_map(spec.x_axis, spec.y_axis, cfg.scenario, spec.lyapunov, cfg.integrator, threads);
    Outcome out;
    out.table = io::grid_table(map);
    out.json_data = io::grid_json(map);
    double best = -INFINITY;
    for (Eigen::Index i = 0; i < map.values.size(); ++i)
        if (std::isfinite(map.values.data()[i])) best = std::max(best, map.values.data()[i]);
    out.extra = {{"missing_cells", map.metadata.at("missing_cells")}, {"max_lambda", io::to_json(best)}};
    out.summary = std::to_string(map.values.size()) + " cells, max lambda " + io::format_double(best) +
                  ", missing " + map.metadata.at("missing_cells");
    return out;
}

Outcome run_poincare(const ExperimentConfig& cfg, unsigned threads)
{
    const PoincareSpec& spec = *cfg.poincare;
    std::vector<HybridState> inits;
    for (double p0 : spec.p0.values()) {
        Scenario s = cfg.scenario;
        s.p0 = p0;
        inits.push_back(s.initial_state());
    }
    const auto points =
        poincare_section(inits, cfg.scenario.system(), spec.t_max, default_section(), cfg.integrator, threads);
    Outcome out;
    out.table = io::section_table(points);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& pt : points) {
        lo = std::min(lo, pt.p);
        hi = std::max(hi, pt.p);
    }
    std::size_t boxes = 0;
    if (points.size() > 1 && hi > lo) boxes = box_count(points, spec.box_bins, lo, std::nextafter(hi, INFINITY));
    out.extra = {{"points", points.size()}, {"occupied_boxes", boxes}};
    out.summary = std::to_string(points.size()) + " section points, " + std::to_string(boxes) + " occupied boxes";
    return out;
}

Outcome run_zoutzin(const ExperimentConfig& cfg, unsigned threads)
{
    const ZoutZinSpec& spec = *cfg.zoutzin;
    const auto z_in = spec.values();
    const Scenario& sc = cfg.scenario;
    const auto z_out = zout_zin_scan(z_in, sc.params, std::get<Fock>(sc.field).photons, sc.x0, sc.p0, spec.tau,
                                     cfg.integrator, threads);
    Outcome out;
    const std::string cols[] = {"z_in", "z_out"};
    const std::vector<double> data[] = {z_in, z_out};
    out.table = io::series_table(cols, data);
    double lo = INFINITY, hi = -INFINITY;
    for (double z : z_out)
        if (std::isfinite(z)) {
            lo = std::min(lo, z);
            hi = std::max(hi, z);
        }
    out.extra = {{"z_out_range", io::to_json(hi - lo)}};
    out.summary = std::to_string(z_in.size()) + " points, z_out range " + io::format_double(hi - lo);
    return out;
}

ScanOptions scan_options(const ExperimentConfig& cfg, const CavityGeometry& geometry, double t_max, unsigned threads)
{
    ScanOptions o;
    o.geometry = geometry;
    o.t_max = t_max;
    o.integrator = cfg.integrator;
    o.threads = threads;
    return o;
}

void append_level(io::Table& table, const ZoomNode& node)
{
    for (std::size_t i = 0; i < node.records.size(); ++i) {
        const ExitRecord& r = node.records[i];
        table.add_row({std::int64_t{node.depth}, r.p0, r.exit_time, to_string(r.detector), std::int64_t{r.m},
                       std::int64_t{r.trapped()}, std::int64_t{r.conservation_ok}, std::int64_t{r.failed},
                       std::int64_t{node.singular.empty() ? 0 : static_cast<int>(node.singular[i])}});
    }
}

Json level_json(const ZoomNode& node)
{
    Json unresolved = Json::array();
    for (const auto& u : node.unresolved) unresolved.push_back({u.lo, u.hi});
    Json smooth = Json::array();
    for (const auto& u : node.smooth) smooth.push_back({u.lo, u.hi});
    return {{"depth", node.depth},
            {"interval", {node.interval.lo, node.interval.hi}},
            {"points", node.records.size()},
            {"singular_points", node.singular_count()},
            {"unresolved", std::move(unresolved)},
            {"smooth", std::move(smooth)},
            {"mean_exit_time", node.mean_exit_time()},
            {"singular_density", node.singular_density()}};
}

void collect(const ZoomNode& node, io::Table& table, Json& levels)
{
    append_level(table, node);
    levels.push_back(level_json(node));
    for (const auto& c : node.children) collect(c, table, levels);
}

Outcome run_fractal(const ExperimentConfig& cfg, unsigned threads)
{
    const FractalSpec& spec = *cfg.fractal;
    const ScanOptions opts = scan_options(cfg, spec.geometry, spec.t_max, threads);

    ZoomConfig top = spec.zoom;
    top.resolution = spec.p0.count;
    ZoomNode root;
    root.interval = {spec.p0.min, spec.p0.max};
    root.depth = 0;
    root.resolution = spec.p0.count;
    root.records = exit_scan(spec.p0.values(), cfg.scenario, opts);
    classify_points(root, top);
    root = refine_interval(std::move(root), cfg.scenario, opts, spec.zoom, spec.max_depth);

    Outcome out;
    out.table = io::Table{{"level", "p0", "exit_time", "detector", "m", "trapped", "conservation_ok", "failed", "singular"}, {}};
    Json levels = Json::array();
    collect(root, out.table, levels);

    if (!spec.chain.empty()) {
        const auto chain = zoom_chain(spec.chain, cfg.scenario, opts, spec.zoom);
        Json chain_levels = Json::array();
        for (const auto& node : chain) {
            ZoomNode shifted = node;
            shifted.depth = node.depth + 1 + spec.max_depth;
            append_level(out.table, shifted);
            chain_levels.push_back(level_json(node));
        }
        out.extra["chain"] = std::move(chain_levels);
    }
    out.extra["levels"] = std::move(levels);

    std::size_t trapped = 0, failed = 0, flagged = 0;
    for (const auto& row : out.table.rows) {
        trapped += static_cast<std::size_t>(std::get<std::int64_t>(row[5]));
        failed += static_cast<std::size_t>(std::get<std::int64_t>(row[7]));
        flagged += std::get<std::int64_t>(row[6]) == 0 ? 1 : 0;
    }
    out.extra["trapped"] = trapped;
    out.extra["failed"] = failed;
    out.extra["conservation_flagged"] = flagged;
    out.summary = std::to_string(out.table.rows.size()) + " trajectories, " + std::to_string(root.unresolved.size()) +
                  " unresolved zones at the top level, " + std::to_string(trapped) + " trapped";
    return out;
}

Outcome run_exitstats(const ExperimentConfig& cfg, unsigned threads)
{
    const ExitStatsSpec& spec = *cfg.exitstats;
    const ScanOptions opts = scan_options(cfg, spec.geometry, spec.t_max, threads);
    const auto records = exit_scan(spec.p0.values(), cfg.scenario, opts);
    const ExitPdf pdf = exit_time_histogram(records, spec.bins);

    Outcome out;
    out.table = io::pdf_table(pdf);
    out.extra = {{"samples", records.size()},
                 {"detected", pdf.total - pdf.trapped},
                 {"trapped", pdf.trapped},
                 {"failed", pdf.failed},
                 {"underflow", pdf.underflow},
                 {"overflow", pdf.overflow},
                 {"peak_center", pdf.center(pdf_peak(pdf))}};
    std::ostringstream s;
    s << records.size() << " samples, PDF peak at T = " << pdf.center(pdf_peak(pdf));
    if (spec.fit) {
        auto fit_json = [](const TailFit& f) {
            return Json{{"slope", f.slope}, {"intercept", f.intercept}, {"residual", f.residual}, {"bins", f.bins}};
        };
        try {
            const TailFit power = tail_exponent(pdf, spec.fit->lo, spec.fit->hi);
            const TailFit expo = exponential_tail_fit(pdf, spec.fit->lo, spec.fit->hi);
            out.extra["power_law_fit"] = fit_json(power);
            out.extra["exponential_fit"] = fit_json(expo);
            s << ", gamma = " << power.slope << " (residual " << power.residual << ", exponential " << expo.residual
              << ")";
        }
        catch (const std::runtime_error& e) {
            out.extra["fit_error"] = e.what();
            s << ", tail fit skipped: " << e.what();
        }
    }
    out.summary = s.str();
    return out;
}

}  // namespace

RunResult run(const ExperimentConfig& config, const RunOptions& options)
{
    Outcome outcome;
    switch (config.kind) {
    case ExperimentKind::Rabi: outcome = run_rabi(config); break;
    case ExperimentKind::LyapMap: outcome = run_lyapmap(config, options.threads); break;
    case ExperimentKind::Poincare: outcome = run_poincare(config, options.threads); break;
    case ExperimentKind::ZoutZin: outcome = run_zoutzin(config, options.threads); break;
    case ExperimentKind::Fractal: outcome = run_fractal(config, options.threads); break;
    case ExperimentKind::ExitStats: outcome = run_exitstats(config, options.threads); break;
    }

    const std::filesystem::path path =
        options.out ? *options.out : config.output_path ? std::filesystem::path(*config.output_path) : default_output(config);
    const Json parameters = config_to_json(config);
    const std::string hash = config_hash(config);
    const std::string kind = to_string(config.kind);

    RunResult result;
    result.summary = outcome.summary;
    if (config.format == OutputFormat::Json) {
        Json data = outcome.json_data ? *outcome.json_data : io::to_json(outcome.table);
        data["results"] = std::move(outcome.extra);
        io::write_file(path, io::envelope(kind, parameters, hash, std::move(data)).dump(2) + "\n");
        result.files.push_back(path);
    }
    else {
        std::ostringstream csv;
        io::write_csv(csv, outcome.table);
        Json data{{"file", path.filename().string()},
                  {"columns", outcome.table.columns},
                  {"rows", outcome.table.rows.size()},
                  {"results", std::move(outcome.extra)}};
        const std::filesystem::path meta = path.string() + ".meta.json";
        io::write_file(path, csv.str());
        io::write_file(meta, io::envelope(kind, parameters, hash, std::move(data)).dump(2) + "\n");
        result.files.push_back(path);
        result.files.push_back(meta);
    }
    return result;
}

}  // namespace cavity
