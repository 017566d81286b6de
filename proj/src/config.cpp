#include "cavity/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace cavity {

std::string to_string(ExperimentKind kind)
{
    switch (kind) {
    case ExperimentKind::Rabi: return "rabi";
    case ExperimentKind::LyapMap: return "lyapmap";
    case ExperimentKind::Poincare: return "poincare";
    case ExperimentKind::ZoutZin: return "zoutzin";
    case ExperimentKind::Fractal: return "fractal";
    case ExperimentKind::ExitStats: return "exitstats";
    }
    return "rabi";
}

ExperimentKind experiment_from_string(std::string_view name)
{
    for (auto k : {ExperimentKind::Rabi, ExperimentKind::LyapMap, ExperimentKind::Poincare, ExperimentKind::ZoutZin,
                   ExperimentKind::Fractal, ExperimentKind::ExitStats})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown experiment '" + std::string(name) + "'");
}

std::vector<double> ZoutZinSpec::values() const
{
    // Integer stepping keeps the grid free of accumulated rounding.
    const auto n = static_cast<std::size_t>(std::floor((z_max - z_min) / z_step + 1e-9)) + 1;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::min(z_min + static_cast<double>(i) * z_step, z_max);
    return v;
}

namespace {

std::string where(const std::string& source, int line, int column, const std::string& field)
{
    std::ostringstream s;
    s << source;
    if (line > 0) s << ':' << line << ':' << column;
    if (!field.empty()) s << ": field '" << field << "'";
    return s.str();
}

}  // namespace

ConfigError::ConfigError(std::string source, int line, int column, std::string field, const std::string& message)
    : std::runtime_error(where(source, line, column, field) + ": " + message),
      source_(std::move(source)),
      line_(line),
      column_(column),
      field_(std::move(field))
{
}

namespace {

// ---- schema table -------------------------------------------------------

enum class Type { Map, Number, Integer, Bool, String, IntervalList };

struct Field {
    std::string name;
    Type type = Type::Map;
    std::string doc;
    std::string fallback;  ///< default shown in the schema document
    bool required = false;
    std::optional<double> lower;
    bool lower_open = false;
    std::optional<double> upper;
    std::vector<std::string> choices;
    std::vector<Field> children;

    Field req() &&
    {
        required = true;
        return std::move(*this);
    }
    Field ge(double v) &&
    {
        lower = v;
        return std::move(*this);
    }
    Field gt(double v) &&
    {
        lower = v;
        lower_open = true;
        return std::move(*this);
    }
    Field le(double v) &&
    {
        upper = v;
        return std::move(*this);
    }
    Field oneof(std::vector<std::string> c) &&
    {
        choices = std::move(c);
        return std::move(*this);
    }
    const Field* child(const std::string& key) const
    {
        for (const auto& c : children)
            if (c.name == key) return &c;
        return nullptr;
    }
};

std::string fmt(double v)
{
    return io::format_double(v);
}

Field number(std::string name, std::string doc, std::optional<double> def = std::nullopt)
{
    return Field{std::move(name), Type::Number, std::move(doc), def ? fmt(*def) : "", false, {}, false, {}, {}, {}};
}
Field integer(std::string name, std::string doc, std::optional<long long> def = std::nullopt)
{
    return Field{std::move(name), Type::Integer, std::move(doc), def ? std::to_string(*def) : "", false, {}, false,
                 {}, {}, {}};
}
Field boolean(std::string name, std::string doc, bool def)
{
    return Field{std::move(name), Type::Bool, std::move(doc), def ? "true" : "false", false, {}, false, {}, {}, {}};
}
Field string(std::string name, std::string doc, std::string def = "")
{
    return Field{std::move(name), Type::String, std::move(doc), std::move(def), false, {}, false, {}, {}, {}};
}
Field map(std::string name, std::string doc, std::vector<Field> children)
{
    return Field{std::move(name), Type::Map, std::move(doc), "", false, {}, false, {}, {}, std::move(children)};
}
Field intervals(std::string name, std::string doc)
{
    return Field{std::move(name), Type::IntervalList, std::move(doc), "", false, {}, false, {}, {}, {}};
}

Field range_grid(const std::string& what)
{
    return map("grid", "uniform grid of " + what,
               {number("min", "first point").req(), number("max", "last point").req(),
                integer("count", "number of points").req().ge(1)})
        .req();
}

Field axis(const std::string& name)
{
    return map(name, "grid axis",
               {string("name", "scenario parameter").req().oneof({"delta", "alpha", "photons", "p0", "x0", "z_in"}),
                number("min", "first value").req(), number("max", "last value").req(),
                integer("count", "number of values").req().ge(1),
                string("scale", "spacing", "linear").oneof({"linear", "log"})})
        .req();
}

Field geometry()
{
    const CavityGeometry g;
    return map("geometry", "detector and node positions",
               {number("x_left", "left detector", g.x_left), number("x_right", "right detector", g.x_right),
                number("central_node", "node whose crossings are counted", g.central_node)});
}

const Field& schema()
{
    static const Field root = [] {
        const ModelParams mp;
        const IntegratorConfig ic;
        const Scenario sc;
        const RabiSpec rabi;
        const LyapunovConfig ly;
        const PoincareSpec pc;
        const ZoutZinSpec zz;
        const FractalSpec fr;
        const ZoomConfig zc;
        const ExitStatsSpec es;
        return map(
            "", "experiment config",
            {
                integer("schema_version", "config schema version").req().ge(1).le(1),
                string("experiment", "experiment kind")
                    .req()
                    .oneof({"rabi", "lyapmap", "poincare", "zoutzin", "fractal", "exitstats"}),
                map("model", "control parameters",
                    {number("delta", "detuning", mp.delta), number("alpha", "recoil frequency", mp.alpha).gt(0)}),
                map("field", "initial field state",
                    {string("kind", "field preparation").req().oneof({"fock", "coherent", "bose_einstein"}),
                     integer("photons", "Fock photon number").ge(0),
                     number("mean", "mean photon number (coherent, bose_einstein)").gt(0),
                     integer("n_max", "ladder truncation; default keeps the tail below 1e-12").ge(0)})
                    .req(),
                map("atom", "initial atomic state",
                    {string("kind", "atom preparation").req().oneof({"excited", "superposition"}),
                     number("z_in", "inversion of the superposition").ge(-1).le(1)})
                    .req(),
                map("initial", "centre-of-mass start",
                    {number("x0", "position", sc.x0), number("p0", "momentum", sc.p0)}),
                map("integrator", "adaptive Runge-Kutta settings",
                    {number("rel_tol", "relative tolerance", ic.rel_tol).gt(0),
                     number("abs_tol", "absolute tolerance", ic.abs_tol).gt(0),
                     number("max_step", "step cap; 0 picks one from the fastest Rabi frequency", ic.max_step).ge(0),
                     boolean("reduce_fock", "use the two-triple system for Fock fields", sc.reduce_fock)}),
                map("output", "result file",
                    {string("format", "file format", "csv").oneof({"csv", "json"}),
                     string("path", "output file; the command line --out wins")}),
                map("rabi", "inversion time series",
                    {map("grid", "sampling times",
                         {number("t_end", "last time", rabi.t_end).req().gt(0),
                          number("dt", "sampling interval", rabi.dt).req().gt(0)})
                         .req(),
                     string("motion", "hybrid: moving atom; static: motionless atom", "hybrid")
                         .oneof({"hybrid", "static"}),
                     number("coupling", "mode function value for a motionless atom", rabi.coupling)}),
                map("lyapmap", "maximal Lyapunov exponent over a parameter grid",
                    {map("grid", "map axes", {axis("x"), axis("y")}).req(),
                     map("lyapunov", "Benettin settings",
                         {number("d0", "renormalized separation", ly.d0).gt(0),
                          number("renorm_interval", "time between renormalizations", ly.renorm_interval).gt(0),
                          number("t_total", "averaging horizon", ly.t_total).gt(0),
                          number("t_discard", "transient; negative means 10% of t_total", ly.t_discard),
                          number("overflow_ratio", "separation growth treated as overflow", ly.overflow_ratio)
                              .gt(1),
                          integer("max_retries", "interval halvings after an overflow", ly.max_retries).ge(0)})}),
                map("poincare", "section points of sum v_n = 0 (rising)",
                    {range_grid("initial momenta"), number("t_max", "integration horizon", pc.t_max).gt(0),
                     integer("box_bins", "box-count grid size per axis", static_cast<long long>(pc.box_bins))
                         .ge(1)}),
                map("zoutzin", "final inversion against initial inversion",
                    {map("grid", "initial inversions",
                         {number("min", "first z_in", zz.z_min).req().ge(-1).le(1),
                          number("max", "last z_in", zz.z_max).req().ge(-1).le(1),
                          number("step", "z_in step", zz.z_step).req().gt(0)})
                         .req(),
                     number("tau", "observation time", zz.tau).ge(0)}),
                map("fractal", "exit time against injection momentum",
                    {range_grid("injection momenta"), geometry(),
                     number("t_max", "trapping horizon", fr.t_max).gt(0),
                     map("zoom", "refinement",
                         {intervals("chain", "momentum intervals scanned after the grid"),
                          integer("resolution", "points per refined interval", static_cast<long long>(zc.resolution))
                              .ge(3),
                          integer("median_half_window", "half width of the local median window",
                                  static_cast<long long>(zc.median_half_window))
                              .ge(0),
                          number("singular_factor", "T above factor * local median is singular", zc.singular_factor)
                              .gt(0),
                          number("singular_floor", "and T above this floor", zc.singular_floor).gt(0),
                          integer("min_smooth_points", "shortest smooth run",
                                  static_cast<long long>(zc.min_smooth_points))
                              .ge(1),
                          integer("max_children", "unresolved intervals refined per level",
                                  static_cast<long long>(zc.max_children))
                              .ge(0),
                          integer("max_depth", "automatic refinement levels below the grid", fr.max_depth).ge(0)})}),
                map("exitstats", "exit-time distribution",
                    {range_grid("injection momenta"), geometry(),
                     number("t_max", "trapping horizon", es.t_max).gt(0),
                     map("bins", "histogram",
                         {string("scale", "bin spacing", "log").oneof({"linear", "log"}),
                          integer("count", "number of bins", static_cast<long long>(es.bins.bins)).ge(1),
                          number("lo", "lower edge; default smallest exit time").gt(0),
                          number("hi", "upper edge; default largest exit time").gt(0)}),
                     map("fit", "tail fit range",
                         {number("t_lo", "smallest bin centre").req().gt(0),
                          number("t_hi", "largest bin centre").req().gt(0)})}),
            });
    }();
    return root;
}

// ---- validation ---------------------------------------------------------

const char* type_name(Type t)
{
    switch (t) {
    case Type::Map: return "map";
    case Type::Number: return "number";
    case Type::Integer: return "integer";
    case Type::Bool: return "boolean";
    case Type::String: return "string";
    case Type::IntervalList: return "list of [lo, hi] pairs";
    }
    return "value";
}

std::string join_path(const std::string& parent, const std::string& name)
{
    return parent.empty() ? name : parent + "." + name;
}

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Mark& m, const std::string& field, const std::string& message) const
    {
        if (m.is_null()) throw ConfigError(source_, 0, 0, field, message);
        throw ConfigError(source_, m.line + 1, m.column + 1, field, message);
    }
    [[noreturn]] void fail(const YAML::Node& at, const std::string& field, const std::string& message) const
    {
        fail(at.Mark(), field, message);
    }

    /// Position of `key` inside a map, or of the map itself when absent.
    static YAML::Mark key_mark(const YAML::Node& map, const std::string& key)
    {
        for (const auto& kv : map)
            if (kv.first.Scalar() == key) return kv.first.Mark();
        return map.Mark();
    }

    static std::optional<double> scalar_number(const YAML::Node& n)
    {
        if (!n.IsScalar()) return std::nullopt;
        const std::string& s = n.Scalar();
        double v = 0.0;
        const char* b = s.data();
        if (!s.empty() && s[0] == '+') ++b;
        const auto res = std::from_chars(b, s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    }

    static std::optional<long long> scalar_integer(const YAML::Node& n)
    {
        if (!n.IsScalar()) return std::nullopt;
        const std::string& s = n.Scalar();
        long long v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
        return v;
    }

    /// `owner` is where the node's key sits; missing children are reported there.
    void check(const YAML::Node& node, const Field& f, const std::string& path, const YAML::Mark& owner) const
    {
        switch (f.type) {
        case Type::Map: {
            if (!node.IsMap()) fail(node, path, std::string("expected a map"));
            for (const auto& kv : node) {
                const std::string key = kv.first.as<std::string>();
                const Field* c = f.child(key);
                if (!c) fail(kv.first, join_path(path, key), "unknown field");
                check(kv.second, *c, join_path(path, key), kv.first.Mark());
            }
            for (const auto& c : f.children)
                if (c.required && !node[c.name]) fail(owner, join_path(path, c.name), "missing required field");
            return;
        }
        case Type::Number:
        case Type::Integer: {
            std::optional<double> v;
            if (f.type == Type::Number) v = scalar_number(node);
            else if (auto i = scalar_integer(node)) v = static_cast<double>(*i);
            if (!v) fail(node, path, std::string("expected ") + type_name(f.type) + ", got '" + text(node) + "'");
            if (f.lower && (f.lower_open ? !(*v > *f.lower) : !(*v >= *f.lower)))
                fail(node, path, std::string("must be ") + (f.lower_open ? "> " : ">= ") + fmt(*f.lower) +
                                     ", got " + node.Scalar());
            if (f.upper && !(*v <= *f.upper))
                fail(node, path, "must be <= " + fmt(*f.upper) + ", got " + node.Scalar());
            return;
        }
        case Type::Bool: {
            bool b = false;
            if (!node.IsScalar() || !YAML::convert<bool>::decode(node, b))
                fail(node, path, "expected boolean, got '" + text(node) + "'");
            return;
        }
        case Type::String: {
            if (!node.IsScalar()) fail(node, path, "expected string");
            if (!f.choices.empty() &&
                std::find(f.choices.begin(), f.choices.end(), node.Scalar()) == f.choices.end()) {
                std::string list;
                for (const auto& c : f.choices) list += (list.empty() ? "" : ", ") + c;
                fail(node, path, "'" + node.Scalar() + "' is not one of " + list);
            }
            return;
        }
        case Type::IntervalList: {
            if (!node.IsSequence()) fail(node, path, "expected a list of [lo, hi] pairs");
            for (std::size_t i = 0; i < node.size(); ++i) {
                const YAML::Node item = node[i];
                const std::string ip = path + "[" + std::to_string(i) + "]";
                if (!item.IsSequence() || item.size() != 2) fail(item, ip, "expected [lo, hi]");
                const auto lo = scalar_number(item[0]);
                const auto hi = scalar_number(item[1]);
                if (!lo || !hi) fail(item, ip, "interval bounds must be numbers");
                if (!(*hi > *lo)) fail(item, ip, "interval needs hi > lo");
            }
            return;
        }
        }
    }

    static std::string text(const YAML::Node& n)
    {
        if (n.IsScalar()) return n.Scalar();
        if (n.IsMap()) return "<map>";
        if (n.IsSequence()) return "<list>";
        return "<null>";
    }

    const std::string& source() const { return source_; }

private:
    std::string source_;
};

// Typed access to already validated nodes.
double get(const YAML::Node& parent, const char* key, double fallback)
{
    const YAML::Node n = parent[key];
    return n ? *Reader::scalar_number(n) : fallback;
}
long long get_int(const YAML::Node& parent, const char* key, long long fallback)
{
    const YAML::Node n = parent[key];
    return n ? *Reader::scalar_integer(n) : fallback;
}
std::string get_str(const YAML::Node& parent, const char* key, const std::string& fallback)
{
    const YAML::Node n = parent[key];
    return n ? n.Scalar() : fallback;
}
bool get_bool(const YAML::Node& parent, const char* key, bool fallback)
{
    const YAML::Node n = parent[key];
    return n ? n.as<bool>() : fallback;
}

RangeSpec read_range(const Reader& r, const YAML::Node& grid, const std::string& path)
{
    RangeSpec s{get(grid, "min", 0.0), get(grid, "max", 0.0), static_cast<std::size_t>(get_int(grid, "count", 1))};
    if (s.max < s.min) r.fail(grid, path, "needs min <= max");
    return s;
}

AxisSpec read_axis(const Reader& r, const YAML::Node& n, const std::string& path)
{
    AxisSpec a;
    a.name = get_str(n, "name", "");
    a.min = get(n, "min", 0.0);
    a.max = get(n, "max", 0.0);
    a.count = static_cast<std::size_t>(get_int(n, "count", 1));
    a.scale = get_str(n, "scale", "linear") == "log" ? AxisScale::Log : AxisScale::Linear;
    try {
        a.validate();
    }
    catch (const std::exception& e) {
        r.fail(n, path, e.what());
    }
    return a;
}

CavityGeometry read_geometry(const Reader& r, const YAML::Node& block, const std::string& path)
{
    CavityGeometry g;
    const YAML::Node n = block["geometry"];
    if (!n) return g;
    g.x_left = get(n, "x_left", g.x_left);
    g.x_right = get(n, "x_right", g.x_right);
    g.central_node = get(n, "central_node", g.central_node);
    try {
        g.validate();
    }
    catch (const std::exception& e) {
        r.fail(n, path + ".geometry", e.what());
    }
    return g;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::string& source)
{
    const Reader r(source);
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    }
    catch (const YAML::ParserException& e) {
        throw ConfigError(source, e.mark.line + 1, e.mark.column + 1, "", "YAML syntax error: " + e.msg);
    }
    if (!root || root.IsNull()) throw ConfigError(source, 0, 0, "", "empty config");
    r.check(root, schema(), "", root.Mark());

    ExperimentConfig cfg;
    cfg.kind = experiment_from_string(root["experiment"].Scalar());
    const std::string kind = to_string(cfg.kind);
    for (const char* block : {"rabi", "lyapmap", "poincare", "zoutzin", "fractal", "exitstats"}) {
        if (block == kind) {
            if (!root[block]) r.fail(root, block, "missing required block for experiment '" + kind + "'");
        }
        else if (root[block]) {
            r.fail(Reader::key_mark(root, block), block, "block does not belong to experiment '" + kind + "'");
        }
    }

    Scenario& sc = cfg.scenario;
    if (const YAML::Node m = root["model"]) {
        sc.params.delta = get(m, "delta", sc.params.delta);
        sc.params.alpha = get(m, "alpha", sc.params.alpha);
    }

    const YAML::Node field = root["field"];
    const std::string fk = get_str(field, "kind", "");
    if (fk == "fock") {
        if (!field["photons"]) r.fail(field, "field.photons", "required for a Fock field");
        if (field["mean"]) r.fail(field["mean"], "field.mean", "not used by a Fock field");
        sc.field = Fock{static_cast<int>(get_int(field, "photons", 0))};
    }
    else {
        if (!field["mean"]) r.fail(field, "field.mean", "required for a " + fk + " field");
        if (field["photons"]) r.fail(field["photons"], "field.photons", "only used by a Fock field");
        const double mean = get(field, "mean", 0.0);
        if (fk == "coherent") sc.field = Coherent{mean};
        else sc.field = BoseEinstein{mean};
    }
    if (field["n_max"]) sc.n_max = static_cast<int>(get_int(field, "n_max", 0));

    const YAML::Node atom = root["atom"];
    if (get_str(atom, "kind", "") == "excited") {
        if (atom["z_in"]) r.fail(atom["z_in"], "atom.z_in", "not used by an excited atom");
        sc.atom = Excited{};
    }
    else {
        if (!atom["z_in"]) r.fail(atom, "atom.z_in", "required for a superposition atom");
        sc.atom = Superposition{get(atom, "z_in", 0.0)};
    }

    if (const YAML::Node in = root["initial"]) {
        sc.x0 = get(in, "x0", sc.x0);
        sc.p0 = get(in, "p0", sc.p0);
    }
    if (const YAML::Node in = root["integrator"]) {
        cfg.integrator.rel_tol = get(in, "rel_tol", cfg.integrator.rel_tol);
        cfg.integrator.abs_tol = get(in, "abs_tol", cfg.integrator.abs_tol);
        cfg.integrator.max_step = get(in, "max_step", cfg.integrator.max_step);
        sc.reduce_fock = get_bool(in, "reduce_fock", sc.reduce_fock);
    }
    if (const YAML::Node out = root["output"]) {
        cfg.format = get_str(out, "format", "csv") == "json" ? OutputFormat::Json : OutputFormat::Csv;
        if (out["path"]) cfg.output_path = out["path"].Scalar();
    }

    const YAML::Node block = root[kind];
    switch (cfg.kind) {
    case ExperimentKind::Rabi: {
        RabiSpec s;
        const YAML::Node g = block["grid"];
        s.t_end = get(g, "t_end", s.t_end);
        s.dt = get(g, "dt", s.dt);
        if (s.dt > s.t_end) r.fail(g, "rabi.grid.dt", "sampling interval exceeds t_end");
        s.motion = get_str(block, "motion", "hybrid") == "static" ? RabiSpec::Motion::Static : RabiSpec::Motion::Hybrid;
        s.coupling = get(block, "coupling", s.coupling);
        cfg.rabi = s;
        break;
    }
    case ExperimentKind::LyapMap: {
        LyapMapSpec s;
        const YAML::Node g = block["grid"];
        s.x_axis = read_axis(r, g["x"], "lyapmap.grid.x");
        s.y_axis = read_axis(r, g["y"], "lyapmap.grid.y");
        if (const YAML::Node l = block["lyapunov"]) {
            s.lyapunov.d0 = get(l, "d0", s.lyapunov.d0);
            s.lyapunov.renorm_interval = get(l, "renorm_interval", s.lyapunov.renorm_interval);
            s.lyapunov.t_total = get(l, "t_total", s.lyapunov.t_total);
            s.lyapunov.t_discard = get(l, "t_discard", s.lyapunov.t_discard);
            s.lyapunov.overflow_ratio = get(l, "overflow_ratio", s.lyapunov.overflow_ratio);
            s.lyapunov.max_retries = static_cast<int>(get_int(l, "max_retries", s.lyapunov.max_retries));
            try {
                s.lyapunov.validate();
            }
            catch (const std::exception& e) {
                r.fail(l, "lyapmap.lyapunov", e.what());
            }
        }
        cfg.lyapmap = s;
        break;
    }
    case ExperimentKind::Poincare: {
        PoincareSpec s;
        s.p0 = read_range(r, block["grid"], "poincare.grid");
        s.t_max = get(block, "t_max", s.t_max);
        s.box_bins = static_cast<std::size_t>(get_int(block, "box_bins", static_cast<long long>(s.box_bins)));
        cfg.poincare = s;
        break;
    }
    case ExperimentKind::ZoutZin: {
        ZoutZinSpec s;
        const YAML::Node g = block["grid"];
        s.z_min = get(g, "min", s.z_min);
        s.z_max = get(g, "max", s.z_max);
        s.z_step = get(g, "step", s.z_step);
        if (s.z_max < s.z_min) r.fail(g, "zoutzin.grid", "needs min <= max");
        s.tau = get(block, "tau", s.tau);
        if (!std::holds_alternative<Fock>(sc.field)) r.fail(field, "field.kind", "zoutzin needs a Fock field");
        cfg.zoutzin = s;
        break;
    }
    case ExperimentKind::Fractal: {
        FractalSpec s;
        s.p0 = read_range(r, block["grid"], "fractal.grid");
        s.geometry = read_geometry(r, block, "fractal");
        s.t_max = get(block, "t_max", s.t_max);
        if (const YAML::Node z = block["zoom"]) {
            if (const YAML::Node chain = z["chain"])
                for (const auto& item : chain)
                    s.chain.push_back({*Reader::scalar_number(item[0]), *Reader::scalar_number(item[1])});
            s.zoom.resolution = static_cast<std::size_t>(get_int(z, "resolution", static_cast<long long>(s.zoom.resolution)));
            s.zoom.median_half_window = static_cast<std::size_t>(
                get_int(z, "median_half_window", static_cast<long long>(s.zoom.median_half_window)));
            s.zoom.singular_factor = get(z, "singular_factor", s.zoom.singular_factor);
            s.zoom.singular_floor = get(z, "singular_floor", s.zoom.singular_floor);
            s.zoom.min_smooth_points =
                static_cast<std::size_t>(get_int(z, "min_smooth_points", static_cast<long long>(s.zoom.min_smooth_points)));
            s.zoom.max_children =
                static_cast<std::size_t>(get_int(z, "max_children", static_cast<long long>(s.zoom.max_children)));
            s.max_depth = static_cast<int>(get_int(z, "max_depth", s.max_depth));
        }
        cfg.fractal = s;
        break;
    }
    case ExperimentKind::ExitStats: {
        ExitStatsSpec s;
        s.p0 = read_range(r, block["grid"], "exitstats.grid");
        s.geometry = read_geometry(r, block, "exitstats");
        s.t_max = get(block, "t_max", s.t_max);
        if (const YAML::Node b = block["bins"]) {
            s.bins.scale = get_str(b, "scale", "log") == "linear" ? BinScale::Linear : BinScale::Log;
            s.bins.bins = static_cast<std::size_t>(get_int(b, "count", static_cast<long long>(s.bins.bins)));
            if (b["lo"]) s.bins.lo = get(b, "lo", 0.0);
            if (b["hi"]) s.bins.hi = get(b, "hi", 0.0);
            if (s.bins.lo && s.bins.hi && !(*s.bins.hi > *s.bins.lo))
                r.fail(b, "exitstats.bins", "needs hi > lo");
        }
        if (const YAML::Node f = block["fit"]) {
            s.fit = Interval{get(f, "t_lo", 0.0), get(f, "t_hi", 0.0)};
            if (!(s.fit->hi > s.fit->lo)) r.fail(f, "exitstats.fit", "needs t_hi > t_lo");
        }
        cfg.exitstats = s;
        break;
    }
    }

    // Domain checks that need the assembled scenario, reported at the block responsible.
    auto domain = [&](const char* block, auto&& check) {
        try {
            check();
        }
        catch (const std::exception& e) {
            r.fail(Reader::key_mark(root, block), block, e.what());
        }
    };
    domain("model", [&] { sc.params.validate(); });
    domain("integrator", [&] { cfg.integrator.validate(); });
    domain("field", [&] { validate(sc.field); });
    domain("atom", [&] { validate(sc.atom); });
    if (cfg.kind != ExperimentKind::LyapMap) domain("atom", [&] { (void)sc.initial_state(); });
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = io::read_file(path);
    }
    catch (const std::exception& e) {
        throw ConfigError(path.string(), 0, 0, "", e.what());
    }
    return parse_config(text, path.string());
}

namespace {

io::Json range_json(const RangeSpec& r)
{
    return {{"min", io::to_json(r.min)}, {"max", io::to_json(r.max)}, {"count", r.count}};
}

io::Json geometry_json(const CavityGeometry& g)
{
    return {{"x_left", g.x_left}, {"x_right", g.x_right}, {"central_node", g.central_node}};
}

io::Json axis_json(const AxisSpec& a)
{
    return {{"name", a.name},
            {"min", a.min},
            {"max", a.max},
            {"count", a.count},
            {"scale", a.scale == AxisScale::Log ? "log" : "linear"}};
}

}  // namespace

io::Json config_to_json(const ExperimentConfig& cfg)
{
    using io::Json;
    const Scenario& sc = cfg.scenario;
    Json field = std::visit(
        [](const auto& f) -> Json {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, Fock>) return {{"kind", "fock"}, {"photons", f.photons}};
            else if constexpr (std::is_same_v<F, Coherent>) return {{"kind", "coherent"}, {"mean", f.mean}};
            else return {{"kind", "bose_einstein"}, {"mean", f.mean}};
        },
        sc.field);
    const bool photons_vary = cfg.lyapmap && (cfg.lyapmap->x_axis.name == "photons" || cfg.lyapmap->y_axis.name == "photons");
    if (photons_vary && !sc.n_max) field["n_max"] = "auto";
    else field["n_max"] = sc.truncation();
    Json atom = std::holds_alternative<Excited>(sc.atom)
                    ? Json{{"kind", "excited"}}
                    : Json{{"kind", "superposition"}, {"z_in", std::get<Superposition>(sc.atom).z_in}};

    Json j{{"schema_version", 1},
           {"experiment", to_string(cfg.kind)},
           {"model", {{"delta", sc.params.delta}, {"alpha", sc.params.alpha}}},
           {"field", std::move(field)},
           {"atom", std::move(atom)},
           {"initial", {{"x0", sc.x0}, {"p0", sc.p0}}},
           {"integrator",
            {{"rel_tol", cfg.integrator.rel_tol},
             {"abs_tol", cfg.integrator.abs_tol},
             {"max_step", cfg.integrator.max_step},
             {"reduce_fock", sc.reduce_fock}}},
           {"output", {{"format", cfg.format == OutputFormat::Json ? "json" : "csv"}}},
           {"defaults", {{"conservation_warning", kConservationWarning}, {"truncation_tail", kTruncationTail}}}};

    switch (cfg.kind) {
    case ExperimentKind::Rabi: {
        const auto& s = *cfg.rabi;
        j["rabi"] = {{"grid", {{"t_end", s.t_end}, {"dt", s.dt}}},
                     {"motion", s.motion == RabiSpec::Motion::Static ? "static" : "hybrid"},
                     {"coupling", s.coupling}};
        break;
    }
    case ExperimentKind::LyapMap: {
        const auto& s = *cfg.lyapmap;
        const auto& l = s.lyapunov;
        j["lyapmap"] = {{"grid", {{"x", axis_json(s.x_axis)}, {"y", axis_json(s.y_axis)}}},
                        {"lyapunov",
                         {{"d0", l.d0},
                          {"renorm_interval", l.renorm_interval},
                          {"t_total", l.t_total},
                          {"t_discard", l.discard()},
                          {"overflow_ratio", l.overflow_ratio},
                          {"max_retries", l.max_retries}}}};
        break;
    }
    case ExperimentKind::Poincare: {
        const auto& s = *cfg.poincare;
        j["poincare"] = {{"grid", range_json(s.p0)}, {"t_max", s.t_max}, {"box_bins", s.box_bins}};
        break;
    }
    case ExperimentKind::ZoutZin: {
        const auto& s = *cfg.zoutzin;
        j["zoutzin"] = {{"grid", {{"min", s.z_min}, {"max", s.z_max}, {"step", s.z_step}}}, {"tau", s.tau}};
        break;
    }
    case ExperimentKind::Fractal: {
        const auto& s = *cfg.fractal;
        Json chain = Json::array();
        for (const auto& iv : s.chain) chain.push_back({iv.lo, iv.hi});
        j["fractal"] = {{"grid", range_json(s.p0)},
                        {"geometry", geometry_json(s.geometry)},
                        {"t_max", s.t_max},
                        {"zoom",
                         {{"chain", std::move(chain)},
                          {"resolution", s.zoom.resolution},
                          {"median_half_window", s.zoom.median_half_window},
                          {"singular_factor", s.zoom.singular_factor},
                          {"singular_floor", s.zoom.singular_floor},
                          {"min_smooth_points", s.zoom.min_smooth_points},
                          {"max_children", s.zoom.max_children},
                          {"max_depth", s.max_depth}}}};
        break;
    }
    case ExperimentKind::ExitStats: {
        const auto& s = *cfg.exitstats;
        Json bins{{"scale", s.bins.scale == BinScale::Log ? "log" : "linear"}, {"count", s.bins.bins}};
        bins["lo"] = s.bins.lo ? Json(*s.bins.lo) : Json(nullptr);
        bins["hi"] = s.bins.hi ? Json(*s.bins.hi) : Json(nullptr);
        j["exitstats"] = {{"grid", range_json(s.p0)},
                          {"geometry", geometry_json(s.geometry)},
                          {"t_max", s.t_max},
                          {"bins", std::move(bins)}};
        if (s.fit) j["exitstats"]["fit"] = {{"t_lo", s.fit->lo}, {"t_hi", s.fit->hi}};
        break;
    }
    }
    return j;
}

std::string config_hash(const ExperimentConfig& config)
{
    return io::sha256_hex(config_to_json(config).dump());
}

namespace {

void describe(std::ostream& out, const Field& f, int indent)
{
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    out << pad << f.name << ": " << type_name(f.type);
    if (f.required) out << ", required";
    if (f.lower) out << ", " << (f.lower_open ? "> " : ">= ") << fmt(*f.lower);
    if (f.upper) out << ", <= " << fmt(*f.upper);
    if (!f.choices.empty()) {
        out << ", one of [";
        for (std::size_t i = 0; i < f.choices.size(); ++i) out << (i ? ", " : "") << f.choices[i];
        out << "]";
    }
    if (!f.fallback.empty()) out << ", default " << f.fallback;
    out << "  # " << f.doc << '\n';
    for (const auto& c : f.children) describe(out, c, indent + 1);
}

}  // namespace

std::string schema_text()
{
    std::ostringstream out;
    out << "# cavity-chaos experiment config, schema version 1\n"
           "# One experiment block is required: the one named by `experiment`.\n"
           "# Other experiment blocks are rejected. Unknown fields are rejected.\n"
           "# A Fock field needs `photons`; coherent and bose_einstein need `mean`.\n"
           "# A superposition atom needs `z_in`.\n";
    for (const auto& c : schema().children) describe(out, c, 0);
    return out.str();
}

}  // namespace cavity
