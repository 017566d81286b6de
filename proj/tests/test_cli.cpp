#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kCli = CAVITY_CLI;
const fs::path kSource = CAVITY_SOURCE_DIR;

struct Sandbox {
    fs::path dir;
    Sandbox()
    {
        dir = fs::temp_directory_path() / "cavity_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }

    fs::path write(const std::string& name, const std::string& text) const
    {
        std::ofstream(dir / name) << text;
        return dir / name;
    }
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Exit status of the CLI; stdout and stderr land in `log`.
int run(const std::string& args, const fs::path& log)
{
    const std::string cmd = "'" + kCli.string() + "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

const char* const kRabi = R"(schema_version: 1
experiment: rabi
model: {delta: 0.0, alpha: 0.001}
field: {kind: fock, photons: 4}
atom: {kind: excited}
rabi:
  motion: static
  grid: {t_end: 10, dt: 0.5}
)";

const char* const kExits = R"(schema_version: 1
experiment: exitstats
model: {delta: 0.4, alpha: 0.001}
field: {kind: fock, photons: 10}
atom: {kind: superposition, z_in: 0}
exitstats:
  grid: {min: 40, max: 41, count: 12}
  t_max: 2000
  bins: {scale: log, count: 8}
output: {format: json}
)";

}  // namespace

TEST_CASE("a rabi run writes CSV with a metadata sidecar")
{
    Sandbox box;
    const auto cfg = box.write("rabi.yaml", kRabi);
    const auto out = box.dir / "rabi.csv";
    REQUIRE(run("rabi --config '" + cfg.string() + "' --out '" + out.string() + "'", box.dir / "log") == 0);

    const std::string csv = slurp(out);
    CHECK(csv.rfind("tau,z,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 22);

    const auto meta = nlohmann::json::parse(slurp(out.string() + ".meta.json"));
    CHECK(meta["experiment"] == "rabi");
    CHECK(meta["config_hash"].get<std::string>().size() == 64);
    CHECK(meta["parameters"]["field"]["photons"] == 4);
    CHECK(slurp(box.dir / "log").find("wrote") != std::string::npos);
}

TEST_CASE("output does not depend on the thread count")
{
    Sandbox box;
    const auto cfg = box.write("exits.yaml", kExits);
    const auto one = box.dir / "one.json", two = box.dir / "two.json";
    REQUIRE(run("exitstats --config '" + cfg.string() + "' --threads 1 --out '" + one.string() + "'", box.dir / "l1") == 0);
    REQUIRE(run("exitstats --config '" + cfg.string() + "' --threads 2 --out '" + two.string() + "'", box.dir / "l2") == 0);
    const std::string a = slurp(one);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(two));
    CHECK(nlohmann::json::parse(a)["schema_version"].is_number_integer());
}

TEST_CASE("a broken config fails before anything is written")
{
    Sandbox box;
    std::string text = kRabi;
    text.replace(text.find("  grid: {t_end: 10, dt: 0.5}\n"), std::string("  grid: {t_end: 10, dt: 0.5}\n").size(), "");
    const auto cfg = box.write("bad.yaml", text);
    const auto out = box.dir / "bad.csv";
    CHECK(run("rabi --config '" + cfg.string() + "' --out '" + out.string() + "'", box.dir / "log") != 0);
    CHECK_FALSE(fs::exists(out));
    CHECK_FALSE(fs::exists(out.string() + ".meta.json"));
    const std::string log = slurp(box.dir / "log");
    CHECK(log.find("rabi.grid") != std::string::npos);
    CHECK(log.find("bad.yaml:6:") != std::string::npos);
}

TEST_CASE("experiment name must match the config")
{
    Sandbox box;
    const auto cfg = box.write("rabi.yaml", kRabi);
    CHECK(run("fractal --config '" + cfg.string() + "' --out '" + (box.dir / "x.csv").string() + "'", box.dir / "log") == 2);
    CHECK_FALSE(fs::exists(box.dir / "x.csv"));
    CHECK(run("chaos --config '" + cfg.string() + "'", box.dir / "log") != 0);
    CHECK(run("rabi --config '" + (box.dir / "absent.yaml").string() + "'", box.dir / "log") != 0);
}

TEST_CASE("printed schema is the committed one")
{
    Sandbox box;
    REQUIRE(run("--print-schema", box.dir / "schema") == 0);
    CHECK(slurp(box.dir / "schema") == slurp(kSource / "schema" / "config.schema.txt"));
}
