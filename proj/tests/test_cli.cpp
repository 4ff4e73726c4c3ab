// Smoke tests for the command-line tool: exit codes, manifest status, and
// byte-identical CSV output for identical configurations.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {
int failures = 0;

void check(bool ok, const std::string& what) {
  std::cout << (ok ? "ok   " : "FAIL ") << what << "\n";
  if (!ok) ++failures;
}

int run(const std::string& args) {
  const std::string cmd = std::string(CLI_BIN) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}
}  // namespace

int main() {
  const fs::path out = fs::temp_directory_path() / "bloch_cli_test";
  fs::remove_all(out);
  const std::string o = " --out " + out.string();

  check(run("audit --preset free --band 1" + o) == 0, "audit free exits 0");
  {
    std::ifstream f(out / "audit" / "audit.json");
    json a = json::parse(f);
    check(a["critical"].size() == 1 && std::abs(a["critical"][0]["rep"][0].get<double>()) < 1e-6,
          "audit free: critical set is {0}");
    bool conical = a["crossings"].size() == 1 &&
                   a["crossings"][0]["class"]["kind"] == "conical";
    double rep = conical ? std::abs(a["crossings"][0]["rep"][0].get<double>()) : 0.0;
    check(conical && std::abs(rep - 3.14159265) < 1e-6, "audit free: conical crossing at pi");
    json m = json::parse(std::ifstream(out / "audit" / "manifest.json"));
    check(m["status"] == "ok" && !m["config_hash"].get<std::string>().empty() &&
              m["tolerances"].contains("grad_tol"),
          "audit manifest complete");
  }

  check(run("discriminant --preset mathieu5 --range -6:60 --samples 51" + o) == 0,
        "discriminant exits 0");
  check(fs::exists(out / "discriminant" / "plot_discriminant.py"), "plot script emitted");

  check(run("bands --preset mathieu5 --n-bands 2 --res 8" + o) == 0, "bands exits 0");
  check(run("decompose --preset mathieu5 --eps 0.125 --modes 4" + o) == 0, "decompose exits 0");

  const std::string ev =
      "evolve --preset mathieu5 --eps 0.125 --scheme bloch_strang --tfinal 0.02 --dt 1e-3 "
      "--vext bump" + o;
  check(run(ev) == 0, "evolve exits 0");
  const std::string first = slurp(out / "evolve" / "density.csv");
  check(run(ev) == 0, "evolve rerun exits 0");
  check(!first.empty() && first == slurp(out / "evolve" / "density.csv"),
        "identical config gives byte-identical CSV");

  check(run("evolve --preset mathieu5 --eps 0.125 --scheme fourier_split --tfinal 0.2 --dt 0.1" +
            o) == 2,
        "stiffness-bound violation exits 2");
  check(run("bands --preset nosuch" + o) == 2, "unknown preset exits 2");
  {
    json m = json::parse(std::ifstream(out / "bands" / "manifest.json"));
    check(m["status"] == "FAILED", "failed run leaves FAILED manifest");
  }
  check(run("evolve --preset mathieu5 --eps 0.125 --scheme bloch_strang --tfinal 0.02 "
            "--dt 1e-3 --n-modes 1" + o) == 3,
        "mode-tail refusal exits 3");

  std::cout << (failures == 0 ? "all CLI checks passed\n" : "CLI checks FAILED\n");
  return failures;
}
