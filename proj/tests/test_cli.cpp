#include "doctest.h"

#include "fbt/analytic.hpp"
#include "fbt/commands.hpp"
#include "fbt/config.hpp"
#include "fbt/errors.hpp"
#include "fbt/flatband.hpp"
#include "fbt/output.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace fbt;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("fbt_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
    const fs::path p = scratch() / name;
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code;
    std::string err;
};

Run cli(const std::string& args, const std::string& env = "") {
    const fs::path err = scratch() / "stderr.txt";
    const std::string cmd = env + " " + FBT_CLI_PATH + " " + args + " 2> " + err.string() + " > /dev/null";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::vector<std::string> numeric_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

const ResultRow* find(const ResultTable& t, const std::string& obs, Real x = -1) {
    for (const auto& r : t.rows)
        if (r.observable == obs && (x < 0 || std::abs(r.x - x) < 1e-12)) return &r;
    return nullptr;
}

const char* kSigmaYaml = R"(lattice:
  kind: sawtooth
  n_cells: 400
disorder: {mode: random}
ensemble: {n_configs: 3, master_seed: 11}
cpgf: {eta: 0.01, random_vectors: 3}
sweep: {variable: x, values: [0.5, 0.8]}
)";

}  // namespace

TEST_CASE("config: nested and dotted keys are equivalent") {
    const RunConfig a = parse_config(kSigmaYaml);
    const RunConfig b = parse_config(
        "lattice.kind: sawtooth\nlattice.n_cells: 400\ndisorder.mode: random\nensemble.n_configs: 3\n"
        "ensemble.master_seed: 11\ncpgf.eta: 0.01\ncpgf.random_vectors: 3\nsweep.variable: x\n"
        "sweep.values: [0.5, 0.8]\n");
    CHECK(a.to_pairs() == b.to_pairs());
    CHECK(config_from_pairs(a.to_pairs()).to_pairs() == a.to_pairs());
    CHECK_FALSE(a.cpgf.moments.has_value());
    CHECK(parse_config("lattice: {kind: stub, n_cells: 10}\ncpgf.moments: 500\n").cpgf.moments == 500);
    CHECK(parse_config("lattice: {kind: stub, n_cells: 10}\ndisorder.y: 0.25\n").x == doctest::Approx(0.75));
}

TEST_CASE("config: errors carry the key path") {
    auto key_of = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return e.key_path();
        }
        return std::string("<none>");
    };
    CHECK(key_of("lattice: {kind: stub, n_cells: 10, colour: red}\n") == "lattice.colour");
    CHECK(key_of("lattice: {kind: hexagon, n_cells: 10}\n") == "lattice.kind");
    CHECK(key_of("lattice: {kind: stub, n_cells: 10}\ndisorder: {x: 1.5}\n") == "disorder.x");
    CHECK(key_of("lattice: {kind: stub, n_cells: 10}\ndisorder: {x: 0.1, y: 0.2}\n") == "disorder.y");
    CHECK(key_of("lattice: {kind: stub, n_cells: 10}\ncpgf: {eta: -1}\n") == "cpgf.eta");
    CHECK(key_of("lattice: {kind: stub, n_cells: 10}\ncpgf: {moments: lots}\n") == "cpgf.moments");
    CHECK(key_of("lattice: {kind: sawtooth, n_cells: 10, alpha: 1}\n") == "lattice.alpha");
    CHECK(key_of("lattice: {kind: sawtooth, n_cells: 10}\nsweep: {variable: x, values: []}\n") == "sweep.values");
    CHECK(key_of("lattice: {kind: sawtooth, n_cells: 10}\nsweep: {variable: alpha, values: [1]}\n") ==
          "sweep.variable");
    CHECK(key_of("lattice: {kind: stub, n_cells: 10}\noutput: {format: xml}\n") == "output.format");
    CHECK(key_of("lattice: [1, 2]\n") == "lattice");
}

TEST_CASE("output: CSV and JSON carry the same table") {
    ResultTable t;
    t.metadata = {{"command", "sigma"}, {"note", "a: b"}};
    ResultRow r;
    r.run_id = "abc";
    r.lattice = "stub";
    r.n_cells = 10;
    r.x = 0.1;
    r.alpha = 0.3;
    r.eta = 1e-3;
    r.moments = 100;
    r.seed = 18446744073709551615ULL;
    r.energy = -0.25;
    r.observable = "sigma";
    r.value = 1.0 / 3;
    t.rows = {r};
    r.stderr = 0.5;
    r.moments.reset();
    r.energy.reset();
    t.rows.push_back(r);

    std::stringstream csv, json;
    write_csv(t, csv);
    write_json(t, json);
    const std::string text = csv.str();
    CHECK(text.find("\n" + csv_header() + "\n") != std::string::npos);
    const ResultTable a = read_csv(csv), b = read_json(json);
    REQUIRE(a.rows.size() == 2);
    REQUIRE(b.rows.size() == 2);
    CHECK(a.metadata == t.metadata);
    CHECK(b.metadata == t.metadata);
    for (const auto* tab : {&a, &b}) {
        CHECK(tab->rows[0].value == 1.0 / 3);
        CHECK(tab->rows[0].seed == r.seed);
        CHECK(tab->rows[0].energy == -0.25);
        CHECK_FALSE(tab->rows[0].stderr.has_value());
        CHECK(tab->rows[1].stderr == 0.5);
        CHECK_FALSE(tab->rows[1].moments.has_value());
    }
    std::stringstream bad("run_id,lattice\n");
    CHECK_THROWS_AS(read_csv(bad), ConfigError);
}

TEST_CASE("cli: exit codes") {
    CHECK(cli("--help").code == 0);
    CHECK(cli("").code == 2);
    CHECK(cli("sigma " + (scratch() / "missing.yaml").string()).code == 2);

    const auto empty = write_file("empty.yaml", "lattice: {kind: sawtooth, n_cells: 30}\nsweep: {variable: x, values: []}\n");
    const Run e = cli("dos " + empty.string());
    CHECK(e.code == 2);
    CHECK(e.err.find("sweep.values") != std::string::npos);

    const auto unknown = write_file("unknown.yaml", "lattice: {kind: stub, n_cells: 30}\nensemble: {size: 3}\n");
    const Run u = cli("sigma " + unknown.string());
    CHECK(u.code == 2);
    CHECK(u.err.find("ensemble.size") != std::string::npos);

    // Every realization at x = 1 has no flat-band state to build: a compute failure.
    const auto none = write_file("none.yaml", "lattice: {kind: sawtooth, n_cells: 30}\ndisorder: {x: 1}\n");
    const Run n = cli("metric " + none.string() + " -o " + (scratch() / "none.csv").string());
    CHECK(n.code == 1);
    CHECK(n.err.find("every realization failed") != std::string::npos);
}

TEST_CASE("cli: schema, determinism and replay") {
    const auto cfg = write_file("sigma.yaml", kSigmaYaml);
    const fs::path a = scratch() / "a.csv", b = scratch() / "b.csv", c = scratch() / "c.csv",
                   j = scratch() / "a.json", r = scratch() / "r.csv", s = scratch() / "s.csv";
    REQUIRE(cli("sigma " + cfg.string() + " -o " + a.string(), "FBT_THREADS=1").code == 0);
    REQUIRE(cli("sigma " + cfg.string() + " -o " + b.string(), "FBT_THREADS=2").code == 0);
    REQUIRE(cli("sigma " + cfg.string() + " --format json -o " + j.string()).code == 0);
    CHECK(slurp(a) == slurp(b));

    const auto lines = numeric_lines(slurp(a));
    REQUIRE(!lines.empty());
    CHECK(lines.front() == "run_id,lattice,n_cells,x,alpha,eta,moments,rvecs,seed,E,observable,value,stderr");

    const ResultTable ta = read_table(a.string());
    const ResultTable tj = read_table(j.string());
    REQUIRE(ta.rows.size() == tj.rows.size());
    for (std::size_t i = 0; i < ta.rows.size(); ++i) {
        CHECK(ta.rows[i].observable == tj.rows[i].observable);
        CHECK(ta.rows[i].value == tj.rows[i].value);
    }
    CHECK(*ta.meta("command") == "sigma");
    CHECK(ta.meta("seeds.0") != nullptr);
    CHECK(ta.meta("version") != nullptr);

    // Numeric and analytic rows sit side by side for each grid point.
    for (Real x : {0.5, 0.8}) {
        const ResultRow* num = find(ta, "sigma", x);
        REQUIRE(num != nullptr);
        CHECK(num->stderr.has_value());
        CHECK(num->moments.has_value());
        CHECK(num->rvecs == 3);
        REQUIRE(find(ta, "sigma_sc_random", x) != nullptr);
        CHECK(find(ta, "sigma_sc_random", x)->value == doctest::Approx(1 / (3 * (1 - x))));
        CHECK(find(ta, "sigma_sc_ordered", x) != nullptr);
    }

    // Re-running from the embedded metadata reproduces every numeric column.
    REQUIRE(cli("replay " + a.string() + " -o " + r.string()).code == 0);
    CHECK(numeric_lines(slurp(r)) == numeric_lines(slurp(a)));
    REQUIRE(cli("replay " + j.string() + " -o " + c.string()).code == 0);
    CHECK(numeric_lines(slurp(c)) == numeric_lines(slurp(a)));

    // --seed overrides the master seed and is recorded.
    REQUIRE(cli("sigma " + cfg.string() + " --seed 12 -o " + s.string()).code == 0);
    const ResultTable ts = read_table(s.string());
    CHECK(*ts.meta("ensemble.master_seed") == "12");
    CHECK(*ts.meta("seeds.0") != *ta.meta("seeds.0"));
    CHECK(find(ts, "sigma", 0.5)->value != find(ta, "sigma", 0.5)->value);
}

TEST_CASE("dos: sawtooth flat-band weight follows the survivors") {
    const RunConfig c = parse_config(
        "lattice: {kind: sawtooth, n_cells: 2000}\ndisorder: {x: 0.15}\nensemble: {n_configs: 2}\n"
        "cpgf: {eta: 0.01, random_vectors: 6}\nenergy: {min: -4.5, max: 2.5, points: 701}\n");
    const ResultTable t = run_command(Command::DOS, c);
    const ResultRow* w = find(t, "fb_weight");
    REQUIRE(w != nullptr);
    CHECK(w->value == doctest::Approx(0.85).epsilon(0.02 / 0.85));
    CHECK(find(t, "fb_weight_expected")->value == doctest::Approx(0.85));
    int dos_rows = 0;
    for (const auto& r : t.rows) dos_rows += r.observable == "dos";
    CHECK(dos_rows == 701);
}

TEST_CASE("dos: clean stub is symmetric with a gap of |alpha|") {
    const Real eta = 0.01;
    const RunConfig c = parse_config(
        "lattice: {kind: stub, n_cells: 300, alpha: 0.5}\ncpgf: {eta: 0.01, exact_trace: true}\n"
        "energy: {min: -3, max: 3, points: 601}\n");
    const ResultTable t = run_command(Command::DOS, c);
    std::map<long, Real> dos;
    for (const auto& r : t.rows)
        if (r.observable == "dos") dos[std::lround(*r.energy * 100)] = r.value;
    Real asym = 0.0, peak = 0.0;
    for (const auto& [k, v] : dos) {
        asym = std::max(asym, std::abs(v - dos.at(-k)));
        peak = std::max(peak, v);
    }
    CHECK(asym < 1e-8 * peak);
    // Inside the gap only Lorentzian tails remain once the unit-weight flat band is removed.
    for (const auto& [k, v] : dos) {
        const Real e = k / 100.0;
        const Real fb = eta / (kPi * (e * e + eta * eta));
        if (std::abs(e) > 10 * eta && std::abs(e) < 0.5 - 10 * eta) CHECK(v - fb < 0.05);
    }
    CHECK(dos.at(52) > 0.5);
    CHECK(dos.at(-52) > 0.5);
}

TEST_CASE("metric: dilute sawtooth averages") {
    const RunConfig random = parse_config(
        "lattice: {kind: sawtooth, n_cells: 50000}\ndisorder: {y: 0.1}\nensemble: {n_configs: 4}\n");
    const ResultTable t = run_command(Command::Metric, random);
    CHECK(find(t, "mean_metric")->value == doctest::Approx(1 / (6 * 0.01)).epsilon(0.05));
    CHECK(find(t, "qm_avg_random")->value == doctest::Approx(16.6667).epsilon(1e-4));
    CHECK(find(t, "sigma_metric")->value / find(t, "sigma_spread")->value == doctest::Approx(1.0).epsilon(0.01));
    CHECK_FALSE(find(t, "mean_metric")->moments.has_value());

    // Superlattice spacing 10: the exact segment metric is 9.79, above the leading m²/12 = 8.33.
    const RunConfig ordered = parse_config(
        "lattice: {kind: sawtooth, n_cells: 1000}\ndisorder: {y: 0.1, mode: superlattice}\n");
    const ResultTable o = run_command(Command::Metric, ordered);
    CHECK(find(o, "mean_metric")->value == doctest::Approx(metric_sawtooth_segment(10)));
    CHECK(find(o, "qm_avg_ordered")->value == doctest::Approx(8.3333).epsilon(1e-4));
}

TEST_CASE("sigma: exact diagonalization and CPGF agree") {
    const std::string base =
        "lattice: {kind: stub, n_cells: 200, alpha: 0.8}\ndisorder: {x: 0.5}\nensemble: {n_configs: 2}\n"
        "cpgf: {eta: 0.02, exact_trace: true}\n";
    const ResultTable cp = run_command(Command::Sigma, parse_config(base + "ensemble.method: cpgf\n"));
    const ResultTable ed = run_command(Command::Sigma, parse_config(base + "ensemble.method: exactdiag\n"));
    CHECK(find(cp, "sigma")->value == doctest::Approx(find(ed, "sigma")->value).epsilon(0.02));
    CHECK_FALSE(find(ed, "sigma")->moments.has_value());
}

TEST_CASE("sigma: bare chain energy sweep carries the Drude overlay") {
    const RunConfig c = parse_config(
        "lattice: {kind: sawtooth, n_cells: 1000}\ndisorder: {x: 1}\ncpgf: {eta: 0.05, exact_trace: true}\n"
        "sweep: {variable: E, values: [-1, 0, 1]}\n");
    const ResultTable t = run_command(Command::Sigma, c);
    for (const auto& r : t.rows)
        if (r.observable == "sigma" && *r.energy == 0.0) CHECK(r.value == doctest::Approx(20.0).epsilon(0.05));
    CHECK(find(t, "drude_chain") != nullptr);
    CHECK_THROWS_AS(run_command(Command::Sigma, parse_config("lattice: {kind: sawtooth, n_cells: 30}\n"
                                                             "ensemble.method: fbstates\n"
                                                             "sweep: {variable: E, values: [0]}\n")),
                    ConfigError);
}

TEST_CASE("analytic: prediction tables") {
    const ResultTable y = run_command(
        Command::Analytic, parse_config("lattice: {kind: sawtooth, n_cells: 10}\nsweep: {variable: y, values: [0.05, 0.1, 0.2]}\n"));
    int n = 0;
    for (const auto& r : y.rows)
        if (r.observable == "sigma_sc_random") {
            CHECK(r.value == doctest::Approx(1 / (3 * (1 - r.x))));
            ++n;
        }
    CHECK(n == 3);

    const ResultTable a = run_command(
        Command::Analytic, parse_config("lattice: {kind: stub, n_cells: 10}\nsweep: {variable: alpha, values: [0, 0.5, 1, 2]}\n"));
    std::vector<Real> clean;
    for (const auto& r : a.rows)
        if (r.observable == "sigma_sl_clean") clean.push_back(r.value);
    REQUIRE(clean.size() == 3);
    CHECK(clean[0] == doctest::Approx(0.9701).epsilon(1e-4));
    CHECK(clean[1] == doctest::Approx(0.4472).epsilon(1e-4));
    CHECK(clean[2] == doctest::Approx(0.1768).epsilon(1e-3));
    const std::string* err = a.meta("error.0");
    REQUIRE(err != nullptr);
    CHECK(err->find("drude_chain") != std::string::npos);
}
