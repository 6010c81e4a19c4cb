// fbtransport: flat-band transport experiments on diluted sawtooth and stub rings.
//
//   fbtransport sigma run.yaml -o sigma.csv
//   fbtransport dos run.yaml --format json
//   fbtransport replay sigma.csv -o again.csv
//
// Exit codes: 0 success, 1 compute failure, 2 configuration error.
// FBT_THREADS overrides the worker count.

#include "fbt/commands.hpp"
#include "fbt/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct Overrides {
    std::string output;
    std::string format;
    std::optional<std::uint64_t> seed;
    int verbose = 0;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("-o,--output", o.output, "output file (overrides output.path; '-' for stdout)");
    sub->add_option("--format", o.format, "csv or json (overrides output.format)")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", o.seed, "master seed (overrides ensemble.master_seed)");
    sub->add_flag("-v,--verbose", o.verbose, "progress on stderr; repeat for more");
}

void apply(fbt::RunConfig& c, const Overrides& o) {
    if (!o.output.empty()) c.output_path = o.output;
    if (!o.format.empty()) c.format = o.format == "json" ? fbt::OutputFormat::JSON : fbt::OutputFormat::CSV;
    if (o.seed) c.master_seed = *o.seed;
    c.verbosity = std::max(c.verbosity, o.verbose);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flat-band conductivity, DOS and quantum metric of diluted flat-band rings"};
    app.set_version_flag("--version", fbt::version());
    app.require_subcommand(1);

    Overrides o;
    std::string config_path, replay_path;
    std::optional<fbt::Command> chosen;
    for (auto cmd : {fbt::Command::DOS, fbt::Command::Sigma, fbt::Command::Metric, fbt::Command::Analytic}) {
        static const char* help[] = {"density of states and flat-band weight",
                                     "Kubo-Greenwood conductivity with analytic overlays",
                                     "quantum metric and spread of the flat-band states",
                                     "closed-form predictions only, no simulation"};
        auto* sub = app.add_subcommand(fbt::to_string(cmd), help[static_cast<int>(cmd)]);
        sub->add_option("config", config_path, "YAML run configuration")->required();
        add_common(sub, o);
        sub->callback([&chosen, cmd] { chosen = cmd; });
    }
    auto* rep = app.add_subcommand("replay", "re-run the experiment recorded in a result file");
    rep->add_option("results", replay_path, "CSV or JSON result file")->required();
    add_common(rep, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    fbt::RunConfig config;
    std::optional<fbt::ResultTable> recorded;
    try {
        if (chosen) {
            config = fbt::load_config(config_path);
        } else {
            recorded = fbt::read_table(replay_path);
            const std::string* cmd = recorded->meta("command");
            if (!cmd) throw fbt::ConfigError("command", "result file does not record a command");
            chosen = fbt::parse_command(*cmd);
            config = fbt::config_from_pairs(recorded->metadata);
        }
        apply(config, o);
        config.validate();
    } catch (const fbt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const fbt::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        const fbt::ResultTable table = fbt::run_command(*chosen, config, &std::cerr);
        fbt::write_table(table, config.output_path, config.format);
    } catch (const fbt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
